use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Isotropic Hooke's law in plane strain, Voigt order `(ε11, ε22, 2ε12)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsotropicHooke {
    pub young: f64,
    pub poisson: f64,
    pub voigt: [[f64; 3]; 3],
}

impl IsotropicHooke {
    pub fn plane_strain(young: f64, poisson: f64) -> Result<Self> {
        if !(young > 0.0 && young.is_finite()) {
            return Err(invalid(format!(
                "Young's modulus must be positive, got {young}"
            )));
        }
        if !(poisson > 0.0 && poisson < 0.5) && poisson != 0.0 {
            return Err(invalid(format!(
                "Poisson ratio must satisfy 0 <= nu < 0.5, got {poisson}"
            )));
        }
        let c = young / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
        let voigt = [
            [c * (1.0 - poisson), c * poisson, 0.0],
            [c * poisson, c * (1.0 - poisson), 0.0],
            [0.0, 0.0, c * (1.0 - 2.0 * poisson) / 2.0],
        ];
        Ok(Self {
            young,
            poisson,
            voigt,
        })
    }

    /// Stress (Voigt) for an engineering strain vector.
    pub fn stress(&self, strain: [f64; 3]) -> [f64; 3] {
        let d = &self.voigt;
        [
            d[0][0] * strain[0] + d[0][1] * strain[1] + d[0][2] * strain[2],
            d[1][0] * strain[0] + d[1][1] * strain[1] + d[1][2] * strain[2],
            d[2][0] * strain[0] + d[2][1] * strain[1] + d[2][2] * strain[2],
        ]
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::plane_strain(self.young * factor, self.poisson)
    }
}

/// Symmetric in-plane strain tensor.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SymStrain {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

impl SymStrain {
    pub fn new(xx: f64, yy: f64, xy: f64) -> Self {
        Self { xx, yy, xy }
    }

    pub fn from_matrix(m: [[f64; 2]; 2]) -> Result<Self> {
        if m[0][1] != m[1][0] {
            return Err(invalid(format!(
                "spontaneous strain must be symmetric, got off-diagonals {} and {}",
                m[0][1], m[1][0]
            )));
        }
        Ok(Self::new(m[0][0], m[1][1], m[0][1]))
    }

    pub fn to_matrix(self) -> [[f64; 2]; 2] {
        [[self.xx, self.xy], [self.xy, self.yy]]
    }

    /// Engineering Voigt vector `(ε11, ε22, 2ε12)`.
    pub fn voigt(self) -> [f64; 3] {
        [self.xx, self.yy, 2.0 * self.xy]
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(s * self.xx, s * self.yy, s * self.xy)
    }

    pub fn is_zero(self) -> bool {
        self.xx == 0.0 && self.yy == 0.0 && self.xy == 0.0
    }
}

/// Structural and responsive materials plus the two stimulus values compared
/// by the objectives.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialPair {
    pub structural: IsotropicHooke,
    pub responsive: IsotropicHooke,
    /// Spontaneous strain of the responsive material at `S = 1`.
    pub eps_star: SymStrain,
    pub s1: f64,
    pub s2: f64,
}

impl MaterialPair {
    pub fn new(
        structural: IsotropicHooke,
        responsive: IsotropicHooke,
        eps_star: SymStrain,
    ) -> Self {
        Self {
            structural,
            responsive,
            eps_star,
            s1: 0.0,
            s2: 1.0,
        }
    }

    /// `ε*(S) = S ε*(1)`, so `ε*(0) = 0`.
    pub fn eps_star_at(&self, s: f64) -> SymStrain {
        self.eps_star.scale(s)
    }

    /// Responsive modulus at stimulus `s`. Stimulus-independent for now; the
    /// stiffness factorization is shared between stimuli on that basis.
    pub fn responsive_at(&self, _s: f64) -> &IsotropicHooke {
        &self.responsive
    }

    pub fn equal_moduli(&self) -> bool {
        self.structural.voigt == self.responsive.voigt
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_poisson_decouples() {
        let h = IsotropicHooke::plane_strain(1.0, 0.0).unwrap();
        assert_eq!(h.voigt, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.5]]);
    }

    #[test]
    fn formula_value() {
        let h = IsotropicHooke::plane_strain(1.0, 0.3).unwrap();
        assert_relative_eq!(h.voigt[0][0], 1.346153846153846, epsilon = 1e-12);
        assert_relative_eq!(h.voigt[0][1], 0.576923076923077, epsilon = 1e-12);
        assert_relative_eq!(h.voigt[2][2], 0.384615384615385, epsilon = 1e-12);
    }

    #[test]
    fn linear_in_young() {
        let a = IsotropicHooke::plane_strain(1.0, 0.3).unwrap();
        let b = IsotropicHooke::plane_strain(10.0, 0.3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(b.voigt[i][j], 10.0 * a.voigt[i][j], max_relative = 1e-15);
            }
        }
    }

    #[test]
    fn rejects_incompressible_and_bad_modulus() {
        assert!(IsotropicHooke::plane_strain(1.0, 0.5).is_err());
        assert!(IsotropicHooke::plane_strain(1.0, 0.55).is_err());
        assert!(IsotropicHooke::plane_strain(1.0, -0.1).is_err());
        assert!(IsotropicHooke::plane_strain(0.0, 0.3).is_err());
    }

    #[test]
    fn voigt_is_spd() {
        for nu in [0.0, 0.1, 0.3, 0.45, 0.499] {
            let d = IsotropicHooke::plane_strain(2.0, nu).unwrap().voigt;
            // Leading principal minors.
            let m1 = d[0][0];
            let m2 = d[0][0] * d[1][1] - d[0][1] * d[1][0];
            let m3 = m2 * d[2][2];
            assert!(m1 > 0.0 && m2 > 0.0 && m3 > 0.0, "nu={nu}");
        }
    }

    #[test]
    fn eps_star_interpolation() {
        let h = IsotropicHooke::plane_strain(1.0, 0.3).unwrap();
        let m = MaterialPair::new(h, h, SymStrain::new(-0.1, 0.1, 0.0));
        assert!(m.eps_star_at(0.0).is_zero());
        assert_eq!(m.eps_star_at(0.5), SymStrain::new(-0.05, 0.05, 0.0));
        assert!(SymStrain::from_matrix([[0.0, 1.0], [2.0, 0.0]]).is_err());
    }
}
