mod common;

use common::*;
use respotopt::objectives::ResponsiveProblem;
use respotopt::{FilterOperator, Grid, ObjectiveKind};

fn scaled_load(p: &ResponsiveProblem, c: f64) -> ResponsiveProblem {
    let grid = Grid::new(p.grid.nx, p.grid.ny, p.grid.length, p.grid.height)
        .unwrap()
        .with_cantilever_bcs(c);
    let filter = FilterOperator::with_radius_in_elements(&grid, 1.5).unwrap();
    ResponsiveProblem::new(grid, p.mats.clone(), filter, p.penalty)
}

#[test]
fn blocking_load_equals_one_minus_ratio() {
    let p = cantilever(16, 8, 2.0, 1.0, 0.3);
    let mut r = rng(2);
    let profile = p.grid.load_vector();
    for _ in 0..10 {
        let d = random_voids(128, &mut r);
        let rep = p.evaluate(ObjectiveKind::BlockingLoad, &d).unwrap();
        let alpha = p.blocking_load_direct(&d, &profile).unwrap();
        assert!((alpha - (1.0 - rep.c1 / rep.c0)).abs() <= 1e-10);
        assert!((rep.alpha.unwrap() - alpha).abs() <= 1e-10);
    }
}

/// Scaling the traction by `c` scales the blocking load by `1/c` and the
/// actuation work by `c`; the compliance ratio is not scale invariant.
#[test]
fn traction_scaling_laws() {
    let p = cantilever(12, 6, 2.0, 1.0, 0.5);
    let d = random_solid(72, &mut rng(6));
    let base = p.evaluate(ObjectiveKind::ActuationWork, &d).unwrap();
    for c in [0.5, 3.0] {
        let q = scaled_load(&p, c);
        let rep = q.evaluate(ObjectiveKind::ActuationWork, &d).unwrap();
        assert!((rep.value - c * base.value).abs() <= 1e-10 * base.value.abs());
        assert!((rep.c0 - c * c * base.c0).abs() <= 1e-12 * rep.c0);
        let a = q.blocking_load_direct(&d, &q.grid.load_vector()).unwrap();
        assert!((a - base.alpha.unwrap() / c).abs() <= 1e-10 * a.abs());
    }
}

#[test]
fn workpiece_limits() {
    let p = cantilever(12, 6, 2.0, 1.0, 0.5);
    let mut r = rng(12);
    for _ in 0..5 {
        let d = random_solid(72, &mut r);
        let rep = p.evaluate(ObjectiveKind::BlockingLoad, &d).unwrap();
        let (c0, c1) = (rep.c0, rep.c1);
        let k = 1e-6;
        let small = ObjectiveKind::Workpiece { kappa: k }.value(c0, c1);
        assert!((small - (1.0 + k * (c1 - c0))).abs() <= 10.0 * k * k * (c0 * c1).abs());
        let large = ObjectiveKind::Workpiece { kappa: 1e6 }.value(c0, c1);
        assert!((large - c1 / c0).abs() <= 1e-4);
    }
}

/// The spring force at the load point is `1 - O` for a unit load.
#[test]
fn spring_force_is_one_minus_objective() {
    let p = cantilever(10, 5, 2.0, 1.0, 2.0);
    let node = p.grid.node_index(p.grid.nx, 0);
    let mut r = rng(13);
    for kappa in [1e-3, 1.0, 50.0] {
        let d = random_voids(50, &mut r);
        let o = p
            .evaluate(ObjectiveKind::Workpiece { kappa }, &d)
            .unwrap()
            .value;
        let f0 = p
            .workpiece_spring_force(&d, kappa, node, [0.0, -1.0])
            .unwrap();
        assert!((f0 - (1.0 - o)).abs() <= 1e-12, "kappa {kappa}");
    }
    // Stiff spring: the force approaches the blocking load.
    let d = random_solid(50, &mut r);
    let alpha = p
        .evaluate(ObjectiveKind::BlockingLoad, &d)
        .unwrap()
        .alpha
        .unwrap();
    let f0 = p
        .workpiece_spring_force(&d, 1e9, node, [0.0, -1.0])
        .unwrap();
    assert!((f0 - alpha).abs() <= 1e-6 * alpha.abs().max(1e-3));
}

#[test]
fn equal_moduli_compliance_is_design_independent() {
    let p = cantilever(12, 6, 2.0, 1.0, 1.0);
    let mut r = rng(14);
    let mut c0s = Vec::new();
    for _ in 0..10 {
        let d = random_solid(72, &mut r);
        c0s.push(p.evaluate(ObjectiveKind::BlockingLoad, &d).unwrap().c0);
    }
    let lo = c0s.iter().cloned().fold(f64::MAX, f64::min);
    let hi = c0s.iter().cloned().fold(f64::MIN, f64::max);
    assert!((hi - lo) / lo <= 1e-12);
}

#[test]
fn degenerate_profile_is_reported() {
    let p = cantilever(4, 2, 2.0, 1.0, 1.0);
    let d = random_solid(8, &mut rng(1));
    let zero = vec![0.0; p.grid.num_dofs()];
    assert!(matches!(
        p.blocking_load_direct(&d, &zero),
        Err(respotopt::Error::DegenerateLoad(_))
    ));
}

#[test]
fn stiffening_both_materials_softens_compliance() {
    let p = cantilever(10, 5, 2.0, 1.0, 0.3);
    let d = random_voids(50, &mut rng(15));
    let c = 4.0;
    let mut q = p.clone();
    q.mats.structural = q.mats.structural.scaled(c).unwrap();
    q.mats.responsive = q.mats.responsive.scaled(c).unwrap();
    let a = p.evaluate(ObjectiveKind::BlockingLoad, &d).unwrap().c0;
    let b = q.evaluate(ObjectiveKind::BlockingLoad, &d).unwrap().c0;
    assert!((b - a / c).abs() <= 1e-12 * a);
}

#[test]
fn blocking_load_linear_in_eigenstrain() {
    let p = cantilever(10, 5, 2.0, 1.0, 0.3);
    let d = random_voids(50, &mut rng(16));
    let profile = p.grid.load_vector();
    let mut q = p.clone();
    q.mats.eps_star = q.mats.eps_star.scale(2.0);
    let a = p.blocking_load_direct(&d, &profile).unwrap();
    let b = q.blocking_load_direct(&d, &profile).unwrap();
    assert!((b - 2.0 * a).abs() <= 1e-12 * a.abs());
}

#[test]
fn spring_force_limits_and_ordering() {
    let p = cantilever(8, 8, 1.0, 1.0, 0.5);
    let node = p.grid.node_index(p.grid.nx, 0);
    let mut r = rng(17);
    let d = random_solid(64, &mut r);

    let mut inert = p.clone();
    inert.mats.eps_star = respotopt::SymStrain::default();
    assert_eq!(
        inert
            .workpiece_spring_force(&d, 1.0, node, [0.0, -1.0])
            .unwrap(),
        0.0
    );

    let blocking = p.blocking_load_direct(&d, &p.grid.load_vector()).unwrap();
    let stiff = p
        .workpiece_spring_force(&d, 1e8, node, [0.0, -1.0])
        .unwrap();
    assert!((stiff - blocking).abs() / blocking.abs() <= 1e-4);

    let e = random_solid(64, &mut r);
    let kind = ObjectiveKind::Workpiece { kappa: 2.0 };
    let (od, oe) = (
        p.evaluate(kind, &d).unwrap().value,
        p.evaluate(kind, &e).unwrap().value,
    );
    let fd = p
        .workpiece_spring_force(&d, 2.0, node, [0.0, -1.0])
        .unwrap();
    let fe = p
        .workpiece_spring_force(&e, 2.0, node, [0.0, -1.0])
        .unwrap();
    assert_ne!(od, oe);
    assert_eq!(od < oe, fd > fe);
}
