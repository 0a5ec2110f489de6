use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use respotopt::commands::{self, cmd_gradcheck, cmd_identities, cmd_run};
use respotopt::config::RunConfig;

/// Topology optimization of responsive structures.
#[derive(Parser)]
#[command(name = "respotopt", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an optimization and write its artifacts.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output.directory`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Suppress per-iteration progress.
        #[arg(long, short)]
        quiet: bool,
    },
    /// Compare adjoint gradients with central finite differences.
    Gradcheck {
        config: PathBuf,
        #[arg(long, default_value_t = 20)]
        probes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check objective identities on random designs.
    Identities { config: PathBuf },
}

fn load(path: &Path) -> Result<RunConfig, ExitCode> {
    RunConfig::from_path(path).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(commands::exit_code(&e) as u8)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, quiet } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let dir = out.unwrap_or_else(|| cfg.output.directory.clone());
            let mut progress = |r: &respotopt::optimizer::IterationRecord| {
                if !quiet {
                    eprintln!(
                        "iter {:4}  objective {:.6e}  C0 {:.6e}  C1 {:.6e}  vol_r {:.4}  vol_0 {:.4}  change {:.4}",
                        r.iter, r.objective, r.c0, r.c1, r.vol_r, r.vol_0, r.max_change
                    );
                }
            };
            match cmd_run(&cfg, &dir, &mut progress) {
                Ok(art) => {
                    print!("{}", art.summary.to_json());
                    eprintln!(
                        "wrote {} files to {}",
                        art.files.len(),
                        art.directory.display()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(commands::exit_code(&e) as u8)
                }
            }
        }
        Command::Gradcheck {
            config,
            probes,
            seed,
        } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            match cmd_gradcheck(&cfg, probes, seed) {
                Ok(rep) => {
                    println!("mesh {}x{}, tolerance {:e}", rep.nx, rep.ny, rep.tolerance);
                    for e in &rep.entries {
                        println!(
                            "{:<16} {:<4} probes {:3}  max rel err {:.3e}  {}",
                            e.objective.name(),
                            e.field.name(),
                            e.probes,
                            e.max_rel_err,
                            if e.max_rel_err <= rep.tolerance {
                                "ok"
                            } else {
                                "FAIL"
                            }
                        );
                    }
                    if rep.passed() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::FAILURE
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(commands::exit_code(&e) as u8)
                }
            }
        }
        Command::Identities { config } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            match cmd_identities(&cfg) {
                Ok(rep) => {
                    for c in &rep.checks {
                        println!(
                            "{:<22} residual {:.3e}  tol {:.1e}  {}  ({})",
                            c.name,
                            c.residual,
                            c.tolerance,
                            if c.passed { "ok" } else { "FAIL" },
                            c.detail
                        );
                    }
                    if rep.passed() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::FAILURE
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(commands::exit_code(&e) as u8)
                }
            }
        }
    }
}
