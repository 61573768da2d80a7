//! `shillbid` — simulate learning-to-bid under max-shilling feedback.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use shillbid_core::distributions::{make_hard_instance_with, ShillLowComponent};
use shillbid_core::harness::{run, sweep, RunConfig, SweepConfig};
use shillbid_core::verify::run_default_suite;

#[derive(Parser)]
#[command(name = "shillbid", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShillLowArg {
    Uniform,
    AtomZero,
}

impl From<ShillLowArg> for ShillLowComponent {
    fn from(v: ShillLowArg) -> Self {
        match v {
            ShillLowArg::Uniform => ShillLowComponent::UniformSlice,
            ShillLowArg::AtomZero => ShillLowComponent::AtomAtZero,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the episodes described by a JSON run configuration.
    Run {
        config: PathBuf,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write per-epoch certificate dumps.
        #[arg(long)]
        dump_certificates: bool,
    },
    /// Run a (T, gamma, policy) sweep described by a JSON sweep configuration.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the numerical lemma suite.
    Verify {
        /// Only run checks whose name contains this string.
        #[arg(long)]
        check: Option<String>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Write the reports as JSON to this path.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Build a planted-bump hard instance and print or save it.
    HardInstance {
        #[arg(long = "T", alias = "t")]
        t: u64,
        #[arg(long)]
        gamma: f64,
        /// Planted cell index (1-based); defaults to the middle cell.
        #[arg(long)]
        cell: Option<usize>,
        #[arg(long, value_enum, default_value = "uniform")]
        shill_low: ShillLowArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn main_inner() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            dump_certificates,
        } => {
            let text = fs::read_to_string(&config)
                .with_context(|| format!("reading run config {}", config.display()))?;
            let mut cfg: RunConfig = serde_json::from_str(&text)
                .with_context(|| format!("parsing run config {}", config.display()))?;
            if let Some(dir) = out {
                cfg.output_dir = Some(dir);
            }
            if dump_certificates {
                let mut constants = cfg
                    .constants
                    .clone()
                    .unwrap_or_else(|| shillbid_core::policy::PolicyConfig::new(cfg.t_horizon));
                constants.dump_certificates = true;
                cfg.constants = Some(constants);
            }
            let (summary, _traces) = run(&cfg)?;
            println!(
                "run {} ({}): {} seeds",
                summary.config_hash,
                summary.policy,
                summary.outcomes.len()
            );
            for o in &summary.outcomes {
                println!(
                    "  seed {}: total pseudo-regret {:.4}",
                    o.seed, o.total_pseudo_regret
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { config, out } => {
            let text = fs::read_to_string(&config)
                .with_context(|| format!("reading sweep config {}", config.display()))?;
            let mut cfg: SweepConfig = serde_json::from_str(&text)
                .with_context(|| format!("parsing sweep config {}", config.display()))?;
            if let Some(dir) = out {
                cfg.output_dir = Some(dir);
            }
            let result = sweep(&cfg)?;
            println!("sweep {}: {} cells", result.config_hash, result.cells.len());
            for f in &result.fits {
                println!(
                    "  {} gamma={}: slope {:.4} (R^2 {:.4}, {} points)",
                    f.policy, f.gamma, f.slope, f.r_squared, f.n_points
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { check, seed, json } => {
            let reports: Vec<_> = run_default_suite(seed)
                .into_iter()
                .filter(|r| {
                    check
                        .as_ref()
                        .map(|c| r.name.contains(c.as_str()))
                        .unwrap_or(true)
                })
                .collect();
            let mut all_pass = true;
            for r in &reports {
                println!(
                    "{} {:<32} worst {:>12.6e} tol {:>12.6e} ({} samples) {}",
                    if r.pass { "PASS" } else { "FAIL" },
                    r.name,
                    r.worst_violation,
                    r.tolerance,
                    r.samples,
                    r.worst_location
                );
                all_pass &= r.pass;
            }
            if let Some(path) = json {
                fs::write(&path, serde_json::to_string_pretty(&reports)?)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(if all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::HardInstance {
            t,
            gamma,
            cell,
            shill_low,
            out,
        } => {
            let inst = make_hard_instance_with(t, gamma, cell, shill_low.into(), None)?;
            let hp = inst.hard_params.expect("hard instance has parameters");
            println!(
                "h = {:.6e}, eps = {:.6e}, cells = {}, planted = {}",
                hp.h, hp.eps, hp.n_cells, hp.cell
            );
            let json = inst.to_json();
            match out {
                Some(path) => {
                    fs::write(&path, json)
                        .with_context(|| format!("writing {}", path.display()))?;
                    println!("wrote {}", path.display());
                }
                None => println!("{json}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
