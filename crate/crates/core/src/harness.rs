//! Experiment harness: run configurations, seeded sweeps over horizon and
//! shill-scale ladders, log-log rate fitting, and columnar exports.
//!
//! All randomness flows from one 64-bit master seed through a documented
//! splitting rule (`splitmix64(master ^ run_index)` with run indices
//! enumerated cell-major), so any sweep cell can be reproduced in isolation.
//! Sweep cells execute on a worker pool when the `parallel` feature is on;
//! results are merged by cell key, never by completion order.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::distributions::{
    make_hard_instance_with, AuctionInstance, DistError, ShillLowComponent,
};
use crate::environment::{run_episode, EnvError, RegretTrace};
use crate::policy::{NaiveParams, NaivePolicy, OraclePolicy, PolicyConfig, ShillProofPolicy};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("instance error: {0}")]
    Dist(#[from] DistError),
    #[error("episode error: {0}")]
    Env(#[from] EnvError),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("rate fit needs at least {needed} positive points, got {got}")]
    NotEnoughPoints { needed: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, HarnessError>;

// ---------------------------------------------------------------------------
// Execution mode
// ---------------------------------------------------------------------------

/// Worker-pool selection for sweeps and batch runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExecMode {
    #[cfg_attr(feature = "parallel", default)]
    Parallel,
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
}

/// Worker count from SHILLBID_WORKERS (0 or unset: rayon's default).
pub fn configured_workers() -> usize {
    std::env::var("SHILLBID_WORKERS")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0)
}

/// Maps `f` over the items, in parallel when requested and compiled in.
/// Output order always matches input order.
pub fn map_cells<T, U, F>(mode: ExecMode, items: Vec<T>, f: F) -> Vec<U>
where
    T: Send + Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            let workers = configured_workers();
            if workers > 0 {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .expect("worker pool");
                pool.install(|| items.par_iter().map(&f).collect())
            } else {
                items.par_iter().map(&f).collect()
            }
        }
        #[cfg(not(feature = "parallel"))]
        ExecMode::Parallel => items.iter().map(&f).collect(),
        ExecMode::Sequential => items.iter().map(&f).collect(),
    }
}

/// The documented seed-splitting rule: splitmix64(master ^ run_index).
pub fn derive_seed(master: u64, run_index: u64) -> u64 {
    let mut z = master ^ run_index;
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Named instance families plus escape hatches for files and inline specs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum InstanceSpec {
    /// Planted-bump lower-bound instance.
    Hard {
        gamma: f64,
        #[serde(default)]
        cell: Option<usize>,
        #[serde(default)]
        shill_low: ShillLowComponent,
        /// Horizon used for (h, eps, N); defaults to the run horizon.
        #[serde(default)]
        params_t: Option<u64>,
    },
    /// Serialized instance document on disk.
    File { path: PathBuf },
    /// Instance embedded in the config document.
    Inline { instance: Box<AuctionInstance> },
}

impl InstanceSpec {
    pub fn build(&self, t_horizon: u64) -> Result<AuctionInstance> {
        match self {
            InstanceSpec::Hard {
                gamma,
                cell,
                shill_low,
                params_t,
            } => Ok(make_hard_instance_with(
                params_t.unwrap_or(t_horizon),
                *gamma,
                *cell,
                *shill_low,
                None,
            )?),
            InstanceSpec::File { path } => {
                let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
                    path: path.clone(),
                    source,
                })?;
                Ok(AuctionInstance::from_json(&text)?)
            }
            InstanceSpec::Inline { instance } => Ok((**instance).clone()),
        }
    }
}

/// Policy selection by name plus its parameter block.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum PolicySpec {
    ShillProof,
    RobustOnly,
    Naive {
        #[serde(default)]
        params: NaiveParams,
    },
    Oracle,
}

impl PolicySpec {
    pub fn label(&self) -> &'static str {
        match self {
            PolicySpec::ShillProof => "shill_proof",
            PolicySpec::RobustOnly => "robust_only",
            PolicySpec::Naive { .. } => "naive",
            PolicySpec::Oracle => "oracle",
        }
    }
}

fn default_schema() -> u32 {
    1
}

/// One batch of episodes: an instance, a policy, a horizon and seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub instance: InstanceSpec,
    pub policy: PolicySpec,
    pub t_horizon: u64,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub emit_trace: bool,
    /// Learner constants; horizon is overridden by `t_horizon`.
    #[serde(default)]
    pub constants: Option<PolicyConfig>,
    #[serde(default)]
    pub exec: ExecMode,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("seeds list is empty".into()));
        }
        if self.t_horizon == 0 {
            return Err(HarnessError::Config("t_horizon must be >= 1".into()));
        }
        Ok(())
    }

    pub fn policy_config(&self) -> PolicyConfig {
        let mut cfg = self
            .constants
            .clone()
            .unwrap_or_else(|| PolicyConfig::new(self.t_horizon));
        cfg.t_horizon = self.t_horizon;
        cfg
    }

    /// Hash of the canonical JSON serialization, for provenance stamping.
    /// Output destination and worker-pool choice do not change the
    /// experiment, so they are excluded.
    pub fn config_hash(&self) -> String {
        let mut semantic = self.clone();
        semantic.output_dir = None;
        semantic.exec = ExecMode::Sequential;
        let canon = serde_json::to_string(&semantic).expect("config serializes");
        let mut h = Sha256::new();
        h.update(canon.as_bytes());
        hex_string(&h.finalize())
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

// ---------------------------------------------------------------------------
// Single-config runs
// ---------------------------------------------------------------------------

/// Per-seed outcome of a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub total_pseudo_regret: f64,
    pub epochs: Vec<crate::environment::EpochSummary>,
}

/// Run summary written alongside traces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub artifact_version: String,
    pub policy: String,
    pub t_horizon: u64,
    pub outcomes: Vec<SeedOutcome>,
}

pub fn build_policy(
    spec: &PolicySpec,
    cfg: &PolicyConfig,
    instance: &AuctionInstance,
) -> Box<dyn crate::environment::Policy> {
    match spec {
        PolicySpec::ShillProof => Box::new(ShillProofPolicy::shill_proof(
            cfg.clone(),
            instance.shill_dist.clone(),
        )),
        PolicySpec::RobustOnly => Box::new(ShillProofPolicy::robust_only(cfg.clone())),
        PolicySpec::Naive { params } => Box::new(NaivePolicy::new(params.clone())),
        PolicySpec::Oracle => Box::new(OraclePolicy::new(instance, cfg.benchmark_grid)),
    }
}

/// Runs one episode per seed; writes trace CSVs (if requested) and a summary
/// document when an output directory is set. Byte-identical per config hash.
pub fn run(config: &RunConfig) -> Result<(RunSummary, Vec<RegretTrace>)> {
    config.validate()?;
    let instance = config.instance.build(config.t_horizon)?;
    let cfg = config.policy_config();
    type EpisodeOut = std::result::Result<(RegretTrace, Option<serde_json::Value>), String>;
    let traces: Vec<EpisodeOut> = map_cells(config.exec, config.seeds.clone(), |&seed| {
        let mut policy = build_policy(&config.policy, &cfg, &instance);
        let trace = run_episode(
            &instance,
            policy.as_mut(),
            config.t_horizon,
            seed,
            cfg.benchmark_grid,
        )
        .map_err(|e| e.to_string())?;
        Ok((trace, policy.diagnostics()))
    });
    let mut out = Vec::with_capacity(traces.len());
    let mut diags = Vec::with_capacity(traces.len());
    for tr in traces {
        let (trace, diag) = tr.map_err(HarnessError::Config)?;
        out.push(trace);
        diags.push(diag);
    }
    let summary = RunSummary {
        config_hash: config.config_hash(),
        artifact_version: ARTIFACT_VERSION.to_string(),
        policy: config.policy.label().to_string(),
        t_horizon: config.t_horizon,
        outcomes: out
            .iter()
            .map(|tr| SeedOutcome {
                seed: tr.summary.seed,
                total_pseudo_regret: tr.summary.total_pseudo_regret,
                epochs: tr.summary.epochs.clone(),
            })
            .collect(),
    };
    if let Some(dir) = &config.output_dir {
        fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
            path: dir.clone(),
            source,
        })?;
        if config.emit_trace {
            for tr in &out {
                let path = dir.join(format!("trace_seed{}.csv", tr.summary.seed));
                let mut buf = Vec::new();
                tr.write_csv(&mut buf).expect("write to vec");
                fs::write(&path, buf).map_err(|source| HarnessError::Io { path, source })?;
            }
        }
        for (tr, diag) in out.iter().zip(&diags) {
            if let Some(diag) = diag {
                let path = dir.join(format!("certificates_seed{}.json", tr.summary.seed));
                fs::write(&path, serde_json::to_string_pretty(diag)?)
                    .map_err(|source| HarnessError::Io { path, source })?;
            }
        }
        let path = dir.join("summary.json");
        fs::write(&path, serde_json::to_string_pretty(&summary)?)
            .map_err(|source| HarnessError::Io { path, source })?;
    }
    Ok((summary, out))
}

// ---------------------------------------------------------------------------
// Sweeps and rate fits
// ---------------------------------------------------------------------------

/// Sweep over a horizon ladder and a shill-scale ladder for several policies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub t_ladder: Vec<u64>,
    /// γ values; the hard instance is rebuilt per (T, γ).
    pub gamma_ladder: Vec<f64>,
    pub policies: Vec<PolicySpec>,
    pub seeds_per_cell: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub shill_low: ShillLowComponent,
    #[serde(default)]
    pub cell: Option<usize>,
    #[serde(default)]
    pub constants: Option<PolicyConfig>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub exec: ExecMode,
}

/// One sweep cell outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellResult {
    pub policy: String,
    pub t_horizon: u64,
    pub gamma: f64,
    pub seed: u64,
    pub total_pseudo_regret: f64,
    /// Fraction of completed epochs that validated optimistically.
    pub optimistic_epoch_fraction: f64,
}

/// Aggregated mean/std per (policy, gamma, T).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Aggregate {
    pub policy: String,
    pub gamma: f64,
    pub t_horizon: u64,
    pub mean_regret: f64,
    pub std_regret: f64,
    pub n: usize,
}

/// Least-squares fit of log regret against log horizon.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateFit {
    pub policy: String,
    pub gamma: f64,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
    pub excluded_nonpositive: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub config_hash: String,
    pub artifact_version: String,
    pub cells: Vec<CellResult>,
    pub aggregates: Vec<Aggregate>,
    pub fits: Vec<RateFit>,
}

/// Least squares on (log T, log R). Nonpositive regret points are excluded
/// with a count recorded on the fit.
pub fn fit_rate(points: &[(u64, f64)]) -> Result<RateFit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(_, r)| r > 0.0)
        .map(|&(t, r)| ((t as f64).ln(), r.ln()))
        .collect();
    let excluded = points.len() - usable.len();
    if usable.len() < 4 {
        return Err(HarnessError::NotEnoughPoints {
            needed: 4,
            got: usable.len(),
        });
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = usable.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = usable
        .iter()
        .map(|p| (p.1 - (intercept + slope * p.0)).powi(2))
        .sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Ok(RateFit {
        policy: String::new(),
        gamma: f64::NAN,
        slope,
        intercept,
        r_squared,
        n_points: usable.len(),
        excluded_nonpositive: excluded,
    })
}

pub fn sweep(config: &SweepConfig) -> Result<SweepResult> {
    if config.seeds_per_cell == 0 || config.t_ladder.is_empty() || config.policies.is_empty() {
        return Err(HarnessError::Config(
            "sweep needs policies, a T ladder and at least one seed per cell".into(),
        ));
    }
    let gammas = if config.gamma_ladder.is_empty() {
        vec![1.0]
    } else {
        config.gamma_ladder.clone()
    };
    // Enumerate cells deterministically: policy-major, then gamma, then T,
    // then repetition. The run index drives the seed derivation.
    struct Cell {
        policy: PolicySpec,
        t: u64,
        gamma: f64,
        seed: u64,
    }
    let mut cells = Vec::new();
    let mut run_index = 0u64;
    for pol in &config.policies {
        for &gamma in &gammas {
            for &t in &config.t_ladder {
                for _ in 0..config.seeds_per_cell {
                    cells.push(Cell {
                        policy: pol.clone(),
                        t,
                        gamma,
                        seed: derive_seed(config.master_seed, run_index),
                    });
                    run_index += 1;
                }
            }
        }
    }
    let shill_low = config.shill_low;
    let planted_cell = config.cell;
    let constants = config.constants.clone();
    let results: Vec<std::result::Result<CellResult, String>> =
        map_cells(config.exec, cells, |cell| {
            let instance =
                make_hard_instance_with(cell.t, cell.gamma, planted_cell, shill_low, None)
                    .map_err(|e| e.to_string())?;
            let mut cfg = constants
                .clone()
                .unwrap_or_else(|| PolicyConfig::new(cell.t));
            cfg.t_horizon = cell.t;
            let mut policy = build_policy(&cell.policy, &cfg, &instance);
            let trace = run_episode(
                &instance,
                policy.as_mut(),
                cell.t,
                cell.seed,
                cfg.benchmark_grid,
            )
            .map_err(|e| e.to_string())?;
            let completed: Vec<_> = trace
                .summary
                .epochs
                .iter()
                .filter(|e| e.end.is_some())
                .collect();
            let opt_frac = if completed.is_empty() {
                0.0
            } else {
                completed.iter().filter(|e| e.iota == 1).count() as f64 / completed.len() as f64
            };
            Ok(CellResult {
                policy: cell.policy.label().to_string(),
                t_horizon: cell.t,
                gamma: cell.gamma,
                seed: cell.seed,
                total_pseudo_regret: trace.summary.total_pseudo_regret,
                optimistic_epoch_fraction: opt_frac,
            })
        });
    let mut cells_out = Vec::with_capacity(results.len());
    for r in results {
        cells_out.push(r.map_err(HarnessError::Config)?);
    }

    // Aggregate by (policy, gamma, T) in enumeration order.
    let mut aggregates: Vec<Aggregate> = Vec::new();
    for pol in &config.policies {
        for &gamma in &gammas {
            for &t in &config.t_ladder {
                let vals: Vec<f64> = cells_out
                    .iter()
                    .filter(|c| c.policy == pol.label() && c.gamma == gamma && c.t_horizon == t)
                    .map(|c| c.total_pseudo_regret)
                    .collect();
                let n = vals.len();
                let mean = vals.iter().sum::<f64>() / n as f64;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
                aggregates.push(Aggregate {
                    policy: pol.label().to_string(),
                    gamma,
                    t_horizon: t,
                    mean_regret: mean,
                    std_regret: var.sqrt(),
                    n,
                });
            }
        }
    }

    // Fit a slope per (policy, gamma) whenever the ladder is long enough.
    let mut fits = Vec::new();
    for pol in &config.policies {
        for &gamma in &gammas {
            let pts: Vec<(u64, f64)> = aggregates
                .iter()
                .filter(|a| a.policy == pol.label() && a.gamma == gamma)
                .map(|a| (a.t_horizon, a.mean_regret))
                .collect();
            if let Ok(mut fit) = fit_rate(&pts) {
                fit.policy = pol.label().to_string();
                fit.gamma = gamma;
                fits.push(fit);
            }
        }
    }

    let result = SweepResult {
        config_hash: {
            let mut h = Sha256::new();
            h.update(serde_json::to_string(config)?.as_bytes());
            hex_string(&h.finalize())
        },
        artifact_version: ARTIFACT_VERSION.to_string(),
        cells: cells_out,
        aggregates,
        fits,
    };
    if let Some(dir) = &config.output_dir {
        fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
            path: dir.clone(),
            source,
        })?;
        let path = dir.join("sweep.json");
        fs::write(&path, serde_json::to_string_pretty(&result)?)
            .map_err(|source| HarnessError::Io { path, source })?;
        emit_plot_data(&result, dir)?;
    }
    Ok(result)
}

// ---------------------------------------------------------------------------
// Plot-data export
// ---------------------------------------------------------------------------

/// Writes `regret_vs_t.csv`, `regret_vs_gamma.csv` and `fits.csv`.
///
/// Column headers are fixed: the regret tables carry
/// `policy,gamma,t,mean_regret,std_regret,n` and the fit table
/// `policy,gamma,slope,intercept,r_squared,n_points`.
pub fn emit_plot_data(result: &SweepResult, dir: &Path) -> Result<()> {
    let write = |path: PathBuf, body: String| -> Result<()> {
        fs::write(&path, body).map_err(|source| HarnessError::Io { path, source })
    };
    let mut by_t = String::from("policy,gamma,t,mean_regret,std_regret,n\n");
    for a in &result.aggregates {
        by_t.push_str(&format!(
            "{},{},{},{},{},{}\n",
            a.policy, a.gamma, a.t_horizon, a.mean_regret, a.std_regret, a.n
        ));
    }
    write(dir.join("regret_vs_t.csv"), by_t)?;

    let mut by_g = String::from("policy,t,gamma,mean_regret,std_regret,n\n");
    let mut sorted: Vec<&Aggregate> = result.aggregates.iter().collect();
    sorted.sort_by(|a, b| {
        (a.policy.as_str(), a.t_horizon)
            .cmp(&(b.policy.as_str(), b.t_horizon))
            .then(a.gamma.partial_cmp(&b.gamma).unwrap())
    });
    for a in sorted {
        by_g.push_str(&format!(
            "{},{},{},{},{},{}\n",
            a.policy, a.t_horizon, a.gamma, a.mean_regret, a.std_regret, a.n
        ));
    }
    write(dir.join("regret_vs_gamma.csv"), by_g)?;

    let mut fits = String::from("policy,gamma,slope,intercept,r_squared,n_points\n");
    for f in &result.fits {
        fits.push_str(&format!(
            "{},{},{},{},{},{}\n",
            f.policy, f.gamma, f.slope, f.intercept, f.r_squared, f.n_points
        ));
    }
    write(dir.join("fits.csv"), fits)?;
    Ok(())
}

/// Reads `regret_vs_t.csv` back into aggregates (round-trip support).
pub fn read_plot_aggregates(dir: &Path) -> Result<Vec<Aggregate>> {
    let path = dir.join("regret_vs_t.csv");
    let text = fs::read_to_string(&path).map_err(|source| HarnessError::Io { path, source })?;
    let mut out = Vec::new();
    for line in text.lines().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 6 {
            return Err(HarnessError::Config(format!("bad plot row: {line}")));
        }
        out.push(Aggregate {
            policy: parts[0].to_string(),
            gamma: parts[1]
                .parse()
                .map_err(|e| HarnessError::Config(format!("bad gamma: {e}")))?,
            t_horizon: parts[2]
                .parse()
                .map_err(|e| HarnessError::Config(format!("bad t: {e}")))?,
            mean_regret: parts[3]
                .parse()
                .map_err(|e| HarnessError::Config(format!("bad mean: {e}")))?,
            std_regret: parts[4]
                .parse()
                .map_err(|e| HarnessError::Config(format!("bad std: {e}")))?,
            n: parts[5]
                .parse()
                .map_err(|e| HarnessError::Config(format!("bad n: {e}")))?,
        });
    }
    Ok(out)
}
