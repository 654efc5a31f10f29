//! Configuration-driven verification experiments.

mod config;
mod fclt;
mod kde_rate;
mod report;
mod sandwich;
mod variance;

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::derive_seed;

pub use config::{
    BandwidthRule, ExperimentConfig, ExperimentKind, Tolerances, MIN_DISTRIBUTIONAL_REPS, MIN_PILOT_REPS,
};
pub use report::{CheckRow, ExperimentReport, SampleTable, StreamUse};

/// Replicates summed sequentially inside one parallel task.
const CHUNK: u64 = 64;

/// Stream seeds of the experiment stages, all derived from the config seed.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Seeds {
    pub target: u64,
    pub pilot: u64,
    pub longrun: u64,
    pub limit: u64,
}

impl Seeds {
    pub fn new(seed: u64) -> Self {
        Seeds {
            target: derive_seed(seed, "target"),
            pilot: derive_seed(seed, "pilot"),
            longrun: derive_seed(seed, "longrun"),
            limit: derive_seed(seed, "limit"),
        }
    }
}

/// Componentwise mean of `f(0), …, f(count − 1)`; the summation order is
/// fixed, so the result does not depend on the thread count.
pub(crate) fn ordered_mean<F>(count: u64, len: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(u64) -> Result<Vec<f64>> + Sync,
{
    if count == 0 {
        return Err(Error::InvalidArgument("mean over zero replicates".into()));
    }
    let chunks = count.div_ceil(CHUNK);
    let partial: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; len];
            for r in c * CHUNK..((c + 1) * CHUNK).min(count) {
                for (a, v) in acc.iter_mut().zip(f(r)?) {
                    *a += v;
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = vec![0.0; len];
    for p in partial {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    Ok(total.into_iter().map(|t| t / count as f64).collect())
}

pub(crate) fn fmt_x(x: f64) -> String {
    format!("{x}")
}

/// Run the experiment described by `cfg`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut report = match cfg.kind {
        ExperimentKind::FcltEdf => fclt::run_fclt_edf(cfg)?,
        ExperimentKind::FcltLocalEdf => fclt::run_fclt_local_edf(cfg)?,
        ExperimentKind::KdeRate => kde_rate::run_kde_rate(cfg)?,
        ExperimentKind::VarianceBoundScaling => variance::run_variance_bound_scaling(cfg)?,
        ExperimentKind::TableSandwich => sandwich::run_table_sandwich(cfg)?,
    };
    report.timing.push(("total".into(), start.elapsed()));
    Ok(report)
}

/// Parse `config`, run it and write the report files into `out`.
pub fn run_config_file(config: &Path, out: &Path) -> Result<ExperimentReport> {
    let cfg = ExperimentConfig::from_file(config)?;
    let report = run_experiment(&cfg)?;
    report.write(out)?;
    Ok(report)
}

pub use fclt::{run_fclt_edf, run_fclt_local_edf};
pub use kde_rate::run_kde_rate;
pub use sandwich::run_table_sandwich;
pub use variance::run_variance_bound_scaling;
