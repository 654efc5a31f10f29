use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::process::{replicate_values, Clock, Family, Innovation, ProcessModel, INNOVATION_LABEL};
use crate::rates::{v_norm, variance_bound, BoundParams, DeltaSequence, WeightProfile};
use crate::stats::{mean, normal_cdf, variance};

use super::config::{ExperimentConfig, ExperimentKind};
use super::report::{CheckRow, ExperimentReport, SampleTable, StreamUse};
use super::Seeds;

/// Gaussian AR(1) `X_i = a X_{i−1} + σ ε_i`, the only law with a closed
/// conditional CDF here (`a = 0` is the i.i.d. case).
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct GaussianAr {
    pub a: f64,
    pub sigma: f64,
}

impl GaussianAr {
    pub fn from_model(model: &ProcessModel) -> Result<Self> {
        let spec = model.spec();
        if spec.innovation != Innovation::StandardGaussian {
            return Err(Error::Unsupported(format!(
                "no closed conditional CDF for {} innovations",
                spec.innovation
            )));
        }
        let a = match &spec.family {
            Family::Iid => 0.0,
            Family::TvAr1 { coef } if coef.is_constant() => coef.eval(0.0),
            other => {
                return Err(Error::Unsupported(format!(
                    "conditional CDF is only available for i.i.d. and stationary AR(1) models, not {}",
                    other.name()
                )))
            }
        };
        Ok(GaussianAr {
            a,
            sigma: spec.innovation_scale,
        })
    }

    /// `E[1{X_i ≤ x} | X_{i−1} = z]`.
    pub fn conditional_cdf(&self, x: f64, z: f64) -> f64 {
        if self.a == 0.0 {
            normal_cdf(x / self.sigma)
        } else {
            normal_cdf((x - self.a * z) / self.sigma)
        }
    }

    /// Stationary `P(X ≤ x)`.
    pub fn marginal_cdf(&self, x: f64) -> f64 {
        if self.a == 0.0 {
            normal_cdf(x / self.sigma)
        } else {
            normal_cdf(x * (1.0 - self.a * self.a).sqrt() / self.sigma)
        }
    }

    /// `Δ(k) = (δ₁(k − 1))^{1/2}` with `δ₁(k) = |a|^k E|ε − ε*|`, the
    /// dependence bound of indicator classes at Hölder exponent 1/2.
    pub fn delta(&self) -> Result<DeltaSequence> {
        if self.a == 0.0 {
            return Ok(DeltaSequence::zero());
        }
        let l1 = 2.0 * self.sigma / std::f64::consts::PI.sqrt();
        let rho = self.a.abs().sqrt();
        DeltaSequence::exponential((l1 / self.a.abs()).sqrt(), rho)
    }
}

/// `x_j = −2 + 4j/(N − 1)`; the grid for `N` is a subset of the grid for
/// any multiple-plus-one refinement, exactly in floating point.
pub(crate) fn class_grid(size: u64) -> Vec<f64> {
    (0..size).map(|j| -2.0 + (4.0 * j as f64) / ((size - 1) as f64)).collect()
}

/// `max_f |R_n²(f) − E R_n²(f)|` for one path `z` holding `X_0 … X_{n−1}`.
fn max_deviation(model: &GaussianAr, grid: &[f64], z: &[f64]) -> f64 {
    let n = z.len() as f64;
    grid.iter()
        .map(|&x| {
            let target = model.marginal_cdf(x);
            // summing deviations keeps the i.i.d. case exactly zero
            let dev: f64 = z.iter().map(|&zi| model.conditional_cdf(x, zi) - target).sum();
            (dev / n).abs()
        })
        .fold(0.0, f64::max)
}

pub fn run_variance_bound_scaling(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if cfg.kind != ExperimentKind::VarianceBoundScaling {
        return Err(Error::Config(format!("run_variance_bound_scaling given a {} config", cfg.kind)));
    }
    let model = cfg.model()?;
    let law = GaussianAr::from_model(&model)?;
    let delta = law.delta()?;
    let seeds = Seeds::new(cfg.seed);
    let mut report = ExperimentReport::new(cfg);
    let weights = WeightProfile::uniform(1.0);
    let grids: Vec<Vec<f64>> = cfg.class_sizes.iter().map(|&c| class_grid(c)).collect();

    // mc[c][i]: per-replicate deviations for class c at sample size ns[i]
    let t = Instant::now();
    let mut mc: Vec<Vec<Vec<f64>>> = vec![Vec::new(); grids.len()];
    for &n in &cfg.ns {
        // the path X_1..X_n stands in for X_0..X_{n−1}; the law is stationary
        let per_rep: Vec<Vec<f64>> = (0..cfg.reps as u64)
            .into_par_iter()
            .map(|r| {
                let z = replicate_values(&model, n, seeds.target, r, model.default_burnin(), Clock::Path { n });
                grids.iter().map(|g| max_deviation(&law, g, &z)).collect()
            })
            .collect();
        for (c, row) in mc.iter_mut().enumerate() {
            row.push(per_rep.iter().map(|v| v[c]).collect());
        }
    }
    report.timing.push(("replicates".into(), t.elapsed()));
    report.streams.push(StreamUse {
        purpose: "target",
        seed: seeds.target,
        label: INNOVATION_LABEL,
        replicates: 0..cfg.reps as u64,
    });

    let mut table = SampleTable::new(
        "ladder",
        vec!["class_size", "n", "mc_mean", "mc_se", "bound", "q", "entropy_term", "dependence_term", "block_term", "ratio"],
    );
    let mut raw = SampleTable::new("max_deviation", vec!["class_size", "n", "replicate", "value"]);
    let mut block_h = Vec::with_capacity(grids.len());
    for (c, grid) in grids.iter().enumerate() {
        let size = cfg.class_sizes[c];
        let sigma = grid
            .iter()
            .map(|&x| v_norm(law.marginal_cdf(x).sqrt(), &delta, weights.d_n))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let mut ratios = Vec::with_capacity(cfg.ns.len());
        let mut zero_stat = 0.0f64;
        for (i, &n) in cfg.ns.iter().enumerate() {
            let sample = &mc[c][i];
            let m = mean(sample);
            let se = if sample.len() > 1 {
                (variance(sample) / sample.len() as f64).sqrt()
            } else {
                f64::NAN
            };
            let bp = BoundParams::new(1.0, size, n as u64, sigma, 1.0);
            let b = variance_bound(&bp, &delta, &weights, None)?;
            ratios.push(m / b.value);
            zero_stat = zero_stat.max(sample.iter().fold(0.0, |a: f64, v| a.max(*v)));
            table.push(vec![
                size.to_string(),
                n.to_string(),
                m.to_string(),
                se.to_string(),
                b.value.to_string(),
                b.q.to_string(),
                b.entropy_term.to_string(),
                b.dependence_term.to_string(),
                b.block_term.to_string(),
                (m / b.value).to_string(),
            ]);
            for (r, v) in sample.iter().enumerate() {
                raw.push(vec![size.to_string(), n.to_string(), r.to_string(), v.to_string()]);
            }
        }
        if law.a == 0.0 {
            report.rows.push(CheckRow::at_most(
                format!("iid_zero[F={size}]"),
                zero_stat,
                cfg.tolerances.get("zero"),
                None,
            ));
        } else {
            let hi = ratios.iter().cloned().fold(f64::MIN, f64::max);
            let lo = ratios.iter().cloned().fold(f64::MAX, f64::min);
            let drift = if lo > 0.0 { hi / lo } else { f64::INFINITY };
            report.rows.push(CheckRow::at_most(
                format!("ratio_drift[F={size}]"),
                drift,
                cfg.tolerances.get("ratio_drift"),
                None,
            ));
        }
        // block term at q = 1 isolates M²H/n
        let bp = BoundParams::new(1.0, size, cfg.ns[0] as u64, sigma, 1.0);
        block_h.push(variance_bound(&bp, &delta, &weights, Some(1))?.block_term);
    }
    for c in 1..grids.len() {
        let (s0, s1) = (cfg.class_sizes[c - 1], cfg.class_sizes[c]);
        let ratio = block_h[c] / block_h[c - 1];
        let expected = (s1 as f64).ln().max(1.0) / (s0 as f64).ln().max(1.0);
        report.rows.push(CheckRow::at_most(
            format!("h_term_ratio[F={s0}->{s1}]"),
            (ratio - expected).abs(),
            cfg.tolerances.get("h_term"),
            None,
        ));
        let nested = grids[c - 1].iter().all(|x| grids[c].contains(x));
        let increases = nested
            && mc[c]
                .iter()
                .zip(&mc[c - 1])
                .all(|(big, small)| big.iter().zip(small).all(|(b, s)| b >= s));
        let shortfall = mc[c]
            .iter()
            .zip(&mc[c - 1])
            .flat_map(|(big, small)| big.iter().zip(small).map(|(b, s)| (s - b).max(0.0)))
            .fold(0.0, f64::max);
        let mut row = CheckRow::at_most(format!("mc_monotone[F={s0}->{s1}]"), shortfall, 0.0, None);
        row.pass = increases;
        if !nested {
            report
                .warnings
                .push(format!("grid of size {s0} is not contained in the grid of size {s1}"));
        }
        report.rows.push(row);
    }
    report.samples.extend([table, raw]);
    Ok(report)
}
