use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::kde;
use crate::process::{replicate_values, Clock, ProcessModel, INNOVATION_LABEL};
use crate::rng::derive_seed;
use crate::stats::{mean, ols, variance};

use super::config::{ExperimentConfig, ExperimentKind};
use super::report::{CheckRow, ExperimentReport, SampleTable, StreamUse};
use super::{ordered_mean, Seeds};

/// Grid steps as a fraction of the bandwidth.
const GRID_STEP: f64 = 0.25;
/// Half-width of the x range in marginal standard deviations.
const X_RANGE_SD: f64 = 6.0;
/// Pilot paths used to locate the x range.
const RANGE_PATHS: u64 = 50;

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct LadderPoint {
    pub n: usize,
    pub h1: f64,
    pub h2: f64,
    pub xgrid: Vec<f64>,
    pub vgrid: Vec<f64>,
    pub sup_errors: Vec<f64>,
    pub mean_sup: f64,
    pub se: f64,
    pub rate: f64,
    pub side: f64,
}

fn path(model: &ProcessModel, n: usize, seed: u64, r: u64) -> Vec<f64> {
    replicate_values(model, n, seed, r, model.default_burnin(), Clock::Path { n })
}

/// `lo, lo + step, …` up to `hi` (inclusive up to rounding).
fn ladder(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=count).map(|j| lo + j as f64 * step).collect()
}

/// Exponent `αs'/(αs' − 1)` of `h2` in the side condition, `s' = s ∧ 1/2`.
fn side_exponent(alpha: f64, s: f64) -> Option<f64> {
    let a = alpha * s.min(0.5);
    if a.is_infinite() {
        Some(1.0)
    } else if a > 1.0 {
        Some(a / (a - 1.0))
    } else {
        None
    }
}

pub fn run_kde_rate(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if cfg.kind != ExperimentKind::KdeRate {
        return Err(Error::Config(format!("run_kde_rate given a {} config", cfg.kind)));
    }
    let model = cfg.model()?;
    let seeds = Seeds::new(cfg.seed);
    let mut report = ExperimentReport::new(cfg);
    let exponent = side_exponent(cfg.side_alpha, cfg.side_s);
    if exponent.is_none() {
        report.warnings.push(format!(
            "side condition undefined: alpha * min(s, 1/2) = {} is not above 1",
            cfg.side_alpha * cfg.side_s.min(0.5)
        ));
    }
    let (h1_rule, h2_rule) = (cfg.h1.as_ref().expect("validated"), cfg.h2.as_ref().expect("validated"));
    let mut points = Vec::with_capacity(cfg.ns.len());
    for (i, &n) in cfg.ns.iter().enumerate() {
        let t = Instant::now();
        let (h1, h2) = (h1_rule.at(i, n), h2_rule.at(i, n));
        let pilot_seed = derive_seed(seeds.pilot, &format!("n={n}"));
        let target_seed = derive_seed(seeds.target, &format!("n={n}"));
        let pooled: Vec<f64> = (0..RANGE_PATHS.min(cfg.pilot_reps as u64))
            .flat_map(|r| path(&model, n, pilot_seed, r))
            .collect();
        let (mu, sd) = (mean(&pooled), variance(&pooled).sqrt());
        let xgrid = ladder(mu - X_RANGE_SD * sd, mu + X_RANGE_SD * sd, GRID_STEP * h2);
        let vgrid = ladder(0.5 * h1, 1.0 - 0.5 * h1, GRID_STEP * h1);
        if vgrid.is_empty() {
            return Err(Error::Config(format!("h1 = {h1} leaves no interior location at n = {n}")));
        }
        let surface = |p: &[f64]| -> Result<Vec<f64>> {
            Ok(kde(p, &xgrid, &vgrid, h1, h2, &cfg.kernel)?.values.into_iter().collect())
        };
        let center = ordered_mean(cfg.pilot_reps as u64, xgrid.len() * vgrid.len(), |r| {
            surface(&path(&model, n, pilot_seed, r))
        })?;
        let sup_errors: Vec<f64> = (0..cfg.reps as u64)
            .into_par_iter()
            .map(|r| {
                let s = surface(&path(&model, n, target_seed, r))?;
                Ok(s.iter().zip(&center).fold(0.0f64, |a, (x, c)| a.max((x - c).abs())))
            })
            .collect::<Result<_>>()?;
        let mean_sup = mean(&sup_errors);
        let se = if sup_errors.len() > 1 {
            (variance(&sup_errors) / sup_errors.len() as f64).sqrt()
        } else {
            f64::NAN
        };
        let nf = n as f64;
        let side = exponent.map_or(f64::NAN, |e| nf.ln() / (nf * h1 * h2.powf(e)));
        report.streams.push(StreamUse {
            purpose: "pilot",
            seed: pilot_seed,
            label: INNOVATION_LABEL,
            replicates: 0..cfg.pilot_reps as u64,
        });
        report.streams.push(StreamUse {
            purpose: "target",
            seed: target_seed,
            label: INNOVATION_LABEL,
            replicates: 0..cfg.reps as u64,
        });
        report.timing.push((format!("n={n}"), t.elapsed()));
        points.push(LadderPoint {
            n,
            h1,
            h2,
            xgrid,
            vgrid,
            sup_errors,
            mean_sup,
            se,
            rate: (nf.ln() / (nf * h1 * h2)).sqrt(),
            side,
        });
    }
    if exponent.is_some() {
        let (first, last) = (points[0].side, points[points.len() - 1].side);
        if last > first {
            report.warnings.push(format!(
                "side condition log(n)/(n h1 h2^e) grows along the schedule ({first:.4e} to {last:.4e})"
            ));
        }
    }

    let lx: Vec<f64> = points.iter().map(|p| p.rate.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.mean_sup.ln()).collect();
    let fit = ols(&lx, &ly);
    report.rows.push(CheckRow::at_least("slope_lower", fit.slope, cfg.tolerances.get("slope_lo"), fit.slope_se));
    report.rows.push(CheckRow::at_most("slope_upper", fit.slope, cfg.tolerances.get("slope_hi"), fit.slope_se));
    let normalized: Vec<f64> = points.iter().map(|p| p.mean_sup / p.rate).collect();
    let violations = normalized.windows(2).filter(|w| w[1] > w[0]).count();
    report.rows.push(CheckRow::at_most(
        "normalized_trend_violations",
        violations as f64,
        cfg.tolerances.get("trend_violations"),
        None,
    ));

    let lipschitz = cfg.kernel.lipschitz.unwrap_or(f64::NAN);
    let mut table = SampleTable::new(
        "ladder",
        vec!["n", "h1", "h2", "x_points", "v_points", "mean_sup_error", "se", "rate", "normalized", "side_condition", "grid_displacement_bound"],
    );
    let mut raw = SampleTable::new("sup_error", vec!["n", "replicate", "value"]);
    for (p, norm) in points.iter().zip(&normalized) {
        // Lipschitz displacement of the product kernel over half a grid step
        let disp = lipschitz * cfg.kernel.peak * GRID_STEP / (p.h1 * p.h2);
        table.push(vec![
            p.n.to_string(),
            p.h1.to_string(),
            p.h2.to_string(),
            p.xgrid.len().to_string(),
            p.vgrid.len().to_string(),
            p.mean_sup.to_string(),
            p.se.to_string(),
            p.rate.to_string(),
            norm.to_string(),
            p.side.to_string(),
            disp.to_string(),
        ]);
        for (r, e) in p.sup_errors.iter().enumerate() {
            raw.push(vec![p.n.to_string(), r.to_string(), e.to_string()]);
        }
    }
    report.samples.extend([table, raw]);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn side_exponents() {
        assert_eq!(side_exponent(f64::INFINITY, 1.0), Some(1.0));
        assert_eq!(side_exponent(4.0, 1.0), Some(2.0));
        assert_eq!(side_exponent(3.0, 0.25), None);
    }

    #[test]
    fn grids_cover_the_interior() {
        let v = ladder(0.1, 0.9, 0.05);
        assert_eq!(v.len(), 17);
        assert!((v[16] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn small_ladder_runs_and_reports_three_checks() {
        let text = "[experiment]\nkind = kde_rate\nseed = 3\nreps = 20\npilot_reps = 50\n\
                    [process]\nfamily = iid\n[schedule]\nn = 200, 400, 800\nh1 = n^(-1/5)\nh2 = n^(-1/5)\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        let r = run_kde_rate(&cfg).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert!(r.warnings.is_empty());
        assert!(r.stream_conflicts().is_empty());
        assert_eq!(r.samples[1].rows.len(), 60);
    }

    #[test]
    fn growing_side_condition_warns_but_runs() {
        let text = "[experiment]\nkind = kde_rate\nseed = 3\nreps = 5\npilot_reps = 50\n\
                    [process]\nfamily = iid\n[schedule]\nn = 100, 200, 400\nh1 = 0.5*n^(-1/5)\nh2 = 2*n^(-1)\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        let r = run_kde_rate(&cfg).unwrap();
        assert_eq!(r.warnings.len(), 1, "{:?}", r.warnings);
        assert_eq!(r.rows.len(), 3);
    }
}
