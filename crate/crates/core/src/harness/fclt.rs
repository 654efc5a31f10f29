use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{edf, localized_edf, KernelSpec};
use crate::limit::{iid_indicator_cov, ks_distance, longrun_cov_indicator, sample_gaussian_limit};
use crate::process::{replicate_values, Clock, Family, Innovation, ProcessModel};
use crate::stats::normal_cdf;

use super::config::{ExperimentConfig, ExperimentKind};
use super::report::{CheckRow, ExperimentReport, SampleTable, StreamUse};
use super::{fmt_x, ordered_mean, Seeds};

const LOCAL_ASSUMPTIONS: [&str; 3] = [
    "conditional distribution functions of X_i given the past are Lipschitz continuous (assumed for the built-in model, not verified)",
    "the marginal distribution functions G_i have tails controlled uniformly in i (assumed, not verified)",
    "the frozen-coefficient process X(v) approximates X_i for i/n near v at the rate of the coefficient smoothness (assumed, not verified)",
];

/// How one path is turned into grid values; `scales[b]` multiplies estimator `b`.
struct Statistic<'a> {
    xgrid: &'a [f64],
    /// `None` for the plain EDF, else `(v, bandwidths, kernel)`.
    local: Option<(f64, Vec<f64>, KernelSpec)>,
    n: usize,
}

impl Statistic<'_> {
    fn count(&self) -> usize {
        self.local.as_ref().map_or(1, |l| l.1.len())
    }

    fn scale(&self, b: usize) -> f64 {
        match &self.local {
            None => (self.n as f64).sqrt(),
            Some((_, hs, _)) => (self.n as f64 * hs[b]).sqrt(),
        }
    }

    /// Estimator values, all bandwidths concatenated.
    fn eval(&self, path: &[f64]) -> Result<Vec<f64>> {
        match &self.local {
            None => Ok(edf(path, self.xgrid)?.values),
            Some((v, hs, k)) => {
                let mut out = Vec::with_capacity(hs.len() * self.xgrid.len());
                for &h in hs {
                    out.extend(localized_edf(path, self.xgrid, *v, h, k)?.values);
                }
                Ok(out)
            }
        }
    }
}

fn path(model: &ProcessModel, n: usize, seed: u64, r: u64) -> Vec<f64> {
    replicate_values(model, n, seed, r, model.default_burnin(), Clock::Path { n })
}

/// Exact `Σ` for i.i.d. Gaussian data, else a long-path Bartlett estimate.
fn target_covariance(
    cfg: &ExperimentConfig,
    model: &ProcessModel,
    v: f64,
    kernel: Option<&KernelSpec>,
    seed: u64,
) -> Result<(Array2<f64>, Array2<f64>, bool)> {
    let spec = model.spec();
    if spec.family == Family::Iid && spec.innovation == Innovation::StandardGaussian {
        let s = spec.innovation_scale;
        let factor = kernel.map_or(1.0, |k| k.l2norm);
        let m = iid_indicator_cov(&cfg.xgrid, |x| normal_cdf(x / s)) * factor;
        let g = cfg.xgrid.len();
        return Ok((m, Array2::zeros((g, g)), true));
    }
    let est = longrun_cov_indicator(model, v, &cfg.xgrid, cfg.longrun_pathlen, cfg.lagmax, seed, kernel)?;
    Ok((est.matrix, est.se_matrix, false))
}

pub fn run_fclt_edf(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if cfg.kind != ExperimentKind::FcltEdf {
        return Err(Error::Config(format!("run_fclt_edf given a {} config", cfg.kind)));
    }
    run(cfg)
}

pub fn run_fclt_local_edf(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if cfg.kind != ExperimentKind::FcltLocalEdf {
        return Err(Error::Config(format!("run_fclt_local_edf given a {} config", cfg.kind)));
    }
    run(cfg)
}

fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let model = cfg.model()?;
    let local = cfg.kind == ExperimentKind::FcltLocalEdf;
    let n = cfg.ns[0];
    let seeds = Seeds::new(cfg.seed);
    let mut report = ExperimentReport::new(cfg);
    let g = cfg.xgrid.len();
    let halving = cfg.tolerances.get_opt("sd_halving");

    let (v, stat) = if local {
        let v = cfg.v.expect("validated");
        let h = cfg.h.as_ref().expect("validated").at(0, n);
        let mut hs = vec![h];
        if halving.is_some() {
            hs.push(0.5 * h);
        }
        let st = Statistic {
            xgrid: &cfg.xgrid,
            local: Some((v, hs, cfg.kernel)),
            n,
        };
        report.assumptions.extend(LOCAL_ASSUMPTIONS);
        (v, st)
    } else {
        let st = Statistic {
            xgrid: &cfg.xgrid,
            local: None,
            n,
        };
        (0.5, st)
    };
    let width = stat.count() * g;

    let t = Instant::now();
    let pilot_reps = cfg.pilot_reps as u64;
    let center = ordered_mean(pilot_reps, width, |r| stat.eval(&path(&model, n, seeds.pilot, r)))?;
    report.timing.push(("pilot".into(), t.elapsed()));
    report.streams.push(StreamUse {
        purpose: "pilot",
        seed: seeds.pilot,
        label: crate::process::INNOVATION_LABEL,
        replicates: 0..pilot_reps,
    });

    let t = Instant::now();
    let m = cfg.reps;
    let rows: Vec<Vec<f64>> = (0..m as u64)
        .into_par_iter()
        .map(|r| stat.eval(&path(&model, n, seeds.target, r)))
        .collect::<Result<_>>()?;
    // stats[b][r][j]: scaled deviation for bandwidth b, replicate r, grid point j
    let stats: Vec<Vec<Vec<f64>>> = (0..stat.count())
        .map(|b| {
            let s = stat.scale(b);
            rows.iter()
                .map(|row| (0..g).map(|j| s * (row[b * g + j] - center[b * g + j])).collect())
                .collect()
        })
        .collect();
    report.timing.push(("replicates".into(), t.elapsed()));
    report.streams.push(StreamUse {
        purpose: "target",
        seed: seeds.target,
        label: crate::process::INNOVATION_LABEL,
        replicates: 0..m as u64,
    });

    let t = Instant::now();
    let kernel = local.then_some(&cfg.kernel);
    let (sigma, sigma_se, exact) = target_covariance(cfg, &model, v, kernel, seeds.longrun)?;
    if !exact {
        report.streams.push(StreamUse {
            purpose: "long-run covariance",
            seed: seeds.longrun,
            label: crate::process::INNOVATION_LABEL,
            replicates: 0..1,
        });
    }
    report.timing.push(("covariance".into(), t.elapsed()));

    let main = &stats[0];
    let mf = m as f64;
    let second = |i: usize, j: usize| main.iter().map(|r| r[i] * r[j]).sum::<f64>() / mf;
    let tol_var = cfg.tolerances.get("variance_rel");
    for j in 0..g {
        let emp = second(j, j);
        let target = sigma[[j, j]];
        let fourth = main.iter().map(|r| r[j].powi(4)).sum::<f64>() / mf;
        let se_emp = ((fourth - emp * emp).max(0.0) / mf).sqrt();
        let (rel, se) = if target > 0.0 {
            let se = (se_emp * se_emp + sigma_se[[j, j]].powi(2)).sqrt() / target;
            ((emp - target).abs() / target, Some(se))
        } else if emp == 0.0 {
            (0.0, None)
        } else {
            (f64::INFINITY, None)
        };
        report
            .rows
            .push(CheckRow::at_most(format!("variance[x={}]", fmt_x(cfg.xgrid[j])), rel, tol_var, se));
    }
    let k = cfg.tolerances.get("cov_se");
    for i in 0..g {
        for j in i + 1..g {
            let emp = second(i, j);
            let target = sigma[[i, j]];
            let se_emp = ((sigma[[i, i]] * sigma[[j, j]] + target * target) / (mf - 1.0)).sqrt();
            let se = (se_emp * se_emp + sigma_se[[i, j]].powi(2)).sqrt();
            let z = if se > 0.0 {
                (emp - target).abs() / se
            } else if emp == target {
                0.0
            } else {
                f64::INFINITY
            };
            let mut row = CheckRow::at_most(
                format!("covariance[x={};y={}]", fmt_x(cfg.xgrid[i]), fmt_x(cfg.xgrid[j])),
                z,
                k,
                Some(se),
            );
            // a clearly nonzero target must be matched in sign
            if target.abs() > k * se && emp * target <= 0.0 {
                row.pass = false;
            }
            report.rows.push(row);
        }
    }

    let t = Instant::now();
    let sup = |rows: &[Vec<f64>]| -> Vec<f64> {
        rows.iter().map(|r| r.iter().fold(0.0f64, |a, v| a.max(v.abs()))).collect()
    };
    let mc_sup = sup(main);
    let limit = sample_gaussian_limit(&sigma, cfg.limit_draws, seeds.limit)?;
    let ks = ks_distance(&mc_sup, &limit.sup_stats)?;
    report.rows.push(CheckRow::at_most("ks_sup", ks, cfg.tolerances.get("ks"), None));
    report.streams.push(StreamUse {
        purpose: "gaussian limit",
        seed: seeds.limit,
        label: "gaussian",
        replicates: 0..cfg.limit_draws as u64,
    });
    if limit.chol_jitter > 0.0 {
        report
            .warnings
            .push(format!("covariance factorized with diagonal jitter {:e}", limit.chol_jitter));
    }
    report.timing.push(("limit".into(), t.elapsed()));

    if let Some(tol) = halving {
        let half = &stats[1];
        for j in 0..g {
            let sd = |rows: &[Vec<f64>]| (rows.iter().map(|r| r[j] * r[j]).sum::<f64>() / mf).sqrt();
            let (a, b) = (sd(main), sd(half));
            let change = if a > 0.0 { (b / a - 1.0).abs() } else { f64::INFINITY };
            report.rows.push(CheckRow::at_most(
                format!("sd_change_half_h[x={}]", fmt_x(cfg.xgrid[j])),
                change,
                tol,
                None,
            ));
        }
    }

    let mut st = SampleTable::new("statistic", vec!["replicate", "x", "value"]);
    for (r, row) in main.iter().enumerate() {
        for (j, val) in row.iter().enumerate() {
            st.push(vec![r.to_string(), fmt_x(cfg.xgrid[j]), val.to_string()]);
        }
    }
    let mut ms = SampleTable::new("sup_mc", vec!["replicate", "value"]);
    for (r, s) in mc_sup.iter().enumerate() {
        ms.push(vec![r.to_string(), s.to_string()]);
    }
    let mut ls = SampleTable::new("sup_limit", vec!["draw", "value"]);
    for (r, s) in limit.sup_stats.iter().enumerate() {
        ls.push(vec![r.to_string(), s.to_string()]);
    }
    let mut cv = SampleTable::new("target_covariance", vec!["x", "y", "sigma", "se", "empirical"]);
    for i in 0..g {
        for j in 0..g {
            cv.push(vec![
                fmt_x(cfg.xgrid[i]),
                fmt_x(cfg.xgrid[j]),
                sigma[[i, j]].to_string(),
                sigma_se[[i, j]].to_string(),
                second(i, j).to_string(),
            ]);
        }
    }
    report.samples.extend([st, ms, ls, cv]);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(kind: &str, extra: &str) -> ExperimentConfig {
        let text = format!(
            "[experiment]\nkind = {kind}\nseed = 5\nreps = 100\npilot_reps = 50\n\
             [process]\nfamily = iid\n[grids]\nx = -1, 0, 1\n{extra}"
        );
        ExperimentConfig::parse(&text).unwrap()
    }

    #[test]
    fn local_target_is_kernel_factor_times_plain() {
        let plain = cfg("fclt_edf", "[schedule]\nn = 500\n");
        let local = cfg("fclt_local_edf", "v = 0.5\n[schedule]\nn = 500\nh = n^(-1/3)\n");
        let model = plain.model().unwrap();
        let (a, _, exact) = target_covariance(&plain, &model, 0.5, None, 0).unwrap();
        assert!(exact);
        let k = KernelSpec::epanechnikov();
        let (b, _, _) = target_covariance(&local, &model, 0.5, Some(&k), 0).unwrap();
        assert_eq!(b, &a * (6.0 / 5.0));
        assert_eq!(a[[1, 1]], 0.25);
    }

    #[test]
    fn rows_match_configured_checks() {
        let c = cfg("fclt_edf", "[schedule]\nn = 200\nlimit_draws = 500\n");
        let r = run_fclt_edf(&c).unwrap();
        // three variances, three covariances, one KS
        assert_eq!(r.rows.len(), 7);
        let names: Vec<&str> = r.rows.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names[0], "variance[x=-1]");
        assert_eq!(names[3], "covariance[x=-1;y=0]");
        assert_eq!(names[6], "ks_sup");
        assert!(r.stream_conflicts().is_empty());
        assert!(run_fclt_local_edf(&c).is_err());
    }

    #[test]
    fn reproducible_and_thread_count_free() {
        let c = cfg("fclt_local_edf", "v = 0.5\n[schedule]\nn = 300\nh = 0.3\nlimit_draws = 200\n[tolerances]\nsd_halving = 0.1\n");
        let a = run_fclt_local_edf(&c).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| run_fclt_local_edf(&c)).unwrap();
        assert_eq!(a.report_csv(), b.report_csv());
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.rows.len(), 3 + 3 + 1 + 3);
        assert_eq!(a.assumptions.len(), 3);
    }
}
