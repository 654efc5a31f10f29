use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::stats::ols;

use super::model::{Clock, ProcessModel};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PathKind {
    Raw,
    StationaryAt(f64),
    CoupledPair { lag: usize },
}

/// Simulated paths, one row per replicate, column `i - 1` holding `X_i`.
#[derive(Clone, Debug)]
pub struct PathEnsemble {
    pub values: Array2<f64>,
    /// The coupled copy (same shape) for [`PathKind::CoupledPair`].
    pub coupled: Option<Array2<f64>>,
    pub seed: u64,
    pub burnin: usize,
    pub kind: PathKind,
}

impl PathEnsemble {
    pub fn replicates(&self) -> usize {
        self.values.nrows()
    }

    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, r: usize) -> Vec<f64> {
        self.values.row(r).to_vec()
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size n must be at least 1".into()));
    }
    Ok(())
}

fn assemble(rows: Vec<Vec<f64>>, n: usize) -> Array2<f64> {
    let reps = rows.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((reps, n), flat).expect("rows have length n")
}

/// One replicate of `X_1..X_end` under `clock`.
pub(crate) fn replicate_values(
    model: &ProcessModel,
    end: usize,
    seed: u64,
    replicate: u64,
    burnin: usize,
    clock: Clock,
) -> Vec<f64> {
    let start = model.first_time(burnin);
    let eps = model.innovations(seed, replicate, start, end as i64);
    model.values(&eps, start, 1, end as i64, clock, burnin)
}

fn simulate_with_clock(
    model: &ProcessModel,
    n: usize,
    reps: usize,
    seed: u64,
    burnin: Option<usize>,
    clock: Clock,
    kind: PathKind,
) -> Result<PathEnsemble> {
    check_n(n)?;
    if reps == 0 {
        return Err(Error::InvalidArgument("replicate count must be at least 1".into()));
    }
    let burnin = burnin.unwrap_or(model.default_burnin());
    let rows: Vec<Vec<f64>> = (0..reps as u64)
        .into_par_iter()
        .map(|r| replicate_values(model, n, seed, r, burnin, clock))
        .collect();
    Ok(PathEnsemble {
        values: assemble(rows, n),
        coupled: None,
        seed,
        burnin,
        kind,
    })
}

/// `X_1..X_n` with coefficients evaluated at `u = i/n`.
pub fn simulate_path(
    model: &ProcessModel,
    n: usize,
    seed: u64,
    burnin: Option<usize>,
) -> Result<PathEnsemble> {
    simulate_paths(model, n, 1, seed, burnin)
}

/// `reps` independent replicates of [`simulate_path`]; replicate `r` uses
/// stream `(seed, r)`.
pub fn simulate_paths(
    model: &ProcessModel,
    n: usize,
    reps: usize,
    seed: u64,
    burnin: Option<usize>,
) -> Result<PathEnsemble> {
    simulate_with_clock(model, n, reps, seed, burnin, Clock::Path { n }, PathKind::Raw)
}

/// The frozen-coefficient process `X̃_i(u)`, driven by the same innovations
/// as [`simulate_paths`] for the same seed.
pub fn simulate_stationary(
    model: &ProcessModel,
    u: f64,
    n: usize,
    reps: usize,
    seed: u64,
    burnin: Option<usize>,
) -> Result<PathEnsemble> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::InvalidArgument(format!("rescaled time u = {u} is outside [0, 1]")));
    }
    simulate_with_clock(
        model,
        n,
        reps,
        seed,
        burnin,
        Clock::Frozen(u),
        PathKind::StationaryAt(u),
    )
}

/// Paths driven by innovations that agree except at time `n - k`, where the
/// second path uses an independent copy `ε*` (stream `(seed, "couple", r)`).
pub fn simulate_coupled_pair(
    model: &ProcessModel,
    n: usize,
    k: usize,
    reps: usize,
    seed: u64,
    burnin: Option<usize>,
) -> Result<PathEnsemble> {
    check_n(n)?;
    let burnin = burnin.unwrap_or(model.default_burnin());
    if k > n + burnin {
        return Err(Error::LagExceedsPast {
            lag: k,
            available: n + burnin,
        });
    }
    let clock = Clock::Path { n };
    let t_swap = n as i64 - k as i64;
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            // always include t_swap so the copy is well defined
            let start = model.first_time(burnin).min(t_swap);
            let eps = model.innovations(seed, r, start, n as i64);
            let base = model.values(&eps, start, 1, n as i64, clock, burnin);
            let mut eps_star = eps.clone();
            eps_star[(t_swap - start) as usize] = model.coupled_innovation(seed, r, t_swap);
            let star = model.values(&eps_star, start, 1, n as i64, clock, burnin);
            (base, star)
        })
        .collect();
    let (base, star): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    Ok(PathEnsemble {
        values: assemble(base, n),
        coupled: Some(assemble(star, n)),
        seed,
        burnin,
        kind: PathKind::CoupledPair { lag: k },
    })
}

#[derive(Clone, Debug)]
pub struct DeviationRow {
    pub n: usize,
    /// `max_i ‖X_i − X̃_i(i/n)‖_{2s}` over the evaluation indices.
    pub max_deviation: f64,
    pub argmax_index: usize,
    /// Monte Carlo standard error of the maximal deviation (delta method).
    pub se: f64,
}

#[derive(Clone, Debug)]
pub struct LocalStationarityReport {
    pub rows: Vec<DeviationRow>,
    /// Fitted exponent ς̂ in `max deviation ≈ C_X n^(-ς)`; `None` when every
    /// deviation is zero.
    pub varsigma: Option<f64>,
    pub varsigma_se: Option<f64>,
    pub c_x: f64,
}

/// Number of evaluation indices per sample size.
pub const DEVIATION_INDICES: usize = 33;

/// Monte Carlo check of `‖X_i − X̃_i(i/n)‖_{2s} ≤ C_X n^{-ς}` over a ladder
/// of sample sizes. The supremum over `i` is taken over
/// [`DEVIATION_INDICES`] equispaced indices (always including `i = n`).
pub fn local_stationarity_check(
    model: &ProcessModel,
    ns: &[usize],
    s: f64,
    reps: usize,
    seed: u64,
) -> Result<LocalStationarityReport> {
    if !(s > 0.0) {
        return Err(Error::InvalidArgument(format!("moment exponent s must be positive, got {s}")));
    }
    model.spec().innovation.require_moment(2.0 * s)?;
    if ns.is_empty() || reps < 2 {
        return Err(Error::InvalidArgument("need at least one n and two replicates".into()));
    }
    let burnin = model.default_burnin();
    let p = 2.0 * s;
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        check_n(n)?;
        let mut idx: Vec<usize> = (0..DEVIATION_INDICES)
            .map(|m| 1 + ((n - 1) * m) / (DEVIATION_INDICES - 1))
            .collect();
        idx.dedup();
        let per_rep: Vec<Vec<f64>> = (0..reps as u64)
            .into_par_iter()
            .map(|r| {
                let start = model.first_time(burnin);
                let eps = model.innovations(seed, r, start, n as i64);
                let path = model.values(&eps, start, 1, n as i64, Clock::Path { n }, burnin);
                idx.iter()
                    .map(|&i| {
                        let u = i as f64 / n as f64;
                        let frozen =
                            model.values(&eps, start, i as i64, i as i64, Clock::Frozen(u), burnin)
                                [0];
                        (path[i - 1] - frozen).abs().powf(p)
                    })
                    .collect()
            })
            .collect();
        let mut best = DeviationRow {
            n,
            max_deviation: -1.0,
            argmax_index: idx[0],
            se: 0.0,
        };
        for (j, &i) in idx.iter().enumerate() {
            let col: Vec<f64> = per_rep.iter().map(|v| v[j]).collect();
            let m = col.iter().sum::<f64>() / reps as f64;
            let var = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (reps - 1) as f64;
            let dev = m.powf(1.0 / p);
            if dev > best.max_deviation {
                // d(m^(1/p))/dm = m^(1/p - 1)/p
                let se = if m > 0.0 {
                    m.powf(1.0 / p - 1.0) / p * (var / reps as f64).sqrt()
                } else {
                    0.0
                };
                best = DeviationRow {
                    n,
                    max_deviation: dev,
                    argmax_index: i,
                    se,
                };
            }
        }
        rows.push(best);
    }
    let positive = rows.iter().all(|r| r.max_deviation > 0.0);
    let (varsigma, varsigma_se, c_x) = if positive && rows.len() >= 2 {
        let x: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.max_deviation.ln()).collect();
        let fit = ols(&x, &y);
        (Some(-fit.slope), fit.slope_se, fit.intercept.exp())
    } else {
        (None, None, rows.iter().map(|r| r.max_deviation).fold(0.0, f64::max))
    };
    Ok(LocalStationarityReport {
        rows,
        varsigma,
        varsigma_se,
        c_x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{CoefFn, Family, Innovation, MaDecay, ProcessSpec};

    fn ar(a: f64) -> ProcessModel {
        ProcessModel::new(ProcessSpec::ar1(CoefFn::Constant(a))).unwrap()
    }

    fn affine() -> ProcessModel {
        ProcessModel::new(ProcessSpec::ar1(CoefFn::Affine {
            intercept: 0.2,
            slope: 0.6,
        }))
        .unwrap()
    }

    fn iid() -> ProcessModel {
        ProcessModel::new(ProcessSpec::iid_gaussian()).unwrap()
    }

    fn lag1_autocorr(x: &[f64]) -> f64 {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let c0 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>();
        let c1 = x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>();
        c1 / c0
    }

    fn variance(x: &[f64]) -> f64 {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)
    }

    #[test]
    fn n_zero_is_rejected() {
        assert!(simulate_path(&iid(), 0, 1, None).is_err());
    }

    #[test]
    fn iid_draws_are_uncorrelated() {
        let p = simulate_path(&iid(), 3, 5, None).unwrap();
        assert_eq!(p.values.shape(), &[1, 3]);
        let x = simulate_path(&iid(), 100_000, 5, None).unwrap().row(0);
        let rho = lag1_autocorr(&x);
        assert!(rho.abs() < 3.0 / (x.len() as f64).sqrt(), "rho = {rho}");
    }

    #[test]
    fn zero_coefficient_ar_matches_iid() {
        let a = simulate_path(&ar(0.0), 50, 9, None).unwrap();
        let b = simulate_path(&iid(), 50, 9, None).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn ar_stationary_variance() {
        let x = simulate_path(&ar(0.5), 100_000, 21, None).unwrap().row(0);
        let v = variance(&x);
        assert!((v / (4.0 / 3.0) - 1.0).abs() < 0.02, "variance {v}");
    }

    #[test]
    fn frozen_coefficient_at_zero_matches_constant_ar() {
        let a = simulate_stationary(&affine(), 0.0, 200, 2, 4, None).unwrap();
        let b = simulate_paths(&ar(0.2), 200, 2, 4, None).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn frozen_variances_at_the_ends() {
        for (u, a) in [(0.0, 0.2), (1.0, 0.8)] {
            let x = simulate_stationary(&affine(), u, 100_000, 1, 17, None)
                .unwrap()
                .row(0);
            let target = 1.0 / (1.0 - a * a);
            assert!((variance(&x) / target - 1.0).abs() < 0.02, "u = {u}");
        }
    }

    #[test]
    fn iid_stationary_is_the_path() {
        for u in [0.0, 0.3, 1.0] {
            let a = simulate_stationary(&iid(), u, 64, 3, 2, None).unwrap();
            let b = simulate_paths(&iid(), 64, 3, 2, None).unwrap();
            assert_eq!(a.values, b.values);
        }
    }

    #[test]
    fn coupled_pair_iid() {
        let p = simulate_coupled_pair(&iid(), 10, 3, 4, 1, None).unwrap();
        let star = p.coupled.as_ref().unwrap();
        for r in 0..4 {
            assert_eq!(p.values[[r, 9]], star[[r, 9]]);
        }
        let p = simulate_coupled_pair(&iid(), 10, 0, 4, 1, None).unwrap();
        let star = p.coupled.unwrap();
        let m = iid();
        for r in 0..4u64 {
            let eps = m.innovations(1, r, 10, 10)[0];
            let eps_star = m.coupled_innovation(1, r, 10);
            assert_ne!(eps, eps_star);
            assert_eq!(p.values[[r as usize, 9]] - star[[r as usize, 9]], eps - eps_star);
        }
    }

    #[test]
    fn coupled_pair_ar_unrolls() {
        let m = ar(0.5);
        let (n, k, burnin) = (40usize, 3usize, 1000usize);
        let p = simulate_coupled_pair(&m, n, k, 2, 8, Some(burnin)).unwrap();
        let star = p.coupled.as_ref().unwrap();
        for r in 0..2u64 {
            // independent recomputation of both recursions
            let eps = m.innovations(8, r, -(burnin as i64), n as i64);
            let t_swap = (n - k) as i64;
            let e_star = m.coupled_innovation(8, r, t_swap);
            let (mut x, mut y) = (0.0, 0.0);
            for (j, e) in eps.iter().enumerate() {
                let t = j as i64 - burnin as i64;
                x = 0.5 * x + e;
                y = 0.5 * y + if t == t_swap { e_star } else { *e };
            }
            let ru = r as usize;
            assert!((p.values[[ru, n - 1]] - x).abs() < 1e-12);
            assert!((star[[ru, n - 1]] - y).abs() < 1e-12);
            let expected = 0.125 * (eps[(t_swap + burnin as i64) as usize] - e_star);
            assert!((p.values[[ru, n - 1]] - star[[ru, n - 1]] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn coupled_lag_beyond_past_is_an_error() {
        let err = simulate_coupled_pair(&ar(0.5), 10, 1011, 1, 1, Some(1000)).unwrap_err();
        assert!(matches!(err, Error::LagExceedsPast { .. }));
        assert!(simulate_coupled_pair(&ar(0.5), 10, 1010, 1, 1, Some(1000)).is_ok());
    }

    #[test]
    fn coupled_paths_coincide_beyond_ma_truncation() {
        let m = ProcessModel::new(ProcessSpec::new(
            Family::TvLinearMa {
                scale: CoefFn::Constant(1.0),
                decay: MaDecay::Geometric { rate: 0.5 },
            },
            Innovation::StandardGaussian,
        ))
        .unwrap();
        let burnin = 30;
        let n = 20;
        let p = simulate_coupled_pair(&m, n, burnin + 1, 3, 2, Some(burnin)).unwrap();
        let star = p.coupled.unwrap();
        for r in 0..3 {
            assert_eq!(p.values[[r, n - 1]], star[[r, n - 1]]);
        }
    }

    #[test]
    fn doubling_burnin_stays_within_truncation_bound() {
        let m = ar(0.9);
        let b = m.default_burnin();
        let x1 = simulate_paths(&m, 50, 4, 3, Some(b)).unwrap();
        let x2 = simulate_paths(&m, 50, 4, 3, Some(2 * b)).unwrap();
        // innovations are addressed by time, so only the truncated past differs
        let bound = m.truncation_bound(b) * 10.0;
        for r in 0..4 {
            assert!((x1.values[[r, 49]] - x2.values[[r, 49]]).abs() <= bound);
        }
    }

    #[test]
    fn local_stationarity_trivial_cases() {
        for m in [iid(), ar(0.6)] {
            let rep = local_stationarity_check(&m, &[100, 200], 1.0, 50, 3).unwrap();
            assert!(rep.rows.iter().all(|r| r.max_deviation == 0.0));
            assert!(rep.varsigma.is_none());
        }
        let t2 = ProcessModel::new(
            ProcessSpec::ar1(CoefFn::Constant(0.5))
                .with_innovation(Innovation::StudentT { df: 1.5 }),
        )
        .unwrap();
        assert!(local_stationarity_check(&t2, &[100], 1.0, 10, 1).is_err());
    }
}
