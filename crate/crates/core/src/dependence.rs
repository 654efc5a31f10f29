//! Monte Carlo estimation of the functional dependence measure.

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::process::{Clock, ProcessModel};
use crate::rng::{derive_seed, Stream};
use crate::stats::ols;

pub const BOOTSTRAP_RESAMPLES: usize = 200;
pub const MIN_REPS: usize = 100;
/// Lags with `δ̂ < NOISE_FLOOR · SE` are left out of decay fits.
pub const NOISE_FLOOR: f64 = 3.0;
pub const MIN_FIT_POINTS: usize = 4;
/// Largest tolerated absolute log-residual of a decay fit.
pub const MAX_FIT_RESIDUAL: f64 = std::f64::consts::LN_10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeltaEstimate {
    pub k: usize,
    pub value: f64,
    /// Bootstrap standard error.
    pub se: f64,
    /// Evaluation index realizing the reported maximum.
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DependenceProfile {
    pub nu: f64,
    pub lags: Vec<usize>,
    pub delta_hat: Vec<f64>,
    pub se: Vec<f64>,
    pub reps: usize,
    pub spec_digest: String,
}

impl DependenceProfile {
    /// `δ̂(k)` if `k` is one of the estimated lags.
    pub fn at(&self, k: usize) -> Option<f64> {
        self.lags.iter().position(|&l| l == k).map(|i| self.delta_hat[i])
    }
}

/// Short stable identifier of a process specification.
pub fn spec_digest(model: &ProcessModel) -> String {
    let hash = Sha256::digest(model.spec().to_string().as_bytes());
    hex::encode(&hash[..8])
}

/// Indices at which `sup_i` is approximated: `i = n` and the index of the
/// strongest memory.
fn eval_indices(model: &ProcessModel, n: usize) -> Vec<usize> {
    let worst = ((model.worst_time() * n as f64).round() as usize).clamp(1, n);
    if worst == n {
        vec![n]
    } else {
        vec![worst, n]
    }
}

/// `|X_i − X_i^{*(i−k)}|^ν` for every replicate, lag and evaluation index,
/// laid out as `[rep][lag][index]`.
fn coupled_powers(
    model: &ProcessModel,
    n: usize,
    lags: &[usize],
    nu: f64,
    reps: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<Vec<Vec<f64>>>)> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size n must be at least 1".into()));
    }
    if !(nu > 0.0) {
        return Err(Error::InvalidArgument(format!("moment order ν must be positive, got {nu}")));
    }
    if reps < MIN_REPS {
        return Err(Error::InvalidArgument(format!(
            "dependence estimation needs at least {MIN_REPS} replicates, got {reps}"
        )));
    }
    model.spec().innovation.require_moment(nu)?;
    let burnin = model.default_burnin();
    let kmax = lags.iter().copied().max().unwrap_or(0);
    if kmax > n + burnin {
        return Err(Error::LagExceedsPast {
            lag: kmax,
            available: n + burnin,
        });
    }
    let idx = eval_indices(model, n);
    let clock = Clock::Path { n };
    let first = idx[0] as i64;
    let powers = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let start = model.first_time(burnin).min(first - kmax as i64);
            let eps = model.innovations(seed, r, start, n as i64);
            let states = if model.is_recursive() {
                model.states(&eps, start, n as i64, clock)
            } else {
                Vec::new()
            };
            let base: Vec<f64> = idx
                .iter()
                .map(|&i| {
                    if model.is_recursive() {
                        states[(i as i64 - start) as usize]
                    } else {
                        model.values(&eps, start, i as i64, i as i64, clock, burnin)[0]
                    }
                })
                .collect();
            lags.iter()
                .map(|&k| {
                    idx.iter()
                        .zip(&base)
                        .map(|(&i, &b)| {
                            let t_swap = i as i64 - k as i64;
                            let star = model.coupled_innovation(seed, r, t_swap);
                            let x = model.swapped_value(
                                &eps, start, &states, b, i as i64, t_swap, star, clock, burnin,
                            );
                            (b - x).abs().powf(nu)
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok((idx, powers))
}

/// Bootstrap standard error of `(mean x)^{1/ν}`.
fn bootstrap_se(x: &[f64], nu: f64, seed: u64, label: &str, id: u64) -> f64 {
    if x.iter().all(|v| *v == 0.0) {
        return 0.0;
    }
    let n = x.len();
    let boot_seed = derive_seed(seed, "bootstrap");
    let stats: Vec<f64> = (0..BOOTSTRAP_RESAMPLES as u64)
        .into_par_iter()
        .map(|b| {
            let mut s = Stream::new(boot_seed, label, id * BOOTSTRAP_RESAMPLES as u64 + b);
            let mut acc = 0.0;
            for _ in 0..n {
                acc += x[s.index(n)];
            }
            (acc / n as f64).powf(1.0 / nu)
        })
        .collect();
    let m = stats.iter().sum::<f64>() / stats.len() as f64;
    (stats.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (stats.len() - 1) as f64).sqrt()
}

fn summarize(
    idx: &[usize],
    powers: &[Vec<Vec<f64>>],
    lags: &[usize],
    nu: f64,
    seed: u64,
) -> Vec<DeltaEstimate> {
    let reps = powers.len();
    lags.iter()
        .enumerate()
        .map(|(li, &k)| {
            let mut best: Option<(usize, f64)> = None;
            for j in 0..idx.len() {
                let m = powers.iter().map(|p| p[li][j]).sum::<f64>() / reps as f64;
                let v = m.powf(1.0 / nu);
                if best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((j, v));
                }
            }
            let (j, value) = best.expect("at least one evaluation index");
            let col: Vec<f64> = powers.iter().map(|p| p[li][j]).collect();
            DeltaEstimate {
                k,
                value,
                se: bootstrap_se(&col, nu, seed, "delta", k as u64),
                index: idx[j],
            }
        })
        .collect()
}

/// `δ̂_ν(k) = (mean_r |X_i − X_i^{*(i−k)}|^ν)^{1/ν}`, maximized over the
/// evaluation indices, for paths of length `n`.
pub fn estimate_delta(
    model: &ProcessModel,
    n: usize,
    k: usize,
    nu: f64,
    reps: usize,
    seed: u64,
) -> Result<DeltaEstimate> {
    let (idx, powers) = coupled_powers(model, n, &[k], nu, reps, seed)?;
    Ok(summarize(&idx, &powers, &[k], nu, seed)[0])
}

/// [`estimate_delta`] for `k = 0..=kmax` on common random numbers.
pub fn delta_profile(
    model: &ProcessModel,
    n: usize,
    kmax: usize,
    nu: f64,
    reps: usize,
    seed: u64,
) -> Result<DependenceProfile> {
    if kmax == 0 {
        return Err(Error::InvalidArgument("kmax must be at least 1".into()));
    }
    let lags: Vec<usize> = (0..=kmax).collect();
    let (idx, powers) = coupled_powers(model, n, &lags, nu, reps, seed)?;
    let est = summarize(&idx, &powers, &lags, nu, seed);
    Ok(DependenceProfile {
        nu,
        lags,
        delta_hat: est.iter().map(|e| e.value).collect(),
        se: est.iter().map(|e| e.se).collect(),
        reps,
        spec_digest: spec_digest(model),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecayKind {
    Polynomial,
    Exponential,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Decay {
    /// `c k^{-α}`.
    Polynomial { c: f64, alpha: f64 },
    /// `c ρ^k`.
    Exponential { c: f64, rho: f64 },
    /// No dependence detected beyond lag 0.
    Independent,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayModel {
    pub decay: Decay,
    pub fit_range: Vec<usize>,
    /// Largest absolute residual of the log-scale fit.
    pub fit_residual: f64,
}

impl DecayModel {
    /// Fitted `δ(k)`; the polynomial form is evaluated at `max(k, 1)`.
    pub fn eval(&self, k: usize) -> f64 {
        match self.decay {
            Decay::Polynomial { c, alpha } => c * (k.max(1) as f64).powf(-alpha),
            Decay::Exponential { c, rho } => c * rho.powi(k as i32),
            Decay::Independent => 0.0,
        }
    }
}

/// Least-squares fit of `log δ̂(k)` over lags `k ≥ 1` above the noise floor.
pub fn fit_decay(profile: &DependenceProfile, kind: DecayKind) -> Result<DecayModel> {
    let positive = profile
        .lags
        .iter()
        .zip(&profile.delta_hat)
        .any(|(&k, &d)| k >= 1 && d > 0.0);
    if !positive {
        return Ok(DecayModel {
            decay: Decay::Independent,
            fit_range: Vec::new(),
            fit_residual: 0.0,
        });
    }
    let mut range = Vec::new();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for ((&k, &d), &se) in profile.lags.iter().zip(&profile.delta_hat).zip(&profile.se) {
        if k >= 1 && d > 0.0 && d >= NOISE_FLOOR * se {
            range.push(k);
            x.push(match kind {
                DecayKind::Polynomial => (k as f64).ln(),
                DecayKind::Exponential => k as f64,
            });
            y.push(d.ln());
        }
    }
    if range.len() < MIN_FIT_POINTS {
        return Err(Error::IllConditionedFit {
            reason: format!(
                "only {} lag(s) above the noise floor, need {MIN_FIT_POINTS}",
                range.len()
            ),
            residual: f64::NAN,
        });
    }
    let fit = ols(&x, &y);
    let c = fit.intercept.exp();
    let decay = match kind {
        DecayKind::Polynomial => Decay::Polynomial { c, alpha: -fit.slope },
        DecayKind::Exponential => Decay::Exponential { c, rho: fit.slope.exp() },
    };
    let admissible = match decay {
        Decay::Polynomial { alpha, .. } => alpha > 1.0,
        Decay::Exponential { rho, .. } => rho > 0.0 && rho < 1.0,
        Decay::Independent => true,
    };
    if !admissible {
        return Err(Error::IllConditionedFit {
            reason: format!("fitted decay {decay:?} is not summable"),
            residual: fit.max_abs_residual,
        });
    }
    if fit.max_abs_residual > MAX_FIT_RESIDUAL {
        return Err(Error::IllConditionedFit {
            reason: "profile is not log-linear in the fit range".into(),
            residual: fit.max_abs_residual,
        });
    }
    Ok(DecayModel {
        decay,
        fit_range: range,
        fit_residual: fit.max_abs_residual,
    })
}
