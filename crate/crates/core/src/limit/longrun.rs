use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::KernelSpec;
use crate::process::{replicate_values, Clock, ProcessModel};

/// Paths must be at least this many times longer than the lag window.
pub const MIN_PATH_PER_LAG: usize = 50;
/// Number of midpoints of the rescaled-time rule in the global case.
pub const GLOBAL_U_POINTS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LagWindow {
    pub name: &'static str,
    pub lagmax: usize,
}

/// Long-run covariance `Σ(x, y)` of indicator functions on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceEstimate {
    pub xgrid: Vec<f64>,
    pub matrix: Array2<f64>,
    pub lag_window: LagWindow,
    /// `∫K²` for the local case, else 1.
    pub kernel_factor: f64,
    /// Length of each simulated path.
    pub pathlen: usize,
    /// Number of independent paths averaged (64 in the global case).
    pub paths: usize,
    /// Asymptotic standard errors of the entries.
    pub se_matrix: Array2<f64>,
}

pub fn default_lagmax(pathlen: usize) -> usize {
    ((pathlen as f64).cbrt().ceil() as usize).max(1)
}

/// Bartlett estimate `Γ₀ + Σ_{k=1}^{L} (1 − k/(L+1)) (Γ_k + Γ_kᵀ)` of the
/// long-run covariance of `(1{X_t ≤ x})_x` from one path.
pub fn bartlett_indicator_cov(path: &[f64], xgrid: &[f64], lagmax: usize) -> Array2<f64> {
    let n = path.len();
    let g = xgrid.len();
    let centered: Vec<Vec<f64>> = xgrid
        .iter()
        .map(|&x| {
            let ind: Vec<f64> = path.iter().map(|&v| if v <= x { 1.0 } else { 0.0 }).collect();
            let mean = ind.iter().sum::<f64>() / n as f64;
            ind.into_iter().map(|v| v - mean).collect()
        })
        .collect();
    let pairs: Vec<(usize, usize)> = (0..g).flat_map(|i| (i..g).map(move |j| (i, j))).collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (a, b) = (&centered[i], &centered[j]);
            let mut s = a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
            for k in 1..=lagmax.min(n - 1) {
                let w = 1.0 - k as f64 / (lagmax as f64 + 1.0);
                let ab: f64 = a[..n - k].iter().zip(&b[k..]).map(|(p, q)| p * q).sum();
                let ba: f64 = b[..n - k].iter().zip(&a[k..]).map(|(p, q)| p * q).sum();
                s += w * (ab + ba);
            }
            s / n as f64
        })
        .collect();
    let mut m = Array2::zeros((g, g));
    for (&(i, j), v) in pairs.iter().zip(values) {
        m[[i, j]] = v;
        m[[j, i]] = v;
    }
    m
}

fn se_matrix(m: &Array2<f64>, lagmax: usize, effort: usize) -> Array2<f64> {
    let g = m.nrows();
    let c = 2.0 * lagmax as f64 / (3.0 * effort as f64);
    Array2::from_shape_fn((g, g), |(i, j)| {
        (c * (m[[i, i]] * m[[j, j]] + m[[i, j]] * m[[i, j]])).max(0.0).sqrt()
    })
}

fn check_inputs(xgrid: &[f64], pathlen: usize, lagmax: usize) -> Result<()> {
    if xgrid.is_empty() {
        return Err(Error::InvalidArgument("empty x-grid".into()));
    }
    if lagmax == 0 || pathlen < MIN_PATH_PER_LAG * lagmax {
        return Err(Error::InvalidArgument(format!(
            "path length {pathlen} is too short for lag window {lagmax} (need at least {MIN_PATH_PER_LAG}×)"
        )));
    }
    Ok(())
}

/// Long-run covariance of the stationary approximation `X̃(v)`; with a
/// kernel the whole matrix is multiplied by `∫K²` (local case).
pub fn longrun_cov_indicator(
    model: &ProcessModel,
    v: f64,
    xgrid: &[f64],
    pathlen: usize,
    lagmax: Option<usize>,
    seed: u64,
    kernel: Option<&KernelSpec>,
) -> Result<CovarianceEstimate> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidArgument(format!("rescaled time v = {v} is outside [0, 1]")));
    }
    let lagmax = lagmax.unwrap_or_else(|| default_lagmax(pathlen));
    check_inputs(xgrid, pathlen, lagmax)?;
    let path = replicate_values(model, pathlen, seed, 0, model.default_burnin(), Clock::Frozen(v));
    let factor = kernel.map_or(1.0, |k| k.l2norm);
    let m = bartlett_indicator_cov(&path, xgrid, lagmax) * factor;
    let se = se_matrix(&m, lagmax, pathlen);
    Ok(CovarianceEstimate {
        xgrid: xgrid.to_vec(),
        matrix: m,
        lag_window: LagWindow {
            name: "bartlett",
            lagmax,
        },
        kernel_factor: factor,
        pathlen,
        paths: 1,
        se_matrix: se,
    })
}

/// Global case: `∫₀¹ Σ(u) du` by the midpoint rule over
/// [`GLOBAL_U_POINTS`] frozen-time paths (path `j` uses replicate `j`).
pub fn longrun_cov_global(
    model: &ProcessModel,
    xgrid: &[f64],
    pathlen: usize,
    lagmax: Option<usize>,
    seed: u64,
) -> Result<CovarianceEstimate> {
    let lagmax = lagmax.unwrap_or_else(|| default_lagmax(pathlen));
    check_inputs(xgrid, pathlen, lagmax)?;
    let burnin = model.default_burnin();
    let mats: Vec<Array2<f64>> = (0..GLOBAL_U_POINTS)
        .into_par_iter()
        .map(|j| {
            let u = (j as f64 + 0.5) / GLOBAL_U_POINTS as f64;
            let path = replicate_values(model, pathlen, seed, j as u64, burnin, Clock::Frozen(u));
            bartlett_indicator_cov(&path, xgrid, lagmax)
        })
        .collect();
    let g = xgrid.len();
    let mut m = Array2::zeros((g, g));
    for a in &mats {
        m += a;
    }
    m /= GLOBAL_U_POINTS as f64;
    let se = se_matrix(&m, lagmax, pathlen * GLOBAL_U_POINTS);
    Ok(CovarianceEstimate {
        xgrid: xgrid.to_vec(),
        matrix: m,
        lag_window: LagWindow {
            name: "bartlett",
            lagmax,
        },
        kernel_factor: 1.0,
        pathlen,
        paths: GLOBAL_U_POINTS,
        se_matrix: se,
    })
}

/// `Σ(x, y) = G(min(x, y)) − G(x) G(y)` for i.i.d. data with CDF `cdf`.
pub fn iid_indicator_cov(xgrid: &[f64], cdf: impl Fn(f64) -> f64) -> Array2<f64> {
    let g = xgrid.len();
    Array2::from_shape_fn((g, g), |(i, j)| {
        let (a, b) = (xgrid[i], xgrid[j]);
        cdf(a.min(b)) - cdf(a) * cdf(b)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{CoefFn, ProcessSpec};
    use crate::rng::Stream;
    use crate::stats::normal_cdf;

    fn iid() -> ProcessModel {
        ProcessModel::new(ProcessSpec::iid_gaussian()).unwrap()
    }

    #[test]
    fn iid_closed_form() {
        let c = longrun_cov_indicator(&iid(), 0.5, &[0.0, 1.0], 100_000, None, 7, None).unwrap();
        let exact = iid_indicator_cov(&[0.0, 1.0], normal_cdf);
        assert!((exact[[0, 0]] - 0.25).abs() < 1e-15);
        assert!((exact[[0, 1]] - 0.5 * (1.0 - normal_cdf(1.0))).abs() < 1e-15);
        for i in 0..2 {
            for j in 0..2 {
                let d = (c.matrix[[i, j]] - exact[[i, j]]).abs();
                assert!(d < 3.0 * c.se_matrix[[i, j]], "({i},{j}): {} vs {}", c.matrix[[i, j]], exact[[i, j]]);
            }
        }
        assert_eq!(c.matrix[[0, 1]], c.matrix[[1, 0]]);
    }

    #[test]
    fn short_path_rejected() {
        assert!(longrun_cov_indicator(&iid(), 0.5, &[0.0], 1000, Some(21), 1, None).is_err());
        assert!(longrun_cov_indicator(&iid(), 0.5, &[0.0], 1050, Some(21), 1, None).is_ok());
    }

    #[test]
    fn kernel_factor_is_exact() {
        let m = ProcessModel::new(ProcessSpec::ar1(CoefFn::Constant(0.5))).unwrap();
        let grid = [-1.0, 0.0, 1.0];
        let plain = longrun_cov_indicator(&m, 0.5, &grid, 20_000, None, 2, None).unwrap();
        let k = KernelSpec::epanechnikov();
        let local = longrun_cov_indicator(&m, 0.5, &grid, 20_000, None, 2, Some(&k)).unwrap();
        assert_eq!(local.matrix, plain.matrix * 1.2);
    }

    #[test]
    fn ar_estimate_stable_in_lag_window_and_matches_batch_means() {
        let m = ProcessModel::new(ProcessSpec::ar1(CoefFn::Constant(0.5))).unwrap();
        let ests: Vec<CovarianceEstimate> = [50, 100, 200]
            .iter()
            .map(|&l| longrun_cov_indicator(&m, 0.5, &[0.0], 100_000, Some(l), 11, None).unwrap())
            .collect();
        for e in &ests[1..] {
            let se = e.se_matrix[[0, 0]].max(ests[0].se_matrix[[0, 0]]);
            assert!((e.matrix[[0, 0]] - ests[0].matrix[[0, 0]]).abs() < 2.0 * se);
        }
        // oracle: batch means of the indicator on an independent long path
        let n = 1_000_000usize;
        let batch = 1000usize;
        let mut s = Stream::new(99, "oracle", 0);
        let mut x = 0.0f64;
        for _ in 0..2000 {
            x = 0.5 * x + s.normal();
        }
        let mut means = Vec::with_capacity(n / batch);
        let mut acc = 0.0;
        for t in 0..n {
            x = 0.5 * x + s.normal();
            acc += if x <= 0.0 { 1.0 } else { 0.0 };
            if (t + 1) % batch == 0 {
                means.push(acc / batch as f64);
                acc = 0.0;
            }
        }
        let b = means.len() as f64;
        let mu = means.iter().sum::<f64>() / b;
        let bm = batch as f64 * means.iter().map(|m| (m - mu).powi(2)).sum::<f64>() / (b - 1.0);
        let bm_se = bm * (2.0 / (b - 1.0)).sqrt();
        let e = &ests[1];
        let combined = (e.se_matrix[[0, 0]].powi(2) + bm_se * bm_se).sqrt();
        assert!((e.matrix[[0, 0]] - bm).abs() < 3.0 * combined, "{} vs {bm}", e.matrix[[0, 0]]);
    }

    #[test]
    fn bartlett_estimate_is_psd() {
        let m = ProcessModel::new(ProcessSpec::ar1(CoefFn::Constant(0.8))).unwrap();
        let grid: Vec<f64> = (0..12).map(|j| -2.0 + 4.0 * j as f64 / 11.0).collect();
        let c = longrun_cov_indicator(&m, 0.5, &grid, 5000, Some(100), 3, None).unwrap();
        let g = grid.len();
        let mat = nalgebra::DMatrix::from_fn(g, g, |i, j| c.matrix[[i, j]]);
        let min = mat.clone().symmetric_eigen().eigenvalues.min();
        let trace = mat.trace();
        assert!(min >= -1e-10 * trace, "min eigenvalue {min}");
    }

    #[test]
    fn global_case_constant_model_equals_average() {
        let m = iid();
        let c = longrun_cov_global(&m, &[0.0], 5000, None, 1).unwrap();
        assert_eq!(c.paths, GLOBAL_U_POINTS);
        assert!((c.matrix[[0, 0]] - 0.25).abs() < 3.0 * c.se_matrix[[0, 0]]);
    }
}
