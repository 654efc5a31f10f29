use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::Stream;

/// Relative jitter levels tried in turn after the unregularized factorization.
const JITTER_START: f64 = 1e-12;
const JITTER_CAP: f64 = 1e-8;
/// Pivots within this multiple of the largest diagonal entry count as zero.
const PIVOT_TOL: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianLimitSample {
    /// `draws[[m, j]]` is draw `m` at grid point `j`.
    pub draws: Array2<f64>,
    /// Absolute jitter `λ` added to the diagonal.
    pub chol_jitter: f64,
    /// `max_j |draw_j|` per draw.
    pub sup_stats: Vec<f64>,
}

/// Lower-triangular `L` with `L Lᵀ = a`, allowing zero pivots for
/// positive semidefinite input. Fails with the offending pivot.
fn semidefinite_cholesky(a: &Array2<f64>) -> std::result::Result<Array2<f64>, (f64, usize)> {
    let g = a.nrows();
    let scale = (0..g).map(|i| a[[i, i]].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let tol = PIVOT_TOL * scale;
    let mut l = Array2::<f64>::zeros((g, g));
    for j in 0..g {
        let d = a[[j, j]] - (0..j).map(|k| l[[j, k]] * l[[j, k]]).sum::<f64>();
        if d < -tol {
            return Err((d, j));
        }
        if d <= tol {
            // zero pivot: the remaining column must vanish as well
            for i in j + 1..g {
                let r = a[[i, j]] - (0..j).map(|k| l[[i, k]] * l[[j, k]]).sum::<f64>();
                if r.abs() > tol.sqrt() * scale.sqrt() {
                    return Err((d, j));
                }
            }
            continue;
        }
        let piv = d.sqrt();
        l[[j, j]] = piv;
        for i in j + 1..g {
            let r = a[[i, j]] - (0..j).map(|k| l[[i, k]] * l[[j, k]]).sum::<f64>();
            l[[i, j]] = r / piv;
        }
    }
    Ok(l)
}

/// Factor `Σ + λI` with `λ = 0`, then `λ = 10^{-12}·tr/dim`, escalating by
/// 10 up to `10^{-8}·tr/dim`.
pub fn regularized_cholesky(sigma: &Array2<f64>) -> Result<(Array2<f64>, f64)> {
    let g = sigma.nrows();
    if g == 0 || sigma.ncols() != g {
        return Err(Error::InvalidArgument("covariance must be a nonempty square matrix".into()));
    }
    for i in 0..g {
        for j in 0..i {
            if sigma[[i, j]] != sigma[[j, i]] {
                return Err(Error::InvalidArgument(format!("covariance is not symmetric at ({i}, {j})")));
            }
        }
    }
    let unit = sigma.diag().sum() / g as f64;
    let mut lambda = 0.0;
    loop {
        let mut a = sigma.clone();
        for i in 0..g {
            a[[i, i]] += lambda;
        }
        let (pivot, row) = match semidefinite_cholesky(&a) {
            Ok(l) => return Ok((l, lambda)),
            Err(e) => e,
        };
        let next = if lambda == 0.0 { JITTER_START * unit } else { lambda * 10.0 };
        if next > JITTER_CAP * unit * (1.0 + 1e-9) || unit <= 0.0 {
            return Err(Error::NotPsd {
                jitter: lambda,
                pivot,
                row,
            });
        }
        lambda = next;
    }
}

/// `m` centered Gaussian vectors with covariance `sigma`; draw `r` uses
/// stream `(seed, "gaussian", r)`.
pub fn sample_gaussian_limit(sigma: &Array2<f64>, m: usize, seed: u64) -> Result<GaussianLimitSample> {
    if m == 0 {
        return Err(Error::InvalidArgument("draw count must be at least 1".into()));
    }
    let (l, jitter) = regularized_cholesky(sigma)?;
    let g = sigma.nrows();
    let rows: Vec<Vec<f64>> = (0..m as u64)
        .into_par_iter()
        .map(|r| {
            let mut s = Stream::new(seed, "gaussian", r);
            let z: Vec<f64> = (0..g).map(|_| s.normal()).collect();
            (0..g)
                .map(|i| (0..=i).map(|k| l[[i, k]] * z[k]).sum())
                .collect()
        })
        .collect();
    let sup_stats = rows
        .iter()
        .map(|r: &Vec<f64>| r.iter().fold(0.0f64, |a, v| a.max(v.abs())))
        .collect();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(GaussianLimitSample {
        draws: Array2::from_shape_vec((m, g), flat).expect("draw shape"),
        chol_jitter: jitter,
        sup_stats,
    })
}
