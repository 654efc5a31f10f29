use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};

use super::edf::time_weights;
use super::kernel::KernelSpec;

/// `ĝ_{n,h}(x, v)` on a product grid; `values[[iv, ix]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct KdeSurface {
    pub xgrid: Vec<f64>,
    pub vgrid: Vec<f64>,
    pub values: Array2<f64>,
}

/// `ĝ(x, v) = n⁻¹ Σ_i K_{h1}(i/n − v) K_{h2}(X_i − x)` with `K_h(u) = K(u/h)/h`.
/// `xgrid` must be sorted.
pub fn kde(
    path: &[f64],
    xgrid: &[f64],
    vgrid: &[f64],
    h1: f64,
    h2: f64,
    kernel: &KernelSpec,
) -> Result<KdeSurface> {
    if path.is_empty() {
        return Err(Error::InvalidArgument("density estimate of an empty path".into()));
    }
    if !(h2 > 0.0 && h2.is_finite()) {
        return Err(Error::InvalidArgument(format!("space bandwidth must be positive, got {h2}")));
    }
    if xgrid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidArgument("x-grid must be sorted".into()));
    }
    let n = path.len();
    let rows: Vec<Vec<f64>> = vgrid
        .par_iter()
        .map(|&v| {
            let tw = time_weights(n, v, h1, kernel)?;
            let mut row = vec![0.0; xgrid.len()];
            for (i, w) in tw {
                let xi = path[i - 1];
                let lo = xgrid.partition_point(|&x| x < xi - 0.5 * h2);
                let hi = xgrid.partition_point(|&x| x <= xi + 0.5 * h2);
                for j in lo..hi {
                    row[j] += w * kernel.eval((xi - xgrid[j]) / h2);
                }
            }
            let scale = 1.0 / (n as f64 * h1 * h2);
            Ok(row.into_iter().map(|s| s * scale).collect())
        })
        .collect::<Result<_>>()?;
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(KdeSurface {
        xgrid: xgrid.to_vec(),
        vgrid: vgrid.to_vec(),
        values: Array2::from_shape_vec((vgrid.len(), xgrid.len()), flat).expect("grid shape"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::edf::time_weight_mass;
    use crate::rng::Stream;
    use crate::stats::normal_pdf;

    fn sample(n: usize, seed: u64) -> Vec<f64> {
        let mut s = Stream::new(seed, "test", 0);
        (0..n).map(|_| s.normal()).collect()
    }

    #[test]
    fn nonnegative_and_matches_naive() {
        let x = sample(500, 1);
        let grid: Vec<f64> = (0..81).map(|j| -4.0 + 0.1 * j as f64).collect();
        let k = KernelSpec::triangular();
        let s = kde(&x, &grid, &[0.3, 0.5], 0.4, 0.5, &k).unwrap();
        assert!(s.values.iter().all(|v| *v >= 0.0));
        for (iv, v) in [0.3, 0.5].iter().enumerate() {
            for (ix, xg) in grid.iter().enumerate() {
                let naive: f64 = x
                    .iter()
                    .enumerate()
                    .map(|(i, xi)| k.scaled((i + 1) as f64 / 500.0 - v, 0.4) * k.scaled(xi - xg, 0.5))
                    .sum::<f64>()
                    / 500.0;
                assert!((s.values[[iv, ix]] - naive).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn fubini_mass() {
        let x = sample(3000, 2);
        let step = 1e-3;
        let grid: Vec<f64> = (0..=12_000).map(|j| -6.0 + step * j as f64).collect();
        let k = KernelSpec::epanechnikov();
        let s = kde(&x, &grid, &[0.5], 0.3, 0.4, &k).unwrap();
        // trapezoid rule on a piecewise quadratic integrand
        let row = s.values.row(0);
        let integral: f64 = row.windows(2).into_iter().map(|w| 0.5 * (w[0] + w[1]) * step).sum();
        let mass = time_weight_mass(3000, 0.5, 0.3, &k).unwrap();
        assert!((integral - mass).abs() < 1e-6, "{integral} vs {mass}");
    }

    #[test]
    fn iid_gaussian_density() {
        let x = sample(100_000, 3);
        let grid: Vec<f64> = (0..=80).map(|j| -2.0 + 0.05 * j as f64).collect();
        let s = kde(&x, &grid, &[0.5], 0.5, 0.3, &KernelSpec::epanechnikov()).unwrap();
        let err = grid
            .iter()
            .zip(s.values.row(0))
            .map(|(x, g)| (g - normal_pdf(*x)).abs())
            .fold(0.0, f64::max);
        assert!(err < 0.02, "max error {err}");
    }

    #[test]
    fn disjoint_windows_add_up() {
        // two halves of the time axis with rectangular windows of width 1/2;
        // odd n keeps i/n = 1/2 off the grid so the windows are disjoint
        let x = sample(999, 4);
        let grid: Vec<f64> = (0..41).map(|j| -2.0 + 0.1 * j as f64).collect();
        let k = KernelSpec::rectangular();
        let full = kde(&x, &grid, &[0.5], 1.0, 0.6, &k).unwrap();
        let parts = kde(&x, &grid, &[0.25, 0.75], 0.5, 0.6, &k).unwrap();
        for j in 0..grid.len() {
            let combined = 0.5 * (parts.values[[0, j]] + parts.values[[1, j]]);
            assert!((full.values[[0, j]] - combined).abs() < 1e-14);
        }
    }

    #[test]
    fn boundary_is_rejected() {
        let x = sample(100, 5);
        assert!(matches!(
            kde(&x, &[0.0], &[0.1], 0.4, 0.3, &KernelSpec::epanechnikov()),
            Err(Error::KernelWindow { .. })
        ));
    }
}
