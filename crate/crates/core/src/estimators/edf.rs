use crate::error::{Error, Result};

use super::kernel::KernelSpec;

/// An estimator evaluated on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalProcessSample {
    pub xgrid: Vec<f64>,
    pub values: Vec<f64>,
    pub n: usize,
    pub h: Option<f64>,
    pub v: Option<f64>,
    /// Normalizing factor of the associated empirical process: `√n`, or
    /// `√(nh)` for the localized variant. Not applied to `values`.
    pub scaling: f64,
}

fn check_path(path: &[f64]) -> Result<()> {
    if path.is_empty() {
        return Err(Error::InvalidArgument("empirical distribution of an empty path".into()));
    }
    if let Some(i) = path.iter().position(|x| x.is_nan()) {
        return Err(Error::InvalidArgument(format!("observation {} is NaN", i + 1)));
    }
    Ok(())
}

/// `Ĝ_n(x) = n⁻¹ Σ 1{X_i ≤ x}`.
pub fn edf(path: &[f64], xgrid: &[f64]) -> Result<EmpiricalProcessSample> {
    check_path(path)?;
    let mut sorted = path.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = path.len();
    let values = xgrid
        .iter()
        .map(|&x| sorted.partition_point(|&v| v <= x) as f64 / n as f64)
        .collect();
    Ok(EmpiricalProcessSample {
        xgrid: xgrid.to_vec(),
        values,
        n,
        h: None,
        v: None,
        scaling: (n as f64).sqrt(),
    })
}

/// Validate a localization window `[v − h/2, v + h/2] ⊂ [0, 1]`.
pub(crate) fn check_window(v: f64, h: f64) -> Result<()> {
    let err = |reason: &str| Error::KernelWindow {
        v,
        h,
        reason: reason.into(),
    };
    if !(h > 0.0 && h.is_finite()) {
        return Err(err("needs a positive bandwidth"));
    }
    if !(v > 0.0 && v < 1.0) {
        return Err(err("is not centered inside (0, 1)"));
    }
    // a relative slack of a few ulps keeps v = h/2 admissible
    let slack = 4.0 * f64::EPSILON;
    if v - 0.5 * h < -slack || v + 0.5 * h > 1.0 + slack {
        return Err(err("leaves [0, 1]; boundary locations are not supported"));
    }
    Ok(())
}

/// Nonzero time weights `K((i/n − v)/h)` as `(i, weight)` pairs, `i` 1-based.
pub(crate) fn time_weights(n: usize, v: f64, h: f64, kernel: &KernelSpec) -> Result<Vec<(usize, f64)>> {
    check_window(v, h)?;
    let nf = n as f64;
    let lo = ((v - 0.5 * h) * nf).floor().max(1.0) as usize;
    let hi = (((v + 0.5 * h) * nf).ceil() as usize).min(n);
    let w: Vec<(usize, f64)> = (lo..=hi)
        .map(|i| (i, kernel.eval((i as f64 / nf - v) / h)))
        .filter(|(_, w)| *w != 0.0)
        .collect();
    if w.is_empty() {
        return Err(Error::KernelWindow {
            v,
            h,
            reason: format!("contains no observation with positive weight (n = {n})"),
        });
    }
    Ok(w)
}

/// `Ĝ_{n,h}(x, v) = (nh)⁻¹ Σ K((i/n − v)/h) 1{X_i ≤ x}`.
pub fn localized_edf(
    path: &[f64],
    xgrid: &[f64],
    v: f64,
    h: f64,
    kernel: &KernelSpec,
) -> Result<EmpiricalProcessSample> {
    check_path(path)?;
    let n = path.len();
    let weights = time_weights(n, v, h, kernel)?;
    let mut obs: Vec<(f64, f64)> = weights.iter().map(|&(i, w)| (path[i - 1], w)).collect();
    obs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cum = Vec::with_capacity(obs.len() + 1);
    cum.push(0.0);
    let mut acc = 0.0;
    for (_, w) in &obs {
        acc += w;
        cum.push(acc);
    }
    let denom = n as f64 * h;
    let values = xgrid
        .iter()
        .map(|&x| cum[obs.partition_point(|o| o.0 <= x)] / denom)
        .collect();
    Ok(EmpiricalProcessSample {
        xgrid: xgrid.to_vec(),
        values,
        n,
        h: Some(h),
        v: Some(v),
        scaling: denom.sqrt(),
    })
}

/// `(nh)⁻¹ Σ K((i/n − v)/h)`, the total mass of the localized EDF.
pub fn time_weight_mass(n: usize, v: f64, h: f64, kernel: &KernelSpec) -> Result<f64> {
    let w = time_weights(n, v, h, kernel)?;
    Ok(w.iter().map(|p| p.1).sum::<f64>() / (n as f64 * h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    fn sample(n: usize, seed: u64) -> Vec<f64> {
        let mut s = Stream::new(seed, "test", 0);
        (0..n).map(|_| s.normal()).collect()
    }

    #[test]
    fn small_examples() {
        let e = edf(&[1.0, 2.0, 3.0], &[2.0, 3.0, 10.0, 0.999]).unwrap();
        assert_eq!(e.values, vec![2.0 / 3.0, 1.0, 1.0, 0.0]);
        assert!(edf(&[], &[0.0]).is_err());
    }

    #[test]
    fn matches_naive_loop() {
        let x = sample(1000, 1);
        let grid: Vec<f64> = (0..200).map(|j| -3.0 + 0.03 * j as f64).chain(x[..50].iter().copied()).collect();
        let e = edf(&x, &grid).unwrap();
        for (g, v) in grid.iter().zip(&e.values) {
            let naive = x.iter().filter(|xi| **xi <= *g).count() as f64 / x.len() as f64;
            assert_eq!(*v, naive);
        }
    }

    #[test]
    fn ranks_at_sample_points() {
        let x = sample(500, 2);
        let mut sorted = x.clone();
        sorted.sort_by(f64::total_cmp);
        let e = edf(&x, &sorted).unwrap();
        for (r, v) in e.values.iter().enumerate() {
            assert_eq!(*v, (r + 1) as f64 / 500.0);
        }
    }

    #[test]
    fn full_window_rectangular_is_plain_edf() {
        let x = sample(777, 3);
        let grid: Vec<f64> = (0..100).map(|j| -2.5 + 0.05 * j as f64).collect();
        let a = edf(&x, &grid).unwrap();
        let b = localized_edf(&x, &grid, 0.5, 1.0, &KernelSpec::rectangular()).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn weight_mass_riemann_error() {
        let k = KernelSpec::epanechnikov();
        let c = k.lipschitz.unwrap() + k.peak;
        for n in [100usize, 1000, 10_000] {
            for (v, h) in [(0.5, 0.3), (0.37, 0.2), (0.8, 0.25)] {
                let mass = time_weight_mass(n, v, h, &k).unwrap();
                // oracle: direct sum over all i
                let direct: f64 = (1..=n).map(|i| k.eval((i as f64 / n as f64 - v) / h)).sum::<f64>()
                    / (n as f64 * h);
                assert!((mass - direct).abs() < 1e-14);
                assert!((mass - 1.0).abs() <= c / (n as f64 * h), "n={n} v={v}: {mass}");
            }
        }
    }

    #[test]
    fn localized_is_monotone_and_guards_boundary() {
        let x = sample(2000, 4);
        let grid: Vec<f64> = (0..300).map(|j| -3.0 + 0.02 * j as f64).collect();
        for k in [KernelSpec::epanechnikov(), KernelSpec::triangular(), KernelSpec::rectangular()] {
            let e = localized_edf(&x, &grid, 0.4, 0.2, &k).unwrap();
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
            assert!(e.values.iter().all(|v| *v >= 0.0));
        }
        let k = KernelSpec::epanechnikov();
        assert!(matches!(localized_edf(&x, &grid, 0.05, 0.2, &k), Err(Error::KernelWindow { .. })));
        assert!(matches!(localized_edf(&x, &grid, 1.0, 0.2, &k), Err(Error::KernelWindow { .. })));
        assert!(matches!(
            localized_edf(&x[..3], &grid, 0.5, 0.01, &k),
            Err(Error::KernelWindow { .. })
        ));
    }
}
