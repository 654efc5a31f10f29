use crate::error::{Error, Result};

/// Two-sample Kolmogorov–Smirnov statistic `sup_t |F_a(t) − F_b(t)|`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("KS distance needs two nonempty samples".into()));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("KS distance of a sample containing NaN".into()));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (na, nb) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < x.len() || j < y.len() {
        let t = match (x.get(i), y.get(j)) {
            (Some(p), Some(q)) => p.min(*q),
            (Some(p), None) => *p,
            (None, Some(q)) => *q,
            (None, None) => unreachable!(),
        };
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    #[test]
    fn trivial_cases() {
        let a = [0.3, -1.0, 2.0, 2.0];
        assert_eq!(ks_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(ks_distance(&[0.0], &[1.0]).unwrap(), 1.0);
        assert!(ks_distance(&[], &[1.0]).is_err());
    }

    #[test]
    fn ties_across_samples() {
        // F_a jumps to 1 at 1, F_b reaches 1/2 at 1 and 1 at 2
        assert_eq!(ks_distance(&[1.0, 1.0], &[1.0, 2.0]).unwrap(), 0.5);
    }

    #[test]
    fn matches_brute_force() {
        let mut s = Stream::new(1, "ks", 0);
        let a: Vec<f64> = (0..300).map(|_| (s.normal() * 4.0).round()).collect();
        let b: Vec<f64> = (0..170).map(|_| (s.normal() * 4.0 + 0.5).round()).collect();
        let brute = a
            .iter()
            .chain(&b)
            .map(|t| {
                let fa = a.iter().filter(|v| *v <= t).count() as f64 / a.len() as f64;
                let fb = b.iter().filter(|v| *v <= t).count() as f64 / b.len() as f64;
                (fa - fb).abs()
            })
            .fold(0.0, f64::max);
        assert_eq!(ks_distance(&a, &b).unwrap(), brute);
    }

    #[test]
    fn same_law_is_below_the_critical_value() {
        let a: Vec<f64> = {
            let mut s = Stream::new(10, "ks", 0);
            (0..10_000).map(|_| s.normal()).collect()
        };
        let b: Vec<f64> = {
            let mut s = Stream::new(11, "ks", 0);
            (0..10_000).map(|_| s.normal()).collect()
        };
        let crit = 1.63 * (2.0f64 / 10_000.0).sqrt();
        assert!(ks_distance(&a, &b).unwrap() < crit);
    }
}
