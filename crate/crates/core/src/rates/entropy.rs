use crate::error::{Error, Result};
use crate::quad::integrate;

use super::calculus::psi;

/// Slack inside the ceiling so that exact ratios are not bumped up by rounding.
const CEIL_SLACK: f64 = 1e-9;

/// Breakpoints `x_1 < … < x_N` of the indicator brackets: `x_1 = x_lo`,
/// spacing `ε²/L_G`, `N = 1 + ⌈(x_hi − x_lo) L_G / ε²⌉`. Together with
/// `x_0 = −∞` and `x_{N+1} = ∞` they give the brackets
/// `[1{· ≤ x_j}, 1{· ≤ x_{j+1}}]`, `j = 0, …, N`.
pub fn indicator_brackets(eps: f64, l_g: f64, x_lo: f64, x_hi: f64) -> Result<Vec<f64>> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("ε must be positive, got {eps}")));
    }
    if !(l_g > 0.0 && l_g.is_finite()) {
        return Err(Error::InvalidArgument(format!("Lipschitz constant must be positive, got {l_g}")));
    }
    if !(x_lo <= x_hi) {
        return Err(Error::InvalidArgument(format!("empty range [{x_lo}, {x_hi}]")));
    }
    let step = eps * eps / l_g;
    let cells = ((x_hi - x_lo) / step - CEIL_SLACK).ceil().max(0.0) as usize;
    Ok((0..=cells).map(|j| x_lo + j as f64 * step).collect())
}

/// Number of `ε`-brackets covering `{1{· ≤ x}}` for a distribution with
/// `L_G`-Lipschitz CDF whose mass outside `[x_lo, x_hi]` is negligible at
/// level `ε`. For `ε ≥ 1` a single bracket covers the class.
pub fn entropy_indicator(eps: f64, l_g: f64, x_lo: f64, x_hi: f64) -> Result<u64> {
    if eps >= 1.0 {
        return Ok(1);
    }
    Ok(indicator_brackets(eps, l_g, x_lo, x_hi)?.len() as u64 + 1)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyIntegral {
    /// The integral, or the partial sum at the point of giving up.
    pub value: f64,
    pub divergent: bool,
    /// Number of dyadic levels `[σ 2^{-(m+1)}, σ 2^{-m}]` integrated.
    pub levels: usize,
}

const MAX_LEVELS: usize = 1000;
/// Minimum depth before a non-decaying sequence of level contributions is
/// declared divergent, and the look-back used for that comparison.
const DIVERGENCE_DEPTH: usize = 60;
const DIVERGENCE_LOOKBACK: usize = 30;
const TAIL_RTOL: f64 = 1e-9;
const MONOTONE_POINTS: usize = 241;

/// `∫_0^σ [ψ(ε)] sqrt(ℍ(ε)) dε` for a nonincreasing entropy function.
pub fn entropy_integral(entropy: impl Fn(f64) -> f64, sigma: f64, with_psi: bool) -> Result<EntropyIntegral> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("upper limit σ must be positive, got {sigma}")));
    }
    // monotonicity on a log grid spanning 2^-60 σ .. σ
    let mut prev: Option<(f64, f64)> = None;
    for j in 0..MONOTONE_POINTS {
        let e = sigma * 2f64.powf(-(j as f64) / 4.0);
        let h = entropy(e);
        if !(h >= 0.0) {
            return Err(Error::InvalidArgument(format!("entropy at ε = {e:e} is {h}; must be nonnegative")));
        }
        if let Some((hi, h_hi)) = prev {
            if h < h_hi * (1.0 - 1e-12) {
                return Err(Error::NonMonotoneEntropy {
                    lo: e,
                    hi,
                    h_lo: h,
                    h_hi,
                });
            }
        }
        prev = Some((e, h));
    }
    let integrand = |e: f64| {
        let root = entropy(e).sqrt();
        if with_psi {
            psi(e) * root
        } else {
            root
        }
    };
    let mut total = 0.0;
    let mut contrib: Vec<f64> = Vec::new();
    for m in 0..MAX_LEVELS {
        let hi = sigma * 2f64.powi(-(m as i32));
        let lo = 0.5 * hi;
        let c = integrate(integrand, lo, hi, 0.0, 1e-12).value;
        if !c.is_finite() {
            return Ok(EntropyIntegral {
                value: total,
                divergent: true,
                levels: m,
            });
        }
        total += c;
        contrib.push(c);
        let n = contrib.len();
        if n > DIVERGENCE_DEPTH && contrib[n - 1] >= contrib[n - 1 - DIVERGENCE_LOOKBACK] && c > 0.0 {
            return Ok(EntropyIntegral {
                value: total,
                divergent: true,
                levels: n,
            });
        }
        if n >= 8 {
            // geometric tail bound from the slowest recent ratio
            let ratio = (n - 5..n)
                .map(|i| if contrib[i - 1] > 0.0 { contrib[i] / contrib[i - 1] } else { 0.0 })
                .fold(0.0f64, f64::max);
            if ratio < 1.0 {
                let tail = c * ratio / (1.0 - ratio);
                if tail <= TAIL_RTOL * total.abs() || (total == 0.0 && c == 0.0) {
                    return Ok(EntropyIntegral {
                        value: total + tail,
                        divergent: false,
                        levels: n,
                    });
                }
            }
        }
    }
    Ok(EntropyIntegral {
        value: total,
        divergent: true,
        levels: MAX_LEVELS,
    })
}
