use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::process::parse_call;
use crate::quad::integrate;

/// Lags below this are summed term by term for polynomial decays.
const POLY_DIRECT: u64 = 64;
/// Same cut-off for the log-corrected polynomial decay.
const POLYLOG_DIRECT: u64 = 1000;

/// A dependence-decay bound `Δ(k)`, `k ≥ 1`.
#[derive(Clone, Debug, PartialEq)]
pub enum DeltaSequence {
    /// `Δ(k) = values[k - 1]`, zero beyond the list.
    Explicit(Vec<f64>),
    /// `Δ(k) = c k^(-α)`, `α > 1`.
    Polynomial { c: f64, alpha: f64 },
    /// `Δ(k) = c ρ^k`, `0 < ρ < 1`.
    Exponential { c: f64, rho: f64 },
    /// `Δ(k) = c k^(-α) / log(k + 1)`, `α > 1`.
    PolyLog { c: f64, alpha: f64 },
}

impl DeltaSequence {
    pub fn zero() -> Self {
        DeltaSequence::Explicit(Vec::new())
    }

    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        DeltaSequence::Explicit(values).validated()
    }

    pub fn polynomial(c: f64, alpha: f64) -> Result<Self> {
        DeltaSequence::Polynomial { c, alpha }.validated()
    }

    pub fn exponential(c: f64, rho: f64) -> Result<Self> {
        DeltaSequence::Exponential { c, rho }.validated()
    }

    pub fn poly_log(c: f64, alpha: f64) -> Result<Self> {
        DeltaSequence::PolyLog { c, alpha }.validated()
    }

    /// Check nonnegativity and summability.
    pub fn validated(self) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        match &self {
            DeltaSequence::Explicit(v) => {
                if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
                    return bad(format!("explicit Δ contains {x}; entries must be finite and nonnegative"));
                }
            }
            DeltaSequence::Polynomial { c, alpha } | DeltaSequence::PolyLog { c, alpha } => {
                if !(c.is_finite() && *c >= 0.0) {
                    return bad(format!("decay constant c = {c} must be finite and nonnegative"));
                }
                if !(alpha.is_finite() && *alpha > 1.0) {
                    return bad(format!("polynomial decay with α = {alpha} is not summable (need α > 1)"));
                }
            }
            DeltaSequence::Exponential { c, rho } => {
                if !(c.is_finite() && *c >= 0.0) {
                    return bad(format!("decay constant c = {c} must be finite and nonnegative"));
                }
                if !(*rho > 0.0 && *rho < 1.0) {
                    return bad(format!("geometric decay with ρ = {rho} is not summable (need 0 < ρ < 1)"));
                }
            }
        }
        Ok(self)
    }

    pub fn is_zero(&self) -> bool {
        match self {
            DeltaSequence::Explicit(v) => v.iter().all(|x| *x == 0.0),
            DeltaSequence::Polynomial { c, .. }
            | DeltaSequence::Exponential { c, .. }
            | DeltaSequence::PolyLog { c, .. } => *c == 0.0,
        }
    }

    /// Whether `Δ` is nonincreasing in `k`.
    pub fn is_monotone(&self) -> bool {
        match self {
            DeltaSequence::Explicit(v) => v.windows(2).all(|w| w[1] <= w[0]),
            _ => true,
        }
    }

    /// `Δ(k)` for `k ≥ 1`.
    pub fn delta(&self, k: u64) -> f64 {
        assert!(k >= 1, "Δ(k) is defined for k ≥ 1");
        match *self {
            DeltaSequence::Explicit(ref v) => v.get((k - 1) as usize).copied().unwrap_or(0.0),
            DeltaSequence::Polynomial { c, alpha } => c * (k as f64).powf(-alpha),
            DeltaSequence::Exponential { c, rho } => c * rho.powf(k as f64),
            DeltaSequence::PolyLog { c, alpha } => {
                c * (k as f64).powf(-alpha) / (k as f64).ln_1p()
            }
        }
    }

    /// `β(q) = Σ_{j ≥ q} Δ(j)` for `q ≥ 1`.
    pub fn beta(&self, q: u64) -> f64 {
        assert!(q >= 1, "β(q) is defined for q ≥ 1");
        match *self {
            DeltaSequence::Explicit(ref v) => {
                let from = (q - 1) as usize;
                if from >= v.len() {
                    0.0
                } else {
                    // small to large for accuracy
                    v[from..].iter().rev().sum()
                }
            }
            DeltaSequence::Exponential { c, rho } => c * rho.powf(q as f64) / (1.0 - rho),
            DeltaSequence::Polynomial { c, alpha } => {
                if q >= POLY_DIRECT {
                    c * zeta_tail(alpha, q as f64)
                } else {
                    let head: f64 = (q..POLY_DIRECT).rev().map(|j| (j as f64).powf(-alpha)).sum();
                    c * (head + zeta_tail(alpha, POLY_DIRECT as f64))
                }
            }
            DeltaSequence::PolyLog { c, alpha } => {
                if c == 0.0 {
                    return 0.0;
                }
                if q >= POLYLOG_DIRECT {
                    c * polylog_tail(alpha, q as f64)
                } else {
                    let head: f64 = (q..POLYLOG_DIRECT)
                        .rev()
                        .map(|j| (j as f64).powf(-alpha) / (j as f64).ln_1p())
                        .sum();
                    c * (head + polylog_tail(alpha, POLYLOG_DIRECT as f64))
                }
            }
        }
    }

    /// `β(1), …, β(qmax)` as a vector indexed by `q - 1`.
    pub fn beta_table(&self, qmax: u64) -> Vec<f64> {
        let len = qmax as usize;
        let mut out = vec![0.0; len];
        if len == 0 {
            return out;
        }
        let mut acc = self.beta(qmax);
        out[len - 1] = acc;
        for q in (1..qmax).rev() {
            acc += self.delta(q);
            out[(q - 1) as usize] = acc;
        }
        out
    }
}

/// `Σ_{j ≥ q} j^(-α)` by Euler–Maclaurin, accurate to double precision for `q ≥ 64`.
fn zeta_tail(alpha: f64, q: f64) -> f64 {
    let a = alpha;
    let p = q.powf(-a);
    let p1 = p / q;
    let p3 = p1 / (q * q);
    let p5 = p3 / (q * q);
    q * p / (a - 1.0) + 0.5 * p + a * p1 / 12.0 - a * (a + 1.0) * (a + 2.0) * p3 / 720.0
        + a * (a + 1.0) * (a + 2.0) * (a + 3.0) * (a + 4.0) * p5 / 30240.0
}

/// `Σ_{j ≥ q} j^(-α)/log(j+1)` by Euler–Maclaurin with a numerical integral.
fn polylog_tail(alpha: f64, q: f64) -> f64 {
    let f = |x: f64| x.powf(-alpha) / x.ln_1p();
    let df = |x: f64| {
        let l = x.ln_1p();
        -alpha * x.powf(-alpha - 1.0) / l - x.powf(-alpha) / ((x + 1.0) * l * l)
    };
    // x = q e^t
    let g = |t: f64| (-(alpha - 1.0) * t).exp() / (q * t.exp()).ln_1p();
    let upper = 745.0 / (alpha - 1.0);
    let integral = q.powf(1.0 - alpha) * integrate(g, 0.0, upper, 0.0, 1e-14).value;
    integral + 0.5 * f(q) - df(q) / 12.0
}

impl fmt::Display for DeltaSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeltaSequence::Explicit(v) if v.iter().all(|x| *x == 0.0) => write!(f, "zero"),
            DeltaSequence::Explicit(v) => write!(f, "explicit({} lags)", v.len()),
            DeltaSequence::Polynomial { c, alpha } => write!(f, "poly:{c},{alpha}"),
            DeltaSequence::Exponential { c, rho } => write!(f, "exp:{c},{rho}"),
            DeltaSequence::PolyLog { c, alpha } => write!(f, "polylog:{c},{alpha}"),
        }
    }
}

/// Parses `zero`, `poly:c,alpha`, `exp:c,rho` and `polylog:c,alpha`
/// (also the call forms `poly(c,alpha)` etc.).
impl FromStr for DeltaSequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "zero" {
            return Ok(DeltaSequence::zero());
        }
        let (name, args) = match s.split_once(':') {
            Some((name, rest)) => {
                let args = rest
                    .split(',')
                    .map(|a| {
                        a.trim().parse::<f64>().map_err(|_| {
                            Error::InvalidArgument(format!("bad number {a:?} in decay {s:?}"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                (name.trim().to_string(), args)
            }
            None => parse_call(s)?,
        };
        if args.len() != 2 {
            return Err(Error::InvalidArgument(format!(
                "decay {s:?} needs two parameters"
            )));
        }
        match name.as_str() {
            "poly" => Self::polynomial(args[0], args[1]),
            "exp" => Self::exponential(args[0], args[1]),
            "polylog" => Self::poly_log(args[0], args[1]),
            other => Err(Error::InvalidArgument(format!("unknown decay {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_tail(d: &DeltaSequence, q: u64, terms: u64) -> f64 {
        (q..q + terms).rev().map(|j| d.delta(j)).sum()
    }

    #[test]
    fn zero_sequence() {
        let z = DeltaSequence::zero();
        assert_eq!(z.beta(1), 0.0);
        assert_eq!(z.beta(17), 0.0);
    }

    #[test]
    fn geometric_tail() {
        let d = DeltaSequence::exponential(1.0, 0.5).unwrap();
        assert_eq!(d.beta(3), 0.25);
        for q in 1..20 {
            assert!((d.beta(q) - brute_tail(&d, q, 200)).abs() < 1e-15);
        }
    }

    #[test]
    fn basel() {
        let d = DeltaSequence::polynomial(1.0, 2.0).unwrap();
        let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
        assert!((d.beta(1) - pi2_6).abs() < 1e-13);
    }

    #[test]
    fn polynomial_tail_matches_partial_sums_with_remainder() {
        // oracle: 10^6 explicit terms plus the integral remainder midpoint
        for alpha in [1.1, 1.5, 3.0] {
            let d = DeltaSequence::polynomial(2.0, alpha).unwrap();
            for q in [1u64, 5, 63, 64, 65, 1000] {
                let j = q + 1_000_000;
                let lo = 2.0 * (j as f64).powf(1.0 - alpha) / (alpha - 1.0);
                let hi = 2.0 * ((j - 1) as f64).powf(1.0 - alpha) / (alpha - 1.0);
                let oracle = brute_tail(&d, q, j - q) + 0.5 * (lo + hi);
                let half_width = 0.5 * (hi - lo);
                assert!(
                    (d.beta(q) - oracle).abs() <= half_width + 1e-12 * oracle,
                    "alpha {alpha} q {q}: {} vs {oracle}",
                    d.beta(q)
                );
            }
        }
    }

    #[test]
    fn polylog_tail_continuity() {
        let d = DeltaSequence::poly_log(1.0, 2.0).unwrap();
        let b999 = d.beta(999);
        let b1000 = d.beta(1000);
        assert!((b999 - b1000 - d.delta(999)).abs() < 1e-14 * b999);
        let b = d.beta(1);
        let direct = brute_tail(&d, 1, 2_000_000)
            + d.beta(2_000_001);
        assert!((b - direct).abs() < 1e-12 * b);
    }

    #[test]
    fn table_matches_pointwise() {
        for d in [
            DeltaSequence::polynomial(1.0, 1.5).unwrap(),
            DeltaSequence::exponential(3.0, 0.9).unwrap(),
            DeltaSequence::explicit(vec![1.0, 0.5, 0.0, 0.25]).unwrap(),
        ] {
            let t = d.beta_table(100);
            for q in 1..=100u64 {
                let b = d.beta(q);
                assert!((t[(q - 1) as usize] - b).abs() <= 1e-13 * b.max(1e-300), "{d} q {q}");
            }
        }
    }

    #[test]
    fn non_summable_rejected() {
        assert!(DeltaSequence::polynomial(1.0, 1.0).is_err());
        assert!(DeltaSequence::exponential(1.0, 1.0).is_err());
        assert!(DeltaSequence::explicit(vec![1.0, -0.1]).is_err());
        assert!("poly:1,0.5".parse::<DeltaSequence>().is_err());
    }

    #[test]
    fn parsing() {
        assert_eq!(
            "poly:1,2".parse::<DeltaSequence>().unwrap(),
            DeltaSequence::Polynomial { c: 1.0, alpha: 2.0 }
        );
        assert_eq!(
            "exp(2, 0.5)".parse::<DeltaSequence>().unwrap(),
            DeltaSequence::Exponential { c: 2.0, rho: 0.5 }
        );
        assert!("zero".parse::<DeltaSequence>().unwrap().is_zero());
    }
}
