use crate::error::{Error, Result};

use super::sequence::DeltaSequence;

/// Smallest `q ≥ 1` satisfying a monotone predicate (false, …, false, true, …).
fn first_true(mut pred: impl FnMut(u64) -> bool) -> u64 {
    if pred(1) {
        return 1;
    }
    let mut lo = 1u64;
    let mut hi = 2u64;
    while !pred(hi) {
        lo = hi;
        hi = hi.checked_mul(2).expect("search range overflow");
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `q*(x) = min{q ≥ 1 : β(q) ≤ q x}`.
pub fn q_star(delta: &DeltaSequence, x: f64) -> Result<u64> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::InvalidArgument(format!("q*(x) needs x > 0, got {x}")));
    }
    Ok(first_true(|q| delta.beta(q) <= q as f64 * x))
}

/// `r(δ) = max{r > 0 : q*(r) r ≤ δ}`.
///
/// With `q₀ = min{q : β(q) ≤ δ}` the maximum is attained at `δ/q₀`; the
/// result is then nudged down by ulps until `q*(r) r ≤ δ` holds in floating
/// point.
pub fn r_of_delta(delta: &DeltaSequence, d: f64) -> Result<f64> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::InvalidArgument(format!("r(δ) needs δ > 0, got {d}")));
    }
    let q0 = first_true(|q| delta.beta(q) <= d);
    let mut r = d / q0 as f64;
    loop {
        let q = q_star(delta, r)?;
        if q as f64 * r <= d {
            return Ok(r);
        }
        r = r.next_down();
    }
}

/// `V_n(f) = ‖f‖ + Σ_{k ≥ 1} min{‖f‖, D_n Δ(k)}` from the value `‖f‖_{2,n}`.
pub fn v_norm(f2n: f64, delta: &DeltaSequence, d_n: f64) -> Result<f64> {
    if !(f2n >= 0.0 && f2n.is_finite()) {
        return Err(Error::InvalidArgument(format!("‖f‖ must be finite and nonnegative, got {f2n}")));
    }
    if !(d_n >= 0.0 && d_n.is_finite()) {
        return Err(Error::InvalidArgument(format!("weight D_n must be finite and nonnegative, got {d_n}")));
    }
    if f2n == 0.0 {
        return Ok(0.0);
    }
    if let DeltaSequence::Explicit(v) = delta {
        return Ok(f2n + v.iter().map(|x| f2n.min(d_n * x)).sum::<f64>());
    }
    // K = max{k : D_n Δ(k) > ‖f‖}; afterwards the summable branch is active
    let k = first_true(|k| d_n * delta.delta(k) <= f2n) - 1;
    Ok(f2n * (1 + k) as f64 + d_n * delta.beta(k + 1))
}

/// `ψ(ε) = sqrt(log(ε⁻¹ ∨ 1)) · log log(ε⁻¹ ∨ e)`.
pub fn psi(eps: f64) -> f64 {
    let inv = 1.0 / eps;
    inv.max(1.0).ln().sqrt() * inv.max(std::f64::consts::E).ln().ln()
}

/// `H(k) = 1 ∨ log k`.
pub fn h_of(k: u64) -> f64 {
    (k as f64).ln().max(1.0)
}

/// The dependence weights of a function class.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightProfile {
    pub d_n: f64,
    pub d_inf: f64,
    pub d_nu_inf: f64,
    pub nu: f64,
}

impl WeightProfile {
    /// All weights equal to `d`.
    pub fn uniform(d: f64) -> Self {
        WeightProfile {
            d_n: d,
            d_inf: d,
            d_nu_inf: d,
            nu: 2.0,
        }
    }
}

/// `m(n, δ, k) = r(δ/D_n) · D_n^∞ · sqrt(n / H(k))`.
pub fn m_threshold(n: u64, delta_val: f64, k: u64, delta: &DeltaSequence, w: &WeightProfile) -> Result<f64> {
    if n == 0 || k == 0 {
        return Err(Error::InvalidArgument("m(n, δ, k) needs n ≥ 1 and k ≥ 1".into()));
    }
    if w.d_n == 0.0 {
        return Err(Error::InvalidArgument("m(n, δ, k) is undefined for D_n = 0".into()));
    }
    let r = r_of_delta(delta, delta_val / w.d_n)?;
    Ok(r * w.d_inf * (n as f64).sqrt() / h_of(k).sqrt())
}

/// Constants of the compatibility condition on the function class.
#[derive(Clone, Debug, PartialEq)]
pub struct RateParams {
    /// Hölder exponent in `(0, 1]`.
    pub s: f64,
    /// Finitely supported weights `L_0, L_1, …`.
    pub l: Vec<f64>,
    pub c_r: f64,
    pub c_x: f64,
    pub d: usize,
    pub d_tilde: usize,
    /// Hölder pair exponent in `(1, ∞]`.
    pub p: f64,
}

impl RateParams {
    pub fn new(s: f64, l: Vec<f64>, c_r: f64, c_x: f64, p: f64) -> Result<Self> {
        let params = RateParams {
            s,
            l,
            c_r,
            c_x,
            d: 1,
            d_tilde: 1,
            p,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s <= 1.0) {
            return Err(Error::InvalidArgument(format!("s = {} must lie in (0, 1]", self.s)));
        }
        if !(self.p > 1.0) {
            return Err(Error::InvalidArgument(format!("p = {} must exceed 1", self.p)));
        }
        if self.l.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidArgument("weights L_j must be finite and nonnegative".into()));
        }
        if !(self.c_r >= 0.0 && self.c_x >= 0.0) {
            return Err(Error::InvalidArgument("C_R and C_X must be nonnegative".into()));
        }
        Ok(())
    }

    /// `|L|₁`.
    pub fn l1(&self) -> f64 {
        self.l.iter().sum()
    }

    /// Moment order `2sp/(p-1)` at which the dependence measure enters.
    pub fn moment_order(&self) -> f64 {
        if self.p.is_infinite() {
            2.0 * self.s
        } else {
            2.0 * self.s * self.p / (self.p - 1.0)
        }
    }
}

/// `Δ(k) = 2 d C_R Σ_{j<k} L_j δ(k-j-1)^s` with `delta_at(j)` giving `δ(j)`
/// (at the moment order of [`RateParams::moment_order`]).
pub fn delta_bound(delta_at: impl Fn(usize) -> Option<f64>, params: &RateParams, k: usize) -> Result<f64> {
    params.validate()?;
    if k == 0 {
        return Err(Error::InvalidArgument("Δ(k) is defined for k ≥ 1".into()));
    }
    let mut acc = 0.0;
    for (j, lj) in params.l.iter().enumerate().take(k) {
        if *lj == 0.0 {
            continue;
        }
        let lag = k - j - 1;
        let dj = delta_at(lag).ok_or_else(|| {
            Error::InvalidArgument(format!("dependence measure at lag {lag} is not available"))
        })?;
        acc += lj * dj.powf(params.s);
    }
    Ok(2.0 * params.d as f64 * params.c_r * acc)
}

/// `Δ(1), …, Δ(kmax)` as an explicit sequence.
pub fn delta_sequence(
    delta_at: impl Fn(usize) -> Option<f64>,
    params: &RateParams,
    kmax: usize,
) -> Result<DeltaSequence> {
    let values = (1..=kmax)
        .map(|k| delta_bound(&delta_at, params, k))
        .collect::<Result<Vec<_>>>()?;
    DeltaSequence::explicit(values)
}

/// `C_Δ = 2 max(d, d̃) |L|₁ C_X^s C_R + C_f̄`.
pub fn c_delta(params: &RateParams, c_fbar: f64) -> f64 {
    2.0 * params.d.max(params.d_tilde) as f64 * params.l1() * params.c_x.powf(params.s) * params.c_r
        + c_fbar
}

/// Inputs of the variance bound for a finite class.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundParams {
    /// Uniform bound on `|f|`.
    pub m: f64,
    /// `1 ∨ log |F|`.
    pub h: f64,
    pub n: u64,
    /// Bound on `V_n(f)`.
    pub sigma: f64,
    pub c_delta: f64,
    /// Reported multiplier; always 1 in practice.
    pub universal_c: f64,
}

impl BoundParams {
    pub fn new(m: f64, class_size: u64, n: u64, sigma: f64, c_delta: f64) -> Self {
        BoundParams {
            m,
            h: h_of(class_size.max(1)),
            n,
            sigma,
            c_delta,
            universal_c: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VarianceBound {
    /// `c · min_q [D_n r(σ/D_n) σ + C_Δ (D_n^∞)² β(q) + q M² H / n]`.
    pub value: f64,
    /// Minimizing (or supplied) `q`.
    pub q: u64,
    /// `D_n r(σ/D_n) σ`.
    pub entropy_term: f64,
    /// `C_Δ (D_n^∞)² β(q)` at the chosen `q`.
    pub dependence_term: f64,
    /// `q M² H / n` at the chosen `q`.
    pub block_term: f64,
    /// `2c [D_n r(σ/D_n) σ + q*(M²H / (n (D_n^∞)² C_Δ)) M² H / n]`.
    pub balanced: f64,
    pub balanced_q: u64,
}

pub fn variance_bound(
    bp: &BoundParams,
    delta: &DeltaSequence,
    w: &WeightProfile,
    q: Option<u64>,
) -> Result<VarianceBound> {
    for (name, v) in [("M", bp.m), ("H", bp.h), ("σ", bp.sigma), ("D_n", w.d_n), ("D_n^∞", w.d_inf)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
        }
    }
    if bp.n == 0 || !(bp.c_delta >= 0.0) {
        return Err(Error::InvalidArgument("need n ≥ 1 and C_Δ ≥ 0".into()));
    }
    let entropy_term = w.d_n * r_of_delta(delta, bp.sigma / w.d_n)? * bp.sigma;
    let a = bp.c_delta * w.d_inf * w.d_inf;
    let b = bp.m * bp.m * bp.h / bp.n as f64;
    let objective = |q: u64, beta: f64| a * beta + q as f64 * b;
    let q_opt = match q {
        Some(q) => {
            if q == 0 || q > bp.n {
                return Err(Error::InvalidArgument(format!("q = {q} outside 1..={}", bp.n)));
            }
            q
        }
        None if delta.is_monotone() => {
            // increments a(-Δ(q)) + b are nondecreasing: stop at the first nonnegative one
            let q = first_true(|q| q >= bp.n || a * delta.delta(q) <= b);
            q.min(bp.n)
        }
        None => {
            let table = delta.beta_table(bp.n);
            let mut best = (1u64, f64::INFINITY);
            for (i, beta) in table.iter().enumerate() {
                let v = objective(i as u64 + 1, *beta);
                if v < best.1 {
                    best = (i as u64 + 1, v);
                }
            }
            best.0
        }
    };
    let dependence_term = a * delta.beta(q_opt);
    let block_term = q_opt as f64 * b;
    let (balanced, balanced_q) = if a > 0.0 {
        let qs = q_star(delta, b / a)?;
        (2.0 * bp.universal_c * (entropy_term + qs as f64 * b), qs)
    } else {
        (2.0 * bp.universal_c * (entropy_term + b), 1)
    };
    Ok(VarianceBound {
        value: bp.universal_c * (entropy_term + dependence_term + block_term),
        q: q_opt,
        entropy_term,
        dependence_term,
        block_term,
        balanced,
        balanced_q,
    })
}
