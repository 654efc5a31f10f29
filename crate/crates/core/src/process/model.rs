use crate::error::{Error, Result};
use crate::rng::Stream;

use super::spec::{
    Family, ProcessSpec, ARCH_MIN_INTERCEPT, MA_MAX_LAGS, MA_TAIL_MASS,
};

/// Label of the innovation stream.
pub const INNOVATION_LABEL: &str = "innovation";
/// Label of the stream holding independent copies `ε*`.
pub const COUPLE_LABEL: &str = "couple";

/// Which coefficient function clock drives the recursion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Clock {
    /// Coefficients evaluated at `u = t/n`, clamped to `[0, 1]`.
    Path { n: usize },
    /// Coefficients frozen at `u`.
    Frozen(f64),
}

impl Clock {
    #[inline]
    pub fn u(&self, t: i64) -> f64 {
        match *self {
            Clock::Path { n } => (t as f64 / n as f64).clamp(0.0, 1.0),
            Clock::Frozen(u) => u,
        }
    }
}

/// A validated [`ProcessSpec`] ready for simulation.
#[derive(Clone, Debug)]
pub struct ProcessModel {
    spec: ProcessSpec,
    contraction: f64,
    default_burnin: usize,
}

impl ProcessModel {
    pub fn new(spec: ProcessSpec) -> Result<Self> {
        if !(spec.innovation_scale > 0.0 && spec.innovation_scale.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "innovation scale must be positive, got {}",
                spec.innovation_scale
            )));
        }
        let (contraction, default_burnin) = match &spec.family {
            Family::Iid => (0.0, 1000),
            Family::TvAr1 { coef } => {
                let abar = coef.sup_abs();
                if !(abar < 1.0) {
                    return Err(Error::InvalidSpec(format!(
                        "TvAR1 coefficient is not contractive: sup |a(u)| = {abar}"
                    )));
                }
                (abar, geometric_burnin(abar))
            }
            Family::TvLinearMa { scale, decay } => {
                match *decay {
                    super::MaDecay::Polynomial { exponent } if !(exponent > 1.0) => {
                        return Err(Error::InvalidSpec(format!(
                            "MA weights (j+1)^-{exponent} are not summable"
                        )))
                    }
                    super::MaDecay::Geometric { rate } if !(rate > 0.0 && rate < 1.0) => {
                        return Err(Error::InvalidSpec(format!(
                            "MA geometric rate must lie in (0,1), got {rate}"
                        )))
                    }
                    _ => {}
                }
                let smax = scale.sup_abs();
                if !smax.is_finite() {
                    return Err(Error::InvalidSpec("MA scale is not finite".into()));
                }
                // smallest lag with truncated tail mass below the target
                let target = MA_TAIL_MASS / smax.max(f64::MIN_POSITIVE);
                let mut hi = 1usize;
                while decay.tail_bound(hi) >= target {
                    hi *= 2;
                    if hi > 2 * MA_MAX_LAGS {
                        return Err(Error::InvalidSpec(format!(
                            "MA tail {decay} too heavy: truncation beyond {MA_MAX_LAGS} lags"
                        )));
                    }
                }
                let mut lo = hi / 2;
                while hi - lo > 1 {
                    let mid = (lo + hi) / 2;
                    if decay.tail_bound(mid) < target {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                if hi > MA_MAX_LAGS {
                    return Err(Error::InvalidSpec(format!(
                        "MA tail {decay} too heavy: needs {hi} lags"
                    )));
                }
                let contraction = match *decay {
                    super::MaDecay::Geometric { rate } => rate,
                    super::MaDecay::Polynomial { .. } => 1.0,
                };
                (contraction, hi)
            }
            Family::TvArch1 { a0, a1 } => {
                let a0min = a0.inf();
                if !(a0min >= ARCH_MIN_INTERCEPT) {
                    return Err(Error::InvalidSpec(format!(
                        "ARCH intercept must stay above {ARCH_MIN_INTERCEPT}, min a0(u) = {a0min}"
                    )));
                }
                if a1.inf() < 0.0 {
                    return Err(Error::InvalidSpec("ARCH slope a1(u) must be nonnegative".into()));
                }
                let m2 = spec.innovation.second_moment() * spec.innovation_scale.powi(2);
                let factor = a1.sup_abs() * m2;
                if !(factor < 1.0) {
                    return Err(Error::InvalidSpec(format!(
                        "ARCH is not second-order stationary: sup a1(u) E[ε²] = {factor}"
                    )));
                }
                let abar = factor.sqrt();
                (abar, geometric_burnin(abar))
            }
        };
        Ok(ProcessModel {
            spec,
            contraction,
            default_burnin,
        })
    }

    pub fn spec(&self) -> &ProcessSpec {
        &self.spec
    }

    /// Contraction factor `ā` used to size the burn-in (1 for polynomial MA).
    pub fn contraction(&self) -> f64 {
        self.contraction
    }

    /// Default burn-in. For linear processes this is the truncation lag.
    pub fn default_burnin(&self) -> usize {
        self.default_burnin
    }

    /// Bound on the effect of the truncated past on a path value, relative
    /// to the scale of the process.
    pub fn truncation_bound(&self, burnin: usize) -> f64 {
        match &self.spec.family {
            Family::Iid => 0.0,
            Family::TvAr1 { .. } | Family::TvArch1 { .. } => {
                self.contraction.powf(burnin as f64 + 1.0) / (1.0 - self.contraction)
            }
            Family::TvLinearMa { scale, decay } => scale.sup_abs() * decay.tail_bound(burnin),
        }
    }

    /// Rescaled time at which the coefficients have the strongest memory;
    /// used as the second evaluation point of the dependence measure.
    pub fn worst_time(&self) -> f64 {
        match &self.spec.family {
            Family::Iid => 1.0,
            Family::TvAr1 { coef } => coef.argmax_abs(),
            Family::TvLinearMa { scale, .. } => scale.argmax_abs(),
            Family::TvArch1 { a1, .. } => a1.argmax_abs(),
        }
    }

    pub(crate) fn is_iid(&self) -> bool {
        matches!(self.spec.family, Family::Iid)
    }

    /// First innovation time needed for a path with this burn-in.
    pub(crate) fn first_time(&self, burnin: usize) -> i64 {
        if self.is_iid() {
            1
        } else {
            -(burnin as i64)
        }
    }

    /// Draw the innovation `ε_t` for `t ∈ [start, end]` of one replicate.
    pub fn innovations(&self, seed: u64, replicate: u64, start: i64, end: i64) -> Vec<f64> {
        self.draws(seed, INNOVATION_LABEL, replicate, start, end)
    }

    /// Independent copy `ε*_t` for the coupling.
    pub fn coupled_innovation(&self, seed: u64, replicate: u64, t: i64) -> f64 {
        self.draws(seed, COUPLE_LABEL, replicate, t, t)[0]
    }

    fn draws(&self, seed: u64, label: &str, replicate: u64, start: i64, end: i64) -> Vec<f64> {
        if end < start {
            return Vec::new();
        }
        let mut stream = Stream::at_time(seed, label, replicate, start);
        let law = self.spec.innovation;
        let scale = self.spec.innovation_scale;
        (start..=end)
            .map(|_| {
                let (u1, u2) = stream.uniform_pair();
                scale * law.from_uniforms(u1, u2)
            })
            .collect()
    }

    #[inline]
    fn step(&self, prev: f64, eps: f64, u: f64) -> f64 {
        match &self.spec.family {
            Family::TvAr1 { coef } => coef.eval(u) * prev + eps,
            Family::TvArch1 { a0, a1 } => (a0.eval(u) + a1.eval(u) * prev * prev).sqrt() * eps,
            Family::Iid | Family::TvLinearMa { .. } => unreachable!("not a recursive family"),
        }
    }

    pub(crate) fn is_recursive(&self) -> bool {
        matches!(
            self.spec.family,
            Family::TvAr1 { .. } | Family::TvArch1 { .. }
        )
    }

    /// Recursive families: all states `X_t`, `t ∈ [start, end]`, started
    /// from a zero state before `start`.
    pub(crate) fn states(&self, eps: &[f64], start: i64, end: i64, clock: Clock) -> Vec<f64> {
        let len = (end - start + 1).max(0) as usize;
        let mut out = Vec::with_capacity(len);
        let mut x = 0.0;
        for (j, &e) in eps[..len].iter().enumerate() {
            x = self.step(x, e, clock.u(start + j as i64));
            out.push(x);
        }
        out
    }

    /// Path values `X_t` for `t ∈ [first, end]`, given the innovations from
    /// `start` (= [`first_time`](Self::first_time)) to `end`.
    pub(crate) fn values(
        &self,
        eps: &[f64],
        start: i64,
        first: i64,
        end: i64,
        clock: Clock,
        burnin: usize,
    ) -> Vec<f64> {
        match &self.spec.family {
            Family::Iid => eps[(first - start) as usize..=(end - start) as usize].to_vec(),
            Family::TvAr1 { .. } | Family::TvArch1 { .. } => {
                let st = self.states(eps, start, end, clock);
                st[(first - start) as usize..].to_vec()
            }
            Family::TvLinearMa { decay, .. } => {
                let w: Vec<f64> = (0..=burnin).map(|j| decay.weight(j)).collect();
                let Family::TvLinearMa { scale, .. } = &self.spec.family else {
                    unreachable!()
                };
                (first..=end)
                    .map(|t| {
                        let base = (t - start) as usize;
                        let mut acc = 0.0;
                        for (j, wj) in w.iter().enumerate() {
                            acc += wj * eps[base - j];
                        }
                        scale.eval(clock.u(t)) * acc
                    })
                    .collect()
            }
        }
    }

    /// Value at `t_eval` when the innovation at `t_swap` is replaced by
    /// `replacement`. `states` holds the unperturbed recursion (recursive
    /// families) and `base` the unperturbed value at `t_eval`.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn swapped_value(
        &self,
        eps: &[f64],
        start: i64,
        states: &[f64],
        base: f64,
        t_eval: i64,
        t_swap: i64,
        replacement: f64,
        clock: Clock,
        burnin: usize,
    ) -> f64 {
        if t_swap > t_eval {
            return base;
        }
        match &self.spec.family {
            Family::Iid => {
                if t_swap == t_eval {
                    replacement
                } else {
                    base
                }
            }
            Family::TvAr1 { .. } | Family::TvArch1 { .. } => {
                if t_swap < start {
                    return base;
                }
                let prev = if t_swap == start {
                    0.0
                } else {
                    states[(t_swap - start - 1) as usize]
                };
                let mut x = self.step(prev, replacement, clock.u(t_swap));
                for t in t_swap + 1..=t_eval {
                    x = self.step(x, eps[(t - start) as usize], clock.u(t));
                }
                x
            }
            Family::TvLinearMa { scale, decay } => {
                let lag = t_eval - t_swap;
                if lag > burnin as i64 || t_swap < start {
                    return base;
                }
                let old = eps[(t_swap - start) as usize];
                base + scale.eval(clock.u(t_eval)) * decay.weight(lag as usize) * (replacement - old)
            }
        }
    }
}

fn geometric_burnin(abar: f64) -> usize {
    let geo = if abar > 0.0 {
        ((1e-12f64).ln() / abar.ln()).ceil()
    } else {
        0.0
    };
    (geo as usize).max(1000)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{CoefFn, Innovation, MaDecay};

    #[test]
    fn rejects_non_contractive_ar() {
        let spec = ProcessSpec::ar1(CoefFn::Affine {
            intercept: 0.5,
            slope: 0.6,
        });
        assert!(matches!(ProcessModel::new(spec), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn rejects_divergent_ma() {
        let spec = ProcessSpec::new(
            Family::TvLinearMa {
                scale: CoefFn::Constant(1.0),
                decay: MaDecay::Polynomial { exponent: 1.0 },
            },
            Innovation::StandardGaussian,
        );
        assert!(ProcessModel::new(spec).is_err());
        // summable but far too heavy for the truncation budget
        let spec = ProcessSpec::new(
            Family::TvLinearMa {
                scale: CoefFn::Constant(1.0),
                decay: MaDecay::Polynomial { exponent: 1.1 },
            },
            Innovation::StandardGaussian,
        );
        assert!(ProcessModel::new(spec).is_err());
    }

    #[test]
    fn rejects_explosive_arch() {
        let spec = ProcessSpec::new(
            Family::TvArch1 {
                a0: CoefFn::Constant(0.5),
                a1: CoefFn::Constant(1.2),
            },
            Innovation::StandardGaussian,
        );
        assert!(ProcessModel::new(spec).is_err());
        let spec = ProcessSpec::new(
            Family::TvArch1 {
                a0: CoefFn::Constant(0.0),
                a1: CoefFn::Constant(0.2),
            },
            Innovation::StandardGaussian,
        );
        assert!(ProcessModel::new(spec).is_err());
    }

    #[test]
    fn burnin_defaults() {
        let m = ProcessModel::new(ProcessSpec::ar1(CoefFn::Constant(0.5))).unwrap();
        assert_eq!(m.default_burnin(), 1000);
        let m = ProcessModel::new(ProcessSpec::ar1(CoefFn::Constant(0.99))).unwrap();
        assert_eq!(m.default_burnin(), 2750);
        let ma = ProcessModel::new(ProcessSpec::new(
            Family::TvLinearMa {
                scale: CoefFn::Constant(1.0),
                decay: MaDecay::Polynomial { exponent: 3.0 },
            },
            Innovation::StandardGaussian,
        ))
        .unwrap();
        let j = ma.default_burnin();
        assert!(MaDecay::Polynomial { exponent: 3.0 }.tail_bound(j) < MA_TAIL_MASS);
        assert!(MaDecay::Polynomial { exponent: 3.0 }.tail_bound(j - 1) >= MA_TAIL_MASS);
    }
}
