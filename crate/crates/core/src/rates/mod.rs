//! Dependence and rate calculus for the maximal inequalities.

mod calculus;
mod entropy;
mod sequence;
mod submult;

pub use calculus::{
    c_delta, delta_bound, delta_sequence, h_of, m_threshold, psi, q_star, r_of_delta,
    v_norm, variance_bound, BoundParams, RateParams, VarianceBound, WeightProfile,
};
pub use entropy::{entropy_indicator, entropy_integral, indicator_brackets, EntropyIntegral};
pub use sequence::DeltaSequence;
pub use submult::{submult_check, SubmultReport};
