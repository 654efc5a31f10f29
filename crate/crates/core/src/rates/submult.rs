use crate::error::{Error, Result};

use super::sequence::DeltaSequence;

#[derive(Clone, Debug, PartialEq)]
pub struct SubmultReport {
    /// `max_{q₁q₂ ≤ Q} β(q₁q₂) / (β(q₁) β(q₂))`.
    pub c_beta: f64,
    /// The maximizing pair.
    pub argmax: (u64, u64),
    /// Running maximum `C(Q')` at `Q' = 4, 8, 16, …` and at `Q`.
    pub levels: Vec<(u64, f64)>,
    /// Some `β(q₁)β(q₂)` vanishes while `β(q₁q₂) > 0`.
    pub vanishing: bool,
    /// Ratio of the last two dyadic increments of the running maximum to the
    /// two before them; near 1 when `C(Q)` grows like `log Q`. Zero when
    /// fewer than four increments are available.
    pub growth: f64,
    pub pass: bool,
}

/// Increments must shrink at least by this factor over two dyadic levels.
const GROWTH_LIMIT: f64 = 0.8;

/// Empirical check of `β(q₁q₂) ≤ C_β β(q₁) β(q₂)` over `q₁q₂ ≤ Q`.
pub fn submult_check(delta: &DeltaSequence, q_max: u64) -> Result<SubmultReport> {
    if q_max < 4 {
        return Err(Error::InvalidArgument(format!("need Q ≥ 4, got {q_max}")));
    }
    let beta = delta.beta_table(q_max);
    let b = |q: u64| beta[(q - 1) as usize];
    let mut best_at = vec![(f64::NEG_INFINITY, (1u64, 1u64)); q_max as usize + 1];
    let mut vanishing = false;
    for q1 in 1..=q_max {
        if q1 * q1 > q_max {
            break;
        }
        for q2 in q1..=q_max / q1 {
            let p = q1 * q2;
            let num = b(p);
            let den = b(q1) * b(q2);
            let ratio = if den > 0.0 {
                num / den
            } else if num > 0.0 {
                vanishing = true;
                f64::INFINITY
            } else {
                continue;
            };
            if ratio > best_at[p as usize].0 {
                best_at[p as usize] = (ratio, (q1, q2));
            }
        }
    }
    let mut running = (0.0f64, (1u64, 1u64));
    let mut levels = Vec::new();
    let mut next_level = 4u64;
    for (p, entry) in best_at.iter().enumerate().skip(1) {
        if entry.0 > running.0 {
            running = *entry;
        }
        let p = p as u64;
        if p == next_level || p == q_max {
            levels.push((p, running.0));
            if p == next_level {
                next_level *= 2;
            }
        }
    }
    levels.dedup_by_key(|l| l.0);
    let dyadic: Vec<f64> = levels
        .iter()
        .filter(|l| l.0.is_power_of_two())
        .map(|l| l.1)
        .collect();
    let inc: Vec<f64> = dyadic.windows(2).map(|w| w[1] - w[0]).collect();
    let growth = if inc.len() >= 4 {
        let n = inc.len();
        let early = inc[n - 4] + inc[n - 3];
        let late = inc[n - 2] + inc[n - 1];
        if early > 0.0 {
            late / early
        } else if late > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        0.0
    };
    Ok(SubmultReport {
        c_beta: running.0,
        argmax: running.1,
        levels,
        vanishing,
        growth,
        pass: !vanishing && running.0.is_finite() && growth <= GROWTH_LIMIT,
    })
}
