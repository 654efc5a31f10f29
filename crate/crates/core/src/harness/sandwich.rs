use crate::error::{Error, Result};
use crate::rates::{q_star, r_of_delta, v_norm, DeltaSequence};
use crate::stats::ols;

use super::config::{ExperimentConfig, ExperimentKind};
use super::report::{CheckRow, ExperimentReport, SampleTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Quantity {
    QStar,
    R,
    VNorm,
}

impl Quantity {
    const ALL: [Quantity; 3] = [Quantity::QStar, Quantity::R, Quantity::VNorm];

    fn name(&self) -> &'static str {
        match self {
            Quantity::QStar => "qstar",
            Quantity::R => "r",
            Quantity::VNorm => "vnorm",
        }
    }

    fn exact(&self, d: &DeltaSequence, x: f64) -> Result<f64> {
        match self {
            Quantity::QStar => Ok(q_star(d, x)? as f64),
            Quantity::R => r_of_delta(d, x),
            Quantity::VNorm => v_norm(x, d, 1.0),
        }
    }
}

/// Closed-form order of `q*(x)`, `r(δ)` and `V_n` at `‖f‖ = x` (`D_n = 1`).
fn closed_form(q: Quantity, d: &DeltaSequence, x: f64) -> Result<f64> {
    let log_inv = (1.0 / x).ln();
    Ok(match d {
        _ if d.is_zero() => match q {
            Quantity::QStar => 1.0,
            Quantity::R | Quantity::VNorm => x,
        },
        DeltaSequence::Polynomial { alpha, .. } => match q {
            Quantity::QStar => x.powf(-1.0 / alpha).max(1.0),
            Quantity::R => x.powf(alpha / (alpha - 1.0)).min(x),
            Quantity::VNorm => x * x.powf(-1.0 / alpha).max(1.0),
        },
        DeltaSequence::Exponential { .. } => match q {
            Quantity::QStar => log_inv.max(1.0),
            Quantity::R => (x / log_inv).min(x),
            Quantity::VNorm => x * log_inv.max(1.0),
        },
        other => {
            return Err(Error::Unsupported(format!(
                "no closed-form sandwich for the decay {other}"
            )))
        }
    })
}

/// Log-spaced points `lo·10^{j/k}` covering `[lo, hi]`.
fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let count = (decades * per_decade as f64 + 1e-9).floor() as usize;
    (0..=count)
        .map(|j| lo * 10f64.powf(j as f64 / per_decade as f64))
        .collect()
}

pub fn run_table_sandwich(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if cfg.kind != ExperimentKind::TableSandwich {
        return Err(Error::Config(format!("run_table_sandwich given a {} config", cfg.kind)));
    }
    let mut report = ExperimentReport::new(cfg);
    let grid = log_grid(cfg.arg_range.0, cfg.arg_range.1, cfg.points_per_decade);
    let (corridor_tol, drift_tol) = (cfg.tolerances.get("corridor"), cfg.tolerances.get("drift"));
    let mut table = SampleTable::new("sandwich", vec!["decay", "quantity", "argument", "exact", "closed_form", "ratio"]);
    let mut constants = SampleTable::new("constants", vec!["decay", "quantity", "c_lower", "c_upper", "corridor", "log_slope"]);
    for d in &cfg.decays {
        // reject decays without a closed form before computing anything
        closed_form(Quantity::QStar, d, grid[0])?;
    }
    for d in &cfg.decays {
        // commas would split CSV fields
        let dname = d.to_string().replace(',', ";");
        for q in Quantity::ALL {
            let mut ratios = Vec::with_capacity(grid.len());
            for &x in &grid {
                let exact = q.exact(d, x)?;
                let closed = closed_form(q, d, x)?;
                let ratio = exact / closed;
                table.push(vec![
                    dname.clone(),
                    q.name().into(),
                    x.to_string(),
                    exact.to_string(),
                    closed.to_string(),
                    ratio.to_string(),
                ]);
                ratios.push(ratio);
            }
            let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let corridor = if lo > 0.0 { hi / lo } else { f64::INFINITY };
            let lx: Vec<f64> = grid.iter().map(|x| x.ln()).collect();
            let ly: Vec<f64> = ratios.iter().map(|r| r.ln()).collect();
            let fit = ols(&lx, &ly);
            let label = format!("{}[{dname}]", q.name());
            report.rows.push(CheckRow::at_most(format!("corridor_{label}"), corridor, corridor_tol, None));
            report.rows.push(CheckRow::at_most(
                format!("drift_{label}"),
                fit.slope.abs(),
                drift_tol,
                fit.slope_se,
            ));
            constants.push(vec![
                dname.clone(),
                q.name().into(),
                lo.to_string(),
                hi.to_string(),
                corridor.to_string(),
                fit.slope.to_string(),
            ]);
        }
    }
    report.samples.extend([table, constants]);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(decays: &str) -> ExperimentReport {
        let text = format!("[experiment]\nkind = table_sandwich\nseed = 0\n[grids]\ndecays = {decays}\n");
        run_table_sandwich(&ExperimentConfig::parse(&text).unwrap()).unwrap()
    }

    #[test]
    fn grid_spans_four_decades() {
        let g = log_grid(1e-6, 1e-2, 10);
        assert_eq!(g.len(), 41);
        assert!((g[40] / 1e-2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_decay_is_identity() {
        let r = run("zero");
        assert_eq!(r.rows.len(), 6);
        for row in &r.rows {
            assert!(row.pass);
            if row.name.starts_with("corridor") {
                assert_eq!(row.statistic, 1.0);
            } else {
                assert_eq!(row.statistic, 0.0);
            }
        }
    }

    #[test]
    fn wrong_exponent_is_caught() {
        // α = 2 treated with the α = 4 closed form drifts by 1/2 − 1/4 per log unit
        let d = DeltaSequence::polynomial(1.0, 2.0).unwrap();
        let grid = log_grid(1e-6, 1e-2, 10);
        let ly: Vec<f64> = grid
            .iter()
            .map(|&x| (q_star(&d, x).unwrap() as f64 / x.powf(-0.25)).ln())
            .collect();
        let lx: Vec<f64> = grid.iter().map(|x| x.ln()).collect();
        assert!(ols(&lx, &ly).slope.abs() > 0.2);
    }

    #[test]
    fn named_decays_pass() {
        let r = run("poly:1,2 exp:1,0.8");
        assert_eq!(r.rows.len(), 12);
        assert!(r.all_pass(), "{}", r.report_csv());
    }

    #[test]
    fn polylog_has_no_closed_form() {
        let text = "[experiment]\nkind = table_sandwich\nseed = 0\n[grids]\ndecays = polylog:1,2\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert!(matches!(run_table_sandwich(&cfg), Err(Error::Unsupported(_))));
    }
}
