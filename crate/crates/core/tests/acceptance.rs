//! Acceptance criteria, one pass/fail line each.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use lsemp::dependence::delta_profile;
use lsemp::harness::{run_experiment, ExperimentConfig, ExperimentReport};
use lsemp::process::{CoefFn, ProcessModel, ProcessSpec};
use lsemp::rates::{entropy_integral, q_star, r_of_delta, DeltaSequence};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> ExperimentConfig {
    let path = configs().join(format!("{name}.cfg"));
    ExperimentConfig::from_file(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|j| (a + (b - a) * j as f64 / (points - 1) as f64).exp())
        .collect()
}

fn ac1() -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let t = Instant::now();
    let m = ProcessModel::new(ProcessSpec::ar1(CoefFn::Constant(0.5))).unwrap();
    let p = pool.install(|| delta_profile(&m, 50, 8, 2.0, 100_000, 20240601)).unwrap();
    let elapsed = t.elapsed();
    let mut worst = 0.0f64;
    for k in 0..=8 {
        let target = 2f64.sqrt() * 0.5f64.powi(k as i32);
        worst = worst.max((p.delta_hat[k] - target).abs() / p.se[k]);
    }
    outcome(
        worst <= 3.0 && elapsed < Duration::from_secs(60),
        format!("max |z| = {worst:.3} (≤ 3), {:.1} s single-threaded (< 60 s)", elapsed.as_secs_f64()),
    )
}

fn ac2() -> Outcome {
    let m = ProcessModel::new(ProcessSpec::iid_gaussian()).unwrap();
    let mut nonzero = 0;
    for nu in [1.0, 2.0, 4.0] {
        let p = delta_profile(&m, 100, 10, nu, 1000, 7).unwrap();
        nonzero += p.delta_hat[1..].iter().filter(|d| **d != 0.0).count();
    }
    outcome(nonzero == 0, format!("{nonzero} nonzero δ̂(k), k ≥ 1, over ν ∈ {{1, 2, 4}}"))
}

fn named_decays() -> Vec<DeltaSequence> {
    vec![
        DeltaSequence::zero(),
        DeltaSequence::polynomial(1.0, 1.5).unwrap(),
        DeltaSequence::polynomial(1.0, 2.0).unwrap(),
        DeltaSequence::polynomial(1.0, 4.0).unwrap(),
        DeltaSequence::exponential(1.0, 0.5).unwrap(),
        DeltaSequence::exponential(1.0, 0.9).unwrap(),
        DeltaSequence::poly_log(1.0, 2.0).unwrap(),
    ]
}

fn ac3() -> Outcome {
    let mut violations = Vec::new();
    let mut checked = 0;
    for d in named_decays() {
        for x in log_grid(1e-6, 1e-2, 401) {
            checked += 1;
            let r = r_of_delta(&d, x).unwrap();
            if q_star(&d, r).unwrap() as f64 * r > x {
                violations.push(format!("{d}: q*(r)r > δ at δ = {x:e}"));
            }
            let up = r * (1.0 + 1e-9);
            if q_star(&d, up).unwrap() as f64 * up <= x {
                violations.push(format!("{d}: r(1+1e-9) feasible at δ = {x:e}"));
            }
            let q = q_star(&d, x).unwrap();
            if d.beta(q) > q as f64 * x {
                violations.push(format!("{d}: β(q*) > q*x at x = {x:e}"));
            }
            if q > 1 && d.beta(q - 1) <= (q - 1) as f64 * x {
                violations.push(format!("{d}: q* not minimal at x = {x:e}"));
            }
        }
    }
    let detail = match violations.first() {
        None => format!("{checked} (decay, δ) pairs, no violation"),
        Some(v) => format!("{} violation(s), first: {v}", violations.len()),
    };
    outcome(violations.is_empty(), detail)
}

fn ac4() -> (Outcome, ExperimentReport) {
    let t = Instant::now();
    let r = run_experiment(&load("table_sandwich")).unwrap();
    let elapsed = t.elapsed();
    let widest = r
        .rows
        .iter()
        .filter(|row| row.name.starts_with("corridor"))
        .fold(0.0f64, |a, row| a.max(row.statistic));
    let o = outcome(
        r.all_pass() && widest < 20.0 && elapsed < Duration::from_secs(10),
        format!(
            "{}/{} checks, widest corridor ×{widest:.3} (< ×20), {:.2} s (< 10 s)",
            r.rows.iter().filter(|row| row.pass).count(),
            r.rows.len(),
            elapsed.as_secs_f64()
        ),
    );
    (o, r)
}

fn ac5() -> Outcome {
    let log = entropy_integral(|e: f64| (1.0 / e).ln(), 1.0, false).unwrap();
    let err = (log.value - std::f64::consts::PI.sqrt() / 2.0).abs();
    let inv_sq = entropy_integral(|e: f64| e.powi(-2), 1.0, false).unwrap();
    // ψ(ε) ε^{-1/(αs)} sqrt(log 1/ε) corresponds to ℍ(ε) = ε^{-2/(αs)} log(1/ε)
    let regime = |a_s: f64| {
        entropy_integral(move |e: f64| e.powf(-2.0 / a_s) * (1.0 / e).ln(), 1.0, true)
            .unwrap()
            .divergent
    };
    let finite_ok = [1.2, 2.0, 4.0].iter().all(|&a| !regime(a));
    let divergent_ok = [0.8, 1.0].iter().all(|&a| regime(a));
    outcome(
        err < 1e-4 && !log.divergent && inv_sq.divergent && finite_ok && divergent_ok,
        format!(
            "|I − √π/2| = {err:.2e} (< 1e-4); ε^-2 divergent: {}; αs ∈ {{1.2, 2, 4}} finite: {finite_ok}; αs ∈ {{0.8, 1}} divergent: {divergent_ok}",
            inv_sq.divergent
        ),
    )
}

fn timed(name: &str) -> (ExperimentReport, Duration) {
    let t = Instant::now();
    let r = run_experiment(&load(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    (r, t.elapsed())
}

fn rows_pass(r: &ExperimentReport, prefix: &str) -> (bool, Vec<String>) {
    let rows: Vec<_> = r.rows.iter().filter(|row| row.name.starts_with(prefix)).collect();
    let text = rows
        .iter()
        .map(|row| format!("{}={:.4}", row.name, row.statistic))
        .collect();
    (!rows.is_empty() && rows.iter().all(|row| row.pass), text)
}

fn ac6(r: &ExperimentReport, elapsed: Duration) -> Outcome {
    let (var_ok, var) = rows_pass(r, "variance[");
    let (ks_ok, ks) = rows_pass(r, "ks_sup");
    outcome(
        var_ok && ks_ok && elapsed < Duration::from_secs(300),
        format!(
            "relative variance error (< 0.15): {}; {} (< 0.08); {:.1} s (< 300 s)",
            var.join(" "),
            ks.join(" "),
            elapsed.as_secs_f64()
        ),
    )
}

fn ac7(r: &ExperimentReport, elapsed: Duration) -> Outcome {
    let (ok, text) = rows_pass(r, "variance[x=0]");
    outcome(
        ok && elapsed < Duration::from_secs(600),
        format!("{} (< 0.20); {:.1} s (< 600 s)", text.join(" "), elapsed.as_secs_f64()),
    )
}

fn ac8(r: &ExperimentReport, elapsed: Duration) -> Outcome {
    let slope = r.row("slope_lower").map_or(f64::NAN, |row| row.statistic);
    let (ok, _) = rows_pass(r, "slope_");
    outcome(
        ok && (0.8..=1.2).contains(&slope) && elapsed < Duration::from_secs(900),
        format!("slope {slope:.4} in [0.8, 1.2]; {:.1} s (< 900 s)", elapsed.as_secs_f64()),
    )
}

fn ac9(iid: &ExperimentReport, ar: &ExperimentReport) -> Outcome {
    let (zero_ok, zero) = rows_pass(iid, "iid_zero");
    let (drift_ok, drift) = rows_pass(ar, "ratio_drift");
    outcome(
        zero_ok && drift_ok,
        format!("{} (= 0); {} (< 4)", zero.join(" "), drift.join(" ")),
    )
}

fn ac10(first: &[(&str, ExperimentReport)]) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut differing = Vec::new();
    for (name, report) in first {
        let (a, b) = (dir.path().join(format!("{name}.a")), dir.path().join(format!("{name}.b")));
        report.write(&a).unwrap();
        run_experiment(&load(name)).unwrap().write(&b).unwrap();
        if !same_tree(&a, &b) {
            differing.push(*name);
        }
    }
    outcome(
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} experiments re-run with byte-identical reports", first.len())
        } else {
            format!("reports differ for {}", differing.join(", "))
        },
    )
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            out.extend(files(&p));
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}

fn same_tree(a: &Path, b: &Path) -> bool {
    let (fa, fb) = (files(a), files(b));
    fa.len() == fb.len()
        && fa.iter().zip(&fb).all(|(x, y)| {
            x.strip_prefix(a).unwrap() == y.strip_prefix(b).unwrap()
                && std::fs::read(x).unwrap() == std::fs::read(y).unwrap()
        })
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |id: u32, o: Outcome| {
        println!("AC{id:<2} {}  {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    };
    report(1, ac1());
    report(2, ac2());
    report(3, ac3());
    let (o4, sandwich) = ac4();
    report(4, o4);
    report(5, ac5());
    let (ar, t6) = timed("fclt_ar");
    report(6, ac6(&ar, t6));
    let (local, t7) = timed("fclt_local");
    report(7, ac7(&local, t7));
    let (kde, t8) = timed("kde_rate");
    report(8, ac8(&kde, t8));
    let (iid, _) = timed("variance_bound_iid");
    let (vb, _) = timed("variance_bound");
    report(9, ac9(&iid, &vb));
    let (fclt_iid, _) = timed("fclt_iid");
    let runs = [
        ("table_sandwich", sandwich),
        ("fclt_iid", fclt_iid),
        ("fclt_ar", ar),
        ("fclt_local", local),
        ("kde_rate", kde),
        ("variance_bound_iid", iid),
        ("variance_bound", vb),
    ];
    report(10, ac10(&runs));
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
