use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use lsemp::dependence::{delta_profile, fit_decay, Decay, DecayKind};
use lsemp::estimators::{edf, kde, localized_edf, KernelSpec};
use lsemp::harness::run_config_file;
use lsemp::io::{read_paths, write_paths};
use lsemp::limit::{longrun_cov_global, longrun_cov_indicator, sample_gaussian_limit};
use lsemp::process::{simulate_coupled_pair, simulate_paths, simulate_stationary, ProcessModel, ProcessSpec};
use lsemp::rates::{
    psi, q_star, r_of_delta, submult_check, v_norm, variance_bound, BoundParams, DeltaSequence, WeightProfile,
};
use lsemp::{Error, Result};

use crate::{Command, FitKind, Format, RateOp};

fn model(spec: &str) -> Result<ProcessModel> {
    let pairs = spec
        .split(';')
        .filter(|kv| !kv.trim().is_empty())
        .map(|kv| {
            kv.split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("`{kv}` is not a key=value pair")))
        })
        .collect::<Result<Vec<_>>>()?;
    ProcessModel::new(ProcessSpec::from_pairs(pairs)?)
}

fn number(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("`{}` is not a number", s.trim())))
}

fn numbers(s: &str) -> Result<Vec<f64>> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(number).collect()
}

/// `a,b,c` or `lo:hi:count`.
fn grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [lo, hi, count] => {
            let (lo, hi) = (number(lo)?, number(hi)?);
            let count: usize = count
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad grid count `{count}`")))?;
            if count < 2 || !(lo < hi) {
                return Err(Error::InvalidArgument(format!("grid `{s}` needs lo < hi and count ≥ 2")));
            }
            let step = (hi - lo) / (count - 1) as f64;
            Ok((0..count).map(|j| lo + j as f64 * step).collect())
        }
        [_] => numbers(s),
        _ => Err(Error::InvalidArgument(format!("cannot parse grid `{s}`"))),
    }
}

fn decay(s: &str) -> Result<DeltaSequence> {
    match s.trim().strip_prefix("explicit:") {
        Some(file) => {
            let path = Path::new(file);
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.to_path_buf(),
                source: e,
            })?;
            let values = text
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(number)
                .collect::<Result<Vec<_>>>()?;
            DeltaSequence::explicit(values)
        }
        None => s.parse(),
    }
}

fn path_row(input: &Path, replicate: usize) -> Result<Vec<f64>> {
    let m = read_paths(input)?;
    if replicate >= m.nrows() {
        return Err(Error::InvalidArgument(format!(
            "replicate {replicate} requested, {} has {}",
            input.display(),
            m.nrows()
        )));
    }
    Ok(m.row(replicate).to_vec())
}

fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::Io {
            path: "<stdout>".into(),
            source: e,
        })
}

/// Run one subcommand; `Ok(false)` means an experiment check failed.
pub fn run(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Simulate {
            process,
            n,
            reps,
            seed,
            burnin,
            stationary_at,
            coupled_lag,
            out,
            format,
        } => {
            let m = model(&process.process)?;
            let ens = match (stationary_at, coupled_lag) {
                (Some(u), _) => simulate_stationary(&m, u, n, reps, seed, burnin)?,
                (None, Some(k)) => simulate_coupled_pair(&m, n, k, reps, seed, burnin)?,
                (None, None) => simulate_paths(&m, n, reps, seed, burnin)?,
            };
            let binary = matches!(format, Format::Bin);
            match out {
                Some(p) => write_paths(&p, &ens, binary)?,
                None if binary => {
                    return Err(Error::InvalidArgument("binary output needs --out".into()));
                }
                None => {
                    if ens.coupled.is_some() {
                        return Err(Error::InvalidArgument("the coupled copy needs --out".into()));
                    }
                    let mut s = String::from("replicate,index,value\n");
                    for (r, row) in ens.values.rows().into_iter().enumerate() {
                        for (i, v) in row.iter().enumerate() {
                            let _ = writeln!(s, "{r},{},{v}", i + 1);
                        }
                    }
                    emit(&s)?;
                }
            }
        }
        Command::Depmeasure {
            process,
            n,
            kmax,
            nu,
            reps,
            seed,
            fit,
        } => {
            let m = model(&process.process)?;
            let prof = delta_profile(&m, n, kmax, nu, reps, seed)?;
            let fitted = match fit {
                None => None,
                Some(kind) => {
                    let kind = match kind {
                        FitKind::Poly => DecayKind::Polynomial,
                        FitKind::Exp => DecayKind::Exponential,
                    };
                    let f = fit_decay(&prof, kind)?;
                    match f.decay {
                        Decay::Polynomial { c, alpha } => eprintln!("fit: polynomial c = {c} alpha = {alpha}"),
                        Decay::Exponential { c, rho } => eprintln!("fit: exponential c = {c} rho = {rho}"),
                        Decay::Independent => eprintln!("fit: independent"),
                    }
                    Some(f)
                }
            };
            let mut s = String::from(if fitted.is_some() { "k,delta_hat,se,fitted\n" } else { "k,delta_hat,se\n" });
            for (i, &k) in prof.lags.iter().enumerate() {
                let _ = write!(s, "{k},{},{}", prof.delta_hat[i], prof.se[i]);
                if let Some(f) = &fitted {
                    let _ = write!(s, ",{}", f.eval(k));
                }
                s.push('\n');
            }
            emit(&s)?;
        }
        Command::Rates {
            decay: spec,
            op,
            args,
            dn,
            dinf,
        } => {
            let args = numbers(&args)?;
            if args.is_empty() {
                return Err(Error::InvalidArgument("--args is empty".into()));
            }
            let d = match (&spec, op) {
                (None, RateOp::Psi) => DeltaSequence::zero(),
                (None, _) => return Err(Error::InvalidArgument("--decay is required for this op".into())),
                (Some(s), _) => decay(s)?,
            };
            let name = spec.as_deref().unwrap_or("-").replace(',', ";");
            let mut s = String::new();
            match op {
                RateOp::Bound => {
                    if !(5..=6).contains(&args.len()) {
                        return Err(Error::InvalidArgument("bound takes M,|F|,n,sigma,C_delta[,q]".into()));
                    }
                    let as_count = |v: f64, what: &str| {
                        if v >= 1.0 && v.fract() == 0.0 {
                            Ok(v as u64)
                        } else {
                            Err(Error::InvalidArgument(format!("{what} must be a positive integer, got {v}")))
                        }
                    };
                    let bp = BoundParams::new(args[0], as_count(args[1], "|F|")?, as_count(args[2], "n")?, args[3], args[4]);
                    let q = args.get(5).map(|&q| as_count(q, "q")).transpose()?;
                    let w = WeightProfile {
                        d_n: dn,
                        d_inf: dinf,
                        ..WeightProfile::uniform(1.0)
                    };
                    let b = variance_bound(&bp, &d, &w, q)?;
                    s.push_str("decay,op,value,q,entropy_term,dependence_term,block_term,balanced,balanced_q\n");
                    let _ = writeln!(
                        s,
                        "{name},bound,{},{},{},{},{},{},{}",
                        b.value, b.q, b.entropy_term, b.dependence_term, b.block_term, b.balanced, b.balanced_q
                    );
                }
                RateOp::Submult => {
                    s.push_str("decay,op,q_max,c_beta,argmax_q1,argmax_q2,growth,vanishing,pass\n");
                    for &a in &args {
                        let r = submult_check(&d, a as u64)?;
                        let _ = writeln!(
                            s,
                            "{name},submult,{a},{},{},{},{},{},{}",
                            r.c_beta, r.argmax.0, r.argmax.1, r.growth, r.vanishing, r.pass
                        );
                    }
                }
                _ => {
                    let (label, f): (&str, Box<dyn Fn(f64) -> Result<f64>>) = match op {
                        RateOp::Beta => ("beta", Box::new(|q: f64| Ok(d.beta(q as u64)))),
                        RateOp::Qstar => ("qstar", Box::new(|x| Ok(q_star(&d, x)? as f64))),
                        RateOp::R => ("r", Box::new(|x| r_of_delta(&d, x))),
                        RateOp::Vnorm => ("vnorm", Box::new(|x| v_norm(x, &d, dn))),
                        RateOp::Psi => ("psi", Box::new(|x| Ok(psi(x)))),
                        RateOp::Bound | RateOp::Submult => unreachable!(),
                    };
                    s.push_str("decay,op,arg,value\n");
                    for &a in &args {
                        if matches!(op, RateOp::Beta) && !(a >= 1.0 && a.fract() == 0.0) {
                            return Err(Error::InvalidArgument(format!("beta needs integer q ≥ 1, got {a}")));
                        }
                        let _ = writeln!(s, "{name},{label},{a},{}", f(a)?);
                    }
                }
            }
            emit(&s)?;
        }
        Command::Edf {
            input,
            replicate,
            x,
            v,
            h,
            kernel,
        } => {
            let path = path_row(&input, replicate)?;
            let xs = grid(&x)?;
            let mut s = String::new();
            match (v, h) {
                (Some(v), Some(h)) => {
                    let k: KernelSpec = kernel.parse()?;
                    let e = localized_edf(&path, &xs, v, h, &k)?;
                    s.push_str("x,v,value\n");
                    for (x, val) in xs.iter().zip(&e.values) {
                        let _ = writeln!(s, "{x},{v},{val}");
                    }
                }
                _ => {
                    let e = edf(&path, &xs)?;
                    s.push_str("x,value\n");
                    for (x, val) in xs.iter().zip(&e.values) {
                        let _ = writeln!(s, "{x},{val}");
                    }
                }
            }
            emit(&s)?;
        }
        Command::Kde {
            input,
            replicate,
            x,
            v,
            h1,
            h2,
            kernel,
        } => {
            let path = path_row(&input, replicate)?;
            let (xs, vs) = (grid(&x)?, grid(&v)?);
            let k: KernelSpec = kernel.parse()?;
            let surf = kde(&path, &xs, &vs, h1, h2, &k)?;
            let mut s = String::from("x,v,value\n");
            for (iv, v) in vs.iter().enumerate() {
                for (ix, x) in xs.iter().enumerate() {
                    let _ = writeln!(s, "{x},{v},{}", surf.values[[iv, ix]]);
                }
            }
            emit(&s)?;
        }
        Command::Limit {
            process,
            x,
            v,
            global,
            pathlen,
            lagmax,
            kernel,
            seed,
            draws,
            sup_out,
        } => {
            let m = model(&process.process)?;
            let xs = grid(&x)?;
            let k: Option<KernelSpec> = kernel.as_deref().map(str::parse).transpose()?;
            let est = if global {
                if k.is_some() {
                    return Err(Error::InvalidArgument("--kernel applies to the local case only".into()));
                }
                longrun_cov_global(&m, &xs, pathlen, lagmax, seed)?
            } else {
                longrun_cov_indicator(&m, v, &xs, pathlen, lagmax, seed, k.as_ref())?
            };
            eprintln!(
                "lag window {} L = {}, kernel factor {}, {} path(s) of length {}",
                est.lag_window.name, est.lag_window.lagmax, est.kernel_factor, est.paths, est.pathlen
            );
            let mut s = String::from("x");
            for x in &xs {
                let _ = write!(s, ",{x}");
            }
            s.push('\n');
            for (i, x) in xs.iter().enumerate() {
                let _ = write!(s, "{x}");
                for j in 0..xs.len() {
                    let _ = write!(s, ",{}", est.matrix[[i, j]]);
                }
                s.push('\n');
            }
            emit(&s)?;
            if draws > 0 {
                let sample = sample_gaussian_limit(&est.matrix, draws, seed)?;
                let mut t = String::from("sup\n");
                for v in &sample.sup_stats {
                    let _ = writeln!(t, "{v}");
                }
                match sup_out {
                    Some(p) => std::fs::write(&p, t).map_err(|e| Error::Io { path: p, source: e })?,
                    None => return Err(Error::InvalidArgument("--draws needs --sup-out".into())),
                }
            }
        }
        Command::Experiment { config, out } => {
            let report = run_config_file(&config, &out)?;
            for (stage, d) in &report.timing {
                eprintln!("time {stage}: {:.3} s", d.as_secs_f64());
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            let mut s = String::new();
            for r in &report.rows {
                let _ = writeln!(
                    s,
                    "{} {} statistic={} threshold={}",
                    if r.pass { "PASS" } else { "FAIL" },
                    r.name,
                    r.statistic,
                    r.threshold
                );
            }
            emit(&s)?;
            return Ok(report.all_pass());
        }
    }
    Ok(true)
}
