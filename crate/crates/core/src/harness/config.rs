use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ini::Ini;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimators::KernelSpec;
use crate::process::{ProcessModel, ProcessSpec};
use crate::rates::DeltaSequence;

/// Smallest replicate count for distributional checks.
pub const MIN_DISTRIBUTIONAL_REPS: usize = 100;
/// Smallest pilot replicate count.
pub const MIN_PILOT_REPS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    FcltEdf,
    FcltLocalEdf,
    KdeRate,
    VarianceBoundScaling,
    TableSandwich,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::FcltEdf => "fclt_edf",
            ExperimentKind::FcltLocalEdf => "fclt_local_edf",
            ExperimentKind::KdeRate => "kde_rate",
            ExperimentKind::VarianceBoundScaling => "variance_bound_scaling",
            ExperimentKind::TableSandwich => "table_sandwich",
        }
    }

    fn needs_process(&self) -> bool {
        !matches!(self, ExperimentKind::TableSandwich)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "fclt_edf" => ExperimentKind::FcltEdf,
            "fclt_local_edf" => ExperimentKind::FcltLocalEdf,
            "kde_rate" => ExperimentKind::KdeRate,
            "variance_bound_scaling" => ExperimentKind::VarianceBoundScaling,
            "table_sandwich" => ExperimentKind::TableSandwich,
            other => {
                return Err(Error::Config(format!(
                    "unknown experiment kind `{other}` (expected fclt_edf, fclt_local_edf, kde_rate, variance_bound_scaling, table_sandwich)"
                )))
            }
        })
    }
}

/// A bandwidth as a function of `n`: `c·n^p` or one value per schedule entry.
#[derive(Clone, Debug, PartialEq)]
pub enum BandwidthRule {
    Power { c: f64, p: f64 },
    Values(Vec<f64>),
}

impl BandwidthRule {
    pub fn at(&self, index: usize, n: usize) -> f64 {
        match self {
            BandwidthRule::Power { c, p } => c * (n as f64).powf(*p),
            BandwidthRule::Values(v) => v[index],
        }
    }
}

fn parse_number(s: &str) -> Result<f64> {
    let s = s.trim();
    let v = if let Some((a, b)) = s.split_once('/') {
        let (a, b): (f64, f64) = (num(a)?, num(b)?);
        a / b
    } else {
        num(s)?
    };
    if !v.is_finite() {
        return Err(Error::Config(format!("`{s}` is not a finite number")));
    }
    Ok(v)
}

fn num(s: &str) -> Result<f64> {
    let t = s.trim().trim_start_matches('(').trim_end_matches(')');
    t.trim()
        .parse()
        .map_err(|_| Error::Config(format!("`{s}` is not a number")))
}

impl FromStr for BandwidthRule {
    type Err = Error;

    /// `n^(-1/3)`, `0.5*n^(-1/5)` or a comma-separated list.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(pos) = s.find("n^") {
            let head = s[..pos].trim();
            let c = if head.is_empty() {
                1.0
            } else {
                parse_number(head.strip_suffix('*').ok_or_else(|| {
                    Error::Config(format!("bandwidth rule `{s}` must look like c*n^(p)"))
                })?)?
            };
            let p = parse_number(&s[pos + 2..])?;
            return Ok(BandwidthRule::Power { c, p });
        }
        Ok(BandwidthRule::Values(
            s.split(',').map(parse_number).collect::<Result<_>>()?,
        ))
    }
}

/// Per-check thresholds; unset keys take the defaults of the experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct Tolerances {
    values: BTreeMap<String, f64>,
}

impl Tolerances {
    pub fn get(&self, key: &str) -> f64 {
        self.values[key]
    }

    pub fn get_opt(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }
}

/// Tolerance keys with defaults; `None` marks an opt-in check.
fn tolerance_keys(kind: ExperimentKind) -> &'static [(&'static str, Option<f64>)] {
    match kind {
        ExperimentKind::FcltEdf => &[("variance_rel", Some(0.15)), ("cov_se", Some(3.0)), ("ks", Some(0.08))],
        ExperimentKind::FcltLocalEdf => &[
            ("variance_rel", Some(0.20)),
            ("cov_se", Some(3.0)),
            ("ks", Some(0.08)),
            ("sd_halving", None),
        ],
        ExperimentKind::KdeRate => &[
            ("slope_lo", Some(0.8)),
            ("slope_hi", Some(1.2)),
            ("trend_violations", Some(1.0)),
        ],
        ExperimentKind::VarianceBoundScaling => &[
            ("ratio_drift", Some(4.0)),
            ("zero", Some(f64::EPSILON)),
            ("h_term", Some(1e-12)),
        ],
        ExperimentKind::TableSandwich => &[("corridor", Some(20.0)), ("drift", Some(0.1))],
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub name: String,
    pub seed: u64,
    pub reps: usize,
    pub pilot_reps: usize,
    pub spec: Option<ProcessSpec>,
    pub xgrid: Vec<f64>,
    pub v: Option<f64>,
    pub class_sizes: Vec<u64>,
    pub decays: Vec<DeltaSequence>,
    pub arg_range: (f64, f64),
    pub points_per_decade: usize,
    pub ns: Vec<usize>,
    pub h: Option<BandwidthRule>,
    pub h1: Option<BandwidthRule>,
    pub h2: Option<BandwidthRule>,
    pub kernel: KernelSpec,
    pub lagmax: Option<usize>,
    pub longrun_pathlen: usize,
    pub limit_draws: usize,
    /// Decay exponent and Hölder exponent entering the KDE side condition.
    pub side_alpha: f64,
    pub side_s: f64,
    pub tolerances: Tolerances,
    /// Hex SHA-256 of the configuration text.
    pub digest: String,
}

const SECTIONS: [&str; 5] = ["experiment", "process", "grids", "schedule", "tolerances"];

struct Section<'a> {
    name: &'a str,
    entries: BTreeMap<String, String>,
}

impl Section<'_> {
    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    fn require(&mut self, key: &str) -> Result<String> {
        self.take(key)
            .ok_or_else(|| Error::Config(format!("[{}] is missing `{key}`", self.name)))
    }

    fn parsed<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v.trim().parse().map(Some).map_err(|_| {
                Error::Config(format!("[{}] `{key}` has an invalid value `{v}`", self.name))
            }),
        }
    }

    fn finish(self) -> Result<()> {
        match self.entries.keys().next() {
            Some(k) => Err(Error::Config(format!("[{}] has an unknown or unused key `{k}`", self.name))),
            None => Ok(()),
        }
    }
}

fn list(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(parse_number).collect()
}

fn count_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| {
            let v = parse_number(t)?;
            if v < 1.0 || v.fract() != 0.0 || v > 1e12 {
                return Err(Error::Config(format!("`{}` is not a positive integer", t.trim())));
            }
            Ok(v as usize)
        })
        .collect()
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str_noescape(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut sections: BTreeMap<&str, Section> = SECTIONS
            .iter()
            .map(|&name| {
                (
                    name,
                    Section {
                        name,
                        entries: BTreeMap::new(),
                    },
                )
            })
            .collect();
        for name in ini.sections() {
            let Some(name) = name else {
                if ini.general_section().is_empty() {
                    continue;
                }
                return Err(Error::Config("keys must appear inside a [section]".into()));
            };
            let sec = sections
                .get_mut(name)
                .ok_or_else(|| Error::Config(format!("unknown section [{name}]")))?;
            if ini.section_all(Some(name)).count() > 1 {
                return Err(Error::Config(format!("section [{name}] appears twice")));
            }
            for (k, v) in ini.section(Some(name)).expect("listed").iter() {
                if sec.entries.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                    return Err(Error::Config(format!("[{name}] sets `{k}` twice")));
                }
            }
        }
        let mut take = |name: &str| sections.remove(name).expect("known section");
        let mut exp = take("experiment");
        let mut process = take("process");
        let mut grids = take("grids");
        let mut schedule = take("schedule");
        let mut tol = take("tolerances");

        let kind: ExperimentKind = exp.require("kind")?.parse()?;
        let name = exp.take("name").unwrap_or_else(|| kind.name().to_string());
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(Error::Config(format!("experiment name `{name}` must be [A-Za-z0-9_-]+")));
        }
        let seed: u64 = exp.parsed("seed")?.ok_or_else(|| Error::Config("[experiment] is missing `seed`".into()))?;
        let reps: usize = exp.parsed("reps")?.unwrap_or(0);
        let pilot_factor: usize = exp.parsed("pilot_factor")?.unwrap_or(50);
        let pilot_reps: usize = exp.parsed("pilot_reps")?.unwrap_or(pilot_factor * reps);
        exp.finish()?;

        let spec = if kind.needs_process() {
            let pairs: Vec<(String, String)> = std::mem::take(&mut process.entries).into_iter().collect();
            let spec = ProcessSpec::from_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))
                .map_err(|e| Error::Config(format!("[process]: {e}")))?;
            ProcessModel::new(spec).map_err(|e| Error::Config(format!("[process]: {e}")))?;
            Some(spec)
        } else {
            None
        };
        process.finish()?;

        let xgrid = grids.take("x").map(|s| list(&s)).transpose()?.unwrap_or_default();
        let v: Option<f64> = grids.take("v").map(|s| parse_number(&s)).transpose()?;
        let class_sizes: Vec<u64> = grids
            .take("class_sizes")
            .map(|s| count_list(&s))
            .transpose()?
            .unwrap_or_default()
            .into_iter()
            .map(|c| c as u64)
            .collect();
        let decays: Vec<DeltaSequence> = grids
            .take("decays")
            .map(|s| s.split_whitespace().map(str::parse).collect::<Result<_>>())
            .transpose()
            .map_err(|e| Error::Config(format!("[grids] decays: {e}")))?
            .unwrap_or_default();
        let arg_lo = grids.take("arg_lo").map(|s| parse_number(&s)).transpose()?.unwrap_or(1e-6);
        let arg_hi = grids.take("arg_hi").map(|s| parse_number(&s)).transpose()?.unwrap_or(1e-2);
        let points_per_decade: usize = grids.parsed("points_per_decade")?.unwrap_or(10);
        grids.finish()?;

        let ns = schedule.take("n").map(|s| count_list(&s)).transpose()?.unwrap_or_default();
        let h = schedule.parsed::<BandwidthRule>("h")?;
        let h1 = schedule.parsed::<BandwidthRule>("h1")?;
        let h2 = schedule.parsed::<BandwidthRule>("h2")?;
        let kernel: KernelSpec = schedule.parsed("kernel")?.unwrap_or_else(KernelSpec::epanechnikov);
        let lagmax: Option<usize> = schedule.parsed("lagmax")?;
        let longrun_pathlen = schedule
            .take("longrun_pathlen")
            .map(|s| count_list(&s))
            .transpose()?
            .map_or(1_000_000, |v| v[0]);
        let limit_draws: usize = schedule.parsed("limit_draws")?.unwrap_or(20 * reps);
        let side_alpha = schedule.take("side_alpha").map(|s| {
            if s.trim() == "inf" {
                Ok(f64::INFINITY)
            } else {
                parse_number(&s)
            }
        });
        let side_alpha = side_alpha.transpose()?.unwrap_or(f64::INFINITY);
        let side_s = schedule.take("side_s").map(|s| parse_number(&s)).transpose()?.unwrap_or(0.5);
        schedule.finish()?;

        let keys = tolerance_keys(kind);
        let mut values = BTreeMap::new();
        for &(k, default) in keys {
            match tol.take(k) {
                Some(v) => {
                    values.insert(k.to_string(), parse_number(&v)?);
                }
                None => {
                    if let Some(d) = default {
                        values.insert(k.to_string(), d);
                    }
                }
            }
        }
        tol.finish()?;

        let cfg = ExperimentConfig {
            kind,
            name,
            seed,
            reps,
            pilot_reps,
            spec,
            xgrid,
            v,
            class_sizes,
            decays,
            arg_range: (arg_lo, arg_hi),
            points_per_decade,
            ns,
            h,
            h1,
            h2,
            kernel,
            lagmax,
            longrun_pathlen,
            limit_draws,
            side_alpha,
            side_s,
            tolerances: Tolerances { values },
            digest: hex::encode(Sha256::digest(text.as_bytes())),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn model(&self) -> Result<ProcessModel> {
        let spec = self
            .spec
            .ok_or_else(|| Error::Config(format!("{} needs a [process] section", self.kind)))?;
        ProcessModel::new(spec)
    }

    fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        let kind = self.kind;
        if self.ns.windows(2).any(|w| w[0] >= w[1]) {
            return fail("schedule n values must be strictly increasing".into());
        }
        let need = |ok: bool, what: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!("{kind} needs {what}")))
            }
        };
        let extra = |present: bool, what: &str| -> Result<()> {
            if present {
                Err(Error::Config(format!("{kind} does not use {what}")))
            } else {
                Ok(())
            }
        };
        for (rule, name) in [(&self.h, "h"), (&self.h1, "h1"), (&self.h2, "h2")] {
            if let Some(BandwidthRule::Values(v)) = rule {
                if v.len() != self.ns.len() {
                    return fail(format!("`{name}` lists {} values for {} sample sizes", v.len(), self.ns.len()));
                }
            }
            if let Some(rule) = rule {
                for (i, &n) in self.ns.iter().enumerate() {
                    let b = rule.at(i, n);
                    if !(b > 0.0 && b.is_finite() && (name == "h2" || b <= 1.0)) {
                        return fail(format!("bandwidth {name} = {b} at n = {n} is out of range"));
                    }
                }
            }
        }
        let sorted = |g: &[f64]| g.windows(2).all(|w| w[0] < w[1]);
        match kind {
            ExperimentKind::FcltEdf | ExperimentKind::FcltLocalEdf => {
                need(self.reps >= MIN_DISTRIBUTIONAL_REPS, "reps ≥ 100 for distributional checks")?;
                need(self.pilot_reps >= MIN_PILOT_REPS, "pilot reps ≥ 50")?;
                need(!self.xgrid.is_empty() && sorted(&self.xgrid), "a strictly increasing x grid")?;
                need(self.ns.len() == 1, "exactly one sample size n")?;
                need(self.limit_draws >= 1, "limit_draws ≥ 1")?;
                let spec = self.spec.expect("process parsed");
                extra(!self.class_sizes.is_empty() || !self.decays.is_empty(), "class sizes or decays")?;
                extra(self.h1.is_some() || self.h2.is_some(), "h1/h2")?;
                if kind == ExperimentKind::FcltEdf {
                    need(spec.is_stationary(), "a stationary process (constant coefficients)")?;
                    extra(self.h.is_some() || self.v.is_some(), "h or v")?;
                } else {
                    let v = self.v.ok_or_else(|| Error::Config(format!("{kind} needs a location v")))?;
                    let h = self.h.as_ref().ok_or_else(|| Error::Config(format!("{kind} needs a bandwidth h")))?;
                    self.kernel.require_lipschitz().map_err(|e| Error::Config(e.to_string()))?;
                    let n = self.ns[0];
                    for hh in [h.at(0, n), 0.5 * h.at(0, n)] {
                        crate::estimators::check_window(v, hh)
                            .map_err(|e| Error::Config(e.to_string()))?;
                    }
                }
            }
            ExperimentKind::KdeRate => {
                need(self.reps >= 1, "reps ≥ 1")?;
                need(self.pilot_reps >= MIN_PILOT_REPS, &format!("pilot reps ≥ {MIN_PILOT_REPS} (got {})", self.pilot_reps))?;
                need(self.ns.len() >= 3, "at least three sample sizes for the slope fit")?;
                need(self.h1.is_some() && self.h2.is_some(), "bandwidth rules h1 and h2")?;
                extra(self.h.is_some() || self.v.is_some() || !self.xgrid.is_empty(), "h, v or an x grid")?;
                need(self.side_s > 0.0 && self.side_s <= 1.0, "side_s in (0, 1]")?;
                need(self.side_alpha > 0.0, "side_alpha > 0")?;
            }
            ExperimentKind::VarianceBoundScaling => {
                need(self.reps >= 1, "reps ≥ 1")?;
                need(!self.class_sizes.is_empty(), "class sizes")?;
                need(self.class_sizes.iter().all(|&c| c >= 2), "class sizes ≥ 2")?;
                need(self.ns.len() >= 2, "at least two sample sizes")?;
                extra(self.h.is_some() || self.h1.is_some() || self.h2.is_some(), "bandwidths")?;
            }
            ExperimentKind::TableSandwich => {
                need(!self.decays.is_empty(), "at least one decay")?;
                let (lo, hi) = self.arg_range;
                need(lo > 0.0 && lo < hi && hi.is_finite(), "0 < arg_lo < arg_hi")?;
                need(self.points_per_decade >= 1, "points_per_decade ≥ 1")?;
                extra(!self.ns.is_empty(), "a sample-size schedule")?;
            }
        }
        Ok(())
    }
}
