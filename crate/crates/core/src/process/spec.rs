use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Grid resolution used when checking coefficient functions for contraction.
pub const CHECK_GRID: usize = 1024;
/// Lower bound on the ARCH intercept `a0(u)`.
pub const ARCH_MIN_INTERCEPT: f64 = 1e-8;
/// Truncated-tail ℓ¹ mass allowed for linear processes.
pub const MA_TAIL_MASS: f64 = 1e-8;
/// Hard cap on the MA truncation lag.
pub const MA_MAX_LAGS: usize = 5_000_000;

/// A named coefficient function of rescaled time `u ∈ [0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CoefFn {
    Constant(f64),
    /// `intercept + slope * u`
    Affine { intercept: f64, slope: f64 },
    /// `mean + amplitude * sin(2π (frequency * u + phase))`
    Sinusoidal {
        mean: f64,
        amplitude: f64,
        frequency: f64,
        phase: f64,
    },
}

impl CoefFn {
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            CoefFn::Constant(c) => c,
            CoefFn::Affine { intercept, slope } => intercept + slope * u,
            CoefFn::Sinusoidal {
                mean,
                amplitude,
                frequency,
                phase,
            } => mean + amplitude * (std::f64::consts::TAU * (frequency * u + phase)).sin(),
        }
    }

    pub fn is_constant(&self) -> bool {
        match *self {
            CoefFn::Constant(_) => true,
            CoefFn::Affine { slope, .. } => slope == 0.0,
            CoefFn::Sinusoidal { amplitude, .. } => amplitude == 0.0,
        }
    }

    fn grid() -> impl Iterator<Item = f64> {
        (0..CHECK_GRID).map(|j| j as f64 / (CHECK_GRID - 1) as f64)
    }

    /// `sup_u |c(u)|` on the check grid.
    pub fn sup_abs(&self) -> f64 {
        Self::grid().map(|u| self.eval(u).abs()).fold(0.0, f64::max)
    }

    pub fn inf(&self) -> f64 {
        Self::grid().map(|u| self.eval(u)).fold(f64::INFINITY, f64::min)
    }

    /// Rescaled time where `|c(u)|` is largest on the check grid; ties go to
    /// the largest `u`.
    pub fn argmax_abs(&self) -> f64 {
        let mut best = (f64::NEG_INFINITY, 1.0);
        for u in Self::grid() {
            let v = self.eval(u).abs();
            if v >= best.0 {
                best = (v, u);
            }
        }
        best.1
    }
}

impl fmt::Display for CoefFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            CoefFn::Constant(c) => write!(f, "const({c})"),
            CoefFn::Affine { intercept, slope } => write!(f, "affine({intercept},{slope})"),
            CoefFn::Sinusoidal {
                mean,
                amplitude,
                frequency,
                phase,
            } => write!(f, "sin({mean},{amplitude},{frequency},{phase})"),
        }
    }
}

/// Split `name(a,b,...)` into the name and its numeric arguments.
pub(crate) fn parse_call(s: &str) -> Result<(String, Vec<f64>)> {
    let s = s.trim();
    let bad = || Error::InvalidArgument(format!("cannot parse `{s}`"));
    match s.find('(') {
        None => Ok((s.to_ascii_lowercase(), Vec::new())),
        Some(open) => {
            let inner = s[open + 1..].strip_suffix(')').ok_or_else(bad)?;
            let args = if inner.trim().is_empty() {
                Vec::new()
            } else {
                inner
                    .split(',')
                    .map(|a| a.trim().parse::<f64>().map_err(|_| bad()))
                    .collect::<Result<Vec<_>>>()?
            };
            Ok((s[..open].trim().to_ascii_lowercase(), args))
        }
    }
}

fn arity(name: &str, args: &[f64], n: usize) -> Result<()> {
    if args.len() != n {
        return Err(Error::InvalidArgument(format!(
            "`{name}` takes {n} argument(s), got {}",
            args.len()
        )));
    }
    Ok(())
}

impl FromStr for CoefFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, a) = parse_call(s)?;
        match name.as_str() {
            "const" | "constant" => {
                arity(&name, &a, 1)?;
                Ok(CoefFn::Constant(a[0]))
            }
            "affine" => {
                arity(&name, &a, 2)?;
                Ok(CoefFn::Affine {
                    intercept: a[0],
                    slope: a[1],
                })
            }
            "sin" | "sinusoidal" => {
                arity(&name, &a, 4)?;
                Ok(CoefFn::Sinusoidal {
                    mean: a[0],
                    amplitude: a[1],
                    frequency: a[2],
                    phase: a[3],
                })
            }
            _ => Err(Error::InvalidArgument(format!(
                "unknown coefficient function `{s}` (expected const, affine or sin)"
            ))),
        }
    }
}

/// Innovation law. All laws except Student-t have unit variance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Innovation {
    StandardGaussian,
    StudentT { df: f64 },
    /// Uniform on `(-√3, √3)`.
    Uniform,
}

impl Innovation {
    /// Transform one pair of uniforms into a draw.
    #[inline]
    pub fn from_uniforms(&self, u1: f64, u2: f64) -> f64 {
        match *self {
            Innovation::StandardGaussian => {
                (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
            }
            // Bailey's polar method.
            Innovation::StudentT { df } => {
                (df * (u1.powf(-2.0 / df) - 1.0)).sqrt() * (std::f64::consts::TAU * u2).cos()
            }
            Innovation::Uniform => 3f64.sqrt() * (2.0 * u1 - 1.0),
        }
    }

    pub fn has_moment(&self, order: f64) -> bool {
        match *self {
            Innovation::StudentT { df } => order < df,
            _ => true,
        }
    }

    pub fn require_moment(&self, order: f64) -> Result<()> {
        if self.has_moment(order) {
            Ok(())
        } else {
            Err(Error::MomentViolation {
                order,
                detail: format!("{self} has finite moments only below its degrees of freedom"),
            })
        }
    }

    /// `E[ε²]`, infinite when it does not exist.
    pub fn second_moment(&self) -> f64 {
        match *self {
            Innovation::StandardGaussian | Innovation::Uniform => 1.0,
            Innovation::StudentT { df } if df > 2.0 => df / (df - 2.0),
            Innovation::StudentT { .. } => f64::INFINITY,
        }
    }
}

impl fmt::Display for Innovation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Innovation::StandardGaussian => write!(f, "gaussian"),
            Innovation::StudentT { df } => write!(f, "student_t({df})"),
            Innovation::Uniform => write!(f, "uniform"),
        }
    }
}

impl FromStr for Innovation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, a) = parse_call(s)?;
        match name.as_str() {
            "gaussian" | "normal" => Ok(Innovation::StandardGaussian),
            "uniform" => Ok(Innovation::Uniform),
            "student_t" | "t" => {
                arity(&name, &a, 1)?;
                if !(a[0] > 0.0) {
                    return Err(Error::InvalidSpec("Student-t df must be positive".into()));
                }
                Ok(Innovation::StudentT { df: a[0] })
            }
            _ => Err(Error::InvalidArgument(format!(
                "unknown innovation `{s}` (expected gaussian, student_t(df) or uniform)"
            ))),
        }
    }
}

/// Lag profile of a linear process: `b_j(u) = scale(u) * w_j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MaDecay {
    /// `w_j = (j + 1)^(-exponent)`, exponent > 1.
    Polynomial { exponent: f64 },
    /// `w_j = rate^j`, 0 < rate < 1.
    Geometric { rate: f64 },
}

impl MaDecay {
    #[inline]
    pub fn weight(&self, j: usize) -> f64 {
        match *self {
            MaDecay::Polynomial { exponent } => ((j + 1) as f64).powf(-exponent),
            MaDecay::Geometric { rate } => rate.powi(j as i32),
        }
    }

    /// Upper bound on `Σ_{j > lag} w_j`.
    pub fn tail_bound(&self, lag: usize) -> f64 {
        match *self {
            // Σ_{m ≥ lag+2} m^-γ ≤ ∫_{lag+1}^∞ x^-γ dx
            MaDecay::Polynomial { exponent } => {
                ((lag + 1) as f64).powf(1.0 - exponent) / (exponent - 1.0)
            }
            MaDecay::Geometric { rate } => rate.powf((lag + 1) as f64) / (1.0 - rate),
        }
    }

    /// Σ_j w_j.
    pub fn l1_norm(&self) -> f64 {
        match *self {
            MaDecay::Polynomial { exponent } => {
                crate::rates::DeltaSequence::Polynomial {
                    c: 1.0,
                    alpha: exponent,
                }
                .beta(1)
            }
            MaDecay::Geometric { rate } => 1.0 / (1.0 - rate),
        }
    }
}

impl fmt::Display for MaDecay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            MaDecay::Polynomial { exponent } => write!(f, "poly({exponent})"),
            MaDecay::Geometric { rate } => write!(f, "geom({rate})"),
        }
    }
}

impl FromStr for MaDecay {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, a) = parse_call(s)?;
        match name.as_str() {
            "poly" | "polynomial" => {
                arity(&name, &a, 1)?;
                Ok(MaDecay::Polynomial { exponent: a[0] })
            }
            "geom" | "geometric" => {
                arity(&name, &a, 1)?;
                Ok(MaDecay::Geometric { rate: a[0] })
            }
            _ => Err(Error::InvalidArgument(format!(
                "unknown MA decay `{s}` (expected poly(exponent) or geom(rate))"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Family {
    Iid,
    /// `X_i = a(i/n) X_{i-1} + ε_i`
    TvAr1 { coef: CoefFn },
    /// `X_i = Σ_j scale(i/n) w_j ε_{i-j}`
    TvLinearMa { scale: CoefFn, decay: MaDecay },
    /// `X_i = sqrt(a0(i/n) + a1(i/n) X_{i-1}²) ε_i`
    TvArch1 { a0: CoefFn, a1: CoefFn },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Iid => "iid",
            Family::TvAr1 { .. } => "tvar1",
            Family::TvLinearMa { .. } => "tvma",
            Family::TvArch1 { .. } => "tvarch1",
        }
    }
}

/// A Bernoulli-shift process: family, innovation law and a scale applied to
/// every innovation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProcessSpec {
    pub family: Family,
    pub innovation: Innovation,
    pub innovation_scale: f64,
}

impl ProcessSpec {
    pub fn new(family: Family, innovation: Innovation) -> Self {
        ProcessSpec {
            family,
            innovation,
            innovation_scale: 1.0,
        }
    }

    pub fn iid_gaussian() -> Self {
        Self::new(Family::Iid, Innovation::StandardGaussian)
    }

    pub fn ar1(coef: CoefFn) -> Self {
        Self::new(Family::TvAr1 { coef }, Innovation::StandardGaussian)
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.innovation_scale = scale;
        self
    }

    pub fn with_innovation(mut self, innovation: Innovation) -> Self {
        self.innovation = innovation;
        self
    }

    /// Time-invariant coefficients.
    pub fn is_stationary(&self) -> bool {
        match &self.family {
            Family::Iid => true,
            Family::TvAr1 { coef } => coef.is_constant(),
            Family::TvLinearMa { scale, .. } => scale.is_constant(),
            Family::TvArch1 { a0, a1 } => a0.is_constant() && a1.is_constant(),
        }
    }

    /// Build key/value pairs from the textual representation used by
    /// configuration files and the CLI.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut family = None;
        let mut coef = None;
        let mut innovation = Innovation::StandardGaussian;
        let mut scale = 1.0;
        let mut ma_decay = None;
        let mut ma_scale = None;
        let mut a0 = None;
        let mut a1 = None;
        for (k, v) in pairs {
            match k.trim() {
                "family" => family = Some(v.trim().to_ascii_lowercase()),
                "coef" => coef = Some(v.parse::<CoefFn>()?),
                "innovation" => innovation = v.parse()?,
                "scale" => {
                    scale = v.trim().parse().map_err(|_| {
                        Error::InvalidArgument(format!("scale must be a number, got `{v}`"))
                    })?
                }
                "ma_decay" => ma_decay = Some(v.parse::<MaDecay>()?),
                "ma_scale" => ma_scale = Some(v.parse::<CoefFn>()?),
                "arch_a0" => a0 = Some(v.parse::<CoefFn>()?),
                "arch_a1" => a1 = Some(v.parse::<CoefFn>()?),
                other => {
                    return Err(Error::InvalidArgument(format!("unknown process key `{other}`")))
                }
            }
        }
        let missing = |k: &str| Error::InvalidSpec(format!("missing `{k}`"));
        let family = match family.as_deref() {
            Some("iid") => Family::Iid,
            Some("tvar1") | Some("ar1") => Family::TvAr1 {
                coef: coef.ok_or_else(|| missing("coef"))?,
            },
            Some("tvma") | Some("ma") => Family::TvLinearMa {
                scale: ma_scale.unwrap_or(CoefFn::Constant(1.0)),
                decay: ma_decay.ok_or_else(|| missing("ma_decay"))?,
            },
            Some("tvarch1") | Some("arch1") => Family::TvArch1 {
                a0: a0.ok_or_else(|| missing("arch_a0"))?,
                a1: a1.ok_or_else(|| missing("arch_a1"))?,
            },
            Some(other) => {
                return Err(Error::InvalidSpec(format!(
                    "unknown family `{other}` (expected iid, tvar1, tvma, tvarch1)"
                )))
            }
            None => return Err(missing("family")),
        };
        Ok(ProcessSpec {
            family,
            innovation,
            innovation_scale: scale,
        })
    }
}

impl fmt::Display for ProcessSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            Family::Iid => write!(f, "family=iid")?,
            Family::TvAr1 { coef } => write!(f, "family=tvar1;coef={coef}")?,
            Family::TvLinearMa { scale, decay } => {
                write!(f, "family=tvma;ma_scale={scale};ma_decay={decay}")?
            }
            Family::TvArch1 { a0, a1 } => write!(f, "family=tvarch1;arch_a0={a0};arch_a1={a1}")?,
        }
        write!(
            f,
            ";innovation={};scale={}",
            self.innovation, self.innovation_scale
        )
    }
}
