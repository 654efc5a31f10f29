use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KernelKind {
    Rectangular,
    Triangular,
    Epanechnikov,
}

/// A probability kernel supported on `[-1/2, 1/2]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// `None` for the discontinuous rectangular kernel.
    pub lipschitz: Option<f64>,
    /// `∫K²`.
    pub l2norm: f64,
    /// `sup |K|`.
    pub peak: f64,
}

impl KernelSpec {
    pub fn new(kind: KernelKind) -> Self {
        let (lipschitz, l2norm, peak) = match kind {
            KernelKind::Rectangular => (None, 1.0, 1.0),
            KernelKind::Triangular => (Some(4.0), 4.0 / 3.0, 2.0),
            KernelKind::Epanechnikov => (Some(6.0), 6.0 / 5.0, 1.5),
        };
        KernelSpec {
            kind,
            lipschitz,
            l2norm,
            peak,
        }
    }

    pub fn rectangular() -> Self {
        Self::new(KernelKind::Rectangular)
    }

    pub fn triangular() -> Self {
        Self::new(KernelKind::Triangular)
    }

    pub fn epanechnikov() -> Self {
        Self::new(KernelKind::Epanechnikov)
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        let a = u.abs();
        if a > 0.5 {
            return 0.0;
        }
        match self.kind {
            KernelKind::Rectangular => 1.0,
            KernelKind::Triangular => 4.0 * (0.5 - a),
            KernelKind::Epanechnikov => 1.5 * (1.0 - 4.0 * u * u),
        }
    }

    /// `K_h(u) = K(u/h)/h`.
    #[inline]
    pub fn scaled(&self, u: f64, h: f64) -> f64 {
        self.eval(u / h) / h
    }

    pub fn is_lipschitz(&self) -> bool {
        self.lipschitz.is_some()
    }

    /// Reject kernels without a Lipschitz constant.
    pub fn require_lipschitz(&self) -> Result<()> {
        if self.is_lipschitz() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "the {self} kernel is not Lipschitz continuous"
            )))
        }
    }
}

/// `∫K²`.
pub fn kernel_l2(kernel: &KernelSpec) -> f64 {
    kernel.l2norm
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.kind {
            KernelKind::Rectangular => "rectangular",
            KernelKind::Triangular => "triangular",
            KernelKind::Epanechnikov => "epanechnikov",
        };
        f.write_str(name)
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rectangular" | "uniform" | "box" => Ok(Self::rectangular()),
            "triangular" => Ok(Self::triangular()),
            "epanechnikov" => Ok(Self::epanechnikov()),
            other => Err(Error::InvalidArgument(format!("unknown kernel {other:?}"))),
        }
    }
}
