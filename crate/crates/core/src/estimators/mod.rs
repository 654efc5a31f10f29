//! Empirical distribution functions and kernel density estimates.

mod edf;
mod kde;
mod kernel;

pub(crate) use edf::check_window;
pub use edf::{edf, localized_edf, time_weight_mass, EmpiricalProcessSample};
pub use kde::{kde, KdeSurface};
pub use kernel::{kernel_l2, KernelKind, KernelSpec};
