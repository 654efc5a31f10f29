//! Locally stationary Bernoulli-shift processes.

mod model;
mod sim;
mod spec;

pub use model::{Clock, ProcessModel, COUPLE_LABEL, INNOVATION_LABEL};
pub use sim::{
    local_stationarity_check, simulate_coupled_pair, simulate_path, simulate_paths,
    simulate_stationary, DeviationRow, LocalStationarityReport, PathEnsemble, PathKind,
    DEVIATION_INDICES,
};
pub(crate) use sim::replicate_values;
pub(crate) use spec::parse_call;
pub use spec::{
    CoefFn, Family, Innovation, MaDecay, ProcessSpec, ARCH_MIN_INTERCEPT, CHECK_GRID,
    MA_MAX_LAGS, MA_TAIL_MASS,
};
