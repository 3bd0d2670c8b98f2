//! 1D shallow-water channel generator with quadratic bottom friction `r`,
//! producing parametric snapshot datasets for tidal and riverine forcing.

mod forcing;
mod simulate;
mod snapshot;
mod solver;

pub use forcing::{
    periods, tidal_elevation, Constituent, PiecewiseLinear, RiverForcing, TidalForcing,
};
pub use simulate::{simulate, Scenario, SimConfig};
pub use snapshot::{load_snapshots, save_snapshots, ScenarioKind, SnapshotSet, SNAPSHOT_MAGIC};
pub use solver::{
    courant_number, swe_step, Boundary, BoundaryValues, Channel1D, SweState, GRAVITY, MAX_COURANT,
};
