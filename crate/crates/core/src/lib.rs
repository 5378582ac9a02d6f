//! Mean-field spin systems with several spin types: the limiting ODE, its
//! fixed points and bifurcations, exact jump-process simulation, and the
//! coupling between the jump process and an auxiliary process driven by the
//! ODE solution.

pub mod coupling;
pub mod error;
pub mod eventlog;
pub mod jump;
pub mod linalg;
pub mod model;
pub mod ode;
pub mod rng;
pub mod stability;
pub mod stats;

pub use coupling::{
    check_coupling_inequality, discrepancy_summary, simulate_auxiliary, simulate_coupled,
    simulate_init_coupling, AuxiliaryPath, CoupledRun, Discrepancy, DiscrepancySummary, InitMode,
    Process,
};
pub use error::{Error, Result};
pub use jump::{
    rescaling_consistency, simulate_density_profile, simulate_graphical, simulate_spin_system,
    sup_distance, JumpEvent, JumpPath, Norm, SpinMode,
};
pub use model::{CyclicParams, DensityVector, ModelSpec};
pub use ode::{integrate, Trajectory};
pub use rng::RngStream;
pub use stability::{
    bifurcation_scan, find_fixed_point, jacobian, stability_at, BifurcationKind,
    BifurcationResult, Classification, StabilityReport,
};
