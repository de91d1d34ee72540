//! Planning engine for a HAPS-mounted RIS working alongside a fleet of UAV
//! base stations over a shared OFDMA band.
//!
//! The pipeline runs scenario -> channel -> ris / placement -> allocation ->
//! optimizer, with [`sweep`] batching seeded experiments and [`report`]
//! writing CSV and JSON artifacts.

pub mod allocation;
pub mod channel;
pub mod config;
pub mod error;
pub mod optimizer;
pub mod placement;
pub mod report;
pub mod ris;
pub mod scenario;
pub mod sweep;

pub use allocation::{
    build_plan, check_feasibility, check_structure, partition, split_bandwidth, AllocationPlan,
    BandwidthSplit, Constraint, FeasibilityReport, Kappa, Server, ZonePartition,
};
pub use config::{ScenarioConfig, UsersSpec};
pub use error::{PlannerError, Result};
pub use optimizer::{
    run_baseline, solve, KappaTrace, OptimizerConfig, ParetoSolution, Regime, SolveOutcome,
};
pub use placement::{kmeans_place, pathloss_upper_bound, true_total_pathloss, UavDeployment};
pub use ris::{cluster_ris, closed_form_phase, scenario_phase_design, PhaseDesign, RisClustering};
pub use scenario::{generate_users, validate, Point3, RadioParams, Scenario};
pub use sweep::{min_ris_for_full_coverage, run_sweep, CoverageRegime, SweepResult, SweepRow, SweepSpec};
