//! Simulation harness: known-truth data-generating processes, replicated
//! rebalance-and-fit runs, and probability-error aggregation.

mod dgp;
mod scenario;
mod summary;

pub use dgp::{simulate_binary, simulate_ordered, simulation_schema, DgpConfig, Simulated, PILOT_ROWS, X3_PROBABILITY};
pub use scenario::{
    counts_for_ratio, ratio_label, run_replications, run_sweep, Calibration, ModelKind, Rebalance, Scenario, SweepResult,
    MAX_FAILURE_RATE,
};
pub use summary::{amse, BoxStats, ProbabilityRecord, ReplicationFailure, ReplicationRecord, ReplicationSummary};
