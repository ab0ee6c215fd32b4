//! Deterministic scenario harness: builds ledgers and facilitators from a
//! config, drives transfers through the interchain protocol under injected
//! fault behaviors, and collects metrics.

mod behavior;
mod config;
mod metrics;
mod run;

pub use behavior::{behavior_verdict, Behavior, RingInfo};
pub use config::{
    parse_scenario, ConfigError, FacilitatorSpec, GroupSpec, LedgerSpec, ScenarioConfig,
    WorkloadSpec,
};
pub use metrics::{collect_metrics, render_csv, EpochStats, FacilitatorStats, Metrics};
pub use run::{load_world, run_scenario, save_world, ScenarioError, World};
