//! Scenario-driven closed-loop simulation, reporting, tuning and sweeps.
//! Double precision only.

pub mod reference;
pub mod report;
pub mod scenario;
pub mod sim;
pub mod tune;
pub mod wind;

pub use reference::{ReferencePath, ReferenceSpec};
pub use report::{compare, export_csv, read_csv, Comparison, CSV_HEADER};
pub use scenario::{load_table, parse_value, set_key, Scenario, FORMAT_VERSION};
pub use sim::{run, RunOptions, ScenarioResult, Summary, TraceRow};
pub use tune::{sweep, tune_gains, SweepPoint};
pub use wind::WindSpec;
