//! Scenario runner, configuration, telemetry and the steady-state reference.

pub mod config;
pub mod scenario;
pub mod sim;
pub mod sweep;
pub mod table;
pub mod telemetry;

pub use config::{Config, CONFIG_ENV, DEFAULT_CONFIG};
pub use scenario::{Profile, Scenario};
pub use sim::{run_scenario, RunOptions, RunResult, RunSummary, SearchEvent, Simulation};
pub use sweep::{oracle_sweep, steady_state, SteadyPoint, SweepResult};
pub use table::{efficiency_table, EfficiencyReport, TableRow};
pub use telemetry::{write_csv, TelemetryRecord, CSV_HEADER};
