//! Configuration-driven batch runner behind the command-line tool.

mod commands;
pub mod expr;
pub mod report;
pub mod scenario;

pub use commands::{cmd_check, cmd_curvature, cmd_validate, configure_threads};
pub use report::{merge_runs, render, write_output, CheckRecord, CurvatureTable, Format, RunReport, Status, TOOL_VERSION};
pub use scenario::{build_bundle, resolve_map, Scenario, ScenarioConfig, SpaceSpec, ToleranceConfig};
