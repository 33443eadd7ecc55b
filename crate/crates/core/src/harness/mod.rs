//! Scenario ingestion, sweep driving, statistics and report emission.

mod attack;
mod report;
mod runner;
mod scenario;
mod sweep;

pub use attack::{analyze_attack, AttackAnalysis, AttackRunOptions, ATTACK_COLUMNS};
pub use report::{emit_report, parse_csv, parse_json_lines, ReportFormat, ReportRow, COLUMNS};
pub use runner::{derive_rep_seed, run_once, run_scenario, PartyOutcome, Verdict, VerdictAggregate};
pub use scenario::{parse_grid, parse_scenario, Assertions, PlacementAxis, Scenario, SweepGrid};
pub use sweep::{expand_grid, sweep};
