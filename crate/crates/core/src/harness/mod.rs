//! Scenario configuration, trial simulation, batching and exports.

pub mod batch;
pub mod export;
pub mod scenario;
pub mod trial;

pub use batch::{run_batch, BatchAggregates, BatchResult, BatchSummary, TrialFailure, TrialOutcome};
pub use export::{export_coverage, export_events, export_sankey, CoverageExport, SankeyFlow, TrialEvents};
pub use scenario::{canonical_scenario, load_scenario, RunConfig, ScenarioConfig, CANONICAL};
pub use trial::{run_trial, StepRecord, TrialTrace};
