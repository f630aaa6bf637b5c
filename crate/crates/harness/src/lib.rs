//! Scenario files, batch runs, metrics, obstacle scripting and trace export around the
//! planner in `fliqc-core`.

pub mod batch;
pub mod error;
pub mod filter;
pub mod metrics;
pub mod motion;
pub mod scenario;
pub mod trace;

pub use batch::{run_batch, run_scenario, Aggregate, BatchReport};
pub use error::{HarnessError, Result};
pub use filter::{iir_filter, FilterState};
pub use metrics::{metrics, MetricsRow};
pub use motion::{advance_obstacles, ReversalScript};
pub use scenario::{load_scenario, save_scenario, Scenario, ScenarioFile};
pub use trace::{export_trace, read_trace_json, TraceFormat};

/// Directory holding the bundled robot and scene files.
pub fn data_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}
