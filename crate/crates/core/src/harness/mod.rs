//! Experiment orchestration: plans, Monte-Carlo temperature sweeps and
//! external capture ingestion, shared by the library API and the CLI.

pub mod capture;
pub mod plan;
pub mod sweep;

pub use capture::ingest_capture;
pub use plan::{ExperimentPlan, SpectrumRequest, SweepOutput};
pub use sweep::{run_sweep, spectrum_at, SweepPoint, SweepResult};
