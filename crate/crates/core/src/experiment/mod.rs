//! Configuration-driven runs: single solves, parameter studies, spectral
//! estimates, matrix export and the verification suites, with CSV records.

mod config;
mod record;
mod run;

pub use config::{Mode, OutputConfig, RunConfig, StudyConfig};
pub use record::{read_records, write_records, RunRecord, RUN_RECORD_COLUMNS};
pub use run::{
    export_system, identity_system, run_point, run_solve, run_spectrum, run_study, run_verification, write_reports,
    write_solve_outputs, BlockRange, ExportSidecar, Suite,
};
