//! File plumbing: CSV tables, time intervals and run reports.

mod interval;
mod report;
mod table;

pub use interval::{select_interval, Interval, MIN_INTERVAL_ROWS};
pub use report::{sha256_hex, CleanSummary, RunReport, REPORT_SCHEMA_VERSION};
pub use table::{load_csv, read_csv, write_csv, write_factors_csv, write_matrix_csv};
