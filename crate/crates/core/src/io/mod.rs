//! File formats and the command-line front end.

pub mod cli;
pub mod report;
pub mod table;

pub use report::{FitConfig, FitReport, SimulationReport};
pub use table::{load_table, read_table, write_table, DataTable, TableSchema};
