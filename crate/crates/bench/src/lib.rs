//! Benchmark harness: runs model × store × ordering × steps grids, times
//! lookups and inserts, accounts memory, and reports CSV rows plus a
//! per-bucket improvement summary.

mod cli;
mod record;
mod report;
mod runner;

pub use cli::{parse_count, Args, OrderingChoice, StoreChoice};
pub use record::{parse_csv, state_digest, write_csv, BenchRecord, CSV_HEADER, SCHEMA_VERSION};
pub use report::{
    improvement_table, projected_row, savings_percent, ImprovementRow, ImprovementTable,
    UnmatchedPairs,
};
pub use runner::{load_model, resolve_ordering, run_benchmark, run_cli, BenchError, Outcome};
