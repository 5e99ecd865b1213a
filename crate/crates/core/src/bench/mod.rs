//! Monte Carlo coverage studies: configuration, deterministic replication,
//! aggregation and output.

mod config;
mod emit;
mod run;
mod seed;
mod summary;

pub use config::{load_config, parse_config, CustomProblem, ExperimentConfig, ProblemSpec, ScaleOverride, StudySpec};
pub use emit::{coverage_csv, coverage_table, emit, raw_csv, Format, CSV_HEADER, CSV_VERSION_LINE};
pub use run::{run_replication, run_study, BaselineRecord, BudgetRecord, ReplicationData, ReplicationRecord, Study};
pub use seed::{derive_seed, StreamRole};
pub use summary::{aggregate, cell_code, five_number, quantile_sorted, BudgetSummary, CoverageSummary, FiveNumber, MethodSummary};
