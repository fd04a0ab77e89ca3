//! Growing-data evaluation: regime sampling, metrics, and result reporting.

mod metrics;
mod regime;
mod report;

pub use metrics::{average_precision, macro_f1};
pub use regime::{sample_step, Regime, Sample, EXAMPLES_PER_STEP, STEPS};
pub use report::{
    aggregate, format_cell, read_shard, shard_paths, shard_to_bytes, write_shard, Cell, ReportRow,
    ReportTable, RunResult, REPORT_STEPS,
};

/// Which score a dataset is evaluated with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Average precision of label 1 (binary datasets).
    AveragePrecision,
    MacroF1,
}

impl Metric {
    pub fn for_labels(num_labels: usize) -> Self {
        if num_labels == 2 {
            Metric::AveragePrecision
        } else {
            Metric::MacroF1
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::AveragePrecision => "average_precision",
            Metric::MacroF1 => "macro_f1",
        }
    }
}
