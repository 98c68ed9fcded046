//! Single-module probes and experiment reports.

mod history;
mod lexicon;
mod probe;

pub use history::{export_history_csv, parse_history_csv, read_history_csv, write_history_csv};
pub use lexicon::{Category, Lexicon};
pub use probe::{
    load_probe_dataset, parse_probe_dataset, probe_eval, probe_train, write_probe_dataset, CategoryReport,
    CategoryStats, PhrasePair, ProbeConfig, ProbeOutcome, PROBE_KEY,
};
