//! Flow records to CSV datasets.
//!
//! [`build_dataset`] selects columns from the [`CATALOG`], optionally merges
//! each conversation's records into one row ([`Mode::Racluster`]), and adds
//! connection-window counts. [`write_csv`] writes the result.

mod catalog;
mod cluster;
mod counts;
mod service;
mod stats;
mod value;

use std::io::Write;

use thiserror::Error;

pub use catalog::{
    feature_index, flow_id, select_feature_set, FeatureList, FeatureSelection, FeatureSpec, Preset, RowContext,
    ValueKind, CATALOG,
};
pub use cluster::cluster;
pub use counts::{compute_connection_counts, connection_counts, DEFAULT_WINDOW};
pub use service::{service_for, service_of};
pub use stats::{ProtoTotals, StatsReport};
pub use value::{render, Value};

use crate::flow::FlowRecord;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("connection window must be at least 1")]
    ZeroWindow,
    #[error("unknown mode `{0}` (expected ra or racluster)")]
    UnknownMode(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `ra` emits one row per stored record; `racluster` one row per
/// conversation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    Ra,
    #[default]
    Racluster,
}

impl std::str::FromStr for Mode {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, DatasetError> {
        match s.to_ascii_lowercase().as_str() {
            "ra" => Ok(Mode::Ra),
            "racluster" => Ok(Mode::Racluster),
            _ => Err(DatasetError::UnknownMode(s.to_string())),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DatasetOptions {
    pub features: FeatureList,
    pub mode: Mode,
    pub keep_management: bool,
    pub window: usize,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        DatasetOptions {
            features: select_feature_set(&FeatureSelection::Preset(Preset::Default)).expect("default preset"),
            mode: Mode::default(),
            keep_management: false,
            window: DEFAULT_WINDOW,
        }
    }
}

pub type Row = Vec<Option<Value>>;

#[derive(Clone, Debug)]
pub struct Dataset {
    pub features: FeatureList,
    /// The records behind each row, in row order.
    pub records: Vec<FlowRecord>,
    pub rows: Vec<Row>,
    pub stats: StatsReport,
}

/// Builds dataset rows from records in stored order.
pub fn build_dataset(records: &[FlowRecord], opts: &DatasetOptions) -> Result<Dataset, DatasetError> {
    if opts.window == 0 {
        return Err(DatasetError::ZeroWindow);
    }
    let kept: Vec<FlowRecord> = records.iter().filter(|r| opts.keep_management || !r.is_management).cloned().collect();
    let records = match opts.mode {
        Mode::Ra => kept,
        Mode::Racluster => cluster(&kept),
    };
    let counts = connection_counts(&records, opts.window);
    let rows = records
        .iter()
        .zip(&counts)
        .enumerate()
        .map(|(rank, (record, &counts))| {
            let ctx = RowContext { record, rank: rank as u64, counts };
            opts.features.specs().map(|f| f.compute(&ctx)).collect()
        })
        .collect();
    let stats = StatsReport::from_records(&records);
    Ok(Dataset { features: opts.features.clone(), records, rows, stats })
}

/// Writes a header of feature names and one line per row, LF-terminated.
/// An empty dataset produces the header alone.
pub fn write_csv<W: Write>(out: W, features: &FeatureList, rows: &[Row]) -> Result<(), DatasetError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(features.names())?;
    for row in rows {
        w.write_record(row.iter().map(render))?;
    }
    w.flush()?;
    Ok(())
}
