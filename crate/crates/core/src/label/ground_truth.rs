use std::io::Read;
use std::net::IpAddr;

use chrono::DateTime;

use super::LabelError;
use crate::types::{Micros, Protocol};

/// One ground-truth event. Absent fields match anything.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundTruthEntry {
    pub start_time: Micros,
    /// Defaults to `start_time` when the column is missing or empty.
    pub last_time: Micros,
    pub proto: Option<String>,
    pub src_addr: Option<IpAddr>,
    pub sport: Option<u16>,
    pub dst_addr: Option<IpAddr>,
    pub dport: Option<u16>,
    pub label: String,
}

/// Epoch seconds (`1418932000.5`) or RFC 3339. Sub-microsecond digits are
/// dropped.
pub fn parse_timestamp(s: &str) -> Option<Micros> {
    let s = s.trim();
    if let Some(m) = Micros::parse_secs(s) {
        return Some(m);
    }
    let dt = DateTime::parse_from_rfc3339(s).ok()?;
    let secs = u64::try_from(dt.timestamp()).ok()?;
    Some(Micros(secs * 1_000_000 + u64::from(dt.timestamp_subsec_micros())))
}

/// Compares protocol cells by number when both parse, by name otherwise.
pub fn proto_matches(want: &str, have: &str) -> bool {
    match (want.parse::<Protocol>(), have.parse::<Protocol>()) {
        (Ok(a), Ok(b)) => a == b,
        _ => want.eq_ignore_ascii_case(have),
    }
}

struct Columns {
    start: usize,
    last: Option<usize>,
    proto: Option<usize>,
    src: Option<usize>,
    sport: Option<usize>,
    dst: Option<usize>,
    dport: Option<usize>,
    label: usize,
}

impl Columns {
    fn find(headers: &csv::StringRecord) -> Result<Columns, LabelError> {
        let col = |name: &str| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
        Ok(Columns {
            start: col("StartTime").ok_or(LabelError::MissingGroundTruthColumn("StartTime"))?,
            last: col("LastTime"),
            proto: col("Proto"),
            src: col("SrcAddr"),
            sport: col("Sport"),
            dst: col("DstAddr"),
            dport: col("Dport"),
            label: col("Label").ok_or(LabelError::MissingLabelColumn)?,
        })
    }
}

fn cell(rec: &csv::StringRecord, idx: Option<usize>) -> Option<&str> {
    idx.and_then(|i| rec.get(i)).map(str::trim).filter(|s| !s.is_empty() && *s != "*")
}

fn field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    idx: Option<usize>,
    row: usize,
    column: &'static str,
) -> Result<Option<T>, LabelError> {
    cell(rec, idx)
        .map(|s| s.parse().map_err(|_| LabelError::MalformedGroundTruth { row, column, value: s.to_string() }))
        .transpose()
}

/// Reads ground truth with case-insensitive headers `StartTime`,
/// `LastTime`, `Proto`, `SrcAddr`, `Sport`, `DstAddr`, `Dport` and `Label`.
/// Only `StartTime` and `Label` are required. Rows are numbered from 1,
/// not counting the header.
pub fn parse_ground_truth<R: Read>(input: R) -> Result<Vec<GroundTruthEntry>, LabelError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(input);
    let cols = Columns::find(rdr.headers()?)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let label = cell(&rec, Some(cols.label)).ok_or(LabelError::EmptyLabelCell { row })?.to_string();
        let ts = |idx: Option<usize>| -> Result<Option<Micros>, LabelError> {
            match cell(&rec, idx) {
                None => Ok(None),
                Some(s) => parse_timestamp(s)
                    .map(Some)
                    .ok_or_else(|| LabelError::MalformedTimestamp { row, value: s.to_string() }),
            }
        };
        let start_time =
            ts(Some(cols.start))?.ok_or_else(|| LabelError::MalformedTimestamp { row, value: String::new() })?;
        let last_time = ts(cols.last)?.unwrap_or(start_time);
        if last_time < start_time {
            return Err(LabelError::InvertedInterval { row });
        }
        out.push(GroundTruthEntry {
            start_time,
            last_time,
            proto: cell(&rec, cols.proto).map(str::to_string),
            src_addr: field(&rec, cols.src, row, "SrcAddr")?,
            sport: field(&rec, cols.sport, row, "Sport")?,
            dst_addr: field(&rec, cols.dst, row, "DstAddr")?,
            dport: field(&rec, cols.dport, row, "Dport")?,
            label,
        });
    }
    Ok(out)
}
