//! Labelling dataset rows against ground truth.
//!
//! A row matches an entry when every field the entry specifies equals the
//! row's value and the row's `[stime, ltime]` overlaps the entry's
//! `[StartTime, LastTime]` (inclusive at both ends). The first matching
//! entry in file order supplies the label; unmatched rows are benign.

mod ground_truth;

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::net::IpAddr;

use thiserror::Error;

pub use ground_truth::{parse_ground_truth, parse_timestamp, proto_matches, GroundTruthEntry};

use crate::types::Micros;

pub const DEFAULT_BENIGN_LABEL: &str = "Benign";

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("ground truth has no Label column")]
    MissingLabelColumn,
    #[error("ground truth has no {0} column")]
    MissingGroundTruthColumn(&'static str),
    #[error("ground truth row {row}: empty Label cell")]
    EmptyLabelCell { row: usize },
    #[error("ground truth row {row}: malformed timestamp {value:?}")]
    MalformedTimestamp { row: usize, value: String },
    #[error("ground truth row {row}: LastTime is before StartTime")]
    InvertedInterval { row: usize },
    #[error("ground truth row {row}: malformed {column} {value:?}")]
    MalformedGroundTruth { row: usize, column: &'static str, value: String },
    #[error("dataset has no `{0}` column, which labelling needs")]
    MissingMatchField(&'static str),
    #[error("dataset row {row}: malformed {column} {value:?}")]
    MalformedRow { row: usize, column: &'static str, value: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelOptions {
    /// Also match entries whose source/destination are swapped.
    pub bidirectional: bool,
    pub benign_label: String,
    /// Drop entries that cannot overlap any row before matching.
    pub prefilter: bool,
}

impl Default for LabelOptions {
    fn default() -> Self {
        LabelOptions { bidirectional: false, benign_label: DEFAULT_BENIGN_LABEL.into(), prefilter: true }
    }
}

/// The fields of a dataset row that matching looks at.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowRow {
    pub stime: Micros,
    pub ltime: Micros,
    pub proto: String,
    pub saddr: IpAddr,
    pub sport: u16,
    pub daddr: IpAddr,
    pub dport: u16,
}

impl FlowRow {
    fn is_management(&self) -> bool {
        self.proto.eq_ignore_ascii_case("man")
    }
}

fn endpoints_match(e: &GroundTruthEntry, saddr: IpAddr, sport: u16, daddr: IpAddr, dport: u16) -> bool {
    e.src_addr.is_none_or(|a| a == saddr)
        && e.sport.is_none_or(|p| p == sport)
        && e.dst_addr.is_none_or(|a| a == daddr)
        && e.dport.is_none_or(|p| p == dport)
}

/// Whether `entry` applies to `row`.
pub fn match_flow(row: &FlowRow, entry: &GroundTruthEntry, bidirectional: bool) -> bool {
    if row.stime > entry.last_time || row.ltime < entry.start_time {
        return false;
    }
    if let Some(p) = &entry.proto {
        if !proto_matches(p, &row.proto) {
            return false;
        }
    }
    endpoints_match(entry, row.saddr, row.sport, row.daddr, row.dport)
        || (bidirectional && endpoints_match(entry, row.daddr, row.dport, row.saddr, row.sport))
}

/// Labels each row. Management rows are always benign.
pub fn label_rows(rows: &[FlowRow], entries: &[GroundTruthEntry], opts: &LabelOptions) -> Vec<String> {
    let filtered: Vec<&GroundTruthEntry>;
    let candidates: Vec<&GroundTruthEntry> = if opts.prefilter && !rows.is_empty() {
        let lo = rows.iter().map(|r| r.stime).min().expect("non-empty");
        let hi = rows.iter().map(|r| r.ltime).max().expect("non-empty");
        filtered = entries.iter().filter(|e| e.last_time >= lo && e.start_time <= hi).collect();
        filtered
    } else {
        entries.iter().collect()
    };
    rows.iter()
        .map(|row| {
            if row.is_management() {
                return opts.benign_label.clone();
            }
            candidates
                .iter()
                .find(|e| match_flow(row, e, opts.bidirectional))
                .map_or_else(|| opts.benign_label.clone(), |e| e.label.clone())
        })
        .collect()
}

/// Per-label row counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelSummary {
    pub benign_label: String,
    pub counts: BTreeMap<String, u64>,
}

impl LabelSummary {
    pub fn from_labels<'a>(labels: impl IntoIterator<Item = &'a String>, benign_label: &str) -> LabelSummary {
        let mut counts = BTreeMap::new();
        for l in labels {
            *counts.entry(l.clone()).or_insert(0) += 1;
        }
        LabelSummary { benign_label: benign_label.to_string(), counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn benign(&self) -> u64 {
        self.counts.get(&self.benign_label).copied().unwrap_or(0)
    }

    pub fn malicious(&self) -> u64 {
        self.total() - self.benign()
    }
}

/// Comment header with totals, then `label: count` lines: the benign label
/// first, the rest by descending count and then name.
impl fmt::Display for LabelSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# total: {}", self.total())?;
        writeln!(f, "# benign: {}", self.benign())?;
        writeln!(f, "# malicious: {}", self.malicious())?;
        writeln!(f, "{}: {}", self.benign_label, self.benign())?;
        let mut rest: Vec<_> = self.counts.iter().filter(|(l, _)| **l != self.benign_label).collect();
        rest.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
        for (label, n) in rest {
            writeln!(f, "{label}: {n}")?;
        }
        Ok(())
    }
}

const MATCH_COLUMNS: [&str; 7] = ["stime", "ltime", "proto", "saddr", "sport", "daddr", "dport"];

fn parse_row(rec: &csv::StringRecord, idx: &[usize; 7], row: usize) -> Result<FlowRow, LabelError> {
    let get = |k: usize| rec.get(idx[k]).unwrap_or("").trim();
    let bad = |k: usize| LabelError::MalformedRow { row, column: MATCH_COLUMNS[k], value: get(k).to_string() };
    let time = |k: usize| Micros::parse_secs(get(k)).ok_or_else(|| bad(k));
    let addr = |k: usize| get(k).parse::<IpAddr>().map_err(|_| bad(k));
    let port = |k: usize| get(k).parse::<u16>().map_err(|_| bad(k));
    Ok(FlowRow {
        stime: time(0)?,
        ltime: time(1)?,
        proto: get(2).to_string(),
        saddr: addr(3)?,
        sport: port(4)?,
        daddr: addr(5)?,
        dport: port(6)?,
    })
}

/// Reads a dataset CSV, labels it and writes it back with a `Label` column
/// appended (an existing `Label` column is overwritten in place).
pub fn label_csv<R: Read, W: Write>(
    input: R,
    output: W,
    entries: &[GroundTruthEntry],
    opts: &LabelOptions,
) -> Result<LabelSummary, LabelError> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(input);
    let mut headers = rdr.headers()?.clone();
    let mut idx = [0usize; 7];
    for (k, name) in MATCH_COLUMNS.iter().enumerate() {
        idx[k] = headers.iter().position(|h| h == *name).ok_or(LabelError::MissingMatchField(name))?;
    }
    let records = rdr.records().collect::<Result<Vec<_>, _>>()?;
    let rows = records.iter().enumerate().map(|(i, r)| parse_row(r, &idx, i + 1)).collect::<Result<Vec<_>, _>>()?;
    let labels = label_rows(&rows, entries, opts);

    let existing = headers.iter().position(|h| h == "Label");
    if existing.is_none() {
        headers.push_field("Label");
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(output);
    w.write_record(&headers)?;
    for (rec, label) in records.iter().zip(&labels) {
        let mut fields: Vec<&str> = rec.iter().collect();
        match existing {
            Some(i) => fields[i] = label,
            None => fields.push(label),
        }
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(LabelSummary::from_labels(&labels, &opts.benign_label))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(stime: u64, ltime: u64, s: &str, d: &str) -> FlowRow {
        FlowRow {
            stime: Micros::from_secs(stime),
            ltime: Micros::from_secs(ltime),
            proto: "tcp".into(),
            saddr: s.parse().unwrap(),
            sport: 1234,
            daddr: d.parse().unwrap(),
            dport: 80,
        }
    }

    fn entry(start: u64, last: u64, dst: &str, label: &str) -> GroundTruthEntry {
        GroundTruthEntry {
            start_time: Micros::from_secs(start),
            last_time: Micros::from_secs(last),
            proto: Some("TCP".into()),
            src_addr: None,
            sport: None,
            dst_addr: Some(dst.parse().unwrap()),
            dport: Some(80),
            label: label.into(),
        }
    }

    #[test]
    fn overlap_is_inclusive() {
        let r = row(10, 20, "10.0.0.1", "10.0.0.2");
        assert!(match_flow(&r, &entry(20, 30, "10.0.0.2", "x"), false));
        assert!(match_flow(&r, &entry(0, 10, "10.0.0.2", "x"), false));
        assert!(!match_flow(&r, &entry(21, 30, "10.0.0.2", "x"), false));
        assert!(!match_flow(&r, &entry(10, 20, "10.0.0.3", "x"), false));
    }

    #[test]
    fn bidirectional_swaps() {
        let r = row(10, 20, "10.0.0.2", "10.0.0.1");
        let mut e = entry(10, 20, "10.0.0.2", "x");
        e.dport = None;
        assert!(!match_flow(&r, &e, false));
        assert!(match_flow(&r, &e, true));
    }

    #[test]
    fn first_match_wins_and_summary() {
        let rows = vec![row(10, 20, "10.0.0.1", "10.0.0.2"), row(100, 120, "10.0.0.1", "10.0.0.2")];
        let entries = vec![
            entry(0, 15, "10.0.0.2", "DoS"),
            entry(0, 15, "10.0.0.2", "Other"),
            entry(500, 600, "10.0.0.2", "Late"),
        ];
        for prefilter in [true, false] {
            let labels = label_rows(&rows, &entries, &LabelOptions { prefilter, ..Default::default() });
            assert_eq!(labels, ["DoS", "Benign"]);
        }
        let s = LabelSummary::from_labels(&["DoS".to_string(), "Benign".into(), "DoS".into(), "Scan".into()], "Benign");
        assert_eq!(s.to_string(), "# total: 4\n# benign: 1\n# malicious: 3\nBenign: 1\nDoS: 2\nScan: 1\n");
    }

    #[test]
    fn csv_round() {
        let input = "rank,stime,ltime,sport,dport,saddr,daddr,proto\n\
                     0,10.000000,20.000000,1234,80,10.0.0.1,10.0.0.2,tcp\n\
                     1,10.000000,20.000000,0,0,0.0.0.0,0.0.0.0,man\n";
        let mut out = Vec::new();
        let e =
            vec![GroundTruthEntry { proto: None, dst_addr: None, dport: None, ..entry(0, 100, "10.0.0.2", "Scan") }];
        let s = label_csv(input.as_bytes(), &mut out, &e, &LabelOptions::default()).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("rank,stime,ltime,sport,dport,saddr,daddr,proto,Label\n"));
        assert!(text.contains(",tcp,Scan\n") && text.contains(",man,Benign\n"));
        assert_eq!((s.total(), s.malicious()), (2, 1));
    }

    #[test]
    fn missing_column() {
        let err = label_csv("rank,stime\n".as_bytes(), Vec::new(), &[], &LabelOptions::default()).unwrap_err();
        assert!(matches!(err, LabelError::MissingMatchField("ltime")));
    }
}
