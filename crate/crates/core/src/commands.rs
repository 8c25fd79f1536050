//! The `hera` subcommands.
//!
//! Each command computes all of its outputs in memory (inputs are processed
//! in parallel up to `jobs`), checks that none would clobber an existing
//! file unless `force` is set, then writes them one by one through a
//! temporary file in the target directory. If any write fails, the files
//! already written by this invocation are removed.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat};
use thiserror::Error;

use crate::dataset::{build_dataset, write_csv, DatasetError, DatasetOptions, Preset, StatsReport, CATALOG};
use crate::flow::{read_hera_from, write_hera_to, FlowTable, HeraError, HeraHeader};
use crate::label::{label_csv, parse_ground_truth, GroundTruthEntry, LabelError, LabelOptions};
use crate::pcap::{open_capture, PcapError, Record};
use crate::workspace::WorkspaceConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> CliError {
        CliError::Io { path: path.to_path_buf(), source }
    }

    fn format(path: &Path, msg: impl ToString) -> CliError {
        CliError::Format { path: path.to_path_buf(), msg: msg.to_string() }
    }

    /// 1 usage, 2 malformed input, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Format { .. } => 2,
            CliError::Io { .. } => 3,
        }
    }
}

fn pcap_error(path: &Path, e: PcapError) -> CliError {
    match e {
        PcapError::Io { source, .. } | PcapError::Read(source) => CliError::io(path, source),
        other => CliError::format(path, other),
    }
}

fn hera_error(path: &Path, e: HeraError) -> CliError {
    match e {
        HeraError::Io { source, .. } => CliError::io(path, source),
        other => CliError::format(path, other),
    }
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(source) => CliError::io(path, source),
            _ => unreachable!("is_io_error"),
        }
    } else {
        CliError::format(path, e)
    }
}

fn label_error(path: &Path, e: LabelError) -> CliError {
    match e {
        LabelError::Io(source) => CliError::io(path, source),
        LabelError::Csv(c) => csv_error(path, c),
        other => CliError::format(path, other),
    }
}

fn dataset_error(path: &Path, e: DatasetError) -> CliError {
    match e {
        DatasetError::UnknownFeature(_) | DatasetError::ZeroWindow | DatasetError::UnknownMode(_) => {
            CliError::Usage(e.to_string())
        }
        DatasetError::Io(source) => CliError::io(path, source),
        DatasetError::Csv(c) => csv_error(path, c),
    }
}

/// A file to be written.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Artifact {
    pub path: PathBuf,
    pub bytes: Vec<u8>,
}

/// What a command did.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Report {
    pub written: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

fn write_one(a: &Artifact, force: bool) -> Result<(), CliError> {
    let dir = a.path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(&a.bytes).map_err(|e| CliError::io(&a.path, e))?;
    tmp.flush().map_err(|e| CliError::io(&a.path, e))?;
    let persisted = if force { tmp.persist(&a.path) } else { tmp.persist_noclobber(&a.path) };
    persisted.map(drop).map_err(|e| CliError::io(&a.path, e.error))
}

/// Writes every artifact or none.
pub fn commit(artifacts: &[Artifact], force: bool) -> Result<Vec<PathBuf>, CliError> {
    let mut seen = HashSet::new();
    for a in artifacts {
        if !seen.insert(&a.path) {
            return Err(CliError::Usage(format!("two inputs would both write {}", a.path.display())));
        }
        if !force && a.path.exists() {
            return Err(CliError::Usage(format!("{} already exists; pass --force to overwrite", a.path.display())));
        }
    }
    for a in artifacts {
        if let Some(dir) = a.path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
    }
    let mut written = Vec::new();
    for a in artifacts {
        if let Err(e) = write_one(a, force) {
            for p in &written {
                let _ = std::fs::remove_file(p);
            }
            return Err(e);
        }
        written.push(a.path.clone());
    }
    Ok(written)
}

fn has_ext(p: &Path, exts: &[&str]) -> bool {
    p.extension().and_then(|e| e.to_str()).is_some_and(|e| exts.iter().any(|x| e.eq_ignore_ascii_case(x)))
}

/// Resolves files, directories (their files with a matching extension) and
/// glob patterns. Results keep argument order; each directory or pattern
/// expands in sorted order.
pub fn expand_inputs(patterns: &[String], exts: &[&str]) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for pat in patterns {
        let p = Path::new(pat);
        if p.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| CliError::io(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && has_ext(f, exts))
                .collect();
            files.sort();
            out.extend(files);
        } else if pat.contains(['*', '?', '[']) {
            let paths = glob::glob(pat).map_err(|e| CliError::Usage(format!("bad pattern {pat:?}: {e}")))?;
            let mut files: Vec<PathBuf> = paths.filter_map(Result::ok).filter(|f| f.is_file()).collect();
            files.sort();
            out.extend(files);
        } else if p.is_file() {
            out.push(p.to_path_buf());
        } else {
            return Err(CliError::io(p, io::Error::new(io::ErrorKind::NotFound, "no such file or directory")));
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage(format!("no input files matched {}", patterns.join(" "))));
    }
    Ok(out)
}

/// Applies `f` to every item on up to `jobs` threads; results keep item
/// order.
fn par_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let jobs = jobs.clamp(1, items.len().max(1));
    if jobs == 1 {
        return items.iter().map(f).collect();
    }
    let f = &f;
    let mut tagged: Vec<(usize, R)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..jobs)
            .map(|t| {
                s.spawn(move || {
                    items.iter().enumerate().skip(t).step_by(jobs).map(|(i, x)| (i, f(x))).collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    });
    tagged.sort_by_key(|(i, _)| *i);
    tagged.into_iter().map(|(_, r)| r).collect()
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned())
}

fn require_dir(dir: &Option<PathBuf>, flag: &str) -> Result<PathBuf, CliError> {
    dir.clone().ok_or_else(|| CliError::Usage(format!("missing {flag}")))
}

/// RFC 3339 creation stamp: `SOURCE_DATE_EPOCH` when set, otherwise the
/// first packet's time, so identical inputs give identical files.
fn created_stamp(first_packet_secs: Option<u64>) -> String {
    let secs = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse::<i64>().ok())
        .unwrap_or_else(|| first_packet_secs.unwrap_or(0) as i64);
    DateTime::from_timestamp(secs, 0).unwrap_or_default().to_rfc3339_opts(SecondsFormat::Secs, true)
}

struct Exported {
    hera: Vec<u8>,
    stats: String,
    warning: Option<String>,
}

fn export_capture(path: &Path, ws: &WorkspaceConfig) -> Result<Exported, CliError> {
    let cfg = ws.export_config()?;
    let mut reader = open_capture(path).map_err(|e| pcap_error(path, e))?;
    let mut table = FlowTable::new(cfg);
    let mut first = None;
    let mut warning = None;
    loop {
        match reader.next_record() {
            Ok(Some(Record::Packet(p))) => {
                first.get_or_insert(p.ts);
                // Packets too far out of order are skipped and counted.
                let _ = table.assign(&p);
            }
            Ok(Some(Record::Skipped(_))) => {}
            Ok(None) => break,
            Err(e @ PcapError::TruncatedRecord { .. }) => {
                warning = Some(format!("{}: {e}; flows up to that record were kept", path.display()));
                break;
            }
            Err(e) => return Err(pcap_error(path, e)),
        }
    }
    let engine = table.stats();
    let records = table.flush();
    let source = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
    let header = HeraHeader::new(created_stamp(first.map(|t| t.0 / 1_000_000)), vec![source], cfg);
    let mut hera = Vec::new();
    write_hera_to(&mut hera, &header, &records).expect("writing to memory");

    let skipped = reader.skipped();
    let mut stats = StatsReport::from_records(&records).to_string();
    let _ = writeln!(stats, "capture.records: {}", reader.records_read());
    let _ = writeln!(stats, "capture.truncated: {}", u8::from(warning.is_some()));
    let _ = writeln!(stats, "capture.skipped_non_ip: {}", skipped.non_ip);
    let _ = writeln!(stats, "capture.skipped_unsupported: {}", skipped.unsupported);
    let _ = writeln!(stats, "capture.skipped_malformed: {}", skipped.malformed);
    let _ = writeln!(stats, "capture.accepted_packets: {}", engine.accepted_packets);
    let _ = writeln!(stats, "capture.accepted_bytes: {}", engine.accepted_bytes);
    let _ = writeln!(stats, "capture.out_of_order_accepted: {}", engine.out_of_order_accepted);
    let _ = writeln!(stats, "capture.out_of_order_skipped: {}", engine.out_of_order_skipped);
    Ok(Exported { hera, stats, warning })
}

struct Built {
    csv: Vec<u8>,
    stats: String,
}

fn dataset_from_hera(path: &Path, hera: &[u8], opts: &DatasetOptions) -> Result<Built, CliError> {
    let file = read_hera_from(hera).map_err(|e| hera_error(path, e))?;
    let ds = build_dataset(&file.records, opts).map_err(|e| dataset_error(path, e))?;
    let mut csv = Vec::new();
    write_csv(&mut csv, &ds.features, &ds.rows).map_err(|e| dataset_error(path, e))?;
    Ok(Built { csv, stats: ds.stats.to_string() })
}

fn dataset_options(ws: &WorkspaceConfig) -> Result<DatasetOptions, CliError> {
    Ok(DatasetOptions {
        features: ws.feature_list()?,
        mode: ws.dataset_mode()?,
        keep_management: ws.keep_management.unwrap_or(false),
        window: ws.window_size()?,
    })
}

struct Labelled {
    csv: Vec<u8>,
    summary: String,
}

fn label_bytes(path: &Path, csv: &[u8], gt: &[GroundTruthEntry], opts: &LabelOptions) -> Result<Labelled, CliError> {
    let mut out = Vec::new();
    let summary = label_csv(csv, &mut out, gt, opts).map_err(|e| label_error(path, e))?;
    Ok(Labelled { csv: out, summary: summary.to_string() })
}

fn load_ground_truth(path: &Path) -> Result<Vec<GroundTruthEntry>, CliError> {
    let f = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    parse_ground_truth(BufReader::new(f)).map_err(|e| label_error(path, e))
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

/// Captures to `<stem>.hera` and `<stem>.stats.txt` in `hera_dir`.
pub fn cmd_export(ws: &WorkspaceConfig) -> Result<Report, CliError> {
    ws.export_config()?;
    let out = require_dir(&ws.hera_dir, "--out")?;
    if ws.pcap_paths.is_empty() {
        return Err(CliError::Usage("missing --pcap".into()));
    }
    let inputs = expand_inputs(&ws.pcap_paths, &["pcap", "cap", "dmp"])?;
    let results = par_map(&inputs, ws.jobs(), |p| export_capture(p, ws));
    let mut artifacts = Vec::new();
    let mut warnings = Vec::new();
    for (input, r) in inputs.iter().zip(results) {
        let r = r?;
        let s = stem(input);
        artifacts.push(Artifact { path: out.join(format!("{s}.hera")), bytes: r.hera });
        artifacts.push(Artifact { path: out.join(format!("{s}.stats.txt")), bytes: r.stats.into_bytes() });
        warnings.extend(r.warning);
    }
    Ok(Report { written: commit(&artifacts, ws.force())?, warnings })
}

/// `.hera` files to `<stem>.csv` and `<stem>.stats.txt` in `csv_dir`.
pub fn cmd_dataset(ws: &WorkspaceConfig, inputs: &[String]) -> Result<Report, CliError> {
    let opts = dataset_options(ws)?;
    let out = require_dir(&ws.csv_dir, "--out")?;
    let inputs = expand_inputs(inputs, &["hera"])?;
    let results = par_map(&inputs, ws.jobs(), |p| dataset_from_hera(p, &read_file(p)?, &opts));
    let mut artifacts = Vec::new();
    for (input, r) in inputs.iter().zip(results) {
        let r = r?;
        let s = stem(input);
        artifacts.push(Artifact { path: out.join(format!("{s}.csv")), bytes: r.csv });
        artifacts.push(Artifact { path: out.join(format!("{s}.stats.txt")), bytes: r.stats.into_bytes() });
    }
    Ok(Report { written: commit(&artifacts, ws.force())?, warnings: Vec::new() })
}

/// Dataset CSVs to `<stem>.labelled.csv` and `<stem>.labels.txt`, in
/// `csv_dir` or next to each input.
pub fn cmd_label(ws: &WorkspaceConfig, inputs: &[String]) -> Result<Report, CliError> {
    let gt_path = ws.ground_truth.as_ref().ok_or_else(|| CliError::Usage("missing --gt".into()))?;
    let opts = ws.label_options();
    let inputs = expand_inputs(inputs, &["csv"])?;
    let gt = load_ground_truth(gt_path)?;
    let results = par_map(&inputs, ws.jobs(), |p| label_bytes(p, &read_file(p)?, &gt, &opts));
    let mut artifacts = Vec::new();
    for (input, r) in inputs.iter().zip(results) {
        let r = r?;
        let s = stem(input);
        let dir = ws.csv_dir.clone().unwrap_or_else(|| input.parent().unwrap_or(Path::new(".")).to_path_buf());
        artifacts.push(Artifact { path: dir.join(format!("{s}.labelled.csv")), bytes: r.csv });
        artifacts.push(Artifact { path: dir.join(format!("{s}.labels.txt")), bytes: r.summary.into_bytes() });
    }
    Ok(Report { written: commit(&artifacts, ws.force())?, warnings: Vec::new() })
}

/// Export, dataset and (given ground truth) label in one go. Writes
/// `<stem>.hera` to `hera_dir` (default: `csv_dir`) and the dataset, its
/// stats, the labelled dataset and the label summary to `csv_dir`. Each
/// file is byte-identical to what the separate commands produce.
pub fn cmd_run(ws: &WorkspaceConfig) -> Result<Report, CliError> {
    ws.export_config()?;
    let opts = dataset_options(ws)?;
    let csv_dir = require_dir(&ws.csv_dir, "--out")?;
    let hera_dir = ws.hera_dir.clone().unwrap_or_else(|| csv_dir.clone());
    if ws.pcap_paths.is_empty() {
        return Err(CliError::Usage("missing --pcap".into()));
    }
    let inputs = expand_inputs(&ws.pcap_paths, &["pcap", "cap", "dmp"])?;
    let gt = ws.ground_truth.as_deref().map(load_ground_truth).transpose()?;
    let label_opts = ws.label_options();

    let results = par_map(&inputs, ws.jobs(), |p| -> Result<_, CliError> {
        let e = export_capture(p, ws)?;
        let hera_path = hera_dir.join(format!("{}.hera", stem(p)));
        let d = dataset_from_hera(&hera_path, &e.hera, &opts)?;
        let l = match &gt {
            Some(gt) => Some(label_bytes(&csv_dir.join(format!("{}.csv", stem(p))), &d.csv, gt, &label_opts)?),
            None => None,
        };
        Ok((e, d, l))
    });
    let mut artifacts = Vec::new();
    let mut warnings = Vec::new();
    for (input, r) in inputs.iter().zip(results) {
        let (e, d, l) = r?;
        let s = stem(input);
        artifacts.push(Artifact { path: hera_dir.join(format!("{s}.hera")), bytes: e.hera });
        artifacts.push(Artifact { path: csv_dir.join(format!("{s}.csv")), bytes: d.csv });
        artifacts.push(Artifact { path: csv_dir.join(format!("{s}.stats.txt")), bytes: d.stats.into_bytes() });
        if let Some(l) = l {
            artifacts.push(Artifact { path: csv_dir.join(format!("{s}.labelled.csv")), bytes: l.csv });
            artifacts.push(Artifact { path: csv_dir.join(format!("{s}.labels.txt")), bytes: l.summary.into_bytes() });
        }
        warnings.extend(e.warning);
    }
    Ok(Report { written: commit(&artifacts, ws.force())?, warnings })
}

/// The feature catalog as CSV: position, name, kind, always-on flag,
/// default-set membership and description.
pub fn feature_catalog_csv() -> String {
    let defaults = Preset::Default.members();
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["index", "name", "kind", "always_on", "default", "description"]).expect("memory");
    for (i, f) in CATALOG.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            f.name.to_string(),
            f.kind.to_string(),
            u8::from(f.always_on).to_string(),
            u8::from(defaults.contains(&f.name)).to_string(),
            f.description.to_string(),
        ])
        .expect("memory");
    }
    String::from_utf8(w.into_inner().expect("memory")).expect("utf-8")
}

/// A preset's published names and the catalog feature each maps to (`-`
/// where there is none).
pub fn preset_mapping_csv(preset: Preset) -> String {
    let mut out = String::from("published,feature\n");
    if preset.mapping().is_empty() {
        for name in preset.members() {
            let _ = writeln!(out, "{name},{name}");
        }
    }
    for (published, feature) in preset.mapping() {
        let _ = writeln!(out, "{published},{}", feature.unwrap_or("-"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 1);
        assert_eq!(CliError::format(Path::new("a"), "bad").exit_code(), 2);
        assert_eq!(CliError::io(Path::new("a"), io::Error::other("x")).exit_code(), 3);
    }

    #[test]
    fn par_map_keeps_order() {
        let v: Vec<u32> = (0..50).collect();
        assert_eq!(par_map(&v, 4, |x| x * 2), v.iter().map(|x| x * 2).collect::<Vec<_>>());
    }

    #[test]
    fn commit_is_all_or_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let a = Artifact { path: dir.path().join("a.txt"), bytes: b"a".to_vec() };
        let blocked = Artifact { path: dir.path().join("missing").join("x").join("b.txt"), bytes: b"b".to_vec() };
        std::fs::write(dir.path().join("missing"), b"file, not a dir").unwrap();
        assert!(commit(&[a.clone(), blocked], false).is_err());
        assert!(!a.path.exists());

        commit(std::slice::from_ref(&a), false).unwrap();
        assert!(matches!(commit(std::slice::from_ref(&a), false), Err(CliError::Usage(_))));
        commit(std::slice::from_ref(&a), true).unwrap();
        assert_eq!(std::fs::read(&a.path).unwrap(), b"a");
    }

    #[test]
    fn created_stamp_format() {
        if std::env::var_os("SOURCE_DATE_EPOCH").is_none() {
            assert_eq!(created_stamp(Some(1_424_217_600)), "2015-02-18T00:00:00Z");
        }
    }

    #[test]
    fn catalog_csv_has_all_features() {
        assert_eq!(feature_catalog_csv().lines().count(), 131);
    }
}
