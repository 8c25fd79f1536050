//! The `.hera` flow file.
//!
//! ```text
//! #HERA v1
//! #created=2015-02-18T00:00:00Z
//! #source=capture.pcap
//! #interval_s=60.000000
//! #idle_timeout_s=60.000000
//! #reorder_slack_s=1.000000
//! #emit_management=true
//! #fields=mgmt stime ltime ...
//! mgmt=0<TAB>stime=1424217600.000000<TAB>...
//! ```
//!
//! Every record is one line of tab-separated `name=value` pairs in the fixed
//! order of [`FIELDS`]. Times are seconds with six decimals, absent values
//! are `-`. Fields a reader does not know are kept and written back after
//! the known ones.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::IpAddr;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::record::{DirStats, Endpoint, FlowRecord, FlowState, IatStats};
use super::{ExportConfig, FlowKey};
use crate::types::{Micros, Protocol, TcpFlags};

pub const HERA_VERSION: u32 = 1;
const MAGIC: &str = "#HERA v";

const RECORD_FIELDS: &[&str] = &[
    "mgmt", "stime", "ltime", "proto", "saddr", "sport", "daddr", "dport", "slice", "state", "trans", "runtime",
    "idle", "synack", "ackdat", "durmin", "durmax", "dursq", "fiat_n", "fiat_sum", "fiat_min", "fiat_max", "fiat_sq",
];

const DIR_FIELDS: &[&str] = &[
    "pkts", "bytes", "appbytes", "datapkts", "minsz", "maxsz", "sizesq", "ttl", "tos", "win", "seq", "flags", "fin",
    "syn", "rst", "psh", "ack", "urg", "iat_n", "iat_sum", "iat_min", "iat_max", "iat_sq",
];

/// Field names in file order.
pub static FIELDS: std::sync::LazyLock<Vec<String>> = std::sync::LazyLock::new(|| {
    let mut v: Vec<String> = RECORD_FIELDS.iter().map(|s| s.to_string()).collect();
    for prefix in ["s", "d"] {
        v.extend(DIR_FIELDS.iter().map(|f| format!("{prefix}{f}")));
    }
    v
});

#[derive(Debug, Error)]
pub enum HeraError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("not a .hera file (first line {0:?})")]
    BadMagic(String),
    #[error("unsupported .hera version {0} (this build reads v{HERA_VERSION})")]
    UnsupportedVersion(String),
    #[error("line {line}: {reason}")]
    CorruptRecord { line: usize, reason: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeraHeader {
    pub version: u32,
    pub created: String,
    pub sources: Vec<String>,
    pub config: ExportConfig,
    /// Header lines this reader does not interpret, without the leading `#`.
    pub extra: Vec<String>,
}

impl HeraHeader {
    pub fn new(created: impl Into<String>, sources: Vec<String>, config: ExportConfig) -> Self {
        HeraHeader { version: HERA_VERSION, created: created.into(), sources, config, extra: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeraFile {
    pub header: HeraHeader,
    pub records: Vec<FlowRecord>,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

fn dir_value(d: &DirStats, name: &str) -> Option<String> {
    Some(match name {
        "pkts" => d.pkts.to_string(),
        "bytes" => d.bytes.to_string(),
        "appbytes" => d.app_bytes.to_string(),
        "datapkts" => d.data_pkts.to_string(),
        "minsz" => opt(d.min_size),
        "maxsz" => d.max_size.to_string(),
        "sizesq" => d.size_sq.to_string(),
        "ttl" => opt(d.ttl),
        "tos" => opt(d.tos),
        "win" => opt(d.win),
        "seq" => opt(d.seq),
        "flags" => {
            if d.flags.is_empty() {
                "-".into()
            } else {
                d.flags.to_string()
            }
        }
        "fin" => d.flag_counts.fin.to_string(),
        "syn" => d.flag_counts.syn.to_string(),
        "rst" => d.flag_counts.rst.to_string(),
        "psh" => d.flag_counts.psh.to_string(),
        "ack" => d.flag_counts.ack.to_string(),
        "urg" => d.flag_counts.urg.to_string(),
        other => return iat_value(&d.iat, other.strip_prefix("iat_")?),
    })
}

fn iat_value(i: &IatStats, name: &str) -> Option<String> {
    Some(match name {
        "n" => i.n.to_string(),
        "sum" => Micros(i.sum).to_string(),
        "min" => opt(i.min.map(Micros)),
        "max" => Micros(i.max).to_string(),
        "sq" => i.sum_sq.to_string(),
        _ => return None,
    })
}

fn field_value(r: &FlowRecord, name: &str) -> String {
    match name {
        "mgmt" => u8::from(r.is_management).to_string(),
        "stime" => r.stime.to_string(),
        "ltime" => r.ltime.to_string(),
        "proto" => r.proto().to_string(),
        "saddr" => r.saddr().to_string(),
        "sport" => r.sport().to_string(),
        "daddr" => r.daddr().to_string(),
        "dport" => r.dport().to_string(),
        "slice" => r.slice_index.to_string(),
        "state" => r.state.to_string(),
        "trans" => r.trans.to_string(),
        "runtime" => r.runtime.to_string(),
        "idle" => r.idle.to_string(),
        "synack" => opt(r.synack),
        "ackdat" => opt(r.ackdat),
        "durmin" => r.durations.min.to_string(),
        "durmax" => r.durations.max.to_string(),
        "dursq" => r.durations.sum_sq.to_string(),
        _ => {
            if let Some(f) = name.strip_prefix("fiat_") {
                return iat_value(&r.flow_iat, f).expect("known field");
            }
            let (d, f) = if let Some(f) = name.strip_prefix('s') { (&r.src, f) } else { (&r.dst, &name[1..]) };
            dir_value(d, f).expect("known field")
        }
    }
}

/// Writes the header and records to any writer.
pub fn write_hera_to<W: Write>(out: &mut W, header: &HeraHeader, records: &[FlowRecord]) -> io::Result<()> {
    writeln!(out, "{MAGIC}{}", header.version)?;
    writeln!(out, "#created={}", header.created)?;
    for s in &header.sources {
        writeln!(out, "#source={s}")?;
    }
    let cfg = &header.config;
    writeln!(out, "#interval_s={}", cfg.interval())?;
    writeln!(out, "#idle_timeout_s={}", cfg.idle_timeout())?;
    writeln!(out, "#reorder_slack_s={}", cfg.reorder_slack())?;
    writeln!(out, "#emit_management={}", cfg.emit_management())?;
    for e in &header.extra {
        writeln!(out, "#{e}")?;
    }
    writeln!(out, "#fields={}", FIELDS.join(" "))?;
    let mut line = String::new();
    for r in records {
        line.clear();
        for (i, name) in FIELDS.iter().enumerate() {
            if i > 0 {
                line.push('\t');
            }
            line.push_str(name);
            line.push('=');
            line.push_str(&field_value(r, name));
        }
        for (k, v) in &r.extra {
            line.push('\t');
            line.push_str(k);
            line.push('=');
            line.push_str(v);
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn write_hera(path: &Path, header: &HeraHeader, records: &[FlowRecord]) -> Result<(), HeraError> {
    let io_err = |source| HeraError::Io { path: path.to_owned(), source };
    let file = File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    write_hera_to(&mut out, header, records).map_err(io_err)?;
    out.flush().map_err(io_err)
}

pub fn read_hera(path: &Path) -> Result<HeraFile, HeraError> {
    let file = File::open(path).map_err(|source| HeraError::Io { path: path.to_owned(), source })?;
    read_hera_from(BufReader::new(file)).map_err(|e| match e {
        HeraError::Io { source, .. } => HeraError::Io { path: path.to_owned(), source },
        other => other,
    })
}

pub fn read_hera_from<R: BufRead>(input: R) -> Result<HeraFile, HeraError> {
    let mut lines = input.lines().enumerate();
    let io_err = |source| HeraError::Io { path: PathBuf::new(), source };
    let first = match lines.next() {
        Some((_, l)) => l.map_err(io_err)?,
        None => return Err(HeraError::BadMagic(String::new())),
    };
    let version = first.strip_prefix(MAGIC).ok_or_else(|| HeraError::BadMagic(first.clone()))?;
    if version.parse::<u32>().ok() != Some(HERA_VERSION) {
        return Err(HeraError::UnsupportedVersion(version.to_string()));
    }

    let mut created = String::new();
    let mut sources = Vec::new();
    let mut extra = Vec::new();
    let mut interval = None;
    let mut idle = None;
    let mut slack = None;
    let mut emit = true;
    let mut records = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(io_err)?;
        let corrupt = |reason: String| HeraError::CorruptRecord { line: lineno, reason };
        if line.is_empty() {
            continue;
        }
        if let Some(h) = line.strip_prefix('#') {
            let (k, v) = h.split_once('=').unwrap_or((h, ""));
            let secs = || v.parse::<f64>().map_err(|_| corrupt(format!("bad header value {h:?}")));
            match k {
                "created" => created = v.to_string(),
                "source" => sources.push(v.to_string()),
                "interval_s" => interval = Some(secs()?),
                "idle_timeout_s" => idle = Some(secs()?),
                "reorder_slack_s" => slack = Some(secs()?),
                "emit_management" => emit = v == "true",
                "fields" => {}
                _ => extra.push(h.to_string()),
            }
            continue;
        }
        records.push(parse_record(&line).map_err(corrupt)?);
    }

    let bad_cfg = |e: super::ConfigError| HeraError::CorruptRecord { line: 0, reason: e.to_string() };
    let mut config = match interval {
        Some(i) => ExportConfig::new(i).map_err(bad_cfg)?,
        None => ExportConfig::default(),
    };
    if let Some(i) = idle {
        if Some(i) != interval {
            config = config.with_idle_timeout(i).map_err(bad_cfg)?;
        }
    }
    if let Some(s) = slack {
        config = config.with_reorder_slack(s).map_err(bad_cfg)?;
    }
    config = config.with_management(emit);
    Ok(HeraFile { header: HeraHeader { version: HERA_VERSION, created, sources, config, extra }, records })
}

fn parse_opt<T: std::str::FromStr>(v: &str) -> Result<Option<T>, ()> {
    if v == "-" {
        Ok(None)
    } else {
        v.parse().map(Some).map_err(|_| ())
    }
}

fn parse_secs(v: &str) -> Result<Micros, ()> {
    Micros::parse_secs(v).ok_or(())
}

fn set_iat(i: &mut IatStats, name: &str, v: &str) -> Result<bool, ()> {
    match name {
        "n" => i.n = v.parse().map_err(|_| ())?,
        "sum" => i.sum = parse_secs(v)?.0,
        "min" => i.min = if v == "-" { None } else { Some(parse_secs(v)?.0) },
        "max" => i.max = parse_secs(v)?.0,
        "sq" => i.sum_sq = v.parse().map_err(|_| ())?,
        _ => return Ok(false),
    }
    Ok(true)
}

fn set_dir(d: &mut DirStats, name: &str, v: &str) -> Result<bool, ()> {
    let num = |v: &str| v.parse::<u64>().map_err(|_| ());
    match name {
        "pkts" => d.pkts = num(v)?,
        "bytes" => d.bytes = num(v)?,
        "appbytes" => d.app_bytes = num(v)?,
        "datapkts" => d.data_pkts = num(v)?,
        "minsz" => d.min_size = parse_opt(v)?,
        "maxsz" => d.max_size = v.parse().map_err(|_| ())?,
        "sizesq" => d.size_sq = v.parse().map_err(|_| ())?,
        "ttl" => d.ttl = parse_opt(v)?,
        "tos" => d.tos = parse_opt(v)?,
        "win" => d.win = parse_opt(v)?,
        "seq" => d.seq = parse_opt(v)?,
        "flags" => d.flags = if v == "-" { TcpFlags::empty() } else { TcpFlags::parse_letters(v).ok_or(())? },
        "fin" => d.flag_counts.fin = num(v)?,
        "syn" => d.flag_counts.syn = num(v)?,
        "rst" => d.flag_counts.rst = num(v)?,
        "psh" => d.flag_counts.psh = num(v)?,
        "ack" => d.flag_counts.ack = num(v)?,
        "urg" => d.flag_counts.urg = num(v)?,
        other => match other.strip_prefix("iat_") {
            Some(f) => return set_iat(&mut d.iat, f, v),
            None => return Ok(false),
        },
    }
    Ok(true)
}

fn parse_record(line: &str) -> Result<FlowRecord, String> {
    let zero = FlowKey::zeroed();
    let mut rec = FlowRecord::new(zero, Endpoint::A, Micros::ZERO);
    let mut saddr: Option<IpAddr> = None;
    let mut daddr: Option<IpAddr> = None;
    let (mut sport, mut dport) = (None, None);
    let mut proto = None;
    let mut seen_time = (false, false);

    for pair in line.split('\t') {
        let (k, v) = pair.split_once('=').ok_or_else(|| format!("field without '=': {pair:?}"))?;
        let bad = || format!("bad value for {k}: {v:?}");
        let ok: Result<bool, ()> = match k {
            "mgmt" => match v {
                "0" => Ok(true),
                "1" => {
                    rec.is_management = true;
                    Ok(true)
                }
                _ => Err(()),
            },
            "stime" => parse_secs(v).map(|t| {
                rec.stime = t;
                seen_time.0 = true;
                true
            }),
            "ltime" => parse_secs(v).map(|t| {
                rec.ltime = t;
                seen_time.1 = true;
                true
            }),
            "proto" => v.parse::<Protocol>().map(|p| proto = Some(p)).map(|_| true).map_err(|_| ()),
            "saddr" => v.parse().map(|a| saddr = Some(a)).map(|_| true).map_err(|_| ()),
            "daddr" => v.parse().map(|a| daddr = Some(a)).map(|_| true).map_err(|_| ()),
            "sport" => v.parse().map(|p| sport = Some(p)).map(|_| true).map_err(|_| ()),
            "dport" => v.parse().map(|p| dport = Some(p)).map(|_| true).map_err(|_| ()),
            "slice" => v.parse().map(|s| rec.slice_index = s).map(|_| true).map_err(|_| ()),
            "state" => v.parse::<FlowState>().map(|s| rec.state = s).map(|_| true),
            "trans" => v.parse().map(|s| rec.trans = s).map(|_| true).map_err(|_| ()),
            "runtime" => parse_secs(v).map(|t| rec.runtime = t).map(|_| true),
            "idle" => parse_secs(v).map(|t| rec.idle = t).map(|_| true),
            "synack" => {
                if v == "-" {
                    Ok(true)
                } else {
                    parse_secs(v).map(|t| rec.synack = Some(t)).map(|_| true)
                }
            }
            "ackdat" => {
                if v == "-" {
                    Ok(true)
                } else {
                    parse_secs(v).map(|t| rec.ackdat = Some(t)).map(|_| true)
                }
            }
            "durmin" => parse_secs(v).map(|t| rec.durations.min = t).map(|_| true),
            "durmax" => parse_secs(v).map(|t| rec.durations.max = t).map(|_| true),
            "dursq" => v.parse().map(|t| rec.durations.sum_sq = t).map(|_| true).map_err(|_| ()),
            _ => {
                if let Some(f) = k.strip_prefix("fiat_") {
                    set_iat(&mut rec.flow_iat, f, v)
                } else if let Some(f) = k.strip_prefix('s') {
                    set_dir(&mut rec.src, f, v)
                } else if let Some(f) = k.strip_prefix('d') {
                    set_dir(&mut rec.dst, f, v)
                } else {
                    Ok(false)
                }
            }
        };
        match ok {
            Ok(true) => {}
            Ok(false) => rec.extra.push((k.to_string(), v.to_string())),
            Err(()) => return Err(bad()),
        }
    }

    let (Some(saddr), Some(daddr), Some(sport), Some(dport), Some(proto)) = (saddr, daddr, sport, dport, proto) else {
        return Err("missing endpoint fields".into());
    };
    if !(seen_time.0 && seen_time.1) {
        return Err("missing stime/ltime".into());
    }
    if rec.stime > rec.ltime {
        return Err("stime after ltime".into());
    }
    let (key, dir) = FlowKey::canonical(saddr, sport, daddr, dport, proto);
    rec.key = key;
    rec.initiator = dir.sender();
    Ok(rec)
}
