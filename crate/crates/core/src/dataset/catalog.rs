//! The feature catalog: every column a dataset can carry, in the normative
//! CSV column order.
//!
//! Sizes are IP lengths in bytes, times are seconds, rates are per second.
//! `s*` features describe packets sent by the flow source (the endpoint that
//! sent the first packet), `d*` features packets sent by the destination.

use std::fmt;

use super::service_of;
use super::value::Value;
use super::DatasetError;
use crate::flow::{DirStats, FlowRecord, IatStats};
use crate::types::{Micros, Protocol, TcpFlags};

/// Everything a feature may look at when rendering one row.
pub struct RowContext<'a> {
    pub record: &'a FlowRecord,
    pub rank: u64,
    /// `(Ssaddr, Sdaddr)`; absent for management records.
    pub counts: Option<(u64, u64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValueKind {
    Int,
    Float,
    Time,
    Text,
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValueKind::Int => "int",
            ValueKind::Float => "float",
            ValueKind::Time => "time",
            ValueKind::Text => "text",
        })
    }
}

pub struct FeatureSpec {
    pub name: &'static str,
    pub kind: ValueKind,
    pub always_on: bool,
    pub description: &'static str,
    compute: fn(&RowContext) -> Option<Value>,
}

impl FeatureSpec {
    pub fn compute(&self, ctx: &RowContext) -> Option<Value> {
        (self.compute)(ctx)
    }
}

impl fmt::Debug for FeatureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FeatureSpec").field("name", &self.name).finish()
    }
}

fn int(v: u64) -> Option<Value> {
    Some(Value::Int(v))
}

fn float(v: Option<f64>) -> Option<Value> {
    v.filter(|x| x.is_finite()).map(Value::Float)
}

fn time(m: Micros) -> Option<Value> {
    Some(Value::Time(m))
}

fn text(s: impl Into<String>) -> Option<Value> {
    Some(Value::Text(s.into()))
}

fn ratio(num: f64, den: f64) -> Option<Value> {
    float((den != 0.0).then(|| num / den))
}

/// Per-second rate over the record duration; undefined for zero duration.
fn per_sec(amount: u64, r: &FlowRecord) -> Option<Value> {
    let dur = r.dur().as_secs_f64();
    ratio(amount as f64, dur)
}

fn secs(us: f64) -> f64 {
    us / 1e6
}

fn iat_mean(i: &IatStats) -> Option<Value> {
    float(i.mean().map(secs))
}

fn iat_min(i: &IatStats) -> Option<Value> {
    i.min.map(|m| Value::Time(Micros(m)))
}

fn iat_max(i: &IatStats) -> Option<Value> {
    (i.n > 0).then_some(Value::Time(Micros(i.max)))
}

fn iat_std(i: &IatStats) -> Option<Value> {
    float(i.std_dev().map(secs))
}

fn iat_sum(i: &IatStats) -> Option<Value> {
    (i.n > 0).then_some(Value::Time(Micros(i.sum)))
}

fn max_size(d: &DirStats) -> Option<Value> {
    (d.pkts > 0).then_some(Value::Int(u64::from(d.max_size)))
}

fn opt_int<T: Into<u64>>(v: Option<T>) -> Option<Value> {
    v.map(|x| Value::Int(x.into()))
}

fn tcp_only(r: &FlowRecord, v: u64) -> Option<Value> {
    (r.proto() == Protocol::Tcp).then_some(Value::Int(v))
}

fn flag_text(r: &FlowRecord, f: TcpFlags) -> Option<Value> {
    (r.proto() == Protocol::Tcp).then(|| Value::Text(f.to_string()))
}

/// Hops from the first-seen TTL, assuming the sender started at the next
/// common initial TTL (32, 64, 128 or 255).
fn hops(ttl: Option<u8>) -> Option<Value> {
    let ttl = ttl?;
    let initial = [32u8, 64, 128, 255].into_iter().find(|&i| i >= ttl).unwrap_or(255);
    int(u64::from(initial - ttl))
}

fn both(d: fn(&DirStats) -> u64, r: &FlowRecord) -> u64 {
    d(&r.src) + d(&r.dst)
}

fn overall_min(r: &FlowRecord) -> Option<u32> {
    match (r.src.min_size, r.dst.min_size) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

fn overall_std(r: &FlowRecord) -> Option<f64> {
    crate::flow::population_std(r.pkts(), r.bytes() as f64, (r.src.size_sq + r.dst.size_sq) as f64)
}

fn overall_var(r: &FlowRecord) -> Option<f64> {
    overall_std(r).map(|s| s * s)
}

/// Renders `proto`, with management records shown as `man`.
fn proto_text(r: &FlowRecord) -> String {
    if r.is_management {
        "man".into()
    } else {
        r.proto().to_string()
    }
}

/// `daddr-saddr-dport-sport-proto` with a lowercase protocol name.
pub fn flow_id(r: &FlowRecord) -> String {
    format!("{}-{}-{}-{}-{}", r.daddr(), r.saddr(), r.dport(), r.sport(), r.proto().to_string().to_lowercase())
}

macro_rules! feature {
    ($name:literal, $kind:ident, $desc:literal, $f:expr) => {
        FeatureSpec { name: $name, kind: ValueKind::$kind, always_on: false, description: $desc, compute: $f }
    };
    (always $name:literal, $kind:ident, $desc:literal, $f:expr) => {
        FeatureSpec { name: $name, kind: ValueKind::$kind, always_on: true, description: $desc, compute: $f }
    };
}

pub static CATALOG: &[FeatureSpec] = &[
    feature!("FlowID", Text, "daddr-saddr-dport-sport-proto flow identifier", |c| {
        (!c.record.is_management).then(|| Value::Text(flow_id(c.record)))
    }),
    feature!(always "rank", Int, "ordinal of the row in the dataset, from 0", |c| int(c.rank)),
    feature!(always "stime", Time, "record start time (epoch seconds)", |c| time(c.record.stime)),
    feature!(always "ltime", Time, "record last time (epoch seconds)", |c| time(c.record.ltime)),
    feature!(always "sport", Int, "source port (ICMP type)", |c| int(u64::from(c.record.sport()))),
    feature!(always "dport", Int, "destination port (ICMP code)", |c| int(u64::from(c.record.dport()))),
    feature!(always "saddr", Text, "source IP address", |c| text(c.record.saddr().to_string())),
    feature!(always "daddr", Text, "destination IP address", |c| text(c.record.daddr().to_string())),
    feature!(always "proto", Text, "transaction protocol", |c| text(proto_text(c.record))),
    feature!("bytes", Int, "total bytes in both directions", |c| int(c.record.bytes())),
    feature!("sbytes", Int, "source to destination bytes", |c| int(c.record.sbytes())),
    feature!("dbytes", Int, "destination to source bytes", |c| int(c.record.dbytes())),
    feature!("pkts", Int, "total packets in both directions", |c| int(c.record.pkts())),
    feature!("spkts", Int, "source to destination packets", |c| int(c.record.spkts())),
    feature!("dpkts", Int, "destination to source packets", |c| int(c.record.dpkts())),
    feature!("dur", Time, "record duration (ltime - stime)", |c| time(c.record.dur())),
    feature!("runtime", Time, "sum of the durations of the aggregated records", |c| time(c.record.runtime)),
    feature!("idle", Time, "time since the last packet when the record was closed", |c| time(c.record.idle)),
    feature!("flgs", Text, "TCP flags seen in either direction (FSRPAU letters)", |c| {
        flag_text(c.record, c.record.flgs())
    }),
    feature!("tcpopt", Text, "TCP connection state (REQ, CON, FIN, RST)", |c| {
        c.record.tcp_state().map(|s| Value::Text(s.to_string()))
    }),
    feature!("Ssaddr", Int, "flows in the connection window with the same service and source address", |c| {
        c.counts.map(|(s, _)| Value::Int(s))
    }),
    feature!("Sdaddr", Int, "flows in the connection window with the same service and destination address", |c| {
        c.counts.map(|(_, d)| Value::Int(d))
    }),
    feature!("state", Text, "record state for any protocol (REQ, CON, FIN, RST, INT)", |c| {
        text(c.record.state.to_string())
    }),
    feature!("state_number", Int, "numeric state: REQ=1 CON=2 FIN=3 RST=4 INT=5", |c| {
        int(u64::from(c.record.state.number()))
    }),
    feature!("proto_number", Int, "IP protocol number", |c| int(u64::from(c.record.proto().number()))),
    feature!("dir", Text, "-> when only the source sent packets, <-> otherwise", |c| {
        text(if c.record.dpkts() > 0 { "<->" } else { "->" })
    }),
    feature!("service", Text, "service inferred from protocol and well-known port, - if unknown", |c| {
        text(service_of(c.record))
    }),
    feature!("trans", Int, "number of raw records aggregated into this row", |c| int(c.record.trans)),
    feature!("slice", Int, "status-interval slice index of the record", |c| int(u64::from(c.record.slice_index))),
    feature!("mgmt", Int, "1 for management records, 0 for flows", |c| int(u64::from(c.record.is_management))),
    feature!("sappbytes", Int, "source transport payload bytes", |c| int(c.record.src.app_bytes)),
    feature!("dappbytes", Int, "destination transport payload bytes", |c| int(c.record.dst.app_bytes)),
    feature!("appbytes", Int, "transport payload bytes in both directions", |c| int(both(|d| d.app_bytes, c.record))),
    feature!("sdatapkts", Int, "source packets carrying payload", |c| int(c.record.src.data_pkts)),
    feature!("ddatapkts", Int, "destination packets carrying payload", |c| int(c.record.dst.data_pkts)),
    feature!("shdrbytes", Int, "source header bytes (sbytes - sappbytes)", |c| {
        int(c.record.src.bytes.saturating_sub(c.record.src.app_bytes))
    }),
    feature!("dhdrbytes", Int, "destination header bytes (dbytes - dappbytes)", |c| {
        int(c.record.dst.bytes.saturating_sub(c.record.dst.app_bytes))
    }),
    feature!("smeansz", Float, "mean source packet size", |c| float(c.record.src.mean_size())),
    feature!("dmeansz", Float, "mean destination packet size", |c| float(c.record.dst.mean_size())),
    feature!("sminsz", Int, "minimum source packet size", |c| opt_int(c.record.src.min_size)),
    feature!("dminsz", Int, "minimum destination packet size", |c| opt_int(c.record.dst.min_size)),
    feature!("smaxsz", Int, "maximum source packet size", |c| max_size(&c.record.src)),
    feature!("dmaxsz", Int, "maximum destination packet size", |c| max_size(&c.record.dst)),
    feature!("sstdsz", Float, "population std-dev of source packet sizes", |c| float(c.record.src.std_size())),
    feature!("dstdsz", Float, "population std-dev of destination packet sizes", |c| float(c.record.dst.std_size())),
    feature!("meansz", Float, "mean packet size over both directions", |c| {
        ratio(c.record.bytes() as f64, c.record.pkts() as f64)
    }),
    feature!("minsz", Int, "minimum packet size over both directions", |c| opt_int(overall_min(c.record))),
    feature!("maxsz", Int, "maximum packet size over both directions", |c| {
        (c.record.pkts() > 0).then(|| Value::Int(u64::from(c.record.src.max_size.max(c.record.dst.max_size))))
    }),
    feature!("stdsz", Float, "population std-dev of packet sizes over both directions", |c| {
        float(overall_std(c.record))
    }),
    feature!("sappmean", Float, "mean source payload per packet", |c| {
        ratio(c.record.src.app_bytes as f64, c.record.src.pkts as f64)
    }),
    feature!("dappmean", Float, "mean destination payload per packet", |c| {
        ratio(c.record.dst.app_bytes as f64, c.record.dst.pkts as f64)
    }),
    feature!("sttl", Int, "first source IP TTL / hop limit", |c| opt_int(c.record.src.ttl)),
    feature!("dttl", Int, "first destination IP TTL / hop limit", |c| opt_int(c.record.dst.ttl)),
    feature!("shops", Int, "estimated source hop count from sttl", |c| hops(c.record.src.ttl)),
    feature!("dhops", Int, "estimated destination hop count from dttl", |c| hops(c.record.dst.ttl)),
    feature!("stos", Int, "first source TOS / traffic class byte", |c| opt_int(c.record.src.tos)),
    feature!("dtos", Int, "first destination TOS / traffic class byte", |c| opt_int(c.record.dst.tos)),
    feature!("sdsb", Int, "source DSCP (stos >> 2)", |c| opt_int(c.record.src.tos.map(|t| t >> 2))),
    feature!("ddsb", Int, "destination DSCP (dtos >> 2)", |c| opt_int(c.record.dst.tos.map(|t| t >> 2))),
    feature!("secn", Int, "source ECN bits (stos & 3)", |c| opt_int(c.record.src.tos.map(|t| t & 3))),
    feature!("decn", Int, "destination ECN bits (dtos & 3)", |c| opt_int(c.record.dst.tos.map(|t| t & 3))),
    feature!("swin", Int, "first source TCP window", |c| opt_int(c.record.src.win)),
    feature!("dwin", Int, "first destination TCP window", |c| opt_int(c.record.dst.win)),
    feature!("stcpb", Int, "first source TCP sequence number", |c| opt_int(c.record.src.seq)),
    feature!("dtcpb", Int, "first destination TCP sequence number", |c| opt_int(c.record.dst.seq)),
    feature!("synack", Time, "SYN to SYN-ACK latency", |c| c.record.synack.map(Value::Time)),
    feature!("ackdat", Time, "SYN-ACK to ACK latency", |c| c.record.ackdat.map(Value::Time)),
    feature!("tcprtt", Time, "handshake round trip (synack + ackdat)", |c| {
        Some(Value::Time(c.record.synack? + c.record.ackdat?))
    }),
    feature!("rate", Float, "packets per second", |c| per_sec(c.record.pkts(), c.record)),
    feature!("srate", Float, "source packets per second", |c| per_sec(c.record.spkts(), c.record)),
    feature!("drate", Float, "destination packets per second", |c| per_sec(c.record.dpkts(), c.record)),
    feature!("load", Float, "bits per second", |c| per_sec(c.record.bytes() * 8, c.record)),
    feature!("sload", Float, "source bits per second", |c| per_sec(c.record.sbytes() * 8, c.record)),
    feature!("dload", Float, "destination bits per second", |c| per_sec(c.record.dbytes() * 8, c.record)),
    feature!("byterate", Float, "bytes per second", |c| per_sec(c.record.bytes(), c.record)),
    feature!("sbyterate", Float, "source bytes per second", |c| per_sec(c.record.sbytes(), c.record)),
    feature!("dbyterate", Float, "destination bytes per second", |c| per_sec(c.record.dbytes(), c.record)),
    feature!("dsratio", Float, "dpkts / spkts", |c| ratio(c.record.dpkts() as f64, c.record.spkts() as f64)),
    feature!("sdbyteratio", Float, "sbytes / dbytes", |c| ratio(c.record.sbytes() as f64, c.record.dbytes() as f64)),
    feature!("pcr", Float, "producer/consumer ratio (sapp - dapp) / (sapp + dapp)", |c| {
        let (s, d) = (c.record.src.app_bytes as f64, c.record.dst.app_bytes as f64);
        ratio(s - d, s + d)
    }),
    feature!("sintpkt", Float, "mean source inter-packet time", |c| iat_mean(&c.record.src.iat)),
    feature!("dintpkt", Float, "mean destination inter-packet time", |c| iat_mean(&c.record.dst.iat)),
    feature!("sintpktmin", Time, "minimum source inter-packet time", |c| iat_min(&c.record.src.iat)),
    feature!("dintpktmin", Time, "minimum destination inter-packet time", |c| iat_min(&c.record.dst.iat)),
    feature!("sintpktmax", Time, "maximum source inter-packet time", |c| iat_max(&c.record.src.iat)),
    feature!("dintpktmax", Time, "maximum destination inter-packet time", |c| iat_max(&c.record.dst.iat)),
    feature!("sjit", Float, "population std-dev of source inter-packet times", |c| iat_std(&c.record.src.iat)),
    feature!("djit", Float, "population std-dev of destination inter-packet times", |c| { iat_std(&c.record.dst.iat) }),
    feature!("sintpktsum", Time, "sum of source inter-packet times", |c| iat_sum(&c.record.src.iat)),
    feature!("dintpktsum", Time, "sum of destination inter-packet times", |c| iat_sum(&c.record.dst.iat)),
    feature!("fiatmean", Float, "mean inter-packet time, both directions", |c| iat_mean(&c.record.flow_iat)),
    feature!("fiatmin", Time, "minimum inter-packet time, both directions", |c| iat_min(&c.record.flow_iat)),
    feature!("fiatmax", Time, "maximum inter-packet time, both directions", |c| iat_max(&c.record.flow_iat)),
    feature!("fiatstd", Float, "population std-dev of inter-packet times, both directions", |c| {
        iat_std(&c.record.flow_iat)
    }),
    feature!("fiatsum", Time, "sum of inter-packet times, both directions", |c| iat_sum(&c.record.flow_iat)),
    feature!("sflags", Text, "TCP flags sent by the source", |c| flag_text(c.record, c.record.src.flags)),
    feature!("dflags", Text, "TCP flags sent by the destination", |c| flag_text(c.record, c.record.dst.flags)),
    feature!("fincnt", Int, "packets with FIN", |c| tcp_only(c.record, both(|d| d.flag_counts.fin, c.record))),
    feature!("syncnt", Int, "packets with SYN", |c| tcp_only(c.record, both(|d| d.flag_counts.syn, c.record))),
    feature!("rstcnt", Int, "packets with RST", |c| tcp_only(c.record, both(|d| d.flag_counts.rst, c.record))),
    feature!("pshcnt", Int, "packets with PSH", |c| tcp_only(c.record, both(|d| d.flag_counts.psh, c.record))),
    feature!("ackcnt", Int, "packets with ACK", |c| tcp_only(c.record, both(|d| d.flag_counts.ack, c.record))),
    feature!("urgcnt", Int, "packets with URG", |c| tcp_only(c.record, both(|d| d.flag_counts.urg, c.record))),
    feature!("sfin", Int, "source packets with FIN", |c| tcp_only(c.record, c.record.src.flag_counts.fin)),
    feature!("dfin", Int, "destination packets with FIN", |c| tcp_only(c.record, c.record.dst.flag_counts.fin)),
    feature!("ssyn", Int, "source packets with SYN", |c| tcp_only(c.record, c.record.src.flag_counts.syn)),
    feature!("dsyn", Int, "destination packets with SYN", |c| tcp_only(c.record, c.record.dst.flag_counts.syn)),
    feature!("srst", Int, "source packets with RST", |c| tcp_only(c.record, c.record.src.flag_counts.rst)),
    feature!("drst", Int, "destination packets with RST", |c| tcp_only(c.record, c.record.dst.flag_counts.rst)),
    feature!("spsh", Int, "source packets with PSH", |c| tcp_only(c.record, c.record.src.flag_counts.psh)),
    feature!("dpsh", Int, "destination packets with PSH", |c| tcp_only(c.record, c.record.dst.flag_counts.psh)),
    feature!("sack", Int, "source packets with ACK", |c| tcp_only(c.record, c.record.src.flag_counts.ack)),
    feature!("dack", Int, "destination packets with ACK", |c| tcp_only(c.record, c.record.dst.flag_counts.ack)),
    feature!("surg", Int, "source packets with URG", |c| tcp_only(c.record, c.record.src.flag_counts.urg)),
    feature!("durg", Int, "destination packets with URG", |c| tcp_only(c.record, c.record.dst.flag_counts.urg)),
    feature!("durmean", Float, "mean duration of the aggregated records (runtime / trans)", |c| {
        ratio(c.record.runtime.as_secs_f64(), c.record.trans as f64)
    }),
    feature!("durstd", Float, "population std-dev of the aggregated record durations", |c| {
        let r = c.record;
        float(crate::flow::population_std(r.trans, r.runtime.0 as f64, r.durations.sum_sq as f64).map(secs))
    }),
    feature!("durmin", Time, "shortest aggregated record duration", |c| time(c.record.durations.min)),
    feature!("durmax", Time, "longest aggregated record duration", |c| time(c.record.durations.max)),
    feature!("is_sm_ips_ports", Int, "1 if source and destination address and port are equal", |c| {
        let r = c.record;
        int(u64::from(r.saddr() == r.daddr() && r.sport() == r.dport()))
    }),
    feature!("ipver", Int, "IP version (4 or 6)", |c| int(if c.record.saddr().is_ipv4() { 4 } else { 6 })),
    feature!("sport_wellknown", Int, "1 if sport < 1024", |c| int(u64::from(c.record.sport() < 1024))),
    feature!("dport_wellknown", Int, "1 if dport < 1024", |c| int(u64::from(c.record.dport() < 1024))),
    feature!("handshake", Int, "1 if a complete three-way handshake was seen (TCP only)", |c| {
        tcp_only(c.record, u64::from(c.record.synack.is_some() && c.record.ackdat.is_some()))
    }),
    feature!("sbytesfrac", Float, "sbytes / bytes", |c| ratio(c.record.sbytes() as f64, c.record.bytes() as f64)),
    feature!("meanappsz", Float, "mean payload per packet, both directions", |c| {
        ratio(both(|d| d.app_bytes, c.record) as f64, c.record.pkts() as f64)
    }),
    feature!("datapkts", Int, "packets carrying payload, both directions", |c| int(both(|d| d.data_pkts, c.record))),
    feature!("hdrbytes", Int, "header bytes, both directions", |c| {
        int(c.record.bytes().saturating_sub(both(|d| d.app_bytes, c.record)))
    }),
    feature!("sizevar", Float, "population variance of packet sizes, both directions", |c| {
        float(overall_var(c.record))
    }),
    feature!("sizerange", Int, "maxsz - minsz", |c| {
        let r = c.record;
        let min = overall_min(r)?;
        int(u64::from(r.src.max_size.max(r.dst.max_size) - min))
    }),
];

/// Catalog position of `name` (exact match, then case-insensitive).
pub fn feature_index(name: &str) -> Option<usize> {
    CATALOG.iter().position(|f| f.name == name).or_else(|| {
        let mut hits = CATALOG.iter().enumerate().filter(|(_, f)| f.name.eq_ignore_ascii_case(name));
        match (hits.next(), hits.next()) {
            (Some((i, _)), None) => Some(i),
            _ => None,
        }
    })
}

/// The published feature sets a preset stands in for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    All,
    Default,
    UnswNb15,
    BotIot,
    CicIds2017,
}

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::All, Preset::Default, Preset::UnswNb15, Preset::BotIot, Preset::CicIds2017];

    pub fn name(self) -> &'static str {
        match self {
            Preset::All => "all",
            Preset::Default => "default",
            Preset::UnswNb15 => "unsw-nb15",
            Preset::BotIot => "bot-iot",
            Preset::CicIds2017 => "cic-ids2017",
        }
    }

    pub fn parse(s: &str) -> Option<Preset> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        Preset::ALL.into_iter().find(|p| p.name() == norm || p.name().replace('-', "") == norm)
    }

    /// Catalog names in the preset (before always-on features are added).
    pub fn members(self) -> Vec<&'static str> {
        match self {
            Preset::All => CATALOG.iter().map(|f| f.name).collect(),
            Preset::Default => DEFAULT_SET.to_vec(),
            Preset::UnswNb15 => UNSW_NB15.iter().filter_map(|(_, c)| *c).collect(),
            Preset::BotIot => BOT_IOT.iter().filter_map(|(_, c)| *c).collect(),
            Preset::CicIds2017 => CIC_IDS2017.iter().filter_map(|(_, c)| *c).collect(),
        }
    }

    /// Published feature name → catalog entry, `None` where nothing in the
    /// catalog corresponds. Empty for `all` and `default`.
    pub fn mapping(self) -> &'static [(&'static str, Option<&'static str>)] {
        match self {
            Preset::All | Preset::Default => &[],
            Preset::UnswNb15 => UNSW_NB15,
            Preset::BotIot => BOT_IOT,
            Preset::CicIds2017 => CIC_IDS2017,
        }
    }
}

const DEFAULT_SET: &[&str] = &[
    "FlowID", "rank", "stime", "ltime", "sport", "dport", "saddr", "daddr", "proto", "bytes", "sbytes", "dbytes",
    "pkts", "spkts", "dpkts", "dur", "runtime", "idle", "flgs", "tcpopt", "Ssaddr", "Sdaddr",
];

const UNSW_NB15: &[(&str, Option<&str>)] = &[
    ("srcip", Some("saddr")),
    ("sport", Some("sport")),
    ("dstip", Some("daddr")),
    ("dsport", Some("dport")),
    ("proto", Some("proto")),
    ("state", Some("state")),
    ("dur", Some("dur")),
    ("sbytes", Some("sbytes")),
    ("dbytes", Some("dbytes")),
    ("sttl", Some("sttl")),
    ("dttl", Some("dttl")),
    ("sloss", None),
    ("dloss", None),
    ("service", Some("service")),
    ("Sload", Some("sload")),
    ("Dload", Some("dload")),
    ("Spkts", Some("spkts")),
    ("Dpkts", Some("dpkts")),
    ("swin", Some("swin")),
    ("dwin", Some("dwin")),
    ("stcpb", Some("stcpb")),
    ("dtcpb", Some("dtcpb")),
    ("smeansz", Some("smeansz")),
    ("dmeansz", Some("dmeansz")),
    ("trans_depth", None),
    ("res_bdy_len", None),
    ("Sjit", Some("sjit")),
    ("Djit", Some("djit")),
    ("Stime", Some("stime")),
    ("Ltime", Some("ltime")),
    ("Sintpkt", Some("sintpkt")),
    ("Dintpkt", Some("dintpkt")),
    ("tcprtt", Some("tcprtt")),
    ("synack", Some("synack")),
    ("ackdat", Some("ackdat")),
    ("is_sm_ips_ports", Some("is_sm_ips_ports")),
    ("ct_state_ttl", None),
    ("ct_flw_http_mthd", None),
    ("is_ftp_login", None),
    ("ct_ftp_cmd", None),
    ("ct_srv_src", Some("Ssaddr")),
    ("ct_srv_dst", Some("Sdaddr")),
    ("ct_dst_ltm", None),
    ("ct_src_ltm", None),
    ("ct_src_dport_ltm", None),
    ("ct_dst_sport_ltm", None),
    ("ct_dst_src_ltm", None),
];

const BOT_IOT: &[(&str, Option<&str>)] = &[
    ("pkSeqID", Some("rank")),
    ("stime", Some("stime")),
    ("flgs", Some("flgs")),
    ("flgs_number", None),
    ("proto", Some("proto")),
    ("proto_number", Some("proto_number")),
    ("saddr", Some("saddr")),
    ("sport", Some("sport")),
    ("daddr", Some("daddr")),
    ("dport", Some("dport")),
    ("pkts", Some("pkts")),
    ("bytes", Some("bytes")),
    ("state", Some("state")),
    ("state_number", Some("state_number")),
    ("ltime", Some("ltime")),
    ("seq", None),
    ("dur", Some("dur")),
    ("mean", Some("durmean")),
    ("stddev", Some("durstd")),
    ("sum", Some("runtime")),
    ("min", Some("durmin")),
    ("max", Some("durmax")),
    ("spkts", Some("spkts")),
    ("dpkts", Some("dpkts")),
    ("sbytes", Some("sbytes")),
    ("dbytes", Some("dbytes")),
    ("rate", Some("rate")),
    ("srate", Some("srate")),
    ("drate", Some("drate")),
    ("TnBPSrcIP", None),
    ("TnBPDstIP", None),
    ("TnP_PSrcIP", None),
    ("TnP_PDstIP", None),
    ("TnP_PerProto", None),
    ("TnP_Per_Dport", None),
    ("AR_P_Proto_P_SrcIP", None),
    ("AR_P_Proto_P_DstIP", None),
    ("N_IN_Conn_P_DstIP", None),
    ("N_IN_Conn_P_SrcIP", None),
    ("AR_P_Proto_P_Sport", None),
    ("AR_P_Proto_P_Dport", None),
    ("Pkts_P_State_P_Protocol_P_DestIP", None),
    ("Pkts_P_State_P_Protocol_P_SrcIP", None),
];

const CIC_IDS2017: &[(&str, Option<&str>)] = &[
    ("Flow ID", Some("FlowID")),
    ("Source IP", Some("saddr")),
    ("Source Port", Some("sport")),
    ("Destination IP", Some("daddr")),
    ("Destination Port", Some("dport")),
    ("Protocol", Some("proto_number")),
    ("Timestamp", Some("stime")),
    ("Flow Duration", Some("dur")),
    ("Total Fwd Packets", Some("spkts")),
    ("Total Backward Packets", Some("dpkts")),
    ("Total Length of Fwd Packets", Some("sappbytes")),
    ("Total Length of Bwd Packets", Some("dappbytes")),
    ("Fwd Packet Length Max", Some("smaxsz")),
    ("Fwd Packet Length Min", Some("sminsz")),
    ("Fwd Packet Length Mean", Some("smeansz")),
    ("Fwd Packet Length Std", Some("sstdsz")),
    ("Bwd Packet Length Max", Some("dmaxsz")),
    ("Bwd Packet Length Min", Some("dminsz")),
    ("Bwd Packet Length Mean", Some("dmeansz")),
    ("Bwd Packet Length Std", Some("dstdsz")),
    ("Flow Bytes/s", Some("byterate")),
    ("Flow Packets/s", Some("rate")),
    ("Flow IAT Mean", Some("fiatmean")),
    ("Flow IAT Std", Some("fiatstd")),
    ("Flow IAT Max", Some("fiatmax")),
    ("Flow IAT Min", Some("fiatmin")),
    ("Fwd IAT Total", Some("sintpktsum")),
    ("Fwd IAT Mean", Some("sintpkt")),
    ("Fwd IAT Std", Some("sjit")),
    ("Fwd IAT Max", Some("sintpktmax")),
    ("Fwd IAT Min", Some("sintpktmin")),
    ("Bwd IAT Total", Some("dintpktsum")),
    ("Bwd IAT Mean", Some("dintpkt")),
    ("Bwd IAT Std", Some("djit")),
    ("Bwd IAT Max", Some("dintpktmax")),
    ("Bwd IAT Min", Some("dintpktmin")),
    ("Fwd PSH Flags", Some("spsh")),
    ("Bwd PSH Flags", Some("dpsh")),
    ("Fwd URG Flags", Some("surg")),
    ("Bwd URG Flags", Some("durg")),
    ("Fwd Header Length", Some("shdrbytes")),
    ("Bwd Header Length", Some("dhdrbytes")),
    ("Fwd Packets/s", Some("srate")),
    ("Bwd Packets/s", Some("drate")),
    ("Min Packet Length", Some("minsz")),
    ("Max Packet Length", Some("maxsz")),
    ("Packet Length Mean", Some("meansz")),
    ("Packet Length Std", Some("stdsz")),
    ("Packet Length Variance", Some("sizevar")),
    ("FIN Flag Count", Some("fincnt")),
    ("SYN Flag Count", Some("syncnt")),
    ("RST Flag Count", Some("rstcnt")),
    ("PSH Flag Count", Some("pshcnt")),
    ("ACK Flag Count", Some("ackcnt")),
    ("URG Flag Count", Some("urgcnt")),
    ("CWE Flag Count", None),
    ("ECE Flag Count", None),
    ("Down/Up Ratio", Some("dsratio")),
    ("Average Packet Size", Some("meansz")),
    ("Avg Fwd Segment Size", Some("sappmean")),
    ("Avg Bwd Segment Size", Some("dappmean")),
    ("Fwd Avg Bytes/Bulk", None),
    ("Fwd Avg Packets/Bulk", None),
    ("Fwd Avg Bulk Rate", None),
    ("Bwd Avg Bytes/Bulk", None),
    ("Bwd Avg Packets/Bulk", None),
    ("Bwd Avg Bulk Rate", None),
    ("Subflow Fwd Packets", Some("spkts")),
    ("Subflow Fwd Bytes", Some("sbytes")),
    ("Subflow Bwd Packets", Some("dpkts")),
    ("Subflow Bwd Bytes", Some("dbytes")),
    ("Init_Win_bytes_forward", Some("swin")),
    ("Init_Win_bytes_backward", Some("dwin")),
    ("act_data_pkt_fwd", Some("sdatapkts")),
    ("min_seg_size_forward", None),
    ("Active Mean", None),
    ("Active Std", None),
    ("Active Max", None),
    ("Active Min", None),
    ("Idle Mean", None),
    ("Idle Std", None),
    ("Idle Max", None),
    ("Idle Min", None),
];

/// What the user asked for: a preset or explicit feature names.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FeatureSelection {
    Preset(Preset),
    Names(Vec<String>),
}

impl FeatureSelection {
    /// A preset name, or a comma-separated list of feature names.
    pub fn parse(s: &str) -> FeatureSelection {
        match Preset::parse(s.trim()) {
            Some(p) => FeatureSelection::Preset(p),
            None => {
                FeatureSelection::Names(s.split(',').map(|n| n.trim().to_string()).filter(|n| !n.is_empty()).collect())
            }
        }
    }
}

/// Selected catalog columns, always in catalog order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureList {
    indices: Vec<usize>,
}

impl FeatureList {
    pub fn specs(&self) -> impl Iterator<Item = &'static FeatureSpec> + '_ {
        self.indices.iter().map(|&i| &CATALOG[i])
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.specs().map(|f| f.name).collect()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.specs().position(|f| f.name == name)
    }
}

/// Resolves a selection to catalog columns. The always-on features are
/// added when missing; the result follows catalog order.
pub fn select_feature_set(selection: &FeatureSelection) -> Result<FeatureList, DatasetError> {
    let mut wanted = vec![false; CATALOG.len()];
    for (i, f) in CATALOG.iter().enumerate() {
        wanted[i] = f.always_on;
    }
    match selection {
        FeatureSelection::Preset(p) => {
            for name in p.members() {
                wanted[feature_index(name).expect("preset members are catalog names")] = true;
            }
        }
        FeatureSelection::Names(names) => {
            for name in names {
                let i = feature_index(name).ok_or_else(|| DatasetError::UnknownFeature(name.clone()))?;
                wanted[i] = true;
            }
        }
    }
    Ok(FeatureList { indices: (0..CATALOG.len()).filter(|&i| wanted[i]).collect() })
}
