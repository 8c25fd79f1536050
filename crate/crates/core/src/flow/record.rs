use std::fmt;
use std::net::IpAddr;
use std::str::FromStr;

use super::FlowKey;
use crate::types::{Micros, Protocol, TcpFlags};

/// One side of a canonical key.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Endpoint {
    A,
    B,
}

impl Endpoint {
    pub fn other(self) -> Endpoint {
        match self {
            Endpoint::A => Endpoint::B,
            Endpoint::B => Endpoint::A,
        }
    }
}

/// Connection state of a record. TCP flows move through `REQ`/`CON` and end
/// in `FIN` or `RST`; other protocols are `CON` once both sides have spoken
/// and `INT` otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FlowState {
    Req,
    Con,
    Fin,
    Rst,
    Int,
}

impl FlowState {
    pub fn as_str(self) -> &'static str {
        match self {
            FlowState::Req => "REQ",
            FlowState::Con => "CON",
            FlowState::Fin => "FIN",
            FlowState::Rst => "RST",
            FlowState::Int => "INT",
        }
    }

    pub fn number(self) -> u8 {
        match self {
            FlowState::Req => 1,
            FlowState::Con => 2,
            FlowState::Fin => 3,
            FlowState::Rst => 4,
            FlowState::Int => 5,
        }
    }
}

impl fmt::Display for FlowState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FlowState {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "REQ" => FlowState::Req,
            "CON" => FlowState::Con,
            "FIN" => FlowState::Fin,
            "RST" => FlowState::Rst,
            "INT" => FlowState::Int,
            _ => return Err(()),
        })
    }
}

/// Running summary of a sequence of gaps, in microseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IatStats {
    pub n: u64,
    pub sum: u64,
    pub min: Option<u64>,
    pub max: u64,
    pub sum_sq: u128,
}

impl IatStats {
    pub fn push(&mut self, gap: u64) {
        self.n += 1;
        self.sum += gap;
        self.min = Some(self.min.map_or(gap, |m| m.min(gap)));
        self.max = self.max.max(gap);
        self.sum_sq += u128::from(gap) * u128::from(gap);
    }

    pub fn merge(&mut self, other: &IatStats) {
        self.n += other.n;
        self.sum += other.sum;
        self.min = match (self.min, other.min) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.max = self.max.max(other.max);
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> Option<f64> {
        (self.n > 0).then(|| self.sum as f64 / self.n as f64)
    }

    /// Population standard deviation.
    pub fn std_dev(&self) -> Option<f64> {
        population_std(self.n, self.sum as f64, self.sum_sq as f64)
    }
}

pub(crate) fn population_std(n: u64, sum: f64, sum_sq: f64) -> Option<f64> {
    if n == 0 {
        return None;
    }
    let n = n as f64;
    let mean = sum / n;
    Some((sum_sq / n - mean * mean).max(0.0).sqrt())
}

/// Per-flag packet counts for one direction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FlagCounts {
    pub fin: u64,
    pub syn: u64,
    pub rst: u64,
    pub psh: u64,
    pub ack: u64,
    pub urg: u64,
}

impl FlagCounts {
    pub fn count(&mut self, flags: TcpFlags) {
        self.fin += u64::from(flags.contains(TcpFlags::FIN));
        self.syn += u64::from(flags.contains(TcpFlags::SYN));
        self.rst += u64::from(flags.contains(TcpFlags::RST));
        self.psh += u64::from(flags.contains(TcpFlags::PSH));
        self.ack += u64::from(flags.contains(TcpFlags::ACK));
        self.urg += u64::from(flags.contains(TcpFlags::URG));
    }

    pub fn merge(&mut self, o: &FlagCounts) {
        self.fin += o.fin;
        self.syn += o.syn;
        self.rst += o.rst;
        self.psh += o.psh;
        self.ack += o.ack;
        self.urg += o.urg;
    }
}

/// Packet aggregates for one direction of a flow. Sizes are IP lengths.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DirStats {
    pub pkts: u64,
    pub bytes: u64,
    pub app_bytes: u64,
    /// Packets carrying a non-empty transport payload.
    pub data_pkts: u64,
    pub min_size: Option<u32>,
    pub max_size: u32,
    pub size_sq: u128,
    /// First-seen values.
    pub ttl: Option<u8>,
    pub tos: Option<u8>,
    pub win: Option<u16>,
    pub seq: Option<u32>,
    pub flags: TcpFlags,
    pub flag_counts: FlagCounts,
    pub iat: IatStats,
}

impl DirStats {
    pub fn mean_size(&self) -> Option<f64> {
        (self.pkts > 0).then(|| self.bytes as f64 / self.pkts as f64)
    }

    pub fn std_size(&self) -> Option<f64> {
        population_std(self.pkts, self.bytes as f64, self.size_sq as f64)
    }

    /// Folds a later record's direction into this one. First-seen fields keep
    /// the earlier value.
    pub fn merge(&mut self, o: &DirStats) {
        self.pkts += o.pkts;
        self.bytes += o.bytes;
        self.app_bytes += o.app_bytes;
        self.data_pkts += o.data_pkts;
        self.min_size = match (self.min_size, o.min_size) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.max_size = self.max_size.max(o.max_size);
        self.size_sq += o.size_sq;
        self.ttl = self.ttl.or(o.ttl);
        self.tos = self.tos.or(o.tos);
        self.win = self.win.or(o.win);
        self.seq = self.seq.or(o.seq);
        self.flags |= o.flags;
        self.flag_counts.merge(&o.flag_counts);
        self.iat.merge(&o.iat);
    }
}

/// Minimum, maximum and sum of squares of the durations of the raw records
/// folded into a record.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DurationStats {
    pub min: Micros,
    pub max: Micros,
    pub sum_sq: u128,
}

/// One bidirectional flow, or one management (exporter summary) record.
///
/// `src` and `dst` are oriented by `initiator`: `src` always describes the
/// packets sent by the endpoint that opened the flow.
///
/// For management records the key is zeroed, `src.pkts`/`src.bytes` hold
/// the window's packet and byte totals, and `trans` the number of flow
/// records started in the window.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowRecord {
    pub key: FlowKey,
    pub initiator: Endpoint,
    pub stime: Micros,
    pub ltime: Micros,
    pub slice_index: u32,
    pub state: FlowState,
    pub is_management: bool,
    /// Number of raw records aggregated into this one.
    pub trans: u64,
    /// Sum of the durations of the aggregated records.
    pub runtime: Micros,
    /// Time since the last packet when the record was closed.
    pub idle: Micros,
    pub src: DirStats,
    pub dst: DirStats,
    pub flow_iat: IatStats,
    pub durations: DurationStats,
    /// SYN to SYN-ACK.
    pub synack: Option<Micros>,
    /// SYN-ACK to the initiator's ACK.
    pub ackdat: Option<Micros>,
    /// Fields from newer `.hera` writers, kept verbatim.
    pub extra: Vec<(String, String)>,
}

impl FlowRecord {
    pub fn new(key: FlowKey, initiator: Endpoint, ts: Micros) -> Self {
        FlowRecord {
            key,
            initiator,
            stime: ts,
            ltime: ts,
            slice_index: 0,
            state: if key.proto == Protocol::Tcp { FlowState::Con } else { FlowState::Int },
            is_management: false,
            trans: 1,
            runtime: Micros::ZERO,
            idle: Micros::ZERO,
            src: DirStats::default(),
            dst: DirStats::default(),
            flow_iat: IatStats::default(),
            durations: DurationStats::default(),
            synack: None,
            ackdat: None,
            extra: Vec::new(),
        }
    }

    pub fn proto(&self) -> Protocol {
        self.key.proto
    }

    pub fn saddr(&self) -> IpAddr {
        self.key.endpoint(self.initiator).0
    }

    pub fn sport(&self) -> u16 {
        self.key.endpoint(self.initiator).1
    }

    pub fn daddr(&self) -> IpAddr {
        self.key.endpoint(self.initiator.other()).0
    }

    pub fn dport(&self) -> u16 {
        self.key.endpoint(self.initiator.other()).1
    }

    pub fn spkts(&self) -> u64 {
        self.src.pkts
    }

    pub fn dpkts(&self) -> u64 {
        self.dst.pkts
    }

    pub fn pkts(&self) -> u64 {
        self.src.pkts + self.dst.pkts
    }

    pub fn sbytes(&self) -> u64 {
        self.src.bytes
    }

    pub fn dbytes(&self) -> u64 {
        self.dst.bytes
    }

    pub fn bytes(&self) -> u64 {
        self.src.bytes + self.dst.bytes
    }

    pub fn dur(&self) -> Micros {
        self.ltime.saturating_sub(self.stime)
    }

    /// Union of TCP flags seen in either direction.
    pub fn flgs(&self) -> TcpFlags {
        self.src.flags | self.dst.flags
    }

    /// Connection state, defined only for TCP flows.
    pub fn tcp_state(&self) -> Option<FlowState> {
        (self.proto() == Protocol::Tcp && !self.is_management).then_some(self.state)
    }

    /// Sets the fields that describe a record as a finished unit.
    pub(crate) fn seal(&mut self, idle: Micros) {
        let dur = self.dur();
        self.idle = idle;
        self.trans = 1;
        self.runtime = dur;
        self.durations = DurationStats { min: dur, max: dur, sum_sq: u128::from(dur.0) * u128::from(dur.0) };
        if self.proto() != Protocol::Tcp || self.is_management {
            self.state = if self.dst.pkts > 0 { FlowState::Con } else { FlowState::Int };
        }
    }
}
