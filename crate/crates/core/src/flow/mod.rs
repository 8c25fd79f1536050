//! Bidirectional flow aggregation.
//!
//! Packets are grouped by a canonical 5-tuple so both directions of a
//! conversation land in one [`FlowRecord`]. The endpoint that sent the first
//! packet is the flow's source for the record's whole life; later packets in
//! the other direction never swap it.

mod hera_file;
mod record;
mod table;

use std::net::IpAddr;

use thiserror::Error;

use crate::pcap::DecodedPacket;
use crate::types::{Micros, Protocol};

pub use hera_file::{
    read_hera, read_hera_from, write_hera, write_hera_to, HeraError, HeraFile, HeraHeader, HERA_VERSION,
};
pub(crate) use record::population_std;
pub use record::{DirStats, DurationStats, Endpoint, FlagCounts, FlowRecord, FlowState, IatStats};
pub use table::{
    make_management_record, AssignOutcome, EngineError, EngineStats, FlowEvent, FlowTable, WindowCounters,
};

/// Canonical flow key: the lexicographically smaller `(addr, port)` endpoint
/// is always `a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FlowKey {
    pub addr_a: IpAddr,
    pub port_a: u16,
    pub addr_b: IpAddr,
    pub port_b: u16,
    pub proto: Protocol,
}

/// Direction of a packet relative to its canonical key.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Sent by endpoint `a`.
    TowardB,
    /// Sent by endpoint `b`.
    TowardA,
}

impl Direction {
    pub fn sender(self) -> Endpoint {
        match self {
            Direction::TowardB => Endpoint::A,
            Direction::TowardA => Endpoint::B,
        }
    }
}

impl FlowKey {
    /// Builds the canonical key for a (src, sport) → (dst, dport) packet.
    pub fn canonical(src: IpAddr, sport: u16, dst: IpAddr, dport: u16, proto: Protocol) -> (FlowKey, Direction) {
        if (src, sport) <= (dst, dport) {
            (FlowKey { addr_a: src, port_a: sport, addr_b: dst, port_b: dport, proto }, Direction::TowardB)
        } else {
            (FlowKey { addr_a: dst, port_a: dport, addr_b: src, port_b: sport, proto }, Direction::TowardA)
        }
    }

    /// The all-zero key used by management records.
    pub fn zeroed() -> FlowKey {
        let zero = IpAddr::from([0u8, 0, 0, 0]);
        FlowKey { addr_a: zero, port_a: 0, addr_b: zero, port_b: 0, proto: Protocol::Other(0) }
    }

    pub fn endpoint(&self, which: Endpoint) -> (IpAddr, u16) {
        match which {
            Endpoint::A => (self.addr_a, self.port_a),
            Endpoint::B => (self.addr_b, self.port_b),
        }
    }
}

/// Canonical key of a packet and the packet's direction within it.
pub fn flow_key(packet: &DecodedPacket) -> (FlowKey, Direction) {
    FlowKey::canonical(packet.src_addr, packet.src_port, packet.dst_addr, packet.dst_port, packet.proto)
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("interval must be a positive number of seconds, got {0}")]
    NonPositiveInterval(f64),
    #[error("idle timeout must be a positive number of seconds, got {0}")]
    NonPositiveIdleTimeout(f64),
    #[error("reorder slack must be a non-negative number of seconds, got {0}")]
    NegativeSlack(f64),
}

/// Flow export settings.
#[derive(Clone, Copy, Debug)]
pub struct ExportConfig {
    interval: Micros,
    idle_timeout: Option<Micros>,
    emit_management: bool,
    reorder_slack: Micros,
}

impl Default for ExportConfig {
    fn default() -> Self {
        ExportConfig {
            interval: Micros::from_secs(60),
            idle_timeout: None,
            emit_management: true,
            reorder_slack: Micros::from_secs(1),
        }
    }
}

/// Compares effective values: an idle timeout set equal to the interval is
/// the same configuration as the default.
impl PartialEq for ExportConfig {
    fn eq(&self, other: &Self) -> bool {
        self.interval == other.interval
            && self.idle_timeout() == other.idle_timeout()
            && self.emit_management == other.emit_management
            && self.reorder_slack == other.reorder_slack
    }
}

impl Eq for ExportConfig {}

fn positive(secs: f64) -> Option<Micros> {
    Micros::from_secs_f64(secs).filter(|m| m.0 > 0)
}

impl ExportConfig {
    /// Status interval in seconds; must be positive.
    pub fn new(interval_s: f64) -> Result<Self, ConfigError> {
        let interval = positive(interval_s).ok_or(ConfigError::NonPositiveInterval(interval_s))?;
        Ok(ExportConfig { interval, ..Default::default() })
    }

    pub fn with_idle_timeout(mut self, secs: f64) -> Result<Self, ConfigError> {
        self.idle_timeout = Some(positive(secs).ok_or(ConfigError::NonPositiveIdleTimeout(secs))?);
        Ok(self)
    }

    pub fn with_reorder_slack(mut self, secs: f64) -> Result<Self, ConfigError> {
        self.reorder_slack = Micros::from_secs_f64(secs).ok_or(ConfigError::NegativeSlack(secs))?;
        Ok(self)
    }

    pub fn with_management(mut self, emit: bool) -> Self {
        self.emit_management = emit;
        self
    }

    pub fn interval(&self) -> Micros {
        self.interval
    }

    /// Defaults to the interval unless set explicitly.
    pub fn idle_timeout(&self) -> Micros {
        self.idle_timeout.unwrap_or(self.interval)
    }

    pub fn emit_management(&self) -> bool {
        self.emit_management
    }

    pub fn reorder_slack(&self) -> Micros {
        self.reorder_slack
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pcap::synth::SynthPacket;
    use crate::pcap::{decode_frame, LINKTYPE_ETHERNET};
    use crate::types::TcpFlags;

    fn decoded(p: SynthPacket) -> DecodedPacket {
        decode_frame(LINKTYPE_ETHERNET, &p.ethernet_frame(), 0, p.ts).unwrap()
    }

    #[test]
    fn reversed_packets_share_a_key() {
        let fwd = decoded(SynthPacket::tcp("10.0.0.1:1234", "10.0.0.2:80", TcpFlags::SYN));
        let rev = decoded(SynthPacket::tcp("10.0.0.2:80", "10.0.0.1:1234", TcpFlags::SYN | TcpFlags::ACK));
        let (k1, d1) = flow_key(&fwd);
        let (k2, d2) = flow_key(&rev);
        assert_eq!(k1, k2);
        assert_eq!(d1, Direction::TowardB);
        assert_eq!(d2, Direction::TowardA);
    }

    #[test]
    fn icmp_key_uses_type_and_code() {
        let p = decoded(SynthPacket::icmp("10.0.0.1", "10.0.0.2", 8, 0));
        let (k, _) = flow_key(&p);
        assert_eq!((k.port_a, k.port_b), (8, 0));
        assert_eq!(k.proto, Protocol::Icmp);
    }

    #[test]
    fn protocol_distinguishes_keys() {
        let t = decoded(SynthPacket::tcp("10.0.0.1:53", "10.0.0.2:53", TcpFlags::ACK));
        let u = decoded(SynthPacket::udp("10.0.0.1:53", "10.0.0.2:53", 0));
        assert_ne!(flow_key(&t).0, flow_key(&u).0);
    }

    #[test]
    fn config_rejects_non_positive_interval() {
        assert_eq!(ExportConfig::new(0.0), Err(ConfigError::NonPositiveInterval(0.0)));
        assert_eq!(ExportConfig::new(-5.0), Err(ConfigError::NonPositiveInterval(-5.0)));
        assert!(ExportConfig::new(f64::NAN).is_err());
        assert!(ExportConfig::new(1e-9).is_err());
        let c = ExportConfig::new(30.0).unwrap();
        assert_eq!(c.idle_timeout(), Micros::from_secs(30));
        assert_eq!(c.with_idle_timeout(5.0).unwrap().idle_timeout(), Micros::from_secs(5));
        assert_eq!(ExportConfig::default().interval(), Micros::from_secs(60));
    }
}
