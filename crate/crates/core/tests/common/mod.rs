//! Shared fixtures: capture scenarios and an independent flow oracle.
#![allow(clippy::type_complexity)]
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::net::IpAddr;
use std::path::{Path, PathBuf};

use hera::commands::cmd_export;
use hera::flow::{read_hera, FlowRecord};
use hera::pcap::synth::{capture_bytes, SynthPacket};
use hera::workspace::WorkspaceConfig;
use hera::{Micros, Protocol, TcpFlags};

pub const SYN: TcpFlags = TcpFlags::SYN;
pub const ACK: TcpFlags = TcpFlags::ACK;
pub const FIN: TcpFlags = TcpFlags::FIN;
pub const RST: TcpFlags = TcpFlags::RST;
pub const PSH: TcpFlags = TcpFlags::PSH;

pub fn tcp(t: f64, from: &str, to: &str, flags: TcpFlags, payload: usize) -> SynthPacket {
    SynthPacket::tcp(from, to, flags).payload(payload).at_secs(t)
}

pub fn udp(t: f64, from: &str, to: &str, payload: usize) -> SynthPacket {
    SynthPacket::udp(from, to, payload).at_secs(t)
}

pub fn icmp(t: f64, from: &str, to: &str, ty: u8) -> SynthPacket {
    SynthPacket::icmp(from, to, ty, 0).at_secs(t)
}

pub fn write_capture(dir: &Path, name: &str, packets: &[SynthPacket]) -> PathBuf {
    let path = dir.join(format!("{name}.pcap"));
    std::fs::write(&path, capture_bytes(packets)).unwrap();
    path
}

/// Exports through the `export` command and reads the `.hera` file back.
pub fn export_via_command(pcap: &Path, out: &Path, interval: f64, idle: Option<f64>) -> Vec<FlowRecord> {
    let ws = WorkspaceConfig {
        pcap_paths: vec![pcap.to_string_lossy().into_owned()],
        hera_dir: Some(out.to_path_buf()),
        interval: Some(interval),
        idle_timeout: idle,
        force: Some(true),
        ..Default::default()
    };
    cmd_export(&ws).unwrap();
    let stem = pcap.file_stem().unwrap().to_string_lossy().into_owned();
    read_hera(&out.join(format!("{stem}.hera"))).unwrap().records
}

pub struct Scenario {
    pub name: &'static str,
    pub interval: f64,
    pub idle: Option<f64>,
    pub packets: Vec<SynthPacket>,
}

const C: &str = "10.0.0.1:40000";
const S: &str = "10.0.0.2:80";

fn handshake(t0: f64, c: &str, s: &str) -> Vec<SynthPacket> {
    vec![tcp(t0, c, s, SYN, 0), tcp(t0 + 0.01, s, c, SYN | ACK, 0), tcp(t0 + 0.02, c, s, ACK, 0)]
}

pub fn one_sided_fin() -> Vec<SynthPacket> {
    let mut p = handshake(0.0, C, S);
    p.push(tcp(0.1, C, S, PSH | ACK, 200));
    p.push(tcp(0.2, C, S, FIN | ACK, 0));
    p.push(tcp(0.3, S, C, ACK, 0));
    for i in 0..3 {
        p.push(tcp(0.4 + f64::from(i) * 0.1, S, C, PSH | ACK, 1000));
        p.push(tcp(0.45 + f64::from(i) * 0.1, C, S, ACK, 0));
    }
    p
}

pub fn rst_reconnect() -> Vec<SynthPacket> {
    let mut p = handshake(0.0, C, S);
    p.push(tcp(0.1, C, S, PSH | ACK, 50));
    p.push(tcp(0.2, S, C, RST, 0));
    p.extend(handshake(1.0, C, S));
    p.push(tcp(1.1, C, S, PSH | ACK, 50));
    p
}

pub fn delayed_response() -> Vec<SynthPacket> {
    vec![
        udp(0.0, "10.0.0.5:5353", "10.0.0.6:9999", 40),
        udp(30.0, "10.0.0.6:9999", "10.0.0.5:5353", 400),
        udp(31.0, "10.0.0.6:9999", "10.0.0.5:5353", 400),
    ]
}

/// The flow-count fidelity suite.
pub fn scenarios() -> Vec<Scenario> {
    let sc = |name, interval, idle, packets| Scenario { name, interval, idle, packets };
    let mut v = Vec::new();

    v.push(sc("handshake_only", 60.0, None, handshake(0.0, C, S)));
    v.push(sc("one_sided_fin", 60.0, None, one_sided_fin()));
    v.push(sc("rst_reconnect", 60.0, None, rst_reconnect()));

    let mut u = Vec::new();
    for i in 0..15 {
        let t = f64::from(i) * 10.0;
        u.push(udp(t, "10.0.0.3:5000", "10.0.0.4:53", 30));
        u.push(udp(t + 0.5, "10.0.0.4:53", "10.0.0.3:5000", 90));
    }
    v.push(sc("udp_three_intervals", 60.0, None, u));

    let mut e = Vec::new();
    for i in 0..3 {
        let t = f64::from(i);
        e.push(icmp(t, "10.0.0.7", "10.0.0.8", 8));
        e.push(icmp(t + 0.001, "10.0.0.8", "10.0.0.7", 0));
    }
    v.push(sc("icmp_echo", 60.0, None, e));

    let mut il: Vec<SynthPacket> = Vec::new();
    for k in 0..5u16 {
        let c = format!("10.0.1.{}:{}", k + 1, 41000 + k);
        let s = format!("10.0.2.1:{}", [80, 443, 22, 25, 80][k as usize]);
        let t0 = f64::from(k) * 0.003;
        il.extend(handshake(t0, &c, &s));
        il.push(tcp(t0 + 0.5, &c, &s, PSH | ACK, 100 * usize::from(k + 1)));
        il.push(tcp(t0 + 0.6, &s, &c, PSH | ACK, 700));
        if k % 2 == 0 {
            il.push(tcp(t0 + 1.0, &c, &s, FIN | ACK, 0));
            il.push(tcp(t0 + 1.01, &s, &c, FIN | ACK, 0));
            il.push(tcp(t0 + 1.02, &c, &s, ACK, 0));
        }
    }
    il.sort_by_key(|p| p.ts);
    v.push(sc("interleaved", 60.0, None, il));

    v.push(sc(
        "out_of_order_within_slack",
        60.0,
        None,
        vec![
            udp(10.0, "10.0.0.9:7000", "10.0.0.10:7001", 10),
            udp(11.0, "10.0.0.10:7001", "10.0.0.9:7000", 20),
            udp(10.5, "10.0.0.9:7000", "10.0.0.10:7001", 30),
            udp(12.0, "10.0.0.9:7000", "10.0.0.10:7001", 40),
            udp(8.0, "10.0.0.9:7000", "10.0.0.10:7001", 50),
            udp(11.2, "10.0.0.11:7000", "10.0.0.10:7001", 60),
        ],
    ));

    v.push(sc(
        "mid_stream_tcp",
        60.0,
        None,
        vec![
            tcp(5.0, S, C, PSH | ACK, 1400),
            tcp(5.01, C, S, ACK, 0),
            tcp(5.02, S, C, PSH | ACK, 1400),
            tcp(5.03, C, S, ACK, 0),
        ],
    ));

    v.push(sc(
        "fragmented_ipv4",
        60.0,
        None,
        vec![
            udp(0.0, "10.0.0.12:6000", "10.0.0.13:6001", 1472),
            udp(0.001, "10.0.0.12:6000", "10.0.0.13:6001", 1480).fragment(185),
            udp(0.002, "10.0.0.12:6000", "10.0.0.13:6001", 600).fragment(370),
            udp(0.5, "10.0.0.13:6001", "10.0.0.12:6000", 20),
        ],
    ));

    let mut mixed = handshake(0.0, "[2001:db8::1]:50000", "[2001:db8::2]:443");
    mixed.push(tcp(0.1, "[2001:db8::1]:50000", "[2001:db8::2]:443", PSH | ACK, 300));
    mixed.push(icmp(0.2, "2001:db8::1", "2001:db8::2", 128));
    mixed.push(icmp(0.21, "2001:db8::2", "2001:db8::1", 129));
    mixed.extend(handshake(0.3, C, S));
    mixed.push(udp(0.4, "10.0.0.1:53000", "10.0.0.53:53", 40));
    mixed.push(udp(0.41, "[2001:db8::1]:53000", "[2001:db8::53]:53", 40));
    mixed.sort_by_key(|p| p.ts);
    v.push(sc("mixed_v4_v6", 60.0, None, mixed));

    v.push(sc(
        "idle_timeout",
        60.0,
        Some(5.0),
        vec![
            udp(0.0, "10.0.0.20:1000", "10.0.0.21:2000", 10),
            udp(1.0, "10.0.0.20:1000", "10.0.0.21:2000", 10),
            udp(10.0, "10.0.0.21:2000", "10.0.0.20:1000", 10),
            udp(11.0, "10.0.0.20:1000", "10.0.0.21:2000", 10),
        ],
    ));

    v.push(sc("delayed_response", 60.0, None, delayed_response()));

    let mut longtcp = handshake(0.0, C, S);
    for i in 1..=10 {
        longtcp.push(tcp(f64::from(i) * 7.0, C, S, PSH | ACK, 10));
    }
    longtcp.push(tcp(71.0, C, S, FIN | ACK, 0));
    longtcp.push(tcp(71.1, S, C, FIN | ACK, 0));
    longtcp.push(tcp(71.2, C, S, ACK, 0));
    v.push(sc("tcp_close_across_slices", 30.0, None, longtcp));
    v
}

/// The fields the oracle predicts for each flow.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct FlowSummary {
    pub stime: u64,
    pub ltime: u64,
    pub saddr: IpAddr,
    pub sport: u16,
    pub daddr: IpAddr,
    pub dport: u16,
    pub proto: u8,
    pub spkts: u64,
    pub dpkts: u64,
    pub sbytes: u64,
    pub dbytes: u64,
}

pub fn summarize(records: &[FlowRecord]) -> Vec<FlowSummary> {
    let mut v: Vec<_> = records
        .iter()
        .filter(|r| !r.is_management)
        .map(|r| FlowSummary {
            stime: r.stime.0,
            ltime: r.ltime.0,
            saddr: r.saddr(),
            sport: r.sport(),
            daddr: r.daddr(),
            dport: r.dport(),
            proto: r.proto().number(),
            spkts: r.spkts(),
            dpkts: r.dpkts(),
            sbytes: r.sbytes(),
            dbytes: r.dbytes(),
        })
        .collect();
    v.sort();
    v
}

/// IP length of a synthetic packet, from the header layouts.
pub fn ip_len(p: &SynthPacket) -> u64 {
    let l4_header = if p.frag_offset != 0 {
        0
    } else {
        match p.proto {
            Protocol::Tcp => 20,
            Protocol::Udp | Protocol::Icmp | Protocol::Icmpv6 => 8,
            Protocol::Other(_) => 0,
        }
    };
    let ip_header = if p.src.is_ipv4() { 20 } else { 40 + if p.frag_offset != 0 { 8 } else { 0 } };
    (ip_header + l4_header + p.payload_len) as u64
}

#[derive(Clone)]
struct Open {
    init: (IpAddr, u16),
    resp: (IpAddr, u16),
    proto: u8,
    anchor: u64,
    slice: u64,
    first: u64,
    last: u64,
    counts: [(u64, u64); 2],
    fin: [bool; 2],
    second_fin: Option<usize>,
}

impl Open {
    fn fresh(init: (IpAddr, u16), resp: (IpAddr, u16), proto: u8, ts: u64) -> Open {
        Open {
            init,
            resp,
            proto,
            anchor: ts,
            slice: 0,
            first: ts,
            last: ts,
            counts: [(0, 0); 2],
            fin: [false; 2],
            second_fin: None,
        }
    }

    fn summary(&self) -> FlowSummary {
        FlowSummary {
            stime: self.first,
            ltime: self.last,
            saddr: self.init.0,
            sport: self.init.1,
            daddr: self.resp.0,
            dport: self.resp.1,
            proto: self.proto,
            spkts: self.counts[0].0,
            dpkts: self.counts[1].0,
            sbytes: self.counts[0].1,
            dbytes: self.counts[1].1,
        }
    }
}

/// Brute-force flow grouping. Drops packets more than `slack` behind the
/// latest accepted timestamp, groups the rest by unordered endpoint pair and
/// protocol, then walks each group applying idle timeout, interval slicing
/// anchored at the connection's first packet, RST close and FIN/FIN/ACK
/// close.
pub fn oracle(packets: &[SynthPacket], interval_s: f64, idle_s: Option<f64>, slack_s: f64) -> Vec<FlowSummary> {
    let interval = (interval_s * 1e6).round() as u64;
    let idle = idle_s.map_or(interval, |i| (i * 1e6).round() as u64);
    let slack = (slack_s * 1e6).round() as u64;

    let mut latest: Option<u64> = None;
    let mut groups: BTreeMap<((IpAddr, u16), (IpAddr, u16), u8), Vec<&SynthPacket>> = BTreeMap::new();
    for p in packets {
        let ts = p.ts.0;
        if latest.is_some_and(|l| ts + slack < l) {
            continue;
        }
        latest = Some(latest.map_or(ts, |l| l.max(ts)));
        let (sp, dp) = if p.frag_offset != 0 { (0, 0) } else { (p.sport, p.dport) };
        let a = (p.src, sp);
        let b = (p.dst, dp);
        let key = if a <= b { (a, b, p.proto.number()) } else { (b, a, p.proto.number()) };
        groups.entry(key).or_default().push(p);
    }

    let mut out = Vec::new();
    for ((ea, eb, proto), pkts) in groups {
        let mut cur: Option<Open> = None;
        for p in pkts {
            let ts = p.ts.0;
            let (sp, dp) = if p.frag_offset != 0 { (0, 0) } else { (p.sport, p.dport) };
            let sender = (p.src, sp);
            let receiver = (p.dst, dp);
            debug_assert!((sender == ea && receiver == eb) || (sender == eb && receiver == ea));
            cur = Some(match cur.take() {
                None => Open::fresh(sender, receiver, proto, ts),
                Some(c) if ts > c.last && ts - c.last > idle => {
                    out.push(c.summary());
                    Open::fresh(sender, receiver, proto, ts)
                }
                Some(c) => {
                    let slice = ts.saturating_sub(c.anchor) / interval;
                    if slice > c.slice {
                        out.push(c.summary());
                        Open { slice, first: ts, last: ts, counts: [(0, 0); 2], ..c }
                    } else {
                        c
                    }
                }
            });
            let c = cur.as_mut().unwrap();
            let role = usize::from(sender != c.init);
            c.counts[role].0 += 1;
            c.counts[role].1 += ip_len(p);
            c.first = c.first.min(ts);
            c.last = c.last.max(ts);

            if p.proto != Protocol::Tcp || p.frag_offset != 0 {
                continue;
            }
            let f = p.flags;
            let closes = f.contains(RST) || (c.second_fin.is_some_and(|s| s != role) && f.contains(ACK));
            if closes {
                out.push(c.summary());
                cur = None;
                continue;
            }
            if f.contains(FIN) {
                c.fin[role] = true;
                if c.fin == [true, true] && c.second_fin.is_none() {
                    c.second_fin = Some(role);
                }
            }
        }
        out.extend(cur.map(|c| c.summary()));
    }
    out.sort();
    out
}

pub fn micros(secs: f64) -> Micros {
    Micros::from_secs_f64(secs).unwrap()
}
