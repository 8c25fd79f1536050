use std::collections::HashMap;

use thiserror::Error;

use super::record::{Endpoint, FlowRecord, FlowState};
use super::{flow_key, ExportConfig, FlowKey};
use crate::pcap::DecodedPacket;
use crate::types::{Micros, Protocol, TcpFlags};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("packet at {ts} is earlier than {latest} by more than the reorder slack; skipped")]
    NonMonotonicTimestamp { ts: Micros, latest: Micros },
}

/// What happened to the flow a packet was assigned to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowEvent {
    NewFlow,
    Updated,
    /// The packet fell into a later status interval; the previous slice was
    /// closed and a new one opened.
    Sliced,
    /// The previous flow on this key timed out; a new flow was opened.
    IdleExpired,
    /// The packet completed a FIN handshake or carried RST.
    TcpClosed,
}

/// Result of assigning one packet. `closed` lists every record this packet
/// finalized (a timed-out predecessor, a finished slice, and/or the flow
/// itself when it closed on this packet), in closing order.
#[derive(Clone, Debug, PartialEq)]
pub struct AssignOutcome {
    pub event: FlowEvent,
    pub closed: Vec<FlowRecord>,
}

/// Packet/byte/flow tallies for one management window.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct WindowCounters {
    pub packets: u64,
    pub bytes: u64,
    pub flows: u64,
}

/// Builds a management record summarizing `[window_start, window_end]`.
pub fn make_management_record(window_start: Micros, window_end: Micros, counters: WindowCounters) -> FlowRecord {
    let mut rec = FlowRecord::new(FlowKey::zeroed(), Endpoint::A, window_start);
    rec.ltime = window_end.max(window_start);
    rec.is_management = true;
    rec.src.pkts = counters.packets;
    rec.src.bytes = counters.bytes;
    rec.seal(Micros::ZERO);
    rec.trans = counters.flows;
    rec
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EngineStats {
    pub accepted_packets: u64,
    pub accepted_bytes: u64,
    pub out_of_order_accepted: u64,
    pub out_of_order_skipped: u64,
}

#[derive(Clone, Copy, Debug, Default)]
struct TcpTracker {
    syn_ts: Option<Micros>,
    synack_ts: Option<Micros>,
    /// FIN seen from the initiator / responder.
    fin: [bool; 2],
    /// Role (0 initiator, 1 responder) whose FIN completed the pair.
    second_fin: Option<usize>,
    closed: bool,
}

struct ActiveFlow {
    rec: FlowRecord,
    seq: u64,
    /// stime of slice 0; slices are anchored here.
    anchor: Micros,
    last_dir_ts: [Option<Micros>; 2],
    last_ts: Option<Micros>,
    tcp: TcpTracker,
}

struct MgmtWindow {
    start: Micros,
    counters: WindowCounters,
}

/// Live flow table for one capture. Packets must be assigned in file order
/// from a single thread.
pub struct FlowTable {
    cfg: ExportConfig,
    live: HashMap<FlowKey, ActiveFlow>,
    finished: Vec<(u64, FlowRecord)>,
    next_seq: u64,
    latest: Option<Micros>,
    window: Option<MgmtWindow>,
    stats: EngineStats,
}

impl FlowTable {
    pub fn new(cfg: ExportConfig) -> Self {
        FlowTable {
            cfg,
            live: HashMap::new(),
            finished: Vec::new(),
            next_seq: 0,
            latest: None,
            window: None,
            stats: EngineStats::default(),
        }
    }

    pub fn config(&self) -> &ExportConfig {
        &self.cfg
    }

    pub fn stats(&self) -> EngineStats {
        self.stats
    }

    pub fn live_flows(&self) -> usize {
        self.live.len()
    }

    /// Latest packet timestamp seen so far.
    pub fn last_capture_ts(&self) -> Option<Micros> {
        self.latest
    }

    fn seq(&mut self) -> u64 {
        self.next_seq += 1;
        self.next_seq
    }

    pub fn assign(&mut self, pkt: &DecodedPacket) -> Result<AssignOutcome, EngineError> {
        if let Some(latest) = self.latest {
            if pkt.ts.0 + self.cfg.reorder_slack().0 < latest.0 {
                self.stats.out_of_order_skipped += 1;
                return Err(EngineError::NonMonotonicTimestamp { ts: pkt.ts, latest });
            }
            if pkt.ts < latest {
                self.stats.out_of_order_accepted += 1;
            }
        }
        let latest = self.latest.map_or(pkt.ts, |l| l.max(pkt.ts));
        self.latest = Some(latest);
        self.advance_windows(latest);
        self.stats.accepted_packets += 1;
        self.stats.accepted_bytes += u64::from(pkt.ip_bytes);
        if let Some(w) = self.window.as_mut() {
            w.counters.packets += 1;
            w.counters.bytes += u64::from(pkt.ip_bytes);
        }

        let (key, dir) = flow_key(pkt);
        let mut closed = Vec::new();
        let event = match self.live.remove(&key) {
            None => {
                let flow = self.open(key, dir.sender(), pkt.ts, None);
                self.live.insert(key, flow);
                FlowEvent::NewFlow
            }
            Some(flow) => {
                let idle_timeout = self.cfg.idle_timeout();
                if pkt.ts > flow.rec.ltime && pkt.ts.0 - flow.rec.ltime.0 > idle_timeout.0 {
                    let idle = pkt.ts.saturating_sub(flow.rec.ltime);
                    closed.push(self.close(flow, idle));
                    let fresh = self.open(key, dir.sender(), pkt.ts, None);
                    self.live.insert(key, fresh);
                    FlowEvent::IdleExpired
                } else {
                    let slice = pkt.ts.saturating_sub(flow.anchor).0 / self.cfg.interval().0;
                    let slice = u32::try_from(slice).unwrap_or(u32::MAX);
                    if slice > flow.rec.slice_index {
                        let idle = pkt.ts.saturating_sub(flow.rec.ltime);
                        let mut next = self.open(key, flow.rec.initiator, pkt.ts, Some(flow.rec.state));
                        next.anchor = flow.anchor;
                        next.rec.slice_index = slice;
                        next.tcp = flow.tcp;
                        next.tcp.syn_ts = None;
                        next.tcp.synack_ts = None;
                        closed.push(self.close(flow, idle));
                        self.live.insert(key, next);
                        FlowEvent::Sliced
                    } else {
                        self.live.insert(key, flow);
                        FlowEvent::Updated
                    }
                }
            }
        };

        let flow = self.live.get_mut(&key).expect("flow inserted above");
        let role = usize::from(dir.sender() != flow.rec.initiator);
        flow.update(pkt, role, event == FlowEvent::Updated);
        if flow.tcp.closed {
            let flow = self.live.remove(&key).expect("present");
            closed.push(self.close(flow, Micros::ZERO));
            return Ok(AssignOutcome { event: FlowEvent::TcpClosed, closed });
        }
        Ok(AssignOutcome { event, closed })
    }

    fn open(&mut self, key: FlowKey, initiator: Endpoint, ts: Micros, carried: Option<FlowState>) -> ActiveFlow {
        if let Some(w) = self.window.as_mut() {
            w.counters.flows += 1;
        }
        let mut rec = FlowRecord::new(key, initiator, ts);
        if let Some(state) = carried {
            rec.state = state;
        }
        ActiveFlow {
            rec,
            seq: self.seq(),
            anchor: ts,
            last_dir_ts: [None, None],
            last_ts: None,
            tcp: TcpTracker::default(),
        }
    }

    fn close(&mut self, flow: ActiveFlow, idle: Micros) -> FlowRecord {
        let mut rec = flow.rec;
        rec.seal(idle);
        self.finished.push((flow.seq, rec.clone()));
        rec
    }

    /// Emits management records for every window that ends at or before `now`.
    fn advance_windows(&mut self, now: Micros) {
        if !self.cfg.emit_management() {
            return;
        }
        let interval = self.cfg.interval();
        let w = self.window.get_or_insert(MgmtWindow { start: now, counters: WindowCounters::default() });
        let mut done = Vec::new();
        while now.0 >= w.start.0 + interval.0 {
            let end = Micros(w.start.0 + interval.0);
            done.push(make_management_record(w.start, end, w.counters));
            w.start = end;
            w.counters = WindowCounters::default();
        }
        for rec in done {
            let seq = self.seq();
            self.finished.push((seq, rec));
        }
    }

    /// Closes every live flow and returns all records of the capture ordered
    /// by (stime, key), creation order breaking ties.
    pub fn flush(mut self) -> Vec<FlowRecord> {
        let last = self.latest.unwrap_or(Micros::ZERO);
        let mut live: Vec<ActiveFlow> = self.live.drain().map(|(_, f)| f).collect();
        live.sort_by_key(|f| f.seq);
        for flow in live {
            let idle = last.saturating_sub(flow.rec.ltime);
            self.close(flow, idle);
        }
        if let Some(w) = self.window.take() {
            let seq = self.seq();
            self.finished.push((seq, make_management_record(w.start, last, w.counters)));
        }
        let mut out = self.finished;
        out.sort_by(|(sa, a), (sb, b)| (a.stime, a.key, sa).cmp(&(b.stime, b.key, sb)));
        out.into_iter().map(|(_, r)| r).collect()
    }
}

impl ActiveFlow {
    /// Folds one packet in. `role` is 0 for the initiator, 1 for the responder.
    fn update(&mut self, pkt: &DecodedPacket, role: usize, existing: bool) {
        let rec = &mut self.rec;
        rec.stime = rec.stime.min(pkt.ts);
        rec.ltime = rec.ltime.max(pkt.ts);
        if let Some(prev) = self.last_ts {
            rec.flow_iat.push(pkt.ts.saturating_sub(prev).0);
        }
        self.last_ts = Some(self.last_ts.map_or(pkt.ts, |t| t.max(pkt.ts)));

        let dir = if role == 0 { &mut rec.src } else { &mut rec.dst };
        if let Some(prev) = self.last_dir_ts[role] {
            dir.iat.push(pkt.ts.saturating_sub(prev).0);
        }
        self.last_dir_ts[role] = Some(self.last_dir_ts[role].map_or(pkt.ts, |t| t.max(pkt.ts)));
        dir.pkts += 1;
        dir.bytes += u64::from(pkt.ip_bytes);
        dir.app_bytes += u64::from(pkt.payload_bytes);
        dir.data_pkts += u64::from(pkt.payload_bytes > 0);
        dir.min_size = Some(dir.min_size.map_or(pkt.ip_bytes, |m| m.min(pkt.ip_bytes)));
        dir.max_size = dir.max_size.max(pkt.ip_bytes);
        dir.size_sq += u128::from(pkt.ip_bytes) * u128::from(pkt.ip_bytes);
        dir.ttl = dir.ttl.or(Some(pkt.ttl));
        dir.tos = dir.tos.or(Some(pkt.tos));
        dir.win = dir.win.or(pkt.tcp_window);
        dir.seq = dir.seq.or(pkt.tcp_seq);

        let Some(flags) = pkt.tcp_flags else { return };
        if pkt.proto != Protocol::Tcp {
            return;
        }
        dir.flags |= flags;
        dir.flag_counts.count(flags);
        self.track_tcp(pkt.ts, flags, role, existing);
    }

    fn track_tcp(&mut self, ts: Micros, flags: TcpFlags, role: usize, existing: bool) {
        let rec = &mut self.rec;
        let tcp = &mut self.tcp;
        let syn = flags.contains(TcpFlags::SYN);
        let ack = flags.contains(TcpFlags::ACK);

        if !existing && rec.pkts() == 1 && rec.slice_index == 0 {
            rec.state = if syn && !ack { FlowState::Req } else { FlowState::Con };
        }
        if syn && !ack && role == 0 {
            tcp.syn_ts.get_or_insert(ts);
        }
        if syn && ack && role == 1 && tcp.synack_ts.is_none() {
            if let Some(syn_ts) = tcp.syn_ts {
                rec.synack = Some(ts.saturating_sub(syn_ts));
            }
            tcp.synack_ts = Some(ts);
            if rec.state == FlowState::Req {
                rec.state = FlowState::Con;
            }
        } else if ack && !syn && role == 0 && rec.ackdat.is_none() {
            if let Some(synack_ts) = tcp.synack_ts {
                rec.ackdat = Some(ts.saturating_sub(synack_ts));
            }
        }

        if flags.contains(TcpFlags::RST) {
            rec.state = FlowState::Rst;
            tcp.closed = true;
            return;
        }
        // the last ACK, sent by the peer of whoever sent the second FIN
        if let Some(second) = tcp.second_fin {
            if ack && role != second {
                rec.state = FlowState::Fin;
                tcp.closed = true;
                return;
            }
        }
        if flags.contains(TcpFlags::FIN) {
            tcp.fin[role] = true;
            if tcp.fin[0] && tcp.fin[1] && tcp.second_fin.is_none() {
                tcp.second_fin = Some(role);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pcap::synth::SynthPacket;
    use crate::pcap::{decode_frame, LINKTYPE_ETHERNET};

    const C: &str = "10.0.0.1:1234";
    const S: &str = "10.0.0.2:80";
    const SYN: TcpFlags = TcpFlags::SYN;
    const ACK: TcpFlags = TcpFlags::ACK;
    const FIN: TcpFlags = TcpFlags::FIN;
    const RST: TcpFlags = TcpFlags::RST;
    const PSH: TcpFlags = TcpFlags::PSH;

    fn tcp(t: f64, from: &str, to: &str, flags: TcpFlags, payload: usize) -> DecodedPacket {
        let p = SynthPacket::tcp(from, to, flags).payload(payload).at_secs(t);
        decode_frame(LINKTYPE_ETHERNET, &p.ethernet_frame(), 0, p.ts).unwrap()
    }

    fn udp(t: f64, from: &str, to: &str) -> DecodedPacket {
        let p = SynthPacket::udp(from, to, 10).at_secs(t);
        decode_frame(LINKTYPE_ETHERNET, &p.ethernet_frame(), 0, p.ts).unwrap()
    }

    fn run(cfg: ExportConfig, pkts: &[DecodedPacket]) -> Vec<FlowRecord> {
        let mut t = FlowTable::new(cfg);
        for p in pkts {
            t.assign(p).unwrap();
        }
        t.flush().into_iter().filter(|r| !r.is_management).collect()
    }

    fn no_mgmt() -> ExportConfig {
        ExportConfig::default().with_management(false)
    }

    fn full_handshake() -> Vec<DecodedPacket> {
        vec![
            tcp(0.0, C, S, SYN, 0),
            tcp(0.1, S, C, SYN | ACK, 0),
            tcp(0.2, C, S, ACK, 0),
            tcp(1.0, C, S, PSH | ACK, 100),
            tcp(1.1, S, C, PSH | ACK, 500),
            tcp(2.0, C, S, FIN | ACK, 0),
            tcp(2.1, S, C, ACK, 0),
            tcp(2.2, S, C, FIN | ACK, 0),
            tcp(2.3, C, S, ACK, 0),
        ]
    }

    #[test]
    fn complete_connection_is_one_flow() {
        let recs = run(no_mgmt(), &full_handshake());
        assert_eq!(recs.len(), 1);
        let r = &recs[0];
        assert_eq!((r.spkts(), r.dpkts()), (5, 4));
        assert_eq!(r.tcp_state(), Some(FlowState::Fin));
        assert_eq!(r.saddr().to_string(), "10.0.0.1");
        assert_eq!(r.sport(), 1234);
        assert_eq!(r.synack, Some(Micros(100_000)));
        assert_eq!(r.ackdat, Some(Micros(100_000)));
        assert_eq!(r.dur(), Micros(2_300_000));
        assert_eq!(r.idle, Micros::ZERO);
        assert_eq!(r.src.app_bytes, 100);
        assert_eq!(r.flgs().to_string(), "FSPA");
    }

    #[test]
    fn lone_fin_keeps_flow_open() {
        let pkts = vec![
            tcp(0.0, C, S, SYN, 0),
            tcp(0.1, S, C, SYN | ACK, 0),
            tcp(0.2, C, S, ACK, 0),
            tcp(1.0, C, S, FIN | ACK, 0),
            tcp(1.1, S, C, ACK, 10),
            tcp(1.2, S, C, ACK, 10),
            tcp(1.3, S, C, ACK, 10),
            tcp(2.0, S, C, FIN | ACK, 0),
            tcp(2.1, C, S, ACK, 0),
        ];
        let recs = run(no_mgmt(), &pkts);
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].pkts(), 9);
        assert_eq!(recs[0].state, FlowState::Fin);
    }

    #[test]
    fn rst_closes_and_syn_reopens() {
        let mut pkts = full_handshake()[..5].to_vec();
        pkts.push(tcp(10.0, C, S, RST, 0));
        pkts.push(tcp(12.0, C, S, SYN, 0));
        let recs = run(no_mgmt(), &pkts);
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].state, FlowState::Rst);
        assert_eq!(recs[0].pkts(), 6);
        assert_eq!(recs[1].state, FlowState::Req);
        assert_eq!(recs[1].stime, Micros::from_secs(12));
    }

    #[test]
    fn responder_first_reply_does_not_swap_direction() {
        let pkts = vec![tcp(0.0, C, S, SYN, 0), tcp(5.0, S, C, SYN | ACK, 0), tcp(5.1, C, S, ACK, 0)];
        let recs = run(no_mgmt(), &pkts);
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].saddr().to_string(), "10.0.0.1");
        assert_eq!((recs[0].spkts(), recs[0].dpkts()), (2, 1));
    }

    #[test]
    fn udp_slices_every_interval() {
        let pkts: Vec<_> = (0..15).map(|i| udp(f64::from(i) * 10.0, "10.0.0.1:5000", "10.0.0.2:53")).collect();
        let recs = run(no_mgmt(), &pkts);
        assert_eq!(recs.iter().map(|r| r.slice_index).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(recs.iter().map(|r| r.spkts()).collect::<Vec<_>>(), vec![6, 6, 3]);
        assert!(recs.iter().all(|r| r.state == FlowState::Int));
        assert_eq!(recs[1].stime, Micros::from_secs(60));
    }

    #[test]
    fn idle_timeout_starts_new_flow() {
        let cfg = no_mgmt().with_idle_timeout(5.0).unwrap();
        let pkts = [
            udp(0.0, "10.0.0.1:5000", "10.0.0.2:53"),
            udp(1.0, "10.0.0.2:53", "10.0.0.1:5000"),
            udp(10.0, "10.0.0.2:53", "10.0.0.1:5000"),
        ];
        let mut t = FlowTable::new(cfg);
        assert_eq!(t.assign(&pkts[0]).unwrap().event, FlowEvent::NewFlow);
        assert_eq!(t.assign(&pkts[1]).unwrap().event, FlowEvent::Updated);
        let out = t.assign(&pkts[2]).unwrap();
        assert_eq!(out.event, FlowEvent::IdleExpired);
        assert_eq!(out.closed[0].idle, Micros::from_secs(9));
        assert_eq!(out.closed[0].state, FlowState::Con);
        let recs = t.flush();
        assert_eq!(recs.len(), 2);
        // the new flow's source is the sender of its own first packet
        assert_eq!(recs[1].saddr().to_string(), "10.0.0.2");
        assert_eq!(recs[1].state, FlowState::Int);
    }

    #[test]
    fn out_of_order_within_slack() {
        let pkts = [
            udp(10.0, "10.0.0.1:5000", "10.0.0.2:53"),
            udp(9.5, "10.0.0.1:5000", "10.0.0.2:53"),
            udp(7.0, "10.0.0.1:5000", "10.0.0.2:53"),
        ];
        let mut t = FlowTable::new(no_mgmt());
        t.assign(&pkts[0]).unwrap();
        t.assign(&pkts[1]).unwrap();
        assert!(matches!(t.assign(&pkts[2]), Err(EngineError::NonMonotonicTimestamp { .. })));
        assert_eq!(t.stats().out_of_order_skipped, 1);
        assert_eq!(t.stats().out_of_order_accepted, 1);
        let recs = t.flush();
        assert_eq!(recs[0].stime, Micros(9_500_000));
        assert_eq!(recs[0].ltime, Micros(10_000_000));
        assert_eq!(recs[0].pkts(), 2);
    }

    #[test]
    fn midstream_tcp_is_connected() {
        let recs = run(no_mgmt(), &[tcp(0.0, C, S, PSH | ACK, 10)]);
        assert_eq!(recs[0].state, FlowState::Con);
        assert_eq!(recs[0].synack, None);
    }

    #[test]
    fn flush_orders_by_start_and_sets_idle() {
        let pkts = vec![
            udp(3.0, "10.0.0.9:1", "10.0.0.2:53"),
            udp(5.0, "10.0.0.1:1", "10.0.0.2:53"),
            udp(10.0, "10.0.0.9:1", "10.0.0.2:53"),
        ];
        let recs = run(no_mgmt(), &pkts);
        assert_eq!(recs[0].stime, Micros::from_secs(3));
        assert_eq!(recs[1].stime, Micros::from_secs(5));
        assert_eq!(recs[1].idle, Micros::from_secs(5));
        assert_eq!(recs[0].idle, Micros::ZERO);
    }

    #[test]
    fn flush_of_empty_table() {
        assert!(FlowTable::new(ExportConfig::default()).flush().is_empty());
    }

    #[test]
    fn management_windows() {
        let pkts: Vec<_> = (0..15).map(|i| udp(f64::from(i) * 10.0, "10.0.0.1:5000", "10.0.0.2:53")).collect();
        let mut t = FlowTable::new(ExportConfig::default());
        for p in &pkts {
            t.assign(p).unwrap();
        }
        let recs = t.flush();
        let mgmt: Vec<_> = recs.iter().filter(|r| r.is_management).collect();
        assert_eq!(mgmt.len(), 3);
        assert_eq!(mgmt.iter().map(|r| r.src.pkts).collect::<Vec<_>>(), vec![6, 6, 3]);
        assert_eq!(mgmt.iter().map(|r| r.trans).collect::<Vec<_>>(), vec![1, 1, 1]);
        assert_eq!(mgmt[2].ltime, Micros::from_secs(140));
        assert!(mgmt.iter().all(|r| r.key == FlowKey::zeroed()));
    }

    #[test]
    fn management_record_counters() {
        let empty = make_management_record(Micros(0), Micros(60), WindowCounters::default());
        assert!(empty.is_management);
        assert_eq!((empty.src.pkts, empty.src.bytes, empty.trans), (0, 0, 0));
        let r = make_management_record(Micros(0), Micros(60), WindowCounters { packets: 10, bytes: 1500, flows: 2 });
        assert_eq!((r.src.pkts, r.src.bytes), (10, 1500));
    }
}
