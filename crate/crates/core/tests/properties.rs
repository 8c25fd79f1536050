mod common;

use std::io::Cursor;

use proptest::prelude::*;

use common::*;
use hera::dataset::{build_dataset, cluster, select_feature_set, DatasetOptions, FeatureSelection, Mode, Preset};
use hera::flow::{read_hera_from, write_hera_to, ExportConfig, FlowRecord, FlowTable, HeraHeader};
use hera::label::{label_rows, FlowRow, GroundTruthEntry, LabelOptions};
use hera::pcap::synth::{capture_bytes, SynthPacket};
use hera::pcap::{decode_frame, CaptureReader, Record, LINKTYPE_ETHERNET};
use hera::{Micros, TcpFlags};

fn arb_packet() -> impl Strategy<Value = (u32, u8, u8, u8, u16, bool, u8)> {
    // (gap_ms, client, server, kind, payload, forward, flag index)
    (0u32..3000, 0u8..6, 0u8..3, 0u8..3, 0u16..1400, any::<bool>(), 0u8..7)
}

fn build(spec: &[(u32, u8, u8, u8, u16, bool, u8)]) -> Vec<SynthPacket> {
    let flags = [
        TcpFlags::SYN,
        TcpFlags::SYN | TcpFlags::ACK,
        TcpFlags::ACK,
        TcpFlags::PSH | TcpFlags::ACK,
        TcpFlags::FIN | TcpFlags::ACK,
        TcpFlags::RST,
        TcpFlags::ACK,
    ];
    let mut t = 0u64;
    spec.iter()
        .map(|&(gap, c, s, kind, payload, fwd, f)| {
            t += u64::from(gap) * 1000;
            let client = format!("10.0.0.{}:{}", c + 1, 40000 + u16::from(c));
            let server = format!("10.0.1.{}:{}", s + 1, 80);
            let (from, to) = if fwd { (client, server) } else { (server, client) };
            let p = match kind {
                0 => SynthPacket::tcp(&from, &to, flags[usize::from(f)]).payload(usize::from(payload)),
                1 => SynthPacket::udp(&from, &to, usize::from(payload)),
                _ => {
                    let h = |e: &str| e.rsplit_once(':').unwrap().0.to_string();
                    SynthPacket::icmp(&h(&from), &h(&to), if fwd { 8 } else { 0 }, 0)
                }
            };
            p.at(Micros(t))
        })
        .collect()
}

fn run_engine(packets: &[SynthPacket], interval: f64) -> Vec<FlowRecord> {
    let mut table = FlowTable::new(ExportConfig::new(interval).unwrap());
    for p in packets {
        let d = decode_frame(LINKTYPE_ETHERNET, &p.ethernet_frame(), 0, p.ts).unwrap();
        table.assign(&d).unwrap();
    }
    table.flush()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn engine_agrees_with_oracle(spec in prop::collection::vec(arb_packet(), 1..120), interval in 1u32..20) {
        let packets = build(&spec);
        let interval = f64::from(interval);
        prop_assert_eq!(summarize(&run_engine(&packets, interval)), oracle(&packets, interval, None, 1.0));
    }

    #[test]
    fn decoding_is_total_and_prefix_safe(spec in prop::collection::vec(arb_packet(), 0..40), cut in any::<prop::sample::Index>()) {
        let packets = build(&spec);
        let bytes = capture_bytes(&packets);
        let mut r = CaptureReader::new(Cursor::new(&bytes)).unwrap();
        let mut all = Vec::new();
        while let Some(rec) = r.next_record().unwrap() {
            match rec {
                Record::Packet(p) => all.push(p),
                Record::Skipped(_) => {}
            }
        }
        prop_assert_eq!(all.len() as u64 + r.skipped().total(), r.records_read());
        prop_assert_eq!(all.len(), packets.len());

        // cut at a record boundary
        let keep = if packets.is_empty() { 0 } else { cut.index(packets.len() + 1) };
        let prefix = capture_bytes(&packets[..keep]);
        prop_assert!(bytes.starts_with(&prefix));
        let mut r = CaptureReader::new(Cursor::new(&prefix)).unwrap();
        let mut n = 0;
        while let Some(rec) = r.next_record().unwrap() {
            if let Record::Packet(p) = rec {
                prop_assert_eq!(&p, &all[n]);
                n += 1;
            }
        }
        prop_assert_eq!(n, keep);
    }

    #[test]
    fn hera_round_trip(spec in prop::collection::vec(arb_packet(), 0..80)) {
        let records = run_engine(&build(&spec), 5.0);
        let header = HeraHeader::new("2015-02-18T00:00:00Z", vec!["x.pcap".into()], ExportConfig::new(5.0).unwrap());
        let mut buf = Vec::new();
        write_hera_to(&mut buf, &header, &records).unwrap();
        let back = read_hera_from(buf.as_slice()).unwrap();
        prop_assert_eq!(&back.header, &header);
        prop_assert_eq!(&back.records, &records);
        let mut again = Vec::new();
        write_hera_to(&mut again, &back.header, &back.records).unwrap();
        prop_assert_eq!(again, buf);
    }

    #[test]
    fn cluster_conserves_and_is_idempotent(spec in prop::collection::vec(arb_packet(), 0..150)) {
        let records = run_engine(&build(&spec), 2.0);
        let total = |rs: &[FlowRecord]| rs.iter().filter(|r| !r.is_management).map(|r| (r.pkts(), r.bytes(), r.trans)).fold((0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
        let once = cluster(&records);
        prop_assert_eq!(total(&once), total(&records));
        prop_assert_eq!(cluster(&once), once.clone());
        let mut keys: Vec<_> = once.iter().filter(|r| !r.is_management).map(|r| r.key).collect();
        let n = keys.len();
        keys.sort();
        keys.dedup();
        prop_assert_eq!(keys.len(), n);
    }

    #[test]
    fn stats_match_rows(spec in prop::collection::vec(arb_packet(), 0..100), ra in any::<bool>(), keep in any::<bool>()) {
        let records = run_engine(&build(&spec), 3.0);
        let opts = DatasetOptions {
            features: select_feature_set(&FeatureSelection::Preset(Preset::All)).unwrap(),
            mode: if ra { Mode::Ra } else { Mode::Racluster },
            keep_management: keep,
            window: 10,
        };
        let ds = build_dataset(&records, &opts).unwrap();
        prop_assert_eq!(ds.rows.len() as u64, ds.stats.records);
        let pkts = ds.features.position("pkts").unwrap();
        let mgmt = ds.features.position("mgmt").unwrap();
        let mut sum = 0;
        for row in &ds.rows {
            if row[mgmt].as_ref().map(|v| v.to_string()) == Some("0".into()) {
                sum += row[pkts].as_ref().unwrap().to_string().parse::<u64>().unwrap();
            }
        }
        prop_assert_eq!(sum, ds.stats.packets);
        for (i, row) in ds.rows.iter().enumerate() {
            prop_assert_eq!(row[ds.features.position("rank").unwrap()].as_ref().unwrap().to_string(), i.to_string());
        }
    }

    #[test]
    fn prefilter_never_changes_labels(
        rows in prop::collection::vec((0u64..1000, 0u64..50, 0u8..4, 0u8..4), 0..60),
        entries in prop::collection::vec((0u64..1100, 0u64..100, prop::option::of(0u8..4), 0usize..3), 0..30),
        bidi in any::<bool>(),
    ) {
        let ip = |i: u8| format!("10.0.0.{i}").parse().unwrap();
        let rows: Vec<FlowRow> = rows.iter().map(|&(s, d, a, b)| FlowRow {
            stime: Micros::from_secs(s), ltime: Micros::from_secs(s + d), proto: "tcp".into(),
            saddr: ip(a), sport: 1, daddr: ip(b), dport: 2,
        }).collect();
        let entries: Vec<GroundTruthEntry> = entries.iter().map(|&(s, d, dst, l)| GroundTruthEntry {
            start_time: Micros::from_secs(s), last_time: Micros::from_secs(s + d), proto: None,
            src_addr: None, sport: None, dst_addr: dst.map(ip), dport: None, label: ["a", "b", "c"][l].into(),
        }).collect();
        let on = label_rows(&rows, &entries, &LabelOptions { bidirectional: bidi, prefilter: true, ..Default::default() });
        let off = label_rows(&rows, &entries, &LabelOptions { bidirectional: bidi, prefilter: false, ..Default::default() });
        prop_assert_eq!(on, off);
    }

    #[test]
    fn micros_text_round_trip(us in any::<u64>().prop_map(|v| v / 2)) {
        let m = Micros(us);
        prop_assert_eq!(Micros::parse_secs(&m.to_string()), Some(m));
    }
}
