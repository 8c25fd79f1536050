//! Connection-window counts: for each flow, how many of the last `W` flows
//! (ordered by last time, the flow itself included) share its service and
//! source address (`Ssaddr`) or its service and destination address
//! (`Sdaddr`).

use std::collections::{HashMap, VecDeque};
use std::net::IpAddr;

use super::service_of;
use crate::flow::FlowRecord;

pub const DEFAULT_WINDOW: usize = 100;

/// Counts for `current` against an explicit window of flows.
pub fn compute_connection_counts(window: &[&FlowRecord], current: &FlowRecord) -> (u64, u64) {
    let svc = service_of(current);
    let same_src = window.iter().filter(|r| service_of(r) == svc && r.saddr() == current.saddr()).count();
    let same_dst = window.iter().filter(|r| service_of(r) == svc && r.daddr() == current.daddr()).count();
    (same_src as u64, same_dst as u64)
}

type Tally = HashMap<(&'static str, IpAddr), u64>;

fn bump(t: &mut Tally, k: (&'static str, IpAddr), up: bool) {
    if up {
        *t.entry(k).or_default() += 1;
    } else if let Some(v) = t.get_mut(&k) {
        *v -= 1;
        if *v == 0 {
            t.remove(&k);
        }
    }
}

/// `(Ssaddr, Sdaddr)` for each record, aligned with `records`. Management
/// records get `None` and do not occupy window slots. Ties in last time
/// keep input order.
///
/// # Panics
///
/// If `window` is zero.
pub fn connection_counts(records: &[FlowRecord], window: usize) -> Vec<Option<(u64, u64)>> {
    assert!(window >= 1, "connection window must hold at least one flow");
    let mut order: Vec<usize> = (0..records.len()).filter(|&i| !records[i].is_management).collect();
    order.sort_by_key(|&i| records[i].ltime);

    let mut out = vec![None; records.len()];
    let mut live: VecDeque<(&'static str, IpAddr, IpAddr)> = VecDeque::with_capacity(window + 1);
    let mut by_src = Tally::new();
    let mut by_dst = Tally::new();

    for i in order {
        let r = &records[i];
        let entry = (service_of(r), r.saddr(), r.daddr());
        live.push_back(entry);
        bump(&mut by_src, (entry.0, entry.1), true);
        bump(&mut by_dst, (entry.0, entry.2), true);
        if live.len() > window {
            let (svc, s, d) = live.pop_front().expect("non-empty");
            bump(&mut by_src, (svc, s), false);
            bump(&mut by_dst, (svc, d), false);
        }
        out[i] = Some((by_src[&(entry.0, entry.1)], by_dst[&(entry.0, entry.2)]));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::FlowKey;
    use crate::types::{Micros, Protocol};

    fn flow(src: &str, dst: &str, dport: u16, ltime: u64) -> FlowRecord {
        let (key, dir) = FlowKey::canonical(src.parse().unwrap(), 40000, dst.parse().unwrap(), dport, Protocol::Tcp);
        let mut r = FlowRecord::new(key, dir.sender(), Micros(ltime));
        r.ltime = Micros(ltime);
        r
    }

    #[test]
    fn window_of_two() {
        let recs = vec![
            flow("10.0.0.1", "10.0.0.9", 80, 1),
            flow("10.0.0.1", "10.0.0.9", 80, 2),
            flow("10.0.0.1", "10.0.0.8", 80, 3),
            flow("10.0.0.1", "10.0.0.9", 22, 4),
        ];
        let c = connection_counts(&recs, 2);
        assert_eq!(c, vec![Some((1, 1)), Some((2, 2)), Some((2, 1)), Some((1, 1))]);
    }

    #[test]
    fn matches_direct_window() {
        let recs: Vec<_> = (0..30)
            .map(|i| {
                flow(&format!("10.0.0.{}", i % 3), &format!("10.0.1.{}", i % 4), [80, 22][i % 2], (i * 7 % 11) as u64)
            })
            .collect();
        for w in [1, 3, 10] {
            let fast = connection_counts(&recs, w);
            let mut order: Vec<usize> = (0..recs.len()).collect();
            order.sort_by_key(|&i| recs[i].ltime);
            for (pos, &i) in order.iter().enumerate() {
                let lo = (pos + 1).saturating_sub(w);
                let win: Vec<&FlowRecord> = order[lo..=pos].iter().map(|&j| &recs[j]).collect();
                assert_eq!(fast[i], Some(compute_connection_counts(&win, &recs[i])));
            }
        }
    }
}
