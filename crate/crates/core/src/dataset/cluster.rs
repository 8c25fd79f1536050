//! Merging every record of a conversation into one row.

use std::collections::HashMap;

use crate::flow::{FlowKey, FlowRecord};

/// Folds `other` into `acc`. `other` is re-oriented first when it was opened
/// by the opposite endpoint, so `acc`'s source stays the source.
fn absorb(acc: &mut FlowRecord, other: &FlowRecord) {
    let (src, dst) = if other.initiator == acc.initiator { (&other.src, &other.dst) } else { (&other.dst, &other.src) };
    acc.src.merge(src);
    acc.dst.merge(dst);
    acc.flow_iat.merge(&other.flow_iat);

    if other.ltime >= acc.ltime {
        acc.state = other.state;
        acc.idle = other.idle;
    }
    acc.stime = acc.stime.min(other.stime);
    acc.ltime = acc.ltime.max(other.ltime);
    acc.slice_index = acc.slice_index.min(other.slice_index);
    acc.trans += other.trans;
    acc.runtime = acc.runtime + other.runtime;
    acc.durations.min = acc.durations.min.min(other.durations.min);
    acc.durations.max = acc.durations.max.max(other.durations.max);
    acc.durations.sum_sq += other.durations.sum_sq;
    acc.synack = acc.synack.or(other.synack);
    acc.ackdat = acc.ackdat.or(other.ackdat);
    for kv in &other.extra {
        if !acc.extra.iter().any(|(k, _)| *k == kv.0) {
            acc.extra.push(kv.clone());
        }
    }
}

/// Merges records sharing a canonical key into one record per key.
///
/// The merged record keeps the source of the earliest constituent. State
/// and idle come from the constituent that ended last. Management records
/// pass through untouched. Output is ordered by start time, then key.
pub fn cluster(records: &[FlowRecord]) -> Vec<FlowRecord> {
    let mut out: Vec<FlowRecord> = Vec::new();
    let mut slot: HashMap<FlowKey, usize> = HashMap::new();

    let mut order: Vec<&FlowRecord> = records.iter().collect();
    order.sort_by_key(|r| r.stime);

    for r in order {
        if r.is_management {
            out.push(r.clone());
            continue;
        }
        match slot.get(&r.key) {
            Some(&i) => absorb(&mut out[i], r),
            None => {
                slot.insert(r.key, out.len());
                out.push(r.clone());
            }
        }
    }
    out.sort_by_key(|r| (r.stime, r.key));
    out
}
