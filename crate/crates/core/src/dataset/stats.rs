use std::collections::BTreeMap;
use std::fmt;

use crate::flow::FlowRecord;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ProtoTotals {
    pub flows: u64,
    pub packets: u64,
    pub bytes: u64,
}

/// Totals over a set of records. Packet and byte totals cover flow records
/// only; management records are counted separately.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StatsReport {
    pub records: u64,
    pub flows: u64,
    pub packets: u64,
    pub bytes: u64,
    pub management_records: u64,
    pub per_proto: BTreeMap<String, ProtoTotals>,
}

impl StatsReport {
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a FlowRecord>) -> StatsReport {
        let mut s = StatsReport::default();
        for r in records {
            s.records += 1;
            if r.is_management {
                s.management_records += 1;
                continue;
            }
            s.flows += 1;
            s.packets += r.pkts();
            s.bytes += r.bytes();
            let p = s.per_proto.entry(r.proto().to_string()).or_default();
            p.flows += 1;
            p.packets += r.pkts();
            p.bytes += r.bytes();
        }
        s
    }
}

/// One `name: value` pair per line.
impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "records: {}", self.records)?;
        writeln!(f, "flows: {}", self.flows)?;
        writeln!(f, "packets: {}", self.packets)?;
        writeln!(f, "bytes: {}", self.bytes)?;
        writeln!(f, "management_records: {}", self.management_records)?;
        for (proto, t) in &self.per_proto {
            writeln!(f, "{proto}.flows: {}", t.flows)?;
            writeln!(f, "{proto}.packets: {}", t.packets)?;
            writeln!(f, "{proto}.bytes: {}", t.bytes)?;
        }
        Ok(())
    }
}
