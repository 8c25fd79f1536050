use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use super::{LINKTYPE_ETHERNET, LINKTYPE_RAW};
use crate::types::{Micros, Protocol, TcpFlags};

const ETHERTYPE_IPV4: u16 = 0x0800;
const ETHERTYPE_IPV6: u16 = 0x86dd;
const ETHERTYPE_VLAN: u16 = 0x8100;
const ETHERTYPE_QINQ: u16 = 0x88a8;

/// Why a record did not produce a packet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SkipReason {
    /// ARP, LLDP and every other non-IP ethertype.
    NonIp,
    /// Stacked VLAN tags and other encapsulations outside the supported set.
    Unsupported,
    /// Headers cut short or internally inconsistent.
    Malformed,
}

/// One captured packet reduced to the fields flow aggregation needs.
#[derive(Clone, Debug, PartialEq)]
pub struct DecodedPacket {
    pub ts: Micros,
    pub src_addr: IpAddr,
    pub dst_addr: IpAddr,
    /// For ICMP this is the message type.
    pub src_port: u16,
    /// For ICMP this is the message code.
    pub dst_port: u16,
    pub proto: Protocol,
    /// IP total length (header plus payload) as on the wire.
    pub ip_bytes: u32,
    /// Transport payload length.
    pub payload_bytes: u32,
    /// Present iff `proto` is TCP. Non-first fragments carry an empty set.
    pub tcp_flags: Option<TcpFlags>,
    pub ttl: u8,
    pub tos: u8,
    pub tcp_window: Option<u16>,
    pub tcp_seq: Option<u32>,
    /// Non-first IP fragment; ports are zero.
    pub fragment: bool,
}

/// ICMP carries no ports; type and code stand in so that every packet has a
/// complete flow key.
pub fn decode_icmp_ports(icmp_type: u8, icmp_code: u8) -> (u16, u16) {
    (u16::from(icmp_type), u16::from(icmp_code))
}

fn be16(b: &[u8], at: usize) -> u16 {
    u16::from_be_bytes([b[at], b[at + 1]])
}

fn be32(b: &[u8], at: usize) -> u32 {
    u32::from_be_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Decodes one link-layer frame. `origlen` is the on-wire frame length from
/// the record header and is used when the IP length field is unusable.
pub fn decode_frame(linktype: u32, frame: &[u8], origlen: u32, ts: Micros) -> Result<DecodedPacket, SkipReason> {
    match linktype {
        LINKTYPE_ETHERNET => {
            if frame.len() < 14 {
                return Err(SkipReason::Malformed);
            }
            let mut ethertype = be16(frame, 12);
            let mut offset = 14;
            if ethertype == ETHERTYPE_VLAN || ethertype == ETHERTYPE_QINQ {
                if frame.len() < 18 {
                    return Err(SkipReason::Malformed);
                }
                ethertype = be16(frame, 16);
                offset = 18;
                if ethertype == ETHERTYPE_VLAN || ethertype == ETHERTYPE_QINQ {
                    return Err(SkipReason::Unsupported);
                }
            }
            let wire = origlen.saturating_sub(offset as u32);
            match ethertype {
                ETHERTYPE_IPV4 => decode_ipv4(&frame[offset..], wire, ts),
                ETHERTYPE_IPV6 => decode_ipv6(&frame[offset..], wire, ts),
                _ => Err(SkipReason::NonIp),
            }
        }
        LINKTYPE_RAW => match frame.first().map(|b| b >> 4) {
            Some(4) => decode_ipv4(frame, origlen, ts),
            Some(6) => decode_ipv6(frame, origlen, ts),
            Some(_) => Err(SkipReason::NonIp),
            None => Err(SkipReason::Malformed),
        },
        _ => Err(SkipReason::Unsupported),
    }
}

fn decode_ipv4(ip: &[u8], wire_len: u32, ts: Micros) -> Result<DecodedPacket, SkipReason> {
    if ip.len() < 20 || ip[0] >> 4 != 4 {
        return Err(SkipReason::Malformed);
    }
    let ihl = usize::from(ip[0] & 0x0f) * 4;
    if ihl < 20 || ip.len() < ihl {
        return Err(SkipReason::Malformed);
    }
    let tos = ip[1];
    let total_len = be16(ip, 2);
    // a zero length field shows up with segmentation offload
    let ip_bytes = if total_len == 0 { wire_len } else { u32::from(total_len) };
    if (ip_bytes as usize) < ihl {
        return Err(SkipReason::Malformed);
    }
    let frag_offset = be16(ip, 6) & 0x1fff;
    let ttl = ip[8];
    let proto = Protocol::from_number(ip[9]);
    let src = IpAddr::V4(Ipv4Addr::new(ip[12], ip[13], ip[14], ip[15]));
    let dst = IpAddr::V4(Ipv4Addr::new(ip[16], ip[17], ip[18], ip[19]));
    let end = ip.len().min(ip_bytes as usize);
    let l4 = &ip[ihl..end.max(ihl)];
    let header = L3 { src, dst, proto, ip_bytes, l3_header: ihl as u32, ttl, tos, ts };
    header.finish(l4, frag_offset != 0)
}

fn decode_ipv6(ip: &[u8], wire_len: u32, ts: Micros) -> Result<DecodedPacket, SkipReason> {
    if ip.len() < 40 || ip[0] >> 4 != 6 {
        return Err(SkipReason::Malformed);
    }
    let tos = ((be16(ip, 0) >> 4) & 0xff) as u8;
    let payload_len = be16(ip, 4);
    let ip_bytes = if payload_len == 0 { wire_len.max(40) } else { 40 + u32::from(payload_len) };
    let mut next = ip[6];
    let ttl = ip[7];
    let mut src = [0u8; 16];
    let mut dst = [0u8; 16];
    src.copy_from_slice(&ip[8..24]);
    dst.copy_from_slice(&ip[24..40]);

    let mut offset = 40usize;
    let mut fragment = false;
    // hop-by-hop, routing, fragment, destination options, AH
    for _ in 0..8 {
        let rest = &ip[offset.min(ip.len())..];
        let ext_len = match next {
            0 | 43 | 60 => {
                if rest.len() < 2 {
                    return Err(SkipReason::Malformed);
                }
                (usize::from(rest[1]) + 1) * 8
            }
            44 => {
                if rest.len() < 8 {
                    return Err(SkipReason::Malformed);
                }
                fragment = be16(rest, 2) >> 3 != 0;
                8
            }
            51 => {
                if rest.len() < 2 {
                    return Err(SkipReason::Malformed);
                }
                (usize::from(rest[1]) + 2) * 4
            }
            _ => break,
        };
        next = rest[0];
        offset += ext_len;
        if fragment {
            break;
        }
    }
    if offset as u32 > ip_bytes {
        return Err(SkipReason::Malformed);
    }
    let end = ip.len().min(ip_bytes as usize);
    let l4 = if offset <= end { &ip[offset..end] } else { &[][..] };
    let header = L3 {
        src: IpAddr::V6(Ipv6Addr::from(src)),
        dst: IpAddr::V6(Ipv6Addr::from(dst)),
        proto: Protocol::from_number(next),
        ip_bytes,
        l3_header: offset as u32,
        ttl,
        tos,
        ts,
    };
    header.finish(l4, fragment)
}

struct L3 {
    src: IpAddr,
    dst: IpAddr,
    proto: Protocol,
    ip_bytes: u32,
    l3_header: u32,
    ttl: u8,
    tos: u8,
    ts: Micros,
}

impl L3 {
    fn packet(&self, ports: (u16, u16), l4_header: u32) -> DecodedPacket {
        DecodedPacket {
            ts: self.ts,
            src_addr: self.src,
            dst_addr: self.dst,
            src_port: ports.0,
            dst_port: ports.1,
            proto: self.proto,
            ip_bytes: self.ip_bytes,
            payload_bytes: self.ip_bytes.saturating_sub(self.l3_header + l4_header),
            tcp_flags: None,
            ttl: self.ttl,
            tos: self.tos,
            tcp_window: None,
            tcp_seq: None,
            fragment: false,
        }
    }

    fn finish(self, l4: &[u8], fragment: bool) -> Result<DecodedPacket, SkipReason> {
        if fragment {
            let mut p = self.packet((0, 0), 0);
            p.fragment = true;
            if self.proto == Protocol::Tcp {
                p.tcp_flags = Some(TcpFlags::empty());
            }
            return Ok(p);
        }
        match self.proto {
            Protocol::Tcp => {
                if l4.len() < 20 {
                    return Err(SkipReason::Malformed);
                }
                let doff = u32::from(l4[12] >> 4) * 4;
                if doff < 20 {
                    return Err(SkipReason::Malformed);
                }
                let mut p = self.packet((be16(l4, 0), be16(l4, 2)), doff);
                p.tcp_seq = Some(be32(l4, 4));
                p.tcp_flags = Some(TcpFlags::from_bits(l4[13]));
                p.tcp_window = Some(be16(l4, 14));
                Ok(p)
            }
            Protocol::Udp => {
                if l4.len() < 8 {
                    return Err(SkipReason::Malformed);
                }
                Ok(self.packet((be16(l4, 0), be16(l4, 2)), 8))
            }
            Protocol::Icmp | Protocol::Icmpv6 => {
                if l4.len() < 2 {
                    return Err(SkipReason::Malformed);
                }
                Ok(self.packet(decode_icmp_ports(l4[0], l4[1]), 8))
            }
            Protocol::Other(_) => Ok(self.packet((0, 0), 0)),
        }
    }
}
