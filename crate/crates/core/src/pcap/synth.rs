//! Synthetic packet construction and a classic-PCAP writer.
//!
//! Used to build hand-crafted captures for tests and fixtures. Checksums are
//! left at zero; the decoder never validates them.

use std::io::{self, Write};
use std::net::{IpAddr, SocketAddr};

use super::{LINKTYPE_ETHERNET, LINKTYPE_RAW};
use crate::types::{Micros, Protocol, TcpFlags};

#[derive(Clone, Debug, PartialEq)]
pub struct SynthPacket {
    pub ts: Micros,
    pub src: IpAddr,
    pub dst: IpAddr,
    pub sport: u16,
    pub dport: u16,
    pub proto: Protocol,
    pub flags: TcpFlags,
    pub payload_len: usize,
    pub ttl: u8,
    /// Fragment offset in 8-byte units; non-zero builds a non-first fragment.
    pub frag_offset: u16,
}

fn sock(s: &str) -> SocketAddr {
    s.parse().unwrap_or_else(|_| panic!("bad socket address {s:?}"))
}

impl SynthPacket {
    pub fn tcp(src: &str, dst: &str, flags: TcpFlags) -> Self {
        let (s, d) = (sock(src), sock(dst));
        SynthPacket {
            ts: Micros::ZERO,
            src: s.ip(),
            dst: d.ip(),
            sport: s.port(),
            dport: d.port(),
            proto: Protocol::Tcp,
            flags,
            payload_len: 0,
            ttl: 64,
            frag_offset: 0,
        }
    }

    pub fn udp(src: &str, dst: &str, payload_len: usize) -> Self {
        SynthPacket {
            proto: Protocol::Udp,
            flags: TcpFlags::empty(),
            payload_len,
            ..Self::tcp(src, dst, TcpFlags::empty())
        }
    }

    pub fn icmp(src: &str, dst: &str, icmp_type: u8, icmp_code: u8) -> Self {
        let src: IpAddr = src.parse().expect("bad address");
        let dst: IpAddr = dst.parse().expect("bad address");
        let proto = if src.is_ipv6() { Protocol::Icmpv6 } else { Protocol::Icmp };
        SynthPacket {
            ts: Micros::ZERO,
            src,
            dst,
            sport: u16::from(icmp_type),
            dport: u16::from(icmp_code),
            proto,
            flags: TcpFlags::empty(),
            payload_len: 56,
            ttl: 64,
            frag_offset: 0,
        }
    }

    pub fn at(mut self, ts: Micros) -> Self {
        self.ts = ts;
        self
    }

    pub fn at_secs(self, secs: f64) -> Self {
        self.at(Micros::from_secs_f64(secs).expect("non-negative time"))
    }

    pub fn payload(mut self, len: usize) -> Self {
        self.payload_len = len;
        self
    }

    pub fn ttl(mut self, ttl: u8) -> Self {
        self.ttl = ttl;
        self
    }

    pub fn fragment(mut self, offset_units: u16) -> Self {
        self.frag_offset = offset_units;
        self
    }

    fn transport(&self) -> Vec<u8> {
        if self.frag_offset != 0 {
            return vec![0u8; self.payload_len];
        }
        let mut t = Vec::new();
        match self.proto {
            Protocol::Tcp => {
                t.extend(self.sport.to_be_bytes());
                t.extend(self.dport.to_be_bytes());
                t.extend(1000u32.to_be_bytes());
                t.extend(0u32.to_be_bytes());
                t.push(0x50);
                t.push(self.flags.bits());
                t.extend(8192u16.to_be_bytes());
                t.extend([0, 0, 0, 0]);
            }
            Protocol::Udp => {
                t.extend(self.sport.to_be_bytes());
                t.extend(self.dport.to_be_bytes());
                t.extend(((8 + self.payload_len) as u16).to_be_bytes());
                t.extend([0, 0]);
            }
            Protocol::Icmp | Protocol::Icmpv6 => {
                t.push(self.sport as u8);
                t.push(self.dport as u8);
                t.extend([0, 0, 0, 0, 0, 0]);
            }
            Protocol::Other(_) => {}
        }
        t.resize(t.len() + self.payload_len, 0);
        t
    }

    /// The IP packet (no link layer).
    pub fn ip_packet(&self) -> Vec<u8> {
        let l4 = self.transport();
        match (self.src, self.dst) {
            (IpAddr::V4(s), IpAddr::V4(d)) => {
                let total = (20 + l4.len()) as u16;
                let mut p = vec![0x45, 0x00];
                p.extend(total.to_be_bytes());
                p.extend([0x00, 0x01]);
                p.extend((self.frag_offset & 0x1fff).to_be_bytes());
                p.push(self.ttl);
                p.push(self.proto.number());
                p.extend([0, 0]);
                p.extend(s.octets());
                p.extend(d.octets());
                p.extend(l4);
                p
            }
            (IpAddr::V6(s), IpAddr::V6(d)) => {
                let frag_hdr = self.frag_offset != 0;
                let payload = l4.len() + if frag_hdr { 8 } else { 0 };
                let mut p = vec![0x60, 0, 0, 0];
                p.extend((payload as u16).to_be_bytes());
                p.push(if frag_hdr { 44 } else { self.proto.number() });
                p.push(self.ttl);
                p.extend(s.octets());
                p.extend(d.octets());
                if frag_hdr {
                    p.push(self.proto.number());
                    p.push(0);
                    p.extend((self.frag_offset << 3).to_be_bytes());
                    p.extend([0, 0, 0, 1]);
                }
                p.extend(l4);
                p
            }
            _ => panic!("mixed address families"),
        }
    }

    pub fn ethernet_frame(&self) -> Vec<u8> {
        let mut f = vec![0x02, 0, 0, 0, 0, 0x02, 0x02, 0, 0, 0, 0, 0x01];
        f.extend(if self.src.is_ipv4() { [0x08, 0x00] } else { [0x86, 0xdd] });
        f.extend(self.ip_packet());
        f
    }
}

/// Writes classic PCAP files.
pub struct PcapWriter<W: Write> {
    out: W,
    linktype: u32,
    nanos: bool,
    big_endian: bool,
}

impl<W: Write> PcapWriter<W> {
    /// Little-endian, microsecond-resolution writer.
    pub fn new(out: W, linktype: u32) -> io::Result<Self> {
        Self::with_options(out, linktype, false, false)
    }

    pub fn with_options(out: W, linktype: u32, nanos: bool, big_endian: bool) -> io::Result<Self> {
        let mut w = PcapWriter { out, linktype, nanos, big_endian };
        let magic = if nanos { 0xa1b2_3c4d_u32 } else { 0xa1b2_c3d4 };
        w.put32(magic)?;
        w.put16(2)?;
        w.put16(4)?;
        w.put32(0)?;
        w.put32(0)?;
        w.put32(262_144)?;
        w.put32(linktype)?;
        Ok(w)
    }

    fn put16(&mut self, v: u16) -> io::Result<()> {
        self.out.write_all(&if self.big_endian { v.to_be_bytes() } else { v.to_le_bytes() })
    }

    fn put32(&mut self, v: u32) -> io::Result<()> {
        self.out.write_all(&if self.big_endian { v.to_be_bytes() } else { v.to_le_bytes() })
    }

    /// Writes one record. `frac` is in the writer's resolution; `origlen`
    /// defaults to the captured length.
    pub fn write_record_raw(&mut self, sec: u32, frac: u32, data: &[u8], origlen: Option<u32>) -> io::Result<()> {
        self.put32(sec)?;
        self.put32(frac)?;
        self.put32(data.len() as u32)?;
        self.put32(origlen.unwrap_or(data.len() as u32))?;
        self.out.write_all(data)
    }

    pub fn write_packet(&mut self, p: &SynthPacket) -> io::Result<()> {
        let data = match self.linktype {
            LINKTYPE_RAW => p.ip_packet(),
            LINKTYPE_ETHERNET => p.ethernet_frame(),
            other => return Err(io::Error::new(io::ErrorKind::InvalidInput, format!("linktype {other}"))),
        };
        let sec = (p.ts.0 / 1_000_000) as u32;
        let us = (p.ts.0 % 1_000_000) as u32;
        let frac = if self.nanos { us * 1000 } else { us };
        self.write_record_raw(sec, frac, &data, None)
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Serializes packets into an in-memory Ethernet capture.
pub fn capture_bytes(packets: &[SynthPacket]) -> Vec<u8> {
    let mut w = PcapWriter::new(Vec::new(), LINKTYPE_ETHERNET).expect("vec write");
    for p in packets {
        w.write_packet(p).expect("vec write");
    }
    w.into_inner()
}
