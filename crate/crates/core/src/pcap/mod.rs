//! Classic PCAP reader.
//!
//! A capture is read as a 24-byte global header followed by records, each a
//! 16-byte record header plus `caplen` bytes of frame data. Frames are decoded
//! down to the transport header; anything that is not IPv4/IPv6 over Ethernet
//! (optionally with one VLAN tag) or raw IP is reported as a skipped record
//! rather than an error.

mod decode;
pub mod synth;

use std::fs::File;
use std::io::{self, BufReader, Read};
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use decode::{decode_frame, decode_icmp_ports, DecodedPacket, SkipReason};

use crate::types::Micros;

pub const LINKTYPE_ETHERNET: u32 = 1;
pub const LINKTYPE_RAW: u32 = 101;

const MAGIC_MICRO: u32 = 0xa1b2_c3d4;
const MAGIC_NANO: u32 = 0xa1b2_3c4d;
const MAGIC_PCAPNG: u32 = 0x0a0d_0d0a;

/// Upper bound on a single record, well above any real snaplen.
const MAX_RECORD_LEN: u32 = 16 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum PcapError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("read error: {0}")]
    Read(#[from] io::Error),
    #[error("not a classic pcap file (magic {0:#010x})")]
    BadMagic(u32),
    #[error("pcapng captures are not supported; convert to classic pcap first (e.g. `editcap -F pcap`)")]
    Pcapng,
    #[error("unsupported link type {0} (only Ethernet=1 and raw IP=101 are supported)")]
    UnsupportedLinktype(u32),
    #[error("capture file shorter than the 24-byte global header")]
    TruncatedHeader,
    #[error("record {index}: truncated ({available} of {needed} bytes present)")]
    TruncatedRecord { index: u64, needed: usize, available: usize },
    #[error("record {index}: captured length {caplen} exceeds the {MAX_RECORD_LEN}-byte limit")]
    OversizedRecord { index: u64, caplen: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ByteOrder {
    Big,
    Little,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TsResolution {
    Micro,
    Nano,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CaptureHeader {
    pub byte_order: ByteOrder,
    pub ts_resolution: TsResolution,
    pub linktype: u32,
    pub snaplen: u32,
}

impl CaptureHeader {
    pub fn parse(buf: &[u8; 24]) -> Result<Self, PcapError> {
        let le = u32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]);
        let be = u32::from_be_bytes([buf[0], buf[1], buf[2], buf[3]]);
        let (byte_order, ts_resolution) = match (be, le) {
            (MAGIC_MICRO, _) => (ByteOrder::Big, TsResolution::Micro),
            (MAGIC_NANO, _) => (ByteOrder::Big, TsResolution::Nano),
            (_, MAGIC_MICRO) => (ByteOrder::Little, TsResolution::Micro),
            (_, MAGIC_NANO) => (ByteOrder::Little, TsResolution::Nano),
            (MAGIC_PCAPNG, _) => return Err(PcapError::Pcapng),
            _ => return Err(PcapError::BadMagic(be)),
        };
        let word = |at: usize| read_u32(byte_order, &buf[at..at + 4]);
        let snaplen = word(16);
        // upper 16 bits of the link-type word carry FCS info on some writers
        let linktype = word(20) & 0x0fff_ffff;
        if linktype != LINKTYPE_ETHERNET && linktype != LINKTYPE_RAW {
            return Err(PcapError::UnsupportedLinktype(linktype));
        }
        Ok(CaptureHeader { byte_order, ts_resolution, linktype, snaplen })
    }
}

fn read_u32(order: ByteOrder, b: &[u8]) -> u32 {
    let arr = [b[0], b[1], b[2], b[3]];
    match order {
        ByteOrder::Big => u32::from_be_bytes(arr),
        ByteOrder::Little => u32::from_le_bytes(arr),
    }
}

/// One step of a capture stream.
#[derive(Clone, Debug, PartialEq)]
pub enum Record {
    Packet(DecodedPacket),
    Skipped(SkipReason),
}

/// Per-reason tally of records that did not decode to a packet.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SkipCounts {
    pub non_ip: u64,
    pub unsupported: u64,
    pub malformed: u64,
}

impl SkipCounts {
    pub fn total(&self) -> u64 {
        self.non_ip + self.unsupported + self.malformed
    }

    fn bump(&mut self, reason: SkipReason) {
        match reason {
            SkipReason::NonIp => self.non_ip += 1,
            SkipReason::Unsupported => self.unsupported += 1,
            SkipReason::Malformed => self.malformed += 1,
        }
    }
}

/// Sequential reader over one capture. Not shareable; move it to the thread
/// that consumes it.
pub struct CaptureReader<R> {
    inner: R,
    header: CaptureHeader,
    records_read: u64,
    skipped: SkipCounts,
    finished: bool,
    buf: Vec<u8>,
}

/// Opens `path` and parses its global header.
pub fn open_capture(path: &Path) -> Result<CaptureReader<BufReader<File>>, PcapError> {
    let file = File::open(path).map_err(|source| PcapError::Io { path: path.to_owned(), source })?;
    CaptureReader::new(BufReader::new(file))
}

impl<R: Read> CaptureReader<R> {
    pub fn new(mut inner: R) -> Result<Self, PcapError> {
        let mut hdr = [0u8; 24];
        if read_full(&mut inner, &mut hdr)? < hdr.len() {
            return Err(PcapError::TruncatedHeader);
        }
        let header = CaptureHeader::parse(&hdr)?;
        Ok(CaptureReader {
            inner,
            header,
            records_read: 0,
            skipped: SkipCounts::default(),
            finished: false,
            buf: Vec::new(),
        })
    }

    pub fn header(&self) -> &CaptureHeader {
        &self.header
    }

    /// Number of record headers consumed so far.
    pub fn records_read(&self) -> u64 {
        self.records_read
    }

    pub fn skipped(&self) -> SkipCounts {
        self.skipped
    }

    /// Advances exactly one record. `Ok(None)` marks the end of the capture.
    /// A truncated record ends the stream: the error is returned once and
    /// subsequent calls return `Ok(None)`.
    pub fn next_record(&mut self) -> Result<Option<Record>, PcapError> {
        if self.finished {
            return Ok(None);
        }
        let index = self.records_read;
        let mut rh = [0u8; 16];
        let got = read_full(&mut self.inner, &mut rh)?;
        if got == 0 {
            self.finished = true;
            return Ok(None);
        }
        if got < rh.len() {
            self.finished = true;
            return Err(PcapError::TruncatedRecord { index, needed: rh.len(), available: got });
        }
        let order = self.header.byte_order;
        let ts_sec = read_u32(order, &rh[0..4]);
        let ts_frac = read_u32(order, &rh[4..8]);
        let caplen = read_u32(order, &rh[8..12]);
        let origlen = read_u32(order, &rh[12..16]);
        if caplen > MAX_RECORD_LEN {
            self.finished = true;
            return Err(PcapError::OversizedRecord { index, caplen });
        }
        self.buf.resize(caplen as usize, 0);
        let got = read_full(&mut self.inner, &mut self.buf)?;
        if got < self.buf.len() {
            self.finished = true;
            return Err(PcapError::TruncatedRecord { index, needed: self.buf.len(), available: got });
        }
        self.records_read += 1;

        let frac_us = match self.header.ts_resolution {
            TsResolution::Micro => u64::from(ts_frac),
            TsResolution::Nano => u64::from(ts_frac) / 1000,
        };
        let ts = Micros(u64::from(ts_sec) * 1_000_000 + frac_us);
        match decode_frame(self.header.linktype, &self.buf, origlen, ts) {
            Ok(pkt) => Ok(Some(Record::Packet(pkt))),
            Err(reason) => {
                self.skipped.bump(reason);
                Ok(Some(Record::Skipped(reason)))
            }
        }
    }

    /// Convenience: the next decoded packet, silently passing over skipped
    /// records (they remain counted in [`CaptureReader::skipped`]).
    pub fn next_packet(&mut self) -> Result<Option<DecodedPacket>, PcapError> {
        loop {
            match self.next_record()? {
                Some(Record::Packet(p)) => return Ok(Some(p)),
                Some(Record::Skipped(_)) => continue,
                None => return Ok(None),
            }
        }
    }
}

impl<R: Read> Iterator for CaptureReader<R> {
    type Item = Result<Record, PcapError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_record().transpose()
    }
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}
