//! Primitive value types shared by the decoder, the flow engine and the
//! dataset writer.

use std::fmt;
use std::str::FromStr;

/// Microsecond-resolution time value.
///
/// Used both for absolute timestamps (microseconds since the Unix epoch) and
/// for durations. All flow arithmetic is done on integers so that files
/// written with six decimal places round-trip exactly.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Micros(pub u64);

impl Micros {
    pub const ZERO: Micros = Micros(0);

    pub fn from_secs(secs: u64) -> Self {
        Micros(secs * 1_000_000)
    }

    /// Converts a positive, finite number of seconds, rounding to the nearest
    /// microsecond. Returns `None` for negative, non-finite or overflowing
    /// input.
    pub fn from_secs_f64(secs: f64) -> Option<Self> {
        if !secs.is_finite() || secs < 0.0 {
            return None;
        }
        let us = (secs * 1e6).round();
        if us > u64::MAX as f64 {
            return None;
        }
        Some(Micros(us as u64))
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn saturating_sub(self, other: Micros) -> Micros {
        Micros(self.0.saturating_sub(other.0))
    }

    /// Parses decimal seconds (`"12"`, `"12.5"`, `"0.000001"`). Digits beyond
    /// the sixth decimal place are truncated.
    pub fn parse_secs(s: &str) -> Option<Self> {
        let s = s.trim();
        let (int, frac) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if int.is_empty() && frac.is_empty() {
            return None;
        }
        if !int.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let whole: u64 = if int.is_empty() { 0 } else { int.parse().ok()? };
        let mut us: u64 = 0;
        for b in frac.bytes().chain(std::iter::repeat(b'0')).take(6) {
            us = us * 10 + u64::from(b - b'0');
        }
        whole.checked_mul(1_000_000)?.checked_add(us).map(Micros)
    }
}

impl fmt::Display for Micros {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:06}", self.0 / 1_000_000, self.0 % 1_000_000)
    }
}

impl std::ops::Add for Micros {
    type Output = Micros;
    fn add(self, rhs: Micros) -> Micros {
        Micros(self.0 + rhs.0)
    }
}

/// Transport protocol of a packet or flow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Protocol {
    Tcp,
    Udp,
    Icmp,
    /// ICMP for IPv6; carries type/code in the port fields like ICMP.
    Icmpv6,
    Other(u8),
}

impl Protocol {
    pub fn from_number(n: u8) -> Self {
        match n {
            6 => Protocol::Tcp,
            17 => Protocol::Udp,
            1 => Protocol::Icmp,
            58 => Protocol::Icmpv6,
            n => Protocol::Other(n),
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Protocol::Tcp => 6,
            Protocol::Udp => 17,
            Protocol::Icmp => 1,
            Protocol::Icmpv6 => 58,
            Protocol::Other(n) => n,
        }
    }

    pub fn is_icmp(self) -> bool {
        matches!(self, Protocol::Icmp | Protocol::Icmpv6)
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Protocol::Tcp => f.write_str("tcp"),
            Protocol::Udp => f.write_str("udp"),
            Protocol::Icmp => f.write_str("icmp"),
            Protocol::Icmpv6 => f.write_str("ipv6-icmp"),
            Protocol::Other(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tcp" => Ok(Protocol::Tcp),
            "udp" => Ok(Protocol::Udp),
            "icmp" => Ok(Protocol::Icmp),
            "ipv6-icmp" | "icmpv6" => Ok(Protocol::Icmpv6),
            other => other.parse::<u8>().map(Protocol::from_number).map_err(|_| format!("unknown protocol {s:?}")),
        }
    }
}

/// Set of TCP control flags, stored with the on-wire bit layout.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct TcpFlags(u8);

impl TcpFlags {
    pub const FIN: TcpFlags = TcpFlags(0x01);
    pub const SYN: TcpFlags = TcpFlags(0x02);
    pub const RST: TcpFlags = TcpFlags(0x04);
    pub const PSH: TcpFlags = TcpFlags(0x08);
    pub const ACK: TcpFlags = TcpFlags(0x10);
    pub const URG: TcpFlags = TcpFlags(0x20);

    const LETTERS: [(TcpFlags, char); 6] = [
        (TcpFlags::FIN, 'F'),
        (TcpFlags::SYN, 'S'),
        (TcpFlags::RST, 'R'),
        (TcpFlags::PSH, 'P'),
        (TcpFlags::ACK, 'A'),
        (TcpFlags::URG, 'U'),
    ];

    pub const fn empty() -> Self {
        TcpFlags(0)
    }

    /// Keeps the six classic control bits of a raw TCP flags byte.
    pub const fn from_bits(bits: u8) -> Self {
        TcpFlags(bits & 0x3f)
    }

    pub const fn bits(self) -> u8 {
        self.0
    }

    pub const fn contains(self, other: TcpFlags) -> bool {
        self.0 & other.0 == other.0
    }

    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn parse_letters(s: &str) -> Option<Self> {
        let mut out = TcpFlags::empty();
        for c in s.chars() {
            let (flag, _) = Self::LETTERS.iter().find(|(_, l)| *l == c)?;
            out |= *flag;
        }
        Some(out)
    }
}

impl std::ops::BitOr for TcpFlags {
    type Output = TcpFlags;
    fn bitor(self, rhs: TcpFlags) -> TcpFlags {
        TcpFlags(self.0 | rhs.0)
    }
}

impl std::ops::BitOrAssign for TcpFlags {
    fn bitor_assign(&mut self, rhs: TcpFlags) {
        self.0 |= rhs.0;
    }
}

/// Letters in fixed `FSRPAU` order; the empty set renders as an empty string.
impl fmt::Display for TcpFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (flag, letter) in Self::LETTERS {
            if self.contains(flag) {
                write!(f, "{letter}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn micros_display_has_six_decimals() {
        assert_eq!(Micros(1_500_000).to_string(), "1.500000");
        assert_eq!(Micros(0).to_string(), "0.000000");
        assert_eq!(Micros(1_700_000_000_000_001).to_string(), "1700000000.000001");
    }

    #[test]
    fn micros_parse() {
        assert_eq!(Micros::parse_secs("12"), Some(Micros(12_000_000)));
        assert_eq!(Micros::parse_secs("12.5"), Some(Micros(12_500_000)));
        assert_eq!(Micros::parse_secs(".25"), Some(Micros(250_000)));
        assert_eq!(Micros::parse_secs("1.0000019"), Some(Micros(1_000_001)));
        assert_eq!(Micros::parse_secs("-1"), None);
        assert_eq!(Micros::parse_secs("1e5"), None);
        assert_eq!(Micros::parse_secs(""), None);
        assert_eq!(Micros::parse_secs("."), None);
    }

    #[test]
    fn protocol_names_round_trip() {
        for p in [Protocol::Tcp, Protocol::Udp, Protocol::Icmp, Protocol::Icmpv6, Protocol::Other(47)] {
            assert_eq!(p.to_string().parse::<Protocol>().unwrap(), p);
            assert_eq!(Protocol::from_number(p.number()), p);
        }
        assert_eq!("TCP".parse::<Protocol>().unwrap(), Protocol::Tcp);
    }

    #[test]
    fn flag_letters() {
        let f = TcpFlags::SYN | TcpFlags::ACK;
        assert_eq!(f.to_string(), "SA");
        assert_eq!(TcpFlags::parse_letters("SA"), Some(f));
        assert_eq!(TcpFlags::parse_letters(""), Some(TcpFlags::empty()));
        assert_eq!(TcpFlags::parse_letters("X"), None);
        assert_eq!(TcpFlags::from_bits(0xff).bits(), 0x3f);
    }
}
