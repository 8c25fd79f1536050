use crate::flow::FlowRecord;
use crate::types::Protocol;

const TCP: &[(u16, &str)] = &[
    (20, "ftp-data"),
    (21, "ftp"),
    (22, "ssh"),
    (23, "telnet"),
    (25, "smtp"),
    (53, "dns"),
    (80, "http"),
    (110, "pop3"),
    (119, "nntp"),
    (143, "imap"),
    (179, "bgp"),
    (389, "ldap"),
    (443, "ssl"),
    (445, "smb"),
    (465, "smtps"),
    (587, "submission"),
    (993, "imaps"),
    (995, "pop3s"),
    (1433, "mssql"),
    (3306, "mysql"),
    (3389, "rdp"),
    (5432, "postgres"),
    (6667, "irc"),
    (8080, "http-alt"),
];

const UDP: &[(u16, &str)] = &[
    (53, "dns"),
    (67, "dhcp"),
    (68, "dhcp"),
    (69, "tftp"),
    (123, "ntp"),
    (137, "netbios-ns"),
    (138, "netbios-dgm"),
    (161, "snmp"),
    (162, "snmptrap"),
    (500, "isakmp"),
    (514, "syslog"),
    (1812, "radius"),
    (1900, "ssdp"),
    (5353, "mdns"),
];

/// Service name for a protocol/port pair, `-` when unknown.
pub fn service_for(proto: Protocol, port: u16) -> &'static str {
    let table = match proto {
        Protocol::Tcp => TCP,
        Protocol::Udp => UDP,
        _ => return "-",
    };
    table.iter().find(|(p, _)| *p == port).map_or("-", |(_, s)| s)
}

/// Looks up the destination port first, then the source port, so replies
/// and flows whose first packet came from the server resolve the same way.
pub fn service_of(r: &FlowRecord) -> &'static str {
    if r.is_management {
        return "-";
    }
    match service_for(r.proto(), r.dport()) {
        "-" => service_for(r.proto(), r.sport()),
        s => s,
    }
}
