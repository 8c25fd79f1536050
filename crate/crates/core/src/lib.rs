//! Packet captures to labelled flow datasets.
//!
//! The pipeline has four stages, each usable on its own:
//!
//! 1. [`pcap`] decodes classic PCAP files into [`pcap::DecodedPacket`]s.
//! 2. [`flow`] aggregates packets into bidirectional flow records and
//!    stores them in `.hera` flow files.
//! 3. [`dataset`] turns flow records into CSV datasets with a selectable
//!    feature set, plus per-file statistics.
//! 4. [`label`] labels dataset rows against a ground-truth CSV.
//!
//! [`commands`] wires the stages together for the `hera` binary.

pub mod commands;
pub mod dataset;
pub mod flow;
pub mod label;
pub mod pcap;
pub mod types;
pub mod workspace;

pub use types::{Micros, Protocol, TcpFlags};
