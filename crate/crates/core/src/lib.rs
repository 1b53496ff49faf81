//! Single-gateway LoRaWAN cell simulator with fair data-rate allocation and
//! transmission power control.
//!
//! The crate is layered bottom-up: [`phy`] holds pure LoRa radio formulas,
//! [`channel`] places nodes and computes path loss, [`allocation`] decides
//! each node's SF/BW/CR/TP, [`sim`] replays the traffic through a gateway and
//! [`metrics`] turns the outcome into DER, fairness and energy figures.
//! [`experiment`] wires these together for the command-line tool.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod channel;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod phy;
pub mod sim;

pub use error::{Error, Result};
