//! Soft-sensing cognitive spectrum access with primary ARQ feedback.
//!
//! Secondary users (SUs) run slotted ALOHA on top of a TDMA primary uplink.
//! Each SU bins its energy-detector statistic into `n` subintervals of
//! `[0, eta]` and accesses with a per-bin probability. In the feedback scheme
//! SUs overhear the primary ACK/NACK stream and stay silent while a primary
//! packet is being retransmitted.
//!
//! The crate is organized bottom-up:
//!
//! - [`model`]: link outage, detector bin probabilities, joint access events.
//! - [`rates`]: closed-form primary/secondary service rates and stability.
//! - [`chain`]: the primary queue Markov chain, its stationary law and delays.
//! - [`optimizer`]: access-probability design for every scheme, plus a grid oracle.
//! - [`sim`]: slot-level Monte Carlo simulator used as the end-to-end oracle.
//! - [`experiment`]: config parsing and the parameter-sweep harness behind the CLI.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod chain;
pub mod error;
pub mod experiment;
pub mod model;
pub mod optimizer;
pub mod rates;
pub mod sim;

pub use error::{Diagnostic, Error, Result};
pub use model::{AccessPolicy, NetworkConfig, Scheme, SensingConfig};
pub use rates::{ChainParams, Rate, SystemModel};
