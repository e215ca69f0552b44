//! Simulator and optimizer for QoE-aware DNN split inference over NOMA
//! edge networks.
//!
//! The crate models the end-to-end cost of running a chain DNN partly on a
//! device and partly on an edge server reached over NOMA uplink/downlink:
//! compute delays on both sides, transmission delays under SIC
//! interference, the four matching energy terms, and a sigmoid-relaxed QoE
//! penalty around each user's deadline. On top of the cost model sits a
//! loop-iteration projected gradient descent that jointly picks the split
//! point, subchannel shares, transmit powers and edge compute units, plus
//! non-optimizing baselines and an exhaustive grid oracle for validation.

pub mod baselines;
pub mod channel;
pub mod costs;
pub mod error;
pub mod ligd;
pub mod profiles;
pub mod scenario;
pub mod units;
pub mod utility;

pub use error::{Error, Result};
