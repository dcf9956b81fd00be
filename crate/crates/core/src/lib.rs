//! Capacity maximization of a supply-power-limited amplified optical link.
//!
//! The crate bundles a spectrally resolved amplifier-chain simulator
//! ([`linksim`]), a generator for randomized training launch profiles
//! ([`profiles`]), a small neural network that learns the link's received
//! signal and noise powers ([`twin`]), projected gradient ascent of link
//! capacity through that network ([`optimize`]), and an experiment driver
//! that sweeps supply power and filter configurations ([`harness`]).

pub mod error;
pub mod grid;
pub mod harness;
pub mod linksim;
pub mod metrics;
pub mod optimize;
pub mod profiles;
pub mod rng;
pub mod twin;
pub mod units;

pub use error::{Error, Result};
pub use grid::{ChannelGrid, PowerProfile, SnrVector};
pub use metrics::{capacity, figure_of_merit};
pub use units::{dbm_to_mw, mw_to_dbm};
