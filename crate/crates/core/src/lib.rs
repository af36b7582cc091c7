//! Robust dynamic malware filtering.
//!
//! The crate is organised the way a filtering study is run:
//!
//! * [`riccati`] holds the plant description and the two game-theoretic
//!   Riccati equations whose solutions define the optimal filter, plus the
//!   search for the optimal performance level `gamma*`.
//! * [`controllers`] turns Riccati solutions into output-feedback filters
//!   (centralized, decentralized, LQG) and implements the heuristic baselines.
//! * [`fluidsim`] integrates the fluid network model under worm attacks.
//! * [`packetsim`] replays the same controllers against a packet-level
//!   monitor/filter pipeline with score-based dynamic thresholds.
//!
//! Node indices are zero-based throughout the library. External interfaces
//! (CSV headers, figure node lists) use one-based sub-network ids.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controllers;
pub mod error;
pub mod fluidsim;
pub mod linalg;
pub mod packetsim;
pub mod riccati;
pub mod trace;

pub use error::{Error, Result};
