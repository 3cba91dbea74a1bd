//! Verification and analysis of trained feed-forward ReLU networks.
//!
//! The crate decides robustness of a classification under bounded input
//! noise, searches for the largest tolerated noise level, verifies safety
//! properties over large input domains by grid sampling and random input
//! segmentation, and analyzes databases of collected counterexamples for
//! training bias and per-node sensitivity.

pub mod analysis;
pub mod bench;
pub mod engine;
pub mod error;
pub mod grid;
pub mod kripke;
pub mod network;
pub mod property;
pub mod segmentation;

pub use error::{Error, Result};
pub use network::{
    parse_json_net, parse_nnet, InputBox, Network, OutputBox, OutputConvention, OutputSpace,
};
