//! Feasibility models for training self-supervised speech encoders on edge
//! devices and under federated learning.
//!
//! The crate is organised bottom-up:
//!
//! - [`arch`] / [`archcost`]: layer descriptors and exact parameter, FLOP and
//!   activation accounting.
//! - [`trainprofile`]: training FLOPs, static memory and the calibrated
//!   forward-pass memory timeline.
//! - [`device`]: device profiles, throughput calibration from measured
//!   anchors, time prediction and memory-fit verdicts.
//! - [`fedplan`]: manifests, speaker-disjoint partitions, round schedules and
//!   federated wall-clock / communication estimates.
//! - [`fedagg`]: FedAvg and loss-weighted aggregation plus a synthetic
//!   quadratic federated simulation.
//! - [`trend`]: compute-doubling extrapolation.
//! - [`config`], [`report`], [`reproduce`]: run configuration, report
//!   serialization and the reference-value check suite.

pub mod arch;
pub mod archcost;
pub mod trainprofile;
pub mod device;
pub mod fedplan;
pub mod fedagg;
pub mod trend;
pub mod config;
pub mod report;
pub mod reproduce;
pub mod error;

pub use error::{Error, ErrorClass, Result};
