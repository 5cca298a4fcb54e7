//! Cartel screening for wholesale electricity markets.
//!
//! Classical behavioral screens are computed from balancing-market (MSD)
//! startup offers, capacity-withholding screens from the zone-wide
//! day-ahead (MGP) tender of the same hour. A stacked ensemble of five
//! classifiers turns the screens into a collusion probability per tender.
//!
//! Typical flow: [`tender::ingest`] -> [`dataset::build_dataset`] ->
//! [`features::compute_features`] -> [`eval::repeated_evaluation`].

pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod figures;
pub mod learn;
pub mod rng;
pub mod screens;
pub mod sim;
pub mod spec;
pub mod stats;
pub mod tender;

pub use error::{Error, Result};
