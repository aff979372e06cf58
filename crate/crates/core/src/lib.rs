//! Electron-neutrino vs. cosmogenic-background classification for liquid
//! argon TPC event images.
//!
//! The pipeline: two-view event images ([`event_model`]) are reduced to
//! polar charge-histogram descriptors around the primary interaction vertex
//! ([`descriptor`]), classified by a random forest ([`forest`]) and scored
//! with repeated stratified cross-validation ([`eval`]). [`synthgen`]
//! produces labelled synthetic events with the two class signatures.

pub mod descriptor;
pub mod error;
pub mod eval;
pub mod event_model;
pub mod forest;
pub mod rng;
pub mod synthgen;

pub use error::{Error, Result};
