//! Unsupervised scene-context layer for wearable-camera frame streams.
//!
//! The crate turns frames into global descriptors ([`features`]), learns
//! unsupervised maps over them ([`manifold`]), picks their hyperparameters
//! without labels ([`selection`]), measures what the maps learned against
//! manual labels ([`evaluation`]), builds an importance-ranked fused feature
//! ([`fusion`]) and uses the SOM as a switch between per-location hand
//! detectors ([`handswitch`]). [`io`] covers manifests, persistence, synthetic
//! data and reports.

pub mod error;
pub mod evaluation;
pub mod features;
pub mod fusion;
pub mod handswitch;
pub mod io;
pub mod manifold;
pub mod selection;

pub use error::{Error, Result};
