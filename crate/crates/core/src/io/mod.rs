//! Manifests, feature stores, model files, synthetic data and reports.

mod manifest;
mod persist;
pub mod report;
mod store;
mod synth;

pub use manifest::{load_manifest, Hands, Manifest, ManifestEntry, MANIFEST_COLUMNS};
pub use persist::{
    load_model, model_from_json, model_kind, model_to_json, save_model, PersistedModel, Shapes, FORMAT_VERSION,
};
pub use store::{FeatureStore, StoreHeader};
pub use synth::{synth_generate, synth_manifest, synth_render, LocationSpec, SynthConfig, SynthFrame};

use crate::error::{Error, Result};
use crate::evaluation::LabeledDataset;
use crate::manifold::FeatureMatrix;

/// Pairs manifest labels with feature rows in manifest order.
pub fn labeled_dataset(manifest: &Manifest, features: FeatureMatrix) -> Result<LabeledDataset> {
    if features.rows() != manifest.len() {
        return Err(Error::DimensionMismatch {
            expected: manifest.len(),
            found: features.rows(),
        });
    }
    LabeledDataset::new(
        features,
        manifest.entries.iter().map(|e| e.indoor_outdoor).collect(),
        manifest.entries.iter().map(|e| e.location.clone()).collect(),
        manifest.entries.iter().map(|e| e.split).collect(),
    )
}
