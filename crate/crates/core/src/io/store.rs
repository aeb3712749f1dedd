//! Feature files: one JSON header line, then one comma-separated row per frame
//! in manifest order.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Manifest;
use crate::error::{Error, Result};
use crate::features::{DescriptorConfig, DescriptorId, Provenance};
use crate::manifold::FeatureMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoreHeader {
    pub descriptor_id: DescriptorId,
    pub dim: usize,
    pub count: usize,
    pub config: DescriptorConfig,
    pub manifest_checksum: String,
    pub seed: u64,
    pub provenance: Provenance,
}

/// Rows are identified by their manifest position.
fn index_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureStore {
    pub header: StoreHeader,
    pub features: FeatureMatrix,
}

impl FeatureStore {
    pub fn new(
        descriptor_id: DescriptorId,
        config: DescriptorConfig,
        manifest: &Manifest,
        seed: u64,
        provenance: Provenance,
        features: FeatureMatrix,
    ) -> Result<Self> {
        if features.rows() != manifest.len() {
            return Err(Error::DimensionMismatch {
                expected: manifest.len(),
                found: features.rows(),
            });
        }
        if provenance.dim() != features.cols() {
            return Err(Error::DimensionMismatch {
                expected: features.cols(),
                found: provenance.dim(),
            });
        }
        let ids = index_ids(features.rows());
        let features = features.with_row_ids(ids)?;
        Ok(Self {
            header: StoreHeader {
                descriptor_id,
                dim: features.cols(),
                count: features.rows(),
                config,
                manifest_checksum: manifest.checksum(),
                seed,
                provenance,
            },
            features,
        })
    }

    /// Fails unless the store was extracted from exactly this manifest.
    pub fn verify(&self, manifest: &Manifest) -> Result<()> {
        let expected = manifest.checksum();
        if self.header.manifest_checksum != expected {
            return Err(Error::ChecksumMismatch {
                store: self.header.manifest_checksum.clone(),
                manifest: expected,
            });
        }
        Ok(())
    }

    pub fn to_text(&self) -> Result<String> {
        let mut out = serde_json::to_string(&self.header)?;
        out.push('\n');
        for row in self.features.iter_rows() {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                // Display prints the shortest string that parses back to the same f64
                write!(out, "{v}").expect("write to String");
            }
            out.push('\n');
        }
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header: StoreHeader =
            serde_json::from_str(lines.next().ok_or_else(|| Error::Load("empty feature file".into()))?)?;
        let mut data = Vec::with_capacity(header.count * header.dim);
        let mut rows = 0;
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let before = data.len();
            for tok in line.split(',') {
                data.push(
                    tok.parse::<f64>()
                        .map_err(|_| Error::Load(format!("feature row {}: bad value '{tok}'", i + 1)))?,
                );
            }
            if data.len() - before != header.dim {
                return Err(Error::Load(format!(
                    "feature row {} has {} values, header says {}",
                    i + 1,
                    data.len() - before,
                    header.dim
                )));
            }
            rows += 1;
        }
        if rows != header.count {
            return Err(Error::Load(format!(
                "feature file has {rows} rows, header says {}",
                header.count
            )));
        }
        if header.provenance.dim() != header.dim {
            return Err(Error::Load("provenance does not cover the feature dimension".into()));
        }
        let features = FeatureMatrix::from_flat(rows, header.dim, data, index_ids(rows))?;
        Ok(Self { header, features })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}
