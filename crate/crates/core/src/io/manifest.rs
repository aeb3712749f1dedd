//! Frame manifests: `path,split,location,indoor_outdoor,hands,sequence_index`.
//!
//! Lines starting with `#` are comments; `# key=value` comments are kept as
//! metadata (the synthetic generator records its seed and config there).

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evaluation::{IndoorOutdoor, Split};

pub const MANIFEST_COLUMNS: [&str; 6] = ["path", "split", "location", "indoor_outdoor", "hands", "sequence_index"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Hands {
    Yes,
    No,
    Unknown,
}

impl Hands {
    pub fn as_str(self) -> &'static str {
        match self {
            Hands::Yes => "YES",
            Hands::No => "NO",
            Hands::Unknown => "UNKNOWN",
        }
    }

    pub fn known(self) -> Option<bool> {
        match self {
            Hands::Yes => Some(true),
            Hands::No => Some(false),
            Hands::Unknown => None,
        }
    }
}

impl fmt::Display for Hands {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Hands {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "YES" => Ok(Hands::Yes),
            "NO" => Ok(Hands::No),
            "UNKNOWN" => Ok(Hands::Unknown),
            other => Err(format!("hands must be YES, NO or UNKNOWN, got '{other}'")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// As written in the manifest; relative paths resolve against the manifest's directory.
    pub path: String,
    pub split: Split,
    pub location: String,
    pub indoor_outdoor: IndoorOutdoor,
    pub hands: Hands,
    pub sequence_index: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    /// `# key=value` comment lines, in file order.
    pub meta: Vec<(String, String)>,
    /// Directory relative paths resolve against.
    pub root: PathBuf,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        let p = Path::new(&entry.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Parses manifest text; does not touch the file system.
    pub fn parse(text: &str, root: impl Into<PathBuf>) -> Result<Self> {
        let meta = text
            .lines()
            .filter_map(|l| l.strip_prefix('#'))
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            .collect();
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| Error::Manifest {
            row: 0,
            message: e.to_string(),
        })?;
        let missing: Vec<&str> = MANIFEST_COLUMNS
            .iter()
            .filter(|c| !header.iter().any(|h| h == **c))
            .copied()
            .collect();
        if !missing.is_empty() {
            return Err(Error::Manifest {
                row: 0,
                message: format!("missing columns: {}", missing.join(", ")),
            });
        }
        let col = |name: &str| header.iter().position(|h| h == name).expect("checked above");
        let idx: Vec<usize> = MANIFEST_COLUMNS.iter().map(|c| col(c)).collect();

        let mut entries = Vec::new();
        for (n, record) in reader.records().enumerate() {
            let row = n + 1;
            let bad = |message: String| Error::Manifest { row, message };
            let record = record.map_err(|e| bad(e.to_string()))?;
            let field = |i: usize| record.get(idx[i]).unwrap_or("");
            let path = field(0).to_string();
            if path.is_empty() {
                return Err(bad("empty path".into()));
            }
            entries.push(ManifestEntry {
                path,
                split: field(1).parse().map_err(bad)?,
                location: field(2).to_string(),
                indoor_outdoor: field(3).parse().map_err(bad)?,
                hands: field(4).parse().map_err(bad)?,
                sequence_index: field(5).parse().map_err(|_| {
                    bad(format!(
                        "sequence_index must be a non-negative integer, got '{}'",
                        field(5)
                    ))
                })?,
            });
        }
        let manifest = Self {
            entries,
            meta,
            root: root.into(),
        };
        manifest.check_sequences()?;
        Ok(manifest)
    }

    /// Each location is one source video; its sequence indices must strictly increase.
    fn check_sequences(&self) -> Result<()> {
        let mut last: BTreeMap<&str, u64> = BTreeMap::new();
        for (i, e) in self.entries.iter().enumerate() {
            if let Some(&prev) = last.get(e.location.as_str()) {
                if e.sequence_index <= prev {
                    return Err(Error::Manifest {
                        row: i + 1,
                        message: format!(
                            "sequence_index {} does not increase after {prev} for location '{}'",
                            e.sequence_index, e.location
                        ),
                    });
                }
            }
            last.insert(&e.location, e.sequence_index);
        }
        Ok(())
    }

    /// Verifies every image path exists and is readable.
    pub fn check_paths(&self) -> Result<()> {
        for (i, e) in self.entries.iter().enumerate() {
            let p = self.resolve(e);
            if let Err(err) = std::fs::File::open(&p) {
                return Err(Error::Manifest {
                    row: i + 1,
                    message: format!("cannot read image {}: {err}", p.display()),
                });
            }
        }
        Ok(())
    }

    /// The data rows as CSV, without metadata comments.
    fn rows_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(MANIFEST_COLUMNS).expect("in-memory write");
        for e in &self.entries {
            w.write_record([
                e.path.as_str(),
                e.split.as_str(),
                &e.location,
                e.indoor_outdoor.as_str(),
                e.hands.as_str(),
                &e.sequence_index.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }

    pub fn to_csv(&self) -> String {
        let mut out: String = self.meta.iter().map(|(k, v)| format!("# {k}={v}\n")).collect();
        out.push_str(&self.rows_csv());
        out
    }

    /// SHA-256 of the data rows; metadata comments do not affect it.
    pub fn checksum(&self) -> String {
        hex::encode(Sha256::digest(self.rows_csv().as_bytes()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Reads and validates a manifest, including that every image path is readable.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let manifest = Manifest::parse(&text, root)?;
    manifest.check_paths()?;
    Ok(manifest)
}
