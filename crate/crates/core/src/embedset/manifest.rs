//! Pair manifests: JSON sidecars (`<stem>.pairs.json`) describing which audio,
//! visual and text rows form a pair. For segmented sets the indices address
//! clips rather than individual segment rows.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairLabel {
    TruePair,
    FalsePair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pair {
    pub id: String,
    pub audio_row: usize,
    pub visual_row: usize,
    pub text_row: usize,
    pub label: PairLabel,
    pub shift_s: f64,
    pub class_tag: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairManifest {
    pub version: u32,
    pub pairs: Vec<Pair>,
}

impl PairManifest {
    pub fn new(pairs: Vec<Pair>) -> Self {
        Self {
            version: MANIFEST_VERSION,
            pairs,
        }
    }

    /// Checks version, id uniqueness and shift values.
    pub fn validate(&self) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(Error::Manifest(format!(
                "unsupported manifest version {}",
                self.version
            )));
        }
        let mut seen = HashSet::new();
        for p in &self.pairs {
            if !seen.insert(p.id.as_str()) {
                return Err(Error::Manifest(format!("duplicate pair id {:?}", p.id)));
            }
            if !(p.shift_s.is_finite() && p.shift_s >= 0.0) {
                return Err(Error::Manifest(format!(
                    "pair {:?} has invalid shift {}",
                    p.id, p.shift_s
                )));
            }
        }
        Ok(())
    }

    /// Checks that every index addresses an existing row (or clip).
    pub fn check_bounds(&self, audio: usize, visual: usize, text: usize) -> Result<()> {
        for p in &self.pairs {
            for (name, index, count) in [
                ("audio_row", p.audio_row, audio),
                ("visual_row", p.visual_row, visual),
                ("text_row", p.text_row, text),
            ] {
                if index >= count {
                    return Err(Error::Manifest(format!(
                        "pair {:?}: {name} {index} out of bounds for {count}",
                        p.id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn count(&self, label: PairLabel) -> usize {
        self.pairs.iter().filter(|p| p.label == label).count()
    }
}

/// Sidecar path for an embedding file: `x.emb` -> `x.pairs.json`.
pub fn manifest_path(embedding_path: impl AsRef<Path>) -> PathBuf {
    embedding_path.as_ref().with_extension("pairs.json")
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<PairManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: PairManifest = serde_json::from_str(&text)?;
    manifest.validate()?;
    Ok(manifest)
}

pub fn write_manifest(manifest: &PairManifest, path: impl AsRef<Path>) -> Result<()> {
    manifest.validate()?;
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(id: &str, row: usize) -> Pair {
        Pair {
            id: id.into(),
            audio_row: row,
            visual_row: row,
            text_row: row,
            label: PairLabel::TruePair,
            shift_s: 0.0,
            class_tag: "dog barking".into(),
        }
    }

    #[test]
    fn round_trip_and_label_spelling() {
        let dir = tempfile::tempdir().unwrap();
        let path = manifest_path(dir.path().join("audio.emb"));
        assert!(path.to_string_lossy().ends_with("audio.pairs.json"));
        let m = PairManifest::new(vec![pair("a", 0), pair("b", 1)]);
        write_manifest(&m, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"true_pair\""));
        assert_eq!(read_manifest(&path).unwrap(), m);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let m = PairManifest::new(vec![pair("a", 0), pair("a", 1)]);
        assert!(matches!(m.validate(), Err(Error::Manifest(_))));
    }

    #[test]
    fn bounds_checked() {
        let m = PairManifest::new(vec![pair("a", 3)]);
        assert!(m.check_bounds(4, 4, 4).is_ok());
        assert!(m.check_bounds(4, 3, 4).is_err());
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = r#"{"version":1,"pairs":[],"extra":0}"#;
        assert!(serde_json::from_str::<PairManifest>(text).is_err());
    }
}
