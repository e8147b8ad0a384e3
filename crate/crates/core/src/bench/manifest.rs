//! Dataset manifests: subject / generated / refined image triples.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BenchError, Result};

pub const MANIFEST_SCHEMA: &str = "fidelkit-manifest-v1";

fn unknown_tag() -> String {
    "unknown".to_string()
}

fn manifest_schema() -> String {
    MANIFEST_SCHEMA.to_string()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub sample_id: String,
    pub subject_path: String,
    pub generated_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refined_path: Option<String>,
    #[serde(default = "unknown_tag")]
    pub method_tag: String,
    #[serde(default = "unknown_tag")]
    pub backbone_tag: String,
}

/// Relative paths resolve against `base_dir`, the directory the manifest was
/// loaded from (the working directory when unset).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default = "manifest_schema")]
    pub schema_version: String,
    pub entries: Vec<ManifestEntry>,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl PartialEq for Manifest {
    fn eq(&self, other: &Self) -> bool {
        self.schema_version == other.schema_version && self.entries == other.entries
    }
}

impl Manifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Self {
        Self {
            schema_version: MANIFEST_SCHEMA.to_string(),
            entries,
            base_dir: None,
        }
    }

    pub fn resolve(&self, p: &str) -> PathBuf {
        let path = Path::new(p);
        match &self.base_dir {
            Some(base) if path.is_relative() => base.join(path),
            _ => path.to_path_buf(),
        }
    }

    /// Structural checks: schema tag, non-empty ids, unique ids.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != MANIFEST_SCHEMA {
            return Err(BenchError::Manifest(format!(
                "schema_version {} is not {MANIFEST_SCHEMA}",
                self.schema_version
            )));
        }
        let mut seen = HashSet::new();
        for (i, e) in self.entries.iter().enumerate() {
            if e.sample_id.is_empty() {
                return Err(BenchError::Manifest(format!(
                    "entries[{i}].sample_id is empty"
                )));
            }
            if !seen.insert(e.sample_id.as_str()) {
                return Err(BenchError::DuplicateId(e.sample_id.clone()));
            }
        }
        Ok(())
    }

    /// Every referenced file that does not exist, as `sample_id: field path`.
    pub fn missing_files(&self) -> Vec<String> {
        let mut out = Vec::new();
        for e in &self.entries {
            let fields = [
                ("subject_path", Some(&e.subject_path)),
                ("generated_path", Some(&e.generated_path)),
                ("refined_path", e.refined_path.as_ref()),
            ];
            for (name, p) in fields {
                if let Some(p) = p {
                    if !self.resolve(p).exists() {
                        out.push(format!("{}: {name} {p}", e.sample_id));
                    }
                }
            }
        }
        out
    }
}

pub fn parse_manifest(text: &str) -> Result<Manifest> {
    let m: Manifest = serde_json::from_str(text).map_err(|e| {
        BenchError::Manifest(format!("line {} column {}: {e}", e.line(), e.column()))
    })?;
    m.validate()?;
    Ok(m)
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    let mut m = parse_manifest(&text).map_err(|e| match e {
        BenchError::Manifest(msg) => BenchError::Manifest(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    m.base_dir = path.parent().map(Path::to_path_buf);
    Ok(m)
}

pub fn save_manifest(path: &Path, m: &Manifest) -> Result<()> {
    let text = serde_json::to_string_pretty(m).map_err(|e| BenchError::io(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| BenchError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str) -> ManifestEntry {
        ManifestEntry {
            sample_id: id.into(),
            subject_path: format!("{id}_s.png"),
            generated_path: format!("{id}_g.png"),
            refined_path: None,
            method_tag: "m".into(),
            backbone_tag: "b".into(),
        }
    }

    #[test]
    fn empty_entries_is_valid() {
        let m =
            parse_manifest(r#"{"schema_version":"fidelkit-manifest-v1","entries":[]}"#).unwrap();
        assert!(m.entries.is_empty());
    }

    #[test]
    fn duplicate_id_named() {
        let m = Manifest::new(vec![entry("a"), entry("b"), entry("a")]);
        let err = m.validate().unwrap_err();
        assert!(matches!(&err, BenchError::DuplicateId(id) if id == "a"));
    }

    #[test]
    fn schema_error_has_position() {
        let err = parse_manifest("{\n  \"entries\": [ {\"sample_id\": 3} ]\n}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn round_trip_and_relative_resolution() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        let mut m = Manifest::new(vec![entry("a"), entry("b")]);
        m.entries[1].refined_path = Some("/abs/r.png".into());
        save_manifest(&p, &m).unwrap();
        let back = load_manifest(&p).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.resolve("a_s.png"), dir.path().join("a_s.png"));
        assert_eq!(back.resolve("/abs/r.png"), PathBuf::from("/abs/r.png"));
        assert_eq!(back.missing_files().len(), 5);
    }
}
