//! Import and export of matcher results in a versioned JSON schema, so that
//! learned matchers can stand in for the built-in one.
//!
//! ```json
//! {
//!   "schema_version": "fidelkit-matches-v1",
//!   "image_a": "subject.png",
//!   "image_b": "generated.png",
//!   "pairs": [{"xa": 10.0, "ya": 12.5, "xb": 40.2, "yb": 33.0, "score": 0.93}],
//!   "model": {"kind": "homography", "coefficients": [...]},
//!   "inlier_mask": [true]
//! }
//! ```
//!
//! `model` and `inlier_mask` are optional. Without a mask every imported pair
//! counts as an inlier unless re-verification is requested.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::model::{GeomModel, PointPair};
use super::ransac::{verify_correspondences, RansacConfig};
use super::{Match, MatchError, MatchSet, Result};
use crate::keypoints::KeypointSet;

pub const EXTERNAL_MATCH_SCHEMA: &str = "fidelkit-matches-v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExternalPair {
    pub xa: f64,
    pub ya: f64,
    pub xb: f64,
    pub yb: f64,
    #[serde(default = "default_score")]
    pub score: f64,
}

fn default_score() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExternalMatchFile {
    #[serde(default = "default_schema")]
    pub schema_version: String,
    pub image_a: String,
    pub image_b: String,
    pub pairs: Vec<ExternalPair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<GeomModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inlier_mask: Option<Vec<bool>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rng_seed: Option<u64>,
}

fn default_schema() -> String {
    EXTERNAL_MATCH_SCHEMA.to_string()
}

/// An imported file: the match set uses synthetic indices (`idx_a = idx_b =`
/// pair index) into `points_a` / `points_b`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImportedMatches {
    pub image_a: String,
    pub image_b: String,
    pub points_a: Vec<[f64; 2]>,
    pub points_b: Vec<[f64; 2]>,
    pub scores: Vec<f64>,
    pub matchset: MatchSet,
}

impl ImportedMatches {
    pub fn pairs(&self) -> Vec<PointPair> {
        self.points_a
            .iter()
            .copied()
            .zip(self.points_b.iter().copied())
            .collect()
    }
}

/// Replaces bare `NaN` / `Infinity` / `-Infinity` tokens outside strings with
/// `null` so the offending pair can be reported by index instead of failing
/// as a JSON syntax error.
fn neutralize_non_finite(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut in_str = false;
    let mut escaped = false;
    let mut rest = text;
    while let Some(ch) = rest.chars().next() {
        if in_str {
            out.push(ch);
            if escaped {
                escaped = false;
            } else if ch == '\\' {
                escaped = true;
            } else if ch == '"' {
                in_str = false;
            }
            rest = &rest[ch.len_utf8()..];
            continue;
        }
        if ch == '"' {
            in_str = true;
        } else if let Some(tok) = ["-Infinity", "+Infinity", "Infinity", "NaN", "-NaN"]
            .iter()
            .find(|t| rest.starts_with(**t))
        {
            out.push_str("null");
            rest = &rest[tok.len()..];
            continue;
        }
        out.push(ch);
        rest = &rest[ch.len_utf8()..];
    }
    out
}

fn schema(msg: impl Into<String>) -> MatchError {
    MatchError::Schema(msg.into())
}

/// Parses and validates the external-match JSON text.
pub fn parse_external_matches(text: &str) -> Result<ExternalMatchFile> {
    let value: Value = serde_json::from_str(&neutralize_non_finite(text))
        .map_err(|e| schema(format!("invalid JSON: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| schema("top level must be an object"))?;
    let pairs = obj
        .get("pairs")
        .and_then(Value::as_array)
        .ok_or_else(|| schema("missing array field `pairs`"))?;
    for (i, p) in pairs.iter().enumerate() {
        let p = p
            .as_object()
            .ok_or_else(|| schema(format!("pair {i}: not an object")))?;
        for key in ["xa", "ya", "xb", "yb"] {
            match p.get(key) {
                None => return Err(schema(format!("pair {i}: missing `{key}`"))),
                Some(Value::Number(n)) if n.as_f64().is_some_and(f64::is_finite) => {}
                Some(Value::Null) | Some(Value::Number(_)) => {
                    return Err(schema(format!("pair {i}: non-finite coordinate `{key}`")))
                }
                Some(_) => return Err(schema(format!("pair {i}: `{key}` is not a number"))),
            }
        }
        match p.get("score") {
            None => {}
            Some(Value::Number(n)) if n.as_f64().is_some_and(f64::is_finite) => {}
            Some(_) => return Err(schema(format!("pair {i}: `score` must be a finite number"))),
        }
    }
    let file: ExternalMatchFile =
        serde_json::from_value(value).map_err(|e| schema(e.to_string()))?;
    if file.schema_version != EXTERNAL_MATCH_SCHEMA {
        return Err(schema(format!(
            "unsupported schema_version {}",
            file.schema_version
        )));
    }
    if let Some(mask) = &file.inlier_mask {
        if mask.len() != file.pairs.len() {
            return Err(schema(format!(
                "inlier_mask has {} entries for {} pairs",
                mask.len(),
                file.pairs.len()
            )));
        }
    }
    if let Some(m) = &file.model {
        m.validate().map_err(|e| schema(format!("model: {e}")))?;
    }
    Ok(file)
}

/// Builds the imported match set, optionally re-verifying the coordinates
/// with RANSAC (which replaces any model and mask carried by the file).
pub fn import_matches(file: ExternalMatchFile, reverify: Option<&RansacConfig>) -> ImportedMatches {
    let n = file.pairs.len();
    let points_a: Vec<[f64; 2]> = file.pairs.iter().map(|p| [p.xa, p.ya]).collect();
    let points_b: Vec<[f64; 2]> = file.pairs.iter().map(|p| [p.xb, p.yb]).collect();
    let matches: Vec<Match> = (0..n)
        .map(|i| Match {
            idx_a: i,
            idx_b: i,
            distance: 0,
        })
        .collect();
    let matchset = match reverify {
        Some(cfg) => {
            let pairs: Vec<PointPair> = points_a
                .iter()
                .copied()
                .zip(points_b.iter().copied())
                .collect();
            let v = verify_correspondences(&pairs, cfg);
            MatchSet {
                matches,
                model: v.model,
                inlier_mask: v.inlier_mask,
                rng_seed: cfg.seed,
                iterations: v.iterations,
            }
        }
        None => MatchSet {
            matches,
            model: file.model,
            inlier_mask: file.inlier_mask.unwrap_or_else(|| vec![true; n]),
            rng_seed: file.rng_seed.unwrap_or(0),
            iterations: 0,
        },
    };
    ImportedMatches {
        image_a: file.image_a,
        image_b: file.image_b,
        points_a,
        points_b,
        scores: file.pairs.iter().map(|p| p.score).collect(),
        matchset,
    }
}

pub fn load_external_matches(
    path: &Path,
    reverify: Option<&RansacConfig>,
) -> Result<ImportedMatches> {
    let text = std::fs::read_to_string(path).map_err(|e| MatchError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let file = parse_external_matches(&text)?;
    Ok(import_matches(file, reverify))
}

/// Exports a match set over two keypoint sets in the external schema. The
/// score is `1 - distance / 256`.
pub fn export_matches(ms: &MatchSet, a: &KeypointSet, b: &KeypointSet) -> ExternalMatchFile {
    ExternalMatchFile {
        schema_version: EXTERNAL_MATCH_SCHEMA.to_string(),
        image_a: a.image_id.clone(),
        image_b: b.image_id.clone(),
        pairs: ms
            .matches
            .iter()
            .map(|m| {
                let pa = a.position(m.idx_a);
                let pb = b.position(m.idx_b);
                ExternalPair {
                    xa: pa[0],
                    ya: pa[1],
                    xb: pb[0],
                    yb: pb[1],
                    score: 1.0 - m.distance as f64 / 256.0,
                }
            })
            .collect(),
        model: ms.model.clone(),
        inlier_mask: Some(ms.inlier_mask.clone()),
        rng_seed: Some(ms.rng_seed),
    }
}

pub fn save_external_matches(path: &Path, file: &ExternalMatchFile) -> Result<()> {
    let text = serde_json::to_string_pretty(file).map_err(|e| schema(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| MatchError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_pairs_gives_empty_set() {
        let f = parse_external_matches(r#"{"image_a":"a","image_b":"b","pairs":[]}"#).unwrap();
        let m = import_matches(f, None);
        assert!(m.matchset.matches.is_empty());
        assert_eq!(m.matchset.inlier_count(), 0);
    }

    #[test]
    fn nan_coordinate_names_index() {
        let text = r#"{"image_a":"a","image_b":"b","pairs":[
            {"xa":1,"ya":2,"xb":3,"yb":4,"score":1},
            {"xa":1,"ya":NaN,"xb":3,"yb":4,"score":1}]}"#;
        let err = parse_external_matches(text).unwrap_err().to_string();
        assert!(err.contains("pair 1"), "{err}");
        assert!(err.contains("ya"), "{err}");
    }

    #[test]
    fn nan_inside_string_is_untouched() {
        let text = r#"{"image_a":"NaN.png","image_b":"b","pairs":[]}"#;
        assert_eq!(parse_external_matches(text).unwrap().image_a, "NaN.png");
    }

    #[test]
    fn missing_field_and_bad_mask_rejected() {
        assert!(parse_external_matches(r#"{"image_a":"a","image_b":"b"}"#).is_err());
        let text = r#"{"image_a":"a","image_b":"b","pairs":[{"xa":1,"ya":2,"xb":3}]}"#;
        assert!(parse_external_matches(text)
            .unwrap_err()
            .to_string()
            .contains("yb"));
        let text = r#"{"image_a":"a","image_b":"b","pairs":[],"inlier_mask":[true]}"#;
        assert!(parse_external_matches(text).is_err());
    }

    #[test]
    fn unmasked_pairs_count_as_inliers() {
        let text = r#"{"image_a":"a","image_b":"b","pairs":[
            {"xa":1,"ya":2,"xb":3,"yb":4},{"xa":5,"ya":6,"xb":7,"yb":8,"score":0.2}]}"#;
        let m = import_matches(parse_external_matches(text).unwrap(), None);
        assert_eq!(m.matchset.inlier_count(), 2);
        assert_eq!(m.scores, vec![1.0, 0.2]);
    }
}
