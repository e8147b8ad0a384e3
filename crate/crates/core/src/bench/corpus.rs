//! Synthetic benchmark corpora with known subject placement.

use std::path::Path;

use crate::imgcore::save_image;
use crate::synth::{planted_sample, scene_image};

use super::{save_manifest, BenchError, Manifest, ManifestEntry, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusOptions {
    pub samples: usize,
    pub subject_side: usize,
    pub scene_side: usize,
    /// Fraction of samples whose generated image contains the subject; the
    /// rest show an unrelated scene.
    pub planted_fraction: f64,
    pub seed: u64,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        Self {
            samples: 50,
            subject_side: 160,
            scene_side: 320,
            planted_fraction: 1.0,
            seed: 0,
        }
    }
}

impl CorpusOptions {
    /// Whether sample `i` carries the subject; planted samples are spread
    /// evenly through the corpus.
    pub fn is_planted(&self, i: usize) -> bool {
        let f = self.planted_fraction.clamp(0.0, 1.0);
        ((i + 1) as f64 * f).floor() > (i as f64 * f).floor()
    }
}

/// Writes `{id}_subject.png` and `{id}_generated.png` for each sample plus
/// `manifest.json` into `dir`, and returns the loaded manifest.
pub fn synthetic_corpus(dir: &Path, opts: &CorpusOptions) -> Result<Manifest> {
    std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    let mut entries = Vec::with_capacity(opts.samples);
    for i in 0..opts.samples {
        let id = format!("s{i:04}");
        let seed = opts.seed.wrapping_add(i as u64 * 7919);
        let s = planted_sample(opts.subject_side, opts.scene_side, seed);
        let generated = if opts.is_planted(i) {
            s.generated
        } else {
            scene_image(opts.scene_side, opts.scene_side, seed ^ 0x5CE7E)
        };
        let subject_path = format!("{id}_subject.png");
        let generated_path = format!("{id}_generated.png");
        for (img, name) in [(&s.subject, &subject_path), (&generated, &generated_path)] {
            let p = dir.join(name);
            save_image(img, &p).map_err(|e| BenchError::io(&p, e))?;
        }
        entries.push(ManifestEntry {
            sample_id: id,
            subject_path,
            generated_path,
            refined_path: None,
            method_tag: "synthetic".into(),
            backbone_tag: "planted".into(),
        });
    }
    let mut m = Manifest::new(entries);
    save_manifest(&dir.join("manifest.json"), &m)?;
    m.base_dir = Some(dir.to_path_buf());
    Ok(m)
}
