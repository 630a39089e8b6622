//! Utterance manifests: one JSON object per line.
//!
//! Required keys: `id`, `features`, `transcript`, `lang`. Optional: `dialect`,
//! `stimulus_lang`, `speaker`. `features` is a path to a feature file,
//! relative to the manifest unless absolute.

use std::collections::BTreeMap;
use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::features::FeatureMatrix;
use crate::error::{Error, Result};
use crate::text;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestRecord {
    id: String,
    features: String,
    transcript: String,
    lang: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dialect: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stimulus_lang: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    speaker: Option<String>,
}

/// Feature payload of an utterance: a file reference or an in-memory matrix.
#[derive(Debug, Clone)]
pub enum Features {
    /// Resolved path to a feature file.
    Path(PathBuf),
    Inline(FeatureMatrix),
}

/// One manifest row. The transcript is stored normalized (see [`text`]).
#[derive(Debug, Clone)]
pub struct Utterance {
    pub id: String,
    pub features: Features,
    pub transcript: String,
    pub lang: String,
    pub dialect: Option<String>,
    pub stimulus_lang: Option<String>,
    pub speaker: Option<String>,
}

impl Utterance {
    /// Load the feature matrix, reading the referenced file if necessary.
    pub fn load_features(&self) -> Result<FeatureMatrix> {
        match &self.features {
            Features::Inline(m) => Ok(m.clone()),
            Features::Path(p) => FeatureMatrix::read(p),
        }
    }
}

/// Read a manifest file. Records come back in file order; every validation
/// failure names the 1-based line it occurred on.
pub fn load_manifest(path: &Path) -> Result<Vec<Utterance>> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let mut seen: HashSet<String> = HashSet::new();
    let mut out = Vec::new();
    for (n, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: ManifestRecord =
            serde_json::from_str(line).map_err(|e| Error::ManifestParse {
                path: path.to_path_buf(),
                line: n + 1,
                reason: e.to_string(),
            })?;
        if !seen.insert(record.id.clone()) {
            return Err(Error::DuplicateId {
                path: path.to_path_buf(),
                line: n + 1,
                id: record.id,
            });
        }
        let transcript = text::normalize(&record.transcript);
        if transcript.is_empty() {
            return Err(Error::ManifestParse {
                path: path.to_path_buf(),
                line: n + 1,
                reason: format!("transcript of `{}` is empty after normalization", record.id),
            });
        }
        if record.lang.is_empty() {
            return Err(Error::ManifestParse {
                path: path.to_path_buf(),
                line: n + 1,
                reason: format!("empty lang for `{}`", record.id),
            });
        }
        let feature_path = {
            let p = Path::new(&record.features);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        out.push(Utterance {
            id: record.id,
            features: Features::Path(feature_path),
            transcript,
            lang: record.lang,
            dialect: record.dialect,
            stimulus_lang: record.stimulus_lang,
            speaker: record.speaker,
        });
    }
    Ok(out)
}

/// Serialize utterances back to manifest lines. `base` decides how feature
/// paths are written: paths under `base` become relative, the rest absolute.
pub fn render_manifest(utterances: &[Utterance], base: &Path) -> String {
    let mut out = String::new();
    for u in utterances {
        let features = match &u.features {
            Features::Path(p) => match p.strip_prefix(base) {
                Ok(rel) => rel.to_string_lossy().into_owned(),
                Err(_) => p.to_string_lossy().into_owned(),
            },
            Features::Inline(_) => String::new(),
        };
        let record = ManifestRecord {
            id: u.id.clone(),
            features,
            transcript: u.transcript.clone(),
            lang: u.lang.clone(),
            dialect: u.dialect.clone(),
            stimulus_lang: u.stimulus_lang.clone(),
            speaker: u.speaker.clone(),
        };
        let _ = writeln!(out, "{}", serde_json::to_string(&record).expect("serializable"));
    }
    out
}

/// Write a manifest file; feature paths are relativized against the target
/// directory when possible.
pub fn write_manifest(utterances: &[Utterance], path: &Path) -> Result<()> {
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    std::fs::write(path, render_manifest(utterances, base)).map_err(|e| Error::io(path, e))
}

/// Group utterances by language, preserving order within each language.
pub fn group_by_lang(utterances: Vec<Utterance>) -> BTreeMap<String, Vec<Utterance>> {
    let mut map: BTreeMap<String, Vec<Utterance>> = BTreeMap::new();
    for u in utterances {
        map.entry(u.lang.clone()).or_default().push(u);
    }
    map
}
