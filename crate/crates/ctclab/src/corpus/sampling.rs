//! Balanced down-sampling and incremental multilingual dataset construction.
//!
//! The anchor language is always kept in full; every other language is
//! down-sampled without replacement to the per-language cap. Sampling is
//! driven by a ChaCha8 generator seeded from `(seed, lang)`, so a language's
//! subset is the same in every dataset that includes it, and the whole
//! construction is reproducible from the seed alone.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::manifest::Utterance;
use crate::error::{Error, Result};
use crate::rng;

/// What to build: anchor, language order, per-language sentence cap, seed.
#[derive(Debug, Clone)]
pub struct DatasetSpec {
    pub anchor_lang: String,
    /// Anchor first.
    pub langs_in_order: Vec<String>,
    pub per_lang_cap: usize,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.langs_in_order.first() != Some(&self.anchor_lang) {
            return Err(Error::Config(format!(
                "anchor `{}` must be first in the language order {:?}",
                self.anchor_lang, self.langs_in_order
            )));
        }
        if self.per_lang_cap == 0 {
            return Err(Error::Config("per_lang_cap must be >= 1".into()));
        }
        let mut sorted = self.langs_in_order.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.langs_in_order.len() {
            return Err(Error::Config(format!(
                "duplicate language in order {:?}",
                self.langs_in_order
            )));
        }
        Ok(())
    }
}

/// A language pool smaller than the cap was kept in full.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleWarning {
    pub lang: String,
    pub available: usize,
    pub requested: usize,
}

impl std::fmt::Display for SampleWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "language `{}` has only {} sentences, requested {}; kept all",
            self.lang, self.available, self.requested
        )
    }
}

/// A built training set: the languages it covers and their utterances, in
/// language order then sampled order.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub langs: Vec<String>,
    pub utterances: Vec<Utterance>,
    pub warnings: Vec<SampleWarning>,
}

impl Dataset {
    pub fn ids(&self) -> Vec<&str> {
        self.utterances.iter().map(|u| u.id.as_str()).collect()
    }

    /// Short condition name: language codes joined by `-`.
    pub fn name(&self) -> String {
        self.langs.join("-")
    }
}

/// Uniform sample without replacement via partial Fisher-Yates; the result
/// order is the draw order.
fn sample_indices(rng: &mut ChaCha8Rng, pool: usize, take: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pool).collect();
    let take = take.min(pool);
    for i in 0..take {
        let j = rng.gen_range(i..pool);
        idx.swap(i, j);
    }
    idx.truncate(take);
    idx
}

fn sample_language(
    pool: &[Utterance],
    lang: &str,
    cap: usize,
    seed: u64,
    warnings: &mut Vec<SampleWarning>,
) -> Vec<Utterance> {
    if pool.len() <= cap {
        if pool.len() < cap {
            warnings.push(SampleWarning {
                lang: lang.to_string(),
                available: pool.len(),
                requested: cap,
            });
        }
        return pool.to_vec();
    }
    let mut rng = rng::derive(seed, lang);
    sample_indices(&mut rng, pool.len(), cap)
        .into_iter()
        .map(|i| pool[i].clone())
        .collect()
}

/// Build one balanced dataset per the spec: anchor in full, every other
/// language capped at `per_lang_cap`.
pub fn balanced_sample(
    by_lang: &BTreeMap<String, Vec<Utterance>>,
    spec: &DatasetSpec,
) -> Result<Dataset> {
    spec.validate()?;
    let sets = build_incremental_sets(
        by_lang,
        &spec.langs_in_order,
        spec.per_lang_cap,
        spec.seed,
    )?;
    Ok(sets.into_iter().last().expect("order is non-empty"))
}

/// Build the nested dataset family: one dataset per prefix of `order`. A
/// language's sampled subset is drawn once and reused by every prefix that
/// includes it.
pub fn build_incremental_sets(
    by_lang: &BTreeMap<String, Vec<Utterance>>,
    order: &[String],
    cap: usize,
    seed: u64,
) -> Result<Vec<Dataset>> {
    let anchor = order
        .first()
        .ok_or_else(|| Error::Config("language order is empty".into()))?;
    if !by_lang.contains_key(anchor) {
        return Err(Error::MissingAnchor {
            lang: anchor.clone(),
        });
    }
    if cap == 0 {
        return Err(Error::Config("per_lang_cap must be >= 1".into()));
    }
    let mut per_lang: Vec<(String, Vec<Utterance>, Vec<SampleWarning>)> = Vec::new();
    for (k, lang) in order.iter().enumerate() {
        let pool = by_lang.get(lang).ok_or_else(|| {
            Error::Config(format!("language `{lang}` has no utterances available"))
        })?;
        let mut warnings = Vec::new();
        let subset = if k == 0 {
            pool.clone() // anchor kept in full
        } else {
            sample_language(pool, lang, cap, seed, &mut warnings)
        };
        per_lang.push((lang.clone(), subset, warnings));
    }
    let mut datasets = Vec::with_capacity(order.len());
    for k in 0..order.len() {
        let mut utterances = Vec::new();
        let mut warnings = Vec::new();
        for (lang, subset, warns) in &per_lang[..=k] {
            let _ = lang;
            utterances.extend(subset.iter().cloned());
            warnings.extend(warns.iter().cloned());
        }
        datasets.push(Dataset {
            langs: order[..=k].to_vec(),
            utterances,
            warnings,
        });
    }
    Ok(datasets)
}
