//! Deterministic synthetic multilingual corpora.
//!
//! Each language is a Gaussian segment model: every symbol has a prototype
//! feature vector, and an utterance's features are the concatenated
//! per-symbol segments of prototype plus isotropic noise. A language family
//! is generated from an anchor by drifting both the prototypes (toward a
//! random orthogonal direction) and the lexicon (random edits), with the
//! drift knob controlling how far: lexical LDND to the anchor grows with
//! drift, which is what lets distance-based ordering recover the generation
//! order.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::corpus::manifest::{Features, Utterance};
use crate::corpus::FeatureMatrix;
use crate::error::{Error, Result};
use crate::langdist::Wordlist;
use crate::rng;

/// A synthetic language: alphabet, per-symbol prototypes, noise level,
/// segment length range, lexicon, and how far it has drifted from its
/// family's anchor.
#[derive(Debug, Clone)]
pub struct SynthLangSpec {
    pub lang: String,
    /// Word characters plus the space symbol; prototypes align by index.
    pub alphabet: Vec<char>,
    /// `alphabet.len()` rows of `feature_dim` values.
    pub prototypes: Vec<Vec<f64>>,
    pub noise_sigma: f64,
    /// Inclusive frame-count range per emitted symbol.
    pub frames_per_symbol: (usize, usize),
    pub lexicon: Vec<String>,
    /// 0 for the anchor itself.
    pub drift: f64,
}

/// Knobs for anchor generation; the defaults keep training runs at CPU
/// minutes scale.
#[derive(Debug, Clone)]
pub struct AnchorConfig {
    pub feature_dim: usize,
    /// Word characters, excluding the space.
    pub alphabet_size: usize,
    pub lexicon_size: usize,
    pub word_len: (usize, usize),
    pub noise_sigma: f64,
    pub frames_per_symbol: (usize, usize),
}

impl Default for AnchorConfig {
    fn default() -> Self {
        AnchorConfig {
            feature_dim: 8,
            alphabet_size: 6,
            lexicon_size: 40,
            word_len: (2, 5),
            noise_sigma: 0.1,
            frames_per_symbol: (2, 4),
        }
    }
}

impl SynthLangSpec {
    /// Generate an anchor language: random prototypes on the unit sphere and
    /// a random lexicon over the alphabet.
    pub fn anchor(lang: impl Into<String>, cfg: &AnchorConfig, seed: u64) -> Result<Self> {
        if cfg.alphabet_size == 0 || cfg.alphabet_size > 26 {
            return Err(Error::Config("alphabet_size must be in 1..=26".into()));
        }
        if cfg.lexicon_size == 0 || cfg.feature_dim == 0 {
            return Err(Error::Config(
                "lexicon_size and feature_dim must be >= 1".into(),
            ));
        }
        if cfg.word_len.0 == 0 || cfg.word_len.0 > cfg.word_len.1 {
            return Err(Error::Config("word_len range is empty".into()));
        }
        if cfg.frames_per_symbol.0 == 0 || cfg.frames_per_symbol.0 > cfg.frames_per_symbol.1 {
            return Err(Error::Config("frames_per_symbol range is empty".into()));
        }
        let lang = lang.into();
        let mut alphabet: Vec<char> = (0..cfg.alphabet_size)
            .map(|i| (b'a' + i as u8) as char)
            .collect();
        alphabet.push(' ');
        let mut rng = rng::derive(seed, &format!("anchor:{lang}"));
        let prototypes = alphabet
            .iter()
            .map(|_| random_unit_vector(&mut rng, cfg.feature_dim))
            .collect();
        // No adjacent repeated letters: with variable segment lengths, "cc"
        // and a long "c" produce the same feature sequence, so doubled
        // letters would make transcripts unidentifiable from features.
        let mut lexicon = Vec::with_capacity(cfg.lexicon_size);
        while lexicon.len() < cfg.lexicon_size {
            let len = rng.gen_range(cfg.word_len.0..=cfg.word_len.1);
            let mut word = String::with_capacity(len);
            let mut prev = None;
            for _ in 0..len {
                let ch = loop {
                    let c = alphabet[rng.gen_range(0..cfg.alphabet_size)];
                    if Some(c) != prev || cfg.alphabet_size == 1 {
                        break c;
                    }
                };
                word.push(ch);
                prev = Some(ch);
            }
            if !lexicon.contains(&word) {
                lexicon.push(word);
            }
        }
        Ok(SynthLangSpec {
            lang,
            alphabet,
            prototypes,
            noise_sigma: cfg.noise_sigma,
            frames_per_symbol: cfg.frames_per_symbol,
            lexicon,
            drift: 0.0,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.prototypes.first().map_or(0, Vec::len)
    }

    fn symbol_index(&self, ch: char) -> Option<usize> {
        self.alphabet.iter().position(|&c| c == ch)
    }

    /// The language's lexicon as a concept-aligned wordlist: concept `k` is
    /// lexicon entry `k`, so family members stay aligned by construction.
    pub fn wordlist(&self) -> Wordlist {
        let mut wl = Wordlist::new(self.lang.clone());
        for (k, word) in self.lexicon.iter().enumerate() {
            wl.add(format!("c{k:03}"), word.clone());
        }
        wl
    }
}

fn random_unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Random unit vector orthogonal to `against`, same length as `against`.
fn random_orthogonal(rng: &mut ChaCha8Rng, against: &[f64]) -> Vec<f64> {
    let norm_sq: f64 = against.iter().map(|x| x * x).sum();
    loop {
        let mut v = random_unit_vector(rng, against.len());
        if norm_sq > 1e-12 {
            let dot: f64 = v.iter().zip(against).map(|(a, b)| a * b).sum();
            for (vi, ai) in v.iter_mut().zip(against) {
                *vi -= dot / norm_sq * ai;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn drift_prototypes(anchor: &SynthLangSpec, drift: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    anchor
        .prototypes
        .iter()
        .map(|proto| {
            let norm = proto.iter().map(|x| x * x).sum::<f64>().sqrt();
            let u = random_orthogonal(rng, proto);
            proto
                .iter()
                .zip(&u)
                .map(|(p, ui)| (1.0 - drift) * p + drift * norm * ui)
                .collect()
        })
        .collect()
}

fn mutate_lexicon(anchor: &SynthLangSpec, drift: f64, rng: &mut ChaCha8Rng) -> Vec<String> {
    let letters = anchor.alphabet.len() - 1; // exclude the space
    anchor
        .lexicon
        .iter()
        .map(|word| {
            let mut out = String::with_capacity(word.len() + 1);
            for ch in word.chars() {
                if rng.gen_bool(drift.min(1.0)) {
                    // substitute with a different letter
                    let cur = anchor.symbol_index(ch).unwrap_or(0);
                    let step = rng.gen_range(1..letters.max(2));
                    out.push(anchor.alphabet[(cur + step) % letters]);
                } else {
                    out.push(ch);
                }
            }
            if rng.gen_bool((drift / 2.0).min(1.0)) {
                out.push(anchor.alphabet[rng.gen_range(0..letters)]);
            }
            // keep words free of adjacent repeats (see anchor generation)
            let mut deduped = String::with_capacity(out.len());
            for ch in out.chars() {
                if !deduped.ends_with(ch) {
                    deduped.push(ch);
                }
            }
            deduped
        })
        .collect()
}

/// Derive one language per drift value from the anchor. Drifts must be
/// ascending in [0, 1]. Generated languages get codes `x<letter>` in family
/// order (`xa`, `xb`, ...), skipping the anchor's own code if it collides.
pub fn gen_language_family(
    anchor: &SynthLangSpec,
    drifts: &[f64],
    seed: u64,
) -> Result<Vec<SynthLangSpec>> {
    if drifts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!(
            "drifts must be strictly ascending, got {drifts:?}"
        )));
    }
    if drifts.iter().any(|d| !(0.0..=1.0).contains(d)) {
        return Err(Error::Config(format!(
            "drifts must lie in [0, 1], got {drifts:?}"
        )));
    }
    if drifts.len() > 25 {
        return Err(Error::Config("at most 25 derived languages".into()));
    }
    let mut family = Vec::with_capacity(drifts.len());
    let mut letter = b'a';
    for &drift in drifts {
        let mut code = format!("x{}", letter as char);
        letter += 1;
        if code == anchor.lang {
            code = format!("x{}", letter as char);
            letter += 1;
        }
        let mut rng = rng::derive(seed, &format!("family:{code}"));
        family.push(SynthLangSpec {
            lang: code,
            alphabet: anchor.alphabet.clone(),
            prototypes: drift_prototypes(anchor, drift, &mut rng),
            noise_sigma: anchor.noise_sigma,
            frames_per_symbol: anchor.frames_per_symbol,
            lexicon: mutate_lexicon(anchor, drift, &mut rng),
            drift,
        })
    }
    Ok(family)
}

/// A "dialect" of a language: identical code and lexicon, prototypes drifted.
/// Evaluating a model of the base language on a dialect corpus probes the
/// pronunciation-shift penalty in isolation.
pub fn dialect_variant(base: &SynthLangSpec, drift: f64, seed: u64) -> Result<SynthLangSpec> {
    if !(0.0..=1.0).contains(&drift) {
        return Err(Error::Config(format!("drift must lie in [0, 1], got {drift}")));
    }
    let mut rng = rng::derive(seed, &format!("dialect:{}", base.lang));
    Ok(SynthLangSpec {
        lang: base.lang.clone(),
        alphabet: base.alphabet.clone(),
        prototypes: drift_prototypes(base, drift, &mut rng),
        noise_sigma: base.noise_sigma,
        frames_per_symbol: base.frames_per_symbol,
        lexicon: base.lexicon.clone(),
        drift,
    })
}

/// What to generate for one corpus split.
#[derive(Debug, Clone)]
pub struct CorpusParams {
    pub n_sentences: usize,
    /// Inclusive range of words per sentence.
    pub words_per_sentence: (usize, usize),
    pub seed: u64,
    /// Utterance ids are `<prefix>-<lang>-<index>`.
    pub id_prefix: String,
    pub dialect: Option<String>,
    pub stimulus_lang: Option<String>,
}

impl CorpusParams {
    pub fn new(n_sentences: usize, seed: u64, id_prefix: impl Into<String>) -> Self {
        CorpusParams {
            n_sentences,
            words_per_sentence: (2, 4),
            seed,
            id_prefix: id_prefix.into(),
            dialect: None,
            stimulus_lang: None,
        }
    }
}

/// Generate a corpus: seeded sentences from the lexicon, features written as
/// binary files under `out_dir/feats/`. The returned utterances reference
/// those files and are ready for a manifest.
pub fn gen_corpus(
    spec: &SynthLangSpec,
    params: &CorpusParams,
    out_dir: &Path,
) -> Result<Vec<Utterance>> {
    if params.n_sentences == 0 {
        return Err(Error::Config("n_sentences must be >= 1".into()));
    }
    let (lo, hi) = params.words_per_sentence;
    if lo == 0 || lo > hi {
        return Err(Error::Config("words_per_sentence range is empty".into()));
    }
    let feat_dir = out_dir.join("feats");
    std::fs::create_dir_all(&feat_dir).map_err(|e| Error::io(&feat_dir, e))?;
    let mut rng = rng::derive(params.seed, &format!("{}:{}", params.id_prefix, spec.lang));
    let mut out = Vec::with_capacity(params.n_sentences);
    for i in 0..params.n_sentences {
        let n_words = rng.gen_range(lo..=hi);
        let words: Vec<&str> = (0..n_words)
            .map(|_| spec.lexicon[rng.gen_range(0..spec.lexicon.len())].as_str())
            .collect();
        let transcript = words.join(" ");
        let features = render_features(spec, &transcript, &mut rng)?;
        let id = format!("{}-{}-{i:05}", params.id_prefix, spec.lang);
        let path = feat_dir.join(format!("{id}.ftr"));
        features.write(&path)?;
        out.push(Utterance {
            id,
            features: Features::Path(path),
            transcript,
            lang: spec.lang.clone(),
            dialect: params.dialect.clone(),
            stimulus_lang: params.stimulus_lang.clone(),
            speaker: None,
        });
    }
    Ok(out)
}

/// Features for one transcript: per symbol, a segment of
/// `frames_per_symbol` frames of prototype plus Gaussian noise.
pub fn render_features(
    spec: &SynthLangSpec,
    transcript: &str,
    rng: &mut ChaCha8Rng,
) -> Result<FeatureMatrix> {
    let dim = spec.feature_dim();
    let mut data: Vec<f32> = Vec::new();
    let mut frames = 0usize;
    for ch in transcript.chars() {
        let sym = spec.symbol_index(ch).ok_or_else(|| {
            Error::Invalid(format!(
                "character {ch:?} is not in the alphabet of `{}`",
                spec.lang
            ))
        })?;
        let proto = &spec.prototypes[sym];
        let n = rng.gen_range(spec.frames_per_symbol.0..=spec.frames_per_symbol.1);
        for _ in 0..n {
            for &p in proto {
                let noise: f64 = StandardNormal.sample(rng);
                data.push((p + spec.noise_sigma * noise) as f32);
            }
            frames += 1;
        }
    }
    FeatureMatrix::new(frames, dim, data)
}
