//! Shared fixtures for integration tests: synthetic corpora on disk and
//! ready-to-train configurations.

// not every test target uses every fixture
#![allow(dead_code)]

use std::path::Path;

use ctclab::corpus::{write_manifest, Utterance};
use ctclab::langdist::DistanceKind;
use ctclab::synth::{gen_corpus, AnchorConfig, CorpusParams, SynthLangSpec};
use ctclab::trainer::ExperimentConfig;

/// A desk-scale config rooted at `dir`; callers override what they need.
pub fn desk_config(dir: &Path, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        seed,
        lid_enabled: false,
        train_manifest: dir.join("train.jsonl"),
        anchor_lang: "qa".into(),
        langs: Some(vec!["qa".into()]),
        wordlists_dir: None,
        order_kind: DistanceKind::Ldnd,
        per_lang_cap: 10_000,
        context: 2,
        hidden_dims: vec![32],
        batch_size: 8,
        grad_accum_steps: 2,
        max_epochs: 10,
        learning_rate: 3e-3,
        bucket_by_length: true,
        threads: 1,
        dev_manifest: dir.join("dev.jsonl"),
        tests: vec![],
        checkpoint_dir: dir.join("runs"),
    }
}

/// Generate a split for one language and write its manifest as
/// `<name>.jsonl` under `dir`. Returns the utterances.
pub fn write_split(
    spec: &SynthLangSpec,
    dir: &Path,
    name: &str,
    n: usize,
    seed: u64,
) -> Vec<Utterance> {
    let params = CorpusParams::new(n, seed, name);
    let utts = gen_corpus(spec, &params, dir).expect("corpus generation");
    write_manifest(&utts, &dir.join(format!("{name}.jsonl"))).expect("manifest write");
    utts
}

/// Write one combined training manifest covering several languages.
pub fn write_train_manifest(specs: &[&SynthLangSpec], dir: &Path, n_per_lang: usize, seed: u64) {
    let mut all = Vec::new();
    for spec in specs {
        let params = CorpusParams::new(n_per_lang, seed, "train");
        all.extend(gen_corpus(spec, &params, dir).expect("corpus generation"));
    }
    write_manifest(&all, &dir.join("train.jsonl")).expect("manifest write");
}

pub fn default_anchor(lang: &str, seed: u64) -> SynthLangSpec {
    SynthLangSpec::anchor(lang, &AnchorConfig::default(), seed).expect("anchor")
}

pub fn noisy_anchor(lang: &str, noise_sigma: f64, seed: u64) -> SynthLangSpec {
    let cfg = AnchorConfig {
        noise_sigma,
        ..AnchorConfig::default()
    };
    SynthLangSpec::anchor(lang, &cfg, seed).expect("anchor")
}
