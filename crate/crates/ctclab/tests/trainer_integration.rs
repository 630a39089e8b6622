//! End-to-end trainer behavior: protocol structure, checkpoint selection,
//! determinism, memorization sanity, and evaluation plumbing.

mod common;

use std::collections::BTreeSet;

use ctclab::acoustic::{self, AdamHyper, ModelConfig, ModelParams, OptimizerState, ParamGrads};
use ctclab::corpus::{
    build_incremental_sets, group_by_lang, load_manifest, write_manifest, FeatureMatrix,
    Vocabulary,
};
use ctclab::ctc::{ctc_grad, ctc_loss, CtcTarget};
use ctclab::synth::{gen_language_family, CorpusParams};
use ctclab::trainer::{evaluate, run_protocol, train, EvalSet, TestSet};
use ctclab::Error;

use common::{default_anchor, desk_config, write_split, write_train_manifest};

#[test]
fn protocol_emits_the_seven_condition_structure() {
    let dir = tempfile::tempdir().unwrap();
    let seed = 31u64;
    let anchor = default_anchor("qa", seed);
    let family = gen_language_family(&anchor, &[0.4, 0.7, 1.0], seed).unwrap();
    let specs: Vec<&_> = std::iter::once(&anchor).chain(family.iter()).collect();
    write_train_manifest(&specs, dir.path(), 12, seed);
    write_split(&anchor, dir.path(), "dev", 8, seed + 1);
    write_split(&anchor, dir.path(), "test", 8, seed + 2);

    let mut cfg = desk_config(dir.path(), seed);
    cfg.max_epochs = 2;
    cfg.langs = Some(specs.iter().map(|s| s.lang.clone()).collect());
    cfg.tests = vec![TestSet {
        name: "standard".into(),
        manifest: dir.path().join("test.jsonl"),
    }];

    let outcome = run_protocol(&cfg, true).unwrap();
    let names: Vec<&str> = outcome.runs.iter().map(|r| r.condition.as_str()).collect();
    assert_eq!(
        names,
        vec![
            "qa",
            "qa-xa",
            "qa-xa+LID",
            "qa-xa-xb",
            "qa-xa-xb+LID",
            "qa-xa-xb-xc",
            "qa-xa-xb-xc+LID",
        ]
    );
    // report completeness: every condition exactly once per manifest
    for run in &outcome.runs {
        let manifests: Vec<&str> = run.test_reports.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(manifests, vec!["standard"]);
    }
    let unique: BTreeSet<&str> = names.iter().copied().collect();
    assert_eq!(unique.len(), names.len());

    // without LID variants: one condition per prefix
    let outcome = run_protocol(&cfg, false).unwrap();
    assert_eq!(outcome.runs.len(), 4);
}

#[test]
fn protocol_single_language_is_one_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let seed = 32u64;
    let anchor = default_anchor("qa", seed);
    write_train_manifest(&[&anchor], dir.path(), 10, seed);
    write_split(&anchor, dir.path(), "dev", 6, seed + 1);
    let mut cfg = desk_config(dir.path(), seed);
    cfg.max_epochs = 1;
    let outcome = run_protocol(&cfg, true).unwrap();
    assert_eq!(outcome.runs.len(), 1);
    assert_eq!(outcome.runs[0].condition, "qa");
    assert!(!outcome.runs[0].lid_enabled);
}

#[test]
fn explicit_order_overrides_wordlist_ordering() {
    let dir = tempfile::tempdir().unwrap();
    let seed = 33u64;
    let anchor = default_anchor("qa", seed);
    let family = gen_language_family(&anchor, &[0.4, 0.8], seed).unwrap();
    let specs: Vec<&_> = std::iter::once(&anchor).chain(family.iter()).collect();
    write_train_manifest(&specs, dir.path(), 10, seed);
    write_split(&anchor, dir.path(), "dev", 6, seed + 1);

    // wordlists would order qa, xa, xb; the explicit list skips xa
    let wl_dir = dir.path().join("wordlists");
    std::fs::create_dir_all(&wl_dir).unwrap();
    for spec in &specs {
        std::fs::write(
            wl_dir.join(format!("{}.txt", spec.lang)),
            spec.wordlist().to_file_string(),
        )
        .unwrap();
    }
    let mut cfg = desk_config(dir.path(), seed);
    cfg.max_epochs = 1;
    cfg.wordlists_dir = Some(wl_dir);
    cfg.langs = Some(vec!["qa".into(), "xb".into()]);
    let outcome = run_protocol(&cfg, true).unwrap();
    assert_eq!(outcome.order, vec!["qa".to_string(), "xb".to_string()]);
    let names: Vec<&str> = outcome.runs.iter().map(|r| r.condition.as_str()).collect();
    assert_eq!(names, vec!["qa", "qa-xb", "qa-xb+LID"]);

    // without the explicit list the matrix ordering is used
    cfg.langs = None;
    let outcome = run_protocol(&cfg, false).unwrap();
    assert_eq!(
        outcome.order,
        vec!["qa".to_string(), "xa".to_string(), "xb".to_string()]
    );
}

#[test]
fn single_epoch_run_selects_epoch_one() {
    let dir = tempfile::tempdir().unwrap();
    let seed = 34u64;
    let anchor = default_anchor("qa", seed);
    write_train_manifest(&[&anchor], dir.path(), 10, seed);
    write_split(&anchor, dir.path(), "dev", 6, seed + 1);
    let by_lang = group_by_lang(load_manifest(&dir.path().join("train.jsonl")).unwrap());
    let datasets = build_incremental_sets(&by_lang, &["qa".to_string()], 100, seed).unwrap();
    let dev = EvalSet::load("dev", &dir.path().join("dev.jsonl")).unwrap();
    let mut cfg = desk_config(dir.path(), seed);
    cfg.max_epochs = 1;
    let (record, _) = train(&cfg, &datasets[0], "qa", false, &dev, &[]).unwrap();
    assert_eq!(record.epochs.len(), 1);
    assert_eq!(record.selected_epoch, 1);
}

#[test]
fn selected_epoch_has_minimum_dev_wer_earliest_tie() {
    let dir = tempfile::tempdir().unwrap();
    let seed = 35u64;
    let anchor = default_anchor("qa", seed);
    write_train_manifest(&[&anchor], dir.path(), 24, seed);
    write_split(&anchor, dir.path(), "dev", 10, seed + 1);
    let by_lang = group_by_lang(load_manifest(&dir.path().join("train.jsonl")).unwrap());
    let datasets = build_incremental_sets(&by_lang, &["qa".to_string()], 100, seed).unwrap();
    let dev = EvalSet::load("dev", &dir.path().join("dev.jsonl")).unwrap();
    let mut cfg = desk_config(dir.path(), seed);
    cfg.max_epochs = 8;
    let (record, _) = train(&cfg, &datasets[0], "qa", false, &dev, &[]).unwrap();
    let best = record.dev_wer_selected();
    for e in &record.epochs {
        assert!(best <= e.dev_wer, "epoch {} beats the selected one", e.epoch);
        if e.dev_wer == best {
            assert!(e.epoch >= record.selected_epoch, "tie must pick the earliest");
        }
    }
}

#[test]
fn identical_configs_give_bit_identical_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let seed = 36u64;
    let anchor = default_anchor("qa", seed);
    write_train_manifest(&[&anchor], dir.path(), 16, seed);
    write_split(&anchor, dir.path(), "dev", 8, seed + 1);
    let by_lang = group_by_lang(load_manifest(&dir.path().join("train.jsonl")).unwrap());
    let datasets = build_incremental_sets(&by_lang, &["qa".to_string()], 100, seed).unwrap();
    let dev = EvalSet::load("dev", &dir.path().join("dev.jsonl")).unwrap();

    let run = |out: &str| -> Vec<u8> {
        let mut cfg = desk_config(dir.path(), seed);
        cfg.max_epochs = 3;
        cfg.checkpoint_dir = dir.path().join(out);
        let (record, _) = train(&cfg, &datasets[0], "qa", false, &dev, &[]).unwrap();
        std::fs::read(&record.checkpoint_path).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn multithreaded_gradients_match_single_thread() {
    let dir = tempfile::tempdir().unwrap();
    let seed = 37u64;
    let anchor = default_anchor("qa", seed);
    write_train_manifest(&[&anchor], dir.path(), 16, seed);
    write_split(&anchor, dir.path(), "dev", 8, seed + 1);
    let by_lang = group_by_lang(load_manifest(&dir.path().join("train.jsonl")).unwrap());
    let datasets = build_incremental_sets(&by_lang, &["qa".to_string()], 100, seed).unwrap();
    let dev = EvalSet::load("dev", &dir.path().join("dev.jsonl")).unwrap();

    let run = |threads: usize, out: &str| -> Vec<u8> {
        let mut cfg = desk_config(dir.path(), seed);
        cfg.max_epochs = 2;
        cfg.threads = threads;
        cfg.checkpoint_dir = dir.path().join(out);
        let (record, _) = train(&cfg, &datasets[0], "qa", false, &dev, &[]).unwrap();
        std::fs::read(&record.checkpoint_path).unwrap()
    };
    assert_eq!(run(1, "t1"), run(4, "t4"));
}

#[test]
fn infeasible_targets_are_skipped_and_counted() {
    let dir = tempfile::tempdir().unwrap();
    let seed = 38u64;
    let anchor = default_anchor("qa", seed);
    let mut utts = Vec::new();
    for spec_utt in
        ctclab::synth::gen_corpus(&anchor, &CorpusParams::new(9, seed, "train"), dir.path())
            .unwrap()
    {
        utts.push(spec_utt);
    }
    // one pathological utterance: 1 frame, 3-character transcript
    let short = dir.path().join("feats/short.ftr");
    FeatureMatrix::new(1, 8, vec![0.0; 8]).unwrap().write(&short).unwrap();
    utts.push(ctclab::corpus::Utterance {
        id: "short-0".into(),
        features: ctclab::corpus::Features::Path(short),
        transcript: "abc".into(),
        lang: "qa".into(),
        dialect: None,
        stimulus_lang: None,
        speaker: None,
    });
    write_manifest(&utts, &dir.path().join("train.jsonl")).unwrap();
    write_split(&anchor, dir.path(), "dev", 6, seed + 1);

    let by_lang = group_by_lang(load_manifest(&dir.path().join("train.jsonl")).unwrap());
    let datasets = build_incremental_sets(&by_lang, &["qa".to_string()], 100, seed).unwrap();
    let dev = EvalSet::load("dev", &dir.path().join("dev.jsonl")).unwrap();
    let mut cfg = desk_config(dir.path(), seed);
    cfg.max_epochs = 2;
    let (record, _) = train(&cfg, &datasets[0], "qa", false, &dev, &[]).unwrap();
    // skipped once per epoch
    assert_eq!(record.skipped_infeasible, 2);
}

#[test]
fn evaluate_is_deterministic_and_stratifies_by_stimulus() {
    let dir = tempfile::tempdir().unwrap();
    let seed = 39u64;
    let anchor = default_anchor("qa", seed);
    write_train_manifest(&[&anchor], dir.path(), 30, seed);
    write_split(&anchor, dir.path(), "dev", 8, seed + 1);
    // stimulus-tagged evaluation manifest: half qa, half xa stimuli
    let mut params_sf = CorpusParams::new(6, seed + 2, "sf");
    params_sf.stimulus_lang = Some("qa".into());
    let mut eval_utts =
        ctclab::synth::gen_corpus(&anchor, &params_sf, dir.path()).unwrap();
    let mut params_d = CorpusParams::new(6, seed + 3, "d");
    params_d.stimulus_lang = Some("xa".into());
    eval_utts.extend(ctclab::synth::gen_corpus(&anchor, &params_d, dir.path()).unwrap());
    write_manifest(&eval_utts, &dir.path().join("eval.jsonl")).unwrap();

    let by_lang = group_by_lang(load_manifest(&dir.path().join("train.jsonl")).unwrap());
    let datasets = build_incremental_sets(&by_lang, &["qa".to_string()], 100, seed).unwrap();
    let dev = EvalSet::load("dev", &dir.path().join("dev.jsonl")).unwrap();
    let mut cfg = desk_config(dir.path(), seed);
    cfg.max_epochs = 4;
    let (record, _) = train(&cfg, &datasets[0], "qa", false, &dev, &[]).unwrap();

    let report1 = evaluate(
        &record.checkpoint_path,
        &dir.path().join("eval.jsonl"),
        &record.vocab_path,
    )
    .unwrap();
    let keys: Vec<&str> = report1.groups.iter().map(|g| g.key.as_str()).collect();
    assert_eq!(keys, vec!["stimulus_lang=qa", "stimulus_lang=xa"]);
    let report2 = evaluate(
        &record.checkpoint_path,
        &dir.path().join("eval.jsonl"),
        &record.vocab_path,
    )
    .unwrap();
    assert_eq!(report1, report2);
}

#[test]
fn evaluate_rejects_mismatched_vocabulary() {
    let dir = tempfile::tempdir().unwrap();
    let seed = 40u64;
    let anchor = default_anchor("qa", seed);
    write_train_manifest(&[&anchor], dir.path(), 10, seed);
    write_split(&anchor, dir.path(), "dev", 6, seed + 1);
    let by_lang = group_by_lang(load_manifest(&dir.path().join("train.jsonl")).unwrap());
    let datasets = build_incremental_sets(&by_lang, &["qa".to_string()], 100, seed).unwrap();
    let dev = EvalSet::load("dev", &dir.path().join("dev.jsonl")).unwrap();
    let mut cfg = desk_config(dir.path(), seed);
    cfg.max_epochs = 1;
    let (record, _) = train(&cfg, &datasets[0], "qa", false, &dev, &[]).unwrap();
    // a vocabulary of a different size
    let wrong = dir.path().join("wrong.vocab");
    let vocab = Vocabulary::build(&datasets[0].utterances, true).unwrap();
    vocab.write(&wrong).unwrap();
    match evaluate(&record.checkpoint_path, &dir.path().join("dev.jsonl"), &wrong) {
        Err(Error::ShapeMismatch { .. }) => {}
        other => panic!("expected vocab mismatch, got {other:?}"),
    }
}

#[test]
fn memorization_two_hundred_steps_cut_loss_ninety_percent() {
    // 5 utterances, full-batch steps: mean loss after 200 optimizer steps
    // must be <= 10% of the initial mean loss
    let dir = tempfile::tempdir().unwrap();
    let seed = 41u64;
    let anchor = default_anchor("qa", seed);
    let utts =
        ctclab::synth::gen_corpus(&anchor, &CorpusParams::new(5, seed, "mem"), dir.path()).unwrap();
    let vocab = Vocabulary::build(&utts, false).unwrap();
    let items: Vec<(FeatureMatrix, CtcTarget)> = utts
        .iter()
        .map(|u| {
            (
                u.load_features().unwrap(),
                CtcTarget::new(vocab.encode_target(&u.transcript, &u.lang).unwrap()).unwrap(),
            )
        })
        .collect();
    let config = ModelConfig {
        input_dim: 8,
        context: 2,
        hidden_dims: vec![32],
        vocab_size: vocab.size(),
        seed,
    };
    let mut params = ModelParams::init(&config).unwrap();
    let mut opt = OptimizerState::new(&params, AdamHyper::with_learning_rate(3e-3));
    let mean_loss = |params: &ModelParams| -> f64 {
        items
            .iter()
            .map(|(f, t)| {
                ctc_loss(&acoustic::forward(params, f).unwrap(), t, vocab.blank_index()).unwrap()
            })
            .sum::<f64>()
            / items.len() as f64
    };
    let initial = mean_loss(&params);
    for _ in 0..200 {
        let mut grads = ParamGrads::zeros_like(&params);
        for (f, t) in &items {
            let lattice = acoustic::forward(&params, f).unwrap();
            let dlattice = ctc_grad(&lattice, t, vocab.blank_index()).unwrap();
            grads.add_scaled(&acoustic::backward(&params, f, &dlattice).unwrap(), 1.0);
        }
        grads.scale(1.0 / items.len() as f64);
        opt.step(&mut params, &grads).unwrap();
    }
    let trained = mean_loss(&params);
    assert!(
        trained <= 0.1 * initial,
        "loss only moved from {initial:.3} to {trained:.3}"
    );
}

#[test]
fn memorized_utterance_evaluates_to_zero_wer() {
    // train on a tiny set, then evaluate on a manifest holding one training
    // utterance: that group's WER must be 0
    let dir = tempfile::tempdir().unwrap();
    let seed = 42u64;
    let anchor = default_anchor("qa", seed);
    let train_utts =
        ctclab::synth::gen_corpus(&anchor, &CorpusParams::new(4, seed, "train"), dir.path())
            .unwrap();
    write_manifest(&train_utts, &dir.path().join("train.jsonl")).unwrap();
    write_manifest(&train_utts[..1], &dir.path().join("one.jsonl")).unwrap();
    write_split(&anchor, dir.path(), "dev", 6, seed + 1);

    let by_lang = group_by_lang(load_manifest(&dir.path().join("train.jsonl")).unwrap());
    let datasets = build_incremental_sets(&by_lang, &["qa".to_string()], 100, seed).unwrap();
    let dev = EvalSet::load("dev", &dir.path().join("dev.jsonl")).unwrap();
    let mut cfg = desk_config(dir.path(), seed);
    cfg.max_epochs = 200;
    cfg.batch_size = 4;
    cfg.grad_accum_steps = 1;
    let (record, _) = train(&cfg, &datasets[0], "qa", false, &dev, &[]).unwrap();
    let report = evaluate(
        &record.checkpoint_path,
        &dir.path().join("one.jsonl"),
        &record.vocab_path,
    )
    .unwrap();
    assert_eq!(report.groups.len(), 1);
    assert_eq!(report.groups[0].wer, 0.0, "memorized utterance must decode exactly");
}

#[test]
fn run_record_json_lines_are_stable() {
    let dir = tempfile::tempdir().unwrap();
    let seed = 43u64;
    let anchor = default_anchor("qa", seed);
    write_train_manifest(&[&anchor], dir.path(), 10, seed);
    write_split(&anchor, dir.path(), "dev", 6, seed + 1);
    write_split(&anchor, dir.path(), "test", 6, seed + 2);
    let by_lang = group_by_lang(load_manifest(&dir.path().join("train.jsonl")).unwrap());
    let datasets = build_incremental_sets(&by_lang, &["qa".to_string()], 100, seed).unwrap();
    let dev = EvalSet::load("dev", &dir.path().join("dev.jsonl")).unwrap();
    let test = EvalSet::load("standard", &dir.path().join("test.jsonl")).unwrap();
    let mut cfg = desk_config(dir.path(), seed);
    cfg.max_epochs = 2;
    let (r1, _) = train(&cfg, &datasets[0], "qa", false, &dev, &[&test]).unwrap();
    let (r2, _) = train(&cfg, &datasets[0], "qa", false, &dev, &[&test]).unwrap();
    assert_eq!(r1.to_json_line(), r2.to_json_line());
    let parsed: serde_json::Value = serde_json::from_str(&r1.to_json_line()).unwrap();
    assert_eq!(parsed["condition"], "qa");
    assert_eq!(parsed["selected_epoch"].as_u64().unwrap() as usize, r1.selected_epoch);
}
