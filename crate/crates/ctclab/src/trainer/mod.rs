//! The experiment driver: epoch loop with gradient accumulation, per-epoch
//! dev WER, best-checkpoint selection, and the staged protocol that walks
//! from the monolingual baseline through incremental multilingual conditions
//! and their LID-token variants.

pub mod config;

pub use config::{ExperimentConfig, TestSet};

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde_json::json;

use crate::acoustic::{self, AdamHyper, ModelConfig, ModelParams, OptimizerState, ParamGrads};
use crate::corpus::{
    build_incremental_sets, group_by_lang, load_manifest, Dataset, FeatureMatrix,
    Utterance, Vocabulary,
};
use crate::ctc::{ctc_grad, ctc_loss, greedy_decode, CtcTarget};
use crate::error::{Error, Result};
use crate::langdist::{order_by_distance, LanguageDistanceMatrix, Wordlist};
use crate::metrics::{extract_lid, stratified_report, MetricReport, ScoredUtterance};
use crate::rng;

/// One epoch's summary.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_train_loss: f64,
    pub dev_wer: f64,
}

/// Everything a finished training run reports.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub condition: String,
    pub langs: Vec<String>,
    pub lid_enabled: bool,
    /// Constant throughout the run; there is no schedule.
    pub learning_rate: f64,
    pub epochs: Vec<EpochRecord>,
    /// 1-based; the epoch with the lowest dev WER, earliest on ties.
    pub selected_epoch: usize,
    pub skipped_infeasible: usize,
    pub warnings: Vec<String>,
    pub checkpoint_path: PathBuf,
    pub vocab_path: PathBuf,
    /// One report per evaluation manifest, in config order.
    pub test_reports: Vec<(String, MetricReport)>,
}

impl RunRecord {
    pub fn dev_wer_selected(&self) -> f64 {
        self.epochs[self.selected_epoch - 1].dev_wer
    }

    /// One structured log line (JSON object, sorted keys).
    pub fn to_json_line(&self) -> String {
        let epochs: Vec<serde_json::Value> = self
            .epochs
            .iter()
            .map(|e| {
                json!({
                    "epoch": e.epoch,
                    "train_loss": e.mean_train_loss,
                    "dev_wer": e.dev_wer,
                })
            })
            .collect();
        let tests: serde_json::Value = self
            .test_reports
            .iter()
            .map(|(name, report)| {
                let rows: Vec<serde_json::Value> = report
                    .groups
                    .iter()
                    .map(|g| {
                        json!({
                            "group": g.key,
                            "wer": g.wer,
                            "cer": g.cer,
                            "lid_recall": g.lid_recall,
                            "n_utt": g.n_utterances,
                            "n_words": g.n_words,
                        })
                    })
                    .collect();
                (name.clone(), serde_json::Value::Array(rows))
            })
            .collect::<serde_json::Map<String, serde_json::Value>>()
            .into();
        json!({
            "condition": self.condition,
            "langs": self.langs,
            "lid": self.lid_enabled,
            "learning_rate": self.learning_rate,
            "epochs": epochs,
            "selected_epoch": self.selected_epoch,
            "dev_wer": self.dev_wer_selected(),
            "skipped_infeasible": self.skipped_infeasible,
            "warnings": self.warnings,
            "checkpoint": self.checkpoint_path.to_string_lossy(),
            "vocab": self.vocab_path.to_string_lossy(),
            "tests": tests,
        })
        .to_string()
    }
}

/// An evaluation manifest with its features resident in memory.
pub struct EvalSet {
    pub name: String,
    pub utterances: Vec<Utterance>,
    features: Vec<FeatureMatrix>,
}

impl EvalSet {
    pub fn load(name: impl Into<String>, manifest: &Path) -> Result<Self> {
        let utterances = load_manifest(manifest)?;
        if utterances.is_empty() {
            return Err(Error::Invalid(format!(
                "evaluation manifest {} is empty",
                manifest.display()
            )));
        }
        let features = utterances
            .iter()
            .map(|u| u.load_features())
            .collect::<Result<Vec<_>>>()?;
        Ok(EvalSet {
            name: name.into(),
            utterances,
            features,
        })
    }

    pub fn from_memory(name: impl Into<String>, utterances: Vec<Utterance>) -> Result<Self> {
        let features = utterances
            .iter()
            .map(|u| u.load_features())
            .collect::<Result<Vec<_>>>()?;
        Ok(EvalSet {
            name: name.into(),
            utterances,
            features,
        })
    }
}

/// A training utterance with features and encoded target resident.
struct TrainItem {
    features: FeatureMatrix,
    target: CtcTarget,
}

fn prepare_items(
    dataset: &Dataset,
    vocab: &Vocabulary,
) -> Result<(Vec<TrainItem>, usize)> {
    let mut items = Vec::with_capacity(dataset.utterances.len());
    let mut input_dim = None;
    for u in &dataset.utterances {
        let features = u.load_features()?;
        match input_dim {
            None => input_dim = Some(features.dim()),
            Some(d) if d != features.dim() => {
                return Err(Error::ShapeMismatch {
                    expected: format!("feature dim {d}"),
                    actual: format!("feature dim {} in `{}`", features.dim(), u.id),
                })
            }
            _ => {}
        }
        let target = CtcTarget::new(vocab.encode_target(&u.transcript, &u.lang)?)?;
        items.push(TrainItem { features, target });
    }
    Ok((items, input_dim.expect("dataset non-empty")))
}

/// Epoch presentation order. With bucketing, items are sorted by length,
/// split into effective-batch-sized buckets, shuffled inside each bucket,
/// and the buckets themselves shuffled; otherwise a plain shuffle. Both are
/// driven by the `(seed, "epoch:<n>")` stream, so the order is a pure
/// function of the config.
fn epoch_order(
    lengths: &[usize],
    epoch: usize,
    seed: u64,
    bucket_size: usize,
    bucket_by_length: bool,
) -> Vec<usize> {
    let mut rng = rng::derive(seed, &format!("epoch:{epoch}"));
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    if !bucket_by_length {
        order.shuffle(&mut rng);
        return order;
    }
    order.sort_by_key(|&i| (lengths[i], i));
    let mut buckets: Vec<Vec<usize>> = order
        .chunks(bucket_size.max(1))
        .map(<[usize]>::to_vec)
        .collect();
    for bucket in &mut buckets {
        bucket.shuffle(&mut rng);
    }
    buckets.shuffle(&mut rng);
    buckets.into_iter().flatten().collect()
}

/// Loss and parameter gradient for one utterance, or `None` if the target is
/// infeasible for its frame count.
/// Loss and gradient for one utterance; `None` marks an infeasible target.
type UtteranceGrad = Option<(f64, ParamGrads)>;

fn utterance_gradient(
    params: &ModelParams,
    item: &TrainItem,
    blank: usize,
) -> Result<UtteranceGrad> {
    let lattice = acoustic::forward(params, &item.features)?;
    let loss = match ctc_loss(&lattice, &item.target, blank) {
        Ok(l) => l,
        Err(Error::Infeasible { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let dlattice = ctc_grad(&lattice, &item.target, blank)?;
    let grads = acoustic::backward(params, &item.features, &dlattice)?;
    Ok(Some((loss, grads)))
}

/// Per-utterance gradients for a micro-batch, in input order. Fans out to
/// `threads` workers; the caller reduces sequentially, so the result does
/// not depend on thread count.
fn micro_batch_gradients(
    params: &ModelParams,
    items: &[TrainItem],
    indices: &[usize],
    blank: usize,
    threads: usize,
) -> Result<Vec<Option<(f64, ParamGrads)>>> {
    if threads <= 1 || indices.len() <= 1 {
        return indices
            .iter()
            .map(|&i| utterance_gradient(params, &items[i], blank))
            .collect();
    }
    let chunk = indices.len().div_ceil(threads);
    let mut results: Vec<Result<Vec<Option<(f64, ParamGrads)>>>> = Vec::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = indices
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|&i| utterance_gradient(params, &items[i], blank))
                        .collect::<Result<Vec<_>>>()
                })
            })
            .collect();
        for h in handles {
            results.push(h.join().expect("gradient worker panicked"));
        }
    });
    let mut flat = Vec::with_capacity(indices.len());
    for r in results {
        flat.extend(r?);
    }
    Ok(flat)
}

/// Decode an evaluation set with the given parameters and score it,
/// stratified by whichever tags the manifest carries.
fn evaluate_set(params: &ModelParams, vocab: &Vocabulary, eval: &EvalSet) -> Result<MetricReport> {
    if params.config.vocab_size != vocab.size() {
        return Err(Error::ShapeMismatch {
            expected: format!("model output dim {}", params.config.vocab_size),
            actual: format!("vocabulary of size {}", vocab.size()),
        });
    }
    let blank = vocab.blank_index();
    let mut scored = Vec::with_capacity(eval.utterances.len());
    for (u, f) in eval.utterances.iter().zip(&eval.features) {
        let lattice = acoustic::forward(params, f)?;
        let decoded = greedy_decode(&lattice, blank);
        let (predicted_lid, remainder) = extract_lid(&decoded, vocab);
        scored.push(ScoredUtterance {
            id: u.id.clone(),
            reference: u.transcript.clone(),
            hypothesis: vocab.decode_to_string(&remainder),
            lang: u.lang.clone(),
            predicted_lid,
            dialect: u.dialect.clone(),
            stimulus_lang: u.stimulus_lang.clone(),
        });
    }
    let mut group_by = Vec::new();
    if eval.utterances.iter().any(|u| u.dialect.is_some()) {
        group_by.push("dialect".to_string());
    }
    if eval.utterances.iter().any(|u| u.stimulus_lang.is_some()) {
        group_by.push("stimulus_lang".to_string());
    }
    stratified_report(&scored, &group_by)
}

/// Train one condition: epoch loop with gradient accumulation, dev WER per
/// epoch, best checkpoint kept and written, test manifests evaluated with it.
pub fn train(
    cfg: &ExperimentConfig,
    dataset: &Dataset,
    condition: &str,
    lid_enabled: bool,
    dev: &EvalSet,
    tests: &[&EvalSet],
) -> Result<(RunRecord, ModelParams)> {
    cfg.validate()?;
    if dataset.utterances.is_empty() {
        return Err(Error::Invalid(format!(
            "condition `{condition}`: empty training dataset"
        )));
    }
    let vocab = Vocabulary::build(&dataset.utterances, lid_enabled)?;
    let (items, input_dim) = prepare_items(dataset, &vocab)?;
    let blank = vocab.blank_index();
    let model_config = ModelConfig {
        input_dim,
        context: cfg.context,
        hidden_dims: cfg.hidden_dims.clone(),
        vocab_size: vocab.size(),
        seed: cfg.seed,
    };
    let mut params = ModelParams::init(&model_config)?;
    let mut opt = OptimizerState::new(
        &params,
        AdamHyper {
            learning_rate: cfg.learning_rate,
            ..AdamHyper::default()
        },
    );
    let lengths: Vec<usize> = items.iter().map(|it| it.features.frames()).collect();
    let bucket_size = cfg.batch_size * cfg.grad_accum_steps;

    let mut epochs = Vec::with_capacity(cfg.max_epochs);
    let mut skipped_infeasible = 0usize;
    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut step = 0usize;
    for epoch in 1..=cfg.max_epochs {
        let order = epoch_order(&lengths, epoch, cfg.seed, bucket_size, cfg.bucket_by_length);
        let micro_batches: Vec<&[usize]> = order.chunks(cfg.batch_size).collect();
        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;
        for group in micro_batches.chunks(cfg.grad_accum_steps) {
            // One step per group: the mean gradient over every feasible
            // utterance of the effective batch, accumulated in utterance
            // order. Splitting the same utterances into more micro-batches
            // therefore changes nothing, bit for bit.
            let mut accumulated = ParamGrads::zeros_like(&params);
            let mut feasible = 0usize;
            for micro in group {
                let results = micro_batch_gradients(&params, &items, micro, blank, cfg.threads)?;
                for r in results {
                    match r {
                        Some((loss, grads)) => {
                            if !loss.is_finite() {
                                return Err(Error::NonFiniteLoss { epoch, step });
                            }
                            accumulated.add_scaled(&grads, 1.0);
                            loss_sum += loss;
                            loss_count += 1;
                            feasible += 1;
                        }
                        None => skipped_infeasible += 1,
                    }
                }
            }
            if feasible == 0 {
                continue;
            }
            accumulated.scale(1.0 / feasible as f64);
            step += 1;
            opt.step(&mut params, &accumulated)?;
        }
        let dev_report = evaluate_set(&params, &vocab, dev)?;
        let dev_wer = dev_report.overall_wer();
        if !dev_wer.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, step });
        }
        epochs.push(EpochRecord {
            epoch,
            mean_train_loss: if loss_count > 0 {
                loss_sum / loss_count as f64
            } else {
                f64::NAN
            },
            dev_wer,
        });
        let better = match &best {
            None => true,
            Some((best_wer, _, _)) => dev_wer < *best_wer,
        };
        if better {
            best = Some((dev_wer, epoch, params.clone()));
        }
    }
    let (_, selected_epoch, best_params) = best.expect("max_epochs >= 1");

    std::fs::create_dir_all(&cfg.checkpoint_dir).map_err(|e| Error::io(&cfg.checkpoint_dir, e))?;
    let checkpoint_path = cfg.checkpoint_dir.join(format!("{condition}.ckpt"));
    acoustic::checkpoint::save(&best_params, &checkpoint_path)?;
    let vocab_path = cfg.checkpoint_dir.join(format!("{condition}.vocab"));
    vocab.write(&vocab_path)?;

    let mut test_reports = Vec::with_capacity(tests.len());
    for eval in tests {
        test_reports.push((eval.name.clone(), evaluate_set(&best_params, &vocab, eval)?));
    }
    let record = RunRecord {
        condition: condition.to_string(),
        langs: dataset.langs.clone(),
        lid_enabled,
        learning_rate: cfg.learning_rate,
        epochs,
        selected_epoch,
        skipped_infeasible,
        warnings: dataset.warnings.iter().map(ToString::to_string).collect(),
        checkpoint_path,
        vocab_path,
        test_reports,
    };
    Ok((record, best_params))
}

/// Score a saved checkpoint against a manifest using its vocabulary file.
pub fn evaluate(checkpoint: &Path, manifest: &Path, vocab_path: &Path) -> Result<MetricReport> {
    let params = acoustic::checkpoint::load(checkpoint)?;
    let vocab = Vocabulary::read(vocab_path)?;
    let eval = EvalSet::load("eval", manifest)?;
    evaluate_set(&params, &vocab, &eval)
}

/// Output of a full protocol run.
pub struct ProtocolOutcome {
    /// Language order actually used (from config or distance matrix).
    pub order: Vec<String>,
    pub runs: Vec<RunRecord>,
}

impl ProtocolOutcome {
    /// Consolidated CSV: one row per condition, manifest and group.
    pub fn consolidated_csv(&self) -> String {
        let mut out =
            String::from("condition,langs,lid,dev_wer,manifest,group,wer,cer,lid_recall,n_utt,n_words\n");
        for run in &self.runs {
            for (manifest, report) in &run.test_reports {
                for g in &report.groups {
                    let lid = g.lid_recall.map(|r| format!("{r:.4}")).unwrap_or_default();
                    let _ = writeln!(
                        out,
                        "{},{},{},{:.4},{manifest},{},{:.4},{:.4},{lid},{},{}",
                        run.condition,
                        run.langs.join("-"),
                        if run.lid_enabled { "on" } else { "off" },
                        run.dev_wer_selected(),
                        g.key,
                        g.wer,
                        g.cer,
                        g.n_utterances,
                        g.n_words,
                    );
                }
            }
        }
        out
    }

    /// Line-delimited run records.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for run in &self.runs {
            out.push_str(&run.to_json_line());
            out.push('\n');
        }
        out
    }
}

/// Resolve the language order: the explicit config list when present,
/// otherwise distance-based ordering from the wordlists directory.
pub fn resolve_order(cfg: &ExperimentConfig) -> Result<Vec<String>> {
    if let Some(langs) = &cfg.langs {
        return Ok(langs.clone());
    }
    let dir = cfg
        .wordlists_dir
        .as_ref()
        .expect("validated: langs or wordlists_dir present");
    let wordlists = load_wordlists(dir)?;
    let matrix = LanguageDistanceMatrix::compute(&wordlists, cfg.order_kind)?;
    order_by_distance(&cfg.anchor_lang, &matrix)
}

/// Parse every wordlist file (`*.txt`) in a directory, sorted by file name.
pub fn load_wordlists(dir: &Path) -> Result<Vec<Wordlist>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "txt"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Invalid(format!(
            "no wordlist files (*.txt) in {}",
            dir.display()
        )));
    }
    paths.iter().map(|p| Wordlist::parse(p)).collect()
}

/// Run the staged protocol: the monolingual baseline, every incremental
/// prefix of the language order, and (optionally) an LID variant of every
/// multilingual condition.
pub fn run_protocol(cfg: &ExperimentConfig, lid_variants: bool) -> Result<ProtocolOutcome> {
    cfg.validate()?;
    let order = resolve_order(cfg)?;
    let by_lang = group_by_lang(load_manifest(&cfg.train_manifest)?);
    if !by_lang.contains_key(&cfg.anchor_lang) {
        return Err(Error::MissingAnchor {
            lang: cfg.anchor_lang.clone(),
        });
    }
    let datasets = build_incremental_sets(&by_lang, &order, cfg.per_lang_cap, cfg.seed)?;
    // nesting is a corpus invariant; re-checked here once per run
    for pair in datasets.windows(2) {
        let prev: BTreeSet<&str> = pair[0].ids().into_iter().collect();
        let next: BTreeSet<&str> = pair[1].ids().into_iter().collect();
        if !prev.is_subset(&next) {
            return Err(Error::Invalid(format!(
                "dataset `{}` is not nested inside `{}`",
                pair[0].name(),
                pair[1].name()
            )));
        }
    }
    let dev = EvalSet::load("dev", &cfg.dev_manifest)?;
    let tests: Vec<EvalSet> = cfg
        .tests
        .iter()
        .map(|t| EvalSet::load(t.name.clone(), &t.manifest))
        .collect::<Result<Vec<_>>>()?;
    let test_refs: Vec<&EvalSet> = tests.iter().collect();

    let mut runs = Vec::new();
    for (k, dataset) in datasets.iter().enumerate() {
        let name = dataset.name();
        let (record, _) = train(cfg, dataset, &name, false, &dev, &test_refs)?;
        runs.push(record);
        if lid_variants && k > 0 {
            let lid_name = format!("{name}+LID");
            let (record, _) = train(cfg, dataset, &lid_name, true, &dev, &test_refs)?;
            runs.push(record);
        }
    }
    Ok(ProtocolOutcome { order, runs })
}

/// Write the protocol artifacts: `runrecords.jsonl` and `consolidated.csv`
/// in the checkpoint directory.
pub fn write_protocol_outputs(cfg: &ExperimentConfig, outcome: &ProtocolOutcome) -> Result<()> {
    std::fs::create_dir_all(&cfg.checkpoint_dir).map_err(|e| Error::io(&cfg.checkpoint_dir, e))?;
    let records = cfg.checkpoint_dir.join("runrecords.jsonl");
    std::fs::write(&records, outcome.to_json_lines()).map_err(|e| Error::io(&records, e))?;
    let csv = cfg.checkpoint_dir.join("consolidated.csv");
    std::fs::write(&csv, outcome.consolidated_csv()).map_err(|e| Error::io(&csv, e))?;
    Ok(())
}
