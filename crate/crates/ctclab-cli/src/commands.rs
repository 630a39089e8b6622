//! Subcommand implementations.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ctclab::corpus::{
    build_incremental_sets, group_by_lang, load_manifest, write_manifest, DatasetSpec,
};
use ctclab::langdist::{order_by_distance, DistanceKind, LanguageDistanceMatrix};
use ctclab::synth::{
    dialect_variant, gen_corpus, gen_language_family, AnchorConfig, CorpusParams, SynthLangSpec,
};
use ctclab::trainer::{self, EvalSet, ExperimentConfig};
use ctclab::Error;

pub enum CliError {
    /// Bad invocation or inputs; exits 1.
    Usage(String),
    /// Library error; exits by error class.
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

type CliResult = Result<(), CliError>;

#[derive(Parser)]
#[command(
    name = "ctclab",
    version,
    about = "Multilingual CTC training lab: synthetic corpora, language distances, \
             incremental fine-tuning experiments with LID tokens"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic language family with train/dev/test corpora
    Synth(SynthArgs),
    /// Build balanced incremental datasets from a training manifest
    BuildDataset(BuildDatasetArgs),
    /// Compute a language distance matrix and similarity ordering
    LangDistance(LangDistanceArgs),
    /// Train a single condition described by a config file
    Train(TrainArgs),
    /// Score a checkpoint against an evaluation manifest
    Evaluate(EvaluateArgs),
    /// Run the staged protocol: baseline, incremental languages, LID variants
    Protocol(ProtocolArgs),
    /// Render a ctclab CSV report as an aligned table
    Report(ReportArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum OnOff {
    On,
    Off,
}

impl OnOff {
    fn as_bool(self) -> bool {
        self == OnOff::On
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for manifests, features and wordlists
    #[arg(long)]
    out_dir: PathBuf,
    /// Master seed for the whole family
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Anchor language code
    #[arg(long, default_value = "qa")]
    anchor: String,
    /// Ascending prototype/lexicon drifts, one derived language each
    #[arg(long, default_value = "0.4,0.7,1.0", value_delimiter = ',')]
    drifts: Vec<f64>,
    /// Training sentences per language
    #[arg(long, default_value_t = 300)]
    train_per_lang: usize,
    /// Development sentences (anchor language)
    #[arg(long, default_value_t = 60)]
    dev_size: usize,
    /// Test sentences (anchor language)
    #[arg(long, default_value_t = 60)]
    test_size: usize,
    /// Also emit a dialect test corpus with this prototype drift
    #[arg(long)]
    dialect_drift: Option<f64>,
    /// Per-dimension feature noise (defaults to the generator's default)
    #[arg(long)]
    noise_sigma: Option<f64>,
}

#[derive(Args)]
struct BuildDatasetArgs {
    /// Training manifest covering all languages
    #[arg(long)]
    manifest: PathBuf,
    /// Anchor language code
    #[arg(long)]
    anchor: String,
    /// Explicit language order (anchor first); overrides --wordlists
    #[arg(long, value_delimiter = ',')]
    langs: Option<Vec<String>>,
    /// Wordlist directory for distance-based ordering
    #[arg(long)]
    wordlists: Option<PathBuf>,
    /// Distance kind for --wordlists ordering
    #[arg(long, default_value = "ldnd")]
    kind: String,
    /// Per-language sentence cap
    #[arg(long)]
    cap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where the dataset manifests go
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct LangDistanceArgs {
    /// Directory of wordlist files (*.txt)
    #[arg(long)]
    wordlists: PathBuf,
    /// ldn or ldnd
    #[arg(long, default_value = "ldnd")]
    kind: String,
    /// Emit the similarity ordering for this anchor as a trailing comment
    #[arg(long)]
    anchor: Option<String>,
}

#[derive(Args)]
struct CommonOverrides {
    /// Experiment config file (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output/checkpoint directory
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Override the training manifest
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Override the explicit language order
    #[arg(long, value_delimiter = ',')]
    langs: Option<Vec<String>>,
    /// Override the wordlists directory
    #[arg(long)]
    wordlists: Option<PathBuf>,
    /// Override the distance kind used for ordering
    #[arg(long)]
    kind: Option<String>,
    /// Override the anchor language
    #[arg(long)]
    anchor: Option<String>,
    /// Worker threads for gradient computation
    #[arg(long, env = "CTCLAB_THREADS")]
    threads: Option<usize>,
}

impl CommonOverrides {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(dir) = &self.out_dir {
            cfg.checkpoint_dir = dir.clone();
        }
        if let Some(manifest) = &self.manifest {
            cfg.train_manifest = manifest.clone();
        }
        if let Some(langs) = &self.langs {
            cfg.langs = Some(langs.clone());
        }
        if let Some(dir) = &self.wordlists {
            cfg.wordlists_dir = Some(dir.clone());
            if self.langs.is_none() {
                cfg.langs = None; // fall back to distance ordering
            }
        }
        if let Some(kind) = &self.kind {
            cfg.order_kind = kind.parse()?;
        }
        if let Some(anchor) = &self.anchor {
            cfg.anchor_lang = anchor.clone();
        }
        if let Some(threads) = self.threads {
            cfg.threads = threads;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonOverrides,
    /// Train with LID tokens (overrides the config)
    #[arg(long)]
    lid: Option<OnOff>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Checkpoint file written by train/protocol
    #[arg(long)]
    checkpoint: PathBuf,
    /// Evaluation manifest
    #[arg(long)]
    manifest: PathBuf,
    /// Vocabulary file saved next to the checkpoint
    #[arg(long)]
    vocab: PathBuf,
    /// Output format
    #[arg(long, default_value = "table")]
    format: ReportFormat,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Table,
    Csv,
}

#[derive(Args)]
struct ProtocolArgs {
    #[command(flatten)]
    common: CommonOverrides,
    /// Also run an LID-token variant of every multilingual condition
    #[arg(long, default_value = "on")]
    lid: OnOff,
}

#[derive(Args)]
struct ReportArgs {
    /// A ctclab CSV file (consolidated.csv or a metric report)
    #[arg(long)]
    input: PathBuf,
}

pub fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Synth(args) => synth(args),
        Command::BuildDataset(args) => build_dataset(args),
        Command::LangDistance(args) => lang_distance(args),
        Command::Train(args) => train(args),
        Command::Evaluate(args) => evaluate(args),
        Command::Protocol(args) => protocol(args),
        Command::Report(args) => report(args),
    }
}

/// How much farther the translated-stimulus half of the dialect corpus
/// drifts, mirroring speech that is less anchored to the standard language.
const STIMULUS_DRIFT_FACTOR: f64 = 1.3;

fn synth(args: SynthArgs) -> CliResult {
    let mut anchor_cfg = AnchorConfig::default();
    if let Some(noise) = args.noise_sigma {
        if noise < 0.0 {
            return Err(CliError::Usage("--noise-sigma must be >= 0".into()));
        }
        anchor_cfg.noise_sigma = noise;
    }
    let anchor = SynthLangSpec::anchor(args.anchor.clone(), &anchor_cfg, args.seed)?;
    let family = gen_language_family(&anchor, &args.drifts, args.seed)?;
    let mut languages = vec![anchor.clone()];
    languages.extend(family.iter().cloned());

    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;

    let mut train_utts = Vec::new();
    for spec in &languages {
        let params = CorpusParams::new(args.train_per_lang, args.seed, "train");
        train_utts.extend(gen_corpus(spec, &params, &args.out_dir)?);
    }
    let train_manifest = args.out_dir.join("train.jsonl");
    write_manifest(&train_utts, &train_manifest)?;

    let dev_utts = gen_corpus(
        &anchor,
        &CorpusParams::new(args.dev_size, args.seed.wrapping_add(1), "dev"),
        &args.out_dir,
    )?;
    write_manifest(&dev_utts, &args.out_dir.join("dev.jsonl"))?;
    let test_utts = gen_corpus(
        &anchor,
        &CorpusParams::new(args.test_size, args.seed.wrapping_add(2), "test"),
        &args.out_dir,
    )?;
    write_manifest(&test_utts, &args.out_dir.join("test.jsonl"))?;

    let mut test_sets = vec![("standard".to_string(), "test.jsonl".to_string())];
    if let Some(drift) = args.dialect_drift {
        let half = args.test_size.div_ceil(2).max(1);
        // standard-stimulus half
        let near = dialect_variant(&anchor, drift, args.seed)?;
        let mut params = CorpusParams::new(half, args.seed.wrapping_add(3), "dial-sf");
        params.dialect = Some("drifted".into());
        params.stimulus_lang = Some(anchor.lang.clone());
        let mut dial_utts = gen_corpus(&near, &params, &args.out_dir)?;
        // translated-stimulus half drifts farther from the standard
        let far = dialect_variant(&anchor, (drift * STIMULUS_DRIFT_FACTOR).min(1.0), args.seed)?;
        let stim = family
            .first()
            .map(|l| l.lang.clone())
            .unwrap_or_else(|| anchor.lang.clone());
        let mut params = CorpusParams::new(half, args.seed.wrapping_add(4), "dial-tr");
        params.dialect = Some("drifted".into());
        params.stimulus_lang = Some(stim);
        dial_utts.extend(gen_corpus(&far, &params, &args.out_dir)?);
        write_manifest(&dial_utts, &args.out_dir.join("dialect.jsonl"))?;
        test_sets.push(("dialect".to_string(), "dialect.jsonl".to_string()));
    }

    let wordlist_dir = args.out_dir.join("wordlists");
    std::fs::create_dir_all(&wordlist_dir).map_err(|e| Error::io(&wordlist_dir, e))?;
    for spec in &languages {
        let path = wordlist_dir.join(format!("{}.txt", spec.lang));
        std::fs::write(&path, spec.wordlist().to_file_string())
            .map_err(|e| Error::io(&path, e))?;
    }

    let config_path = args.out_dir.join("experiment.toml");
    std::fs::write(
        &config_path,
        starter_config(args.seed, &anchor.lang, args.train_per_lang, &test_sets),
    )
    .map_err(|e| Error::io(&config_path, e))?;

    println!("languages: {}", languages.iter().map(|l| l.lang.as_str()).collect::<Vec<_>>().join(" "));
    println!(
        "train: {} utterances -> {}",
        train_utts.len(),
        train_manifest.display()
    );
    println!("dev: {} / test: {} utterances", dev_utts.len(), test_utts.len());
    if args.dialect_drift.is_some() {
        println!("dialect test corpus -> {}", args.out_dir.join("dialect.jsonl").display());
    }
    println!("wordlists -> {}", wordlist_dir.display());
    println!("starter config -> {}", config_path.display());
    Ok(())
}

fn starter_config(
    seed: u64,
    anchor: &str,
    per_lang_cap: usize,
    test_sets: &[(String, String)],
) -> String {
    let mut tests = String::new();
    for (name, manifest) in test_sets {
        let _ = write!(
            tests,
            "\n[[eval.test]]\nname = \"{name}\"\nmanifest = \"{manifest}\"\n"
        );
    }
    format!(
        r#"seed = {seed}
lid_enabled = false

[data]
train_manifest = "train.jsonl"
anchor_lang = "{anchor}"
wordlists_dir = "wordlists"
order_kind = "ldnd"
per_lang_cap = {per_lang_cap}

[model]
context = 2
hidden_dims = [64]

[train]
batch_size = 8
grad_accum_steps = 2
max_epochs = 25
learning_rate = 3e-3
bucket_by_length = true
threads = 1

[eval]
dev_manifest = "dev.jsonl"
{tests}
[output]
checkpoint_dir = "runs"
"#
    )
}

fn build_dataset(args: BuildDatasetArgs) -> CliResult {
    let order = if let Some(langs) = &args.langs {
        langs.clone()
    } else if let Some(dir) = &args.wordlists {
        let wordlists = trainer::load_wordlists(dir)?;
        let kind: DistanceKind = args.kind.parse()?;
        let matrix = LanguageDistanceMatrix::compute(&wordlists, kind)?;
        order_by_distance(&args.anchor, &matrix)?
    } else {
        return Err(CliError::Usage(
            "need a language order: pass --langs or --wordlists".into(),
        ));
    };
    let spec = DatasetSpec {
        anchor_lang: args.anchor.clone(),
        langs_in_order: order.clone(),
        per_lang_cap: args.cap,
        seed: args.seed,
    };
    spec.validate()?;
    let by_lang = group_by_lang(load_manifest(&args.manifest)?);
    let datasets = build_incremental_sets(&by_lang, &order, args.cap, args.seed)?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
    for (k, dataset) in datasets.iter().enumerate() {
        let path = args.out_dir.join(format!("dataset-{}-{}.jsonl", k + 1, dataset.name()));
        write_manifest(&dataset.utterances, &path)?;
        println!(
            "{}: {} utterances ({} languages) -> {}",
            dataset.name(),
            dataset.utterances.len(),
            dataset.langs.len(),
            path.display()
        );
        for w in &dataset.warnings {
            eprintln!("warning: {w}");
        }
    }
    Ok(())
}

fn lang_distance(args: LangDistanceArgs) -> CliResult {
    let wordlists = trainer::load_wordlists(&args.wordlists)?;
    let kind: DistanceKind = args.kind.parse()?;
    let matrix = LanguageDistanceMatrix::compute(&wordlists, kind)?;
    print!("{}", matrix.to_csv());
    if let Some(anchor) = &args.anchor {
        let order = order_by_distance(anchor, &matrix)?;
        println!("# order: {}", order.join(" "));
    }
    Ok(())
}

fn train(args: TrainArgs) -> CliResult {
    let mut cfg = args.common.load()?;
    if let Some(lid) = args.lid {
        cfg.lid_enabled = lid.as_bool();
    }
    let order = trainer::resolve_order(&cfg)?;
    let by_lang = group_by_lang(load_manifest(&cfg.train_manifest)?);
    let datasets = build_incremental_sets(&by_lang, &order, cfg.per_lang_cap, cfg.seed)?;
    let dataset = datasets.last().expect("order non-empty");
    for w in &dataset.warnings {
        eprintln!("warning: {w}");
    }
    let dev = EvalSet::load("dev", &cfg.dev_manifest)?;
    let tests: Vec<EvalSet> = cfg
        .tests
        .iter()
        .map(|t| EvalSet::load(t.name.clone(), &t.manifest))
        .collect::<Result<_, _>>()?;
    let test_refs: Vec<&EvalSet> = tests.iter().collect();
    let condition = if cfg.lid_enabled {
        format!("{}+LID", dataset.name())
    } else {
        dataset.name()
    };
    let (record, _) = trainer::train(&cfg, dataset, &condition, cfg.lid_enabled, &dev, &test_refs)?;

    let record_path = cfg.checkpoint_dir.join(format!("{condition}.jsonl"));
    std::fs::write(&record_path, format!("{}\n", record.to_json_line()))
        .map_err(|e| Error::io(&record_path, e))?;

    println!("condition: {condition}");
    println!(
        "selected epoch {} of {} (dev WER {:.2})",
        record.selected_epoch,
        record.epochs.len(),
        record.dev_wer_selected()
    );
    if record.skipped_infeasible > 0 {
        eprintln!(
            "warning: skipped {} infeasible targets during training",
            record.skipped_infeasible
        );
    }
    for (name, report) in &record.test_reports {
        println!("\n[{name}]");
        print!("{}", report.to_table());
        let csv_path = cfg.checkpoint_dir.join(format!("{condition}-{name}.csv"));
        std::fs::write(&csv_path, report.to_csv()).map_err(|e| Error::io(&csv_path, e))?;
    }
    println!("\ncheckpoint: {}", record.checkpoint_path.display());
    println!("run record: {}", record_path.display());
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> CliResult {
    let report = trainer::evaluate(&args.checkpoint, &args.manifest, &args.vocab)?;
    match args.format {
        ReportFormat::Table => print!("{}", report.to_table()),
        ReportFormat::Csv => print!("{}", report.to_csv()),
    }
    Ok(())
}

fn protocol(args: ProtocolArgs) -> CliResult {
    let cfg = args.common.load()?;
    let outcome = trainer::run_protocol(&cfg, args.lid.as_bool())?;
    trainer::write_protocol_outputs(&cfg, &outcome)?;
    println!("language order: {}", outcome.order.join(" "));
    println!("conditions: {}", outcome.runs.len());
    println!();
    print!("{}", render_csv_table(&outcome.consolidated_csv()));
    println!();
    println!(
        "consolidated report: {}",
        cfg.checkpoint_dir.join("consolidated.csv").display()
    );
    println!(
        "run records: {}",
        cfg.checkpoint_dir.join("runrecords.jsonl").display()
    );
    Ok(())
}

fn report(args: ReportArgs) -> CliResult {
    let raw = std::fs::read_to_string(&args.input).map_err(|e| Error::io(&args.input, e))?;
    print!("{}", render_csv_table(&raw));
    Ok(())
}

/// Align an unquoted CSV on column boundaries; comment lines pass through.
fn render_csv_table(csv: &str) -> String {
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    let cells: Vec<Vec<&str>> = rows.iter().map(|r| r.split(',').collect()).collect();
    let n_cols = cells.iter().map(Vec::len).max().unwrap_or(0);
    let mut widths = vec![0usize; n_cols];
    for row in &cells {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for line in csv.lines() {
        if line.starts_with('#') {
            out.push_str(line);
            out.push('\n');
            continue;
        }
        let row: Vec<&str> = line.split(',').collect();
        let rendered: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let c = if c.is_empty() { "-" } else { c };
                format!("{:<width$}", c, width = widths[i])
            })
            .collect();
        out.push_str(rendered.join("  ").trim_end());
        out.push('\n');
    }
    out
}
