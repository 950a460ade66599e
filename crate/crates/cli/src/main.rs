//! Command-line front end: streaming and batch training, checkpoints,
//! vector export and the count and similarity evaluations.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ssw2v_core::batch::{batch_train, build_negative_table, build_vocab, DEFAULT_TABLE_LEN};
use ssw2v_core::corpus::{exact_counts, read_sentences, CountTable, DEFAULT_MAX_SENTENCE_LEN};
use ssw2v_core::eval::{
    count_error_report, nearest_neighbors, sample_bucket_pairs, similarity_correlation, write_similarity_csv,
    ErrorMode, RankInterval, SimilarityReport, WordVectors, DEFAULT_BUCKETS,
};
use ssw2v_core::persist::{
    checkpoint_width, export_embeddings, export_embeddings_to_path, is_checkpoint, model_from_bytes, save_checkpoint,
    TextEmbeddings,
};
use ssw2v_core::{
    BatchModel, LearningSchedule, Scalar, ScheduleKind, SpaceSavingSketch, StreamModel, TrainStats, TrainerConfig,
};

#[derive(Parser)]
#[command(name = "ssw2v", version, about = "Skip-gram embeddings from a single pass over a text stream")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train in one pass with a bounded vocabulary and write a checkpoint.
    TrainStream(TrainStreamArgs),
    /// Train the two-pass reference model and write text vectors.
    TrainBatch(TrainBatchArgs),
    /// Exact word counts of a corpus as TSV, most frequent first.
    Counts(CountsArgs),
    /// Relative error of sketch counts against exact corpus counts.
    EvalCounts(EvalCountsArgs),
    /// Correlation of pairwise cosine similarities between two models.
    EvalSim(EvalSimArgs),
    /// Nearest neighbors of a word by cosine similarity.
    Neighbors(NeighborsArgs),
    /// Convert a checkpoint to the text vector format.
    Export(ExportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Precision {
    F32,
    F64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Schedule {
    Linear,
    Poly,
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Corpus path, or `-` for standard input. Newlines end sentences.
    #[arg(long)]
    input: PathBuf,
    /// Longer sentences are split into chunks of this many tokens.
    #[arg(long, default_value_t = DEFAULT_MAX_SENTENCE_LEN)]
    max_sentence_len: usize,
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    #[arg(long, default_value_t = 100)]
    dim: usize,
    /// Context radius C.
    #[arg(long, default_value_t = 2)]
    window: usize,
    /// Subsampling threshold.
    #[arg(long, default_value_t = 1e-3)]
    subsample: f64,
    /// Draw each window's radius uniformly from 1..=C.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    dynamic_windows: bool,
    /// Initial learning rate.
    #[arg(long, default_value_t = 2.5e-2)]
    lr: f64,
    #[arg(long, default_value_t = 2.5e-6)]
    lr_min: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Precision::F32)]
    precision: Precision,
}

#[derive(Args, Debug)]
struct TrainStreamArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Vocabulary slots K.
    #[arg(long, default_value_t = 100_000)]
    vocab_size: usize,
    /// Negative sampling reservoir size N.
    #[arg(long, default_value_t = 100_000_000)]
    reservoir_size: usize,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value_t = Schedule::Linear)]
    schedule: Schedule,
    /// Per-slot steps over which the linear schedule decays.
    #[arg(long, default_value_t = 1_000_000)]
    lr_horizon: u64,
    #[arg(long, default_value_t = 1e4)]
    tau: f64,
    #[arg(long, default_value_t = 0.5)]
    kappa: f64,
    /// Log progress every this many tokens (0 disables).
    #[arg(long, default_value_t = 1_000_000)]
    log_interval: u64,
    /// Continue from this checkpoint. Model flags are taken from it.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long)]
    checkpoint_out: Option<PathBuf>,
    /// Also write resident vectors in text form.
    #[arg(long)]
    export: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainBatchArgs {
    /// Corpus path; it is read once per epoch plus once for the vocabulary.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MAX_SENTENCE_LEN)]
    max_sentence_len: usize,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 1)]
    epochs: usize,
    #[arg(long, default_value_t = 5)]
    min_count: u64,
    #[arg(long, default_value_t = DEFAULT_TABLE_LEN)]
    table_size: usize,
    /// Text vectors output.
    #[arg(long)]
    out: PathBuf,
    /// Vocabulary with counts as TSV.
    #[arg(long)]
    vocab_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CountsArgs {
    #[arg(long)]
    input: PathBuf,
    /// Defaults to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalCountsArgs {
    /// Streaming checkpoint whose sketch is evaluated.
    #[arg(long, conflicts_with = "vocab_size")]
    checkpoint: Option<PathBuf>,
    /// Without a checkpoint, feed every token of the truth corpus into a
    /// fresh sketch with this many slots.
    #[arg(long, required_unless_present = "checkpoint")]
    vocab_size: Option<usize>,
    #[arg(long)]
    truth_corpus: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Impute)]
    mode: Mode,
    /// Per-word rows as CSV. Defaults to standard output.
    #[arg(long)]
    csv_out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Impute,
    Omit,
}

#[derive(Args, Debug)]
struct EvalSimArgs {
    /// Checkpoint or text vectors, detected from the file contents.
    #[arg(long)]
    model_a: PathBuf,
    #[arg(long)]
    model_b: PathBuf,
    /// Rank buckets as LO-HI. Every pair of buckets is compared.
    #[arg(long, value_delimiter = ',')]
    buckets: Vec<RankInterval>,
    /// Word pairs sampled per bucket pair.
    #[arg(long, default_value_t = 1000)]
    pairs: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Rank words by exact counts in this corpus instead of model A's order.
    #[arg(long)]
    truth_corpus: Option<PathBuf>,
    /// Sampled pairs and both similarities as CSV.
    #[arg(long)]
    csv_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct NeighborsArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    word: String,
    #[arg(long, default_value_t = 10)]
    top_n: usize,
}

#[derive(Args, Debug)]
struct ExportArgs {
    /// Streaming checkpoint.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// A model loaded from disk in whichever form it was stored.
enum LoadedModel {
    Stream32(StreamModel<f32>),
    Stream64(StreamModel<f64>),
    Text(TextEmbeddings<f64>),
}

macro_rules! with_model {
    ($model:expr, $m:ident => $body:expr) => {
        match $model {
            LoadedModel::Stream32($m) => $body,
            LoadedModel::Stream64($m) => $body,
            LoadedModel::Text($m) => $body,
        }
    };
}

fn load_model(path: &Path) -> Result<LoadedModel> {
    let ctx = || format!("loading model {}", path.display());
    if is_checkpoint(path).with_context(ctx)? {
        let bytes = std::fs::read(path).with_context(ctx)?;
        match checkpoint_width(&bytes).with_context(ctx)? {
            4 => Ok(LoadedModel::Stream32(model_from_bytes(&bytes).with_context(ctx)?)),
            8 => Ok(LoadedModel::Stream64(model_from_bytes(&bytes).with_context(ctx)?)),
            w => bail!("{}: unsupported {w}-byte reals", path.display()),
        }
    } else {
        Ok(LoadedModel::Text(TextEmbeddings::read_path(path).with_context(ctx)?))
    }
}

fn open_input(path: &Path) -> Result<Box<dyn BufRead>> {
    if path.as_os_str() == "-" {
        Ok(Box::new(io::stdin().lock()))
    } else {
        let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        Ok(Box::new(BufReader::with_capacity(1 << 20, f)))
    }
}

fn create_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        None => Ok(Box::new(io::stdout().lock())),
        Some(p) => {
            let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            Ok(Box::new(BufWriter::new(f)))
        }
    }
}

fn corpus_counts(path: &Path) -> Result<CountTable> {
    exact_counts(open_input(path)?).with_context(|| format!("counting {}", path.display()))
}

impl TrainStreamArgs {
    fn config(&self) -> TrainerConfig {
        let m = &self.model;
        TrainerConfig {
            vocab_capacity: self.vocab_size,
            reservoir_capacity: self.reservoir_size,
            negatives: m.negatives,
            dim: m.dim,
            context_radius: m.window,
            subsample_threshold: m.subsample,
            dynamic_windows: m.dynamic_windows,
            schedule: LearningSchedule {
                kind: match self.schedule {
                    Schedule::Linear => ScheduleKind::Linear,
                    Schedule::Poly => ScheduleKind::Polynomial,
                },
                rho0: m.lr,
                rho_min: m.lr_min,
                horizon: self.lr_horizon,
                tau: self.tau,
                kappa: self.kappa,
            },
            rng_seed: m.seed,
            log_interval: self.log_interval,
        }
    }
}

fn train_stream(args: TrainStreamArgs) -> Result<()> {
    if args.checkpoint_out.is_none() && args.export.is_none() {
        bail!("nothing to write: pass --checkpoint-out and/or --export");
    }
    let model = match &args.resume {
        Some(path) => load_model(path)?,
        None => match args.model.precision {
            Precision::F32 => LoadedModel::Stream32(StreamModel::new(args.config())?),
            Precision::F64 => LoadedModel::Stream64(StreamModel::new(args.config())?),
        },
    };
    match model {
        LoadedModel::Stream32(m) => continue_stream(m, &args),
        LoadedModel::Stream64(m) => continue_stream(m, &args),
        LoadedModel::Text(_) => bail!("--resume needs a streaming checkpoint"),
    }
}

fn continue_stream<T: Scalar>(mut model: StreamModel<T>, args: &TrainStreamArgs) -> Result<()> {
    let sentences = read_sentences(open_input(&args.input.input)?, args.input.max_sentence_len)?;
    let stats: TrainStats = model
        .train_stream(sentences)
        .with_context(|| format!("reading {}", args.input.input.display()))?;
    info!(
        "{} sentences, {} tokens, {} pairs, {} ejections",
        stats.sentences, stats.tokens, stats.pairs_trained, stats.ejections
    );
    if let Some(path) = &args.checkpoint_out {
        save_checkpoint(&model, path).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &args.export {
        export_embeddings_to_path(&model, path).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn train_batch(args: TrainBatchArgs) -> Result<()> {
    if args.input.as_os_str() == "-" {
        bail!("batch training reads its input more than once; pass a file path");
    }
    let m = &args.model;
    let config = TrainerConfig {
        negatives: m.negatives,
        dim: m.dim,
        context_radius: m.window,
        subsample_threshold: m.subsample,
        dynamic_windows: m.dynamic_windows,
        schedule: LearningSchedule { rho0: m.lr, rho_min: m.lr_min, ..LearningSchedule::default() },
        rng_seed: m.seed,
        ..TrainerConfig::default()
    };
    let open = || -> ssw2v_core::Result<_> { read_sentences(BufReader::new(File::open(&args.input)?), args.max_sentence_len) };
    let vocab = build_vocab(open()?, args.min_count).with_context(|| format!("reading {}", args.input.display()))?;
    info!("vocabulary: {} words, {} tokens", vocab.len(), vocab.total_tokens());
    let table = build_negative_table(&vocab, args.table_size.max(vocab.len()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    if let Some(path) = &args.vocab_out {
        vocab.write_tsv(create_output(Some(path))?)?;
    }
    let out = |e: &dyn Fn(&Path) -> ssw2v_core::Result<()>| e(&args.out).with_context(|| format!("writing {}", args.out.display()));
    match m.precision {
        Precision::F32 => {
            let emb = batch_train::<f32, _, _, _>(open, &vocab, &table, &config, args.epochs, &mut rng)?;
            let model = BatchModel { vocab, table: emb };
            out(&|p| export_embeddings_to_path(&model, p))
        }
        Precision::F64 => {
            let emb = batch_train::<f64, _, _, _>(open, &vocab, &table, &config, args.epochs, &mut rng)?;
            let model = BatchModel { vocab, table: emb };
            out(&|p| export_embeddings_to_path(&model, p))
        }
    }
}

fn counts(args: CountsArgs) -> Result<()> {
    let table = corpus_counts(&args.input)?;
    table.write_tsv(create_output(args.out.as_deref())?)?;
    Ok(())
}

fn eval_counts(args: EvalCountsArgs) -> Result<()> {
    let truth = corpus_counts(&args.truth_corpus)?;
    let sketch = match (&args.checkpoint, args.vocab_size) {
        (Some(path), _) => match load_model(path)? {
            LoadedModel::Stream32(m) => m.sketch().clone(),
            LoadedModel::Stream64(m) => m.sketch().clone(),
            LoadedModel::Text(_) => bail!("{} is not a streaming checkpoint", path.display()),
        },
        (None, Some(k)) => {
            let mut sketch = SpaceSavingSketch::new(k)?;
            let mut line = String::new();
            let mut input = open_input(&args.truth_corpus)?;
            while input.read_line(&mut line)? > 0 {
                for word in line.split_ascii_whitespace() {
                    sketch.observe(word)?;
                }
                line.clear();
            }
            sketch
        }
        (None, None) => bail!("pass --checkpoint or --vocab-size"),
    };
    let mode = match args.mode {
        Mode::Impute => ErrorMode::Impute,
        Mode::Omit => ErrorMode::Omit,
    };
    let report = count_error_report(&sketch, &truth, mode);
    let exact = report.rows.iter().filter(|r| r.relative_error == Some(0.0)).count();
    let missing = report.rows.iter().filter(|r| sketch.count(&r.word).is_none()).count();
    eprintln!(
        "types={} resident={} missing={} exact={} slots={}",
        report.rows.len(),
        report.rows.len() - missing,
        missing,
        exact,
        sketch.capacity()
    );
    report.write_csv(create_output(args.csv_out.as_deref())?)?;
    Ok(())
}

fn eval_sim(args: EvalSimArgs) -> Result<()> {
    let a = load_model(&args.model_a)?;
    let b = load_model(&args.model_b)?;
    let ranked: Vec<String> = match &args.truth_corpus {
        Some(path) => ssw2v_core::corpus::rank_by_frequency(&corpus_counts(path)?)
            .into_iter()
            .map(|(w, _)| w)
            .collect(),
        None => with_model!(&a, m => m.ranked_words()),
    };
    let buckets = if args.buckets.is_empty() { DEFAULT_BUCKETS.to_vec() } else { args.buckets.clone() };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut reports: Vec<SimilarityReport> = Vec::new();
    for (i, &lo) in buckets.iter().enumerate() {
        for &hi in &buckets[i..] {
            let pairs = match sample_bucket_pairs(&ranked, lo, hi, args.pairs, &mut rng) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("{lo} x {hi}: skipped ({e})");
                    continue;
                }
            };
            let mut report = with_model!(&a, ma => with_model!(&b, mb => similarity_correlation(ma, mb, &pairs)));
            report.bucket_pair = Some((lo, hi));
            println!("{}", report.summary());
            reports.push(report);
        }
    }
    if let Some(path) = &args.csv_out {
        write_similarity_csv(&reports, create_output(Some(path))?)?;
    }
    Ok(())
}

fn neighbors(args: NeighborsArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let found = with_model!(&model, m => nearest_neighbors(m, &args.word, args.top_n))?;
    let mut out = io::stdout().lock();
    for (word, sim) in found {
        writeln!(out, "{word}\t{sim:.6}")?;
    }
    Ok(())
}

fn export(args: ExportArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let out = create_output(Some(&args.out))?;
    match &model {
        LoadedModel::Stream32(m) => export_embeddings(m, out)?,
        LoadedModel::Stream64(m) => export_embeddings(m, out)?,
        LoadedModel::Text(_) => bail!("{} is already in text form", args.model.display()),
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::TrainStream(a) => train_stream(a),
        Command::TrainBatch(a) => train_batch(a),
        Command::Counts(a) => counts(a),
        Command::EvalCounts(a) => eval_counts(a),
        Command::EvalSim(a) => eval_sim(a),
        Command::Neighbors(a) => neighbors(a),
        Command::Export(a) => export(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
