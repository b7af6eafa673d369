use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use ksan::attention::AttentionRecord;
use ksan::checkpoint;
use ksan::data::synthetic::{generate, SyntheticConfig};
use ksan::data::{fractional_split, load_corpus, train_dev_split, SplitManifest, Utterance, Vocabulary};
use ksan::encoders::EncoderKind;
use ksan::knowledge::{attach_parses, substructure_stats, Example, KnowledgeParse, KnowledgeSource, SubstructureStats};
use ksan::model::{Architecture, Ksan};
use ksan::tagger::CellKind;
use ksan::trainer::{fit, stream_rng, train, SeedStream, TrainConfig};

/// Knowledge-guided slot tagger.
#[derive(Parser, Debug)]
#[command(name = "ksan", version)]
struct Cli {
    /// Worker threads for evaluation (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Log level filter, e.g. `warn` or `debug`.
    #[arg(long, global = true, default_value = "info")]
    log: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model and write a checkpoint, split manifest and log.
    Train(Box<TrainArgs>),
    /// Score a checkpoint on a test corpus.
    Eval(EvalArgs),
    /// Dump attention weights and salience for selected utterances.
    InspectAttention(InspectArgs),
    /// Write a synthetic corpus with dependency and AMR parses.
    GenSynthetic(GenArgs),
    /// Substructure counts of parse files.
    Stats(StatsArgs),
}

#[derive(Args, Debug, Default)]
struct TrainArgs {
    /// JSON run file; flags given here take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    train_parses: Option<PathBuf>,
    #[arg(long)]
    dev: Option<PathBuf>,
    #[arg(long)]
    dev_parses: Option<PathBuf>,
    /// Parse format: `dep` or `amr`.
    #[arg(long)]
    knowledge: Option<KnowledgeSource>,
    /// Share of the training corpus to train on.
    #[arg(long)]
    fraction: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Pre-trained embeddings, one `word v1 … ve` per line.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    freeze_embeddings: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    architecture: Option<Architecture>,
    #[arg(long)]
    encoder: Option<EncoderKind>,
    #[arg(long)]
    cell: Option<CellKind>,
    #[arg(long)]
    embedding_dim: Option<usize>,
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Epochs without dev improvement before stopping; 0 disables early stopping.
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    clip_norm: Option<f64>,
    #[arg(long)]
    max_substructures: Option<usize>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    parses: Option<PathBuf>,
    #[arg(long, default_value = "dep")]
    knowledge: KnowledgeSource,
    /// Where to write the JSON report.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Where to write the text table (always printed to stdout).
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InspectArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    parses: Option<PathBuf>,
    #[arg(long, default_value = "dep")]
    knowledge: KnowledgeSource,
    /// Utterance ids to dump; all utterances when omitted.
    #[arg(long, value_delimiter = ',')]
    ids: Vec<String>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "synthetic")]
    stem: String,
    #[arg(long, default_value_t = 500)]
    utterances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Share of utterances whose governing verb follows the ambiguous word.
    #[arg(long, default_value_t = 0.5)]
    fronted_fraction: f64,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[arg(long)]
    dependency: Option<PathBuf>,
    #[arg(long)]
    amr: Option<PathBuf>,
    #[arg(long, default_value_t = ksan::knowledge::DEFAULT_MAX_SUBSTRUCTURES)]
    max_substructures: usize,
}

/// Contents of a `--config` run file.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunFile {
    train: Option<PathBuf>,
    train_parses: Option<PathBuf>,
    dev: Option<PathBuf>,
    dev_parses: Option<PathBuf>,
    knowledge: Option<KnowledgeSource>,
    fraction: Option<f64>,
    out: Option<PathBuf>,
    embeddings: Option<PathBuf>,
    training: TrainConfig,
}

/// Process exit status, one per failure class.
#[derive(Debug)]
enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
    Checkpoint(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Checkpoint(_) => 3,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Data(e) | Failure::Checkpoint(e) => e,
        }
    }
}

impl From<ksan::Error> for Failure {
    fn from(e: ksan::Error) -> Self {
        match e {
            ksan::Error::Config(_) => Failure::Usage(e.into()),
            ksan::Error::Checkpoint(_) => Failure::Checkpoint(e.into()),
            _ => Failure::Data(e.into()),
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(anyhow::anyhow!(msg.into()))
}

fn data(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Data(e.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    env_logger::Builder::new()
        .parse_filters(&cli.log)
        .format_timestamp(None)
        .init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Train(a) => cmd_train(*a),
        Command::Eval(a) => cmd_eval(a),
        Command::InspectAttention(a) => cmd_inspect(a),
        Command::GenSynthetic(a) => cmd_gen(a),
        Command::Stats(a) => cmd_stats(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}

fn read_corpus(path: &Path) -> Outcome<Vec<Utterance>> {
    let corpus = load_corpus(path)
        .with_context(|| format!("reading corpus {}", path.display()))
        .map_err(data)?;
    if corpus.is_empty() {
        return Err(data(anyhow::anyhow!("corpus {} is empty", path.display())));
    }
    Ok(corpus)
}

fn read_parses(path: &Path, source: KnowledgeSource) -> Outcome<Vec<KnowledgeParse>> {
    source
        .load(path)
        .with_context(|| format!("reading parse file {}", path.display()))
        .map_err(data)
}

/// Pairs a corpus with its parses; without a parse file every utterance
/// is its own single substructure.
fn examples(
    corpus: &[Utterance],
    parses: Option<&Path>,
    source: KnowledgeSource,
    max: usize,
    needs_knowledge: bool,
) -> Outcome<Vec<Example>> {
    let parses = parses.map(|p| read_parses(p, source)).transpose()?;
    if parses.is_none() && needs_knowledge {
        warn!("no parse file given; the whole sentence is used as the only substructure");
    }
    Ok(attach_parses(corpus, parses.as_deref(), max)?)
}

fn write_json(path: &Path, value: &impl Serialize) -> Outcome {
    let text = serde_json::to_string_pretty(value).map_err(data)?;
    fs::write(path, text + "\n")
        .with_context(|| format!("writing {}", path.display()))
        .map_err(data)
}

fn merge(args: TrainArgs) -> Outcome<RunFile> {
    let mut run = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))
                .map_err(Failure::Usage)?;
            serde_json::from_str::<RunFile>(&text)
                .with_context(|| format!("parsing config {}", path.display()))
                .map_err(Failure::Usage)?
        }
        None => RunFile::default(),
    };
    macro_rules! take {
        ($field:ident) => {
            if args.$field.is_some() {
                run.$field = args.$field;
            }
        };
    }
    take!(train);
    take!(train_parses);
    take!(dev);
    take!(dev_parses);
    take!(knowledge);
    take!(fraction);
    take!(out);
    take!(embeddings);
    let t = &mut run.training;
    if let Some(v) = args.seed {
        t.seed = v;
    }
    if let Some(v) = args.architecture {
        t.model.architecture = v;
    }
    if let Some(v) = args.encoder {
        t.model.encoder = v;
    }
    if let Some(v) = args.cell {
        t.model.cell = v;
    }
    if let Some(v) = args.embedding_dim {
        t.model.embedding_dim = v;
    }
    if let Some(v) = args.hidden_dim {
        t.model.hidden_dim = v;
    }
    if let Some(v) = args.alpha {
        t.model.alpha = v;
    }
    if let Some(v) = args.epochs {
        t.max_epochs = v;
    }
    if let Some(v) = args.patience {
        t.patience = (v > 0).then_some(v);
    }
    if let Some(v) = args.learning_rate {
        t.learning_rate = v;
    }
    if let Some(v) = args.dropout {
        t.dropout = v;
    }
    if args.clip_norm.is_some() {
        t.clip_norm = args.clip_norm;
    }
    if let Some(v) = args.max_substructures {
        t.max_substructures = v;
    }
    if args.freeze_embeddings {
        t.freeze_embeddings = true;
    }
    if run.fraction.is_none() {
        run.fraction = Some(1.0);
    }
    if run.knowledge.is_none() {
        run.knowledge = Some(KnowledgeSource::Dependency);
    }
    Ok(run)
}

fn cmd_train(args: TrainArgs) -> Outcome {
    let run = merge(args)?;
    let cfg = &run.training;
    cfg.validate()?;
    if cfg.freeze_embeddings && run.embeddings.is_none() {
        return Err(usage("--freeze-embeddings needs --embeddings"));
    }
    let train_path = run.train.as_deref().ok_or_else(|| usage("missing --train"))?;
    let out = run.out.as_deref().ok_or_else(|| usage("missing --out"))?;
    let source = run.knowledge.unwrap_or(KnowledgeSource::Dependency);
    let fraction = run.fraction.unwrap_or(1.0);
    let knows = cfg.model.architecture.uses_knowledge();

    let corpus = read_corpus(train_path)?;
    let all = examples(
        &corpus,
        run.train_parses.as_deref(),
        source,
        cfg.max_substructures,
        knows,
    )?;
    let (train_set, dev) = match &run.dev {
        Some(dev_path) => {
            let dev_corpus = read_corpus(dev_path)?;
            let dev = examples(
                &dev_corpus,
                run.dev_parses.as_deref(),
                source,
                cfg.max_substructures,
                knows,
            )?;
            (fractional_split(&all, fraction, cfg.seed)?, dev)
        }
        None => train_dev_split(&all, fraction, cfg.dev_fraction, cfg.seed)?,
    };
    info!(
        "training on {} utterances, {} for model selection",
        train_set.len(),
        dev.len()
    );

    fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .map_err(data)?;
    let utterances = |xs: &[Example]| xs.iter().map(|e| e.utterance.clone()).collect::<Vec<_>>();
    let manifest = SplitManifest::new(cfg.seed, fraction, &utterances(&train_set), &utterances(&dev));
    write_json(&out.join("split.json"), &manifest)?;
    write_json(&out.join("run.json"), &run)?;

    let result = match &run.embeddings {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading embeddings {}", path.display()))
                .map_err(data)?;
            let vocab = Vocabulary::build(&utterances(&train_set));
            let mut model = Ksan::new(cfg.model.clone(), vocab, &mut stream_rng(cfg.seed, SeedStream::Init))?;
            let found = model
                .load_embeddings(&text)
                .with_context(|| format!("reading embeddings {}", path.display()))
                .map_err(data)?;
            info!(
                "{found} of {} vocabulary words have pre-trained vectors",
                model.vocab().n_words()
            );
            fit(model, &train_set, &dev, cfg)?
        }
        None => train(&train_set, &dev, cfg)?,
    };

    let log: String = result
        .log
        .iter()
        .map(|r| serde_json::to_string(r).map(|s| s + "\n"))
        .collect::<Result<_, _>>()
        .map_err(data)?;
    fs::write(out.join("log.jsonl"), log).map_err(data)?;
    checkpoint::save(out.join("checkpoint.json"), &result.model, Some(cfg))?;
    info!(
        "kept epoch {} of {}; checkpoint written to {}",
        result.best_epoch,
        result.log.len(),
        out.join("checkpoint.json").display()
    );
    Ok(())
}

fn load_checkpoint(path: &Path) -> Outcome<Ksan> {
    let (model, _) = checkpoint::load(path).map_err(|e| Failure::Checkpoint(e.into()))?;
    Ok(model)
}

fn cmd_eval(args: EvalArgs) -> Outcome {
    let model = load_checkpoint(&args.checkpoint)?;
    let corpus = read_corpus(&args.test)?;
    let max = ksan::knowledge::DEFAULT_MAX_SUBSTRUCTURES;
    let knows = model.config().architecture.uses_knowledge();
    let examples = examples(&corpus, args.parses.as_deref(), args.knowledge, max, knows)?;

    let vocab = model.vocab();
    let tokens: usize = corpus.iter().map(Utterance::len).sum();
    let unknown = corpus
        .iter()
        .flat_map(|u| &u.tokens)
        .filter(|w| !vocab.contains_word(w))
        .count();
    if unknown > 0 {
        warn!("{unknown} of {tokens} test tokens are not in the checkpoint vocabulary and are read as unknown words");
    }
    let unseen_tags: std::collections::BTreeSet<&str> = corpus
        .iter()
        .flat_map(|u| &u.tags)
        .filter(|t| vocab.tag_id(t).is_none())
        .map(String::as_str)
        .collect();
    if !unseen_tags.is_empty() {
        warn!(
            "gold tags never seen in training: {}",
            unseen_tags.into_iter().collect::<Vec<_>>().join(", ")
        );
    }

    let report = model.evaluate(&examples)?;
    let table = report.table();
    emit(&table);
    if let Some(path) = &args.table {
        fs::write(path, &table)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(data)?;
    }
    if let Some(path) = &args.report {
        write_json(path, &report)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct AttentionDump {
    records: Vec<AttentionRecord>,
    skipped: Vec<String>,
}

fn cmd_inspect(args: InspectArgs) -> Outcome {
    let model = load_checkpoint(&args.checkpoint)?;
    if !model.config().architecture.uses_knowledge() {
        return Err(data(anyhow::anyhow!(
            "the checkpoint has no knowledge component to inspect"
        )));
    }
    let corpus = read_corpus(&args.corpus)?;
    let max = ksan::knowledge::DEFAULT_MAX_SUBSTRUCTURES;
    let examples = examples(&corpus, args.parses.as_deref(), args.knowledge, max, true)?;

    let (selected, skipped): (Vec<&Example>, Vec<String>) = if args.ids.is_empty() {
        (examples.iter().collect(), Vec::new())
    } else {
        let mut selected = Vec::new();
        let mut skipped = Vec::new();
        for id in &args.ids {
            match examples.iter().find(|e| &e.utterance.id == id) {
                Some(e) => selected.push(e),
                None => skipped.push(id.clone()),
            }
        }
        (selected, skipped)
    };
    for id in &skipped {
        warn!("no utterance with id `{id}`");
    }
    let records = selected
        .into_iter()
        .map(|e| model.attention(e).map(|r| r.expect("knowledge model yields attention")))
        .collect::<Result<Vec<_>, _>>()?;
    let dump = AttentionDump { records, skipped };
    match &args.out {
        Some(path) => write_json(path, &dump),
        None => {
            emit(&format!("{}\n", serde_json::to_string_pretty(&dump).map_err(data)?));
            Ok(())
        }
    }
}

fn cmd_gen(args: GenArgs) -> Outcome {
    let config = SyntheticConfig {
        utterances: args.utterances,
        fronted_fraction: args.fronted_fraction,
        ..Default::default()
    };
    let corpus = generate(&config, args.seed)?;
    corpus.write(&args.out, &args.stem)?;
    write_json(
        &args.out.join(format!("{}.disambiguation.json", args.stem)),
        &corpus.disambiguation,
    )?;
    info!("wrote {} utterances to {}", corpus.len(), args.out.display());
    Ok(())
}

#[derive(Serialize)]
struct StatsReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    dependency: Option<SubstructureStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    amr: Option<SubstructureStats>,
}

fn cmd_stats(args: StatsArgs) -> Outcome {
    if args.dependency.is_none() && args.amr.is_none() {
        return Err(usage("give --dependency and/or --amr"));
    }
    let stats = |path: &Option<PathBuf>, source| -> Outcome<Option<SubstructureStats>> {
        path.as_deref()
            .map(|p| Ok(substructure_stats(&read_parses(p, source)?, args.max_substructures)))
            .transpose()
    };
    let report = StatsReport {
        dependency: stats(&args.dependency, KnowledgeSource::Dependency)?,
        amr: stats(&args.amr, KnowledgeSource::Amr)?,
    };
    emit(&format!("{}\n", serde_json::to_string_pretty(&report).map_err(data)?));
    Ok(())
}

/// Writes to stdout, treating a closed pipe as a normal end of output.
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    if let Err(e) = out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        if e.kind() != std::io::ErrorKind::BrokenPipe {
            warn!("writing to stdout: {e}");
        }
    }
}
