//! Command-line front end.
//!
//! Settings come from an optional TOML file (`--config`); flags override
//! file values, and file values override built-in defaults. Relative paths in
//! the file resolve against the file's directory, relative paths given as
//! flags against the working directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{self, Dataset, Pair, PairSequence};
use crate::eval::synth::{generate_synthetic, GeneratorSpec};
use crate::eval::{
    change_eval, cross_validate, evaluate_sequences, CvConfig, MetricsReport, ModelMetrics,
};
use crate::features::{encode_sequence, feature_dump, FeatureIndex, Instance};
use crate::lexicons::{FrameLexicon, LexiconName, Lexicons, PolarityLexicon, StopwordList};
use crate::model::{
    semisupervised_train, BaselineConfig, DecoderConfig, SavedModel, TrainConfig, TrainLog,
    TrainingMetadata,
};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub documents: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    /// Directory holding `connotation.tsv`, `sentiment.tsv` and
    /// `prior_polarity.tsv`.
    pub lexicons: Option<PathBuf>,
    pub frames: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub report: Option<PathBuf>,
    /// Output of `extract` and `predict`.
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub train: TrainConfig,
    pub decoder: DecoderConfig,
    pub baseline: BaselineConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub k: usize,
    pub restarts: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection { k: 5, restarts: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Single source of randomness; copied into every sub-configuration.
    pub seed: u64,
    /// Worker threads; defaults to the number of available cores.
    pub workers: Option<usize>,
    pub min_cooccur: usize,
    pub paths: PathsConfig,
    pub model: ModelSection,
    pub eval: EvalSection,
    pub generator: GeneratorSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            workers: None,
            min_cooccur: corpus::DEFAULT_MIN_COOCCURRENCE,
            paths: PathsConfig::default(),
            model: ModelSection::default(),
            eval: EvalSection::default(),
            generator: GeneratorSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut config: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let p = &mut config.paths;
        for slot in [
            &mut p.documents,
            &mut p.annotations,
            &mut p.lexicons,
            &mut p.frames,
            &mut p.stopwords,
            &mut p.model,
            &mut p.report,
            &mut p.output,
        ] {
            if let Some(rel) = slot.as_ref().filter(|p| p.is_relative()) {
                *slot = Some(base.join(rel));
            }
        }
        Ok(config)
    }

    fn apply(&mut self, flags: &CommonArgs) {
        if let Some(seed) = flags.seed {
            self.seed = seed;
        }
        if let Some(w) = flags.workers {
            self.workers = Some(w);
        }
        if let Some(m) = flags.min_cooccur {
            self.min_cooccur = m;
        }
        let p = &mut self.paths;
        for (slot, flag) in [
            (&mut p.documents, &flags.docs),
            (&mut p.annotations, &flags.annotations),
            (&mut p.lexicons, &flags.lexicons),
            (&mut p.frames, &flags.frames),
            (&mut p.stopwords, &flags.stopwords),
            (&mut p.model, &flags.model),
            (&mut p.report, &flags.report),
            (&mut p.output, &flags.output),
        ] {
            if flag.is_some() {
                slot.clone_from(flag);
            }
        }
        self.model.train.seed = self.seed;
        self.model.baseline.seed = self.seed;
    }

    fn validate(&self) -> Result<()> {
        if self.min_cooccur == 0 {
            bail!("min_cooccur must be at least 1");
        }
        if self.workers == Some(0) {
            bail!("workers must be at least 1");
        }
        self.model.train.validate()?;
        self.model.decoder.validate()?;
        if self.model.decoder.num_states != 2 {
            bail!("only two relationship states are supported");
        }
        if self.eval.k < 2 || self.eval.restarts == 0 {
            bail!("eval.k must be at least 2 and eval.restarts at least 1");
        }
        Ok(())
    }

    /// Settings that determine results: everything except worker count and
    /// output locations.
    pub fn echo(&self) -> serde_json::Value {
        let mut c = self.clone();
        c.workers = None;
        c.paths.report = None;
        c.paths.output = None;
        serde_json::to_value(&c).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        let text = serde_json::to_string(&self.echo()).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    fn require<'a>(&self, path: &'a Option<PathBuf>, what: &str, flag: &str) -> Result<&'a Path> {
        path.as_deref()
            .ok_or_else(|| anyhow!("no {what} given (set paths.{what} or pass --{flag})"))
    }
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML run configuration
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel work
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Minimum number of shared sentences for a pair to form a sequence
    #[arg(long, global = true)]
    pub min_cooccur: Option<usize>,
    /// Report output file (JSON)
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    /// Directory of document JSON files
    #[arg(long, global = true)]
    pub docs: Option<PathBuf>,
    /// Annotation file (JSON Lines)
    #[arg(long, global = true)]
    pub annotations: Option<PathBuf>,
    /// Directory of polarity lexicon TSV files
    #[arg(long, global = true)]
    pub lexicons: Option<PathBuf>,
    #[arg(long, global = true)]
    pub frames: Option<PathBuf>,
    #[arg(long, global = true)]
    pub stopwords: Option<PathBuf>,
    /// Model file
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Output file of `extract` and `predict`, output directory of `synth`
    #[arg(long = "out", global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the pair sequences of a corpus
    Extract {
        /// Also write the per-sentence feature table (TSV)
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Train the sequence model on annotated sequences
    Train,
    /// Decode relationship states for every pair sequence
    Predict,
    /// Score a trained model on fully annotated sequences
    Evaluate,
    /// Cross-validate the sequence model against the per-sentence baseline
    Cv {
        /// Also write a one-line-per-model TSV summary
        #[arg(long)]
        tsv: Option<PathBuf>,
    },
    /// Write a synthetic corpus with annotations, lexicons and a config file
    Synth,
}

#[derive(Debug, Parser)]
#[command(
    name = "relseq",
    version,
    about = "Relationship trajectories between character pairs"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            fs::write(p, text).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct Envelope<'a, T> {
    command: &'a str,
    config_hash: String,
    config: serde_json::Value,
    #[serde(flatten)]
    body: T,
}

fn envelope<T: Serialize>(command: &str, config: &RunConfig, body: T) -> String {
    to_json(&Envelope {
        command,
        config_hash: config.hash(),
        config: config.echo(),
        body,
    })
}

fn load_sequences(config: &RunConfig) -> Result<Vec<PairSequence>> {
    let dir = config.require(&config.paths.documents, "documents", "docs")?;
    let docs = corpus::load_documents(dir)?;
    if docs.is_empty() {
        bail!("no documents found in {}", dir.display());
    }
    Ok(docs
        .iter()
        .flat_map(|d| corpus::extract_pair_sequences(d, config.min_cooccur))
        .collect())
}

fn load_dataset(config: &RunConfig) -> Result<Dataset> {
    let sequences = load_sequences(config)?;
    let path = config.require(&config.paths.annotations, "annotations", "annotations")?;
    Ok(corpus::load_annotations(path, sequences)?)
}

pub fn load_lexicons(config: &RunConfig) -> Result<Lexicons> {
    let dir = config.require(&config.paths.lexicons, "lexicons", "lexicons")?;
    let polarity =
        |name: LexiconName| PolarityLexicon::load(&dir.join(format!("{name}.tsv")), name);
    Ok(Lexicons {
        connotation: polarity(LexiconName::Connotation)?,
        sentiment: polarity(LexiconName::Sentiment)?,
        prior_polarity: polarity(LexiconName::PriorPolarity)?,
        frames: match &config.paths.frames {
            Some(p) => FrameLexicon::load(p)?,
            None => FrameLexicon::builtin(),
        },
        stopwords: match &config.paths.stopwords {
            Some(p) => StopwordList::load(p)?,
            None => StopwordList::builtin(),
        },
    })
}

fn encode(dataset: &Dataset, lexicons: &Lexicons) -> Dataset<Instance> {
    dataset.map(|s| encode_sequence(s, lexicons))
}

#[derive(Serialize)]
struct SequenceEntry<'a> {
    doc_id: &'a str,
    pair: Pair,
    length: usize,
    doc_positions: Vec<usize>,
}

fn cmd_extract(config: &RunConfig, features: Option<&Path>) -> Result<()> {
    let sequences = load_sequences(config)?;
    if let Some(path) = features {
        let lexicons = load_lexicons(config)?;
        write_output(Some(path), &feature_dump(&sequences, &lexicons))?;
    }
    #[derive(Serialize)]
    struct Body<'a> {
        sequence_count: usize,
        sequences: Vec<SequenceEntry<'a>>,
    }
    let body = Body {
        sequence_count: sequences.len(),
        sequences: sequences
            .iter()
            .map(|s| SequenceEntry {
                doc_id: &s.doc_id,
                pair: s.pair,
                length: s.len(),
                doc_positions: s.doc_positions(),
            })
            .collect(),
    };
    write_output(
        config.paths.output.as_deref(),
        &envelope("extract", config, body),
    )
}

fn train_model(config: &RunConfig, data: &Dataset<Instance>) -> Result<(SavedModel, TrainLog)> {
    let index = FeatureIndex::new(config.model.decoder.num_states);
    let (weights, log) =
        semisupervised_train::<f64>(data, &config.model.train, &index, &config.model.decoder)?;
    let meta = TrainingMetadata {
        seed: config.seed,
        config_hash: config.hash(),
        config: config.echo(),
        rounds: log.rounds,
    };
    Ok((
        SavedModel::new(
            index,
            config.model.decoder.clone(),
            weights.averaged(),
            meta,
        ),
        log,
    ))
}

fn cmd_train(config: &RunConfig) -> Result<()> {
    let model_path = config
        .require(&config.paths.model, "model", "model")?
        .to_owned();
    let lexicons = load_lexicons(config)?;
    let dataset = load_dataset(config)?;
    let data = encode(&dataset, &lexicons);
    let (model, log) = train_model(config, &data)?;
    write_output(Some(&model_path), &model.to_json())?;
    #[derive(Serialize)]
    struct Body {
        fully_labeled: usize,
        partially_labeled: usize,
        unlabeled: usize,
        training: TrainLog,
    }
    let body = Body {
        fully_labeled: data.fully_labeled.len(),
        partially_labeled: data.partially_labeled.len(),
        unlabeled: data.unlabeled.len(),
        training: log,
    };
    if let Some(report) = &config.paths.report {
        write_output(Some(report), &envelope("train", config, body))?;
    }
    Ok(())
}

fn load_model(config: &RunConfig) -> Result<SavedModel> {
    let path = config.require(&config.paths.model, "model", "model")?;
    let text =
        fs::read_to_string(path).with_context(|| format!("reading model {}", path.display()))?;
    SavedModel::from_json(&text).with_context(|| format!("loading model {}", path.display()))
}

fn sign(state: usize) -> i64 {
    corpus::State::from_index(state)
        .expect("binary state")
        .sign()
}

fn cmd_predict(config: &RunConfig) -> Result<()> {
    let model = load_model(config)?;
    let lexicons = load_lexicons(config)?;
    let sequences = load_sequences(config)?;
    #[derive(Serialize)]
    struct Entry<'a> {
        doc_id: &'a str,
        pair: Pair,
        doc_positions: Vec<usize>,
        states: Vec<i64>,
        relationship_sequence: Vec<i64>,
        has_change: bool,
        score: f64,
    }
    let predictions = sequences
        .par_iter()
        .map(|s| {
            let p = model.predict(&encode_sequence(s, &lexicons).contents)?;
            Ok(Entry {
                doc_id: &s.doc_id,
                pair: s.pair,
                doc_positions: s.doc_positions(),
                states: p.states.iter().map(|&x| sign(x)).collect(),
                relationship_sequence: p.relationship_sequence.iter().map(|&x| sign(x)).collect(),
                has_change: p.has_change(),
                score: p.score,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    #[derive(Serialize)]
    struct Body<'a> {
        model_config_hash: &'a str,
        predictions: Vec<Entry<'a>>,
    }
    let body = Body {
        model_config_hash: &model.training.config_hash,
        predictions,
    };
    write_output(
        config.paths.output.as_deref(),
        &envelope("predict", config, body),
    )
}

fn cmd_evaluate(config: &RunConfig) -> Result<()> {
    let model = load_model(config)?;
    let lexicons = load_lexicons(config)?;
    let data = encode(&load_dataset(config)?, &lexicons);
    if data.fully_labeled.is_empty() {
        bail!("no fully annotated sequences to evaluate");
    }
    let predicted = data
        .fully_labeled
        .par_iter()
        .map(|inst| Ok(model.predict(&inst.contents)?.states))
        .collect::<Result<Vec<_>>>()?;
    let golds: Vec<Vec<usize>> = data
        .fully_labeled
        .iter()
        .map(|i| i.gold().expect("fully labeled"))
        .collect();
    let metrics = evaluate_sequences(&golds, &predicted)?;
    let change = change_eval(
        &golds
            .iter()
            .map(|g| crate::eval::change_detection(g))
            .collect::<Vec<_>>(),
        &predicted
            .iter()
            .map(|p| crate::eval::change_detection(p))
            .collect::<Vec<_>>(),
    )?;
    #[derive(Serialize)]
    struct Body<'a> {
        model_config_hash: &'a str,
        sequences: usize,
        sentences: usize,
        metrics: ModelMetrics,
        change_detection: crate::eval::ChangeEval,
    }
    let body = Body {
        model_config_hash: &model.training.config_hash,
        sequences: golds.len(),
        sentences: golds.iter().map(Vec::len).sum(),
        metrics,
        change_detection: change,
    };
    write_output(
        config.paths.report.as_deref(),
        &envelope("evaluate", config, body),
    )
}

fn summary_tsv(report: &MetricsReport) -> String {
    let mut out = String::from(
        "model\taveraged_p\taveraged_r\taveraged_f\tedit_distance\tedit_distance_raw\tchange_f\n",
    );
    for (name, m) in [
        ("structured", &report.summary.structured),
        ("baseline", &report.summary.baseline),
    ] {
        out.push_str(&format!(
            "{name}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\n",
            m.averaged_p,
            m.averaged_r,
            m.averaged_f,
            m.mean_edit_distance,
            m.mean_edit_distance_raw,
            m.change.f1
        ));
    }
    out
}

fn cmd_cv(config: &RunConfig, tsv: Option<&Path>) -> Result<()> {
    let lexicons = load_lexicons(config)?;
    let data = encode(&load_dataset(config)?, &lexicons);
    let cv = CvConfig {
        k: config.eval.k,
        restarts: config.eval.restarts,
        seed: config.seed,
        train: config.model.train.clone(),
        decoder: config.model.decoder.clone(),
        baseline: config.model.baseline.clone(),
    };
    let report = cross_validate(&data, &cv)?;
    if let Some(path) = tsv {
        write_output(Some(path), &summary_tsv(&report))?;
    }
    write_output(
        config.paths.report.as_deref(),
        &envelope("cv", config, report),
    )
}

fn cmd_synth(config: &RunConfig) -> Result<()> {
    let out = config
        .paths
        .output
        .as_deref()
        .ok_or_else(|| anyhow!("synth needs an output directory (--out)"))?;
    let corpus = generate_synthetic(&config.generator, config.seed)?;
    let docs_dir = out.join("docs");
    let lex_dir = out.join("lexicons");
    for dir in [&docs_dir, &lex_dir] {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    for doc in &corpus.documents {
        write_output(
            Some(&docs_dir.join(format!("{}.json", doc.doc_id))),
            &(doc.to_json() + "\n"),
        )?;
    }
    write_output(
        Some(&out.join("annotations.jsonl")),
        &corpus::write_annotations(&corpus.annotations),
    )?;
    for lex in corpus.lexicons.polarity() {
        write_output(
            Some(&lex_dir.join(format!("{}.tsv", lex.name))),
            &lex.to_tsv(),
        )?;
    }
    write_output(
        Some(&out.join("frames.tsv")),
        &corpus.lexicons.frames.to_tsv(),
    )?;
    write_output(
        Some(&out.join("stopwords.txt")),
        &corpus.lexicons.stopwords.to_text(),
    )?;

    let mut run = config.clone();
    run.workers = None;
    run.min_cooccur = config.generator.min_len;
    run.paths = PathsConfig {
        documents: Some("docs".into()),
        annotations: Some("annotations.jsonl".into()),
        lexicons: Some("lexicons".into()),
        frames: Some("frames.tsv".into()),
        stopwords: Some("stopwords.txt".into()),
        model: Some("model.json".into()),
        report: None,
        output: None,
    };
    let toml_text = toml::to_string(&run).context("serializing generated config")?;
    write_output(Some(&out.join("config.toml")), &toml_text)?;

    if let Some(report) = &config.paths.report {
        #[derive(Serialize)]
        struct Body {
            documents: usize,
            annotations: usize,
            fully_labeled: usize,
            partially_labeled: usize,
            unlabeled: usize,
        }
        let body = Body {
            documents: corpus.documents.len(),
            annotations: corpus.annotations.len(),
            fully_labeled: corpus.dataset.fully_labeled.len(),
            partially_labeled: corpus.dataset.partially_labeled.len(),
            unlabeled: corpus.dataset.unlabeled.len(),
        };
        write_output(Some(report), &envelope("synth", config, body))?;
    }
    Ok(())
}

/// Runs one parsed invocation.
pub fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    config.apply(&cli.common);
    config.validate()?;
    let workers = config
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("starting worker pool")?;
    log::info!("running with {workers} workers");
    pool.install(|| match &cli.command {
        Command::Extract { features } => cmd_extract(&config, features.as_deref()),
        Command::Train => cmd_train(&config),
        Command::Predict => cmd_predict(&config),
        Command::Evaluate => cmd_evaluate(&config),
        Command::Cv { tsv } => cmd_cv(&config, tsv.as_deref()),
        Command::Synth => cmd_synth(&config),
    })
}

fn error_json(kind: &str, err: &anyhow::Error) -> String {
    let chain: Vec<String> = err.chain().map(|e| e.to_string()).collect();
    serde_json::json!({ "error": { "kind": kind, "message": chain[0], "causes": &chain[1..] } })
        .to_string()
}

/// Process entry point; returns the exit code.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            eprintln!(
                "{}",
                error_json("usage", &anyhow!(e.to_string().trim().to_owned()))
            );
            return 2;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_json("runtime", &e));
            1
        }
    }
}
