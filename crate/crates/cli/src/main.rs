//! `tsmin`: command-line front end for coverage-preserving test-suite
//! minimization.
//!
//! Result files never contain timings, so repeating a command with the same
//! inputs and seed reproduces them byte for byte. Timings go to stderr.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use tsmin_core::baselines::{greedy_diversity, random_minimize, BaselineKind};
use tsmin_core::corpus::{parse_corpus, parse_fault_matrix, validate_corpus, Corpus};
use tsmin_core::embed::{export_sentence_vectors, export_word_vectors, tfidf_embed, train_cbow, CbowConfig};
use tsmin_core::harness::{build_matrix, coverage, run_experiment, write_reports, ExperimentConfig, RepresentationSpec};
use tsmin_core::minimizer::{fitness, minimize, GaConfig, InitStrategy, SubsetSolution};
use tsmin_core::oracle::{best_fdr, generate_redundancy_suites, synth_corpus, SuiteSearchConfig, SynthConfig};
use tsmin_core::preprocess::{preprocess_corpus, PreprocessMethod};
use tsmin_core::similarity::{Metric, SimilarityMatrix};
use tsmin_core::Error;

#[derive(Parser)]
#[command(name = "tsmin", version, about = "Similarity-driven test suite minimization")]
struct Cli {
    /// Seed for every stochastic step; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// TOML file with settings for the command.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a corpus (and fault matrix) and write it back in canonical form.
    Ingest(Inputs),
    /// Check traceability and fault references; exits 2 on errors.
    Validate(Inputs),
    /// Compute TF-IDF test-case vectors or train CBOW word vectors.
    Embed(EmbedArgs),
    /// Build a normalized similarity matrix.
    Sim(SimArgs),
    /// Run the genetic minimizer.
    Minimize(MinimizeArgs),
    /// Run a reference selection.
    Baseline(BaselineArgs),
    /// Best achievable fault detection rate at a budget.
    Oracle(OracleArgs),
    /// Generate a synthetic corpus with planted faults.
    Synth,
    /// Carve suites with a given redundancy level out of a corpus.
    RedundancySuites(SuiteArgs),
    /// Run an experiment grid and write CSV reports.
    Eval,
}

#[derive(Args)]
struct Inputs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    faults: Option<PathBuf>,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "pm2")]
    preprocess: PreprocessMethod,
    /// `tfidf` or `cbow`.
    #[arg(long, default_value = "tfidf")]
    method: String,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "pm3")]
    preprocess: PreprocessMethod,
    /// `tfidf`, `cbow`, `sentence=<vector file>` or `word=<vector file>`.
    #[arg(long, default_value = "tfidf")]
    representation: String,
    #[arg(long, default_value = "cosine")]
    metric: Metric,
}

#[derive(Args)]
struct MinimizeArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    sim_matrix: PathBuf,
    #[arg(long)]
    budget: Option<f64>,
    #[arg(long)]
    init: Option<InitStrategy>,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    kind: BaselineKind,
    #[arg(long)]
    corpus: PathBuf,
    /// Required for `greedy`; used to report fitness for the others.
    #[arg(long)]
    sim_matrix: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    budget: f64,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    faults: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    budget: f64,
    /// Seconds before the best subset found so far is returned.
    #[arg(long, default_value_t = 60.0)]
    time_cap: f64,
}

#[derive(Args)]
struct SuiteArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    faults: PathBuf,
    #[arg(long)]
    rl: f64,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 0.1)]
    tol: f64,
}

#[derive(Serialize)]
struct SelectionReport<'a, C: Serialize> {
    technique: String,
    selected: Vec<&'a str>,
    size: usize,
    coverage: f64,
    fitness: Option<f64>,
    generations: usize,
    sim_matrix: Option<String>,
    config: C,
}

#[derive(Serialize)]
struct BaselineEcho {
    kind: BaselineKind,
    budget: f64,
    seed: u64,
}

/// Findings were reported; the process exits with status 2.
#[derive(Debug)]
struct ValidationFailed;

impl std::fmt::Display for ValidationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("validation failed")
    }
}

impl std::error::Error for ValidationFailed {}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let start = Instant::now();
    match run(&cli) {
        Ok(()) => {
            eprintln!("done in {:.3}s", start.elapsed().as_secs_f64());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<ValidationFailed>().is_some() {
        return 2;
    }
    match e.downcast_ref::<Error>() {
        Some(
            Error::MalformedRecord { .. }
            | Error::DuplicateId(_)
            | Error::UnknownRequirement { .. }
            | Error::UnknownTestCase(_)
            | Error::InfeasibleBudget { .. }
            | Error::InvalidConfig(_)
            | Error::IncompatibleMetric { .. }
            | Error::SizeMismatch { .. }
            | Error::DimensionMismatch { .. }
            | Error::MissingVector(_)
            | Error::InsufficientTokenCoverage { .. }
            | Error::RedundancyUnreachable { .. }
            | Error::UnsatisfiableSynthesis(_),
        ) => 2,
        _ => 1,
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Ingest(args) => ingest(cli, args),
        Command::Validate(args) => validate(args),
        Command::Embed(args) => embed(cli, args),
        Command::Sim(args) => sim(cli, args),
        Command::Minimize(args) => run_minimize(cli, args),
        Command::Baseline(args) => baseline(cli, args),
        Command::Oracle(args) => oracle(cli, args),
        Command::Synth => synth(cli),
        Command::RedundancySuites(args) => suites(cli, args),
        Command::Eval => eval(cli),
    }
}

fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> anyhow::Result<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())).into())
}

/// Writes to `--out`, or stdout when it is absent.
fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_json(out: Option<&Path>, value: &impl Serialize) -> anyhow::Result<()> {
    emit(out, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn require_out(cli: &Cli) -> anyhow::Result<&Path> {
    match &cli.out {
        Some(p) => Ok(p),
        None => bail!(Error::InvalidConfig("this command needs --out".into())),
    }
}

fn ingest(cli: &Cli, args: &Inputs) -> anyhow::Result<()> {
    let corpus = parse_corpus(&args.corpus)?;
    let faults = args.faults.as_ref().map(parse_fault_matrix).transpose()?;
    let report = validate_corpus(&corpus, faults.as_ref());
    eprintln!("{}", serde_json::to_string(&report.stats)?);
    match &cli.out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            corpus.write(dir.join("corpus.jsonl"))?;
            if let Some(faults) = &faults {
                faults.write(&corpus, dir.join("faults.jsonl"))?;
            }
            Ok(())
        }
        None => emit(None, &corpus.to_jsonl()),
    }
}

fn validate(args: &Inputs) -> anyhow::Result<()> {
    let corpus = parse_corpus(&args.corpus)?;
    let faults = args.faults.as_ref().map(parse_fault_matrix).transpose()?;
    let report = validate_corpus(&corpus, faults.as_ref());
    emit_json(None, &report)?;
    if report.is_ok() {
        Ok(())
    } else {
        Err(ValidationFailed.into())
    }
}

fn embed(cli: &Cli, args: &EmbedArgs) -> anyhow::Result<()> {
    let out = require_out(cli)?;
    let corpus = parse_corpus(&args.corpus)?;
    let docs = preprocess_corpus(&corpus, args.preprocess)?;
    match args.method.as_str() {
        "tfidf" => export_sentence_vectors(&tfidf_embed(&docs)?, out)?,
        "cbow" => {
            let mut config: CbowConfig = load_config(cli.config.as_deref())?;
            if let Some(seed) = cli.seed {
                config.seed = seed;
            }
            let model = train_cbow(&docs, &config)?;
            if let Some(loss) = model.epoch_loss.last() {
                log::info!("final epoch loss {loss:.6}");
            }
            export_word_vectors(&model.vectors, out)?;
        }
        other => bail!(Error::InvalidConfig(format!("unknown embedding method {other:?}"))),
    }
    Ok(())
}

fn parse_representation(s: &str) -> anyhow::Result<RepresentationSpec> {
    let imported = |path: &str| {
        let path = PathBuf::from(path);
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        (name, path)
    };
    Ok(match s.split_once('=') {
        None if s == "tfidf" => RepresentationSpec::Tfidf,
        None if s == "cbow" => RepresentationSpec::Cbow,
        Some(("sentence", p)) => {
            let (name, path) = imported(p);
            RepresentationSpec::Sentence { name, path }
        }
        Some(("word", p)) => {
            let (name, path) = imported(p);
            RepresentationSpec::Word { name, path }
        }
        _ => bail!(Error::InvalidConfig(format!("unknown representation {s:?}"))),
    })
}

fn sim(cli: &Cli, args: &SimArgs) -> anyhow::Result<()> {
    let corpus = parse_corpus(&args.corpus)?;
    let rep = parse_representation(&args.representation)?;
    if !rep.supports(args.metric) {
        let level = if args.metric == Metric::Wmd { "sentence-level" } else { "word-level" };
        bail!(Error::IncompatibleMetric { metric: args.metric.to_string(), level });
    }
    let mut cbow: CbowConfig = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cbow.seed = seed;
    }
    let matrix = build_matrix(&corpus, args.preprocess, &rep, args.metric, &cbow)?;
    emit(cli.out.as_deref(), &matrix.to_text())
}

fn load_matrix(path: &Path, corpus: &Corpus) -> anyhow::Result<SimilarityMatrix> {
    let matrix = SimilarityMatrix::read(path)?;
    if matrix.m() != corpus.m() {
        bail!(Error::SizeMismatch { matrix: matrix.m(), corpus: corpus.m() });
    }
    Ok(matrix)
}

fn run_minimize(cli: &Cli, args: &MinimizeArgs) -> anyhow::Result<()> {
    let corpus = parse_corpus(&args.corpus)?;
    let matrix = load_matrix(&args.sim_matrix, &corpus)?;
    let mut config: GaConfig = load_config(cli.config.as_deref())?;
    if let Some(budget) = args.budget {
        config.budget = budget;
    }
    if let Some(init) = args.init {
        config.init_strategy = init;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let result = minimize(&corpus, &matrix, &config)?;
    eprintln!("{} generations in {:.3}s", result.generations_run, result.wall_time.as_secs_f64());
    let selected = result.best.selected();
    emit_json(
        cli.out.as_deref(),
        &SelectionReport {
            technique: "rtm".into(),
            selected: result.best.selected_ids(&corpus),
            size: selected.len(),
            coverage: coverage(&selected, &corpus),
            fitness: Some(result.best_fitness()),
            generations: result.generations_run,
            sim_matrix: Some(matrix.provenance.clone()),
            config: &config,
        },
    )
}

fn baseline(cli: &Cli, args: &BaselineArgs) -> anyhow::Result<()> {
    let corpus = parse_corpus(&args.corpus)?;
    let matrix = args.sim_matrix.as_deref().map(|p| load_matrix(p, &corpus)).transpose()?;
    let seed = cli.seed.unwrap_or(0);
    let solution: SubsetSolution = match args.kind {
        BaselineKind::RandomConstrained => random_minimize(&corpus, args.budget, true, seed)?,
        BaselineKind::RandomUnconstrained => random_minimize(&corpus, args.budget, false, seed)?,
        BaselineKind::GreedyDiversity => {
            let Some(matrix) = &matrix else {
                bail!(Error::InvalidConfig("the greedy baseline needs --sim-matrix".into()));
            };
            greedy_diversity(&corpus, matrix, args.budget)?
        }
    };
    let selected = solution.selected();
    emit_json(
        cli.out.as_deref(),
        &SelectionReport {
            technique: args.kind.to_string(),
            selected: solution.selected_ids(&corpus),
            size: selected.len(),
            coverage: coverage(&selected, &corpus),
            fitness: matrix.as_ref().map(|m| fitness(&selected, m)),
            generations: 0,
            sim_matrix: matrix.as_ref().map(|m| m.provenance.clone()),
            config: BaselineEcho { kind: args.kind, budget: args.budget, seed },
        },
    )
}

fn oracle(cli: &Cli, args: &OracleArgs) -> anyhow::Result<()> {
    if !(args.time_cap > 0.0) {
        bail!(Error::InvalidConfig("--time-cap must be positive".into()));
    }
    let corpus = parse_corpus(&args.corpus)?;
    let faults = parse_fault_matrix(&args.faults)?;
    let result = best_fdr(&corpus, &faults, args.budget, Duration::from_secs_f64(args.time_cap))?;
    if !result.exact {
        log::warn!("time cap reached; reporting the best subset found");
    }
    emit_json(cli.out.as_deref(), &result)
}

fn synth(cli: &Cli) -> anyhow::Result<()> {
    let dir = require_out(cli)?;
    let mut config: SynthConfig = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let (corpus, faults) = synth_corpus(&config)?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    corpus.write(dir.join("corpus.jsonl"))?;
    faults.write(&corpus, dir.join("faults.jsonl"))?;
    Ok(())
}

fn suites(cli: &Cli, args: &SuiteArgs) -> anyhow::Result<()> {
    let dir = require_out(cli)?;
    let corpus = parse_corpus(&args.corpus)?;
    let faults = parse_fault_matrix(&args.faults)?;
    let mut config: SuiteSearchConfig = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let suites = generate_redundancy_suites(&corpus, &faults, args.rl, args.count, args.tol, &config)?;
    for (n, suite) in suites.iter().enumerate() {
        let sub = corpus.subset(suite);
        let ids = sub.test_cases().iter().map(|tc| tc.id.as_str());
        let sub_faults = faults.restrict(ids);
        let suite_dir = dir.join(format!("suite_{n:02}"));
        fs::create_dir_all(&suite_dir).with_context(|| format!("creating {}", suite_dir.display()))?;
        sub.write(suite_dir.join("corpus.jsonl"))?;
        sub_faults.write(&sub, suite_dir.join("faults.jsonl"))?;
    }
    Ok(())
}

fn eval(cli: &Cli) -> anyhow::Result<()> {
    let Some(path) = &cli.config else {
        bail!(Error::InvalidConfig("eval needs --config <experiment.toml>".into()));
    };
    let mut config = ExperimentConfig::from_toml_file(path)?;
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        config.seeds = (seed..seed + config.repeats as u64).collect();
    }
    let report = run_experiment(&config)?;
    for path in write_reports(&report, &config.output_dir)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}
