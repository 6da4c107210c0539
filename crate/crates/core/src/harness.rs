//! Evaluation metrics and the experiment grid runner.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::baselines::{greedy_diversity, random_minimize, BaselineKind};
use crate::corpus::{parse_corpus, parse_fault_matrix, validate_corpus, Corpus, FaultMatrix, FaultTable};
use crate::embed::{import_sentence_vectors, import_word_vectors, tfidf_embed, train_cbow, CbowConfig, SentenceVectors};
use crate::error::{Error, Result};
use crate::minimizer::{minimize, GaConfig, InitStrategy};
use crate::oracle::best_fdr;
use crate::preprocess::{preprocess_corpus, PreprocessMethod};
use crate::similarity::{build_similarity_matrix, Metric, Representation, SimilarityMatrix};

/// Share of the full suite's unique faults that `subset` detects.
pub fn fdr(subset: &[usize], faults: &FaultTable) -> Result<f64> {
    let total = faults.unique_detected(0..faults.m());
    if total == 0 {
        return Err(Error::NoFaultsDetected);
    }
    Ok(faults.unique_detected(subset.iter().copied()) as f64 / total as f64)
}

/// Share of requirements traced by at least one case of `subset`.
pub fn coverage(subset: &[usize], corpus: &Corpus) -> f64 {
    if corpus.n_req() == 0 {
        return 1.0;
    }
    corpus.covered_count(subset) as f64 / corpus.n_req() as f64
}

/// Where test-case vectors come from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RepresentationSpec {
    Tfidf,
    Cbow,
    /// Imported per-test-case vectors.
    Sentence { name: String, path: PathBuf },
    /// Imported word vectors, compared with WMD.
    Word { name: String, path: PathBuf },
}

impl RepresentationSpec {
    pub fn name(&self) -> &str {
        match self {
            Self::Tfidf => "tfidf",
            Self::Cbow => "cbow",
            Self::Sentence { name, .. } | Self::Word { name, .. } => name,
        }
    }

    fn word_level(&self) -> bool {
        matches!(self, Self::Cbow | Self::Word { .. })
    }

    pub fn supports(&self, metric: Metric) -> bool {
        self.word_level() == (metric == Metric::Wmd)
    }
}

impl fmt::Display for RepresentationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Preprocesses, embeds and scores a corpus.
pub fn build_matrix(
    corpus: &Corpus,
    method: PreprocessMethod,
    representation: &RepresentationSpec,
    metric: Metric,
    cbow: &CbowConfig,
) -> Result<SimilarityMatrix> {
    let docs = preprocess_corpus(corpus, method)?;
    let provenance = format!("{method}/{representation}/{metric}");
    let sentence = |sv: &SentenceVectors| build_similarity_matrix(corpus, Representation::Sentence(sv), metric, &provenance);
    match representation {
        RepresentationSpec::Tfidf => sentence(&tfidf_embed(&docs)?),
        RepresentationSpec::Sentence { path, .. } => sentence(&import_sentence_vectors(path, corpus)?),
        RepresentationSpec::Cbow => {
            let model = train_cbow(&docs, cbow)?;
            build_similarity_matrix(corpus, Representation::Word { vectors: &model.vectors, docs: &docs }, metric, &provenance)
        }
        RepresentationSpec::Word { path, .. } => {
            let vectors = import_word_vectors(path)?;
            vectors.check_coverage(&docs)?;
            build_similarity_matrix(corpus, Representation::Word { vectors: &vectors, docs: &docs }, metric, &provenance)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub corpus: PathBuf,
    pub faults: PathBuf,
    pub output_dir: PathBuf,
    pub budgets: Vec<f64>,
    pub repeats: usize,
    /// One seed per repeat; `0..repeats` when empty.
    pub seeds: Vec<u64>,
    pub preprocessing: Vec<PreprocessMethod>,
    pub representations: Vec<RepresentationSpec>,
    pub metrics: Vec<Metric>,
    pub init_strategies: Vec<InitStrategy>,
    pub baselines: Vec<BaselineKind>,
    pub oracle: bool,
    pub oracle_time_cap_secs: f64,
    /// GA settings; budget, seed and init strategy come from the grid.
    pub ga: GaConfig,
    pub cbow: CbowConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            corpus: PathBuf::from("corpus.jsonl"),
            faults: PathBuf::from("faults.jsonl"),
            output_dir: PathBuf::from("results"),
            budgets: vec![0.5],
            repeats: 10,
            seeds: Vec::new(),
            preprocessing: vec![PreprocessMethod::Pm3],
            representations: vec![RepresentationSpec::Tfidf],
            metrics: vec![Metric::Cosine],
            init_strategies: vec![InitStrategy::S2],
            baselines: vec![BaselineKind::RandomConstrained, BaselineKind::RandomUnconstrained],
            oracle: false,
            oracle_time_cap_secs: 60.0,
            ga: GaConfig::default(),
            cbow: CbowConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Reads a TOML file; relative paths are taken from the file's
    /// directory.
    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: ExperimentConfig =
            toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let anchor = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        anchor(&mut config.corpus);
        anchor(&mut config.faults);
        anchor(&mut config.output_dir);
        for rep in &mut config.representations {
            if let RepresentationSpec::Sentence { path, .. } | RepresentationSpec::Word { path, .. } = rep {
                anchor(path);
            }
        }
        Ok(config)
    }

    pub fn seed_list(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            (0..self.repeats as u64).collect()
        } else {
            self.seeds.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::InvalidConfig("repeats must be at least 1".into()));
        }
        if !self.seeds.is_empty() && self.seeds.len() != self.repeats {
            return Err(Error::InvalidConfig(format!(
                "{} seeds given for {} repeats",
                self.seeds.len(),
                self.repeats
            )));
        }
        if self.budgets.is_empty() || self.budgets.iter().any(|&b| !(b > 0.0 && b <= 1.0)) {
            return Err(Error::InvalidConfig("budgets must be a non-empty list of values in (0, 1]".into()));
        }
        self.ga.validate()
    }
}

/// Grid coordinates of a run. Baselines and the oracle leave the GA
/// coordinates they do not use as `-`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coordinates {
    pub technique: String,
    pub preprocessing: String,
    pub representation: String,
    pub metric: String,
    pub init: String,
}

impl Coordinates {
    fn baseline(technique: impl Into<String>) -> Self {
        let dash = || "-".to_string();
        Coordinates { technique: technique.into(), preprocessing: dash(), representation: dash(), metric: dash(), init: dash() }
    }

    pub fn label(&self) -> String {
        if self.preprocessing == "-" {
            self.technique.clone()
        } else {
            format!("{}:{}/{}/{}/{}", self.technique, self.preprocessing, self.representation, self.metric, self.init)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub coordinates: Coordinates,
    pub budget: f64,
    pub seed: u64,
    pub fdr: Option<f64>,
    pub coverage: Option<f64>,
    pub fitness: Option<f64>,
    pub generations: Option<usize>,
    /// Kept out of the CSV so reruns produce identical files.
    pub wall_time: Duration,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub coordinates: Coordinates,
    pub budget: f64,
    /// Mean over the successful repeats; empty when every repeat failed.
    pub mean_fdr: Option<f64>,
    pub mean_coverage: Option<f64>,
    pub repeats: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub records: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentReport {
    pub fn mean_fdr(&self, label: &str, budget: f64) -> Option<f64> {
        self.summary
            .iter()
            .find(|row| row.coordinates.label() == label && row.budget == budget)
            .and_then(|row| row.mean_fdr)
    }
}

/// Loads the files named by the config and runs the grid.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let corpus = parse_corpus(&config.corpus)?;
    let faults = parse_fault_matrix(&config.faults)?;
    run_experiment_on(&corpus, &faults, config)
}

/// Runs every grid cell, baseline and (optionally) the oracle over all
/// budgets and seeds. Sub-run failures are recorded, not raised.
pub fn run_experiment_on(corpus: &Corpus, faults: &FaultMatrix, config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let report = validate_corpus(corpus, Some(faults));
    if !report.is_ok() {
        let first = &report.errors[0];
        return Err(Error::InvalidConfig(format!(
            "corpus fails validation with {} errors, first: {}",
            report.errors.len(),
            first.message
        )));
    }
    let table = faults.resolve(corpus)?;
    let seeds = config.seed_list();
    let mut records = Vec::new();
    let mut first_matrix: Option<(Coordinates, SimilarityMatrix)> = None;

    for &method in &config.preprocessing {
        for rep in &config.representations {
            for &metric in &config.metrics {
                if !rep.supports(metric) {
                    log::debug!("skipping {rep} with {metric}");
                    continue;
                }
                let matrix = build_matrix(corpus, method, rep, metric, &config.cbow);
                for &init in &config.init_strategies {
                    let coordinates = Coordinates {
                        technique: "rtm".into(),
                        preprocessing: method.to_string(),
                        representation: rep.to_string(),
                        metric: metric.to_string(),
                        init: init.to_string(),
                    };
                    for &budget in &config.budgets {
                        for &seed in &seeds {
                            let start = Instant::now();
                            let outcome = matrix.as_ref().map_err(|e| e.to_string()).and_then(|sim| {
                                let ga = GaConfig { budget, seed, init_strategy: init, ..config.ga.clone() };
                                minimize(corpus, sim, &ga).map_err(|e| e.to_string())
                            });
                            let mut record = blank(&coordinates, budget, seed);
                            match outcome {
                                Ok(result) => {
                                    let selected = result.best.selected();
                                    record.fdr = fdr(&selected, &table).ok();
                                    record.coverage = Some(coverage(&selected, corpus));
                                    record.fitness = result.best.fitness;
                                    record.generations = Some(result.generations_run);
                                }
                                Err(e) => record.error = Some(e),
                            }
                            record.wall_time = start.elapsed();
                            records.push(record);
                        }
                    }
                    if first_matrix.is_none() {
                        if let Ok(m) = &matrix {
                            first_matrix = Some((coordinates.clone(), m.clone()));
                        }
                    }
                }
            }
        }
    }

    for &kind in &config.baselines {
        let mut coordinates = Coordinates::baseline(kind.to_string());
        if kind == BaselineKind::GreedyDiversity {
            match &first_matrix {
                Some((c, _)) => {
                    coordinates.preprocessing = c.preprocessing.clone();
                    coordinates.representation = c.representation.clone();
                    coordinates.metric = c.metric.clone();
                }
                None => log::warn!("greedy baseline needs a similarity matrix; none was built"),
            }
        }
        for &budget in &config.budgets {
            for &seed in &seeds {
                let start = Instant::now();
                let outcome = match kind {
                    BaselineKind::RandomConstrained => random_minimize(corpus, budget, true, seed),
                    BaselineKind::RandomUnconstrained => random_minimize(corpus, budget, false, seed),
                    BaselineKind::GreedyDiversity => match &first_matrix {
                        Some((_, sim)) => greedy_diversity(corpus, sim, budget),
                        None => Err(Error::InvalidConfig("no similarity matrix available".into())),
                    },
                };
                let mut record = blank(&coordinates, budget, seed);
                match outcome {
                    Ok(sol) => {
                        let selected = sol.selected();
                        record.fdr = fdr(&selected, &table).ok();
                        record.coverage = Some(coverage(&selected, corpus));
                    }
                    Err(e) => record.error = Some(e.to_string()),
                }
                record.wall_time = start.elapsed();
                records.push(record);
            }
        }
    }

    if config.oracle {
        let coordinates = Coordinates::baseline("oracle");
        let cap = Duration::from_secs_f64(config.oracle_time_cap_secs.max(0.0));
        for &budget in &config.budgets {
            let start = Instant::now();
            let mut record = blank(&coordinates, budget, 0);
            match best_fdr(corpus, faults, budget, cap) {
                Ok(r) => {
                    if !r.exact {
                        log::warn!("oracle at budget {budget} hit the time cap; reporting the incumbent");
                    }
                    let selected: Vec<usize> = r.subset.iter().filter_map(|id| corpus.index_of(id)).collect();
                    record.fdr = Some(r.fdr);
                    record.coverage = Some(coverage(&selected, corpus));
                }
                Err(e) => record.error = Some(e.to_string()),
            }
            record.wall_time = start.elapsed();
            records.push(record);
        }
    }

    let summary = summarize(&records);
    Ok(ExperimentReport { records, summary })
}

fn blank(coordinates: &Coordinates, budget: f64, seed: u64) -> RunRecord {
    RunRecord {
        coordinates: coordinates.clone(),
        budget,
        seed,
        fdr: None,
        coverage: None,
        fitness: None,
        generations: None,
        wall_time: Duration::ZERO,
        error: None,
    }
}

/// Arithmetic means per (coordinates, budget), in first-seen order.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut order: Vec<(Coordinates, u64)> = Vec::new();
    let mut groups: BTreeMap<(Coordinates, u64), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        let key = (r.coordinates.clone(), r.budget.to_bits());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let runs = &groups[&key];
            let ok: Vec<&&RunRecord> = runs.iter().filter(|r| r.error.is_none() && r.fdr.is_some()).collect();
            let mean = |f: fn(&RunRecord) -> Option<f64>| {
                if ok.is_empty() {
                    None
                } else {
                    Some(ok.iter().filter_map(|r| f(r)).sum::<f64>() / ok.len() as f64)
                }
            };
            SummaryRow {
                coordinates: key.0.clone(),
                budget: f64::from_bits(key.1),
                mean_fdr: mean(|r| r.fdr),
                mean_coverage: mean(|r| r.coverage),
                repeats: ok.len(),
            }
        })
        .collect()
}

#[derive(Serialize)]
struct RunLine<'a> {
    technique: &'a str,
    preprocessing: &'a str,
    representation: &'a str,
    metric: &'a str,
    init: &'a str,
    budget: f64,
    seed: u64,
    fdr: Option<f64>,
    coverage: Option<f64>,
    fitness: Option<f64>,
    generations: Option<usize>,
    error: Option<&'a str>,
}

impl<'a> From<&'a RunRecord> for RunLine<'a> {
    fn from(r: &'a RunRecord) -> Self {
        let c = &r.coordinates;
        RunLine {
            technique: &c.technique,
            preprocessing: &c.preprocessing,
            representation: &c.representation,
            metric: &c.metric,
            init: &c.init,
            budget: r.budget,
            seed: r.seed,
            fdr: r.fdr,
            coverage: r.coverage,
            fitness: r.fitness,
            generations: r.generations,
            error: r.error.as_deref(),
        }
    }
}

#[derive(Serialize)]
struct SummaryLine<'a> {
    technique: &'a str,
    preprocessing: &'a str,
    representation: &'a str,
    metric: &'a str,
    init: &'a str,
    budget: f64,
    mean_fdr: Option<f64>,
    mean_coverage: Option<f64>,
    repeats: usize,
}

impl<'a> From<&'a SummaryRow> for SummaryLine<'a> {
    fn from(r: &'a SummaryRow) -> Self {
        let c = &r.coordinates;
        SummaryLine {
            technique: &c.technique,
            preprocessing: &c.preprocessing,
            representation: &c.representation,
            metric: &c.metric,
            init: &c.init,
            budget: r.budget,
            mean_fdr: r.mean_fdr,
            mean_coverage: r.mean_coverage,
            repeats: r.repeats,
        }
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Internal(format!("writing {}: {other:?}", path.display())),
    }
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6}")).unwrap_or_default()
}

/// Writes `runs.csv`, `summary.csv`, one `grid_budget_<b>.csv` per
/// budget (rows representation × metric, columns init × preprocessing) and
/// `fdr_by_budget.csv` (rows technique, columns budget).
pub fn write_reports(report: &ExperimentReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let runs = dir.join("runs.csv");
    write_rows(&runs, &report.records.iter().map(RunLine::from).collect::<Vec<_>>())?;
    written.push(runs);
    let summary = dir.join("summary.csv");
    write_rows(&summary, &report.summary.iter().map(SummaryLine::from).collect::<Vec<_>>())?;
    written.push(summary);

    let mut budgets: Vec<f64> = report.summary.iter().map(|r| r.budget).collect();
    budgets.sort_by(f64::total_cmp);
    budgets.dedup();

    let rtm: Vec<&SummaryRow> = report.summary.iter().filter(|r| r.coordinates.technique == "rtm").collect();
    let mut row_keys: Vec<(String, String)> = Vec::new();
    let mut col_keys: Vec<(String, String)> = Vec::new();
    for r in &rtm {
        let row = (r.coordinates.representation.clone(), r.coordinates.metric.clone());
        let col = (r.coordinates.init.clone(), r.coordinates.preprocessing.clone());
        if !row_keys.contains(&row) {
            row_keys.push(row);
        }
        if !col_keys.contains(&col) {
            col_keys.push(col);
        }
    }
    if !rtm.is_empty() {
        for &budget in &budgets {
            let mut header = vec!["representation".to_string(), "metric".to_string()];
            header.extend(col_keys.iter().map(|(i, p)| format!("{i}/{p}")));
            let rows: Vec<Vec<String>> = row_keys
                .iter()
                .map(|(rep, metric)| {
                    let mut line = vec![rep.clone(), metric.clone()];
                    line.extend(col_keys.iter().map(|(init, pm)| {
                        cell(
                            rtm.iter()
                                .find(|r| {
                                    r.budget == budget
                                        && &r.coordinates.representation == rep
                                        && &r.coordinates.metric == metric
                                        && &r.coordinates.init == init
                                        && &r.coordinates.preprocessing == pm
                                })
                                .and_then(|r| r.mean_fdr),
                        )
                    }));
                    line
                })
                .collect();
            let path = dir.join(format!("grid_budget_{budget:.2}.csv"));
            write_table(&path, &header, &rows)?;
            written.push(path);
        }
    }

    let mut labels: Vec<String> = Vec::new();
    for r in &report.summary {
        let label = r.coordinates.label();
        if !labels.contains(&label) {
            labels.push(label);
        }
    }
    let mut header = vec!["technique".to_string()];
    header.extend(budgets.iter().map(|b| format!("{b}")));
    let rows: Vec<Vec<String>> = labels
        .iter()
        .map(|label| {
            let mut line = vec![label.clone()];
            line.extend(budgets.iter().map(|&b| cell(report.mean_fdr(label, b))));
            line
        })
        .collect();
    let path = dir.join("fdr_by_budget.csv");
    write_table(&path, &header, &rows)?;
    written.push(path);
    Ok(written)
}
