//! Fixed-size, coverage-preserving subset search with a genetic algorithm.
//!
//! Individuals are selection vectors over the corpus test cases. Every
//! individual holds exactly `round(m · budget)` selected cases; validity
//! means the selection covers every requirement. The GA minimizes the mean
//! squared nearest-neighbour similarity of the selection.

mod init;
mod operators;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::similarity::SimilarityMatrix;

pub use init::{init_individual, init_population};
pub use operators::{crossover, invert_segment, mutate, repair, select_parents, tournament, RepairOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitStrategy {
    /// Round-robin over requirements, one random case per requirement per
    /// pass, until the budget is met.
    S1,
    /// One random case per requirement, then uniform random fill.
    S2,
    /// Per-requirement quota proportional to the budget, then ±1
    /// adjustments to hit the budget exactly.
    S3,
}

impl InitStrategy {
    pub const ALL: [InitStrategy; 3] = [Self::S1, Self::S2, Self::S3];
}

impl fmt::Display for InitStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::S1 => "s1",
            Self::S2 => "s2",
            Self::S3 => "s3",
        })
    }
}

impl FromStr for InitStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s1" | "1" => Ok(Self::S1),
            "s2" | "2" => Ok(Self::S2),
            "s3" | "3" => Ok(Self::S3),
            other => Err(Error::InvalidConfig(format!("unknown init strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    /// Fraction of the suite to keep, in (0, 1].
    pub budget: f64,
    pub population_size: usize,
    pub crossover_rate: f64,
    /// Probability that an offspring gets one segment inversion.
    pub mutation_rate: f64,
    /// Stop once the best fitness improved by less than this over the last
    /// `convergence_window` generations.
    pub convergence_epsilon: f64,
    pub convergence_window: usize,
    pub max_generations: usize,
    pub init_strategy: InitStrategy,
    pub seed: u64,
    pub repair_enabled: bool,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            budget: 0.5,
            population_size: 100,
            crossover_rate: 0.90,
            mutation_rate: 0.01,
            convergence_epsilon: 0.0025,
            convergence_window: 10,
            max_generations: 1000,
            init_strategy: InitStrategy::S2,
            seed: 0,
            repair_enabled: false,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let rate = |name: &str, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must lie in [0, 1], got {x}")))
            }
        };
        rate("crossover_rate", self.crossover_rate)?;
        rate("mutation_rate", self.mutation_rate)?;
        if self.population_size == 0 {
            return Err(Error::InvalidConfig("population_size must be positive".into()));
        }
        if !(self.convergence_epsilon >= 0.0) {
            return Err(Error::InvalidConfig("convergence_epsilon must be non-negative".into()));
        }
        if self.convergence_window == 0 {
            return Err(Error::InvalidConfig("convergence_window must be positive".into()));
        }
        Ok(())
    }
}

/// `round(m · budget)` with halves rounded up.
pub fn budget_size(m: usize, budget: f64) -> usize {
    (m as f64 * budget + 0.5).floor() as usize
}

/// Checks the budget against the corpus and returns the subset size.
pub fn check_budget(corpus: &Corpus, budget: f64) -> Result<usize> {
    if !(budget > 0.0 && budget <= 1.0) {
        return Err(Error::InvalidConfig(format!("budget must lie in (0, 1], got {budget}")));
    }
    let k = budget_size(corpus.m(), budget);
    if k < corpus.n_req() || k == 0 {
        return Err(Error::InfeasibleBudget {
            budget,
            selected: k,
            required: corpus.n_req(),
            min_budget: corpus.n_req().max(1) as f64 / corpus.m().max(1) as f64,
        });
    }
    Ok(k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetSolution {
    bits: Vec<bool>,
    selected_count: usize,
    /// Covers every requirement.
    pub valid: bool,
    pub fitness: Option<f64>,
}

impl SubsetSolution {
    pub fn from_bits(bits: Vec<bool>, corpus: &Corpus) -> Self {
        let selected: Vec<usize> = selected_indices(&bits);
        let valid = corpus.covers_all(&selected);
        SubsetSolution { selected_count: selected.len(), bits, valid, fitness: None }
    }

    pub fn from_indices(indices: &[usize], corpus: &Corpus) -> Self {
        let mut bits = vec![false; corpus.m()];
        for &i in indices {
            bits[i] = true;
        }
        Self::from_bits(bits, corpus)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn selected_count(&self) -> usize {
        self.selected_count
    }

    pub fn selected(&self) -> Vec<usize> {
        selected_indices(&self.bits)
    }

    pub fn selected_ids<'a>(&self, corpus: &'a Corpus) -> Vec<&'a str> {
        self.selected().into_iter().map(|i| corpus.test_cases()[i].id.as_str()).collect()
    }

    pub fn evaluate(&mut self, sim: &SimilarityMatrix) -> f64 {
        let f = fitness(&self.selected(), sim);
        self.fitness = Some(f);
        f
    }
}

fn selected_indices(bits: &[bool]) -> Vec<usize> {
    bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
}

/// Mean over the selection of the squared similarity to the nearest other
/// selected case. A single selected case scores 0.
pub fn fitness(selected: &[usize], sim: &SimilarityMatrix) -> f64 {
    let n = selected.len();
    if n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    if n * 4 < sim.m() {
        for &i in selected {
            let row = sim.row(i);
            let mut best = 0.0f64;
            for &j in selected {
                if j != i {
                    best = best.max(row[j]);
                }
            }
            total += best * best;
        }
    } else {
        // dense selections: scan whole rows against a 0/1 mask
        let mut mask = vec![0.0; sim.m()];
        for &j in selected {
            mask[j] = 1.0;
        }
        for &i in selected {
            mask[i] = 0.0;
            let best = masked_max(sim.row(i), &mask);
            mask[i] = 1.0;
            total += best * best;
        }
    }
    total / n as f64
}

/// Largest `row[j] * mask[j]`, at least 0. Eight independent lanes so the
/// loop vectorizes.
fn masked_max(row: &[f64], mask: &[f64]) -> f64 {
    let mut lanes = [0.0f64; 8];
    let rows = row.chunks_exact(8);
    let tail = rows.remainder().iter().zip(&mask[row.len() - rows.remainder().len()..]);
    for (r, w) in rows.zip(mask.chunks_exact(8)) {
        for l in 0..8 {
            let v = r[l] * w[l];
            lanes[l] = if v > lanes[l] { v } else { lanes[l] };
        }
    }
    let mut best = tail.fold(0.0f64, |b, (r, w)| b.max(r * w));
    for l in lanes {
        best = best.max(l);
    }
    best
}

#[derive(Debug, Clone)]
pub struct MinimizationResult {
    pub best: SubsetSolution,
    pub generations_run: usize,
    /// Best fitness after initialization, then after each generation.
    pub fitness_history: Vec<f64>,
    pub wall_time: Duration,
}

impl MinimizationResult {
    pub fn best_fitness(&self) -> f64 {
        self.best.fitness.expect("best individual is evaluated")
    }
}

/// Ordering used for survival and tournaments: valid first, then lower
/// fitness.
fn better(a: &SubsetSolution, b: &SubsetSolution) -> std::cmp::Ordering {
    b.valid
        .cmp(&a.valid)
        .then_with(|| a.fitness.unwrap_or(f64::INFINITY).total_cmp(&b.fitness.unwrap_or(f64::INFINITY)))
}

pub fn minimize(corpus: &Corpus, sim: &SimilarityMatrix, config: &GaConfig) -> Result<MinimizationResult> {
    let start = Instant::now();
    config.validate()?;
    if sim.m() != corpus.m() {
        return Err(Error::SizeMismatch { matrix: sim.m(), corpus: corpus.m() });
    }
    let k = check_budget(corpus, config.budget)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut population = init_population(corpus, config, &mut rng)?;
    population.par_iter_mut().for_each(|s| {
        s.evaluate(sim);
    });
    population.sort_by(better);
    let mut best = population
        .iter()
        .find(|s| s.valid)
        .cloned()
        .ok_or_else(|| Error::Internal("initial population holds no valid individual".into()))?;
    let mut history = vec![best.fitness.expect("evaluated")];

    let mut generations_run = 0;
    while generations_run < config.max_generations {
        let mut offspring = Vec::with_capacity(config.population_size);
        for _ in 0..config.population_size {
            let (a, b) = select_parents(&population, &mut rng);
            let mut child = crossover(&population[a], &population[b], config.crossover_rate, corpus, &mut rng);
            child = mutate(child, config.mutation_rate, corpus, &mut rng);
            if config.repair_enabled && !child.valid {
                child = repair(&child, corpus, k, &mut rng).solution;
            }
            debug_assert_eq!(child.selected_count(), k);
            offspring.push(child);
        }
        offspring.par_iter_mut().for_each(|s| {
            s.evaluate(sim);
        });

        population.append(&mut offspring);
        population.sort_by(better);
        population.truncate(config.population_size);

        if population[0].valid && better(&population[0], &best).is_lt() {
            best = population[0].clone();
        }
        generations_run += 1;
        history.push(best.fitness.expect("evaluated"));

        let g = history.len() - 1;
        if g >= config.convergence_window
            && history[g - config.convergence_window] - history[g] < config.convergence_epsilon
        {
            break;
        }
    }

    Ok(MinimizationResult { best, generations_run, fitness_history: history, wall_time: start.elapsed() })
}
