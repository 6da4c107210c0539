use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{jaccard, Corpus, FaultMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteSearchConfig {
    /// Candidate suites to collect before picking the diverse ones.
    pub pool_size: usize,
    /// Constructions tried before giving up.
    pub max_attempts: usize,
    pub ga_population: usize,
    pub ga_generations: usize,
    pub seed: u64,
}

impl Default for SuiteSearchConfig {
    fn default() -> Self {
        SuiteSearchConfig { pool_size: 100, max_attempts: 2000, ga_population: 50, ga_generations: 300, seed: 0 }
    }
}

/// Suites (sorted case indices) that cover every requirement and every
/// detected fault and whose redundancy level is within `tol` of
/// `target_rl`. Returns `count` of them chosen to minimize the summed
/// pairwise Jaccard similarity.
pub fn generate_redundancy_suites(
    corpus: &Corpus,
    faults: &FaultMatrix,
    target_rl: f64,
    count: usize,
    tol: f64,
    config: &SuiteSearchConfig,
) -> Result<Vec<Vec<usize>>> {
    if count == 0 || !(tol >= 0.0) || !(target_rl >= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "need count ≥ 1, tol ≥ 0 and target ≥ 1 (got {count}, {tol}, {target_rl})"
        )));
    }
    let table = faults.resolve(corpus)?;
    let n_faults = table.unique_detected(0..corpus.m());
    if n_faults == 0 {
        return Err(Error::NoFaultsDetected);
    }
    let m = corpus.m();
    let fault_lists: Vec<Vec<usize>> = (0..m).map(|i| table.detected_by(i).iter().map(|&f| f as usize).collect()).collect();
    let mut detectors = vec![Vec::new(); table.n_faults()];
    for (i, fs) in fault_lists.iter().enumerate() {
        for &f in fs {
            detectors[f].push(i);
        }
    }
    let lo = ((target_rl - tol) * n_faults as f64 - 1e-9).ceil().max(0.0) as usize;
    let hi = ((target_rl + tol) * n_faults as f64 + 1e-9).floor() as usize;
    let builder = Builder { corpus, fault_lists: &fault_lists, detectors: &detectors, lo, hi };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut pool: Vec<Vec<usize>> = Vec::new();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut closest = f64::NAN;
    for _ in 0..config.max_attempts {
        if pool.len() >= config.pool_size {
            break;
        }
        let (suite, total) = builder.build(&mut rng);
        let rl = total as f64 / n_faults as f64;
        if closest.is_nan() || (rl - target_rl).abs() < (closest - target_rl).abs() {
            closest = rl;
        }
        if (lo..=hi).contains(&total) && seen.insert(suite.clone()) {
            pool.push(suite);
        }
    }
    if pool.len() < count {
        return Err(Error::RedundancyUnreachable { target: target_rl, closest });
    }
    let picks = select_diverse(&pool, count, config, &mut rng);
    Ok(picks.into_iter().map(|p| pool[p].clone()).collect())
}

struct Builder<'a> {
    corpus: &'a Corpus,
    fault_lists: &'a [Vec<usize>],
    detectors: &'a [Vec<usize>],
    lo: usize,
    hi: usize,
}

impl Builder<'_> {
    /// One randomized construction: a light cover of requirements and
    /// faults, then removals or additions towards the detection window.
    /// Returns the suite and its total detections.
    fn build<R: Rng>(&self, rng: &mut R) -> (Vec<usize>, usize) {
        let m = self.corpus.m();
        let n_req = self.corpus.n_req();
        let weight = |i: usize| self.fault_lists[i].len();
        let mut chosen = vec![false; m];
        let mut req_hits = vec![0usize; n_req];
        let mut fault_hits = vec![0usize; self.detectors.len()];
        let mut total = 0usize;

        let add = |i: usize, chosen: &mut [bool], req_hits: &mut [usize], fault_hits: &mut [usize], total: &mut usize| {
            chosen[i] = true;
            self.corpus.cover(i).iter().for_each(|&r| req_hits[r] += 1);
            self.fault_lists[i].iter().for_each(|&f| fault_hits[f] += 1);
            *total += weight(i);
        };

        // elements: requirements first in the index space, then faults
        let mut elements: Vec<usize> = (0..n_req + self.detectors.len())
            .filter(|&e| e < n_req || !self.detectors[e - n_req].is_empty())
            .collect();
        elements.shuffle(rng);
        for e in elements {
            let (done, candidates) = if e < n_req {
                (req_hits[e] > 0, self.corpus.cases_for(e))
            } else {
                (fault_hits[e - n_req] > 0, self.detectors[e - n_req].as_slice())
            };
            if done {
                continue;
            }
            // lightest of three random candidates
            let i = (0..3)
                .map(|_| *candidates.choose(rng).expect("element has a covering case"))
                .min_by_key(|&i| weight(i))
                .expect("three draws");
            add(i, &mut chosen, &mut req_hits, &mut fault_hits, &mut total);
        }

        if total > self.hi {
            let mut order: Vec<usize> = (0..m).filter(|&i| chosen[i]).collect();
            order.shuffle(rng);
            order.sort_by_key(|&i| std::cmp::Reverse(weight(i)));
            for i in order {
                if total <= self.hi {
                    break;
                }
                let redundant = self.corpus.cover(i).iter().all(|&r| req_hits[r] >= 2)
                    && self.fault_lists[i].iter().all(|&f| fault_hits[f] >= 2);
                if redundant && weight(i) > 0 {
                    chosen[i] = false;
                    self.corpus.cover(i).iter().for_each(|&r| req_hits[r] -= 1);
                    self.fault_lists[i].iter().for_each(|&f| fault_hits[f] -= 1);
                    total -= weight(i);
                }
            }
        }
        if total < self.lo {
            let mut rest: Vec<usize> = (0..m).filter(|&i| !chosen[i] && weight(i) > 0).collect();
            rest.shuffle(rng);
            for i in rest {
                if total >= self.lo {
                    break;
                }
                if total + weight(i) <= self.hi {
                    add(i, &mut chosen, &mut req_hits, &mut fault_hits, &mut total);
                }
            }
        }
        ((0..m).filter(|&i| chosen[i]).collect(), total)
    }
}

/// Picks `count` pool members with low summed pairwise Jaccard similarity.
fn select_diverse<R: Rng>(pool: &[Vec<usize>], count: usize, config: &SuiteSearchConfig, rng: &mut R) -> Vec<usize> {
    let n = pool.len();
    if n == count {
        return (0..n).collect();
    }
    let sets: Vec<BTreeSet<usize>> = pool.iter().map(|s| s.iter().copied().collect()).collect();
    let mut sim = vec![0.0; n * n];
    for a in 0..n {
        for b in a + 1..n {
            let j = jaccard(&sets[a], &sets[b]).unwrap_or(1.0);
            sim[a * n + b] = j;
            sim[b * n + a] = j;
        }
    }
    let cost = |picks: &[usize]| -> f64 {
        let mut total = 0.0;
        for (x, &a) in picks.iter().enumerate() {
            for &b in &picks[x + 1..] {
                total += sim[a * n + b];
            }
        }
        total
    };
    let random_pick = |rng: &mut R| {
        let mut p = rand::seq::index::sample(rng, n, count).into_vec();
        p.sort_unstable();
        p
    };
    let mut population: Vec<(f64, Vec<usize>)> = (0..config.ga_population.max(2))
        .map(|_| {
            let p = random_pick(rng);
            (cost(&p), p)
        })
        .collect();
    population.sort_by(|a, b| a.0.total_cmp(&b.0));
    let size = population.len();
    for _ in 0..config.ga_generations {
        let mut offspring = Vec::with_capacity(size);
        for _ in 0..size {
            let mut pick = || {
                let (a, b) = (rng.gen_range(0..size), rng.gen_range(0..size));
                a.min(b)
            };
            let (pa, pb) = (pick(), pick());
            let (p1, p2) = (&population[pa].1, &population[pb].1);
            let mut child: Vec<usize> = p1.iter().copied().filter(|x| p2.contains(x)).collect();
            let mut rest: Vec<usize> = p1.iter().chain(p2).copied().filter(|x| !child.contains(x)).collect();
            rest.sort_unstable();
            rest.dedup();
            rest.shuffle(rng);
            child.extend(rest.into_iter().take(count - child.len()));
            if rng.gen_bool(0.3) {
                let slot = rng.gen_range(0..count);
                let outside: Vec<usize> = (0..n).filter(|x| !child.contains(x)).collect();
                child[slot] = *outside.choose(rng).expect("pool larger than count");
            }
            child.sort_unstable();
            offspring.push((cost(&child), child));
        }
        population.extend(offspring);
        population.sort_by(|a, b| a.0.total_cmp(&b.0));
        population.dedup_by(|a, b| a.1 == b.1);
        population.truncate(size);
    }
    population.swap_remove(0).1
}
