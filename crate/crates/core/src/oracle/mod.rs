//! Ground truth: best achievable FDR, redundancy-controlled suites and
//! synthetic corpora.

mod suites;
mod synth;

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::corpus::{Corpus, FaultMatrix, FaultTable};
use crate::error::{Error, Result};
use crate::minimizer::check_budget;

pub use suites::{generate_redundancy_suites, SuiteSearchConfig};
pub use synth::{synth_corpus, SynthConfig};

pub const DEFAULT_TIME_CAP: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    /// Selected test-case ids in corpus order.
    pub subset: Vec<String>,
    pub fdr: f64,
    /// The search finished, so `fdr` is optimal.
    pub exact: bool,
}

/// Fixed-width fault bitsets, one per test case.
struct Bits {
    words: usize,
    data: Vec<u64>,
}

impl Bits {
    fn new(table: &FaultTable) -> Self {
        let words = table.n_faults().div_ceil(64).max(1);
        let mut data = vec![0u64; words * table.m()];
        for i in 0..table.m() {
            for &f in table.detected_by(i) {
                data[i * words + f as usize / 64] |= 1 << (f % 64);
            }
        }
        Bits { words, data }
    }

    fn row(&self, i: usize) -> &[u64] {
        &self.data[i * self.words..(i + 1) * self.words]
    }

    fn gain(&self, i: usize, have: &[u64]) -> u32 {
        self.row(i).iter().zip(have).map(|(a, b)| (a & !b).count_ones()).sum()
    }
}

fn count(bits: &[u64]) -> u32 {
    bits.iter().map(|w| w.count_ones()).sum()
}

/// Highest FDR over budget-exact, fully covering subsets.
///
/// Branch and bound over include/exclude decisions, bounded by the sum of
/// the largest marginal gains that still fit in the budget. Starts from a
/// greedy incumbent improved by swaps; if `time_cap` expires the incumbent
/// is returned with `exact = false`.
pub fn best_fdr(corpus: &Corpus, faults: &FaultMatrix, budget: f64, time_cap: Duration) -> Result<OracleResult> {
    let k = check_budget(corpus, budget)?;
    let table = faults.resolve(corpus)?;
    let total = table.unique_detected(0..corpus.m());
    if total == 0 {
        return Err(Error::NoFaultsDetected);
    }
    let bits = Bits::new(&table);
    let mut search = Search::new(corpus, &bits, k, time_cap);
    let incumbent = search.greedy();
    let incumbent = search.improve_by_swaps(incumbent);
    search.best_value = count(&search.union_of(&incumbent));
    search.best = incumbent;
    let exact = search.run();

    let mut chosen = vec![false; corpus.m()];
    for &i in &search.best {
        chosen[i] = true;
    }
    let mut missing = k - search.best.len();
    for c in chosen.iter_mut() {
        if missing == 0 {
            break;
        }
        if !*c {
            *c = true;
            missing -= 1;
        }
    }
    let selected: Vec<usize> = (0..corpus.m()).filter(|&i| chosen[i]).collect();
    let fdr = table.unique_detected(selected.iter().copied()) as f64 / total as f64;
    Ok(OracleResult {
        subset: selected.iter().map(|&i| corpus.test_cases()[i].id.clone()).collect(),
        fdr,
        exact,
    })
}

struct Search<'a> {
    corpus: &'a Corpus,
    bits: &'a Bits,
    k: usize,
    /// Branching order: most faults first.
    order: Vec<usize>,
    /// Per requirement, the last position in `order` that covers it.
    last_chance: Vec<usize>,
    /// Most requirements traced by a single case.
    max_cover: usize,
    best: Vec<usize>,
    best_value: u32,
    deadline: Instant,
    nodes: u64,
    timed_out: bool,
}

impl<'a> Search<'a> {
    fn new(corpus: &'a Corpus, bits: &'a Bits, k: usize, time_cap: Duration) -> Self {
        let mut order: Vec<usize> = (0..corpus.m()).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(count(bits.row(i))));
        let mut last_chance = vec![0; corpus.n_req()];
        for (pos, &i) in order.iter().enumerate() {
            for &r in corpus.cover(i) {
                last_chance[r] = pos;
            }
        }
        Search {
            corpus,
            bits,
            k,
            order,
            last_chance,
            max_cover: (0..corpus.m()).map(|i| corpus.cover(i).len()).max().unwrap_or(1).max(1),
            best: Vec::new(),
            best_value: 0,
            deadline: Instant::now() + time_cap,
            nodes: 0,
            timed_out: false,
        }
    }

    fn union_of(&self, selected: &[usize]) -> Vec<u64> {
        let mut have = vec![0u64; self.bits.words];
        for &i in selected {
            have.iter_mut().zip(self.bits.row(i)).for_each(|(h, b)| *h |= b);
        }
        have
    }

    /// Greedy on new faults, switching to greedy set cover once the free
    /// slots are needed for the uncovered requirements.
    fn greedy(&self) -> Vec<usize> {
        let m = self.corpus.m();
        let mut chosen = vec![false; m];
        let mut covered = vec![false; self.corpus.n_req()];
        let mut have = vec![0u64; self.bits.words];
        let mut selected = Vec::with_capacity(self.k);
        let take = |i: usize, chosen: &mut Vec<bool>, covered: &mut Vec<bool>, have: &mut Vec<u64>, selected: &mut Vec<usize>| {
            chosen[i] = true;
            selected.push(i);
            for &r in self.corpus.cover(i) {
                covered[r] = true;
            }
            have.iter_mut().zip(self.bits.row(i)).for_each(|(h, b)| *h |= b);
        };
        while selected.len() < self.k {
            let cover_plan = self.greedy_cover(&chosen, &covered, &have);
            if cover_plan.len() >= self.k - selected.len() {
                for i in cover_plan {
                    take(i, &mut chosen, &mut covered, &mut have, &mut selected);
                }
                continue;
            }
            let Some(i) = (0..m)
                .filter(|&i| !chosen[i])
                .max_by_key(|&i| (self.bits.gain(i, &have), std::cmp::Reverse(i)))
            else {
                break;
            };
            take(i, &mut chosen, &mut covered, &mut have, &mut selected);
        }
        selected
    }

    /// Greedy set cover of the uncovered requirements; ties prefer more new
    /// faults, then lower index.
    fn greedy_cover(&self, chosen: &[bool], covered: &[bool], have: &[u64]) -> Vec<usize> {
        let mut covered = covered.to_vec();
        let mut chosen = chosen.to_vec();
        let mut have = have.to_vec();
        let mut plan = Vec::new();
        while covered.iter().any(|c| !c) {
            let best = (0..self.corpus.m())
                .filter(|&i| !chosen[i])
                .map(|i| {
                    let new_reqs = self.corpus.cover(i).iter().filter(|&&r| !covered[r]).count();
                    (i, new_reqs, self.bits.gain(i, &have))
                })
                .filter(|&(_, n, _)| n > 0)
                .max_by_key(|&(i, n, g)| (n, g, std::cmp::Reverse(i)));
            let Some((i, _, _)) = best else { break };
            chosen[i] = true;
            plan.push(i);
            for &r in self.corpus.cover(i) {
                covered[r] = true;
            }
            have.iter_mut().zip(self.bits.row(i)).for_each(|(h, b)| *h |= b);
        }
        plan
    }

    /// First-improvement swaps that keep coverage.
    fn improve_by_swaps(&self, mut selected: Vec<usize>) -> Vec<usize> {
        let m = self.corpus.m();
        let n_faults = self.bits.words * 64;
        let mut chosen = vec![false; m];
        let mut per_req = vec![0usize; self.corpus.n_req()];
        let mut hits = vec![0u32; n_faults];
        let faults_of = |i: usize| {
            let row = self.bits.row(i);
            (0..n_faults).filter(move |&f| row[f / 64] >> (f % 64) & 1 == 1)
        };
        for &i in &selected {
            chosen[i] = true;
            self.corpus.cover(i).iter().for_each(|&r| per_req[r] += 1);
            faults_of(i).for_each(|f| hits[f] += 1);
        }
        let mut improved = true;
        while improved && Instant::now() < self.deadline {
            improved = false;
            'outer: for slot in 0..selected.len() {
                let out = selected[slot];
                if !self.corpus.cover(out).iter().all(|&r| per_req[r] >= 2) {
                    continue;
                }
                let loss = faults_of(out).filter(|&f| hits[f] == 1).count();
                for inc in 0..m {
                    if chosen[inc] {
                        continue;
                    }
                    let gain = faults_of(inc).filter(|&f| hits[f] == 0 || (hits[f] == 1 && self.bits.row(out)[f / 64] >> (f % 64) & 1 == 1)).count();
                    if gain > loss {
                        chosen[out] = false;
                        self.corpus.cover(out).iter().for_each(|&r| per_req[r] -= 1);
                        faults_of(out).for_each(|f| hits[f] -= 1);
                        chosen[inc] = true;
                        self.corpus.cover(inc).iter().for_each(|&r| per_req[r] += 1);
                        faults_of(inc).for_each(|f| hits[f] += 1);
                        selected[slot] = inc;
                        improved = true;
                        continue 'outer;
                    }
                }
            }
        }
        selected
    }

    /// Returns whether the search completed.
    fn run(&mut self) -> bool {
        let all: Vec<usize> = (0..self.corpus.m()).collect();
        if self.best_value == count(&self.union_of(&all)) {
            return true;
        }
        let mut stack = Vec::with_capacity(self.k);
        let have = vec![0u64; self.bits.words];
        let per_req = vec![0usize; self.corpus.n_req()];
        self.dfs(0, &mut stack, have, per_req);
        !self.timed_out
    }

    fn dfs(&mut self, pos: usize, stack: &mut Vec<usize>, have: Vec<u64>, per_req: Vec<usize>) {
        if self.timed_out {
            return;
        }
        self.nodes += 1;
        if self.nodes % 4096 == 0 && Instant::now() >= self.deadline {
            self.timed_out = true;
            return;
        }
        // requirement whose last covering case is already behind us
        let uncovered: Vec<usize> = (0..per_req.len()).filter(|&r| per_req[r] == 0).collect();
        if uncovered.iter().any(|&r| self.last_chance[r] < pos) {
            return;
        }
        let slots = self.k - stack.len();
        if uncovered.len() > slots * self.max_cover {
            return;
        }
        let value = count(&have);
        if uncovered.is_empty() && value > self.best_value {
            self.best_value = value;
            self.best = stack.clone();
        }
        if slots == 0 || pos == self.order.len() {
            return;
        }
        let mut gains: Vec<u32> = self.order[pos..].iter().map(|&i| self.bits.gain(i, &have)).collect();
        if gains.len() > slots {
            gains.select_nth_unstable_by(slots - 1, |a, b| b.cmp(a));
            gains.truncate(slots);
        }
        if value + gains.iter().sum::<u32>() <= self.best_value {
            return;
        }

        let i = self.order[pos];
        let mut with = have.clone();
        with.iter_mut().zip(self.bits.row(i)).for_each(|(h, b)| *h |= b);
        let mut with_req = per_req.clone();
        self.corpus.cover(i).iter().for_each(|&r| with_req[r] += 1);
        stack.push(i);
        self.dfs(pos + 1, stack, with, with_req);
        stack.pop();

        self.dfs(pos + 1, stack, have, per_req);
    }
}
