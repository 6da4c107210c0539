use rand::seq::SliceRandom;
use rand::Rng;

use super::{better, SubsetSolution};
use crate::corpus::Corpus;

/// Binary tournament between population slots `a` and `b`.
pub fn tournament(population: &[SubsetSolution], a: usize, b: usize) -> usize {
    match better(&population[a], &population[b]) {
        std::cmp::Ordering::Less => a,
        std::cmp::Ordering::Greater => b,
        std::cmp::Ordering::Equal => a.min(b),
    }
}

/// Two independent binary tournaments.
pub fn select_parents<R: Rng>(population: &[SubsetSolution], rng: &mut R) -> (usize, usize) {
    let n = population.len();
    let pick = |rng: &mut R| tournament(population, rng.gen_range(0..n), rng.gen_range(0..n));
    let first = pick(rng);
    (first, pick(rng))
}

/// Keeps `p1 ∩ p2` and fills up to the parents' size with a uniform draw
/// from the symmetric difference. Without crossover the child is `p1`.
pub fn crossover<R: Rng>(
    p1: &SubsetSolution,
    p2: &SubsetSolution,
    rate: f64,
    corpus: &Corpus,
    rng: &mut R,
) -> SubsetSolution {
    debug_assert_eq!(p1.selected_count(), p2.selected_count());
    if !rng.gen_bool(rate) {
        let mut child = p1.clone();
        child.fitness = None;
        return child;
    }
    let k = p1.selected_count();
    let mut bits = vec![false; p1.bits().len()];
    let mut shared = 0;
    let mut differ = Vec::new();
    for (i, (&a, &b)) in p1.bits().iter().zip(p2.bits()).enumerate() {
        if a && b {
            bits[i] = true;
            shared += 1;
        } else if a || b {
            differ.push(i);
        }
    }
    for &i in differ.choose_multiple(rng, k - shared) {
        bits[i] = true;
    }
    SubsetSolution::from_bits(bits, corpus)
}

/// Reverses `bits[lo..=hi]`.
pub fn invert_segment(bits: &mut [bool], lo: usize, hi: usize) {
    bits[lo..=hi].reverse();
}

/// With probability `rate`, reverses one random segment of the bit vector.
pub fn mutate<R: Rng>(mut sol: SubsetSolution, rate: f64, corpus: &Corpus, rng: &mut R) -> SubsetSolution {
    let m = sol.bits().len();
    if m < 2 || !rng.gen_bool(rate) {
        return sol;
    }
    let a = rng.gen_range(0..m);
    let b = rng.gen_range(0..m);
    let mut bits = std::mem::take(&mut sol.bits);
    invert_segment(&mut bits, a.min(b), a.max(b));
    SubsetSolution::from_bits(bits, corpus)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepairOutcome {
    pub solution: SubsetSolution,
    /// False when the budget could not be restored without uncovering a
    /// requirement; the solution is then the unchanged input.
    pub restored: bool,
}

/// Adds one random case per uncovered requirement, then drops random cases
/// from requirements covered more than once until `k` cases remain.
pub fn repair<R: Rng>(sol: &SubsetSolution, corpus: &Corpus, k: usize, rng: &mut R) -> RepairOutcome {
    if sol.valid && sol.selected_count() == k {
        return RepairOutcome { solution: sol.clone(), restored: true };
    }
    let unchanged = || RepairOutcome { solution: sol.clone(), restored: false };
    let mut bits = sol.bits().to_vec();
    let mut per_req = vec![0usize; corpus.n_req()];
    for i in sol.selected() {
        for &r in corpus.cover(i) {
            per_req[r] += 1;
        }
    }
    let mut count = sol.selected_count();
    for r in 0..corpus.n_req() {
        if per_req[r] > 0 {
            continue;
        }
        let free: Vec<usize> = corpus.cases_for(r).iter().copied().filter(|&i| !bits[i]).collect();
        let Some(&i) = free.choose(rng) else {
            return unchanged();
        };
        bits[i] = true;
        count += 1;
        for &q in corpus.cover(i) {
            per_req[q] += 1;
        }
    }
    while count > k {
        let removable: Vec<usize> = (0..bits.len())
            .filter(|&i| bits[i] && corpus.cover(i).iter().all(|&r| per_req[r] >= 2))
            .collect();
        let Some(&i) = removable.choose(rng) else {
            return unchanged();
        };
        bits[i] = false;
        count -= 1;
        for &r in corpus.cover(i) {
            per_req[r] -= 1;
        }
    }
    if count < k {
        let free: Vec<usize> = (0..bits.len()).filter(|&i| !bits[i]).collect();
        for &i in free.choose_multiple(rng, k - count) {
            bits[i] = true;
        }
    }
    RepairOutcome { solution: SubsetSolution::from_bits(bits, corpus), restored: true }
}
