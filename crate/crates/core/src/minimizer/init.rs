use rand::seq::SliceRandom;
use rand::Rng;

use super::{check_budget, GaConfig, InitStrategy, SubsetSolution};
use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// `population_size` budget-exact, fully covering individuals.
pub fn init_population<R: Rng>(corpus: &Corpus, config: &GaConfig, rng: &mut R) -> Result<Vec<SubsetSolution>> {
    let k = check_budget(corpus, config.budget)?;
    (0..config.population_size)
        .map(|_| init_individual(corpus, k, config.budget, config.init_strategy, rng))
        .collect()
}

/// Tracks the selection and per-requirement selected counts.
struct Draft<'a> {
    corpus: &'a Corpus,
    selected: Vec<bool>,
    count: usize,
    per_req: Vec<usize>,
}

impl<'a> Draft<'a> {
    fn new(corpus: &'a Corpus) -> Self {
        Draft { corpus, selected: vec![false; corpus.m()], count: 0, per_req: vec![0; corpus.n_req()] }
    }

    fn add(&mut self, i: usize) {
        debug_assert!(!self.selected[i]);
        self.selected[i] = true;
        self.count += 1;
        for &r in self.corpus.cover(i) {
            self.per_req[r] += 1;
        }
    }

    fn remove(&mut self, i: usize) {
        debug_assert!(self.selected[i]);
        self.selected[i] = false;
        self.count -= 1;
        for &r in self.corpus.cover(i) {
            self.per_req[r] -= 1;
        }
    }

    fn unselected_in(&self, r: usize) -> Vec<usize> {
        self.corpus.cases_for(r).iter().copied().filter(|&i| !self.selected[i]).collect()
    }

    /// Selected cases whose removal keeps every requirement covered.
    fn removable_in(&self, r: usize) -> Vec<usize> {
        self.corpus
            .cases_for(r)
            .iter()
            .copied()
            .filter(|&i| self.selected[i] && self.corpus.cover(i).iter().all(|&q| self.per_req[q] >= 2))
            .collect()
    }

    /// One random case for every requirement not yet covered.
    fn cover_each<R: Rng>(&mut self, order: &[usize], rng: &mut R) {
        for &r in order {
            if self.per_req[r] == 0 {
                if let Some(&i) = self.unselected_in(r).choose(rng) {
                    self.add(i);
                }
            }
        }
    }

    fn fill_uniform<R: Rng>(&mut self, k: usize, rng: &mut R) {
        let rest: Vec<usize> = (0..self.selected.len()).filter(|&i| !self.selected[i]).collect();
        let need = k - self.count;
        for pos in rand::seq::index::sample(rng, rest.len(), need).into_vec() {
            self.add(rest[pos]);
        }
    }

    fn finish(self) -> SubsetSolution {
        SubsetSolution::from_bits(self.selected, self.corpus)
    }
}

pub fn init_individual<R: Rng>(
    corpus: &Corpus,
    k: usize,
    budget: f64,
    strategy: InitStrategy,
    rng: &mut R,
) -> Result<SubsetSolution> {
    let mut draft = Draft::new(corpus);
    let n_req = corpus.n_req();
    match strategy {
        InitStrategy::S1 => {
            let mut order: Vec<usize> = (0..n_req).collect();
            order.shuffle(rng);
            draft.cover_each(&order, rng);
            while draft.count < k {
                order.shuffle(rng);
                let before = draft.count;
                for &r in &order {
                    if draft.count == k {
                        break;
                    }
                    if let Some(&i) = draft.unselected_in(r).choose(rng) {
                        draft.add(i);
                    }
                }
                if draft.count == before {
                    // only cases tracing to no requirement remain
                    draft.fill_uniform(k, rng);
                }
            }
        }
        InitStrategy::S2 => {
            let order: Vec<usize> = (0..n_req).collect();
            draft.cover_each(&order, rng);
            draft.fill_uniform(k, rng);
        }
        InitStrategy::S3 => {
            let ideal: Vec<f64> = (0..n_req).map(|r| budget * corpus.cases_for(r).len() as f64).collect();
            for r in 0..n_req {
                let size = corpus.cases_for(r).len();
                let quota = ((ideal[r] + 0.5).floor() as usize).clamp(1, size.max(1));
                let have = draft.per_req[r];
                if have < quota {
                    let mut free = draft.unselected_in(r);
                    free.shuffle(rng);
                    for i in free.into_iter().take(quota - have) {
                        draft.add(i);
                    }
                }
            }
            while draft.count < k {
                let target = (0..n_req)
                    .filter(|&r| draft.per_req[r] < corpus.cases_for(r).len())
                    .map(|r| (r, ideal[r] - draft.per_req[r] as f64))
                    .fold(None, |acc: Option<(usize, f64)>, (r, gap)| match acc {
                        Some((_, g)) if g >= gap => acc,
                        _ => Some((r, gap)),
                    });
                match target {
                    Some((r, _)) => {
                        let free = draft.unselected_in(r);
                        let &i = free.choose(rng).expect("requirement has a free case");
                        draft.add(i);
                    }
                    None => draft.fill_uniform(k, rng),
                }
            }
            while draft.count > k {
                let target = (0..n_req)
                    .filter(|&r| !draft.removable_in(r).is_empty())
                    .map(|r| (r, draft.per_req[r] as f64 - ideal[r]))
                    .fold(None, |acc: Option<(usize, f64)>, (r, excess)| match acc {
                        Some((_, e)) if e >= excess => acc,
                        _ => Some((r, excess)),
                    });
                let Some((r, _)) = target else {
                    return Err(Error::Internal("no removable test case while trimming to budget".into()));
                };
                let &i = draft.removable_in(r).choose(rng).expect("non-empty");
                draft.remove(i);
            }
        }
    }
    if draft.count != k {
        return Err(Error::Internal(format!("initialization produced {} of {k} cases", draft.count)));
    }
    let sol = draft.finish();
    if !sol.valid {
        return Err(Error::Internal("initialization produced an uncovering individual".into()));
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minimizer::tests::corpus;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn every_strategy_is_budget_exact_and_valid() {
        let c = corpus(&[1, 2, 7, 30, 3, 11]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for strategy in InitStrategy::ALL {
            for budget in [0.11, 0.2, 0.5, 0.77, 1.0] {
                let config = GaConfig { budget, init_strategy: strategy, population_size: 20, ..GaConfig::default() };
                let k = super::super::budget_size(c.m(), budget);
                for s in init_population(&c, &config, &mut rng).unwrap() {
                    assert_eq!(s.selected_count(), k, "{strategy} {budget}");
                    assert!(s.valid, "{strategy} {budget}");
                }
            }
        }
    }

    #[test]
    fn minimum_budget_picks_one_per_requirement() {
        let c = corpus(&[5; 6]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for strategy in InitStrategy::ALL {
            let s = init_individual(&c, 6, 0.2, strategy, &mut rng).unwrap();
            for r in 0..6 {
                let n = c.cases_for(r).iter().filter(|&&i| s.bits()[i]).count();
                assert_eq!(n, 1, "{strategy}");
            }
        }
    }

    #[test]
    fn infeasible_budget_is_reported() {
        let c = corpus(&[2; 55]);
        let config = GaConfig { budget: 54.0 / 110.0, ..GaConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(init_population(&c, &config, &mut rng), Err(Error::InfeasibleBudget { .. })));
    }

    #[test]
    fn proportional_strategy_tracks_quotas() {
        // quotas at 50%: 10 and 2 (from 20 and 4 cases)
        let c = corpus(&[20, 4]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = init_individual(&c, 12, 0.5, InitStrategy::S3, &mut rng).unwrap();
        let first = c.cases_for(0).iter().filter(|&&i| s.bits()[i]).count();
        assert_eq!(first, 10);
    }
}
