//! Reference strategies to compare the GA against.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::minimizer::{budget_size, check_budget, init_individual, InitStrategy, SubsetSolution};
use crate::similarity::SimilarityMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    /// Random subset drawn like a GA individual (coverage kept).
    #[serde(rename = "random-c")]
    RandomConstrained,
    /// Uniform random subset of the budget size, coverage ignored.
    #[serde(rename = "random-u")]
    RandomUnconstrained,
    /// Deterministic maximin selection over the similarity matrix.
    #[serde(rename = "greedy")]
    GreedyDiversity,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [Self::RandomConstrained, Self::RandomUnconstrained, Self::GreedyDiversity];
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::RandomConstrained => "random-c",
            Self::RandomUnconstrained => "random-u",
            Self::GreedyDiversity => "greedy",
        })
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random-c" => Ok(Self::RandomConstrained),
            "random-u" => Ok(Self::RandomUnconstrained),
            "greedy" => Ok(Self::GreedyDiversity),
            other => Err(Error::InvalidConfig(format!("unknown baseline {other:?}"))),
        }
    }
}

pub fn random_minimize(corpus: &Corpus, budget: f64, constrained: bool, seed: u64) -> Result<SubsetSolution> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if constrained {
        let k = check_budget(corpus, budget)?;
        return init_individual(corpus, k, budget, InitStrategy::S2, &mut rng);
    }
    if !(budget > 0.0 && budget <= 1.0) {
        return Err(Error::InvalidConfig(format!("budget must lie in (0, 1], got {budget}")));
    }
    let k = budget_size(corpus.m(), budget);
    let picks = rand::seq::index::sample(&mut rng, corpus.m(), k).into_vec();
    Ok(SubsetSolution::from_indices(&picks, corpus))
}

/// Seeds one case per requirement, then keeps adding the case whose highest
/// similarity to the chosen set is lowest. Ties go to the lowest index.
pub fn greedy_diversity(corpus: &Corpus, sim: &SimilarityMatrix, budget: f64) -> Result<SubsetSolution> {
    if sim.m() != corpus.m() {
        return Err(Error::SizeMismatch { matrix: sim.m(), corpus: corpus.m() });
    }
    let k = check_budget(corpus, budget)?;
    let m = corpus.m();
    let mut chosen = vec![false; m];
    // highest similarity of each case to the chosen set
    let mut nearest = vec![f64::NEG_INFINITY; m];
    let mut covered = vec![false; corpus.n_req()];
    let mut count = 0;

    let take = |i: usize, chosen: &mut Vec<bool>, nearest: &mut Vec<f64>, covered: &mut Vec<bool>| {
        chosen[i] = true;
        for &r in corpus.cover(i) {
            covered[r] = true;
        }
        for (n, &s) in nearest.iter_mut().zip(sim.row(i)) {
            *n = n.max(s);
        }
    };
    let argmin = |candidates: &mut dyn Iterator<Item = usize>, nearest: &[f64]| {
        candidates.fold(None, |best: Option<usize>, i| match best {
            Some(b) if nearest[b] <= nearest[i] => best,
            _ => Some(i),
        })
    };

    for r in 0..corpus.n_req() {
        if covered[r] {
            continue;
        }
        let i = argmin(&mut corpus.cases_for(r).iter().copied(), &nearest).expect("requirement has cases");
        take(i, &mut chosen, &mut nearest, &mut covered);
        count += 1;
    }
    while count < k {
        let i = argmin(&mut (0..m).filter(|&i| !chosen[i]), &nearest).expect("budget below suite size");
        take(i, &mut chosen, &mut nearest, &mut covered);
        count += 1;
    }
    Ok(SubsetSolution::from_bits(chosen, corpus))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TestCase;
    use crate::similarity::Metric;

    fn corpus(cases_per_req: &[usize]) -> Corpus {
        let reqs: Vec<String> = (0..cases_per_req.len()).map(|r| format!("R{r}")).collect();
        let mut cases = Vec::new();
        for (r, &c) in cases_per_req.iter().enumerate() {
            for i in 0..c {
                cases.push(TestCase {
                    id: format!("TC{r}_{i}"),
                    requirement_ids: [reqs[r].clone()].into(),
                    steps: vec![format!("step {r} {i}")],
                });
            }
        }
        Corpus::new(reqs, cases).unwrap()
    }

    fn matrix(m: usize, pairs: &[(usize, usize, f64)]) -> SimilarityMatrix {
        let mut v = vec![0.0; m * m];
        for i in 0..m {
            v[i * m + i] = 1.0;
        }
        for &(i, j, s) in pairs {
            v[i * m + j] = s;
            v[j * m + i] = s;
        }
        SimilarityMatrix::from_normalized(m, v, Metric::Cosine, "test")
    }

    #[test]
    fn full_budget_is_full_suite() {
        let c = corpus(&[3, 4]);
        for constrained in [true, false] {
            let s = random_minimize(&c, 1.0, constrained, 4).unwrap();
            assert_eq!(s.selected_count(), 7);
            assert!(s.valid);
        }
    }

    #[test]
    fn constrained_random_is_valid_and_exact() {
        let c = corpus(&[1, 5, 9, 2]);
        for seed in 0..200 {
            let s = random_minimize(&c, 0.3, true, seed).unwrap();
            assert!(s.valid);
            assert_eq!(s.selected_count(), budget_size(17, 0.3));
        }
        assert!(matches!(random_minimize(&c, 0.1, true, 0), Err(Error::InfeasibleBudget { .. })));
        // unconstrained draws ignore coverage, so tiny budgets are fine
        assert_eq!(random_minimize(&c, 0.1, false, 0).unwrap().selected_count(), 2);
    }

    #[test]
    fn unconstrained_random_loses_coverage() {
        let c = corpus(&[10; 10]);
        let mean: f64 = (0..1000)
            .map(|seed| {
                let s = random_minimize(&c, 0.1, false, seed).unwrap();
                c.covered_count(&s.selected()) as f64 / 10.0
            })
            .sum::<f64>()
            / 1000.0;
        // 10 draws from 100 cases in 10 blocks of 10
        let expected = 1.0 - (90..100).map(|x| x as f64 - 9.0).product::<f64>() / (90..100).map(|x| x as f64 + 1.0).product::<f64>();
        assert!((mean - expected).abs() < 0.02, "{mean} vs {expected}");
    }

    #[test]
    fn greedy_on_zero_matrix_takes_first_indices() {
        let c = corpus(&[3, 3]);
        let s = greedy_diversity(&c, &matrix(6, &[]), 4.0 / 6.0).unwrap();
        assert_eq!(s.selected(), [0, 1, 2, 3]);
        let s = greedy_diversity(&c, &matrix(6, &[]), 2.0 / 6.0).unwrap();
        assert_eq!(s.selected(), [0, 3]);
    }

    #[test]
    fn greedy_avoids_clone_pairs() {
        // cases 2k and 2k+1 are clones; different pairs are unrelated
        let c = corpus(&[4, 4]);
        let pairs: Vec<_> = (0..4).map(|p| (2 * p, 2 * p + 1, 1.0)).collect();
        let sim = matrix(8, &pairs);
        let s = greedy_diversity(&c, &sim, 0.5).unwrap();
        let sel = s.selected();
        assert_eq!(sel.len(), 4);
        for p in 0..4 {
            assert!(!(sel.contains(&(2 * p)) && sel.contains(&(2 * p + 1))));
        }
        assert!(s.valid);
    }
}
