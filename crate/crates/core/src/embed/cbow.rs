use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::WordVectors;
use crate::error::{Error, Result};
use crate::preprocess::TokenizedDoc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CbowConfig {
    pub window: usize,
    pub dim: usize,
    pub epochs: usize,
    pub negative_samples: usize,
    /// Starting learning rate; decays linearly towards zero over training.
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for CbowConfig {
    fn default() -> Self {
        CbowConfig {
            window: 10,
            dim: 300,
            epochs: 50,
            negative_samples: 5,
            learning_rate: 0.025,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CbowModel {
    pub vectors: WordVectors,
    /// Mean loss per predicted position, one entry per epoch.
    pub epoch_loss: Vec<f64>,
}

/// Continuous bag-of-words with negative sampling. Contexts never cross
/// document boundaries. Single-threaded, so a fixed seed gives bit-identical
/// vectors.
pub fn train_cbow(docs: &[TokenizedDoc], config: &CbowConfig) -> Result<CbowModel> {
    if config.window < 1 {
        return Err(Error::InvalidConfig("window must be at least 1".into()));
    }
    if config.dim < 2 {
        return Err(Error::InvalidConfig("dim must be at least 2".into()));
    }
    if !(config.learning_rate > 0.0) {
        return Err(Error::InvalidConfig("learning rate must be positive".into()));
    }

    let mut vocab: IndexMap<&str, u64> = IndexMap::new();
    let mut corpus: Vec<Vec<usize>> = Vec::with_capacity(docs.len());
    for doc in docs {
        let ids = doc
            .tokens
            .iter()
            .map(|t| {
                let entry = vocab.entry(t.as_str()).or_insert(0);
                *entry += 1;
                vocab.get_index_of(t.as_str()).expect("just inserted")
            })
            .collect();
        corpus.push(ids);
    }
    let total_tokens: usize = corpus.iter().map(Vec::len).sum();
    if total_tokens < config.window + 1 {
        return Err(Error::CorpusTooShort {
            tokens: total_tokens,
            window: config.window,
            needed: config.window + 1,
        });
    }
    if vocab.len() < config.negative_samples + 1 {
        return Err(Error::VocabularyTooSmall {
            vocab: vocab.len(),
            negative: config.negative_samples,
        });
    }

    let v = vocab.len();
    let dim = config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut input: Vec<f64> = (0..v * dim).map(|_| (rng.gen::<f64>() - 0.5) / dim as f64).collect();
    let mut output = vec![0.0f64; v * dim];

    // unigram^0.75 noise distribution
    let mut noise_cdf = Vec::with_capacity(v);
    let mut acc = 0.0;
    for &c in vocab.values() {
        acc += (c as f64).powf(0.75);
        noise_cdf.push(acc);
    }
    let noise_total = acc;

    let total_steps = (config.epochs * total_tokens) as f64;
    let mut step = 0usize;
    let mut hidden = vec![0.0; dim];
    let mut grad = vec![0.0; dim];
    let mut epoch_loss = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        let mut loss = 0.0;
        let mut predictions = 0usize;
        for doc in &corpus {
            for pos in 0..doc.len() {
                let lr = config.learning_rate * (1.0 - step as f64 / total_steps).max(1e-4);
                step += 1;
                let lo = pos.saturating_sub(config.window);
                let hi = (pos + config.window + 1).min(doc.len());
                let n_ctx = hi - lo - 1;
                if n_ctx == 0 {
                    continue;
                }
                hidden.iter_mut().for_each(|h| *h = 0.0);
                for (j, &w) in doc[lo..hi].iter().enumerate() {
                    if lo + j != pos {
                        let row = &input[w * dim..(w + 1) * dim];
                        hidden.iter_mut().zip(row).for_each(|(h, x)| *h += x);
                    }
                }
                let scale = 1.0 / n_ctx as f64;
                hidden.iter_mut().for_each(|h| *h *= scale);
                grad.iter_mut().for_each(|g| *g = 0.0);

                let word = doc[pos];
                for d in 0..=config.negative_samples {
                    let (target, label) = if d == 0 {
                        (word, 1.0)
                    } else {
                        let u = rng.gen::<f64>() * noise_total;
                        let t = noise_cdf.partition_point(|&c| c <= u).min(v - 1);
                        if t == word {
                            continue;
                        }
                        (t, 0.0)
                    };
                    let out = &mut output[target * dim..(target + 1) * dim];
                    let dot: f64 = hidden.iter().zip(out.iter()).map(|(a, b)| a * b).sum();
                    let sigma = sigmoid(dot);
                    loss -= if label > 0.0 { sigma.max(1e-12).ln() } else { (1.0 - sigma).max(1e-12).ln() };
                    let g = (label - sigma) * lr;
                    for k in 0..dim {
                        grad[k] += g * out[k];
                        out[k] += g * hidden[k];
                    }
                }
                for (j, &w) in doc[lo..hi].iter().enumerate() {
                    if lo + j != pos {
                        let row = &mut input[w * dim..(w + 1) * dim];
                        row.iter_mut().zip(&grad).for_each(|(x, g)| *x += g);
                    }
                }
                predictions += 1;
            }
        }
        epoch_loss.push(if predictions == 0 { 0.0 } else { loss / predictions as f64 });
    }

    let vectors = vocab
        .keys()
        .enumerate()
        .map(|(i, t)| (t.to_string(), input[i * dim..(i + 1) * dim].to_vec()))
        .collect();
    Ok(CbowModel { vectors: WordVectors { dim, vectors }, epoch_loss })
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
