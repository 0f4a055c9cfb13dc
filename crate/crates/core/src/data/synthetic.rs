//! Synthetic low-rank temporal tensors for recovery experiments.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{DatasetBundle, IntervalFact, Labels, Vocabulary};
use crate::error::{Error, Result};
use crate::model::{ModelKind, ModelParams, ModelShape};

const MAX_MODE_SIZE: usize = 100;
const MAX_ATTEMPTS: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticSizes {
    pub entities: usize,
    pub predicates: usize,
    pub timestamps: usize,
}

/// Draws a rank-`rank` TComplEx tensor (unit Gaussian factors) and marks
/// `(s, p, o, t)` positive when its score, plus `noise * N(0, 1)`, exceeds
/// the `1 - 1/|E|` quantile of all scores, i.e. about one object per
/// `(s, p, t)` tube.
///
/// Returns the positives as the training split (valid/test empty) and the
/// ground-truth factors, whose predicate table has one row per base predicate.
pub fn synthesize(
    rank: usize,
    sizes: SyntheticSizes,
    noise: f64,
    seed: u64,
) -> Result<(DatasetBundle, ModelParams<f64>)> {
    let SyntheticSizes { entities: ne, predicates: np, timestamps: nt } = sizes;
    if [ne, np, nt].iter().any(|&n| n == 0 || n > MAX_MODE_SIZE) || rank == 0 {
        return Err(Error::InvalidConfig(format!(
            "synthetic sizes must be in 1..={MAX_MODE_SIZE} per mode with rank >= 1, got {sizes:?} rank {rank}"
        )));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidConfig(format!("noise must be >= 0, got {noise}")));
    }
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let shape = ModelShape { rank, entities: ne, predicates: np, timestamps: nt };
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt);
        let truth = ModelParams::<f64>::random(ModelKind::TComplEx, shape, 1.0, &mut rng);
        let mut scores = Vec::with_capacity(ne * np * ne * nt);
        for s in 0..ne {
            for p in 0..np {
                for t in 0..nt {
                    for x in truth.score_all_objects(s, p, t)? {
                        scores.push(x + noise * normal.sample(&mut rng));
                    }
                }
            }
        }
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        let cut = ((1.0 - 1.0 / ne as f64) * sorted.len() as f64).floor() as usize;
        let threshold = sorted[cut.min(sorted.len() - 1)];
        let mut train = Vec::new();
        let mut idx = 0;
        for s in 0..ne {
            for p in 0..np {
                for t in 0..nt {
                    for o in 0..ne {
                        if scores[idx] > threshold {
                            train.push(IntervalFact::point(s, p, o, t));
                        }
                        idx += 1;
                    }
                }
            }
        }
        if train.is_empty() || train.len() == scores.len() {
            log::warn!("synthetic draw {attempt} produced a degenerate threshold; redrawing");
            continue;
        }
        let vocab = Vocabulary {
            entities: Labels::from_labels((0..ne).map(|i| format!("e{i}")).collect())?,
            predicates: Labels::from_labels((0..np).map(|i| format!("p{i}")).collect())?,
            timestamps: Labels::from_labels((0..nt).map(|i| i.to_string()).collect())?,
        };
        let bundle = DatasetBundle { vocab, train, valid: Vec::new(), test: Vec::new(), augmented: false, yago_unfolded: false };
        return Ok((bundle, truth));
    }
    Err(Error::Dataset(format!("no non-degenerate synthetic draw after {MAX_ATTEMPTS} attempts")))
}
