//! Parameter counts and rank matching against a reference parameter budget.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelKind;

/// Fraction of temporal components assumed for the DE-SimplE budget.
///
/// With `gamma = 0.5` a DE-SimplE model of dimension 100 gives the budgets
/// that the published ComplEx/TComplEx/TNTComplEx ranks were matched to.
pub const DE_SIMPLE_GAMMA: f64 = 0.5;

/// Vocabulary sizes entering the parameter formulas. `predicates` counts
/// base predicates; reciprocals are accounted for by the formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabSizes {
    pub entities: usize,
    pub predicates: usize,
    pub timestamps: usize,
}

/// Real parameters per unit of rank: the count is `rank * per_rank`.
fn per_rank(kind: ModelKind, sizes: VocabSizes) -> u64 {
    let e = sizes.entities as u64;
    let p = sizes.predicates as u64;
    let t = sizes.timestamps as u64;
    match kind {
        ModelKind::ComplEx => 2 * (e + 2 * p),
        ModelKind::TComplEx => 2 * (e + t + 2 * p),
        ModelKind::TNTComplEx => 2 * (e + t + 4 * p),
    }
}

/// Number of real parameters of a model of complex rank `rank`.
pub fn parameter_count(kind: ModelKind, rank: usize, sizes: VocabSizes) -> u64 {
    rank as u64 * per_rank(kind, sizes)
}

/// `2 d ((3 gamma + (1 - gamma)) |E| + |P|)`.
pub fn de_simple_parameter_count(dim: usize, gamma: f64, sizes: VocabSizes) -> f64 {
    2.0 * dim as f64 * ((3.0 * gamma + (1.0 - gamma)) * sizes.entities as f64 + sizes.predicates as f64)
}

/// Largest rank whose parameter count does not exceed `reference`.
pub fn rank_match(kind: ModelKind, reference: f64, sizes: VocabSizes) -> Result<usize> {
    let unit = per_rank(kind, sizes);
    if !(reference > 0.0) || unit == 0 {
        return Err(Error::InvalidConfig(format!("cannot match a reference of {reference} parameters")));
    }
    let rank = (reference / unit as f64).floor() as usize;
    if rank == 0 {
        return Err(Error::InvalidConfig(format!(
            "reference of {reference} parameters is below one rank of {kind} ({unit})"
        )));
    }
    Ok(rank)
}
