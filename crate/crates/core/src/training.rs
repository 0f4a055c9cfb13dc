//! Losses, closed-form batch gradients, Adagrad and the epoch loop.
//!
//! The per-batch objective is
//!
//! ```text
//! 1/|B| sum_{(s,p,o,t) in B} [ l(s,p,o,t) + l~(s,p,o,t) + lambda * Omega(s,p,o,t) ]
//!     + temporal_strength * Lambda_p(T)
//! ```
//!
//! where `l` is the cross entropy of the gold object against every entity,
//! `l~` (optional) the cross entropy of the gold timestamp against every
//! timestamp, and `Omega` the configured embedding penalty.

use std::time::Instant;

use num_complex::Complex;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DatasetBundle, IntervalFact, TemporalFact};
use crate::error::{Error, Result};
use crate::evaluation::{self, EvalOptions, FilterIndex};
use crate::gradient::{Gradients, TableGrad};
use crate::model::{EmbeddingTable, Mode, ModelKind, ModelParams, DEFAULT_INIT_STD};
use crate::regularization::{self, RegConfig};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub kind: ModelKind,
    pub rank: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adagrad_epsilon: f64,
    pub init_std: f64,
    pub reg: RegConfig,
    /// Adds the cross entropy along the time axis to every sample.
    pub use_temporal_loss: bool,
    pub seed: u64,
    /// Evaluate validation MRR every this many epochs (0: never).
    pub valid_every: usize,
    /// Also log the filtered MRR on the training facts when evaluating.
    pub log_train_mrr: bool,
    /// Worker threads for per-sample gradients; 1 is bitwise deterministic.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::TNTComplEx,
            rank: 32,
            epochs: 50,
            batch_size: 1000,
            learning_rate: 0.1,
            adagrad_epsilon: 1e-10,
            init_std: DEFAULT_INIT_STD,
            reg: RegConfig::default(),
            use_temporal_loss: false,
            seed: 0,
            valid_every: 0,
            log_train_mrr: false,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.rank == 0 {
            return bad("rank must be >= 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if !(self.adagrad_epsilon > 0.0) {
            return bad(format!("adagrad_epsilon must be > 0, got {}", self.adagrad_epsilon));
        }
        if !(self.init_std >= 0.0 && self.init_std.is_finite()) {
            return bad(format!("init_std must be >= 0, got {}", self.init_std));
        }
        if self.threads == 0 {
            return bad("threads must be >= 1".into());
        }
        if self.use_temporal_loss && !self.kind.is_temporal() {
            return bad(format!("the temporal loss needs a temporal model, not {}", self.kind));
        }
        self.reg.validate()
    }
}

/// Accumulated squared gradients, one table per parameter table.
#[derive(Debug, Clone, PartialEq)]
pub struct AdagradState<S> {
    accumulators: Vec<EmbeddingTable<S>>,
}

impl<S: Scalar> AdagradState<S> {
    pub fn zeros_like(params: &ModelParams<S>) -> Self {
        Self { accumulators: params.tables().map(|t| EmbeddingTable::zeros(t.rows(), t.rank())).collect() }
    }

    pub fn from_tables(accumulators: Vec<EmbeddingTable<S>>) -> Self {
        Self { accumulators }
    }

    /// Same order as [`ModelParams::tables`].
    pub fn tables(&self) -> &[EmbeddingTable<S>] {
        &self.accumulators
    }

    pub fn matches(&self, params: &ModelParams<S>) -> bool {
        self.accumulators.len() == params.tables().count()
            && self.accumulators.iter().zip(params.tables()).all(|(a, t)| a.rows() == t.rows() && a.rank() == t.rank())
    }
}

/// Sparse Adagrad: for every touched coordinate, `acc += g^2` and
/// `theta -= lr * g / (sqrt(acc) + eps)`. Untouched rows are left alone.
pub fn adagrad_step<S: Scalar>(
    params: &mut ModelParams<S>,
    state: &mut AdagradState<S>,
    grads: &Gradients<S>,
    lr: S,
    eps: S,
) -> Result<()> {
    if !state.matches(params) {
        return Err(Error::InvalidParams("optimizer state does not match parameter shapes".into()));
    }
    let update = |theta: &mut S, acc: &mut S, g: S| {
        *acc += g * g;
        if lr != S::zero() {
            *theta -= lr * g / (acc.sqrt() + eps);
        }
    };
    for ((table, acc), grad) in params.tables_mut().zip(state.accumulators.iter_mut()).zip(grads.tables()) {
        for &row in grad.touched_rows() {
            let g = grad.row(row);
            let theta = table.row_mut(row);
            let a = acc.row_mut(row);
            for r in 0..g.len() {
                update(&mut theta[r].re, &mut a[r].re, g[r].re);
                update(&mut theta[r].im, &mut a[r].im, g[r].im);
            }
        }
    }
    Ok(())
}

/// `log sum exp(x)`, shifted by the maximum.
pub fn log_sum_exp<S: Scalar>(xs: &[S]) -> S {
    let max = xs.iter().copied().fold(S::neg_infinity(), S::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<S>().ln()
}

/// Cross entropy of the gold object against all entities.
pub fn loss_instantaneous<S: Scalar>(params: &ModelParams<S>, f: &TemporalFact) -> Result<S> {
    let scores = params.score_all_objects(f.s, f.p, f.t)?;
    params.check(Mode::Object, f.o)?;
    Ok(log_sum_exp(&scores) - scores[f.o])
}

/// Cross entropy of the gold timestamp against all timestamps.
pub fn loss_temporal<S: Scalar>(params: &ModelParams<S>, f: &TemporalFact) -> Result<S> {
    let scores = params.score_all_times(f.s, f.p, f.o)?;
    params.check(Mode::Timestamp, f.t)?;
    Ok(log_sum_exp(&scores) - scores[f.t])
}

/// Uniform timestamp index in the fact's range; missing bounds take the ends
/// of `date_range`. A range lying outside `date_range` snaps to the nearest end.
pub fn sample_timestamp<R: Rng + ?Sized>(fact: &IntervalFact, rng: &mut R, date_range: (usize, usize)) -> usize {
    let (b, e) = fact.bounds(date_range);
    let lo = b.max(date_range.0);
    let hi = e.min(date_range.1);
    if lo == hi {
        lo
    } else if lo < hi {
        rng.gen_range(lo..=hi)
    } else if e < date_range.0 {
        date_range.0
    } else {
        date_range.1
    }
}

/// Means over a batch, plus the smoothness penalty value.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BatchStats {
    pub loss: f64,
    pub temporal_loss: f64,
    pub embedding_penalty: f64,
    pub temporal_penalty: f64,
    pub objective: f64,
}

#[derive(Debug, Default)]
struct Scratch<S> {
    scores: Vec<S>,
    weights: Vec<S>,
    mix: Vec<Complex<S>>,
}

#[derive(Debug, Clone, Copy, Default)]
struct SampleStats {
    loss: f64,
    temporal_loss: f64,
    penalty: f64,
}

/// Softmax minus the gold indicator, written into `weights`; returns the loss.
fn softmax_residual<S: Scalar>(scores: &[S], gold: usize, weights: &mut Vec<S>) -> S {
    let lse = log_sum_exp(scores);
    weights.clear();
    weights.extend(scores.iter().map(|&x| (x - lse).exp()));
    weights[gold] -= S::one();
    lse - scores[gold]
}

fn conj_mul_into<S: Scalar>(out: &mut TableGrad<S>, row: usize, a: &[Complex<S>], g: &[Complex<S>], scale: S) {
    for ((o, x), y) in out.row_mut(row).iter_mut().zip(a).zip(g) {
        *o = *o + x.conj() * y * scale;
    }
}

/// Gradient of `scale * l(f)` into `grads`.
fn object_loss_gradient<S: Scalar>(
    params: &ModelParams<S>,
    f: &TemporalFact,
    scale: S,
    grads: &mut Gradients<S>,
    scratch: &mut Scratch<S>,
) -> Result<S> {
    let rank = params.rank();
    let q = params.relation(f.p, f.t)?;
    let us = params.entities().row(f.s);
    let h: Vec<Complex<S>> = us.iter().zip(&q).map(|(a, b)| a * b).collect();
    params.score_all_objects_into(f.s, f.p, f.t, &mut scratch.scores)?;
    params.check(Mode::Object, f.o)?;
    let loss = softmax_residual(&scratch.scores, f.o, &mut scratch.weights);

    // Objects: d x_k / d u_k = h; mix = sum_k w_k u_k.
    let zero = Complex::new(S::zero(), S::zero());
    scratch.mix.clear();
    scratch.mix.resize(rank, zero);
    let entity_grad = grads.entities.all_rows_mut();
    for (k, (u, w)) in params.entities().as_slice().chunks_exact(rank).zip(&scratch.weights).enumerate() {
        let ws = *w * scale;
        for r in 0..rank {
            scratch.mix[r] = scratch.mix[r] + u[r] * *w;
            entity_grad[k * rank + r] = entity_grad[k * rank + r] + h[r] * ws;
        }
    }
    let mix = &scratch.mix;
    conj_mul_into(&mut grads.entities, f.s, &q, mix, scale);

    // Gradient with respect to the effective relation q.
    let gq: Vec<Complex<S>> = us.iter().zip(mix).map(|(a, m)| a.conj() * m * scale).collect();
    match params.kind() {
        ModelKind::ComplEx => grads.predicates.add_row(f.p, &gq, S::one()),
        ModelKind::TComplEx => {
            let t = params.timestamps().expect("layout").row(f.t);
            let v = params.predicates().row(f.p);
            conj_mul_into(&mut grads.predicates, f.p, t, &gq, S::one());
            conj_mul_into(grads.timestamps.as_mut().expect("layout"), f.t, v, &gq, S::one());
        }
        ModelKind::TNTComplEx => {
            let t = params.timestamps().expect("layout").row(f.t);
            let vt = params.temporal_predicates().expect("layout").row(f.p);
            grads.predicates.add_row(f.p, &gq, S::one());
            conj_mul_into(grads.temporal_predicates.as_mut().expect("layout"), f.p, t, &gq, S::one());
            conj_mul_into(grads.timestamps.as_mut().expect("layout"), f.t, vt, &gq, S::one());
        }
    }
    Ok(loss)
}

/// Gradient of `scale * l~(f)` into `grads`.
fn time_loss_gradient<S: Scalar>(
    params: &ModelParams<S>,
    f: &TemporalFact,
    scale: S,
    grads: &mut Gradients<S>,
    scratch: &mut Scratch<S>,
) -> Result<S> {
    let ts = params
        .timestamps()
        .ok_or(Error::UnsupportedModel { op: "loss_temporal", kind: params.kind() })?;
    let rank = params.rank();
    scratch.scores = params.score_all_times(f.s, f.p, f.o)?;
    params.check(Mode::Timestamp, f.t)?;
    let loss = softmax_residual(&scratch.scores, f.t, &mut scratch.weights);

    let us = params.entities().row(f.s);
    let uo = params.entities().row(f.o);
    let (temporal_rel, static_rel) = match params.temporal_predicates() {
        Some(vt) => (vt.row(f.p), Some(params.predicates().row(f.p))),
        None => (params.predicates().row(f.p), None),
    };
    // y_l = Re <a, t_l> + b with a = u_s * r_t * conj(u_o)
    let a: Vec<Complex<S>> =
        us.iter().zip(temporal_rel).zip(uo).map(|((x, r), y)| x * r * y.conj()).collect();
    let zero = Complex::new(S::zero(), S::zero());
    let mut n = vec![zero; rank];
    let mut w_sum = S::zero();
    let ts_grad = grads.timestamps.as_mut().expect("layout");
    for (l, &w) in scratch.weights.iter().enumerate() {
        w_sum += w;
        let tl = ts.row(l);
        for r in 0..rank {
            n[r] = n[r] + tl[r] * w;
        }
        ts_grad.add_row(l, &a.iter().map(|z| z.conj()).collect::<Vec<_>>(), w * scale);
    }
    // sum_l w_l y_l = Re <u_s, qbar, conj(u_o)>, qbar = r_t * n + W r_s
    let qbar: Vec<Complex<S>> = (0..rank)
        .map(|r| temporal_rel[r] * n[r] + static_rel.map_or(zero, |v| v[r] * w_sum))
        .collect();
    conj_mul_into(&mut grads.entities, f.s, &qbar, uo, scale);
    let go: Vec<Complex<S>> = us.iter().zip(&qbar).map(|(x, q)| x * q * scale).collect();
    grads.entities.add_row(f.o, &go, S::one());
    let gq: Vec<Complex<S>> = us.iter().zip(uo).map(|(x, y)| x.conj() * y * scale).collect();
    match grads.temporal_predicates.as_mut() {
        Some(gvt) => {
            conj_mul_into(gvt, f.p, &n, &gq, S::one());
            grads.predicates.add_row(f.p, &gq, w_sum);
        }
        None => conj_mul_into(&mut grads.predicates, f.p, &n, &gq, S::one()),
    }
    Ok(loss)
}

fn sample_gradient<S: Scalar>(
    params: &ModelParams<S>,
    f: &TemporalFact,
    config: &TrainConfig,
    scale: S,
    grads: &mut Gradients<S>,
    scratch: &mut Scratch<S>,
) -> Result<SampleStats> {
    let mut stats = SampleStats::default();
    stats.loss = object_loss_gradient(params, f, scale, grads, scratch)?.to_f64_lossy();
    if config.use_temporal_loss {
        stats.temporal_loss = time_loss_gradient(params, f, scale, grads, scratch)?.to_f64_lossy();
    }
    if config.reg.embedding_active() {
        stats.penalty = regularization::embedding_penalty(params, f, config.reg.embedding)?.to_f64_lossy();
        regularization::accumulate_embedding_gradient(
            params,
            f,
            config.reg.embedding,
            scale * S::lit(config.reg.lambda),
            grads,
        )?;
    }
    Ok(stats)
}

fn finish_batch<S: Scalar>(
    params: &ModelParams<S>,
    config: &TrainConfig,
    totals: SampleStats,
    count: usize,
    grads: &mut Gradients<S>,
) -> BatchStats {
    let n = count as f64;
    let mut stats = BatchStats {
        loss: totals.loss / n,
        temporal_loss: totals.temporal_loss / n,
        embedding_penalty: totals.penalty / n,
        temporal_penalty: 0.0,
        objective: 0.0,
    };
    if let (true, Some(ts)) = (config.reg.temporal_active(), params.timestamps()) {
        let order = config.reg.temporal_order;
        stats.temporal_penalty = regularization::lambda_p(ts, order).to_f64_lossy();
        let g = grads.timestamps.as_mut().expect("layout");
        regularization::lambda_p_gradient(ts, order, S::lit(config.reg.temporal_strength), g);
    }
    stats.objective = stats.loss
        + stats.temporal_loss
        + config.reg.lambda * stats.embedding_penalty
        + config.reg.temporal_strength * stats.temporal_penalty;
    stats
}

/// Closed-form gradient of the batch objective, written into `grads`
/// (which is cleared first). Single-threaded.
pub fn batch_gradients_into<S: Scalar>(
    params: &ModelParams<S>,
    batch: &[TemporalFact],
    config: &TrainConfig,
    grads: &mut Gradients<S>,
) -> Result<BatchStats> {
    if batch.is_empty() {
        return Err(Error::InvalidConfig("empty batch".into()));
    }
    grads.clear();
    let scale = S::one() / S::lit(batch.len() as f64);
    let mut scratch = Scratch::default();
    let mut totals = SampleStats::default();
    for f in batch {
        let s = sample_gradient(params, f, config, scale, grads, &mut scratch)?;
        totals.loss += s.loss;
        totals.temporal_loss += s.temporal_loss;
        totals.penalty += s.penalty;
    }
    Ok(finish_batch(params, config, totals, batch.len(), grads))
}

pub fn batch_gradients<S: Scalar>(
    params: &ModelParams<S>,
    batch: &[TemporalFact],
    config: &TrainConfig,
) -> Result<(Gradients<S>, BatchStats)> {
    let mut grads = Gradients::zeros_like(params);
    let stats = batch_gradients_into(params, batch, config, &mut grads)?;
    Ok((grads, stats))
}

/// Batch objective evaluated directly from losses and penalties.
pub fn batch_objective<S: Scalar>(params: &ModelParams<S>, batch: &[TemporalFact], config: &TrainConfig) -> Result<S> {
    let mut total = S::zero();
    let lambda = S::lit(config.reg.lambda);
    for f in batch {
        total += loss_instantaneous(params, f)?;
        if config.use_temporal_loss {
            total += loss_temporal(params, f)?;
        }
        if config.reg.embedding_active() {
            total += lambda * regularization::embedding_penalty(params, f, config.reg.embedding)?;
        }
    }
    let mut objective = total / S::lit(batch.len() as f64);
    if let (true, Some(ts)) = (config.reg.temporal_active(), params.timestamps()) {
        objective += S::lit(config.reg.temporal_strength) * regularization::lambda_p(ts, config.reg.temporal_order);
    }
    Ok(objective)
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub temporal_loss: Option<f64>,
    pub embedding_penalty: f64,
    pub temporal_penalty: f64,
    pub wall_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub valid_mrr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub train_mrr: Option<f64>,
}

/// Owns parameters and optimizer state across epochs.
///
/// Epoch `k` draws its timestamps and batch order from a ChaCha stream keyed
/// by `(seed, k)`, so a trainer restored at epoch `k` continues exactly like
/// an uninterrupted run.
#[derive(Debug)]
pub struct Trainer<S> {
    config: TrainConfig,
    params: ModelParams<S>,
    state: AdagradState<S>,
    epoch: usize,
    grads: Vec<Gradients<S>>,
    valid_filter: Option<FilterIndex>,
}

impl<S: Scalar> Trainer<S> {
    /// Fresh parameters drawn from the seed.
    pub fn new(bundle: &DatasetBundle, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let params = ModelParams::random(config.kind, bundle.model_shape(config.rank), config.init_std, &mut rng);
        let state = AdagradState::zeros_like(&params);
        Self::from_parts(params, state, 0, config)
    }

    /// Resumes from saved parameters and optimizer state after `epoch` epochs.
    pub fn from_parts(params: ModelParams<S>, state: AdagradState<S>, epoch: usize, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if params.kind() != config.kind || params.rank() != config.rank {
            return Err(Error::InvalidConfig(format!(
                "checkpoint is {} rank {}, config asks for {} rank {}",
                params.kind(),
                params.rank(),
                config.kind,
                config.rank
            )));
        }
        if !state.matches(&params) {
            return Err(Error::InvalidParams("optimizer state does not match parameter shapes".into()));
        }
        let grads = (0..config.threads).map(|_| Gradients::zeros_like(&params)).collect();
        Ok(Self { config, params, state, epoch, grads, valid_filter: None })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn params(&self) -> &ModelParams<S> {
        &self.params
    }

    pub fn state(&self) -> &AdagradState<S> {
        &self.state
    }

    /// Completed epochs.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn into_parts(self) -> (ModelParams<S>, AdagradState<S>) {
        (self.params, self.state)
    }

    fn check_bundle(&self, bundle: &DatasetBundle) -> Result<()> {
        if !bundle.augmented {
            return Err(Error::Dataset("training expects a bundle augmented with reciprocal predicates".into()));
        }
        let shape = bundle.model_shape(self.config.rank);
        let have = self.params.shape();
        let timestamps_ok = !self.config.kind.is_temporal() || have.timestamps == shape.timestamps;
        if have.entities != shape.entities || have.predicates != shape.predicates || !timestamps_ok {
            return Err(Error::InvalidConfig(format!("model shape {have:?} does not fit dataset shape {shape:?}")));
        }
        if bundle.train.is_empty() {
            return Err(Error::Dataset("empty training split".into()));
        }
        Ok(())
    }

    fn batch_step(&mut self, batch: &[TemporalFact]) -> Result<BatchStats> {
        let stats = if self.config.threads == 1 {
            batch_gradients_into(&self.params, batch, &self.config, &mut self.grads[0])?
        } else {
            let chunk = batch.len().div_ceil(self.config.threads);
            let scale = S::one() / S::lit(batch.len() as f64);
            let params = &self.params;
            let config = &self.config;
            let partial = batch
                .par_chunks(chunk)
                .zip(self.grads.par_iter_mut())
                .map(|(facts, g)| {
                    g.clear();
                    let mut scratch = Scratch::default();
                    let mut totals = SampleStats::default();
                    for f in facts {
                        let s = sample_gradient(params, f, config, scale, g, &mut scratch)?;
                        totals.loss += s.loss;
                        totals.temporal_loss += s.temporal_loss;
                        totals.penalty += s.penalty;
                    }
                    Ok(totals)
                })
                .collect::<Result<Vec<_>>>()?;
            let (head, rest) = self.grads.split_first_mut().expect("threads >= 1");
            for g in rest.iter().take(partial.len().saturating_sub(1)) {
                head.add_assign(g);
            }
            let totals = partial.iter().fold(SampleStats::default(), |acc, s| SampleStats {
                loss: acc.loss + s.loss,
                temporal_loss: acc.temporal_loss + s.temporal_loss,
                penalty: acc.penalty + s.penalty,
            });
            finish_batch(&self.params, &self.config, totals, batch.len(), head)
        };
        adagrad_step(
            &mut self.params,
            &mut self.state,
            &self.grads[0],
            S::lit(self.config.learning_rate),
            S::lit(self.config.adagrad_epsilon),
        )?;
        Ok(stats)
    }

    /// Runs one epoch over the training split.
    pub fn run_epoch(&mut self, bundle: &DatasetBundle) -> Result<EpochRecord> {
        self.check_bundle(bundle)?;
        let start = Instant::now();
        let epoch = self.epoch + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(epoch as u64);
        let range = bundle.date_range();
        let mut samples: Vec<TemporalFact> = bundle
            .train
            .iter()
            .map(|f| TemporalFact::new(f.s, f.p, f.o, sample_timestamp(f, &mut rng, range)))
            .collect();
        samples.shuffle(&mut rng);

        let mut sums = BatchStats::default();
        for (b, batch) in samples.chunks(self.config.batch_size).enumerate() {
            let stats = self.batch_step(batch)?;
            if !stats.objective.is_finite() || !self.params.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: b,
                    detail: format!("objective {} (loss {})", stats.objective, stats.loss),
                });
            }
            let w = batch.len() as f64;
            sums.loss += stats.loss * w;
            sums.temporal_loss += stats.temporal_loss * w;
            sums.embedding_penalty += stats.embedding_penalty * w;
            sums.temporal_penalty += stats.temporal_penalty;
        }
        let n = samples.len() as f64;
        let batches = samples.len().div_ceil(self.config.batch_size) as f64;
        self.epoch = epoch;

        let evaluate_now = self.config.valid_every > 0
            && (epoch % self.config.valid_every == 0 || epoch == self.config.epochs);
        let mut record = EpochRecord {
            epoch,
            loss: sums.loss / n,
            temporal_loss: self.config.use_temporal_loss.then_some(sums.temporal_loss / n),
            embedding_penalty: sums.embedding_penalty / n,
            temporal_penalty: sums.temporal_penalty / batches,
            wall_time_s: 0.0,
            valid_mrr: None,
            train_mrr: None,
        };
        if evaluate_now {
            let filter = self.valid_filter.get_or_insert_with(|| FilterIndex::from_bundle(bundle, true));
            if !bundle.valid.is_empty() {
                let queries = evaluation::queries_from_facts(&bundle.valid, range, self.config.seed);
                let report = evaluation::evaluate(&self.params, &queries, filter, EvalOptions { rhs_only: false })?;
                record.valid_mrr = Some(report.mrr);
            }
            if self.config.log_train_mrr {
                let queries = evaluation::queries_from_facts(&bundle.train, range, self.config.seed);
                let report = evaluation::evaluate(&self.params, &queries, filter, EvalOptions { rhs_only: true })?;
                record.train_mrr = Some(report.mrr);
            }
        }
        record.wall_time_s = start.elapsed().as_secs_f64();
        log::info!(
            "epoch {epoch}: loss {:.6} valid_mrr {:?} train_mrr {:?}",
            record.loss,
            record.valid_mrr,
            record.train_mrr
        );
        Ok(record)
    }

    /// Runs the remaining epochs, calling `on_epoch` after each one.
    pub fn train_with(
        &mut self,
        bundle: &DatasetBundle,
        mut on_epoch: impl FnMut(&EpochRecord, &Self) -> Result<()>,
    ) -> Result<Vec<EpochRecord>> {
        let mut log = Vec::new();
        while self.epoch < self.config.epochs {
            let record = self.run_epoch(bundle)?;
            on_epoch(&record, self)?;
            log.push(record);
        }
        Ok(log)
    }
}

/// Trains a fresh model on an augmented bundle.
pub fn train<S: Scalar>(bundle: &DatasetBundle, config: &TrainConfig) -> Result<(ModelParams<S>, Vec<EpochRecord>)> {
    let mut trainer = Trainer::<S>::new(bundle, config.clone())?;
    let log = trainer.train_with(bundle, |_, _| Ok(()))?;
    Ok((trainer.into_parts().0, log))
}
