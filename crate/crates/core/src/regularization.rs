//! Per-sample embedding penalties and the temporal smoothness penalty.
//!
//! Embedding penalties are evaluated on the rows touched by one training
//! tuple; summing them over the training set weights every row by its
//! empirical marginal, which is how the weighted nuclear-norm variational
//! forms are realized in stochastic training.
//!
//! Norms act on the complex modulus of each coordinate:
//! `|x|_p^p = sum_r |x_r|^p`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::data::TemporalFact;
use crate::error::{Error, Result};
use crate::gradient::{Gradients, TableGrad};
use crate::model::{EmbeddingTable, Mode, ModelKind, ModelParams};
use crate::scalar::Scalar;

/// Penalty applied to the embeddings of each training tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EmbeddingReg {
    None,
    /// Weighted nuclear 3-norm on the (predicate, timestamp) unfolding.
    Omega3,
    /// Factor-wise `p`-th powers, `p` in {2, 3, 4}.
    Delta(u32),
}

impl fmt::Display for EmbeddingReg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EmbeddingReg::None => f.write_str("none"),
            EmbeddingReg::Omega3 => f.write_str("omega3"),
            EmbeddingReg::Delta(p) => write!(f, "delta{p}"),
        }
    }
}

impl FromStr for EmbeddingReg {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        let reg = match lower.as_str() {
            "none" | "" => EmbeddingReg::None,
            "omega3" | "n3" => EmbeddingReg::Omega3,
            _ => match lower.strip_prefix("delta").and_then(|d| d.parse::<u32>().ok()) {
                Some(p) => EmbeddingReg::Delta(p),
                None => return Err(Error::InvalidConfig(format!("unknown embedding regularizer `{s}`"))),
            },
        };
        reg.validate()?;
        Ok(reg)
    }
}

impl TryFrom<String> for EmbeddingReg {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EmbeddingReg> for String {
    fn from(r: EmbeddingReg) -> String {
        r.to_string()
    }
}

impl EmbeddingReg {
    pub fn validate(self) -> Result<()> {
        match self {
            EmbeddingReg::Delta(p) if !(2..=4).contains(&p) => {
                Err(Error::InvalidConfig(format!("delta order must be 2, 3 or 4, got {p}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegConfig {
    pub embedding: EmbeddingReg,
    /// Strength of the embedding penalty.
    pub lambda: f64,
    /// Strength of the smoothness penalty on timestamp embeddings.
    pub temporal_strength: f64,
    /// Order `p` of the smoothness penalty, in {2, ..., 5}.
    pub temporal_order: u32,
}

impl Default for RegConfig {
    fn default() -> Self {
        Self { embedding: EmbeddingReg::None, lambda: 0.0, temporal_strength: 0.0, temporal_order: 4 }
    }
}

impl RegConfig {
    pub fn validate(&self) -> Result<()> {
        self.embedding.validate()?;
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.temporal_strength >= 0.0 && self.temporal_strength.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "temporal strength must be >= 0, got {}",
                self.temporal_strength
            )));
        }
        if !(2..=5).contains(&self.temporal_order) {
            return Err(Error::InvalidConfig(format!(
                "temporal order must be in 2..=5, got {}",
                self.temporal_order
            )));
        }
        Ok(())
    }

    pub fn embedding_active(&self) -> bool {
        self.embedding != EmbeddingReg::None && self.lambda > 0.0
    }

    pub fn temporal_active(&self) -> bool {
        self.temporal_strength > 0.0
    }
}

/// `|z|^p`.
#[inline]
fn abs_pow<S: Scalar>(z: Complex<S>, p: u32) -> S {
    let sq = z.norm_sqr();
    match p {
        2 => sq,
        4 => sq * sq,
        _ => sq.sqrt().powi(p as i32),
    }
}

/// `d(|z|^p / p)`: `|z|^(p-2) z`, with 0 at the origin when `p < 2`.
#[inline]
fn abs_pow_grad<S: Scalar>(z: Complex<S>, p: u32) -> Complex<S> {
    let sq = z.norm_sqr();
    let factor = match p {
        2 => S::one(),
        3 => sq.sqrt(),
        4 => sq,
        _ if sq == S::zero() => S::zero(),
        _ => sq.sqrt().powi(p as i32 - 2),
    };
    z * factor
}

/// `sum_r |x_r|^p`.
pub fn norm_pp<S: Scalar>(x: &[Complex<S>], p: u32) -> S {
    x.iter().map(|&z| abs_pow(z, p)).sum()
}

fn hadamard<S: Scalar>(a: &[Complex<S>], b: &[Complex<S>]) -> Vec<Complex<S>> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

/// Rows referenced by one tuple.
struct Rows<'a, S> {
    us: &'a [Complex<S>],
    uo: &'a [Complex<S>],
    v: &'a [Complex<S>],
    vt: Option<&'a [Complex<S>]>,
    t: Option<&'a [Complex<S>]>,
}

fn rows<'a, S: Scalar>(params: &'a ModelParams<S>, f: &TemporalFact) -> Result<Rows<'a, S>> {
    params.check(Mode::Subject, f.s)?;
    params.check(Mode::Predicate, f.p)?;
    params.check(Mode::Object, f.o)?;
    params.check(Mode::Timestamp, f.t)?;
    Ok(Rows {
        us: params.entities().row(f.s),
        uo: params.entities().row(f.o),
        v: params.predicates().row(f.p),
        vt: params.temporal_predicates().map(|t| t.row(f.p)),
        t: params.timestamps().map(|t| t.row(f.t)),
    })
}

/// Nuclear 3-norm penalty of one tuple.
///
/// * ComplEx: `(|u_s|^3 + |v_p|^3 + |u_o|^3) / 3`
/// * TComplEx: `(|u_s|^3 + |u_o|^3 + |v_p * t_t|^3) / 3`
/// * TNTComplEx: `(2|u_s|^3 + 2|u_o|^3 + |vt_p * t_t|^3 + |v_p|^3) / 3`
pub fn omega3<S: Scalar>(params: &ModelParams<S>, f: &TemporalFact) -> Result<S> {
    let r = rows(params, f)?;
    let two = S::lit(2.0);
    let sum = match (params.kind(), r.vt, r.t) {
        (ModelKind::ComplEx, _, _) => norm_pp(r.us, 3) + norm_pp(r.v, 3) + norm_pp(r.uo, 3),
        (ModelKind::TComplEx, _, Some(t)) => norm_pp(r.us, 3) + norm_pp(r.uo, 3) + norm_pp(&hadamard(r.v, t), 3),
        (ModelKind::TNTComplEx, Some(vt), Some(t)) => {
            two * norm_pp(r.us, 3) + two * norm_pp(r.uo, 3) + norm_pp(&hadamard(vt, t), 3) + norm_pp(r.v, 3)
        }
        _ => unreachable!("validated table layout"),
    };
    Ok(sum / S::lit(3.0))
}

fn check_delta_order(p: u32) -> Result<()> {
    EmbeddingReg::Delta(p).validate()
}

/// Factor-wise penalty of order `p`.
///
/// * ComplEx: `(|u_s|_p^p + |u_o|_p^p + |v_p|_p^p) / p`
/// * TComplEx: `(|u_s|_p^p + |u_o|_p^p + |v_p|_p^p + |t_t|_p^p) / p`
/// * TNTComplEx: `(2|u_s|_p^p + 2|u_o|_p^p + |vt_p|_p^p + |t_t|_p^p + |v_p|_p^p) / p`
pub fn delta_p<S: Scalar>(params: &ModelParams<S>, f: &TemporalFact, p: u32) -> Result<S> {
    check_delta_order(p)?;
    let r = rows(params, f)?;
    let entity_weight = if params.kind() == ModelKind::TNTComplEx { S::lit(2.0) } else { S::one() };
    let mut sum = entity_weight * (norm_pp(r.us, p) + norm_pp(r.uo, p)) + norm_pp(r.v, p);
    if let Some(vt) = r.vt {
        sum += norm_pp(vt, p);
    }
    if let Some(t) = r.t {
        sum += norm_pp(t, p);
    }
    Ok(sum / S::lit(f64::from(p)))
}

/// Unscaled embedding penalty selected by `reg`.
pub fn embedding_penalty<S: Scalar>(params: &ModelParams<S>, f: &TemporalFact, reg: EmbeddingReg) -> Result<S> {
    match reg {
        EmbeddingReg::None => Ok(S::zero()),
        EmbeddingReg::Omega3 => omega3(params, f),
        EmbeddingReg::Delta(p) => delta_p(params, f, p),
    }
}

/// Smoothness of consecutive timestamp embeddings:
/// `1/(|T|-1) sum_i |t_{i+1} - t_i|_p^p`, zero when `|T| < 2`.
pub fn lambda_p<S: Scalar>(timestamps: &EmbeddingTable<S>, p: u32) -> S {
    let n = timestamps.rows();
    if n < 2 {
        return S::zero();
    }
    let total: S = (0..n - 1)
        .map(|i| {
            timestamps
                .row(i + 1)
                .iter()
                .zip(timestamps.row(i))
                .map(|(a, b)| abs_pow(a - b, p))
                .sum::<S>()
        })
        .sum();
    total / S::lit((n - 1) as f64)
}

/// Adds `scale * grad lambda_p(T)` into `grad`, touching every row.
pub fn lambda_p_gradient<S: Scalar>(timestamps: &EmbeddingTable<S>, p: u32, scale: S, grad: &mut TableGrad<S>) {
    let n = timestamps.rows();
    if n < 2 {
        return;
    }
    let coef = scale * S::lit(f64::from(p)) / S::lit((n - 1) as f64);
    let rank = timestamps.rank();
    let buf = grad.all_rows_mut();
    for i in 0..n - 1 {
        for r in 0..rank {
            let d = timestamps.row(i + 1)[r] - timestamps.row(i)[r];
            let g = abs_pow_grad(d, p) * coef;
            buf[(i + 1) * rank + r] = buf[(i + 1) * rank + r] + g;
            buf[i * rank + r] = buf[i * rank + r] - g;
        }
    }
}

#[inline]
fn add_pow_term<S: Scalar>(grad: &mut TableGrad<S>, row: usize, x: &[Complex<S>], p: u32, coef: S) {
    for (g, &z) in grad.row_mut(row).iter_mut().zip(x) {
        *g = *g + abs_pow_grad(z, p) * coef;
    }
}

/// Gradient of `coef * |a * b|_3^3 / 3` with respect to both factors.
fn add_product_term<S: Scalar>(
    grads: (&mut TableGrad<S>, usize, &[Complex<S>]),
    other: (&mut TableGrad<S>, usize, &[Complex<S>]),
    coef: S,
) {
    let (ga, ia, a) = grads;
    let (gb, ib, b) = other;
    let w: Vec<Complex<S>> = a.iter().zip(b).map(|(x, y)| abs_pow_grad(x * y, 3) * coef).collect();
    for ((g, gw), y) in ga.row_mut(ia).iter_mut().zip(&w).zip(b) {
        *g = *g + gw * y.conj();
    }
    for ((g, gw), x) in gb.row_mut(ib).iter_mut().zip(&w).zip(a) {
        *g = *g + gw * x.conj();
    }
}

/// Adds `scale * grad penalty(f)` into `grads`.
pub fn accumulate_embedding_gradient<S: Scalar>(
    params: &ModelParams<S>,
    f: &TemporalFact,
    reg: EmbeddingReg,
    scale: S,
    grads: &mut Gradients<S>,
) -> Result<()> {
    reg.validate()?;
    let r = rows(params, f)?;
    let two = S::lit(2.0);
    match reg {
        EmbeddingReg::None => {}
        EmbeddingReg::Omega3 => match (params.kind(), r.vt, r.t) {
            (ModelKind::ComplEx, _, _) => {
                add_pow_term(&mut grads.entities, f.s, r.us, 3, scale);
                add_pow_term(&mut grads.entities, f.o, r.uo, 3, scale);
                add_pow_term(&mut grads.predicates, f.p, r.v, 3, scale);
            }
            (ModelKind::TComplEx, _, Some(t)) => {
                add_pow_term(&mut grads.entities, f.s, r.us, 3, scale);
                add_pow_term(&mut grads.entities, f.o, r.uo, 3, scale);
                let gt = grads.timestamps.as_mut().expect("layout");
                add_product_term((&mut grads.predicates, f.p, r.v), (gt, f.t, t), scale);
            }
            (ModelKind::TNTComplEx, Some(vt), Some(t)) => {
                add_pow_term(&mut grads.entities, f.s, r.us, 3, two * scale);
                add_pow_term(&mut grads.entities, f.o, r.uo, 3, two * scale);
                add_pow_term(&mut grads.predicates, f.p, r.v, 3, scale);
                let gvt = grads.temporal_predicates.as_mut().expect("layout");
                let gt = grads.timestamps.as_mut().expect("layout");
                add_product_term((gvt, f.p, vt), (gt, f.t, t), scale);
            }
            _ => unreachable!("validated table layout"),
        },
        EmbeddingReg::Delta(p) => {
            let entity_coef = if params.kind() == ModelKind::TNTComplEx { two * scale } else { scale };
            add_pow_term(&mut grads.entities, f.s, r.us, p, entity_coef);
            add_pow_term(&mut grads.entities, f.o, r.uo, p, entity_coef);
            add_pow_term(&mut grads.predicates, f.p, r.v, p, scale);
            if let (Some(vt), Some(g)) = (r.vt, grads.temporal_predicates.as_mut()) {
                add_pow_term(g, f.p, vt, p, scale);
            }
            if let (Some(t), Some(g)) = (r.t, grads.timestamps.as_mut()) {
                add_pow_term(g, f.t, t, p, scale);
            }
        }
    }
    Ok(())
}

/// Gradient of `lambda * penalty(f)` over the rows touched by `f`.
///
/// The smoothness penalty is global over T and applied once per batch by the
/// trainer (see [`lambda_p_gradient`]), so it is not part of this gradient.
pub fn reg_gradient<S: Scalar>(params: &ModelParams<S>, f: &TemporalFact, config: &RegConfig) -> Result<Gradients<S>> {
    config.validate()?;
    let mut grads = Gradients::zeros_like(params);
    if config.lambda > 0.0 {
        accumulate_embedding_gradient(params, f, config.embedding, S::lit(config.lambda), &mut grads)?;
    }
    Ok(grads)
}

/// `(|t|_4^4 + alpha |t[1:] - t[:-1]|_4^4)^(1/4)`, a norm for every `alpha >= 0`.
pub fn tau4_norm<S: Scalar>(t: &[Complex<S>], alpha: S) -> S {
    let diffs: S = t.windows(2).map(|w| abs_pow(w[1] - w[0], 4)).sum();
    (norm_pp(t, 4) + alpha * diffs).sqrt().sqrt()
}
