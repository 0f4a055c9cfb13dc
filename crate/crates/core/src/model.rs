//! Complex embedding tables and the three score functions.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default standard deviation of the Gaussian initialization, per real component.
pub const DEFAULT_INIT_STD: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    ComplEx,
    TComplEx,
    TNTComplEx,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::ComplEx, ModelKind::TComplEx, ModelKind::TNTComplEx];

    /// Whether the model carries a timestamp factor.
    pub fn is_temporal(self) -> bool {
        !matches!(self, ModelKind::ComplEx)
    }

    pub fn has_temporal_predicates(self) -> bool {
        matches!(self, ModelKind::TNTComplEx)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::ComplEx => "ComplEx",
            ModelKind::TComplEx => "TComplEx",
            ModelKind::TNTComplEx => "TNTComplEx",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "complex" => Ok(ModelKind::ComplEx),
            "tcomplex" => Ok(ModelKind::TComplEx),
            "tntcomplex" => Ok(ModelKind::TNTComplEx),
            other => Err(Error::InvalidConfig(format!(
                "unknown model kind `{other}` (expected ComplEx, TComplEx or TNTComplEx)"
            ))),
        }
    }
}

/// Tensor mode an index refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Subject,
    Predicate,
    Object,
    Timestamp,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Subject => "subject",
            Mode::Predicate => "predicate",
            Mode::Object => "object",
            Mode::Timestamp => "timestamp",
        })
    }
}

/// Sizes of a model: complex rank and row counts.
///
/// `predicates` counts rows of the predicate table, i.e. twice the number of
/// base predicates once reciprocals are added.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub rank: usize,
    pub entities: usize,
    pub predicates: usize,
    pub timestamps: usize,
}

/// Dense table of complex row vectors, rows stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<S> {
    rows: usize,
    rank: usize,
    data: Vec<Complex<S>>,
}

impl<S: Scalar> EmbeddingTable<S> {
    pub fn zeros(rows: usize, rank: usize) -> Self {
        Self::filled(rows, rank, Complex::new(S::zero(), S::zero()))
    }

    pub fn filled(rows: usize, rank: usize, value: Complex<S>) -> Self {
        Self { rows, rank, data: vec![value; rows * rank] }
    }

    /// I.i.d. `N(0, std^2)` on every real and imaginary component.
    pub fn gaussian<R: Rng + ?Sized>(rows: usize, rank: usize, std: f64, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, std).expect("finite non-negative std");
        let data = (0..rows * rank)
            .map(|_| {
                let re = normal.sample(rng);
                let im = normal.sample(rng);
                Complex::new(S::lit(re), S::lit(im))
            })
            .collect();
        Self { rows, rank, data }
    }

    pub fn from_data(rows: usize, rank: usize, data: Vec<Complex<S>>) -> Result<Self> {
        if data.len() != rows * rank {
            return Err(Error::LengthMismatch { left: data.len(), right: rows * rank });
        }
        Ok(Self { rows, rank, data })
    }

    /// Builds a table from explicit rows, all of the same length.
    pub fn from_rows(rows: &[Vec<Complex<S>>]) -> Result<Self> {
        let rank = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * rank);
        for row in rows {
            if row.len() != rank {
                return Err(Error::LengthMismatch { left: row.len(), right: rank });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { rows: rows.len(), rank, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[Complex<S>] {
        &self.data[i * self.rank..(i + 1) * self.rank]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [Complex<S>] {
        &mut self.data[i * self.rank..(i + 1) * self.rank]
    }

    pub fn as_slice(&self) -> &[Complex<S>] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex<S>] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn map(&self, f: impl Fn(Complex<S>) -> Complex<S>) -> Self {
        Self { rows: self.rows, rank: self.rank, data: self.data.iter().map(|&z| f(z)).collect() }
    }
}

/// `Re sum_r a_r * conj(b_r)`.
#[inline]
pub(crate) fn re_dot_conj<S: Scalar>(a: &[Complex<S>], b: &[Complex<S>]) -> S {
    a.iter().zip(b).fold(S::zero(), |acc, (x, y)| acc + x.re * y.re + x.im * y.im)
}

/// Factor set of a ComplEx-family model.
///
/// `entities` serves both the subject role and, conjugated, the object role.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<S> {
    kind: ModelKind,
    entities: EmbeddingTable<S>,
    predicates: EmbeddingTable<S>,
    temporal_predicates: Option<EmbeddingTable<S>>,
    timestamps: Option<EmbeddingTable<S>>,
}

impl<S: Scalar> ModelParams<S> {
    /// All-zero parameters of the given shape.
    pub fn zeros(kind: ModelKind, shape: ModelShape) -> Self {
        let ModelShape { rank, entities, predicates, timestamps } = shape;
        Self {
            kind,
            entities: EmbeddingTable::zeros(entities, rank),
            predicates: EmbeddingTable::zeros(predicates, rank),
            temporal_predicates: kind
                .has_temporal_predicates()
                .then(|| EmbeddingTable::zeros(predicates, rank)),
            timestamps: kind.is_temporal().then(|| EmbeddingTable::zeros(timestamps, rank)),
        }
    }

    /// Gaussian initialization; tables drawn in the order U, V, Vt, T.
    pub fn random<R: Rng + ?Sized>(kind: ModelKind, shape: ModelShape, init_std: f64, rng: &mut R) -> Self {
        let ModelShape { rank, entities, predicates, timestamps } = shape;
        let entities = EmbeddingTable::gaussian(entities, rank, init_std, rng);
        let predicates_table = EmbeddingTable::gaussian(predicates, rank, init_std, rng);
        let temporal_predicates = kind
            .has_temporal_predicates()
            .then(|| EmbeddingTable::gaussian(predicates, rank, init_std, rng));
        let timestamps = kind
            .is_temporal()
            .then(|| EmbeddingTable::gaussian(timestamps, rank, init_std, rng));
        Self { kind, entities, predicates: predicates_table, temporal_predicates, timestamps }
    }

    pub fn from_tables(
        kind: ModelKind,
        entities: EmbeddingTable<S>,
        predicates: EmbeddingTable<S>,
        temporal_predicates: Option<EmbeddingTable<S>>,
        timestamps: Option<EmbeddingTable<S>>,
    ) -> Result<Self> {
        let params = Self { kind, entities, predicates, temporal_predicates, timestamps };
        params.validate()?;
        Ok(params)
    }

    /// Checks the kind/table presence and rank invariants.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        match (self.kind, self.temporal_predicates.is_some(), self.timestamps.is_some()) {
            (ModelKind::ComplEx, false, false)
            | (ModelKind::TComplEx, false, true)
            | (ModelKind::TNTComplEx, true, true) => {}
            (kind, vt, t) => {
                return bad(format!("{kind} with temporal_predicates={vt}, timestamps={t}"));
            }
        }
        let rank = self.entities.rank();
        for table in self.tables() {
            if table.rank() != rank {
                return bad(format!("rank mismatch: {} vs {}", table.rank(), rank));
            }
        }
        if let Some(vt) = &self.temporal_predicates {
            if vt.rows() != self.predicates.rows() {
                return bad(format!(
                    "temporal predicate rows {} differ from predicate rows {}",
                    vt.rows(),
                    self.predicates.rows()
                ));
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn rank(&self) -> usize {
        self.entities.rank()
    }

    pub fn shape(&self) -> ModelShape {
        ModelShape {
            rank: self.rank(),
            entities: self.entities.rows(),
            predicates: self.predicates.rows(),
            timestamps: self.timestamps.as_ref().map_or(0, EmbeddingTable::rows),
        }
    }

    pub fn entities(&self) -> &EmbeddingTable<S> {
        &self.entities
    }

    pub fn predicates(&self) -> &EmbeddingTable<S> {
        &self.predicates
    }

    pub fn temporal_predicates(&self) -> Option<&EmbeddingTable<S>> {
        self.temporal_predicates.as_ref()
    }

    pub fn timestamps(&self) -> Option<&EmbeddingTable<S>> {
        self.timestamps.as_ref()
    }

    pub fn entities_mut(&mut self) -> &mut EmbeddingTable<S> {
        &mut self.entities
    }

    pub fn predicates_mut(&mut self) -> &mut EmbeddingTable<S> {
        &mut self.predicates
    }

    pub fn temporal_predicates_mut(&mut self) -> Option<&mut EmbeddingTable<S>> {
        self.temporal_predicates.as_mut()
    }

    pub fn timestamps_mut(&mut self) -> Option<&mut EmbeddingTable<S>> {
        self.timestamps.as_mut()
    }

    /// Tables in checkpoint order: U, V, Vt (if any), T (if any).
    pub fn tables(&self) -> impl Iterator<Item = &EmbeddingTable<S>> {
        [Some(&self.entities), Some(&self.predicates), self.temporal_predicates.as_ref(), self.timestamps.as_ref()]
            .into_iter()
            .flatten()
    }

    pub fn tables_mut(&mut self) -> impl Iterator<Item = &mut EmbeddingTable<S>> {
        [
            Some(&mut self.entities),
            Some(&mut self.predicates),
            self.temporal_predicates.as_mut(),
            self.timestamps.as_mut(),
        ]
        .into_iter()
        .flatten()
    }

    /// Number of real parameters.
    pub fn num_parameters(&self) -> usize {
        self.tables().map(|t| 2 * t.rows() * t.rank()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tables().all(EmbeddingTable::is_finite)
    }

    /// All real coordinates, table by table, `re` before `im`.
    pub fn flatten(&self) -> Vec<S> {
        self.tables().flat_map(|t| t.as_slice().iter().flat_map(|z| [z.re, z.im])).collect()
    }

    /// Inverse of [`ModelParams::flatten`].
    pub fn assign_flat(&mut self, values: &[S]) -> Result<()> {
        let expected = self.num_parameters();
        if values.len() != expected {
            return Err(Error::LengthMismatch { left: values.len(), right: expected });
        }
        let mut it = values.chunks_exact(2);
        for table in self.tables_mut() {
            for z in table.as_mut_slice() {
                let pair = it.next().expect("length checked");
                *z = Complex::new(pair[0], pair[1]);
            }
        }
        Ok(())
    }

    pub(crate) fn check(&self, mode: Mode, index: usize) -> Result<()> {
        let size = match mode {
            Mode::Subject | Mode::Object => self.entities.rows(),
            Mode::Predicate => self.predicates.rows(),
            Mode::Timestamp => match &self.timestamps {
                Some(t) => t.rows(),
                None => return Ok(()),
            },
        };
        if index < size {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { mode, index, size })
        }
    }

    fn unsupported(&self, op: &'static str) -> Error {
        Error::UnsupportedModel { op, kind: self.kind }
    }

    /// Effective relation vector `q` at time `t` so that
    /// `score(s, p, o, t) = Re <u_s, q, conj(u_o)>`.
    pub fn relation(&self, p: usize, t: usize) -> Result<Vec<Complex<S>>> {
        self.check(Mode::Predicate, p)?;
        self.check(Mode::Timestamp, t)?;
        let v = self.predicates.row(p);
        Ok(match (self.kind, &self.temporal_predicates, &self.timestamps) {
            (ModelKind::ComplEx, _, _) => v.to_vec(),
            (ModelKind::TComplEx, _, Some(ts)) => v.iter().zip(ts.row(t)).map(|(a, b)| a * b).collect(),
            (ModelKind::TNTComplEx, Some(vt), Some(ts)) => vt
                .row(p)
                .iter()
                .zip(ts.row(t))
                .zip(v)
                .map(|((a, b), c)| a * b + c)
                .collect(),
            _ => unreachable!("validated table layout"),
        })
    }

    /// `u_s * q(p, t)`: scoring against `conj(u_k)` gives every object score.
    pub(crate) fn query_vector(&self, s: usize, p: usize, t: usize) -> Result<Vec<Complex<S>>> {
        self.check(Mode::Subject, s)?;
        let mut q = self.relation(p, t)?;
        for (qr, us) in q.iter_mut().zip(self.entities.row(s)) {
            *qr = *qr * us;
        }
        Ok(q)
    }

    pub fn score(&self, s: usize, p: usize, o: usize, t: usize) -> Result<S> {
        self.check(Mode::Object, o)?;
        let h = self.query_vector(s, p, t)?;
        Ok(re_dot_conj(&h, self.entities.row(o)))
    }

    pub fn score_all_objects(&self, s: usize, p: usize, t: usize) -> Result<Vec<S>> {
        let mut out = Vec::new();
        self.score_all_objects_into(s, p, t, &mut out)?;
        Ok(out)
    }

    /// Writes the score of every entity as object into `out`, one pass over U.
    pub fn score_all_objects_into(&self, s: usize, p: usize, t: usize, out: &mut Vec<S>) -> Result<()> {
        let h = self.query_vector(s, p, t)?;
        out.clear();
        out.extend(self.entities.as_slice().chunks_exact(self.rank().max(1)).map(|u| re_dot_conj(&h, u)));
        if self.rank() == 0 {
            out.resize(self.entities.rows(), S::zero());
        }
        Ok(())
    }

    /// Score of `(s, p, o, l)` for every timestamp `l`.
    pub fn score_all_times(&self, s: usize, p: usize, o: usize) -> Result<Vec<S>> {
        let ts = self.timestamps.as_ref().ok_or_else(|| self.unsupported("score_all_times"))?;
        self.check(Mode::Subject, s)?;
        self.check(Mode::Predicate, p)?;
        self.check(Mode::Object, o)?;
        let us = self.entities.row(s);
        let uo = self.entities.row(o);
        let (temporal_rel, static_part) = match &self.temporal_predicates {
            Some(vt) => {
                let v: Vec<_> = us.iter().zip(self.predicates.row(p)).map(|(a, b)| a * b).collect();
                (vt.row(p), re_dot_conj(&v, uo))
            }
            None => (self.predicates.row(p), S::zero()),
        };
        // a = u_s * r * conj(u_o); score_l = Re <a, t_l> + static part
        let a: Vec<Complex<S>> =
            us.iter().zip(temporal_rel).zip(uo).map(|((x, r), y)| x * r * y.conj()).collect();
        let a_conj: Vec<Complex<S>> = a.iter().map(|z| z.conj()).collect();
        Ok((0..ts.rows()).map(|l| re_dot_conj(&a_conj, ts.row(l)) + static_part).collect())
    }
}

/// Evaluates the three placements of the timestamp modulation:
/// `Re <u*t, v, conj(w)>`, `Re <u, v*t, conj(w)>`, `Re <u, v, conj(w)*t>`.
pub fn modulation_check<S: Scalar>(
    u: &[Complex<S>],
    v: &[Complex<S>],
    w: &[Complex<S>],
    t: &[Complex<S>],
) -> Result<(S, S, S)> {
    let n = u.len();
    for len in [v.len(), w.len(), t.len()] {
        if len != n {
            return Err(Error::LengthMismatch { left: n, right: len });
        }
    }
    let mut out = (S::zero(), S::zero(), S::zero());
    for r in 0..n {
        let wc = w[r].conj();
        out.0 += ((u[r] * t[r]) * v[r] * wc).re;
        out.1 += (u[r] * (v[r] * t[r]) * wc).re;
        out.2 += (u[r] * v[r] * (wc * t[r])).re;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn rank1(kind: ModelKind, u: &[Complex<f64>], v: Complex<f64>, t: Complex<f64>) -> ModelParams<f64> {
        let rows: Vec<Vec<_>> = u.iter().map(|&z| vec![z]).collect();
        let ts = kind.is_temporal().then(|| EmbeddingTable::from_rows(&[vec![t]]).unwrap());
        let vt = kind.has_temporal_predicates().then(|| EmbeddingTable::from_rows(&[vec![c(0.0, 0.0)]]).unwrap());
        ModelParams::from_tables(
            kind,
            EmbeddingTable::from_rows(&rows).unwrap(),
            EmbeddingTable::from_rows(&[vec![v]]).unwrap(),
            vt,
            ts,
        )
        .unwrap()
    }

    #[test]
    fn all_ones_rank_one() {
        let p = rank1(ModelKind::TComplEx, &[c(1.0, 0.0)], c(1.0, 0.0), c(1.0, 0.0));
        assert_eq!(p.score(0, 0, 0, 0).unwrap(), 1.0);
    }

    #[test]
    fn imaginary_subject_and_object() {
        // Re(i * 1 * conj(i) * 1) = Re(i * -i) = 1
        let p = rank1(ModelKind::TComplEx, &[c(0.0, 1.0)], c(1.0, 0.0), c(1.0, 0.0));
        assert!((p.score(0, 0, 0, 0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn all_objects_with_zero_rows() {
        let p = rank1(
            ModelKind::TComplEx,
            &[c(0.0, 1.0), c(0.0, 0.0), c(0.0, 0.0)],
            c(1.0, 0.0),
            c(1.0, 0.0),
        );
        assert_eq!(p.score_all_objects(0, 0, 0).unwrap(), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_predicate_row_gives_zero_scores() {
        let p = rank1(ModelKind::ComplEx, &[c(0.3, 1.0), c(-2.0, 0.5)], c(0.0, 0.0), c(1.0, 0.0));
        assert_eq!(p.score_all_objects(1, 0, 0).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn index_errors_name_the_mode() {
        let p = rank1(ModelKind::TComplEx, &[c(1.0, 0.0)], c(1.0, 0.0), c(1.0, 0.0));
        let err = p.score(0, 0, 3, 0).unwrap_err();
        assert!(matches!(err, Error::IndexOutOfRange { mode: Mode::Object, index: 3, size: 1 }));
        assert!(err.to_string().starts_with("object"));
        let err = p.score(0, 0, 0, 1).unwrap_err();
        assert!(matches!(err, Error::IndexOutOfRange { mode: Mode::Timestamp, .. }));
        let err = p.score(0, 5, 0, 0).unwrap_err();
        assert!(matches!(err, Error::IndexOutOfRange { mode: Mode::Predicate, .. }));
    }

    #[test]
    fn complex_ignores_time_and_rejects_time_scoring() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let shape = ModelShape { rank: 3, entities: 4, predicates: 2, timestamps: 5 };
        let p = ModelParams::<f64>::random(ModelKind::ComplEx, shape, 0.5, &mut rng);
        assert_eq!(p.score(0, 1, 2, 0).unwrap(), p.score(0, 1, 2, 999).unwrap());
        assert!(matches!(p.score_all_times(0, 0, 0), Err(Error::UnsupportedModel { .. })));
    }

    #[test]
    fn tntcomplex_without_temporal_part_is_constant_in_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let shape = ModelShape { rank: 3, entities: 4, predicates: 2, timestamps: 6 };
        let mut p = ModelParams::<f64>::random(ModelKind::TNTComplEx, shape, 0.5, &mut rng);
        p.temporal_predicates_mut().unwrap().as_mut_slice().fill(c(0.0, 0.0));
        let scores = p.score_all_times(1, 0, 3).unwrap();
        assert_eq!(scores.len(), 6);
        assert!(scores.iter().all(|&x| x == scores[0]));
    }

    #[test]
    fn invalid_layout_rejected() {
        let t = EmbeddingTable::<f64>::zeros(2, 2);
        assert!(ModelParams::from_tables(ModelKind::ComplEx, t.clone(), t.clone(), None, Some(t.clone())).is_err());
        assert!(ModelParams::from_tables(ModelKind::TComplEx, t.clone(), t.clone(), None, None).is_err());
        let r3 = EmbeddingTable::<f64>::zeros(2, 3);
        assert!(ModelParams::from_tables(ModelKind::TComplEx, t.clone(), t, None, Some(r3)).is_err());
    }

    #[test]
    fn modulation_trivial_cases() {
        let ones = vec![c(1.0, 0.0); 2];
        assert_eq!(modulation_check(&ones, &ones, &ones, &ones).unwrap(), (2.0, 2.0, 2.0));
        let zero = vec![c(0.0, 0.0); 2];
        assert_eq!(modulation_check(&ones, &ones, &ones, &zero).unwrap(), (0.0, 0.0, 0.0));
        assert!(modulation_check(&ones, &ones, &ones, &ones[..1]).is_err());
    }

    #[test]
    fn flatten_roundtrip_and_kind_parsing() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let shape = ModelShape { rank: 2, entities: 3, predicates: 2, timestamps: 2 };
        let p = ModelParams::<f64>::random(ModelKind::TNTComplEx, shape, 1.0, &mut rng);
        let flat = p.flatten();
        assert_eq!(flat.len(), p.num_parameters());
        let mut q = ModelParams::zeros(ModelKind::TNTComplEx, shape);
        q.assign_flat(&flat).unwrap();
        assert_eq!(p, q);
        assert_eq!("tntcomplex".parse::<ModelKind>().unwrap(), ModelKind::TNTComplEx);
        assert!("rescal".parse::<ModelKind>().is_err());
    }

    #[test]
    fn single_precision_scores() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let shape = ModelShape { rank: 4, entities: 5, predicates: 2, timestamps: 3 };
        let p = ModelParams::<f32>::random(ModelKind::TComplEx, shape, 1.0, &mut rng);
        let all = p.score_all_objects(1, 1, 2).unwrap();
        for (o, &x) in all.iter().enumerate() {
            assert!((x - p.score(1, 1, o, 2).unwrap()).abs() < 1e-5);
        }
    }
}
