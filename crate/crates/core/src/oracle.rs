//! Brute-force reference implementations for tests.
//!
//! Nothing here calls into the scoring, loss or ranking code of the other
//! modules: entries are recomputed from raw table storage with explicit real
//! arithmetic, so agreement with the optimized path is meaningful.

use std::ops::{Add, Mul};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::model::{ModelKind, ModelParams};
use crate::scalar::Scalar;

/// Largest tensor any oracle will materialize.
pub const MAX_ENTRIES: usize = 1_000_000;

fn guard(sizes: &[usize]) -> Result<usize> {
    let total = sizes.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n));
    match total {
        Some(n) if n <= MAX_ENTRIES => Ok(n),
        _ => Err(Error::Oracle(format!("tensor of shape {sizes:?} exceeds {MAX_ENTRIES} entries"))),
    }
}

/// Dense order-4 array in row-major `(i, j, k, l)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    pub shape: [usize; 4],
    pub data: Vec<f64>,
}

impl Tensor4 {
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let [_, b, c, d] = self.shape;
        self.data[((i * b + j) * c + k) * d + l]
    }

    pub fn max_abs_diff(&self, other: &Tensor4) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::LengthMismatch { left: self.data.len(), right: other.data.len() });
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }
}

fn component<S: Scalar>(z: Complex<S>) -> (f64, f64) {
    (z.re.to_f64_lossy(), z.im.to_f64_lossy())
}

fn mul((a, b): (f64, f64), (c, d): (f64, f64)) -> (f64, f64) {
    (a * c - b * d, a * d + b * c)
}

/// Score of one tuple recomputed coordinate by coordinate.
pub fn entry<S: Scalar>(params: &ModelParams<S>, s: usize, p: usize, o: usize, t: usize) -> f64 {
    let rank = params.rank();
    let u = params.entities().as_slice();
    let v = params.predicates().as_slice();
    let mut total = 0.0;
    for r in 0..rank {
        let us = component(u[s * rank + r]);
        let (ore, oim) = component(u[o * rank + r]);
        let uo_conj = (ore, -oim);
        let vp = component(v[p * rank + r]);
        let rel = match params.kind() {
            ModelKind::ComplEx => vp,
            ModelKind::TComplEx => {
                let tt = component(params.timestamps().expect("layout").as_slice()[t * rank + r]);
                mul(vp, tt)
            }
            ModelKind::TNTComplEx => {
                let tt = component(params.timestamps().expect("layout").as_slice()[t * rank + r]);
                let vt = component(params.temporal_predicates().expect("layout").as_slice()[p * rank + r]);
                let m = mul(vt, tt);
                (m.0 + vp.0, m.1 + vp.1)
            }
        };
        total += mul(mul(us, rel), uo_conj).0;
    }
    total
}

/// Every score `X[s, p, o, t]`; ComplEx uses a single time slice.
pub fn dense_tensor<S: Scalar>(params: &ModelParams<S>) -> Result<Tensor4> {
    let ne = params.entities().rows();
    let np = params.predicates().rows();
    let nt = params.timestamps().map_or(1, |t| t.rows());
    let shape = [ne, np, ne, nt];
    let mut data = Vec::with_capacity(guard(&shape)?);
    for s in 0..ne {
        for p in 0..np {
            for o in 0..ne {
                for t in 0..nt {
                    data.push(entry(params, s, p, o, t));
                }
            }
        }
    }
    Ok(Tensor4 { shape, data })
}

/// Column-major-free dense matrix: `rows x cols`, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Copy> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch { left: rows * cols, right: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let data = (0..rows).flat_map(|i| (0..cols).map(move |j| (i, j))).map(|(i, j)| f(i, j)).collect();
        Self { rows, cols, data }
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }
}

/// Column-wise Kronecker product: column `r` is `A[:, r] (x) B[:, r]`, so
/// row `rows(B) * i + j` holds `A[i, r] * B[j, r]`.
pub fn khatri_rao<T>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>>
where
    T: Copy + Mul<Output = T>,
{
    if a.cols != b.cols {
        return Err(Error::LengthMismatch { left: a.cols, right: b.cols });
    }
    Ok(Matrix::from_fn(a.rows * b.rows, a.cols, |row, r| a.get(row / b.rows, r) * b.get(row % b.rows, r)))
}

/// Values a CP tensor can hold: real, or complex read through its real part.
pub trait CpValue: Copy + Add<Output = Self> + Mul<Output = Self> {
    fn zero() -> Self;
    fn real(self) -> f64;
}

impl CpValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn real(self) -> f64 {
        self
    }
}

impl CpValue for Complex<f64> {
    fn zero() -> Self {
        Complex::new(0.0, 0.0)
    }
    fn real(self) -> f64 {
        self.re
    }
}

fn check_ranks<T>(factors: &[&Matrix<T>]) -> Result<usize> {
    let rank = factors[0].cols;
    for f in factors {
        if f.cols != rank {
            return Err(Error::LengthMismatch { left: rank, right: f.cols });
        }
    }
    Ok(rank)
}

/// `Re sum_r A[i,r] B[j,r] C[k,r] D[l,r]` for all `(i, j, k, l)`.
pub fn cp4<T: CpValue>(a: &Matrix<T>, b: &Matrix<T>, c: &Matrix<T>, d: &Matrix<T>) -> Result<Vec<f64>> {
    let rank = check_ranks(&[a, b, c, d])?;
    let mut out = Vec::with_capacity(guard(&[a.rows, b.rows, c.rows, d.rows])?);
    for i in 0..a.rows {
        for j in 0..b.rows {
            for k in 0..c.rows {
                for l in 0..d.rows {
                    let mut x = T::zero();
                    for r in 0..rank {
                        x = x + a.get(i, r) * b.get(j, r) * c.get(k, r) * d.get(l, r);
                    }
                    out.push(x.real());
                }
            }
        }
    }
    Ok(out)
}

/// `Re sum_r A[i,r] B[j,r] C[m,r]` for all `(i, j, m)`.
pub fn cp3<T: CpValue>(a: &Matrix<T>, b: &Matrix<T>, c: &Matrix<T>) -> Result<Vec<f64>> {
    let rank = check_ranks(&[a, b, c])?;
    let mut out = Vec::with_capacity(guard(&[a.rows, b.rows, c.rows])?);
    for i in 0..a.rows {
        for j in 0..b.rows {
            for m in 0..c.rows {
                let mut x = T::zero();
                for r in 0..rank {
                    x = x + a.get(i, r) * b.get(j, r) * c.get(m, r);
                }
                out.push(x.real());
            }
        }
    }
    Ok(out)
}

/// Compares the order-4 CP tensor `[U, V, W, T]` with the order-3 tensor
/// `[U, V, W (.) T]` obtained by merging modes 3 and 4, entry
/// `(i, j, k, l)` against `(i, j, L k + l)` (0-based). Returns the largest
/// absolute deviation.
pub fn unfolding_check<T: CpValue>(u: &Matrix<T>, v: &Matrix<T>, w: &Matrix<T>, t: &Matrix<T>) -> Result<f64> {
    let full = cp4(u, v, w, t)?;
    let merged = khatri_rao(w, t)?;
    let folded = cp3(u, v, &merged)?;
    let (wl, tl) = (w.rows, t.rows);
    let mut worst = 0.0f64;
    for i in 0..u.rows {
        for j in 0..v.rows {
            for k in 0..wl {
                for l in 0..tl {
                    let x = full[((i * v.rows + j) * wl + k) * tl + l];
                    let y = folded[(i * v.rows + j) * (wl * tl) + tl * k + l];
                    worst = worst.max((x - y).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// Central differences `(f(x + h e_i) - f(x - h e_i)) / 2h` for every coordinate.
pub fn finite_difference(mut f: impl FnMut(&[f64]) -> f64, point: &[f64], step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Oracle(format!("finite-difference step must be positive, got {step}")));
    }
    let mut x = point.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + step;
        let plus = f(&x);
        x[i] = orig - step;
        let minus = f(&x);
        x[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Oracle(format!("non-finite evaluation at coordinate {i}")));
        }
        grad.push((plus - minus) / (2.0 * step));
    }
    Ok(grad)
}

/// `ln sum exp(x)` without the max shift.
pub fn naive_log_sum_exp(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x.exp()).sum::<f64>().ln()
}

/// A known tuple for filtering; the oracle scans these linearly.
pub type Quad = (usize, usize, usize, usize);

/// Filtered rank of every query, rescoring each candidate with [`entry`].
///
/// Queries use base predicates. Unless `rhs_only`, each is followed by its
/// subject query `(o, p + n, ?, t)` where `n` is the number of base
/// predicates, filtered against `known` read backwards.
pub fn naive_ranks<S: Scalar>(params: &ModelParams<S>, known: &[Quad], queries: &[Quad], rhs_only: bool) -> Vec<usize> {
    let ne = params.entities().rows();
    let n = params.predicates().rows() / 2;
    let rank_one = |s: usize, p: usize, t: usize, gold: usize, is_known: &dyn Fn(usize) -> bool| {
        let target = entry(params, s, p, gold, t);
        let mut rank = 1;
        for k in 0..ne {
            if k != gold && !is_known(k) && entry(params, s, p, k, t) >= target {
                rank += 1;
            }
        }
        rank
    };
    let mut ranks = Vec::new();
    for &(s, p, o, t) in queries {
        ranks.push(rank_one(s, p, t, o, &|k| known.contains(&(s, p, k, t))));
        if !rhs_only {
            ranks.push(rank_one(o, p + n, t, s, &|k| known.contains(&(k, p, o, t))));
        }
    }
    ranks
}

/// `(MRR, Hits@1, Hits@3, Hits@10)` of a list of ranks.
pub fn naive_metrics(ranks: &[usize]) -> (f64, f64, f64, f64) {
    let n = ranks.len() as f64;
    let hits = |k: usize| ranks.iter().filter(|&&r| r <= k).count() as f64 / n;
    (ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n, hits(1), hits(3), hits(10))
}

/// Empirical marginals of a multiset of index pairs.
pub fn empirical_marginals(pairs: &[(usize, usize)], rows: usize, cols: usize) -> (Vec<f64>, Vec<f64>) {
    let mut m1 = vec![0.0; rows];
    let mut m2 = vec![0.0; cols];
    let w = 1.0 / pairs.len() as f64;
    for &(i, j) in pairs {
        m1[i] += w;
        m2[j] += w;
    }
    (m1, m2)
}

/// Both sides of `1/|S| sum_{(i,j) in S} (a_i + b_j) = sum_i M1_i a_i + sum_j M2_j b_j`.
pub fn weighted_marginal_sides(pairs: &[(usize, usize)], a: &[f64], b: &[f64]) -> (f64, f64) {
    let direct = pairs.iter().map(|&(i, j)| a[i] + b[j]).sum::<f64>() / pairs.len() as f64;
    let (m1, m2) = empirical_marginals(pairs, a.len(), b.len());
    let weighted = m1.iter().zip(a).map(|(m, x)| m * x).sum::<f64>() + m2.iter().zip(b).map(|(m, x)| m * x).sum::<f64>();
    (direct, weighted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelShape;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn all_ones_tcomplex_tensor() {
        let shape = ModelShape { rank: 1, entities: 2, predicates: 2, timestamps: 2 };
        let mut p = ModelParams::<f64>::zeros(ModelKind::TComplEx, shape);
        let one = Complex::new(1.0, 0.0);
        for table in p.tables_mut() {
            table.as_mut_slice().fill(one);
        }
        let x = dense_tensor(&p).unwrap();
        assert_eq!(x.shape, [2, 2, 2, 2]);
        assert!(x.data.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn hand_entry() {
        let shape = ModelShape { rank: 1, entities: 2, predicates: 2, timestamps: 1 };
        let mut p = ModelParams::<f64>::zeros(ModelKind::TComplEx, shape);
        p.entities_mut().row_mut(0)[0] = Complex::new(0.0, 1.0);
        p.entities_mut().row_mut(1)[0] = Complex::new(0.0, 1.0);
        p.predicates_mut().row_mut(0)[0] = Complex::new(1.0, 0.0);
        p.timestamps_mut().unwrap().row_mut(0)[0] = Complex::new(1.0, 0.0);
        assert_eq!(entry(&p, 0, 0, 1, 0), 1.0);
    }

    #[test]
    fn size_guard() {
        let shape = ModelShape { rank: 1, entities: 200, predicates: 10, timestamps: 10 };
        let p = ModelParams::<f64>::zeros(ModelKind::TComplEx, shape);
        assert!(matches!(dense_tensor(&p), Err(Error::Oracle(_))));
    }

    #[test]
    fn tnt_is_sum_of_parts() {
        let shape = ModelShape { rank: 3, entities: 4, predicates: 2, timestamps: 3 };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let tnt = ModelParams::<f64>::random(ModelKind::TNTComplEx, shape, 1.0, &mut rng);
        let u = tnt.entities().clone();
        let v = tnt.predicates().clone();
        let vt = tnt.temporal_predicates().unwrap().clone();
        let t = tnt.timestamps().unwrap().clone();
        let tc = ModelParams::from_tables(ModelKind::TComplEx, u.clone(), vt, None, Some(t.clone())).unwrap();
        let c = ModelParams::from_tables(ModelKind::ComplEx, u, v, None, None).unwrap();
        let (xa, xb, xc) = (dense_tensor(&tnt).unwrap(), dense_tensor(&tc).unwrap(), dense_tensor(&c).unwrap());
        for (idx, x) in xa.data.iter().enumerate() {
            let [_, b, cc, d] = xa.shape;
            let l = idx % d;
            let k = (idx / d) % cc;
            let j = (idx / (d * cc)) % b;
            let i = idx / (d * cc * b);
            assert!((x - xb.get(i, j, k, l) - xc.get(i, j, k, 0)).abs() < 1e-12);
        }
    }

    #[test]
    fn khatri_rao_definition_and_shapes() {
        let a = Matrix::new(2, 1, vec![2.0, 3.0]).unwrap();
        let b = Matrix::new(2, 1, vec![5.0, 7.0]).unwrap();
        assert_eq!(khatri_rao(&a, &b).unwrap().data, vec![10.0, 14.0, 15.0, 21.0]);
        let a = Matrix::from_fn(2, 3, |i, j| (i + j) as f64);
        let b = Matrix::from_fn(4, 3, |i, j| (i * j) as f64);
        let kr = khatri_rao(&a, &b).unwrap();
        assert_eq!((kr.rows, kr.cols), (8, 3));
        let c = Matrix::from_fn(4, 2, |_, _| 1.0);
        assert!(khatri_rao(&a, &c).is_err());
        let ones = Matrix::from_fn(3, 1, |_, _| 1.0);
        assert!(khatri_rao(&ones, &ones).unwrap().data.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn rank_one_ones_unfold_exactly() {
        let m = |n| Matrix::from_fn(n, 1, |_, _| 1.0);
        assert_eq!(unfolding_check(&m(2), &m(3), &m(2), &m(2)).unwrap(), 0.0);
    }

    #[test]
    fn central_differences() {
        let g = finite_difference(|x| x[0] * x[0], &[3.0], 1e-6).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-6);
        assert!(finite_difference(|x| x[0], &[1.0], 0.0).is_err());
        assert!(finite_difference(|x| 1.0 / x[0] - 1.0 / x[0] + f64::NAN, &[1.0], 1e-3).is_err());
    }

    #[test]
    fn marginal_sides_match() {
        let pairs = [(0, 1), (0, 1), (2, 0), (1, 1)];
        let (l, r) = weighted_marginal_sides(&pairs, &[1.0, 2.0, 3.0], &[0.5, 4.0]);
        assert!((l - r).abs() < 1e-12);
    }
}
