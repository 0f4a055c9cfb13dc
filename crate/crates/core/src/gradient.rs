//! Row-sparse gradient buffers mirroring the layout of [`ModelParams`].
//!
//! A complex entry `g` of a gradient holds the partial derivatives with
//! respect to the real and imaginary components: `g = dF/d(re) + i dF/d(im)`.
//! With that convention, for `F = Re sum_r a_r b_r` the gradient with respect
//! to `a` is `conj(b)`.

use num_complex::Complex;

use crate::model::{EmbeddingTable, ModelParams};
use crate::scalar::Scalar;

/// Dense buffer with a record of which rows received a contribution.
#[derive(Debug, Clone, PartialEq)]
pub struct TableGrad<S> {
    rank: usize,
    data: Vec<Complex<S>>,
    touched: Vec<bool>,
    touched_rows: Vec<usize>,
}

impl<S: Scalar> TableGrad<S> {
    pub fn zeros(rows: usize, rank: usize) -> Self {
        Self {
            rank,
            data: vec![Complex::new(S::zero(), S::zero()); rows * rank],
            touched: vec![false; rows],
            touched_rows: Vec::new(),
        }
    }

    pub fn like(table: &EmbeddingTable<S>) -> Self {
        Self::zeros(table.rows(), table.rank())
    }

    pub fn rows(&self) -> usize {
        self.touched.len()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Mutable access to row `i`, marking it touched.
    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [Complex<S>] {
        if !self.touched[i] {
            self.touched[i] = true;
            self.touched_rows.push(i);
        }
        &mut self.data[i * self.rank..(i + 1) * self.rank]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[Complex<S>] {
        &self.data[i * self.rank..(i + 1) * self.rank]
    }

    /// Adds `scale * values` to row `i`.
    #[inline]
    pub fn add_row(&mut self, i: usize, values: &[Complex<S>], scale: S) {
        for (g, v) in self.row_mut(i).iter_mut().zip(values) {
            *g = *g + v * scale;
        }
    }

    pub fn is_touched(&self, i: usize) -> bool {
        self.touched[i]
    }

    /// Touched rows in the order they were first touched.
    pub fn touched_rows(&self) -> &[usize] {
        &self.touched_rows
    }

    /// Marks every row touched and returns the whole buffer.
    pub fn all_rows_mut(&mut self) -> &mut [Complex<S>] {
        if self.touched_rows.len() != self.touched.len() {
            for (i, flag) in self.touched.iter_mut().enumerate() {
                if !*flag {
                    *flag = true;
                    self.touched_rows.push(i);
                }
            }
        }
        &mut self.data
    }

    pub fn as_slice(&self) -> &[Complex<S>] {
        &self.data
    }

    /// Resets touched rows to zero.
    pub fn clear(&mut self) {
        let zero = Complex::new(S::zero(), S::zero());
        for &i in &self.touched_rows {
            self.data[i * self.rank..(i + 1) * self.rank].fill(zero);
            self.touched[i] = false;
        }
        self.touched_rows.clear();
    }

    pub fn add_assign(&mut self, other: &TableGrad<S>) {
        for &i in other.touched_rows() {
            let src = other.row(i);
            for (g, v) in self.row_mut(i).iter_mut().zip(src) {
                *g = *g + v;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<S> {
    pub entities: TableGrad<S>,
    pub predicates: TableGrad<S>,
    pub temporal_predicates: Option<TableGrad<S>>,
    pub timestamps: Option<TableGrad<S>>,
}

impl<S: Scalar> Gradients<S> {
    pub fn zeros_like(params: &ModelParams<S>) -> Self {
        Self {
            entities: TableGrad::like(params.entities()),
            predicates: TableGrad::like(params.predicates()),
            temporal_predicates: params.temporal_predicates().map(TableGrad::like),
            timestamps: params.timestamps().map(TableGrad::like),
        }
    }

    pub fn clear(&mut self) {
        self.tables_mut().for_each(TableGrad::clear);
    }

    pub fn tables(&self) -> impl Iterator<Item = &TableGrad<S>> {
        [Some(&self.entities), Some(&self.predicates), self.temporal_predicates.as_ref(), self.timestamps.as_ref()]
            .into_iter()
            .flatten()
    }

    pub fn tables_mut(&mut self) -> impl Iterator<Item = &mut TableGrad<S>> {
        [
            Some(&mut self.entities),
            Some(&mut self.predicates),
            self.temporal_predicates.as_mut(),
            self.timestamps.as_mut(),
        ]
        .into_iter()
        .flatten()
    }

    pub fn add_assign(&mut self, other: &Gradients<S>) {
        for (a, b) in self.tables_mut().zip(other.tables()) {
            a.add_assign(b);
        }
    }

    /// Same coordinate order as [`ModelParams::flatten`]; untouched rows are zero.
    pub fn flatten(&self) -> Vec<S> {
        self.tables().flat_map(|t| t.as_slice().iter().flat_map(|z| [z.re, z.im])).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.tables().all(|t| t.as_slice().iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }
}
