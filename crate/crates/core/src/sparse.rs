//! Real sparse matrices on the model space, for identities among weighted
//! shifts and diagonal operators.

use std::collections::BTreeMap;

use crate::fock::GradedBasis;
use crate::operators::{GuardBand, WeightedShift};
use crate::scalar::{CMatrix, Real, C};

/// Row-major map of nonzero entries.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator<T: Real> {
    rows: Vec<BTreeMap<usize, T>>,
}

impl<T: Real> SparseOperator<T> {
    pub fn zeros(dim: usize) -> Self {
        SparseOperator { rows: vec![BTreeMap::new(); dim] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![T::one(); dim])
    }

    pub fn diagonal(values: &[T]) -> Self {
        let mut out = Self::zeros(values.len());
        for (r, &v) in values.iter().enumerate() {
            if v != T::zero() {
                out.rows[r].insert(r, v);
            }
        }
        out
    }

    /// `I_d ⊗ D` for a diagonal `D` given per basis element.
    pub fn diagonal_on_basis(d: usize, values: &[T]) -> Self {
        let full: Vec<T> = (0..d).flat_map(|_| values.iter().copied()).collect();
        Self::diagonal(&full)
    }

    pub fn from_shift(s: &WeightedShift<T>) -> Self {
        let n = s.fock_dim();
        let mut out = Self::zeros(s.model_dim());
        for c in 0..s.model_dim() / n {
            for idx in 0..n {
                if let Some((t, w)) = s.image(idx) {
                    out.rows[c * n + t].insert(c * n + idx, w);
                }
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(BTreeMap::len).sum()
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.rows[r].get(&c).copied().unwrap_or_else(T::zero)
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.rows.iter().enumerate().flat_map(|(r, row)| row.iter().map(move |(&c, &v)| (r, c, v)))
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.dim());
        for (r, c, v) in self.entries() {
            out.rows[c].insert(r, v);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.dim());
        for (r, row) in self.rows.iter().enumerate() {
            for (&x, &a) in row {
                for (&c, &b) in &other.rows[x] {
                    *out.rows[r].entry(c).or_insert_with(T::zero) += a * b;
                }
            }
        }
        out
    }

    /// `self + s · other`.
    pub fn add_scaled(&mut self, other: &Self, s: T) {
        for (r, c, v) in other.entries() {
            *self.rows[r].entry(c).or_insert_with(T::zero) += s * v;
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_scaled(other, -T::one());
        out
    }

    /// Largest `|entry|` of `P_int M P_int`.
    pub fn interior_max_abs(&self, basis: &GradedBasis, g: &GuardBand) -> T {
        let mut inside = vec![false; self.dim()];
        for i in g.model_indices(basis) {
            inside[i] = true;
        }
        self.entries()
            .filter(|&(r, c, _)| inside[r] && inside[c])
            .fold(T::zero(), |acc, (_, _, v)| acc.max(v.abs()))
    }

    pub fn to_dense(&self) -> CMatrix<T> {
        let mut out = CMatrix::zeros(self.dim(), self.dim());
        for (r, c, v) in self.entries() {
            out[(r, c)] = C::new(v, T::zero());
        }
        out
    }
}
