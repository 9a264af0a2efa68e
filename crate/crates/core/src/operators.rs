//! Model operators on `ℂ^d ⊗ (truncated Fock space)`.
//!
//! Model-space indices are coefficient-major: `c · D + idx` for coefficient
//! `c < d` and basis index `idx < D`. Factors are indexed from 0, generators
//! from 1 (matching word letters). Creation operators are compressions to the
//! truncated space and annihilate the top degree.

use crate::error::{Error, Result};
use crate::fock::{weight_b, GradedBasis, TruncationSpec};
use crate::scalar::{adjoint, cplx, matmul3, max_abs, phase, CMatrix, Real, C};
use crate::words::{DegreeVector, Word};

/// A complex matrix on the model space of a spec.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixOperator<T: Real> {
    spec: TruncationSpec,
    matrix: CMatrix<T>,
}

impl<T: Real> MatrixOperator<T> {
    pub fn new(spec: &TruncationSpec, matrix: CMatrix<T>) -> Result<Self> {
        let dim = spec.model_dim();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: if matrix.nrows() != dim { matrix.nrows() } else { matrix.ncols() },
            });
        }
        Ok(MatrixOperator { spec: spec.clone(), matrix })
    }

    pub fn zeros(spec: &TruncationSpec) -> Self {
        let dim = spec.model_dim();
        MatrixOperator { spec: spec.clone(), matrix: CMatrix::zeros(dim, dim) }
    }

    pub fn identity(spec: &TruncationSpec) -> Self {
        let dim = spec.model_dim();
        MatrixOperator { spec: spec.clone(), matrix: CMatrix::identity(dim, dim) }
    }

    pub fn spec(&self) -> &TruncationSpec {
        &self.spec
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn adjoint(&self) -> Self {
        MatrixOperator { spec: self.spec.clone(), matrix: adjoint(&self.matrix) }
    }

    /// The `d × d` block `⟨T(· ⊗ e_γ), · ⊗ e_ω⟩`.
    pub fn block(&self, omega: usize, gamma: usize) -> CMatrix<T> {
        block(&self.matrix, self.spec.d, self.spec.fock_dim(), omega, gamma)
    }

    pub fn max_abs(&self) -> T {
        max_abs(&self.matrix)
    }
}

pub(crate) fn block<T: Real>(
    m: &CMatrix<T>,
    d: usize,
    fock: usize,
    omega: usize,
    gamma: usize,
) -> CMatrix<T> {
    CMatrix::from_fn(d, d, |a, b| m[(a * fock + omega, b * fock + gamma)])
}

/// A weighted partial shift on basis vectors, tensored with `I_d`:
/// `e_idx ↦ w · e_target` or `e_idx ↦ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedShift<T: Real> {
    d: usize,
    map: Vec<Option<(usize, T)>>,
}

impl<T: Real> WeightedShift<T> {
    pub fn identity(d: usize, fock_dim: usize) -> Self {
        WeightedShift { d, map: (0..fock_dim).map(|i| Some((i, T::one()))).collect() }
    }

    pub fn from_map(d: usize, map: Vec<Option<(usize, T)>>) -> Self {
        WeightedShift { d, map }
    }

    pub fn fock_dim(&self) -> usize {
        self.map.len()
    }

    pub fn model_dim(&self) -> usize {
        self.d * self.map.len()
    }

    pub fn image(&self, idx: usize) -> Option<(usize, T)> {
        self.map[idx]
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &WeightedShift<T>) -> WeightedShift<T> {
        let map = other
            .map
            .iter()
            .map(|e| {
                e.and_then(|(mid, w1)| self.map[mid].map(|(t, w2)| (t, w1 * w2)))
            })
            .collect();
        WeightedShift { d: self.d, map }
    }

    /// Left multiplication of the weights by a diagonal: `diag · S`.
    pub fn then_diagonal(&self, diag: &[T]) -> WeightedShift<T> {
        let map = self.map.iter().map(|e| e.map(|(t, w)| (t, w * diag[t]))).collect();
        WeightedShift { d: self.d, map }
    }

    pub fn to_matrix(&self) -> CMatrix<T> {
        let n = self.fock_dim();
        let mut out = CMatrix::zeros(self.model_dim(), self.model_dim());
        for (idx, e) in self.map.iter().enumerate() {
            if let Some((t, w)) = *e {
                for c in 0..self.d {
                    out[(c * n + t, c * n + idx)] = cplx(w, T::zero());
                }
            }
        }
        out
    }

    fn pairs(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        let n = self.fock_dim();
        let d = self.d;
        self.map.iter().enumerate().flat_map(move |(idx, e)| {
            (*e).into_iter()
                .flat_map(move |(t, w)| (0..d).map(move |c| (c * n + idx, c * n + t, w)))
        })
    }

    /// `S · M`.
    pub fn left_mul(&self, m: &CMatrix<T>) -> CMatrix<T> {
        let mut out = CMatrix::zeros(m.nrows(), m.ncols());
        for (src, dst, w) in self.pairs() {
            for col in 0..m.ncols() {
                out[(dst, col)] += m[(src, col)] * w;
            }
        }
        out
    }

    /// `S* · M`.
    pub fn left_mul_adjoint(&self, m: &CMatrix<T>) -> CMatrix<T> {
        let mut out = CMatrix::zeros(m.nrows(), m.ncols());
        for (src, dst, w) in self.pairs() {
            for col in 0..m.ncols() {
                out[(src, col)] += m[(dst, col)] * w;
            }
        }
        out
    }

    /// `M · S`.
    pub fn right_mul(&self, m: &CMatrix<T>) -> CMatrix<T> {
        let mut out = CMatrix::zeros(m.nrows(), m.ncols());
        for (src, dst, w) in self.pairs() {
            let from = m.column(dst) * cplx(w, T::zero());
            let mut to = out.column_mut(src);
            to += from;
        }
        out
    }

    /// `M · S*`.
    pub fn right_mul_adjoint(&self, m: &CMatrix<T>) -> CMatrix<T> {
        let mut out = CMatrix::zeros(m.nrows(), m.ncols());
        for (src, dst, w) in self.pairs() {
            let from = m.column(src) * cplx(w, T::zero());
            let mut to = out.column_mut(dst);
            to += from;
        }
        out
    }

    /// `S · M · S*`.
    pub fn conjugate(&self, m: &CMatrix<T>) -> CMatrix<T> {
        self.right_mul_adjoint(&self.left_mul(m))
    }
}

/// Diagonal operator on basis vectors, tensored with `I_d`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalOperator<T: Real> {
    d: usize,
    values: Vec<C<T>>,
}

impl<T: Real> DiagonalOperator<T> {
    pub fn new(d: usize, values: Vec<C<T>>) -> Self {
        DiagonalOperator { d, values }
    }

    pub fn values(&self) -> &[C<T>] {
        &self.values
    }

    pub fn model_value(&self, row: usize) -> C<T> {
        self.values[row % self.values.len()]
    }

    pub fn to_matrix(&self) -> CMatrix<T> {
        let n = self.values.len() * self.d;
        CMatrix::from_fn(n, n, |r, c| if r == c { self.model_value(r) } else { C::new(T::zero(), T::zero()) })
    }

    /// `Δ · M`.
    pub fn left_mul(&self, m: &CMatrix<T>) -> CMatrix<T> {
        CMatrix::from_fn(m.nrows(), m.ncols(), |r, c| self.model_value(r) * m[(r, c)])
    }

    /// `M · Δ`.
    pub fn right_mul(&self, m: &CMatrix<T>) -> CMatrix<T> {
        CMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)] * self.model_value(c))
    }
}

/// Which side a word operator multiplies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

fn check_generator(spec: &TruncationSpec, i: usize, j: usize) -> Result<()> {
    if i >= spec.k {
        return Err(Error::IndexOutOfRange(format!("factor {i} (k = {})", spec.k)));
    }
    if j == 0 || j > spec.n[i] {
        return Err(Error::IndexOutOfRange(format!("generator {j} (n_{i} = {})", spec.n[i])));
    }
    Ok(())
}

/// `sqrt(b(m, p) / b(m, p + 1))`.
pub fn creation_weight<T: Real>(m: usize, p: usize) -> T {
    let num = T::from_u64(weight_b(m, p)).expect("representable");
    let den = T::from_u64(weight_b(m, p + 1)).expect("representable");
    (num / den).sqrt()
}

fn creation_shift<T: Real>(basis: &GradedBasis, i: usize, j: usize, side: Side) -> Result<WeightedShift<T>> {
    let spec = basis.spec();
    check_generator(spec, i, j)?;
    let map = (0..basis.len())
        .map(|idx| {
            let target = match side {
                Side::Left => basis.left_target(idx, i, j),
                Side::Right => basis.right_target(idx, i, j),
            };
            target.map(|t| (t, creation_weight::<T>(spec.m[i], basis.degree_in(idx, i))))
        })
        .collect();
    Ok(WeightedShift::from_map(spec.d, map))
}

/// `W_{i,j}` as a weighted shift.
pub fn left_creation_shift<T: Real>(basis: &GradedBasis, i: usize, j: usize) -> Result<WeightedShift<T>> {
    creation_shift(basis, i, j, Side::Left)
}

/// `Λ_{i,j}` as a weighted shift.
pub fn right_creation_shift<T: Real>(basis: &GradedBasis, i: usize, j: usize) -> Result<WeightedShift<T>> {
    creation_shift(basis, i, j, Side::Right)
}

pub fn left_creation<T: Real>(basis: &GradedBasis, i: usize, j: usize) -> Result<MatrixOperator<T>> {
    MatrixOperator::new(basis.spec(), left_creation_shift::<T>(basis, i, j)?.to_matrix())
}

pub fn right_creation<T: Real>(basis: &GradedBasis, i: usize, j: usize) -> Result<MatrixOperator<T>> {
    MatrixOperator::new(basis.spec(), right_creation_shift::<T>(basis, i, j)?.to_matrix())
}

fn check_word(spec: &TruncationSpec, i: usize, alpha: &Word) -> Result<()> {
    if i >= spec.k {
        return Err(Error::IndexOutOfRange(format!("factor {i} (k = {})", spec.k)));
    }
    if alpha.alphabet() != spec.n[i] {
        return Err(Error::AlphabetMismatch(alpha.alphabet(), spec.n[i]));
    }
    if alpha.len() > spec.l[i] {
        return Err(Error::KeyOutOfRange(format!("word {alpha} longer than L_{i} = {}", spec.l[i])));
    }
    Ok(())
}

/// `W_{i,α} = W_{i,j_1} ⋯ W_{i,j_p}` (left) or `Λ_{i,α}` (right) as a
/// product of generator shifts.
pub fn word_shift<T: Real>(basis: &GradedBasis, i: usize, alpha: &Word, side: Side) -> Result<WeightedShift<T>> {
    check_word(basis.spec(), i, alpha)?;
    let mut acc = WeightedShift::identity(basis.spec().d, basis.len());
    for &j in alpha.letters() {
        acc = acc.compose(&creation_shift(basis, i, j as usize, side)?);
    }
    Ok(acc)
}

pub fn word_operator<T: Real>(basis: &GradedBasis, i: usize, alpha: &Word, side: Side) -> Result<MatrixOperator<T>> {
    MatrixOperator::new(basis.spec(), word_shift::<T>(basis, i, alpha, side)?.to_matrix())
}

/// Closed form `W_{i,β} e_γ = sqrt(b_γ / b_{βγ}) e_{βγ}` and
/// `Λ_{i,β} e_γ = sqrt(b_γ / b_{γβ̃}) e_{γβ̃}`.
pub fn word_shift_closed_form<T: Real>(
    basis: &GradedBasis,
    i: usize,
    alpha: &Word,
    side: Side,
) -> Result<WeightedShift<T>> {
    let spec = basis.spec();
    check_word(spec, i, alpha)?;
    let factor = basis.factor(i);
    let m = spec.m[i];
    let rev = alpha.reverse();
    let map = (0..basis.len())
        .map(|idx| {
            let gamma = factor.word(basis.component(idx, i));
            let image = match side {
                Side::Left => alpha.concat(gamma).expect("same alphabet"),
                Side::Right => gamma.concat(&rev).expect("same alphabet"),
            };
            factor.index_of(&image).map(|c| {
                let w = T::from_u64(weight_b(m, gamma.len())).unwrap()
                    / T::from_u64(weight_b(m, image.len())).unwrap();
                (basis.replace_component(idx, i, c), w.sqrt())
            })
        })
        .collect();
    Ok(WeightedShift::from_map(spec.d, map))
}

/// Diagonal of `Ω_i` on basis vectors: `(m_i + j − 1) / j` at factor-`i`
/// degree `j ≥ 1`, `1` at degree 0.
pub fn omega_values<T: Real>(basis: &GradedBasis, i: usize) -> Vec<T> {
    let m = basis.spec().m[i];
    (0..basis.len())
        .map(|idx| {
            let j = basis.degree_in(idx, i);
            if j == 0 {
                T::one()
            } else {
                T::from_usize(m + j - 1).unwrap() / T::from_usize(j).unwrap()
            }
        })
        .collect()
}

pub fn omega<T: Real>(basis: &GradedBasis, i: usize) -> Result<MatrixOperator<T>> {
    if i >= basis.k() {
        return Err(Error::IndexOutOfRange(format!("factor {i}")));
    }
    let values = omega_values::<T>(basis, i).into_iter().map(|v| cplx(v, T::zero())).collect();
    MatrixOperator::new(basis.spec(), DiagonalOperator::new(basis.spec().d, values).to_matrix())
}

/// `Λ'_{i,j} = Ω_i Λ_{i,j}` as a weighted shift.
pub fn cauchy_dual_shift<T: Real>(basis: &GradedBasis, i: usize, j: usize) -> Result<WeightedShift<T>> {
    Ok(right_creation_shift::<T>(basis, i, j)?.then_diagonal(&omega_values::<T>(basis, i)))
}

pub fn cauchy_dual_column<T: Real>(basis: &GradedBasis, i: usize, j: usize) -> Result<MatrixOperator<T>> {
    MatrixOperator::new(basis.spec(), cauchy_dual_shift::<T>(basis, i, j)?.to_matrix())
}

/// Orthogonal projection onto `ℂ^d ⊗ ℰ_p`.
pub fn spectral_projection<T: Real>(basis: &GradedBasis, p: &DegreeVector) -> MatrixOperator<T> {
    let range = basis.degree_indices(p);
    let values = (0..basis.len())
        .map(|idx| if range.contains(&idx) { C::new(T::one(), T::zero()) } else { C::new(T::zero(), T::zero()) })
        .collect();
    MatrixOperator { spec: basis.spec().clone(), matrix: DiagonalOperator::new(basis.spec().d, values).to_matrix() }
}

/// Diagonal of `Γ(θ)`: `exp(i Σ_s θ_s |α_s|)` per basis vector.
pub fn gamma_phases<T: Real>(basis: &GradedBasis, theta: &[T]) -> Result<Vec<C<T>>> {
    if theta.len() != basis.k() {
        return Err(Error::DimensionMismatch { expected: basis.k(), got: theta.len() });
    }
    Ok((0..basis.len())
        .map(|idx| {
            let angle = (0..basis.k()).fold(T::zero(), |acc, s| {
                acc + theta[s] * T::from_usize(basis.degree_in(idx, s)).unwrap()
            });
            phase(angle)
        })
        .collect())
}

pub fn gamma<T: Real>(basis: &GradedBasis, theta: &[T]) -> Result<MatrixOperator<T>> {
    let values = gamma_phases(basis, theta)?;
    MatrixOperator::new(basis.spec(), DiagonalOperator::new(basis.spec().d, values).to_matrix())
}

/// Degree margin within which truncated identities are exact.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GuardBand {
    pub g: Vec<usize>,
}

impl GuardBand {
    pub fn new(g: Vec<usize>) -> Self {
        GuardBand { g }
    }

    pub fn zero(k: usize) -> Self {
        GuardBand { g: vec![0; k] }
    }

    pub fn uniform(k: usize, g: usize) -> Self {
        GuardBand { g: vec![g; k] }
    }

    /// Guard band `m`.
    pub fn orders(spec: &TruncationSpec) -> Self {
        GuardBand { g: spec.m.clone() }
    }

    /// `g` in factor `i`, zero elsewhere.
    pub fn single(k: usize, i: usize, g: usize) -> Self {
        let mut v = vec![0; k];
        v[i] = g;
        GuardBand { g: v }
    }

    pub fn validate(&self, spec: &TruncationSpec) -> Result<()> {
        if self.g.len() != spec.k {
            return Err(Error::DimensionMismatch { expected: spec.k, got: self.g.len() });
        }
        if let Some(i) = (0..spec.k).find(|&i| self.g[i] > spec.l[i]) {
            return Err(Error::InvalidSpec(format!(
                "guard band {} exceeds L_{i} = {}",
                self.g[i], spec.l[i]
            )));
        }
        Ok(())
    }

    /// Whether basis element `idx` lies in the interior.
    pub fn contains(&self, basis: &GradedBasis, idx: usize) -> bool {
        let spec = basis.spec();
        (0..spec.k).all(|i| basis.degree_in(idx, i) + self.g[i] <= spec.l[i])
    }

    /// Interior basis indices (Fock level, without coefficients).
    pub fn basis_indices(&self, basis: &GradedBasis) -> Vec<usize> {
        (0..basis.len()).filter(|&idx| self.contains(basis, idx)).collect()
    }

    /// Interior model-space indices.
    pub fn model_indices(&self, basis: &GradedBasis) -> Vec<usize> {
        let inner = self.basis_indices(basis);
        let n = basis.len();
        (0..basis.spec().d).flat_map(|c| inner.iter().map(move |&idx| c * n + idx)).collect()
    }
}

pub fn interior_projector<T: Real>(basis: &GradedBasis, g: &GuardBand) -> Result<MatrixOperator<T>> {
    g.validate(basis.spec())?;
    let values = (0..basis.len())
        .map(|idx| if g.contains(basis, idx) { C::new(T::one(), T::zero()) } else { C::new(T::zero(), T::zero()) })
        .collect();
    MatrixOperator::new(basis.spec(), DiagonalOperator::new(basis.spec().d, values).to_matrix())
}

/// Largest entry modulus of `P M P` for the interior of `g`.
pub fn interior_max_abs<T: Real>(basis: &GradedBasis, g: &GuardBand, m: &CMatrix<T>) -> T {
    let idx = g.model_indices(basis);
    let mut acc = T::zero();
    for &c in &idx {
        for &r in &idx {
            let z = m[(r, c)];
            acc = acc.max((z.re * z.re + z.im * z.im).sqrt());
        }
    }
    acc
}

/// `Φ_X(Y) = Σ_j X_j Y X_j*` for a dense tuple.
pub fn phi<T: Real>(xs: &[CMatrix<T>], y: &CMatrix<T>) -> Result<CMatrix<T>> {
    let mut out = CMatrix::zeros(y.nrows(), y.ncols());
    for x in xs {
        if x.ncols() != y.nrows() || x.nrows() != x.ncols() || y.nrows() != y.ncols() {
            return Err(Error::DimensionMismatch { expected: y.nrows(), got: x.ncols() });
        }
        out += matmul3(x, y, &x.adjoint());
    }
    Ok(out)
}

/// A k-tuple of row tuples with a completely positive map per factor.
pub trait CpTuple<T: Real> {
    fn factor_count(&self) -> usize;
    fn dim(&self) -> usize;
    /// `Φ_{X_i}(Y)`.
    fn phi_factor(&self, i: usize, y: &CMatrix<T>) -> Result<CMatrix<T>>;
}

/// Dense operator tuple `(X_1, …, X_k)` with `X_i = (X_{i,1}, …, X_{i,n_i})`.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorTuple<T: Real> {
    pub factors: Vec<Vec<CMatrix<T>>>,
}

impl<T: Real> CpTuple<T> for OperatorTuple<T> {
    fn factor_count(&self) -> usize {
        self.factors.len()
    }

    fn dim(&self) -> usize {
        self.factors.iter().flatten().next().map_or(0, |x| x.nrows())
    }

    fn phi_factor(&self, i: usize, y: &CMatrix<T>) -> Result<CMatrix<T>> {
        phi(&self.factors[i], y)
    }
}

/// The model tuple `W` (or `Λ`) kept as sparse shifts.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftTuple<T: Real> {
    pub factors: Vec<Vec<WeightedShift<T>>>,
}

impl<T: Real> ShiftTuple<T> {
    pub fn left(basis: &GradedBasis) -> Self {
        Self::build(basis, Side::Left)
    }

    pub fn right(basis: &GradedBasis) -> Self {
        Self::build(basis, Side::Right)
    }

    fn build(basis: &GradedBasis, side: Side) -> Self {
        let spec = basis.spec();
        let factors = (0..spec.k)
            .map(|i| {
                (1..=spec.n[i])
                    .map(|j| creation_shift(basis, i, j, side).expect("valid generator"))
                    .collect()
            })
            .collect();
        ShiftTuple { factors }
    }

    pub fn to_dense(&self) -> OperatorTuple<T> {
        OperatorTuple {
            factors: self.factors.iter().map(|f| f.iter().map(WeightedShift::to_matrix).collect()).collect(),
        }
    }
}

impl<T: Real> CpTuple<T> for ShiftTuple<T> {
    fn factor_count(&self) -> usize {
        self.factors.len()
    }

    fn dim(&self) -> usize {
        self.factors.iter().flatten().next().map_or(0, |x| x.model_dim())
    }

    fn phi_factor(&self, i: usize, y: &CMatrix<T>) -> Result<CMatrix<T>> {
        let mut out = CMatrix::zeros(y.nrows(), y.ncols());
        for s in &self.factors[i] {
            if s.model_dim() != y.nrows() {
                return Err(Error::DimensionMismatch { expected: s.model_dim(), got: y.nrows() });
            }
            out += s.conjugate(y);
        }
        Ok(out)
    }
}

pub(crate) fn binomial(n: usize, r: usize) -> u64 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    (0..r).fold(1u64, |acc, t| acc * (n - t) as u64 / (t + 1) as u64)
}

/// `(id − Φ_i)^p (Y)` by its binomial expansion.
pub fn defect_factor<T: Real, X: CpTuple<T> + ?Sized>(x: &X, i: usize, p: usize, y: &CMatrix<T>) -> Result<CMatrix<T>> {
    let mut power = y.clone();
    let mut out = y.clone();
    for t in 1..=p {
        power = x.phi_factor(i, &power)?;
        let coeff = T::from_u64(binomial(p, t)).unwrap();
        let coeff = if t % 2 == 1 { -coeff } else { coeff };
        out += power.map(|z| z * coeff);
    }
    Ok(out)
}

/// `Δ_X^p(I) = (id − Φ_{X_1})^{p_1} ∘ ⋯ ∘ (id − Φ_{X_k})^{p_k}(I)`.
pub fn defect<T: Real, X: CpTuple<T> + ?Sized>(x: &X, p: &[usize]) -> Result<CMatrix<T>> {
    if p.len() != x.factor_count() {
        return Err(Error::DimensionMismatch { expected: x.factor_count(), got: p.len() });
    }
    let mut y = CMatrix::identity(x.dim(), x.dim());
    for i in (0..p.len()).rev() {
        y = defect_factor(x, i, p[i], &y)?;
    }
    Ok(y)
}

/// `Ψ_i(T) = Σ_{t < m_i} (−1)^t C(m_i, t+1) Φ_{Λ_i}^t(T)`.
pub fn psi_bh<T: Real>(basis: &GradedBasis, i: usize, t: &CMatrix<T>) -> Result<CMatrix<T>> {
    let spec = basis.spec();
    if i >= spec.k {
        return Err(Error::IndexOutOfRange(format!("factor {i}")));
    }
    if t.nrows() != spec.model_dim() || t.ncols() != spec.model_dim() {
        return Err(Error::DimensionMismatch { expected: spec.model_dim(), got: t.nrows() });
    }
    let lambda = ShiftTuple::right(basis);
    let m = spec.m[i];
    let mut power = t.clone();
    let mut out = CMatrix::zeros(t.nrows(), t.ncols());
    for step in 0..m {
        if step > 0 {
            power = lambda.phi_factor(i, &power)?;
        }
        let coeff = T::from_u64(binomial(m, step + 1)).unwrap();
        let coeff = if step % 2 == 1 { -coeff } else { coeff };
        out += power.map(|z| z * coeff);
    }
    Ok(out)
}

/// Eigenvalue of `Σ_j Λ_{i,j} Λ_{i,j}*` on factor degree `j ≥ 1`, as
/// `(computed, displayed)`: the value `j / (m + j − 1)` that follows from the
/// weights, and the constant `1 / (m + j − 1)` printed in the source
/// derivation.
pub fn lambda_lambda_star_eigenvalue<T: Real>(m: usize, j: usize) -> (T, T) {
    let den = T::from_usize(m + j - 1).unwrap();
    (T::from_usize(j).unwrap() / den, T::one() / den)
}

/// Dense matrix of the block-diagonal operator `Σ_j Λ'_{i,j} Λ_{i,j}*`.
pub fn cauchy_range_projection<T: Real>(basis: &GradedBasis, i: usize) -> Result<CMatrix<T>> {
    let dim = basis.model_dim();
    let mut out = CMatrix::zeros(dim, dim);
    for j in 1..=basis.spec().n[i] {
        let lp = cauchy_dual_shift::<T>(basis, i, j)?;
        let l = right_creation_shift::<T>(basis, i, j)?;
        out += lp.left_mul(&l.right_mul_adjoint(&CMatrix::identity(dim, dim)));
    }
    Ok(out)
}

/// Real diagonal matrix helper used by tests and the verifier.
pub fn real_diagonal<T: Real>(d: usize, values: &[T]) -> CMatrix<T> {
    DiagonalOperator::new(d, values.iter().map(|&v| cplx(v, T::zero())).collect()).to_matrix()
}
