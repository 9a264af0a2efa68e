//! Noncommutative Berezin kernels and transforms at matrix tuples.
//!
//! A point is a k-tuple of row tuples of `dH × dH` matrices whose entries
//! commute across factors. Transforms act on `ℂ^d ⊗ ℂ^{dH}` with
//! coefficient-major indices `c · dH + h`.

use std::collections::BTreeMap;

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::fock::{weight_b, GradedBasis, TruncationSpec};
use crate::operators::{binomial, defect, left_creation_shift, CpTuple, GuardBand, OperatorTuple};
use crate::scalar::{cabs, cplx, hermitian_part, matmul, max_abs, max_abs_diff, to_f64, CMatrix, Real, C};
use crate::toeplitz::Symbol;
use crate::words::{MultiWord, Word};

/// Eigenvalues of the defect below this abort the kernel construction.
pub const DEFECT_TOLERANCE: f64 = 1e-10;
/// Cross-factor commutators above this reject a point.
pub const COMMUTATION_TOLERANCE: f64 = 1e-12;
/// Spectral radii below this count as pure.
pub const PURITY_THRESHOLD: f64 = 1.0 - 1e-8;

/// A point `X = (X_1, …, X_k)` with `X_i = (X_{i,1}, …, X_{i,n_i})`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointTuple<T: Real> {
    dim: usize,
    factors: Vec<Vec<CMatrix<T>>>,
    pure: bool,
}

impl<T: Real> PointTuple<T> {
    pub fn new(dim: usize, factors: Vec<Vec<CMatrix<T>>>, pure: bool) -> Result<Self> {
        for x in factors.iter().flatten() {
            if x.nrows() != dim || x.ncols() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: x.nrows() });
            }
        }
        Ok(PointTuple { dim, factors, pure })
    }

    pub fn zero(n: &[usize], dim: usize) -> Self {
        PointTuple {
            dim,
            factors: n.iter().map(|&ni| vec![CMatrix::zeros(dim, dim); ni]).collect(),
            pure: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn factors(&self) -> &[Vec<CMatrix<T>>] {
        &self.factors
    }

    pub fn shape(&self) -> Vec<usize> {
        self.factors.iter().map(Vec::len).collect()
    }

    pub fn is_flagged_pure(&self) -> bool {
        self.pure
    }

    pub fn set_pure(&mut self, pure: bool) {
        self.pure = pure;
    }

    pub fn scaled(&self, c: T) -> Self {
        PointTuple {
            dim: self.dim,
            factors: self.factors.iter().map(|f| f.iter().map(|x| x.map(|z| z * c)).collect()).collect(),
            pure: self.pure,
        }
    }

    /// Largest `‖[X_{p,a}, X_{q,b}]‖_max` over `p ≠ q`.
    pub fn max_commutator(&self) -> T {
        let mut acc = T::zero();
        for p in 0..self.factors.len() {
            for q in p + 1..self.factors.len() {
                for a in &self.factors[p] {
                    for b in &self.factors[q] {
                        acc = acc.max(max_abs_diff(&matmul(a, b), &matmul(b, a)));
                    }
                }
            }
        }
        acc
    }

    pub fn check_commutation(&self) -> Result<()> {
        let c = to_f64(self.max_commutator());
        if c > COMMUTATION_TOLERANCE {
            return Err(Error::Commutation(c));
        }
        Ok(())
    }

    pub fn check_shape(&self, spec: &TruncationSpec) -> Result<()> {
        if self.shape() != spec.n {
            return Err(Error::InvalidSpec(format!("point shape {:?} does not match n = {:?}", self.shape(), spec.n)));
        }
        Ok(())
    }

    /// `X_{i,w} = X_{i,j_1} ⋯ X_{i,j_p}`.
    pub fn word_product(&self, i: usize, w: &Word) -> CMatrix<T> {
        let mut acc = CMatrix::identity(self.dim, self.dim);
        for &j in w.letters() {
            acc = matmul(&acc, &self.factors[i][j as usize - 1]);
        }
        acc
    }

    /// `X_α = X_{1,α_1} ⋯ X_{k,α_k}`.
    pub fn multiword_product(&self, alpha: &MultiWord) -> CMatrix<T> {
        let mut acc = CMatrix::identity(self.dim, self.dim);
        for i in 0..self.factors.len() {
            acc = matmul(&acc, &self.word_product(i, alpha.component(i)));
        }
        acc
    }

    pub fn as_tuple(&self) -> OperatorTuple<T> {
        OperatorTuple { factors: self.factors.clone() }
    }
}

impl<T: Real> CpTuple<T> for PointTuple<T> {
    fn factor_count(&self) -> usize {
        self.factors.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn phi_factor(&self, i: usize, y: &CMatrix<T>) -> Result<CMatrix<T>> {
        crate::operators::phi(&self.factors[i], y)
    }
}

/// Smallest eigenvalue of `Δ_X^p(I)` over all `0 ≤ p ≤ m`.
pub fn membership_margin<T: Real>(x: &PointTuple<T>, spec: &TruncationSpec) -> Result<T> {
    x.check_shape(spec)?;
    x.check_commutation()?;
    let mut p = vec![0usize; spec.k];
    let mut worst: Option<T> = None;
    loop {
        let lam = crate::scalar::min_hermitian_eigenvalue(&defect(x, &p)?);
        worst = Some(worst.map_or(lam, |w| w.min(lam)));
        let mut i = spec.k;
        loop {
            if i == 0 {
                return Ok(worst.expect("at least p = 0"));
            }
            i -= 1;
            p[i] += 1;
            if p[i] <= spec.m[i] {
                break;
            }
            p[i] = 0;
        }
    }
}

/// `Δ_X^p(I) ⪰ −1e−10` for every `0 ≤ p ≤ m`.
pub fn membership<T: Real>(x: &PointTuple<T>, spec: &TruncationSpec) -> Result<bool> {
    Ok(to_f64(membership_margin(x, spec)?) >= -DEFECT_TOLERANCE)
}

/// Spectral radius of `Y ↦ Σ_j X_j Y X_j*` by power iteration from `I`.
pub fn phi_spectral_radius<T: Real>(xs: &[CMatrix<T>], dim: usize) -> T {
    let tol = crate::scalar::real::<T>(1e-12);
    let mut y: CMatrix<T> = CMatrix::identity(dim, dim);
    let mut prev: Option<T> = None;
    let mut estimate = T::zero();
    for _ in 0..10_000 {
        let z = crate::operators::phi(xs, &y).expect("square tuple");
        let tz = z.trace().re;
        let ty = y.trace().re;
        if max_abs(&z) == T::zero() || tz <= T::zero() {
            return T::zero();
        }
        estimate = tz / ty;
        y = z.map(|v| v / cplx(tz, T::zero()));
        if let Some(p) = prev {
            if (estimate - p).abs() <= tol * estimate.max(T::one()) {
                break;
            }
        }
        prev = Some(estimate);
    }
    estimate
}

/// Spectral radii `ρ(Φ_{X_i})`.
pub fn purity<T: Real>(x: &PointTuple<T>) -> Vec<T> {
    x.factors.iter().map(|f| phi_spectral_radius(f, x.dim)).collect()
}

pub fn is_pure<T: Real>(x: &PointTuple<T>) -> bool {
    purity(x).into_iter().all(|r| to_f64(r) < PURITY_THRESHOLD)
}

/// `Δ_X^m(I)^{1/2}` in range coordinates: an `r × dH` matrix `S` with
/// `S*S = Δ` after clipping eigenvalues in `[−1e−10, 0)`.
pub fn defect_sqrt<T: Real>(delta: &CMatrix<T>) -> Result<CMatrix<T>> {
    let dim = delta.nrows();
    let eig = SymmetricEigen::new(hermitian_part(delta));
    let floor = crate::scalar::real::<T>(-DEFECT_TOLERANCE);
    let scale = eig.eigenvalues.iter().fold(T::one(), |acc, v| acc.max(v.abs()));
    let cut = scale * crate::scalar::real::<T>(1e-14);
    let mut rows = Vec::new();
    for (q, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam < floor {
            return Err(Error::NegativeDefect(to_f64(lam)));
        }
        if lam > cut {
            rows.push((q, lam.sqrt()));
        }
    }
    Ok(CMatrix::from_fn(rows.len(), dim, |r, h| {
        let (q, s) = rows[r];
        eig.eigenvectors[(h, q)].conj() * s
    }))
}

/// Truncated Berezin kernel `K_X h = Σ_β sqrt(b_β) e_β ⊗ Δ^{1/2} X_β* h`.
///
/// Rows are indexed by `β · r + q` (basis element, defect coordinate).
#[derive(Clone, Debug)]
pub struct BerezinKernel<T: Real> {
    pub matrix: CMatrix<T>,
    pub rank: usize,
    pub defect: CMatrix<T>,
    pub defect_sqrt: CMatrix<T>,
    pub fock_dim: usize,
}

impl<T: Real> BerezinKernel<T> {
    /// The `r × dH` block `V_β`.
    pub fn component(&self, beta: usize) -> CMatrix<T> {
        self.matrix.rows(beta * self.rank, self.rank).into_owned()
    }

    pub fn gram(&self) -> CMatrix<T> {
        matmul(&self.matrix.adjoint(), &self.matrix)
    }

    /// Largest singular value.
    pub fn norm(&self) -> T {
        let g = self.gram();
        let eig = SymmetricEigen::new(hermitian_part(&g));
        eig.eigenvalues.iter().fold(T::zero(), |acc, v| acc.max(*v)).max(T::zero()).sqrt()
    }
}

/// `X_{i,w}*` for every word of factor `i`, by `X_{i,w g_j}* = X_{i,j}* X_{i,w}*`.
fn adjoint_word_table<T: Real>(x: &PointTuple<T>, basis: &GradedBasis, i: usize) -> Vec<CMatrix<T>> {
    let f = basis.factor(i);
    let mut table: Vec<CMatrix<T>> = Vec::with_capacity(f.dim());
    for c in 0..f.dim() {
        let next = match f.right_parent(c) {
            None => CMatrix::identity(x.dim, x.dim),
            Some((parent, j)) => matmul(&x.factors[i][j - 1].adjoint(), &table[parent]),
        };
        table.push(next);
    }
    table
}

/// Largest kernel `berezin_kernel` will materialize, in complex entries.
pub const MAX_KERNEL_ENTRIES: usize = 1 << 25;

pub fn berezin_kernel<T: Real>(x: &PointTuple<T>, basis: &GradedBasis) -> Result<BerezinKernel<T>> {
    let spec = basis.spec();
    x.check_shape(spec)?;
    let delta = defect(x, &spec.m)?;
    let s = defect_sqrt(&delta)?;
    let r = s.nrows();
    let n = basis.len();
    let entries = n.saturating_mul(r).saturating_mul(x.dim);
    if entries > MAX_KERNEL_ENTRIES {
        return Err(Error::TooLarge(format!("kernel would have {entries} entries, limit {MAX_KERNEL_ENTRIES}")));
    }
    let tables: Vec<Vec<CMatrix<T>>> = (0..spec.k).map(|i| adjoint_word_table(x, basis, i)).collect();
    let mut matrix = CMatrix::zeros(n * r, x.dim);
    for beta in 0..n {
        let mut prod = CMatrix::identity(x.dim, x.dim);
        let mut weight = 1u64;
        for i in 0..spec.k {
            let c = basis.component(beta, i);
            // X_β* = X_{1,β_1}* ⋯ X_{k,β_k}* read right to left
            prod = matmul(&tables[i][c], &prod);
            weight *= weight_b(spec.m[i], basis.degree_in(beta, i));
        }
        let w = T::from_u64(weight).unwrap().sqrt();
        let v = matmul(&s, &prod).map(|z| z * w);
        matrix.rows_mut(beta * r, r).copy_from(&v);
    }
    Ok(BerezinKernel { matrix, rank: r, defect: delta, defect_sqrt: s, fock_dim: n })
}

/// `G_i(Y) = Σ_{p ≤ cap} b(m_i, p) Φ_{X_i}^p(Y)`.
fn gram_series_factor<T: Real>(x: &PointTuple<T>, i: usize, m: usize, cap: usize, y: &CMatrix<T>) -> Result<CMatrix<T>> {
    let mut power = y.clone();
    let mut out = y.clone();
    for p in 1..=cap {
        power = x.phi_factor(i, &power)?;
        if max_abs(&power) == T::zero() {
            break;
        }
        out += power.map(|z| z * T::from_u64(weight_b(m, p)).unwrap());
    }
    Ok(out)
}

fn gram_series<T: Real>(x: &PointTuple<T>, m: &[usize], caps: &[usize], y: &CMatrix<T>) -> Result<CMatrix<T>> {
    let mut out = y.clone();
    for i in (0..caps.len()).rev() {
        out = gram_series_factor(x, i, m[i], caps[i], &out)?;
    }
    Ok(out)
}

/// `K_X* K_X = Σ_{|β_i| ≤ L_i} b_β X_β Δ X_β*` evaluated as nested series
/// without forming the kernel, so `L` may be much larger than the basis.
pub fn kernel_gram<T: Real>(x: &PointTuple<T>, spec: &TruncationSpec) -> Result<CMatrix<T>> {
    x.check_shape(spec)?;
    let s = defect_sqrt(&defect(x, &spec.m)?)?;
    gram_series(x, &spec.m, &spec.l, &matmul(&s.adjoint(), &s))
}

/// `(I_𝒦 ⊗ K_X*)(T ⊗ I)(I_𝒦 ⊗ K_X) = Σ_{ω,γ} T_{ωγ} ⊗ V_ω* V_γ`.
pub fn berezin_transform<T: Real>(kernel: &BerezinKernel<T>, t: &CMatrix<T>, d: usize) -> Result<CMatrix<T>> {
    let n = kernel.fock_dim;
    if t.nrows() != d * n || t.ncols() != d * n {
        return Err(Error::DimensionMismatch { expected: d * n, got: t.nrows() });
    }
    let dh = kernel.matrix.ncols();
    let r = kernel.rank;
    // wide = [V_0 | ⋯ | V_{r-1}], tall = [V_0; ⋯; V_{r-1}], V_q = (⟨e_ω ⊗ f_q, K ·⟩)_ω.
    let wide = CMatrix::from_fn(n, r * dh, |om, col| kernel.matrix[(om * r + col / dh, col % dh)]);
    let tall_adj = CMatrix::from_fn(r * n, dh, |row, h| kernel.matrix[((row % n) * r + row / n, h)]).adjoint();
    let mut out = CMatrix::zeros(d * dh, d * dh);
    for c in 0..d {
        let y = matmul(&t.columns(c * n, n).into_owned(), &wide);
        for a in 0..d {
            let stacked = CMatrix::from_fn(r * n, dh, |row, h| y[(a * n + row % n, (row / n) * dh + h)]);
            out.view_mut((a * dh, c * dh), (dh, dh)).copy_from(&matmul(&tall_adj, &stacked));
        }
    }
    Ok(out)
}

/// Berezin transform of the operator `reconstruct(S)` on the truncation of
/// `spec`, summed along simplification classes:
/// `Σ_{(α,β)} A_{(α,β)} ⊗ X_α [Σ_u b_u X_u Δ X_u*] X_β*`, the inner sum over
/// `|u_i| ≤ L_i − max(|α_i|, |β_i|)`. Agrees with [`berezin_transform`] of
/// the reconstructed matrix and needs no basis, so `L` may be large.
pub fn toeplitz_transform_series<T: Real>(x: &PointTuple<T>, spec: &TruncationSpec, s: &Symbol<T>) -> Result<CMatrix<T>> {
    SeriesTransform::new(x, spec)?.apply(s)
}

/// [`toeplitz_transform_series`] for many symbols at one point. Middle
/// factors and word products are kept between calls.
pub struct SeriesTransform<'a, T: Real> {
    spec: TruncationSpec,
    delta: CMatrix<T>,
    mids: BTreeMap<Vec<usize>, CMatrix<T>>,
    cache: ProductCache<'a, T>,
}

impl<'a, T: Real> SeriesTransform<'a, T> {
    pub fn new(x: &'a PointTuple<T>, spec: &TruncationSpec) -> Result<Self> {
        x.check_shape(spec)?;
        let sq = defect_sqrt(&defect(x, &spec.m)?)?;
        let delta = matmul(&sq.adjoint(), &sq);
        Ok(SeriesTransform { spec: spec.clone(), delta, mids: BTreeMap::new(), cache: ProductCache::new(x) })
    }

    pub fn apply(&mut self, s: &Symbol<T>) -> Result<CMatrix<T>> {
        let spec = &self.spec;
        let x = self.cache.x;
        let caps = |alpha: &MultiWord, beta: &MultiWord| -> Result<Vec<usize>> {
            (0..spec.k)
                .map(|i| {
                    let top = alpha.component(i).len().max(beta.component(i).len());
                    spec.l[i].checked_sub(top).ok_or_else(|| Error::KeyOutOfRange(format!("({alpha}, {beta})")))
                })
                .collect()
        };
        for ((alpha, beta), _) in s.iter() {
            let c = caps(alpha, beta)?;
            if !self.mids.contains_key(&c) {
                let g = gram_series(x, &spec.m, &c, &self.delta)?;
                self.mids.insert(c, g);
            }
        }
        sandwich_sum(s, caps, &self.mids, &mut self.cache)
    }
}

/// `Σ_{(α,β)} A_{(α,β)} ⊗ X_α X_β*`.
pub fn eval_symbol<T: Real>(s: &Symbol<T>, x: &PointTuple<T>) -> Result<CMatrix<T>> {
    x.check_shape(s.spec())?;
    let mids = BTreeMap::from([(Vec::new(), CMatrix::identity(x.dim, x.dim))]);
    sandwich_sum(s, |_, _| Ok(Vec::new()), &mids, &mut ProductCache::new(x))
}

/// Memoized `X_{i,w}` (built letter by letter from the prefix) and `X_α`.
struct ProductCache<'a, T: Real> {
    x: &'a PointTuple<T>,
    words: BTreeMap<(usize, Vec<u8>), CMatrix<T>>,
    multiwords: BTreeMap<MultiWord, CMatrix<T>>,
}

impl<'a, T: Real> ProductCache<'a, T> {
    fn new(x: &'a PointTuple<T>) -> Self {
        ProductCache { x, words: BTreeMap::new(), multiwords: BTreeMap::new() }
    }

    fn word(&mut self, i: usize, letters: &[u8]) -> CMatrix<T> {
        if let Some(m) = self.words.get(&(i, letters.to_vec())) {
            return m.clone();
        }
        let m = match letters.split_last() {
            None => CMatrix::identity(self.x.dim, self.x.dim),
            Some((&j, prefix)) => matmul(&self.word(i, prefix), &self.x.factors[i][j as usize - 1]),
        };
        self.words.insert((i, letters.to_vec()), m.clone());
        m
    }

    fn multiword(&mut self, alpha: &MultiWord) -> CMatrix<T> {
        if let Some(m) = self.multiwords.get(alpha) {
            return m.clone();
        }
        let mut acc = CMatrix::identity(self.x.dim, self.x.dim);
        for i in 0..alpha.k() {
            if !alpha.component(i).is_identity() {
                acc = matmul(&acc, &self.word(i, alpha.component(i).letters()));
            }
        }
        self.multiwords.insert(alpha.clone(), acc.clone());
        acc
    }
}

/// `Σ_{(α,β)} A_{(α,β)} ⊗ X_α M_{key(α,β)} X_β*`, grouping terms by `α` and
/// middle factor so that each group costs one product per coefficient entry.
fn sandwich_sum<T: Real>(
    s: &Symbol<T>,
    key: impl Fn(&MultiWord, &MultiWord) -> Result<Vec<usize>>,
    mids: &BTreeMap<Vec<usize>, CMatrix<T>>,
    cache: &mut ProductCache<'_, T>,
) -> Result<CMatrix<T>> {
    let d = s.spec().d;
    let dh = cache.x.dim;
    let mut product = |w: &MultiWord| cache.multiword(w);
    let mut groups: BTreeMap<(MultiWord, Vec<usize>), Vec<(&MultiWord, &CMatrix<T>)>> = BTreeMap::new();
    for ((alpha, beta), a) in s.iter() {
        let k = key(alpha, beta)?;
        groups.entry((alpha.clone(), k)).or_default().push((beta, a));
    }
    let zero = C::new(T::zero(), T::zero());
    let mut out = CMatrix::zeros(d * dh, d * dh);
    for ((alpha, k), terms) in &groups {
        let left = matmul(&product(alpha), &mids[k]);
        let adjoints: Vec<CMatrix<T>> = terms.iter().map(|(beta, _)| product(beta).adjoint()).collect();
        for p in 0..d {
            for q in 0..d {
                let mut right = CMatrix::zeros(dh, dh);
                let mut any = false;
                for ((_, a), adj) in terms.iter().zip(&adjoints) {
                    let c = a[(p, q)];
                    if c != zero {
                        right += adj.map(|z| z * c);
                        any = true;
                    }
                }
                if any {
                    let block = matmul(&left, &right);
                    let mut view = out.view_mut((p * dh, q * dh), (dh, dh));
                    view += block;
                }
            }
        }
    }
    Ok(out)
}

/// `max_{i,j} ‖P_int (K_X X_{i,j}* − (W_{i,j}* ⊗ I) K_X)‖_max` with the
/// interior at guard band 1 in factor `i`.
pub fn intertwining_residual<T: Real>(kernel: &BerezinKernel<T>, x: &PointTuple<T>, basis: &GradedBasis) -> Result<T> {
    let spec = basis.spec();
    let r = kernel.rank;
    let mut res = T::zero();
    let fock = basis.spec().with_d(1);
    let fock_basis = GradedBasis::build(&fock)?;
    for i in 0..spec.k {
        let g = GuardBand::single(spec.k, i, 1);
        let interior = g.basis_indices(basis);
        for j in 1..=spec.n[i] {
            let lhs = matmul(&kernel.matrix, &x.factors[i][j - 1].adjoint());
            let w = left_creation_shift::<T>(&fock_basis, i, j)?;
            for &u in &interior {
                let (target, weight) = w.image(u).expect("interior");
                for q in 0..r {
                    for h in 0..x.dim {
                        let rhs = kernel.matrix[(target * r + q, h)] * weight;
                        res = res.max(cabs(lhs[(u * r + q, h)] - rhs));
                    }
                }
            }
        }
    }
    Ok(res)
}

/// The tuple `rW` on the truncated Fock space (`dH = dim`), flagged pure.
pub fn radial_model<T: Real>(spec: &TruncationSpec, r: T) -> Result<PointTuple<T>> {
    let rf = to_f64(r);
    if !(0.0..1.0).contains(&rf) {
        return Err(Error::RadiusOutOfRange(rf));
    }
    let basis = GradedBasis::build(&spec.with_d(1))?;
    let factors = (0..spec.k)
        .map(|i| {
            (1..=spec.n[i])
                .map(|j| left_creation_shift::<T>(&basis, i, j).map(|s| s.to_matrix().map(|z| z * r)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    PointTuple::new(basis.len(), factors, true)
}

/// The truncated weighted Bergman shift `M_z` on `A_m(𝔻)`: spec `k = n = 1`
/// and the matrix of `W`.
pub fn bergman_shift<T: Real>(m: usize, l: usize) -> Result<(TruncationSpec, CMatrix<T>)> {
    let spec = TruncationSpec::new(vec![1], vec![m], vec![l], 1)?;
    let basis = GradedBasis::build(&spec)?;
    let w = left_creation_shift::<T>(&basis, 0, 1)?.to_matrix();
    Ok((spec, w))
}

/// Louhichi-Olofsson residual
/// `‖P_int [M'* T M' − Σ_{t<m} (−1)^t C(m, t+1) M^t T M*^t] P_int‖_max` with
/// `M' = M (M*M)^{-1}` formed from the dense shift, inverting the diagonal of
/// `M*M` entrywise on its support; interior at guard band `m + 1`.
pub fn louhichi_olofsson_residual<T: Real>(m: usize, shift: &CMatrix<T>, t: &CMatrix<T>) -> T {
    let dim = shift.nrows();
    let mm = shift.adjoint() * shift;
    let inv = CMatrix::from_fn(dim, dim, |r, c| {
        if r == c && mm[(r, r)].re > T::zero() {
            cplx(T::one() / mm[(r, r)].re, T::zero())
        } else {
            cplx(T::zero(), T::zero())
        }
    });
    let dual = shift * inv;
    let lhs = dual.adjoint() * t * &dual;
    let mut rhs = CMatrix::zeros(dim, dim);
    let mut power = t.clone();
    for step in 0..m {
        if step > 0 {
            power = shift * power * shift.adjoint();
        }
        let c = T::from_u64(binomial(m, step + 1)).unwrap();
        let c = if step % 2 == 1 { -c } else { c };
        rhs += power.map(|z| z * c);
    }
    let limit = dim.saturating_sub(m + 1);
    let mut res = T::zero();
    for r in 0..limit {
        for c in 0..limit {
            res = res.max(cabs(lhs[(r, c)] - rhs[(r, c)]));
        }
    }
    res
}

/// The multiplication operators `M_{z_1}, …, M_{z_k}` on the truncated Hardy
/// space of the polydisc (`n_i = m_i = 1`).
pub fn hardy_polydisc<T: Real>(k: usize, l: usize) -> Result<(TruncationSpec, Vec<CMatrix<T>>)> {
    let spec = TruncationSpec::new(vec![1; k], vec![1; k], vec![l; k], 1)?;
    let basis = GradedBasis::build(&spec)?;
    let ops = (0..k)
        .map(|i| left_creation_shift::<T>(&basis, i, 1).map(|s| s.to_matrix()))
        .collect::<Result<Vec<_>>>()?;
    Ok((spec, ops))
}

/// `max_i ‖P_int (M_{z_i}* T M_{z_i} − T) P_int‖_max`, interior at guard band
/// 1 in factor `i`.
pub fn hardy_residual<T: Real>(basis: &GradedBasis, shifts: &[CMatrix<T>], t: &CMatrix<T>) -> T {
    let mut res = T::zero();
    for (i, mz) in shifts.iter().enumerate() {
        let g = GuardBand::single(basis.k(), i, 1);
        let x = mz.adjoint() * t * mz - t;
        res = res.max(crate::operators::interior_max_abs(basis, &g, &x));
    }
    res
}

/// Truncated series `Σ_{s ≤ L} Π_i b(m_i, s_i) (z̄_i w_i)^{s_i}` of the
/// reproducing kernel of the commutative model (`n_i = 1`).
pub fn kappa_series<T: Real>(spec: &TruncationSpec, z: &[C<T>], w: &[C<T>]) -> C<T> {
    (0..spec.k).fold(cplx(T::one(), T::zero()), |acc, i| {
        let x = z[i].conj() * w[i];
        let mut pow = cplx(T::one(), T::zero());
        let mut sum = cplx(T::zero(), T::zero());
        for s in 0..=spec.l[i] {
            sum += pow * T::from_u64(weight_b(spec.m[i], s)).unwrap();
            pow *= x;
        }
        acc * sum
    })
}

/// `κ_m(z, w) = Π_i (1 − z̄_i w_i)^{−m_i}`.
pub fn kappa<T: Real>(m: &[usize], z: &[C<T>], w: &[C<T>]) -> C<T> {
    m.iter().enumerate().fold(cplx(T::one(), T::zero()), |acc, (i, &mi)| {
        let base = cplx(T::one(), T::zero()) - z[i].conj() * w[i];
        let mut p = cplx(T::one(), T::zero());
        for _ in 0..mi {
            p *= base;
        }
        acc / p
    })
}

/// Inner product `⟨U e_s, U e_t⟩` read through monomials: the weighted Fock
/// space has orthonormal basis `sqrt(b_s) z^s`, so `⟨z^s, z^t⟩ = δ_{st}/b_s`.
pub fn monomial_norm_squared(spec: &TruncationSpec, s: &[usize]) -> f64 {
    1.0 / (0..spec.k).map(|i| weight_b(spec.m[i], s[i]) as f64).product::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::left_creation;
    use crate::scalar::{identity, kron};
    use crate::toeplitz::{extract_symbol, reconstruct};

    fn spec(n: &[usize], m: &[usize], l: &[usize], d: usize) -> TruncationSpec {
        TruncationSpec::new(n.to_vec(), m.to_vec(), l.to_vec(), d).unwrap()
    }

    fn scalar_point(v: f64) -> PointTuple<f64> {
        PointTuple::new(1, vec![vec![CMatrix::from_element(1, 1, C::new(v, 0.0))]], false).unwrap()
    }

    #[test]
    fn membership_examples() {
        let s = spec(&[2, 1], &[2, 1], &[3, 3], 1);
        assert!(membership(&PointTuple::<f64>::zero(&[2, 1], 3), &s).unwrap());
        for r in [0.0, 0.3, 0.9] {
            let x = radial_model::<f64>(&spec(&[2], &[2], &[3], 1), r).unwrap();
            assert!(membership(&x, &spec(&[2], &[2], &[3], 1)).unwrap());
        }
        let s1 = spec(&[1], &[1], &[2], 1);
        assert!(!membership(&scalar_point(1.2), &s1).unwrap());
        assert!(membership(&scalar_point(0.9), &s1).unwrap());
    }

    #[test]
    fn commutation_is_enforced() {
        let a = CMatrix::from_fn(2, 2, |r, c| C::new((r + 2 * c) as f64 * 0.1, 0.0));
        let b = CMatrix::from_fn(2, 2, |r, c| C::new(if r == c { 0.0 } else { 0.2 }, 0.0));
        let x = PointTuple::new(2, vec![vec![a], vec![b]], false).unwrap();
        let s = spec(&[1, 1], &[1, 1], &[2, 2], 1);
        assert!(matches!(membership(&x, &s), Err(Error::Commutation(_))));
    }

    #[test]
    fn purity_examples() {
        assert_eq!(purity(&PointTuple::<f64>::zero(&[2], 2)), vec![0.0]);
        assert!((purity(&scalar_point(0.5))[0] - 0.25).abs() < 1e-14);
        let x = radial_model::<f64>(&spec(&[2], &[2], &[3], 1), 0.7).unwrap();
        assert_eq!(purity(&x), vec![0.0]);
        let y = PointTuple::new(
            2,
            vec![vec![
                CMatrix::from_fn(2, 2, |r, c| C::new(0.3 * (r + c + 1) as f64, 0.1 * r as f64)),
                CMatrix::from_fn(2, 2, |r, c| C::new(0.2 * (c as f64 - r as f64), 0.05)),
            ]],
            false,
        )
        .unwrap();
        // oracle: spectral radius of the dH² × dH² matrix of Φ via its powers
        let mut m = CMatrix::<f64>::zeros(4, 4);
        for col in 0..4 {
            let mut e = CMatrix::<f64>::zeros(2, 2);
            e[(col % 2, col / 2)] = C::new(1.0, 0.0);
            let img = crate::operators::phi(&y.factors[0], &e).unwrap();
            for row in 0..4 {
                m[(row, col)] = img[(row % 2, row / 2)];
            }
        }
        let p = m.pow(200);
        let oracle = max_abs(&p).powf(1.0 / 200.0);
        assert!((purity(&y)[0] - oracle).abs() < 1e-2 * oracle);
    }

    #[test]
    fn kernel_at_zero_is_vacuum_embedding() {
        let s = spec(&[2, 1], &[2, 1], &[2, 2], 1);
        let b = GradedBasis::build(&s).unwrap();
        let x = PointTuple::<f64>::zero(&[2, 1], 3);
        let k = berezin_kernel(&x, &b).unwrap();
        assert_eq!(k.rank, 3);
        assert!(max_abs_diff(&k.gram(), &identity(3)) < 1e-14);
        for beta in 1..b.len() {
            assert_eq!(max_abs(&k.component(beta)), 0.0);
        }
        let t = CMatrix::from_fn(b.len(), b.len(), |r, c| C::new(r as f64 + 1.0, c as f64));
        let bt = berezin_transform(&k, &t, 1).unwrap();
        assert!(max_abs_diff(&bt, &identity::<f64>(3).map(|z| z * t[(0, 0)])) < 1e-14);
    }

    #[test]
    fn kernel_scalar_point_is_normalized_reproducing_kernel() {
        // K_λ ∝ κ(·, λ): components sqrt(b_s) λ̄^s (1 − |λ|²)^{m/2}
        let s = spec(&[1], &[3], &[40], 1);
        let b = GradedBasis::build(&s).unwrap();
        let lam = 0.4;
        let k = berezin_kernel(&scalar_point(lam), &b).unwrap();
        let norm = (1.0 - lam * lam).powf(1.5);
        for p in 0..10 {
            let expected = (weight_b(3, p) as f64).sqrt() * lam.powi(p as i32) * norm;
            assert!((k.matrix[(p, 0)].norm() - expected).abs() < 1e-12);
        }
        assert!((k.gram()[(0, 0)].re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn kernel_gram_matches_materialized_kernel() {
        let s = spec(&[2, 1], &[2, 2], &[3, 3], 1);
        let b = GradedBasis::build(&s).unwrap();
        let a = CMatrix::from_fn(2, 2, |r, c| C::new(0.15 * (r as f64 - c as f64 + 0.5), 0.05 * (r + c) as f64));
        let a2 = CMatrix::from_fn(2, 2, |r, c| C::new(0.1 * (r * c) as f64, -0.07));
        let x = PointTuple::new(2, vec![vec![a, a2], vec![identity::<f64>(2).map(|z| z * 0.2)]], false).unwrap();
        assert!(membership(&x, &s).unwrap());
        let k = berezin_kernel(&x, &b).unwrap();
        assert!(max_abs_diff(&k.gram(), &kernel_gram(&x, &s).unwrap()) < 1e-13);
        assert!(intertwining_residual(&k, &x, &b).unwrap() < 1e-14);
        assert!(k.norm() <= 1.0 + 1e-12);
        let big = kernel_gram(&x, &s.with_l(vec![60, 60])).unwrap();
        assert!(max_abs_diff(&big, &identity(2)) < 1e-12);
    }

    #[test]
    fn series_transform_matches_materialized() {
        let s = spec(&[2], &[2], &[4], 2);
        let b = GradedBasis::build(&s).unwrap();
        let x = PointTuple::new(
            2,
            vec![vec![
                CMatrix::from_fn(2, 2, |r, c| C::new(0.2 * (r + c) as f64, 0.1)),
                CMatrix::from_fn(2, 2, |r, c| C::new(-0.1 * r as f64, 0.15 * c as f64)),
            ]],
            false,
        )
        .unwrap();
        let mut sym = Symbol::<f64>::new(&s);
        let n = [2];
        let a = CMatrix::from_fn(2, 2, |r, c| C::new(1.0 + r as f64, c as f64 - 0.5));
        sym.insert(MultiWord::parse(&n, "1").unwrap(), MultiWord::parse(&n, "").unwrap(), a.clone()).unwrap();
        sym.insert(MultiWord::parse(&n, "").unwrap(), MultiWord::parse(&n, "21").unwrap(), a.adjoint()).unwrap();
        sym.insert(MultiWord::parse(&n, "").unwrap(), MultiWord::parse(&n, "").unwrap(), identity(2)).unwrap();
        let t = reconstruct(&b, &sym).unwrap();
        let k = berezin_kernel(&x, &b).unwrap();
        let dense = berezin_transform(&k, &t, 2).unwrap();
        let series = toeplitz_transform_series(&x, &s, &sym).unwrap();
        assert!(max_abs_diff(&dense, &series) < 1e-13);
    }

    #[test]
    fn radial_model_identities_are_exact() {
        let s = spec(&[2], &[2], &[4], 1);
        let b = GradedBasis::build(&s).unwrap();
        let x = radial_model::<f64>(&s, 0.5).unwrap();
        let k = berezin_kernel(&x, &b).unwrap();
        assert!(max_abs_diff(&k.gram(), &identity(b.len())) < 1e-12);
        assert!(intertwining_residual(&k, &x, &b).unwrap() < 1e-13);
        let w = left_creation::<f64>(&b, 0, 2).unwrap().into_matrix();
        let t = &w + w.adjoint().map(|z| z * 3.0);
        let lhs = berezin_transform(&k, &t, 1).unwrap();
        let rhs = eval_symbol(&extract_symbol(&b, &t).unwrap(), &x).unwrap();
        assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
        assert!(radial_model::<f64>(&s, 1.0).is_err());
        assert_eq!(max_abs(&radial_model::<f64>(&s, 0.0).unwrap().factors()[0][0]), 0.0);
        let nrm = SymmetricEigen::new(x.factors()[0][0].adjoint() * &x.factors()[0][0]).eigenvalues.max().sqrt();
        assert!(nrm < 0.5);
    }

    #[test]
    fn eval_symbol_examples() {
        let s = spec(&[1], &[2], &[3], 1);
        let mut sym = Symbol::<f64>::new(&s);
        sym.insert(MultiWord::parse(&[1], "1").unwrap(), MultiWord::parse(&[1], "").unwrap(), identity(1)).unwrap();
        let v = eval_symbol(&sym, &scalar_point(0.3)).unwrap();
        assert!((v[(0, 0)].re - 0.3).abs() < 1e-15);
        let s2 = spec(&[2], &[1], &[2], 2);
        let a = CMatrix::from_fn(2, 2, |r, c| C::new(r as f64, c as f64));
        let mut sym = Symbol::<f64>::new(&s2);
        sym.insert(MultiWord::identity(&[2]), MultiWord::identity(&[2]), a.clone()).unwrap();
        sym.insert(MultiWord::parse(&[2], "2").unwrap(), MultiWord::identity(&[2]), identity(2)).unwrap();
        let v = eval_symbol(&sym, &PointTuple::zero(&[2], 3)).unwrap();
        assert_eq!(v, kron(&a, &identity(3)));
    }

    #[test]
    fn classical_reductions() {
        let (s, w) = bergman_shift::<f64>(2, 8).unwrap();
        let b = GradedBasis::build(&s).unwrap();
        assert!(louhichi_olofsson_residual(2, &w, &identity(b.len())) < 1e-12);
        let diag = CMatrix::from_fn(b.len(), b.len(), |r, c| if r == c { C::new(2f64.powi(r as i32), 0.0) } else { C::new(0.0, 0.0) });
        assert!(louhichi_olofsson_residual(2, &w, &diag) > 0.1);
        let (_, w1) = bergman_shift::<f64>(1, 6).unwrap();
        let t = &w1 + w1.adjoint();
        assert!(louhichi_olofsson_residual(1, &w1, &t) < 1e-14);

        let (hs, mz) = hardy_polydisc::<f64>(2, 4).unwrap();
        let hb = GradedBasis::build(&hs).unwrap();
        assert!(hardy_residual(&hb, &mz, &identity(hb.len())) < 1e-14);
        let t = &mz[0] + mz[1].adjoint();
        assert!(hardy_residual(&hb, &mz, &t) < 1e-14);
        let bad = &mz[0] * mz[0].adjoint();
        assert!(hardy_residual(&hb, &mz, &bad) > 0.5);
    }

    #[test]
    fn reproducing_kernel_reduction() {
        let s = spec(&[1, 1], &[2, 3], &[60, 60], 1);
        let z = [C::new(0.3, -0.2), C::new(0.1, 0.25)];
        let w = [C::new(-0.2, 0.1), C::new(0.35, 0.05)];
        let series = kappa_series(&s, &z, &w);
        let closed = kappa(&s.m, &z, &w);
        assert!((series - closed).norm() < 1e-12);
        // orthonormal basis sqrt(b_s) z^s: monomial norms are 1/b_s
        assert!((monomial_norm_squared(&s, &[2, 1]) - 1.0 / (3.0 * 3.0)).abs() < 1e-15);
    }
}
