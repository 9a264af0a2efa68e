//! Weighted multi-Toeplitz structure: symbols, the τ-criterion, Brown-Halmos
//! residuals, multi-homogeneous parts and Fejér sums.

use std::collections::BTreeMap;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::SqrtRatio;
use crate::fock::{weight_b, FactorWords, GradedBasis, TruncationSpec};
use crate::operators::{binomial, block, cauchy_dual_shift, interior_max_abs, psi_bh, GuardBand};
use crate::scalar::{cabs, max_abs, max_abs_diff, phase, CMatrix, Real, C};
use crate::words::{is_reduced_pair, DegreeVector, MultiWord};

/// A key `(α, β)` of the reduced index set.
pub type SymbolKey = (MultiWord, MultiWord);

/// Finite Fourier representation `Σ A_{(α,β)} ⊗ W_α W_β*`.
#[derive(Clone, Debug, PartialEq)]
pub struct Symbol<T: Real> {
    spec: TruncationSpec,
    coeffs: BTreeMap<SymbolKey, CMatrix<T>>,
}

impl<T: Real> Symbol<T> {
    pub fn new(spec: &TruncationSpec) -> Self {
        Symbol { spec: spec.clone(), coeffs: BTreeMap::new() }
    }

    /// `{(g_0, g_0) ↦ I_d}`.
    pub fn identity(spec: &TruncationSpec) -> Self {
        let mut s = Symbol::new(spec);
        let vac = MultiWord::identity(&spec.n);
        s.coeffs.insert((vac.clone(), vac), CMatrix::identity(spec.d, spec.d));
        s
    }

    pub fn spec(&self) -> &TruncationSpec {
        &self.spec
    }

    pub fn validate_key(&self, alpha: &MultiWord, beta: &MultiWord) -> Result<()> {
        let spec = &self.spec;
        let shape_ok = |w: &MultiWord| {
            w.k() == spec.k && (0..spec.k).all(|i| w.component(i).alphabet() == spec.n[i])
        };
        if !shape_ok(alpha) || !shape_ok(beta) {
            return Err(Error::KeyOutOfRange(format!("({alpha}, {beta}) does not match the spec shape")));
        }
        if !is_reduced_pair(alpha, beta) {
            return Err(Error::NotReduced(format!("({alpha}, {beta})")));
        }
        if (0..spec.k).any(|i| alpha.component(i).len() + beta.component(i).len() > spec.l[i]) {
            return Err(Error::KeyOutOfRange(format!("({alpha}, {beta})")));
        }
        Ok(())
    }

    pub fn insert(&mut self, alpha: MultiWord, beta: MultiWord, a: CMatrix<T>) -> Result<()> {
        self.validate_key(&alpha, &beta)?;
        if a.nrows() != self.spec.d || a.ncols() != self.spec.d {
            return Err(Error::DimensionMismatch { expected: self.spec.d, got: a.nrows() });
        }
        self.coeffs.insert((alpha, beta), a);
        Ok(())
    }

    pub fn get(&self, alpha: &MultiWord, beta: &MultiWord) -> Option<&CMatrix<T>> {
        self.coeffs.get(&(alpha.clone(), beta.clone()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SymbolKey, &CMatrix<T>)> {
        self.coeffs.iter()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Largest entry difference; absent keys count as zero.
    pub fn max_abs_diff(&self, other: &Symbol<T>) -> T {
        let zero = CMatrix::zeros(self.spec.d, self.spec.d);
        let mut acc = T::zero();
        for (key, a) in &self.coeffs {
            let b = other.coeffs.get(key).unwrap_or(&zero);
            acc = acc.max(max_abs_diff(a, b));
        }
        for (key, b) in &other.coeffs {
            if !self.coeffs.contains_key(key) {
                acc = acc.max(max_abs(b));
            }
        }
        acc
    }

    /// Whether every key satisfies `|α_i| + |β_i| ≤ L_i − g_i`.
    pub fn supported_in(&self, g: &GuardBand) -> bool {
        self.coeffs.keys().all(|(a, b)| {
            (0..self.spec.k).all(|i| a.component(i).len() + b.component(i).len() + g.g[i] <= self.spec.l[i])
        })
    }
}

fn b_real<T: Real>(m: usize, len: usize) -> T {
    T::from_u64(weight_b(m, len)).expect("representable")
}

/// Nonzero entries `(ω, γ, ⟨W_α W_β* e_γ, e_ω⟩)` of a monomial on basis
/// indices; `(α, β)` must be reduced and fit in the truncation.
pub fn monomial_entries<T: Real>(basis: &GradedBasis, alpha: &MultiWord, beta: &MultiWord) -> Vec<(usize, usize, T)> {
    let spec = basis.spec();
    let per_factor: Vec<Vec<(usize, usize, T)>> = (0..spec.k)
        .map(|i| {
            let f = basis.factor(i);
            let (a, b) = (alpha.component(i), beta.component(i));
            let top = a.len().max(b.len());
            if top > spec.l[i] {
                return Vec::new();
            }
            let m = spec.m[i];
            (0..f.dim())
                .filter(|&u| f.len_of(u) + top <= spec.l[i])
                .map(|u| {
                    let word = f.word(u);
                    let om = f.index_of(&a.concat(word).expect("alphabet")).expect("fits");
                    let ga = f.index_of(&b.concat(word).expect("alphabet")).expect("fits");
                    let w = b_real::<T>(m, word.len())
                        / (b_real::<T>(m, word.len() + a.len()) * b_real::<T>(m, word.len() + b.len())).sqrt();
                    (om, ga, w)
                })
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    let mut cur = vec![0usize; spec.k];
    if per_factor.iter().any(Vec::is_empty) {
        return out;
    }
    let mut rows = vec![0usize; spec.k];
    let mut cols = vec![0usize; spec.k];
    'outer: loop {
        let mut w = T::one();
        for i in 0..spec.k {
            let (r, c, wi) = per_factor[i][cur[i]];
            rows[i] = r;
            cols[i] = c;
            w *= wi;
        }
        out.push((basis.index_of_components(&rows), basis.index_of_components(&cols), w));
        for i in (0..spec.k).rev() {
            cur[i] += 1;
            if cur[i] < per_factor[i].len() {
                continue 'outer;
            }
            cur[i] = 0;
        }
        break;
    }
    out
}

/// `C ⊗ W_α W_β*` as a dense matrix.
pub fn monomial_operator<T: Real>(
    basis: &GradedBasis,
    alpha: &MultiWord,
    beta: &MultiWord,
    c: &CMatrix<T>,
) -> Result<CMatrix<T>> {
    let mut s = Symbol::new(basis.spec());
    s.insert(alpha.clone(), beta.clone(), c.clone())?;
    reconstruct(basis, &s)
}

/// `Σ_{(α,β)} A_{(α,β)} ⊗ W_α W_β*` on the truncated model space.
pub fn reconstruct<T: Real>(basis: &GradedBasis, s: &Symbol<T>) -> Result<CMatrix<T>> {
    let spec = basis.spec();
    if s.spec() != spec {
        return Err(Error::InvalidSpec("symbol and basis use different specs".into()));
    }
    let n = basis.len();
    let d = spec.d;
    let mut out = CMatrix::zeros(d * n, d * n);
    for ((alpha, beta), a) in s.iter() {
        for (om, ga, w) in monomial_entries::<T>(basis, alpha, beta) {
            for p in 0..d {
                for q in 0..d {
                    out[(p * n + om, q * n + ga)] += a[(p, q)] * w;
                }
            }
        }
    }
    Ok(out)
}

fn check_square<T: Real>(basis: &GradedBasis, t: &CMatrix<T>) -> Result<()> {
    let dim = basis.model_dim();
    if t.nrows() != dim || t.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: if t.nrows() != dim { t.nrows() } else { t.ncols() } });
    }
    Ok(())
}

/// Fock weight `Π_i b(m_i, |ω_i|)` of a basis element.
pub fn basis_weight(basis: &GradedBasis, idx: usize) -> u64 {
    let spec = basis.spec();
    (0..spec.k).map(|i| weight_b(spec.m[i], basis.degree_in(idx, i))).product()
}

/// Reads `A_{(α,β)} = τ_{(α,β)}^{-1} ⟨T(· ⊗ e_β), · ⊗ e_α⟩` for every reduced
/// pair in the truncation; all-zero blocks are dropped.
pub fn extract_symbol<T: Real>(basis: &GradedBasis, t: &CMatrix<T>) -> Result<Symbol<T>> {
    check_square(basis, t)?;
    let spec = basis.spec();
    let n = basis.len();
    let mut s = Symbol::new(spec);
    for a in 0..n {
        for b in 0..n {
            let reduced = (0..spec.k).all(|i| basis.degree_in(a, i) == 0 || basis.degree_in(b, i) == 0);
            if !reduced {
                continue;
            }
            let blk = block(t, spec.d, n, a, b);
            if blk.iter().all(|z| z.re == T::zero() && z.im == T::zero()) {
                continue;
            }
            let inv_tau = (0..spec.k)
                .map(|i| b_real::<T>(spec.m[i], basis.degree_in(a, i).max(basis.degree_in(b, i))).sqrt())
                .fold(T::one(), |acc, x| acc * x);
            s.coeffs.insert((basis.multiword(a), basis.multiword(b)), blk.map(|z| z * inv_tau));
        }
    }
    Ok(s)
}

/// Outcome of the entrywise τ- or μ-criterion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToeplitzReport {
    pub is_toeplitz: bool,
    pub max_offdomain_entry: f64,
    pub max_ratio_residual: f64,
    pub witness: Option<(String, String)>,
    pub tolerance: f64,
}

/// Per-factor comparability classes: representative pair and exact weight
/// ratios for every pair of factor words.
#[derive(Clone, Debug)]
struct FactorClasses {
    dim: usize,
    rep: Vec<Option<(u32, u32)>>,
    /// Exact per-factor ratios, rounded once.
    tau_real: Vec<f64>,
    mu_real: Vec<f64>,
}

impl FactorClasses {
    fn new(f: &FactorWords, m: usize) -> Self {
        let dim = f.dim();
        let mut rep = vec![None; dim * dim];
        let mut tau_real = vec![1.0; dim * dim];
        let mut mu_real = vec![1.0; dim * dim];
        for a in 0..dim {
            for b in 0..dim {
                let (wa, wb) = (f.word(a), f.word(b));
                let (sigma, beta) = if let Some(q) = wa.right_quotient(wb) {
                    (f.index_of(&q).unwrap(), 0)
                } else if let Some(q) = wb.right_quotient(wa) {
                    (0, f.index_of(&q).unwrap())
                } else {
                    continue;
                };
                let at = a * dim + b;
                rep[at] = Some((sigma as u32, beta as u32));
                let (la, lb) = (wa.len(), wb.len());
                let rep_top = f.len_of(sigma).max(f.len_of(beta));
                let lo = weight_b(m, la.min(lb));
                let hi = weight_b(m, la.max(lb));
                let rep_b = weight_b(m, rep_top);
                tau_real[at] = (SqrtRatio::from_fraction(lo, hi) * SqrtRatio::from_fraction(rep_b, 1)).to_f64();
                let mu = Ratio::new(rep_b, hi);
                mu_real[at] = *mu.numer() as f64 / *mu.denom() as f64;
            }
        }
        FactorClasses { dim, rep, tau_real, mu_real }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Weighting {
    Tau,
    Mu,
}

/// Reusable entrywise checker for the τ-criterion (weighted multi-Toeplitz)
/// and the μ-criterion (weighted Fock space picture).
#[derive(Clone, Debug)]
pub struct ToeplitzChecker {
    basis: GradedBasis,
    classes: Vec<FactorClasses>,
}

impl ToeplitzChecker {
    pub fn new(basis: &GradedBasis) -> Self {
        let spec = basis.spec();
        let classes = (0..spec.k).map(|i| FactorClasses::new(basis.factor(i), spec.m[i])).collect();
        ToeplitzChecker { basis: basis.clone(), classes }
    }

    pub fn basis(&self) -> &GradedBasis {
        &self.basis
    }

    /// Entrywise τ-criterion on `T`.
    pub fn check_tau<T: Real>(&self, t: &CMatrix<T>, tol: f64) -> Result<ToeplitzReport> {
        check_square(&self.basis, t)?;
        Ok(self.scan(|r, c| t[(r, c)], Weighting::Tau, tol))
    }

    /// μ-criterion on the Z-basis coefficient matrix `T'` of the conjugated
    /// operator: the Gram entries `T'_{ωγ} / b_ω` must be μ-proportional.
    pub fn check_mu<T: Real>(&self, t_prime: &CMatrix<T>, tol: f64) -> Result<ToeplitzReport> {
        check_square(&self.basis, t_prime)?;
        let n = self.basis.len();
        let inv_b: Vec<T> = (0..n).map(|idx| T::one() / T::from_u64(basis_weight(&self.basis, idx)).unwrap()).collect();
        Ok(self.scan(|r, c| t_prime[(r, c)] * inv_b[r % n], Weighting::Mu, tol))
    }

    fn scan<T: Real>(&self, entry: impl Fn(usize, usize) -> C<T>, weighting: Weighting, tol: f64) -> ToeplitzReport {
        let basis = &self.basis;
        let k = basis.k();
        let n = basis.len();
        let d = basis.spec().d;
        let mut off = 0.0f64;
        let mut ratio_res = 0.0f64;
        let mut worst: Option<(f64, usize, usize)> = None;
        let mut rep_rows = vec![0usize; k];
        let mut rep_cols = vec![0usize; k];
        for om in 0..n {
            let oc = basis.components(om);
            for ga in 0..n {
                let gc = basis.components(ga);
                let mut comparable = true;
                let mut ratio = 1.0f64;
                for i in 0..k {
                    let cl = &self.classes[i];
                    let at = oc[i] as usize * cl.dim + gc[i] as usize;
                    match cl.rep[at] {
                        Some((s, b)) => {
                            rep_rows[i] = s as usize;
                            rep_cols[i] = b as usize;
                            ratio *= match weighting {
                                Weighting::Tau => cl.tau_real[at],
                                Weighting::Mu => cl.mu_real[at],
                            };
                        }
                        None => {
                            comparable = false;
                            break;
                        }
                    }
                }
                let mut local = 0.0f64;
                if comparable {
                    let ratio = T::from_f64(ratio).unwrap();
                    let rs = basis.index_of_components(&rep_rows);
                    let rb = basis.index_of_components(&rep_cols);
                    for p in 0..d {
                        for q in 0..d {
                            let z = entry(p * n + om, q * n + ga) - entry(p * n + rs, q * n + rb) * ratio;
                            local = local.max(cabs(z).to_f64().unwrap_or(f64::NAN));
                        }
                    }
                    ratio_res = ratio_res.max(local);
                } else {
                    for p in 0..d {
                        for q in 0..d {
                            local = local.max(cabs(entry(p * n + om, q * n + ga)).to_f64().unwrap_or(f64::NAN));
                        }
                    }
                    off = off.max(local);
                }
                if local > tol && worst.is_none_or(|(w, _, _)| local > w) {
                    worst = Some((local, om, ga));
                }
            }
        }
        ToeplitzReport {
            is_toeplitz: off <= tol && ratio_res <= tol,
            max_offdomain_entry: off,
            max_ratio_residual: ratio_res,
            witness: worst.map(|(_, om, ga)| (basis.multiword(om).to_string(), basis.multiword(ga).to_string())),
            tolerance: tol,
        }
    }
}

pub fn is_weighted_multi_toeplitz<T: Real>(basis: &GradedBasis, t: &CMatrix<T>, tol: f64) -> Result<ToeplitzReport> {
    ToeplitzChecker::new(basis).check_tau(t, tol)
}

/// `C = U T U*` written in the orthogonal basis `Z_ω` of the weighted Fock
/// space: `C_{ωγ} = sqrt(b_ω / b_γ) T_{ωγ}`.
pub fn to_weighted_fock_conjugate<T: Real>(basis: &GradedBasis, t: &CMatrix<T>) -> Result<CMatrix<T>> {
    check_square(basis, t)?;
    let n = basis.len();
    let sq: Vec<T> = (0..n).map(|idx| T::from_u64(basis_weight(basis, idx)).unwrap().sqrt()).collect();
    Ok(CMatrix::from_fn(t.nrows(), t.ncols(), |r, c| t[(r, c)] * (sq[r % n] / sq[c % n])))
}

pub fn mu_criterion<T: Real>(basis: &GradedBasis, t_prime: &CMatrix<T>, tol: f64) -> Result<ToeplitzReport> {
    ToeplitzChecker::new(basis).check_mu(t_prime, tol)
}

/// Guard band `m_i + 1` in factor `i`, zero elsewhere.
pub fn bh_guard_band(spec: &TruncationSpec, i: usize) -> GuardBand {
    GuardBand::single(spec.k, i, (spec.m[i] + 1).min(spec.l[i]))
}

/// Walks `t` letters off the right end of factor word `c`; returns the
/// stripped index and a code for the removed suffix.
fn strip_suffix(f: &FactorWords, mut c: usize, t: usize) -> Option<(usize, usize)> {
    let mut code = 0usize;
    let mut scale = 1usize;
    for _ in 0..t {
        let (parent, letter) = f.right_parent(c)?;
        code += (letter - 1) * scale;
        scale *= f.n();
        c = parent;
    }
    Some((c, code))
}

/// Per-factor Brown-Halmos residual
/// `max_{j,l} ‖P_int[(Λ'_{i,j})* T Λ'_{i,l} − δ_{jl} Ψ_i(T)]P_int‖_max`
/// with the interior at guard band `m_i + 1` in factor `i`, evaluated
/// entrywise.
pub fn brown_halmos_residual<T: Real>(basis: &GradedBasis, t: &CMatrix<T>) -> Result<Vec<T>> {
    check_square(basis, t)?;
    let spec = basis.spec();
    let n = basis.len();
    let d = spec.d;
    let mut out = Vec::with_capacity(spec.k);
    for i in 0..spec.k {
        let m = spec.m[i];
        let ni = spec.n[i];
        let f = basis.factor(i);
        let interior = bh_guard_band(spec, i).basis_indices(basis);
        let cw = |p: usize| -> T {
            T::from_usize(m + p).unwrap() / T::from_usize(p + 1).unwrap() * (b_real::<T>(m, p) / b_real::<T>(m, p + 1)).sqrt()
        };
        // stripped indices and suffix codes for t = 0..m-1
        let strips: Vec<Vec<Option<(usize, usize, T)>>> = interior
            .iter()
            .map(|&idx| {
                let c = basis.component(idx, i);
                let p = f.len_of(c);
                (0..m)
                    .map(|tt| {
                        strip_suffix(f, c, tt).map(|(s, code)| {
                            let w = (b_real::<T>(m, p - tt) / b_real::<T>(m, p)).sqrt();
                            (basis.replace_component(idx, i, s), code, w)
                        })
                    })
                    .collect()
            })
            .collect();
        let exts: Vec<Vec<usize>> = interior
            .iter()
            .map(|&idx| (1..=ni).map(|j| basis.right_target(idx, i, j).expect("interior")).collect())
            .collect();
        let coeffs: Vec<T> = (0..m)
            .map(|tt| {
                let c = T::from_u64(binomial(m, tt + 1)).unwrap();
                if tt % 2 == 1 { -c } else { c }
            })
            .collect();
        let mut res = T::zero();
        for (a, &om) in interior.iter().enumerate() {
            let co = cw(basis.degree_in(om, i));
            for (b, &ga) in interior.iter().enumerate() {
                let cg = cw(basis.degree_in(ga, i));
                for p in 0..d {
                    for q in 0..d {
                        let mut psi = C::new(T::zero(), T::zero());
                        for tt in 0..m {
                            if let (Some((so, ko, wo)), Some((sg, kg, wg))) = (strips[a][tt], strips[b][tt]) {
                                if ko == kg {
                                    psi += t[(p * n + so, q * n + sg)] * (coeffs[tt] * wo * wg);
                                }
                            }
                        }
                        for j in 0..ni {
                            for l in 0..ni {
                                let lhs = t[(p * n + exts[a][j], q * n + exts[b][l])] * (co * cg);
                                let z = if j == l { lhs - psi } else { lhs };
                                res = res.max(cabs(z));
                            }
                        }
                    }
                }
            }
        }
        out.push(res);
    }
    Ok(out)
}

/// The same residual computed from explicit matrix products
/// `(Λ'_{i,j})* T Λ'_{i,l}` and the dense `Ψ_i`.
pub fn brown_halmos_residual_dense<T: Real>(basis: &GradedBasis, t: &CMatrix<T>) -> Result<Vec<T>> {
    check_square(basis, t)?;
    let spec = basis.spec();
    let mut out = Vec::with_capacity(spec.k);
    for i in 0..spec.k {
        let g = bh_guard_band(spec, i);
        let psi = psi_bh(basis, i, t)?;
        let duals: Vec<_> = (1..=spec.n[i]).map(|j| cauchy_dual_shift::<T>(basis, i, j)).collect::<Result<_>>()?;
        let mut res = T::zero();
        for (j, dj) in duals.iter().enumerate() {
            let left = dj.left_mul_adjoint(t);
            for (l, dl) in duals.iter().enumerate() {
                let mut lhs = dl.right_mul(&left);
                if j == l {
                    lhs -= &psi;
                }
                res = res.max(interior_max_abs(basis, &g, &lhs));
            }
        }
        out.push(res);
    }
    Ok(out)
}

/// `T_s = Σ_p P_{p+s} T P_p`.
pub fn homogeneous_part_projection<T: Real>(basis: &GradedBasis, t: &CMatrix<T>, s: &DegreeVector) -> Result<CMatrix<T>> {
    let mut out = CMatrix::zeros(t.nrows(), t.ncols());
    homogeneous_part_projection_into(basis, t, s, &mut out)?;
    Ok(out)
}

/// [`homogeneous_part_projection`] written into `out`.
pub fn homogeneous_part_projection_into<T: Real>(
    basis: &GradedBasis,
    t: &CMatrix<T>,
    s: &DegreeVector,
    out: &mut CMatrix<T>,
) -> Result<()> {
    check_square(basis, t)?;
    check_square(basis, out)?;
    if s.k() != basis.k() {
        return Err(Error::DimensionMismatch { expected: basis.k(), got: s.k() });
    }
    let n = basis.len();
    let d = basis.spec().d;
    out.fill(C::new(T::zero(), T::zero()));
    for (p, cols) in basis.blocks() {
        let target = DegreeVector(p.iter().zip(&s.0).map(|(&a, &b)| a as i64 + b).collect());
        let rows = basis.degree_indices(&target);
        if rows.is_empty() {
            continue;
        }
        for a in 0..d {
            for b in 0..d {
                for c in cols.clone() {
                    for r in rows.clone() {
                        out[(a * n + r, b * n + c)] = t[(a * n + r, b * n + c)];
                    }
                }
            }
        }
    }
    Ok(())
}

/// Torus average `(1/ΠN_i) Σ_θ e^{−i s·θ} Γ(θ) T Γ(θ)*` over the uniform
/// grid. `Γ(θ)` is constant on degree blocks, so the average is accumulated
/// as one scalar per pair of blocks.
pub fn homogeneous_part_quadrature<T: Real>(
    basis: &GradedBasis,
    t: &CMatrix<T>,
    s: &DegreeVector,
    samples: &[usize],
) -> Result<CMatrix<T>> {
    let mut out = CMatrix::zeros(t.nrows(), t.ncols());
    homogeneous_part_quadrature_into(basis, t, s, samples, &mut out)?;
    Ok(out)
}

/// [`homogeneous_part_quadrature`] written into `out`; every entry is
/// overwritten.
pub fn homogeneous_part_quadrature_into<T: Real>(
    basis: &GradedBasis,
    t: &CMatrix<T>,
    s: &DegreeVector,
    samples: &[usize],
    out: &mut CMatrix<T>,
) -> Result<()> {
    check_square(basis, t)?;
    check_square(basis, out)?;
    let spec = basis.spec();
    if s.k() != spec.k || samples.len() != spec.k {
        return Err(Error::DimensionMismatch { expected: spec.k, got: samples.len() });
    }
    for i in 0..spec.k {
        let needed = 2 * spec.l[i] + 1;
        if samples[i] < needed {
            return Err(Error::Undersampled { factor: i, needed, got: samples[i] });
        }
    }
    let two_pi = T::two_pi();
    let total: usize = samples.iter().product();
    let norm = T::one() / T::from_usize(total).unwrap();
    let grid: Vec<Vec<T>> = (0..total)
        .map(|mut flat| {
            (0..spec.k)
                .rev()
                .map(|i| {
                    let q = flat % samples[i];
                    flat /= samples[i];
                    two_pi * T::from_usize(q).unwrap() / T::from_usize(samples[i]).unwrap()
                })
                .collect::<Vec<T>>()
                .into_iter()
                .rev()
                .collect()
        })
        .collect();
    let n = basis.len();
    let d = spec.d;
    for (p, rows) in basis.blocks() {
        for (q, cols) in basis.blocks() {
            let mut coeff = C::new(T::zero(), T::zero());
            for theta in &grid {
                let mut angle = T::zero();
                for i in 0..spec.k {
                    let e = p[i] as i64 - q[i] as i64 - s.0[i];
                    angle += theta[i] * T::from_i64(e).unwrap();
                }
                coeff += phase(angle);
            }
            coeff *= norm;
            for a in 0..d {
                for b in 0..d {
                    for c in cols.clone() {
                        for r in rows.clone() {
                            out[(a * n + r, b * n + c)] = t[(a * n + r, b * n + c)] * coeff;
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// `Σ_{|s_j| ≤ N_j} w(s) T_s` with `w` given per degree shift; the parts
/// `T_s` have disjoint supports, so each block pair is scaled once.
fn weighted_part_sum<T: Real>(basis: &GradedBasis, t: &CMatrix<T>, weight: impl Fn(&[i64]) -> Option<T>) -> Result<CMatrix<T>> {
    check_square(basis, t)?;
    let n = basis.len();
    let d = basis.spec().d;
    let mut out = CMatrix::zeros(t.nrows(), t.ncols());
    let mut shift = vec![0i64; basis.k()];
    for (p, rows) in basis.blocks() {
        for (q, cols) in basis.blocks() {
            for i in 0..basis.k() {
                shift[i] = p[i] as i64 - q[i] as i64;
            }
            let Some(w) = weight(&shift) else { continue };
            for a in 0..d {
                for b in 0..d {
                    for c in cols.clone() {
                        for r in rows.clone() {
                            out[(a * n + r, b * n + c)] = t[(a * n + r, b * n + c)] * w;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

fn check_orders(basis: &GradedBasis, orders: &[usize]) -> Result<()> {
    if orders.len() != basis.k() {
        return Err(Error::DimensionMismatch { expected: basis.k(), got: orders.len() });
    }
    Ok(())
}

/// Cesàro means `Σ_{|s_j| ≤ N_j} Π_j (1 − |s_j|/(N_j+1)) T_s`.
pub fn fejer_sum<T: Real>(basis: &GradedBasis, t: &CMatrix<T>, orders: &[usize]) -> Result<CMatrix<T>> {
    check_orders(basis, orders)?;
    weighted_part_sum(basis, t, |s| {
        let mut w = T::one();
        for (j, &sj) in s.iter().enumerate() {
            let a = sj.unsigned_abs() as usize;
            if a > orders[j] {
                return None;
            }
            w *= T::one() - T::from_usize(a).unwrap() / T::from_usize(orders[j] + 1).unwrap();
        }
        Some(w)
    })
}

/// Plain partial sums `Σ_{|s_j| ≤ N_j} T_s`.
pub fn partial_sum<T: Real>(basis: &GradedBasis, t: &CMatrix<T>, orders: &[usize]) -> Result<CMatrix<T>> {
    check_orders(basis, orders)?;
    weighted_part_sum(basis, t, |s| {
        s.iter().zip(orders).all(|(&sj, &nj)| sj.unsigned_abs() as usize <= nj).then(T::one)
    })
}

/// Every degree shift `s` with `|s_i| ≤ L_i`, in lexicographic order.
pub fn all_shifts(spec: &TruncationSpec) -> Vec<DegreeVector> {
    let mut out = vec![Vec::new()];
    for i in 0..spec.k {
        let l = spec.l[i] as i64;
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<i64>| {
                (-l..=l).map(move |v| {
                    let mut next = prefix.clone();
                    next.push(v);
                    next
                })
            })
            .collect();
    }
    out.into_iter().map(DegreeVector).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{left_creation, word_operator, Side, ShiftTuple, CpTuple};
    use crate::scalar::identity;

    fn basis(n: &[usize], m: &[usize], l: &[usize], d: usize) -> GradedBasis {
        GradedBasis::build(&TruncationSpec::new(n.to_vec(), m.to_vec(), l.to_vec(), d).unwrap()).unwrap()
    }

    fn mw(b: &GradedBasis, s: &str) -> MultiWord {
        MultiWord::parse(&b.spec().n, s).unwrap()
    }

    fn pseudo(dim: usize, seed: u64) -> CMatrix<f64> {
        let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        CMatrix::from_fn(dim, dim, |_, _| {
            let mut next = || {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((x >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            };
            C::new(next(), next())
        })
    }

    #[test]
    fn symbol_key_validation() {
        let b = basis(&[2, 1], &[1, 1], &[2, 2], 1);
        let mut s = Symbol::<f64>::new(b.spec());
        let one = CMatrix::identity(1, 1);
        assert!(s.insert(mw(&b, "1/"), mw(&b, "2/"), one.clone()).is_err());
        assert!(s.insert(mw(&b, "121/"), mw(&b, "/"), one.clone()).is_err());
        assert!(s.insert(mw(&b, "12/"), mw(&b, "/1"), one.clone()).is_ok());
        assert!(s.insert(mw(&b, "/"), mw(&b, "/"), CMatrix::identity(2, 2)).is_err());
    }

    #[test]
    fn reconstruct_examples() {
        let b = basis(&[2, 1], &[2, 1], &[2, 2], 2);
        assert_eq!(reconstruct(&b, &Symbol::<f64>::identity(b.spec())).unwrap(), identity(b.model_dim()));

        let b = basis(&[1], &[2], &[4], 1);
        let mut s = Symbol::<f64>::new(b.spec());
        s.insert(mw(&b, "1"), mw(&b, ""), CMatrix::identity(1, 1)).unwrap();
        assert!(max_abs_diff(&reconstruct(&b, &s).unwrap(), left_creation::<f64>(&b, 0, 1).unwrap().matrix()) < 1e-15);
    }

    #[test]
    fn monomial_matches_word_products() {
        let b = basis(&[2, 2], &[2, 3], &[3, 2], 1);
        let keys = [("12/", "/1"), ("/2", "1/"), ("2/21", "/"), ("/", "21/2")];
        for (a, bb) in keys {
            let (alpha, beta) = (mw(&b, a), mw(&b, bb));
            let mut dense = identity::<f64>(b.model_dim());
            for i in 0..2 {
                dense = dense * word_operator::<f64>(&b, i, alpha.component(i), Side::Left).unwrap().matrix();
            }
            for i in 0..2 {
                dense = dense * word_operator::<f64>(&b, i, beta.component(i), Side::Left).unwrap().matrix().adjoint();
            }
            let ours = monomial_operator(&b, &alpha, &beta, &CMatrix::identity(1, 1)).unwrap();
            assert!(max_abs_diff(&ours, &dense) < 1e-14, "{a} {bb}");
        }
    }

    #[test]
    fn matching_condition_and_orthogonality() {
        let b = basis(&[2], &[2], &[4], 1);
        let keys: Vec<(MultiWord, MultiWord)> = (0..b.len())
            .flat_map(|x| (0..b.len()).map(move |y| (x, y)))
            .filter(|&(x, y)| b.degree_in(x, 0) == 0 || b.degree_in(y, 0) == 0)
            .map(|(x, y)| (b.multiword(x), b.multiword(y)))
            .collect();
        let mats: Vec<CMatrix<f64>> = keys
            .iter()
            .map(|(a, bb)| monomial_operator(&b, a, bb, &CMatrix::identity(1, 1)).unwrap())
            .collect();
        for ga in 0..b.len() {
            for (x, mx) in mats.iter().enumerate() {
                for my in mats.iter().skip(x + 1) {
                    let ip: C<f64> = mx.column(ga).iter().zip(my.column(ga).iter()).map(|(p, q)| p.conj() * q).sum();
                    assert!(ip.norm() < 1e-12);
                }
                for om in 0..b.len() {
                    let v = mx[(om, ga)].re;
                    let (wo, wg) = (b.multiword(om), b.multiword(ga));
                    let matches = crate::words::comparable(&wo, &wg)
                        && crate::words::simplify(&wo, &wg).unwrap() == keys[x];
                    assert_eq!(v != 0.0, matches);
                    if matches {
                        assert!((v - crate::fock::tau::<f64>(b.spec(), &wo, &wg).unwrap()).abs() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn extract_examples() {
        let b = basis(&[2, 1], &[2, 1], &[2, 2], 2);
        let s = extract_symbol(&b, &identity::<f64>(b.model_dim())).unwrap();
        assert_eq!(s, Symbol::identity(b.spec()));

        let b = basis(&[1], &[2], &[4], 1);
        let w = left_creation::<f64>(&b, 0, 1).unwrap().into_matrix().map(|z| z * 2.5);
        let s = extract_symbol(&b, &w).unwrap();
        assert_eq!(s.len(), 1);
        let a = s.get(&mw(&b, "1"), &mw(&b, "")).unwrap();
        assert!((a[(0, 0)].re - 2.5).abs() < 1e-15);
    }

    #[test]
    fn toeplitz_check_examples() {
        let b = basis(&[2, 1], &[2, 2], &[3, 2], 2);
        let r = is_weighted_multi_toeplitz(&b, &identity::<f64>(b.model_dim()), 1e-10).unwrap();
        assert!(r.is_toeplitz && r.witness.is_none());
        let r = is_weighted_multi_toeplitz(&b, &pseudo(b.model_dim(), 3), 1e-10).unwrap();
        assert!(!r.is_toeplitz && r.witness.is_some());
        assert!(r.max_offdomain_entry > 0.0);
    }

    #[test]
    fn bh_entrywise_matches_dense_route() {
        for (n, m, l, d) in [(vec![2], vec![2], vec![4], 1), (vec![1, 2], vec![3, 1], vec![5, 3], 2), (vec![2], vec![3], vec![5], 1)] {
            let b = basis(&n, &m, &l, d);
            for seed in 0..3 {
                let t = pseudo(b.model_dim(), seed);
                let fast = brown_halmos_residual(&b, &t).unwrap();
                let slow = brown_halmos_residual_dense(&b, &t).unwrap();
                for (x, y) in fast.iter().zip(&slow) {
                    assert!((x - y).abs() < 1e-12 * (1.0 + y.abs()), "{x} vs {y}");
                    assert!(*x > 0.01);
                }
            }
            let r = brown_halmos_residual(&b, &identity::<f64>(b.model_dim())).unwrap();
            assert!(r.iter().all(|&x| x < 1e-12));
        }
    }

    #[test]
    fn bh_fully_dense_oracle() {
        // every product formed as a dense matrix
        let b = basis(&[2], &[2], &[4], 1);
        let dim = b.model_dim();
        let t = pseudo(dim, 11);
        let lam = ShiftTuple::<f64>::right(&b).to_dense();
        let om = crate::operators::omega::<f64>(&b, 0).unwrap().into_matrix();
        let psi = t.map(|z| z * 2.0) - lam.phi_factor(0, &t).unwrap();
        let g = bh_guard_band(b.spec(), 0);
        let mut res: f64 = 0.0;
        for j in 0..2 {
            for l in 0..2 {
                let lj = &om * &lam.factors[0][j];
                let ll = &om * &lam.factors[0][l];
                let mut x = lj.adjoint() * &t * ll;
                if j == l {
                    x -= &psi;
                }
                res = res.max(crate::operators::interior_max_abs(&b, &g, &x));
            }
        }
        let fast = brown_halmos_residual(&b, &t).unwrap()[0];
        assert!((fast - res).abs() < 1e-12);
    }

    #[test]
    fn bh_detects_broken_ratio() {
        let b = basis(&[1], &[2], &[6], 1);
        let g1 = b.index_of(&mw(&b, "1")).unwrap();
        let mut t = CMatrix::<f64>::zeros(b.model_dim(), b.model_dim());
        t[(g1, 0)] = C::new(1.0, 0.0);
        assert!(brown_halmos_residual(&b, &t).unwrap()[0] > 0.1);
    }

    #[test]
    fn homogeneous_examples() {
        let b = basis(&[2, 1], &[1, 2], &[2, 2], 1);
        let dim = b.model_dim();
        let id = identity::<f64>(dim);
        assert_eq!(homogeneous_part_projection(&b, &id, &DegreeVector(vec![0, 0])).unwrap(), id);
        assert_eq!(max_abs(&homogeneous_part_projection(&b, &id, &DegreeVector(vec![1, 0])).unwrap()), 0.0);
        let w = left_creation::<f64>(&b, 0, 1).unwrap().into_matrix();
        for s in all_shifts(b.spec()) {
            let part = homogeneous_part_projection(&b, &w, &s).unwrap();
            if s.0 == [1, 0] {
                assert_eq!(part, w);
            } else {
                assert_eq!(max_abs(&part), 0.0);
            }
        }
    }

    #[test]
    fn quadrature_matches_projection() {
        let b = basis(&[1, 2], &[2, 1], &[2, 2], 2);
        let t = pseudo(b.model_dim(), 5);
        let mut sum = CMatrix::zeros(t.nrows(), t.ncols());
        for s in all_shifts(b.spec()) {
            let p = homogeneous_part_projection(&b, &t, &s).unwrap();
            let q = homogeneous_part_quadrature(&b, &t, &s, &[5, 5]).unwrap();
            assert!(max_abs_diff(&p, &q) < 1e-12);
            sum += p;
        }
        assert_eq!(sum, t);
        assert!(matches!(
            homogeneous_part_quadrature(&b, &t, &DegreeVector(vec![0, 0]), &[4, 5]),
            Err(Error::Undersampled { factor: 0, needed: 5, got: 4 })
        ));
    }

    #[test]
    fn fejer_examples() {
        let b = basis(&[2], &[1], &[3], 1);
        let w = left_creation::<f64>(&b, 0, 2).unwrap().into_matrix();
        let f = fejer_sum(&b, &w, &[3]).unwrap();
        assert!(max_abs_diff(&f, &w.map(|z| z * 0.75)) < 1e-15);
        let t = pseudo(b.model_dim(), 2);
        assert_eq!(partial_sum(&b, &t, &[3]).unwrap(), t);
        // explicit sum over parts
        let mut explicit = CMatrix::zeros(t.nrows(), t.ncols());
        for s in all_shifts(b.spec()) {
            let a = s.0[0].unsigned_abs() as f64;
            if a <= 2.0 {
                explicit += homogeneous_part_projection(&b, &t, &s).unwrap().map(|z| z * (1.0 - a / 3.0));
            }
        }
        assert!(max_abs_diff(&fejer_sum(&b, &t, &[2]).unwrap(), &explicit) < 1e-15);
    }

    #[test]
    fn conjugate_examples() {
        let b = basis(&[2], &[1], &[3], 1);
        let t = pseudo(b.model_dim(), 9);
        assert_eq!(to_weighted_fock_conjugate(&b, &t).unwrap(), t);
        let b = basis(&[2, 1], &[2, 3], &[2, 2], 1);
        let id = identity::<f64>(b.model_dim());
        assert_eq!(to_weighted_fock_conjugate(&b, &id).unwrap(), id);
        let r = mu_criterion(&b, &id, 1e-10).unwrap();
        assert!(r.is_toeplitz);
    }
}
