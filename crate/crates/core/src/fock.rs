//! The truncated tensor Fock space: binomial weights, Toeplitz weights and
//! the graded basis.

use std::ops::Range;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::SqrtRatio;
use crate::scalar::Real;
use crate::words::{comparable, enumerate_words, simplify, DegreeVector, MultiWord, Word};

/// Largest truncated Fock dimension accepted by [`GradedBasis::build`].
pub const MAX_FOCK_DIM: usize = 1 << 22;

/// Global configuration of a finite model.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncationSpec {
    pub k: usize,
    pub n: Vec<usize>,
    pub m: Vec<usize>,
    #[serde(rename = "L")]
    pub l: Vec<usize>,
    #[serde(default = "default_d")]
    pub d: usize,
}

fn default_d() -> usize {
    1
}

impl TruncationSpec {
    pub fn new(n: Vec<usize>, m: Vec<usize>, l: Vec<usize>, d: usize) -> Result<Self> {
        let spec = TruncationSpec { k: n.len(), n, m, l, d };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.n.len() != self.k || self.m.len() != self.k || self.l.len() != self.k {
            return bad(format!(
                "n, m, L must all have length k = {} (got {}, {}, {})",
                self.k,
                self.n.len(),
                self.m.len(),
                self.l.len()
            ));
        }
        if self.n.iter().any(|&x| !(1..=9).contains(&x)) {
            return bad("alphabet sizes must lie in 1..=9".into());
        }
        if self.m.contains(&0) {
            return bad("orders m_i must be at least 1".into());
        }
        if self.l.contains(&0) {
            return bad("truncation lengths L_i must be at least 1".into());
        }
        if self.d == 0 {
            return bad("coefficient dimension d must be at least 1".into());
        }
        if self.fock_dim_checked().is_none_or(|dim| dim > MAX_FOCK_DIM) {
            return bad("truncated Fock space too large".into());
        }
        Ok(())
    }

    /// `Σ_{j ≤ L_i} n_i^j`.
    pub fn factor_dim(&self, i: usize) -> usize {
        factor_dim(self.n[i], self.l[i])
    }

    fn fock_dim_checked(&self) -> Option<usize> {
        (0..self.k).try_fold(1usize, |acc, i| {
            let mut level = 1usize;
            let mut dim = 0usize;
            for _ in 0..=self.l[i] {
                dim = dim.checked_add(level)?;
                level = level.checked_mul(self.n[i])?;
            }
            acc.checked_mul(dim)
        })
    }

    /// Dimension of the truncated tensor Fock space (without coefficients).
    pub fn fock_dim(&self) -> usize {
        (0..self.k).map(|i| self.factor_dim(i)).product()
    }

    /// `d · Π_i dim(factor i)`.
    pub fn model_dim(&self) -> usize {
        self.d * self.fock_dim()
    }

    pub fn with_d(&self, d: usize) -> Self {
        TruncationSpec { d, ..self.clone() }
    }

    pub fn with_l(&self, l: Vec<usize>) -> Self {
        TruncationSpec { l, ..self.clone() }
    }
}

pub fn factor_dim(n: usize, l: usize) -> usize {
    let mut level = 1usize;
    let mut dim = 0usize;
    for _ in 0..=l {
        dim += level;
        level *= n;
    }
    dim
}

/// `binomial(len + m - 1, m - 1)`, the weight of any word of length `len`
/// for the order-`m` hyperball.
pub fn weight_b(m: usize, len: usize) -> u64 {
    assert!(m >= 1, "order must be at least 1");
    let top = (len + m - 1) as u128;
    let r = (m - 1) as u128;
    let mut acc: u128 = 1;
    for t in 0..r {
        acc = acc * (top - t) / (t + 1);
    }
    u64::try_from(acc).expect("weight overflows u64")
}

fn minmax(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

fn require_comparable(omega: &MultiWord, gamma: &MultiWord) -> Result<()> {
    if comparable(omega, gamma) {
        Ok(())
    } else {
        Err(Error::NotComparable(omega.to_string(), gamma.to_string()))
    }
}

/// Toeplitz weight `τ(ω, γ) = Π_i sqrt(b(min) / b(max))` in exact form.
pub fn tau_exact(spec: &TruncationSpec, omega: &MultiWord, gamma: &MultiWord) -> Result<SqrtRatio> {
    require_comparable(omega, gamma)?;
    Ok(tau_from_lengths(spec, &omega.degree(), &gamma.degree()))
}

pub(crate) fn tau_from_lengths(spec: &TruncationSpec, a: &[usize], b: &[usize]) -> SqrtRatio {
    (0..spec.k).fold(SqrtRatio::one(), |acc, i| {
        let (lo, hi) = minmax(a[i], b[i]);
        acc * SqrtRatio::from_fraction(weight_b(spec.m[i], lo), weight_b(spec.m[i], hi))
    })
}

pub fn tau<T: Real>(spec: &TruncationSpec, omega: &MultiWord, gamma: &MultiWord) -> Result<T> {
    tau_exact(spec, omega, gamma).map(|t| t.to_real())
}

/// Weighted-Fock weight `μ(ω, γ) = Π_i 1 / b(max)`.
pub fn mu_exact(spec: &TruncationSpec, omega: &MultiWord, gamma: &MultiWord) -> Result<Ratio<u64>> {
    require_comparable(omega, gamma)?;
    Ok(mu_from_lengths(spec, &omega.degree(), &gamma.degree()))
}

pub(crate) fn mu_from_lengths(spec: &TruncationSpec, a: &[usize], b: &[usize]) -> Ratio<u64> {
    (0..spec.k).fold(Ratio::from_integer(1), |acc, i| {
        acc * Ratio::new(1, weight_b(spec.m[i], a[i].max(b[i])))
    })
}

pub fn mu<T: Real>(spec: &TruncationSpec, omega: &MultiWord, gamma: &MultiWord) -> Result<T> {
    let r = mu_exact(spec, omega, gamma)?;
    let num = T::from_u64(*r.numer()).expect("representable");
    let den = T::from_u64(*r.denom()).expect("representable");
    Ok(num / den)
}

/// `τ(ω, γ) / τ(s(ω, γ))`, the proportionality factor along a
/// simplification class.
pub fn tau_ratio_exact(
    spec: &TruncationSpec,
    omega: &MultiWord,
    gamma: &MultiWord,
) -> Result<SqrtRatio> {
    let (sigma, beta) = simplify(omega, gamma)?;
    Ok(tau_exact(spec, omega, gamma)? / tau_exact(spec, &sigma, &beta)?)
}

/// Words of one tensor factor with the shift tables used by the operators.
#[derive(Clone, Debug)]
pub struct FactorWords {
    n: usize,
    max_len: usize,
    words: Vec<Word>,
    lens: Vec<usize>,
    left_ext: Vec<Option<u32>>,
    right_ext: Vec<Option<u32>>,
    right_parent: Vec<Option<(u32, u8)>>,
    left_parent: Vec<Option<(u32, u8)>>,
}

impl FactorWords {
    pub fn new(n: usize, max_len: usize) -> Self {
        let words = enumerate_words(n, max_len);
        let dim = words.len();
        let lens: Vec<usize> = words.iter().map(Word::len).collect();
        let mut left_ext = vec![None; dim * n];
        let mut right_ext = vec![None; dim * n];
        let mut right_parent = vec![None; dim];
        let mut left_parent = vec![None; dim];
        for (idx, w) in words.iter().enumerate() {
            let letters = w.letters();
            if let Some((&last, rest)) = letters.split_last() {
                let parent = Word::new(n, rest.to_vec()).graded_index();
                right_parent[idx] = Some((parent as u32, last));
                right_ext[parent * n + (last as usize - 1)] = Some(idx as u32);
            }
            if let Some((&first, rest)) = letters.split_first() {
                let parent = Word::new(n, rest.to_vec()).graded_index();
                left_parent[idx] = Some((parent as u32, first));
                left_ext[parent * n + (first as usize - 1)] = Some(idx as u32);
            }
        }
        FactorWords { n, max_len, words, lens, left_ext, right_ext, right_parent, left_parent }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn dim(&self) -> usize {
        self.words.len()
    }

    pub fn word(&self, idx: usize) -> &Word {
        &self.words[idx]
    }

    pub fn len_of(&self, idx: usize) -> usize {
        self.lens[idx]
    }

    pub fn index_of(&self, w: &Word) -> Option<usize> {
        (w.alphabet() == self.n && w.len() <= self.max_len).then(|| w.graded_index())
    }

    /// Index of `g_j · w` (1-based `j`), `None` past the truncation.
    pub fn left_ext(&self, idx: usize, j: usize) -> Option<usize> {
        self.left_ext[idx * self.n + j - 1].map(|x| x as usize)
    }

    /// Index of `w · g_j`, `None` past the truncation.
    pub fn right_ext(&self, idx: usize, j: usize) -> Option<usize> {
        self.right_ext[idx * self.n + j - 1].map(|x| x as usize)
    }

    /// `(index of w without its last letter, last letter)`.
    pub fn right_parent(&self, idx: usize) -> Option<(usize, usize)> {
        self.right_parent[idx].map(|(p, l)| (p as usize, l as usize))
    }

    /// `(index of w without its first letter, first letter)`.
    pub fn left_parent(&self, idx: usize) -> Option<(usize, usize)> {
        self.left_parent[idx].map(|(p, l)| (p as usize, l as usize))
    }

    /// Range of indices of words of length `len`.
    pub fn level(&self, len: usize) -> Range<usize> {
        factor_dim(self.n, len) - self.n.pow(len as u32)..factor_dim(self.n, len)
    }
}

/// Ordered basis `{e_{ω_1} ⊗ ... ⊗ e_{ω_k}}` of the truncated Fock space.
///
/// Elements are ordered by degree vector (lexicographically), then by the
/// component words; every spectral subspace is a contiguous index block.
#[derive(Clone, Debug)]
pub struct GradedBasis {
    spec: TruncationSpec,
    factors: Vec<FactorWords>,
    comps: Vec<u32>,
    strides: Vec<usize>,
    position: Vec<u32>,
    blocks: Vec<(Vec<usize>, Range<usize>)>,
    block_strides: Vec<usize>,
}

impl GradedBasis {
    pub fn build(spec: &TruncationSpec) -> Result<Self> {
        spec.validate()?;
        let k = spec.k;
        let factors: Vec<FactorWords> =
            (0..k).map(|i| FactorWords::new(spec.n[i], spec.l[i])).collect();
        let dims: Vec<usize> = factors.iter().map(FactorWords::dim).collect();
        let total: usize = dims.iter().product();

        let mut strides = vec![1usize; k];
        for i in (0..k.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * dims[i + 1];
        }
        let mut block_strides = vec![1usize; k];
        for i in (0..k.saturating_sub(1)).rev() {
            block_strides[i] = block_strides[i + 1] * (spec.l[i + 1] + 1);
        }

        let mut comps = Vec::with_capacity(total * k);
        let mut position = vec![0u32; total];
        let mut blocks = Vec::new();
        let mut degree = vec![0usize; k];
        loop {
            let start = comps.len() / k;
            let ranges: Vec<Range<usize>> =
                (0..k).map(|i| factors[i].level(degree[i])).collect();
            let mut cur: Vec<usize> = ranges.iter().map(|r| r.start).collect();
            'cartesian: loop {
                let idx = comps.len() / k;
                let pos: usize = cur.iter().zip(&strides).map(|(c, s)| c * s).sum();
                position[pos] = idx as u32;
                comps.extend(cur.iter().map(|&c| c as u32));
                for i in (0..k).rev() {
                    cur[i] += 1;
                    if cur[i] < ranges[i].end {
                        continue 'cartesian;
                    }
                    cur[i] = ranges[i].start;
                }
                break;
            }
            blocks.push((degree.clone(), start..comps.len() / k));
            // next degree vector, lexicographic
            let mut i = k;
            loop {
                if i == 0 {
                    return Ok(GradedBasis {
                        spec: spec.clone(),
                        factors,
                        comps,
                        strides,
                        position,
                        blocks,
                        block_strides,
                    });
                }
                i -= 1;
                degree[i] += 1;
                if degree[i] <= spec.l[i] {
                    break;
                }
                degree[i] = 0;
            }
        }
    }

    pub fn spec(&self) -> &TruncationSpec {
        &self.spec
    }

    pub fn k(&self) -> usize {
        self.spec.k
    }

    /// Dimension of the truncated Fock space.
    pub fn len(&self) -> usize {
        self.position.len()
    }

    pub fn is_empty(&self) -> bool {
        self.position.is_empty()
    }

    /// `d · len()`.
    pub fn model_dim(&self) -> usize {
        self.spec.d * self.len()
    }

    pub fn factor(&self, i: usize) -> &FactorWords {
        &self.factors[i]
    }

    pub fn components(&self, idx: usize) -> &[u32] {
        let k = self.spec.k;
        &self.comps[idx * k..(idx + 1) * k]
    }

    pub fn component(&self, idx: usize, i: usize) -> usize {
        self.comps[idx * self.spec.k + i] as usize
    }

    pub fn degree_in(&self, idx: usize, i: usize) -> usize {
        self.factors[i].len_of(self.component(idx, i))
    }

    pub fn degree(&self, idx: usize) -> Vec<usize> {
        (0..self.spec.k).map(|i| self.degree_in(idx, i)).collect()
    }

    pub fn multiword(&self, idx: usize) -> MultiWord {
        MultiWord::new(
            (0..self.spec.k)
                .map(|i| self.factors[i].word(self.component(idx, i)).clone())
                .collect(),
        )
    }

    pub fn index_of_components(&self, comps: &[usize]) -> usize {
        let pos: usize = comps.iter().zip(&self.strides).map(|(c, s)| c * s).sum();
        self.position[pos] as usize
    }

    pub fn index_of(&self, w: &MultiWord) -> Option<usize> {
        if w.k() != self.spec.k {
            return None;
        }
        let mut pos = 0usize;
        for i in 0..self.spec.k {
            pos += self.factors[i].index_of(w.component(i))? * self.strides[i];
        }
        Some(self.position[pos] as usize)
    }

    /// Index of the basis element with component `i` replaced by `new_comp`.
    pub fn replace_component(&self, idx: usize, i: usize, new_comp: usize) -> usize {
        let comps = self.components(idx);
        let pos: usize = comps
            .iter()
            .zip(&self.strides)
            .enumerate()
            .map(|(s, (c, st))| if s == i { new_comp * st } else { *c as usize * st })
            .sum();
        self.position[pos] as usize
    }

    /// Index of `e_ω` with `ω_i ↦ g_j ω_i`.
    pub fn left_target(&self, idx: usize, i: usize, j: usize) -> Option<usize> {
        let c = self.component(idx, i);
        self.factors[i].left_ext(c, j).map(|nc| self.replace_component(idx, i, nc))
    }

    /// Index of `e_ω` with `ω_i ↦ ω_i g_j`.
    pub fn right_target(&self, idx: usize, i: usize, j: usize) -> Option<usize> {
        let c = self.component(idx, i);
        self.factors[i].right_ext(c, j).map(|nc| self.replace_component(idx, i, nc))
    }

    /// Degree blocks `(p, index range of ℰ_p)` in basis order.
    pub fn blocks(&self) -> &[(Vec<usize>, Range<usize>)] {
        &self.blocks
    }

    /// Indices spanning `ℰ_p`; empty when `p` leaves `[0, L]` in any component.
    pub fn degree_indices(&self, p: &DegreeVector) -> Range<usize> {
        if p.k() != self.spec.k {
            return 0..0;
        }
        let mut b = 0usize;
        for (i, &pi) in p.0.iter().enumerate() {
            if pi < 0 || pi as usize > self.spec.l[i] {
                return 0..0;
            }
            b += pi as usize * self.block_strides[i];
        }
        self.blocks[b].1.clone()
    }

    pub fn vacuum(&self) -> usize {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: &[usize], m: &[usize], l: &[usize]) -> TruncationSpec {
        TruncationSpec::new(n.to_vec(), m.to_vec(), l.to_vec(), 1).unwrap()
    }

    #[test]
    fn weight_examples() {
        for j in 0..10 {
            assert_eq!(weight_b(1, j), 1);
        }
        assert_eq!(weight_b(2, 3), 4);
        assert_eq!(weight_b(3, 2), 6);
        assert_eq!(weight_b(4, 0), 1);
    }

    #[test]
    fn weight_matches_factorial_oracle() {
        let fact = |x: u64| (1..=x).product::<u64>().max(1);
        for m in 1..6u64 {
            for len in 0..10u64 {
                let oracle = fact(len + m - 1) / (fact(m - 1) * fact(len));
                assert_eq!(weight_b(m as usize, len as usize), oracle);
            }
        }
    }

    #[test]
    fn tau_and_mu_examples() {
        let s = spec(&[2], &[2], &[4]);
        let om = MultiWord::parse(&[2], "12").unwrap();
        let ga = MultiWord::parse(&[2], "2").unwrap();
        assert_eq!(tau_exact(&s, &om, &ga).unwrap(), SqrtRatio::from_fraction(2, 3));
        assert!((tau::<f64>(&s, &om, &ga).unwrap() - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(tau_exact(&s, &om, &om).unwrap(), SqrtRatio::one());
        assert_eq!(mu_exact(&s, &om, &ga).unwrap(), Ratio::new(1, 3));
        let vac = MultiWord::identity(&[2]);
        assert_eq!(mu_exact(&s, &vac, &vac).unwrap(), Ratio::from_integer(1));
        let s1 = spec(&[2], &[1], &[4]);
        assert_eq!(tau_exact(&s1, &om, &ga).unwrap(), SqrtRatio::one());
        assert_eq!(mu_exact(&s1, &om, &ga).unwrap(), Ratio::from_integer(1));
        let bad = MultiWord::parse(&[2], "1").unwrap();
        assert!(tau_exact(&s, &bad, &ga).is_err());
        assert!(mu_exact(&s, &bad, &ga).is_err());
    }

    #[test]
    fn tau_ratio_factorizes() {
        // τ(ω,γ)/τ(s(ω,γ)) = Π sqrt(b_min/b_max) · Π sqrt(b_max(σ,β))
        let s = spec(&[2, 2], &[3, 2], &[5, 5]);
        let n = [2, 2];
        let cases = [("2112/1", "12/21"), ("1/221", "21/1"), ("121/", "1/2")];
        for (a, b) in cases {
            let om = MultiWord::parse(&n, a).unwrap();
            let ga = MultiWord::parse(&n, b).unwrap();
            let (sig, bet) = simplify(&om, &ga).unwrap();
            let lhs = tau_ratio_exact(&s, &om, &ga).unwrap().to_f64();
            let mut rhs = 1.0;
            for i in 0..2 {
                let (lo, hi) = minmax(om.component(i).len(), ga.component(i).len());
                rhs *= (weight_b(s.m[i], lo) as f64 / weight_b(s.m[i], hi) as f64).sqrt();
                let top = sig.component(i).len().max(bet.component(i).len());
                rhs *= (weight_b(s.m[i], top) as f64).sqrt();
            }
            assert!((lhs - rhs).abs() < 1e-14, "{a} {b}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn weight_ratio_limit_converges() {
        // (σ,β) = (g1, g0), ω = g1 γ, |γ| = t
        let s = spec(&[1], &[2], &[1]);
        let target = 2f64.sqrt();
        let mut prev = f64::INFINITY;
        for t in 1..=64usize {
            let gamma = MultiWord::new(vec![Word::new(1, vec![1; t])]);
            let omega = MultiWord::new(vec![Word::new(1, vec![1; t + 1])]);
            let err = (tau_ratio_exact(&s, &omega, &gamma).unwrap().to_f64() - target).abs()
                / target;
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 0.02);
    }

    #[test]
    fn basis_examples() {
        let b = GradedBasis::build(&spec(&[1], &[1], &[2])).unwrap();
        assert_eq!(b.len(), 3);
        let labels: Vec<String> = (0..3).map(|i| format!("{:?}", b.multiword(i).component(0))).collect();
        assert_eq!(labels, ["g0", "g1", "g1g1"]);
        assert_eq!(b.blocks()[0], (vec![0], 0..1));
        assert_eq!(b.blocks()[1], (vec![1], 1..2));
        assert_eq!(b.blocks()[2], (vec![2], 2..3));

        let b = GradedBasis::build(&spec(&[1, 1], &[1, 1], &[1, 1])).unwrap();
        assert_eq!(b.len(), 4);

        let b = GradedBasis::build(&spec(&[2], &[1], &[2])).unwrap();
        assert_eq!(b.len(), 7);
        assert_eq!(b.degree_indices(&DegreeVector(vec![2])).len(), 4);
        assert_eq!(b.degree_indices(&DegreeVector(vec![1])), 1..3);
        assert_eq!(b.degree_indices(&DegreeVector(vec![0])), 0..1);
        assert!(b.degree_indices(&DegreeVector(vec![-1])).is_empty());
        assert!(b.degree_indices(&DegreeVector(vec![3])).is_empty());
    }

    #[test]
    fn basis_indexing_is_bijective_and_blocks_partition() {
        let s = spec(&[2, 1, 3], &[1, 2, 1], &[2, 3, 1]);
        let b = GradedBasis::build(&s).unwrap();
        assert_eq!(b.len(), s.fock_dim());
        for idx in 0..b.len() {
            assert_eq!(b.index_of(&b.multiword(idx)), Some(idx));
        }
        let total: usize = b.blocks().iter().map(|(_, r)| r.len()).sum();
        assert_eq!(total, b.len());
        for (p, r) in b.blocks() {
            assert_eq!(b.degree_indices(&DegreeVector::from_unsigned(p)), r.clone());
            for idx in r.clone() {
                assert_eq!(&b.degree(idx), p);
            }
        }
    }

    #[test]
    fn shift_targets() {
        let b = GradedBasis::build(&spec(&[2, 2], &[1, 1], &[2, 2])).unwrap();
        let n = [2, 2];
        let a = b.index_of(&MultiWord::parse(&n, "1/2").unwrap()).unwrap();
        let l = b.left_target(a, 0, 2).unwrap();
        assert_eq!(b.multiword(l).to_string(), "21/2");
        let r = b.right_target(a, 1, 1).unwrap();
        assert_eq!(b.multiword(r).to_string(), "1/21");
        let top = b.index_of(&MultiWord::parse(&n, "12/").unwrap()).unwrap();
        assert_eq!(b.left_target(top, 0, 1), None);
    }

    #[test]
    fn spec_validation() {
        assert!(TruncationSpec::new(vec![1], vec![2], vec![0], 1).is_err());
        assert!(TruncationSpec::new(vec![0], vec![2], vec![1], 1).is_err());
        assert!(TruncationSpec::new(vec![1], vec![0], vec![1], 1).is_err());
        assert!(TruncationSpec::new(vec![1, 2], vec![1], vec![1, 1], 1).is_err());
        assert!(TruncationSpec::new(vec![1], vec![1], vec![1], 0).is_err());
        assert!(TruncationSpec::new(vec![9], vec![1], vec![40], 1).is_err());
        let s: TruncationSpec =
            serde_json::from_str(r#"{"k":2,"n":[2,2],"m":[2,1],"L":[3,3],"d":1}"#).unwrap();
        assert_eq!(s.model_dim(), 15 * 15);
        assert_eq!(serde_json::to_string(&s).unwrap(), r#"{"k":2,"n":[2,2],"m":[2,1],"L":[3,3],"d":1}"#);
    }
}
