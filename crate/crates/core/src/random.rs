//! Seeded generators for symbols, operators and points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::berezin::{membership, purity, PointTuple};
use crate::error::Result;
use crate::fock::{GradedBasis, TruncationSpec};
use crate::operators::GuardBand;
use crate::scalar::{cplx, to_f64, CMatrix, Real, C};
use crate::toeplitz::{Symbol, SymbolKey};
use crate::words::{enumerate_words, MultiWord, Word};

/// Name of the generator recorded in reports.
pub const RNG_NAME: &str = "ChaCha20Rng/rand_chacha-0.9/seed_from_u64";

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Complex standard normal: real and imaginary parts `N(0, 1/2)`.
pub fn complex_normal<T: Real, R: Rng + ?Sized>(rng: &mut R) -> C<T> {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    cplx(T::from_f64(re * s).unwrap(), T::from_f64(im * s).unwrap())
}

pub fn random_matrix<T: Real, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix<T> {
    let mut out = CMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            out[(r, c)] = complex_normal(rng);
        }
    }
    out
}

/// Reduced pairs with `|α_i| + |β_i| ≤ caps_i`, in a fixed order.
pub fn reduced_keys(spec: &TruncationSpec, caps: &[usize]) -> Vec<SymbolKey> {
    let per_factor: Vec<Vec<(Word, Word)>> = (0..spec.k)
        .map(|i| {
            let words = enumerate_words(spec.n[i], caps[i]);
            let id = Word::identity(spec.n[i]);
            let mut pairs: Vec<(Word, Word)> = words.iter().map(|w| (w.clone(), id.clone())).collect();
            pairs.extend(words.iter().filter(|w| !w.is_identity()).map(|w| (id.clone(), w.clone())));
            pairs
        })
        .collect();
    let mut keys: Vec<(Vec<Word>, Vec<Word>)> = vec![(Vec::new(), Vec::new())];
    for pairs in &per_factor {
        keys = keys
            .into_iter()
            .flat_map(|(a, b)| {
                pairs.iter().map(move |(x, y)| {
                    let mut a2 = a.clone();
                    let mut b2 = b.clone();
                    a2.push(x.clone());
                    b2.push(y.clone());
                    (a2, b2)
                })
            })
            .collect();
    }
    keys.into_iter().map(|(a, b)| (MultiWord::new(a), MultiWord::new(b))).collect()
}

fn caps(spec: &TruncationSpec, g: &GuardBand) -> Vec<usize> {
    (0..spec.k).map(|i| spec.l[i].saturating_sub(g.g[i])).collect()
}

/// Symbol with complex normal coefficients on every key with
/// `|α_i| + |β_i| ≤ L_i − g_i`.
pub fn random_symbol<T: Real, R: Rng + ?Sized>(spec: &TruncationSpec, g: &GuardBand, rng: &mut R) -> Result<Symbol<T>> {
    let mut s = Symbol::new(spec);
    for (a, b) in reduced_keys(spec, &caps(spec, g)) {
        let m = random_matrix(spec.d, spec.d, rng);
        s.insert(a, b, m)?;
    }
    Ok(s)
}

/// Complex normal entries everywhere.
pub fn random_dense<T: Real, R: Rng + ?Sized>(spec: &TruncationSpec, rng: &mut R) -> CMatrix<T> {
    random_matrix(spec.model_dim(), spec.model_dim(), rng)
}

/// Complex normal entries on rows and columns inside the interior of `g`,
/// zero elsewhere.
pub fn random_interior<T: Real, R: Rng + ?Sized>(basis: &GradedBasis, g: &GuardBand, rng: &mut R) -> CMatrix<T> {
    let dim = basis.model_dim();
    let idx = g.model_indices(basis);
    let mut out = CMatrix::zeros(dim, dim);
    for &c in &idx {
        for &r in &idx {
            out[(r, c)] = complex_normal(rng);
        }
    }
    out
}

/// A random reduced key inside the truncation and a random coefficient.
pub fn random_monomial<T: Real, R: Rng + ?Sized>(spec: &TruncationSpec, rng: &mut R) -> (MultiWord, MultiWord, CMatrix<T>) {
    let keys = reduced_keys(spec, &spec.l);
    let (a, b) = keys[rng.random_range(0..keys.len())].clone();
    (a, b, random_matrix(spec.d, spec.d, rng))
}

/// A pure point in the poly-hyperball with `ρ(Φ_{X_i})` drawn uniformly from
/// `[rho_lo, rho_hi]`. Factor 0 carries random `dH × dH` matrices; other
/// factors are scalar multiples of the identity so that factors commute.
/// The point is shrunk by 0.9 until every defect is positive.
pub fn random_pure_point<T: Real, R: Rng + ?Sized>(
    spec: &TruncationSpec,
    dh: usize,
    rho_lo: f64,
    rho_hi: f64,
    rng: &mut R,
) -> Result<PointTuple<T>> {
    let mut factors = Vec::with_capacity(spec.k);
    for i in 0..spec.k {
        let target: f64 = rng.random_range(rho_lo..=rho_hi);
        let tuple: Vec<CMatrix<T>> = if i == 0 {
            (0..spec.n[i]).map(|_| random_matrix(dh, dh, rng)).collect()
        } else {
            (0..spec.n[i])
                .map(|_| {
                    let c: C<T> = complex_normal(rng);
                    CMatrix::<T>::identity(dh, dh).map(|z| z * c)
                })
                .collect()
        };
        let probe = PointTuple::new(dh, vec![tuple.clone()], true)?;
        let rho = to_f64(purity(&probe)[0]);
        let scale = if rho > 0.0 { (target / rho).sqrt() } else { 1.0 };
        let s = T::from_f64(scale).unwrap();
        factors.push(tuple.into_iter().map(|x| x.map(|z| z * s)).collect());
    }
    let mut point = PointTuple::new(dh, factors, true)?;
    let shrink = T::from_f64(0.9).unwrap();
    for _ in 0..200 {
        if membership(&point, spec)? {
            break;
        }
        point = point.scaled(shrink);
    }
    Ok(point)
}
