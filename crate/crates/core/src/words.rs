//! Free monoid combinatorics: words over `{g_1, ..., g_n}`, right
//! divisibility, comparability and the simplification map onto reduced pairs.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

/// A word in the unital free monoid on `n` generators.
///
/// Letters are 1-based generator indices; the empty word is the identity `g_0`.
/// Words order graded-lexicographically: by length, then by letters.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Word {
    n: usize,
    letters: Vec<u8>,
}

impl Word {
    pub fn identity(n: usize) -> Self {
        Word { n, letters: Vec::new() }
    }

    /// Panics if a letter is outside `1..=n`.
    pub fn new(n: usize, letters: Vec<u8>) -> Self {
        assert!(n >= 1, "alphabet must be nonempty");
        assert!(
            letters.iter().all(|&l| l >= 1 && (l as usize) <= n),
            "letter outside 1..={n}"
        );
        Word { n, letters }
    }

    pub fn generator(n: usize, j: usize) -> Self {
        Word::new(n, vec![j as u8])
    }

    pub fn alphabet(&self) -> usize {
        self.n
    }

    pub fn letters(&self) -> &[u8] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    /// Monoid product `self · other`.
    pub fn concat(&self, other: &Word) -> Result<Word> {
        if self.n != other.n {
            return Err(Error::AlphabetMismatch(self.n, other.n));
        }
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Ok(Word { n: self.n, letters })
    }

    pub fn reverse(&self) -> Word {
        let mut letters = self.letters.clone();
        letters.reverse();
        Word { n: self.n, letters }
    }

    /// Returns `σ` with `self = σ·divisor` if `divisor` is a right divisor.
    pub fn right_quotient(&self, divisor: &Word) -> Option<Word> {
        if self.n != divisor.n || divisor.len() > self.len() {
            return None;
        }
        let cut = self.len() - divisor.len();
        if self.letters[cut..] == divisor.letters[..] {
            Some(Word { n: self.n, letters: self.letters[..cut].to_vec() })
        } else {
            None
        }
    }

    /// Returns `σ` with `self = prefix·σ` if `prefix` is a left divisor.
    pub fn left_quotient(&self, prefix: &Word) -> Option<Word> {
        if self.n != prefix.n || prefix.len() > self.len() {
            return None;
        }
        if self.letters[..prefix.len()] == prefix.letters[..] {
            Some(Word { n: self.n, letters: self.letters[prefix.len()..].to_vec() })
        } else {
            None
        }
    }

    /// `self ≥_r other`.
    pub fn right_divides(&self, other: &Word) -> bool {
        self.right_quotient(other).is_some()
    }

    /// Parses the digit-string form (`"12"` is `g_1 g_2`, `""` is `g_0`).
    pub fn parse(n: usize, s: &str) -> Result<Word> {
        let mut letters = Vec::with_capacity(s.len());
        for ch in s.chars() {
            let l = ch
                .to_digit(10)
                .filter(|&l| l >= 1 && (l as usize) <= n)
                .ok_or_else(|| Error::Parse(format!("letter {ch:?} not in 1..={n}")))?;
            letters.push(l as u8);
        }
        Ok(Word { n, letters })
    }

    /// Index in the graded-lexicographic enumeration of all words.
    pub fn graded_index(&self) -> usize {
        let n = self.n;
        let mut offset = 0usize;
        let mut level = 1usize;
        for _ in 0..self.len() {
            offset += level;
            level *= n;
        }
        let within = self
            .letters
            .iter()
            .fold(0usize, |acc, &l| acc * n + (l as usize - 1));
        offset + within
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.letters.cmp(&other.letters))
            .then_with(|| self.n.cmp(&other.n))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.letters {
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            write!(f, "g0")
        } else {
            let parts: Vec<String> = self.letters.iter().map(|l| format!("g{l}")).collect();
            write!(f, "{}", parts.join(""))
        }
    }
}

/// A k-tuple of words, component `i` over an alphabet of size `n_i`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiWord {
    components: Vec<Word>,
}

impl MultiWord {
    pub fn new(components: Vec<Word>) -> Self {
        MultiWord { components }
    }

    pub fn identity(n: &[usize]) -> Self {
        MultiWord { components: n.iter().map(|&ni| Word::identity(ni)).collect() }
    }

    pub fn components(&self) -> &[Word] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &Word {
        &self.components[i]
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn degree(&self) -> Vec<usize> {
        self.components.iter().map(Word::len).collect()
    }

    pub fn total_degree(&self) -> usize {
        self.components.iter().map(Word::len).sum()
    }

    pub fn is_identity(&self) -> bool {
        self.components.iter().all(Word::is_identity)
    }

    /// Parses the `"/"`-joined form, e.g. `"12/"` for `(g_1 g_2, g_0)`.
    pub fn parse(n: &[usize], s: &str) -> Result<MultiWord> {
        let parts: Vec<&str> = s.split('/').collect();
        if parts.len() != n.len() {
            return Err(Error::Parse(format!(
                "expected {} components in {s:?}, found {}",
                n.len(),
                parts.len()
            )));
        }
        let components = parts
            .iter()
            .zip(n)
            .map(|(p, &ni)| Word::parse(ni, p))
            .collect::<Result<Vec<_>>>()?;
        Ok(MultiWord { components })
    }

    fn check_shape(&self, other: &MultiWord) -> Result<()> {
        if self.k() != other.k() {
            return Err(Error::AlphabetMismatch(self.k(), other.k()));
        }
        for (a, b) in self.components.iter().zip(&other.components) {
            if a.n != b.n {
                return Err(Error::AlphabetMismatch(a.n, b.n));
            }
        }
        Ok(())
    }
}

impl fmt::Display for MultiWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.components.iter().map(|w| w.to_string()).collect();
        write!(f, "{}", parts.join("/"))
    }
}

impl fmt::Debug for MultiWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("").field(&self.components).finish()
    }
}

/// A multi-degree `(s_1, ..., s_k) ∈ Z^k`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DegreeVector(pub Vec<i64>);

impl DegreeVector {
    pub fn zero(k: usize) -> Self {
        DegreeVector(vec![0; k])
    }

    pub fn from_unsigned(p: &[usize]) -> Self {
        DegreeVector(p.iter().map(|&x| x as i64).collect())
    }

    pub fn positive_part(&self) -> Vec<usize> {
        self.0.iter().map(|&s| s.max(0) as usize).collect()
    }

    pub fn negative_part(&self) -> Vec<usize> {
        self.0.iter().map(|&s| (-s).max(0) as usize).collect()
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&s| s == 0)
    }
}

/// Componentwise comparability: each `ω_i ≥_r γ_i` or `γ_i >_r ω_i`.
pub fn comparable(omega: &MultiWord, gamma: &MultiWord) -> bool {
    if omega.check_shape(gamma).is_err() {
        return false;
    }
    omega
        .components
        .iter()
        .zip(&gamma.components)
        .all(|(w, g)| w.right_divides(g) || g.right_divides(w))
}

/// The simplification map `s(ω, γ) = (σ, β)` cancelling the common right
/// factor in every component.
pub fn simplify(omega: &MultiWord, gamma: &MultiWord) -> Result<(MultiWord, MultiWord)> {
    omega.check_shape(gamma)?;
    let mut sigma = Vec::with_capacity(omega.k());
    let mut beta = Vec::with_capacity(omega.k());
    for (w, g) in omega.components.iter().zip(&gamma.components) {
        if let Some(q) = w.right_quotient(g) {
            sigma.push(q);
            beta.push(Word::identity(w.n));
        } else if let Some(q) = g.right_quotient(w) {
            sigma.push(Word::identity(w.n));
            beta.push(q);
        } else {
            return Err(Error::NotComparable(omega.to_string(), gamma.to_string()));
        }
    }
    Ok((MultiWord::new(sigma), MultiWord::new(beta)))
}

/// `true` iff in every component at least one of `α_i`, `β_i` is empty.
pub fn is_reduced_pair(alpha: &MultiWord, beta: &MultiWord) -> bool {
    alpha.check_shape(beta).is_ok()
        && alpha
            .components
            .iter()
            .zip(&beta.components)
            .all(|(a, b)| a.len().min(b.len()) == 0)
}

/// All words of length `<= max_len` over `n` letters, graded-lexicographically.
pub fn enumerate_words(n: usize, max_len: usize) -> Vec<Word> {
    assert!(n >= 1, "alphabet must be nonempty");
    let mut out = vec![Word::identity(n)];
    let mut start = 0;
    for _ in 0..max_len {
        let end = out.len();
        for idx in start..end {
            for j in 1..=n {
                let mut letters = out[idx].letters.clone();
                letters.push(j as u8);
                out.push(Word { n, letters });
            }
        }
        start = end;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(n: usize, s: &str) -> Word {
        Word::parse(n, s).unwrap()
    }

    fn mw(n: &[usize], s: &str) -> MultiWord {
        MultiWord::parse(n, s).unwrap()
    }

    #[test]
    fn concat_examples() {
        assert_eq!(w(2, "1").concat(&w(2, "2")).unwrap(), w(2, "12"));
        assert_eq!(w(2, "").concat(&w(2, "12")).unwrap(), w(2, "12"));
        assert_eq!(w(2, "11").concat(&w(2, "2")).unwrap(), w(2, "112"));
        assert!(matches!(
            w(2, "1").concat(&w(3, "1")),
            Err(Error::AlphabetMismatch(2, 3))
        ));
    }

    #[test]
    fn reverse_examples() {
        assert_eq!(w(2, "12").reverse(), w(2, "21"));
        assert_eq!(w(2, "").reverse(), w(2, ""));
        assert_eq!(w(2, "11").reverse(), w(2, "11"));
    }

    #[test]
    fn right_quotient_examples() {
        assert_eq!(w(2, "12").right_quotient(&w(2, "2")), Some(w(2, "1")));
        assert_eq!(w(2, "121").right_quotient(&w(2, "121")), Some(w(2, "")));
        assert_eq!(w(2, "1").right_quotient(&w(2, "2")), None);
        assert_eq!(w(2, "12").right_quotient(&w(2, "1")), None);
    }

    #[test]
    fn comparable_examples() {
        let n = [2, 2];
        assert!(comparable(&mw(&n, "12/"), &mw(&n, "2/1")));
        assert!(comparable(&mw(&n, "21/1"), &mw(&n, "21/1")));
        assert!(!comparable(&mw(&[2], "1"), &mw(&[2], "2")));
    }

    #[test]
    fn simplify_examples() {
        let (s, b) = simplify(&mw(&[2], "12"), &mw(&[2], "2")).unwrap();
        assert_eq!((s, b), (mw(&[2], "1"), mw(&[2], "")));
        let (s, b) = simplify(&mw(&[2], "212"), &mw(&[2], "212")).unwrap();
        assert_eq!((s, b), (mw(&[2], ""), mw(&[2], "")));
        let n = [2, 2];
        let (s, b) = simplify(&mw(&n, "12/"), &mw(&n, "2/1")).unwrap();
        assert_eq!((s, b), (mw(&n, "1/"), mw(&n, "/1")));
        assert!(matches!(
            simplify(&mw(&[2], "1"), &mw(&[2], "2")),
            Err(Error::NotComparable(..))
        ));
    }

    #[test]
    fn reduced_pair_examples() {
        assert!(is_reduced_pair(&mw(&[2], "1"), &mw(&[2], "")));
        assert!(!is_reduced_pair(&mw(&[2], "1"), &mw(&[2], "2")));
        assert!(is_reduced_pair(&mw(&[2], ""), &mw(&[2], "")));
    }

    #[test]
    fn enumerate_examples() {
        assert_eq!(enumerate_words(1, 2), vec![w(1, ""), w(1, "1"), w(1, "11")]);
        assert_eq!(enumerate_words(2, 1), vec![w(2, ""), w(2, "1"), w(2, "2")]);
        let all = enumerate_words(2, 2);
        assert_eq!(all.len(), 7);
        assert_eq!(all.last().unwrap(), &w(2, "22"));
    }

    #[test]
    fn enumeration_is_sorted_and_indexed() {
        let all = enumerate_words(3, 3);
        for (idx, word) in all.iter().enumerate() {
            assert_eq!(word.graded_index(), idx);
        }
        assert!(all.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn display_round_trip() {
        let n = [2, 1, 3];
        let m = mw(&n, "12//31");
        assert_eq!(m.to_string(), "12//31");
        assert_eq!(format!("{:?}", w(2, "")), "g0");
        assert!(MultiWord::parse(&n, "1/1").is_err());
        assert!(Word::parse(2, "3").is_err());
    }

    fn word_strategy(n: usize, max: usize) -> impl Strategy<Value = Word> {
        proptest::collection::vec(1..=n as u8, 0..=max).prop_map(move |l| Word::new(n, l))
    }

    proptest! {
        #[test]
        fn right_quotient_inverts_concat(s in word_strategy(3, 5), g in word_strategy(3, 5)) {
            let sg = s.concat(&g).unwrap();
            prop_assert_eq!(sg.right_quotient(&g), Some(s));
        }

        #[test]
        fn concat_is_associative(a in word_strategy(2, 4), b in word_strategy(2, 4), c in word_strategy(2, 4)) {
            let left = a.concat(&b).unwrap().concat(&c).unwrap();
            let right = a.concat(&b.concat(&c).unwrap()).unwrap();
            prop_assert_eq!(left, right);
        }

        #[test]
        fn simplify_fixes_reduced_pairs(a in word_strategy(2, 4), b in word_strategy(2, 4), flip in any::<bool>()) {
            let (a, b) = if flip { (a, Word::identity(2)) } else { (Word::identity(2), b) };
            let alpha = MultiWord::new(vec![a]);
            let beta = MultiWord::new(vec![b]);
            prop_assert!(is_reduced_pair(&alpha, &beta));
            prop_assert_eq!(simplify(&alpha, &beta).unwrap(), (alpha, beta));
        }

        #[test]
        fn simplify_matches_cancellation(
            common in proptest::collection::vec(word_strategy(2, 3), 2),
            extra in proptest::collection::vec(word_strategy(2, 3), 2),
            side in proptest::collection::vec(any::<bool>(), 2),
        ) {
            let mut om = Vec::new();
            let mut ga = Vec::new();
            for i in 0..2 {
                let long = extra[i].concat(&common[i]).unwrap();
                if side[i] { om.push(long); ga.push(common[i].clone()); }
                else { om.push(common[i].clone()); ga.push(long); }
            }
            let omega = MultiWord::new(om);
            let gamma = MultiWord::new(ga);
            prop_assert!(comparable(&omega, &gamma));
            let (sigma, beta) = simplify(&omega, &gamma).unwrap();
            prop_assert!(is_reduced_pair(&sigma, &beta));
            // β_i ω_i = σ_i γ_i componentwise
            for i in 0..2 {
                let lhs = beta.component(i).concat(omega.component(i)).unwrap();
                let rhs = sigma.component(i).concat(gamma.component(i)).unwrap();
                prop_assert_eq!(lhs, rhs);
            }
        }

        #[test]
        fn enumeration_closed_under_right_quotient(n in 1usize..4, l in 0usize..4) {
            let all = enumerate_words(n, l);
            let set: std::collections::HashSet<_> = all.iter().cloned().collect();
            prop_assert_eq!(set.len(), all.len());
            for word in &all {
                for j in 1..=n {
                    if let Some(q) = word.right_quotient(&Word::generator(n, j)) {
                        prop_assert!(set.contains(&q));
                    }
                }
            }
        }
    }
}
