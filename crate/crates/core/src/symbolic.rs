//! Words over the alphabet `{1..k}`, the shift, cylinders and Bernoulli sampling.
//!
//! One-sided words are 1-indexed in the mathematical sense (`ω_1 ω_2 …`) and
//! stored 0-based: letter `ω_j` lives at `letters()[j - 1]`.

use std::fmt;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Default cap on the number of letters `universal_word` may produce.
pub const UNIVERSAL_WORD_CAP: usize = 1 << 20;

/// Tolerance on `Σ p_i = 1`.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// A letter of the alphabet `{1..k}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Symbol(u32);

impl Symbol {
    pub fn new(value: u32, k: usize) -> Result<Self> {
        if value == 0 || value as usize > k {
            return Err(Error::InvalidSymbol { symbol: value, k });
        }
        Ok(Symbol(value))
    }

    /// Builds a symbol without an alphabet check; `value` must be at least 1.
    pub(crate) fn from_index(index: usize) -> Self {
        Symbol(index as u32 + 1)
    }

    pub fn value(self) -> u32 {
        self.0
    }

    /// 0-based position of the map this letter selects.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Letter probabilities `(p_1, …, p_k)` of the Bernoulli product measure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbabilityVector {
    p: Vec<f64>,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

impl ProbabilityVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        let sum: f64 = p.iter().sum();
        if p.is_empty()
            || p.iter().any(|&x| !(x > 0.0) || !x.is_finite())
            || (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE
        {
            return Err(Error::InvalidWeights { sum });
        }
        let cumulative = p
            .iter()
            .scan(0.0, |acc, &x| {
                *acc += x;
                Some(*acc)
            })
            .collect();
        Ok(ProbabilityVector { p, cumulative })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("alphabet size must be at least 1".into()));
        }
        let mut p = vec![1.0 / k as f64; k];
        // Put the rounding residue on the last weight so the sum check is exact.
        let head: f64 = p[..k - 1].iter().sum();
        p[k - 1] = 1.0 - head;
        Self::new(p)
    }

    pub fn k(&self) -> usize {
        self.p.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    pub fn get(&self, s: Symbol) -> f64 {
        self.p[s.index()]
    }

    pub fn min(&self) -> f64 {
        self.p.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Inverse CDF: the first symbol `i` with `u < p_1 + … + p_i`.
    /// Values of `u` beyond the last partial sum (rounding) map to `k`.
    pub fn symbol_for(&self, u: f64) -> Symbol {
        let i = self.cumulative.partition_point(|&c| c <= u);
        Symbol::from_index(i.min(self.p.len() - 1))
    }
}

/// A finite word `ω_1 … ω_n`; the empty word is allowed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct FiniteWord(Vec<Symbol>);

impl FiniteWord {
    pub fn new(letters: Vec<Symbol>) -> Self {
        FiniteWord(letters)
    }

    pub fn empty() -> Self {
        FiniteWord(Vec::new())
    }

    /// Builds a word from raw values, validating each against `k`.
    pub fn from_values(values: &[u32], k: usize) -> Result<Self> {
        values.iter().map(|&v| Symbol::new(v, k)).collect::<Result<Vec<_>>>().map(FiniteWord)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[Symbol] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = Symbol> + '_ {
        self.0.iter().copied()
    }

    /// `ω_j` for `1 ≤ j ≤ len`.
    pub fn letter(&self, j: usize) -> Option<Symbol> {
        j.checked_sub(1).and_then(|i| self.0.get(i)).copied()
    }

    pub fn push(&mut self, s: Symbol) {
        self.0.push(s);
    }

    /// `σ^n(ω)`: drops the first `n` letters.
    pub fn shift(&self, n: usize) -> Result<Self> {
        if n > self.0.len() {
            return Err(Error::OutOfRange { index: n, len: self.0.len() });
        }
        Ok(FiniteWord(self.0[n..].to_vec()))
    }

    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n > self.0.len() {
            return Err(Error::OutOfRange { index: n, len: self.0.len() });
        }
        Ok(FiniteWord(self.0[..n].to_vec()))
    }

    pub fn reversed(&self) -> Self {
        FiniteWord(self.0.iter().rev().copied().collect())
    }

    pub fn check_alphabet(&self, k: usize) -> Result<()> {
        for s in &self.0 {
            Symbol::new(s.value(), k)?;
        }
        Ok(())
    }

    /// Digit string (`"12121"`) when `k ≤ 9`, comma-separated values otherwise.
    pub fn format(&self, k: usize) -> String {
        if k <= 9 {
            self.0.iter().map(|s| char::from(b'0' + s.value() as u8)).collect()
        } else {
            self.0.iter().map(|s| s.value().to_string()).collect::<Vec<_>>().join(",")
        }
    }

    /// Inverse of [`FiniteWord::format`].
    pub fn parse(text: &str, k: usize) -> Result<Self> {
        let text = text.trim();
        if text.is_empty() {
            return Ok(FiniteWord::empty());
        }
        let values: Vec<u32> = if k <= 9 && !text.contains(',') {
            text.chars()
                .map(|c| c.to_digit(10).ok_or_else(|| bad_word(text)))
                .collect::<Result<_>>()?
        } else {
            text.split(',')
                .map(|t| t.trim().parse::<u32>().map_err(|_| bad_word(text)))
                .collect::<Result<_>>()?
        };
        Self::from_values(&values, k)
    }
}

fn bad_word(text: &str) -> Error {
    Error::InvalidParameter(format!("cannot parse word {text:?}"))
}

impl FromIterator<Symbol> for FiniteWord {
    fn from_iter<I: IntoIterator<Item = Symbol>>(iter: I) -> Self {
        FiniteWord(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a FiniteWord {
    type Item = Symbol;
    type IntoIter = std::iter::Copied<std::slice::Iter<'a, Symbol>>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter().copied()
    }
}

/// A lazily generated i.i.d. word with letter marginals `weights`.
///
/// Stream `(seed, stream_id)` of ChaCha8 drives inverse-CDF sampling, one
/// `u64` per letter. Cloning a stream snapshots its state; advancing a clone
/// leaves the original untouched.
#[derive(Debug, Clone)]
pub struct WordStream {
    seed: u64,
    stream_id: u64,
    weights: ProbabilityVector,
    position: u64,
    rng: ChaCha8Rng,
}

impl WordStream {
    pub fn new(weights: ProbabilityVector, seed: u64) -> Self {
        Self::for_trial(weights, seed, 0)
    }

    /// The stream used by trial `trial` of a run keyed by `base_seed`.
    pub fn for_trial(weights: ProbabilityVector, base_seed: u64, trial: u64) -> Self {
        WordStream {
            seed: base_seed,
            stream_id: trial,
            weights,
            position: 0,
            rng: rng::stream(base_seed, trial),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Number of letters already consumed.
    pub fn position(&self) -> u64 {
        self.position
    }

    pub fn weights(&self) -> &ProbabilityVector {
        &self.weights
    }

    /// `σ^n` of the stream: a new stream whose first letter is the current `ω_{n+1}`.
    pub fn shifted(&self, n: usize) -> Self {
        let mut next = self.clone();
        for _ in 0..n {
            next.next_symbol();
        }
        next
    }

    pub fn next_symbol(&mut self) -> Symbol {
        self.position += 1;
        self.weights.symbol_for(rng::uniform(&mut self.rng))
    }

    pub fn take_word(&mut self, n: usize) -> FiniteWord {
        (0..n).map(|_| self.next_symbol()).collect()
    }
}

impl Iterator for WordStream {
    type Item = Symbol;

    fn next(&mut self) -> Option<Symbol> {
        Some(self.next_symbol())
    }
}

/// An i.i.d. word of length `n`, deterministic in `(weights, seed)`.
pub fn sample_word(weights: &ProbabilityVector, n: usize, seed: u64) -> FiniteWord {
    WordStream::new(weights.clone(), seed).take_word(n)
}

/// `ℙ⁺` of the cylinder of `w`: the product of its letter weights.
pub fn cylinder_measure(weights: &ProbabilityVector, w: &FiniteWord) -> Result<f64> {
    w.check_alphabet(weights.k())?;
    Ok(w.iter().map(|s| weights.get(s)).product())
}

/// The words agreeing with `prefix` at positions `base_offset + 1 ..`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cylinder {
    prefix: FiniteWord,
    base_offset: i64,
}

impl Cylinder {
    pub fn new(prefix: FiniteWord, base_offset: i64) -> Result<Self> {
        if prefix.is_empty() {
            return Err(Error::InvalidParameter("cylinder prefix must be nonempty".into()));
        }
        Ok(Cylinder { prefix, base_offset })
    }

    pub fn prefix(&self) -> &FiniteWord {
        &self.prefix
    }

    pub fn base_offset(&self) -> i64 {
        self.base_offset
    }

    /// Whether `σ^n(w)` lies in the cylinder.
    pub fn contains_shift(&self, w: &FiniteWord, n: usize) -> bool {
        let start = n as i64 + self.base_offset;
        if start < 0 {
            return false;
        }
        let start = start as usize;
        match w.letters().get(start..start + self.prefix.len()) {
            Some(window) => window == self.prefix.letters(),
            None => false,
        }
    }
}

/// A finite window of a two-sided word: `negative` holds `ω_{-1}, ω_{-2}, …`
/// in that order and `nonnegative` holds `ω_0, ω_1, …`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TwoSidedWindow {
    pub negative: FiniteWord,
    pub nonnegative: FiniteWord,
}

/// Concatenation of all `k^L` words of length `L` in lexicographic order.
/// Every word of length at most `L` occurs as a factor.
pub fn universal_word(k: usize, max_len: usize) -> Result<FiniteWord> {
    universal_word_with_cap(k, max_len, UNIVERSAL_WORD_CAP)
}

pub fn universal_word_with_cap(k: usize, max_len: usize, cap: usize) -> Result<FiniteWord> {
    if k == 0 || max_len == 0 {
        return Err(Error::InvalidParameter("universal_word needs k ≥ 1 and L ≥ 1".into()));
    }
    let required = (k as u128)
        .checked_pow(max_len as u32)
        .and_then(|n| n.checked_mul(max_len as u128))
        .unwrap_or(u128::MAX);
    if required > cap as u128 {
        return Err(Error::TooLarge { required, cap });
    }
    let count = required as usize / max_len;
    let mut letters = Vec::with_capacity(required as usize);
    let mut digits = vec![0usize; max_len];
    for _ in 0..count {
        letters.extend(digits.iter().map(|&d| Symbol::from_index(d)));
        // Odometer increment, last position fastest.
        for d in digits.iter_mut().rev() {
            *d += 1;
            if *d < k {
                break;
            }
            *d = 0;
        }
    }
    Ok(FiniteWord(letters))
}

/// Smallest `n` in `[max(0, -base_offset), horizon]` with `σ^n(w)` in `c`.
pub fn find_cylinder_occurrence(w: &FiniteWord, c: &Cylinder, horizon: usize) -> Option<usize> {
    let start = (-c.base_offset).max(0) as usize;
    (start..=horizon).find(|&n| c.contains_shift(w, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn word(values: &[u32], k: usize) -> FiniteWord {
        FiniteWord::from_values(values, k).unwrap()
    }

    #[test]
    fn single_symbol_alphabet() {
        let w = sample_word(&ProbabilityVector::uniform(1).unwrap(), 5, 99);
        assert_eq!(w, word(&[1, 1, 1, 1, 1], 1));
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = ProbabilityVector::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(sample_word(&p, 10, 42), sample_word(&p, 10, 42));
        assert_ne!(sample_word(&p, 64, 42), sample_word(&p, 64, 43));
    }

    #[test]
    fn symbol_frequency_concentrates() {
        let p = ProbabilityVector::new(vec![0.3, 0.7]).unwrap();
        let n = 100_000;
        let w = sample_word(&p, n, 7);
        let ones = w.iter().filter(|s| s.value() == 1).count() as f64 / n as f64;
        let sigma = (0.3f64 * 0.7 / n as f64).sqrt();
        assert!((ones - 0.3).abs() < 3.0 * sigma, "freq {ones}");
    }

    #[test]
    fn inverse_cdf_boundaries_are_strict() {
        let p = ProbabilityVector::new(vec![0.25, 0.75]).unwrap();
        assert_eq!(p.symbol_for(0.0).value(), 1);
        assert_eq!(p.symbol_for(0.2499999).value(), 1);
        assert_eq!(p.symbol_for(0.25).value(), 2);
        assert_eq!(p.symbol_for(0.9999999).value(), 2);
    }

    #[test]
    fn weights_validation() {
        assert!(matches!(
            ProbabilityVector::new(vec![0.5, 0.6]),
            Err(Error::InvalidWeights { .. })
        ));
        assert!(ProbabilityVector::new(vec![1.0, 0.0]).is_err());
        assert!(ProbabilityVector::new(vec![]).is_err());
        let u = ProbabilityVector::uniform(7).unwrap();
        assert_eq!(u.k(), 7);
    }

    #[test]
    fn cylinder_measures() {
        let p = ProbabilityVector::new(vec![0.3, 0.7]).unwrap();
        assert_eq!(cylinder_measure(&p, &FiniteWord::empty()).unwrap(), 1.0);
        assert!((cylinder_measure(&p, &word(&[1, 2], 2)).unwrap() - 0.21).abs() < 1e-15);
        let u = ProbabilityVector::uniform(2).unwrap();
        for n in 0..12 {
            let w = sample_word(&p, n, n as u64);
            assert_eq!(cylinder_measure(&u, &w).unwrap(), 0.5f64.powi(n as i32));
        }
        assert!(cylinder_measure(&p, &FiniteWord::new(vec![Symbol(3)])).is_err());
    }

    #[test]
    fn shifting_finite_words() {
        let w = word(&[1, 2, 1], 2);
        assert_eq!(w.shift(0).unwrap(), w);
        assert_eq!(w.shift(2).unwrap(), word(&[1], 2));
        assert_eq!(w.shift(3).unwrap(), FiniteWord::empty());
        assert!(matches!(w.shift(4), Err(Error::OutOfRange { index: 4, len: 3 })));
    }

    #[test]
    fn shifting_streams_matches_consumption() {
        let p = ProbabilityVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        let s = WordStream::new(p.clone(), 5);
        let full = s.clone().take_word(20);
        let tail = s.shifted(7).take_word(13);
        assert_eq!(full.shift(7).unwrap(), tail);
        assert_eq!(s.position(), 0);
    }

    #[test]
    fn universal_word_small_cases() {
        assert_eq!(universal_word(1, 3).unwrap(), word(&[1, 1, 1], 1));
        let w = universal_word(2, 1).unwrap();
        assert_eq!(w, word(&[1, 2], 2));
        let w = universal_word(2, 2).unwrap();
        assert_eq!(w, word(&[1, 1, 1, 2, 2, 1, 2, 2], 2));
        assert!(matches!(universal_word(2, 20), Err(Error::TooLarge { .. })));
        assert!(universal_word_with_cap(3, 3, 81).is_ok());
        assert!(universal_word_with_cap(3, 3, 80).is_err());
    }

    #[test]
    fn cylinder_search() {
        let w = word(&[1, 2, 2, 1, 1, 2], 2);
        let head = Cylinder::new(w.prefix(3).unwrap(), 0).unwrap();
        assert_eq!(find_cylinder_occurrence(&w, &head, 3), Some(0));

        let u = universal_word(2, 2).unwrap();
        let c = Cylinder::new(word(&[2, 2], 2), 0).unwrap();
        let n = find_cylinder_occurrence(&u, &c, u.len() - 2).unwrap();
        assert_eq!(&u.letters()[n..n + 2], word(&[2, 2], 2).letters());

        let ones = word(&[1, 1, 1, 1], 2);
        let c = Cylinder::new(word(&[2], 2), 0).unwrap();
        assert_eq!(find_cylinder_occurrence(&ones, &c, 3), None);

        // Offset windows shift the match position and the search start.
        let c = Cylinder::new(word(&[1, 1], 2), -2).unwrap();
        assert_eq!(find_cylinder_occurrence(&w, &c, 5), Some(5));
        assert!(Cylinder::new(FiniteWord::empty(), 0).is_err());
    }

    #[test]
    fn word_text_round_trip() {
        let w = word(&[1, 2, 1, 2, 1], 2);
        assert_eq!(w.format(2), "12121");
        assert_eq!(FiniteWord::parse("12121", 2).unwrap(), w);
        let big = word(&[10, 1, 12], 12);
        assert_eq!(big.format(12), "10,1,12");
        assert_eq!(FiniteWord::parse("10,1,12", 12).unwrap(), big);
        assert!(FiniteWord::parse("13", 2).is_err());
    }
}
