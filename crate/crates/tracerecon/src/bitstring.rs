//! Packed bit strings and the small amount of stringology the pipeline needs:
//! smallest periods, cyclic-shift sets, and non-cyclic-subword search.
//!
//! Strings are indexed `0..len`, and the textual form is ASCII `'0'`/`'1'`
//! with index 0 leftmost, e.g. `"0110".parse::<BitString>()`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BitStringError {
    #[error("invalid character {0:?} in bit string (expected '0' or '1')")]
    InvalidChar(char),
    #[error("pattern must be non-empty")]
    EmptyPattern,
    #[error("pattern of length {len} is too long (at most {max} supported)")]
    PatternTooLong { len: usize, max: usize },
    #[error("pattern {0:?} is not primitive (it is a repetition of a shorter string)")]
    NotPrimitive(String),
}

/// Longest pattern we pack into a single `u64` word; `C` never comes close.
pub const MAX_PATTERN_LEN: usize = 64;

/// Immutable packed bit sequence with O(1) random access.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        BitString {
            words: Vec::with_capacity(bits.div_ceil(64)),
            len: 0,
        }
    }

    pub fn zeros(len: usize) -> Self {
        BitString {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut s = BitString::new();
        for b in bits {
            s.push(b);
        }
        s
    }

    /// `len` bits where bit `i` is `f(i)`.
    pub fn from_fn(len: usize, mut f: impl FnMut(usize) -> bool) -> Self {
        let mut s = BitString::with_capacity(len);
        for i in 0..len {
            s.push(f(i));
        }
        s
    }

    /// Uniform random string of the given length.
    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut words = vec![0u64; len.div_ceil(64)];
        for w in words.iter_mut() {
            *w = rng.random();
        }
        let mut s = BitString { words, len };
        s.mask_tail();
        s
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range 0..{}", self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn push(&mut self, bit: bool) {
        if self.len.is_multiple_of(64) {
            self.words.push(0);
        }
        if bit {
            *self.words.last_mut().unwrap() |= 1 << (self.len % 64);
        }
        self.len += 1;
    }

    /// Subword `x_[a:b]` (inclusive endpoints). Requires `a <= b < len`.
    pub fn subword(&self, a: usize, b: usize) -> BitString {
        assert!(
            a <= b && b < self.len,
            "subword [{a}:{b}] out of range for length {}",
            self.len
        );
        BitString::from_fn(b - a + 1, |i| self.get(a + i))
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut out = self.clone();
        for b in other.iter() {
            out.push(b);
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Equality of `self[a..a+len]` and `other[b..b+len]` without allocating.
    pub fn range_eq(&self, a: usize, other: &BitString, b: usize, len: usize) -> bool {
        if a + len > self.len || b + len > other.len {
            return false;
        }
        (0..len).all(|i| self.get(a + i) == other.get(b + i))
    }

    /// The `k`-bit subword starting at `i`, packed into a `u64` (bit `j` of the
    /// result is `self[i + j]`). Requires `k <= 64` and `i + k <= len`.
    #[inline]
    pub fn window_code(&self, i: usize, k: usize) -> u64 {
        debug_assert!(k <= 64 && i + k <= self.len);
        let mut code = 0u64;
        for j in 0..k {
            code |= (self.get(i + j) as u64) << j;
        }
        code
    }

    fn mask_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl FromStr for BitString {
    type Err = BitStringError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = BitString::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => out.push(false),
                '1' => out.push(true),
                other => return Err(BitStringError::InvalidChar(other)),
            }
        }
        Ok(out)
    }
}

/// Lexicographic by bit sequence; shorter strings compare before their
/// extensions. Used to break vote ties deterministically.
impl Ord for BitString {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.iter().cmp(other.iter())
    }
}

impl PartialOrd for BitString {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Smallest `p >= 1` with `w[j] == w[j + p]` for all `j` in `[0 : |w|-1-p]`;
/// `|w|` when no smaller period exists. Computed with the KMP failure
/// function; the brute-force definition lives in the test oracles.
pub fn smallest_period(w: &BitString) -> usize {
    let n = w.len();
    assert!(n >= 1, "smallest_period requires a non-empty string");
    // border[i] = length of the longest proper border of w[0..=i]
    let mut border = vec![0usize; n];
    let mut b = 0;
    for i in 1..n {
        while b > 0 && w.get(i) != w.get(b) {
            b = border[b - 1];
        }
        if w.get(i) == w.get(b) {
            b += 1;
        }
        border[i] = b;
    }
    n - border[n - 1]
}

/// A primitive repeating pattern `s` (not a repetition of a shorter string).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pattern {
    s: BitString,
}

impl Pattern {
    /// Rejects the empty string and any `s = t^j` for `j >= 2`, so every
    /// desert has exactly one pattern encoding.
    pub fn new(s: BitString) -> Result<Pattern, BitStringError> {
        if s.is_empty() {
            return Err(BitStringError::EmptyPattern);
        }
        if s.len() > MAX_PATTERN_LEN {
            return Err(BitStringError::PatternTooLong {
                len: s.len(),
                max: MAX_PATTERN_LEN,
            });
        }
        if !is_primitive(&s) {
            return Err(BitStringError::NotPrimitive(s.to_string()));
        }
        Ok(Pattern { s })
    }

    pub fn k(&self) -> usize {
        self.s.len()
    }

    pub fn bits(&self) -> &BitString {
        &self.s
    }

    /// Bit `j` of the infinite repetition `s^inf`.
    #[inline]
    pub fn bit(&self, j: usize) -> bool {
        self.s.get(j % self.s.len())
    }
}

impl FromStr for Pattern {
    type Err = BitStringError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Pattern::new(s.parse()?)
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.s.fmt(f)
    }
}

fn is_primitive(s: &BitString) -> bool {
    let k = s.len();
    for d in 1..k {
        if k.is_multiple_of(d) && (0..k).all(|i| s.get(i) == s.get(i % d)) {
            return false;
        }
    }
    true
}

/// The set `Cyc_s` of all `k`-bit cyclic shifts of a primitive pattern `s`.
/// Primitivity makes the `k` rotations pairwise distinct.
#[derive(Clone, Debug)]
pub struct CycSet {
    /// Sorted window codes of the rotations (see [`BitString::window_code`]).
    codes: Vec<u64>,
    k: usize,
}

pub fn cyc_set(s: &Pattern) -> CycSet {
    let k = s.k();
    let doubled = s.bits().concat(s.bits());
    let mut codes: Vec<u64> = (0..k).map(|r| doubled.window_code(r, k)).collect();
    codes.sort_unstable();
    codes.dedup();
    debug_assert_eq!(codes.len(), k, "primitive pattern must have k distinct rotations");
    CycSet { codes, k }
}

impl CycSet {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    #[inline]
    pub fn contains_code(&self, code: u64) -> bool {
        self.codes.binary_search(&code).is_ok()
    }

    /// Membership of a whole `k`-bit string.
    pub fn contains(&self, w: &BitString) -> bool {
        w.len() == self.k && self.contains_code(w.window_code(0, self.k))
    }

    pub fn members(&self) -> impl Iterator<Item = BitString> + '_ {
        self.codes
            .iter()
            .map(move |&c| BitString::from_fn(self.k, |j| (c >> j) & 1 == 1))
    }
}

/// Smallest `i` such that `w[i : i+k-1]` is not in `cyc`, or `None` if every
/// `k`-subword is a cyclic shift (or `|w| < k`).
pub fn leftmost_noncyc(w: &BitString, cyc: &CycSet) -> Option<usize> {
    let k = cyc.k();
    if w.len() < k {
        return None;
    }
    let mut code = w.window_code(0, k);
    let mut i = 0;
    loop {
        if !cyc.contains_code(code) {
            return Some(i);
        }
        if i + k >= w.len() {
            return None;
        }
        code = (code >> 1) | ((w.get(i + k) as u64) << (k - 1));
        i += 1;
    }
}

/// True iff `w[j] == s[j mod k]` for all `j`, i.e. `w` is a prefix of
/// the infinite repetition of `s`.
pub fn is_prefix_of_power(w: &BitString, s: &Pattern) -> bool {
    assert!(!w.is_empty());
    (0..w.len()).all(|j| w.get(j) == s.bit(j))
}
