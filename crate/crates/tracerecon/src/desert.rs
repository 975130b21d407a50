//! Desert detection and the combinatorial objects around a desert's right
//! end: the end location itself, the tail string, the signature, and
//! right-form matching.
//!
//! A window of length `M = 2m+1` is a desert when it is a prefix of `s^inf`
//! for some pattern `s` of length at most `C`; a position is *deep* in a
//! desert when its centered window is one. The detection scan works per
//! period: mark positions where `x[j] == x[j+p]` and look for runs of
//! length `M - p`, which costs O(nC) overall.

use thiserror::Error;

use crate::bitstring::{
    cyc_set, leftmost_noncyc, smallest_period, BitString, CycSet, Pattern, MAX_PATTERN_LEN,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DesertError {
    #[error("window [{lo}:{hi}] does not fit in a string of length {len}")]
    WindowOutOfRange { lo: usize, hi: usize, len: usize },
    #[error("window at r={r} has smallest period {period} > C={c}; not a tracked desert")]
    PeriodExceedsC { r: usize, period: usize, c: usize },
    #[error("no desert break before the end of the string (preprocessing contract violated)")]
    NoBreakBeforeEnd,
    #[error("tail window [{start}:{stop}] out of range for string of length {len}")]
    TailOutOfRange { start: usize, stop: usize, len: usize },
    #[error(transparent)]
    Pattern(#[from] crate::bitstring::BitStringError),
}

/// Window geometry for desert detection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DesertParams {
    /// Half-window; a desert window spans `2m+1` positions.
    pub m: usize,
    /// Longest pattern length that counts as a desert.
    pub c: usize,
}

impl DesertParams {
    pub fn new(m: usize, c: usize) -> Self {
        assert!(m >= 1, "m must be at least 1");
        assert!(
            (1..=MAX_PATTERN_LEN).contains(&c),
            "C must be in 1..={MAX_PATTERN_LEN}"
        );
        DesertParams { m, c }
    }

    /// `M = 2m + 1`, the desert window length.
    pub fn window_len(&self) -> usize {
        2 * self.m + 1
    }
}

/// A located desert: the first deep position, its canonical pattern, and
/// (once computed) its end.
#[derive(Clone, Debug, PartialEq)]
pub struct DesertLocation {
    /// First location deep in the desert.
    pub r: usize,
    pub pattern: Pattern,
    /// Filled in once the end is known; `end >= r + m` when present.
    pub end: Option<usize>,
}

/// Locate the first desert of `x` and resolve its end when the string
/// breaks the repetition before its last position.
pub fn first_desert(x: &BitString, p: &DesertParams) -> Result<Option<DesertLocation>, DesertError> {
    let Some(r) = first_deep_in_desert(x, p) else {
        return Ok(None);
    };
    let pattern = desert_pattern(x, r, p)?;
    let end = desert_end(x, r, pattern.k(), p.m).ok();
    Ok(Some(DesertLocation { r, pattern, end }))
}

/// Smallest `i` in `[m : n-1-m]` whose centered window is a desert, or
/// `None` when the string has no desert (including `|x| < M`).
pub fn first_deep_in_desert(x: &BitString, p: &DesertParams) -> Option<usize> {
    let n = x.len();
    let (m, big_m) = (p.m, p.window_len());
    if n < big_m {
        return None;
    }
    let mut best: Option<usize> = None;
    for period in 1..=p.c.min(big_m - 1) {
        // run = consecutive j with x[j] == x[j+period], ending at the cursor
        let mut run = 0usize;
        let need = big_m - period;
        for j in 0..n - period {
            if x.get(j) == x.get(j + period) {
                run += 1;
            } else {
                run = 0;
                continue;
            }
            if run >= need && j + period >= 2 * m {
                // center i = j - m + period; need i >= m, i.e. j >= 2m - period
                let i = j + period - m;
                if best.is_none_or(|b| i < b) {
                    best = Some(i);
                }
                break; // later j for this period only give larger i
            }
        }
    }
    best
}

/// The canonical pattern of the desert window centered at `r`: its length is
/// the smallest period of the window, and the bits are the window's prefix.
pub fn desert_pattern(x: &BitString, r: usize, p: &DesertParams) -> Result<Pattern, DesertError> {
    let m = p.m;
    if r < m || r + m >= x.len() {
        return Err(DesertError::WindowOutOfRange {
            lo: r.wrapping_sub(m),
            hi: r + m,
            len: x.len(),
        });
    }
    let window = x.subword(r - m, r + m);
    let k = smallest_period(&window);
    if k > p.c {
        return Err(DesertError::PeriodExceedsC { r, period: k, c: p.c });
    }
    // A prefix of length = the window's smallest period is never a proper
    // power (that would give the window a smaller period), so this succeeds.
    Ok(Pattern::new(window.subword(0, k - 1))?)
}

/// The end of the desert around `r`: the smallest `end >= r+m` with
/// `x[end+1] != x[end-k+1]`. Errs when the scan runs off the end of the
/// string, which the preprocessing step is supposed to rule out.
pub fn desert_end(x: &BitString, r: usize, k: usize, m: usize) -> Result<usize, DesertError> {
    let n = x.len();
    assert!(k >= 1 && r + m + 1 >= k, "degenerate desert geometry");
    for end in (r + m)..(n - 1) {
        if x.get(end + 1) != x.get(end + 1 - k) {
            return Ok(end);
        }
    }
    Err(DesertError::NoBreakBeforeEnd)
}

/// The `8σ` bits starting at `x[end-k+2]`: the last `k-1` bits of the
/// desert's final pattern repetition plus what follows it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TailString {
    bits: BitString,
}

impl TailString {
    pub fn from_bits(bits: BitString) -> Self {
        TailString { bits }
    }

    pub fn bits(&self) -> &BitString {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

pub fn tail_string(
    x: &BitString,
    end: usize,
    k: usize,
    sigma: usize,
) -> Result<TailString, DesertError> {
    assert!(k >= 1 && sigma >= 1);
    let start = end + 2 - k; // end >= r+m >= k-2 in any valid instance
    let stop = end + 8 * sigma - k + 1;
    if stop >= x.len() {
        return Err(DesertError::TailOutOfRange {
            start,
            stop,
            len: x.len(),
        });
    }
    Ok(TailString {
        bits: x.subword(start, stop),
    })
}

/// Shortest prefix of the tail whose non-initial part contains a `k`-subword
/// outside `Cyc_s`; the whole tail when no such subword exists. Length is
/// always between `2k` and `8σ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signature {
    bits: BitString,
}

impl Signature {
    pub fn bits(&self) -> &BitString {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Only meaningful for `k >= 2`; the `k = 1` alignment branch never builds a
/// signature.
pub fn signature_from_tail(tail: &TailString, s: &Pattern, sigma: usize) -> Signature {
    let k = s.k();
    assert!(k >= 2, "signatures are only defined for k >= 2");
    let cyc = cyc_set(s);
    let bits = tail.bits();
    debug_assert_eq!(bits.len(), 8 * sigma);
    for d in (2 * k - 1)..bits.len() {
        if !cyc.contains_code(bits.window_code(d + 1 - k, k)) {
            return Signature {
                bits: bits.subword(0, d),
            };
        }
    }
    Signature { bits: bits.clone() }
}

/// Right-form check for a window: if the leftmost non-cyclic `k`-subword
/// starts at `i` and the window carries a full copy of `sig` there, returns
/// `L = i + |sig| - 1`, the in-window index where the signature ends.
/// A signature truncated by the window edge does not match.
pub fn match_right_form(window: &BitString, sig: &Signature, cyc: &CycSet) -> Option<usize> {
    let i = leftmost_noncyc(window, cyc)?;
    let sl = sig.len();
    if i + sl > window.len() {
        return None;
    }
    if window.range_eq(i, sig.bits(), 0, sl) {
        Some(i + sl - 1)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::RngStream;
    use crate::oracles::oracle_first_deep;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn pat(s: &str) -> Pattern {
        s.parse().unwrap()
    }

    fn repeat(s: &str, times: usize) -> String {
        s.repeat(times)
    }

    #[test]
    fn first_deep_all_zero_prefix() {
        // 0^M followed by a break and an aperiodic filler
        let p = DesertParams::new(4, 3);
        let x = bs(&(repeat("0", 9) + "1" + "0010011101101000110100"));
        assert_eq!(first_deep_in_desert(&x, &p), Some(4));
    }

    #[test]
    fn first_deep_matches_oracle_on_implant() {
        // w ∘ (01)^{m+1} ∘ w' with w aperiodic of length 20, m = 4; w's last
        // bit must not extend the run leftward
        let p = DesertParams::new(4, 3);
        let w = "01100010011110001100";
        let x = bs(&(w.to_string() + &repeat("01", 5) + "0011101000110100"));
        let got = first_deep_in_desert(&x, &p);
        assert_eq!(got, oracle_first_deep(&x, &p));
        assert_eq!(got, Some(20 + 4));
    }

    #[test]
    fn first_deep_desert_free_string() {
        let p = DesertParams::new(4, 3);
        // verified desert-free by the oracle below
        let x = bs("0010011101101000110100111010001101001110110100011010011101000110");
        assert_eq!(oracle_first_deep(&x, &p), None);
        assert_eq!(first_deep_in_desert(&x, &p), None);
    }

    #[test]
    fn first_deep_short_string_has_no_desert() {
        let p = DesertParams::new(4, 3);
        assert_eq!(first_deep_in_desert(&bs("0101"), &p), None);
    }

    #[test]
    fn first_desert_resolves_location_and_end() {
        let p = DesertParams::new(4, 3);
        let x = bs(&(repeat("001", 30) + "000" + "1" + "0010011101"));
        let loc = first_desert(&x, &p).unwrap().unwrap();
        assert_eq!(loc.r, 4);
        assert_eq!(loc.pattern, pat("001"));
        assert_eq!(loc.end, Some(91));
        assert!(loc.end.unwrap() >= loc.r + p.m);
        // the defining inequality at the break
        let (end, k) = (loc.end.unwrap(), loc.pattern.k());
        assert_ne!(x.get(end + 1), x.get(end + 1 - k));

        let flat = bs("0010011101101000110100111010001101");
        assert_eq!(first_desert(&flat, &p).unwrap(), None);

        // desert running to the very end: located, but with no end
        let open = bs(&repeat("01", 30));
        let loc = first_desert(&open, &p).unwrap().unwrap();
        assert_eq!(loc.end, None);
    }

    #[test]
    fn first_deep_agrees_with_oracle_randomized() {
        let mut rng = RngStream::new(0xdead, 0).rng();
        for trial in 0..300 {
            let len = 32 + (trial % 480);
            let x = BitString::random(len, &mut rng);
            for (m, c) in [(2, 1), (3, 2), (4, 3), (6, 4)] {
                let p = DesertParams::new(m, c);
                assert_eq!(
                    first_deep_in_desert(&x, &p),
                    oracle_first_deep(&x, &p),
                    "mismatch on len={len} m={m} c={c} x={x}"
                );
            }
        }
    }

    #[test]
    fn desert_pattern_examples() {
        let p = DesertParams::new(4, 3);
        // window (001)^3 = 9 bits around r=4 (m=4)
        let x = bs(&repeat("001", 4));
        assert_eq!(desert_pattern(&x, 4, &p).unwrap(), pat("001"));

        let zeros = bs(&repeat("0", 12));
        assert_eq!(desert_pattern(&zeros, 4, &p).unwrap(), pat("0"));

        // window (01)^4 ∘ "0" has smallest period 2 (brute force over p=1,2)
        let alt = bs(&(repeat("01", 4) + "0" + "110"));
        assert_eq!(desert_pattern(&alt, 4, &p).unwrap(), pat("01"));
    }

    #[test]
    fn desert_pattern_rejects_aperiodic_window() {
        let p = DesertParams::new(4, 2);
        let x = bs(&repeat("001", 4));
        assert_eq!(
            desert_pattern(&x, 4, &p),
            Err(DesertError::PeriodExceedsC { r: 4, period: 3, c: 2 })
        );
    }

    #[test]
    fn desert_end_examples() {
        // (01)^50 ∘ "11" ∘ filler: the lockstep test first fails at end = 99
        let x = bs(&(repeat("01", 50) + "11" + "0010011101"));
        assert_eq!(desert_end(&x, 20, 2, 4).unwrap(), 99);

        // 0^60 ∘ "1" ∘ filler
        let x = bs(&(repeat("0", 60) + "1" + "0010011101"));
        assert_eq!(desert_end(&x, 20, 1, 4).unwrap(), 59);

        // (001)^30 ∘ "000" ∘ "1": the run gains two extra zeros (positions
        // 90 and 91 satisfy x[j] == x[j-3]); x[92] != x[89] stops it, so
        // end = 91 by the defining inequality
        let x = bs(&(repeat("001", 30) + "000" + "1" + "0010011101"));
        assert_eq!(desert_end(&x, 20, 3, 4).unwrap(), 91);
    }

    #[test]
    fn desert_end_needs_a_break() {
        let x = bs(&repeat("01", 30));
        assert_eq!(desert_end(&x, 10, 2, 4), Err(DesertError::NoBreakBeforeEnd));
    }

    #[test]
    fn tail_examples() {
        let sigma = 4;
        // k = 2: tail starts at x[end-k+2] = x[end]
        let x = bs(&(repeat("01", 50) + "11" + &repeat("0", 32)));
        let end = desert_end(&x, 20, 2, 4).unwrap();
        assert_eq!(end, 99);
        let tail = tail_string(&x, end, 2, sigma).unwrap();
        assert_eq!(tail.len(), 8 * sigma);
        assert_eq!(tail.bits().to_string(), format!("111{}", repeat("0", 29)));
        // first k bits are not a cyclic shift of s
        let cyc = cyc_set(&pat("01"));
        assert!(!cyc.contains(&tail.bits().subword(0, 1)));

        // k = 1: tail starts at x[end+1]
        let u = "0110100111010001101001110100011010011101";
        let x = bs(&(repeat("0", 100) + "1" + u));
        let end = desert_end(&x, 40, 1, 4).unwrap();
        assert_eq!(end, 99);
        let tail = tail_string(&x, end, 1, sigma).unwrap();
        assert_eq!(tail.bits().to_string(), format!("1{}", &u[..31]));
    }

    #[test]
    fn tail_out_of_range() {
        let x = bs(&(repeat("01", 10) + "11"));
        assert!(matches!(
            tail_string(&x, 19, 2, 8),
            Err(DesertError::TailOutOfRange { .. })
        ));
    }

    #[test]
    fn signature_examples() {
        let s = pat("01");
        let sigma = 4;

        // no second break: the signature is the whole tail
        let tail = TailString::from_bits(bs(&(String::from("11") + &repeat("01", 15))));
        let sig = signature_from_tail(&tail, &s, sigma);
        assert_eq!(sig.len(), 8 * sigma);
        assert_eq!(sig.bits(), tail.bits());

        // "11" ∘ "0101" ∘ "11" ∘ cyclic rest: scan hits the second "11" at
        // d = 6, so the signature is tail[0:6]
        let tail = TailString::from_bits(bs(&(String::from("110101") + "11" + &repeat("01", 12))));
        let sig = signature_from_tail(&tail, &s, sigma);
        assert_eq!(sig.bits().to_string(), "1101011");

        // "110110...": d=3 gives "01" (cyclic), d=4 gives "11" (break)
        let tail = TailString::from_bits(bs(&(repeat("110", 10) + "01")));
        let sig = signature_from_tail(&tail, &s, sigma);
        assert_eq!(sig.bits().to_string(), "11011");
    }

    #[test]
    fn signature_length_bounds() {
        let mut rng = RngStream::new(5, 9).rng();
        let s = pat("001");
        let sigma = 5;
        for _ in 0..200 {
            let mut bits = bs("011"); // non-cyclic start, as a real tail has
            bits = bits.concat(&BitString::random(8 * sigma - 3, &mut rng));
            let tail = TailString::from_bits(bits);
            let sig = signature_from_tail(&tail, &s, sigma);
            assert!(sig.len() >= 2 * s.k() && sig.len() <= 8 * sigma);
            // invariant: if shorter than the tail, the last k bits break
            // the cycle and no earlier eligible window does
            let cyc = cyc_set(&s);
            let k = s.k();
            if sig.len() < 8 * sigma {
                let d = sig.len() - 1;
                assert!(!cyc.contains(&sig.bits().subword(d + 1 - k, d)));
                for e in (2 * k - 1)..d {
                    assert!(cyc.contains(&tail.bits().subword(e + 1 - k, e)));
                }
            }
        }
    }

    #[test]
    fn match_right_form_examples() {
        let s = pat("01");
        let cyc = cyc_set(&s);
        // ground-truth shaped instance: desert ... 101010 | sig = 1101...
        // (the window prefix must end in desert phase for the signature's
        // first bits to be the leftmost non-cyclic subword)
        let sig = Signature { bits: bs("110100") };
        let window = bs(&(String::from("101010") + "110100" + "1010"));
        assert_eq!(match_right_form(&window, &sig, &cyc), Some(6 + 6 - 1));

        // all-cyclic window
        let window = bs(&"01".repeat(8));
        assert_eq!(match_right_form(&window, &sig, &cyc), None);

        // one bit of sig flipped (a late bit, so the leftmost break stays put)
        let window = bs(&(String::from("101010") + "110110" + "1010"));
        assert_eq!(match_right_form(&window, &sig, &cyc), None);

        // sig truncated by the window edge: reject
        let window = bs(&(String::from("101010") + "1101"));
        assert_eq!(match_right_form(&window, &sig, &cyc), None);
    }

    #[test]
    fn match_right_form_on_ground_truth_desert_suffixes() {
        // build x with an implanted (001)-desert and check that any desert
        // suffix w ending right before the signature start matches at
        // |w| + |sig| - 1
        let sigma = 4;
        let x = bs(&(String::from("0110100111") + &"001".repeat(20) + "0100111010001101001110100011010011101000"));
        let p = DesertParams::new(4, 3);
        let r = first_deep_in_desert(&x, &p).unwrap();
        let s = desert_pattern(&x, r, &p).unwrap();
        let k = s.k();
        assert_eq!(k, 3);
        let end = desert_end(&x, r, k, p.m).unwrap();
        let tail = tail_string(&x, end, k, sigma).unwrap();
        let cyc = cyc_set(&s);
        assert!(!cyc.contains(&tail.bits().subword(0, k - 1)));
        let sig = signature_from_tail(&tail, &s, sigma);
        let sig_start = end + 2 - k;
        for a in [r - p.m, r, sig_start - k, sig_start - 1] {
            let w = x.subword(a, sig_start - 1);
            let window = w.concat(sig.bits()).concat(&bs("0110"));
            assert_eq!(
                match_right_form(&window, &sig, &cyc),
                Some(w.len() + sig.len() - 1),
                "w starting at {a}"
            );
        }
    }
}
