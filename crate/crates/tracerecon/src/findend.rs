//! Locating the end of the current desert.
//!
//! Three layers, exactly as the reconstruction loop consumes them:
//!
//! * **Coarse estimation** scans staggered trace intervals until at least
//!   half of a small batch of traces shows a pattern break, giving an
//!   integer `β̂` within `2σ` of `(1-δ)·end`, then recovers the desert's
//!   tail string by plurality vote over a second batch.
//! * **Alignment** decides, for one trace, which trace position carries the
//!   image of `x[end]`. For patterns of length `k ≥ 2` it demands that the
//!   window `J = [β̂-3σ : β̂+12σ]` decompose as `w ∘ sig ∘ v` with the
//!   signature's first `k` bits forming the leftmost non-cyclic subword,
//!   and then keeps the answer only with probability `(1-δ)^{15σ-L}` —
//!   the discount that removes the length bias of the match position. For
//!   `k = 1` it simply reports the position before the first complement
//!   bit in `[β̂-3σ : β̂+3σ]`.
//! * **`find_end`** aligns the caller's traces, then draws `γ` fresh ones
//!   and averages their non-nil alignments into the sharp estimate
//!   `end = round(mean / (1-δ))`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::bitstring::{cyc_set, BitString, CycSet, Pattern};
use crate::channel::{InstrumentedTrace, SparseTrace, Streams, TraceSampler};
use crate::desert::{
    desert_pattern, match_right_form, signature_from_tail, DesertError, Signature, TailString,
};
use crate::params::ReconParams;

#[derive(Debug, Error)]
pub enum FindEndError {
    #[error("coarse estimate: interval scan exhausted the string without finding a break")]
    NoBreakFound,
    #[error("coarse estimate: no trace cast a tail vote")]
    VoteFailed,
    #[error("sharp estimate: all {0} alignments returned nil")]
    AllNil(usize),
    #[error(transparent)]
    Desert(#[from] DesertError),
}

/// Coarse location of the desert end in trace coordinates, plus the voted
/// tail string.
#[derive(Clone, Debug)]
pub struct CoarseEstimate {
    pub end_image: usize,
    pub tail: TailString,
}

/// Sharp desert-end estimate (source coordinates) and one alignment per
/// given trace, `-1` encoding nil.
#[derive(Clone, Debug)]
pub struct FindEndResult {
    pub end: usize,
    pub aligns: Vec<i64>,
}

/// For each start `q`, the nearest `q' >= q` where a `k`-subword outside
/// `cyc` begins; `usize::MAX` past the last one.
fn next_noncyc_table(y: &BitString, cyc: &CycSet) -> Vec<usize> {
    let k = cyc.k();
    let len = y.len();
    let mut next = vec![usize::MAX; len + 1];
    if len < k {
        return next;
    }
    let mask = u64::MAX >> (64 - k);
    let mut code = y.window_code(len - k, k);
    for q in (0..=len - k).rev() {
        if q + k < len {
            // roll leftward: drop the high bit, shift in y[q]
            code = ((code << 1) | (y.get(q) as u64)) & mask;
        }
        next[q] = if !cyc.contains_code(code) { q } else { next[q + 1] };
    }
    next
}

/// Phase 1 plus phase 2 of the coarse procedure: the break interval scan
/// and the tail vote. `prefix` is the committed source prefix through
/// `first_deep + m`; the desert window it carries around `first_deep` is
/// where the pattern is rederived.
pub fn coarse_estimate(
    first_deep: usize,
    prefix: &BitString,
    sampler: &TraceSampler,
    params: &ReconParams,
    streams: &mut Streams,
) -> Result<CoarseEstimate, FindEndError> {
    let s = desert_pattern(prefix, first_deep, &params.desert_params())?;
    let k = s.k();
    let cyc = cyc_set(&s);
    let sigma = params.sigma;
    let alpha = params.alpha;
    let n = sampler.source_len();
    let delta = params.delta;

    // Phase 1: staggered intervals [r̂+jσ : r̂+(j+4)σ]; take the leftmost one
    // in which at least half the traces contain a non-cyclic k-subword.
    let r_hat = ((1.0 - delta) * first_deep as f64).ceil() as usize;
    let batch: Vec<BitString> = (0..alpha).map(|_| sampler.draw(streams.next()).bits).collect();
    let tables: Vec<Vec<usize>> = batch.iter().map(|y| next_noncyc_table(y, &cyc)).collect();

    let j_max = (n.saturating_sub(r_hat)).div_ceil(sigma);
    let mut end_image = None;
    'scan: for j in 0..=j_max {
        let left = r_hat + j * sigma;
        let right = r_hat + (j + 4) * sigma;
        let mut hits = 0usize;
        for (y, table) in batch.iter().zip(&tables) {
            if left >= y.len() || right + 1 < k {
                continue;
            }
            let q_hi = (right + 1 - k).min(y.len().saturating_sub(k));
            if table[left] <= q_hi {
                hits += 1;
            }
        }
        if 2 * hits >= alpha {
            // the estimate is a valid source-side coordinate
            end_image = Some(right.min(n - 1));
            break 'scan;
        }
    }
    let end_image = end_image.ok_or(FindEndError::NoBreakFound)?;

    // Phase 2: fresh traces vote for the 8σ bits starting at their first
    // non-cyclic subword inside J' = [β̂-3σ : β̂+3σ].
    let mut votes: std::collections::BTreeMap<BitString, usize> = Default::default();
    for _ in 0..alpha {
        let y = sampler.draw(streams.next()).bits;
        let lo = end_image.saturating_sub(3 * sigma);
        if lo >= y.len() {
            continue;
        }
        let hi = (end_image + 3 * sigma).min(y.len() - 1);
        if hi + 1 < lo + k {
            continue;
        }
        let mut tau = None;
        for q in lo..=(hi + 1 - k) {
            if !cyc.contains_code(y.window_code(q, k)) {
                tau = Some(q);
                break;
            }
        }
        if let Some(tau) = tau {
            if tau + 8 * sigma <= y.len() {
                *votes.entry(y.subword(tau, tau + 8 * sigma - 1)).or_insert(0) += 1;
            }
        }
    }
    // plurality; BTreeMap order makes ties go to the lexicographically
    // smallest candidate
    let mut best: Option<(&BitString, usize)> = None;
    for (cand, &count) in &votes {
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((cand, count));
        }
    }
    let (winner, _) = best.ok_or(FindEndError::VoteFailed)?;
    Ok(CoarseEstimate {
        end_image,
        tail: TailString::from_bits(winner.clone()),
    })
}

/// One coarse estimate specialized for aligning traces against the desert
/// end. Build it once, align many traces.
pub struct Aligner {
    end_image: usize,
    sigma: usize,
    delta: f64,
    mode: AlignMode,
}

enum AlignMode {
    /// `k = 1`: the desert is a run of `desert_bit`.
    SingleBit { desert_bit: bool },
    /// `k >= 2`: right-form matching against the signature.
    WithSignature { sig: Signature, cyc: CycSet, k: usize },
}

impl Aligner {
    pub fn new(est: &CoarseEstimate, s: &Pattern, params: &ReconParams) -> Aligner {
        let mode = if s.k() == 1 {
            AlignMode::SingleBit {
                desert_bit: s.bits().get(0),
            }
        } else {
            AlignMode::WithSignature {
                sig: signature_from_tail(&est.tail, s, params.sigma),
                cyc: cyc_set(s),
                k: s.k(),
            }
        };
        Aligner {
            end_image: est.end_image,
            sigma: params.sigma,
            delta: params.delta,
            mode,
        }
    }

    pub fn signature(&self) -> Option<&Signature> {
        match &self.mode {
            AlignMode::WithSignature { sig, .. } => Some(sig),
            AlignMode::SingleBit { .. } => None,
        }
    }

    /// Inclusive trace-position window the aligner inspects, before
    /// clamping; the lower bound may be negative.
    pub fn window_bounds(&self) -> (i64, i64) {
        let b = self.end_image as i64;
        let s = self.sigma as i64;
        match self.mode {
            AlignMode::SingleBit { .. } => (b - 3 * s, b + 3 * s),
            AlignMode::WithSignature { .. } => (b - 3 * s, b + 12 * s),
        }
    }

    /// Align a fully materialized trace.
    pub fn align(&self, y: &BitString, rng: &mut ChaCha8Rng) -> Option<usize> {
        let (lo, hi) = self.window_bounds();
        match &self.mode {
            AlignMode::WithSignature { .. } => {
                // a truncated window is a nil, not a shorter search
                if lo < 0 || hi >= y.len() as i64 {
                    return None;
                }
                let window = y.subword(lo as usize, hi as usize);
                self.align_in_window(&window, lo as usize, rng)
            }
            AlignMode::SingleBit { desert_bit } => {
                let lo = lo.max(0) as usize;
                if lo >= y.len() {
                    return None;
                }
                let hi = (hi.min(y.len() as i64 - 1)) as usize;
                for q in lo..=hi {
                    if y.get(q) != *desert_bit {
                        // the hit is the image of x[end+1]; report the
                        // position before it, the image of x[end]
                        return if q == 0 { None } else { Some(q - 1) };
                    }
                }
                None
            }
        }
    }

    /// Align a sparse trace, materializing only the inspected window.
    pub fn align_sparse(
        &self,
        sampler: &TraceSampler,
        sp: &SparseTrace,
        rng: &mut ChaCha8Rng,
    ) -> Option<usize> {
        let trace_len = sp.trace_len();
        let (lo, hi) = self.window_bounds();
        match &self.mode {
            AlignMode::WithSignature { .. } => {
                if lo < 0 || hi >= trace_len as i64 {
                    return None;
                }
                let window = sampler.window(sp, lo as usize, hi as usize);
                self.align_in_window(&window, lo as usize, rng)
            }
            AlignMode::SingleBit { desert_bit } => {
                let lo = lo.max(0) as usize;
                if lo >= trace_len {
                    return None;
                }
                let hi = (hi.min(trace_len as i64 - 1)) as usize;
                let window = sampler.window(sp, lo, hi);
                for (off, bit) in window.iter().enumerate() {
                    if bit != *desert_bit {
                        let q = lo + off;
                        return if q == 0 { None } else { Some(q - 1) };
                    }
                }
                None
            }
        }
    }

    fn align_in_window(
        &self,
        window: &BitString,
        window_lo: usize,
        rng: &mut ChaCha8Rng,
    ) -> Option<usize> {
        let AlignMode::WithSignature { sig, cyc, k } = &self.mode else {
            unreachable!("window alignment is the k >= 2 path");
        };
        debug_assert_eq!(window.len(), 15 * self.sigma + 1);
        let l = match_right_form(window, sig, cyc)?;
        // discount: without it, matches that sit further right (longer
        // surviving prefixes) would be over-represented in the average
        let p = (1.0 - self.delta).powi((15 * self.sigma - l) as i32);
        if rng.random::<f64>() < p {
            Some(window_lo + (l + 1 - sig.len()) + (k - 2))
        } else {
            None
        }
    }
}

/// Stateless form of alignment matching the procedure's description; the
/// loops in [`find_end`] build the [`Aligner`] once instead.
pub fn align(
    est: &CoarseEstimate,
    s: &Pattern,
    y: &BitString,
    params: &ReconParams,
    rng: &mut ChaCha8Rng,
) -> Option<usize> {
    Aligner::new(est, s, params).align(y, rng)
}

/// Locate the desert end sharply and align the given traces to it.
pub fn find_end(
    first_deep: usize,
    prefix: &BitString,
    given: &[InstrumentedTrace],
    sampler: &TraceSampler,
    params: &ReconParams,
    streams: &mut Streams,
) -> Result<FindEndResult, FindEndError> {
    let est = coarse_estimate(first_deep, prefix, sampler, params, streams)?;
    let s = desert_pattern(prefix, first_deep, &params.desert_params())?;
    let aligner = Aligner::new(&est, &s, params);

    let aligns: Vec<i64> = given
        .iter()
        .map(|t| {
            let mut rng = streams.next().rng();
            aligner.align(&t.bits, &mut rng).map_or(-1, |l| l as i64)
        })
        .collect();

    // fresh traces for the sharp estimate; a reserved stream block keeps
    // the fan-out deterministic under any parallel schedule
    let gamma = params.gamma;
    let range = streams.reserve(gamma as u64);
    let outcomes: Vec<Option<usize>> = (0..gamma)
        .into_par_iter()
        .with_min_len(512)
        .map(|i| {
            let mut rng = range.get(i as u64).rng();
            let sp = sampler.draw_sparse(&mut rng);
            aligner.align_sparse(sampler, &sp, &mut rng)
        })
        .collect();

    let mut sum = 0u64;
    let mut count = 0u64;
    for h in outcomes.into_iter().flatten() {
        sum += h as u64;
        count += 1;
    }
    if count == 0 {
        return Err(FindEndError::AllNil(gamma));
    }
    let mean = sum as f64 / count as f64;
    let end = (mean / (1.0 - params.delta)).round() as usize;
    Ok(FindEndResult { end, aligns })
}
