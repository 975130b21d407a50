//! Bitwise majority alignment.
//!
//! Each trace is zero-padded to the target length and gets a pointer
//! starting at its first bit. Every round takes the majority over the
//! pointed-at bits, emits it, and advances exactly the pointers that agreed
//! with the vote. The procedure is deterministic: all randomness lives in
//! the traces.
//!
//! The module also carries the diagnostic side: the goodness predicate on
//! deletion records under which majority alignment is provably robust, and
//! an instrumented replay that checks the alignment invariants
//! (nonnegative bounded pointer distances, prefix correctness, and the
//! total-distance budget) against ground truth.

use thiserror::Error;

use crate::bitstring::BitString;
use crate::channel::{padded_origin, DeletionRecord, InstrumentedTrace};
use crate::desert::DesertParams;
use crate::params::ReconParams;

/// Output of one majority-alignment run.
#[derive(Clone, Debug)]
pub struct BmaResult {
    pub w: BitString,
    /// Per round, how many inputs agreed with the majority bit.
    pub round_margins: Vec<u32>,
}

/// Strict majority; an exact tie goes to 0. The tie rule is
/// implementation-defined (the default trace count is forced odd precisely
/// so it never fires).
pub fn majority_tiebreak(bits: &[bool]) -> bool {
    assert!(!bits.is_empty());
    let ones = bits.iter().filter(|&&b| b).count();
    2 * ones > bits.len()
}

#[inline]
fn padded_bit(trace: &BitString, i: usize) -> bool {
    if i < trace.len() {
        trace.get(i)
    } else {
        false
    }
}

/// Run majority alignment over `traces` for `n_prime` rounds.
///
/// Traces longer than `n_prime` are effectively truncated: a pointer never
/// moves past round count, so bits beyond `n_prime` are unreachable. (The
/// reconstruction loop feeds whole traces back in for the few inputs whose
/// desert-end alignment failed; those are the substitutions the robustness
/// guarantee absorbs.)
pub fn run_bma(n_prime: usize, traces: &[BitString]) -> BmaResult {
    let n_inputs = traces.len();
    assert!(n_inputs >= 1, "majority alignment needs at least one trace");
    let mut current = vec![0usize; n_inputs];
    let mut w = BitString::with_capacity(n_prime);
    let mut round_margins = Vec::with_capacity(n_prime);
    let mut votes = vec![false; n_inputs];
    for _t in 0..n_prime {
        let mut ones = 0usize;
        for (i, trace) in traces.iter().enumerate() {
            let b = padded_bit(trace, current[i]);
            votes[i] = b;
            ones += b as usize;
        }
        let maj = 2 * ones > n_inputs;
        let agree = if maj { ones } else { n_inputs - ones };
        w.push(maj);
        round_margins.push(agree as u32);
        for i in 0..n_inputs {
            if votes[i] == maj {
                current[i] += 1;
            }
        }
    }
    BmaResult { w, round_margins }
}

/// Deletion-sparsity condition under which majority alignment is robust.
///
/// With `R = ⌈9·count/10⌉`: (i) every record has at most `C` deletions in
/// every window of length `L1 = 2C²M`, and (ii) every window of length
/// `L2 = M+C+1` touches at most `R/C³` records. Checking (ii) against all
/// records with the `R`-based threshold is exactly the event "every
/// `R`-subset of the records satisfies the textbook condition". Windows
/// longer than the string shrink to the whole string.
pub fn goodness(records: &[&DeletionRecord], n_prime: usize, p: &DesertParams) -> bool {
    if records.is_empty() || n_prime == 0 {
        return true;
    }
    let c = p.c;
    let big_m = p.window_len();
    let r_good = ReconParams::r_good(records.len());
    let l1 = (2 * c * c * big_m).min(n_prime);
    let l2 = (big_m + c + 1).min(n_prime);

    // (i): max deletions in any L1-window, per record
    for rec in records {
        let dels: Vec<usize> = rec.deleted().iter().copied().filter(|&d| d < n_prime).collect();
        let mut lo = 0usize;
        for hi in 0..dels.len() {
            while dels[hi] - dels[lo] + 1 > l1 {
                lo += 1;
            }
            if hi - lo + 1 > c {
                return false;
            }
        }
    }

    // (ii): for every L2-window, the number of records with a deletion in it
    let window_starts = n_prime - l2 + 1;
    let mut diff = vec![0i32; window_starts + 1];
    for rec in records {
        // window starts covered by this record, deduplicated by merging
        let mut covered_until: Option<usize> = None;
        for &d in rec.deleted() {
            if d >= n_prime {
                break;
            }
            let lo = d.saturating_sub(l2 - 1);
            let hi = d.min(window_starts - 1);
            let lo = match covered_until {
                Some(u) if lo <= u => {
                    if hi <= u {
                        continue;
                    }
                    u + 1
                }
                _ => lo,
            };
            diff[lo] += 1;
            diff[hi + 1] -= 1;
            covered_until = Some(hi);
        }
    }
    let mut running = 0i64;
    for &d in &diff[..window_starts] {
        running += d as i64;
        // count <= R/C^3, compared exactly in integers
        if running as u64 * (c * c * c) as u64 > r_good as u64 {
            return false;
        }
    }
    true
}

/// Per-trace view of the replayed alignment at the start of a round.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BmaTraceState {
    /// Pointer into the padded trace.
    pub current: usize,
    /// Source position of the pointed-at bit (virtual past the source end).
    pub position: usize,
    /// `position - t`: how far the trace runs ahead of the round index.
    pub distance: i64,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum BmaInvariantViolation {
    #[error("round {round}: output bit differs from the source")]
    PrefixMismatch { round: usize },
    #[error("round {round}, trace {trace}: distance {distance} is negative")]
    NegativeDistance { round: usize, trace: usize, distance: i64 },
    #[error("round {round}, trace {trace}: distance {distance} exceeds C = {c}")]
    DistanceExceedsC {
        round: usize,
        trace: usize,
        distance: i64,
        c: usize,
    },
    #[error("round {round}: total distance {sum} exceeds 2R/C (R = {r}, C = {c})")]
    SumBudgetExceeded { round: usize, sum: i64, r: usize, c: usize },
}

/// Replay majority alignment against ground truth and check, for every
/// round `t <= upto`: the emitted prefix matches the source, every pointer
/// distance is in `[0, C]`, and the distances sum to at most `2R/C`.
///
/// Callers gate this on [`goodness`]; on traces that are not good the
/// invariants carry no guarantee.
pub fn check_bma_invariant(
    x_prime: &BitString,
    traces: &[InstrumentedTrace],
    upto: usize,
    p: &DesertParams,
) -> Result<(), BmaInvariantViolation> {
    let n_prime = x_prime.len();
    assert!(upto <= n_prime, "upto must be at most |x'|");
    let n_inputs = traces.len();
    assert!(n_inputs >= 1);
    let r_good = ReconParams::r_good(n_inputs);
    let c = p.c;

    let mut current = vec![0usize; n_inputs];
    let mut votes = vec![false; n_inputs];
    for t in 0..=upto {
        let mut sum: i64 = 0;
        for (i, trace) in traces.iter().enumerate() {
            let position = padded_origin(trace, current[i]);
            let distance = position as i64 - t as i64;
            if distance < 0 {
                return Err(BmaInvariantViolation::NegativeDistance {
                    round: t,
                    trace: i,
                    distance,
                });
            }
            if distance > c as i64 {
                return Err(BmaInvariantViolation::DistanceExceedsC {
                    round: t,
                    trace: i,
                    distance,
                    c,
                });
            }
            sum += distance;
        }
        if sum * c as i64 > 2 * r_good as i64 {
            return Err(BmaInvariantViolation::SumBudgetExceeded {
                round: t,
                sum,
                r: r_good,
                c,
            });
        }
        if t == upto {
            break;
        }
        let mut ones = 0usize;
        for (i, trace) in traces.iter().enumerate() {
            let b = padded_bit(&trace.bits, current[i]);
            votes[i] = b;
            ones += b as usize;
        }
        let maj = 2 * ones > n_inputs;
        if maj != x_prime.get(t) {
            return Err(BmaInvariantViolation::PrefixMismatch { round: t });
        }
        for i in 0..n_inputs {
            if votes[i] == maj {
                current[i] += 1;
            }
        }
    }
    Ok(())
}

/// Full per-round pointer states of a replay; diagnostic companion to
/// [`check_bma_invariant`] for small instances.
pub fn bma_replay_states(traces: &[InstrumentedTrace], rounds: usize) -> Vec<Vec<BmaTraceState>> {
    let n_inputs = traces.len();
    let mut current = vec![0usize; n_inputs];
    let mut out = Vec::with_capacity(rounds);
    let mut votes = vec![false; n_inputs];
    for t in 0..rounds {
        out.push(
            (0..n_inputs)
                .map(|i| {
                    let position = padded_origin(&traces[i], current[i]);
                    BmaTraceState {
                        current: current[i],
                        position,
                        distance: position as i64 - t as i64,
                    }
                })
                .collect(),
        );
        let mut ones = 0usize;
        for (i, trace) in traces.iter().enumerate() {
            let b = padded_bit(&trace.bits, current[i]);
            votes[i] = b;
            ones += b as usize;
        }
        let maj = 2 * ones > n_inputs;
        for i in 0..n_inputs {
            if votes[i] == maj {
                current[i] += 1;
            }
        }
    }
    out
}
