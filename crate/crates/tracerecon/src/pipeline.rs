//! The top-level reconstruction loop and its preprocessing step.
//!
//! Reconstruction alternates two phases. Majority alignment recovers the
//! source up to (and a little into) the first desert; the end finder then
//! locates where that desert stops and hands back traces aligned past it,
//! so the next majority-alignment call can continue from there. The
//! preprocessing step appends a certified desert-free random suffix `v` of
//! half the source length, which guarantees every desert in `z = x ∘ v`
//! ends well before the right end of `z` — the end finder's scan always
//! has room to see the break.

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bitstring::{is_prefix_of_power, BitString};
use crate::bma::run_bma;
use crate::channel::{InstrumentedTrace, Streams, TraceSampler};
use crate::desert::{desert_pattern, first_deep_in_desert, DesertParams};
use crate::findend::find_end;
use crate::params::ceil_cbrt;

// ReconParams and its derivation live next door; re-exported here because
// the pipeline is their consumer of record.
pub use crate::params::{derive_params, Overrides, ParamError, Rate, ReconParams};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PreprocessError {
    #[error(
        "no desert-free suffix in {attempts} samples; the (m, C) combination is pathological"
    )]
    GaveUp { attempts: usize },
}

/// A certified desert-free suffix and how many resamples it took
/// (expected: zero).
#[derive(Clone, Debug)]
pub struct Preprocessed {
    pub v: BitString,
    pub retries: usize,
}

/// Sample a uniform string of length `⌈n/2⌉` until the desert check
/// certifies it desert-free for every pattern length up to `c`, with the
/// desert window derived from `n`. Gives up after 64 attempts, which only
/// happens when the parameters are out of any sane regime.
pub fn preprocess(n: usize, c: usize, rng: &mut ChaCha8Rng) -> Result<Preprocessed, PreprocessError> {
    const MAX_ATTEMPTS: usize = 64;
    let v_len = n.div_ceil(2);
    let dp = DesertParams::new(ceil_cbrt(n), c);
    for attempt in 0..MAX_ATTEMPTS {
        let v = BitString::random(v_len, rng);
        if first_deep_in_desert(&v, &dp).is_none() {
            return Ok(Preprocessed { v, retries: attempt });
        }
    }
    Err(PreprocessError::GaveUp {
        attempts: MAX_ATTEMPTS,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum FailureReason {
    #[error("desert reaches the end of the string (b = n-1)")]
    DesertReachesEnd,
    #[error("end estimate b = {b} below the committed frontier r+m = {frontier}")]
    NoProgress { b: usize, frontier: usize },
    #[error("end finding failed: {0}")]
    FindEnd(String),
    #[error("round budget of {0} exhausted")]
    LoopExhausted(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub enum ReconOutcome {
    Reconstructed(BitString),
    Failure { reason: FailureReason, round: usize },
}

impl ReconOutcome {
    pub fn is_success(&self) -> bool {
        matches!(self, ReconOutcome::Reconstructed(_))
    }
}

/// Reconstruction result plus exact resource accounting.
#[derive(Clone, Debug)]
pub struct ReconReport {
    pub outcome: ReconOutcome,
    /// Completed end-finding rounds.
    pub rounds: usize,
    /// Traces drawn from the sampler during this call.
    pub traces_used: u64,
}

/// Frontier snapshot handed to an observer once per round (before and after
/// the desert extension); instrumented tests check the committed prefix
/// against ground truth here.
pub struct RoundView<'a> {
    pub round: usize,
    pub r: usize,
    /// The sharp end estimate, once known this round.
    pub b: Option<usize>,
    pub u: &'a BitString,
}

pub fn reconstruct(
    sampler: &TraceSampler,
    params: &ReconParams,
    streams: &mut Streams,
) -> ReconReport {
    reconstruct_observed(sampler, params, streams, |_| {})
}

pub fn reconstruct_observed(
    sampler: &TraceSampler,
    params: &ReconParams,
    streams: &mut Streams,
    mut observe: impl FnMut(RoundView<'_>),
) -> ReconReport {
    let n = params.n;
    assert_eq!(n, sampler.source_len(), "params were derived for a different length");
    let dp = params.desert_params();
    let m = params.m;
    let n_tr = params.n_traces;
    let drawn_at_start = sampler.traces_drawn();

    macro_rules! report {
        ($outcome:expr, $rounds:expr) => {
            return ReconReport {
                outcome: $outcome,
                rounds: $rounds,
                traces_used: sampler.traces_drawn() - drawn_at_start,
            }
        };
    }

    let traces: Vec<BitString> = (0..n_tr).map(|_| sampler.draw(streams.next()).bits).collect();
    let w = run_bma(n, &traces).w;
    let (mut r, mut u) = match first_deep_in_desert(&w, &dp) {
        None => report!(ReconOutcome::Reconstructed(w), 0),
        Some(r) => (r, w.subword(0, r + m)),
    };

    let max_rounds = n.div_ceil(m);
    for round in 1..=max_rounds {
        observe(RoundView { round, r, b: None, u: &u });

        let given: Vec<InstrumentedTrace> =
            (0..n_tr).map(|_| sampler.draw(streams.next())).collect();
        let fe = match find_end(r, &u, &given, sampler, params, streams) {
            Ok(fe) => fe,
            Err(e) => report!(
                ReconOutcome::Failure {
                    reason: FailureReason::FindEnd(e.to_string()),
                    round,
                },
                round
            ),
        };
        let b = fe.end;
        if b + 1 >= n {
            report!(
                ReconOutcome::Failure {
                    reason: FailureReason::DesertReachesEnd,
                    round,
                },
                round
            );
        }
        if b < r + m {
            report!(
                ReconOutcome::Failure {
                    reason: FailureReason::NoProgress { b, frontier: r + m },
                    round,
                },
                round
            );
        }

        // commit the desert up to its end: positions r+m+1..=b continue the
        // pattern in lockstep
        let s = desert_pattern(&u, r, &dp).expect("u carries the desert window around r");
        let k = s.k();
        for i in (r + m + 1)..=b {
            let bit = u.get(i - k);
            u.push(bit);
        }
        debug_assert!(is_prefix_of_power(&u.subword(r - m, b), &s));
        observe(RoundView { round, r, b: Some(b), u: &u });

        // each trace continues after the image of x[end]; a nil alignment
        // (l = -1) leaves the whole trace, one of the few substitutions
        // robust majority alignment absorbs
        let suffixes: Vec<BitString> = given
            .iter()
            .zip(&fe.aligns)
            .map(|(t, &l)| {
                let start = (l + 1) as usize;
                if start >= t.bits.len() {
                    BitString::new()
                } else {
                    t.bits.subword(start, t.bits.len() - 1)
                }
            })
            .collect();

        let w = run_bma(n - b - 1, &suffixes).w;
        match first_deep_in_desert(&w, &dp) {
            None => {
                let full = u.concat(&w);
                debug_assert_eq!(full.len(), n);
                report!(ReconOutcome::Reconstructed(full), round);
            }
            Some(r_star) => {
                u = u.concat(&w.subword(0, r_star + m));
                let new_r = b + 1 + r_star;
                assert!(new_r >= r + 2 * m, "frontier must advance by at least 2m per round");
                r = new_r;
                if u.len() == n {
                    report!(ReconOutcome::Reconstructed(u), round);
                }
            }
        }
    }
    ReconReport {
        outcome: ReconOutcome::Failure {
            reason: FailureReason::LoopExhausted(max_rounds),
            round: max_rounds,
        },
        rounds: max_rounds,
        traces_used: sampler.traces_drawn() - drawn_at_start,
    }
}
