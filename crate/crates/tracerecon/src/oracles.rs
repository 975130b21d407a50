//! Independent reference implementations used by the test suites and the
//! stats CLI modes: exhaustive scans and Monte-Carlo measurements that
//! deliberately share no code with the pipeline paths they check.

use rayon::prelude::*;
use std::collections::HashSet;
use std::fmt;

use crate::bitstring::BitString;
use crate::channel::{transmit, RngStream, Streams, TraceSampler};
use crate::desert::{desert_pattern, first_deep_in_desert, tail_string, DesertParams};
use crate::findend::{Aligner, CoarseEstimate};
use crate::params::ReconParams;

/// Outcome of one oracle sweep; a failure always carries a re-checkable
/// counterexample.
#[derive(Clone, Debug)]
pub struct OracleReport {
    pub claim: &'static str,
    pub instance: String,
    pub pass: bool,
    pub counterexample: Option<String>,
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} [{}]",
            self.claim,
            if self.pass { "pass" } else { "FAIL" },
            self.instance
        )?;
        if let Some(cx) = &self.counterexample {
            write!(f, " counterexample: {cx}")?;
        }
        Ok(())
    }
}

/// Exhaustive desert scan: for every candidate center, brute-force the
/// window's smallest period straight from the defining property and compare
/// it against `C`. Quadratic in the window, no failure function, no
/// run-length tricks — the point is independence from the fast detector.
pub fn oracle_first_deep(x: &BitString, p: &DesertParams) -> Option<usize> {
    let n = x.len();
    let m = p.m;
    let big_m = p.window_len();
    if n < big_m {
        return None;
    }
    (m..=(n - 1 - m)).find(|&i| {
        let lo = i - m;
        let period = (1..big_m)
            .find(|&q| (0..big_m - q).all(|j| x.get(lo + j) == x.get(lo + j + q)))
            .unwrap_or(big_m);
        period <= p.c
    })
}

/// Exhaustive check of the middle-deletion property: for every primitive
/// pattern of length `2..=k_max` and every `(2k+1)`-bit string whose
/// `k`-subwords are all cyclic shifts, deleting the middle bit must create
/// a non-cyclic `k`-subword.
pub fn check_middle_deletion(k_max: usize) -> OracleReport {
    assert!((2..=12).contains(&k_max));
    let mut checked = 0u64;
    for k in 2..=k_max {
        for s_code in 0u32..(1 << k) {
            if !primitive_code(s_code, k) {
                continue;
            }
            let cyc = rotation_codes(s_code, k);
            let w_len = 2 * k + 1;
            'w: for w in 0u32..(1 << w_len) {
                for q in 0..=w_len - k {
                    let sub = (w >> q) & ((1 << k) - 1);
                    if !cyc.contains(&sub) {
                        continue 'w;
                    }
                }
                checked += 1;
                // delete bit k (the middle)
                let low = w & ((1 << k) - 1);
                let high = (w >> (k + 1)) << k;
                let deleted = low | high;
                let survives = (0..=(w_len - 1) - k).any(|q| {
                    let sub = (deleted >> q) & ((1 << k) - 1);
                    !cyc.contains(&sub)
                });
                if !survives {
                    return OracleReport {
                        claim: "middle-deletion creates a non-cyclic subword",
                        instance: format!("k_max={k_max}"),
                        pass: false,
                        counterexample: Some(format!(
                            "s={} w={}",
                            code_string(s_code, k),
                            code_string(w, w_len)
                        )),
                    };
                }
            }
        }
    }
    OracleReport {
        claim: "middle-deletion creates a non-cyclic subword",
        instance: format!("k_max={k_max}, {checked} qualifying strings"),
        pass: true,
        counterexample: None,
    }
}

fn primitive_code(s: u32, k: usize) -> bool {
    (1..k).all(|d| !k.is_multiple_of(d) || (0..k).any(|i| (s >> i) & 1 != (s >> (i % d)) & 1))
}

fn rotation_codes(s: u32, k: usize) -> HashSet<u32> {
    (0..k)
        .map(|r| {
            let rotated = (s >> r) | (s << (k - r));
            rotated & ((1 << k) - 1)
        })
        .collect()
}

fn code_string(code: u32, len: usize) -> String {
    (0..len)
        .map(|i| if (code >> i) & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Monte-Carlo measurement of the alignment estimator on a ground-truth
/// instance: mean and standard error of the non-nil outputs, plus the nil
/// rate. The coarse estimate is instantiated at its ideal value
/// `round((1-δ)·end)` so the measurement isolates the aligner itself.
#[derive(Clone, Copy, Debug)]
pub struct AlignBias {
    pub mean: f64,
    pub stderr: f64,
    pub nil_rate: f64,
    pub nonnil: u64,
}

pub fn mc_align_bias(
    x: &BitString,
    end: usize,
    params: &ReconParams,
    trials: u64,
    seed: u64,
) -> AlignBias {
    let dp = params.desert_params();
    let r = first_deep_in_desert(x, &dp).expect("instance has a desert");
    let s = desert_pattern(x, r, &dp).expect("desert pattern");
    let tail = tail_string(x, end, s.k(), params.sigma).expect("tail in range");
    let est = CoarseEstimate {
        end_image: ((1.0 - params.delta) * end as f64).round() as usize,
        tail,
    };
    let aligner = Aligner::new(&est, &s, params);
    let sampler = TraceSampler::new(x, params.delta);
    let range = Streams::new(seed).reserve(trials);

    let (sum, sumsq, count) = (0..trials as usize)
        .into_par_iter()
        .with_min_len(1024)
        .map(|i| {
            let mut rng = range.get(i as u64).rng();
            let sp = sampler.draw_sparse(&mut rng);
            match aligner.align_sparse(&sampler, &sp, &mut rng) {
                Some(l) => (l as u128, (l as u128) * (l as u128), 1u64),
                None => (0, 0, 0),
            }
        })
        .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));

    let mean = sum as f64 / count as f64;
    let var = (sumsq as f64 / count as f64 - mean * mean).max(0.0);
    AlignBias {
        mean,
        stderr: (var / count as f64).sqrt(),
        nil_rate: (trials - count) as f64 / trials as f64,
        nonnil: count,
    }
}

/// Empirical channel statistics against the binomial model.
#[derive(Clone, Debug)]
pub struct ChannelStats {
    pub trials: u64,
    pub mean_len: f64,
    pub var_len: f64,
    /// Per-position survival frequency.
    pub survival: Vec<f64>,
}

pub fn mc_channel_stats(x: &BitString, delta: f64, trials: u64, seed: u64) -> ChannelStats {
    assert!(trials >= 100, "too few trials for meaningful statistics");
    let n = x.len();
    let mut survived = vec![0u64; n];
    let mut sum = 0u128;
    let mut sumsq = 0u128;
    for t in 0..trials {
        let tr = transmit(x, delta, &mut RngStream::new(seed, t).rng());
        let len = tr.bits.len() as u128;
        sum += len;
        sumsq += len * len;
        for j in 0..tr.bits.len() {
            survived[tr.record.origin(j)] += 1;
        }
    }
    let mean_len = sum as f64 / trials as f64;
    ChannelStats {
        trials,
        mean_len,
        var_len: (sumsq as f64 / trials as f64 - mean_len * mean_len).max(0.0),
        survival: survived.iter().map(|&s| s as f64 / trials as f64).collect(),
    }
}
