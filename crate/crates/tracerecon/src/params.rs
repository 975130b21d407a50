//! Derivation of every constant the reconstruction pipeline consumes, from
//! `(n, δ)` or `(n, ε)` with `δ = n^-(1/3+ε)`.
//!
//! Derived values follow the asymptotic recipes (`m = ⌈n^{1/3}⌉`,
//! `σ = ⌈sqrt(δn)·log2 n⌉`, and so on) but every field can be overridden,
//! and out-of-regime combinations are reported as warnings rather than
//! silently clamped. The one deliberate departure is the cap `C ≤ 12`: the
//! theoretical `C = ⌈100/ε⌉` only matters for the proofs, and at desk scale
//! it would make desert detection pointlessly expensive while detecting
//! nothing new. See the README for the discussion.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::desert::DesertParams;

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("n = {0} is too small (need n >= 8)")]
    TooSmall(usize),
    #[error("delta = {0} is outside [0, 1)")]
    BadDelta(f64),
    #[error("epsilon = {0} yields a deletion rate outside [0, 1)")]
    BadEpsilon(f64),
}

/// Deletion rate given directly, or via the exponent in `δ = n^-(1/3+ε)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Rate {
    Delta(f64),
    Epsilon(f64),
}

/// Optional per-field replacements for the derived constants. The
/// serialized names match the `--override` keys (`m`, `C`, `N`, `alpha`,
/// `gamma`, `sigma`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Overrides {
    pub m: Option<usize>,
    #[serde(rename = "C")]
    pub c: Option<usize>,
    /// Trace count per majority-alignment call.
    #[serde(rename = "N")]
    pub n_traces: Option<usize>,
    pub alpha: Option<usize>,
    pub gamma: Option<usize>,
    pub sigma: Option<usize>,
}

/// All derived constants for one reconstruction instance.
#[derive(Clone, Debug, PartialEq)]
pub struct ReconParams {
    /// Source length the constants were derived for (after preprocessing,
    /// this is the length of `z = x ∘ v`).
    pub n: usize,
    pub delta: f64,
    /// Exponent with `delta = n^-(1/3+epsilon)`; infinite when `delta = 0`.
    pub epsilon: f64,
    /// Desert half-window, `⌈n^{1/3}⌉` by default.
    pub m: usize,
    /// Longest desert pattern length.
    pub c: usize,
    /// Positional deviation scale `⌈sqrt(δn)·log2 n⌉` (at least 1).
    pub sigma: usize,
    /// Traces per majority-alignment call.
    pub n_traces: usize,
    /// Traces per coarse-estimation phase.
    pub alpha: usize,
    /// Traces for the sharp end estimate.
    pub gamma: usize,
    /// Regime complaints; never silently fixed.
    pub warnings: Vec<String>,
    /// Names of fields that came from overrides rather than derivation.
    pub overridden: Vec<&'static str>,
}

impl ReconParams {
    /// `M = 2m + 1`.
    pub fn window_len(&self) -> usize {
        2 * self.m + 1
    }

    pub fn desert_params(&self) -> DesertParams {
        DesertParams::new(self.m, self.c)
    }

    /// Size of the trace subsets the goodness condition quantifies over:
    /// `R = ⌈9N/10⌉`.
    pub fn r_good(n_traces: usize) -> usize {
        (9 * n_traces).div_ceil(10)
    }
}

/// Smallest integer `m` with `m^3 >= n`.
pub fn ceil_cbrt(n: usize) -> usize {
    let cube = |v: usize| (v as u128).pow(3);
    let mut m = ((n as f64).cbrt().round() as usize).max(1);
    while cube(m) < n as u128 {
        m += 1;
    }
    while m > 1 && cube(m - 1) >= n as u128 {
        m -= 1;
    }
    m
}

fn ceil_log2(n: usize) -> f64 {
    (n as f64).log2()
}

pub fn derive_params(n: usize, rate: Rate, overrides: &Overrides) -> Result<ReconParams, ParamError> {
    if n < 8 {
        return Err(ParamError::TooSmall(n));
    }
    let log2n = ceil_log2(n);
    let (delta, epsilon) = match rate {
        Rate::Delta(d) => {
            if !(0.0..1.0).contains(&d) || d.is_nan() {
                return Err(ParamError::BadDelta(d));
            }
            let eps = if d == 0.0 {
                f64::INFINITY
            } else {
                -d.ln() / (n as f64).ln() - 1.0 / 3.0
            };
            (d, eps)
        }
        Rate::Epsilon(e) => {
            if e.is_nan() {
                return Err(ParamError::BadEpsilon(e));
            }
            let d = (n as f64).powf(-(1.0 / 3.0 + e));
            if !(0.0..1.0).contains(&d) {
                return Err(ParamError::BadEpsilon(e));
            }
            (d, e)
        }
    };

    let mut overridden = Vec::new();
    let mut take = |name: &'static str, value: Option<usize>, derived: usize| -> usize {
        match value {
            Some(v) => {
                overridden.push(name);
                v
            }
            None => derived,
        }
    };

    let m = take("m", overrides.m, ceil_cbrt(n));
    // outside the finite-exponent regime (delta = 0 or delta >= n^-1/3)
    // the formula is meaningless; fall back to the cap. The cap itself is
    // clamped to m/2: patterns approaching the window length make every
    // random window a desert, which kills preprocessing at small n.
    let c_cap = 12.min(m / 2).max(1);
    let c_derived = if epsilon.is_finite() && epsilon > 0.0 {
        ((100.0 / epsilon).ceil() as usize).clamp(1, c_cap)
    } else {
        c_cap
    };
    let c = take("C", overrides.c, c_derived);
    let sigma = take(
        "sigma",
        overrides.sigma,
        (((delta * n as f64).sqrt() * log2n).ceil() as usize).max(1),
    );
    let n_traces = take(
        "N",
        overrides.n_traces,
        ((6.0 * log2n).ceil() as usize) | 1,
    );
    let alpha = take(
        "alpha",
        overrides.alpha,
        if epsilon > 0.0 && epsilon.is_finite() {
            ((2.0 / epsilon).ceil() as usize).max(10)
        } else {
            10
        },
    );
    let gamma = take(
        "gamma",
        overrides.gamma,
        ((8.0 * (sigma * sigma) as f64 * log2n).ceil() as usize).max(1),
    );

    let mut warnings = Vec::new();
    if epsilon <= 0.0 {
        warnings.push(format!(
            "delta = {delta} is at or above n^-1/3; outside the analyzed regime"
        ));
    }
    if delta == 0.0 {
        warnings.push("delta = 0: deterministic channel, degenerate sigma".into());
    }
    if 2 * sigma >= m {
        warnings.push(format!("sigma = {sigma} >= m/2 = {}: regime violated", m as f64 / 2.0));
    }
    let big_m = 2 * m + 1;
    if big_m as f64 * delta >= 0.1 {
        warnings.push(format!(
            "M*delta = {} >= 0.1: deletions inside a single desert window are likely",
            big_m as f64 * delta
        ));
    }

    Ok(ReconParams {
        n,
        delta,
        epsilon,
        m,
        c,
        sigma,
        n_traces,
        alpha,
        gamma,
        warnings,
        overridden,
    })
}
