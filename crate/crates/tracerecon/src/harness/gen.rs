//! Test-string generation: uniform strings, certified desert-free strings,
//! and strings with implanted deserts whose ground-truth geometry (first
//! deep location, pattern, end) is verified before they are handed out.

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bitstring::{BitString, Pattern};
use crate::desert::{desert_end, desert_pattern, first_deep_in_desert, DesertParams};

#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("implant at {pos}+{len} needs 1 <= pos and pos+len < n = {n} for its boundary breaks")]
    OutOfBounds { pos: usize, len: usize, n: usize },
    #[error("implant length {len} is below the desert threshold M = {big_m}")]
    TooShort { len: usize, big_m: usize },
    #[error("implant pattern length {k} exceeds the desert pattern budget C = {c}")]
    PatternExceedsBudget { k: usize, c: usize },
    #[error("implants must be ordered with desert-free gaps of at least M between them")]
    Collision,
    #[error("could not certify the requested desert structure in {0} attempts")]
    Uncertifiable(usize),
    #[error("cannot parse generator spec {0:?}")]
    BadSpec(String),
    #[error(transparent)]
    Pattern(#[from] crate::bitstring::BitStringError),
}

/// One desert to splice into a uniform background.
#[derive(Clone, Debug, PartialEq)]
pub struct Implant {
    pub pattern: Pattern,
    pub len: usize,
    pub pos: usize,
}

/// What kind of source string to generate.
#[derive(Clone, Debug, PartialEq, Default)]
pub enum GenKind {
    #[default]
    Uniform,
    DesertFree,
    Implant(Implant),
    MultiDesert(Vec<Implant>),
}

impl GenKind {
    /// Deterministic geometry checks, separated out so a sweep can reject a
    /// bad configuration before burning any trials.
    pub fn validate(&self, n: usize, p: &DesertParams) -> Result<(), GenError> {
        let implants: &[Implant] = match self {
            GenKind::Uniform | GenKind::DesertFree => return Ok(()),
            GenKind::Implant(im) => std::slice::from_ref(im),
            GenKind::MultiDesert(ims) => ims,
        };
        if implants.is_empty() {
            return Err(GenError::Collision);
        }
        let big_m = p.window_len();
        for im in implants {
            if im.pattern.k() > p.c {
                return Err(GenError::PatternExceedsBudget {
                    k: im.pattern.k(),
                    c: p.c,
                });
            }
            if im.len < big_m {
                return Err(GenError::TooShort {
                    len: im.len,
                    big_m,
                });
            }
            if im.pos < 1 || im.pos + im.len >= n {
                return Err(GenError::OutOfBounds {
                    pos: im.pos,
                    len: im.len,
                    n,
                });
            }
        }
        for pair in implants.windows(2) {
            let prev_end = pair[0].pos + pair[0].len;
            if pair[1].pos < prev_end + big_m {
                return Err(GenError::Collision);
            }
        }
        Ok(())
    }

    fn implants(&self) -> &[Implant] {
        match self {
            GenKind::Uniform | GenKind::DesertFree => &[],
            GenKind::Implant(im) => std::slice::from_ref(im),
            GenKind::MultiDesert(ims) => ims,
        }
    }
}

/// Generate one source string of length `n`. The desert parameters decide
/// what counts as a desert for certification; callers in the pipeline pass
/// the same parameters reconstruction will run with.
pub fn generate_string(
    kind: &GenKind,
    n: usize,
    p: &DesertParams,
    rng: &mut ChaCha8Rng,
) -> Result<BitString, GenError> {
    kind.validate(n, p)?;
    const ATTEMPTS: usize = 200;
    match kind {
        GenKind::Uniform => Ok(BitString::random(n, rng)),
        GenKind::DesertFree => {
            for _ in 0..ATTEMPTS {
                let x = BitString::random(n, rng);
                if first_deep_in_desert(&x, p).is_none() {
                    return Ok(x);
                }
            }
            Err(GenError::Uncertifiable(ATTEMPTS))
        }
        GenKind::Implant(_) | GenKind::MultiDesert(_) => {
            let implants = kind.implants();
            for _ in 0..ATTEMPTS {
                let base = BitString::random(n, rng);
                let x = splice(&base, implants);
                if certify(&x, implants, p) {
                    return Ok(x);
                }
            }
            Err(GenError::Uncertifiable(ATTEMPTS))
        }
    }
}

/// Write the implants over the base string, forcing the bit before and the
/// bit after each implant to break the pattern so the desert's extent is
/// exactly as requested.
fn splice(base: &BitString, implants: &[Implant]) -> BitString {
    let mut bits: Vec<bool> = base.iter().collect();
    for im in implants {
        let k = im.pattern.k();
        for j in 0..im.len {
            bits[im.pos + j] = im.pattern.bit(j);
        }
        bits[im.pos - 1] = !im.pattern.bit(k - 1);
        bits[im.pos + im.len] = !im.pattern.bit(im.len % k);
    }
    BitString::from_bits(bits)
}

/// The generated string must present exactly the requested desert walk:
/// each implant is the first desert after the previous one ends, with the
/// requested pattern and end, and nothing follows the last one.
fn certify(x: &BitString, implants: &[Implant], p: &DesertParams) -> bool {
    let m = p.m;
    let mut cursor = 0usize;
    for im in implants {
        let suffix = x.subword(cursor, x.len() - 1);
        match first_deep_in_desert(&suffix, p) {
            Some(r_rel) if cursor + r_rel == im.pos + m => {}
            _ => return false,
        }
        let r = im.pos + m;
        match desert_pattern(x, r, p) {
            Ok(s) if s == im.pattern => {}
            _ => return false,
        }
        match desert_end(x, r, im.pattern.k(), m) {
            Ok(end) if end == im.pos + im.len - 1 => {}
            _ => return false,
        }
        cursor = im.pos + im.len + 1;
    }
    if implants.is_empty() {
        return true;
    }
    let suffix = x.subword(cursor, x.len() - 1);
    first_deep_in_desert(&suffix, p).is_none()
}

impl fmt::Display for GenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GenKind::Uniform => write!(f, "uniform"),
            GenKind::DesertFree => write!(f, "desert-free"),
            GenKind::Implant(im) => write!(f, "implant:{}:{}:{}", im.pattern, im.len, im.pos),
            GenKind::MultiDesert(ims) => {
                write!(f, "multi-desert:")?;
                for (i, im) in ims.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{}:{}:{}", im.pattern, im.len, im.pos)?;
                }
                Ok(())
            }
        }
    }
}

fn parse_implant(spec: &str) -> Result<Implant, GenError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [pat, len, pos] = parts.as_slice() else {
        return Err(GenError::BadSpec(spec.to_string()));
    };
    Ok(Implant {
        pattern: pat.parse()?,
        len: len.parse().map_err(|_| GenError::BadSpec(spec.to_string()))?,
        pos: pos.parse().map_err(|_| GenError::BadSpec(spec.to_string()))?,
    })
}

impl FromStr for GenKind {
    type Err = GenError;

    /// `uniform` | `desert-free` | `implant:PAT:LEN:POS` |
    /// `multi-desert:PAT:LEN:POS[,PAT:LEN:POS...]`
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(GenKind::Uniform),
            "desert-free" => Ok(GenKind::DesertFree),
            _ => {
                if let Some(rest) = s.strip_prefix("implant:") {
                    Ok(GenKind::Implant(parse_implant(rest)?))
                } else if let Some(rest) = s.strip_prefix("multi-desert:") {
                    let implants = rest
                        .split(',')
                        .map(parse_implant)
                        .collect::<Result<Vec<_>, _>>()?;
                    Ok(GenKind::MultiDesert(implants))
                } else {
                    Err(GenError::BadSpec(s.to_string()))
                }
            }
        }
    }
}

impl serde::Serialize for GenKind {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_string())
    }
}

impl<'de> serde::Deserialize<'de> for GenKind {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
