//! Seeded deletion-channel simulator.
//!
//! Every trace carries its ground truth: the set of deleted source indices
//! and the origin map from trace positions back to source positions. The
//! oracle tests lean on that instrumentation; the reconstruction pipeline
//! itself only ever looks at the bits.
//!
//! Randomness is ChaCha8 keyed by a 64-bit seed, with the 64-bit ChaCha
//! stream id used to hand out independent substreams. Identical
//! `(seed, stream)` always reproduces the same draws, so trials and traces
//! can run in parallel without losing bit-exact reruns.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bitstring::BitString;

/// One reproducible substream of the global seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Hands out consecutive stream ids under one seed. Reserving a contiguous
/// range up front keeps parallel fan-outs deterministic regardless of
/// execution order.
#[derive(Clone, Debug)]
pub struct Streams {
    seed: u64,
    next: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Streams { seed, next: 0 }
    }

    /// Start allocating at a fixed offset; used to give each trial its own
    /// disjoint block of stream ids.
    pub fn with_base(seed: u64, base: u64) -> Self {
        Streams { seed, next: base }
    }

    #[allow(clippy::should_implement_trait)] // an allocator, not an iterator
    pub fn next(&mut self) -> RngStream {
        let s = RngStream::new(self.seed, self.next);
        self.next += 1;
        s
    }

    pub fn reserve(&mut self, count: u64) -> StreamRange {
        let r = StreamRange {
            seed: self.seed,
            base: self.next,
            count,
        };
        self.next += count;
        r
    }
}

/// A pre-reserved block of streams, indexable from any thread.
#[derive(Clone, Copy, Debug)]
pub struct StreamRange {
    seed: u64,
    base: u64,
    count: u64,
}

impl StreamRange {
    pub fn get(&self, i: u64) -> RngStream {
        debug_assert!(i < self.count);
        RngStream::new(self.seed, self.base + i)
    }

    pub fn len(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

/// Ground truth for one pass through the channel.
#[derive(Clone, Debug)]
pub struct DeletionRecord {
    /// Deleted source indices, ascending.
    deleted: Vec<usize>,
    /// `origin[j]` = source index of trace bit `j`, ascending.
    origin: Vec<usize>,
    source_len: usize,
}

impl DeletionRecord {
    /// Assemble a record from its parts, checking the defining equations
    /// (ascending origin disjoint from the deletion set, counts adding up).
    pub fn from_parts(deleted: Vec<usize>, origin: Vec<usize>, source_len: usize) -> Self {
        assert!(deleted.windows(2).all(|w| w[0] < w[1]));
        assert!(origin.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(deleted.len() + origin.len(), source_len);
        for (j, &o) in origin.iter().enumerate() {
            assert!(o < source_len && deleted.binary_search(&o).is_err());
            let before = deleted.partition_point(|&d| d < o);
            assert_eq!(o - before, j);
        }
        DeletionRecord {
            deleted,
            origin,
            source_len,
        }
    }

    pub fn deleted(&self) -> &[usize] {
        &self.deleted
    }

    pub fn source_len(&self) -> usize {
        self.source_len
    }

    pub fn trace_len(&self) -> usize {
        self.origin.len()
    }

    /// Source index of trace bit `j` (`j < trace_len`).
    pub fn origin(&self, j: usize) -> usize {
        self.origin[j]
    }
}

/// A trace plus the record of how the channel produced it.
#[derive(Clone, Debug)]
pub struct InstrumentedTrace {
    pub bits: BitString,
    pub record: DeletionRecord,
}

impl InstrumentedTrace {
    pub fn source_len(&self) -> usize {
        self.record.source_len
    }
}

/// Pass `x` through the deletion channel: each bit is deleted independently
/// with probability `delta` and the survivors are concatenated.
pub fn transmit(x: &BitString, delta: f64, rng: &mut ChaCha8Rng) -> InstrumentedTrace {
    assert!((0.0..=1.0).contains(&delta), "delta must be in [0, 1]");
    let n = x.len();
    let mut bits = BitString::with_capacity(n);
    let mut deleted = Vec::new();
    let mut origin = Vec::new();
    for i in 0..n {
        if rng.random::<f64>() < delta {
            deleted.push(i);
        } else {
            bits.push(x.get(i));
            origin.push(i);
        }
    }
    InstrumentedTrace {
        bits,
        record: DeletionRecord {
            deleted,
            origin,
            source_len: n,
        },
    }
}

/// A trace of `x ∘ v` obtained by sending the two halves through the channel
/// separately and concatenating; distributionally identical to
/// `transmit(x ∘ v)`, with the record spanning the concatenated index space.
pub fn transmit_concat(
    x: &BitString,
    v: &BitString,
    delta: f64,
    rng: &mut ChaCha8Rng,
) -> InstrumentedTrace {
    let first = transmit(x, delta, rng);
    let second = transmit(v, delta, rng);
    let offset = x.len();
    let mut deleted = first.record.deleted;
    deleted.extend(second.record.deleted.iter().map(|&i| i + offset));
    let mut origin = first.record.origin;
    origin.extend(second.record.origin.iter().map(|&j| j + offset));
    InstrumentedTrace {
        bits: first.bits.concat(&second.bits),
        record: DeletionRecord {
            deleted,
            origin,
            source_len: offset + v.len(),
        },
    }
}

/// Origin map of the zero-padded trace: for `j < |bits|` this is the true
/// origin; padding positions map past the end of the source, as if the
/// source were extended by infinitely many zeros.
pub fn padded_origin(t: &InstrumentedTrace, j: usize) -> usize {
    let tl = t.record.trace_len();
    if j < tl {
        t.record.origin(j)
    } else {
        t.record.source_len + (j - tl)
    }
}

/// Largest trace index whose origin is at most `end`; -1 if every bit of
/// `x_[0:end]` was deleted.
pub fn last_surviving(t: &InstrumentedTrace, end: usize) -> i64 {
    assert!(end < t.record.source_len);
    // origin is strictly increasing: partition_point gives the count of
    // surviving bits with origin <= end
    let survivors = t.record.origin.partition_point(|&o| o <= end);
    survivors as i64 - 1
}

/// A channel pass recorded as its deletion set alone. The trace bits are
/// implicit (source minus deletions), so drawing one costs O(#deletions)
/// instead of O(n) — this is what makes million-trace alignment sweeps and
/// the sharp-estimation fan-out affordable. Distributionally identical to
/// [`transmit`]; the equivalence is itself under test.
#[derive(Clone, Debug)]
pub struct SparseTrace {
    deleted: Vec<usize>,
    source_len: usize,
}

impl SparseTrace {
    pub fn deleted(&self) -> &[usize] {
        &self.deleted
    }

    pub fn source_len(&self) -> usize {
        self.source_len
    }

    pub fn trace_len(&self) -> usize {
        self.source_len - self.deleted.len()
    }

    /// Source index of trace bit `j`.
    pub fn origin(&self, j: usize) -> usize {
        assert!(j < self.trace_len());
        // smallest k with k - |deleted ∩ [0:k-1]| = j and k not deleted
        let mut lo = j; // origin(j) >= j
        let mut hi = j + self.deleted.len();
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            let del_before = self.deleted.partition_point(|&d| d <= mid);
            if mid + 1 - del_before <= j {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Same contract as [`last_surviving`].
    pub fn last_surviving(&self, end: usize) -> i64 {
        assert!(end < self.source_len);
        let deleted_before = self.deleted.partition_point(|&d| d <= end);
        (end + 1 - deleted_before) as i64 - 1
    }
}

/// Sample only the deletion set, skipping surviving positions geometrically.
pub fn transmit_sparse(source_len: usize, delta: f64, rng: &mut ChaCha8Rng) -> SparseTrace {
    assert!((0.0..=1.0).contains(&delta), "delta must be in [0, 1]");
    let mut deleted = Vec::new();
    if delta >= 1.0 {
        deleted.extend(0..source_len);
    } else if delta > 0.0 {
        let log_keep = (1.0 - delta).ln();
        let mut i: usize = 0;
        loop {
            // number of survivors before the next deletion ~ Geometric(delta)
            let u: f64 = rng.random();
            let gap = (u.ln() / log_keep).floor();
            if gap >= (source_len - i) as f64 {
                break;
            }
            i += gap as usize;
            deleted.push(i);
            i += 1;
            if i >= source_len {
                break;
            }
        }
    }
    SparseTrace {
        deleted,
        source_len,
    }
}

/// Fresh-trace source over a fixed source string, as handed to the
/// end-finding procedures. Reconstruction builds it over `z = x ∘ v`.
/// Keeps an exact count of the traces it has handed out.
#[derive(Debug)]
pub struct TraceSampler<'a> {
    source: &'a BitString,
    delta: f64,
    drawn: std::sync::atomic::AtomicU64,
}

impl<'a> TraceSampler<'a> {
    pub fn new(source: &'a BitString, delta: f64) -> Self {
        assert!((0.0..=1.0).contains(&delta));
        TraceSampler {
            source,
            delta,
            drawn: std::sync::atomic::AtomicU64::new(0),
        }
    }

    pub fn source(&self) -> &BitString {
        self.source
    }

    pub fn source_len(&self) -> usize {
        self.source.len()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Total traces drawn so far (full and sparse alike).
    pub fn traces_drawn(&self) -> u64 {
        self.drawn.load(std::sync::atomic::Ordering::Relaxed)
    }

    fn count_draw(&self) {
        self.drawn.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
    }

    pub fn draw(&self, stream: RngStream) -> InstrumentedTrace {
        self.count_draw();
        transmit(self.source, self.delta, &mut stream.rng())
    }

    /// Draw the deletion set only; pair with [`Self::window`] to look at a
    /// slice of the trace.
    pub fn draw_sparse(&self, rng: &mut ChaCha8Rng) -> SparseTrace {
        self.count_draw();
        transmit_sparse(self.source.len(), self.delta, rng)
    }

    /// Materialize trace bits `[lo : min(hi, trace_len-1)]` of a sparse
    /// trace. Empty if `lo` is past the end of the trace.
    pub fn window(&self, t: &SparseTrace, lo: usize, hi: usize) -> BitString {
        debug_assert_eq!(t.source_len, self.source.len());
        let tl = t.trace_len();
        if lo >= tl {
            return BitString::new();
        }
        let hi = hi.min(tl - 1);
        let mut out = BitString::with_capacity(hi - lo + 1);
        let mut src = t.origin(lo);
        let mut del_idx = t.deleted.partition_point(|&d| d < src);
        for _ in lo..=hi {
            while del_idx < t.deleted.len() && t.deleted[del_idx] == src {
                src += 1;
                del_idx += 1;
            }
            out.push(self.source.get(src));
            src += 1;
        }
        out
    }
}
