//! Seeded, chunked Monte Carlo driver.
//!
//! Work is split into fixed-size chunks; chunk `i` draws from a ChaCha8
//! stream keyed by (master seed, context, i) and partial sums are combined
//! in chunk order. The result depends only on the inputs, the master seed
//! and the chunk size — never on thread count or scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ursell::Accumulator;

/// Monte Carlo sampling parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McSpec {
    pub seed: u64,
    pub samples: u64,
    pub chunk: u64,
}

impl McSpec {
    pub fn new(seed: u64, samples: u64) -> Self {
        McSpec {
            seed,
            samples,
            chunk: 4096,
        }
    }

    pub fn with_chunk(mut self, chunk: u64) -> Self {
        self.chunk = chunk.max(1);
        self
    }
}

/// SplitMix64 finalizer; mixes the master seed with a context tag so each
/// estimator consumes an independent seed space.
pub fn mix_seed(master: u64, ctx: u64) -> u64 {
    let mut z = master ^ ctx.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Context tags for the independent sampling streams.
pub mod ctx {
    /// Anchored coefficient of the given order.
    pub fn anchored(order: usize) -> u64 {
        0x0100_0000_0000 + order as u64
    }
    /// Volume-averaged coefficient of the given order.
    pub fn volume_avg(order: usize) -> u64 {
        0x0200_0000_0000 + order as u64
    }
    /// Interior-region averages for the pressure split.
    pub fn interior(order: usize) -> u64 {
        0x0300_0000_0000 + order as u64
    }
    /// Direct partition-function coefficients.
    pub fn partition(order: usize) -> u64 {
        0x0400_0000_0000 + order as u64
    }
}

/// Sample mean and standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McOutcome {
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
}

/// Run a chunked mean of `eval` over `spec.samples` draws.
///
/// `scratch` builds one per-chunk state (reused across the chunk's samples);
/// `eval` maps (state, rng) to one sample value.
pub fn chunked_mean<S, B, F>(spec: &McSpec, context: u64, scratch: B, eval: F) -> McOutcome
where
    S: Send,
    B: Fn() -> S + Sync,
    F: Fn(&mut S, &mut ChaCha8Rng) -> f64 + Sync,
{
    let n = spec.samples;
    if n == 0 {
        return McOutcome {
            mean: 0.0,
            std_error: 0.0,
            samples: 0,
        };
    }
    let chunk = spec.chunk.max(1);
    let n_chunks = n.div_ceil(chunk);
    let seed = mix_seed(spec.seed, context);
    let partials: Vec<(f64, f64)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let mut state = scratch();
            let len = chunk.min(n - c * chunk);
            let mut sum = Accumulator::default();
            let mut sumsq = Accumulator::default();
            for _ in 0..len {
                let v = eval(&mut state, &mut rng);
                sum.add(v);
                sumsq.add(v * v);
            }
            (sum.value(), sumsq.value())
        })
        .collect();
    let mut sum = Accumulator::default();
    let mut sumsq = Accumulator::default();
    for &(s, s2) in &partials {
        sum.add(s);
        sumsq.add(s2);
    }
    let nf = n as f64;
    let mean = sum.value() / nf;
    let var = if n > 1 {
        ((sumsq.value() / nf - mean * mean) * nf / (nf - 1.0)).max(0.0)
    } else {
        0.0
    };
    McOutcome {
        mean,
        std_error: (var / nf).sqrt(),
        samples: n,
    }
}
