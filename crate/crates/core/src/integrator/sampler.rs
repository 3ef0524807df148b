//! Deterministic per-sample random streams.
//!
//! A stream is identified by `(kind, seed, stream key, sample index)`, so
//! results never depend on which worker evaluates a pixel.

use rand::{RngExt, SeedableRng};
use rand_pcg::Pcg32;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Independent,
    /// Per-dimension stratification (Latin hypercube over the samples of one
    /// stream) with a random jitter inside each stratum.
    Stratified,
}

/// 64-bit finalizer (splitmix64).
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn hash2(a: u64, b: u64) -> u64 {
    mix64(a ^ mix64(b).rotate_left(17))
}

/// Kensler's hash-based permutation of `0..n` (from "Correlated
/// Multi-Jittered Sampling").
pub fn permute(mut i: u32, n: u32, key: u32) -> u32 {
    if n <= 1 {
        return 0;
    }
    let mut w = n - 1;
    w |= w >> 1;
    w |= w >> 2;
    w |= w >> 4;
    w |= w >> 8;
    w |= w >> 16;
    loop {
        i ^= key;
        i = i.wrapping_mul(0xe170893d);
        i ^= key >> 16;
        i ^= (i & w) >> 4;
        i ^= key >> 8;
        i = i.wrapping_mul(0x0929eb3f);
        i ^= key >> 23;
        i ^= (i & w) >> 1;
        i = i.wrapping_mul(1 | key >> 27);
        i = i.wrapping_mul(0x6935fa69);
        i ^= (i & w) >> 11;
        i = i.wrapping_mul(0x74dcb303);
        i ^= (i & w) >> 2;
        i = i.wrapping_mul(0x9e501cc3);
        i ^= (i & w) >> 2;
        i = i.wrapping_mul(0xc860a3df);
        i &= w;
        i ^= i >> 5;
        if i < n {
            break;
        }
    }
    (i.wrapping_add(key)) % n
}

#[derive(Debug, Clone)]
pub struct Sampler {
    kind: SamplerKind,
    seed: u64,
    key: u64,
    sample_index: u32,
    sample_count: u32,
    dim: u32,
    rng: Pcg32,
}

impl Sampler {
    pub fn new(kind: SamplerKind, seed: u64) -> Sampler {
        let key = mix64(seed);
        Sampler {
            kind,
            seed,
            key,
            sample_index: 0,
            sample_count: 1,
            dim: 0,
            rng: Pcg32::seed_from_u64(key),
        }
    }

    pub fn kind(&self) -> SamplerKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child sampler for an independent sub-stream (a pixel, a texel, a
    /// cache point). Derivation is order-independent.
    pub fn fork(&self, stream: u64) -> Sampler {
        let key = hash2(self.key, stream);
        Sampler {
            kind: self.kind,
            seed: self.seed,
            key,
            sample_index: 0,
            sample_count: 1,
            dim: 0,
            rng: Pcg32::seed_from_u64(key),
        }
    }

    /// Positions the stream at sample `index` of `count` and resets the
    /// dimension counter.
    pub fn start_sample(&mut self, index: u32, count: u32) {
        self.sample_index = index;
        self.sample_count = count.max(1);
        self.dim = 0;
        self.rng = Pcg32::seed_from_u64(hash2(self.key, index as u64));
    }

    /// Uniform value in `[0, 1)`.
    pub fn next_1d(&mut self) -> f64 {
        let jitter = self.rng.random::<f64>();
        let d = self.dim;
        self.dim += 1;
        let v = match self.kind {
            SamplerKind::Independent => jitter,
            SamplerKind::Stratified => {
                let n = self.sample_count;
                let dim_key = hash2(self.key, 0x5eed_0000 + d as u64) as u32;
                let stratum = permute(self.sample_index % n, n, dim_key);
                (stratum as f64 + jitter) / n as f64
            }
        };
        v.min(1.0 - f64::EPSILON / 2.0)
    }

    pub fn next_2d(&mut self) -> (f64, f64) {
        let a = self.next_1d();
        let b = self.next_1d();
        (a, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permute_is_bijection() {
        for n in [1u32, 2, 3, 7, 16, 100, 1000] {
            for key in [0u32, 1, 0xdead_beef] {
                let mut seen = vec![false; n as usize];
                for i in 0..n {
                    let p = permute(i, n, key) as usize;
                    assert!(!seen[p]);
                    seen[p] = true;
                }
            }
        }
    }

    #[test]
    fn deterministic_streams() {
        let base = Sampler::new(SamplerKind::Independent, 7);
        let mut a = base.fork(42);
        let mut b = base.fork(42);
        a.start_sample(3, 16);
        b.start_sample(3, 16);
        for _ in 0..10 {
            assert_eq!(a.next_1d(), b.next_1d());
        }
        let mut c = base.fork(43);
        c.start_sample(3, 16);
        let mut a = base.fork(42);
        a.start_sample(3, 16);
        assert_ne!(a.next_1d(), c.next_1d());
    }

    #[test]
    fn stratified_covers_every_stratum() {
        let n = 64;
        let base = Sampler::new(SamplerKind::Stratified, 1).fork(9);
        for dim in 0..4 {
            let mut hits = vec![0; n];
            for i in 0..n as u32 {
                let mut s = base.clone();
                s.start_sample(i, n as u32);
                let mut v = 0.0;
                for _ in 0..=dim {
                    v = s.next_1d();
                }
                assert!((0.0..1.0).contains(&v));
                hits[(v * n as f64) as usize] += 1;
            }
            assert!(hits.iter().all(|&h| h == 1), "dim {dim}: {hits:?}");
        }
    }
}
