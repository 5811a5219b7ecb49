//! Counter-based SplitMix64 generator.
//!
//! Every random quantity in the crate is a pure function of a 64-bit stream
//! key and a counter, so draws can be evaluated in any order (or in parallel)
//! and still be bit-identical.
//!
//! The derivation is a stable contract:
//!
//! * `mix64` is the SplitMix64 finalizer (Steele, Lea and Flood 2014).
//! * A label is hashed with 64-bit FNV-1a; the key for `(seed, label)` is
//!   `mix64(seed ^ mix64(fnv1a(label)))`.
//! * A derived key for `(key, label)` is `StreamKey::new(key.0, label)`; an
//!   indexed key is `mix64(key.0 ^ mix64(index + GOLDEN_GAMMA))`.
//! * The raw draw `counter` of a stream is
//!   `mix64(key + (counter + 1) * GOLDEN_GAMMA)` (wrapping arithmetic).
//! * Uniforms use the top 53 bits: `(bits >> 11) * 2^-53` in `[0, 1)`.
//! * Standard normals use Box-Muller on raw draws `2c` and `2c + 1`.
//!
//! Per-node noise streams are keyed by `(seed, node name)` and indexed by row.

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const TWO_POW_MINUS_53: f64 = 1.0 / (1u64 << 53) as f64;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Identifies one independent random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey(pub u64);

impl StreamKey {
    pub fn new(seed: u64, label: &str) -> Self {
        StreamKey(mix64(seed ^ mix64(fnv1a(label.as_bytes()))))
    }

    pub fn derive(self, label: &str) -> Self {
        StreamKey::new(self.0, label)
    }

    pub fn indexed(self, index: u64) -> Self {
        StreamKey(mix64(self.0 ^ mix64(index.wrapping_add(GOLDEN_GAMMA))))
    }

    #[inline]
    pub fn bits(self, counter: u64) -> u64 {
        mix64(self.0.wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn uniform(self, counter: u64) -> f64 {
        (self.bits(counter) >> 11) as f64 * TWO_POW_MINUS_53
    }

    /// Uniform on the open interval `(0, 1)`.
    #[inline]
    pub fn uniform_open(self, counter: u64) -> f64 {
        ((self.bits(counter) >> 11) as f64 + 0.5) * TWO_POW_MINUS_53
    }

    #[inline]
    pub fn standard_normal(self, counter: u64) -> f64 {
        let c = counter.wrapping_mul(2);
        let u1 = self.uniform_open(c);
        let u2 = self.uniform(c.wrapping_add(1));
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Sequential cursor over a stream, for places where draws are naturally
/// consumed one after another (parameter draws, shuffles).
#[derive(Clone, Debug)]
pub struct CounterRng {
    key: StreamKey,
    counter: u64,
}

impl CounterRng {
    pub fn new(key: StreamKey) -> Self {
        CounterRng { key, counter: 0 }
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = self.key.bits(self.counter);
        self.counter += 1;
        v
    }

    pub fn uniform(&mut self) -> f64 {
        let v = self.key.uniform(self.counter);
        self.counter += 1;
        v
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn standard_normal(&mut self) -> f64 {
        let v = self.key.standard_normal(self.counter);
        self.counter += 1;
        v
    }

    /// Uniform integer in `[0, bound)` by rejection, no modulo bias.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0);
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % bound;
            }
        }
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
