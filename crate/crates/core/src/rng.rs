//! Bit-exact pseudo random streams.
//!
//! Every random decision in the engine is drawn from a [`RngStream`], a
//! splitmix64 generator. The recurrence and the derived helpers below are
//! fixed so that any implementation can reproduce the same trajectories:
//!
//! * `next_u64`: `state += 0x9E3779B97F4A7C15`, then the output is
//!   [`mix64`] of the new state.
//! * `below(n)`: `(next_u64() as u128 * n as u128) >> 64`.
//! * `next_f64`: `(next_u64() >> 11) * 2^-53`, uniform in `[0, 1)`.
//! * stream splitting: `derive(seed, tag)` starts a stream at
//!   `splitmix64(seed ^ splitmix64(tag))`.

/// Golden-ratio increment of the splitmix64 recurrence.
pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Stream tags mixed into an episode seed.
pub mod tags {
    pub const LAYOUT: u64 = 1;
    pub const PREDATOR: u64 = 2;
    pub const REGROWTH: u64 = 3;
    /// Policy streams use `POLICY_BASE + agent_id`.
    pub const POLICY_BASE: u64 = 0x100;
}

/// The splitmix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// First output of a splitmix64 stream whose state is `x`.
#[inline]
pub fn splitmix64(x: u64) -> u64 {
    mix64(x.wrapping_add(GOLDEN_GAMMA))
}

/// 64-bit FNV-1a over the UTF-8 bytes of `s`.
pub fn fnv1a64(s: &str) -> u64 {
    const OFFSET: u64 = 0xCBF2_9CE4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01B3;
    s.bytes()
        .fold(OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    state: u64,
}

impl RngStream {
    pub fn new(state: u64) -> Self {
        Self { state }
    }

    /// Independent sub-stream of `seed` identified by `tag`.
    pub fn derive(seed: u64, tag: u64) -> Self {
        Self::new(splitmix64(seed ^ splitmix64(tag)))
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform index in `0..n`. `n` must be nonzero.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((u128::from(self.next_u64()) * n as u128) >> 64) as usize
    }

    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Bernoulli trial; always consumes one draw.
    #[inline]
    pub fn chance(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }
}
