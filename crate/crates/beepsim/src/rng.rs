//! Deterministic, platform-independent randomness.
//!
//! Every node gets an independent draw stream per round, keyed by
//! `(seed, node, round)` through the splitmix64 finalizer. Because the stream
//! is re-keyed each round, the number of draws a transition consumes never
//! shifts later rounds: the stream advances identically whether or not a
//! branch consumes entropy.
//!
//! A probability with denominator `d` is realized by one `uniform(d)` draw,
//! implemented as a rejection-free 64-bit multiply-shift. Multiply-shift
//! preserves rational interval boundaries across denominators: for any
//! boundary `b/d` and any `D` with `D*b/d` integral, `uniform(d) < b` iff
//! `uniform(D) < D*b/d` on the same underlying word. Canonical machine
//! sampling relies on this to reproduce program paths draw-for-draw.

/// splitmix64 finalizer (Stafford variant 13 constants, as in the reference
/// splitmix64 implementation).
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Source of uniform integer draws. `uniform(den)` returns a value in
/// `[0, den)`; `den` must be nonzero.
pub trait DrawSource {
    fn uniform(&mut self, den: u64) -> u64;

    /// True with probability `num/den` (one draw; the true branch occupies
    /// the low interval `[0, num)`). Behavioral enumeration intercepts this
    /// as a two-way branch, so transitions with large denominators stay
    /// tractable to extract.
    fn weighted(&mut self, num: u64, den: u64) -> bool {
        debug_assert!(num <= den);
        self.uniform(den) < num
    }

    /// Fair coin convenience: true with probability 1/2.
    fn coin(&mut self) -> bool {
        self.uniform(2) == 1
    }
}

/// Sequential splitmix64 stream.
#[derive(Debug, Clone)]
pub struct Stream {
    state: u64,
}

impl Stream {
    pub fn new(key: u64) -> Self {
        Stream { state: key }
    }

    /// Stream for one node's draws in one round.
    pub fn for_node_round(seed: u64, node: u64, round: u64) -> Self {
        Stream::new(mix64(mix64(mix64(seed) ^ node) ^ round))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        mix64(self.state.wrapping_sub(0x9e3779b97f4a7c15))
    }
}

impl DrawSource for Stream {
    #[inline]
    fn uniform(&mut self, den: u64) -> u64 {
        debug_assert!(den > 0, "uniform(0) is meaningless");
        if den == 1 {
            return 0;
        }
        ((self.next_u64() as u128 * den as u128) >> 64) as u64
    }
}

/// Seed for one Monte Carlo trial: `mix64(mix64(mix64(base) ^ cell) ^ trial)`.
/// Documented in the README; changing it invalidates recorded reports.
pub fn trial_seed(base: u64, cell: u64, trial: u64) -> u64 {
    mix64(mix64(mix64(base) ^ cell) ^ trial)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mix64_reference_values() {
        // splitmix64 with seed 0 produces this well-known first output.
        assert_eq!(mix64(0), 0xe220a8397b1dcdaf);
    }

    #[test]
    fn uniform_in_range_and_deterministic() {
        let mut a = Stream::for_node_round(7, 3, 41);
        let mut b = Stream::for_node_round(7, 3, 41);
        for _ in 0..1000 {
            let d = 1 + (a.next_u64() % 97);
            let mut a2 = a.clone();
            let v = a2.uniform(d);
            assert!(v < d);
            b.next_u64();
            a = a2;
        }
        let _ = b;
    }

    #[test]
    fn streams_differ_by_round_and_node() {
        let r0: Vec<u64> = (0..4).map(|_| Stream::for_node_round(1, 0, 1).next_u64()).collect();
        let r1 = Stream::for_node_round(1, 0, 2).next_u64();
        let n1 = Stream::for_node_round(1, 1, 1).next_u64();
        assert_ne!(r0[0], r1);
        assert_ne!(r0[0], n1);
    }

    #[test]
    fn uniform_is_monotone_across_denominators() {
        // The boundary-preservation property the engine depends on:
        // uniform(2) < 1 iff uniform(4) < 2 on the same word.
        for w in [0u64, 1, u64::MAX / 3, u64::MAX / 2, u64::MAX - 1, u64::MAX] {
            let v2 = ((w as u128 * 2) >> 64) as u64;
            let v4 = ((w as u128 * 4) >> 64) as u64;
            assert_eq!(v2 < 1, v4 < 2);
        }
    }

    #[test]
    fn trial_seed_stable() {
        // Golden values: the harness contract promises this exact derivation.
        assert_eq!(trial_seed(0, 0, 0), mix64(mix64(mix64(0))));
        assert_eq!(trial_seed(42, 1, 2), mix64(mix64(mix64(42) ^ 1) ^ 2));
        assert_ne!(trial_seed(42, 0, 1), trial_seed(42, 1, 0));
    }
}
