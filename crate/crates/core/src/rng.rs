//! Addressable pseudorandom source.
//!
//! Every random decision of a trial is a pure function of
//! `(master seed, trial, start vertex, vertex, purpose)`. Nothing is consumed
//! sequentially, so trials can run in any order on any worker, and two protocol
//! variants that look up the same address see the same draw. The delayed/undelayed
//! coupling relies on that.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combines a key with one more word.
#[inline]
pub fn derive(key: u64, word: u64) -> u64 {
    mix64(key ^ mix64(word.wrapping_add(GOLDEN)))
}

/// What a draw is used for. Attempt-indexed purposes carry the vertex's
/// transmission ordinal (0 for its first attempt).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    InitialChoice,
    Target(u64),
    Coin(u64),
    Feedback(u64),
}

impl Purpose {
    #[inline]
    fn code(self) -> (u64, u64) {
        match self {
            Purpose::InitialChoice => (1, 0),
            Purpose::Target(j) => (2, j),
            Purpose::Coin(j) => (3, j),
            Purpose::Feedback(j) => (4, j),
        }
    }
}

/// Random source of a single trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TrialStream {
    key: u64,
}

impl TrialStream {
    pub fn new(master_seed: u64, trial: u64) -> Self {
        Self {
            key: derive(derive(master_seed, 0x7472_6961_6c00), trial),
        }
    }

    /// Trial stream further keyed by its start vertex, for sweep-all experiments.
    pub fn for_start(master_seed: u64, trial: u64, start: u32) -> Self {
        let base = Self::new(master_seed, trial);
        Self {
            key: derive(base.key, 0x5354_4152_5400 ^ start as u64),
        }
    }

    #[inline]
    pub fn draw(&self, vertex: u32, purpose: Purpose) -> u64 {
        let (tag, ordinal) = purpose.code();
        let h = derive(self.key, ((vertex as u64) << 8) | tag);
        derive(h, ordinal)
    }

    /// Uniform index in `0..bound`; `bound` must be positive.
    #[inline]
    pub fn index(&self, vertex: u32, purpose: Purpose, bound: u32) -> u32 {
        debug_assert!(bound > 0);
        ((self.draw(vertex, purpose) as u128 * bound as u128) >> 64) as u32
    }

    /// Bernoulli(`p`) outcome. `p >= 1` always succeeds.
    #[inline]
    pub fn bernoulli(&self, vertex: u32, purpose: Purpose, p: f64) -> bool {
        if p >= 1.0 {
            return true;
        }
        unit(self.draw(vertex, purpose)) < p
    }
}

/// Maps 64 random bits to `[0, 1)` with 53-bit resolution.
#[inline]
pub fn unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_addresses_agree() {
        let a = TrialStream::new(42, 7);
        let b = TrialStream::new(42, 7);
        assert_eq!(a.draw(3, Purpose::Coin(5)), b.draw(3, Purpose::Coin(5)));
        assert_ne!(a.draw(3, Purpose::Coin(5)), a.draw(3, Purpose::Coin(6)));
        assert_ne!(a.draw(3, Purpose::Coin(5)), a.draw(4, Purpose::Coin(5)));
        assert_ne!(a.draw(3, Purpose::Coin(5)), a.draw(3, Purpose::Target(5)));
        assert_ne!(a, TrialStream::new(42, 8));
        assert_ne!(a, TrialStream::new(43, 7));
        assert_ne!(a, TrialStream::for_start(42, 7, 0));
    }

    #[test]
    fn index_is_roughly_uniform() {
        let s = TrialStream::new(1, 0);
        let mut counts = [0u32; 7];
        for v in 0..70_000 {
            counts[s.index(v, Purpose::InitialChoice, 7) as usize] += 1;
        }
        for c in counts {
            assert!((9_400..10_600).contains(&c), "{counts:?}");
        }
    }

    #[test]
    fn bernoulli_frequency() {
        let s = TrialStream::new(9, 3);
        let hits = (0..100_000u64)
            .filter(|&j| s.bernoulli(1, Purpose::Coin(j), 0.3))
            .count();
        // 0.3 +- 5 sd
        assert!((29_270..30_730).contains(&hits), "{hits}");
        assert!((0..1000u64).all(|j| s.bernoulli(0, Purpose::Coin(j), 1.0)));
    }
}
