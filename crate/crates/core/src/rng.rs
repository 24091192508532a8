//! Counter-based random streams.
//!
//! Every random draw in the crate comes from a [`SimRng`] obtained through a
//! [`StreamFactory`]. A stream is identified by `(master seed, purpose, index)`;
//! ChaCha's 64-bit stream selector keeps distinct identifiers independent, so
//! parallel replicates are reproducible regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// What a stream is used for. Separate purposes never share draws, so e.g. the
/// holding-time sequence of a chain does not depend on its observation noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    HoldingTimes = 0,
    Observations = 1,
    States = 2,
    NullTrials = 3,
    AltTrials = 4,
}

const PURPOSE_BITS: u32 = 4;

#[derive(Debug, Clone)]
pub struct StreamFactory {
    base: SimRng,
    seed: u64,
}

impl StreamFactory {
    pub fn new(seed: u64) -> Self {
        Self { base: SimRng::seed_from_u64(seed), seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self, purpose: Purpose, index: u64) -> SimRng {
        debug_assert!(index < 1 << (64 - PURPOSE_BITS));
        let mut rng = self.base.clone();
        rng.set_stream((index << PURPOSE_BITS) | purpose as u64);
        rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let f = StreamFactory::new(42);
        let a: Vec<u64> = (0..4).map(|_| f.stream(Purpose::HoldingTimes, 3).random()).collect();
        let mut r = f.stream(Purpose::HoldingTimes, 3);
        let b: Vec<u64> = (0..4).map(|_| r.random()).collect();
        // Fresh streams restart; a single stream advances.
        assert!(a.iter().all(|v| *v == a[0]));
        assert_eq!(a[0], b[0]);
        let other: u64 = f.stream(Purpose::Observations, 3).random();
        let other_index: u64 = f.stream(Purpose::HoldingTimes, 4).random();
        assert_ne!(a[0], other);
        assert_ne!(a[0], other_index);
        let reseeded: u64 = StreamFactory::new(43).stream(Purpose::HoldingTimes, 3).random();
        assert_ne!(a[0], reseeded);
    }
}
