//! Counter-based random substreams.
//!
//! Every random draw of the samplers is addressed by `(iteration, slot)`.
//! Slot 0 carries the per-iteration control draws (the fractional coin and the
//! categorical selection); slot `i >= 1` carries proposal `i`. Each address maps
//! to a disjoint window of one ChaCha8 keystream, so the draws do not depend on
//! how many workers evaluate a batch or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Words reserved for one slot inside a stream.
const SLOT_WORDS_LOG2: u32 = 32;

/// Stream index reserved for initialisation draws.
pub const INIT_STREAM: u64 = u64::MAX;

#[derive(Clone, Debug)]
pub struct Substreams {
    base: ChaCha8Rng,
}

impl Substreams {
    pub fn new(seed: u64) -> Self {
        Self {
            base: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Generator for slot `slot` of iteration `iteration`.
    pub fn at(&self, iteration: u64, slot: u64) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_stream(iteration);
        rng.set_word_pos((slot as u128) << SLOT_WORDS_LOG2);
        rng
    }

    /// Generator for the per-iteration control draws.
    pub fn control(&self, iteration: u64) -> ChaCha8Rng {
        self.at(iteration, 0)
    }
}
