//! Addressable random streams.
//!
//! Every sampled element (a capacitor, a transistor) owns a stream derived
//! from `(seed, domain, coordinates, trial)` by hashing. The stream does not
//! depend on the order in which elements are visited, so a parallel sweep
//! draws exactly the same numbers as a serial one.

use rand_pcg::Pcg64;

/// What kind of element a stream feeds. Distinct domains never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Domain {
    Capacitor = 0x01,
    FeFetM1 = 0x02,
    FeFetM2 = 0x03,
    Dataset = 0x10,
    Model = 0x11,
    Weights = 0x12,
    Stimulus = 0x13,
}

/// Coordinates of one sampled element.
///
/// `group` distinguishes independent arrays that share a seed (for example
/// the tiles of a deployed network); `row`/`col` locate the cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ElementKey {
    pub group: u64,
    pub row: u64,
    pub col: u64,
    pub trial: u64,
}

impl ElementKey {
    pub fn cell(row: usize, col: usize) -> Self {
        Self {
            row: row as u64,
            col: col as u64,
            ..Self::default()
        }
    }

    pub fn with_group(mut self, group: u64) -> Self {
        self.group = group;
        self
    }

    pub fn with_trial(mut self, trial: u64) -> Self {
        self.trial = trial;
        self
    }
}

/// splitmix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
fn absorb(state: u64, word: u64) -> u64 {
    mix64(state.wrapping_add(0x9e37_79b9_7f4a_7c15) ^ mix64(word))
}

/// Root of all streams for one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    seed: u64,
}

impl SeedTree {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The generator for one element. Pure in its arguments.
    pub fn stream(&self, domain: Domain, key: ElementKey) -> Pcg64 {
        let mut h = absorb(mix64(self.seed), domain as u64);
        h = absorb(h, key.group);
        h = absorb(h, key.row);
        h = absorb(h, key.col);
        h = absorb(h, key.trial);
        let lo = absorb(h, 0x5eed_0001);
        let hi = absorb(h, 0x5eed_0002);
        let stream = absorb(h, 0x5eed_0003);
        let state = ((hi as u128) << 64) | lo as u128;
        Pcg64::new(state, stream as u128)
    }

    /// A child tree, for runs that need several independent seeds.
    pub fn child(&self, index: u64) -> SeedTree {
        SeedTree {
            seed: absorb(mix64(self.seed ^ 0xc41d_c41d), index),
        }
    }
}
