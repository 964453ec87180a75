//! Shared fixtures for the benchmarks.

use fecim::rng::{Domain, ElementKey, SeedTree};
use fecim::{BitMatrix, FeFetParams, MacStimulus, MacroArray, FEMTO};
use rand::Rng;

pub fn random_bits(rows: usize, cols: usize, seed: u64) -> BitMatrix {
    let mut rng = SeedTree::new(seed).stream(Domain::Weights, ElementKey::default());
    BitMatrix::from_fn(rows, cols, |_, _| rng.random())
}

/// A programmed 128x128 macro and one random input vector.
pub fn programmed_macro(seed: u64) -> (MacroArray, MacStimulus) {
    let params = FeFetParams::default();
    let blank = MacroArray::new(128, 128, params, 1.2 * FEMTO);
    let (array, _) = blank
        .program(&random_bits(128, 128, seed))
        .expect("safe schedule");
    let input = random_bits(128, 1, seed ^ 1);
    (array, MacStimulus::from_bits(input.as_slice(), params.v_dd))
}
