use fecim::bnn::{analog_fires, ChannelThreshold};
use fecim::rng::{Domain, ElementKey, SeedTree};
use fecim::{
    BitMatrix, FeFetParams, MacStimulus, MacroArray, OnOffRatio, VariationSpec, XnorModel, FEMTO,
};
use rand::seq::SliceRandom;
use rand::Rng;

const N: usize = 128;
const DRAWS: usize = 100_000;

/// Decisions two or more cells away from the threshold stay put under 5%
/// capacitor mismatch in at least 99% of sampled columns.
#[test]
fn margin_two_flip_rate_below_one_percent() {
    let params = FeFetParams::default();
    let v_dd = params.v_dd;
    let mut rng = SeedTree::new(31).stream(Domain::Stimulus, ElementKey::default());
    let weights = BitMatrix::from_fn(N, N, |_, _| true);
    let (nominal, _) = MacroArray::new(N, N, params, 1.2 * FEMTO)
        .program(&weights)
        .unwrap();

    for sigma_c in [0.01, 0.05] {
        let spec = VariationSpec {
            sigma_c,
            on_off_ratio: OnOffRatio::Infinite,
            seed: 5,
            ..VariationSpec::default()
        };
        let mut flips = 0usize;
        let mut draws = 0usize;
        let mut trial = 0u64;
        while draws < DRAWS {
            let chip = nominal
                .resample(&spec, 0, trial)
                .unwrap()
                .compile(XnorModel::Ideal);
            let alpha = rng.random_range(-100..=100) as f64;
            let threshold = ChannelThreshold::AtLeast(alpha);
            let m_star = ((N as f64 + alpha) / 2.0).ceil() as usize;
            // Alternate chips sit two cells above and below the threshold.
            let m = if trial & 1 == 0 {
                m_star + 2
            } else {
                m_star - 2
            };
            let expected = m >= m_star;
            let mut bits: Vec<bool> = (0..N).map(|r| r < m).collect();
            bits.shuffle(&mut rng);
            let out = chip
                .evaluate(&MacStimulus::from_bits(&bits, v_dd), None, None)
                .unwrap();
            for (&count, &v) in out.match_counts.iter().zip(&out.v_scl) {
                assert_eq!(count, m);
                if analog_fires(&threshold, N, N, v, v_dd) != expected {
                    flips += 1;
                }
                draws += 1;
            }
            trial += 1;
        }
        let rate = flips as f64 / draws as f64;
        assert!(rate < 0.01, "sigma_c {sigma_c}: flip rate {rate}");
    }
}
