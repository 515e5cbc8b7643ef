//! Twirled ratio estimate against full matrix inversion and the per-qubit flip model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use readout_twirl::baselines::{bitflip_product_baseline, estimate_full_a, unmitigated_estimate, InverseMitigator};
use readout_twirl::mitigation::{acquire_data, counter_clock, protocol1_estimate, EstimateOptions, Histogram, IndexSet};
use readout_twirl::noise::NoiseModel;
use readout_twirl::pauli::PauliZIndex;
use readout_twirl::state::{exact_weight, ideal_distribution, sample_shot_raw, CircuitSpec};

fn main() -> readout_twirl::Result<()> {
    let n = 8;
    let shots = 1 << 17;
    let noise = NoiseModel::simulation_preset(n, 3)?;
    let circuit = CircuitSpec::standard(n, 0.3);
    let dist = ideal_distribution(&circuit)?;
    let ground = ideal_distribution(&circuit.calibration())?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);

    let d0 = acquire_data(n, |q, r| sample_shot_raw(&ground, q, &noise, r), &IndexSet::AllX, shots, &mut rng, counter_clock(0))?;
    let d1 = acquire_data(n, |q, r| sample_shot_raw(&dist, q, &noise, r), &IndexSet::AllX, shots, &mut rng, counter_clock(0))?;
    let raw = Histogram::from_outcomes(n, (0..shots).map(|_| sample_shot_raw(&dist, 0, &noise, &mut rng)))?;

    // same calibration budget as D0, spread over 2^n prepared states
    let cal = estimate_full_a(&noise, shots >> n, &mut rng)?;
    let inverse = InverseMitigator::new(&cal)?;
    let corrected = inverse.correct(&raw)?;
    let weights = corrected.weights();
    let rates = noise.marginal_flip_rates()?;

    println!("{:>10} {:>9} {:>9} {:>9} {:>9} {:>9}", "w", "exact", "twirl", "full-inv", "bitflip", "raw");
    for mask in [0b1, 0b11, 0b1111, 0xff] {
        let w = PauliZIndex::new(mask, n)?;
        println!(
            "{:>10} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
            w.to_string(),
            exact_weight(&circuit, w),
            protocol1_estimate(&d0, &d1, w, &EstimateOptions::default())?.value,
            weights[mask as usize],
            bitflip_product_baseline(&rates, w, &raw, 0.05)?,
            unmitigated_estimate(&raw, w)?,
        );
    }
    println!("corrected probabilities outside [0, 1]: {}", corrected.out_of_range);
    Ok(())
}
