//! Estimate `<Z^w>` through correlated readout noise with randomized bit flips.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use readout_twirl::bounds::theorem1_shots;
use readout_twirl::mitigation::{acquire_data, counter_clock, protocol1_estimate, EstimateOptions, IndexSet};
use readout_twirl::noise::NoiseModel;
use readout_twirl::pauli::PauliZIndex;
use readout_twirl::state::{exact_weight, ideal_distribution, sample_shot_raw, CircuitSpec};

fn main() -> readout_twirl::Result<()> {
    let n = 6;
    let noise = NoiseModel::simulation_preset(n, 1)?;
    let circuit = CircuitSpec::standard(n, 0.4);
    let dist = ideal_distribution(&circuit)?;
    let ground = ideal_distribution(&circuit.calibration())?;
    let w = PauliZIndex::full(n)?;

    let shots = theorem1_shots(0.05, 0.05, noise.lambda(w)?)? as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let d0 = acquire_data(n, |q, r| sample_shot_raw(&ground, q, &noise, r), &IndexSet::AllX, shots, &mut rng, counter_clock(0))?;
    let d1 = acquire_data(n, |q, r| sample_shot_raw(&dist, q, &noise, r), &IndexSet::AllX, shots, &mut rng, counter_clock(0))?;

    let est = protocol1_estimate(&d0, &d1, w, &EstimateOptions::default())?;
    println!("shots per data set: {shots}");
    println!("noisy  f(D1, w) = {:+.4}", est.numerator);
    println!("lambda f(D0, w) = {:+.4} (exact {:+.4})", est.lambda_hat, noise.lambda(w)?);
    println!("estimate        = {:+.4} (exact {:+.4})", est.value, exact_weight(&circuit, w));
    if let Some(b) = est.error_bound {
        println!("error bound at delta = 0.05: {b:.4}");
    }
    Ok(())
}
