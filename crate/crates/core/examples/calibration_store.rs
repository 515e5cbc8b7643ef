//! A rolling calibration set: add fresh shots, retire old ones, save, reload,
//! and correct for imperfect state preparation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use readout_twirl::mitigation::{acquire_data, counter_clock, estimator_f_all, persist, prep_correction, IndexSet};
use readout_twirl::noise::NoiseModel;
use readout_twirl::state::{ideal_distribution, sample_shot_raw, CircuitSpec};

fn main() -> readout_twirl::Result<()> {
    let n = 3;
    let prep = vec![0.02, 0.01, 0.03];
    let noise = NoiseModel::simulation_preset(n, 5)?;
    let ground = ideal_distribution(&CircuitSpec::standard(n, 0.0).with_prep_error(prep.clone()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    let mut store = acquire_data(n, |q, r| sample_shot_raw(&ground, q, &noise, r), &IndexSet::AllX, 20_000, &mut rng, counter_clock(0))?;
    for batch in 1..=3u64 {
        let fresh = acquire_data(n, |q, r| sample_shot_raw(&ground, q, &noise, r), &IndexSet::AllX, 20_000, &mut rng, counter_clock(batch * 20_000))?;
        store.merge(&fresh)?;
        let dropped = store.retire_before((batch - 1) * 20_000 + 10_000);
        println!("batch {batch}: retired {dropped}, holding {}", store.len());
    }

    let path = std::env::temp_dir().join("calibration.bin");
    persist::save(&store, &path)?;
    let store = persist::load(&path)?;

    let biased = estimator_f_all(&store)?;
    let corrected = prep_correction(&biased, &prep)?;
    let m = noise.m_matrix()?.lambda();
    for s in 0..1usize << n {
        println!("w={s:03b}: raw {:.4}, corrected {:.4}, exact {:.4}", biased[s], corrected[s], m[s]);
    }
    Ok(())
}
