//! How many shots and random circuits a target accuracy needs.

use readout_twirl::bounds::{hoeffding_alpha, lemma1_ratio_bound, theorem1_shots, theorem2_instances};
use readout_twirl::noise::{beta_offdiag, NoiseModel};
use readout_twirl::pauli::PauliZIndex;

fn main() -> readout_twirl::Result<()> {
    let (delta, epsilon) = (0.05, 0.05);
    let noise = NoiseModel::simulation_preset(8, 0)?;
    let m = noise.m_matrix()?;

    for mask in [0x01u32, 0x03, 0x0f, 0xff] {
        let w = PauliZIndex::new(mask, 8)?;
        let lambda = noise.lambda(w)?;
        let shots = theorem1_shots(delta, epsilon, lambda)?;
        let alpha = hoeffding_alpha(shots, delta)?;
        let beta = beta_offdiag(&m, &[w])?;
        println!(
            "w={w}: lambda {lambda:.3}, N = {shots}, alpha {alpha:.4}, ratio bound {:.4}, beta {beta:.3}, k = {}",
            lemma1_ratio_bound(alpha, lambda)?,
            theorem2_instances(delta, epsilon, beta, 8, 1)?,
        );
    }
    Ok(())
}
