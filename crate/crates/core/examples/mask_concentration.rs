//! Averaging `d_q d_q^T` over random flip masks approaches the identity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use readout_twirl::pauli::mask_outer_average;

fn main() {
    let n = 12;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let pairs: Vec<(u32, u32)> = (0..2000).map(|_| (rng.random::<u32>() >> (32 - n), rng.random::<u32>() >> (32 - n))).collect();
    for k in [30, 100, 1000, 3000] {
        let masks: Vec<u32> = (0..k).map(|_| rng.random::<u32>() >> (32 - n)).collect();
        let worst = pairs
            .iter()
            .filter(|(s, t)| s != t)
            .map(|&(s, t)| mask_outer_average(&masks, s, t).abs())
            .fold(0.0, f64::max);
        println!("k = {k:>4}: max sampled off-diagonal {worst:.3}, 4/sqrt(k) = {:.3}", 4.0 / (k as f64).sqrt());
    }
}
