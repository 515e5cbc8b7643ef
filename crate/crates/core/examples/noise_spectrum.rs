//! Spectrum of a correlated readout channel and how far a per-qubit model is from it.

use readout_twirl::noise::NoiseModel;
use readout_twirl::pauli::PauliZIndex;

fn main() -> readout_twirl::Result<()> {
    let n = 4;
    let noise = NoiseModel::simulation_preset(n, 7)?;
    let product = noise.product_approximation()?;
    let m = noise.m_matrix()?;

    println!("{:>6} {:>10} {:>10} {:>10}", "w", "lambda", "A_s", "off-diag");
    for w in PauliZIndex::all(n)? {
        let i = w.mask() as usize;
        let off: f64 = m.0.row(i).iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| v.abs()).sum();
        println!("{:>6} {:>10.5} {:>10.5} {:>10.2e}", w.to_string(), noise.lambda(w)?, product.lambda(w)?, off);
    }

    let rows: Vec<_> = PauliZIndex::all(n)?.collect();
    println!("beta over all rows: {:.4}", m.beta(&rows)?);

    // Large n stays cheap through the factorized eigenvalues.
    let big = NoiseModel::simulation_preset(30, 7)?;
    println!("n = 30 full-weight lambda: {:.4}", big.lambda(PauliZIndex::full(30)?)?);
    Ok(())
}
