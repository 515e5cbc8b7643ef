//! Pauli-Z expectations of a histogram, one at a time and all at once.

use readout_twirl::mitigation::Histogram;
use readout_twirl::pauli::{wht, PauliZIndex};

fn main() -> readout_twirl::Result<()> {
    // 3 qubits, outcome counts indexed by bit string (qubit 0 is the lowest bit)
    let hist = Histogram::from_counts(&[40, 5, 3, 2, 30, 10, 6, 4])?;

    let sums = hist.signed_sums_all()?;
    for w in PauliZIndex::all(3)? {
        let single = hist.signed_sum(w.mask()) as f64 / hist.total() as f64;
        let batch = sums[w.mask() as usize] as f64 / hist.total() as f64;
        assert_eq!(single, batch);
        println!("<{w}> = {batch:+.4}");
    }

    // the transform is its own inverse up to 2^n
    let p = hist.frequencies()?;
    let back: Vec<f64> = wht(&wht(&p)?)?.iter().map(|v| v / 8.0).collect();
    assert!(p.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-15));
    Ok(())
}
