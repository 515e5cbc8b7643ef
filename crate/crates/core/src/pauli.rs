//! Bit-level algebra over Z_2^n.
//!
//! Qubit `l` (zero based) maps to bit `l` of the mask, so qubit 0 is the least
//! significant bit. Z-masks select Pauli-Z observables, X-masks select the
//! classical bit flips applied before measurement.
//!
//! The Walsh-Hadamard transform here is unnormalized: applying it twice
//! multiplies by `2^n`. Callers divide explicitly.

use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported qubit count; masks live in a `u32`.
pub const MAX_QUBITS: usize = 30;

/// Largest qubit count for which dense `2^n` transforms are allowed.
pub const MAX_DENSE_WHT_QUBITS: usize = 24;

/// Parity of the GF(2) inner product of two raw masks.
#[inline(always)]
pub fn parity(a: u32, b: u32) -> u32 {
    (a & b).count_ones() & 1
}

/// `(-1)^<a,b>` for raw masks.
#[inline(always)]
pub fn sign(a: u32, b: u32) -> i64 {
    1 - 2 * parity(a, b) as i64
}

pub(crate) fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::QubitCount { n, max: MAX_QUBITS });
    }
    Ok(())
}

/// An `n`-bit string with qubit `l` stored at bit `l`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BitString {
    bits: u32,
    n: u8,
}

impl BitString {
    pub fn new(bits: u32, n: usize) -> Result<Self> {
        check_qubits(n)?;
        if n < 32 && (bits >> n) != 0 {
            return Err(Error::MaskOutOfRange { bits: bits as u64, n });
        }
        Ok(BitString { bits, n: n as u8 })
    }

    pub fn zero(n: usize) -> Result<Self> {
        Self::new(0, n)
    }

    /// Mask with every qubit set.
    pub fn full(n: usize) -> Result<Self> {
        check_qubits(n)?;
        Self::new(((1u64 << n) - 1) as u32, n)
    }

    /// Parses a string of `0`/`1` characters, qubit 0 first.
    pub fn from_qubit_str(s: &str) -> Result<Self> {
        let mut bits = 0u32;
        let mut n = 0usize;
        for (l, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => bits |= 1 << l.min(31),
                _ => return Err(Error::InvalidParameter(format!("bad bit character {c:?} in {s:?}"))),
            }
            n = l + 1;
        }
        Self::new(bits, n)
    }

    #[inline]
    pub fn bits(self) -> u32 {
        self.bits
    }

    #[inline]
    pub fn n(self) -> usize {
        self.n as usize
    }

    pub fn bit(self, qubit: usize) -> bool {
        (self.bits >> qubit) & 1 == 1
    }

    fn same_n(self, other: BitString) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: other.n(),
            });
        }
        Ok(())
    }

    pub fn xor(self, other: BitString) -> Result<BitString> {
        self.same_n(other)?;
        Ok(BitString {
            bits: self.bits ^ other.bits,
            n: self.n,
        })
    }

    /// `<s, x> mod 2`.
    pub fn parity_inner(self, other: BitString) -> Result<u8> {
        self.same_n(other)?;
        Ok(parity(self.bits, other.bits) as u8)
    }

    pub fn popcount(self) -> usize {
        self.bits.count_ones() as usize
    }

    /// Indices of the set qubits in increasing order.
    pub fn support(self) -> impl Iterator<Item = usize> {
        let bits = self.bits;
        (0..self.n()).filter(move |&l| (bits >> l) & 1 == 1)
    }
}

impl fmt::Display for BitString {
    /// Prints qubit 0 first.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in 0..self.n() {
            f.write_str(if self.bit(l) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Index of the Pauli-Z observable `Z^w`. The zero mask is the identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PauliZIndex(pub BitString);

impl PauliZIndex {
    pub fn new(mask: u32, n: usize) -> Result<Self> {
        BitString::new(mask, n).map(PauliZIndex)
    }

    pub fn identity(n: usize) -> Result<Self> {
        BitString::zero(n).map(PauliZIndex)
    }

    /// `Z` on a single qubit.
    pub fn single(qubit: usize, n: usize) -> Result<Self> {
        if qubit >= n {
            return Err(Error::InvalidParameter(format!("qubit {qubit} out of range for n = {n}")));
        }
        Self::new(1 << qubit, n)
    }

    /// `Z` on every qubit.
    pub fn full(n: usize) -> Result<Self> {
        BitString::full(n).map(PauliZIndex)
    }

    #[inline]
    pub fn mask(self) -> u32 {
        self.0.bits()
    }

    #[inline]
    pub fn n(self) -> usize {
        self.0.n()
    }

    /// Number of non-identity factors.
    pub fn weight(self) -> usize {
        self.0.popcount()
    }

    /// All `2^n` Z-indices in mask order.
    pub fn all(n: usize) -> Result<impl Iterator<Item = PauliZIndex>> {
        check_qubits(n)?;
        Ok((0..(1u64 << n)).map(move |m| PauliZIndex(BitString { bits: m as u32, n: n as u8 })))
    }
}

impl fmt::Display for PauliZIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Z[{}]", self.0)
    }
}

/// `+1` if `Z^s` commutes with the bit flip `X^q`, `-1` otherwise.
pub fn commutation_sign(s: PauliZIndex, q: BitString) -> Result<i8> {
    Ok(1 - 2 * s.0.parity_inner(q)? as i8)
}

/// In-place unnormalized Walsh-Hadamard transform over any ring-like scalar.
///
/// Integer inputs stay exact, which the batch estimator relies on.
pub fn wht_in_place<T>(v: &mut [T]) -> Result<()>
where
    T: Copy + Add<Output = T> + Sub<Output = T>,
{
    let len = v.len();
    if !len.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(len));
    }
    let mut half = 1;
    while half < len {
        for block in v.chunks_exact_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        half <<= 1;
    }
    Ok(())
}

/// `H_n v` as a new vector.
pub fn wht(v: &[f64]) -> Result<Vec<f64>> {
    let mut out = v.to_vec();
    wht_in_place(&mut out)?;
    Ok(out)
}

/// Entry `(s, t)` of the average of `d_q d_q^T` over `masks`, where
/// `d_q[s] = (-1)^{<s, q>}` is the commutation-sign vector of mask `q`.
///
/// Equals `mean_q (-1)^{<s XOR t, q>}`, so the diagonal is exactly one.
pub fn mask_outer_average(masks: &[u32], s: u32, t: u32) -> f64 {
    if masks.is_empty() {
        return 0.0;
    }
    let d = s ^ t;
    let total: i64 = masks.iter().map(|&q| sign(d, q)).sum();
    total as f64 / masks.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mask_average_diagonal_and_full_set() {
        let all: Vec<u32> = (0..16).collect();
        for s in 0..16 {
            assert_eq!(mask_outer_average(&all, s, s), 1.0);
            for t in 0..16 {
                if t != s {
                    assert_eq!(mask_outer_average(&all, s, t), 0.0);
                }
            }
        }
        assert_eq!(mask_outer_average(&[5, 9], 3, 3), 1.0);
    }

    fn bs(bits: u32, n: usize) -> BitString {
        BitString::new(bits, n).unwrap()
    }

    #[test]
    fn parity_examples() {
        // masks written qubit-major: "11" = 0b11, "10" = qubit 0 set = 0b01
        assert_eq!(bs(0b00, 2).parity_inner(bs(0b11, 2)).unwrap(), 0);
        assert_eq!(bs(0b11, 2).parity_inner(bs(0b01, 2)).unwrap(), 1);
        assert_eq!(bs(0b11, 2).parity_inner(bs(0b11, 2)).unwrap(), 0);
    }

    #[test]
    fn parity_length_mismatch() {
        assert!(matches!(
            bs(1, 2).parity_inner(bs(1, 3)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(commutation_sign(PauliZIndex(bs(1, 2)), bs(1, 3)).is_err());
    }

    #[test]
    fn commutation_examples() {
        for q in 0..8 {
            assert_eq!(commutation_sign(PauliZIndex::identity(3).unwrap(), bs(q, 3)).unwrap(), 1);
        }
        assert_eq!(commutation_sign(PauliZIndex::new(1, 1).unwrap(), bs(1, 1)).unwrap(), -1);
        assert_eq!(commutation_sign(PauliZIndex::new(0b11, 2).unwrap(), bs(0b10, 2)).unwrap(), -1);
    }

    #[test]
    fn weight_examples() {
        assert_eq!(PauliZIndex::new(0, 3).unwrap().weight(), 0);
        assert_eq!(PauliZIndex::new(0b101, 3).unwrap().weight(), 2);
        assert_eq!(PauliZIndex::full(7).unwrap().weight(), 7);
        assert_eq!(PauliZIndex::full(30).unwrap().weight(), 30);
    }

    #[test]
    fn mask_range_checked() {
        assert!(BitString::new(4, 2).is_err());
        assert!(BitString::new(0, 0).is_err());
        assert!(BitString::new(0, 31).is_err());
        assert!(BitString::new(u32::MAX >> 2, 30).is_ok());
    }

    #[test]
    fn qubit_string_roundtrip() {
        let b = BitString::from_qubit_str("1101").unwrap();
        assert_eq!(b.bits(), 0b1011);
        assert_eq!(b.to_string(), "1101");
        assert!(BitString::from_qubit_str("10x").is_err());
    }

    #[test]
    fn wht_small_examples() {
        assert_eq!(wht(&[1.0, 0.0]).unwrap(), vec![1.0, 1.0]);
        assert_eq!(wht(&[1.0, 1.0]).unwrap(), vec![2.0, 0.0]);
        assert!(matches!(wht(&[1.0, 2.0, 3.0]), Err(Error::NotPowerOfTwo(3))));
    }

    #[test]
    fn wht_matches_dense_hadamard() {
        // dense oracle: H_n[i][j] = (-1)^<i,j>
        let n = 4;
        let dim = 1usize << n;
        let v: Vec<f64> = (0..dim).map(|i| ((i * 37 + 11) % 17) as f64 - 8.3).collect();
        let dense: Vec<f64> = (0..dim)
            .map(|i| (0..dim).map(|j| sign(i as u32, j as u32) as f64 * v[j]).sum())
            .collect();
        let fast = wht(&v).unwrap();
        for (a, b) in fast.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn parity_is_bilinear(n in 1usize..=30, s: u32, x: u32, y: u32) {
            let m = ((1u64 << n) - 1) as u32;
            let (s, x, y) = (bs(s & m, n), bs(x & m, n), bs(y & m, n));
            let lhs = s.parity_inner(x.xor(y).unwrap()).unwrap();
            let rhs = s.parity_inner(x).unwrap() ^ s.parity_inner(y).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn sign_folding_identity(n in 1usize..=12, s: u32, q: u32, x: u32) {
            let m = ((1u64 << n) - 1) as u32;
            let (s, q, x) = (bs(s & m, n), bs(q & m, n), bs(x & m, n));
            let lhs = commutation_sign(PauliZIndex(s), q).unwrap() as i64 * sign(s.bits(), x.bits());
            prop_assert_eq!(lhs, sign(s.bits(), q.bits() ^ x.bits()));
        }

        #[test]
        fn wht_is_involution_up_to_scale(v in (0usize..=8)
            .prop_flat_map(|k| proptest::collection::vec(-1e3f64..1e3, 1usize << k)))
        {
            let dim = v.len() as f64;
            let twice = wht(&wht(&v).unwrap()).unwrap();
            for (a, b) in twice.iter().zip(&v) {
                prop_assert!((a - dim * b).abs() <= 1e-12 * (dim * b.abs()).max(dim * 1e3));
            }
        }
    }
}
