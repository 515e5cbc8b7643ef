use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::pauli::{check_qubits, sign, wht_in_place, MAX_DENSE_WHT_QUBITS};

/// Above this many qubits counts are kept in a sorted map instead of a `2^n` array.
const DENSE_COUNT_QUBITS: usize = 20;

#[derive(Clone, Debug, PartialEq, Eq)]
enum Repr {
    Dense(Vec<u64>),
    Sparse(BTreeMap<u32, u64>),
}

/// Outcome counts over `Z_2^n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Histogram {
    n: usize,
    total: u64,
    repr: Repr,
}

impl Histogram {
    pub fn new(n: usize) -> Result<Self> {
        check_qubits(n)?;
        let repr = if n <= DENSE_COUNT_QUBITS {
            Repr::Dense(vec![0; 1 << n])
        } else {
            Repr::Sparse(BTreeMap::new())
        };
        Ok(Histogram { n, total: 0, repr })
    }

    pub fn from_outcomes(n: usize, outcomes: impl IntoIterator<Item = u32>) -> Result<Self> {
        let mut h = Self::new(n)?;
        for z in outcomes {
            h.add(z, 1)?;
        }
        Ok(h)
    }

    /// Builds from a dense count vector of length `2^n`.
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let d = counts.len();
        if !d.is_power_of_two() || d < 2 {
            return Err(Error::NotPowerOfTwo(d));
        }
        let mut h = Self::new(d.trailing_zeros() as usize)?;
        for (z, &c) in counts.iter().enumerate() {
            if c > 0 {
                h.add(z as u32, c)?;
            }
        }
        Ok(h)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    fn check(&self, z: u32) -> Result<()> {
        if self.n < 32 && (z >> self.n) != 0 {
            return Err(Error::MaskOutOfRange { bits: z as u64, n: self.n });
        }
        Ok(())
    }

    pub fn add(&mut self, z: u32, k: u64) -> Result<()> {
        self.check(z)?;
        match &mut self.repr {
            Repr::Dense(v) => v[z as usize] += k,
            Repr::Sparse(m) => *m.entry(z).or_insert(0) += k,
        }
        self.total += k;
        Ok(())
    }

    /// Unchecked hot-path increment; `z` must fit in `n` bits.
    #[inline]
    pub(crate) fn bump(&mut self, z: u32) {
        match &mut self.repr {
            Repr::Dense(v) => v[z as usize] += 1,
            Repr::Sparse(m) => *m.entry(z).or_insert(0) += 1,
        }
        self.total += 1;
    }

    pub fn remove(&mut self, z: u32, k: u64) -> Result<()> {
        self.check(z)?;
        let have = self.get(z);
        if have < k {
            return Err(Error::InvalidParameter(format!("cannot remove {k} counts of {z}, only {have} present")));
        }
        match &mut self.repr {
            Repr::Dense(v) => v[z as usize] -= k,
            Repr::Sparse(m) => {
                if have == k {
                    m.remove(&z);
                } else if let Some(c) = m.get_mut(&z) {
                    *c -= k;
                }
            }
        }
        self.total -= k;
        Ok(())
    }

    pub fn get(&self, z: u32) -> u64 {
        match &self.repr {
            Repr::Dense(v) => v.get(z as usize).copied().unwrap_or(0),
            Repr::Sparse(m) => m.get(&z).copied().unwrap_or(0),
        }
    }

    /// Non-zero entries in increasing outcome order.
    pub fn iter(&self) -> Box<dyn Iterator<Item = (u32, u64)> + '_> {
        match &self.repr {
            Repr::Dense(v) => Box::new(v.iter().enumerate().filter(|(_, &c)| c > 0).map(|(z, &c)| (z as u32, c))),
            Repr::Sparse(m) => Box::new(m.iter().map(|(&z, &c)| (z, c))),
        }
    }

    pub fn merge(&mut self, other: &Histogram) -> Result<()> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        for (z, c) in other.iter() {
            self.add(z, c)?;
        }
        Ok(())
    }

    /// `sum_z count[z] (-1)^{<s, z>}`, exact in integers.
    pub fn signed_sum(&self, s: u32) -> i64 {
        match &self.repr {
            Repr::Dense(v) => v.iter().enumerate().map(|(z, &c)| sign(s, z as u32) * c as i64).sum(),
            Repr::Sparse(m) => m.iter().map(|(&z, &c)| sign(s, z) * c as i64).sum(),
        }
    }

    /// All `2^n` signed sums at once via the integer Walsh-Hadamard transform.
    pub fn signed_sums_all(&self) -> Result<Vec<i64>> {
        if self.n > MAX_DENSE_WHT_QUBITS {
            return Err(Error::TooLarge {
                what: "dense Walsh-Hadamard transform",
                n: self.n,
                max: MAX_DENSE_WHT_QUBITS,
            });
        }
        let mut v = vec![0i64; 1 << self.n];
        for (z, c) in self.iter() {
            v[z as usize] = c as i64;
        }
        wht_in_place(&mut v)?;
        Ok(v)
    }

    /// Normalized frequencies as a dense vector.
    pub fn frequencies(&self) -> Result<Vec<f64>> {
        if self.total == 0 {
            return Err(Error::EmptyDataSet);
        }
        if self.n > MAX_DENSE_WHT_QUBITS {
            return Err(Error::TooLarge {
                what: "dense frequency vector",
                n: self.n,
                max: MAX_DENSE_WHT_QUBITS,
            });
        }
        let mut v = vec![0.0; 1 << self.n];
        let t = self.total as f64;
        for (z, c) in self.iter() {
            v[z as usize] = c as f64 / t;
        }
        Ok(v)
    }
}
