use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::histogram::Histogram;
use crate::error::{Error, Result};
use crate::pauli::{check_qubits, BitString};

/// One acquired shot: flip mask `q`, noisy outcome `x`, acquisition time `t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub q: u32,
    pub x: u32,
    pub t: u64,
}

impl Record {
    #[inline]
    pub fn folded(&self) -> u32 {
        self.x ^ self.q
    }
}

/// Acquired `(q, x)` tuples, kept in timestamp order, plus the histogram of
/// `z = x XOR q` that all estimators read from.
#[derive(Clone, Debug, PartialEq)]
pub struct DataSet {
    n: usize,
    records: VecDeque<Record>,
    folded: Histogram,
}

impl DataSet {
    pub fn new(n: usize) -> Result<Self> {
        check_qubits(n)?;
        Ok(DataSet {
            n,
            records: VecDeque::new(),
            folded: Histogram::new(n)?,
        })
    }

    pub fn from_records(n: usize, records: impl IntoIterator<Item = Record>) -> Result<Self> {
        let mut d = Self::new(n)?;
        for r in records {
            d.push_record(r)?;
        }
        Ok(d)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl ExactSizeIterator<Item = &Record> {
        self.records.iter()
    }

    pub fn folded(&self) -> &Histogram {
        &self.folded
    }

    pub fn push(&mut self, q: BitString, x: BitString, t: u64) -> Result<()> {
        for got in [q.n(), x.n()] {
            if got != self.n {
                return Err(Error::DimensionMismatch { expected: self.n, got });
            }
        }
        self.insert(Record { q: q.bits(), x: x.bits(), t });
        Ok(())
    }

    pub fn push_record(&mut self, r: Record) -> Result<()> {
        let q = BitString::new(r.q, self.n)?;
        let x = BitString::new(r.x, self.n)?;
        self.push(q, x, r.t)
    }

    // Appends in O(1) when timestamps arrive in order.
    #[inline]
    fn insert(&mut self, r: Record) {
        match self.records.back() {
            Some(last) if last.t > r.t => {
                let at = self.records.partition_point(|e| e.t <= r.t);
                self.records.insert(at, r);
            }
            _ => self.records.push_back(r),
        }
        self.folded.bump(r.folded());
    }

    /// Adds every record of `other`. Histogram addition, so merging is
    /// associative and commutative.
    pub fn merge(&mut self, other: &DataSet) -> Result<()> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        let mut merged = VecDeque::with_capacity(self.records.len() + other.records.len());
        let (mut a, mut b) = (self.records.iter().peekable(), other.records.iter().peekable());
        loop {
            let take_a = match (a.peek(), b.peek()) {
                (Some(x), Some(y)) => x.t <= y.t,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => break,
            };
            let r = if take_a { a.next() } else { b.next() };
            merged.extend(r.copied());
        }
        self.records = merged;
        self.folded.merge(&other.folded)?;
        Ok(())
    }

    /// Drops every record with `t < cutoff`; returns how many were removed.
    /// Costs time proportional to the number removed.
    pub fn retire_before(&mut self, cutoff: u64) -> usize {
        let mut removed = 0;
        while let Some(r) = self.records.front() {
            if r.t >= cutoff {
                break;
            }
            let z = r.folded();
            self.records.pop_front();
            // the record was counted on insert
            self.folded.remove(z, 1).expect("folded histogram out of sync with records");
            removed += 1;
        }
        removed
    }

    /// Rebuilds the folded histogram from the raw records.
    pub fn recompute_folded(&self) -> Histogram {
        let mut h = Histogram::new(self.n).expect("n validated at construction");
        for r in &self.records {
            h.bump(r.folded());
        }
        h
    }
}

/// The set flip masks are drawn from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexSet {
    /// Uniform over all `2^n` X-masks (the default).
    AllX,
    /// A single fixed mask. Unbiased only when the channel's Walsh matrix is
    /// already diagonal, as for independent per-qubit flips.
    Fixed(u32),
    /// Uniform over an explicit list of masks.
    Explicit(Vec<u32>),
}

impl IndexSet {
    fn validate(&self, n: usize) -> Result<()> {
        let check = |q: u32| BitString::new(q, n).map(|_| ());
        match self {
            IndexSet::AllX => Ok(()),
            IndexSet::Fixed(q) => check(*q),
            IndexSet::Explicit(qs) if qs.is_empty() => Err(Error::EmptyIndexSet),
            IndexSet::Explicit(qs) => qs.iter().try_for_each(|&q| check(q)),
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> u32 {
        match self {
            IndexSet::AllX => {
                if n == 32 {
                    rng.next_u32()
                } else {
                    rng.next_u32() & ((1u32 << n) - 1)
                }
            }
            IndexSet::Fixed(q) => *q,
            IndexSet::Explicit(qs) => qs[rng.random_range(0..qs.len())],
        }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, IndexSet::Fixed(_))
    }
}

/// How a shot budget is split into circuit instances. One flip mask is drawn
/// per instance and reused for all of its shots.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotBudget {
    pub circuits: usize,
    pub shots_per_circuit: usize,
}

impl ShotBudget {
    /// A fresh mask for every shot.
    pub fn iid(shots: usize) -> Self {
        ShotBudget {
            circuits: shots,
            shots_per_circuit: 1,
        }
    }

    pub fn total(&self) -> usize {
        self.circuits * self.shots_per_circuit
    }
}

/// Runs `shots` randomized circuits, drawing a new mask each time.
///
/// `source(q, rng)` executes the flipped circuit once and returns the outcome.
pub fn acquire_data<R, S, C>(
    n: usize,
    source: S,
    index_set: &IndexSet,
    shots: usize,
    rng: &mut R,
    clock: C,
) -> Result<DataSet>
where
    R: Rng + ?Sized,
    S: FnMut(u32, &mut R) -> u32,
    C: FnMut() -> u64,
{
    acquire_instances(n, source, index_set, ShotBudget::iid(shots), rng, clock)
}

/// Runs `budget.circuits` instances with `budget.shots_per_circuit` shots each.
pub fn acquire_instances<R, S, C>(
    n: usize,
    mut source: S,
    index_set: &IndexSet,
    budget: ShotBudget,
    rng: &mut R,
    mut clock: C,
) -> Result<DataSet>
where
    R: Rng + ?Sized,
    S: FnMut(u32, &mut R) -> u32,
    C: FnMut() -> u64,
{
    if budget.total() == 0 {
        return Err(Error::InvalidParameter("shot budget must be at least one shot".into()));
    }
    index_set.validate(n)?;
    let mut data = DataSet::new(n)?;
    data.records.reserve(budget.total());
    let mask = if n >= 32 { u32::MAX } else { (1u32 << n) - 1 };
    for _ in 0..budget.circuits {
        let q = index_set.sample(n, rng);
        for _ in 0..budget.shots_per_circuit {
            let x = source(q, rng) & mask;
            data.insert(Record { q, x, t: clock() });
        }
    }
    Ok(data)
}

/// A clock that returns `start, start + 1, ...`.
pub fn counter_clock(start: u64) -> impl FnMut() -> u64 {
    let mut t = start;
    move || {
        let now = t;
        t += 1;
        now
    }
}

/// Wall-clock nanoseconds since the Unix epoch.
pub fn wall_clock() -> impl FnMut() -> u64 {
    || {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_nanos() as u64)
            .unwrap_or(0)
    }
}
