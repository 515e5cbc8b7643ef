//! Classical readout channels.
//!
//! A channel is a left-stochastic matrix `A` with `A[x][y]` the probability of
//! reading `x` when the ideal outcome is `y`. Besides dense matrices the model
//! keeps structured forms (per-qubit flips, pair-correlated flips, convex
//! mixtures, permutations) so sampling and eigenvalues stay cheap for large `n`.
//!
//! In the Walsh basis the channel becomes `M = H A H^{-1}`; after twirling only
//! its diagonal `lambda_w = M[w][w]` survives.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::pauli::{check_qubits, parity, sign, BitString, PauliZIndex};

/// Largest `n` for which a channel may be expanded to a dense `2^n x 2^n` matrix.
pub const MAX_DENSE_QUBITS: usize = 12;

/// Largest `n` for the exact twirl enumeration oracle.
pub const MAX_TWIRL_QUBITS: usize = 8;

const STOCHASTIC_TOL: f64 = 1e-9;

/// Single-qubit flip probabilities: `r = P(read 1 | 0)`, `s = P(read 0 | 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlipRates {
    pub r: f64,
    pub s: f64,
}

impl FlipRates {
    pub fn symmetric(r: f64) -> Self {
        FlipRates { r, s: r }
    }

    /// The Walsh-domain diagonal entry `1 - r - s` of this qubit's channel.
    pub fn factor(self) -> f64 {
        1.0 - self.r - self.s
    }

    /// The 2x2 channel `[[1-r, s], [r, 1-s]]`.
    pub fn matrix(self) -> [[f64; 2]; 2] {
        [[1.0 - self.r, self.s], [self.r, 1.0 - self.s]]
    }
}

/// Joint flip of qubits `i` and `j` with probability `c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairFlip {
    pub i: usize,
    pub j: usize,
    pub c: f64,
}

impl PairFlip {
    fn mask(self) -> u32 {
        (1 << self.i) | (1 << self.j)
    }
}

/// Probability threshold on a 32-bit uniform draw.
#[inline(always)]
fn threshold(p: f64) -> u64 {
    (p * 4_294_967_296.0).round() as u64
}

#[inline(always)]
fn bernoulli<R: RngCore + ?Sized>(thr: u64, rng: &mut R) -> bool {
    (rng.next_u32() as u64) < thr
}

#[derive(Clone, Debug)]
pub struct DenseChannel {
    matrix: Matrix,
    // column-major cumulative sums, one column per ideal outcome
    cdf: Vec<f64>,
}

impl DenseChannel {
    fn new(matrix: Matrix) -> Self {
        let d = matrix.dim();
        let mut cdf = vec![0.0; d * d];
        for y in 0..d {
            let mut acc = 0.0;
            for x in 0..d {
                acc += matrix.get(x, y);
                cdf[y * d + x] = acc;
            }
        }
        DenseChannel { matrix, cdf }
    }

    fn sample<R: Rng + ?Sized>(&self, y: u32, rng: &mut R) -> u32 {
        let d = self.matrix.dim();
        let col = &self.cdf[y as usize * d..(y as usize + 1) * d];
        let u = rng.random::<f64>() * col[d - 1];
        let x = col.partition_point(|&c| c <= u);
        if x < d {
            return x as u32;
        }
        // rounding pushed u past the last step; take the last reachable outcome
        (0..d).rev().find(|&x| self.matrix.get(x, y as usize) > 0.0).unwrap_or(d - 1) as u32
    }
}

#[derive(Clone, Debug)]
struct ProductChannel {
    rates: Vec<FlipRates>,
    thr0: Vec<u64>,
    thr1: Vec<u64>,
}

impl ProductChannel {
    fn new(rates: Vec<FlipRates>) -> Self {
        let thr0 = rates.iter().map(|f| threshold(f.r)).collect();
        let thr1 = rates.iter().map(|f| threshold(f.s)).collect();
        ProductChannel { rates, thr0, thr1 }
    }

    #[inline]
    fn sample<R: RngCore + ?Sized>(&self, y: u32, rng: &mut R) -> u32 {
        let mut x = y;
        for l in 0..self.rates.len() {
            let thr = if (y >> l) & 1 == 0 { self.thr0[l] } else { self.thr1[l] };
            if thr != 0 && bernoulli(thr, rng) {
                x ^= 1 << l;
            }
        }
        x
    }
}

#[derive(Clone, Debug)]
enum Kind {
    Dense(DenseChannel),
    Product(ProductChannel),
    PairCorrelated {
        base: Box<NoiseModel>,
        pairs: Vec<PairFlip>,
        thr: Vec<u64>,
    },
    Convex {
        components: Vec<(f64, NoiseModel)>,
        cumulative: Vec<f64>,
    },
    Permutation(Vec<u32>),
}

/// A left-stochastic readout channel on `n` qubits.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "NoiseDoc", into = "NoiseDoc")]
pub struct NoiseModel {
    n: usize,
    kind: Kind,
}

impl NoiseModel {
    /// Wraps an explicit left-stochastic matrix of size `2^n`.
    pub fn dense(matrix: Matrix) -> Result<Self> {
        let d = matrix.dim();
        if !d.is_power_of_two() || d < 2 {
            return Err(Error::InvalidModel(format!("dense channel dimension {d} is not 2^n with n >= 1")));
        }
        let n = d.trailing_zeros() as usize;
        if n > MAX_DENSE_QUBITS {
            return Err(Error::TooLarge {
                what: "dense channel",
                n,
                max: MAX_DENSE_QUBITS,
            });
        }
        if !matrix.is_left_stochastic(STOCHASTIC_TOL) {
            return Err(Error::InvalidModel("dense channel is not left-stochastic".into()));
        }
        Ok(NoiseModel {
            n,
            kind: Kind::Dense(DenseChannel::new(matrix)),
        })
    }

    /// Independent asymmetric flips per qubit.
    pub fn product(rates: Vec<FlipRates>) -> Result<Self> {
        let n = rates.len();
        check_qubits(n)?;
        for (l, f) in rates.iter().enumerate() {
            if !(0.0..=1.0).contains(&f.r) || !(0.0..=1.0).contains(&f.s) {
                return Err(Error::InvalidModel(format!("flip rates on qubit {l} outside [0, 1]: {f:?}")));
            }
        }
        Ok(NoiseModel {
            n,
            kind: Kind::Product(ProductChannel::new(rates)),
        })
    }

    /// The same symmetric flip probability on every qubit.
    pub fn uniform_bit_flip(n: usize, r: f64) -> Result<Self> {
        Self::product(vec![FlipRates::symmetric(r); n])
    }

    pub fn noiseless(n: usize) -> Result<Self> {
        Self::uniform_bit_flip(n, 0.0)
    }

    /// Applies `base`, then flips each configured pair jointly with probability `c`.
    pub fn pair_correlated(base: NoiseModel, pairs: Vec<PairFlip>) -> Result<Self> {
        let n = base.n;
        for p in &pairs {
            if p.i == p.j || p.i >= n || p.j >= n {
                return Err(Error::InvalidModel(format!("bad qubit pair ({}, {}) for n = {n}", p.i, p.j)));
            }
            if !(0.0..=1.0).contains(&p.c) {
                return Err(Error::InvalidModel(format!("pair flip probability {} outside [0, 1]", p.c)));
            }
        }
        let thr = pairs.iter().map(|p| threshold(p.c)).collect();
        Ok(NoiseModel {
            n,
            kind: Kind::PairCorrelated {
                base: Box::new(base),
                pairs,
                thr,
            },
        })
    }

    /// `sum_k mu_k A_k`.
    pub fn convex(components: Vec<(f64, NoiseModel)>) -> Result<Self> {
        let Some((_, first)) = components.first() else {
            return Err(Error::InvalidModel("convex combination needs at least one component".into()));
        };
        let n = first.n;
        let mut total = 0.0;
        let mut cumulative = Vec::with_capacity(components.len());
        for (mu, m) in &components {
            if m.n != n {
                return Err(Error::DimensionMismatch { expected: n, got: m.n });
            }
            if !(*mu >= 0.0) {
                return Err(Error::InvalidModel(format!("negative convex weight {mu}")));
            }
            total += mu;
            cumulative.push(total);
        }
        if (total - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::InvalidModel(format!("convex weights sum to {total}, not 1")));
        }
        Ok(NoiseModel {
            n,
            kind: Kind::Convex { components, cumulative },
        })
    }

    /// Deterministic relabeling `x = map[y]`.
    pub fn permutation(map: Vec<u32>) -> Result<Self> {
        let d = map.len();
        if !d.is_power_of_two() || d < 2 {
            return Err(Error::InvalidModel(format!("permutation length {d} is not 2^n with n >= 1")));
        }
        let n = d.trailing_zeros() as usize;
        check_qubits(n)?;
        let mut seen = vec![false; d];
        for &x in &map {
            let x = x as usize;
            if x >= d || seen[x] {
                return Err(Error::InvalidModel("permutation map is not a bijection".into()));
            }
            seen[x] = true;
        }
        Ok(NoiseModel {
            n,
            kind: Kind::Permutation(map),
        })
    }

    /// Every shot reads all zeros: `A = e_0 e^T`.
    pub fn always_zero(n: usize) -> Result<Self> {
        check_qubits(n)?;
        let d = 1usize << n;
        Self::dense(Matrix::from_fn(d, |x, _| if x == 0 { 1.0 } else { 0.0 }))
    }

    /// Every outcome equally likely regardless of input: `A = 2^{-n} e e^T`.
    pub fn fully_depolarizing(n: usize) -> Result<Self> {
        check_qubits(n)?;
        let d = 1usize << n;
        Self::dense(Matrix::from_fn(d, |_, _| 1.0 / d as f64))
    }

    /// Default simulation channel: asymmetric per-qubit flips with
    /// `r in [0.01, 0.03]`, `s in [0.03, 0.08]` (1 -> 0 dominates), plus joint
    /// flips with probability `0.02` on qubit pairs (0,1), (2,3), ...
    pub fn simulation_preset(n: usize, seed: u64) -> Result<Self> {
        check_qubits(n)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rates = (0..n)
            .map(|_| FlipRates {
                r: rng.random_range(0.01..=0.03),
                s: rng.random_range(0.03..=0.08),
            })
            .collect();
        let pairs = (0..n / 2).map(|p| PairFlip { i: 2 * p, j: 2 * p + 1, c: 0.02 }).collect();
        Self::pair_correlated(Self::product(rates)?, pairs)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_structured(&self) -> bool {
        !matches!(self.kind, Kind::Dense(_))
    }

    /// Draws a noisy outcome for ideal outcome `y` (raw mask form).
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, y: u32, rng: &mut R) -> u32 {
        match &self.kind {
            Kind::Product(p) => p.sample(y, rng),
            Kind::Dense(d) => d.sample(y, rng),
            Kind::PairCorrelated { base, pairs, thr } => {
                let mut x = base.sample(y, rng);
                for (p, &t) in pairs.iter().zip(thr) {
                    if t != 0 && bernoulli(t, rng) {
                        x ^= p.mask();
                    }
                }
                x
            }
            Kind::Convex { components, cumulative } => {
                let u = rng.random::<f64>() * cumulative[cumulative.len() - 1];
                let k = cumulative.partition_point(|&c| c <= u).min(components.len() - 1);
                components[k].1.sample(y, rng)
            }
            Kind::Permutation(map) => map[y as usize],
        }
    }

    pub fn sample_noisy<R: Rng + ?Sized>(&self, y: BitString, rng: &mut R) -> Result<BitString> {
        if y.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: y.n(),
            });
        }
        BitString::new(self.sample(y.bits(), rng), self.n)
    }

    /// Explicit `2^n x 2^n` left-stochastic matrix.
    pub fn to_dense(&self) -> Result<Matrix> {
        if self.n > MAX_DENSE_QUBITS {
            return Err(Error::TooLarge {
                what: "dense channel",
                n: self.n,
                max: MAX_DENSE_QUBITS,
            });
        }
        let d = 1usize << self.n;
        Ok(match &self.kind {
            Kind::Dense(dc) => dc.matrix.clone(),
            Kind::Product(p) => {
                // Kronecker build, qubit 0 is the fastest-varying index
                let mut m = vec![1.0];
                for (l, f) in p.rates.iter().enumerate() {
                    let a = f.matrix();
                    let cur = 1usize << l;
                    let next = cur * 2;
                    let mut out = vec![0.0; next * next];
                    for x in 0..next {
                        for y in 0..next {
                            let (xl, yl) = (x >> l, y >> l);
                            let (xr, yr) = (x & (cur - 1), y & (cur - 1));
                            out[x * next + y] = a[xl][yl] * m[xr * cur + yr];
                        }
                    }
                    m = out;
                }
                Matrix::from_row_major(d, m)?
            }
            Kind::PairCorrelated { base, pairs, .. } => {
                let mut m = base.to_dense()?;
                for p in pairs {
                    let e = p.mask() as usize;
                    let prev = m.clone();
                    for x in 0..d {
                        for y in 0..d {
                            m.set(x, y, (1.0 - p.c) * prev.get(x, y) + p.c * prev.get(x ^ e, y));
                        }
                    }
                }
                m
            }
            Kind::Convex { components, .. } => {
                let mut m = Matrix::zeros(d);
                for (mu, c) in components {
                    m.add_scaled(*mu, &c.to_dense()?)?;
                }
                m
            }
            Kind::Permutation(map) => {
                let mut m = Matrix::zeros(d);
                for (y, &x) in map.iter().enumerate() {
                    m.set(x as usize, y, 1.0);
                }
                m
            }
        })
    }

    /// `M = H_n A H_n^{-1}`.
    pub fn m_matrix(&self) -> Result<MMatrix> {
        Ok(MMatrix(self.to_dense()?.hadamard_conjugate()?))
    }

    /// Eigenvalue of the twirled channel on the Walsh vector `v_w`.
    pub fn lambda(&self, w: PauliZIndex) -> Result<f64> {
        if w.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: w.n(),
            });
        }
        self.lambda_mask(w.mask())
    }

    fn lambda_mask(&self, w: u32) -> Result<f64> {
        Ok(match &self.kind {
            Kind::Product(p) => p
                .rates
                .iter()
                .enumerate()
                .filter(|(l, _)| (w >> l) & 1 == 1)
                .map(|(_, f)| f.factor())
                .product(),
            Kind::PairCorrelated { base, pairs, .. } => {
                let pair_factor: f64 = pairs
                    .iter()
                    .filter(|p| parity(w, p.mask()) == 1)
                    .map(|p| 1.0 - 2.0 * p.c)
                    .product();
                base.lambda_mask(w)? * pair_factor
            }
            Kind::Convex { components, .. } => {
                let mut acc = 0.0;
                for (mu, c) in components {
                    acc += mu * c.lambda_mask(w)?;
                }
                acc
            }
            Kind::Permutation(map) => {
                let s: i64 = map.iter().enumerate().map(|(b, &a)| sign(w, a ^ b as u32)).sum();
                s as f64 / map.len() as f64
            }
            Kind::Dense(dc) => {
                let m = &dc.matrix;
                let d = m.dim();
                let mut acc = 0.0;
                for a in 0..d {
                    let sa = sign(w, a as u32) as f64;
                    let row: f64 = m.row(a).iter().enumerate().map(|(b, v)| sign(w, b as u32) as f64 * v).sum();
                    acc += sa * row;
                }
                acc / d as f64
            }
        })
    }

    /// Per-qubit flip frequencies of this channel, averaged over the other
    /// qubits' ideal values. These define the product approximation `A_s`.
    pub fn marginal_flip_rates(&self) -> Result<Vec<FlipRates>> {
        match &self.kind {
            Kind::Product(p) => Ok(p.rates.clone()),
            Kind::PairCorrelated { base, pairs, .. } => {
                let mut rates = base.marginal_flip_rates()?;
                for (l, f) in rates.iter_mut().enumerate() {
                    let keep: f64 = pairs
                        .iter()
                        .filter(|p| p.i == l || p.j == l)
                        .map(|p| 1.0 - 2.0 * p.c)
                        .product();
                    let p = (1.0 - keep) / 2.0;
                    f.r = f.r + p - 2.0 * f.r * p;
                    f.s = f.s + p - 2.0 * f.s * p;
                }
                Ok(rates)
            }
            Kind::Convex { components, .. } => {
                let mut out = vec![FlipRates { r: 0.0, s: 0.0 }; self.n];
                for (mu, c) in components {
                    for (o, f) in out.iter_mut().zip(c.marginal_flip_rates()?) {
                        o.r += mu * f.r;
                        o.s += mu * f.s;
                    }
                }
                Ok(out)
            }
            Kind::Permutation(map) => {
                let half = (map.len() / 2) as f64;
                Ok((0..self.n)
                    .map(|l| {
                        let (mut r, mut s) = (0.0, 0.0);
                        for (y, &x) in map.iter().enumerate() {
                            let flipped = ((x ^ y as u32) >> l) & 1 == 1;
                            if flipped {
                                if (y >> l) & 1 == 0 {
                                    r += 1.0;
                                } else {
                                    s += 1.0;
                                }
                            }
                        }
                        FlipRates { r: r / half, s: s / half }
                    })
                    .collect())
            }
            Kind::Dense(dc) => {
                let m = &dc.matrix;
                let d = m.dim();
                let mut r = vec![0.0; self.n];
                let mut s = vec![0.0; self.n];
                for x in 0..d {
                    for (y, &a) in m.row(x).iter().enumerate() {
                        if a == 0.0 {
                            continue;
                        }
                        let diff = x ^ y;
                        for l in 0..self.n {
                            if (diff >> l) & 1 == 1 {
                                if (y >> l) & 1 == 0 {
                                    r[l] += a;
                                } else {
                                    s[l] += a;
                                }
                            }
                        }
                    }
                }
                let half = (d / 2) as f64;
                Ok(r.into_iter().zip(s).map(|(r, s)| FlipRates { r: r / half, s: s / half }).collect())
            }
        }
    }

    /// The product channel built from [`Self::marginal_flip_rates`].
    pub fn product_approximation(&self) -> Result<NoiseModel> {
        NoiseModel::product(self.marginal_flip_rates()?)
    }
}

/// The readout channel in the Walsh basis.
#[derive(Clone, Debug, PartialEq)]
pub struct MMatrix(pub Matrix);

impl MMatrix {
    /// `diag(M)`, the twirled eigenvalues indexed by Z-mask.
    pub fn lambda(&self) -> Vec<f64> {
        self.0.diagonal()
    }

    pub fn beta(&self, rows: &[PauliZIndex]) -> Result<f64> {
        beta_offdiag(self, rows)
    }
}

/// `max_{i in rows} sum_{j != i} |M[i][j]|`.
pub fn beta_offdiag(m: &MMatrix, rows: &[PauliZIndex]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::EmptyIndexSet);
    }
    let d = m.0.dim();
    let mut beta = 0.0f64;
    for w in rows {
        let i = w.mask() as usize;
        if i >= d {
            return Err(Error::MaskOutOfRange { bits: i as u64, n: d.trailing_zeros() as usize });
        }
        let off: f64 = m.0.row(i).iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| v.abs()).sum();
        beta = beta.max(off);
    }
    Ok(beta)
}

/// Exact twirl `2^{-n} sum_s X_s A X_s` by enumerating every flip mask.
pub fn twirl_exact(a: &Matrix) -> Result<Matrix> {
    let d = a.dim();
    if !d.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(d));
    }
    let n = d.trailing_zeros() as usize;
    if n > MAX_TWIRL_QUBITS {
        return Err(Error::TooLarge {
            what: "exact twirl",
            n,
            max: MAX_TWIRL_QUBITS,
        });
    }
    let mut out = Matrix::zeros(d);
    for s in 0..d {
        for x in 0..d {
            for y in 0..d {
                let v = out.get(x, y) + a.get(x ^ s, y ^ s);
                out.set(x, y, v);
            }
        }
    }
    out.scale(1.0 / d as f64);
    Ok(out)
}

/// A random left-stochastic matrix with Dirichlet(1)-like columns.
pub fn random_stochastic_matrix<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Matrix {
    let mut m = Matrix::from_fn(dim, |_, _| -rng.random::<f64>().max(f64::MIN_POSITIVE).ln());
    let sums = m.column_sums();
    for r in 0..dim {
        for c in 0..dim {
            let v = m.get(r, c) / sums[c];
            m.set(r, c, v);
        }
    }
    m
}

// ---- serialization ---------------------------------------------------------

#[derive(Clone, Serialize, Deserialize)]
struct NoiseDoc {
    n: usize,
    #[serde(flatten)]
    kind: KindDoc,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum KindDoc {
    Dense { matrix: Matrix },
    ProductBitFlip { flips: Vec<FlipRates> },
    PairCorrelated { base: Box<NoiseDoc>, pairs: Vec<PairFlip> },
    Convex { components: Vec<ConvexTerm> },
    Permutation { map: Vec<u32> },
}

#[derive(Clone, Serialize, Deserialize)]
struct ConvexTerm {
    weight: f64,
    model: NoiseDoc,
}

impl From<NoiseModel> for NoiseDoc {
    fn from(m: NoiseModel) -> Self {
        let kind = match m.kind {
            Kind::Dense(dc) => KindDoc::Dense { matrix: dc.matrix },
            Kind::Product(p) => KindDoc::ProductBitFlip { flips: p.rates },
            Kind::PairCorrelated { base, pairs, .. } => KindDoc::PairCorrelated {
                base: Box::new((*base).into()),
                pairs,
            },
            Kind::Convex { components, .. } => KindDoc::Convex {
                components: components
                    .into_iter()
                    .map(|(weight, model)| ConvexTerm {
                        weight,
                        model: model.into(),
                    })
                    .collect(),
            },
            Kind::Permutation(map) => KindDoc::Permutation { map },
        };
        NoiseDoc { n: m.n, kind }
    }
}

impl TryFrom<NoiseDoc> for NoiseModel {
    type Error = Error;

    fn try_from(doc: NoiseDoc) -> Result<Self> {
        let model = match doc.kind {
            KindDoc::Dense { matrix } => NoiseModel::dense(matrix)?,
            KindDoc::ProductBitFlip { flips } => NoiseModel::product(flips)?,
            KindDoc::PairCorrelated { base, pairs } => NoiseModel::pair_correlated((*base).try_into()?, pairs)?,
            KindDoc::Convex { components } => NoiseModel::convex(
                components
                    .into_iter()
                    .map(|t| Ok((t.weight, t.model.try_into()?)))
                    .collect::<Result<Vec<_>>>()?,
            )?,
            KindDoc::Permutation { map } => NoiseModel::permutation(map)?,
        };
        if model.n != doc.n {
            return Err(Error::InvalidModel(format!(
                "declared n = {} but parameters describe n = {}",
                doc.n, model.n
            )));
        }
        Ok(model)
    }
}

impl NoiseModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::sign;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn dense_conjugate(a: &Matrix) -> Matrix {
        // oracle: explicit H * A * H / 2^n
        let d = a.dim();
        let h = Matrix::from_fn(d, |r, c| sign(r as u32, c as u32) as f64);
        let mut m = h.mul(a).unwrap().mul(&h).unwrap();
        m.scale(1.0 / d as f64);
        m
    }

    fn random_structured(n: usize, seed: u64) -> NoiseModel {
        let mut g = rng(seed);
        let rates: Vec<FlipRates> = (0..n)
            .map(|_| FlipRates { r: g.random_range(0.0..0.2), s: g.random_range(0.0..0.3) })
            .collect();
        let base = NoiseModel::product(rates).unwrap();
        let pairs = if n >= 2 { vec![PairFlip { i: 0, j: n - 1, c: 0.07 }] } else { vec![] };
        let corr = NoiseModel::pair_correlated(base, pairs).unwrap();
        let dense = NoiseModel::dense(random_stochastic_matrix(1 << n, &mut g)).unwrap();
        NoiseModel::convex(vec![(0.7, corr), (0.3, dense)]).unwrap()
    }

    #[test]
    fn to_dense_examples() {
        let id = NoiseModel::noiseless(3).unwrap().to_dense().unwrap();
        assert_eq!(id, Matrix::identity(8));

        let a = NoiseModel::product(vec![FlipRates { r: 0.1, s: 0.3 }]).unwrap().to_dense().unwrap();
        let expect = [[0.9, 0.3], [0.1, 0.7]];
        for x in 0..2 {
            for y in 0..2 {
                assert!((a.get(x, y) - expect[x][y]).abs() < 1e-15);
            }
        }

        let inner = NoiseModel::product(vec![FlipRates { r: 0.1, s: 0.3 }, FlipRates::symmetric(0.2)]).unwrap();
        let a = inner.to_dense().unwrap();
        let mix = NoiseModel::convex(vec![(0.5, NoiseModel::noiseless(2).unwrap()), (0.5, inner)]).unwrap();
        let mut expect = Matrix::identity(4);
        expect.add_scaled(1.0, &a).unwrap();
        expect.scale(0.5);
        assert!(mix.to_dense().unwrap().max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn product_dense_matches_kronecker_entries() {
        let rates = vec![FlipRates { r: 0.1, s: 0.3 }, FlipRates { r: 0.05, s: 0.2 }, FlipRates { r: 0.0, s: 0.4 }];
        let a = NoiseModel::product(rates.clone()).unwrap().to_dense().unwrap();
        for x in 0..8 {
            for y in 0..8 {
                let expect: f64 = (0..3).map(|l| rates[l].matrix()[(x >> l) & 1][(y >> l) & 1]).product();
                assert!((a.get(x, y) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn columns_sum_to_one_for_every_constructor() {
        let models = vec![
            NoiseModel::simulation_preset(5, 3).unwrap(),
            random_structured(4, 9),
            NoiseModel::permutation(vec![1, 3, 0, 2]).unwrap(),
            NoiseModel::always_zero(3).unwrap(),
            NoiseModel::fully_depolarizing(3).unwrap(),
        ];
        for m in models {
            assert!(m.to_dense().unwrap().is_left_stochastic(1e-12));
        }
    }

    #[test]
    fn m_matrix_examples() {
        let m = NoiseModel::uniform_bit_flip(1, 0.1).unwrap().m_matrix().unwrap();
        let expect = Matrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 0.8]]).unwrap();
        assert!(m.0.max_abs_diff(&expect) < 1e-15);

        let m = NoiseModel::product(vec![FlipRates { r: 0.1, s: 0.3 }]).unwrap().m_matrix().unwrap();
        let expect = dense_conjugate(&Matrix::from_rows(vec![vec![0.9, 0.3], vec![0.1, 0.7]]).unwrap());
        assert!(m.0.max_abs_diff(&expect) < 1e-15);
        assert!((m.0.get(1, 0) - 0.2).abs() < 1e-15 && (m.0.get(1, 1) - 0.6).abs() < 1e-15);

        // always reading zero: A = e_0 e^T  ->  M = e e_0^T
        let m = NoiseModel::always_zero(2).unwrap().m_matrix().unwrap();
        let expect = Matrix::from_fn(4, |_, c| if c == 0 { 1.0 } else { 0.0 });
        assert!(m.0.max_abs_diff(&expect) < 1e-15);

        // uniform readout: M = e_0 e_0^T
        let m = NoiseModel::fully_depolarizing(2).unwrap().m_matrix().unwrap();
        let expect = Matrix::from_fn(4, |r, c| if r == 0 && c == 0 { 1.0 } else { 0.0 });
        assert!(m.0.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn permutation_example_matrix() {
        // A[1][0] = A[3][1] = A[0][2] = A[2][3] = 1
        let perm = NoiseModel::permutation(vec![1, 3, 0, 2]).unwrap();
        let m = perm.m_matrix().unwrap();
        let expect = Matrix::from_rows(vec![
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, -1.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, -1.0],
        ])
        .unwrap();
        assert!(m.0.max_abs_diff(&expect) < 1e-15);
        let all: Vec<_> = PauliZIndex::all(2).unwrap().collect();
        assert_eq!(beta_offdiag(&m, &all).unwrap(), 1.0);
        for w in &all {
            assert_eq!(perm.lambda(*w).unwrap(), m.0.get(w.mask() as usize, w.mask() as usize));
        }
    }

    #[test]
    fn beta_examples() {
        let diag = MMatrix(Matrix::identity(4));
        assert_eq!(beta_offdiag(&diag, &[PauliZIndex::new(3, 2).unwrap()]).unwrap(), 0.0);
        let m = NoiseModel::product(vec![FlipRates { r: 0.1, s: 0.3 }]).unwrap().m_matrix().unwrap();
        assert!((beta_offdiag(&m, &[PauliZIndex::new(1, 1).unwrap()]).unwrap() - 0.2).abs() < 1e-15);
        assert!(matches!(beta_offdiag(&m, &[]), Err(Error::EmptyIndexSet)));
    }

    #[test]
    fn lambda_examples() {
        let m = random_structured(3, 4);
        assert!((m.lambda(PauliZIndex::identity(3).unwrap()).unwrap() - 1.0).abs() < 1e-12);

        let r: f64 = 0.07;
        let sym = NoiseModel::uniform_bit_flip(6, r).unwrap();
        for w in PauliZIndex::all(6).unwrap() {
            let expect = (1.0 - 2.0 * r).powi(w.weight() as i32);
            assert!((sym.lambda(w).unwrap() - expect).abs() < 1e-14);
        }

        let mut g = rng(11);
        let dense = NoiseModel::dense(random_stochastic_matrix(8, &mut g)).unwrap();
        let diag = dense_conjugate(&dense.to_dense().unwrap()).diagonal();
        for w in PauliZIndex::all(3).unwrap() {
            assert!((dense.lambda(w).unwrap() - diag[w.mask() as usize]).abs() < 1e-12);
        }
    }

    #[test]
    fn lambda_matches_m_diagonal_for_structured_models() {
        for n in 1..=6 {
            let model = random_structured(n, 100 + n as u64);
            let diag = model.m_matrix().unwrap().lambda();
            for w in PauliZIndex::all(n).unwrap() {
                assert!((model.lambda(w).unwrap() - diag[w.mask() as usize]).abs() < 1e-12, "n={n} w={w}");
            }
            // row 0 of M is e_0^T
            let m = model.m_matrix().unwrap();
            assert!((m.0.get(0, 0) - 1.0).abs() < 1e-12);
            assert!(m.0.row(0)[1..].iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn convex_linearity_in_walsh_domain() {
        let a = random_structured(3, 21);
        let b = NoiseModel::simulation_preset(3, 5).unwrap();
        let mix = NoiseModel::convex(vec![(0.25, a.clone()), (0.75, b.clone())]).unwrap();
        let mut expect = a.m_matrix().unwrap().0;
        expect.scale(0.25);
        expect.add_scaled(0.75, &b.m_matrix().unwrap().0).unwrap();
        assert!(mix.m_matrix().unwrap().0.max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn twirl_examples() {
        assert_eq!(twirl_exact(&Matrix::identity(8)).unwrap(), Matrix::identity(8));
        let mut g = rng(5);
        for n in 1..=4 {
            let a = random_stochastic_matrix(1 << n, &mut g);
            let model = NoiseModel::dense(a.clone()).unwrap();
            let m = twirl_exact(&a).unwrap().hadamard_conjugate().unwrap();
            assert!(m.max_abs_off_diagonal() < 1e-12);
            for w in PauliZIndex::all(n).unwrap() {
                let i = w.mask() as usize;
                assert!((m.get(i, i) - model.lambda(w).unwrap()).abs() < 1e-12);
            }
        }
        assert!(twirl_exact(&Matrix::identity(512)).is_err());
    }

    #[test]
    fn walsh_vectors_are_twirl_eigenvectors() {
        let mut g = rng(6);
        for n in 1..=6 {
            let d = 1usize << n;
            let a = random_stochastic_matrix(d, &mut g);
            let model = NoiseModel::dense(a.clone()).unwrap();
            let t = twirl_exact(&a).unwrap();
            for w in PauliZIndex::all(n).unwrap() {
                let v: Vec<f64> = (0..d).map(|x| sign(w.mask(), x as u32) as f64).collect();
                let tv = t.mul_vec(&v).unwrap();
                let lam = model.lambda(w).unwrap();
                for (a, b) in tv.iter().zip(&v) {
                    assert!((a - lam * b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn sampling_deterministic_cases() {
        let mut g = rng(1);
        let clean = NoiseModel::noiseless(4).unwrap();
        let flip = NoiseModel::uniform_bit_flip(4, 1.0).unwrap();
        for y in 0..16u32 {
            let b = BitString::new(y, 4).unwrap();
            assert_eq!(clean.sample_noisy(b, &mut g).unwrap(), b);
            assert_eq!(flip.sample_noisy(b, &mut g).unwrap().bits(), !y & 0xF);
        }
        let perm = NoiseModel::permutation(vec![1, 3, 0, 2]).unwrap();
        assert_eq!(perm.sample(1, &mut g), 3);
        assert!(clean.sample_noisy(BitString::new(0, 3).unwrap(), &mut g).is_err());
    }

    #[test]
    fn dense_sampling_matches_column() {
        let mut g = rng(2);
        let a = random_stochastic_matrix(4, &mut g);
        let model = NoiseModel::dense(a.clone()).unwrap();
        let draws = 1_000_000u32;
        let mut counts = [0u32; 4];
        for _ in 0..draws {
            counts[model.sample(0, &mut g) as usize] += 1;
        }
        for x in 0..4 {
            let p = a.get(x, 0);
            let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
            assert!((counts[x] as f64 - draws as f64 * p).abs() <= 4.0 * sigma, "x={x}");
        }
    }

    #[test]
    fn structured_sampling_matches_dense_columns() {
        let model = random_structured(3, 8);
        let a = model.to_dense().unwrap();
        let mut g = rng(3);
        let draws = 400_000u32;
        for y in [0u32, 5] {
            let mut counts = [0u32; 8];
            for _ in 0..draws {
                counts[model.sample(y, &mut g) as usize] += 1;
            }
            for x in 0..8 {
                let p = a.get(x, y as usize);
                let sigma = (draws as f64 * p * (1.0 - p)).sqrt().max(1.0);
                assert!((counts[x] as f64 - draws as f64 * p).abs() <= 5.0 * sigma, "y={y} x={x}");
            }
        }
    }

    #[test]
    fn marginal_rates_agree_with_dense_averaging() {
        let model = NoiseModel::simulation_preset(4, 12).unwrap();
        let structured = model.marginal_flip_rates().unwrap();
        let dense = NoiseModel::dense(model.to_dense().unwrap()).unwrap().marginal_flip_rates().unwrap();
        for (a, b) in structured.iter().zip(&dense) {
            assert!((a.r - b.r).abs() < 1e-12 && (a.s - b.s).abs() < 1e-12);
        }
        let perm = NoiseModel::permutation(vec![1, 3, 0, 2]).unwrap();
        let dense = NoiseModel::dense(perm.to_dense().unwrap()).unwrap();
        assert_eq!(perm.marginal_flip_rates().unwrap(), dense.marginal_flip_rates().unwrap());
    }

    #[test]
    fn preset_ranges() {
        let model = NoiseModel::simulation_preset(12, 99).unwrap();
        let Kind::PairCorrelated { base, pairs, .. } = &model.kind else { panic!() };
        assert_eq!(pairs.len(), 6);
        for f in base.marginal_flip_rates().unwrap() {
            assert!((0.01..=0.03).contains(&f.r) && (0.03..=0.08).contains(&f.s));
        }
    }

    #[test]
    fn constructor_validation() {
        assert!(NoiseModel::dense(Matrix::from_rows(vec![vec![0.5, 0.5], vec![0.4, 0.5]]).unwrap()).is_err());
        assert!(NoiseModel::product(vec![FlipRates { r: 1.2, s: 0.0 }]).is_err());
        assert!(NoiseModel::pair_correlated(NoiseModel::noiseless(2).unwrap(), vec![PairFlip { i: 1, j: 1, c: 0.1 }]).is_err());
        assert!(NoiseModel::pair_correlated(NoiseModel::noiseless(2).unwrap(), vec![PairFlip { i: 0, j: 1, c: 1.5 }]).is_err());
        assert!(NoiseModel::convex(vec![(0.6, NoiseModel::noiseless(2).unwrap())]).is_err());
        assert!(NoiseModel::convex(vec![(1.0, NoiseModel::noiseless(2).unwrap()), (0.0, NoiseModel::noiseless(3).unwrap())]).is_err());
        assert!(NoiseModel::permutation(vec![0, 0, 1, 2]).is_err());
        assert!(matches!(NoiseModel::noiseless(13).unwrap().to_dense(), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn json_roundtrip_preserves_channel() {
        let model = random_structured(3, 77);
        let json = model.to_json().unwrap();
        let back = NoiseModel::from_json(&json).unwrap();
        assert_eq!(model.to_dense().unwrap(), back.to_dense().unwrap());
        assert!(json.contains("\"kind\": \"convex\""));

        let bad = r#"{"n": 3, "kind": "product_bit_flip", "flips": [{"r": 0.1, "s": 0.1}]}"#;
        assert!(NoiseModel::from_json(bad).is_err());
    }
}
