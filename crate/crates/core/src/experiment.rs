//! Seeded simulation campaigns comparing the twirled estimator with the
//! baselines over a grid of rotation angles.
//!
//! Each seed gets one calibration data set `D0` (and, for full inversion, one
//! estimated transition matrix) that is reused across the whole angle grid.
//! Every angle then gets its own randomized data set `D1` and a raw,
//! unflipped histogram of the same size for the baselines. Random streams
//! are keyed by `(seed, purpose, angle index)`, so output does not depend on
//! the worker count.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    bitflip_product_baseline, estimate_flip_rates, estimate_full_a, unmitigated_estimate, InverseMitigator, RateSource,
};
use crate::error::{Error, Result};
use crate::mitigation::{
    acquire_instances, counter_clock, estimator_f, estimator_f_all, prep_correction, DataSet, EstimateOptions, Histogram,
    IndexSet, MitigationEstimate, ShotBudget, DEFAULT_GUARD,
};
use crate::noise::{NoiseModel, MAX_DENSE_QUBITS};
use crate::pauli::{check_qubits, PauliZIndex, MAX_DENSE_WHT_QUBITS};
use crate::state::{default_alphas, exact_weight, ideal_distribution, sample_shot_raw, theta_grid, CircuitSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Twirl,
    Unmitigated,
    FullInverse,
    BitflipInverse,
    Exact,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Twirl,
        Method::Unmitigated,
        Method::FullInverse,
        Method::BitflipInverse,
        Method::Exact,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Twirl => "twirl",
            Method::Unmitigated => "unmitigated",
            Method::FullInverse => "full-inverse",
            Method::BitflipInverse => "bitflip-inverse",
            Method::Exact => "exact",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

/// Which observables to report.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Observable {
    /// Every `Z^w`, including the identity.
    All,
    /// `Z` on qubit 0.
    SingleQubit1,
    /// `Z` on every qubit.
    FullWeight,
    /// An explicit mask, written in decimal or as `0b...`.
    Mask(u32),
}

impl Observable {
    fn expand(&self, n: usize) -> Result<Vec<PauliZIndex>> {
        Ok(match self {
            Observable::All => PauliZIndex::all(n)?.collect(),
            Observable::SingleQubit1 => vec![PauliZIndex::single(0, n)?],
            Observable::FullWeight => vec![PauliZIndex::full(n)?],
            Observable::Mask(m) => vec![PauliZIndex::new(*m, n)?],
        })
    }
}

impl TryFrom<String> for Observable {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t {
            "all" => return Ok(Observable::All),
            "single-qubit-1" => return Ok(Observable::SingleQubit1),
            "full-weight" => return Ok(Observable::FullWeight),
            _ => {}
        }
        let parsed = match t.strip_prefix("0b") {
            Some(bits) => u32::from_str_radix(bits, 2),
            None => t.parse(),
        };
        parsed
            .map(Observable::Mask)
            .map_err(|_| Error::Config(format!("unknown observable {s:?}")))
    }
}

impl From<Observable> for String {
    fn from(o: Observable) -> String {
        match o {
            Observable::All => "all".into(),
            Observable::SingleQubit1 => "single-qubit-1".into(),
            Observable::FullWeight => "full-weight".into(),
            Observable::Mask(m) => m.to_string(),
        }
    }
}

/// Where the simulated readout channel comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NoiseSpec {
    /// [`NoiseModel::simulation_preset`] with this seed.
    Preset { seed: u64 },
    /// Symmetric independent flips with rate `r` on every qubit.
    UniformBitFlip { r: f64 },
    Noiseless,
    /// A noise-model JSON document.
    File { path: PathBuf },
}

impl NoiseSpec {
    pub fn build(&self, n: usize) -> Result<NoiseModel> {
        match self {
            NoiseSpec::Preset { seed } => NoiseModel::simulation_preset(n, *seed),
            NoiseSpec::UniformBitFlip { r } => NoiseModel::uniform_bit_flip(n, *r),
            NoiseSpec::Noiseless => NoiseModel::noiseless(n),
            NoiseSpec::File { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let model = NoiseModel::from_json(&text)?;
                if model.n() != n {
                    return Err(Error::Config(format!("noise file describes {} qubits, config has n = {n}", model.n())));
                }
                Ok(model)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaSpec {
    Grid { start: f64, end: f64, points: usize },
    List(Vec<f64>),
}

impl Default for ThetaSpec {
    fn default() -> Self {
        ThetaSpec::Grid {
            start: 0.0,
            end: std::f64::consts::TAU,
            points: 41,
        }
    }
}

impl ThetaSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            ThetaSpec::Grid { start, end, points } => theta_grid(*start, *end, *points),
            ThetaSpec::List(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    /// Shots per prepared basis state for full inversion. Defaults to
    /// `max(1, circuits * shots_per_circuit / 2^n)`, matching the twirl
    /// method's total.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots_per_column: Option<usize>,
    #[serde(default)]
    pub rates: RateSource,
    /// Shots per all-zeros and per all-ones readout when rates are estimated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_shots: Option<usize>,
}

fn default_circuits() -> usize {
    256
}
fn default_shots_per_circuit() -> usize {
    512
}
fn default_observables() -> Vec<Observable> {
    vec![Observable::SingleQubit1, Observable::FullWeight]
}
fn default_seeds() -> Vec<u64> {
    vec![1]
}
fn default_guard() -> f64 {
    DEFAULT_GUARD
}
fn default_index_set() -> IndexSet {
    IndexSet::AllX
}
fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}
fn default_true() -> bool {
    true
}

/// A full campaign description. Parsed from TOML; every field but `n` has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    /// Per-qubit rotation scale; defaults to 3 on qubit 0 and 0.15 elsewhere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    #[serde(default)]
    pub theta: ThetaSpec,
    #[serde(default = "default_noise")]
    pub noise: NoiseSpec,
    #[serde(default = "default_circuits")]
    pub circuits: usize,
    #[serde(default = "default_shots_per_circuit")]
    pub shots_per_circuit: usize,
    /// Budget for `D0`; defaults to the same split as `D1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<ShotBudget>,
    #[serde(default)]
    pub baseline: BaselineConfig,
    #[serde(default = "default_observables")]
    pub observables: Vec<Observable>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_guard")]
    pub guard: f64,
    #[serde(default = "default_index_set")]
    pub index_set: IndexSet,
    /// Per-qubit probability of starting in `|1>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prep_error: Option<Vec<f64>>,
    /// Divide the calibration vector by the known preparation factors.
    #[serde(default = "default_true")]
    pub correct_prep: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

fn default_noise() -> NoiseSpec {
    NoiseSpec::Preset { seed: 0 }
}

impl ExperimentConfig {
    /// Defaults for `n` qubits.
    pub fn new(n: usize) -> Self {
        ExperimentConfig {
            n,
            alphas: None,
            theta: ThetaSpec::default(),
            noise: default_noise(),
            circuits: default_circuits(),
            shots_per_circuit: default_shots_per_circuit(),
            calibration: None,
            baseline: BaselineConfig::default(),
            observables: default_observables(),
            methods: default_methods(),
            seeds: default_seeds(),
            guard: DEFAULT_GUARD,
            index_set: IndexSet::AllX,
            prep_error: None,
            correct_prep: true,
            output: None,
            threads: None,
        }
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.alphas.clone().unwrap_or_else(|| default_alphas(self.n))
    }

    pub fn prep(&self) -> Vec<f64> {
        self.prep_error.clone().unwrap_or_else(|| vec![0.0; self.n])
    }

    pub fn d1_budget(&self) -> ShotBudget {
        ShotBudget {
            circuits: self.circuits,
            shots_per_circuit: self.shots_per_circuit,
        }
    }

    pub fn d0_budget(&self) -> ShotBudget {
        self.calibration.unwrap_or_else(|| self.d1_budget())
    }

    pub fn shots_per_column(&self) -> usize {
        self.baseline
            .shots_per_column
            .unwrap_or_else(|| (self.d1_budget().total() >> self.n.min(63)).max(1))
    }

    fn rate_shots(&self) -> usize {
        self.baseline.rate_shots.unwrap_or_else(|| (self.d1_budget().total() / 2).max(1))
    }

    pub fn observable_indices(&self) -> Result<Vec<PauliZIndex>> {
        let mut out = Vec::new();
        for o in &self.observables {
            for w in o.expand(self.n)? {
                if !out.contains(&w) {
                    out.push(w);
                }
            }
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        check_qubits(self.n).map_err(|e| Error::Config(e.to_string()))?;
        if self.n > MAX_DENSE_WHT_QUBITS {
            return bad(format!("experiments support n <= {MAX_DENSE_WHT_QUBITS}"));
        }
        if let Some(a) = &self.alphas {
            if a.len() != self.n {
                return bad(format!("{} alphas given for n = {}", a.len(), self.n));
            }
        }
        if let Some(p) = &self.prep_error {
            if p.len() != self.n || p.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return bad("prep_error needs n entries in [0, 1]".into());
            }
        }
        if self.d1_budget().total() == 0 || self.d0_budget().total() == 0 {
            return bad("circuits and shots_per_circuit must be positive".into());
        }
        if self.theta.values().is_empty() {
            return bad("theta grid is empty".into());
        }
        if self.seeds.is_empty() {
            return bad("no seeds given".into());
        }
        if self.methods.is_empty() {
            return bad("no methods selected".into());
        }
        if self.observables.is_empty() {
            return bad("no observables selected".into());
        }
        if !(self.guard >= 0.0) {
            return bad(format!("guard {} must be non-negative", self.guard));
        }
        if self.methods.contains(&Method::FullInverse) && self.n > MAX_DENSE_QUBITS {
            return bad(format!("full-inverse needs n <= {MAX_DENSE_QUBITS}"));
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        self.observable_indices().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}

/// One line of the results CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: Method,
    pub theta: f64,
    /// Observable mask in decimal.
    pub w: u32,
    /// `NaN` when the method refused to produce a value.
    pub estimate: f64,
    pub exact: f64,
    pub abs_error: f64,
    pub shots: u64,
    pub seed: u64,
}

impl ResultRow {
    pub fn failed(&self) -> bool {
        self.estimate.is_nan()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Rows written as `NaN` because a guard or solve refused, per method.
    pub guard_trips: BTreeMap<Method, u64>,
    /// Pivot-ratio condition estimate of each seed's calibrated matrix.
    pub full_inverse_condition: BTreeMap<u64, f64>,
    /// Corrected probabilities outside `[0, 1]`, summed over angles and seeds.
    pub p_hat_out_of_range: u64,
    /// Shots charged per row, per method.
    pub shots_per_estimate: BTreeMap<Method, u64>,
    /// True when `D0`/`D1` used a fixed mask, which is only unbiased for product noise.
    pub fixed_index_set: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub diagnostics: Diagnostics,
    pub wall_time_s: f64,
}

impl ExperimentOutput {
    /// Largest absolute error over the rows matching `method` and `w`
    /// (or all observables when `w` is `None`) for one seed. `NaN` rows count as infinite.
    pub fn max_error(&self, method: Method, seed: u64, w: Option<u32>) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.method == method && r.seed == seed && w.is_none_or(|w| r.w == w))
            .map(|r| if r.failed() { f64::INFINITY } else { r.abs_error })
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy)]
#[repr(u64)]
enum Stream {
    Calibration = 1,
    FullMatrix = 2,
    Rates = 3,
    Circuit = 4,
    Raw = 5,
}

fn stream_rng(seed: u64, purpose: Stream, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 32) | index);
    rng
}

/// Runs the campaign, on a dedicated pool when `config.threads` is set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    match config.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(|| run_inner(config)),
        None => run_inner(config),
    }
}

struct SeedContext {
    lambda: Vec<f64>,
    n0: usize,
    inverse: Option<std::result::Result<InverseMitigator, Error>>,
    rates: Option<Vec<crate::noise::FlipRates>>,
}

fn run_inner(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let started = Instant::now();
    let n = config.n;
    let noise = config.noise.build(n)?;
    let thetas = config.theta.values();
    let observables = config.observable_indices()?;
    let alphas = config.alphas();
    let prep = config.prep();
    let d1_budget = config.d1_budget();
    let d0_budget = config.d0_budget();
    let raw_shots = d1_budget.total();
    let spc = config.shots_per_column();
    let wants = |m: Method| config.methods.contains(&m);
    let opts = EstimateOptions {
        guard: config.guard,
        ..EstimateOptions::default()
    };

    let mut diag = Diagnostics {
        fixed_index_set: config.index_set.is_fixed(),
        ..Diagnostics::default()
    };
    let mut charge = BTreeMap::new();
    charge.insert(Method::Twirl, (d0_budget.total() + d1_budget.total()) as u64);
    charge.insert(Method::Unmitigated, raw_shots as u64);
    charge.insert(Method::FullInverse, ((spc as u64) << n) + raw_shots as u64);
    let rate_cost = match config.baseline.rates {
        RateSource::Exact => 0,
        RateSource::Estimated => 2 * config.rate_shots() as u64,
    };
    charge.insert(Method::BitflipInverse, raw_shots as u64 + rate_cost);
    charge.insert(Method::Exact, 0);
    charge.retain(|m, _| wants(*m));
    diag.shots_per_estimate = charge.clone();

    let mut rows = Vec::new();
    for &seed in &config.seeds {
        let calib = CircuitSpec {
            n,
            alphas: alphas.clone(),
            theta: 0.0,
            prep_error: prep.clone(),
        };
        let ctx = {
            let lambda = if wants(Method::Twirl) {
                let ground = ideal_distribution(&calib)?;
                let mut rng = stream_rng(seed, Stream::Calibration, 0);
                let d0 = acquire_instances(
                    n,
                    |q, r| sample_shot_raw(&ground, q, &noise, r),
                    &config.index_set,
                    d0_budget,
                    &mut rng,
                    counter_clock(0),
                )?;
                let mut lam = walsh_values(&d0, &observables)?;
                if config.correct_prep && prep.iter().any(|&a| a != 0.0) {
                    lam = prep_correction(&lam, &prep)?;
                }
                lam
            } else {
                Vec::new()
            };
            let inverse = if wants(Method::FullInverse) {
                let mut rng = stream_rng(seed, Stream::FullMatrix, 0);
                let cal = estimate_full_a(&noise, spc, &mut rng)?;
                let inv = InverseMitigator::new(&cal);
                if let Ok(inv) = &inv {
                    diag.full_inverse_condition.insert(seed, inv.condition_estimate());
                }
                Some(inv)
            } else {
                None
            };
            let rates = if wants(Method::BitflipInverse) {
                Some(match config.baseline.rates {
                    RateSource::Exact => noise.marginal_flip_rates()?,
                    RateSource::Estimated => {
                        let mut rng = stream_rng(seed, Stream::Rates, 0);
                        estimate_flip_rates(&noise, config.rate_shots(), &mut rng)?
                    }
                })
            } else {
                None
            };
            SeedContext {
                lambda,
                n0: d0_budget.total(),
                inverse,
                rates,
            }
        };

        let per_theta: Vec<Result<(Vec<ResultRow>, u64)>> = thetas
            .par_iter()
            .enumerate()
            .map(|(ti, &theta)| {
                let circ = CircuitSpec {
                    n,
                    alphas: alphas.clone(),
                    theta,
                    prep_error: prep.clone(),
                };
                run_theta(config, &noise, &ctx, &circ, ti as u64, seed, &observables, &charge, &opts)
            })
            .collect();
        for r in per_theta {
            let (theta_rows, oor) = r?;
            diag.p_hat_out_of_range += oor;
            for row in &theta_rows {
                if row.failed() {
                    *diag.guard_trips.entry(row.method).or_insert(0) += 1;
                }
            }
            rows.extend(theta_rows);
        }
    }
    Ok(ExperimentOutput {
        rows,
        diagnostics: diag,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

/// `f(D, w)` for each requested `w`, through one transform when that is cheaper.
fn walsh_values(d: &DataSet, observables: &[PauliZIndex]) -> Result<Vec<f64>> {
    if observables.len() > d.n() {
        let all = estimator_f_all(d)?;
        Ok(observables.iter().map(|w| all[w.mask() as usize]).collect())
    } else {
        observables.iter().map(|&w| estimator_f(d, w)).collect()
    }
}

#[allow(clippy::too_many_arguments)]
fn run_theta(
    config: &ExperimentConfig,
    noise: &NoiseModel,
    ctx: &SeedContext,
    circ: &CircuitSpec,
    ti: u64,
    seed: u64,
    observables: &[PauliZIndex],
    charge: &BTreeMap<Method, u64>,
    opts: &EstimateOptions,
) -> Result<(Vec<ResultRow>, u64)> {
    let n = config.n;
    let dist = ideal_distribution(circ)?;
    let exact: Vec<f64> = observables.iter().map(|&w| exact_weight(circ, w)).collect();
    let mut estimates: BTreeMap<Method, Vec<f64>> = BTreeMap::new();
    let mut out_of_range = 0;

    if config.methods.contains(&Method::Twirl) {
        let mut rng = stream_rng(seed, Stream::Circuit, ti);
        let d1 = acquire_instances(
            n,
            |q, r| sample_shot_raw(&dist, q, noise, r),
            &config.index_set,
            config.d1_budget(),
            &mut rng,
            counter_clock(0),
        )?;
        let f1 = walsh_values(&d1, observables)?;
        let v = observables
            .iter()
            .zip(f1.iter().zip(&ctx.lambda))
            .map(|(&w, (&num, &lam))| {
                MitigationEstimate::from_parts(w, num, lam, ctx.n0, d1.len(), opts)
                    .map(|e| e.value)
                    .unwrap_or(f64::NAN)
            })
            .collect();
        estimates.insert(Method::Twirl, v);
    }

    let raw_needed = [Method::Unmitigated, Method::FullInverse, Method::BitflipInverse]
        .iter()
        .any(|m| config.methods.contains(m));
    if raw_needed {
        let mut rng = stream_rng(seed, Stream::Raw, ti);
        let mut raw = Histogram::new(n)?;
        for _ in 0..config.d1_budget().total() {
            raw.add(sample_shot_raw(&dist, 0, noise, &mut rng), 1)?;
        }
        if config.methods.contains(&Method::Unmitigated) {
            let v = observables.iter().map(|&w| unmitigated_estimate(&raw, w)).collect::<Result<Vec<_>>>()?;
            estimates.insert(Method::Unmitigated, v);
        }
        if let Some(inv) = &ctx.inverse {
            let v = match inv {
                Ok(inv) => {
                    let corrected = inv.correct(&raw)?;
                    out_of_range += corrected.out_of_range as u64;
                    let weights = corrected.weights();
                    observables.iter().map(|w| weights[w.mask() as usize]).collect()
                }
                Err(_) => vec![f64::NAN; observables.len()],
            };
            estimates.insert(Method::FullInverse, v);
        }
        if let Some(rates) = &ctx.rates {
            let v = observables
                .iter()
                .map(|&w| bitflip_product_baseline(rates, w, &raw, opts.guard).unwrap_or(f64::NAN))
                .collect();
            estimates.insert(Method::BitflipInverse, v);
        }
    }
    if config.methods.contains(&Method::Exact) {
        estimates.insert(Method::Exact, exact.clone());
    }

    let mut rows = Vec::with_capacity(estimates.len() * observables.len());
    for &method in Method::ALL.iter().filter(|m| config.methods.contains(m)) {
        let values = &estimates[&method];
        for (i, w) in observables.iter().enumerate() {
            let est = values[i];
            rows.push(ResultRow {
                method,
                theta: circ.theta,
                w: w.mask(),
                estimate: est,
                exact: exact[i],
                abs_error: (est - exact[i]).abs(),
                shots: charge[&method],
                seed,
            });
        }
    }
    Ok((rows, out_of_range))
}

pub const CSV_HEADER: &str = "method,theta,w,estimate,exact,abs_error,shots,seed";

/// Writes rows as CSV with the fixed header.
pub fn write_csv<W: std::io::Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for r in rows {
        w.write_record([
            r.method.as_str().to_string(),
            r.theta.to_string(),
            r.w.to_string(),
            r.estimate.to_string(),
            r.exact.to_string(),
            r.abs_error.to_string(),
            r.shots.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).ok_or_else(|| Error::Format(format!("row has {} fields", rec.len())));
        let num = |i: usize| -> Result<f64> { field(i)?.parse().map_err(|_| Error::Format(format!("bad number {:?}", rec.get(i)))) };
        let int = |i: usize| -> Result<u64> { field(i)?.parse().map_err(|_| Error::Format(format!("bad integer {:?}", rec.get(i)))) };
        rows.push(ResultRow {
            method: field(0)?.parse()?,
            theta: num(1)?,
            w: int(2)? as u32,
            estimate: num(3)?,
            exact: num(4)?,
            abs_error: num(5)?,
            shots: int(6)?,
            seed: int(7)?,
        });
    }
    Ok(rows)
}

/// Run metadata written next to the CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub version: String,
    pub seeds: Vec<u64>,
    pub wall_time_s: f64,
    pub rows: usize,
    pub diagnostics: Diagnostics,
    pub noise: serde_json::Value,
}

/// `results.csv` gets `results.manifest.json`.
pub fn manifest_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("manifest.json")
}

/// Writes the CSV and its manifest; returns the manifest path.
pub fn emit_results(config: &ExperimentConfig, output: &ExperimentOutput, path: &Path) -> Result<PathBuf> {
    if output.rows.is_empty() {
        return Err(Error::InvalidParameter("no result rows to write".into()));
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(&output.rows, std::io::BufWriter::new(file))?;

    let noise = config.noise.build(config.n)?;
    let manifest = Manifest {
        config: config.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seeds: config.seeds.clone(),
        wall_time_s: output.wall_time_s,
        rows: output.rows.len(),
        diagnostics: output.diagnostics.clone(),
        noise: serde_json::to_value(&noise)?,
    };
    let mpath = manifest_path(path);
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&mpath, text).map_err(|e| Error::io(&mpath, e))?;
    Ok(mpath)
}

/// Which budget axis a sweep varies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fix", rename_all = "snake_case")]
pub enum SweepAxis {
    /// Hold the circuit count and vary shots per circuit.
    Circuits { circuits: usize, shots_per_circuit: Vec<usize> },
    /// Hold shots per circuit and vary the circuit count.
    Shots { shots_per_circuit: usize, circuits: Vec<usize> },
}

impl SweepAxis {
    fn budgets(&self) -> Vec<ShotBudget> {
        match self {
            SweepAxis::Circuits { circuits, shots_per_circuit } => shots_per_circuit
                .iter()
                .map(|&m| ShotBudget {
                    circuits: *circuits,
                    shots_per_circuit: m,
                })
                .collect(),
            SweepAxis::Shots { shots_per_circuit, circuits } => circuits
                .iter()
                .map(|&k| ShotBudget {
                    circuits: k,
                    shots_per_circuit: *shots_per_circuit,
                })
                .collect(),
        }
    }
}

/// Errors of one (method, budget, seed) cell, sorted by magnitude.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: Method,
    pub circuits: usize,
    pub shots_per_circuit: usize,
    pub seed: u64,
    pub rank: usize,
    pub abs_error: f64,
    pub theta: f64,
    pub w: u32,
}

pub const SWEEP_CSV_HEADER: &str = "method,circuits,shots_per_circuit,seed,rank,abs_error,theta,w";

/// Runs the campaign once per budget on the varied axis. `D0` uses the same
/// budget as `D1` unless the config fixes a calibration budget.
pub fn run_sweep(config: &ExperimentConfig, axis: &SweepAxis) -> Result<Vec<SweepRow>> {
    let mut out = Vec::new();
    for budget in axis.budgets() {
        let mut cfg = config.clone();
        cfg.circuits = budget.circuits;
        cfg.shots_per_circuit = budget.shots_per_circuit;
        cfg.methods.retain(|m| *m != Method::Exact);
        if cfg.methods.is_empty() {
            return Err(Error::Config("sweep needs at least one estimating method".into()));
        }
        let result = run_experiment(&cfg)?;
        let mut cells: BTreeMap<(Method, u64), Vec<&ResultRow>> = BTreeMap::new();
        for r in &result.rows {
            cells.entry((r.method, r.seed)).or_default().push(r);
        }
        for ((method, seed), mut rs) in cells {
            rs.sort_by(|a, b| a.abs_error.total_cmp(&b.abs_error));
            for (rank, r) in rs.into_iter().enumerate() {
                out.push(SweepRow {
                    method,
                    circuits: budget.circuits,
                    shots_per_circuit: budget.shots_per_circuit,
                    seed,
                    rank,
                    abs_error: r.abs_error,
                    theta: r.theta,
                    w: r.w,
                });
            }
        }
    }
    Ok(out)
}

pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(SWEEP_CSV_HEADER.split(','))?;
    for r in rows {
        w.write_record([
            r.method.as_str().to_string(),
            r.circuits.to_string(),
            r.shots_per_circuit.to_string(),
            r.seed.to_string(),
            r.rank.to_string(),
            r.abs_error.to_string(),
            r.theta.to_string(),
            r.w.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))?;
    Ok(())
}

/// Matrices are dumped only up to this size (a `2^10` square CSV is ~20 MB).
pub const MAX_DUMP_QUBITS: usize = 10;

/// Spectral view of a channel: `A`, `M`, the residual `A_s^{-1} A` left after
/// correcting with the product approximation, and per-row summaries.
pub struct NoiseReport {
    pub a: crate::linalg::Matrix,
    pub m: crate::linalg::Matrix,
    pub residual: crate::linalg::Matrix,
    pub lambda: Vec<f64>,
    pub lambda_product: Vec<f64>,
    /// `sum_{j != i} |M[i][j]|` per row.
    pub offdiag_row_sums: Vec<f64>,
}

pub fn noise_report(noise: &NoiseModel) -> Result<NoiseReport> {
    let n = noise.n();
    if n > MAX_DUMP_QUBITS {
        return Err(Error::TooLarge {
            what: "noise matrix dump",
            n,
            max: MAX_DUMP_QUBITS,
        });
    }
    let a = noise.to_dense()?;
    let m = a.hadamard_conjugate()?;
    let a_s = noise.product_approximation()?.to_dense()?;
    let lu = a_s.lu()?;
    let d = a.dim();
    let mut residual = crate::linalg::Matrix::zeros(d);
    for c in 0..d {
        let col = lu.solve(&a.column(c))?;
        for (r, v) in col.into_iter().enumerate() {
            residual.set(r, c, v);
        }
    }
    let lambda = m.diagonal();
    let lambda_product = a_s.hadamard_conjugate()?.diagonal();
    let offdiag_row_sums = (0..d)
        .map(|i| m.row(i).iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| v.abs()).sum())
        .collect();
    Ok(NoiseReport {
        a,
        m,
        residual,
        lambda,
        lambda_product,
        offdiag_row_sums,
    })
}

pub fn write_matrix_csv<W: std::io::Write>(m: &crate::linalg::Matrix, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for r in 0..m.dim() {
        w.write_record(m.row(r).iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))?;
    Ok(())
}

/// Writes `A.csv`, `M.csv`, `residual.csv` and `spectrum.csv` into `dir`.
pub fn write_noise_report(report: &NoiseReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for (name, m) in [("A.csv", &report.a), ("M.csv", &report.m), ("residual.csv", &report.residual)] {
        let p = dir.join(name);
        let f = std::fs::File::create(&p).map_err(|e| Error::io(&p, e))?;
        write_matrix_csv(m, std::io::BufWriter::new(f))?;
        written.push(p);
    }
    let p = dir.join("spectrum.csv");
    let f = std::fs::File::create(&p).map_err(|e| Error::io(&p, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(f));
    w.write_record(["w", "lambda", "lambda_product", "offdiag_row_sum"])?;
    for i in 0..report.lambda.len() {
        w.write_record([
            i.to_string(),
            report.lambda[i].to_string(),
            report.lambda_product[i].to_string(),
            report.offdiag_row_sums[i].to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&p, e))?;
    written.push(p);
    Ok(written)
}
