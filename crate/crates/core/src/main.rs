use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use readout_twirl::bounds::{hoeffding_tail, theorem1_shots, theorem2_instances};
use readout_twirl::experiment::{
    emit_results, noise_report, run_experiment, run_sweep, write_noise_report, write_sweep_csv, ExperimentConfig,
    NoiseSpec, Observable, SweepAxis,
};
use readout_twirl::mitigation::{
    acquire_instances, estimator_f, persist, prep_factors, wall_clock, EstimateOptions, IndexSet,
    MitigationEstimate, ShotBudget,
};
use readout_twirl::pauli::PauliZIndex;
use readout_twirl::state::{ideal_distribution, sample_shot_raw, CircuitSpec};
use readout_twirl::{Error, Result};

#[derive(Parser)]
#[command(version, about = "Readout-error mitigation by randomized bit flips")]
struct Cli {
    /// Base RNG seed (replaces the config's seed list where one applies).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Acquire a randomized data set (the calibration circuit unless --theta is given) and save it.
    Calibrate(CalibrateArgs),
    /// Ratio estimates from two saved data sets.
    Estimate(EstimateArgs),
    /// Run a campaign over the angle grid and write CSV plus manifest.
    Experiment(ExperimentArgs),
    /// Repeat the campaign over a range of budgets; errors are sorted per cell.
    Sweep(SweepArgs),
    /// Print shot and circuit-count bounds.
    Bounds(BoundsArgs),
    /// Dump A, M and spectra of a noise model as CSV.
    Noise(NoiseArgs),
}

#[derive(Args)]
struct NoiseChoice {
    /// Seed of the default correlated noise preset.
    #[arg(long, default_value_t = 0)]
    noise_seed: u64,
    /// Symmetric independent flip rate instead of the preset.
    #[arg(long, conflicts_with = "noise_file")]
    uniform: Option<f64>,
    /// Noise-model JSON file instead of the preset.
    #[arg(long)]
    noise_file: Option<PathBuf>,
}

impl NoiseChoice {
    fn spec(&self) -> NoiseSpec {
        match (&self.noise_file, self.uniform) {
            (Some(path), _) => NoiseSpec::File { path: path.clone() },
            (None, Some(r)) => NoiseSpec::UniformBitFlip { r },
            (None, None) => NoiseSpec::Preset { seed: self.noise_seed },
        }
    }
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    noise: NoiseChoice,
    #[arg(long, default_value_t = 256)]
    circuits: usize,
    #[arg(long, default_value_t = 512)]
    shots_per_circuit: usize,
    /// Rotation angle of the measured circuit; omitted means the identity circuit.
    #[arg(long)]
    theta: Option<f64>,
    /// Per-qubit rotation scales (default 3, 0.15, 0.15, ...).
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    /// Per-qubit probability of preparing |1>.
    #[arg(long, value_delimiter = ',')]
    prep_error: Option<Vec<f64>>,
    /// Use this single flip mask instead of uniform random masks.
    #[arg(long)]
    fixed_mask: Option<u32>,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    d0: PathBuf,
    #[arg(long)]
    d1: PathBuf,
    /// Observables: all, single-qubit-1, full-weight, or masks.
    #[arg(long, value_delimiter = ',', default_value = "all")]
    observables: Vec<Observable>,
    #[arg(long, default_value_t = readout_twirl::mitigation::DEFAULT_GUARD)]
    guard: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Known preparation errors used to correct the calibration values.
    #[arg(long, value_delimiter = ',')]
    prep_error: Option<Vec<f64>>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    circuits: Option<usize>,
    #[arg(long)]
    shots_per_circuit: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fix {
    Circuits,
    Shots,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    base: ExperimentArgs,
    /// Which budget axis stays fixed.
    #[arg(long, value_enum)]
    fix: Fix,
    /// Values of the other axis.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<usize>,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.05")]
    epsilon: Vec<f64>,
    /// Eigenvalue magnitudes to plan for.
    #[arg(long, value_delimiter = ',', default_value = "1,0.8,0.5,0.4")]
    m_ii: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,1")]
    beta: Vec<f64>,
    #[arg(long, default_value_t = 12)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    i_size: usize,
}

#[derive(Args)]
struct NoiseArgs {
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    noise: NoiseChoice,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Calibrate(a) => calibrate(a, cli.seed.unwrap_or(0), cli.out),
        Command::Estimate(a) => estimate(a, cli.out),
        Command::Experiment(a) => {
            let cfg = experiment_config(&a, &cli.seed, &cli.out, cli.threads)?;
            let out = run_experiment(&cfg)?;
            let path = cfg.output.clone().unwrap_or_else(|| PathBuf::from("results.csv"));
            let manifest = emit_results(&cfg, &out, &path)?;
            let trips: u64 = out.diagnostics.guard_trips.values().sum();
            eprintln!(
                "wrote {} rows to {} ({}; {} guard trips, {:.1}s)",
                out.rows.len(),
                path.display(),
                manifest.display(),
                trips,
                out.wall_time_s
            );
            Ok(())
        }
        Command::Sweep(a) => {
            let cfg = experiment_config(&a.base, &cli.seed, &cli.out, cli.threads)?;
            let axis = match a.fix {
                Fix::Circuits => SweepAxis::Circuits {
                    circuits: cfg.circuits,
                    shots_per_circuit: a.values,
                },
                Fix::Shots => SweepAxis::Shots {
                    shots_per_circuit: cfg.shots_per_circuit,
                    circuits: a.values,
                },
            };
            let rows = run_sweep(&cfg, &axis)?;
            let path = cfg.output.clone().unwrap_or_else(|| PathBuf::from("sweep.csv"));
            let f = std::fs::File::create(&path).map_err(|e| io_err(&path, e))?;
            write_sweep_csv(&rows, std::io::BufWriter::new(f))?;
            eprintln!("wrote {} rows to {}", rows.len(), path.display());
            Ok(())
        }
        Command::Bounds(a) => bounds(a),
        Command::Noise(a) => {
            let model = a.noise.spec().build(a.n)?;
            let dir = cli.out.unwrap_or_else(|| PathBuf::from("noise"));
            for p in write_noise_report(&noise_report(&model)?, &dir)? {
                println!("{}", p.display());
            }
            Ok(())
        }
    }
}

fn io_err(path: &std::path::Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn experiment_config(a: &ExperimentArgs, seed: &Option<u64>, out: &Option<PathBuf>, threads: Option<usize>) -> Result<ExperimentConfig> {
    let mut cfg = match (&a.config, a.n) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(n)) => ExperimentConfig::new(n),
        (None, None) => return Err(Error::Config("give --config or --n".into())),
    };
    if let Some(n) = a.n {
        if a.config.is_some() && n != cfg.n {
            cfg.alphas = None;
            cfg.prep_error = None;
        }
        cfg.n = n;
    }
    if let Some(k) = a.circuits {
        cfg.circuits = k;
    }
    if let Some(m) = a.shots_per_circuit {
        cfg.shots_per_circuit = m;
    }
    if let Some(s) = &a.seeds {
        cfg.seeds = s.clone();
    }
    if let Some(s) = seed {
        cfg.seeds = vec![*s];
    }
    if let Some(o) = out {
        cfg.output = Some(o.clone());
    }
    if threads.is_some() {
        cfg.threads = threads;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn calibrate(a: CalibrateArgs, seed: u64, out: Option<PathBuf>) -> Result<()> {
    let noise = a.noise.spec().build(a.n)?;
    let mut circ = match a.alphas {
        Some(al) => CircuitSpec::new(al, a.theta.unwrap_or(0.0)),
        None => CircuitSpec::standard(a.n, a.theta.unwrap_or(0.0)),
    };
    if let Some(p) = a.prep_error {
        circ = circ.with_prep_error(p);
    }
    circ.validate()?;
    if circ.n != a.n {
        return Err(Error::Config(format!("{} alphas given for n = {}", circ.n, a.n)));
    }
    let dist = ideal_distribution(&circ)?;
    let index_set = a.fixed_mask.map_or(IndexSet::AllX, IndexSet::Fixed);
    let budget = ShotBudget {
        circuits: a.circuits,
        shots_per_circuit: a.shots_per_circuit,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = acquire_instances(a.n, |q, r| sample_shot_raw(&dist, q, &noise, r), &index_set, budget, &mut rng, wall_clock())?;
    let path = out.unwrap_or_else(|| PathBuf::from(if a.theta.is_some() { "d1.bin" } else { "d0.bin" }));
    persist::save(&data, &path)?;
    eprintln!("wrote {} records to {}", data.len(), path.display());
    Ok(())
}

fn estimate(a: EstimateArgs, out: Option<PathBuf>) -> Result<()> {
    let d0 = persist::load(&a.d0)?;
    let d1 = persist::load(&a.d1)?;
    let n = d0.n();
    let opts = EstimateOptions {
        guard: a.guard,
        delta: a.delta,
    };
    let mut ws: Vec<PauliZIndex> = Vec::new();
    for o in &a.observables {
        let mut cfg = ExperimentConfig::new(n);
        cfg.observables = vec![o.clone()];
        for w in cfg.observable_indices()? {
            if !ws.contains(&w) {
                ws.push(w);
            }
        }
    }
    let mut buf = Vec::new();
    writeln!(buf, "w,numerator,lambda_hat,value,hoeffding_alpha,error_bound,status").ok();
    let factors = a.prep_error.as_deref().map(prep_factors).transpose()?;
    if factors.as_ref().is_some_and(|f| f.len() != 1 << n) {
        return Err(Error::Config(format!("prep_error needs {n} entries")));
    }
    for w in ws {
        let lambda_hat = estimator_f(&d0, w)? / factors.as_ref().map_or(1.0, |f| f[w.mask() as usize]);
        let result = MitigationEstimate::from_parts(w, estimator_f(&d1, w)?, lambda_hat, d0.len(), d1.len(), &opts);
        match result {
            Ok(e) => writeln!(
                buf,
                "{},{},{},{},{},{},ok",
                w.mask(),
                e.numerator,
                e.lambda_hat,
                e.value,
                e.hoeffding_alpha,
                e.error_bound.map_or(String::new(), |b| b.to_string())
            ),
            Err(Error::CalibrationTooNoisy { lambda_hat, .. }) => writeln!(buf, "{},,{lambda_hat},NaN,,,guard", w.mask()),
            Err(e) => return Err(e),
        }
        .ok();
    }
    match out {
        Some(p) => std::fs::write(&p, buf).map_err(|e| io_err(&p, e)),
        None => std::io::stdout().write_all(&buf).map_err(|e| io_err(std::path::Path::new("<stdout>"), e)),
    }
}

fn bounds(a: BoundsArgs) -> Result<()> {
    println!("shots per data set (delta = {})", a.delta);
    println!("{:>8} {:>8} {:>12}", "epsilon", "M_ii", "N");
    for &e in &a.epsilon {
        for &m in &a.m_ii {
            println!("{e:>8} {m:>8} {:>12}", theorem1_shots(a.delta, e, m)?);
        }
    }
    println!();
    println!("circuit instances (delta = {}, n = {}, |I| = {})", a.delta, a.n, a.i_size);
    println!("{:>8} {:>8} {:>12}", "epsilon", "beta", "k");
    for &e in &a.epsilon {
        for &b in &a.beta {
            println!("{e:>8} {b:>8} {:>12}", theorem2_instances(a.delta, e, b, a.n, a.i_size)?);
        }
    }
    println!();
    println!("tail 2exp(-N a^2/2) at N = 1000: a = 0.05 -> {:.4}, a = 0.1 -> {:.4}", hoeffding_tail(1000, 0.05)?, hoeffding_tail(1000, 0.1)?);
    Ok(())
}
