//! `pbca`: command-line workbench for the probabilistic Burgers CA engines.
//!
//! Subcommands: `simulate` (seeded Monte Carlo), `exact` (transition matrix
//! and stationary distribution), `verify` (conjecture vs exact sweep),
//! `fd` (fundamental diagrams, optionally with a Monte Carlo overlay) and
//! `gkz` (hypergeometric identity audit and the two-route limit).
//!
//! Exit codes: 0 success, 2 parameter error, 3 tolerance or verification
//! failure, 4 ergodicity error. `PCA_THREADS` caps the worker pool.
//!
//! Sweep definitions can live in a run file: `pbca fd @sweep.run` expands
//! each `key = value` line of the file to `--key value` in place.

use std::fmt::Write as _;
use std::process::ExitCode;
use std::str::FromStr;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use num_rational::BigRational;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use pbca_core::conjecture::{verify_conjecture, DeviationReport};
use pbca_core::error::Error as CoreError;
use pbca_core::flux::gkz::{flux_via_gkz, gkz_check_identities, gkz_limit};
use pbca_core::flux::{
    fd_limit_curve, fd_surface_epbca2, fd_sweep, fd_sweep_epbca2, flux_limit_pbca,
    flux_monte_carlo, flux_pbca, FluxPoint,
};
use pbca_core::markov::{
    build_matrix, lump_by_rotation, stationary, stationary_class_vector, TransitionMatrix,
};
use pbca_core::model::{Model, ModelParams};
use pbca_core::numeric::parse_big_rational;
use pbca_core::ring::{
    enumerate_binary, enumerate_species_reachable, Alphabet, ConfigSpace, Counts, RingConfig,
};
use pbca_core::scalar::{HopProbs, Scalar};
use pbca_core::sim::{random_binary_ring, random_species_ring, run_on_stream};

#[derive(Parser)]
#[command(name = "pbca", version, about = "Probabilistic Burgers CA workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the seeded Monte Carlo simulator; emits JSON stats and an
    /// optional histogram CSV.
    Simulate(SimulateArgs),
    /// Build the exact chain: transition matrix, stationary distribution
    /// and (optionally) the rotation-class vector, as CSV.
    Exact(ExactArgs),
    /// Sweep conjecture-vs-exact verification over sizes; nonzero exit on
    /// any deviation above tolerance.
    Verify(VerifyArgs),
    /// Fundamental-diagram sweeps as CSV, with optional Monte Carlo
    /// overlay and infinite-size limit samples.
    Fd(FdArgs),
    /// Hypergeometric identity audit and the two-route infinite-size limit.
    Gkz(GkzArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Args)]
struct ModelArgs {
    /// Model: pbca | epbca1 | epbca2.
    #[arg(long)]
    model: String,
    /// Hop probability alpha; accepts decimals or fractions like 4/5.
    #[arg(long)]
    alpha: String,
    /// Hop probability beta (EPBCA1/EPBCA2).
    #[arg(long)]
    beta: Option<String>,
}

impl ModelArgs {
    fn model(&self) -> Result<Model, CliError> {
        Ok(Model::from_str(&self.model)?)
    }

    fn params(&self) -> Result<ModelParams, CliError> {
        let model = self.model()?;
        let alpha = parse_probability(&self.alpha)?;
        let beta = match &self.beta {
            Some(s) => parse_probability(s)?,
            None if model.uses_beta() => {
                return Err(CliError::Usage(format!("model {model} requires --beta")))
            }
            None => 0.0,
        };
        Ok(ModelParams::new(model, alpha, beta)?)
    }

    fn rational_probs(&self) -> Result<HopProbs<BigRational>, CliError> {
        let alpha = parse_big_rational(&self.alpha)?;
        let beta = match &self.beta {
            Some(s) => parse_big_rational(s)?,
            None => BigRational::new(0.into(), 1.into()),
        };
        Ok(HopProbs::new(alpha, beta)?)
    }
}

#[derive(Args)]
struct SpaceArgs {
    /// Ring length.
    #[arg(short = 'L', long = "length")]
    length: Option<usize>,
    /// Particle count (binary models).
    #[arg(short = 'm')]
    m: Option<usize>,
    /// A-particle count (EPBCA2 random initial configuration).
    #[arg(long = "mA")]
    m_a: Option<usize>,
    /// B-particle count (EPBCA2 random initial configuration).
    #[arg(long = "mB")]
    m_b: Option<usize>,
    /// Explicit initial configuration, e.g. 00101101 or 00AABAAB.
    #[arg(long)]
    init: Option<String>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    space: SpaceArgs,
    /// Number of parallel-update steps.
    #[arg(long, default_value_t = 100_000)]
    steps: u64,
    /// Steps discarded before measuring; defaults to 10% of steps.
    /// Use 0 to average from the start.
    #[arg(long)]
    burn_in: Option<u64>,
    /// RNG seed (required: runs are reproducible by contract).
    #[arg(long)]
    seed: u64,
    /// Write the stats here instead of stdout.
    #[arg(long)]
    out: Option<String>,
    /// Stats format.
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
    /// Also write a state,count histogram CSV.
    #[arg(long)]
    histogram: Option<String>,
}

#[derive(Args)]
struct ExactArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    space: SpaceArgs,
    /// Exact big-rational arithmetic instead of f64.
    #[arg(long)]
    rational: bool,
    /// Also lump by rotation and emit the class vector.
    #[arg(long)]
    lump: bool,
    /// Output prefix: writes PREFIX_matrix.csv, PREFIX_stationary.csv and,
    /// with --lump, PREFIX_classes.csv. Without it the stationary
    /// distribution goes to stdout.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Model: pbca | epbca1 | epbca2.
    #[arg(long)]
    model: String,
    /// Largest ring length in the sweep.
    #[arg(long = "max-L", default_value_t = 10)]
    max_length: usize,
    /// Comma-separated alpha values.
    #[arg(long, default_value = "0.2,0.5,0.8")]
    alphas: String,
    /// Comma-separated beta values (models with beta).
    #[arg(long, default_value = "0.1,0.8")]
    betas: String,
    /// EPBCA2: verify this single initial configuration instead of
    /// sampling random ones.
    #[arg(long)]
    init: Option<String>,
    /// EPBCA2: number of random initial configurations per sweep.
    #[arg(long, default_value_t = 10)]
    samples: usize,
    /// Seed for the random EPBCA2 initial configurations.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Maximum allowed relative deviation.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Exact big-rational verification (demands exact equality).
    #[arg(long)]
    rational: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<String>,
    /// Report format.
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
}

#[derive(Args)]
struct FdArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Ring length.
    #[arg(short = 'L', long = "length")]
    length: usize,
    /// EPBCA2: fix the B density of the slice (m_b = round(rho_b * L)).
    #[arg(long = "rho-b")]
    rho_b: Option<f64>,
    /// EPBCA2: fix the B particle count of the slice.
    #[arg(long = "mB")]
    m_b: Option<usize>,
    /// EPBCA2: sweep the full (m_a, m_b) surface.
    #[arg(long)]
    surface: bool,
    /// Overlay a Monte Carlo estimate per density.
    #[arg(long)]
    mc_overlay: bool,
    /// Monte Carlo steps per density (averaged from step 0).
    #[arg(long, default_value_t = 50_000)]
    steps: u64,
    /// Seed for the Monte Carlo overlay.
    #[arg(long)]
    seed: Option<u64>,
    /// Also sample the infinite-size limit curve (PBCA).
    #[arg(long)]
    limit: bool,
    /// Grid points of the limit curve.
    #[arg(long, default_value_t = 99)]
    grid_points: usize,
    /// Write the sweep here instead of stdout.
    #[arg(long)]
    out: Option<String>,
    /// Sweep format.
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
}

#[derive(Args)]
struct GkzArgs {
    /// Largest ring length of the identity grid.
    #[arg(long = "max-L", default_value_t = 40)]
    max_length: usize,
    /// Comma-separated lambda values.
    #[arg(long, default_value = "1.5,5")]
    lambdas: String,
    /// Maximum allowed relative residual.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Also evaluate the infinite-size limit both ways at --rho/--alpha.
    #[arg(long)]
    limit: bool,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    rho: Option<f64>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<String>,
}

// ---------------------------------------------------------------------------

#[derive(Debug)]
enum CliError {
    Core(CoreError),
    Usage(String),
    Check(String),
    Io(std::io::Error),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Check(_) => 3,
            CliError::Io(_) => 1,
            CliError::Core(e) => match e {
                CoreError::Ergodicity { .. } => 4,
                _ => 2,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Core(e) => e.to_string(),
            CliError::Usage(m) | CliError::Check(m) => m.clone(),
            CliError::Io(e) => e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("PCA_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let args = match expand_run_files(std::env::args().collect()) {
        Ok(args) => args,
        Err(e) => {
            eprintln!("error: {}", e.message());
            return ExitCode::from(e.exit_code());
        }
    };
    let cli = Cli::parse_from(args);
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Exact(args) => cmd_exact(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Fd(args) => cmd_fd(args),
        Command::Gkz(args) => cmd_gkz(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

/// Replaces every `@path` argument by the flags spelled out in the run
/// file: one `key = value` pair or bare flag per line, `#` comments allowed.
fn expand_run_files(args: Vec<String>) -> Result<Vec<String>, CliError> {
    let mut out = Vec::with_capacity(args.len());
    for arg in args {
        let Some(path) = arg.strip_prefix('@') else {
            out.push(arg);
            continue;
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read run file {path}: {e}")))?;
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = match line.split_once('=') {
                Some((k, v)) => (k.trim(), Some(v.trim())),
                None => (line, None),
            };
            out.push(if key.len() == 1 {
                format!("-{key}")
            } else {
                format!("--{key}")
            });
            if let Some(value) = value {
                out.push(value.to_string());
            }
        }
    }
    Ok(out)
}

fn parse_probability(s: &str) -> Result<f64, CliError> {
    if let Some((num, den)) = s.split_once('/') {
        let n: f64 = num
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("cannot parse probability {s:?}")))?;
        let d: f64 = den
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("cannot parse probability {s:?}")))?;
        return Ok(n / d);
    }
    s.parse()
        .map_err(|_| CliError::Usage(format!("cannot parse probability {s:?}")))
}

fn emit(out: &Option<String>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

/// Initial configuration for a simulate run: explicit literal, or random
/// with the requested particle content on a dedicated RNG stream.
fn initial_config(
    model: Model,
    space: &SpaceArgs,
    seed: u64,
) -> Result<RingConfig, CliError> {
    if let Some(init) = &space.init {
        let x = RingConfig::parse(init)?;
        if x.alphabet() != model.alphabet() {
            return Err(CliError::Usage(format!(
                "--init {init:?} is not a {} configuration",
                model.alphabet().name()
            )));
        }
        return Ok(x);
    }
    let l = space
        .length
        .ok_or_else(|| CliError::Usage("need -L (or --init)".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    match model {
        Model::Epbca2 => {
            let m_a = space.m_a.unwrap_or(0);
            let m_b = space.m_b.unwrap_or(0);
            if m_a + m_b == 0 {
                return Err(CliError::Usage("need --mA/--mB (or --init)".into()));
            }
            Ok(random_species_ring(l, m_a, m_b, &mut rng)?)
        }
        _ => {
            let m = space
                .m
                .ok_or_else(|| CliError::Usage("need -m (or --init)".into()))?;
            Ok(random_binary_ring(l, m, &mut rng)?)
        }
    }
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct SimSummary {
    model: Model,
    #[serde(rename = "L")]
    length: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    #[serde(rename = "mA", skip_serializing_if = "Option::is_none")]
    m_a: Option<usize>,
    #[serde(rename = "mB", skip_serializing_if = "Option::is_none")]
    m_b: Option<usize>,
    alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    seed: u64,
    steps: u64,
    burn_in: u64,
    flux: f64,
    flux_std_error: f64,
    density: f64,
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let params = args.model.params()?;
    let x0 = initial_config(params.model, &args.space, args.seed)?;
    let burn_in = args.burn_in.unwrap_or(args.steps / 10);
    let stats = run_on_stream(&x0, &params, args.steps, burn_in, args.seed, 0)?;

    let (m, m_a, m_b) = match stats.counts {
        Counts::Binary { m } => (Some(m), None, None),
        Counts::Species { m_a, m_b } => (None, Some(m_a), Some(m_b)),
    };
    let summary = SimSummary {
        model: params.model,
        length: stats.ring_len,
        m,
        m_a,
        m_b,
        alpha: params.alpha,
        beta: params.model.uses_beta().then_some(params.beta),
        seed: args.seed,
        steps: args.steps,
        burn_in,
        flux: stats.empirical_flux,
        flux_std_error: stats.flux_std_error,
        density: stats.empirical_density,
    };
    let rendered = match args.format {
        OutputFormat::Json => serde_json::to_string_pretty(&summary).expect("serializable") + "\n",
        OutputFormat::Csv => {
            let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
            format!(
                "model,L,m,mA,mB,alpha,beta,seed,steps,burn_in,flux,flux_std_error,density\n\
                 {},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                summary.model,
                summary.length,
                opt(summary.m),
                opt(summary.m_a),
                opt(summary.m_b),
                summary.alpha,
                summary.beta.map(|b| b.to_string()).unwrap_or_default(),
                summary.seed,
                summary.steps,
                summary.burn_in,
                summary.flux,
                summary.flux_std_error,
                summary.density
            )
        }
    };
    emit(&args.out, &rendered)?;

    if let Some(path) = &args.histogram {
        let mut rows: Vec<(String, u64)> = stats
            .histogram
            .iter()
            .map(|(x, c)| (x.to_string(), *c))
            .collect();
        rows.sort();
        let mut csv = String::from("state,count\n");
        for (state, count) in rows {
            let _ = writeln!(csv, "{state},{count}");
        }
        std::fs::write(path, csv)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// exact
// ---------------------------------------------------------------------------

fn build_space(model: Model, space: &SpaceArgs) -> Result<Arc<ConfigSpace>, CliError> {
    match model {
        Model::Epbca2 => {
            let init = space.init.as_ref().ok_or_else(|| {
                CliError::Usage("epbca2 spaces are built from --init".into())
            })?;
            let x0 = RingConfig::parse(init)?;
            if x0.alphabet() != Alphabet::Species {
                return Err(CliError::Usage(format!(
                    "--init {init:?} is not a species configuration"
                )));
            }
            Ok(Arc::new(enumerate_species_reachable(&x0)?))
        }
        _ => {
            if let Some(init) = &space.init {
                let x0 = RingConfig::parse(init)?;
                let m = x0.particle_count();
                return Ok(Arc::new(enumerate_binary(x0.len(), m)?));
            }
            let l = space
                .length
                .ok_or_else(|| CliError::Usage("need -L and -m (or --init)".into()))?;
            let m = space
                .m
                .ok_or_else(|| CliError::Usage("need -m (or --init)".into()))?;
            Ok(Arc::new(enumerate_binary(l, m)?))
        }
    }
}

fn cmd_exact(args: ExactArgs) -> Result<(), CliError> {
    let model = args.model.model()?;
    let space = build_space(model, &args.space)?;
    if args.rational {
        let probs = args.model.rational_probs()?;
        run_exact(args, model, space, probs, |p| p.to_string())
    } else {
        let params = args.model.params()?;
        let probs = HopProbs::from_params(&params);
        run_exact(args, model, space, probs, |p| format!("{p}"))
    }
}

fn run_exact<S: Scalar>(
    args: ExactArgs,
    model: Model,
    space: Arc<ConfigSpace>,
    probs: HopProbs<S>,
    render: impl Fn(&S) -> String,
) -> Result<(), CliError> {
    let mat: TransitionMatrix<S> = build_matrix(Arc::clone(&space), model, probs)?;
    let pi = stationary(&mat)?;

    let mut stationary_csv = String::from("state,probability\n");
    for (id, p) in pi.probabilities.iter().enumerate() {
        let _ = writeln!(stationary_csv, "{},{}", space.config(id), render(p));
    }

    let classes_csv = if args.lump {
        let lumped = lump_by_rotation(&mat)?;
        let class_pi = stationary_class_vector(&lumped)?;
        let mut csv = String::from("representative,size,mass\n");
        for (k, class) in space.classes().iter().enumerate() {
            let _ = writeln!(
                csv,
                "{},{},{}",
                class.representative,
                class.members.len(),
                render(&class_pi.probabilities[k])
            );
        }
        Some(csv)
    } else {
        None
    };

    match &args.out {
        Some(prefix) => {
            let mut matrix_csv = String::from("row,col,prob\n");
            for (r, row) in mat.rows().iter().enumerate() {
                for (t, p) in row {
                    let _ = writeln!(matrix_csv, "{r},{t},{}", render(p));
                }
            }
            std::fs::write(format!("{prefix}_matrix.csv"), matrix_csv)?;
            std::fs::write(format!("{prefix}_stationary.csv"), stationary_csv)?;
            if let Some(csv) = classes_csv {
                std::fs::write(format!("{prefix}_classes.csv"), csv)?;
            }
            eprintln!(
                "{} states, {} classes, stationary residual {:e}",
                space.size(),
                space.classes().len(),
                pi.residual
            );
        }
        None => {
            print!("{stationary_csv}");
            if let Some(csv) = classes_csv {
                print!("{csv}");
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("cannot parse {what} list {s:?}")))
        })
        .collect()
}

fn cmd_verify(args: VerifyArgs) -> Result<(), CliError> {
    let model = Model::from_str(&args.model)?;
    let alphas = parse_list(&args.alphas, "alpha")?;
    let betas = if model.uses_beta() {
        parse_list(&args.betas, "beta")?
    } else {
        vec![0.0]
    };

    let mut spaces: Vec<Arc<ConfigSpace>> = Vec::new();
    match model {
        Model::Epbca2 => {
            if let Some(init) = &args.init {
                spaces.push(Arc::new(enumerate_species_reachable(&RingConfig::parse(
                    init,
                )?)?));
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
                for _ in 0..args.samples {
                    let span = args.max_length.saturating_sub(3).max(1);
                    let l = 4 + rand::Rng::random_range(&mut rng, 0..span);
                    let particles = 1 + rand::Rng::random_range(&mut rng, 0..l - 1);
                    let m_a = rand::Rng::random_range(&mut rng, 0..=particles);
                    let x0 = random_species_ring(l, m_a, particles - m_a, &mut rng)?;
                    spaces.push(Arc::new(enumerate_species_reachable(&x0)?));
                }
            }
        }
        _ => {
            let min_l = if model == Model::Epbca1 { 3 } else { 2 };
            eprintln!("note: degenerate m = 0 and m = L instances are skipped");
            for l in min_l..=args.max_length {
                for m in 1..l {
                    spaces.push(Arc::new(enumerate_binary(l, m)?));
                }
            }
        }
    }

    let mut jobs: Vec<(Arc<ConfigSpace>, f64, f64)> = Vec::new();
    for space in &spaces {
        for &alpha in &alphas {
            for &beta in &betas {
                jobs.push((Arc::clone(space), alpha, beta));
            }
        }
    }

    let reports: Vec<DeviationReport> = jobs
        .par_iter()
        .map(|(space, alpha, beta)| -> Result<DeviationReport, CoreError> {
            if args.rational {
                let probs = HopProbs::new(
                    float_to_rational(*alpha),
                    float_to_rational(*beta),
                )?;
                verify_conjecture(space, model, &probs)
            } else {
                let probs = HopProbs::new(*alpha, *beta)?;
                verify_conjecture(space, model, &probs)
            }
        })
        .collect::<Result<_, _>>()?;

    let rendered = match args.format {
        OutputFormat::Json => serde_json::to_string_pretty(&reports).expect("serializable") + "\n",
        OutputFormat::Csv => {
            let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
            let mut csv =
                String::from("model,L,m,mA,mB,alpha,beta,states,max_rel_dev,argmax_state,exact_mode\n");
            for r in &reports {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{},{:e},{},{}",
                    r.model,
                    r.ring_len,
                    opt(r.m),
                    opt(r.m_a),
                    opt(r.m_b),
                    r.alpha,
                    r.beta.map(|b| b.to_string()).unwrap_or_default(),
                    r.states,
                    r.max_rel_dev,
                    r.argmax_state,
                    r.exact_mode
                );
            }
            csv
        }
    };
    emit(&args.out, &rendered)?;

    let worst = reports
        .iter()
        .max_by(|a, b| a.max_rel_dev.total_cmp(&b.max_rel_dev))
        .expect("nonempty sweep");
    eprintln!(
        "{} instances, max relative deviation {:e} (tolerance {:e})",
        reports.len(),
        worst.max_rel_dev,
        args.tol
    );
    if worst.max_rel_dev > args.tol {
        return Err(CliError::Check(format!(
            "conjecture deviates by {:e} > {:e} on {} L={} (state {})",
            worst.max_rel_dev, args.tol, worst.model, worst.ring_len, worst.argmax_state
        )));
    }
    Ok(())
}

/// Exact rational from the short decimal the user typed.
fn float_to_rational(v: f64) -> BigRational {
    parse_big_rational(&format!("{v}")).expect("decimal form")
}

// ---------------------------------------------------------------------------
// fd
// ---------------------------------------------------------------------------

const FD_HEADER: &str = "model,L,alpha,beta,rho,rhoA,rhoB,flux,provenance";

fn fd_row(p: &FluxPoint) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    format!(
        "{},{},{},{},{},{},{},{},{}",
        p.model,
        p.ring_len.map(|l| l.to_string()).unwrap_or_else(|| "inf".into()),
        p.alpha,
        opt(p.beta),
        p.density,
        opt(p.density_a),
        opt(p.density_b),
        p.flux,
        p.provenance
    )
}

fn cmd_fd(args: FdArgs) -> Result<(), CliError> {
    let params = args.model.params()?;
    let model = params.model;
    let l = args.length;

    let closed: Vec<FluxPoint> = match model {
        Model::Epbca2 => {
            if args.surface {
                fd_surface_epbca2(l, params.alpha, params.beta)?
            } else {
                let m_b = match (args.m_b, args.rho_b) {
                    (Some(m_b), _) => m_b,
                    (None, Some(rho_b)) => (rho_b * l as f64).round() as usize,
                    (None, None) => {
                        return Err(CliError::Usage(
                            "epbca2 sweeps need --mB, --rho-b or --surface".into(),
                        ))
                    }
                };
                fd_sweep_epbca2(l, m_b, params.alpha, params.beta)?
            }
        }
        _ => fd_sweep(model, l, params.alpha, params.beta)?,
    };

    let mut points: Vec<FluxPoint> = closed.clone();
    let mut breach: Option<String> = None;

    if args.mc_overlay {
        let seed = args
            .seed
            .ok_or_else(|| CliError::Usage("--mc-overlay requires --seed".into()))?;
        let mc: Vec<(FluxPoint, f64)> = closed
            .par_iter()
            .enumerate()
            .map(|(i, point)| {
                let counts = match model {
                    Model::Epbca2 => Counts::Species {
                        m_a: (point.density_a.unwrap() * l as f64).round() as usize,
                        m_b: (point.density_b.unwrap() * l as f64).round() as usize,
                    },
                    _ => Counts::Binary {
                        m: (point.density * l as f64).round() as usize,
                    },
                };
                flux_monte_carlo(&params, l, counts, args.steps, seed, i as u64)
            })
            .collect::<Result<_, _>>()?;
        let mut worst = f64::NEG_INFINITY;
        let mut worst_rho = 0.0;
        for ((point, se), closed_point) in mc.iter().zip(&closed) {
            let gap = (point.flux - closed_point.flux).abs() - (3.0 * se).max(0.01);
            if gap > worst {
                worst = gap;
                worst_rho = point.density;
            }
            points.push(point.clone());
        }
        eprintln!(
            "monte carlo overlay: {} densities, worst margin {worst:+.2e} against max(3*SE, 0.01)",
            mc.len()
        );
        if worst > 0.0 {
            breach = Some(format!(
                "monte carlo flux misses the closed form by {worst:.2e} beyond tolerance at rho = {worst_rho}"
            ));
        }
    }

    if args.limit {
        if model != Model::Pbca {
            return Err(CliError::Usage(
                "--limit is defined for the pbca model".into(),
            ));
        }
        points.extend(fd_limit_curve(params.alpha, args.grid_points)?);
    }

    let rendered = match args.format {
        OutputFormat::Csv => {
            let mut csv = String::from(FD_HEADER);
            csv.push('\n');
            for point in &points {
                csv.push_str(&fd_row(point));
                csv.push('\n');
            }
            csv
        }
        OutputFormat::Json => {
            serde_json::to_string_pretty(&points).expect("serializable") + "\n"
        }
    };
    emit(&args.out, &rendered)?;
    match breach {
        Some(msg) => Err(CliError::Check(msg)),
        None => Ok(()),
    }
}

// ---------------------------------------------------------------------------
// gkz
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct GkzReport {
    max_length: usize,
    lambdas: Vec<f64>,
    grid_pairs: usize,
    max_ode_residual: f64,
    max_neighbor_residual: f64,
    max_neighbor_derivative_residual: f64,
    max_flux_identity_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    limit: Option<GkzLimitReport>,
}

#[derive(Serialize)]
struct GkzLimitReport {
    rho: f64,
    alpha: f64,
    via_roots: f64,
    closed_form: f64,
    difference: f64,
}

fn cmd_gkz(args: GkzArgs) -> Result<(), CliError> {
    let lambdas = parse_list(&args.lambdas, "lambda")?;
    let grid: Vec<(usize, usize)> = (3..=args.max_length)
        .flat_map(|l| (1..l).map(move |m| (l, m)))
        .collect();

    let mut max_ode = 0.0f64;
    let mut max_neighbor = 0.0f64;
    let mut max_neighbor_d = 0.0f64;
    let mut max_flux = 0.0f64;
    for &lambda in &lambdas {
        if lambda == 1.0 {
            eprintln!("note: lambda = 1 skips the derivative contiguous relation (pole)");
        }
        let residuals: Vec<_> = grid
            .par_iter()
            .map(|&(l, m)| -> Result<(f64, f64, f64, f64), CoreError> {
                let report = gkz_check_identities(l, m, lambda)?;
                let flux_residual = if lambda > 1.0 {
                    let alpha = 1.0 - 1.0 / lambda;
                    let series = flux_via_gkz(l, m, alpha)?;
                    let tally = flux_pbca(l, m, alpha)?.flux;
                    ((series - tally) / tally).abs()
                } else {
                    0.0
                };
                Ok((
                    report.ode_residual,
                    report.neighbor_residual,
                    report.neighbor_derivative_residual.unwrap_or(0.0),
                    flux_residual,
                ))
            })
            .collect::<Result<_, _>>()?;
        for (ode, neighbor, neighbor_d, flux) in residuals {
            max_ode = max_ode.max(ode);
            max_neighbor = max_neighbor.max(neighbor);
            max_neighbor_d = max_neighbor_d.max(neighbor_d);
            max_flux = max_flux.max(flux);
        }
    }

    let limit = if args.limit {
        let rho = args
            .rho
            .ok_or_else(|| CliError::Usage("--limit requires --rho".into()))?;
        let alpha = parse_probability(
            args.alpha
                .as_deref()
                .ok_or_else(|| CliError::Usage("--limit requires --alpha".into()))?,
        )?;
        let via_roots = gkz_limit(rho, alpha)?.flux;
        let closed_form = flux_limit_pbca(rho, alpha)?.flux;
        Some(GkzLimitReport {
            rho,
            alpha,
            via_roots,
            closed_form,
            difference: (via_roots - closed_form).abs(),
        })
    } else {
        None
    };

    let report = GkzReport {
        max_length: args.max_length,
        lambdas,
        grid_pairs: grid.len(),
        max_ode_residual: max_ode,
        max_neighbor_residual: max_neighbor,
        max_neighbor_derivative_residual: max_neighbor_d,
        max_flux_identity_residual: max_flux,
        limit,
    };
    let json = serde_json::to_string_pretty(&report).expect("serializable") + "\n";
    emit(&args.out, &json)?;

    let worst = max_ode.max(max_neighbor).max(max_neighbor_d).max(max_flux);
    eprintln!("max residual {worst:e} over {} pairs", grid.len());
    if worst > args.tol {
        return Err(CliError::Check(format!(
            "identity residual {worst:e} exceeds tolerance {:e}",
            args.tol
        )));
    }
    if let Some(limit) = &report.limit {
        if limit.difference > 1e-12 {
            return Err(CliError::Check(format!(
                "limit routes disagree by {:e}",
                limit.difference
            )));
        }
    }
    Ok(())
}
