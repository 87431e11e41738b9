//! `covshrink` command-line front end.
//!
//! Exit codes: 0 success, 2 invalid manifest, 3 numerical failure, 1 anything else.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use covshrink::bench::{self, BenchManifest, Experiment};
use covshrink::changepoint::{self, BlockLength, BootstrapConfig, WeightChoice};
use covshrink::estimators::{default_thresholds, EstimatorSet, TaperSpec, ThresholdMode, TimeSeriesSample};
use covshrink::io;
use covshrink::linalg::{simplex_grid, ProjectionVector, Simplex3Weight};
use covshrink::rng;
use covshrink::simulate::{self, InitMode, ModelAConfig, ModelBCConfig, Spacing};
use covshrink::weights::{self, BandwidthRule, LrvConfig};
use covshrink::{CovError, Result};

#[derive(Parser)]
#[command(name = "covshrink", version, about = "Shrinkage covariance estimation and covariance changepoint tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate Model A, B or C and write the sample as CSV.
    Simulate(SimulateArgs),
    /// Compute a covariance estimate from a CSV sample.
    Estimate(EstimateArgs),
    /// Print plug-in risk estimates and data-driven shrinkage weights.
    Weights(WeightsArgs),
    /// Run the bootstrap CUSUM test for a covariance break.
    CptTest(CptArgs),
    /// Run a Monte Carlo study from a JSON manifest.
    Bench {
        #[arg(value_enum)]
        table: Table,
        #[arg(long)]
        manifest: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Table {
    Table1,
    Table2,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    A,
    B,
    C,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    a: f64,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    b: f64,
    /// Post-change `b`; defaults to `--b` (no change).
    #[arg(long, allow_negative_numbers = true)]
    b_post: Option<f64>,
    #[arg(long)]
    change_at: Option<usize>,
    #[arg(long, default_value_t = 0.7)]
    hurst: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Draw X₀ with variance A(1+b²)/(1−a²), independent of ε₀ (models b, c).
    #[arg(long)]
    printed_init: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ThresholdArgs {
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    s: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Simulation)]
    mode: ModeArg,
    #[arg(long)]
    tau_dagger: Option<f64>,
    #[arg(long)]
    tau_diamond: Option<f64>,
    #[arg(long)]
    sigma_dagger: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Simulation,
    Theorem,
}

impl ThresholdArgs {
    fn spec(&self, n: usize, d: usize) -> Result<TaperSpec> {
        let mode = match self.mode {
            ModeArg::Simulation => ThresholdMode::Simulation,
            ModeArg::Theorem => ThresholdMode::Theorem,
        };
        let base = default_thresholds(n, d, self.alpha, mode, self.s)?;
        let tau_dagger = self.tau_dagger.unwrap_or(base.tau_dagger);
        TaperSpec::new(
            tau_dagger,
            self.tau_diamond.unwrap_or(base.tau_diamond),
            self.sigma_dagger.unwrap_or(base.sigma_dagger.max(tau_dagger)),
            base.alpha,
            base.c_exponent,
            base.s_exponent,
        )
    }
}

#[derive(Args)]
struct LrvArgs {
    /// Fixed Bartlett bandwidth for every entry; Newey–West selection when absent.
    #[arg(long)]
    bandwidth: Option<f64>,
}

impl LrvArgs {
    fn config(&self) -> Result<LrvConfig> {
        match self.bandwidth {
            Some(b) => LrvConfig::fixed(b),
            None => Ok(LrvConfig {
                bandwidth: BandwidthRule::NeweyWestAuto,
            }),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Sample,
    Taper,
    Toeplitz,
    Shrink,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    data: PathBuf,
    /// Subtract column means before estimating.
    #[arg(long)]
    center: bool,
    /// Output CSV, `-` for stdout.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    target: Target,
    /// Shrinkage weight `w1,w2,w3` or `auto`.
    #[arg(long, default_value = "auto")]
    w: String,
    #[command(flatten)]
    thresholds: ThresholdArgs,
    #[command(flatten)]
    lrv: LrvArgs,
}

#[derive(Args)]
struct WeightsArgs {
    #[arg(long)]
    data: PathBuf,
    /// Subtract column means before estimating.
    #[arg(long)]
    center: bool,
    #[command(flatten)]
    thresholds: ThresholdArgs,
    #[command(flatten)]
    lrv: LrvArgs,
}

#[derive(Args)]
struct CptArgs {
    #[arg(long)]
    data: PathBuf,
    /// Subtract column means before estimating.
    #[arg(long)]
    center: bool,
    /// Projection vector: a CSV file or `random:SEED`.
    #[arg(long)]
    v: String,
    /// Use `v` as given instead of scaling it to unit l1 norm.
    #[arg(long)]
    no_normalize_v: bool,
    /// `w1,w2,w3`, `grid` (step 0.1) or `auto`.
    #[arg(long, default_value = "1,0,0")]
    w: String,
    #[arg(long, visible_alias = "boot", default_value_t = 1000)]
    n_boot: usize,
    #[arg(long, default_value_t = 0.1)]
    level: f64,
    /// Block length, or `auto` for `⌈5n^0.2⌉`.
    #[arg(long, visible_alias = "block", default_value = "auto", value_parser = parse_block)]
    block_len: BlockLength,
    #[arg(long, default_value_t = 4.0)]
    delta_exponent: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the CUSUM path `k, bridged_value` to this CSV.
    #[arg(long)]
    path_out: Option<PathBuf>,
    #[command(flatten)]
    thresholds: ThresholdArgs,
    #[command(flatten)]
    lrv: LrvArgs,
}

fn parse_block(s: &str) -> std::result::Result<BlockLength, String> {
    if s == "auto" {
        return Ok(BlockLength::Auto);
    }
    match s.parse::<usize>() {
        Ok(b) if b > 0 => Ok(BlockLength::Fixed(b)),
        _ => Err(format!("expected `auto` or a positive integer, got `{s}`")),
    }
}

fn parse_weight(s: &str) -> Result<Simplex3Weight> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| CovError::InvalidArgument(format!("weight `{s}`: {e}")))?;
    match parts.as_slice() {
        [a, b, c] => Simplex3Weight::new(*a, *b, *c),
        _ => Err(CovError::InvalidArgument(format!("weight `{s}` needs three entries"))),
    }
}

fn load(path: &Path, center: bool) -> Result<TimeSeriesSample> {
    let x = io::read_sample(path)?;
    Ok(if center { x.demeaned() } else { x })
}

fn auto_weight(x: &TimeSeriesSample, spec: &TaperSpec, lrv: &LrvArgs) -> Result<Simplex3Weight> {
    weights::optimal_weights(&weights::risk_components(x, spec, &lrv.config()?)?)
}

fn warn_regime(x: &TimeSeriesSample, spec: &TaperSpec) {
    if let Some(msg) = weights::regime_warning(x.n(), x.d(), spec) {
        log::warn!("{msg}");
    }
}

fn simulate_cmd(a: &SimulateArgs) -> Result<()> {
    let b_post = a.b_post.unwrap_or(a.b);
    let (x, config) = match a.model {
        ModelArg::A => {
            let cfg = ModelAConfig {
                n: a.n,
                d: a.d,
                a_coef: a.a,
                b_pre: a.b,
                b_post,
                change_at: a.change_at,
                perm: None,
                seed: a.seed,
            };
            (simulate::gen_model_a(&cfg)?, json!({"model": "a", "config": cfg}))
        }
        ModelArg::B | ModelArg::C => {
            let spacing = match a.model {
                ModelArg::C => Spacing::Sqrt,
                _ => Spacing::Toeplitz,
            };
            let cfg = ModelBCConfig {
                n: a.n,
                d: a.d,
                a_coef: a.a,
                b_pre: a.b,
                b_post,
                change_at: a.change_at,
                hurst: a.hurst,
                spacing,
                init: if a.printed_init {
                    InitMode::Printed
                } else {
                    InitMode::Stationary
                },
                seed: a.seed,
            };
            let name = if spacing == Spacing::Sqrt { "c" } else { "b" };
            (simulate::gen_model_bc(&cfg)?, json!({"model": name, "config": cfg}))
        }
    };
    io::with_output(&a.out, |w| io::write_sample(w, &x))?;
    if a.out.as_os_str() != "-" {
        let file = std::fs::File::create(bench::sidecar_path(&a.out))?;
        serde_json::to_writer_pretty(file, &config)?;
    }
    Ok(())
}

fn estimate_cmd(a: &EstimateArgs) -> Result<()> {
    let x = load(&a.data, a.center)?;
    let spec = a.thresholds.spec(x.n(), x.d())?;
    let est = EstimatorSet::from_data(&x, &spec);
    let out = match a.target {
        Target::Sample => est.sample,
        Target::Taper => est.tapered,
        Target::Toeplitz => est.toeplitz,
        Target::Shrink => {
            let w = if a.w == "auto" {
                warn_regime(&x, &spec);
                auto_weight(&x, &spec, &a.lrv)?
            } else {
                parse_weight(&a.w)?
            };
            log::info!("shrinkage weight {:?}", w.as_array());
            est.combine(&w)
        }
    };
    if !out.is_finite() {
        return Err(CovError::NonFinite("estimate"));
    }
    io::with_output(&a.out, |w| io::write_matrix(w, &out))
}

fn weights_cmd(a: &WeightsArgs) -> Result<()> {
    let x = load(&a.data, a.center)?;
    let spec = a.thresholds.spec(x.n(), x.d())?;
    warn_regime(&x, &spec);
    let rc = weights::risk_components(&x, &spec, &a.lrv.config()?)?;
    let w = weights::optimal_weights(&rc)?;
    let out = json!({
        "mse": rc.mse,
        "e_dagger": rc.e_dagger,
        "e_diamond": rc.e_diamond,
        "d_cross": rc.d_cross,
        "w": w,
        "n": x.n(),
        "d": x.d(),
        "thresholds": spec,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn projection(arg: &str, d: usize, normalize: bool) -> Result<ProjectionVector> {
    let v = match arg.strip_prefix("random:") {
        Some(seed) => {
            let seed: u64 = seed
                .parse()
                .map_err(|_| CovError::InvalidArgument(format!("bad seed in `{arg}`")))?;
            simulate::random_projection(d, &mut rng::seeded(seed))?
        }
        None => io::read_vector(Path::new(arg))?,
    };
    if v.dim() != d {
        return Err(CovError::DimensionMismatch {
            expected: d,
            found: v.dim(),
        });
    }
    if normalize {
        if v.l1_norm() == 0.0 {
            return Err(CovError::InvalidArgument("projection vector is zero".into()));
        }
        Ok(v.normalized_l1())
    } else {
        Ok(v)
    }
}

fn cpt_cmd(a: &CptArgs) -> Result<()> {
    let x = load(&a.data, a.center)?;
    let spec = a.thresholds.spec(x.n(), x.d())?;
    let v = projection(&a.v, x.d(), !a.no_normalize_v)?;
    let choice = match a.w.as_str() {
        "grid" => WeightChoice::Grid(simplex_grid(0.1)?),
        "auto" => {
            warn_regime(&x, &spec);
            WeightChoice::Single(auto_weight(&x, &spec, &a.lrv)?)
        }
        w => WeightChoice::Single(parse_weight(w)?),
    };
    let cfg = BootstrapConfig {
        block_len: a.block_len,
        n_boot: a.n_boot,
        level: a.level,
        delta_exponent: a.delta_exponent,
        seed: a.seed,
    };
    let result = changepoint::changepoint_test(&x, &v, &spec, &choice, &cfg)?;
    if let Some(path) = &a.path_out {
        let w = match &result.weights_used {
            changepoint::WeightsUsed::Single { w } => *w,
            changepoint::WeightsUsed::Grid { argmax_w, .. } => *argmax_w,
        };
        let values = changepoint::cusum_path(&x, &v, &w, &spec)?;
        let mut wtr = csv::Writer::from_path(path).map_err(CovError::from)?;
        wtr.write_record(["k", "bridged_value"]).map_err(CovError::from)?;
        for (k, val) in values.iter().enumerate() {
            wtr.write_record([(k + 1).to_string(), format!("{val:e}")])
                .map_err(CovError::from)?;
        }
        wtr.flush()?;
    }
    println!("{}", serde_json::to_string_pretty(&result)?);
    Ok(())
}

fn bench_cmd(table: Table, manifest: &Path) -> Result<()> {
    let m = BenchManifest::load(manifest)?;
    let expected = match table {
        Table::Table1 => Experiment::Table1,
        Table::Table2 => Experiment::Table2,
    };
    if m.experiment != expected {
        return Err(CovError::Manifest(format!(
            "manifest experiment {:?} does not match subcommand",
            m.experiment
        )));
    }
    let report = bench::run(&m)?;
    bench::write_report(&report, Path::new(&m.output_path))?;
    eprintln!(
        "wrote {} ({:.2}s)",
        m.output_path, report.total_wall_time_sec
    );
    Ok(())
}

fn configure_threads() -> Result<()> {
    if let Ok(val) = std::env::var("COVSHRINK_THREADS") {
        let n: usize = val
            .parse()
            .map_err(|_| CovError::InvalidArgument(format!("COVSHRINK_THREADS=`{val}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CovError::InvalidArgument(e.to_string()))?;
    }
    Ok(())
}

fn exit_code(e: &CovError) -> u8 {
    match e {
        CovError::Manifest(_) => 2,
        e if e.is_numerical() => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Simulate(a) => simulate_cmd(a),
        Command::Estimate(a) => estimate_cmd(a),
        Command::Weights(a) => weights_cmd(a),
        Command::CptTest(a) => cpt_cmd(a),
        Command::Bench { table, manifest } => bench_cmd(*table, manifest),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
