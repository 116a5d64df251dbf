use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dpsde::checks;
use dpsde::driver::{brownian_path, generate_increments, SimGrid};
use dpsde::experiments::{compare_schemes, convergence_study, StudySpec};
use dpsde::export;
use dpsde::models::lookup;
use dpsde::params::{rho, PerturbationParams};
use dpsde::reference::solve_reference;
use dpsde::scheme::{simulate, SchemeKind};

mod config;

use config::{ConfigFile, List, OutputFormat, Overrides, PathSource, RunConfig};

/// Failure reported on stderr as one `error kind=... message=...` line.
#[derive(Debug)]
pub struct CliError {
    exit: u8,
    kind: &'static str,
    message: String,
}

impl CliError {
    pub fn validation(kind: &'static str, message: impl Into<String>) -> Self {
        Self { exit: 2, kind, message: message.into() }
    }

    pub fn runtime(kind: &'static str, message: impl Into<String>) -> Self {
        Self { exit: 1, kind, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let message = self.message.replace(['\n', '\r'], " ");
        write!(f, "error kind={} exit={} message={:?}", self.kind, self.exit, message)
    }
}

fn io_error(path: &Path, e: io::Error) -> CliError {
    CliError::runtime("io", format!("{}: {e}", path.display()))
}

/// Carathéodory-scheme simulations and strong-convergence studies for
/// α,β-doubly perturbed SDEs.
///
/// Settings come from flags, then from `--config` (`key = value` lines, `#`
/// comments, keys named like the long flags), then from the defaults listed
/// below. Exit codes: 0 success, 1 runtime or I/O failure, 2 invalid input.
#[derive(Parser, Debug)]
#[command(name = "dpsde", version)]
struct Cli {
    /// Config file with `key = value` lines
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for output files [default: current directory]
    #[arg(long, global = true, env = "DPSDE_OUT_DIR")]
    out_dir: Option<PathBuf>,

    /// Worker threads for Monte Carlo loops [default: all cores]
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check (alpha, beta) against the well-posedness condition
    Validate {
        /// Weight of the running maximum [default: 0.6]
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<f64>,
        /// Weight of the running minimum [default: -1]
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<f64>,
    },
    /// Write one path (k, t, phi, M, I, X) as CSV
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Delay parameter n (lag 1/n) [default: 8]
        #[arg(long)]
        n: Option<usize>,
        /// Path index within the seed's family [default: 0]
        #[arg(long)]
        path_index: Option<u64>,
        /// Also write the Brownian path as a W column
        #[arg(long)]
        with_brownian: bool,
    },
    /// Strong-error study against the reference solution
    Converge {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        study: StudyArgs,
    },
    /// New (or general-x0) versus old scheme on the same increments
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        study: StudyArgs,
    },
    /// Run the built-in invariant suite
    Check {
        /// Seed for the randomised checks [default: 42]
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// Model id: zero-drift-unit-diffusion, affine, gbm, bounded-trig,
    /// log-lipschitz, log-lipschitz-drift [default: affine]
    #[arg(long)]
    model: Option<String>,
    /// Weight of the running maximum [default: 0.6]
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Weight of the running minimum [default: -1]
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    /// Initial value [default: 0]
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<f64>,
    /// Time horizon T [default: 1]
    #[arg(long)]
    horizon: Option<f64>,
    /// Grid steps L [default: 4096]
    #[arg(long)]
    steps: Option<usize>,
    /// Master seed [default: 42]
    #[arg(long)]
    seed: Option<u64>,
    /// Scheme: new, old, general-x0 (simulate also accepts reference)
    /// [default: new]
    #[arg(long)]
    scheme: Option<String>,
    /// Output file; for studies, the stem of the .csv/.json pair
    /// [simulate default: stdout; study default: <out-dir>/study or compare]
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// csv writes rows plus a JSON summary; json writes the full report
    /// [default: csv]
    #[arg(long)]
    format: Option<OutputFormat>,
}

#[derive(Args, Debug, Default)]
struct StudyArgs {
    /// Comma-separated delay parameters [default: 8,16,32,64]
    #[arg(long)]
    n_list: Option<List<usize>>,
    /// Comma-separated moment exponents [default: 2,4]
    #[arg(long)]
    p_list: Option<List<f64>>,
    /// Monte Carlo paths M [default: 2000]
    #[arg(long)]
    paths: Option<usize>,
}

fn overrides(common: CommonArgs, study: StudyArgs, cli_out_dir: Option<PathBuf>, threads: Option<usize>) -> Overrides {
    Overrides {
        model: common.model,
        alpha: common.alpha,
        beta: common.beta,
        x0: common.x0,
        horizon: common.horizon,
        steps: common.steps,
        n_list: study.n_list.map(|l| l.0),
        p_list: study.p_list.map(|l| l.0),
        paths: study.paths,
        seed: common.seed,
        scheme: common.scheme,
        output: common.output,
        out_dir: cli_out_dir,
        format: common.format,
        threads,
        ..Default::default()
    }
}

fn validated_params(cfg: &RunConfig) -> Result<PerturbationParams, CliError> {
    PerturbationParams::validate(cfg.alpha, cfg.beta, cfg.x0, cfg.horizon)
        .map_err(|e| CliError::validation("params", e.to_string()))
}

fn study_spec(cfg: &RunConfig) -> Result<StudySpec, CliError> {
    let params = validated_params(cfg)?;
    let model = lookup(&cfg.model_id).map_err(|e| CliError::validation("model", e.to_string()))?;
    let grid = SimGrid::new(cfg.grid_steps, cfg.horizon).map_err(|e| CliError::validation("grid", e.to_string()))?;
    let scheme: SchemeKind = cfg.scheme.parse().map_err(|e: String| CliError::validation("scheme", e))?;
    let spec = StudySpec {
        model,
        params,
        n_list: cfg.n_list.clone(),
        p_list: cfg.p_list.clone(),
        paths: cfg.paths,
        grid,
        master_seed: cfg.master_seed,
        scheme,
    };
    spec.validate().map_err(|e| CliError::validation("study", e.to_string()))?;
    Ok(spec)
}

fn output_stem(cfg: &RunConfig, default_name: &str) -> PathBuf {
    match &cfg.output {
        Some(p) if p.is_absolute() || cfg.out_dir.is_none() => p.clone(),
        Some(p) => cfg.out_dir.as_ref().map(|d| d.join(p)).unwrap_or_else(|| p.clone()),
        None => cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from(".")).join(default_name),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| io_error(path, e))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), CliError> {
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|e| io_error(path, e))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn with_extension(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn run_validate(alpha: f64, beta: f64) -> Result<(), CliError> {
    let r = rho(alpha, beta);
    match PerturbationParams::validate(alpha, beta, 0.0, 1.0) {
        Ok(p) => {
            println!("rho={r} verdict=accept beyond_mao={}", p.beyond_mao());
            Ok(())
        }
        Err(e) => {
            println!("rho={r} verdict=reject");
            Err(CliError::validation("params", e.to_string()))
        }
    }
}

fn run_simulate(cfg: &RunConfig, with_brownian: bool) -> Result<(), CliError> {
    let params = validated_params(cfg)?;
    let model = lookup(&cfg.model_id).map_err(|e| CliError::validation("model", e.to_string()))?;
    let grid = SimGrid::new(cfg.grid_steps, cfg.horizon).map_err(|e| CliError::validation("grid", e.to_string()))?;
    let source: PathSource = cfg.scheme.parse().map_err(|e: String| CliError::validation("scheme", e))?;
    let dw = generate_increments(cfg.master_seed, cfg.path_index, &grid);

    let mut buf = Vec::new();
    match source {
        PathSource::Reference => {
            let path = solve_reference(&model, &params, &grid, &dw).map_err(|e| CliError::validation("scheme", e.to_string()))?;
            export::write_path_csv(&path, &grid, &mut buf)
        }
        PathSource::Scheme(kind) => {
            let path = simulate(kind, &model, &params, &grid, cfg.n, &dw)
                .map_err(|e| CliError::validation("scheme", e.to_string()))?;
            export::write_path_csv(&path, &grid, &mut buf)
        }
    }
    .map_err(|e| CliError::runtime("io", e.to_string()))?;

    if with_brownian {
        let w = brownian_path(&dw);
        let text = String::from_utf8(buf).expect("csv is utf-8");
        let mut out = String::with_capacity(text.len() + 24 * w.len());
        for (i, line) in text.lines().enumerate() {
            out.push_str(line);
            out.push(',');
            if i == 0 {
                out.push('W');
            } else {
                out.push_str(&w[i - 1].to_string());
            }
            out.push('\n');
        }
        buf = out.into_bytes();
    }

    match (&cfg.output, &cfg.out_dir) {
        (None, None) => io::stdout().write_all(&buf).map_err(|e| CliError::runtime("io", e.to_string())),
        _ => write_file(&output_stem(cfg, "path.csv"), |w| w.write_all(&buf)),
    }
}

fn run_converge(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = study_spec(cfg)?;
    let report = convergence_study(&spec).map_err(|e| CliError::runtime("study", e.to_string()))?;
    let stem = output_stem(cfg, "study");
    match cfg.format {
        OutputFormat::Csv => {
            write_file(&with_extension(&stem, "csv"), |w| export::write_study_csv(&[&report], w))?;
            write_file(&with_extension(&stem, "json"), |w| export::write_summary_json(&[&report], w))?;
        }
        OutputFormat::Json => write_file(&with_extension(&stem, "json"), |w| export::write_report_json(&report, w))?,
    }
    for fit in &report.fits {
        println!("p={} slope={} intercept={}", fit.p, fit.slope, fit.intercept);
    }
    Ok(())
}

fn run_compare(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = study_spec(&RunConfig { scheme: "general-x0".into(), ..cfg.clone() })?;
    let cmp = compare_schemes(&spec).map_err(|e| CliError::runtime("study", e.to_string()))?;
    let stem = output_stem(cfg, "compare");
    match cfg.format {
        OutputFormat::Csv => {
            write_file(&with_extension(&stem, "csv"), |w| export::write_study_csv(&[&cmp.new, &cmp.old], w))?;
            write_file(&with_extension(&stem, "json"), |w| export::write_summary_json(&[&cmp.new, &cmp.old], w))?;
        }
        OutputFormat::Json => write_file(&with_extension(&stem, "json"), |w| export::write_comparison_json(&cmp, w))?,
    }
    for r in [&cmp.new, &cmp.old] {
        for fit in &r.fits {
            println!("scheme={} p={} slope={}", r.meta.scheme, fit.p, fit.slope);
        }
    }
    Ok(())
}

fn run_check(seed: u64) -> Result<(), CliError> {
    let outcomes = checks::run_all(seed);
    let failed = outcomes.iter().filter(|c| !c.passed).count();
    for c in &outcomes {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if failed > 0 {
        return Err(CliError::runtime("check", format!("{failed} of {} checks failed", outcomes.len())));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let (command, flags) = match cli.command {
        Command::Validate { alpha, beta } => {
            let cfg = RunConfig::resolve(Overrides { alpha, beta, ..Default::default() }, &file)?;
            return run_validate(cfg.alpha, cfg.beta);
        }
        Command::Check { seed } => {
            let cfg = RunConfig::resolve(Overrides { seed, ..Default::default() }, &file)?;
            return run_check(cfg.master_seed);
        }
        Command::Simulate { common, n, path_index, with_brownian } => {
            let mut o = overrides(common, StudyArgs::default(), cli.out_dir, cli.threads);
            o.n = n;
            o.path_index = path_index;
            ("simulate", (o, with_brownian))
        }
        Command::Converge { common, study } => ("converge", (overrides(common, study, cli.out_dir, cli.threads), false)),
        Command::Compare { common, study } => ("compare", (overrides(common, study, cli.out_dir, cli.threads), false)),
    };
    let (o, with_brownian) = flags;
    let cfg = RunConfig::resolve(o, &file)?;
    if let Some(threads) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::runtime("threads", e.to_string()))?;
    }
    match command {
        "simulate" => run_simulate(&cfg, with_brownian),
        "converge" => run_converge(&cfg),
        _ => run_compare(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit)
        }
    }
}
