//! `mar`: fit, simulate and run Monte-Carlo experiments for mixed
//! causal-noncausal autoregressions with Student's t errors.

mod input;
mod report;

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mar_core::estimator::{fit_mar, Centering, select_p, select_rs, FitOptions, InfoCriterion};
use mar_core::harness::{run_erf, run_sd_growth, write_sd_growth, ErfConfig};
use mar_core::robustscale::{
    calibrate_kstar, calibrate_kstar_with, kstar_reference, CalibrationLaw, REFERENCE_KSTAR, REFERENCE_NU,
    REFERENCE_T,
};
use mar_core::rng::derive_seed;
use mar_core::simulator::{simulate_mar, SimConfig, DEFAULT_BURN};
use mar_core::{MarError, MarModel};

use input::{read_series, ColumnSelector};
use report::{Meta, Selection};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<MarError> for CliError {
    fn from(e: MarError) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

/// Parameter errors in flags are usage errors, not data errors.
fn usage(e: MarError) -> CliError {
    CliError::Usage(e.to_string())
}

#[derive(Parser, Debug)]
#[command(name = "mar", version, about = "Mixed causal-noncausal autoregressions with Student's t errors")]
#[command(args_conflicts_with_subcommands = true, allow_negative_numbers = true)]
struct Cli {
    /// Worker threads for the Monte-Carlo commands (default: all cores).
    #[arg(long, global = true, env = "MAR_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Select the orders and estimate a MAR model from a CSV series.
    Fit(FitArgs),
    /// Simulate a MAR path to CSV.
    Simulate(SimulateArgs),
    /// Monte-Carlo calibration of the robust scale constant k*.
    CalibrateK(CalibrateArgs),
    /// Empirical rejection frequencies of coefficient t-tests.
    Erf(ExperimentArgs),
    /// Growth of the robust residual scale with the sample size.
    SdGrowth(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FitFormat {
    Json,
    Table,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TableFormat {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// CSV file holding the series.
    input: PathBuf,
    /// Column to read: 1-based index or header name (default: last column).
    #[arg(long)]
    column: Option<String>,
    #[arg(long, default_value_t = 8)]
    p_max: usize,
    #[arg(long, default_value = "bic")]
    criterion: String,
    /// Location removed before fitting: mean, median or none.
    #[arg(long, default_value = "mean")]
    center: String,
    /// Use this total order instead of selecting it.
    #[arg(long)]
    p: Option<usize>,
    /// Fix the causal order; requires --s.
    #[arg(long, requires = "s")]
    r: Option<usize>,
    /// Fix the noncausal order; requires --r.
    #[arg(long, requires = "r")]
    s: Option<usize>,
    /// Use this k* for the robust standard errors instead of looking it up.
    #[arg(long)]
    kstar: Option<f64>,
    /// Replications when k* must be calibrated (outside the reference table).
    #[arg(long, default_value_t = 100_000)]
    kstar_n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random start points added to the deterministic ones.
    #[arg(long, default_value_t = 4)]
    starts: usize,
    #[arg(long, value_enum, default_value = "json")]
    format: FitFormat,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    t: usize,
    /// Causal coefficients, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    phi: Vec<f64>,
    /// Noncausal coefficients, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    vphi: Vec<f64>,
    #[arg(long)]
    nu: f64,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long, default_value_t = DEFAULT_BURN)]
    burn: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    /// Degrees of freedom of the errors.
    #[arg(long, required_unless_present_any = ["gaussian", "table"])]
    nu: Option<f64>,
    /// Sample size of each replication.
    #[arg(long, required_unless_present = "table")]
    t: Option<usize>,
    /// Number of replications.
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    /// Draw Gaussian errors instead of Student's t.
    #[arg(long, conflicts_with_all = ["nu", "table"])]
    gaussian: bool,
    /// Recompute the whole reference grid and compare with the stored values.
    #[arg(long)]
    table: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the number of replications in the configuration.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    format: TableFormat,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn command_line() -> String {
    std::iter::once("mar".to_string()).chain(std::env::args().skip(1)).collect::<Vec<_>>().join(" ")
}

fn meta(seed: u64) -> Meta {
    Meta { tool: "mar", version: env!("CARGO_PKG_VERSION"), command: command_line(), seed }
}

/// `#` comment lines identifying the run.
fn comment_header(seed: u64) -> String {
    let m = meta(seed);
    format!("# {} {}\n# command: {}\n# seed: {}\n", m.tool, m.version, m.command, m.seed)
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), CliError> {
    match output {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).map_err(|e| CliError::Data(e.to_string()))
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn cmd_fit(args: FitArgs) -> Result<(), CliError> {
    let criterion: InfoCriterion = args.criterion.parse().map_err(usage)?;
    let centering: Centering = args.center.parse().map_err(usage)?;
    let column = args.column.as_deref().map(ColumnSelector::parse);
    let y = read_series(&args.input, column.as_ref())?;
    let opts = FitOptions { seed: args.seed, random_starts: args.starts, centering, ..FitOptions::default() };

    let (fit, selection) = match (args.r, args.s) {
        (Some(r), Some(s)) => (fit_mar(&y, r, s, &opts)?, Selection { p_selected_by: None, candidates: Vec::new() }),
        _ => {
            let (p, by) = match args.p {
                Some(p) => (p, None),
                None => (select_p(&y, args.p_max, criterion)?, Some(criterion)),
            };
            let sel = select_rs(&y, p, &opts)?;
            (sel.fit, Selection { p_selected_by: by, candidates: sel.candidates })
        }
    };

    let nu = fit.model.dist.nu;
    let kstar = match args.kstar {
        Some(k) if k > 0.0 && k.is_finite() => Ok((k, "user".to_string())),
        Some(k) => return Err(CliError::Usage(format!("k* must be positive, got {k}"))),
        None if nu <= 1.0 => Err("nu<=1".to_string()),
        None => match kstar_reference(nu, fit.t) {
            Ok(k) => Ok((k, "reference table".to_string())),
            Err(_) => calibrate_kstar(nu, fit.t, args.kstar_n, derive_seed(args.seed, 0x6b5f))
                .map(|c| (c.kstar, format!("calibrated, N = {}", args.kstar_n)))
                .map_err(|e| e.to_string()),
        },
    };

    let report = report::build(meta(args.seed), &y, &fit, centering, selection, kstar);
    let text = match args.format {
        FitFormat::Json => to_json(&report),
        FitFormat::Table => comment_header(args.seed) + &report::render_table(&report),
    };
    emit(args.output.as_deref(), &text)
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let model = MarModel::new(args.phi, args.vphi, args.nu, args.eta).map_err(usage)?;
    let cfg = SimConfig { t: args.t, model, burn: args.burn, seed: args.seed };
    let y = simulate_mar(&cfg).map_err(usage)?;
    let mut text = comment_header(args.seed);
    let config = serde_json::json!({
        "t": cfg.t, "phi": cfg.model.phi, "vphi": cfg.model.vphi,
        "nu": cfg.model.dist.nu, "eta": cfg.model.dist.eta, "burn": cfg.burn, "seed": cfg.seed,
    });
    let _ = writeln!(text, "# config: {config}");
    text.push_str("y\n");
    for v in &y {
        let _ = writeln!(text, "{v}");
    }
    emit(args.output.as_deref(), &text)
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<(), CliError> {
    let mut text = comment_header(args.seed);
    if args.table {
        text.push_str("nu,T,kstar,reference,relative_difference\n");
        for (i, nu) in REFERENCE_NU.iter().enumerate() {
            for (j, t) in REFERENCE_T.iter().enumerate() {
                let seed = derive_seed(args.seed, (i * REFERENCE_T.len() + j) as u64);
                let k = calibrate_kstar(*nu, *t, args.n, seed).map_err(usage)?.kstar;
                let reference = REFERENCE_KSTAR[j][i];
                let _ = writeln!(text, "{nu},{t},{k},{reference},{}", (k - reference) / reference);
            }
        }
        return emit(args.output.as_deref(), &text);
    }
    let t = args.t.expect("required by clap");
    let law = match args.nu {
        _ if args.gaussian => CalibrationLaw::Gaussian,
        Some(nu) => CalibrationLaw::StudentT { nu },
        None => unreachable!("required by clap"),
    };
    let cal = calibrate_kstar_with(law, t, args.n, args.seed).map_err(usage)?;
    let mut buf = Vec::new();
    cal.write_csv(&mut buf).expect("writing to memory");
    text.push_str(&String::from_utf8(buf).expect("utf-8"));
    emit(args.output.as_deref(), &text)
}

fn load_experiment(args: &ExperimentArgs) -> Result<ErfConfig, CliError> {
    let raw = fs::read_to_string(&args.config)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", args.config.display())))?;
    let mut cfg: ErfConfig = serde_json::from_str(&raw)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.config.display())))?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    Ok(cfg)
}

fn cmd_erf(args: ExperimentArgs) -> Result<(), CliError> {
    let cfg = load_experiment(&args)?;
    let table = run_erf(&cfg).map_err(usage)?;
    let text = match args.format {
        TableFormat::Json => to_json(&serde_json::json!({ "meta": meta(cfg.seed), "config": cfg, "rows": table.rows })),
        TableFormat::Csv => {
            let mut buf = Vec::new();
            table.write_delimited(&mut buf).expect("writing to memory");
            comment_header(cfg.seed) + &String::from_utf8(buf).expect("utf-8")
        }
    };
    emit(args.output.as_deref(), &text)
}

fn cmd_sd_growth(args: ExperimentArgs) -> Result<(), CliError> {
    let cfg = load_experiment(&args)?;
    let rows = run_sd_growth(&cfg).map_err(usage)?;
    let text = match args.format {
        TableFormat::Json => to_json(&serde_json::json!({ "meta": meta(cfg.seed), "config": cfg, "rows": rows })),
        TableFormat::Csv => {
            let mut buf = Vec::new();
            write_sd_growth(&rows, &mut buf).expect("writing to memory");
            comment_header(cfg.seed) + &String::from_utf8(buf).expect("utf-8")
        }
    };
    emit(args.output.as_deref(), &text)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::CalibrateK(a) => cmd_calibrate(a),
        Command::Erf(a) => cmd_erf(a),
        Command::SdGrowth(a) => cmd_sd_growth(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mar: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
