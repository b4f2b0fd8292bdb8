//! Command-line interface: run specification tests on CSV data, simulate
//! synthetic samples, run rejection-rate grids, and evaluate the
//! instrument-validity oracle.
//!
//! Exit codes: 0 on success (a rejected null is not an error), 1 on data or
//! computation errors, 2 on argument errors.

mod data;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use midas_specd_core::covariance::HacOptions;
use midas_specd_core::dgp::DgpSpec;
use midas_specd_core::mc::{
    render_table, run_grid, AlternativeMapping, GridConfig, Method, TableFormat,
    TABLE_ALTERNATIVE_SCALE,
};
use midas_specd_core::oracle::{
    expected_instrument_score, monte_carlo_instrument_score, RegressorCovariance,
};
use midas_specd_core::spec_tests::{
    agk_test, dwh_new_test, lambda_t_test, miller_vat_test, TestInputs, TestOutcome,
};
use midas_specd_core::weights::{
    end_of_period_weights, flat_weights, instrument_weights, WeightVector,
};

use data::{load_sample, write_sample, DataFileLayout};

const SEED_ENV_VAR: &str = "MIDAS_SPECD_SEED";

#[derive(Parser)]
#[command(
    name = "midas-specd",
    version,
    about = "Specification tests choosing between time averaging and MIDAS aggregation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the specification tests on a CSV dataset
    Test(TestArgs),
    /// Simulate a synthetic mixed-frequency dataset and write it as CSV
    Simulate(SimulateArgs),
    /// Run a Monte Carlo rejection-rate grid
    Mc(McArgs),
    /// Tabulate the instrument-validity moment, analytic and Monte Carlo
    Oracle(OracleArgs),
}

#[derive(Args)]
struct TestArgs {
    /// Low-frequency CSV (header: period_id,y)
    #[arg(long)]
    low: PathBuf,
    /// High-frequency CSV (header: period_id,lag_index,x)
    #[arg(long)]
    high: PathBuf,
    /// Frequency ratio; inferred from lag indexes when omitted
    #[arg(long)]
    m: Option<usize>,
    /// Null aggregation weights: 'flat' or 'eop:w1,w2,...'
    #[arg(long, default_value = "flat")]
    null: String,
    /// Which test to run: new, agk, miller, lambda, or all
    #[arg(long, default_value = "all")]
    method: String,
    /// Bartlett lag count; deterministic rule when omitted
    #[arg(long)]
    hac_bandwidth: Option<usize>,
    /// Rejection level for the printed decision
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    /// Also write the results as CSV
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Low-frequency sample size
    #[arg(long)]
    t: usize,
    /// Frequency ratio
    #[arg(long)]
    m: usize,
    /// AR(1) parameter of the high-frequency error
    #[arg(long, default_value_t = 0.0)]
    c: f64,
    /// AR(1) parameter of the high-frequency regressor
    #[arg(long, default_value_t = 0.0)]
    d: f64,
    /// Slope on the high-frequency regressor
    #[arg(long, default_value_t = DgpSpec::DEFAULT_BETA)]
    beta: f64,
    /// Aggregation parameter; 0 is the flat null
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    /// RNG seed; falls back to MIDAS_SPECD_SEED, then 0
    #[arg(long)]
    seed: Option<u64>,
    /// High-frequency presample length
    #[arg(long, default_value_t = DgpSpec::DEFAULT_BURN_IN)]
    burn_in: usize,
    #[arg(long)]
    out_low: PathBuf,
    #[arg(long)]
    out_high: PathBuf,
}

#[derive(Args)]
struct McArgs {
    /// Built-in grid: 'desk' (500 replications) or 'full' (2000)
    #[arg(long)]
    preset: Option<String>,
    /// Comma-separated subset of new,agk,miller,lambda
    #[arg(long)]
    methods: Option<String>,
    #[arg(long, value_name = "LIST")]
    t_values: Option<String>,
    #[arg(long, value_name = "LIST")]
    m_values: Option<String>,
    #[arg(long, value_name = "LIST")]
    c_values: Option<String>,
    #[arg(long, value_name = "LIST")]
    d_values: Option<String>,
    #[arg(long, value_name = "LIST")]
    k_values: Option<String>,
    /// Monte Carlo replications per cell
    #[arg(long)]
    reps: Option<usize>,
    /// Base seed; falls back to MIDAS_SPECD_SEED, then 0
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (never changes numeric output)
    #[arg(long)]
    workers: Option<usize>,
    /// Output format: csv or md
    #[arg(long, default_value = "csv")]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Bartlett lag count override
    #[arg(long)]
    hac_bandwidth: Option<usize>,
    /// Mapping from k to the aggregation parameter: 'scaled' (theta =
    /// scale*k/T, the table-replication default) or 'literal' (theta = k)
    #[arg(long, default_value = "scaled")]
    theta_map: String,
    /// Scale of the 'scaled' mapping
    #[arg(long, default_value_t = TABLE_ALTERNATIVE_SCALE)]
    alt_scale: f64,
    /// Nominal rejection level
    #[arg(long, default_value_t = 0.05)]
    level: f64,
}

#[derive(Args)]
struct OracleArgs {
    /// Aggregation parameter of the alternative
    #[arg(long)]
    theta: f64,
    /// AR(1) parameter of the high-frequency regressor
    #[arg(long, default_value_t = 0.0)]
    d: f64,
    /// Slope multiplying the moment
    #[arg(long, default_value_t = DgpSpec::DEFAULT_BETA)]
    beta1: f64,
    /// Null aggregation weights: 'flat' or 'eop:w1,w2,...'
    #[arg(long, default_value = "flat")]
    null: String,
    /// Comma-separated frequency ratios
    #[arg(long, default_value = "8,16,32,64,128")]
    m_list: String,
    /// Monte Carlo replications per ratio
    #[arg(long, default_value_t = 400)]
    reps: usize,
    /// Low-frequency size per replication
    #[arg(long, default_value_t = 200)]
    t: usize,
    /// Seed; falls back to MIDAS_SPECD_SEED, then 0
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum AppError {
    Usage(String),
    Run(String),
}

impl AppError {
    fn code(&self) -> u8 {
        match self {
            AppError::Usage(_) => 2,
            AppError::Run(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            AppError::Usage(m) | AppError::Run(m) => m,
        }
    }
}

impl From<data::DataError> for AppError {
    fn from(e: data::DataError) -> Self {
        AppError::Run(e.to_string())
    }
}

impl From<midas_specd_core::Error> for AppError {
    fn from(e: midas_specd_core::Error) -> Self {
        AppError::Run(e.to_string())
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Run(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Test(args) => run_test(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Mc(args) => run_mc(args),
        Command::Oracle(args) => run_oracle(args),
    }
}

fn resolve_seed(flag: Option<u64>) -> Result<u64, AppError> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV_VAR) {
        Ok(raw) => raw.trim().parse::<u64>().map_err(|_| {
            AppError::Usage(format!("{SEED_ENV_VAR}='{raw}' is not a valid 64-bit seed"))
        }),
        Err(_) => Ok(0),
    }
}

fn parse_null(spec: &str, m: usize) -> Result<WeightVector, AppError> {
    let trimmed = spec.trim();
    if trimmed.eq_ignore_ascii_case("flat") {
        return flat_weights(m).map_err(AppError::from);
    }
    if let Some(rest) = trimmed.strip_prefix("eop:") {
        let values = parse_f64_list(rest)?;
        return end_of_period_weights(m, &values).map_err(AppError::from);
    }
    Err(AppError::Usage(format!(
        "null weights must be 'flat' or 'eop:w1,w2,...', got '{spec}'"
    )))
}

fn parse_f64_list(raw: &str) -> Result<Vec<f64>, AppError> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| AppError::Usage(format!("cannot parse number '{}'", s.trim())))
        })
        .collect()
}

fn parse_usize_list(raw: &str) -> Result<Vec<usize>, AppError> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| AppError::Usage(format!("cannot parse integer '{}'", s.trim())))
        })
        .collect()
}

fn parse_methods(raw: &str) -> Result<Vec<Method>, AppError> {
    if raw.trim().eq_ignore_ascii_case("all") {
        return Ok(Method::ALL.to_vec());
    }
    raw.split(',')
        .map(|s| s.parse::<Method>().map_err(|e| AppError::Usage(e.to_string())))
        .collect()
}

fn run_test(args: TestArgs) -> Result<(), AppError> {
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(AppError::Usage(format!(
            "--level must lie in (0,1), got {}",
            args.level
        )));
    }
    let methods = parse_methods(&args.method)?;
    let layout = DataFileLayout {
        low_path: args.low.clone(),
        high_path: args.high.clone(),
        m: args.m,
    };
    let sample = load_sample(&layout)?;
    let null_weights = parse_null(&args.null, sample.m())?;
    let hac = match args.hac_bandwidth {
        Some(l) => HacOptions::bartlett(l),
        None => HacOptions::default_for(sample.t()),
    };
    let inputs = TestInputs::new(&sample, &null_weights, hac);

    let mut rows: Vec<(Method, Result<TestOutcome, midas_specd_core::Error>)> = Vec::new();
    for method in methods {
        let outcome = match method {
            Method::New => dwh_new_test(&inputs),
            Method::Agk => agk_test(&inputs),
            Method::Miller => miller_vat_test(&inputs),
            Method::LambdaT => lambda_t_test(&inputs),
        };
        rows.push((method, outcome));
    }

    println!(
        "T = {}, m = {}, null = {}, HAC bandwidth = {}",
        sample.t(),
        sample.m(),
        args.null,
        hac.bandwidth
    );
    println!(
        "{:<8} {:>14} {:>5} {:>10} {:>9}  {}",
        "method", "statistic", "df", "p_value", "decision", "diagnostics"
    );
    for (method, outcome) in &rows {
        match outcome {
            Ok(o) => {
                let decision = if o.p_value < args.level { "reject" } else { "keep" };
                println!(
                    "{:<8} {:>14.6} {:>5} {:>10.6} {:>9}  {}",
                    method.name(),
                    o.statistic,
                    o.df,
                    o.p_value,
                    decision,
                    o.diagnostics.labels().join(";")
                );
            }
            Err(e) => {
                println!("{:<8} {e}", method.name());
            }
        }
    }

    if let Some(out) = &args.out {
        let mut csv = String::from("method,statistic,df,p_value,reject,diagnostics\n");
        for (method, outcome) in &rows {
            match outcome {
                Ok(o) => {
                    let _ = writeln!(
                        csv,
                        "{},{},{},{},{},{}",
                        method.name(),
                        o.statistic,
                        o.df,
                        o.p_value,
                        o.p_value < args.level,
                        o.diagnostics.labels().join(";")
                    );
                }
                Err(e) => {
                    let _ = writeln!(csv, "{},error: {e},,,,", method.name());
                }
            }
        }
        std::fs::write(out, csv)?;
    }
    if rows.iter().all(|(_, outcome)| outcome.is_err()) {
        return Err(AppError::Run("every requested test failed on this dataset".into()));
    }
    Ok(())
}

fn run_simulate(args: SimulateArgs) -> Result<(), AppError> {
    let spec = DgpSpec {
        t: args.t,
        m: args.m,
        c: args.c,
        d: args.d,
        beta: args.beta,
        theta: args.theta,
        seed: resolve_seed(args.seed)?,
        burn_in: args.burn_in,
    };
    let sample = midas_specd_core::dgp::simulate(&spec).map_err(|e| AppError::Usage(e.to_string()))?;
    write_sample(&sample, &args.out_low, &args.out_high)?;
    println!(
        "wrote {} periods x {} lags to {} and {}",
        sample.t(),
        sample.m(),
        args.out_low.display(),
        args.out_high.display()
    );
    Ok(())
}

fn run_mc(args: McArgs) -> Result<(), AppError> {
    let seed = resolve_seed(args.seed)?;
    let mut config = match args.preset.as_deref() {
        Some("desk") => GridConfig::desk(seed),
        Some("full") => GridConfig::full(seed),
        Some(other) => {
            return Err(AppError::Usage(format!(
                "unknown preset '{other}' (expected 'desk' or 'full')"
            )))
        }
        None => {
            let (Some(t_values), Some(m_values)) = (&args.t_values, &args.m_values) else {
                return Err(AppError::Usage(
                    "without --preset, both --t-values and --m-values are required".into(),
                ));
            };
            GridConfig {
                methods: vec![Method::New, Method::Agk, Method::Miller],
                t_values: parse_usize_list(t_values)?,
                m_values: parse_usize_list(m_values)?,
                c_values: vec![0.0],
                d_values: vec![0.0],
                k_values: vec![0.0],
                replications: 500,
                nominal_level: 0.05,
                base_seed: seed,
                hac_bandwidth: None,
                alternative: AlternativeMapping::default(),
            }
        }
    };

    if let Some(methods) = &args.methods {
        config.methods = parse_methods(methods)?;
    }
    if let Some(v) = &args.t_values {
        config.t_values = parse_usize_list(v)?;
    }
    if let Some(v) = &args.m_values {
        config.m_values = parse_usize_list(v)?;
    }
    if let Some(v) = &args.c_values {
        config.c_values = parse_f64_list(v)?;
    }
    if let Some(v) = &args.d_values {
        config.d_values = parse_f64_list(v)?;
    }
    if let Some(v) = &args.k_values {
        config.k_values = parse_f64_list(v)?;
    }
    if let Some(reps) = args.reps {
        config.replications = reps;
    }
    config.hac_bandwidth = args.hac_bandwidth;
    config.nominal_level = args.level;
    config.alternative = match args.theta_map.trim().to_ascii_lowercase().as_str() {
        "scaled" => AlternativeMapping::TimeScaled { scale: args.alt_scale },
        "literal" => AlternativeMapping::Literal,
        other => {
            return Err(AppError::Usage(format!(
                "unknown theta map '{other}' (expected 'scaled' or 'literal')"
            )))
        }
    };
    let format = args
        .format
        .parse::<TableFormat>()
        .map_err(|e| AppError::Usage(e.to_string()))?;

    if let Some(workers) = args.workers {
        if workers == 0 {
            return Err(AppError::Usage("--workers must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| AppError::Run(e.to_string()))?;
    }

    config.validate().map_err(|e| AppError::Usage(e.to_string()))?;
    let table = run_grid(&config)?;
    let rendered = render_table(&table, format);
    match &args.out {
        Some(path) => std::fs::write(path, rendered)?,
        None => print!("{rendered}"),
    }
    Ok(())
}

fn run_oracle(args: OracleArgs) -> Result<(), AppError> {
    let m_list = parse_usize_list(&args.m_list)?;
    if m_list.is_empty() {
        return Err(AppError::Usage("--m-list must name at least one ratio".into()));
    }
    let seed = resolve_seed(args.seed)?;
    let mut out = String::from("m,instrument,analytic,mc_mean,mc_se,analytic_times_m\n");
    for &m in &m_list {
        let pi0 = parse_null(&args.null, m)?;
        let (u1, u2) = instrument_weights(m).map_err(AppError::from)?;
        let spec = DgpSpec {
            t: args.t,
            m,
            c: 0.0,
            d: args.d,
            beta: args.beta1,
            theta: args.theta,
            seed,
            burn_in: DgpSpec::DEFAULT_BURN_IN,
        };
        let cov = RegressorCovariance::from_dgp(&spec);
        for (label, ups) in [(1, &u1), (2, &u2)] {
            let analytic = expected_instrument_score(args.beta1, args.theta, &pi0, ups, &cov)?;
            let (mean, se) = monte_carlo_instrument_score(&spec, &pi0, ups, args.reps)?;
            let _ = writeln!(
                out,
                "{m},{label},{analytic},{mean},{se},{}",
                analytic * m as f64
            );
        }
    }
    match &args.out {
        Some(path) => std::fs::write(path, out)?,
        None => print!("{out}"),
    }
    Ok(())
}
