//! Command-line front end.
//!
//! Exit codes: 0 success, 1 invalid configuration or arguments, 2 numerical
//! failure or tolerance breach, 3 I/O error.

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::config::{ConfigError, RunConfig};
use crate::laplace::{self, LaplaceError};
use crate::model::{GeneratorMatrix, MarketModel, ModelError};
use crate::oracles::{self, path_rng};
use crate::portfolio::{self, utility, ValueSolution};
use crate::stats::PathEstimate;

/// Relative Laplace vs RK4 tolerance of `oracle-check`.
pub const ODE_TOLERANCE: f64 = 1e-7;
/// Relative Laplace vs matrix-exponential tolerance of `oracle-check`.
pub const MATEXP_TOLERANCE: f64 = 1e-8;
/// Monte Carlo band of `oracle-check`, in standard errors.
pub const MC_BAND: f64 = 3.0;

#[derive(Debug, Parser)]
#[command(name = "regime-merton", version, about = "Optimal CRRA investment in a regime-switching market")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate g(i, T - t), the value function and the optimal fraction
    Value(Common),
    /// Re-solve a two-regime model while the exit rate of regime 1 shrinks
    MertonLimit(Common),
    /// Compare the Laplace solution with RK4, matrix exponential and Monte Carlo
    OracleCheck(Common),
    /// Simulate optimal wealth and compare E[U(X_T)] with the value function
    Simulate(Common),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Model configuration (TOML)
    #[arg(long)]
    pub config: PathBuf,
    /// Risk-aversion parameters, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub gamma: Option<Vec<f64>>,
    /// Time to maturity T - t (sets t = 0)
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub x0: Option<f64>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// RK4 steps
    #[arg(long)]
    pub steps: Option<usize>,
    /// Exit rates of regime 1 for `merton-limit`, comma separated
    #[arg(long, value_delimiter = ',')]
    pub q1: Option<Vec<f64>>,
    /// CSV output path
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Common {
    /// Loads the configuration file and applies command-line overrides.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut c = RunConfig::load(&self.config)?;
        if let Some(g) = &self.gamma {
            c.gamma = g.clone();
        }
        if let Some(tau) = self.tau {
            c.horizon = tau;
            c.t = 0.0;
        }
        if let Some(x0) = self.x0 {
            c.x0 = x0;
        }
        if let Some(p) = self.paths {
            c.paths = p;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(s) = self.steps {
            c.steps = s;
        }
        if let Some(q) = &self.q1 {
            c.q1 = q.clone();
        }
        if let Some(o) = &self.out {
            c.out = Some(o.clone());
        }
        Ok(c)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Numerical(#[from] LaplaceError),
    #[error("{0}")]
    ToleranceBreach(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Config(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(ConfigError::Io { .. }) | CliError::Io(_) => 3,
            CliError::Config(_) => 1,
            CliError::Numerical(_) | CliError::ToleranceBreach(_) => 2,
        }
    }
}

/// Comma-separated table with a header row; numbers use Rust's shortest
/// round-trip formatting.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self { text: header.join(",") + "\n" }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write_to(&self, path: Option<&PathBuf>) -> Result<(), CliError> {
        if let Some(p) = path {
            std::fs::write(p, &self.text)?;
        }
        Ok(())
    }
}

fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x}")
    }
}

/// `value`: one row per (gamma, regime).
pub fn cmd_value(config: &RunConfig, out: &mut dyn Write) -> Result<Csv, CliError> {
    let models = config.models()?;
    let tau = config.tau();
    let mut csv = Csv::new(&["gamma", "regime", "tau", "g", "value", "fraction"]);
    writeln!(out, "tau = {tau}, x0 = {}", config.x0)?;
    writeln!(out, "{:>8} {:>7} {:>14} {:>16} {:>12}", "gamma", "regime", "g(i,T-t)", "V(x0,t,i)", "fraction")?;
    for model in models {
        let sol = ValueSolution::new(model, config.horizon)?;
        for i in 0..sol.model.m() {
            let g = sol.g(i, tau);
            let v = utility(sol.model.gamma, config.x0) * g;
            let f = portfolio::optimal_fraction(&sol.model, i);
            writeln!(out, "{:>8} {:>7} {:>14.7} {:>16.7} {:>12.7}", sol.model.gamma, i + 1, g, v, f)?;
            csv.row(&[num(sol.model.gamma), (i + 1).to_string(), num(tau), num(g), num(v), num(f)]);
        }
    }
    csv.write_to(config.out.as_ref())?;
    Ok(csv)
}

/// `merton-limit`: the two-regime model with regime 1's exit rate replaced
/// by each entry of `q1`, at the first gamma of the configuration.
pub fn cmd_merton_limit(config: &RunConfig, out: &mut dyn Write) -> Result<Csv, CliError> {
    let models = config.models()?;
    let base = &models[0];
    if base.m() != 2 {
        return Err(ConfigError::Invalid(format!("merton-limit needs two regimes, got {}", base.m())).into());
    }
    let tau = config.tau();
    let q2 = base.generator.exit_rate(1);
    let merton = portfolio::merton_factor(base.mu[0], base.sigma[0], base.r[0], base.gamma, tau);
    let mut csv = Csv::new(&["q1", "g1", "g2", "merton_factor", "gap"]);
    writeln!(out, "gamma = {}, tau = {tau}, Merton factor of regime 1 = {merton:.7}", base.gamma)?;
    writeln!(out, "{:>10} {:>14} {:>14} {:>12}", "q1", "g(1,T-t)", "g(2,T-t)", "merton-g1")?;
    for &q1 in &config.q1 {
        let model = MarketModel { generator: GeneratorMatrix::two_state(q1, q2), ..base.clone() }.validate()?;
        let g = laplace::solve_g(&model)?.eval_all(tau);
        let gap = merton - g[0];
        writeln!(out, "{:>10} {:>14.7} {:>14.7} {:>12.3e}", q1, g[0], g[1], gap)?;
        csv.row(&[num(q1), num(g[0]), num(g[1]), num(merton), num(gap)]);
    }
    csv.write_to(config.out.as_ref())?;
    Ok(csv)
}

/// One regime's comparison in `oracle-check`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub gamma: f64,
    pub regime: usize,
    pub laplace: f64,
    pub ode: f64,
    pub matexp: f64,
    pub mc: PathEstimate,
}

impl OracleRow {
    pub fn ode_gap(&self) -> f64 {
        (self.laplace - self.ode).abs() / self.ode.abs()
    }

    pub fn matexp_gap(&self) -> f64 {
        (self.laplace - self.matexp).abs() / self.matexp.abs()
    }

    pub fn passes(&self) -> bool {
        self.ode_gap() <= ODE_TOLERANCE && self.matexp_gap() <= MATEXP_TOLERANCE && self.mc.brackets(self.laplace, MC_BAND)
    }
}

pub fn oracle_rows(config: &RunConfig) -> Result<Vec<OracleRow>, CliError> {
    let tau = config.tau();
    let mut rows = Vec::new();
    for model in config.models()? {
        let sol = laplace::solve_g(&model)?;
        let ode = oracles::ode_g(&model, tau, config.steps);
        let mat = oracles::matexp_g(&model, tau);
        for i in 0..model.m() {
            rows.push(OracleRow {
                gamma: model.gamma,
                regime: i + 1,
                laplace: sol.eval(i, tau),
                ode: ode[i],
                matexp: mat[i],
                mc: oracles::mc_g(&model, i, tau, config.paths, config.seed),
            });
        }
    }
    Ok(rows)
}

/// `oracle-check`: fails with a tolerance breach unless every row passes.
pub fn cmd_oracle_check(config: &RunConfig, out: &mut dyn Write) -> Result<Csv, CliError> {
    let rows = oracle_rows(config)?;
    let mut csv = Csv::new(&[
        "gamma", "regime", "laplace", "ode", "matexp", "mc_mean", "mc_std_error", "ode_rel_gap", "matexp_rel_gap",
        "mc_z", "pass",
    ]);
    writeln!(
        out,
        "tau = {}, ode steps = {}, mc paths = {}, seed = {}",
        config.tau(),
        config.steps,
        config.paths,
        config.seed
    )?;
    writeln!(
        out,
        "{:>6} {:>3} {:>14} {:>14} {:>14} {:>14} {:>10} {:>10} {:>10} {:>7} ok",
        "gamma", "i", "laplace", "ode", "matexp", "mc", "mc se", "ode gap", "exp gap", "mc z"
    )?;
    let mut failures = String::new();
    for r in &rows {
        let z = if r.mc.std_error > 0.0 { r.mc.z_score(r.laplace) } else { 0.0 };
        let ok = r.passes();
        writeln!(
            out,
            "{:>6} {:>3} {:>14.9} {:>14.9} {:>14.9} {:>14.9} {:>10.2e} {:>10.2e} {:>10.2e} {:>7.3} {}",
            r.gamma,
            r.regime,
            r.laplace,
            r.ode,
            r.matexp,
            r.mc.mean,
            r.mc.std_error,
            r.ode_gap(),
            r.matexp_gap(),
            z,
            if ok { "PASS" } else { "FAIL" }
        )?;
        csv.row(&[
            num(r.gamma),
            r.regime.to_string(),
            num(r.laplace),
            num(r.ode),
            num(r.matexp),
            num(r.mc.mean),
            num(r.mc.std_error),
            num(r.ode_gap()),
            num(r.matexp_gap()),
            num(z),
            ok.to_string(),
        ]);
        if !ok {
            let _ = write!(failures, " gamma={} regime={};", r.gamma, r.regime);
        }
    }
    csv.write_to(config.out.as_ref())?;
    if failures.is_empty() {
        Ok(csv)
    } else {
        Err(CliError::ToleranceBreach(format!("oracle tolerances breached for{failures}")))
    }
}

/// Outcome of `simulate`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSummary {
    pub estimate: PathEstimate,
    pub value: f64,
    pub z_score: f64,
}

/// `simulate`: per-path terminal wealth and utility at the first gamma,
/// plus a closure summary against the value function.
pub fn cmd_simulate(config: &RunConfig, out: &mut dyn Write) -> Result<(Csv, SimulationSummary), CliError> {
    let models = config.models()?;
    let model = &models[0];
    if !(config.x0 > 0.0) {
        return Err(ConfigError::Invalid(format!("simulate needs x0 > 0, got {}", config.x0)).into());
    }
    let start = config.start_regime();
    let tau = config.tau();
    let terminal: Vec<(f64, f64)> = (0..config.paths as u64)
        .into_par_iter()
        .map(|k| {
            let w = portfolio::simulate_optimal_wealth(model, config.x0, start, tau, 1, &mut path_rng(config.seed, k));
            (*w.wealth.last().unwrap(), w.terminal_utility)
        })
        .collect();
    let mut csv = Csv::new(&["path", "terminal_wealth", "terminal_utility"]);
    for (k, (x, u)) in terminal.iter().enumerate() {
        csv.row(&[k.to_string(), num(*x), num(*u)]);
    }
    let utilities: Vec<f64> = terminal.iter().map(|p| p.1).collect();
    let estimate = PathEstimate::from_samples(&utilities, config.seed);
    let sol = ValueSolution::new(model.clone(), config.horizon)?;
    let value = sol.value(config.x0, config.t, start).expect("x0 > 0 and t checked");
    let z_score = if estimate.std_error > 0.0 { estimate.z_score(value) } else { f64::NAN };
    writeln!(out, "gamma = {}, regime = {}, x0 = {}, tau = {tau}", model.gamma, config.regime, config.x0)?;
    writeln!(out, "paths = {}, seed = {}", estimate.n_paths, config.seed)?;
    writeln!(out, "E[U(X_T)]   = {} (se {})", num(estimate.mean), num(estimate.std_error))?;
    writeln!(out, "V(x0, t, i) = {}", num(value))?;
    writeln!(out, "z           = {}", num(z_score))?;
    csv.write_to(config.out.as_ref())?;
    Ok((csv, SimulationSummary { estimate, value, z_score }))
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Value(c) => c.resolve().and_then(|cfg| cmd_value(&cfg, out).map(drop)),
        Command::MertonLimit(c) => c.resolve().and_then(|cfg| cmd_merton_limit(&cfg, out).map(drop)),
        Command::OracleCheck(c) => c.resolve().and_then(|cfg| cmd_oracle_check(&cfg, out).map(drop)),
        Command::Simulate(c) => c.resolve().and_then(|cfg| cmd_simulate(&cfg, out).map(drop)),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
