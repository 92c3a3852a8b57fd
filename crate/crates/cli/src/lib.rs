//! Command-line front end.

pub mod acceptance;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ddlab_core::apps::{
    bm_density, misid_aggregate, misid_deterministic_spec, misid_exponential, physical_log, price_finite,
    price_perpetual, prob_horizon, Maturity, PricingSpec, RelativeEventSpec, SignalLife, SignalSpec,
    StartDensity,
};
use ddlab_core::brownian::{bm_laplace_ddu, BmParams, DensitySeriesConfig};
use ddlab_core::diffusion::{CoefficientTable, DiffusionModel};
use ddlab_core::drawdown::{laplace_ddu, precede_probability, NumericsConfig};
use ddlab_core::inversion::invert_general;
use ddlab_core::montecarlo::{estimate_finite_horizon, simulate, Scheme, SimConfig};
use ddlab_core::{DdError, Result};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "ddlab", version, about = "Drawdown and drawup stopping times of diffusions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// E_x[e^{-λ T_D(a)}; T_D(a) < T_U(b)].
    Laplace {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sizes: SizeArgs,
        #[arg(long)]
        lambda: f64,
        #[command(flatten)]
        numerics: NumericsArgs,
    },
    /// P_x(T_D(a) < T_U(b)).
    Prob {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sizes: SizeArgs,
        #[command(flatten)]
        numerics: NumericsArgs,
    },
    /// CSV of the density of T_D(a) on {T_D(a) < T_U(b)} over a time grid.
    Density {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sizes: SizeArgs,
        /// `start:stop:step` or a comma-separated list.
        #[arg(long)]
        t: String,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        numerics: NumericsArgs,
    },
    /// P(T_D(a) ≤ T, T_D(a) < T_U(b)) for Brownian motion, or for a stock's
    /// relative moves with `--stock`.
    ProbHorizon {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
        /// Horizon T.
        #[arg(long)]
        horizon: f64,
        /// Treat --mu and --sigma as stock parameters and use --alpha/--beta;
        /// the log price drifts at μ − σ²/2.
        #[arg(long)]
        stock: bool,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[command(flatten)]
        numerics: NumericsArgs,
    },
    /// Price of the digital on a relative drawdown preceding a relative
    /// drawup, under risk-neutral log drift r − σ²/2.
    Price {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        sigma: f64,
        /// Maturity T.
        #[arg(long, conflicts_with = "perpetual", required_unless_present = "perpetual")]
        maturity: Option<f64>,
        #[arg(long)]
        perpetual: bool,
        #[command(flatten)]
        numerics: NumericsArgs,
    },
    /// Probability that the drawdown detector fires first while a transient
    /// signal is present.
    Misid {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sizes: SizeArgs,
        /// Exponential signal life with this rate.
        #[arg(long, conflicts_with = "life", required_unless_present = "life")]
        rate: Option<f64>,
        /// Fixed signal life T (Brownian motion only).
        #[arg(long)]
        life: Option<f64>,
        /// CSV `y,f` of the start-state density; averages over it.
        #[arg(long)]
        start_density: Option<PathBuf>,
        #[command(flatten)]
        numerics: NumericsArgs,
    },
    /// Monte Carlo ensemble: CSV of stopping times and a JSON summary.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sizes: SizeArgs,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        /// Time step; defaults to the largest allowed, (min(a, b)/(100σ(x)))².
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Censoring horizon; defaults to 50·(max(a, b)/σ(x))².
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long, value_enum)]
        scheme: Option<SchemeArg>,
        /// Keep each path until both stopping times are observed.
        #[arg(long)]
        full_paths: bool,
        /// Report grid-extrapolated estimates.
        #[arg(long)]
        extrapolate: bool,
        /// Ensemble CSV; standard output when absent (the summary then goes
        /// to standard error).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs the acceptance criteria.
    Selftest {
        /// Fewer Monte Carlo paths.
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelName {
    Bm,
    Gbm,
    Ou,
    Cir,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    ExactBm,
    Euler,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "bm")]
    pub model: ModelName,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub mu: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Mean-reversion level for ou and cir.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub theta: f64,
    /// Mean-reversion speed for ou and cir.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub kappa: f64,
    /// CSV `u,mu,sigma` for `--model table`.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

impl ModelArgs {
    pub fn build(&self) -> Result<DiffusionModel> {
        match self.model {
            ModelName::Bm => DiffusionModel::bm(self.mu, self.sigma),
            ModelName::Gbm => DiffusionModel::gbm(self.mu, self.sigma),
            ModelName::Ou => DiffusionModel::ou(self.theta, self.kappa, self.sigma),
            ModelName::Cir => DiffusionModel::cir(self.theta, self.kappa, self.sigma),
            ModelName::Table => {
                let path = self
                    .table
                    .as_ref()
                    .ok_or_else(|| DdError::InvalidInput("--model table needs --table".into()))?;
                Ok(DiffusionModel::tabulated(CoefficientTable::from_path(path)?))
            }
        }
    }

    /// Start point used when `--x` is absent.
    fn default_x(&self) -> f64 {
        match self.model {
            ModelName::Gbm | ModelName::Cir => 1.0,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Args)]
pub struct SizeArgs {
    /// Drawdown size.
    #[arg(long)]
    pub a: f64,
    /// Drawup size.
    #[arg(long)]
    pub b: f64,
    /// Start point.
    #[arg(long, allow_negative_numbers = true)]
    pub x: Option<f64>,
}

#[derive(Debug, Args)]
pub struct NumericsArgs {
    #[arg(long, default_value_t = 1e-9)]
    pub quad_tol: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub term_tol: f64,
}

impl NumericsArgs {
    fn numerics(&self) -> NumericsConfig {
        NumericsConfig {
            quad_tol: self.quad_tol,
            ..Default::default()
        }
    }

    fn series(&self) -> DensitySeriesConfig {
        DensitySeriesConfig {
            term_tol: self.term_tol,
            ..Default::default()
        }
    }
}

/// Scalar result printed as one JSON line.
#[derive(Debug, Serialize)]
pub struct ScalarOutput {
    pub value: f64,
    pub std_error: Option<f64>,
    pub method: &'static str,
}

#[derive(Debug, Serialize)]
struct SimulationSummary {
    value: f64,
    std_error: f64,
    method: &'static str,
    paths: usize,
    dd_first: usize,
    du_first: usize,
    undecided: usize,
    dt: f64,
    horizon: f64,
    seed: u64,
    scheme: &'static str,
}

fn emit_json<T: Serialize>(out: &mut dyn Write, v: &T) -> Result<()> {
    let line = serde_json::to_string(v).map_err(|e| DdError::Io(e.to_string()))?;
    writeln!(out, "{line}")?;
    Ok(())
}

fn scalar(out: &mut dyn Write, value: f64, method: &'static str) -> Result<()> {
    emit_json(
        out,
        &ScalarOutput {
            value,
            std_error: None,
            method,
        },
    )
}

fn bm_params(model: &DiffusionModel) -> Option<BmParams> {
    model
        .constant_coefficients()
        .and_then(|(mu, sigma)| BmParams::new(mu, sigma).ok())
}

/// Parses `start:stop:step` or `t1,t2,...`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| DdError::InvalidInput(format!("not a number in time grid: {s:?}")))
    };
    let grid = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(DdError::InvalidInput(format!("time grid must be start:stop:step, got {spec:?}")));
        }
        let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0 && stop >= start) {
            return Err(DdError::InvalidInput(format!("time grid needs step > 0 and stop >= start, got {spec:?}")));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| start + i as f64 * step).collect()
    } else {
        spec.split(',').map(num).collect::<Result<Vec<f64>>>()?
    };
    if grid.is_empty() || grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(DdError::InvalidInput("time grid values must be positive and finite".into()));
    }
    Ok(grid)
}

fn open_out(path: &Option<PathBuf>) -> Result<Option<BufWriter<File>>> {
    path.as_ref().map(|p| Ok(BufWriter::new(File::create(p)?))).transpose()
}

fn density_command(
    out: &mut dyn Write,
    model: &DiffusionModel,
    x: f64,
    a: f64,
    b: f64,
    grid: &[f64],
    numerics: &NumericsArgs,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "density", "converged"])?;
    for &t in grid {
        let (value, converged) = match bm_params(model) {
            Some(p) => {
                let d = bm_density(p, a, b, t, &numerics.series())?;
                (d.value, d.converged)
            }
            None => (invert_general(model, x, a, b, t, &numerics.numerics())?, true),
        };
        w.write_record([t.to_string(), value.to_string(), converged.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Laplace {
            model,
            sizes,
            lambda,
            numerics,
        } => {
            let m = model.build()?;
            let x = sizes.x.unwrap_or(model.default_x());
            let (value, method) = match bm_params(&m) {
                Some(p) => (bm_laplace_ddu(p, sizes.a, sizes.b, lambda)?, "closed-form"),
                _ => (
                    laplace_ddu(&m, x, sizes.a, sizes.b, lambda, &numerics.numerics())?,
                    "ode-quadrature",
                ),
            };
            scalar(out, value, method)?;
        }
        Command::Prob { model, sizes, numerics } => {
            let m = model.build()?;
            let x = sizes.x.unwrap_or(model.default_x());
            let v = precede_probability(&m, x, sizes.a, sizes.b, &numerics.numerics())?;
            scalar(out, v, "ode-quadrature")?;
        }
        Command::Density {
            model,
            sizes,
            t,
            out: path,
            numerics,
        } => {
            let m = model.build()?;
            let x = sizes.x.unwrap_or(model.default_x());
            let grid = parse_grid(&t)?;
            match open_out(&path)? {
                Some(mut f) => {
                    density_command(&mut f, &m, x, sizes.a, sizes.b, &grid, &numerics)?;
                    f.flush()?;
                }
                None => density_command(out, &m, x, sizes.a, sizes.b, &grid, &numerics)?,
            }
        }
        Command::ProbHorizon {
            model,
            a,
            b,
            horizon,
            stock,
            alpha,
            beta,
            numerics,
        } => {
            let (p, a, b) = if stock {
                let (alpha, beta) = match (alpha, beta) {
                    (Some(al), Some(be)) => (al, be),
                    _ => return Err(DdError::InvalidInput("--stock needs --alpha and --beta".into())),
                };
                let (a, b) = ddlab_core::apps::relative_to_log(RelativeEventSpec::new(alpha, beta)?);
                (physical_log(model.mu, model.sigma)?, a, b)
            } else {
                let m = model.build()?;
                let p = bm_params(&m).ok_or_else(|| {
                    DdError::NotSupported(format!(
                        "finite-horizon probabilities are available for bm only, not {}; use `simulate`",
                        m.kind_name()
                    ))
                })?;
                match (a, b) {
                    (Some(a), Some(b)) => (p, a, b),
                    _ => return Err(DdError::InvalidInput("prob-horizon needs --a and --b".into())),
                }
            };
            let v = prob_horizon(p, a, b, horizon, &numerics.series())?;
            scalar(out, v, "series")?;
        }
        Command::Price {
            alpha,
            beta,
            r,
            sigma,
            maturity,
            perpetual,
            numerics,
        } => {
            let spec = RelativeEventSpec::new(alpha, beta)?;
            let (value, method) = if perpetual {
                let p = PricingSpec::new(r, sigma, Maturity::Perpetual)?;
                (price_perpetual(spec, p)?, "closed-form")
            } else {
                let t = maturity.ok_or_else(|| DdError::InvalidInput("price needs --maturity or --perpetual".into()))?;
                let p = PricingSpec::new(r, sigma, Maturity::Finite(t))?;
                (price_finite(spec, p, &numerics.series())?, "series")
            };
            scalar(out, value, method)?;
        }
        Command::Misid {
            model,
            sizes,
            rate,
            life,
            start_density,
            numerics,
        } => {
            let m = model.build()?;
            let x = sizes.x.unwrap_or(model.default_x());
            let life = match (rate, life) {
                (Some(r), None) => SignalLife::Exponential(r),
                (None, Some(t)) => SignalLife::Deterministic(t),
                _ => return Err(DdError::InvalidInput("misid needs exactly one of --rate and --life".into())),
            };
            let mut spec = SignalSpec::new(m, sizes.a, sizes.b, life)?;
            let (value, method) = match life {
                SignalLife::Deterministic(_) => (misid_deterministic_spec(&spec, &numerics.series())?, "series"),
                SignalLife::Exponential(_) => match start_density {
                    Some(path) => {
                        spec = spec.with_start_density(StartDensity::from_path(path)?);
                        (misid_aggregate(&spec, &numerics.numerics())?, "ode-quadrature")
                    }
                    None => (misid_exponential(&spec, x, &numerics.numerics())?, "ode-quadrature"),
                },
            };
            scalar(out, value, method)?;
        }
        Command::Simulate {
            model,
            sizes,
            paths,
            dt,
            seed,
            horizon,
            scheme,
            full_paths,
            extrapolate,
            out: path,
        } => {
            let m = model.build()?;
            let x = sizes.x.unwrap_or(model.default_x());
            let dt = match dt {
                Some(dt) => dt,
                None => (sizes.a.min(sizes.b) / (100.0 * m.vol(x)?)).powi(2),
            };
            let mut cfg = SimConfig::for_model(&m, paths, dt, seed)
                .with_stop_at_first(!full_paths)
                .with_extrapolation(extrapolate);
            cfg.horizon = horizon;
            if let Some(s) = scheme {
                cfg.scheme = match s {
                    SchemeArg::ExactBm => Scheme::ExactBm,
                    SchemeArg::Euler => Scheme::Euler,
                };
            }
            let e = simulate(&m, x, sizes.a, sizes.b, &cfg)?;
            let est = estimate_finite_horizon(&e, e.horizon())?;
            let s = e.summary();
            let summary = SimulationSummary {
                value: est.value,
                std_error: est.std_error,
                method: "monte-carlo",
                paths: s.paths,
                dd_first: s.dd_first,
                du_first: s.du_first,
                undecided: s.undecided,
                dt: e.config.dt,
                horizon: e.horizon(),
                seed: e.config.seed,
                scheme: e.config.scheme.name(),
            };
            match open_out(&path)? {
                Some(mut f) => {
                    e.write_csv(&mut f)?;
                    f.flush()?;
                    emit_json(out, &summary)?;
                }
                None => {
                    e.write_csv(&mut *out)?;
                    emit_json(err, &summary)?;
                }
            }
        }
        Command::Selftest { quick } => {
            let opts = acceptance::Options {
                quick,
                binary: std::env::current_exe().ok(),
            };
            let mut all = true;
            for c in acceptance::run_all(&opts) {
                writeln!(out, "{c}")?;
                all &= c.passed;
            }
            return Ok(if all { 0 } else { 2 });
        }
    }
    Ok(0)
}

/// Runs the command line `argv` (program name first) and returns the exit
/// code: 0 on success, 1 on invalid input, 2 on numerical failure.
pub fn run<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    match execute(cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", e.name());
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}
