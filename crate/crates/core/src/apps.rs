//! Relative drawdown digital options and transient-signal misidentification
//! probabilities.

use std::io::Read;
use std::path::Path;

use crate::brownian::{
    bm_laplace_ddu, density_dd_precedes, density_joint_sup_du, BmParams, DensitySeriesConfig, SeriesResult,
};
use crate::diffusion::DiffusionModel;
use crate::drawdown::{laplace_ddu, NumericsConfig};
use crate::error::{invalid, DdError, Result};
use crate::inversion::{invert_bm_ddu, invert_bm_joint_sup_du, DEFAULT_NODES};
use crate::quadrature::{integrate_pieces, integrate_value, QuadOptions};

/// Relative drop α of the price from its running high and relative rise β
/// from its running low.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeEventSpec {
    pub alpha: f64,
    pub beta: f64,
}

impl RelativeEventSpec {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return invalid(format!("alpha must lie in (0, 1), got {alpha}"));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return invalid(format!("beta must be positive, got {beta}"));
        }
        Ok(RelativeEventSpec { alpha, beta })
    }

    /// δ = (1 − α)(1 + β); δ > 1 exactly when the log drawup exceeds the
    /// log drawdown.
    pub fn delta(&self) -> f64 {
        (1.0 - self.alpha) * (1.0 + self.beta)
    }
}

/// Drawdown and drawup sizes (−log(1 − α), log(1 + β)) of the log price.
pub fn relative_to_log(spec: RelativeEventSpec) -> (f64, f64) {
    (-(-spec.alpha).ln_1p(), spec.beta.ln_1p())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Maturity {
    Finite(f64),
    Perpetual,
}

/// Risk-free rate, stock volatility and option maturity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricingSpec {
    pub r: f64,
    pub sigma: f64,
    pub maturity: Maturity,
}

impl PricingSpec {
    pub fn new(r: f64, sigma: f64, maturity: Maturity) -> Result<Self> {
        if !(r >= 0.0 && r.is_finite()) {
            return invalid(format!("r must be non-negative, got {r}"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return invalid(format!("sigma must be positive, got {sigma}"));
        }
        if let Maturity::Finite(t) = maturity {
            if !(t > 0.0 && t.is_finite()) {
                return invalid(format!("maturity must be positive, got {t}"));
            }
        }
        Ok(PricingSpec { r, sigma, maturity })
    }

    /// Log-price dynamics under the pricing measure: drift r − σ²/2.
    pub fn risk_neutral_log(&self) -> Result<BmParams> {
        BmParams::new(self.r - 0.5 * self.sigma * self.sigma, self.sigma)
    }
}

/// Log-price dynamics under the physical measure: drift μ − σ²/2.
pub fn physical_log(mu: f64, sigma: f64) -> Result<BmParams> {
    BmParams::new(mu - 0.5 * sigma * sigma, sigma)
}

/// Density evaluation: the series when it converges, Talbot inversion of
/// the closed form otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityPoint {
    pub value: f64,
    /// True when the series converged without fallback.
    pub converged: bool,
    pub method: &'static str,
}

fn with_fallback(series: Result<SeriesResult>, talbot: impl FnOnce() -> Result<f64>) -> Result<DensityPoint> {
    match series {
        Ok(r) if r.converged => Ok(DensityPoint {
            value: r.value,
            converged: true,
            method: "series",
        }),
        Ok(_) | Err(DdError::SeriesDiverged { .. }) => Ok(DensityPoint {
            value: talbot()?.max(0.0),
            converged: false,
            method: "talbot",
        }),
        Err(e) => Err(e),
    }
}

/// Density of T_D(a) on {T_D(a) < T_U(b)} for any a, b > 0.
pub fn bm_density(p: BmParams, a: f64, b: f64, t: f64, cfg: &DensitySeriesConfig) -> Result<DensityPoint> {
    if a >= b {
        return with_fallback(density_dd_precedes(p, a, b, t, cfg), || {
            invert_bm_ddu(p, a, b, t, DEFAULT_NODES)
        });
    }
    let base = bm_density(p, a, a, t, cfg)?;
    let extra = joint_mass(p, a, b - a, t, cfg)?;
    Ok(DensityPoint {
        value: base.value + extra.value,
        converged: base.converged && extra.converged,
        method: if base.converged && extra.converged {
            "series"
        } else {
            "talbot"
        },
    })
}

/// ∫_0^{zmax} ∂z p(t; a, a + z) dz.
fn joint_mass(p: BmParams, a: f64, zmax: f64, t: f64, cfg: &DensitySeriesConfig) -> Result<DensityPoint> {
    let mut converged = true;
    let value = integrate_value(
        |z| {
            let d = with_fallback(density_joint_sup_du(p, a, z, t, cfg), || {
                invert_bm_joint_sup_du(p, a, z, t, DEFAULT_NODES)
            })?;
            converged &= d.converged;
            Ok(d.value)
        },
        0.0,
        zmax,
        QuadOptions {
            abs_tol: 1e-11,
            rel_tol: 1e-10,
            max_subdiv: 200,
        },
    )?;
    Ok(DensityPoint {
        value,
        converged,
        method: if converged { "series" } else { "talbot" },
    })
}

/// ∫_0^T w(t) f(t) dt on panels that double in length from scale/64.
fn integrate_time<F: FnMut(f64) -> Result<f64>>(f: F, scale: f64, horizon: f64, abs_tol: f64) -> Result<f64> {
    let mut breaks = vec![0.0];
    let mut edge = scale / 64.0;
    while edge < horizon {
        breaks.push(edge);
        edge *= 2.0;
    }
    breaks.push(horizon);
    integrate_pieces(
        f,
        &breaks,
        QuadOptions {
            abs_tol: abs_tol / breaks.len() as f64,
            rel_tol: 1e-10,
            max_subdiv: 200,
        },
    )
}

fn time_scale(p: BmParams, a: f64) -> f64 {
    (a / p.sigma).powi(2)
}

/// P(T_D(a) ≤ T, T_D(a) < T_U(b)) for Brownian motion.
pub fn prob_horizon(p: BmParams, a: f64, b: f64, horizon: f64, cfg: &DensitySeriesConfig) -> Result<f64> {
    discounted_mass(p, a, b, horizon, 0.0, cfg)
}

fn discounted_mass(p: BmParams, a: f64, b: f64, horizon: f64, r: f64, cfg: &DensitySeriesConfig) -> Result<f64> {
    cfg.validate()?;
    for (name, v) in [("a", a), ("b", b), ("T", horizon)] {
        if !(v > 0.0 && v.is_finite()) {
            return invalid(format!("{name} must be positive and finite, got {v}"));
        }
    }
    integrate_time(
        |t| Ok((-r * t).exp() * bm_density(p, a, b, t, cfg)?.value),
        time_scale(p, a.min(b)),
        horizon,
        1e-9,
    )
}

/// Price at time 0 of the perpetual digital paying 1 when the relative
/// drawdown precedes the relative drawup.
pub fn price_perpetual(spec: RelativeEventSpec, p: PricingSpec) -> Result<f64> {
    if p.maturity != Maturity::Perpetual {
        return invalid("price_perpetual needs a perpetual pricing spec");
    }
    if !(p.r > 0.0) {
        return invalid(format!("a perpetual price needs r > 0, got {}", p.r));
    }
    let (a, b) = relative_to_log(spec);
    bm_laplace_ddu(p.risk_neutral_log()?, a, b, p.r)
}

/// Price at time 0 of the digital maturing at T. When δ > 1 the price is
/// the δ = 1 price plus the discounted mass of the largest preceding drawup
/// in (a, b].
pub fn price_finite(spec: RelativeEventSpec, p: PricingSpec, cfg: &DensitySeriesConfig) -> Result<f64> {
    let horizon = match p.maturity {
        Maturity::Finite(t) => t,
        Maturity::Perpetual => return invalid("price_finite needs a finite maturity"),
    };
    let q = p.risk_neutral_log()?;
    let (a, b) = relative_to_log(spec);
    if spec.delta() <= 1.0 {
        return discounted_mass(q, a, b.min(a), horizon, p.r, cfg);
    }
    let base = discounted_mass(q, a, a, horizon, p.r, cfg)?;
    let zmax = spec.delta().ln();
    let extra = integrate_time(
        |t| Ok((-p.r * t).exp() * joint_mass(q, a, zmax, t, cfg)?.value),
        time_scale(q, a),
        horizon,
        1e-9,
    )?;
    Ok(base + extra)
}

/// Tabulated density of the state at the change point, on a strictly
/// increasing grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StartDensity {
    pub y: Vec<f64>,
    pub f: Vec<f64>,
}

impl StartDensity {
    pub fn new(y: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        if y.len() != f.len() || y.len() < 2 {
            return invalid("start density needs at least two (y, f) rows of equal length");
        }
        if y.windows(2).any(|w| !(w[1] > w[0])) || y.iter().any(|v| !v.is_finite()) {
            return invalid("start density grid must be finite and strictly increasing");
        }
        if f.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return invalid("start density values must be finite and non-negative");
        }
        let d = StartDensity { y, f };
        let mass = d.trapezoid(|_, f| f);
        if (mass - 1.0).abs() > 1e-6 {
            return Err(DdError::DensityNotNormalized { mass });
        }
        Ok(d)
    }

    /// Reads a CSV with header `y,f`.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "y" || &headers[1] != "f" {
            return invalid(format!("start density header must be `y,f`, got {headers:?}"));
        }
        let (mut y, mut f) = (Vec::new(), Vec::new());
        for row in rdr.records() {
            let row = row?;
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| DdError::InvalidInput(format!("not a number in start density: {s:?}")))
            };
            y.push(parse(&row[0])?);
            f.push(parse(&row[1])?);
        }
        StartDensity::new(y, f)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        StartDensity::from_reader(std::fs::File::open(path)?)
    }

    fn trapezoid(&self, g: impl Fn(f64, f64) -> f64) -> f64 {
        self.y
            .windows(2)
            .zip(self.f.windows(2))
            .map(|(y, f)| 0.5 * (y[1] - y[0]) * (g(y[0], f[0]) + g(y[1], f[1])))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignalLife {
    /// Independent exponential life with the given rate.
    Exponential(f64),
    /// Fixed life T.
    Deterministic(f64),
}

/// Post-change dynamics, detector thresholds and signal life.
#[derive(Debug, Clone)]
pub struct SignalSpec {
    pub model: DiffusionModel,
    pub a: f64,
    pub b: f64,
    pub life: SignalLife,
    pub start_density: Option<StartDensity>,
}

impl SignalSpec {
    pub fn new(model: DiffusionModel, a: f64, b: f64, life: SignalLife) -> Result<Self> {
        let v = match life {
            SignalLife::Exponential(v) | SignalLife::Deterministic(v) => v,
        };
        if !(v > 0.0 && v.is_finite()) {
            return invalid(format!("signal rate or life must be positive, got {v}"));
        }
        for (name, s) in [("a", a), ("b", b)] {
            if !(s > 0.0 && s.is_finite()) {
                return invalid(format!("{name} must be positive and finite, got {s}"));
            }
        }
        Ok(SignalSpec {
            model,
            a,
            b,
            life,
            start_density: None,
        })
    }

    pub fn with_start_density(mut self, d: StartDensity) -> Self {
        self.start_density = Some(d);
        self
    }

    fn rate(&self) -> Result<f64> {
        match self.life {
            SignalLife::Exponential(rate) => Ok(rate),
            SignalLife::Deterministic(_) => invalid("this probability needs an exponential signal life"),
        }
    }
}

/// Probability that the drawdown alarm fires strictly before both the
/// drawup alarm and the end of an exponential signal life.
pub fn misid_exponential(spec: &SignalSpec, x: f64, cfg: &NumericsConfig) -> Result<f64> {
    laplace_ddu(&spec.model, x, spec.a, spec.b, spec.rate()?, cfg)
}

/// Misidentification probability averaged over the tabulated start density.
pub fn misid_aggregate(spec: &SignalSpec, cfg: &NumericsConfig) -> Result<f64> {
    let rate = spec.rate()?;
    let d = spec
        .start_density
        .as_ref()
        .ok_or_else(|| DdError::InvalidInput("misid_aggregate needs a start density".into()))?;
    let values = d
        .y
        .iter()
        .zip(&d.f)
        .map(|(&y, &f)| {
            if f == 0.0 {
                Ok(0.0)
            } else {
                laplace_ddu(&spec.model, y, spec.a, spec.b, rate, cfg)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(d
        .y
        .windows(2)
        .zip(d.f.windows(2).zip(values.windows(2)))
        .map(|(y, (f, v))| 0.5 * (y[1] - y[0]) * (f[0] * v[0] + f[1] * v[1]))
        .sum())
}

/// Probability that the drawdown of size a precedes the drawup of size a
/// within a fixed signal life T, for Brownian motion.
pub fn misid_deterministic(p: BmParams, a: f64, horizon: f64, cfg: &DensitySeriesConfig) -> Result<f64> {
    prob_horizon(p, a, a, horizon, cfg)
}

/// `misid_deterministic` for a signal spec; only Brownian motion with
/// a = b is supported.
pub fn misid_deterministic_spec(spec: &SignalSpec, cfg: &DensitySeriesConfig) -> Result<f64> {
    let horizon = match spec.life {
        SignalLife::Deterministic(t) => t,
        SignalLife::Exponential(_) => return invalid("this probability needs a deterministic signal life"),
    };
    let (mu, sigma) = spec.model.constant_coefficients().ok_or_else(|| {
        DdError::NotSupported(format!(
            "fixed-life misidentification is available for Brownian motion only, not {}; use `simulate`",
            spec.model.kind_name()
        ))
    })?;
    if spec.a != spec.b {
        return Err(DdError::NotSupported(
            "fixed-life misidentification needs a = b; use `simulate`".into(),
        ));
    }
    misid_deterministic(BmParams::new(mu, sigma)?, spec.a, horizon, cfg)
}
