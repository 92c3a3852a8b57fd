//! Diffusion models on an interval and the two-barrier hitting transform.

use std::fmt;
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use crate::error::{invalid, DdError, Result};
use crate::quadrature::{integrate_value, QuadOptions};
use crate::scalar::Scalar;
use crate::shooting;

/// Open state interval (lo, hi); either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateInterval {
    pub lo: f64,
    pub hi: f64,
}

impl StateInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return invalid(format!("state interval needs lo < hi, got ({lo}, {hi})"));
        }
        Ok(StateInterval { lo, hi })
    }

    pub fn real_line() -> Self {
        StateInterval {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn positive() -> Self {
        StateInterval {
            lo: 0.0,
            hi: f64::INFINITY,
        }
    }

    pub fn contains(&self, u: f64) -> bool {
        self.lo < u && u < self.hi
    }

    /// Membership in the closure [lo, hi].
    pub fn contains_closed(&self, u: f64) -> bool {
        self.lo <= u && u <= self.hi
    }

    pub fn mirrored(&self, center: f64) -> Self {
        StateInterval {
            lo: 2.0 * center - self.hi,
            hi: 2.0 * center - self.lo,
        }
    }
}

/// Piecewise-linear drift and volatility on strictly increasing abscissae.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    u: Vec<f64>,
    mu: Vec<f64>,
    sigma: Vec<f64>,
}

#[derive(Deserialize)]
struct TableRow {
    u: f64,
    mu: f64,
    sigma: f64,
}

impl CoefficientTable {
    pub fn new(u: Vec<f64>, mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if u.len() < 2 || u.len() != mu.len() || u.len() != sigma.len() {
            return invalid("coefficient table needs at least two rows of equal length");
        }
        if u.iter().chain(&mu).chain(&sigma).any(|v| !v.is_finite()) {
            return invalid("coefficient table entries must be finite");
        }
        if u.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("coefficient table abscissae must be strictly increasing");
        }
        if sigma.iter().any(|&s| s <= 0.0) {
            return invalid("coefficient table volatilities must be positive");
        }
        Ok(CoefficientTable { u, mu, sigma })
    }

    /// Reads a CSV with header `u,mu,sigma`.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["u", "mu", "sigma"] {
            return invalid(format!("coefficient table header must be `u,mu,sigma`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")));
        }
        let (mut u, mut mu, mut sigma) = (Vec::new(), Vec::new(), Vec::new());
        for row in rdr.deserialize() {
            let row: TableRow = row.map_err(|e| DdError::InvalidInput(format!("coefficient table: {e}")))?;
            u.push(row.u);
            mu.push(row.mu);
            sigma.push(row.sigma);
        }
        Self::new(u, mu, sigma)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::from_reader(file)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.u[0], self.u[self.u.len() - 1])
    }

    fn locate(&self, at: f64) -> Result<(usize, f64)> {
        let (lo, hi) = self.domain();
        if !(lo..=hi).contains(&at) {
            return Err(DdError::NonFiniteCoefficient { at });
        }
        let i = match self.u.partition_point(|&v| v <= at) {
            0 => 0,
            k if k >= self.u.len() => self.u.len() - 2,
            k => k - 1,
        };
        let w = (at - self.u[i]) / (self.u[i + 1] - self.u[i]);
        Ok((i, w))
    }

    pub fn drift(&self, at: f64) -> Result<f64> {
        let (i, w) = self.locate(at)?;
        Ok(self.mu[i] + w * (self.mu[i + 1] - self.mu[i]))
    }

    pub fn vol(&self, at: f64) -> Result<f64> {
        let (i, w) = self.locate(at)?;
        Ok(self.sigma[i] + w * (self.sigma[i + 1] - self.sigma[i]))
    }

    /// Table of Y = 2c − X.
    pub fn mirrored(&self, center: f64) -> Self {
        let u = self.u.iter().rev().map(|v| 2.0 * center - v).collect();
        let mu = self.mu.iter().rev().map(|v| -v).collect();
        let sigma = self.sigma.iter().rev().copied().collect();
        CoefficientTable { u, mu, sigma }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    /// dX = μ dt + σ dW.
    Bm { mu: f64, sigma: f64 },
    /// dX = μX dt + σX dW on (0, ∞).
    Gbm { mu: f64, sigma: f64 },
    /// dX = κ(θ − X) dt + σ dW.
    Ou { theta: f64, kappa: f64, sigma: f64 },
    /// dX = κ(θ − X) dt + σ√X dW on (0, ∞).
    Cir { theta: f64, kappa: f64, sigma: f64 },
    Tabulated(Arc<CoefficientTable>),
    /// Y = 2·center − X for a model without a closed reflected form.
    Reflected { center: f64, base: Box<DiffusionModel> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionModel {
    kind: ModelKind,
    interval: StateInterval,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        invalid(format!("{name} must be positive and finite, got {v}"))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        invalid(format!("{name} must be finite, got {v}"))
    }
}

impl DiffusionModel {
    pub fn bm(mu: f64, sigma: f64) -> Result<Self> {
        finite("mu", mu)?;
        positive("sigma", sigma)?;
        Ok(DiffusionModel {
            kind: ModelKind::Bm { mu, sigma },
            interval: StateInterval::real_line(),
        })
    }

    pub fn gbm(mu: f64, sigma: f64) -> Result<Self> {
        finite("mu", mu)?;
        positive("sigma", sigma)?;
        Ok(DiffusionModel {
            kind: ModelKind::Gbm { mu, sigma },
            interval: StateInterval::positive(),
        })
    }

    pub fn ou(theta: f64, kappa: f64, sigma: f64) -> Result<Self> {
        finite("theta", theta)?;
        finite("kappa", kappa)?;
        positive("sigma", sigma)?;
        Ok(DiffusionModel {
            kind: ModelKind::Ou { theta, kappa, sigma },
            interval: StateInterval::real_line(),
        })
    }

    pub fn cir(theta: f64, kappa: f64, sigma: f64) -> Result<Self> {
        finite("theta", theta)?;
        finite("kappa", kappa)?;
        positive("sigma", sigma)?;
        Ok(DiffusionModel {
            kind: ModelKind::Cir { theta, kappa, sigma },
            interval: StateInterval::positive(),
        })
    }

    pub fn tabulated(table: CoefficientTable) -> Self {
        let (lo, hi) = table.domain();
        DiffusionModel {
            kind: ModelKind::Tabulated(Arc::new(table)),
            interval: StateInterval { lo, hi },
        }
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn interval(&self) -> StateInterval {
        self.interval
    }

    /// Catalog name of the model.
    pub fn kind_name(&self) -> &'static str {
        match &self.kind {
            ModelKind::Bm { .. } => "bm",
            ModelKind::Gbm { .. } => "gbm",
            ModelKind::Ou { .. } => "ou",
            ModelKind::Cir { .. } => "cir",
            ModelKind::Tabulated(_) => "tabulated",
            ModelKind::Reflected { .. } => "reflected",
        }
    }

    /// Named parameters of parametric models.
    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match &self.kind {
            ModelKind::Bm { mu, sigma } | ModelKind::Gbm { mu, sigma } => {
                vec![("mu", *mu), ("sigma", *sigma)]
            }
            ModelKind::Ou { theta, kappa, sigma } | ModelKind::Cir { theta, kappa, sigma } => {
                vec![("theta", *theta), ("kappa", *kappa), ("sigma", *sigma)]
            }
            ModelKind::Tabulated(_) => Vec::new(),
            ModelKind::Reflected { center, .. } => vec![("center", *center)],
        }
    }

    /// (μ, σ) when both coefficients are constant.
    pub fn constant_coefficients(&self) -> Option<(f64, f64)> {
        match self.kind {
            ModelKind::Bm { mu, sigma } => Some((mu, sigma)),
            _ => None,
        }
    }

    fn raw_drift(&self, u: f64) -> Result<f64> {
        match &self.kind {
            ModelKind::Bm { mu, .. } => Ok(*mu),
            ModelKind::Gbm { mu, .. } => Ok(mu * u),
            ModelKind::Ou { theta, kappa, .. } | ModelKind::Cir { theta, kappa, .. } => {
                Ok(kappa * (theta - u))
            }
            ModelKind::Tabulated(t) => t.drift(u),
            ModelKind::Reflected { center, base } => Ok(-base.drift(2.0 * center - u)?),
        }
    }

    fn raw_vol(&self, u: f64) -> Result<f64> {
        match &self.kind {
            ModelKind::Bm { sigma, .. } => Ok(*sigma),
            ModelKind::Gbm { sigma, .. } => Ok(sigma * u),
            ModelKind::Ou { sigma, .. } => Ok(*sigma),
            ModelKind::Cir { sigma, .. } => Ok(sigma * u.max(0.0).sqrt()),
            ModelKind::Tabulated(t) => t.vol(u),
            ModelKind::Reflected { center, base } => base.vol(2.0 * center - u),
        }
    }

    /// μ(u); fails outside the closed interval or on a non-finite value.
    pub fn drift(&self, u: f64) -> Result<f64> {
        if !self.interval.contains_closed(u) {
            return Err(DdError::NonFiniteCoefficient { at: u });
        }
        let v = self.raw_drift(u)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(DdError::NonFiniteCoefficient { at: u })
        }
    }

    /// σ(u); fails unless finite and strictly positive.
    pub fn vol(&self, u: f64) -> Result<f64> {
        if !self.interval.contains_closed(u) {
            return Err(DdError::NonFiniteCoefficient { at: u });
        }
        let v = self.raw_vol(u)?;
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(DdError::NonFiniteCoefficient { at: u })
        }
    }
}

impl fmt::Display for DiffusionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind_name())?;
        for (name, v) in self.params() {
            write!(f, " {name}={v}")?;
        }
        Ok(())
    }
}

/// Model of Y_t = 2x − X_t.
pub fn reflect(model: &DiffusionModel, x: f64) -> Result<DiffusionModel> {
    if !model.interval.contains_closed(x) {
        return invalid(format!("reflection point {x} lies outside the state interval"));
    }
    let interval = model.interval.mirrored(x);
    let kind = match &model.kind {
        ModelKind::Bm { mu, sigma } => ModelKind::Bm {
            mu: -mu,
            sigma: *sigma,
        },
        ModelKind::Ou { theta, kappa, sigma } => ModelKind::Ou {
            theta: 2.0 * x - theta,
            kappa: *kappa,
            sigma: *sigma,
        },
        ModelKind::Tabulated(t) => ModelKind::Tabulated(Arc::new(t.mirrored(x))),
        ModelKind::Reflected { center, base } if *center == x => return Ok((**base).clone()),
        _ => ModelKind::Reflected {
            center: x,
            base: Box::new(model.clone()),
        },
    };
    Ok(DiffusionModel { kind, interval })
}

/// Barriers y ≤ x ≤ z and transform parameter λ ≥ 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HittingQuery {
    pub y: f64,
    pub z: f64,
    pub x: f64,
    pub lambda: f64,
}

impl HittingQuery {
    pub fn new(y: f64, z: f64, x: f64, lambda: f64) -> Self {
        HittingQuery { y, z, x, lambda }
    }
}

fn validate_window(model: &DiffusionModel, y: f64, z: f64, x: f64) -> Result<()> {
    if !(y.is_finite() && z.is_finite() && x.is_finite()) {
        return invalid("barriers and start point must be finite");
    }
    if !(y < z) {
        return invalid(format!("lower barrier {y} must lie below upper barrier {z}"));
    }
    if !(y <= x && x <= z) {
        return invalid(format!("start {x} must lie between the barriers [{y}, {z}]"));
    }
    let iv = model.interval();
    if !(iv.contains_closed(y) && iv.contains_closed(z)) {
        return invalid(format!(
            "barrier window [{y}, {z}] is not inside the state interval [{}, {}]",
            iv.lo, iv.hi
        ));
    }
    Ok(())
}

fn validate_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda >= 0.0 {
        Ok(())
    } else {
        invalid(format!("lambda must be finite and non-negative, got {lambda}"))
    }
}

/// E_x[e^{−λτ_y}; τ_y < τ_z] for the model started at x.
pub fn hitting_laplace(model: &DiffusionModel, q: HittingQuery) -> Result<f64> {
    validate_window(model, q.y, q.z, q.x)?;
    validate_lambda(q.lambda)?;
    if q.lambda == 0.0 {
        return ruin_probability(model, q.y, q.z, q.x);
    }
    let v = hitting_transform(model, q.y, q.z, q.x, q.lambda)?;
    Ok(v.clamp(0.0, 1.0))
}

/// Same transform at real or complex λ, without the λ = 0 branch.
pub(crate) fn hitting_transform<T: Scalar>(model: &DiffusionModel, y: f64, z: f64, x: f64, lambda: T) -> Result<T> {
    Ok(shooting::solve_down(model, y, z, Some(x), lambda)?.ell)
}

/// E_x[e^{−λτ_z}; τ_z < τ_y], the transform of leaving through the upper barrier.
pub fn up_first_laplace(model: &DiffusionModel, q: HittingQuery) -> Result<f64> {
    validate_window(model, q.y, q.z, q.x)?;
    validate_lambda(q.lambda)?;
    if q.lambda == 0.0 {
        return Ok(1.0 - ruin_probability(model, q.y, q.z, q.x)?);
    }
    let v = shooting::solve_up(model, q.y, q.z, Some(q.x), q.lambda)?.ell;
    Ok(v.clamp(0.0, 1.0))
}

/// ℓ(y,z;x,λ) for drifted Brownian motion in closed form.
pub fn hitting_laplace_bm(mu: f64, sigma: f64, q: HittingQuery) -> Result<f64> {
    finite("mu", mu)?;
    positive("sigma", sigma)?;
    if !(q.y < q.z && q.y <= q.x && q.x <= q.z) {
        return invalid(format!("need y <= x <= z with y < z, got ({}, {}, {})", q.y, q.x, q.z));
    }
    validate_lambda(q.lambda)?;
    Ok(bm_hitting(mu, sigma, q.y, q.z, q.x, q.lambda))
}

/// sinh[(z−x)S]/sinh[(z−y)S]·e^{μ(y−x)/σ²}, written with decaying exponentials.
pub(crate) fn bm_hitting<T: Scalar>(mu: f64, sigma: f64, y: f64, z: f64, x: f64, lambda: T) -> T {
    let kappa = mu / (sigma * sigma);
    let s = (lambda * (2.0 / (sigma * sigma)) + T::from_real(kappa * kappa)).sqrt();
    let drift = T::from_real(kappa * (y - x)).exp();
    if s.norm() < 1e-300 {
        return T::from_real((z - x) / (z - y)) * drift;
    }
    if s.norm() * (z - y) < 1e-6 {
        // sinh ratio to second order in S
        let r = (s * s * (((z - x) * (z - x) - (z - y) * (z - y)) / 6.0) + T::one()) * ((z - x) / (z - y));
        return r * drift;
    }
    let num = (s * (-2.0 * (z - x))).expm1();
    let den = (s * (-2.0 * (z - y))).expm1();
    (s * (y - x)).exp() * num / den * drift
}

/// Scale function s(x) = ∫_{x0}^{x} exp(−∫_{x0}^{v} 2μ/σ²) dv.
pub fn scale_function(model: &DiffusionModel, x0: f64, x: f64) -> Result<f64> {
    let iv = model.interval();
    if !(iv.contains_closed(x0) && iv.contains_closed(x)) || !x0.is_finite() || !x.is_finite() {
        return invalid(format!("scale function arguments {x0}, {x} must lie in the state interval"));
    }
    scale_integral(model, x0, x0, x, scale_opts())
}

fn scale_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-13,
        rel_tol: 1e-12,
        max_subdiv: 200,
    }
}

fn drift_ratio(model: &DiffusionModel, w: f64) -> Result<f64> {
    let s = model.vol(w)?;
    Ok(2.0 * model.drift(w)? / (s * s))
}

/// ∫_{from}^{to} s'(v) dv with s' normalized to 1 at x0.
fn scale_integral(model: &DiffusionModel, x0: f64, from: f64, to: f64, opts: QuadOptions) -> Result<f64> {
    if let Some((mu, sigma)) = model.constant_coefficients() {
        let k = 2.0 * mu / (sigma * sigma);
        let g = |v: f64| if k == 0.0 { v - x0 } else { -(-k * (v - x0)).exp_m1() / k };
        return Ok(g(to) - g(from));
    }
    integrate_value(
        |v| {
            let inner: f64 = integrate_value(|w| drift_ratio(model, w), x0, v, opts)?;
            Ok((-inner).exp())
        },
        from,
        to,
        opts,
    )
}

/// (s(z) − s(x)) / (s(z) − s(y)).
fn ruin_probability(model: &DiffusionModel, y: f64, z: f64, x: f64) -> Result<f64> {
    if x == y {
        return Ok(1.0);
    }
    if x == z {
        return Ok(0.0);
    }
    let opts = scale_opts();
    let upper = scale_integral(model, x, x, z, opts)?;
    let lower = scale_integral(model, x, y, x, opts)?;
    Ok((upper / (upper + lower)).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn q(y: f64, z: f64, x: f64, lambda: f64) -> HittingQuery {
        HittingQuery::new(y, z, x, lambda)
    }

    #[test]
    fn boundary_values_are_exact() {
        let m = DiffusionModel::bm(0.0, 1.0).unwrap();
        assert_eq!(hitting_laplace(&m, q(0.0, 2.0, 0.0, 0.7)).unwrap(), 1.0);
        assert_eq!(hitting_laplace(&m, q(0.0, 2.0, 2.0, 0.7)).unwrap(), 0.0);
    }

    #[test]
    fn driftless_bm_matches_sinh_ratio() {
        let m = DiffusionModel::bm(0.0, 1.0).unwrap();
        let v = hitting_laplace(&m, q(0.0, 2.0, 1.0, 0.5)).unwrap();
        let exact = 1f64.sinh() / 2f64.sinh();
        assert!((v - exact).abs() < 1e-10, "{v} vs {exact}");
        assert!((hitting_laplace_bm(0.0, 1.0, q(0.0, 2.0, 1.0, 0.5)).unwrap() - exact).abs() < 1e-14);
    }

    #[test]
    fn numerical_and_closed_form_agree_with_drift() {
        let m = DiffusionModel::bm(1.0, 1.0).unwrap();
        let a = hitting_laplace(&m, q(-1.0, 1.0, 0.0, 1.0)).unwrap();
        let b = hitting_laplace_bm(1.0, 1.0, q(-1.0, 1.0, 0.0, 1.0)).unwrap();
        assert!((a - b).abs() < 1e-8, "{a} {b}");
    }

    #[test]
    fn closed_form_equals_sinh_expression() {
        let (mu, sigma, y, z, x, lam) = (0.4, 1.3, -0.5, 1.2, 0.3, 0.8);
        let k = mu / (sigma * sigma);
        let s = (2.0 * lam / (sigma * sigma) + k * k).sqrt();
        let direct = ((z - x) * s).sinh() / ((z - y) * s).sinh() * (k * (y - x)).exp();
        let got = hitting_laplace_bm(mu, sigma, q(y, z, x, lam)).unwrap();
        assert!((got - direct).abs() < 1e-14);
        assert_eq!(hitting_laplace_bm(mu, sigma, q(y, z, y, lam)).unwrap(), 1.0);
    }

    #[test]
    fn complex_lambda_matches_closed_form() {
        let m = DiffusionModel::bm(0.3, 0.9).unwrap();
        let lam = Complex64::new(-0.4, 3.0);
        let num = hitting_transform(&m, -0.7, 0.9, 0.1, lam).unwrap();
        let exact = bm_hitting(0.3, 0.9, -0.7, 0.9, 0.1, lam);
        assert!((num - exact).norm() < 1e-9, "{num} {exact}");
    }

    #[test]
    fn large_lambda_does_not_overflow() {
        let m = DiffusionModel::bm(0.0, 1.0).unwrap();
        let v = hitting_laplace(&m, q(0.0, 40.0, 1.0, 50.0)).unwrap();
        let exact = hitting_laplace_bm(0.0, 1.0, q(0.0, 40.0, 1.0, 50.0)).unwrap();
        assert!((v - exact).abs() <= 1e-8 * exact.max(1e-300) + 1e-300);
    }

    #[test]
    fn up_first_transform_matches_closed_form() {
        let (mu, y, z, x, lam) = (0.5, -1.0, 0.5, 0.0, 0.7);
        let m = DiffusionModel::bm(mu, 1.0).unwrap();
        let got = up_first_laplace(&m, q(y, z, x, lam)).unwrap();
        // mirror image of the down-first transform
        let exact = hitting_laplace_bm(-mu, 1.0, q(-z, -y, -x, lam)).unwrap();
        assert!((got - exact).abs() < 1e-9);
    }

    #[test]
    fn zero_lambda_uses_scale_function() {
        let m = DiffusionModel::bm(0.0, 2.0).unwrap();
        let v = hitting_laplace(&m, q(-1.0, 3.0, 0.5, 0.0)).unwrap();
        assert!((v - 2.5 / 4.0).abs() < 1e-12);
        let ou = DiffusionModel::ou(0.0, 1.5, 1.0).unwrap();
        let p0 = hitting_laplace(&ou, q(-0.5, 0.8, 0.1, 0.0)).unwrap();
        let p_small = hitting_laplace(&ou, q(-0.5, 0.8, 0.1, 1e-10)).unwrap();
        assert!((p0 - p_small).abs() < 1e-5, "{p0} {p_small}");
    }

    #[test]
    fn scale_function_closed_forms() {
        let m = DiffusionModel::ou(0.0, 0.0, 1.0).unwrap();
        assert!((scale_function(&m, 0.3, 1.1).unwrap() - 0.8).abs() < 1e-12);
        let (mu, sigma, x0, x) = (0.7, 1.4, 0.2, 1.5);
        let bm = DiffusionModel::bm(mu, sigma).unwrap();
        let exact = sigma * sigma / (2.0 * mu) * (1.0 - (-2.0 * mu * (x - x0) / (sigma * sigma)).exp());
        assert!((scale_function(&bm, x0, x).unwrap() - exact).abs() < 1e-12);
        // the quadrature path on a model whose drift is constant in disguise
        let table = CoefficientTable::new(vec![-5.0, 5.0], vec![mu, mu], vec![sigma, sigma]).unwrap();
        let tab = DiffusionModel::tabulated(table);
        assert!((scale_function(&tab, x0, x).unwrap() - exact).abs() < 1e-10);
        assert_eq!(scale_function(&tab, x0, x0).unwrap(), 0.0);
    }

    #[test]
    fn reflect_examples() {
        let bm = DiffusionModel::bm(0.4, 1.2).unwrap();
        assert_eq!(reflect(&bm, 0.7).unwrap().constant_coefficients(), Some((-0.4, 1.2)));
        let ou = DiffusionModel::ou(0.5, 2.0, 0.3).unwrap();
        let r = reflect(&ou, 0.0).unwrap();
        for u in [-2.0, -0.3, 0.0, 1.7] {
            assert!((r.drift(u).unwrap() - (-2.0 * (0.5 + u))).abs() < 1e-14);
        }
        let gbm = DiffusionModel::gbm(0.05, 0.2).unwrap();
        let rg = reflect(&gbm, 1.0).unwrap();
        assert_eq!(rg.interval(), StateInterval { lo: f64::NEG_INFINITY, hi: 2.0 });
        assert!((rg.drift(0.5).unwrap() + 0.05 * 1.5).abs() < 1e-15);
        assert!((rg.vol(0.5).unwrap() - 0.2 * 1.5).abs() < 1e-15);
        assert_eq!(reflect(&rg, 1.0).unwrap(), gbm);
    }

    #[test]
    fn reflection_is_an_involution() {
        let table = CoefficientTable::new(vec![0.0, 1.0, 3.0], vec![0.1, -0.2, 0.4], vec![1.0, 0.5, 0.8]).unwrap();
        let models = [
            DiffusionModel::bm(0.3, 1.0).unwrap(),
            DiffusionModel::ou(0.2, 1.0, 0.5).unwrap(),
            DiffusionModel::cir(1.0, 0.5, 0.3).unwrap(),
            DiffusionModel::tabulated(table),
        ];
        for m in models {
            let x = 1.5;
            let back = reflect(&reflect(&m, x).unwrap(), x).unwrap();
            for i in 1..30 {
                let u = m.interval().lo.max(-3.0) + 0.1 * i as f64;
                if m.interval().contains(u) {
                    assert!((back.drift(u).unwrap() - m.drift(u).unwrap()).abs() < 1e-13);
                    assert!((back.vol(u).unwrap() - m.vol(u).unwrap()).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn table_rejects_bad_input_and_interpolates() {
        assert!(CoefficientTable::new(vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(CoefficientTable::new(vec![0.0, 1.0], vec![0.0, 0.0], vec![1.0, 0.0]).is_err());
        let csv = "u,mu,sigma\n0,0,1\n2,1,3\n";
        let t = CoefficientTable::from_reader(csv.as_bytes()).unwrap();
        assert!((t.drift(0.5).unwrap() - 0.25).abs() < 1e-15);
        assert!((t.vol(1.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(matches!(t.drift(2.5), Err(DdError::NonFiniteCoefficient { .. })));
        assert!(CoefficientTable::from_reader("x,mu,sigma\n0,0,1\n1,0,1\n".as_bytes()).is_err());
        assert!(CoefficientTable::from_reader("u,mu,sigma\n0,0,1\n1,nan,1\n".as_bytes()).is_err());
    }

    #[test]
    fn coefficient_failures_surface() {
        let cir = DiffusionModel::cir(1.0, 1.0, 0.5).unwrap();
        let err = hitting_laplace(&cir, q(0.0, 1.0, 0.5, 1.0)).unwrap_err();
        assert!(matches!(err, DdError::NonFiniteCoefficient { .. }));
        let ok = hitting_laplace(&cir, q(0.2, 1.0, 0.5, 1.0)).unwrap();
        assert!(ok > 0.0 && ok < 1.0);
    }

    #[test]
    fn rejects_invalid_queries() {
        let m = DiffusionModel::bm(0.0, 1.0).unwrap();
        assert!(hitting_laplace(&m, q(1.0, 0.0, 0.5, 1.0)).is_err());
        assert!(hitting_laplace(&m, q(0.0, 1.0, 1.5, 1.0)).is_err());
        assert!(hitting_laplace(&m, q(0.0, 1.0, 0.5, -1.0)).is_err());
        let g = DiffusionModel::gbm(0.0, 0.2).unwrap();
        assert!(hitting_laplace(&g, q(-1.0, 1.0, 0.5, 1.0)).is_err());
        assert!(DiffusionModel::bm(0.0, 0.0).is_err());
    }
}
