//! Laplace transforms of the drawdown-before-drawup event for general
//! diffusions, built from the hitting transform by differentiation and
//! quadrature.

use num_complex::Complex64;

use crate::diffusion::{reflect, DiffusionModel};
use crate::error::{invalid, DdError, Result};
use crate::quadrature::{integrate_value, QuadOptions};
use crate::scalar::Scalar;
use crate::shooting::{solve_down, solve_up};
use crate::special::{gauss_legendre, legendre_with_derivative};

/// Quadrature and finite-difference controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericsConfig {
    pub quad_tol: f64,
    pub diff_step_scale: f64,
    pub max_subdiv: usize,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        NumericsConfig {
            quad_tol: 1e-9,
            diff_step_scale: 1.0,
            max_subdiv: 200,
        }
    }
}

impl NumericsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.quad_tol > 0.0 && self.quad_tol.is_finite()) {
            return invalid(format!("quad_tol must be positive, got {}", self.quad_tol));
        }
        if !(self.diff_step_scale > 0.0 && self.diff_step_scale.is_finite()) {
            return invalid(format!("diff_step_scale must be positive, got {}", self.diff_step_scale));
        }
        if self.max_subdiv < 8 {
            return invalid(format!("max_subdiv must be at least 8, got {}", self.max_subdiv));
        }
        Ok(())
    }

    fn quad(&self) -> QuadOptions {
        QuadOptions {
            abs_tol: self.quad_tol,
            rel_tol: 1e-12,
            max_subdiv: self.max_subdiv,
        }
    }

    fn step(&self, scale: f64) -> f64 {
        self.diff_step_scale * scale.abs().max(1.0) * f64::EPSILON.cbrt()
    }
}

/// Start point, drawdown size a, drawup size b and transform parameter λ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrawQuery {
    pub x: f64,
    pub a: f64,
    pub b: f64,
    pub lambda: f64,
}

impl DrawQuery {
    pub fn new(x: f64, a: f64, b: f64, lambda: f64) -> Self {
        DrawQuery { x, a, b, lambda }
    }

    pub fn validate(&self, model: &DiffusionModel) -> Result<()> {
        validate_sizes(model, self.x, self.a, self.b)?;
        validate_lambda(self.lambda)
    }
}

fn validate_sizes(model: &DiffusionModel, x: f64, a: f64, b: f64) -> Result<()> {
    if !x.is_finite() {
        return invalid(format!("start point must be finite, got {x}"));
    }
    for (name, v) in [("a", a), ("b", b)] {
        if !(v > 0.0 && v.is_finite()) {
            return invalid(format!("{name} must be positive and finite, got {v}"));
        }
    }
    let iv = model.interval();
    for p in [x - a, x + a, x - b, x + b] {
        if !iv.contains_closed(p) {
            return invalid(format!(
                "x ± a and x ± b must lie in [{}, {}]; {p} does not",
                iv.lo, iv.hi
            ));
        }
    }
    Ok(())
}

fn validate_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        invalid(format!("lambda must be positive and finite, got {lambda}"))
    }
}

/// d/dw f(w) at `w` with step `h`: central differences refined by one
/// Richardson level, or the second-order forward formula when `forward`.
fn derivative<T, F>(mut f: F, w: f64, h: f64, forward: bool) -> Result<T>
where
    T: Scalar,
    F: FnMut(f64) -> Result<T>,
{
    if forward {
        let f0 = f(w)?;
        let f1 = f(w + 0.5 * h)?;
        let f2 = f(w + h)?;
        let f4 = f(w + 2.0 * h)?;
        let coarse = (f0 * -3.0 + f2 * 4.0 - f4) / (2.0 * h);
        let fine = (f0 * -3.0 + f1 * 4.0 - f2) / h;
        Ok((fine * 4.0 - coarse) / 3.0)
    } else {
        let coarse = (f(w + h)? - f(w - h)?) / (2.0 * h);
        let fine = (f(w + 0.5 * h)? - f(w - 0.5 * h)?) / h;
        Ok((fine * 4.0 - coarse) / 3.0)
    }
}

/// ∂/∂w ℓ(u, u + w; x) at w = width.
fn width_derivative<T: Scalar>(
    model: &DiffusionModel,
    u: f64,
    width: f64,
    x: f64,
    lambda: T,
    cfg: &NumericsConfig,
) -> Result<T> {
    let h = cfg.step(width);
    // the upper barrier may not move below the start point
    let forward = u + width - h < x;
    let d = derivative(
        |w| Ok(solve_down(model, u, u + w, Some(x), lambda)?.ell),
        width,
        h,
        forward,
    )?;
    if T::IS_REAL && d.re() < -cfg.quad_tol {
        return Err(DdError::NegativeIntegrand { at: u, value: d.re() });
    }
    Ok(d)
}

pub(crate) fn laplace_equal_t<T: Scalar>(
    model: &DiffusionModel,
    x: f64,
    a: f64,
    lambda: T,
    cfg: &NumericsConfig,
) -> Result<T> {
    integrate_value(
        |u| width_derivative(model, u, a, x, lambda, cfg),
        x - a,
        x,
        cfg.quad(),
    )
}

/// E_x[e^{−λT_D(a)}; T_D(a) < T_U(a)].
pub fn laplace_equal(model: &DiffusionModel, x: f64, a: f64, lambda: f64, cfg: &NumericsConfig) -> Result<f64> {
    cfg.validate()?;
    DrawQuery::new(x, a, a, lambda).validate(model)?;
    Ok(laplace_equal_t(model, x, a, lambda, cfg)?.clamp(0.0, 1.0))
}

pub(crate) fn h_factor_t<T: Scalar>(
    model: &DiffusionModel,
    u: f64,
    b: f64,
    c: f64,
    lambda: T,
    cfg: &NumericsConfig,
) -> Result<T> {
    if c == u {
        return Ok(T::one());
    }
    let exponent: T = integrate_value(
        |v| Ok(solve_down(model, v, v + b, None, lambda)?.lower_slope),
        c,
        u,
        cfg.quad(),
    )?;
    Ok(exponent.exp())
}

/// H_u(λ; b, c): the discounted probability that the running minimum falls
/// from u to c before a drawup of size b completes.
pub fn h_factor(
    model: &DiffusionModel,
    u: f64,
    b: f64,
    c: f64,
    lambda: f64,
    cfg: &NumericsConfig,
) -> Result<f64> {
    cfg.validate()?;
    validate_lambda(lambda)?;
    if !(c <= u) || !(b > 0.0) || !c.is_finite() || !u.is_finite() {
        return invalid(format!("h_factor needs c <= u and b > 0, got c={c}, u={u}, b={b}"));
    }
    let iv = model.interval();
    if !(iv.contains_closed(c) && iv.contains_closed(u + b)) {
        return invalid("h_factor window leaves the state interval");
    }
    h_factor_t(model, u, b, c, lambda, cfg)
}

pub(crate) fn laplace_dd_larger_t<T: Scalar>(
    model: &DiffusionModel,
    x: f64,
    a: f64,
    b: f64,
    lambda: T,
    cfg: &NumericsConfig,
) -> Result<T> {
    integrate_value(
        |u| {
            let d = width_derivative(model, u, b, x, lambda, cfg)?;
            let h = h_factor_t(model, u, b, u - (a - b), lambda, cfg)?;
            Ok(d * h)
        },
        x - b,
        x,
        cfg.quad(),
    )
}

/// E_x[e^{−λT_D(a)}; T_D(a) < T_U(b)] for a > b.
pub fn laplace_dd_larger(
    model: &DiffusionModel,
    x: f64,
    a: f64,
    b: f64,
    lambda: f64,
    cfg: &NumericsConfig,
) -> Result<f64> {
    cfg.validate()?;
    DrawQuery::new(x, a, b, lambda).validate(model)?;
    if !(a > b) {
        return invalid(format!("laplace_dd_larger needs a > b, got a={a}, b={b}"));
    }
    Ok(laplace_dd_larger_t(model, x, a, b, lambda, cfg)?.clamp(0.0, 1.0))
}

const GL_NODES: usize = 16;
const MAX_PANELS: usize = 20_000;
const STALL_PANELS: usize = 64;
const DAMPING_FLOOR: f64 = 1e-14;

/// Node values on one panel of the drawdown integral together with the
/// Legendre coefficients of the escape rate.
struct Panel<T> {
    lo: f64,
    hi: f64,
    /// Λ at the panel start, measured from the anchor.
    lambda_start: T,
    /// Λ at the panel end.
    lambda_end: T,
    nu_coef: Vec<T>,
    rho: Vec<T>,
    /// ∫ over the panel of ρ(u)·e^{−(Λ(u) − lambda_start)}.
    mass: T,
}

/// Lazily built panels of width a covering [anchor, ∞) for
/// J_s = ∫_s^∞ ρ(u)·exp(−∫_s^u ν) du, where ρ is the rate of completing a
/// drawdown at a new maximum u and ν the discounted escape rate upward.
pub(crate) struct DrawdownTail<'m, T> {
    model: &'m DiffusionModel,
    a: f64,
    lambda: T,
    anchor: f64,
    limit: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    panels: Vec<Panel<T>>,
}

fn legendre_all(n: usize, t: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(n + 2);
    p.push(1.0);
    p.push(t);
    for k in 1..=n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * t * p[k] - kf * p[k - 1]) / (kf + 1.0);
        p.push(next);
    }
    p
}

/// ∫_{−1}^{t} Σ c_k P_k(s) ds.
fn legendre_antiderivative<T: Scalar>(coef: &[T], t: f64) -> T {
    let p = legendre_all(coef.len(), t);
    let mut acc = coef[0] * (t + 1.0);
    for (k, c) in coef.iter().enumerate().skip(1) {
        acc += *c * ((p[k + 1] - p[k - 1]) / (2 * k + 1) as f64);
    }
    acc
}

fn legendre_eval<T: Scalar>(coef: &[T], t: f64) -> T {
    let p = legendre_all(coef.len(), t);
    coef.iter().zip(&p).fold(T::zero(), |acc, (c, pk)| acc + *c * *pk)
}

impl<'m, T: Scalar> DrawdownTail<'m, T> {
    pub(crate) fn new(model: &'m DiffusionModel, a: f64, lambda: T, anchor: f64) -> Self {
        let (nodes, weights) = gauss_legendre(GL_NODES);
        DrawdownTail {
            model,
            a,
            lambda,
            anchor,
            limit: model.interval().hi,
            nodes,
            weights,
            panels: Vec::new(),
        }
    }

    fn build_panel(&self, lo: f64, lambda_start: T) -> Result<Panel<T>> {
        let hi = (lo + self.a).min(self.limit);
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let mut nu = Vec::with_capacity(GL_NODES);
        let mut rho = Vec::with_capacity(GL_NODES);
        for &t in &self.nodes {
            let u = mid + half * t;
            nu.push(solve_up(self.model, u - self.a, u, None, self.lambda)?.escape_rate);
            rho.push(solve_down(self.model, u - self.a, u, None, self.lambda)?.rate);
        }
        let mut nu_coef = vec![T::zero(); GL_NODES];
        for (k, c) in nu_coef.iter_mut().enumerate() {
            let mut acc = T::zero();
            for i in 0..GL_NODES {
                let (pk, _) = legendre_with_derivative(k, self.nodes[i]);
                acc += nu[i] * (self.weights[i] * pk);
            }
            *c = acc * ((2 * k + 1) as f64 / 2.0);
        }
        let rel_lambda: Vec<T> = self
            .nodes
            .iter()
            .map(|&t| legendre_antiderivative(&nu_coef, t) * half)
            .collect();
        let lambda_end = lambda_start + legendre_antiderivative(&nu_coef, 1.0) * half;
        let mass = (0..GL_NODES).fold(T::zero(), |acc, i| {
            acc + rho[i] * (-rel_lambda[i]).exp() * (self.weights[i] * half)
        });
        if !(mass.is_finite() && lambda_end.is_finite()) {
            return Err(DdError::SolveDiverged(format!(
                "drawdown rates are not finite on [{lo}, {hi}]"
            )));
        }
        Ok(Panel {
            lo,
            hi,
            lambda_start,
            lambda_end,
            nu_coef,
            rho,
            mass,
        })
    }

    fn panel(&mut self, i: usize) -> Result<&Panel<T>> {
        while self.panels.len() <= i {
            if self.panels.len() >= MAX_PANELS {
                let reached = self.panels.last().map_or(self.anchor, |p| p.hi);
                return Err(DdError::TruncationNotConverged { reached });
            }
            let (lo, start) = match self.panels.last() {
                Some(p) => (p.hi, p.lambda_end),
                None => (self.anchor, T::zero()),
            };
            let p = self.build_panel(lo, start)?;
            self.panels.push(p);
        }
        Ok(&self.panels[i])
    }

    fn at_limit(&self, i: usize) -> bool {
        self.panels.get(i).is_some_and(|p| p.hi >= self.limit)
    }

    /// J_s for s ≥ anchor.
    pub(crate) fn value(&mut self, s: f64) -> Result<T> {
        if s < self.anchor {
            return invalid(format!("drawdown tail queried at {s} below its anchor {}", self.anchor));
        }
        if s >= self.limit {
            return Ok(T::zero());
        }
        let mut i = ((s - self.anchor) / self.a).floor() as usize;
        loop {
            let p = self.panel(i)?;
            if s < p.hi || p.hi >= self.limit {
                break;
            }
            i += 1;
        }
        let first = self.panel(i)?;
        let half = 0.5 * (first.hi - first.lo);
        let t_s = ((s - first.lo) / half - 1.0).clamp(-1.0, 1.0);
        let lambda_s = first.lambda_start + legendre_antiderivative(&first.nu_coef, t_s) * half;
        // partial panel [s, hi] by Gauss–Legendre on the interpolants
        let mut total = T::zero();
        let sub_half = 0.5 * (first.hi - s);
        if sub_half > 0.0 {
            let rho_coef = self.rho_coefficients(i);
            let first = &self.panels[i];
            for (k, &t) in self.nodes.iter().enumerate() {
                let u = s + sub_half * (t + 1.0);
                let tu = ((u - first.lo) / half - 1.0).clamp(-1.0, 1.0);
                let lam = first.lambda_start + legendre_antiderivative(&first.nu_coef, tu) * half;
                let rho = legendre_eval(&rho_coef, tu);
                total += rho * (lambda_s - lam).exp() * (self.weights[k] * sub_half);
            }
        }
        let mut j = i + 1;
        let mut stalled = 0;
        while !self.at_limit(j - 1) {
            let p = self.panel(j)?;
            let damping = (lambda_s - p.lambda_start).exp();
            total += damping * p.mass;
            if damping.norm() < DAMPING_FLOOR {
                return Ok(total);
            }
            if (p.lambda_start - lambda_s).re() <= 0.0 {
                stalled += 1;
                if stalled > STALL_PANELS {
                    return Err(DdError::TruncationNotConverged { reached: p.hi });
                }
            }
            j += 1;
        }
        Ok(total)
    }

    fn rho_coefficients(&self, i: usize) -> Vec<T> {
        let p = &self.panels[i];
        (0..GL_NODES)
            .map(|k| {
                let mut acc = T::zero();
                for n in 0..GL_NODES {
                    let (pk, _) = legendre_with_derivative(k, self.nodes[n]);
                    acc += p.rho[n] * (self.weights[n] * pk);
                }
                acc * ((2 * k + 1) as f64 / 2.0)
            })
            .collect()
    }

    #[cfg(test)]
    fn panel_count(&self) -> usize {
        self.panels.len()
    }
}

pub(crate) fn laplace_dd_uncond_t<T: Scalar>(
    model: &DiffusionModel,
    x: f64,
    a: f64,
    lambda: T,
) -> Result<T> {
    DrawdownTail::new(model, a, lambda, x).value(x)
}

/// E_x[e^{−λT_D(a)}] with no competing drawup.
pub fn laplace_dd_uncond(model: &DiffusionModel, x: f64, a: f64, lambda: f64, cfg: &NumericsConfig) -> Result<f64> {
    cfg.validate()?;
    validate_lambda(lambda)?;
    if !(a > 0.0 && a.is_finite() && x.is_finite()) {
        return invalid(format!("need finite x and a > 0, got x={x}, a={a}"));
    }
    let iv = model.interval();
    if !(iv.contains_closed(x - a) && iv.contains_closed(x)) {
        return invalid(format!("x − a = {} must lie in the state interval", x - a));
    }
    Ok(laplace_dd_uncond_t(model, x, a, lambda)?.clamp(0.0, 1.0))
}

pub(crate) fn laplace_du_larger_t<T: Scalar>(
    model: &DiffusionModel,
    x: f64,
    a: f64,
    b: f64,
    lambda: T,
    cfg: &NumericsConfig,
) -> Result<T> {
    let mirror = reflect(model, x)?;
    let mut tail = DrawdownTail::new(model, a, lambda, x);
    let j_x = tail.value(x)?;
    // drawup-first paths of Y = 2x − X that end in a drawdown of X later on
    let correction: T = integrate_value(
        |u| {
            let d = width_derivative(&mirror, u, a, x, lambda, cfg)?;
            let h = h_factor_t(&mirror, u, a, u - (b - a), lambda, cfg)?;
            let j = tail.value(2.0 * x - u + b - a)?;
            Ok(d * h * j)
        },
        x - a,
        x,
        cfg.quad(),
    )?;
    Ok(j_x - correction)
}

/// E_x[e^{−λT_D(a)}; T_D(a) < T_U(b)] for b > a.
pub fn laplace_du_larger(
    model: &DiffusionModel,
    x: f64,
    a: f64,
    b: f64,
    lambda: f64,
    cfg: &NumericsConfig,
) -> Result<f64> {
    cfg.validate()?;
    DrawQuery::new(x, a, b, lambda).validate(model)?;
    if !(b > a) {
        return invalid(format!("laplace_du_larger needs b > a, got a={a}, b={b}"));
    }
    Ok(laplace_du_larger_t(model, x, a, b, lambda, cfg)?.clamp(0.0, 1.0))
}

pub(crate) fn laplace_ddu_t<T: Scalar>(
    model: &DiffusionModel,
    x: f64,
    a: f64,
    b: f64,
    lambda: T,
    cfg: &NumericsConfig,
) -> Result<T> {
    if a == b {
        laplace_equal_t(model, x, a, lambda, cfg)
    } else if a > b {
        laplace_dd_larger_t(model, x, a, b, lambda, cfg)
    } else {
        laplace_du_larger_t(model, x, a, b, lambda, cfg)
    }
}

/// E_x[e^{−λT_D(a)}; T_D(a) < T_U(b)] for any a, b > 0.
pub fn laplace_ddu(
    model: &DiffusionModel,
    x: f64,
    a: f64,
    b: f64,
    lambda: f64,
    cfg: &NumericsConfig,
) -> Result<f64> {
    cfg.validate()?;
    DrawQuery::new(x, a, b, lambda).validate(model)?;
    Ok(laplace_ddu_t(model, x, a, b, lambda, cfg)?.clamp(0.0, 1.0))
}

/// The transform at a complex λ, used by numerical inversion.
pub fn laplace_ddu_complex(
    model: &DiffusionModel,
    x: f64,
    a: f64,
    b: f64,
    lambda: Complex64,
    cfg: &NumericsConfig,
) -> Result<Complex64> {
    cfg.validate()?;
    validate_sizes(model, x, a, b)?;
    laplace_ddu_t(model, x, a, b, lambda, cfg)
}

/// Smallest λ used for the probability limit.
pub const PROBABILITY_LAMBDA: f64 = 1e-10;

/// P_x(T_D(a) < T_U(b)) from the transform at λ ∈ {1, 2, 4}·1e−10,
/// extrapolated to λ = 0.
pub fn precede_probability(model: &DiffusionModel, x: f64, a: f64, b: f64, cfg: &NumericsConfig) -> Result<f64> {
    cfg.validate()?;
    validate_sizes(model, x, a, b)?;
    let l = PROBABILITY_LAMBDA;
    let l1 = laplace_ddu_t(model, x, a, b, l, cfg)?;
    let l2 = laplace_ddu_t(model, x, a, b, 2.0 * l, cfg)?;
    let l4 = laplace_ddu_t(model, x, a, b, 4.0 * l, cfg)?;
    Ok(((8.0 * l1 - 6.0 * l2 + l4) / 3.0).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::hitting_laplace_bm;
    use crate::diffusion::HittingQuery;

    fn cfg() -> NumericsConfig {
        NumericsConfig::default()
    }

    /// L for drifted BM from the sinh-ratio transform and its exact
    /// derivatives, integrated over the exit level.
    fn bm_equal_reference(mu: f64, a: f64, lambda: f64) -> f64 {
        let k = mu;
        let s = (2.0 * lambda + k * k).sqrt();
        // ∂/∂a sinh((a−x+u)S)/sinh(aS)·e^{k(u−x)} at x = 0, integrated in u
        let f = |u: f64| {
            let num = ((a + u) * s).sinh();
            let den = (a * s).sinh();
            let d = s * ((a + u) * s).cosh() / den - num * s * (a * s).cosh() / (den * den);
            Ok(d * (k * u).exp())
        };
        integrate_value(f, -a, 0.0, QuadOptions { abs_tol: 1e-14, rel_tol: 1e-14, max_subdiv: 200 }).unwrap()
    }

    #[test]
    fn equal_sizes_match_independent_reference() {
        let m = DiffusionModel::bm(0.5, 1.0).unwrap();
        let got = laplace_equal(&m, 0.0, 1.0, 0.5, &cfg()).unwrap();
        let exact = bm_equal_reference(0.5, 1.0, 0.5);
        assert!(((got - exact) / exact).abs() < 1e-7, "{got} {exact}");
    }

    #[test]
    fn driftless_equal_sizes_are_symmetric() {
        let m = DiffusionModel::bm(0.0, 1.0).unwrap();
        let p = precede_probability(&m, 0.0, 1.0, 1.0, &cfg()).unwrap();
        assert!((p - 0.5).abs() < 1e-6, "{p}");
    }

    #[test]
    fn h_factor_for_driftless_bm() {
        let m = DiffusionModel::bm(0.0, 1.0).unwrap();
        let h = h_factor(&m, 1.0, 1.0, 0.0, 0.5, &cfg()).unwrap();
        let exact = (-1.0 / 1f64.tanh()).exp();
        assert!((h - exact).abs() < 1e-9, "{h} {exact}");
        assert_eq!(h_factor(&m, 1.0, 1.0, 1.0, 0.5, &cfg()).unwrap(), 1.0);
    }

    #[test]
    fn h_factor_integrand_is_the_lower_slope() {
        // finite difference of the closed-form transform in the start point
        let (mu, b, lam, v) = (0.3, 0.8, 0.7, 0.2);
        let m = DiffusionModel::bm(mu, 1.0).unwrap();
        let slope = solve_down(&m, v, v + b, None, lam).unwrap().lower_slope;
        let h = 1e-5;
        let l = |w: f64| hitting_laplace_bm(mu, 1.0, HittingQuery::new(v, v + b, w, lam)).unwrap();
        let fd = (-3.0 * l(v) + 4.0 * l(v + h) - l(v + 2.0 * h)) / (2.0 * h);
        assert!((slope - fd).abs() < 1e-8, "{slope} {fd}");
    }

    #[test]
    fn unconditional_transform_for_driftless_bm() {
        let m = DiffusionModel::bm(0.0, 1.0).unwrap();
        let j = laplace_dd_uncond(&m, 0.0, 1.0, 0.5, &cfg()).unwrap();
        assert!((j - 1.0 / 1f64.cosh()).abs() < 1e-9, "{j}");
        let j0 = laplace_dd_uncond(&m, 0.0, 1.0, 1e-10, &cfg()).unwrap();
        assert!((j0 - 1.0).abs() < 1e-6, "{j0}");
    }

    #[test]
    fn tail_panels_integrate_the_escape_rate() {
        // OU escape rate varies with the level, so compare the panel
        // antiderivative with adaptive quadrature of the rate itself
        let m = DiffusionModel::ou(0.0, 1.0, 1.0).unwrap();
        let mut tail = DrawdownTail::new(&m, 0.5, 1.0_f64, 0.0);
        tail.value(0.0).unwrap();
        assert!(tail.panel_count() > 1);
        let p = &tail.panels[1];
        let (lo, hi) = (p.lo, p.hi);
        let (nodes, _) = gauss_legendre(GL_NODES);
        let t = nodes[3];
        let u = 0.5 * (lo + hi) + 0.5 * (hi - lo) * t;
        let direct: f64 = integrate_value(
            |v| Ok(solve_up(&m, v - 0.5, v, None, 1.0_f64)?.escape_rate),
            lo,
            u,
            QuadOptions::default(),
        )
        .unwrap();
        let interpolated = legendre_antiderivative(&p.nu_coef, t) * (0.5 * (hi - lo));
        assert!((interpolated - direct).abs() < 1e-9, "{interpolated} {direct}");
    }

    #[test]
    fn dispatch_matches_branches() {
        let m = DiffusionModel::bm(0.2, 1.0).unwrap();
        let c = cfg();
        assert_eq!(
            laplace_ddu(&m, 0.0, 1.0, 1.0, 0.5, &c).unwrap(),
            laplace_equal(&m, 0.0, 1.0, 0.5, &c).unwrap()
        );
        assert_eq!(
            laplace_ddu(&m, 0.0, 1.2, 1.0, 0.5, &c).unwrap(),
            laplace_dd_larger(&m, 0.0, 1.2, 1.0, 0.5, &c).unwrap()
        );
        assert_eq!(
            laplace_ddu(&m, 0.0, 1.0, 1.2, 0.5, &c).unwrap(),
            laplace_du_larger(&m, 0.0, 1.0, 1.2, 0.5, &c).unwrap()
        );
    }

    #[test]
    fn continuous_across_equal_sizes() {
        let m = DiffusionModel::bm(0.5, 1.0).unwrap();
        let c = cfg();
        let eq = laplace_equal(&m, 0.0, 1.0, 0.5, &c).unwrap();
        let below = laplace_dd_larger(&m, 0.0, 1.0, 1.0 - 1e-6, 0.5, &c).unwrap();
        let above = laplace_du_larger(&m, 0.0, 1.0, 1.0 + 1e-6, 0.5, &c).unwrap();
        assert!((eq - below).abs() < 1e-4, "{eq} {below}");
        assert!((eq - above).abs() < 1e-4, "{eq} {above}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = DiffusionModel::bm(0.0, 1.0).unwrap();
        let c = cfg();
        assert!(laplace_equal(&m, 0.0, 1.0, 0.0, &c).is_err());
        assert!(laplace_dd_larger(&m, 0.0, 1.0, 1.5, 0.5, &c).is_err());
        assert!(laplace_du_larger(&m, 0.0, 1.5, 1.0, 0.5, &c).is_err());
        let bad = NumericsConfig { max_subdiv: 4, ..c };
        assert!(laplace_equal(&m, 0.0, 1.0, 0.5, &bad).is_err());
        let g = DiffusionModel::gbm(0.0, 0.2).unwrap();
        assert!(laplace_equal(&g, 0.5, 1.0, 0.5, &c).is_err());
    }
}
