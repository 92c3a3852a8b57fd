//! Fixed-Talbot numerical inversion of Laplace transforms.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::brownian::{ddu_of, j0_of, joint_sup_du_of, BmParams};
use crate::diffusion::DiffusionModel;
use crate::drawdown::{laplace_ddu_complex, DrawQuery, NumericsConfig};
use crate::error::{invalid, DdError, Result};

pub const DEFAULT_NODES: usize = 32;

/// λ ↦ L(λ) on the right half plane and its analytic continuation.
pub trait TransformEvaluator {
    fn eval(&self, lambda: Complex64) -> Result<Complex64>;
}

impl<F> TransformEvaluator for F
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    fn eval(&self, lambda: Complex64) -> Result<Complex64> {
        self(lambda)
    }
}

fn checked<F: TransformEvaluator + ?Sized>(f: &F, lambda: Complex64) -> Result<Complex64> {
    let v = f.eval(lambda)?;
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(DdError::EvaluatorFailed {
            re: lambda.re,
            im: lambda.im,
        })
    }
}

/// f(t) from its transform on the fixed Talbot contour with `nodes` points.
pub fn invert<F: TransformEvaluator + ?Sized>(f: &F, t: f64, nodes: usize) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return invalid(format!("inversion time must be positive, got {t}"));
    }
    if !(16..=64).contains(&nodes) {
        return invalid(format!("node count must lie in [16, 64], got {nodes}"));
    }
    let m = nodes as f64;
    let r = 2.0 * m / (5.0 * t);
    let f0 = checked(f, Complex64::new(r, 0.0))?;
    let mut sum = 0.5 * (f0 * (r * t).exp()).re;
    for k in 1..nodes {
        let theta = k as f64 * PI / m;
        let cot = 1.0 / theta.tan();
        let lambda = Complex64::new(r * theta * cot, r * theta);
        let sigma = theta + (theta * cot - 1.0) * cot;
        let v = checked(f, lambda)?;
        sum += ((lambda * t).exp() * v * Complex64::new(1.0, sigma)).re;
    }
    Ok(r / m * sum)
}

/// Inversion at 32 nodes together with |f₃₂ − f₆₄|.
pub fn invert_with_check<F: TransformEvaluator + ?Sized>(f: &F, t: f64) -> Result<(f64, f64)> {
    let coarse = invert(f, t, DEFAULT_NODES)?;
    let fine = invert(f, t, 2 * DEFAULT_NODES)?;
    Ok((coarse, (fine - coarse).abs()))
}

/// Density of T_D(a) on {T_D(a) < T_U(b)} for a general diffusion, by
/// inverting the ODE and quadrature transform at complex λ.
pub fn invert_general(
    model: &DiffusionModel,
    x: f64,
    a: f64,
    b: f64,
    t: f64,
    cfg: &NumericsConfig,
) -> Result<f64> {
    cfg.validate()?;
    DrawQuery::new(x, a, b, 1.0).validate(model)?;
    invert(&|lam: Complex64| laplace_ddu_complex(model, x, a, b, lam, cfg), t, DEFAULT_NODES)
}

/// Inverted closed form of the drawdown-before-drawup density of BM.
pub fn invert_bm_ddu(p: BmParams, a: f64, b: f64, t: f64, nodes: usize) -> Result<f64> {
    invert(&|lam: Complex64| Ok(ddu_of(p, a, b, lam)), t, nodes)
}

/// Inverted closed form of the density of T_D(a) for BM.
pub fn invert_bm_drawdown(p: BmParams, a: f64, t: f64, nodes: usize) -> Result<f64> {
    invert(&|lam: Complex64| Ok(j0_of(p, a, lam)), t, nodes)
}

/// Inverted closed form of the joint density of T_D(a) and the largest
/// preceding drawup a + z.
pub fn invert_bm_joint_sup_du(p: BmParams, a: f64, z: f64, t: f64, nodes: usize) -> Result<f64> {
    invert(&|lam: Complex64| Ok(joint_sup_du_of(p, a, z, lam)), t, nodes)
}
