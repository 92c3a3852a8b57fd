//! Initial-value integration of ½σ²f'' + μf' = λf used to build the
//! two-barrier hitting transforms.
//!
//! Each transform needs a single solution that vanishes at one barrier. It is
//! integrated with classical RK4 at N and 2N fixed steps (N = 2048 unless the
//! window is very wide relative to the decay length) and the outputs are
//! combined by one Richardson step. Fixed step counts keep the outputs smooth
//! in the barrier positions, which the finite differences rely on.

use crate::diffusion::DiffusionModel;
use crate::error::{DdError, Result};
use crate::scalar::Scalar;

const BASE_STEPS: usize = 2048;
const MAX_STEPS: usize = 1 << 20;
/// Largest |S|·h accepted before the step count is doubled.
const MAX_STEP_SCALE: f64 = 0.05;
const RENORM_AT: f64 = 1e100;
const RICHARDSON_GAP: f64 = 1e-3;

/// Solution state (f, f') sharing the scale factor exp(log_scale).
#[derive(Debug, Clone, Copy)]
struct State<T> {
    f: T,
    fp: T,
    log_scale: f64,
}

impl<T: Scalar> State<T> {
    fn renormalize(&mut self) {
        let m = self.f.norm().max(self.fp.norm());
        if m > RENORM_AT {
            self.f = self.f / m;
            self.fp = self.fp / m;
            self.log_scale += m.ln();
        }
    }
}

/// 2/σ²(w) and 2μ(w)/σ²(w), so that f'' = k0·λ·f − k1·f'.
fn coefficients(model: &DiffusionModel, w: f64) -> Result<(f64, f64)> {
    let mu = model.drift(w)?;
    let sigma = model.vol(w)?;
    let s2 = sigma * sigma;
    Ok((2.0 / s2, 2.0 * mu / s2))
}

fn integrate<T: Scalar>(
    model: &DiffusionModel,
    from: f64,
    to: f64,
    steps: usize,
    lambda: T,
    mut state: State<T>,
) -> Result<State<T>> {
    if from == to || steps == 0 {
        return Ok(state);
    }
    let h = (to - from) / steps as f64;
    let mut w = from;
    let mut k_start = coefficients(model, w)?;
    for i in 0..steps {
        let w_end = if i + 1 == steps { to } else { from + (i + 1) as f64 * h };
        let k_mid = coefficients(model, w + 0.5 * h)?;
        let k_end = coefficients(model, w_end)?;
        let accel = |k: (f64, f64), f: T, fp: T| lambda * f * k.0 - fp * k.1;
        let (f, fp) = (state.f, state.fp);
        let d1f = fp;
        let d1p = accel(k_start, f, fp);
        let f2 = f + d1f * (0.5 * h);
        let p2 = fp + d1p * (0.5 * h);
        let d2f = p2;
        let d2p = accel(k_mid, f2, p2);
        let f3 = f + d2f * (0.5 * h);
        let p3 = fp + d2p * (0.5 * h);
        let d3f = p3;
        let d3p = accel(k_mid, f3, p3);
        let f4 = f + d3f * h;
        let p4 = fp + d3p * h;
        let d4f = p4;
        let d4p = accel(k_end, f4, p4);
        state.f = f + (d1f + d2f * 2.0 + d3f * 2.0 + d4f) * (h / 6.0);
        state.fp = fp + (d1p + d2p * 2.0 + d3p * 2.0 + d4p) * (h / 6.0);
        state.renormalize();
        w = w_end;
        k_start = k_end;
    }
    if !(state.f.is_finite() && state.fp.is_finite()) {
        return Err(DdError::SolveDiverged(format!(
            "non-finite solution while integrating from {from} to {to}"
        )));
    }
    Ok(state)
}

/// States at the optional mark point and at the far end of one sweep.
struct Sweep<T> {
    at_mark: State<T>,
    at_end: State<T>,
}

fn sweep<T: Scalar>(
    model: &DiffusionModel,
    start: f64,
    end: f64,
    mark: Option<f64>,
    steps: usize,
    lambda: T,
    init: State<T>,
) -> Result<Sweep<T>> {
    match mark {
        None => {
            let at_end = integrate(model, start, end, steps, lambda, init)?;
            Ok(Sweep { at_mark: at_end, at_end })
        }
        Some(m) => {
            let at_mark = integrate(model, start, m, steps / 2, lambda, init)?;
            let at_end = integrate(model, m, end, steps / 2, lambda, at_mark)?;
            Ok(Sweep { at_mark, at_end })
        }
    }
}

fn richardson<T: Scalar>(coarse: T, fine: T) -> T {
    fine + (fine - coarse) / 15.0
}

fn check_refinement<T: Scalar>(coarse: &State<T>, fine: &State<T>, what: &str) -> Result<()> {
    // compare the end values after removing the common scale
    let ratio = (fine.f / coarse.f) * (fine.log_scale - coarse.log_scale).exp();
    let gap = (ratio - T::one()).norm();
    if !(gap <= RICHARDSON_GAP) {
        return Err(DdError::SolveDiverged(format!(
            "{what}: step refinement changed the solution by {gap:e}"
        )));
    }
    Ok(())
}

/// Outputs of the solution vanishing at the upper barrier z.
#[derive(Debug, Clone, Copy)]
pub(crate) struct DownSolve<T> {
    /// E_mark[e^{−λτ_y}; τ_y < τ_z]; equals 1 when no mark is given.
    pub ell: T,
    /// ∂_w ℓ(y, z; w) at w = y.
    pub lower_slope: T,
    /// −∂_w ℓ(y, z; w) at w = z.
    pub rate: T,
}

/// Outputs of the solution vanishing at the lower barrier y.
#[derive(Debug, Clone, Copy)]
pub(crate) struct UpSolve<T> {
    /// E_mark[e^{−λτ_z}; τ_z < τ_y]; equals 1 when no mark is given.
    pub ell: T,
    /// ∂_w of the up-first transform at w = z.
    pub escape_rate: T,
}

fn down_once<T: Scalar>(
    model: &DiffusionModel,
    y: f64,
    z: f64,
    mark: Option<f64>,
    steps: usize,
    lambda: T,
) -> Result<(DownSolve<T>, State<T>)> {
    let init = State {
        f: T::zero(),
        fp: T::from_real(-1.0),
        log_scale: 0.0,
    };
    let s = sweep(model, z, y, mark, steps, lambda, init)?;
    let end = s.at_end;
    if end.f.norm() == 0.0 {
        return Err(DdError::SolveDiverged(format!(
            "solution vanished at the lower barrier {y}"
        )));
    }
    let ell = match mark {
        None => T::one(),
        Some(_) => s.at_mark.f / end.f * (s.at_mark.log_scale - end.log_scale).exp(),
    };
    let out = DownSolve {
        ell,
        lower_slope: end.fp / end.f,
        rate: T::one() / end.f * (-end.log_scale).exp(),
    };
    Ok((out, end))
}

fn up_once<T: Scalar>(
    model: &DiffusionModel,
    y: f64,
    z: f64,
    mark: Option<f64>,
    steps: usize,
    lambda: T,
) -> Result<(UpSolve<T>, State<T>)> {
    let init = State {
        f: T::zero(),
        fp: T::one(),
        log_scale: 0.0,
    };
    let s = sweep(model, y, z, mark, steps, lambda, init)?;
    let end = s.at_end;
    if end.f.norm() == 0.0 {
        return Err(DdError::SolveDiverged(format!(
            "solution vanished at the upper barrier {z}"
        )));
    }
    let ell = match mark {
        None => T::one(),
        Some(_) => s.at_mark.f / end.f * (s.at_mark.log_scale - end.log_scale).exp(),
    };
    Ok((
        UpSolve {
            ell,
            escape_rate: end.fp / end.f,
        },
        end,
    ))
}

/// Coarse step count: 2048 doubled until |S|·h is small, with S estimated
/// from the coefficients at the ends and the middle of the window.
fn step_count<T: Scalar>(model: &DiffusionModel, y: f64, z: f64, lambda: T) -> Result<usize> {
    let mut s_max: f64 = 0.0;
    for w in [y, 0.5 * (y + z), z] {
        let (k0, k1) = coefficients(model, w)?;
        s_max = s_max.max((k0 * lambda.norm() + 0.25 * k1 * k1).sqrt());
    }
    let mut n = BASE_STEPS;
    while n < MAX_STEPS && s_max * (z - y) / n as f64 > MAX_STEP_SCALE {
        n *= 2;
    }
    Ok(n)
}

/// Solves on [y, z] backwards from z with g(z) = 0, g'(z) = −1.
pub(crate) fn solve_down<T: Scalar>(
    model: &DiffusionModel,
    y: f64,
    z: f64,
    mark: Option<f64>,
    lambda: T,
) -> Result<DownSolve<T>> {
    let n = step_count(model, y, z, lambda)?;
    let (c, ce) = down_once(model, y, z, mark, n, lambda)?;
    let (f, fe) = down_once(model, y, z, mark, 2 * n, lambda)?;
    check_refinement(&ce, &fe, "down-crossing solve")?;
    Ok(DownSolve {
        ell: richardson(c.ell, f.ell),
        lower_slope: richardson(c.lower_slope, f.lower_slope),
        rate: richardson(c.rate, f.rate),
    })
}

/// Solves on [y, z] forwards from y with g(y) = 0, g'(y) = 1.
pub(crate) fn solve_up<T: Scalar>(
    model: &DiffusionModel,
    y: f64,
    z: f64,
    mark: Option<f64>,
    lambda: T,
) -> Result<UpSolve<T>> {
    let n = step_count(model, y, z, lambda)?;
    let (c, ce) = up_once(model, y, z, mark, n, lambda)?;
    let (f, fe) = up_once(model, y, z, mark, 2 * n, lambda)?;
    check_refinement(&ce, &fe, "up-crossing solve")?;
    Ok(UpSolve {
        ell: richardson(c.ell, f.ell),
        escape_rate: richardson(c.escape_rate, f.escape_rate),
    })
}
