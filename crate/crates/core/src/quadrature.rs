//! Adaptive Gauss–Kronrod (7/15) quadrature over real or complex integrands.

use crate::error::{DdError, Result};
use crate::scalar::Scalar;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdiv: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-9,
            rel_tol: 1e-12,
            max_subdiv: 200,
        }
    }
}

impl QuadOptions {
    pub fn with_abs_tol(abs_tol: f64) -> Self {
        QuadOptions {
            abs_tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: f64,
    pub evaluations: usize,
}

struct Segment<T> {
    lo: f64,
    hi: f64,
    value: T,
    error: f64,
}

fn gk15<T, F>(f: &mut F, lo: f64, hi: f64) -> Result<Segment<T>>
where
    T: Scalar,
    F: FnMut(f64) -> Result<T>,
{
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut res_abs = fc.norm() * WGK[7];
    let mut values = [(T::zero(), T::zero()); 7];
    for (j, v) in values.iter_mut().enumerate() {
        let dx = half * XGK[j];
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        kronrod += (f1 + f2) * WGK[j];
        res_abs += (f1.norm() + f2.norm()) * WGK[j];
        if j % 2 == 1 {
            gauss += (f1 + f2) * WG[j / 2];
        }
        *v = (f1, f2);
    }
    let mean = kronrod * 0.5;
    let mut res_asc = WGK[7] * (fc - mean).norm();
    for (j, (f1, f2)) in values.iter().enumerate() {
        res_asc += WGK[j] * ((*f1 - mean).norm() + (*f2 - mean).norm());
    }
    let abs_half = half.abs();
    res_asc *= abs_half;
    res_abs *= abs_half;
    let mut error = ((kronrod - gauss) * half).norm();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    let floor = 50.0 * f64::EPSILON * res_abs;
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) && floor > error {
        error = floor;
    }
    Ok(Segment {
        lo,
        hi,
        value: kronrod * half,
        error,
    })
}

/// Integrates `f` over [lo, hi] by globally adaptive bisection of the
/// interval with the largest error estimate.
pub fn integrate<T, F>(mut f: F, lo: f64, hi: f64, opts: QuadOptions) -> Result<QuadResult<T>>
where
    T: Scalar,
    F: FnMut(f64) -> Result<T>,
{
    if lo == hi {
        return Ok(QuadResult {
            value: T::zero(),
            error: 0.0,
            evaluations: 0,
        });
    }
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(DdError::InvalidInput(format!(
            "integration limits must be finite, got [{lo}, {hi}]"
        )));
    }
    let mut segments = vec![gk15(&mut f, lo, hi)?];
    let mut evaluations = 15;
    loop {
        let (value, error) = segments
            .iter()
            .fold((T::zero(), 0.0), |(v, e), s| (v + s.value, e + s.error));
        if !value.is_finite() {
            return Err(DdError::QuadratureFailed {
                lo,
                hi,
                error: f64::INFINITY,
                subdivisions: segments.len(),
            });
        }
        let target = opts.abs_tol.max(opts.rel_tol * value.norm());
        if error <= target {
            return Ok(QuadResult {
                value,
                error,
                evaluations,
            });
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.error.total_cmp(&b.1.error))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.lo + seg.hi);
        let too_narrow = (seg.hi - seg.lo).abs() <= 1e3 * f64::EPSILON * (lo.abs().max(hi.abs()).max(1.0));
        if segments.len() + 1 >= opts.max_subdiv || too_narrow {
            return Err(DdError::QuadratureFailed {
                lo,
                hi,
                error,
                subdivisions: segments.len() + 1,
            });
        }
        segments.push(gk15(&mut f, seg.lo, mid)?);
        segments.push(gk15(&mut f, mid, seg.hi)?);
        evaluations += 30;
    }
}

/// Convenience wrapper returning only the value.
pub fn integrate_value<T, F>(f: F, lo: f64, hi: f64, opts: QuadOptions) -> Result<T>
where
    T: Scalar,
    F: FnMut(f64) -> Result<T>,
{
    integrate(f, lo, hi, opts).map(|r| r.value)
}

/// Integrates over [lo, hi] split at the given interior breakpoints.
pub fn integrate_pieces<T, F>(mut f: F, breaks: &[f64], opts: QuadOptions) -> Result<T>
where
    T: Scalar,
    F: FnMut(f64) -> Result<T>,
{
    let mut total = T::zero();
    for w in breaks.windows(2) {
        total += integrate_value(&mut f, w[0], w[1], opts)?;
    }
    Ok(total)
}
