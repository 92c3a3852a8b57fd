//! Closed forms and exact density series for drifted Brownian motion
//! X_t = x + μt + σW_t.

use crate::error::{invalid, DdError, Result};
use crate::quadrature::{integrate_value, QuadOptions};
use crate::scalar::{one_minus_exp_neg_over, Scalar};
use crate::special::{ln_factorial, log_norm_interval, norm_pdf_derivatives, ScaledDerivatives};

/// Drift μ and volatility σ > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BmParams {
    pub mu: f64,
    pub sigma: f64,
}

impl BmParams {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() {
            return invalid(format!("mu must be finite, got {mu}"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return invalid(format!("sigma must be positive and finite, got {sigma}"));
        }
        Ok(BmParams { mu, sigma })
    }

    /// Parameters of −X.
    pub fn negated(&self) -> Self {
        BmParams {
            mu: -self.mu,
            sigma: self.sigma,
        }
    }

    fn kappa(&self) -> f64 {
        self.mu / (self.sigma * self.sigma)
    }
}

/// Truncation controls for the density series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensitySeriesConfig {
    pub term_tol: f64,
    pub max_order: usize,
    pub stabilization: bool,
}

impl Default for DensitySeriesConfig {
    fn default() -> Self {
        DensitySeriesConfig {
            term_tol: 1e-12,
            max_order: 60,
            stabilization: true,
        }
    }
}

impl DensitySeriesConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.term_tol > 0.0 && self.term_tol.is_finite()) {
            return invalid(format!("term_tol must be positive, got {}", self.term_tol));
        }
        if self.max_order < 8 {
            return invalid(format!("max_order must be at least 8, got {}", self.max_order));
        }
        Ok(())
    }
}

/// A series evaluation together with its truncation diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesResult {
    pub value: f64,
    /// Largest m and n that contributed.
    pub terms_used: (usize, usize),
    pub converged: bool,
    /// max |term| / |value|.
    pub condition_estimate: f64,
    /// True when a slightly negative sum was reported as zero.
    pub clamped: bool,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        invalid(format!("lambda must be positive and finite, got {lambda}"))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        invalid(format!("{name} must be positive and finite, got {v}"))
    }
}

/// S_{μ,σ}(λ) = √(2λ/σ² + μ²/σ⁴).
pub fn s_lambda(p: BmParams, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return invalid(format!("lambda must be non-negative, got {lambda}"));
    }
    Ok(s_of(p, lambda))
}

fn s_of<T: Scalar>(p: BmParams, lambda: T) -> T {
    let k = p.kappa();
    (lambda * (2.0 / (p.sigma * p.sigma)) + T::from_real(k * k)).sqrt()
}

/// S − κ and S + κ, each formed without cancellation.
fn s_minus_plus<T: Scalar>(p: BmParams, lambda: T, s: T) -> (T, T) {
    let k = p.kappa();
    let q = lambda * (2.0 / (p.sigma * p.sigma));
    if k >= 0.0 {
        let plus = s + T::from_real(k);
        (q / plus, plus)
    } else {
        let minus = s - T::from_real(k);
        (minus, q / minus)
    }
}

/// −κ − S·coth(bS).
pub(crate) fn t_of<T: Scalar>(p: BmParams, lambda: T, b: f64) -> T {
    let s = s_of(p, lambda);
    let k = T::from_real(p.kappa());
    let w = s * (2.0 * b);
    if w.norm() < 1e-8 {
        return -k - T::from_real(1.0 / b) - w * s / 6.0;
    }
    let e = (-w).exp();
    -k - s * (T::one() + e) / (-(-w).expm1())
}

/// T_{μ,σ}(λ; b) = −μ/σ² − S·coth(bS).
pub fn t_lambda(p: BmParams, lambda: f64, b: f64) -> Result<f64> {
    check_lambda(lambda)?;
    check_positive("b", b)?;
    Ok(t_of(p, lambda, b))
}

pub(crate) fn equal_of<T: Scalar>(p: BmParams, a: f64, lambda: T) -> T {
    let s = s_of(p, lambda);
    if s.norm() == 0.0 {
        return T::from_real(0.5);
    }
    let (sm, sp) = s_minus_plus(p, lambda, s);
    let e2 = (s * (-2.0 * a)).exp();
    let first = (sp * (-a)).exp() * one_minus_exp_neg_over(sm * a);
    let second = e2 * one_minus_exp_neg_over(sp * a);
    let den = (s * (-2.0 * a)).expm1();
    s * (2.0 * a) * (first - second) / (den * den)
}

/// L₀(λ; a) = E_0[e^{−λT_D(a)}; T_D(a) < T_U(a)].
pub fn bm_laplace_equal(p: BmParams, a: f64, lambda: f64) -> Result<f64> {
    check_positive("a", a)?;
    check_lambda(lambda)?;
    Ok(equal_of(p, a, lambda))
}

pub(crate) fn dd_larger_of<T: Scalar>(p: BmParams, a: f64, b: f64, lambda: T) -> T {
    equal_of(p, b, lambda) * (t_of(p, lambda, b) * (a - b)).exp()
}

/// L₀(λ; b)·exp[T(λ; b)(a − b)] for a ≥ b.
pub fn bm_laplace_dd_larger(p: BmParams, a: f64, b: f64, lambda: f64) -> Result<f64> {
    check_positive("a", a)?;
    check_positive("b", b)?;
    check_lambda(lambda)?;
    if a < b {
        return invalid(format!("need a >= b, got a={a}, b={b}"));
    }
    Ok(dd_larger_of(p, a, b, lambda))
}

pub(crate) fn j0_of<T: Scalar>(p: BmParams, a: f64, lambda: T) -> T {
    let s = s_of(p, lambda);
    if s.norm() == 0.0 {
        return T::one();
    }
    let (sm, sp) = s_minus_plus(p, lambda, s);
    let e2 = (s * (-2.0 * a)).exp();
    s * 2.0 * (sp * (-a)).exp() / (sm + sp * e2)
}

/// J₀(λ; a) = E_0[e^{−λT_D(a)}].
#[allow(non_snake_case)]
pub fn bm_J0(p: BmParams, a: f64, lambda: f64) -> Result<f64> {
    check_positive("a", a)?;
    check_lambda(lambda)?;
    Ok(j0_of(p, a, lambda))
}

pub(crate) fn du_larger_of<T: Scalar>(p: BmParams, a: f64, b: f64, lambda: T) -> T {
    let n = p.negated();
    let escape = equal_of(n, a, lambda) * (t_of(n, lambda, a) * (b - a)).exp();
    (T::one() - escape) * j0_of(p, a, lambda)
}

/// [1 − L₀^{−X}(λ; a)·e^{T_{−μ}(λ; a)(b − a)}]·J₀(λ; a) for b ≥ a.
pub fn bm_laplace_du_larger(p: BmParams, a: f64, b: f64, lambda: f64) -> Result<f64> {
    check_positive("a", a)?;
    check_positive("b", b)?;
    check_lambda(lambda)?;
    if b < a {
        return invalid(format!("need b >= a, got a={a}, b={b}"));
    }
    Ok(du_larger_of(p, a, b, lambda))
}

pub(crate) fn ddu_of<T: Scalar>(p: BmParams, a: f64, b: f64, lambda: T) -> T {
    if a >= b {
        dd_larger_of(p, a, b, lambda)
    } else {
        du_larger_of(p, a, b, lambda)
    }
}

/// Any-order dispatch of the closed forms.
pub fn bm_laplace_ddu(p: BmParams, a: f64, b: f64, lambda: f64) -> Result<f64> {
    check_positive("a", a)?;
    check_positive("b", b)?;
    check_lambda(lambda)?;
    Ok(ddu_of(p, a, b, lambda))
}

/// Laplace transform in t of ∂/∂z p(t; a, a + z).
pub(crate) fn joint_sup_du_of<T: Scalar>(p: BmParams, a: f64, z: f64, lambda: T) -> T {
    let n = p.negated();
    let s = s_of(p, lambda);
    let (_, sp) = s_minus_plus(p, lambda, s);
    let tail = if s.norm() * a < 1e-8 {
        T::from_real(1.0 / a)
    } else {
        s * 2.0 * (sp * (-a)).exp() / (-(s * (-2.0 * a)).expm1())
    };
    equal_of(n, a, lambda) * tail * (t_of(n, lambda, a) * z).exp()
}

/// Closed-form transform of the joint density of T_D(a) and the largest
/// drawup a + z seen before it.
pub fn bm_laplace_joint_sup_du(p: BmParams, a: f64, z: f64, lambda: f64) -> Result<f64> {
    check_positive("a", a)?;
    check_lambda(lambda)?;
    if !(z >= 0.0 && z.is_finite()) {
        return invalid(format!("z must be non-negative, got {z}"));
    }
    Ok(joint_sup_du_of(p, a, z, lambda))
}

/// φ^{(k)}(x), the k-th derivative of the standard normal density.
pub fn normal_pdf_deriv(k: usize, x: f64) -> Result<f64> {
    if k > 200 {
        return invalid(format!("derivative order {k} exceeds 200"));
    }
    Ok(crate::special::norm_pdf_deriv(k, x))
}

/// Kahan–Neumaier running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    comp: f64,
    compensate: bool,
}

impl Compensated {
    fn new(compensate: bool) -> Self {
        Compensated {
            compensate,
            ..Default::default()
        }
    }

    fn add(&mut self, v: f64) {
        if !self.compensate {
            self.sum += v;
            return;
        }
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// sign·exp(log) accumulated into a diagonal.
struct Diagonal {
    acc: Compensated,
    abs: f64,
    max_term: f64,
}

impl Diagonal {
    fn new(compensate: bool) -> Self {
        Diagonal {
            acc: Compensated::new(compensate),
            abs: 0.0,
            max_term: 0.0,
        }
    }

    fn push_log(&mut self, sign: f64, log_mag: f64) {
        if sign == 0.0 || log_mag == f64::NEG_INFINITY {
            return;
        }
        let v = sign * log_mag.exp();
        self.acc.add(v);
        self.abs += v.abs();
        self.max_term = self.max_term.max(v.abs());
    }
}

/// k·ln|r| with 0·ln 0 = 0.
fn pow_log(ln_abs: f64, k: usize) -> f64 {
    if k == 0 {
        0.0
    } else {
        k as f64 * ln_abs
    }
}

fn pow_sign(sign: f64, k: usize) -> f64 {
    if k % 2 == 0 {
        1.0
    } else {
        sign
    }
}

fn signum(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Adds Σ_k c_k·r^k·φ^{(top−k)}(x) into the diagonal with a common log factor.
fn push_hermite_block(
    diag: &mut Diagonal,
    block: &ScaledDerivatives,
    top: usize,
    ks: impl Iterator<Item = (usize, f64)>,
    r: f64,
    log_front: f64,
    front_sign: f64,
) {
    let ln_r = r.abs().ln();
    let r_sign = signum(r);
    for (k, c) in ks {
        if c == 0.0 {
            continue;
        }
        let mant = block.mantissa[top - k];
        if mant == 0.0 {
            continue;
        }
        if k > 0 && r == 0.0 {
            continue;
        }
        let sign = front_sign * signum(c) * signum(mant) * pow_sign(r_sign, k);
        let log_mag = log_front + c.abs().ln() + mant.abs().ln() + block.log_scale + pow_log(ln_r, k);
        diag.push_log(sign, log_mag);
    }
}

/// The two Φ-interval pairs that the G blocks reduce to:
/// −sign·e^{κA}P(lo₁, hi₁) and (−1)^m e^{−κA}P(lo₂, hi₂).
struct GPair {
    k_a: f64,
    first: (f64, f64),
    second: (f64, f64),
    first_sign: f64,
}

fn push_g_pair(diag: &mut Diagonal, g: &GPair, m: usize, log_front: f64, front_sign: f64) {
    let (l1, h1) = g.first;
    if h1 > l1 {
        diag.push_log(front_sign * g.first_sign, log_front + g.k_a + log_norm_interval(l1, h1));
    }
    let (l2, h2) = g.second;
    if h2 > l2 {
        diag.push_log(front_sign * pow_sign(-1.0, m), log_front - g.k_a + log_norm_interval(l2, h2));
    }
}

struct SeriesState {
    total: Compensated,
    max_term: f64,
    quiet_run: usize,
    growth_run: usize,
    last_abs: f64,
    m_max: usize,
    n_max: usize,
    diagonals: usize,
}

const MIN_DIAGONALS: usize = 8;
const QUIET_DIAGONALS: usize = 3;
const GROWTH_DIAGONALS: usize = 10;
const CONDITION_LIMIT: f64 = 1e12;

/// Sums `term(m, n, diag)` along anti-diagonals m + n = d until three
/// consecutive diagonals are negligible.
fn sum_series<F>(cfg: &DensitySeriesConfig, only_m0: bool, mut term: F) -> Result<SeriesResult>
where
    F: FnMut(usize, usize, &mut Diagonal),
{
    cfg.validate()?;
    let mut st = SeriesState {
        total: Compensated::new(cfg.stabilization),
        max_term: 0.0,
        quiet_run: 0,
        growth_run: 0,
        last_abs: 0.0,
        m_max: 0,
        n_max: 0,
        diagonals: 0,
    };
    let cap = 2 * cfg.max_order;
    let mut converged = false;
    for d in 0..=cap {
        let mut diag = Diagonal::new(cfg.stabilization);
        let m_top = if only_m0 { 0 } else { d };
        for m in 0..=m_top {
            let n = d - m;
            let before = diag.abs;
            term(m, n, &mut diag);
            if diag.abs > before {
                st.m_max = st.m_max.max(m);
                st.n_max = st.n_max.max(n);
            }
        }
        st.diagonals = d + 1;
        if !diag.abs.is_finite() {
            return Err(DdError::SeriesDiverged {
                diagonals: d + 1,
                reason: "non-finite term".into(),
            });
        }
        st.total.add(diag.acc.value());
        st.max_term = st.max_term.max(diag.max_term);
        let total = st.total.value().abs();
        if diag.abs <= cfg.term_tol * total {
            st.quiet_run += 1;
        } else {
            st.quiet_run = 0;
        }
        if d > 0 && diag.abs > st.last_abs {
            st.growth_run += 1;
        } else {
            st.growth_run = 0;
        }
        st.last_abs = diag.abs;
        if st.quiet_run >= QUIET_DIAGONALS && d + 1 >= MIN_DIAGONALS {
            converged = true;
            break;
        }
        if total == 0.0 && diag.abs == 0.0 && d + 1 >= MIN_DIAGONALS {
            // every term underflowed: the density is zero to working precision
            st.quiet_run += 1;
            if st.quiet_run >= QUIET_DIAGONALS {
                converged = true;
                break;
            }
        }
    }
    if !converged && st.growth_run >= GROWTH_DIAGONALS {
        return Err(DdError::SeriesDiverged {
            diagonals: st.diagonals,
            reason: format!("terms grew for {} consecutive diagonals", st.growth_run),
        });
    }
    let value = st.total.value();
    let condition_estimate = if value != 0.0 {
        st.max_term / value.abs()
    } else if st.max_term == 0.0 {
        1.0
    } else {
        f64::INFINITY
    };
    if condition_estimate > CONDITION_LIMIT {
        converged = false;
    }
    let mut out = SeriesResult {
        value,
        terms_used: (st.m_max, st.n_max),
        converged,
        condition_estimate,
        clamped: false,
    };
    if value < 0.0 {
        if value >= -10.0 * cfg.term_tol {
            out.value = 0.0;
            out.clamped = true;
        } else if converged {
            return Err(DdError::SeriesDiverged {
                diagonals: st.diagonals,
                reason: format!("converged to a negative density {value:e}"),
            });
        }
    }
    Ok(out)
}

/// p(t; a, b)dt = P(T_D(a) ∈ dt, T_U(b) > t) for a ≥ b, by the exact
/// double series in Gaussian derivatives and normal-interval terms.
pub fn density_dd_precedes(p: BmParams, a: f64, b: f64, t: f64, cfg: &DensitySeriesConfig) -> Result<SeriesResult> {
    check_positive("a", a)?;
    check_positive("b", b)?;
    check_positive("t", t)?;
    if a < b {
        return invalid(format!("density_dd_precedes needs a >= b, got a={a}, b={b}"));
    }
    let (mu, sigma) = (p.mu, p.sigma);
    let k = p.kappa();
    let s = sigma * t.sqrt();
    let r = mu * t.sqrt() / sigma;
    let gap = a - b;
    let ln_rho = (2.0 * gap / s).ln();
    let ln_grho = (2.0 * k * gap).abs().ln();
    let g_sign = signum(k);
    let f_front = (2.0 / t).ln() - mu * mu * t / (2.0 * sigma * sigma) - k * gap;
    let g_front = (2.0 * mu * mu / (sigma * sigma)).ln() - k * gap;
    let e_b = -k * b;
    sum_series(cfg, gap == 0.0, |m, n, diag| {
        let log_c = ln_factorial(m + n + 1) - ln_factorial(m + 1) - ln_factorial(m) - ln_factorial(n);
        let big_a = (2 * (m + n) + 1) as f64 * b + a;
        let top = m + 1;
        let front = log_c + pow_log(ln_rho, m) + f_front;
        let d1 = norm_pdf_derivatives(big_a / s, top);
        push_hermite_block(diag, &d1, top, (0..=top / 2).map(|j| (2 * j, 2.0)), r, front, 1.0);
        let d2 = norm_pdf_derivatives((big_a + b) / s, top);
        let ratio = (m + n + 2) as f64 / (n + 1) as f64;
        push_hermite_block(
            diag,
            &d2,
            top,
            (0..=top).map(|j| (j, 1.0 + pow_sign(-1.0, j) * ratio)),
            r,
            front + e_b,
            -1.0,
        );
        if n == 0 {
            let d3 = norm_pdf_derivatives((2 * m) as f64 * b / s + a / s, top);
            push_hermite_block(diag, &d3, top, (0..=top).map(|j| (j, 1.0)), -r, front + e_b, -1.0);
        }
        if mu != 0.0 {
            let g = GPair {
                k_a: k * big_a,
                first: ((big_a + mu * t) / s, (big_a + b + mu * t) / s),
                second: ((big_a - b - mu * t) / s, (big_a - mu * t) / s),
                first_sign: -1.0,
            };
            let front = log_c + pow_log(ln_grho, m) + g_front;
            push_g_pair(diag, &g, m, front, pow_sign(g_sign, m));
        }
    })
}

/// ∂/∂z p(t; a, a + z): the joint density of T_D(a) and the largest drawup
/// a + z reached before it.
pub fn density_joint_sup_du(p: BmParams, a: f64, z: f64, t: f64, cfg: &DensitySeriesConfig) -> Result<SeriesResult> {
    check_positive("a", a)?;
    check_positive("z", z)?;
    check_positive("t", t)?;
    let (mu, sigma) = (p.mu, p.sigma);
    let k = p.kappa();
    let s = sigma * t.sqrt();
    let r = mu * t.sqrt() / sigma;
    let ln_rho = (2.0 * z / s).ln();
    let ln_grho = (2.0 * k * z).abs().ln();
    let g_sign = signum(k);
    let f_front = (4.0 / (sigma * t.powf(1.5))).ln() - mu * mu * t / (2.0 * sigma * sigma) + k * (z - a);
    let g_front = (4.0 * mu.abs().powi(3) / sigma.powi(4)).ln() + k * (z - a);
    let g_outer_sign = -signum(mu);
    let e_a = k * a;
    sum_series(cfg, false, |m, n, diag| {
        let log_c = ln_factorial(m + n + 2) - ln_factorial(m + 2) - ln_factorial(m) - ln_factorial(n);
        let big_a = (2 * (m + n) + 3) as f64 * a + z;
        let top = m + 2;
        let front = log_c + pow_log(ln_rho, m) + f_front;
        let d1 = norm_pdf_derivatives(big_a / s, top);
        push_hermite_block(diag, &d1, top, (0..=top / 2).map(|j| (2 * j, 2.0)), r, front, -1.0);
        let d2 = norm_pdf_derivatives((big_a + a) / s, top);
        let ratio = (m + n + 3) as f64 / (n + 1) as f64;
        push_hermite_block(
            diag,
            &d2,
            top,
            (0..=top).map(|j| (j, pow_sign(-1.0, j) + ratio)),
            r,
            front + e_a,
            1.0,
        );
        if n == 0 {
            let d3 = norm_pdf_derivatives(((2 * m + 2) as f64 * a + z) / s, top);
            push_hermite_block(diag, &d3, top, (0..=top).map(|j| (j, 1.0)), r, front + e_a, 1.0);
        }
        if mu != 0.0 {
            let g = GPair {
                k_a: k * big_a,
                first: ((big_a - a + mu * t) / s, (big_a + mu * t) / s),
                second: ((big_a - mu * t) / s, (big_a + a - mu * t) / s),
                first_sign: 1.0,
            };
            let front = log_c + pow_log(ln_grho, m) + g_front;
            push_g_pair(diag, &g, m, front, g_outer_sign * pow_sign(g_sign, m));
        }
    })
}

fn z_quad_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-11,
        rel_tol: 1e-10,
        max_subdiv: 200,
    }
}

/// Density of T_D(a) on {T_D(a) < T_U(b)} for any a, b > 0.
pub fn density_ddu(p: BmParams, a: f64, b: f64, t: f64, cfg: &DensitySeriesConfig) -> Result<SeriesResult> {
    check_positive("a", a)?;
    check_positive("b", b)?;
    check_positive("t", t)?;
    if a >= b {
        return density_dd_precedes(p, a, b, t, cfg);
    }
    let base = density_dd_precedes(p, a, a, t, cfg)?;
    let mut converged = base.converged;
    let mut clamped = base.clamped;
    let mut cond = base.condition_estimate;
    let mut used = base.terms_used;
    let extra: f64 = integrate_value(
        |z| {
            let r = density_joint_sup_du(p, a, z, t, cfg)?;
            converged &= r.converged;
            clamped |= r.clamped;
            cond = cond.max(r.condition_estimate);
            used = (used.0.max(r.terms_used.0), used.1.max(r.terms_used.1));
            Ok(r.value)
        },
        0.0,
        b - a,
        z_quad_opts(),
    )?;
    Ok(SeriesResult {
        value: base.value + extra,
        terms_used: used,
        converged,
        condition_estimate: cond,
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bm(mu: f64, sigma: f64) -> BmParams {
        BmParams::new(mu, sigma).unwrap()
    }

    #[test]
    fn s_lambda_examples() {
        assert!((s_lambda(bm(0.0, 1.0), 0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((s_lambda(bm(1.0, 1.0), 0.0).unwrap() - 1.0).abs() < 1e-15);
        // 2·3/4 + 4/16
        assert!((s_lambda(bm(2.0, 2.0), 3.0).unwrap() - 1.75f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn t_lambda_examples() {
        let t = t_lambda(bm(0.0, 1.0), 0.5, 1.0).unwrap();
        assert!((t + 1.0 / 1f64.tanh()).abs() < 1e-14);
        for mu in [-2.0, -0.5, 0.0, 0.5, 2.0] {
            for lam in [1e-6, 0.1, 1.0, 10.0] {
                assert!(t_lambda(bm(mu, 0.7), lam, 0.8).unwrap() < 0.0);
            }
        }
    }

    /// Printed a = b formula with μ/σ² in the bracket, evaluated with sinh/cosh.
    fn printed_equal(mu: f64, sigma: f64, a: f64, lam: f64) -> f64 {
        let k = mu / (sigma * sigma);
        let s = (2.0 * lam / (sigma * sigma) + k * k).sqrt();
        let q = 2.0 * lam / (sigma * sigma);
        s / q * ((-k * a).exp() * (s / (a * s).tanh() + k) / (a * s).sinh() - s / (a * s).sinh().powi(2))
    }

    #[test]
    fn stable_forms_match_printed_hyperbolic_forms() {
        for &(mu, sigma, a, lam) in &[(0.5, 1.0, 1.0, 0.5), (-0.3, 0.8, 1.3, 2.0), (0.0, 1.0, 1.0, 0.1)] {
            let p = bm(mu, sigma);
            let got = bm_laplace_equal(p, a, lam).unwrap();
            let exp = printed_equal(mu, sigma, a, lam);
            assert!(((got - exp) / exp).abs() < 1e-12, "{got} {exp}");
            let k = mu / (sigma * sigma);
            let s = (2.0 * lam / (sigma * sigma) + k * k).sqrt();
            let j = s * (-k * a).exp() / (s * (a * s).cosh() - k * (a * s).sinh());
            assert!((bm_J0(p, a, lam).unwrap() - j).abs() < 1e-13);
        }
    }

    #[test]
    fn closed_form_limits() {
        let p = bm(0.0, 1.0);
        assert!((bm_laplace_equal(p, 1.0, 1e-10).unwrap() - 0.5).abs() < 1e-8);
        assert!((bm_J0(p, 1.0, 0.5).unwrap() - 1.0 / 1f64.cosh()).abs() < 1e-14);
        assert!((bm_J0(p, 1.0, 1e-12).unwrap() - 1.0).abs() < 1e-10);
        let q = bm(0.5, 1.0);
        assert_eq!(
            bm_laplace_dd_larger(q, 1.0, 1.0, 0.5).unwrap(),
            bm_laplace_equal(q, 1.0, 0.5).unwrap()
        );
        let far = bm_laplace_du_larger(q, 1.0, 20.0, 0.5).unwrap();
        let j = bm_J0(q, 1.0, 0.5).unwrap();
        assert!(((far - j) / j).abs() < 1e-6);
        let near = bm_laplace_du_larger(q, 1.0, 1.0 + 1e-6, 0.5).unwrap();
        assert!((near - bm_laplace_equal(q, 1.0, 0.5).unwrap()).abs() < 1e-4);
    }

    #[test]
    fn derivative_examples() {
        assert!((normal_pdf_deriv(0, 0.0).unwrap() - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!(normal_pdf_deriv(1, 0.0).unwrap().abs() < 1e-300);
        assert!(normal_pdf_deriv(2, 1.0).unwrap().abs() < 1e-15);
        assert!(normal_pdf_deriv(201, 1.0).is_err());
    }

    #[test]
    fn joint_transform_is_z_derivative() {
        let p = bm(0.3, 1.1);
        let (a, z, lam) = (0.9, 0.4, 0.7);
        let h = 1e-5;
        let fd = (bm_laplace_du_larger(p, a, a + z + h, lam).unwrap() - bm_laplace_du_larger(p, a, a + z - h, lam).unwrap())
            / (2.0 * h);
        let got = bm_laplace_joint_sup_du(p, a, z, lam).unwrap();
        assert!((fd - got).abs() < 1e-8, "{fd} {got}");
    }

    #[test]
    fn series_underflows_to_zero_at_tiny_times() {
        let r = density_dd_precedes(bm(0.5, 1.0), 1.2, 1.0, 1e-4, &DensitySeriesConfig::default()).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.converged);
    }

    #[test]
    fn series_result_is_finite_for_large_drift() {
        let cfg = DensitySeriesConfig::default();
        let r = density_dd_precedes(bm(30.0, 1.0), 1.5, 1.0, 0.5, &cfg).unwrap();
        assert!(r.value.is_finite());
        let r = density_joint_sup_du(bm(-30.0, 1.0), 1.0, 0.5, 0.5, &cfg).unwrap();
        assert!(r.value.is_finite());
    }

    #[test]
    fn rejects_invalid_inputs() {
        let cfg = DensitySeriesConfig::default();
        assert!(density_dd_precedes(bm(0.0, 1.0), 1.0, 1.5, 1.0, &cfg).is_err());
        assert!(density_dd_precedes(bm(0.0, 1.0), 1.0, 1.0, 0.0, &cfg).is_err());
        let bad = DensitySeriesConfig { max_order: 4, ..cfg };
        assert!(density_dd_precedes(bm(0.0, 1.0), 1.0, 1.0, 1.0, &bad).is_err());
        assert!(BmParams::new(0.0, -1.0).is_err());
        assert!(bm_laplace_equal(bm(0.0, 1.0), 1.0, 0.0).is_err());
    }
}
