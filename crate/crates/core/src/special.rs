//! Gaussian special functions evaluated without overflow.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

/// Standard normal distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// log of the upper tail Q(x) = 1 − Φ(x).
///
/// Beyond x = 8 the Mills-ratio asymptotic series is used so the result stays
/// finite for arguments where erfc underflows.
pub fn log_norm_sf(x: f64) -> f64 {
    if x <= 8.0 {
        return (0.5 * libm::erfc(x * FRAC_1_SQRT_2)).ln();
    }
    let inv2 = 1.0 / (x * x);
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        let next = -term * (2.0 * k - 1.0) * inv2;
        if next.abs() >= term.abs() || next.abs() < 1e-17 {
            break;
        }
        sum += next;
        term = next;
        k += 1.0;
    }
    -0.5 * x * x - LN_SQRT_2PI - x.ln() + sum.ln()
}

/// log Φ(x).
pub fn log_norm_cdf(x: f64) -> f64 {
    log_norm_sf(-x)
}

/// log(Φ(hi) − Φ(lo)) for lo < hi, accurate in both tails.
pub fn log_norm_interval(lo: f64, hi: f64) -> f64 {
    debug_assert!(lo <= hi);
    if lo == hi {
        return f64::NEG_INFINITY;
    }
    if lo >= 0.0 {
        let a = log_norm_sf(lo);
        let b = log_norm_sf(hi);
        a + (-(b - a).exp()).ln_1p()
    } else if hi <= 0.0 {
        let a = log_norm_cdf(hi);
        let b = log_norm_cdf(lo);
        a + (-(b - a).exp()).ln_1p()
    } else {
        (1.0 - norm_cdf(lo) - 0.5 * libm::erfc(hi * FRAC_1_SQRT_2)).ln()
    }
}

/// Derivatives φ^{(k)}(x), k = 0..=order, sharing one exponent:
/// φ^{(k)}(x) = mantissa[k] · exp(log_scale).
#[derive(Debug, Clone)]
pub struct ScaledDerivatives {
    pub mantissa: Vec<f64>,
    pub log_scale: f64,
}

impl ScaledDerivatives {
    pub fn value(&self, k: usize) -> f64 {
        self.mantissa[k] * self.log_scale.exp()
    }
}

/// φ^{(k)}(x) = (−1)^k He_k(x) φ(x) via the probabilists' Hermite recurrence,
/// rescaled on the fly so large orders and arguments never overflow.
pub fn norm_pdf_derivatives(x: f64, order: usize) -> ScaledDerivatives {
    let mut he = Vec::with_capacity(order + 1);
    let mut log_scale = -0.5 * x * x - LN_SQRT_2PI;
    he.push(1.0);
    if order >= 1 {
        he.push(x);
    }
    for k in 1..order {
        let next = x * he[k] - k as f64 * he[k - 1];
        he.push(next);
        if next.abs() > 1e200 {
            for v in he.iter_mut() {
                *v *= 1e-200;
            }
            log_scale += 200.0 * std::f64::consts::LN_10;
        }
    }
    for (k, v) in he.iter_mut().enumerate() {
        if k % 2 == 1 {
            *v = -*v;
        }
    }
    ScaledDerivatives {
        mantissa: he,
        log_scale,
    }
}

/// φ^{(k)}(x) as a plain number.
pub fn norm_pdf_deriv(k: usize, x: f64) -> f64 {
    norm_pdf_derivatives(x, k).value(k)
}

const LN_FACTORIAL_LEN: usize = 512;

/// ln(n!) from a cached table.
pub fn ln_factorial(n: usize) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACTORIAL_LEN);
        let mut acc = 0.0;
        t.push(0.0);
        for i in 1..LN_FACTORIAL_LEN {
            acc += (i as f64).ln();
            t.push(acc);
        }
        t
    });
    if n < LN_FACTORIAL_LEN {
        table[n]
    } else {
        libm::lgamma(n as f64 + 1.0)
    }
}

/// Nodes and weights of the n-point Gauss–Legendre rule on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// P_n(x) and P_n'(x).
pub fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
