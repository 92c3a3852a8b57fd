//! Seeded Monte Carlo simulation of drawdown and drawup stopping times.
//!
//! Path `i` draws its Gaussian increments from ChaCha8 stream `i` of the
//! configured seed, so an ensemble does not depend on how paths are
//! scheduled across worker threads.

use std::io::Write;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, StandardNormal};
use rayon::prelude::*;

use crate::diffusion::DiffusionModel;
use crate::error::{invalid, DdError, Result};

/// Seed offset for the exponential lifetimes, kept apart from path streams.
const LIFETIME_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Exact Gaussian increments; constant-coefficient models only.
    ExactBm,
    /// Euler–Maruyama.
    Euler,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::ExactBm => "exact-bm",
            Scheme::Euler => "euler",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub paths: usize,
    pub dt: f64,
    /// Censoring horizon; `None` selects 50·(max(a, b)/σ(x))².
    pub horizon: Option<f64>,
    pub seed: u64,
    pub scheme: Scheme,
    /// Stop each path at the first of the two stopping times instead of
    /// waiting for both; the later one is then censored at that time.
    pub stop_at_first: bool,
    /// Also monitor every `COARSE_FACTOR`-th grid point and let estimators
    /// return 2·fine − coarse, which cancels the √dt monitoring bias.
    pub extrapolate: bool,
}

impl SimConfig {
    /// Exact increments for Brownian motion, Euler otherwise.
    pub fn for_model(model: &DiffusionModel, paths: usize, dt: f64, seed: u64) -> Self {
        let scheme = if model.constant_coefficients().is_some() {
            Scheme::ExactBm
        } else {
            Scheme::Euler
        };
        SimConfig {
            paths,
            dt,
            horizon: None,
            seed,
            scheme,
            stop_at_first: true,
            extrapolate: false,
        }
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = Some(horizon);
        self
    }

    pub fn with_extrapolation(mut self, on: bool) -> Self {
        self.extrapolate = on;
        self
    }

    pub fn with_stop_at_first(mut self, stop: bool) -> Self {
        self.stop_at_first = stop;
        self
    }
}

/// Stopping times of one path. A censored time holds the time up to which
/// the path was observed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingRecord {
    pub t_dd: f64,
    pub t_du: f64,
    pub censored_dd: bool,
    pub censored_du: bool,
    /// Process value at t_dd, or at the end of observation when censored.
    pub x_at_dd: f64,
    /// Largest drawup seen up to t_dd.
    pub sup_du_before_dd: f64,
}

impl StoppingRecord {
    /// Drawdown observed strictly before the drawup.
    pub fn dd_first(&self) -> bool {
        !self.censored_dd && (self.censored_du || self.t_dd < self.t_du)
    }
}

/// Counts over an ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSummary {
    pub paths: usize,
    pub dd_first: usize,
    pub du_first: usize,
    pub undecided: usize,
    pub frequency_dd_first: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone)]
pub struct StoppingEnsemble {
    pub records: Vec<StoppingRecord>,
    /// Records of the same paths on the coarse grid, when extrapolating.
    pub coarse: Option<Vec<StoppingRecord>>,
    pub model: DiffusionModel,
    pub x: f64,
    pub a: f64,
    pub b: f64,
    /// Configuration with the horizon resolved.
    pub config: SimConfig,
    summary: OnceLock<EnsembleSummary>,
}

/// Sample mean with its standard error, plus a warning when the ensemble
/// cannot support the estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub warning: Option<String>,
}

impl Estimate {
    fn from_samples(samples: impl Iterator<Item = f64>) -> Self {
        let mut n = 0usize;
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for v in samples {
            n += 1;
            let d = v - mean;
            mean += d / n as f64;
            m2 += d * (v - mean);
        }
        let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
        Estimate {
            value: mean,
            std_error: (var / n.max(1) as f64).sqrt(),
            warning: None,
        }
    }
}

trait Stepper: Sync {
    fn step(&self, x: f64, z: f64) -> Result<f64>;
}

struct ExactStep {
    drift_dt: f64,
    vol_sqdt: f64,
}

impl Stepper for ExactStep {
    #[inline]
    fn step(&self, x: f64, z: f64) -> Result<f64> {
        Ok(x + self.drift_dt + self.vol_sqdt * z)
    }
}

struct EulerStep<'m> {
    model: &'m DiffusionModel,
    dt: f64,
    sqdt: f64,
}

impl Stepper for EulerStep<'_> {
    #[inline]
    fn step(&self, x: f64, z: f64) -> Result<f64> {
        let mu = self.model.drift(x)?;
        let sigma = self.model.vol(x)?;
        Ok(x + mu * self.dt + sigma * self.sqdt * z)
    }
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// Coarse monitoring factor used by the grid extrapolation.
pub const COARSE_FACTOR: usize = 4;

struct PathSpec {
    x: f64,
    a: f64,
    b: f64,
    dt: f64,
    horizon: f64,
    stop_at_first: bool,
    extrapolate: bool,
}

/// Drawdown and drawup bookkeeping on one monitoring grid.
struct Tracker {
    a: f64,
    b: f64,
    dt: f64,
    x: f64,
    t: f64,
    hi: f64,
    lo: f64,
    dd: f64,
    du: f64,
    sup_du: f64,
    t_dd: Option<(f64, f64)>,
    t_du: Option<f64>,
}

impl Tracker {
    fn new(x: f64, a: f64, b: f64, dt: f64) -> Self {
        Tracker {
            a,
            b,
            dt,
            x,
            t: 0.0,
            hi: x,
            lo: x,
            dd: 0.0,
            du: 0.0,
            sup_du: 0.0,
            t_dd: None,
            t_du: None,
        }
    }

    #[inline]
    fn observe(&mut self, nt: f64, nx: f64) {
        self.hi = self.hi.max(nx);
        self.lo = self.lo.min(nx);
        let ndd = self.hi - nx;
        let ndu = nx - self.lo;
        if self.t_dd.is_none() {
            self.sup_du = self.sup_du.max(ndu);
            if ndd >= self.a {
                let frac = ((self.a - self.dd) / (ndd - self.dd)).clamp(0.0, 1.0);
                self.t_dd = Some((self.t + frac * self.dt, self.x + frac * (nx - self.x)));
            }
        }
        if self.t_du.is_none() && ndu >= self.b {
            let frac = ((self.b - self.du) / (ndu - self.du)).clamp(0.0, 1.0);
            self.t_du = Some(self.t + frac * self.dt);
        }
        self.x = nx;
        self.dd = ndd;
        self.du = ndu;
        self.t = nt;
    }

    fn done(&self, stop_at_first: bool) -> bool {
        match (self.t_dd, self.t_du) {
            (Some(_), Some(_)) => true,
            (Some(_), None) | (None, Some(_)) => stop_at_first,
            (None, None) => false,
        }
    }

    fn record(&self) -> StoppingRecord {
        let (t_dd, x_at_dd, censored_dd) = match self.t_dd {
            Some((td, xd)) => (td, xd, false),
            None => (self.t, self.x, true),
        };
        let (t_du, censored_du) = match self.t_du {
            Some(tu) => (tu, false),
            None => (self.t, true),
        };
        StoppingRecord {
            t_dd,
            t_du,
            censored_dd,
            censored_du,
            x_at_dd,
            sup_du_before_dd: self.sup_du,
        }
    }
}

type PathOutcome = (StoppingRecord, Option<StoppingRecord>);

fn run_path<S: Stepper>(
    stepper: &S,
    model: &DiffusionModel,
    spec: &PathSpec,
    seed: u64,
    path: usize,
) -> Result<PathOutcome> {
    let mut rng = path_rng(seed, path);
    let steps = (spec.horizon / spec.dt).ceil() as usize;
    let interval = model.interval();
    let mut fine = Tracker::new(spec.x, spec.a, spec.b, spec.dt);
    let mut coarse = Tracker::new(spec.x, spec.a, spec.b, spec.dt * COARSE_FACTOR as f64);
    let mut x = spec.x;
    for i in 1..=steps {
        let z: f64 = rng.sample(StandardNormal);
        x = stepper.step(x, z)?;
        let t = i as f64 * spec.dt;
        if !interval.contains(x) {
            return Err(DdError::StateLeftInterval { path, t });
        }
        if !fine.done(spec.stop_at_first) {
            fine.observe(t, x);
        }
        if spec.extrapolate {
            if i % COARSE_FACTOR == 0 && !coarse.done(spec.stop_at_first) {
                coarse.observe(t, x);
            }
            if fine.done(spec.stop_at_first) && coarse.done(spec.stop_at_first) {
                break;
            }
        } else if fine.done(spec.stop_at_first) {
            break;
        }
    }
    Ok((fine.record(), spec.extrapolate.then(|| coarse.record())))
}

fn resolve(model: &DiffusionModel, x: f64, a: f64, b: f64, cfg: &SimConfig) -> Result<SimConfig> {
    if cfg.paths == 0 {
        return invalid("paths must be at least 1");
    }
    if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
        return invalid(format!("dt must be positive, got {}", cfg.dt));
    }
    for (name, v) in [("a", a), ("b", b)] {
        if !(v > 0.0 && v.is_finite()) {
            return invalid(format!("{name} must be positive and finite, got {v}"));
        }
    }
    if !model.interval().contains(x) {
        return invalid(format!("start point {x} is outside the state interval"));
    }
    if cfg.scheme == Scheme::ExactBm && model.constant_coefficients().is_none() {
        return invalid("the exact-bm scheme needs a constant-coefficient model");
    }
    let sigma_ref = model.vol(x)?;
    if sigma_ref * cfg.dt.sqrt() > a.min(b) / 100.0 {
        return invalid(format!(
            "time step too coarse: σ·√dt = {:e} exceeds min(a, b)/100 = {:e}",
            sigma_ref * cfg.dt.sqrt(),
            a.min(b) / 100.0
        ));
    }
    let horizon = match cfg.horizon {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return invalid(format!("horizon must be positive, got {h}")),
        None => 50.0 * (a.max(b) / sigma_ref).powi(2),
    };
    Ok(SimConfig {
        horizon: Some(horizon),
        ..*cfg
    })
}

fn run_all<F>(paths: usize, f: F) -> Result<Vec<PathOutcome>>
where
    F: Fn(usize) -> Result<PathOutcome> + Sync + Send,
{
    (0..paths).into_par_iter().map(f).collect()
}

/// Simulates `cfg.paths` paths from x and records the first drawdown of
/// size a and the first drawup of size b on each.
pub fn simulate(model: &DiffusionModel, x: f64, a: f64, b: f64, cfg: &SimConfig) -> Result<StoppingEnsemble> {
    let cfg = resolve(model, x, a, b, cfg)?;
    let spec = PathSpec {
        x,
        a,
        b,
        dt: cfg.dt,
        horizon: cfg.horizon.unwrap_or_default(),
        stop_at_first: cfg.stop_at_first,
        extrapolate: cfg.extrapolate,
    };
    let outcomes = match (cfg.scheme, model.constant_coefficients()) {
        (Scheme::ExactBm, Some((mu, sigma))) => {
            let stepper = ExactStep {
                drift_dt: mu * cfg.dt,
                vol_sqdt: sigma * cfg.dt.sqrt(),
            };
            run_all(cfg.paths, |i| run_path(&stepper, model, &spec, cfg.seed, i))?
        }
        _ => {
            let stepper = EulerStep {
                model,
                dt: cfg.dt,
                sqdt: cfg.dt.sqrt(),
            };
            run_all(cfg.paths, |i| run_path(&stepper, model, &spec, cfg.seed, i))?
        }
    };
    let (records, coarse): (Vec<_>, Vec<_>) = outcomes.into_iter().unzip();
    Ok(StoppingEnsemble {
        records,
        coarse: cfg.extrapolate.then(|| coarse.into_iter().flatten().collect()),
        model: model.clone(),
        x,
        a,
        b,
        config: cfg,
        summary: OnceLock::new(),
    })
}

impl StoppingEnsemble {
    pub fn horizon(&self) -> f64 {
        self.config.horizon.unwrap_or_default()
    }

    pub fn summary(&self) -> &EnsembleSummary {
        self.summary.get_or_init(|| {
            let paths = self.records.len();
            let dd_first = self.records.iter().filter(|r| r.dd_first()).count();
            let du_first = self
                .records
                .iter()
                .filter(|r| !r.censored_du && (r.censored_dd || r.t_du < r.t_dd))
                .count();
            let p = dd_first as f64 / paths as f64;
            EnsembleSummary {
                paths,
                dd_first,
                du_first,
                undecided: paths - dd_first - du_first,
                frequency_dd_first: p,
                std_error: (p * (1.0 - p) / paths as f64).sqrt(),
            }
        })
    }

    /// The same ensemble with the coarse records dropped, so estimators
    /// report the plain fine-grid statistics.
    pub fn fine_only(&self) -> StoppingEnsemble {
        StoppingEnsemble {
            records: self.records.clone(),
            coarse: None,
            model: self.model.clone(),
            x: self.x,
            a: self.a,
            b: self.b,
            config: SimConfig {
                extrapolate: false,
                ..self.config
            },
            summary: OnceLock::new(),
        }
    }

    /// Mean and standard error of a per-path statistic, extrapolated over
    /// the two grids when coarse records are present.
    pub fn estimate<G: Fn(usize, &StoppingRecord) -> f64>(&self, g: G) -> Estimate {
        match &self.coarse {
            Some(coarse) => Estimate::from_samples(
                self.records
                    .iter()
                    .zip(coarse)
                    .enumerate()
                    .map(|(i, (f, c))| 2.0 * g(i, f) - g(i, c)),
            ),
            None => Estimate::from_samples(self.records.iter().enumerate().map(|(i, r)| g(i, r))),
        }
    }

    /// Writes `path_id,t_dd,t_du,censored_dd,censored_du,x_at_dd,sup_du_before_dd`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "path_id",
            "t_dd",
            "t_du",
            "censored_dd",
            "censored_du",
            "x_at_dd",
            "sup_du_before_dd",
        ])?;
        for (i, r) in self.records.iter().enumerate() {
            w.write_record([
                i.to_string(),
                r.t_dd.to_string(),
                r.t_du.to_string(),
                r.censored_dd.to_string(),
                r.censored_du.to_string(),
                r.x_at_dd.to_string(),
                r.sup_du_before_dd.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mean of e^{−λ t_dd}·1{T_D < T_U}.
pub fn estimate_laplace(e: &StoppingEnsemble, lambda: f64) -> Result<Estimate> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return invalid(format!("lambda must be positive, got {lambda}"));
    }
    let mut est = e.estimate(|_, r| if r.dd_first() { (-lambda * r.t_dd).exp() } else { 0.0 });
    let undecided = e.summary().undecided;
    if (-lambda * e.horizon()).exp() >= 1e-6 && undecided > 0 {
        est.warning = Some(format!(
            "horizon {} leaves e^(-lambda*horizon) = {:e} with {undecided} undecided paths",
            e.horizon(),
            (-lambda * e.horizon()).exp()
        ));
    }
    Ok(est)
}

/// Frequency of {T_D ≤ T, T_D < T_U}.
pub fn estimate_finite_horizon(e: &StoppingEnsemble, t: f64) -> Result<Estimate> {
    if !(t >= 0.0) || t > e.horizon() {
        return invalid(format!("T = {t} must lie in [0, horizon = {}]", e.horizon()));
    }
    Ok(e.estimate(|_, r| if r.dd_first() && r.t_dd <= t { 1.0 } else { 0.0 }))
}

/// Frequency of {T_D < T_U ∧ ζ} with an independent lifetime ζ ~ Exp(rate)
/// per path.
pub fn estimate_exponential_censoring(e: &StoppingEnsemble, rate: f64) -> Result<Estimate> {
    let exp = Exp::new(rate).map_err(|_| DdError::InvalidInput(format!("rate must be positive, got {rate}")))?;
    let lifetimes: Vec<f64> = (0..e.records.len())
        .map(|i| path_rng(e.config.seed ^ LIFETIME_SEED_SALT, i).sample(exp))
        .collect();
    let mut est = e.estimate(|i, r| if r.dd_first() && r.t_dd < lifetimes[i] { 1.0 } else { 0.0 });
    if (-rate * e.horizon()).exp() >= 1e-6 && e.summary().undecided > 0 {
        est.warning = Some("horizon too short for the lifetime rate".into());
    }
    Ok(est)
}

/// Outcome of comparing min(T_D(a), T_U(a)) with the range hitting time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeReport {
    pub paths: usize,
    pub violations: usize,
    pub max_gap: f64,
}

/// First time the discretized range sup X − inf X reaches `a`, recomputed
/// from the path's own random stream.
fn range_hitting_time<S: Stepper>(stepper: &S, x0: f64, a: f64, dt: f64, horizon: f64, seed: u64, path: usize) -> Result<Option<f64>> {
    let mut rng = path_rng(seed, path);
    let steps = (horizon / dt).ceil() as usize;
    let (mut x, mut hi, mut lo) = (x0, x0, x0);
    let mut range = 0.0;
    for i in 1..=steps {
        let z: f64 = rng.sample(StandardNormal);
        x = stepper.step(x, z)?;
        hi = hi.max(x);
        lo = lo.min(x);
        let nr = hi - lo;
        if nr >= a {
            let frac = ((a - range) / (nr - range)).clamp(0.0, 1.0);
            return Ok(Some((i - 1) as f64 * dt + frac * dt));
        }
        range = nr;
    }
    Ok(None)
}

/// Checks pathwise that min(T_D(a), T_U(a)) is the first time the range
/// reaches a, to within one time step.
pub fn verify_range_identity(e: &StoppingEnsemble) -> Result<RangeReport> {
    if e.a != e.b {
        return invalid(format!("range identity needs a = b, got a={}, b={}", e.a, e.b));
    }
    let cfg = e.config;
    let horizon = e.horizon();
    let check = |stepper: &(dyn Fn(usize) -> Result<Option<f64>> + Sync)| -> Result<RangeReport> {
        let gaps: Vec<Option<f64>> = e
            .records
            .par_iter()
            .enumerate()
            .map(|(i, r)| {
                let first = match (r.censored_dd, r.censored_du) {
                    (true, true) => None,
                    (false, true) => Some(r.t_dd),
                    (true, false) => Some(r.t_du),
                    (false, false) => Some(r.t_dd.min(r.t_du)),
                };
                let range = stepper(i)?;
                Ok(match (first, range) {
                    (None, None) => Some(0.0),
                    (Some(f), Some(g)) => Some((f - g).abs()),
                    _ => None,
                })
            })
            .collect::<Result<_>>()?;
        let mut violations = 0;
        let mut max_gap: f64 = 0.0;
        for g in gaps {
            match g {
                Some(d) => {
                    max_gap = max_gap.max(d);
                    if d > cfg.dt * (1.0 + 1e-9) {
                        violations += 1;
                    }
                }
                None => violations += 1,
            }
        }
        Ok(RangeReport {
            paths: e.records.len(),
            violations,
            max_gap,
        })
    };
    match (cfg.scheme, e.model.constant_coefficients()) {
        (Scheme::ExactBm, Some((mu, sigma))) => {
            let s = ExactStep {
                drift_dt: mu * cfg.dt,
                vol_sqdt: sigma * cfg.dt.sqrt(),
            };
            check(&|i| range_hitting_time(&s, e.x, e.a, cfg.dt, horizon, cfg.seed, i))
        }
        _ => {
            let s = EulerStep {
                model: &e.model,
                dt: cfg.dt,
                sqdt: cfg.dt.sqrt(),
            };
            check(&|i| range_hitting_time(&s, e.x, e.a, cfg.dt, horizon, cfg.seed, i))
        }
    }
}

/// X_t on `paths` paths with the configured scheme, for distribution checks.
pub fn sample_terminal(model: &DiffusionModel, x: f64, t: f64, cfg: &SimConfig) -> Result<Vec<f64>> {
    if !(t > 0.0 && t.is_finite()) {
        return invalid(format!("t must be positive, got {t}"));
    }
    if cfg.scheme == Scheme::ExactBm && model.constant_coefficients().is_none() {
        return invalid("the exact-bm scheme needs a constant-coefficient model");
    }
    let steps = (t / cfg.dt).round().max(1.0) as usize;
    let dt = t / steps as f64;
    let walk = |stepper: &(dyn Fn(f64, f64) -> Result<f64> + Sync)| -> Result<Vec<f64>> {
        (0..cfg.paths)
            .into_par_iter()
            .map(|i| {
                let mut rng = path_rng(cfg.seed, i);
                let mut v = x;
                for _ in 0..steps {
                    v = stepper(v, rng.sample(StandardNormal))?;
                }
                Ok(v)
            })
            .collect()
    };
    match (cfg.scheme, model.constant_coefficients()) {
        (Scheme::ExactBm, Some((mu, sigma))) => {
            let s = ExactStep {
                drift_dt: mu * dt,
                vol_sqdt: sigma * dt.sqrt(),
            };
            walk(&|v, z| s.step(v, z))
        }
        _ => {
            let s = EulerStep {
                model,
                dt,
                sqdt: dt.sqrt(),
            };
            walk(&|v, z| s.step(v, z))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bm(mu: f64) -> DiffusionModel {
        DiffusionModel::bm(mu, 1.0).unwrap()
    }

    #[test]
    fn identical_config_gives_identical_ensembles() {
        let m = bm(0.3);
        let cfg = SimConfig::for_model(&m, 200, 6.4e-5, 7);
        let e1 = simulate(&m, 0.0, 1.0, 0.8, &cfg).unwrap();
        let e2 = simulate(&m, 0.0, 1.0, 0.8, &cfg).unwrap();
        assert_eq!(e1.records, e2.records);
        let other = simulate(&m, 0.0, 1.0, 0.8, &SimConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(e1.records, other.records);
    }

    #[test]
    fn huge_barriers_censor_everything() {
        let m = bm(0.0);
        let cfg = SimConfig::for_model(&m, 50, 1e-2, 1).with_horizon(1.0);
        let e = simulate(&m, 0.0, 100.0, 100.0, &cfg).unwrap();
        assert!(e.records.iter().all(|r| r.censored_dd && r.censored_du));
        assert!(e.records.iter().all(|r| (r.t_dd - 1.0).abs() < 1e-12));
        assert_eq!(e.summary().undecided, 50);
    }

    #[test]
    fn records_satisfy_invariants() {
        let m = bm(0.5);
        let cfg = SimConfig::for_model(&m, 300, 1e-4, 3).with_stop_at_first(false);
        let e = simulate(&m, 0.0, 1.0, 1.0, &cfg).unwrap();
        for r in &e.records {
            assert!(r.sup_du_before_dd >= 0.0);
            assert!(r.t_dd <= e.horizon() && r.t_du <= e.horizon());
            if r.dd_first() {
                assert!(r.sup_du_before_dd < 1.0 + 0.05);
            }
        }
    }

    #[test]
    fn range_identity_holds() {
        for m in [bm(0.0), bm(0.5), DiffusionModel::ou(0.0, 1.0, 1.0).unwrap()] {
            let cfg = SimConfig::for_model(&m, 200, 2.5e-5, 42);
            let e = simulate(&m, 0.0, 0.5, 0.5, &cfg).unwrap();
            let rep = verify_range_identity(&e).unwrap();
            assert_eq!(rep.violations, 0, "{m}");
        }
    }

    #[test]
    fn finite_horizon_frequency_is_monotone() {
        let m = bm(0.3);
        let cfg = SimConfig::for_model(&m, 400, 6.4e-5, 5).with_horizon(3.0);
        let e = simulate(&m, 0.0, 1.0, 0.8, &cfg).unwrap();
        let mut last = 0.0;
        for t in [0.0, 0.25, 0.5, 1.0, 2.0, 3.0] {
            let v = estimate_finite_horizon(&e, t).unwrap().value;
            assert!(v >= last);
            last = v;
        }
        assert_eq!(estimate_finite_horizon(&e, 0.0).unwrap().value, 0.0);
        assert!(estimate_finite_horizon(&e, 4.0).is_err());
    }

    #[test]
    fn large_lambda_sends_estimate_to_zero() {
        let m = bm(0.0);
        let cfg = SimConfig::for_model(&m, 100, 1e-4, 9);
        let e = simulate(&m, 0.0, 1.0, 1.0, &cfg).unwrap();
        assert!(estimate_laplace(&e, 1e4).unwrap().value < 1e-12);
    }

    #[test]
    fn longer_horizon_never_lowers_frequency() {
        let m = bm(-0.2);
        let base = SimConfig::for_model(&m, 300, 1e-4, 11).with_horizon(0.5);
        let short = simulate(&m, 0.0, 1.0, 1.0, &base).unwrap();
        let long = simulate(&m, 0.0, 1.0, 1.0, &base.with_horizon(1.0)).unwrap();
        assert!(long.summary().dd_first >= short.summary().dd_first);
    }

    #[test]
    fn enforces_time_step_rule_and_scheme() {
        let m = bm(0.0);
        assert!(simulate(&m, 0.0, 1.0, 1.0, &SimConfig::for_model(&m, 10, 1e-3, 1)).is_err());
        let ou = DiffusionModel::ou(0.0, 1.0, 1.0).unwrap();
        let cfg = SimConfig {
            scheme: Scheme::ExactBm,
            ..SimConfig::for_model(&ou, 10, 1e-4, 1)
        };
        assert!(simulate(&ou, 0.0, 1.0, 1.0, &cfg).is_err());
    }

    #[test]
    fn paths_leaving_the_interval_are_reported() {
        let g = DiffusionModel::gbm(0.0, 2.0).unwrap();
        let cfg = SimConfig::for_model(&g, 100, 0.5, 1).with_horizon(50.0);
        let err = simulate(&g, 0.001, 0.5, 0.5, &cfg).unwrap_err();
        assert!(matches!(err, DdError::StateLeftInterval { .. }));
    }

    #[test]
    fn csv_has_expected_header_and_rows() {
        let m = bm(0.0);
        let cfg = SimConfig::for_model(&m, 5, 2.5e-5, 2);
        let e = simulate(&m, 0.0, 0.5, 0.5, &cfg).unwrap();
        let mut out = Vec::new();
        e.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "path_id,t_dd,t_du,censored_dd,censored_du,x_at_dd,sup_du_before_dd"
        );
        assert_eq!(lines.count(), 5);
    }
}
