//! Drawdown and drawup stopping times of one-dimensional diffusions.
//!
//! The crate computes Laplace transforms, densities and probabilities of the
//! event that a drawdown of size `a` happens before a drawup of size `b`:
//! closed forms for drifted Brownian motion, ODE and quadrature pipelines for
//! general diffusions, numerical Laplace inversion, and a Monte Carlo oracle.

pub mod apps;
pub mod brownian;
pub mod diffusion;
pub mod drawdown;
pub mod error;
pub mod inversion;
pub mod montecarlo;
pub mod quadrature;
pub mod scalar;
pub mod special;

mod shooting;

pub use brownian::{
    bm_J0, bm_laplace_dd_larger, bm_laplace_ddu, bm_laplace_du_larger, bm_laplace_equal, bm_laplace_joint_sup_du,
    density_dd_precedes, density_ddu, density_joint_sup_du, normal_pdf_deriv, s_lambda, t_lambda, BmParams,
    DensitySeriesConfig, SeriesResult,
};
pub use diffusion::{
    hitting_laplace, hitting_laplace_bm, reflect, scale_function, up_first_laplace, CoefficientTable,
    DiffusionModel, HittingQuery, ModelKind, StateInterval,
};
pub use drawdown::{
    h_factor, laplace_dd_larger, laplace_dd_uncond, laplace_ddu, laplace_ddu_complex, laplace_du_larger, laplace_equal,
    precede_probability, DrawQuery, NumericsConfig,
};
pub use error::{DdError, Result};
pub use inversion::{invert, invert_general, TransformEvaluator};
pub use montecarlo::{
    estimate_exponential_censoring, estimate_finite_horizon, estimate_laplace, simulate, verify_range_identity,
    Estimate, Scheme, SimConfig, StoppingEnsemble, StoppingRecord,
};
pub use apps::{
    bm_density, misid_aggregate, misid_deterministic, misid_exponential, price_finite, price_perpetual, prob_horizon,
    relative_to_log, Maturity, PricingSpec, RelativeEventSpec, SignalLife, SignalSpec, StartDensity,
};
