//! Uncertainty propagation through sum-of-product risk models.
//!
//! Inputs are independent random factors described by moments or log-normal
//! parameters. Results are classified against decade bands
//! `[10^-(x+1), 10^-x]` at a stated confidence, and every analytic result can
//! be cross-checked against a seeded Monte Carlo simulation.
//!
//! The numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what model files are parsed into.

// `!(a < b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distributions;
pub mod error;
pub mod montecarlo;
pub mod propagation;
pub mod riskmodel;
pub mod scalar;
pub mod sil;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type MomentPair = distributions::MomentPair<f64>;
pub type LogNormalParams = distributions::LogNormalParams<f64>;
pub type Quantity = distributions::Quantity<f64>;
pub type DistributionSpec = distributions::DistributionSpec<f64>;
pub type RiskModel = riskmodel::RiskModel<f64>;
pub type SilTarget = sil::SilTarget<f64>;
pub type Verdict = sil::Verdict<f64>;
pub type Composition = sil::Composition<f64>;
pub type SimConfig = montecarlo::SimConfig<f64>;
pub type SampleStats = montecarlo::SampleStats<f64>;
pub type DensityCurve = montecarlo::DensityCurve<f64>;

pub type MomentPair32 = distributions::MomentPair<f32>;
pub type LogNormalParams32 = distributions::LogNormalParams<f32>;
pub type RiskModel32 = riskmodel::RiskModel<f32>;

pub use distributions::{
    coverage_factor, gaussian_cdf, gaussian_quantile, lognormal_from_moments, moments_from_lognormal,
};
pub use propagation::{
    op_chain_inflation, product_moments, propagate_lognormal, propagate_moments, sqrt_n_budget,
    sum_moments, ChainSpec, InflationMode,
};
pub use riskmodel::{
    parse_model, serialize_model, sum_of_products, validate_model, Combinator, Diagnostic, RiskExpr,
    Severity, VariableId,
};
pub use sil::{
    band_probability, budget_product_inputs, calibration_max_ops, classify_interval, compose_check,
    CalibrationQuery, ComposeMode, SilBand,
};
pub use montecarlo::{kde, overlay_curves, simulate, CurveId};
