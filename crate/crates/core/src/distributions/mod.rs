//! Distribution representations and the moment/log-parameter conversions.

mod gaussian;

pub use gaussian::{
    coverage_factor, coverage_of, erf, erfc, gaussian_cdf, gaussian_pdf, gaussian_quantile,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Mean and standard deviation of a random factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentPair<T> {
    pub mean: T,
    pub sd: T,
}

impl<T: Scalar> MomentPair<T> {
    pub fn new(mean: T, sd: T) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::domain(format!("mean must be finite, got {mean}")));
        }
        if !(sd >= T::zero() && sd.is_finite()) {
            return Err(Error::domain(format!(
                "standard deviation must be finite and non-negative, got {sd}"
            )));
        }
        Ok(Self { mean, sd })
    }

    pub fn point(value: T) -> Self {
        Self {
            mean: value,
            sd: T::zero(),
        }
    }

    pub fn variance(&self) -> T {
        self.sd * self.sd
    }

    /// Coefficient of variation `sd / mean`.
    pub fn relative_sd(&self) -> T {
        self.sd / self.mean
    }

    /// Multiplies mean and standard deviation by a common positive factor.
    pub fn scaled(&self, factor: T) -> Self {
        Self {
            mean: self.mean * factor,
            sd: self.sd * factor.abs(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> MomentPair<U> {
        MomentPair {
            mean: U::c(self.mean.as_f64()),
            sd: U::c(self.sd.as_f64()),
        }
    }
}

/// Location and scale of `ln X` for a log-normal `X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormalParams<T> {
    pub mu_log: T,
    pub sigma_log: T,
}

impl<T: Scalar> LogNormalParams<T> {
    pub fn new(mu_log: T, sigma_log: T) -> Result<Self> {
        if !mu_log.is_finite() {
            return Err(Error::domain(format!("mu_log must be finite, got {mu_log}")));
        }
        if !(sigma_log >= T::zero() && sigma_log.is_finite()) {
            return Err(Error::domain(format!(
                "sigma_log must be finite and non-negative, got {sigma_log}"
            )));
        }
        Ok(Self { mu_log, sigma_log })
    }

    /// Density of `X` at `x`; zero for `x <= 0`.
    pub fn pdf(&self, x: T) -> T {
        if x <= T::zero() || self.sigma_log == T::zero() {
            return T::zero();
        }
        let z = (x.ln() - self.mu_log) / self.sigma_log;
        gaussian_pdf(z) / (x * self.sigma_log)
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: T) -> T {
        if x <= T::zero() {
            return T::zero();
        }
        if self.sigma_log == T::zero() {
            return if x >= self.mu_log.exp() {
                T::one()
            } else {
                T::zero()
            };
        }
        gaussian_cdf((x.ln() - self.mu_log) / self.sigma_log)
    }

    pub fn cast<U: Scalar>(&self) -> LogNormalParams<U> {
        LogNormalParams {
            mu_log: U::c(self.mu_log.as_f64()),
            sigma_log: U::c(self.sigma_log.as_f64()),
        }
    }
}

/// Log-normal parameters with the given mean and standard deviation.
///
/// `sigma_log² = ln(1 + (sd/mean)²)` and `mu_log = ln(mean) - sigma_log²/2`.
pub fn lognormal_from_moments<T: Scalar>(m: MomentPair<T>) -> Result<LogNormalParams<T>> {
    if !(m.mean > T::zero() && m.mean.is_finite()) {
        return Err(Error::domain(format!(
            "log-normal conversion requires a positive mean, got {}",
            m.mean
        )));
    }
    if !(m.sd >= T::zero() && m.sd.is_finite()) {
        return Err(Error::domain(format!(
            "standard deviation must be non-negative, got {}",
            m.sd
        )));
    }
    let cv = m.sd / m.mean;
    let var_log = (cv * cv).ln_1p();
    Ok(LogNormalParams {
        mu_log: m.mean.ln() - var_log / T::c(2.0),
        sigma_log: var_log.sqrt(),
    })
}

/// Mean `exp(mu_log + sigma_log²/2)` and standard deviation
/// `sqrt(exp(2 mu_log + sigma_log²) (exp(sigma_log²) - 1))`.
pub fn moments_from_lognormal<T: Scalar>(p: LogNormalParams<T>) -> MomentPair<T> {
    let var_log = p.sigma_log * p.sigma_log;
    let mean = (p.mu_log + var_log / T::c(2.0)).exp();
    MomentPair {
        mean,
        sd: mean * var_log.exp_m1().sqrt(),
    }
}

/// A real number written as `mantissa · 10^decade`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantity<T> {
    pub mantissa: T,
    pub decade: i32,
}

impl<T: Scalar> Quantity<T> {
    /// Builds a quantity without normalizing it.
    pub fn new(mantissa: T, decade: i32) -> Self {
        Self { mantissa, decade }
    }

    /// Normalized form of `value`: `1 <= |mantissa| < 10`, or `(0, 0)` for zero.
    pub fn from_value(value: T) -> Self {
        Self::new(value, 0).normalize()
    }

    /// Value of `mantissa · 10^decade`, rounded once from the exact decimal.
    pub fn value(&self) -> T {
        let m = self.mantissa.as_f64();
        if !m.is_finite() {
            return self.mantissa;
        }
        // Shortest round-trip digits of the mantissa with the decade appended,
        // so 0.55·10^-1 yields exactly the double nearest to 0.055.
        let exact: f64 = format!("{m:e}")
            .split_once('e')
            .and_then(|(digits, exp)| {
                let exp: i64 = exp.parse().ok()?;
                format!("{digits}e{}", exp + i64::from(self.decade)).parse().ok()
            })
            .unwrap_or(f64::NAN);
        T::c(exact)
    }

    /// Shifts decades between mantissa and exponent until `1 <= |mantissa| < 10`.
    pub fn normalize(&self) -> Self {
        let m = self.mantissa;
        if m == T::zero() || !m.is_finite() {
            return Self::new(m, if m == T::zero() { 0 } else { self.decade });
        }
        let mut shift = m.abs().log10().floor().to_i32().unwrap_or(0);
        let mut mantissa = Self::new(m, -shift).value();
        // log10 can land one decade off near exact powers of ten
        if mantissa.abs() >= T::c(10.0) {
            shift += 1;
            mantissa = Self::new(m, -shift).value();
        } else if mantissa.abs() < T::one() {
            shift -= 1;
            mantissa = Self::new(m, -shift).value();
        }
        Self::new(mantissa, self.decade + shift)
    }
}

/// Distribution attached to a model variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "lowercase")]
pub enum DistributionSpec<T> {
    Normal(MomentPair<T>),
    LogNormal(LogNormalParams<T>),
    #[serde(rename = "point")]
    PointMass { value: T },
}

impl<T: Scalar> DistributionSpec<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            DistributionSpec::Normal(_) => "normal",
            DistributionSpec::LogNormal(_) => "lognormal",
            DistributionSpec::PointMass { .. } => "point",
        }
    }

    /// Mean and standard deviation; point masses have zero spread.
    pub fn moments(&self) -> MomentPair<T> {
        match *self {
            DistributionSpec::Normal(m) => m,
            DistributionSpec::LogNormal(p) => moments_from_lognormal(p),
            DistributionSpec::PointMass { value } => MomentPair::point(value),
        }
    }

    /// Log-normal parameters, converting normal moments and positive point masses.
    pub fn to_lognormal(&self) -> Result<LogNormalParams<T>> {
        match *self {
            DistributionSpec::Normal(m) => lognormal_from_moments(m),
            DistributionSpec::LogNormal(p) => Ok(p),
            DistributionSpec::PointMass { value } if value > T::zero() => Ok(LogNormalParams {
                mu_log: value.ln(),
                sigma_log: T::zero(),
            }),
            DistributionSpec::PointMass { value } => Err(Error::domain(format!(
                "log-normal mode requires positive point values, got {value}"
            ))),
        }
    }

    /// Whether the distribution is a single point (including zero-spread forms).
    pub fn is_degenerate(&self) -> bool {
        match *self {
            DistributionSpec::Normal(m) => m.sd == T::zero(),
            DistributionSpec::LogNormal(p) => p.sigma_log == T::zero(),
            DistributionSpec::PointMass { .. } => true,
        }
    }

    pub fn cast<U: Scalar>(&self) -> DistributionSpec<U> {
        match *self {
            DistributionSpec::Normal(m) => DistributionSpec::Normal(m.cast()),
            DistributionSpec::LogNormal(p) => DistributionSpec::LogNormal(p.cast()),
            DistributionSpec::PointMass { value } => DistributionSpec::PointMass {
                value: U::c(value.as_f64()),
            },
        }
    }
}
