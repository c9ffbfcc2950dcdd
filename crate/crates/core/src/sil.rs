//! Decade-band classification, inverse uncertainty budgets, composition
//! checks and semi-quantitative calibration.
//!
//! A band with exponent `x` is the closed interval `[10^-(x+1), 10^-x]`.
//! Comparisons happen in band-mantissa units (values multiplied by `10^x`,
//! so the band is `[0.1, 1]`) with a tolerance of a few ulps, which keeps
//! tangent cases such as `0.55 ± 3 · 0.15` on the same side of the edge in
//! every decade.

use serde::{Deserialize, Serialize};

use crate::distributions::{coverage_factor, coverage_of, gaussian_cdf, DistributionSpec, LogNormalParams, MomentPair};
use crate::error::{Error, Result};
use crate::propagation::{product_lognormal, product_moments, sum_moments};
use crate::riskmodel::Combinator;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SilBand {
    pub exponent: i32,
}

impl SilBand {
    pub fn new(exponent: i32) -> Self {
        Self { exponent }
    }

    pub fn lower<T: Scalar>(&self) -> T {
        T::pow10(-(self.exponent + 1))
    }

    pub fn upper<T: Scalar>(&self) -> T {
        T::pow10(-self.exponent)
    }

    /// Converts an absolute value into band-mantissa units.
    pub fn to_mantissa<T: Scalar>(&self, value: T) -> T {
        value * T::pow10(self.exponent)
    }
}

/// Band plus the confidence `1 - alpha` and an optional coverage factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SilTarget<T> {
    pub band: SilBand,
    pub confidence: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<T>,
}

impl<T: Scalar> SilTarget<T> {
    pub fn new(band: SilBand, confidence: T, q: Option<T>) -> Result<Self> {
        if !(confidence > T::zero() && confidence < T::one()) {
            return Err(Error::domain(format!("confidence must lie in (0, 1), got {confidence}")));
        }
        if let Some(q) = q {
            if !(q > T::zero() && q.is_finite()) {
                return Err(Error::domain(format!("coverage factor must be positive, got {q}")));
            }
        }
        Ok(Self { band, confidence, q })
    }

    /// Target given only a coverage factor; confidence is its two-sided
    /// Gaussian coverage, which rounds to one for very large `q`.
    pub fn from_q(band: SilBand, q: T) -> Result<Self> {
        if !(q > T::zero() && q.is_finite()) {
            return Err(Error::domain(format!("coverage factor must be positive, got {q}")));
        }
        Ok(Self {
            band,
            confidence: coverage_of(q),
            q: Some(q),
        })
    }

    /// The explicit `q`, or the two-sided Gaussian factor for the confidence.
    pub fn coverage_factor(&self) -> Result<T> {
        match self.q {
            Some(q) => Ok(q),
            None => coverage_factor(self.confidence),
        }
    }

    pub fn cast<U: Scalar>(&self) -> SilTarget<U> {
        SilTarget {
            band: self.band,
            confidence: U::c(self.confidence.as_f64()),
            q: self.q.map(|q| U::c(q.as_f64())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Achieved<T> {
    /// Exact mode: probability mass inside the band.
    AchievedProbability(T),
    /// Coverage mode: `[mean - q sd, mean + q sd]` in absolute units.
    Interval([T; 2]),
}

/// Outcome of a classification.
///
/// `margin` is the signed distance to the nearer band edge in band-mantissa
/// units: of the coverage interval in coverage mode, of the mean in exact mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verdict<T> {
    pub met: bool,
    #[serde(flatten)]
    pub achieved: Achieved<T>,
    pub margin: T,
    pub band_exponent: i32,
    pub q: Option<T>,
    pub confidence: T,
}

impl<T: Scalar> Verdict<T> {
    pub fn achieved_probability(&self) -> Option<T> {
        match self.achieved {
            Achieved::AchievedProbability(p) => Some(p),
            Achieved::Interval(_) => None,
        }
    }

    pub fn interval(&self) -> Option<[T; 2]> {
        match self.achieved {
            Achieved::Interval(i) => Some(i),
            Achieved::AchievedProbability(_) => None,
        }
    }
}

fn snap<T: Scalar>(margin: T) -> T {
    if margin.abs() <= T::edge_tolerance() {
        T::zero()
    } else {
        margin
    }
}

/// Signed distance of the mantissa interval `[lo, hi]` from the band edges.
fn band_margin<T: Scalar>(lo: T, hi: T) -> T {
    snap((lo - T::c(0.1)).min(T::one() - hi))
}

/// Coverage-mode check: is `mean ± q sd` inside the band?
pub fn classify_interval<T: Scalar>(m: MomentPair<T>, t: &SilTarget<T>) -> Result<Verdict<T>> {
    if !(m.sd >= T::zero()) {
        return Err(Error::domain(format!("standard deviation must be non-negative, got {}", m.sd)));
    }
    let q = t.coverage_factor()?;
    let mean = t.band.to_mantissa(m.mean);
    let sd = t.band.to_mantissa(m.sd);
    let margin = band_margin(mean - q * sd, mean + q * sd);
    Ok(Verdict {
        met: margin >= T::zero(),
        achieved: Achieved::Interval([m.mean - q * m.sd, m.mean + q * m.sd]),
        margin,
        band_exponent: t.band.exponent,
        q: Some(q),
        confidence: t.confidence,
    })
}

/// Exact-mode check: probability mass of `d` inside the band.
pub fn band_probability<T: Scalar>(d: &DistributionSpec<T>, t: &SilTarget<T>) -> Result<Verdict<T>> {
    let band = t.band;
    let tol = T::edge_tolerance();
    let point = |v: T| -> T {
        let v = band.to_mantissa(v);
        if v >= T::c(0.1) - tol && v <= T::one() + tol {
            T::one()
        } else {
            T::zero()
        }
    };
    let probability = match *d {
        DistributionSpec::PointMass { value } => point(value),
        DistributionSpec::Normal(m) if m.sd == T::zero() => point(m.mean),
        DistributionSpec::Normal(m) => {
            if !(m.sd > T::zero()) {
                return Err(Error::domain(format!("standard deviation must be non-negative, got {}", m.sd)));
            }
            let mean = band.to_mantissa(m.mean);
            let sd = band.to_mantissa(m.sd);
            gaussian_cdf((T::one() - mean) / sd) - gaussian_cdf((T::c(0.1) - mean) / sd)
        }
        DistributionSpec::LogNormal(p) if p.sigma_log == T::zero() => point(p.mu_log.exp()),
        DistributionSpec::LogNormal(LogNormalParams { mu_log, sigma_log }) => {
            let ln10 = T::LN_10();
            let x = T::c(f64::from(band.exponent));
            let ln_upper = -x * ln10;
            let ln_lower = -(x + T::one()) * ln10;
            gaussian_cdf((ln_upper - mu_log) / sigma_log) - gaussian_cdf((ln_lower - mu_log) / sigma_log)
        }
    };
    let probability = probability.max(T::zero()).min(T::one());
    let mean = band.to_mantissa(d.moments().mean);
    Ok(Verdict {
        met: probability >= t.confidence - tol,
        achieved: Achieved::AchievedProbability(probability),
        margin: band_margin(mean, mean),
        band_exponent: band.exponent,
        q: t.coverage_factor().ok(),
        confidence: t.confidence,
    })
}

/// Largest common input standard deviation `sd_x = sd_y` for which the
/// product of two independent factors keeps its standard deviation at
/// `target_sd`.
///
/// Solves `s² + (mu_x² + mu_y²) s - target_sd² = 0` for `s = sd_x²` using
/// the cancellation-free form of the positive root.
pub fn budget_product_inputs<T: Scalar>(target_sd: T, mu_x: T, mu_y: T) -> Result<T> {
    for (name, v) in [("target sd", target_sd), ("mu_x", mu_x), ("mu_y", mu_y)] {
        if !(v >= T::zero() && v.is_finite()) {
            return Err(Error::domain(format!("{name} must be finite and non-negative, got {v}")));
        }
    }
    if target_sd == T::zero() {
        return Ok(T::zero());
    }
    let s = mu_x * mu_x + mu_y * mu_y;
    let z2 = target_sd * target_sd;
    let disc = (s * s + T::c(4.0) * z2).sqrt();
    Ok((T::c(2.0) * z2 / (s + disc)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComposeMode {
    /// Combine moments and check `mean ± q sd`.
    Coverage,
    /// Combine log-normal parameters and compute the band probability.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComposeStep<T> {
    pub label: String,
    pub component: MomentPair<T>,
    /// Moments of the combination of this and all previous components.
    pub combined: MomentPair<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Composition<T> {
    pub combinator: Combinator,
    pub mode: ComposeMode,
    pub steps: Vec<ComposeStep<T>>,
    pub combined: MomentPair<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub combined_lognormal: Option<LogNormalParams<T>>,
    pub verdict: Verdict<T>,
}

/// Combines component distributions and classifies the result.
///
/// The combinator is always explicit; whether a logical AND maps to a sum
/// or a product depends on what the components measure.
pub fn compose_check<T: Scalar>(
    components: &[(String, DistributionSpec<T>)],
    combinator: Combinator,
    t: &SilTarget<T>,
    mode: ComposeMode,
) -> Result<Composition<T>> {
    if components.len() < 2 {
        return Err(Error::domain("composition needs at least two components"));
    }
    if mode == ComposeMode::Exact && combinator == Combinator::Sum {
        return Err(Error::Unsupported {
            path: "/combinator".into(),
            message: "exact composition is only available for products".into(),
        });
    }
    let combine = |pairs: &[MomentPair<T>]| match combinator {
        Combinator::Sum => sum_moments(pairs),
        Combinator::Product => product_moments(pairs),
    };
    let moments: Vec<MomentPair<T>> = components.iter().map(|(_, d)| d.moments()).collect();
    let mut steps = Vec::with_capacity(components.len());
    for (i, (label, _)) in components.iter().enumerate() {
        steps.push(ComposeStep {
            label: label.clone(),
            component: moments[i],
            combined: combine(&moments[..=i])?,
        });
    }
    let combined = combine(&moments)?;
    let (verdict, combined_lognormal) = match mode {
        ComposeMode::Coverage => (classify_interval(combined, t)?, None),
        ComposeMode::Exact => {
            let dists: Vec<DistributionSpec<T>> = components.iter().map(|(_, d)| *d).collect();
            let p = product_lognormal(&dists)?;
            (band_probability(&DistributionSpec::LogNormal(p), t)?, Some(p))
        }
    };
    Ok(Composition {
        combinator,
        mode,
        steps,
        combined,
        combined_lognormal,
        verdict,
    })
}

/// Class widths of a semi-quantitative scheme: inputs vs results.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationQuery<T> {
    pub input_class_factor: T,
    pub output_class_factor: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Calibration<T> {
    /// Admissible growth factor of the standard deviation.
    pub allowed_inflation: T,
    /// Largest number of operations whose exact inflation stays admissible.
    pub max_operations: u32,
}

/// Number of operations a scheme with the given class widths can absorb.
///
/// The admissible inflation is the ratio of the class widths on a log
/// scale; `k` operations inflate by `sqrt(k + 1)`.
pub fn calibration_max_ops<T: Scalar>(c: CalibrationQuery<T>) -> Result<Calibration<T>> {
    for (name, f) in [("input", c.input_class_factor), ("output", c.output_class_factor)] {
        if !(f > T::one() && f.is_finite()) {
            return Err(Error::domain(format!("{name} class factor must exceed 1, got {f}")));
        }
    }
    let allowed = c.output_class_factor.ln() / c.input_class_factor.ln();
    let bound = allowed * allowed * (T::one() + T::edge_tolerance()) - T::one();
    let max_operations = bound.floor().max(T::zero()).to_u32().unwrap_or(u32::MAX);
    Ok(Calibration {
        allowed_inflation: allowed,
        max_operations,
    })
}
