//! Analytic propagation of moments and log-normal parameters through sums
//! and products of independent factors.
//!
//! Moment propagation is exact for independent operands of any family with
//! finite second moments: means add (sums) or multiply (products), variances
//! add for sums, and for a product `E[Z²] = Π E[X_i²]`.

use num_traits::Num;
use serde::{Deserialize, Serialize};

use crate::distributions::{DistributionSpec, LogNormalParams, MomentPair};
use crate::error::{Error, Result};
use crate::riskmodel::{RiskExpr, RiskModel};
use crate::scalar::Scalar;

/// Mean and variance of a sum of independent `(mean, variance)` terms.
///
/// Generic over any number type, so exact rationals work as well as floats.
pub fn sum_mean_variance<T: Num + Clone>(terms: &[(T, T)]) -> Option<(T, T)> {
    let (first, rest) = terms.split_first()?;
    Some(rest.iter().fold(first.clone(), |(m, v), (tm, tv)| {
        (m + tm.clone(), v + tv.clone())
    }))
}

/// Mean and variance of a product of independent `(mean, variance)` factors.
///
/// Left fold of the two-factor rule
/// `var(XY) = var X · var Y + mean X² · var Y + mean Y² · var X`.
pub fn product_mean_variance<T: Num + Clone>(factors: &[(T, T)]) -> Option<(T, T)> {
    let (first, rest) = factors.split_first()?;
    Some(rest.iter().fold(first.clone(), |(m, v), (fm, fv)| {
        let var = v.clone() * fv.clone()
            + m.clone() * m.clone() * fv.clone()
            + fm.clone() * fm.clone() * v;
        (m * fm.clone(), var)
    }))
}

fn to_mean_var<T: Scalar>(pairs: &[MomentPair<T>]) -> Vec<(T, T)> {
    pairs.iter().map(|p| (p.mean, p.variance())).collect()
}

fn from_mean_var<T: Scalar>((mean, var): (T, T)) -> MomentPair<T> {
    MomentPair {
        mean,
        sd: var.max(T::zero()).sqrt(),
    }
}

/// Moments of a sum of independent terms: means add, variances add.
pub fn sum_moments<T: Scalar>(terms: &[MomentPair<T>]) -> Result<MomentPair<T>> {
    sum_mean_variance(&to_mean_var(terms))
        .map(from_mean_var)
        .ok_or_else(|| Error::domain("sum of an empty list of terms"))
}

/// Moments of a product of independent factors.
pub fn product_moments<T: Scalar>(factors: &[MomentPair<T>]) -> Result<MomentPair<T>> {
    product_mean_variance(&to_mean_var(factors))
        .map(from_mean_var)
        .ok_or_else(|| Error::domain("product of an empty list of factors"))
}

/// Mean and standard deviation of the model output.
pub fn propagate_moments<T: Scalar>(m: &RiskModel<T>) -> Result<MomentPair<T>> {
    m.ensure_valid()?;
    expr_moments(&m.expression, m)
}

fn expr_moments<T: Scalar>(e: &RiskExpr, m: &RiskModel<T>) -> Result<MomentPair<T>> {
    match e {
        RiskExpr::Leaf(id) => Ok(m.variables[id].moments()),
        RiskExpr::Sum(c) => sum_moments(&children_moments(c, m)?),
        RiskExpr::Product(c) => product_moments(&children_moments(c, m)?),
    }
}

fn children_moments<T: Scalar>(c: &[RiskExpr], m: &RiskModel<T>) -> Result<Vec<MomentPair<T>>> {
    c.iter().map(|child| expr_moments(child, m)).collect()
}

/// Log-normal parameters of a pure product: locations add, squared scales add.
///
/// Normal factors are converted by moment matching, positive point masses
/// contribute `(ln value, 0)`. Sums with two or more operands have no
/// closed form and are refused; single-operand sums are transparent.
pub fn propagate_lognormal<T: Scalar>(m: &RiskModel<T>) -> Result<LogNormalParams<T>> {
    m.ensure_valid()?;
    let mut mu = T::zero();
    let mut var = T::zero();
    collect_lognormal(&m.expression, "/expression", m, &mut mu, &mut var)?;
    Ok(LogNormalParams {
        mu_log: mu,
        sigma_log: var.sqrt(),
    })
}

fn collect_lognormal<T: Scalar>(
    e: &RiskExpr,
    path: &str,
    m: &RiskModel<T>,
    mu: &mut T,
    var: &mut T,
) -> Result<()> {
    match e {
        RiskExpr::Leaf(id) => {
            let p = m.variables[id]
                .to_lognormal()
                .map_err(|e| Error::domain(format!("variable `{id}` at {path}: {e}")))?;
            *mu = *mu + p.mu_log;
            *var = *var + p.sigma_log * p.sigma_log;
            Ok(())
        }
        RiskExpr::Sum(c) if c.len() == 1 => collect_lognormal(&c[0], &format!("{path}/sum/0"), m, mu, var),
        RiskExpr::Sum(_) => Err(Error::Unsupported {
            path: format!("{path}/sum"),
            message: "sums of log-normal variables have no closed form; use normal mode".into(),
        }),
        RiskExpr::Product(c) => c.iter().enumerate().try_for_each(|(i, child)| {
            collect_lognormal(child, &format!("{path}/product/{i}"), m, mu, var)
        }),
    }
}

/// Log-normal parameters of a product of independent components.
pub fn product_lognormal<T: Scalar>(factors: &[DistributionSpec<T>]) -> Result<LogNormalParams<T>> {
    if factors.is_empty() {
        return Err(Error::domain("product of an empty list of factors"));
    }
    let mut mu = T::zero();
    let mut var = T::zero();
    for f in factors {
        let p = f.to_lognormal()?;
        mu = mu + p.mu_log;
        var = var + p.sigma_log * p.sigma_log;
    }
    Ok(LogNormalParams {
        mu_log: mu,
        sigma_log: var.sqrt(),
    })
}

/// Per-contributor standard deviation that keeps a sum of `n` equal
/// contributors at `target_sd`.
pub fn sqrt_n_budget<T: Scalar>(n: usize, target_sd: T) -> Result<T> {
    if n < 1 {
        return Err(Error::domain("contributor count must be at least 1"));
    }
    if !(target_sd >= T::zero()) {
        return Err(Error::domain(format!("target sd must be non-negative, got {target_sd}")));
    }
    Ok(target_sd / T::from_count(n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InflationMode {
    /// `sqrt(k + 1) - 1`: k operations on k + 1 equally uncertain operands.
    Exact,
    /// 50 % for the first operation, 30 % more for each further one.
    RuleOfThumb,
}

/// Relative increase of the standard deviation after `k` operations.
pub fn op_chain_inflation<T: Scalar>(k: u32, mode: InflationMode) -> T {
    if k == 0 {
        return T::zero();
    }
    let k = T::c(f64::from(k));
    match mode {
        InflationMode::Exact => (k + T::one()).sqrt() - T::one(),
        InflationMode::RuleOfThumb => T::c(0.5) + T::c(0.3) * (k - T::one()),
    }
}

/// Shape of an operation chain: `n` summed contributors, `k` multiplications.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub n: usize,
    pub k: u32,
}

impl ChainSpec {
    pub fn new(n: usize, k: u32) -> Result<Self> {
        if n < 1 {
            return Err(Error::domain("contributor count must be at least 1"));
        }
        Ok(Self { n, k })
    }

    /// Factor by which each contributor must be more certain than the sum.
    pub fn contributor_factor<T: Scalar>(&self) -> T {
        T::from_count(self.n).sqrt()
    }

    pub fn inflation<T: Scalar>(&self, mode: InflationMode) -> T {
        op_chain_inflation(self.k, mode)
    }
}

/// Ratio of relative standard deviations `(sd_out/mean_out) / (sd_in/mean_in)`.
pub fn relative_sd_ratio<T: Scalar>(output: MomentPair<T>, input: MomentPair<T>) -> T {
    output.relative_sd() / input.relative_sd()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::riskmodel::RiskModel;
    use proptest::prelude::*;

    fn mp(mean: f64, sd: f64) -> MomentPair<f64> {
        MomentPair { mean, sd }
    }

    fn normal(mean: f64, sd: f64) -> DistributionSpec<f64> {
        DistributionSpec::Normal(mp(mean, sd))
    }

    fn rel(a: f64, b: f64) -> f64 {
        if b == 0.0 {
            a.abs()
        } else {
            ((a - b) / b).abs()
        }
    }

    /// Brute force: var = Π(μ²+σ²) − Πμ².
    fn brute_product(f: &[MomentPair<f64>]) -> (f64, f64) {
        let m: f64 = f.iter().map(|p| p.mean).product();
        let e2: f64 = f.iter().map(|p| p.mean * p.mean + p.sd * p.sd).product();
        (m, e2 - m * m)
    }

    #[test]
    fn sum_examples() {
        let s = sum_moments(&[mp(1.0, 0.1), mp(2.0, 0.2)]).unwrap();
        assert_eq!(s.mean, 3.0);
        assert!((s.sd - 0.05_f64.sqrt()).abs() < 1e-15);
        assert_eq!(sum_moments(&[mp(1.5, 0.25)]).unwrap(), mp(1.5, 0.25));
        assert!(sum_moments::<f64>(&[]).is_err());
    }

    #[test]
    fn ten_equal_contributors_need_root_ten_tighter_terms() {
        let sigma = 0.15;
        let per = sqrt_n_budget(10, sigma).unwrap();
        assert!((sigma / per - 10f64.sqrt()).abs() < 1e-12);
        assert!((sigma / per - 3.16).abs() < 0.01);
        let s = sum_moments(&[mp(1.0, per); 10]).unwrap();
        assert!(rel(s.sd, sigma) < 1e-14);
        assert_eq!(sqrt_n_budget(1, sigma).unwrap(), sigma);
        assert!(rel(sqrt_n_budget(100, sigma).unwrap(), sigma / 10.0) < 1e-15);
        assert!(sqrt_n_budget(0, sigma).is_err());
    }

    #[test]
    fn product_of_hazard_rate_and_reduction_factor() {
        let z = product_moments(&[mp(0.55, 0.15), mp(1.0, 0.3)]).unwrap();
        assert_eq!(z.mean, 0.55);
        assert!((z.sd - 0.2275).abs() < 1e-4, "{z:?}");
        let increase = z.relative_sd() / (0.15 / 0.55) - 1.0;
        assert!((0.45..=0.55).contains(&increase), "{increase}");
    }

    #[test]
    fn product_of_point_masses() {
        let z = product_moments(&[mp(2.0, 0.0), mp(3.5, 0.0)]).unwrap();
        assert_eq!(z, mp(7.0, 0.0));
    }

    #[test]
    fn three_factor_halving_product() {
        let f = [mp(0.55, 0.15), mp(3.1623, 1.0), mp(1.0, 0.31623)];
        let z = product_moments(&f).unwrap();
        let (bm, bv) = brute_product(&f);
        assert!((z.mean - 1.7393).abs() < 5e-4);
        assert!((z.sd - 0.9526).abs() < 5e-4);
        assert!(rel(z.mean, bm) < 1e-14 && rel(z.variance(), bv) < 1e-12);
    }

    #[test]
    fn model_propagation_examples() {
        let m = RiskModel::from_parts(
            [
                ("A", normal(1.0, 0.1)),
                ("B", normal(2.0, 0.2)),
                ("C", normal(3.0, 0.3)),
                ("D", normal(4.0, 0.4)),
            ],
            RiskExpr::Sum(vec![
                RiskExpr::product_of(&["A", "B"]).unwrap(),
                RiskExpr::product_of(&["C", "D"]).unwrap(),
            ]),
        )
        .unwrap();
        let z = propagate_moments(&m).unwrap();
        assert!(rel(z.mean, 14.0) < 1e-15);
        assert!(rel(z.variance(), 2.9748) < 1e-12);
        assert!((z.sd - 1.7248).abs() < 1e-4);
        assert!(matches!(propagate_lognormal(&m), Err(Error::Unsupported { .. })));

        let single = RiskModel::from_parts([("A", normal(1.0, 0.1))], RiskExpr::leaf("A").unwrap()).unwrap();
        assert_eq!(propagate_moments(&single).unwrap(), mp(1.0, 0.1));
    }

    #[test]
    fn decades_factor_out_of_products() {
        for (x, y) in [(0, 0), (1, 2), (4, 3), (8, 5)] {
            let sx = 10f64.powi(-x);
            let sy = 10f64.powi(-y);
            let m = RiskModel::from_parts(
                [("X", normal(0.55 * sx, 0.15 * sx)), ("Y", normal(sy, 0.3 * sy))],
                RiskExpr::product_of(&["X", "Y"]).unwrap(),
            )
            .unwrap();
            let z = propagate_moments(&m).unwrap().scaled(1.0 / (sx * sy));
            assert!(rel(z.mean, 0.55) < 1e-12);
            assert!((z.sd - 0.2275).abs() < 1e-4);
        }
    }

    #[test]
    fn lognormal_product_examples() {
        let m = RiskModel::from_parts(
            [("X", normal(0.55, 0.15)), ("Y", normal(1.0, 0.3))],
            RiskExpr::product_of(&["X", "Y"]).unwrap(),
        )
        .unwrap();
        let p = propagate_lognormal(&m).unwrap();
        assert!((p.mu_log - -0.6768).abs() < 5e-4);
        assert!((p.sigma_log - 0.3974).abs() < 5e-4);

        let single = RiskModel::from_parts(
            [("A", DistributionSpec::LogNormal(LogNormalParams { mu_log: -2.0, sigma_log: 0.4 }))],
            RiskExpr::leaf("A").unwrap(),
        )
        .unwrap();
        let p = propagate_lognormal(&single).unwrap();
        assert_eq!((p.mu_log, p.sigma_log), (-2.0, 0.4));

        let ln = |s: f64| DistributionSpec::LogNormal(LogNormalParams { mu_log: 0.0, sigma_log: s });
        let three = RiskModel::from_parts(
            [("A", ln(0.2679)), ("B", ln(0.2936)), ("C", ln(0.1))],
            RiskExpr::product_of(&["A", "B", "C"]).unwrap(),
        )
        .unwrap();
        let p = propagate_lognormal(&three).unwrap();
        assert!((p.sigma_log - 0.40985).abs() < 5e-5, "{p:?}");
    }

    #[test]
    fn lognormal_mode_rejects_non_positive_factors() {
        let m = RiskModel::from_parts(
            [("X", normal(-0.5, 0.15)), ("Y", normal(1.0, 0.3))],
            RiskExpr::product_of(&["X", "Y"]).unwrap(),
        )
        .unwrap();
        assert!(matches!(propagate_lognormal(&m), Err(Error::Domain(_))));
    }

    #[test]
    fn unsupported_sum_names_its_path() {
        let m = RiskModel::from_parts(
            [("A", normal(1.0, 0.1)), ("B", normal(1.0, 0.1)), ("C", normal(1.0, 0.1))],
            RiskExpr::Product(vec![RiskExpr::leaf("A").unwrap(), RiskExpr::sum_of(&["B", "C"]).unwrap()]),
        )
        .unwrap();
        match propagate_lognormal(&m) {
            Err(Error::Unsupported { path, .. }) => assert_eq!(path, "/expression/product/1/sum"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn inflation_sequence() {
        let exact: Vec<f64> = (1..=3).map(|k| op_chain_inflation(k, InflationMode::Exact)).collect();
        assert!((exact[0] - 0.4142).abs() < 5e-5);
        assert!((exact[1] - 0.7321).abs() < 5e-5);
        assert!((exact[2] - 1.0).abs() < 1e-15);
        assert_eq!(op_chain_inflation::<f64>(0, InflationMode::Exact), 0.0);
        assert_eq!(op_chain_inflation::<f64>(0, InflationMode::RuleOfThumb), 0.0);
        assert!((op_chain_inflation::<f64>(1, InflationMode::RuleOfThumb) - 0.5).abs() < 1e-15);
        assert!((op_chain_inflation::<f64>(3, InflationMode::RuleOfThumb) - 1.1).abs() < 1e-15);
        let chain = ChainSpec::new(10, 2).unwrap();
        assert!((chain.contributor_factor::<f64>() - 10f64.sqrt()).abs() < 1e-15);
        assert!(ChainSpec::new(0, 1).is_err());
    }

    #[test]
    fn zero_uncertainty_collapses_to_arithmetic() {
        let m = RiskModel::from_parts(
            [
                ("A", normal(2.0, 0.0)),
                ("B", DistributionSpec::PointMass { value: 3.0 }),
                ("C", normal(0.5, 0.0)),
            ],
            RiskExpr::Sum(vec![RiskExpr::product_of(&["A", "B"]).unwrap(), RiskExpr::leaf("C").unwrap()]),
        )
        .unwrap();
        assert_eq!(propagate_moments(&m).unwrap(), mp(6.5, 0.0));
    }

    #[test]
    fn single_precision_propagation() {
        let z = product_moments(&[MomentPair { mean: 0.55_f32, sd: 0.15 }, MomentPair { mean: 1.0, sd: 0.3 }]).unwrap();
        assert!((z.sd - 0.2275).abs() < 1e-4);
    }

    fn factor() -> impl Strategy<Value = MomentPair<f64>> {
        (1e-3f64..10.0, 0.0f64..2.0).prop_map(|(m, cv)| mp(m, m * cv))
    }

    proptest! {
        #[test]
        fn product_is_order_independent(mut f in prop::collection::vec(factor(), 1..7), seed in any::<u64>()) {
            let a = product_moments(&f).unwrap();
            let n = f.len();
            f.rotate_left((seed as usize) % n);
            f.swap(0, (seed as usize / 7) % n);
            let b = product_moments(&f).unwrap();
            prop_assert!(rel(b.mean, a.mean) < 1e-12);
            prop_assert!(rel(b.sd, a.sd) < 1e-12);
        }

        #[test]
        fn nested_folds_agree(f in prop::collection::vec(factor(), 2..7), split in 1usize..6) {
            let split = split.min(f.len() - 1);
            let left = product_moments(&f[..split]).unwrap();
            let right = product_moments(&f[split..]).unwrap();
            let nested = product_moments(&[left, right]).unwrap();
            let flat = product_moments(&f).unwrap();
            prop_assert!(rel(nested.mean, flat.mean) < 1e-12);
            prop_assert!(rel(nested.sd, flat.sd) < 1e-12);
        }

        #[test]
        fn larger_input_sd_increases_output_sd(f in prop::collection::vec(factor(), 1..6), i in 0usize..6, bump in 1e-3f64..1.0) {
            let i = i % f.len();
            let base = product_moments(&f).unwrap();
            let mut g = f.clone();
            g[i].sd += bump * g[i].mean;
            prop_assert!(product_moments(&g).unwrap().sd > base.sd);
            let s0 = sum_moments(&f).unwrap();
            prop_assert!(sum_moments(&g).unwrap().sd > s0.sd);
        }
    }
}
