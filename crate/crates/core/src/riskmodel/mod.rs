//! Risk models: variable declarations plus a sum-of-product expression tree.
//!
//! Every variable may appear at most once in the tree. Propagation assumes
//! independent operands, so shared factors have to be expressed by
//! restructuring the expression instead.

mod parse;
mod validate;

pub use parse::{parse_model, serialize_model, to_json_value};
pub use validate::{validate_model, Diagnostic, DiagnosticCode, Severity};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sil::SilTarget;

/// Name of a model variable: a letter followed by letters, digits or `_`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct VariableId(String);

impl VariableId {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if Self::is_valid(&name) {
            Ok(Self(name))
        } else {
            Err(Error::domain(format!("invalid variable name `{name}`")))
        }
    }

    pub fn is_valid(name: &str) -> bool {
        let mut chars = name.chars();
        matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
            && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for VariableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for VariableId {
    type Error = Error;
    fn try_from(value: String) -> Result<Self> {
        Self::new(value)
    }
}

impl From<VariableId> for String {
    fn from(value: VariableId) -> Self {
        value.0
    }
}

impl AsRef<str> for VariableId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// The two operations of a risk formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combinator {
    Sum,
    Product,
}

impl Combinator {
    pub fn as_str(&self) -> &'static str {
        match self {
            Combinator::Sum => "sum",
            Combinator::Product => "product",
        }
    }
}

/// Expression tree over model variables with n-ary sums and products.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RiskExpr {
    Leaf(VariableId),
    Sum(Vec<RiskExpr>),
    Product(Vec<RiskExpr>),
}

impl RiskExpr {
    pub fn leaf(name: &str) -> Result<Self> {
        Ok(RiskExpr::Leaf(VariableId::new(name)?))
    }

    /// Product of leaves, in order.
    pub fn product_of(names: &[&str]) -> Result<Self> {
        Ok(RiskExpr::Product(
            names.iter().map(|n| Self::leaf(n)).collect::<Result<_>>()?,
        ))
    }

    /// Sum of leaves, in order.
    pub fn sum_of(names: &[&str]) -> Result<Self> {
        Ok(RiskExpr::Sum(
            names.iter().map(|n| Self::leaf(n)).collect::<Result<_>>()?,
        ))
    }

    pub fn combinator(&self) -> Option<Combinator> {
        match self {
            RiskExpr::Leaf(_) => None,
            RiskExpr::Sum(_) => Some(Combinator::Sum),
            RiskExpr::Product(_) => Some(Combinator::Product),
        }
    }

    pub fn children(&self) -> &[RiskExpr] {
        match self {
            RiskExpr::Leaf(_) => &[],
            RiskExpr::Sum(c) | RiskExpr::Product(c) => c,
        }
    }

    /// Leaves in depth-first order, paired with their path below `root`.
    pub fn leaves_with_paths(&self, root: &str) -> Vec<(String, &VariableId)> {
        let mut out = Vec::new();
        self.visit(root.to_string(), &mut |path, node| {
            if let RiskExpr::Leaf(id) = node {
                out.push((path.to_string(), id));
            }
        });
        out
    }

    pub fn leaves(&self) -> Vec<&VariableId> {
        self.leaves_with_paths("").into_iter().map(|(_, id)| id).collect()
    }

    /// True when the tree contains no sum node with two or more children.
    ///
    /// Single-child sums are transparent wrappers and do not count.
    pub fn is_pure_product(&self) -> bool {
        match self {
            RiskExpr::Leaf(_) => true,
            RiskExpr::Sum(c) => c.len() == 1 && c[0].is_pure_product(),
            RiskExpr::Product(c) => c.iter().all(RiskExpr::is_pure_product),
        }
    }

    pub fn depth(&self) -> usize {
        1 + self.children().iter().map(RiskExpr::depth).max().unwrap_or(0)
    }

    /// Pre-order walk; paths are JSON pointers mirroring the file format.
    pub(crate) fn visit<'a>(&'a self, path: String, f: &mut impl FnMut(&str, &'a RiskExpr)) {
        f(&path, self);
        if let Some(kind) = self.combinator() {
            for (i, child) in self.children().iter().enumerate() {
                child.visit(format!("{path}/{}/{i}", kind.as_str()), f);
            }
        }
    }
}

/// Builds a sum of products from rows of factor names.
///
/// A single row yields the bare product.
pub fn sum_of_products(rows: &[Vec<VariableId>]) -> Result<RiskExpr> {
    if rows.is_empty() {
        return Err(Error::domain("sum of products needs at least one row"));
    }
    let mut seen = BTreeSet::new();
    for (i, row) in rows.iter().enumerate() {
        if row.is_empty() {
            return Err(Error::domain(format!("row {i} of the sum of products is empty")));
        }
        for (j, id) in row.iter().enumerate() {
            if !seen.insert(id) {
                return Err(Error::IndependenceViolation {
                    variable: id.to_string(),
                    path: format!("/rows/{i}/{j}"),
                });
            }
        }
    }
    let mut products: Vec<RiskExpr> = rows
        .iter()
        .map(|row| RiskExpr::Product(row.iter().cloned().map(RiskExpr::Leaf).collect()))
        .collect();
    if products.len() == 1 {
        Ok(products.remove(0))
    } else {
        Ok(RiskExpr::Sum(products))
    }
}

/// Variables, expression and an optional classification target.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskModel<T> {
    pub variables: BTreeMap<VariableId, DistributionSpec<T>>,
    pub expression: RiskExpr,
    pub target: Option<SilTarget<T>>,
}

impl<T: Scalar> RiskModel<T> {
    pub fn new(
        variables: BTreeMap<VariableId, DistributionSpec<T>>,
        expression: RiskExpr,
        target: Option<SilTarget<T>>,
    ) -> Self {
        Self {
            variables,
            expression,
            target,
        }
    }

    /// Builds a model from `(name, distribution)` pairs.
    pub fn from_parts(
        variables: impl IntoIterator<Item = (&'static str, DistributionSpec<T>)>,
        expression: RiskExpr,
    ) -> Result<Self> {
        let variables = variables
            .into_iter()
            .map(|(name, d)| Ok((VariableId::new(name)?, d)))
            .collect::<Result<_>>()?;
        Ok(Self::new(variables, expression, None))
    }

    pub fn variable(&self, name: &str) -> Option<&DistributionSpec<T>> {
        self.variables
            .iter()
            .find(|(id, _)| id.as_str() == name)
            .map(|(_, d)| d)
    }

    /// Fails with the first error diagnostic, if any.
    pub fn ensure_valid(&self) -> Result<()> {
        let errors: Vec<Diagnostic> = validate_model(self)
            .into_iter()
            .filter(|d| d.severity == Severity::Error)
            .collect();
        if let Some(dup) = errors.iter().find(|d| d.code == DiagnosticCode::DuplicateUse) {
            return Err(Error::IndependenceViolation {
                variable: dup.subject.clone().unwrap_or_default(),
                path: dup.path.clone(),
            });
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errors))
        }
    }

    pub fn cast<U: Scalar>(&self) -> RiskModel<U> {
        RiskModel {
            variables: self
                .variables
                .iter()
                .map(|(k, v)| (k.clone(), v.cast()))
                .collect(),
            expression: self.expression.clone(),
            target: self.target.map(|t| t.cast()),
        }
    }
}
