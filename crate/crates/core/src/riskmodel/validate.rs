use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::{RiskExpr, RiskModel, VariableId};
use crate::distributions::DistributionSpec;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagnosticCode {
    /// Malformed structure: wrong JSON type, missing or unknown key.
    Structure,
    InvalidName,
    UnknownDistribution,
    InvalidParameter,
    UndeclaredVariable,
    DuplicateUse,
    UnusedVariable,
    EmptyNode,
    InvalidTarget,
    /// Variable cannot enter log-normal propagation (non-positive mean or value).
    NotLogNormalConvertible,
}

/// A finding about a model, located by a JSON pointer into the model file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: DiagnosticCode,
    pub path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    pub message: String,
}

impl Diagnostic {
    pub fn error(code: DiagnosticCode, path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            code,
            path: path.into(),
            subject: None,
            message: message.into(),
        }
    }

    pub fn warning(
        code: DiagnosticCode,
        path: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Self {
            severity: Severity::Warning,
            ..Self::error(code, path, message)
        }
    }

    pub fn about(mut self, subject: impl Into<String>) -> Self {
        self.subject = Some(subject.into());
        self
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let severity = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        let path = if self.path.is_empty() { "/" } else { &self.path };
        write!(f, "{severity} at {path}: {}", self.message)
    }
}

/// Checks every model invariant; an empty list means the model is clean.
pub fn validate_model<T: Scalar>(m: &RiskModel<T>) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for (id, dist) in &m.variables {
        check_distribution(id, dist, &mut out);
    }

    let mut uses: BTreeMap<&VariableId, usize> = BTreeMap::new();
    m.expression.visit("/expression".to_string(), &mut |path, node| match node {
        RiskExpr::Leaf(id) => {
            let count = uses.entry(id).or_default();
            *count += 1;
            if !m.variables.contains_key(id) {
                if *count == 1 {
                    out.push(
                        Diagnostic::error(
                            DiagnosticCode::UndeclaredVariable,
                            path,
                            format!("variable `{id}` is not declared"),
                        )
                        .about(id.as_str()),
                    );
                }
            } else if *count == 2 {
                out.push(
                    Diagnostic::error(
                        DiagnosticCode::DuplicateUse,
                        path,
                        format!("variable `{id}` is used more than once; operands must be independent"),
                    )
                    .about(id.as_str()),
                );
            }
        }
        RiskExpr::Sum(c) | RiskExpr::Product(c) if c.is_empty() => {
            out.push(Diagnostic::error(
                DiagnosticCode::EmptyNode,
                path,
                "sum and product nodes need at least one operand",
            ));
        }
        _ => {}
    });

    for id in m.variables.keys() {
        if !uses.contains_key(id) {
            out.push(
                Diagnostic::warning(
                    DiagnosticCode::UnusedVariable,
                    format!("/variables/{id}"),
                    format!("variable `{id}` is declared but never used"),
                )
                .about(id.as_str()),
            );
        }
    }

    if let Some(t) = &m.target {
        if !(t.confidence > T::zero() && t.confidence < T::one()) {
            out.push(Diagnostic::error(
                DiagnosticCode::InvalidTarget,
                "/target/confidence",
                format!("confidence must lie in (0, 1), got {}", t.confidence),
            ));
        }
        if let Some(q) = t.q {
            if !(q > T::zero() && q.is_finite()) {
                out.push(Diagnostic::error(
                    DiagnosticCode::InvalidTarget,
                    "/target/q",
                    format!("coverage factor must be positive, got {q}"),
                ));
            }
        }
    }
    out
}

fn check_distribution<T: Scalar>(
    id: &VariableId,
    dist: &DistributionSpec<T>,
    out: &mut Vec<Diagnostic>,
) {
    let base = format!("/variables/{id}");
    let mut invalid = |field: &str, msg: String| {
        out.push(
            Diagnostic::error(DiagnosticCode::InvalidParameter, format!("{base}/{field}"), msg)
                .about(id.as_str()),
        );
    };
    let positive = match *dist {
        DistributionSpec::Normal(m) => {
            if !m.mean.is_finite() {
                invalid("mean", format!("mean of `{id}` must be finite"));
            }
            if !(m.sd >= T::zero() && m.sd.is_finite()) {
                invalid("sd", format!("sd of `{id}` must be non-negative, got {}", m.sd));
            }
            m.mean > T::zero()
        }
        DistributionSpec::LogNormal(p) => {
            if !p.mu_log.is_finite() {
                invalid("mu_log", format!("mu_log of `{id}` must be finite"));
            }
            if !(p.sigma_log >= T::zero() && p.sigma_log.is_finite()) {
                invalid(
                    "sigma_log",
                    format!("sigma_log of `{id}` must be non-negative, got {}", p.sigma_log),
                );
            }
            true
        }
        DistributionSpec::PointMass { value } => {
            if !value.is_finite() {
                invalid("value", format!("value of `{id}` must be finite"));
            }
            value > T::zero()
        }
    };
    if !positive {
        out.push(
            Diagnostic::warning(
                DiagnosticCode::NotLogNormalConvertible,
                base,
                format!("`{id}` is not positive and cannot enter log-normal propagation"),
            )
            .about(id.as_str()),
        );
    }
}
