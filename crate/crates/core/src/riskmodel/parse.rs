//! JSON model files.
//!
//! ```json
//! {
//!   "variables": {
//!     "X": {"dist": "normal", "mean": {"mantissa": 0.55, "decade": -1}, "sd": 0.015},
//!     "Y": {"dist": "lognormal", "mu_log": -4.65, "sigma_log": 0.29},
//!     "K": {"dist": "point", "value": 2}
//!   },
//!   "expression": {"product": ["X", "Y", "K"]},
//!   "target": {"band_exponent": 3, "confidence": 0.9973, "q": 3}
//! }
//! ```
//!
//! Unknown keys are rejected at every level.

use std::collections::BTreeMap;

use serde_json::{Map, Number, Value};

use super::validate::{Diagnostic, DiagnosticCode};
use super::{RiskExpr, RiskModel, VariableId};
use crate::distributions::{DistributionSpec, LogNormalParams, MomentPair, Quantity};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sil::{SilBand, SilTarget};

/// Parses and validates a model file.
///
/// Warnings (such as unused declarations) do not fail the parse; run
/// [`super::validate_model`] to collect them.
pub fn parse_model(text: &str) -> Result<RiskModel<f64>> {
    let root: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut reader = Reader::default();
    let model = reader.model(&root);
    if !reader.errors.is_empty() {
        return Err(Error::Validation(reader.errors));
    }
    let model = model.expect("model is built when no structural errors were recorded");
    model.ensure_valid()?;
    Ok(model)
}

/// Pretty-printed model file with plain real numbers and sorted keys.
pub fn serialize_model<T: Scalar>(m: &RiskModel<T>) -> String {
    let mut text = serde_json::to_string_pretty(&to_json_value(m))
        .expect("JSON values always serialize");
    text.push('\n');
    text
}

pub fn to_json_value<T: Scalar>(m: &RiskModel<T>) -> Value {
    let mut root = Map::new();
    let variables: Map<String, Value> = m
        .variables
        .iter()
        .map(|(id, d)| (id.to_string(), distribution_value(d)))
        .collect();
    root.insert("variables".into(), Value::Object(variables));
    root.insert("expression".into(), expr_value(&m.expression));
    if let Some(t) = &m.target {
        let mut target = Map::new();
        target.insert("band_exponent".into(), Value::from(t.band.exponent));
        target.insert("confidence".into(), real(t.confidence));
        if let Some(q) = t.q {
            target.insert("q".into(), real(q));
        }
        root.insert("target".into(), Value::Object(target));
    }
    Value::Object(root)
}

fn real<T: Scalar>(v: T) -> Value {
    Number::from_f64(v.as_f64()).map_or(Value::Null, Value::Number)
}

fn distribution_value<T: Scalar>(d: &DistributionSpec<T>) -> Value {
    let mut obj = Map::new();
    obj.insert("dist".into(), Value::from(d.kind()));
    match *d {
        DistributionSpec::Normal(m) => {
            obj.insert("mean".into(), real(m.mean));
            obj.insert("sd".into(), real(m.sd));
        }
        DistributionSpec::LogNormal(p) => {
            obj.insert("mu_log".into(), real(p.mu_log));
            obj.insert("sigma_log".into(), real(p.sigma_log));
        }
        DistributionSpec::PointMass { value } => {
            obj.insert("value".into(), real(value));
        }
    }
    Value::Object(obj)
}

fn expr_value(e: &RiskExpr) -> Value {
    match e {
        RiskExpr::Leaf(id) => Value::from(id.as_str()),
        RiskExpr::Sum(c) | RiskExpr::Product(c) => {
            let kind = e.combinator().expect("inner node").as_str();
            let mut obj = Map::new();
            obj.insert(kind.into(), Value::Array(c.iter().map(expr_value).collect()));
            Value::Object(obj)
        }
    }
}

#[derive(Default)]
struct Reader {
    errors: Vec<Diagnostic>,
}

impl Reader {
    fn fail(&mut self, code: DiagnosticCode, path: &str, msg: impl Into<String>) {
        self.errors.push(Diagnostic::error(code, path, msg));
    }

    fn structure(&mut self, path: &str, msg: impl Into<String>) {
        self.fail(DiagnosticCode::Structure, path, msg);
    }

    fn object<'v>(&mut self, v: &'v Value, path: &str, allowed: &[&str]) -> Option<&'v Map<String, Value>> {
        let Some(obj) = v.as_object() else {
            self.structure(path, format!("expected an object, found {}", type_name(v)));
            return None;
        };
        for key in obj.keys() {
            if !allowed.contains(&key.as_str()) {
                self.structure(&format!("{path}/{key}"), format!("unknown key `{key}`"));
            }
        }
        Some(obj)
    }

    fn model(&mut self, root: &Value) -> Option<RiskModel<f64>> {
        let obj = self.object(root, "", &["variables", "expression", "target"])?;
        let variables = match obj.get("variables") {
            Some(v) => self.variables(v),
            None => {
                self.structure("/variables", "missing key `variables`");
                None
            }
        };
        let expression = match obj.get("expression") {
            Some(v) => self.expr(v, "/expression"),
            None => {
                self.structure("/expression", "missing key `expression`");
                None
            }
        };
        let target = match obj.get("target") {
            Some(v) => self.target(v).map(Some),
            None => Some(None),
        };
        Some(RiskModel::new(variables?, expression?, target?))
    }

    fn variables(&mut self, v: &Value) -> Option<BTreeMap<VariableId, DistributionSpec<f64>>> {
        let Some(obj) = v.as_object() else {
            self.structure("/variables", format!("expected an object, found {}", type_name(v)));
            return None;
        };
        let mut out = BTreeMap::new();
        let mut ok = true;
        for (name, spec) in obj {
            let path = format!("/variables/{name}");
            let Ok(id) = VariableId::new(name.as_str()) else {
                self.fail(
                    DiagnosticCode::InvalidName,
                    &path,
                    format!("`{name}` is not a valid variable name"),
                );
                ok = false;
                continue;
            };
            match self.distribution(spec, &path) {
                Some(d) => {
                    out.insert(id, d);
                }
                None => ok = false,
            }
        }
        ok.then_some(out)
    }

    fn distribution(&mut self, v: &Value, path: &str) -> Option<DistributionSpec<f64>> {
        let obj = v.as_object();
        let Some(kind) = obj.and_then(|o| o.get("dist")) else {
            self.structure(path, "distribution needs a `dist` key");
            return None;
        };
        let Some(kind) = kind.as_str() else {
            self.structure(&format!("{path}/dist"), "`dist` must be a string");
            return None;
        };
        match kind {
            "normal" => {
                let o = self.object(v, path, &["dist", "mean", "sd"])?;
                let mean = self.real_field(o, path, "mean");
                let sd = self.real_field(o, path, "sd");
                Some(DistributionSpec::Normal(MomentPair { mean: mean?, sd: sd? }))
            }
            "lognormal" => {
                let o = self.object(v, path, &["dist", "mu_log", "sigma_log"])?;
                let mu_log = self.real_field(o, path, "mu_log");
                let sigma_log = self.real_field(o, path, "sigma_log");
                Some(DistributionSpec::LogNormal(LogNormalParams {
                    mu_log: mu_log?,
                    sigma_log: sigma_log?,
                }))
            }
            "point" => {
                let o = self.object(v, path, &["dist", "value"])?;
                let value = self.real_field(o, path, "value")?;
                Some(DistributionSpec::PointMass { value })
            }
            other => {
                self.fail(
                    DiagnosticCode::UnknownDistribution,
                    &format!("{path}/dist"),
                    format!("unknown distribution kind `{other}` (expected normal, lognormal or point)"),
                );
                None
            }
        }
    }

    fn real_field(&mut self, o: &Map<String, Value>, path: &str, key: &str) -> Option<f64> {
        let path = format!("{path}/{key}");
        match o.get(key) {
            Some(v) => self.real(v, &path),
            None => {
                self.structure(&path, format!("missing key `{key}`"));
                None
            }
        }
    }

    /// A plain number or a `{"mantissa": m, "decade": d}` quantity.
    fn real(&mut self, v: &Value, path: &str) -> Option<f64> {
        if let Some(x) = v.as_f64() {
            return Some(x);
        }
        if v.is_object() {
            let o = self.object(v, path, &["mantissa", "decade"])?;
            let mantissa = self.real_field(o, path, "mantissa");
            let decade = match o.get("decade") {
                Some(d) => match d.as_i64().and_then(|d| i32::try_from(d).ok()) {
                    Some(d) => Some(d),
                    None => {
                        self.structure(&format!("{path}/decade"), "decade must be an integer");
                        None
                    }
                },
                None => {
                    self.structure(&format!("{path}/decade"), "missing key `decade`");
                    None
                }
            };
            return Some(Quantity::new(mantissa?, decade?).value());
        }
        self.structure(path, format!("expected a number, found {}", type_name(v)));
        None
    }

    fn expr(&mut self, v: &Value, path: &str) -> Option<RiskExpr> {
        match v {
            Value::String(name) => match VariableId::new(name.as_str()) {
                Ok(id) => Some(RiskExpr::Leaf(id)),
                Err(_) => {
                    self.fail(
                        DiagnosticCode::InvalidName,
                        path,
                        format!("`{name}` is not a valid variable name"),
                    );
                    None
                }
            },
            Value::Object(o) => {
                if o.len() != 1 {
                    self.structure(path, "expression node must have exactly one key, `sum` or `product`");
                    return None;
                }
                let (kind, children) = o.iter().next().expect("one entry");
                let child_path = format!("{path}/{kind}");
                let make: fn(Vec<RiskExpr>) -> RiskExpr = match kind.as_str() {
                    "sum" => RiskExpr::Sum,
                    "product" => RiskExpr::Product,
                    _ => {
                        self.structure(&child_path, format!("unknown expression node `{kind}`"));
                        return None;
                    }
                };
                let Some(items) = children.as_array() else {
                    self.structure(&child_path, "operands must be an array");
                    return None;
                };
                if items.is_empty() {
                    self.fail(
                        DiagnosticCode::EmptyNode,
                        &child_path,
                        "sum and product nodes need at least one operand",
                    );
                    return None;
                }
                let parsed: Vec<Option<RiskExpr>> = items
                    .iter()
                    .enumerate()
                    .map(|(i, item)| self.expr(item, &format!("{child_path}/{i}")))
                    .collect();
                parsed.into_iter().collect::<Option<Vec<_>>>().map(make)
            }
            other => {
                self.structure(
                    path,
                    format!("expected a variable name or node object, found {}", type_name(other)),
                );
                None
            }
        }
    }

    fn target(&mut self, v: &Value) -> Option<SilTarget<f64>> {
        let path = "/target";
        let o = self.object(v, path, &["band_exponent", "confidence", "q"])?;
        let exponent = match o.get("band_exponent") {
            Some(e) => match e.as_i64().and_then(|e| i32::try_from(e).ok()) {
                Some(e) => Some(e),
                None => {
                    self.fail(DiagnosticCode::InvalidTarget, "/target/band_exponent", "band_exponent must be an integer");
                    None
                }
            },
            None => {
                self.structure("/target/band_exponent", "missing key `band_exponent`");
                None
            }
        };
        let confidence = self.real_field(o, path, "confidence");
        let q = match o.get("q") {
            Some(q) => Some(Some(self.real(q, "/target/q")?)),
            None => Some(None),
        };
        Some(SilTarget {
            band: SilBand::new(exponent?),
            confidence: confidence?,
            q: q?,
        })
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}
