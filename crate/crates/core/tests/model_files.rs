use std::time::Instant;

use proptest::prelude::*;
use silprop_core::distributions::{DistributionSpec, LogNormalParams, MomentPair};
use silprop_core::riskmodel::{parse_model, serialize_model, validate_model, DiagnosticCode, RiskExpr, RiskModel, VariableId};
use silprop_core::sil::{SilBand, SilTarget};
use silprop_core::Error;

const XY: &str = r#"{
  "variables": {
    "X": {"dist": "normal", "mean": 0.55e-1, "sd": 0.15e-1},
    "Y": {"dist": "normal", "mean": 1e-2, "sd": 0.3e-2}
  },
  "expression": {"product": ["X", "Y"]}
}"#;

#[test]
fn minimal_product_model() {
    let m = parse_model(XY).unwrap();
    assert_eq!(m.variables.len(), 2);
    assert_eq!(m.expression, RiskExpr::product_of(&["X", "Y"]).unwrap());
    assert_eq!(
        m.variable("X"),
        Some(&DistributionSpec::Normal(MomentPair { mean: 0.055, sd: 0.015 }))
    );
    assert!(m.target.is_none());
}

#[test]
fn repeated_variable_is_rejected() {
    let text = XY.replace(r#"["X", "Y"]"#, r#"["X", "X"]"#);
    match parse_model(&text) {
        Err(Error::IndependenceViolation { variable, path }) => {
            assert_eq!(variable, "X");
            assert_eq!(path, "/expression/product/1");
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn nested_hazard_barrier_severity() {
    let text = r#"{
      "variables": {
        "H": {"dist": "normal", "mean": {"mantissa": 0.55, "decade": -1}, "sd": {"mantissa": 0.15, "decade": -1}},
        "B": {"dist": "normal", "mean": 0.031622776601683794, "sd": 0.01},
        "S": {"dist": "lognormal", "mu_log": 0.0, "sigma_log": 0.3},
        "K": {"dist": "point", "value": {"mantissa": 2, "decade": 0}}
      },
      "expression": {"sum": [{"product": ["H", "B", "S"]}, "K"]},
      "target": {"band_exponent": 3, "confidence": 0.99, "q": 3}
    }"#;
    let m = parse_model(text).unwrap();
    assert_eq!(m.expression.depth(), 3);
    assert_eq!(m.variable("H").unwrap().moments(), MomentPair { mean: 0.055, sd: 0.015 });
    assert_eq!(m.variable("K"), Some(&DistributionSpec::PointMass { value: 2.0 }));
    assert_eq!(
        m.target,
        Some(SilTarget { band: SilBand::new(3), confidence: 0.99, q: Some(3.0) })
    );
    assert!(validate_model(&m).is_empty());
}

#[test]
fn quantity_and_plain_forms_agree() {
    let plain = parse_model(XY).unwrap();
    let quantity = parse_model(
        &XY.replace("0.55e-1", r#"{"mantissa": 5.5, "decade": -2}"#)
            .replace("0.3e-2", r#"{"mantissa": 0.3, "decade": -2}"#),
    )
    .unwrap();
    assert_eq!(plain, quantity);
}

#[test]
fn syntax_errors_carry_line_and_column() {
    let broken = "{\n  \"variables\": {\n    \"X\": {\"dist\": \"normal\",, }\n  }\n}";
    match parse_model(broken) {
        Err(Error::Parse { line, column, .. }) => {
            assert_eq!(line, 3);
            assert!(column > 0);
        }
        other => panic!("unexpected {other:?}"),
    }
}

fn validation_codes(text: &str) -> Vec<(DiagnosticCode, String)> {
    match parse_model(text) {
        Err(Error::Validation(d)) => d.into_iter().map(|d| (d.code, d.path)).collect(),
        other => panic!("expected validation error, got {other:?}"),
    }
}

#[test]
fn semantic_errors_carry_paths() {
    assert_eq!(
        validation_codes(&XY.replace("\"normal\", \"mean\": 1e-2", "\"gamma\", \"mean\": 1e-2")),
        [(DiagnosticCode::UnknownDistribution, "/variables/Y/dist".to_string())]
    );
    assert_eq!(
        validation_codes(&XY.replace(r#"["X", "Y"]"#, r#"["X", "Z"]"#)),
        [(DiagnosticCode::UndeclaredVariable, "/expression/product/1".to_string())]
    );
    assert_eq!(
        validation_codes(&XY.replace(r#""expression""#, r#""extra": 1, "expression""#)),
        [(DiagnosticCode::Structure, "/extra".to_string())]
    );
    assert_eq!(
        validation_codes(&XY.replace(r#""sd": 0.15e-1"#, r#""sd": 0.15e-1, "mu_log": 1"#)),
        [(DiagnosticCode::Structure, "/variables/X/mu_log".to_string())]
    );
    assert_eq!(
        validation_codes(&XY.replace(r#""sd": 0.15e-1"#, r#""sd": -0.15e-1"#)),
        [(DiagnosticCode::InvalidParameter, "/variables/X/sd".to_string())]
    );
    assert_eq!(
        validation_codes(&XY.replace(r#"{"product": ["X", "Y"]}"#, r#"{"product": []}"#)),
        [(DiagnosticCode::EmptyNode, "/expression/product".to_string())]
    );
    assert_eq!(
        validation_codes(&XY.replace(r#"{"product": ["X", "Y"]}"#, r#"{"ratio": ["X", "Y"]}"#)),
        [(DiagnosticCode::Structure, "/expression/ratio".to_string())]
    );
    assert_eq!(
        validation_codes(&XY.replace(r#""X": {"#, r#""9X": {"#)),
        [(DiagnosticCode::InvalidName, "/variables/9X".to_string())]
    );
    let bad_target = XY.replace(
        r#""expression""#,
        r#""target": {"band_exponent": 2, "confidence": 1.5}, "expression""#,
    );
    assert_eq!(
        validation_codes(&bad_target),
        [(DiagnosticCode::InvalidTarget, "/target/confidence".to_string())]
    );
    assert!(matches!(parse_model("[]"), Err(Error::Validation(_))));
}

#[test]
fn unused_declaration_is_only_a_warning() {
    let text = XY.replace(r#""Y": {"#, r#""Q": {"dist": "point", "value": 1}, "Y": {"#);
    let m = parse_model(&text).unwrap();
    let d = validate_model(&m);
    assert_eq!(d.len(), 1);
    assert_eq!(d[0].code, DiagnosticCode::UnusedVariable);
    assert_eq!(d[0].subject.as_deref(), Some("Q"));
}

/// 50 hazards, each a hazard rate times a sum over 5 accident types of
/// (3 reduction factors × consequence).
fn large_model_text() -> String {
    let mut variables = Vec::new();
    let mut hazards = Vec::new();
    for j in 0..50 {
        variables.push(format!(r#""HR_{j}": {{"dist": "normal", "mean": 1e-6, "sd": 2e-7}}"#));
        let mut accidents = Vec::new();
        for k in 0..5 {
            let mut factors = Vec::new();
            for r in 0..3 {
                variables.push(format!(r#""C_{j}_{k}_{r}": {{"dist": "lognormal", "mu_log": -2.3, "sigma_log": 0.3}}"#));
                factors.push(format!(r#""C_{j}_{k}_{r}""#));
            }
            variables.push(format!(r#""F_{j}_{k}": {{"dist": "point", "value": 0.5}}"#));
            factors.push(format!(r#""F_{j}_{k}""#));
            accidents.push(format!(r#"{{"product": [{}]}}"#, factors.join(", ")));
        }
        hazards.push(format!(r#"{{"product": ["HR_{j}", {{"sum": [{}]}}]}}"#, accidents.join(", ")));
    }
    format!(
        r#"{{"variables": {{{}}}, "expression": {{"sum": [{}]}}}}"#,
        variables.join(", "),
        hazards.join(", ")
    )
}

#[test]
fn fifty_hazard_model_parses_quickly() {
    let text = large_model_text();
    let start = Instant::now();
    let m = parse_model(&text).unwrap();
    let diagnostics = validate_model(&m);
    let elapsed = start.elapsed();
    assert_eq!(m.variables.len(), 50 + 50 * 5 * 4);
    assert!(diagnostics.is_empty());
    assert!(elapsed.as_millis() < 100, "{elapsed:?}");
}

fn arb_real() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e3f64..1e3,
        (1e-15f64..1e-3),
        (1u32..1000, -20i32..5).prop_map(|(m, e)| m as f64 * 10f64.powi(e)),
    ]
}

fn arb_dist() -> impl Strategy<Value = DistributionSpec<f64>> {
    prop_oneof![
        (arb_real(), arb_real()).prop_map(|(mean, sd)| DistributionSpec::Normal(MomentPair { mean, sd: sd.abs() })),
        (arb_real(), arb_real()).prop_map(|(mu_log, s)| DistributionSpec::LogNormal(LogNormalParams { mu_log, sigma_log: s.abs() })),
        arb_real().prop_map(|value| DistributionSpec::PointMass { value }),
    ]
}

/// Random tree shape over placeholder leaves, numbered left to right afterwards.
fn arb_shape() -> impl Strategy<Value = RiskExpr> {
    let leaf = Just(RiskExpr::Leaf(VariableId::new("v").unwrap()));
    leaf.prop_recursive(4, 24, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 1..4).prop_map(RiskExpr::Sum),
            prop::collection::vec(inner, 1..4).prop_map(RiskExpr::Product),
        ]
    })
}

fn number_leaves(e: &mut RiskExpr, next: &mut usize) {
    match e {
        RiskExpr::Leaf(id) => {
            *id = VariableId::new(format!("V{next}")).unwrap();
            *next += 1;
        }
        RiskExpr::Sum(c) | RiskExpr::Product(c) => c.iter_mut().for_each(|c| number_leaves(c, next)),
    }
}

fn arb_model() -> impl Strategy<Value = RiskModel<f64>> {
    (arb_shape(), prop::collection::vec(arb_dist(), 24), prop::option::of((-20i32..20, 0.01f64..0.999, prop::option::of(0.5f64..5.0))))
        .prop_map(|(mut expr, dists, target)| {
            let mut n = 0;
            number_leaves(&mut expr, &mut n);
            let variables = (0..n)
                .map(|i| (VariableId::new(format!("V{i}")).unwrap(), dists[i]))
                .collect();
            let target = target.map(|(x, confidence, q)| SilTarget { band: SilBand::new(x), confidence, q });
            RiskModel::new(variables, expr, target)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn serialize_then_parse_is_identity(m in arb_model()) {
        let text = serialize_model(&m);
        let back = parse_model(&text).unwrap();
        prop_assert_eq!(back, m);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn arbitrary_text_never_panics(text in "\\PC{0,200}") {
        let _ = parse_model(&text);
    }

    #[test]
    fn mutated_models_never_panic(pos in 0usize..400, byte in any::<u8>(), cut in any::<bool>()) {
        let mut bytes = XY.as_bytes().to_vec();
        let pos = pos % bytes.len();
        if cut {
            bytes.truncate(pos);
        } else {
            bytes[pos] = byte;
        }
        if let Ok(text) = String::from_utf8(bytes) {
            match parse_model(&text) {
                Ok(_) => {}
                Err(Error::Parse { line, .. }) => prop_assert!(line >= 1),
                Err(Error::Validation(d)) => prop_assert!(!d.is_empty()),
                Err(Error::IndependenceViolation { path, .. }) => prop_assert!(path.starts_with("/expression")),
                Err(other) => prop_assert!(false, "unexpected error kind {:?}", other),
            }
        }
    }
}
