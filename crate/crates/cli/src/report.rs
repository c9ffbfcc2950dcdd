//! The `report` bundle: everything about one model in one directory.

use std::collections::BTreeSet;
use std::fs;
use std::io::{self, BufWriter};
use std::path::Path;

use serde_json::{json, Value};
use silprop_core::distributions::{DistributionSpec, MomentPair, Quantity};
use silprop_core::montecarlo::{overlay_curves, simulate, write_curves_csv, write_samples_csv, SimConfig};
use silprop_core::propagation::relative_sd_ratio;
use silprop_core::riskmodel::{RiskModel, VariableId};
use silprop_core::sil::{band_probability, classify_interval};
use silprop_core::{moments_from_lognormal, propagate_lognormal, propagate_moments};

use crate::{io_err, load_model, model_name, moments_json, CliResult, RunReport};

/// Ratio band accepted as "the spread roughly doubles".
const DOUBLING: (f64, f64) = (1.9, 2.1);
/// A ratio beyond this cannot be reconciled with a doubling.
const IMPLAUSIBLE: f64 = 10.0;

pub(crate) fn run(path: &Path, out_dir: &Path, seed: u64, samples: usize) -> CliResult<RunReport> {
    let (model, warnings) = load_model(path)?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let moments = propagate_moments(&model)?;
    let mut results = json!({ "moments": moments_json(moments) });
    match propagate_lognormal(&model) {
        Ok(p) => {
            let back = moments_from_lognormal(p);
            results["lognormal"] = json!({"mu_log": p.mu_log, "sigma_log": p.sigma_log, "mean": back.mean, "sd": back.sd});
        }
        Err(e) => results["lognormal_unavailable"] = json!(e.to_string()),
    }

    let cfg = SimConfig::new(samples, seed);
    let overlay = overlay_curves(&model, &cfg)?;
    let stats = overlay.stats;
    let kde = &overlay.curves[0].1;
    results["simulation"] = json!({
        "stats": stats,
        "standard_error": stats.standard_error(),
        "mean_deviation_in_se": if stats.standard_error() > 0.0 { Some((stats.mean - moments.mean) / stats.standard_error()) } else { None },
        "sd_relative_difference": if moments.sd > 0.0 { Some((stats.sd - moments.sd) / moments.sd) } else { None },
        "bandwidth": kde.bandwidth,
        "kde_integral": kde.integral(),
        "curves": overlay.curves.iter().map(|(id, _)| id.as_str()).collect::<Vec<_>>(),
        "reference_variable": overlay.reference_variable,
    });

    if let Some(t) = model.target {
        let coverage = classify_interval(moments, &t)?;
        let dist = match propagate_lognormal(&model) {
            Ok(p) => DistributionSpec::LogNormal(p),
            Err(_) => DistributionSpec::Normal(moments),
        };
        results["classification"] = json!({
            "coverage": coverage,
            "exact": band_probability(&dist, &t)?,
            "exact_distribution": dist.kind(),
        });
    }

    if let Some(inv) = investigate(&model, &cfg)? {
        results["investigation"] = inv;
    }

    let curves_path = out_dir.join("curves.csv");
    let samples_path = out_dir.join("samples.csv");
    let report_path = out_dir.join("report.json");
    write_csv(&curves_path, |w| write_curves_csv(&overlay.curves, w))?;
    let sim = simulate(&model, &cfg)?;
    write_csv(&samples_path, |w| write_samples_csv(&sim.samples, w))?;
    results["files"] = json!(["curves.csv", "report.json", "samples.csv"]);

    let mut report = RunReport::new(
        "report",
        json!({"model": model_name(path), "seed": seed, "samples": samples}),
        results,
    );
    report.warnings = warnings;
    fs::write(&report_path, report.to_json()).map_err(io_err(&report_path))?;
    Ok(report)
}

fn write_csv(path: &Path, f: impl FnOnce(BufWriter<fs::File>) -> io::Result<()>) -> CliResult<()> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    f(BufWriter::new(file)).map_err(io_err(path))
}

/// Whether the model is the hazard · barrier · severity product.
fn is_hbs(model: &RiskModel<f64>) -> bool {
    let leaves: BTreeSet<&str> = model.expression.leaves().iter().map(|v| v.as_str()).collect();
    model.expression.is_pure_product() && leaves == BTreeSet::from(["B", "H", "S"])
}

/// Re-evaluates an H·B·S model under the competing readings of the hazard's
/// spread: as declared, `0.15` and `0.015` in units of the decade above the
/// hazard mean. Only a reading whose output spread roughly doubles the
/// input's is consistent with the halving argument.
fn investigate(model: &RiskModel<f64>, cfg: &SimConfig<f64>) -> CliResult<Option<Value>> {
    if !is_hbs(model) {
        return Ok(None);
    }
    let h_id = VariableId::new("H")?;
    let h = model.variables[&h_id].moments();
    if !(h.mean > 0.0) {
        return Ok(None);
    }
    let decade = Quantity::from_value(h.mean).decade;
    let readings = [
        ("declared", h.sd),
        ("corrected", Quantity::new(0.15, decade + 1).value()),
        ("literal", Quantity::new(0.015, decade + 1).value()),
    ];
    let mut rows = Vec::new();
    let mut flags = Vec::new();
    for (label, sd) in readings {
        let mut m = model.clone();
        let input = MomentPair { mean: h.mean, sd };
        if label != "declared" {
            m.variables.insert(h_id.clone(), DistributionSpec::Normal(input));
        }
        let analytic = relative_sd_ratio(propagate_moments(&m)?, input);
        let s = simulate(&m, cfg)?.stats;
        let simulated = (s.sd / s.mean) / input.relative_sd();
        let verdict = if (DOUBLING.0..=DOUBLING.1).contains(&analytic) {
            "consistent"
        } else if analytic > IMPLAUSIBLE {
            flags.push(format!(
                "{label} reading sd_H = {sd}: relative spread grows by a factor {analytic:.4}, inconsistent with a doubling"
            ));
            "inconsistent"
        } else {
            "neither"
        };
        rows.push(json!({
            "reading": label,
            "sd_h": sd,
            "relative_sd_h": input.relative_sd(),
            "analytic_ratio": analytic,
            "monte_carlo_ratio": simulated,
            "monte_carlo_relative_difference": (simulated - analytic) / analytic,
            "verdict": verdict,
        }));
    }
    let declared_inconsistent = rows[0]["verdict"] == "inconsistent";
    Ok(Some(json!({
        "mean_h": h.mean,
        "decade_h": decade,
        "expected_ratio": DOUBLING,
        "readings": rows,
        "flags": flags,
        "declared_inconsistent": declared_inconsistent,
    })))
}
