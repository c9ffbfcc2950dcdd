//! The `silprop` command line: one analysis per invocation, a JSON
//! [`RunReport`] on stdout, human-readable diagnostics on stderr.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use silprop_core::distributions::DistributionSpec;
use silprop_core::montecarlo::{kde, simulate, write_curve_csv, GridSpec, SimConfig};
use silprop_core::riskmodel::{validate_model, Diagnostic, RiskExpr, RiskModel, Severity};
use silprop_core::sil::{
    band_probability, budget_product_inputs, calibration_max_ops, classify_interval, compose_check,
    CalibrationQuery, ComposeMode, SilBand, SilTarget,
};
use silprop_core::{op_chain_inflation, parse_model, propagate_lognormal, propagate_moments, Error, InflationMode};

mod report;

/// Everything a command prints on success.
///
/// Serialized through `serde_json::Value`, whose maps keep keys sorted, so
/// the same inputs always give the same bytes.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub inputs: Value,
    pub results: Value,
    pub warnings: Vec<Diagnostic>,
}

impl RunReport {
    fn new(command: &str, inputs: Value, results: Value) -> Self {
        Self {
            command: command.into(),
            inputs,
            results,
            warnings: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("report is plain data");
        let mut text = serde_json::to_string_pretty(&value).expect("values always serialize");
        text.push('\n');
        text
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(Error::Unsupported { .. }) => 4,
            CliError::Core(_) => 2,
            CliError::Io { .. } => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(Error::Validation(diags)) => {
                write!(f, "invalid model:")?;
                for d in diags {
                    write!(f, "\n  {d}")?;
                }
                Ok(())
            }
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Parser, Debug)]
#[command(name = "silprop", version, about = "Uncertainty propagation and SIL band classification for risk models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Propagate moments (or log-normal parameters) through the model.
    Propagate {
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Normal)]
        mode: Mode,
    },
    /// Monte Carlo simulation with optional kernel density estimate.
    Simulate(SimulateArgs),
    /// Classify the model output against a decade band.
    Classify {
        model: PathBuf,
        #[command(flatten)]
        target: TargetArgs,
        /// Compute the probability inside the band instead of checking mean ± q sd.
        #[arg(long)]
        exact: bool,
    },
    /// Common input sd that keeps a two-factor product at the target sd.
    Budget {
        #[arg(long, allow_negative_numbers = true)]
        target_sd: f64,
        #[arg(long, allow_negative_numbers = true)]
        mu_x: f64,
        #[arg(long, allow_negative_numbers = true)]
        mu_y: f64,
    },
    /// Combine the root node's children and classify the combination.
    Compose {
        model: PathBuf,
        #[command(flatten)]
        target: TargetArgs,
        #[arg(long)]
        exact: bool,
        /// Also classify each component against this band.
        #[arg(long, allow_negative_numbers = true)]
        component_band_exponent: Option<i32>,
    },
    /// Operations a semi-quantitative scheme can absorb.
    Calibrate {
        #[arg(long)]
        input_factor: f64,
        #[arg(long)]
        output_factor: f64,
    },
    /// Full analysis bundle written to a directory.
    Report {
        model: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Mode {
    Normal,
    Lognormal,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    model: PathBuf,
    #[arg(long)]
    samples: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    kde: bool,
    #[arg(long, allow_negative_numbers = true, requires = "grid_max")]
    grid_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true, requires = "grid_min")]
    grid_max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    /// Write the density curve here (implies --kde).
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// Band and confidence; anything omitted falls back to the model's target.
#[derive(Args, Debug)]
#[command(group(ArgGroup::new("level").args(["q", "confidence"]).multiple(false)))]
struct TargetArgs {
    #[arg(long, allow_negative_numbers = true)]
    band_exponent: Option<i32>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    confidence: Option<f64>,
}

impl TargetArgs {
    fn resolve(&self, model: &RiskModel<f64>) -> CliResult<SilTarget<f64>> {
        let fallback = model.target;
        let band = match (self.band_exponent, fallback) {
            (Some(x), _) => SilBand::new(x),
            (None, Some(t)) => t.band,
            (None, None) => return Err(CliError::Usage("--band-exponent is required (the model declares no target)".into())),
        };
        let target = match (self.q, self.confidence, fallback) {
            (Some(q), _, _) => SilTarget::from_q(band, q)?,
            (None, Some(c), _) => SilTarget::new(band, c, None)?,
            (None, None, Some(t)) => SilTarget { band, ..t },
            (None, None, None) => return Err(CliError::Usage("one of --q or --confidence is required (the model declares no target)".into())),
        };
        Ok(target)
    }
}

/// Runs one command; returns the process exit code.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let informational = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let sink: &mut dyn Write = if informational { out } else { err };
            let _ = write!(sink, "{}", e.render());
            return if informational { 0 } else { 2 };
        }
    };
    match execute(cli.command) {
        Ok(report) => {
            for w in &report.warnings {
                let _ = writeln!(err, "{w}");
            }
            match out.write_all(report.to_json().as_bytes()) {
                Ok(()) => 0,
                Err(e) => {
                    let _ = writeln!(err, "error: writing output: {e}");
                    3
                }
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cmd: Command) -> CliResult<RunReport> {
    match cmd {
        Command::Propagate { model, mode } => propagate(&model, mode),
        Command::Simulate(a) => simulate_cmd(&a),
        Command::Classify { model, target, exact } => classify(&model, &target, exact),
        Command::Budget { target_sd, mu_x, mu_y } => {
            let sigma = budget_product_inputs(target_sd, mu_x, mu_y)?;
            Ok(RunReport::new(
                "budget",
                json!({"target_sd": target_sd, "mu_x": mu_x, "mu_y": mu_y}),
                json!({ "sigma": sigma }),
            ))
        }
        Command::Compose {
            model,
            target,
            exact,
            component_band_exponent,
        } => compose(&model, &target, exact, component_band_exponent),
        Command::Calibrate {
            input_factor,
            output_factor,
        } => calibrate(input_factor, output_factor),
        Command::Report {
            model,
            out_dir,
            seed,
            samples,
        } => report::run(&model, &out_dir, seed, samples),
    }
}

/// Reads and parses a model file, returning it with its warnings.
pub(crate) fn load_model(path: &Path) -> CliResult<(RiskModel<f64>, Vec<Diagnostic>)> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let model = parse_model(&text)?;
    let warnings = validate_model(&model)
        .into_iter()
        .filter(|d| d.severity == Severity::Warning)
        .collect();
    Ok((model, warnings))
}

/// The file name only, so reports do not depend on where a model lives.
pub(crate) fn model_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub(crate) fn moments_json(m: silprop_core::MomentPair) -> Value {
    json!({"mean": m.mean, "sd": m.sd, "relative_sd": if m.mean != 0.0 { Some(m.relative_sd()) } else { None }})
}

fn propagate(path: &Path, mode: Mode) -> CliResult<RunReport> {
    let (model, warnings) = load_model(path)?;
    let results = match mode {
        Mode::Normal => moments_json(propagate_moments(&model)?),
        Mode::Lognormal => {
            let p = propagate_lognormal(&model)?;
            let m = silprop_core::moments_from_lognormal(p);
            json!({"mu_log": p.mu_log, "sigma_log": p.sigma_log, "mean": m.mean, "sd": m.sd})
        }
    };
    let mode = match mode {
        Mode::Normal => "normal",
        Mode::Lognormal => "lognormal",
    };
    let mut r = RunReport::new("propagate", json!({"model": model_name(path), "mode": mode}), results);
    r.warnings = warnings;
    Ok(r)
}

fn simulate_cmd(a: &SimulateArgs) -> CliResult<RunReport> {
    let (model, warnings) = load_model(&a.model)?;
    let mut cfg = SimConfig::new(a.samples, a.seed);
    if let (Some(min), Some(max)) = (a.grid_min, a.grid_max) {
        cfg = cfg.with_grid(GridSpec::new(min, max, a.points.unwrap_or(silprop_core::montecarlo::DEFAULT_GRID_POINTS))?);
    } else if a.points.is_some() {
        return Err(CliError::Usage("--points needs --grid-min and --grid-max".into()));
    }
    let sim = simulate(&model, &cfg)?;
    let mut results = json!({ "stats": sim.stats, "standard_error": sim.stats.standard_error() });
    if a.kde || a.csv.is_some() {
        let curve = kde(&sim.samples, &cfg)?;
        results["density"] = json!({
            "bandwidth": curve.bandwidth,
            "points": curve.grid.len(),
            "grid_min": curve.grid[0],
            "grid_max": curve.grid[curve.grid.len() - 1],
            "integral": curve.integral(),
        });
        if let Some(csv) = &a.csv {
            let file = fs::File::create(csv).map_err(io_err(csv))?;
            write_curve_csv(&curve, io::BufWriter::new(file)).map_err(io_err(csv))?;
        }
    }
    let mut inputs = json!({"model": model_name(&a.model), "samples": a.samples, "seed": a.seed, "kde": a.kde || a.csv.is_some()});
    if let Some(g) = cfg.grid {
        inputs["grid"] = json!(g);
    }
    if let Some(csv) = &a.csv {
        inputs["csv"] = json!(model_name(csv));
    }
    let mut r = RunReport::new("simulate", inputs, results);
    r.warnings = warnings;
    Ok(r)
}

/// The distribution of a (sub)expression used for exact band probabilities:
/// a leaf keeps its declared distribution, a product of positive factors is
/// log-normal, anything else is normal with the propagated moments.
fn output_distribution(model: &RiskModel<f64>, expr: &RiskExpr) -> CliResult<DistributionSpec<f64>> {
    if let RiskExpr::Leaf(id) = expr {
        return Ok(model.variables[id]);
    }
    let sub = RiskModel::new(model.variables.clone(), expr.clone(), None);
    match propagate_lognormal(&sub) {
        Ok(p) => Ok(DistributionSpec::LogNormal(p)),
        Err(Error::Unsupported { .. } | Error::Domain(_)) => Ok(DistributionSpec::Normal(propagate_moments(&sub)?)),
        Err(e) => Err(e.into()),
    }
}

fn target_json(t: &SilTarget<f64>) -> Value {
    json!({"band_exponent": t.band.exponent, "confidence": t.confidence, "q": t.q})
}

fn classify(path: &Path, target: &TargetArgs, exact: bool) -> CliResult<RunReport> {
    let (model, warnings) = load_model(path)?;
    let t = target.resolve(&model)?;
    let (verdict, distribution) = if exact {
        let d = output_distribution(&model, &model.expression)?;
        (band_probability(&d, &t)?, Some(d))
    } else {
        (classify_interval(propagate_moments(&model)?, &t)?, None)
    };
    let mut results = serde_json::to_value(verdict).expect("plain data");
    if let Some(d) = distribution {
        results["distribution"] = json!(d);
    }
    let mut inputs = target_json(&t);
    inputs["model"] = json!(model_name(path));
    inputs["exact"] = json!(exact);
    let mut r = RunReport::new("classify", inputs, results);
    r.warnings = warnings;
    Ok(r)
}

fn compose(path: &Path, target: &TargetArgs, exact: bool, component_band: Option<i32>) -> CliResult<RunReport> {
    let (model, warnings) = load_model(path)?;
    let t = target.resolve(&model)?;
    let combinator = model
        .expression
        .combinator()
        .ok_or_else(|| CliError::Usage("the model's root is a single variable; nothing to compose".into()))?;
    let mode = if exact { ComposeMode::Exact } else { ComposeMode::Coverage };
    let mut components = Vec::new();
    for (i, child) in model.expression.children().iter().enumerate() {
        let label = match child {
            RiskExpr::Leaf(id) => id.to_string(),
            _ => format!("/expression/{}/{i}", combinator.as_str()),
        };
        let d = if exact {
            output_distribution(&model, child)?
        } else if let RiskExpr::Leaf(id) = child {
            model.variables[id]
        } else {
            let sub = RiskModel::new(model.variables.clone(), child.clone(), None);
            DistributionSpec::Normal(propagate_moments(&sub)?)
        };
        components.push((label, d));
    }
    let composition = compose_check(&components, combinator, &t, mode)?;
    let mut results = serde_json::to_value(&composition).expect("plain data");
    if let Some(x) = component_band {
        let ct = SilTarget { band: SilBand::new(x), ..t };
        let verdicts = components
            .iter()
            .map(|(label, d)| {
                let v = if exact { band_probability(d, &ct)? } else { classify_interval(d.moments(), &ct)? };
                Ok(json!({"label": label, "verdict": v}))
            })
            .collect::<CliResult<Vec<_>>>()?;
        results["component_verdicts"] = Value::Array(verdicts);
    }
    let mut inputs = target_json(&t);
    inputs["model"] = json!(model_name(path));
    inputs["exact"] = json!(exact);
    inputs["component_band_exponent"] = json!(component_band);
    let mut r = RunReport::new("compose", inputs, results);
    r.warnings = warnings;
    Ok(r)
}

fn calibrate(input_factor: f64, output_factor: f64) -> CliResult<RunReport> {
    let c = calibration_max_ops(CalibrationQuery {
        input_class_factor: input_factor,
        output_class_factor: output_factor,
    })?;
    let chain: Vec<Value> = (1..=c.max_operations.saturating_add(1).min(16))
        .map(|k| {
            let increase: f64 = op_chain_inflation(k, InflationMode::Exact);
            json!({"operations": k, "increase": increase, "admissible": 1.0 + increase <= c.allowed_inflation * (1.0 + f64::EPSILON * 64.0)})
        })
        .collect();
    Ok(RunReport::new(
        "calibrate",
        json!({"input_factor": input_factor, "output_factor": output_factor}),
        json!({"allowed_inflation": c.allowed_inflation, "max_operations": c.max_operations, "chain": chain}),
    ))
}
