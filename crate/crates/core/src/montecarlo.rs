//! Seeded Monte Carlo oracle and kernel density estimation.
//!
//! # Stream layout
//!
//! Sample index `i` belongs to chunk `i / CHUNK_SAMPLES`. Chunk `c` draws
//! from a ChaCha8 generator seeded with `seed_from_u64(seed)` on stream `c`,
//! so output does not depend on how chunks are spread over threads. Within a
//! sample, variables are drawn in lexicographic name order. Every normal or
//! log-normal variable consumes two 64-bit words (one Box–Muller pair, cosine
//! branch only); point masses consume nothing.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{gaussian_pdf, DistributionSpec};
use crate::error::{Error, Result};
use crate::propagation::{propagate_lognormal, propagate_moments};
use crate::riskmodel::{RiskExpr, RiskModel, VariableId};
use crate::scalar::Scalar;

/// Samples per independent random stream.
pub const CHUNK_SAMPLES: usize = 4096;

/// Grid points of a density curve when no grid is configured.
pub const DEFAULT_GRID_POINTS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<T> {
    pub min: T,
    pub max: T,
    pub points: usize,
}

impl<T: Scalar> GridSpec<T> {
    pub fn new(min: T, max: T, points: usize) -> Result<Self> {
        if !(min < max) || !min.is_finite() || !max.is_finite() {
            return Err(Error::domain(format!("grid needs finite min < max, got [{min}, {max}]")));
        }
        if points < 2 {
            return Err(Error::domain("grid needs at least two points"));
        }
        Ok(Self { min, max, points })
    }

    pub fn values(&self) -> Vec<T> {
        let step = (self.max - self.min) / T::from_count(self.points - 1);
        (0..self.points)
            .map(|i| {
                if i + 1 == self.points {
                    self.max
                } else {
                    self.min + step * T::from_count(i)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig<T> {
    pub samples: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<T>,
}

impl<T: Scalar> SimConfig<T> {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self {
            samples,
            seed,
            grid: None,
            bandwidth: None,
        }
    }

    pub fn with_grid(mut self, grid: GridSpec<T>) -> Self {
        self.grid = Some(grid);
        self
    }

    pub fn with_bandwidth(mut self, bandwidth: T) -> Self {
        self.bandwidth = Some(bandwidth);
        self
    }

    fn check(&self) -> Result<()> {
        if self.samples < 2 {
            return Err(Error::domain("simulation needs at least two samples"));
        }
        if let Some(g) = &self.grid {
            GridSpec::new(g.min, g.max, g.points)?;
        }
        if let Some(h) = self.bandwidth {
            if !(h > T::zero() && h.is_finite()) {
                return Err(Error::domain(format!("bandwidth must be positive, got {h}")));
            }
        }
        Ok(())
    }
}

/// Summary of a sample: mean, standard deviation (n − 1 denominator) and the
/// moment skewness `m3 / m2^(3/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleStats<T> {
    pub n: usize,
    pub mean: T,
    pub sd: T,
    pub skewness: T,
}

impl<T: Scalar> SampleStats<T> {
    pub fn from_samples(samples: &[T]) -> Self {
        let n = samples.len();
        let nf = T::from_count(n);
        let rough = samples.iter().fold(T::zero(), |a, &x| a + x) / nf;
        // second pass removes the rounding of the first; constant samples come out exact
        let mean = rough + samples.iter().fold(T::zero(), |a, &x| a + (x - rough)) / nf;
        let (m2, m3) = samples.iter().fold((T::zero(), T::zero()), |(s2, s3), &x| {
            let d = x - mean;
            (s2 + d * d, s3 + d * d * d)
        });
        let sd = if n > 1 {
            (m2 / T::from_count(n - 1)).sqrt()
        } else {
            T::zero()
        };
        let pop2 = m2 / nf;
        let skewness = if pop2 > T::zero() {
            (m3 / nf) / pop2.powf(T::c(1.5))
        } else {
            T::zero()
        };
        Self { n, mean, sd, skewness }
    }

    /// Standard error of the mean.
    pub fn standard_error(&self) -> T {
        self.sd / T::from_count(self.n).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation<T> {
    pub stats: SampleStats<T>,
    pub samples: Vec<T>,
}

/// Variables indexed in draw order plus the expression over those indices.
struct Compiled<T> {
    draws: Vec<DistributionSpec<T>>,
    root: Node,
}

enum Node {
    Leaf(usize),
    Sum(Vec<Node>),
    Product(Vec<Node>),
}

impl Node {
    fn compile(e: &RiskExpr, index: &dyn Fn(&VariableId) -> usize) -> Self {
        match e {
            RiskExpr::Leaf(id) => Node::Leaf(index(id)),
            RiskExpr::Sum(c) => Node::Sum(c.iter().map(|c| Node::compile(c, index)).collect()),
            RiskExpr::Product(c) => Node::Product(c.iter().map(|c| Node::compile(c, index)).collect()),
        }
    }

    fn eval<T: Scalar>(&self, values: &[T]) -> T {
        match self {
            Node::Leaf(i) => values[*i],
            Node::Sum(c) => c.iter().fold(T::zero(), |a, n| a + n.eval(values)),
            Node::Product(c) => c.iter().fold(T::one(), |a, n| a * n.eval(values)),
        }
    }
}

impl<T: Scalar> Compiled<T> {
    fn new(m: &RiskModel<T>) -> Self {
        let names: Vec<&VariableId> = m.variables.keys().collect();
        let index = |id: &VariableId| names.binary_search(&id).expect("validated model");
        Self {
            draws: m.variables.values().copied().collect(),
            root: Node::compile(&m.expression, &index),
        }
    }

    fn sample_chunk(&self, seed: u64, chunk: usize, len: usize) -> Vec<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(chunk as u64);
        let mut values = vec![T::zero(); self.draws.len()];
        (0..len)
            .map(|_| {
                for (slot, d) in values.iter_mut().zip(&self.draws) {
                    *slot = match *d {
                        DistributionSpec::Normal(m) => m.mean + m.sd * standard_normal(&mut rng),
                        DistributionSpec::LogNormal(p) => (p.mu_log + p.sigma_log * standard_normal(&mut rng)).exp(),
                        DistributionSpec::PointMass { value } => value,
                    };
                }
                self.root.eval(&values)
            })
            .collect()
    }
}

/// Box–Muller, cosine branch: `sqrt(-2 ln u1) cos(2π u2)` with `u1 ∈ (0, 1]`.
fn standard_normal<T: Scalar>(rng: &mut ChaCha8Rng) -> T {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 * SCALE;
    let u2 = (rng.next_u64() >> 11) as f64 * SCALE;
    let (u1, u2) = (T::c(u1), T::c(u2));
    (T::c(-2.0) * u1.ln()).sqrt() * (T::TAU() * u2).cos()
}

/// Draws `cfg.samples` evaluations of the model expression.
///
/// Output is a pure function of the model, `cfg.samples` and `cfg.seed`.
pub fn simulate<T: Scalar>(m: &RiskModel<T>, cfg: &SimConfig<T>) -> Result<Simulation<T>> {
    m.ensure_valid()?;
    cfg.check()?;
    let compiled = Compiled::new(m);
    let chunks = cfg.samples.div_ceil(CHUNK_SAMPLES);
    let parts: Vec<Vec<T>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK_SAMPLES.min(cfg.samples - c * CHUNK_SAMPLES);
            compiled.sample_chunk(cfg.seed, c, len)
        })
        .collect();
    let samples: Vec<T> = parts.into_iter().flatten().collect();
    Ok(Simulation {
        stats: SampleStats::from_samples(&samples),
        samples,
    })
}

/// Density evaluated on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityCurve<T> {
    pub grid: Vec<T>,
    pub density: Vec<T>,
    pub bandwidth: T,
}

impl<T: Scalar> DensityCurve<T> {
    /// Trapezoid integral over the grid.
    pub fn integral(&self) -> T {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .fold(T::zero(), |acc, (x, y)| acc + (x[1] - x[0]) * (y[0] + y[1]) / T::c(2.0))
    }

    /// Skewness of the normalized curve, by trapezoid moments.
    pub fn skewness(&self) -> T {
        let moment = |f: &dyn Fn(T) -> T| {
            let vals: Vec<T> = self.grid.iter().zip(&self.density).map(|(&x, &d)| f(x) * d).collect();
            self.grid
                .windows(2)
                .zip(vals.windows(2))
                .fold(T::zero(), |acc, (x, y)| acc + (x[1] - x[0]) * (y[0] + y[1]) / T::c(2.0))
        };
        let mass = self.integral();
        let mean = moment(&|x| x) / mass;
        let var = moment(&|x| (x - mean) * (x - mean)) / mass;
        let third = moment(&|x| (x - mean) * (x - mean) * (x - mean)) / mass;
        third / var.powf(T::c(1.5))
    }

    /// Density at `x` by linear interpolation; zero outside the grid.
    pub fn at(&self, x: T) -> T {
        let i = self.grid.partition_point(|&g| g <= x);
        if i == 0 || i == self.grid.len() {
            return if i > 0 && x == self.grid[i - 1] { self.density[i - 1] } else { T::zero() };
        }
        let (x0, x1) = (self.grid[i - 1], self.grid[i]);
        let w = (x - x0) / (x1 - x0);
        self.density[i - 1] * (T::one() - w) + self.density[i] * w
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted<T: Scalar>(sorted: &[T], p: T) -> T {
    let h = T::from_count(sorted.len() - 1) * p;
    let lo = h.floor().to_usize().unwrap_or(0);
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (h - T::from_count(lo))
}

/// Silverman's rule `0.9 · min(sd, IQR / 1.34) · n^(-1/5)`.
///
/// Falls back to the standard deviation when the interquartile range is zero.
pub fn silverman_bandwidth<T: Scalar>(samples: &[T]) -> Result<T> {
    if samples.len() < 2 {
        return Err(Error::DegenerateSample("need at least two samples".into()));
    }
    let sd = SampleStats::from_samples(samples).sd;
    if !(sd > T::zero()) {
        return Err(Error::DegenerateSample("samples have zero spread".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let iqr = quantile_sorted(&sorted, T::c(0.75)) - quantile_sorted(&sorted, T::c(0.25));
    let spread = if iqr > T::zero() { sd.min(iqr / T::c(1.34)) } else { sd };
    Ok(T::c(0.9) * spread * T::from_count(samples.len()).powf(T::c(-0.2)))
}

/// Gaussian kernel density estimate.
///
/// Uses `cfg.bandwidth` and `cfg.grid` when set; otherwise Silverman's
/// bandwidth `h` on 512 points spanning `[min − 3h, max + 3h]`.
pub fn kde<T: Scalar>(samples: &[T], cfg: &SimConfig<T>) -> Result<DensityCurve<T>> {
    if samples.len() < 2 {
        return Err(Error::DegenerateSample("need at least two samples".into()));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::DegenerateSample("samples must be finite".into()));
    }
    let (lo, hi) = samples
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if !(hi > lo) {
        return Err(Error::DegenerateSample("samples have zero spread".into()));
    }
    let h = match cfg.bandwidth {
        Some(h) if h > T::zero() && h.is_finite() => h,
        Some(h) => return Err(Error::domain(format!("bandwidth must be positive, got {h}"))),
        None => silverman_bandwidth(samples)?,
    };
    let grid = match cfg.grid {
        Some(g) => GridSpec::new(g.min, g.max, g.points)?,
        None => GridSpec::new(lo - T::c(3.0) * h, hi + T::c(3.0) * h, DEFAULT_GRID_POINTS)?,
    }
    .values();
    let norm = T::one() / (T::from_count(samples.len()) * h);
    let density = grid
        .par_iter()
        .map(|&x| {
            samples
                .iter()
                .fold(T::zero(), |acc, &s| acc + gaussian_pdf((x - s) / h))
                * norm
        })
        .collect();
    Ok(DensityCurve {
        grid,
        density,
        bandwidth: h,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveId {
    /// Kernel density estimate of the simulated output.
    Kde,
    /// Normal density with the propagated mean and standard deviation.
    Normal,
    /// Normal density at the output mean with the least uncertain input's relative spread.
    Reference,
    /// Log-normal density of the propagated log parameters.
    LogNormal,
}

impl CurveId {
    pub fn as_str(&self) -> &'static str {
        match self {
            CurveId::Kde => "kde",
            CurveId::Normal => "normal",
            CurveId::Reference => "reference",
            CurveId::LogNormal => "lognormal",
        }
    }
}

/// Density curves sharing one grid, for comparing simulation and analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct Overlay<T> {
    pub stats: SampleStats<T>,
    pub curves: Vec<(CurveId, DensityCurve<T>)>,
    /// Variable whose relative spread defines the reference curve.
    pub reference_variable: Option<VariableId>,
}

impl<T: Scalar> Overlay<T> {
    pub fn curve(&self, id: CurveId) -> Option<&DensityCurve<T>> {
        self.curves.iter().find(|(c, _)| *c == id).map(|(_, d)| d)
    }
}

/// Simulates the model and evaluates the comparison curves on the KDE grid.
///
/// The log-normal curve is included only for models that admit log-normal
/// propagation (pure products of positive factors).
pub fn overlay_curves<T: Scalar>(m: &RiskModel<T>, cfg: &SimConfig<T>) -> Result<Overlay<T>> {
    let sim = simulate(m, cfg)?;
    let kde_curve = kde(&sim.samples, cfg)?;
    let grid = kde_curve.grid.clone();
    let h = kde_curve.bandwidth;
    let normal_curve = |mean: T, sd: T| DensityCurve {
        density: grid.iter().map(|&x| gaussian_pdf((x - mean) / sd) / sd).collect(),
        grid: grid.clone(),
        bandwidth: h,
    };

    let moments = propagate_moments(m)?;
    let mut curves = vec![(CurveId::Kde, kde_curve.clone())];
    if moments.sd > T::zero() {
        curves.push((CurveId::Normal, normal_curve(moments.mean, moments.sd)));
    }

    let reference = m
        .variables
        .iter()
        .filter_map(|(id, d)| {
            let mp = d.moments();
            (mp.sd > T::zero() && mp.mean > T::zero()).then(|| (id, mp.relative_sd()))
        })
        .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite spreads"));
    if let Some((_, cv)) = reference {
        let sd = moments.mean.abs() * cv;
        if sd > T::zero() {
            curves.push((CurveId::Reference, normal_curve(moments.mean, sd)));
        }
    }

    if let Ok(p) = propagate_lognormal(m) {
        if p.sigma_log > T::zero() {
            curves.push((
                CurveId::LogNormal,
                DensityCurve {
                    density: grid.iter().map(|&x| p.pdf(x)).collect(),
                    grid: grid.clone(),
                    bandwidth: h,
                },
            ));
        }
    }

    Ok(Overlay {
        stats: sim.stats,
        curves,
        reference_variable: reference.map(|(id, _)| id.clone()),
    })
}

fn csv_writer<W: std::io::Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

fn csv_err(e: csv::Error) -> std::io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => std::io::Error::other(format!("{other:?}")),
    }
}

/// Writes samples as a single `value` column.
pub fn write_samples_csv<T: Scalar, W: std::io::Write>(samples: &[T], out: W) -> std::io::Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["value"]).map_err(csv_err)?;
    for s in samples {
        w.write_record([s.to_string()]).map_err(csv_err)?;
    }
    w.flush()
}

/// Writes `x,density` rows of one curve.
pub fn write_curve_csv<T: Scalar, W: std::io::Write>(curve: &DensityCurve<T>, out: W) -> std::io::Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["x", "density"]).map_err(csv_err)?;
    for (x, d) in curve.grid.iter().zip(&curve.density) {
        w.write_record([x.to_string(), d.to_string()]).map_err(csv_err)?;
    }
    w.flush()
}

/// Writes `x,density,curve_id` rows for several curves.
pub fn write_curves_csv<T: Scalar, W: std::io::Write>(
    curves: &[(CurveId, DensityCurve<T>)],
    out: W,
) -> std::io::Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["x", "density", "curve_id"]).map_err(csv_err)?;
    for (id, curve) in curves {
        for (x, d) in curve.grid.iter().zip(&curve.density) {
            w.write_record([x.to_string(), d.to_string(), id.as_str().to_string()])
                .map_err(csv_err)?;
        }
    }
    w.flush()
}
