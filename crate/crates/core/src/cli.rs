//! Batch front end.
//!
//! A single TOML config declares the system, the potential, and the
//! numeric knobs; subcommands decide what gets computed. Every run
//! writes a schema-versioned `report.json` (byte-identical across runs
//! of the same config and seed) plus CSV plot data where a table is
//! natural.
//!
//! Exit codes: 0 on success, 2 when every produced verdict is
//! inconclusive, 1 on errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classify::{classify_measure, MeasureRef, TypeVerdict};
use crate::conformal::{
    atomic_periodic, atomic_summable, coboundary_conformal_density, conformality_residual,
    conformality_residual_density, hopf_construct, spectrum_scan, worst_residual,
    DensityMeasure, ExistenceVerdict, PeriodicOutcome, SpectrumVerdict, SummabilityReport,
    SummableOutcome, WeightedAtomicMeasure,
};
use crate::dynsys::{ConjugatedRotation, DynSystem, Point, RotationNumber};
use crate::error::{Error, Result};
use crate::flowprops::{approx_inner_test, hn_defect, innerness_test, FlowPropertyReport};
use crate::kms_finite::{CyclicCheck, FiniteOrbitModel};
use crate::potential::{
    build_appendix_a, build_appendix_b, solve_coboundary_fourier, AppendixAConfig, Potential,
    Precision, SawtoothCertificate, TargetSpec, TentCertificate, TrigPoly,
};
use crate::report::{
    write_json, write_measure_csv, write_spectrum_csv, write_table_csv, ReportEnvelope,
};

#[derive(Debug, Parser)]
#[command(name = "conflab", version, about = "conformal measures and KMS states for concrete dynamics", long_about = None)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Path to the TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for report.json and CSV side files.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Size of the worker thread pool (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// RNG seed; overrides the config's `run.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Scan a β grid for existence of e^{βF}-conformal measures.
    Spectrum,
    /// Construct a conformal measure (orbit-weighted or density).
    Construct,
    /// Construct a measure and classify its Krieger type.
    Classify,
    /// Exact Gibbs/KMS data on a finite cycle.
    Gibbs,
    /// Build a certified potential and report its certificate.
    PotentialBuild,
    /// Innerness, approximate innerness, and averaged-transfer decay.
    FlowProps,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Construct => "construct",
            Command::Classify => "classify",
            Command::Gibbs => "gibbs",
            Command::PotentialBuild => "potential-build",
            Command::FlowProps => "flow-props",
        }
    }
}

// ---------------------------------------------------------------------------
// Config file schema
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Optional echo of the intended subcommand; must match when set.
    #[serde(default)]
    pub command: Option<String>,
    pub system: SystemSpec,
    pub potential: PotentialSpec,
    #[serde(default)]
    pub grid: BetaGrid,
    #[serde(default)]
    pub run: RunParams,
    /// Arithmetic mode for constructions that support both; the
    /// CONFLAB_PRECISION env var overrides this.
    #[serde(default)]
    pub precision: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    /// rotation | conjugated_rotation | squaring | finite_cycle
    pub kind: String,
    #[serde(default)]
    pub rotation: Option<RotationSpec>,
    /// Warp amplitude for conjugated_rotation.
    #[serde(default = "default_warp")]
    pub warp: f64,
    /// Period for finite_cycle.
    #[serde(default = "default_period")]
    pub period: u32,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum RotationSpec {
    /// "golden" or "silver".
    Name(String),
    /// Continued-fraction expansion head + repeating tail.
    ContinuedFraction { head: Vec<u64>, tail: Vec<u64> },
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Harmonic {
    pub freq: u32,
    pub amp: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    /// constant | affine | trig | coboundary | cycle_values |
    /// appendix_a | appendix_b
    pub kind: String,
    #[serde(default = "default_value")]
    pub value: f64,
    #[serde(default = "default_slope")]
    pub slope: f64,
    #[serde(default = "default_intercept")]
    pub intercept: f64,
    /// Constant term of a trig polynomial (or of the primitive for
    /// kind = coboundary).
    #[serde(default)]
    pub mean: f64,
    #[serde(default)]
    pub cos: Vec<Harmonic>,
    #[serde(default)]
    pub sin: Vec<Harmonic>,
    #[serde(default = "default_cycle_values")]
    pub values: Vec<f64>,
    #[serde(default)]
    pub base_points: Vec<f64>,
    #[serde(default)]
    pub targets: Vec<TargetSpec>,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default = "default_guard_horizon")]
    pub guard_horizon: u64,
    #[serde(default = "default_check_window")]
    pub check_window: u64,
    /// Level count for appendix_b.
    #[serde(default = "default_k_levels")]
    pub k_levels: u32,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaGrid {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Default for BetaGrid {
    fn default() -> Self {
        BetaGrid {
            min: -4.0,
            max: 4.0,
            steps: 17,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunParams {
    /// Existence-protocol horizon (spectrum) / classification horizon.
    pub horizon: usize,
    /// Cesàro tail tolerance.
    pub tolerance: f64,
    /// Boundary-mass ratio target for the window-growth construction.
    pub ratio_tol: f64,
    /// Horizon cap for the window-growth construction.
    pub max_horizon: usize,
    /// Series depth for the summable-orbit construction.
    pub summable_n: usize,
    /// Quadrature nodes for density measures and their residuals.
    pub quadrature_grid: usize,
    /// Explicit seed coordinates; drawn from the RNG when empty.
    pub seed_points: Vec<f64>,
    /// How many seed points to draw when none are given.
    pub seed_count: usize,
    /// Base coordinate for orbit constructions (circle/interval).
    pub base_point: f64,
    /// Base index for finite-cycle constructions (1-based).
    pub base_index: u32,
    /// Expected period for the periodic construction; 0 = the system's.
    pub period: u32,
    /// β for single-measure commands.
    pub beta: f64,
    /// Construction method: hopf | periodic | summable | density.
    pub method: String,
    /// Random matrix pairs for the KMS residual sweep.
    pub trials: usize,
    /// Averaged-transfer horizons for flow-props.
    pub n_list: Vec<usize>,
    /// Sample grid for flow-props sup norms.
    pub flow_grid: usize,
    /// RNG seed (overridden by --seed).
    pub seed: u64,
}

impl Default for RunParams {
    fn default() -> Self {
        RunParams {
            horizon: 100_000,
            tolerance: 1e-3,
            ratio_tol: 1e-4,
            max_horizon: 100_000,
            summable_n: 20_000,
            quadrature_grid: 16_384,
            seed_points: Vec::new(),
            seed_count: 3,
            base_point: 0.0,
            base_index: 1,
            period: 0,
            beta: 1.0,
            method: "hopf".into(),
            trials: 100,
            n_list: vec![100, 1_000, 10_000],
            flow_grid: 4_096,
            seed: 7,
        }
    }
}

fn default_warp() -> f64 {
    0.35
}
fn default_period() -> u32 {
    3
}
fn default_value() -> f64 {
    1.0
}
fn default_slope() -> f64 {
    1.0
}
fn default_intercept() -> f64 {
    -0.5
}
fn default_cycle_values() -> Vec<f64> {
    vec![1.0, -1.0]
}
fn default_depth() -> usize {
    3
}
fn default_guard_horizon() -> u64 {
    12_000
}
fn default_check_window() -> u64 {
    1_000
}
fn default_k_levels() -> u32 {
    2
}

// ---------------------------------------------------------------------------
// Config → domain objects
// ---------------------------------------------------------------------------

fn build_rotation_number(spec: &Option<RotationSpec>) -> Result<RotationNumber> {
    match spec {
        None => Ok(RotationNumber::golden()),
        Some(RotationSpec::Name(name)) => match name.as_str() {
            "golden" => Ok(RotationNumber::golden()),
            "silver" => Ok(RotationNumber::silver()),
            other => Err(Error::Config {
                field: "system.rotation".into(),
                detail: format!("unknown rotation '{other}', expected golden|silver or a continued fraction"),
            }),
        },
        Some(RotationSpec::ContinuedFraction { head, tail }) => {
            RotationNumber::quadratic(head.clone(), tail.clone())
        }
    }
}

pub fn build_system(spec: &SystemSpec) -> Result<DynSystem> {
    match spec.kind.as_str() {
        "rotation" => Ok(DynSystem::rotation(build_rotation_number(&spec.rotation)?)),
        "conjugated_rotation" => Ok(DynSystem::ConjugatedRotation(ConjugatedRotation::sine_warp(
            build_rotation_number(&spec.rotation)?,
            spec.warp,
        )?)),
        "squaring" => Ok(DynSystem::squaring()),
        "finite_cycle" => DynSystem::finite_cycle(spec.period),
        other => Err(Error::Config {
            field: "system.kind".into(),
            detail: format!(
                "unknown system '{other}', expected rotation|conjugated_rotation|squaring|finite_cycle"
            ),
        }),
    }
}

fn trig_from_spec(spec: &PotentialSpec) -> TrigPoly {
    let mut tp = TrigPoly::new(spec.mean, BTreeMap::new());
    for h in &spec.cos {
        tp = tp.add(&TrigPoly::cosine(h.freq, h.amp));
    }
    for h in &spec.sin {
        tp = tp.add(&TrigPoly::sine(h.freq, h.amp));
    }
    tp
}

pub fn build_potential(
    spec: &PotentialSpec,
    system: &DynSystem,
    precision: Precision,
) -> Result<Potential> {
    match spec.kind.as_str() {
        "constant" => Ok(Potential::Constant(spec.value)),
        "affine" => Ok(Potential::affine(spec.slope, spec.intercept)),
        "trig" => Ok(Potential::TrigPoly(trig_from_spec(spec))),
        "coboundary" => Ok(Potential::coboundary(Potential::TrigPoly(trig_from_spec(
            spec,
        )))),
        "cycle_values" => Ok(Potential::from_cycle_values(spec.values.clone())),
        "appendix_a" => {
            let mut cfg = AppendixAConfig::new(spec.base_points.clone(), spec.targets.clone());
            cfg.depth = spec.depth;
            cfg.guard_horizon = spec.guard_horizon;
            cfg.check_window = spec.check_window;
            build_appendix_a(system, &cfg)
        }
        "appendix_b" => build_appendix_b(system, spec.k_levels, precision),
        other => Err(Error::Config {
            field: "potential.kind".into(),
            detail: format!("unknown potential '{other}'"),
        }),
    }
}

fn resolve_precision(config: &RunConfig) -> Result<Precision> {
    let chosen = match std::env::var("CONFLAB_PRECISION") {
        Ok(v) => Some(v),
        Err(_) => config.precision.clone(),
    };
    match chosen.as_deref() {
        None | Some("exact") => Ok(Precision::Exact),
        Some("float") => Ok(Precision::Float),
        Some(other) => Err(Error::Config {
            field: "precision".into(),
            detail: format!("unknown mode '{other}', expected float or exact"),
        }),
    }
}

fn point_on(system: &DynSystem, v: f64) -> Result<Point> {
    match system {
        DynSystem::SquaringMap => Point::interval(v),
        DynSystem::FiniteCycle { period } => {
            let idx = (v.rem_euclid(f64::from(*period)) as u32).clamp(0, period - 1) + 1;
            Point::cycle(*period, idx)
        }
        _ => Ok(Point::circle(v)),
    }
}

fn seed_points(system: &DynSystem, run: &RunParams, seed: u64) -> Result<Vec<Point>> {
    if let DynSystem::FiniteCycle { period } = system {
        return (1..=*period).map(|i| Point::cycle(*period, i)).collect();
    }
    let coords: Vec<f64> = if run.seed_points.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..run.seed_count.max(1))
            .map(|_| rng.gen_range(0.0..1.0))
            .collect()
    } else {
        run.seed_points.clone()
    };
    coords.iter().map(|&v| point_on(system, v)).collect()
}

fn base_point(system: &DynSystem, run: &RunParams) -> Result<Point> {
    match system {
        DynSystem::FiniteCycle { period } => Point::cycle(*period, run.base_index),
        DynSystem::SquaringMap => Point::interval(run.base_point),
        _ => Ok(Point::circle(run.base_point)),
    }
}

fn beta_grid(grid: &BetaGrid) -> Result<Vec<f64>> {
    if grid.steps == 0 {
        return Err(Error::Config {
            field: "grid.steps".into(),
            detail: "the β grid must be nonempty".into(),
        });
    }
    if grid.min > grid.max {
        return Err(Error::Config {
            field: "grid.min".into(),
            detail: format!("min {} exceeds max {}", grid.min, grid.max),
        });
    }
    if grid.steps == 1 {
        return Ok(vec![grid.min]);
    }
    let h = (grid.max - grid.min) / (grid.steps - 1) as f64;
    Ok((0..grid.steps).map(|i| grid.min + i as f64 * h).collect())
}

fn validate(config: &RunConfig) -> Result<()> {
    if config.run.tolerance <= 0.0 {
        return Err(Error::Config {
            field: "run.tolerance".into(),
            detail: format!("must be positive, got {}", config.run.tolerance),
        });
    }
    if config.run.ratio_tol <= 0.0 {
        return Err(Error::Config {
            field: "run.ratio_tol".into(),
            detail: format!("must be positive, got {}", config.run.ratio_tol),
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Report plumbing
// ---------------------------------------------------------------------------

fn fmt_f(v: f64) -> String {
    format!("{v:.17e}")
}

fn system_label(spec: &SystemSpec) -> String {
    match spec.kind.as_str() {
        "rotation" | "conjugated_rotation" => {
            let rot = match &spec.rotation {
                None => "golden".to_string(),
                Some(RotationSpec::Name(n)) => n.clone(),
                Some(RotationSpec::ContinuedFraction { head, tail }) => {
                    format!("cf({head:?};{tail:?})")
                }
            };
            if spec.kind == "rotation" {
                format!("rotation({rot})")
            } else {
                format!("conjugated_rotation({rot}, warp={})", fmt_f(spec.warp))
            }
        }
        "finite_cycle" => format!("finite_cycle({})", spec.period),
        other => other.to_string(),
    }
}

fn potential_label(spec: &PotentialSpec) -> String {
    match spec.kind.as_str() {
        "constant" => format!("constant({})", fmt_f(spec.value)),
        "affine" => format!(
            "affine(slope={}, intercept={})",
            fmt_f(spec.slope),
            fmt_f(spec.intercept)
        ),
        "trig" | "coboundary" => {
            let mut parts = vec![format!("mean={}", fmt_f(spec.mean))];
            for h in &spec.cos {
                parts.push(format!("cos{}×{}", h.freq, fmt_f(h.amp)));
            }
            for h in &spec.sin {
                parts.push(format!("sin{}×{}", h.freq, fmt_f(h.amp)));
            }
            format!("{}({})", spec.kind, parts.join(", "))
        }
        "cycle_values" => format!("cycle_values({:?})", spec.values),
        "appendix_a" => format!(
            "appendix_a(bases={:?}, targets={}, depth={})",
            spec.base_points,
            spec.targets.len(),
            spec.depth
        ),
        "appendix_b" => format!("appendix_b(k_levels={})", spec.k_levels),
        other => other.to_string(),
    }
}

fn echo_inputs<T: Serialize>(
    env: ReportEnvelope<T>,
    config: &RunConfig,
    seed: u64,
    precision: Precision,
) -> ReportEnvelope<T> {
    let r = &config.run;
    env.input("system", system_label(&config.system))
        .input("potential", potential_label(&config.potential))
        .input(
            "beta_grid",
            format!(
                "[{}, {}] × {}",
                fmt_f(config.grid.min),
                fmt_f(config.grid.max),
                config.grid.steps
            ),
        )
        .input("horizon", r.horizon.to_string())
        .input("tolerance", fmt_f(r.tolerance))
        .input("ratio_tol", fmt_f(r.ratio_tol))
        .input("max_horizon", r.max_horizon.to_string())
        .input("summable_n", r.summable_n.to_string())
        .input("quadrature_grid", r.quadrature_grid.to_string())
        .input("seed", seed.to_string())
        .input(
            "seed_points",
            if r.seed_points.is_empty() {
                format!("{} drawn from seed", r.seed_count.max(1))
            } else {
                let coords: Vec<String> = r.seed_points.iter().map(|v| fmt_f(*v)).collect();
                coords.join(", ")
            },
        )
        .input("base_point", fmt_f(r.base_point))
        .input("beta", fmt_f(r.beta))
        .input("method", r.method.clone())
        .input("trials", r.trials.to_string())
        .input(
            "precision",
            match precision {
                Precision::Float => "float".to_string(),
                Precision::Exact => "exact".to_string(),
            },
        )
}

/// Measure facts small enough to live in report.json; the atoms
/// themselves go to CSV.
#[derive(Clone, Debug, Serialize)]
pub struct MeasureSummary {
    pub beta: f64,
    pub k_range: (i64, i64),
    pub atom_count: usize,
    pub total_mass: f64,
    pub boundary_defect: f64,
    pub log_partition: f64,
}

impl MeasureSummary {
    fn of(m: &WeightedAtomicMeasure) -> Self {
        MeasureSummary {
            beta: m.beta,
            k_range: m.k_range,
            atom_count: m.points.len(),
            total_mass: m.total_mass(),
            boundary_defect: m.boundary_defect,
            log_partition: m.log_partition,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DensitySummary {
    pub beta: f64,
    pub alpha: f64,
    pub grid: usize,
    pub log_normalizer: f64,
    pub cobounding_defect: f64,
}

impl DensitySummary {
    fn of(d: &DensityMeasure) -> Self {
        DensitySummary {
            beta: d.beta,
            alpha: d.alpha,
            grid: d.grid,
            log_normalizer: d.log_normalizer,
            cobounding_defect: d.cobounding_defect,
        }
    }
}

/// Plot-data emission: CSV renderings of the report-sized objects.
pub enum PlotData<'a> {
    Spectrum(&'a SpectrumVerdict),
    Measure(&'a WeightedAtomicMeasure),
}

/// Write the CSV files for one report object into `out_dir`, returning
/// the paths written.
pub fn emit_plot_data(out_dir: &Path, data: &PlotData<'_>) -> Result<Vec<PathBuf>> {
    match data {
        PlotData::Spectrum(v) => {
            let path = out_dir.join("spectrum.csv");
            write_spectrum_csv(&path, v, &["one row per β".into()])?;
            Ok(vec![path])
        }
        PlotData::Measure(m) => {
            let path = out_dir.join("measure.csv");
            write_measure_csv(&path, m, &["one row per atom".into()])?;
            Ok(vec![path])
        }
    }
}

// ---------------------------------------------------------------------------
// Command handlers
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunOutcome {
    Success,
    /// Every verdict the run produced is inconclusive.
    InconclusiveOnly,
}

#[derive(Serialize)]
struct SpectrumPayload {
    verdict: SpectrumVerdict,
}

fn run_spectrum(
    config: &RunConfig,
    system: &DynSystem,
    f: &Potential,
    out: &Path,
    seed: u64,
    precision: Precision,
) -> Result<RunOutcome> {
    let betas = beta_grid(&config.grid)?;
    if !betas.iter().any(|b| b.abs() <= 1e-12) {
        return Err(Error::Config {
            field: "grid".into(),
            detail: "spectrum scans need 0 in the β grid (0 always belongs to the spectrum)"
                .into(),
        });
    }
    let seeds = seed_points(system, &config.run, seed)?;
    let verdict = spectrum_scan(
        system,
        f,
        &betas,
        &seeds,
        config.run.horizon,
        config.run.tolerance,
    )?;
    let all_inconclusive = verdict
        .lines
        .iter()
        .all(|l| l.verdict == ExistenceVerdict::Inconclusive);
    emit_plot_data(out, &PlotData::Spectrum(&verdict))?;
    let env = echo_inputs(
        ReportEnvelope::new("spectrum", SpectrumPayload { verdict }),
        config,
        seed,
        precision,
    );
    write_json(&out.join("report.json"), &env)?;
    Ok(if all_inconclusive {
        RunOutcome::InconclusiveOnly
    } else {
        RunOutcome::Success
    })
}

#[derive(Serialize)]
struct ConstructPayload {
    method: String,
    /// measure | not_cyclic | divergent
    outcome: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    measure: Option<MeasureSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    density: Option<DensitySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    residuals: Option<BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    worst_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    boundary_ratio_history: Option<Vec<(usize, f64)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    window_schedule: Option<Vec<(i64, i64)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    summability: Option<SummabilityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    loop_defect: Option<f64>,
}

impl ConstructPayload {
    fn new(method: &str, outcome: &str) -> Self {
        ConstructPayload {
            method: method.into(),
            outcome: outcome.into(),
            measure: None,
            density: None,
            residuals: None,
            worst_residual: None,
            converged: None,
            boundary_ratio_history: None,
            window_schedule: None,
            summability: None,
            loop_defect: None,
        }
    }
}

/// Requested period for the periodic construction: explicit when set,
/// otherwise the system's own cycle length.
fn effective_period(system: &DynSystem, run: &RunParams) -> Result<u32> {
    if run.period > 0 {
        return Ok(run.period);
    }
    match system {
        DynSystem::FiniteCycle { period } => Ok(*period),
        _ => Err(Error::Config {
            field: "run.period".into(),
            detail: "the periodic construction needs an explicit period on this system".into(),
        }),
    }
}

fn density_transfer(f: &Potential, system: &DynSystem) -> Result<TrigPoly> {
    match (f, system) {
        (Potential::Coboundary(inner), _) => match inner.as_ref() {
            Potential::TrigPoly(h) => Ok(h.clone()),
            _ => Err(Error::CriterionInapplicable(
                "the density construction needs a trigonometric transfer function".into(),
            )),
        },
        (Potential::TrigPoly(tp), DynSystem::Rotation(rot)) => solve_coboundary_fourier(tp, rot),
        _ => Err(Error::CriterionInapplicable(
            "the density construction needs a trig-polynomial potential (or a declared \
             coboundary of one) on a rotation"
                .into(),
        )),
    }
}

enum Built {
    Atomic(WeightedAtomicMeasure),
    Density(DensityMeasure),
}

fn run_construct(
    config: &RunConfig,
    system: &DynSystem,
    f: &Potential,
    out: &Path,
    seed: u64,
    precision: Precision,
) -> Result<RunOutcome> {
    let r = &config.run;
    let beta = r.beta;
    let x = base_point(system, r)?;
    let mut payload;
    let mut outcome = RunOutcome::Success;
    let mut measure_for_csv: Option<WeightedAtomicMeasure> = None;
    let mut density_for_csv: Option<DensityMeasure> = None;

    match r.method.as_str() {
        "hopf" => {
            let rep = hopf_construct(system, f, &x, beta, r.ratio_tol, r.max_horizon, &[])?;
            payload = ConstructPayload::new("hopf", "measure");
            payload.measure = Some(MeasureSummary::of(&rep.measure));
            payload.worst_residual = Some(rep.worst_residual());
            payload.residuals = Some(rep.residuals.clone());
            payload.converged = Some(rep.converged);
            payload.boundary_ratio_history = Some(rep.boundary_ratio_history.clone());
            payload.window_schedule = Some(rep.window_schedule.clone());
            if !rep.converged {
                outcome = RunOutcome::InconclusiveOnly;
            }
            measure_for_csv = Some(rep.measure);
        }
        "periodic" => {
            let p = effective_period(system, r)?;
            match atomic_periodic(system, f, &x, p, beta)? {
                PeriodicOutcome::Measure(m) => {
                    let residuals = conformality_residual(&m, system, f, beta, &[])?;
                    payload = ConstructPayload::new("periodic", "measure");
                    payload.measure = Some(MeasureSummary::of(&m));
                    payload.worst_residual = Some(worst_residual(&residuals));
                    payload.residuals = Some(residuals);
                    measure_for_csv = Some(m);
                }
                PeriodicOutcome::NotCyclic { period, defect } => {
                    payload = ConstructPayload::new("periodic", "not_cyclic");
                    payload.loop_defect = Some(defect);
                    payload.measure = None;
                    let _ = period;
                }
            }
        }
        "summable" => match atomic_summable(system, f, &x, beta, r.summable_n)? {
            SummableOutcome::Measure {
                measure,
                certificate,
            } => {
                let residuals = conformality_residual(&measure, system, f, beta, &[])?;
                payload = ConstructPayload::new("summable", "measure");
                payload.measure = Some(MeasureSummary::of(&measure));
                payload.worst_residual = Some(worst_residual(&residuals));
                payload.residuals = Some(residuals);
                payload.summability = Some(certificate);
                measure_for_csv = Some(measure);
            }
            SummableOutcome::Divergent(report) => {
                payload = ConstructPayload::new("summable", "divergent");
                payload.summability = Some(report);
            }
        },
        "density" => {
            let h = density_transfer(f, system)?;
            let dm = coboundary_conformal_density(&h, system, beta, r.quadrature_grid)?;
            let residuals =
                conformality_residual_density(&dm, system, f, &[], r.quadrature_grid)?;
            payload = ConstructPayload::new("density", "measure");
            payload.density = Some(DensitySummary::of(&dm));
            payload.worst_residual = Some(worst_residual(&residuals));
            payload.residuals = Some(residuals);
            density_for_csv = Some(dm);
        }
        other => {
            return Err(Error::Config {
                field: "run.method".into(),
                detail: format!("unknown method '{other}', expected hopf|periodic|summable|density"),
            })
        }
    }

    if let Some(m) = &measure_for_csv {
        emit_plot_data(out, &PlotData::Measure(m))?;
    }
    if let Some(dm) = &density_for_csv {
        let rows: Vec<Vec<f64>> = (0..512)
            .map(|i| {
                let xv = i as f64 / 512.0;
                vec![xv, dm.density(xv)]
            })
            .collect();
        write_table_csv(
            &out.join("density.csv"),
            &[format!("β = {}", fmt_f(dm.beta))],
            "x,density",
            &rows,
        )?;
    }
    let env = echo_inputs(
        ReportEnvelope::new("construct", payload),
        config,
        seed,
        precision,
    );
    write_json(&out.join("report.json"), &env)?;
    Ok(outcome)
}

#[derive(Serialize)]
struct ClassifyPayload {
    method: String,
    verdict: TypeVerdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    measure: Option<MeasureSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    density: Option<DensitySummary>,
}

fn build_measure(
    config: &RunConfig,
    system: &DynSystem,
    f: &Potential,
) -> Result<Built> {
    let r = &config.run;
    let beta = r.beta;
    let x = base_point(system, r)?;
    match r.method.as_str() {
        "hopf" => Ok(Built::Atomic(
            hopf_construct(system, f, &x, beta, r.ratio_tol, r.max_horizon, &[])?.measure,
        )),
        "periodic" => {
            let p = effective_period(system, r)?;
            match atomic_periodic(system, f, &x, p, beta)? {
                PeriodicOutcome::Measure(m) => Ok(Built::Atomic(m)),
                PeriodicOutcome::NotCyclic { period, defect } => {
                    Err(Error::ConstraintViolation {
                        condition: "conformal measure on the cycle".into(),
                        detail: format!(
                            "the {period}-cycle has loop defect {defect:.3e}; no measure exists \
                             to classify"
                        ),
                    })
                }
            }
        }
        "summable" => match atomic_summable(system, f, &x, beta, r.summable_n)? {
            SummableOutcome::Measure { measure, .. } => Ok(Built::Atomic(measure)),
            SummableOutcome::Divergent(_) => Err(Error::ConstraintViolation {
                condition: "summable orbit series".into(),
                detail: format!("the orbit series diverges at β = {beta}; no atomic measure"),
            }),
        },
        "density" => {
            let h = density_transfer(f, system)?;
            Ok(Built::Density(coboundary_conformal_density(
                &h,
                system,
                beta,
                r.quadrature_grid,
            )?))
        }
        other => Err(Error::Config {
            field: "run.method".into(),
            detail: format!("unknown method '{other}'"),
        }),
    }
}

fn run_classify(
    config: &RunConfig,
    system: &DynSystem,
    f: &Potential,
    out: &Path,
    seed: u64,
    precision: Precision,
) -> Result<RunOutcome> {
    let built = build_measure(config, system, f)?;
    let (verdict, measure, density) = match &built {
        Built::Atomic(m) => (
            classify_measure(
                MeasureRef::Atomic(m),
                system,
                f,
                config.run.beta,
                config.run.horizon,
            )?,
            Some(MeasureSummary::of(m)),
            None,
        ),
        Built::Density(d) => (
            classify_measure(
                MeasureRef::Density(d),
                system,
                f,
                config.run.beta,
                config.run.horizon,
            )?,
            None,
            Some(DensitySummary::of(d)),
        ),
    };
    if let Built::Atomic(m) = &built {
        emit_plot_data(out, &PlotData::Measure(m))?;
    }
    let payload = ClassifyPayload {
        method: config.run.method.clone(),
        verdict,
        measure,
        density,
    };
    let env = echo_inputs(
        ReportEnvelope::new("classify", payload),
        config,
        seed,
        precision,
    );
    write_json(&out.join("report.json"), &env)?;
    Ok(RunOutcome::Success)
}

#[derive(Serialize)]
struct GibbsPayload {
    period: usize,
    beta: f64,
    cyclic: CyclicCheck,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    /// Worst KMS defect over the random matrix-pair sweep.
    kms_residual_random: f64,
    trials: usize,
    /// Frobenius norms of π_z(U^p − z₀·1) at z₀ = 1 and z₁ = −1.
    non_injectivity_witness: (f64, f64),
}

fn run_gibbs(
    config: &RunConfig,
    system: &DynSystem,
    f: &Potential,
    out: &Path,
    seed: u64,
    precision: Precision,
) -> Result<RunOutcome> {
    let period = match system {
        DynSystem::FiniteCycle { period } => *period,
        other => {
            return Err(Error::Config {
                field: "system.kind".into(),
                detail: format!(
                    "gibbs runs need a finite_cycle system, got {}",
                    other.space_name()
                ),
            })
        }
    };
    let r = &config.run;
    let x = Point::cycle(period, r.base_index)?;
    let model = FiniteOrbitModel::from_orbit(system, f, &x, period)?;
    let state = model.gibbs_state(r.beta)?;
    let residual = model.kms_residual_random(r.beta, r.trials, seed)?;
    let witness =
        model.non_injectivity_witness(Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0));
    let rows: Vec<Vec<f64>> = state
        .weights
        .iter()
        .zip(&state.log_weights)
        .enumerate()
        .map(|(j, (w, lw))| vec![j as f64, *w, *lw])
        .collect();
    write_table_csv(
        &out.join("gibbs.csv"),
        &[format!("β = {}", fmt_f(r.beta))],
        "j,weight,log_weight",
        &rows,
    )?;
    let payload = GibbsPayload {
        period: model.period(),
        beta: r.beta,
        cyclic: model.cyclic_check(),
        weights: state.weights,
        log_weights: state.log_weights,
        kms_residual_random: residual,
        trials: r.trials,
        non_injectivity_witness: witness,
    };
    let env = echo_inputs(
        ReportEnvelope::new("gibbs", payload),
        config,
        seed,
        precision,
    );
    write_json(&out.join("report.json"), &env)?;
    Ok(RunOutcome::Success)
}

#[derive(Serialize)]
struct PotentialBuildPayload {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    tent_certificate: Option<TentCertificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tail_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sawtooth_certificate: Option<SawtoothCertificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sup_bound: Option<f64>,
}

fn run_potential_build(
    config: &RunConfig,
    system: &DynSystem,
    out: &Path,
    seed: u64,
    precision: Precision,
) -> Result<RunOutcome> {
    let spec = &config.potential;
    let f = build_potential(spec, system, precision)?;
    let mut payload = PotentialBuildPayload {
        kind: spec.kind.clone(),
        tent_certificate: None,
        tail_bound: None,
        sawtooth_certificate: None,
        mean: None,
        sup_bound: None,
    };
    match &f {
        Potential::AppendixA(tent) => {
            payload.tent_certificate = Some(tent.certificate().clone());
            payload.tail_bound = Some(tent.tail_bound());
        }
        Potential::AppendixB(saw) => {
            payload.sawtooth_certificate = Some(saw.certificate().clone());
        }
        Potential::TrigPoly(tp) => {
            payload.mean = Some(tp.mean());
            payload.sup_bound = Some(tp.sup_bound());
        }
        _ => {}
    }
    let env = echo_inputs(
        ReportEnvelope::new("potential-build", payload),
        config,
        seed,
        precision,
    );
    write_json(&out.join("report.json"), &env)?;
    Ok(RunOutcome::Success)
}

#[derive(Serialize)]
struct FlowPropsPayload {
    reports: Vec<FlowPropertyReport>,
    notes: Vec<String>,
}

fn run_flow_props(
    config: &RunConfig,
    system: &DynSystem,
    f: &Potential,
    out: &Path,
    seed: u64,
    precision: Precision,
) -> Result<RunOutcome> {
    let r = &config.run;
    let seeds = seed_points(system, r, seed)?;
    let mut reports = Vec::new();
    let mut notes = Vec::new();
    match innerness_test(system, f, &seeds, r.horizon) {
        Ok(rep) => reports.push(FlowPropertyReport::from_innerness(&rep)),
        Err(Error::CriterionInapplicable(msg)) => {
            notes.push(format!("innerness test skipped: {msg}"));
        }
        Err(e) => return Err(e),
    }
    reports.push(FlowPropertyReport::from_approx_inner(&approx_inner_test(
        system, f,
    )?));
    reports.push(FlowPropertyReport::from_hn(&hn_defect(
        system, f, &r.n_list, r.flow_grid,
    )?));
    let payload = FlowPropsPayload { reports, notes };
    let env = echo_inputs(
        ReportEnvelope::new("flow-props", payload),
        config,
        seed,
        precision,
    );
    write_json(&out.join("report.json"), &env)?;
    Ok(RunOutcome::Success)
}

// ---------------------------------------------------------------------------
// Entry points
// ---------------------------------------------------------------------------

/// Load and validate a config file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    let config: RunConfig = toml::from_str(&text)?;
    validate(&config)?;
    Ok(config)
}

/// Execute one subcommand against a loaded config, writing artifacts
/// into `out`.
pub fn run_config(
    command: Command,
    config: &RunConfig,
    out: &Path,
    seed_override: Option<u64>,
) -> Result<RunOutcome> {
    if let Some(declared) = &config.command {
        if declared != command.name() {
            return Err(Error::Config {
                field: "command".into(),
                detail: format!(
                    "config declares '{declared}' but the '{}' subcommand was invoked",
                    command.name()
                ),
            });
        }
    }
    std::fs::create_dir_all(out)?;
    let precision = resolve_precision(config)?;
    let seed = seed_override.unwrap_or(config.run.seed);
    let system = build_system(&config.system)?;
    if command == Command::PotentialBuild {
        // the potential itself is the deliverable; build inside
        return run_potential_build(config, &system, out, seed, precision);
    }
    let f = build_potential(&config.potential, &system, precision)?;
    match command {
        Command::Spectrum => run_spectrum(config, &system, &f, out, seed, precision),
        Command::Construct => run_construct(config, &system, &f, out, seed, precision),
        Command::Classify => run_classify(config, &system, &f, out, seed, precision),
        Command::Gibbs => run_gibbs(config, &system, &f, out, seed, precision),
        Command::FlowProps => run_flow_props(config, &system, &f, out, seed, precision),
        Command::PotentialBuild => unreachable!("handled above"),
    }
}

/// CLI entry: returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    if let Some(t) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global();
    }
    let config_path = match &cli.config {
        Some(p) => p.clone(),
        None => {
            eprintln!("error: config field 'config': --config PATH is required");
            return 1;
        }
    };
    let outcome = load_config(&config_path)
        .and_then(|config| run_config(cli.command, &config, &cli.out, cli.seed));
    match outcome {
        Ok(RunOutcome::Success) => 0,
        Ok(RunOutcome::InconclusiveOnly) => 2,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_config(dir: &Path, text: &str) -> PathBuf {
        let path = dir.join("run.toml");
        std::fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn spectrum_run_writes_deterministic_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = write_config(
            dir.path(),
            r#"
command = "spectrum"

[system]
kind = "rotation"
rotation = "golden"

[potential]
kind = "constant"
value = 1.0

[grid]
min = -1.0
max = 1.0
steps = 3

[run]
horizon = 2000
seed = 11
"#,
        );
        let config = load_config(&cfg_path).unwrap();
        let out_a = dir.path().join("a");
        let out_b = dir.path().join("b");
        let oa = run_config(Command::Spectrum, &config, &out_a, None).unwrap();
        let ob = run_config(Command::Spectrum, &config, &out_b, None).unwrap();
        assert_eq!(oa, RunOutcome::Success);
        assert_eq!(ob, RunOutcome::Success);
        let ra = std::fs::read(out_a.join("report.json")).unwrap();
        let rb = std::fs::read(out_b.join("report.json")).unwrap();
        assert!(!ra.is_empty());
        assert_eq!(ra, rb, "same config + seed must be byte-identical");
        let text = String::from_utf8(ra).unwrap();
        assert!(text.contains("\"classification\""), "{text}");
        assert!(out_a.join("spectrum.csv").exists());
    }

    #[test]
    fn spectrum_grid_must_contain_zero() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = write_config(
            dir.path(),
            r#"
[system]
kind = "rotation"

[potential]
kind = "constant"

[grid]
min = 1.0
max = 2.0
steps = 2

[run]
horizon = 1000
"#,
        );
        let config = load_config(&cfg_path).unwrap();
        match run_config(Command::Spectrum, &config, &dir.path().join("o"), None) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "grid"),
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn mismatched_command_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = write_config(
            dir.path(),
            r#"
command = "gibbs"

[system]
kind = "rotation"

[potential]
kind = "constant"
"#,
        );
        let config = load_config(&cfg_path).unwrap();
        match run_config(Command::Spectrum, &config, &dir.path().join("o"), None) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "command"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn construct_periodic_and_gibbs_agree_end_to_end() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = write_config(
            dir.path(),
            r#"
[system]
kind = "finite_cycle"
period = 3

[potential]
kind = "cycle_values"
values = [1.0, -2.0, 1.0]

[run]
beta = 0.7
method = "periodic"
base_index = 1
trials = 25
"#,
        );
        let config = load_config(&cfg_path).unwrap();
        let out_c = dir.path().join("c");
        assert_eq!(
            run_config(Command::Construct, &config, &out_c, None).unwrap(),
            RunOutcome::Success
        );
        let measure_csv = std::fs::read_to_string(out_c.join("measure.csv")).unwrap();
        assert!(measure_csv.contains("k,S_k,weight"));

        let out_g = dir.path().join("g");
        assert_eq!(
            run_config(Command::Gibbs, &config, &out_g, Some(5)).unwrap(),
            RunOutcome::Success
        );
        let report = std::fs::read_to_string(out_g.join("report.json")).unwrap();
        assert!(report.contains("\"kms_residual_random\""));
        // the Gibbs weights in the gibbs report match the construct CSV
        let parsed: serde_json::Value = serde_json::from_str(&report).unwrap();
        let w0 = parsed["payload"]["weights"][0].as_f64().unwrap();
        let first_row = measure_csv
            .lines()
            .find(|l| !l.starts_with('#') && !l.starts_with('k'))
            .unwrap();
        let w_csv: f64 = first_row.split(',').nth(2).unwrap().parse().unwrap();
        assert!((w0 - w_csv).abs() < 1e-14);
    }

    #[test]
    fn appendix_b_float_mode_fails_with_precision_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = write_config(
            dir.path(),
            r#"
precision = "float"

[system]
kind = "rotation"

[potential]
kind = "appendix_b"
k_levels = 4
"#,
        );
        let config = load_config(&cfg_path).unwrap();
        match run_config(Command::PotentialBuild, &config, &dir.path().join("o"), None) {
            Err(e @ Error::PrecisionExceeded { .. }) => {
                assert!(e.to_string().contains("precision"), "{e}");
            }
            other => panic!("expected PrecisionExceeded, got {other:?}"),
        }
    }

    #[test]
    fn malformed_config_names_the_field() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = write_config(
            dir.path(),
            r#"
[system]
kind = "rotation"

[potential]
kind = "constant"

[run]
tolerance = -0.5
"#,
        );
        match load_config(&cfg_path) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "run.tolerance"),
            other => panic!("{other:?}"),
        }

        // unknown keys are named by the TOML layer
        let bad = write_config(dir.path(), "[system]\nkind = \"rotation\"\nbogus = 1\n");
        match load_config(&bad) {
            Err(Error::TomlParse(e)) => assert!(e.to_string().contains("bogus"), "{e}"),
            other => panic!("{other:?}"),
        }
    }
}
