//! Config-driven experiment runner: loads an algebra, builds the gauge,
//! executes named checks in order, and emits a reproducible report.
//!
//! Statistical failures are recorded in the report, never fatal: a 1%-level
//! test fails 1% of the time by design. Structural errors (bad config,
//! invalid algebra, sampler budget exhaustion) abort the run. Every task
//! draws from a stream keyed by (task name, per-name ordinal), so inserting
//! or permuting tasks does not perturb the numbers of the others.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{
    build_free_nilpotent, build_heisenberg, build_l2_triple_truncation, subalgebra_closure,
    GradedLieAlgebra, Grading,
};
use crate::group::GroupLaw;
use crate::heat::{
    exp_integral_check, scaling_check, HeatError, HeatKernelSpec, HeatTestFunction,
};
use crate::io::IoError;
use crate::measure::{
    aronszajn_line_probe, cac_truncated, choose_epsilons, compile, dilate_measure, estimate_mass,
    l2_block_ball, l2_block_filtration, MassEstimate, MeasureCtx, MeasureError, MeasureSpec,
    SubgroupSpec,
};
use crate::metric::{calibrate_gauge, quotient_distance, HomogeneousGauge, MetricError};
use crate::rng::SamplerStream;

pub use crate::stats::{two_sample_ks, KsOutcome, StatsError};

pub const CONFIG_SCHEMA: u64 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config invalid: {0}")]
    ConfigInvalid(String),
    #[error("algebra load failed: {0}")]
    AlgebraLoad(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Heat(#[from] HeatError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    File(#[from] IoError),
}

impl HarnessError {
    /// 2 for config-level problems, 1 for structural failures at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::ConfigInvalid(_) | HarnessError::AlgebraLoad(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlgebraSource {
    Preset { preset: String },
    File { file: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum GaugeSource {
    #[default]
    Trivial,
    Sigma {
        sigma: Vec<f64>,
    },
    Calibrate {
        radius: f64,
        samples: usize,
        safety: f64,
    },
    File {
        file: PathBuf,
    },
}

/// Set membership tests expressible in a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "set", rename_all = "snake_case")]
pub enum IndicatorSpec {
    Empty,
    Whole,
    GaugeBall { radius: f64 },
    CoordinateSlab { coord: usize, half_width: f64 },
    CoordinateZero { coord: usize },
    Halfspace { coord: usize },
}

impl IndicatorSpec {
    fn validate(&self, dim: usize) -> Result<(), HarnessError> {
        let coord = match self {
            IndicatorSpec::CoordinateSlab { coord, half_width } => {
                if !(*half_width >= 0.0) || !half_width.is_finite() {
                    return Err(HarnessError::ConfigInvalid("slab half-width".into()));
                }
                *coord
            }
            IndicatorSpec::CoordinateZero { coord } | IndicatorSpec::Halfspace { coord } => *coord,
            IndicatorSpec::GaugeBall { radius } => {
                if !(*radius > 0.0) || !radius.is_finite() {
                    return Err(HarnessError::ConfigInvalid("indicator ball radius".into()));
                }
                return Ok(());
            }
            _ => return Ok(()),
        };
        if coord >= dim {
            return Err(HarnessError::ConfigInvalid(format!(
                "indicator coordinate {coord} out of range"
            )));
        }
        Ok(())
    }

    pub fn eval(&self, gauge: &HomogeneousGauge, x: &[f64]) -> bool {
        match self {
            IndicatorSpec::Empty => false,
            IndicatorSpec::Whole => true,
            IndicatorSpec::GaugeBall { radius } => gauge.eval(x) <= *radius,
            IndicatorSpec::CoordinateSlab { coord, half_width } => x[*coord].abs() <= *half_width,
            IndicatorSpec::CoordinateZero { coord } => x[*coord] == 0.0,
            IndicatorSpec::Halfspace { coord } => x[*coord] > 0.0,
        }
    }
}

fn d_triples() -> u64 {
    1000
}
fn d_box() -> f64 {
    1.5
}
fn d_pairs() -> u64 {
    20_000
}
fn d_samples() -> u64 {
    20_000
}
fn d_radius() -> f64 {
    1.0
}
fn d_confidence() -> f64 {
    0.99
}
fn d_paths() -> u64 {
    200
}
fn d_scaling_paths() -> u64 {
    10_000
}
fn d_steps() -> u32 {
    200
}
fn d_time() -> f64 {
    1.0
}
fn d_exp_n() -> u64 {
    20_000
}
fn d_half_width() -> f64 {
    2.0
}
fn d_probe_n() -> u64 {
    10_000
}
fn d_functions() -> Vec<HeatTestFunction> {
    vec![
        HeatTestFunction::CentralCube { half_width: 0.8 },
        HeatTestFunction::LayerOneWave { frequency: 2.0 },
        HeatTestFunction::Zero,
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "kebab-case")]
pub enum TaskKind {
    Associativity {
        #[serde(default = "d_triples")]
        triples: u64,
        #[serde(default = "d_box")]
        box_radius: f64,
    },
    Gauge {
        #[serde(default = "d_pairs")]
        pairs: u64,
        #[serde(default = "d_box")]
        box_radius: f64,
    },
    Submetry {
        #[serde(default = "d_samples")]
        samples: u64,
        #[serde(default = "d_radius")]
        radius: f64,
    },
    Cac {
        #[serde(default)]
        stages: Option<usize>,
        #[serde(default = "d_radius")]
        radius: f64,
        #[serde(default = "d_confidence")]
        confidence: f64,
        #[serde(default = "d_paths")]
        paths: u64,
    },
    Scaling {
        #[serde(default = "d_scaling_paths")]
        paths: u64,
        #[serde(default = "d_steps")]
        steps: u32,
        #[serde(default = "d_time")]
        time: f64,
    },
    ExpIntegral {
        #[serde(default = "d_exp_n")]
        n: u64,
        #[serde(default = "d_half_width")]
        box_half_width: f64,
        #[serde(default = "d_functions")]
        functions: Vec<HeatTestFunction>,
    },
    LineProbe {
        #[serde(default = "d_probe_n")]
        n: u64,
    },
    Mass {
        #[serde(default)]
        measure: Option<MeasureSpec>,
        #[serde(default)]
        indicator: Option<IndicatorSpec>,
        #[serde(default = "d_samples")]
        n: u64,
        #[serde(default)]
        expected: Option<f64>,
    },
    NullProbe {
        levels: Vec<usize>,
        translates: Vec<Vec<f64>>,
        indicator: IndicatorSpec,
        #[serde(default = "d_radius")]
        radius: f64,
        #[serde(default = "d_probe_n")]
        n: u64,
    },
}

impl TaskKind {
    pub fn kind_name(&self) -> &'static str {
        match self {
            TaskKind::Associativity { .. } => "associativity",
            TaskKind::Gauge { .. } => "gauge",
            TaskKind::Submetry { .. } => "submetry",
            TaskKind::Cac { .. } => "cac",
            TaskKind::Scaling { .. } => "scaling",
            TaskKind::ExpIntegral { .. } => "exp-integral",
            TaskKind::LineProbe { .. } => "line-probe",
            TaskKind::Mass { .. } => "mass",
            TaskKind::NullProbe { .. } => "null-probe",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub name: String,
    #[serde(flatten)]
    pub kind: TaskKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema: u64,
    /// Root seed; wall-clock seeding is deliberately impossible.
    pub seed: u64,
    pub algebra: AlgebraSource,
    #[serde(default)]
    pub gauge: GaugeSource,
    #[serde(default)]
    pub tasks: Vec<Task>,
}

impl ExperimentConfig {
    pub fn from_json(body: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(body).map_err(|e| HarnessError::ConfigInvalid(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut body = serde_json::to_string_pretty(self).expect("static schema");
        body.push('\n');
        body
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckLine {
    pub label: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci_low: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci_high: Option<f64>,
    pub pass: bool,
}

impl CheckLine {
    fn bounded(label: impl Into<String>, value: f64, threshold: f64) -> CheckLine {
        CheckLine {
            label: label.into(),
            value,
            threshold: Some(threshold),
            ci_low: None,
            ci_high: None,
            pass: value <= threshold,
        }
    }

    fn advisory(label: impl Into<String>, value: f64) -> CheckLine {
        CheckLine { label: label.into(), value, threshold: None, ci_low: None, ci_high: None, pass: true }
    }

    fn from_mass(label: impl Into<String>, mass: &MassEstimate, expected: Option<f64>) -> CheckLine {
        let pass = match expected {
            Some(e) => mass.ci_low <= e && e <= mass.ci_high,
            None => true,
        };
        CheckLine {
            label: label.into(),
            value: mass.estimate,
            threshold: expected,
            ci_low: Some(mass.ci_low),
            ci_high: Some(mass.ci_high),
            pass,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub name: String,
    pub kind: String,
    pub ordinal: u64,
    pub lines: Vec<CheckLine>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgebraSummary {
    pub layers: Vec<usize>,
    pub dim: usize,
    pub step: usize,
    pub homogeneous_dimension: usize,
    pub bracket_terms: usize,
    pub fingerprint: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub tool_version: String,
    pub schema: u64,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub algebra: AlgebraSummary,
    pub gauge_sigma: Vec<f64>,
    pub tasks: Vec<TaskReport>,
    pub all_pass: bool,
    /// Excluded from reproducibility comparisons.
    pub wall_time_ms: u64,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        let mut body = serde_json::to_string_pretty(self).expect("static schema");
        body.push('\n');
        body
    }

    /// Everything the determinism contract covers: the report minus wall time.
    pub fn comparison_body(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("static schema");
        v.as_object_mut().expect("report is an object").remove("wall_time_ms");
        v
    }

    /// Flat CSV: one row per check line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("task,kind,label,value,threshold,ci_low,ci_high,pass\n");
        let fmt = |x: Option<f64>| x.map(|v| format!("{v:?}")).unwrap_or_default();
        for t in &self.tasks {
            for l in &t.lines {
                out.push_str(&format!(
                    "{},{},{},{:?},{},{},{},{}\n",
                    t.name,
                    t.kind,
                    l.label,
                    l.value,
                    fmt(l.threshold),
                    fmt(l.ci_low),
                    fmt(l.ci_high),
                    l.pass
                ));
            }
        }
        out
    }
}

pub fn parse_preset(name: &str) -> Result<GradedLieAlgebra, HarnessError> {
    let bad = || HarnessError::AlgebraLoad(format!("unknown preset {name:?}"));
    let build = |r: Result<GradedLieAlgebra, crate::algebra::AlgebraError>| {
        r.map_err(|e| HarnessError::AlgebraLoad(e.to_string()))
    };
    let parts: Vec<&str> = name.split('-').collect();
    match parts.as_slice() {
        ["h1"] => build(build_heisenberg(2, 1)),
        ["heis", w, c] => {
            let w: usize = w.parse().map_err(|_| bad())?;
            let c: usize = c.parse().map_err(|_| bad())?;
            build(build_heisenberg(w, c))
        }
        ["free", r, s] => {
            let r: usize = r.parse().map_err(|_| bad())?;
            let s: usize = s.parse().map_err(|_| bad())?;
            build(build_free_nilpotent(r, s))
        }
        ["l2triple", k] => {
            let k: usize = k.parse().map_err(|_| bad())?;
            build(build_l2_triple_truncation(k))
        }
        ["abelian", n] => {
            let n: usize = n.parse().map_err(|_| bad())?;
            let grading =
                Grading::new(vec![n]).map_err(|e| HarnessError::AlgebraLoad(e.to_string()))?;
            build(GradedLieAlgebra::new(grading, Vec::new()))
        }
        _ => Err(bad()),
    }
}

fn load_algebra(source: &AlgebraSource) -> Result<GradedLieAlgebra, HarnessError> {
    match source {
        AlgebraSource::Preset { preset } => parse_preset(preset),
        AlgebraSource::File { file } => crate::io::read_algebra_file(file)
            .map_err(|e| HarnessError::AlgebraLoad(e.to_string())),
    }
}

fn build_gauge(
    source: &GaugeSource,
    law: &GroupLaw<f64>,
    seed: u64,
) -> Result<HomogeneousGauge, HarnessError> {
    match source {
        GaugeSource::Trivial => Ok(HomogeneousGauge::trivial(law)),
        GaugeSource::Sigma { sigma } => Ok(HomogeneousGauge::new(law, sigma.clone())?),
        GaugeSource::Calibrate { radius, samples, safety } => {
            let stream = SamplerStream::named(seed, "gauge-calibrate", 0);
            Ok(calibrate_gauge(law, *radius, *samples, *safety, &stream)?)
        }
        GaugeSource::File { file } => {
            crate::io::read_gauge_file(file, law).map_err(HarnessError::File)
        }
    }
}

pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    let t0 = Instant::now();
    if config.schema != CONFIG_SCHEMA {
        return Err(HarnessError::ConfigInvalid(format!(
            "schema {} unsupported; this tool reads schema {CONFIG_SCHEMA}",
            config.schema
        )));
    }
    let algebra = Arc::new(load_algebra(&config.algebra)?);
    let law = Arc::new(
        GroupLaw::<f64>::new(&algebra).map_err(|e| HarnessError::AlgebraLoad(e.to_string()))?,
    );
    let gauge = build_gauge(&config.gauge, &law, config.seed)?;
    let ctx = MeasureCtx::new(algebra.clone(), law, gauge)?;

    let mut ordinals: HashMap<&str, u64> = HashMap::new();
    let mut tasks = Vec::with_capacity(config.tasks.len());
    for task in &config.tasks {
        let ordinal = ordinals.entry(task.name.as_str()).or_insert(0);
        let stream = SamplerStream::named(config.seed, &task.name, *ordinal);
        let lines = run_task(&ctx, &task.kind, stream)?;
        let pass = lines.iter().all(|l| l.pass);
        tasks.push(TaskReport {
            name: task.name.clone(),
            kind: task.kind.kind_name().to_string(),
            ordinal: *ordinal,
            lines,
            pass,
        });
        *ordinal += 1;
    }
    let all_pass = tasks.iter().all(|t| t.pass);
    Ok(ExperimentReport {
        tool_version: TOOL_VERSION.to_string(),
        schema: CONFIG_SCHEMA,
        seed: config.seed,
        config: config.clone(),
        algebra: AlgebraSummary {
            layers: algebra.grading().layer_dims().to_vec(),
            dim: algebra.dim(),
            step: algebra.step(),
            homogeneous_dimension: algebra.grading().homogeneous_dimension(),
            bracket_terms: algebra.constants().len(),
            fingerprint: algebra.id(),
        },
        gauge_sigma: ctx.gauge().sigma().to_vec(),
        tasks,
        all_pass,
        wall_time_ms: t0.elapsed().as_millis() as u64,
    })
}

fn run_task(
    ctx: &MeasureCtx,
    kind: &TaskKind,
    stream: SamplerStream,
) -> Result<Vec<CheckLine>, HarnessError> {
    match kind {
        TaskKind::Associativity { triples, box_radius } => {
            task_associativity(ctx, *triples, *box_radius, stream)
        }
        TaskKind::Gauge { pairs, box_radius } => task_gauge(ctx, *pairs, *box_radius, stream),
        TaskKind::Submetry { samples, radius } => task_submetry(ctx, *samples, *radius, stream),
        TaskKind::Cac { stages, radius, confidence, paths } => {
            task_cac(ctx, *stages, *radius, *confidence, *paths, stream)
        }
        TaskKind::Scaling { paths, steps, time } => {
            let d1 = ctx.law().grading().layer_range(1).len();
            let mut spec = HeatKernelSpec::standard(d1, *steps);
            spec.time = *time;
            let report = scaling_check(ctx, &spec, *paths, stream)?;
            Ok(report
                .tests
                .into_iter()
                .map(|t| CheckLine::bounded(t.label, t.statistic, t.threshold))
                .collect())
        }
        TaskKind::ExpIntegral { n, box_half_width, functions } => {
            let d1 = ctx.law().grading().layer_range(1).len();
            let cov: Vec<Vec<f64>> =
                (0..d1).map(|i| (0..d1).map(|j| f64::from(i == j)).collect()).collect();
            let widths = vec![*box_half_width; ctx.law().dim() - d1];
            let report = exp_integral_check(ctx, &cov, functions, &widths, *n, stream)?;
            Ok(report
                .lines
                .into_iter()
                .map(|l| CheckLine::bounded(l.label, l.diff.abs(), 3.0 * l.paired_se))
                .collect())
        }
        TaskKind::LineProbe { n } => task_line_probe(ctx, *n, stream),
        TaskKind::Mass { measure, indicator, n, expected } => {
            let spec = measure.clone().unwrap_or(MeasureSpec::HaarBall {
                subgroup: SubgroupSpec::Full,
                radius: 1.0,
            });
            let ind = indicator.clone().unwrap_or(IndicatorSpec::GaugeBall { radius: 0.5 });
            ind.validate(ctx.law().dim())?;
            let mass =
                estimate_mass(ctx, &spec, |x| ind.eval(ctx.gauge(), x), *n, stream)?;
            Ok(vec![CheckLine::from_mass("mass", &mass, *expected)])
        }
        TaskKind::NullProbe { levels, translates, indicator, radius, n } => {
            indicator.validate(ctx.law().dim())?;
            let stages = levels.iter().copied().max().unwrap_or(0);
            if stages == 0 {
                return Err(HarnessError::ConfigInvalid("null-probe needs levels".into()));
            }
            let filtration = l2_block_filtration(ctx, stages)?;
            let factors: Vec<MeasureSpec> = (1..=stages)
                .map(|b| l2_block_ball(ctx, b, *radius))
                .collect::<Result<_, _>>()?;
            let eps = choose_epsilons(ctx, &filtration, &factors, 0.99)?;
            let dilated: Vec<MeasureSpec> = factors
                .iter()
                .zip(&eps)
                .map(|(f, e)| dilate_measure(f, *e))
                .collect::<Result<_, _>>()?;
            let rows = null_probe(
                ctx,
                |x| indicator.eval(ctx.gauge(), x),
                &filtration,
                &dilated,
                translates,
                levels,
                *n,
                stream,
            )?;
            Ok(rows
                .into_iter()
                .map(|r| {
                    let mut line = CheckLine::advisory(
                        format!("level-{}-translate-{}", r.level, r.translate),
                        r.mass.estimate,
                    );
                    line.ci_low = Some(r.mass.ci_low);
                    line.ci_high = Some(r.mass.ci_high);
                    line
                })
                .collect())
        }
    }
}

fn task_associativity(
    ctx: &MeasureCtx,
    triples: u64,
    box_radius: f64,
    stream: SamplerStream,
) -> Result<Vec<CheckLine>, HarnessError> {
    if triples == 0 || !(box_radius > 0.0) {
        return Err(HarnessError::ConfigInvalid("associativity needs triples and a box".into()));
    }
    let law = ctx.law();
    let n = law.dim();
    let mut max_rel = 0.0f64;
    let mut scratch = law.scratch();
    let (mut xy, mut yz, mut l, mut r) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for idx in 0..triples {
        let mut rng = stream.rng_at(idx);
        let mut draw = || -> Vec<f64> {
            let mut v = vec![0.0; n];
            rng.fill_uniform_in(-box_radius, box_radius, &mut v);
            v
        };
        let (x, y, z) = (draw(), draw(), draw());
        law.multiply_into(&x, &y, &mut xy, &mut scratch);
        law.multiply_into(&xy, &z, &mut l, &mut scratch);
        law.multiply_into(&y, &z, &mut yz, &mut scratch);
        law.multiply_into(&x, &yz, &mut r, &mut scratch);
        let scale = l.iter().fold(1.0f64, |a, c| a.max(c.abs()));
        let defect =
            l.iter().zip(&r).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max) / scale;
        max_rel = max_rel.max(defect);
    }
    let mut lines = vec![CheckLine::bounded("max-relative-defect", max_rel, 1e-9)];
    if law.step() == 2 {
        // at step 2 the product is exactly x + y + [x,y]/2
        let mut worst = 0.0f64;
        for idx in 0..triples.min(200) {
            let mut rng = stream.child(1).rng_at(idx);
            let mut x = vec![0.0; n];
            let mut y = vec![0.0; n];
            rng.fill_uniform_in(-box_radius, box_radius, &mut x);
            rng.fill_uniform_in(-box_radius, box_radius, &mut y);
            let prod = law.multiply(&x, &y).expect("dims fixed");
            let bracket = ctx.algebra().bracket(&x, &y).expect("dims fixed");
            for k in 0..n {
                worst = worst.max((prod[k] - (x[k] + y[k] + 0.5 * bracket[k])).abs());
            }
        }
        lines.push(CheckLine::bounded("step2-closed-form-defect", worst, 1e-14));
    }
    Ok(lines)
}

fn task_gauge(
    ctx: &MeasureCtx,
    pairs: u64,
    box_radius: f64,
    stream: SamplerStream,
) -> Result<Vec<CheckLine>, HarnessError> {
    if pairs == 0 || !(box_radius > 0.0) {
        return Err(HarnessError::ConfigInvalid("gauge needs pairs and a box".into()));
    }
    let law = ctx.law();
    let gauge = ctx.gauge();
    let n = law.dim();
    let mut homogeneity = 0u64;
    let mut subadd = 0u64;
    let mut symmetry = 0u64;
    let mut scratch = law.scratch();
    let mut prod = Vec::new();
    for idx in 0..pairs {
        let mut rng = stream.rng_at(idx);
        let mut x = vec![0.0; n];
        let mut y = vec![0.0; n];
        rng.fill_uniform_in(-box_radius, box_radius, &mut x);
        rng.fill_uniform_in(-box_radius, box_radius, &mut y);
        let lambda = rng.uniform_in(0.1, 10.0);
        let nx = gauge.eval(&x);
        let ny = gauge.eval(&y);
        let scaled = gauge.eval(&law.dilate(&lambda, &x));
        if (scaled - lambda * nx).abs() > 1e-12 * scaled.max(1.0) {
            homogeneity += 1;
        }
        law.multiply_into(&x, &y, &mut prod, &mut scratch);
        let np = gauge.eval(&prod);
        if np > (nx + ny) * (1.0 + 1e-12) + 1e-12 {
            subadd += 1;
        }
        if (gauge.eval(&law.inverse(&x)) - nx).abs() > 1e-12 * nx.max(1.0) {
            symmetry += 1;
        }
    }
    Ok(vec![
        CheckLine::bounded("homogeneity-violations", homogeneity as f64, 0.0),
        CheckLine::bounded("subadditivity-violations", subadd as f64, 0.0),
        CheckLine::bounded("symmetry-violations", symmetry as f64, 0.0),
    ])
}

fn task_submetry(
    ctx: &MeasureCtx,
    samples: u64,
    radius: f64,
    stream: SamplerStream,
) -> Result<Vec<CheckLine>, HarnessError> {
    let spec = MeasureSpec::HaarBall { subgroup: SubgroupSpec::Full, radius };
    let compiled = compile(ctx, &spec)?;
    let law = ctx.law();
    let d1 = law.grading().layer_range(1).len();
    let mut violations = 0u64;
    for idx in 0..samples {
        let g = compiled.sample(stream, idx)?;
        let horizontal: f64 = g[..d1].iter().map(|c| c * c).sum::<f64>().sqrt();
        if horizontal > ctx.gauge().eval(&g) * (1.0 + 1e-12) {
            violations += 1;
        }
    }
    let mut lines = vec![CheckLine::bounded("projection-bound-violations", violations as f64, 0.0)];
    if ctx.algebra().id() == build_heisenberg(2, 1).expect("fixed preset").id() {
        // distance between central cosets reduces to the horizontal distance
        let ideal = subalgebra_closure(ctx.algebra(), &[vec![0.0, 0.0, 1.0]])
            .map_err(|e| HarnessError::AlgebraLoad(e.to_string()))?;
        let q = quotient_distance(
            ctx.gauge(),
            law,
            &[0.0, 0.0, 0.0],
            &[1.0, 0.0, 5.0],
            &ideal,
        )?;
        lines.push(CheckLine::bounded("center-quotient-defect", (q - 1.0).abs(), 1e-4));
    }
    Ok(lines)
}

fn task_cac(
    ctx: &MeasureCtx,
    stages: Option<usize>,
    radius: f64,
    confidence: f64,
    paths: u64,
    stream: SamplerStream,
) -> Result<Vec<CheckLine>, HarnessError> {
    let dims = ctx.algebra().grading().layer_dims();
    let k_blocks = if dims.len() == 2 { dims[1] } else { 0 };
    let stages = stages.unwrap_or(k_blocks.max(1));
    let filtration = l2_block_filtration(ctx, stages)?;
    let factors: Vec<MeasureSpec> = (1..=stages)
        .map(|b| l2_block_ball(ctx, b, radius))
        .collect::<Result<_, _>>()?;
    // structural validation of the convolution order and supports
    cac_truncated(ctx, &filtration, &factors)?;
    let eps = choose_epsilons(ctx, &filtration, &factors, confidence)?;
    let mut lines = Vec::new();
    for (i, e) in eps.iter().enumerate() {
        let expected = 0.5f64.powi(i as i32 + 1) / (2.0 * radius);
        lines.push(CheckLine::bounded(
            format!("epsilon-{}-defect", i + 1),
            (e - expected).abs(),
            0.0,
        ));
    }
    let dilated: Vec<MeasureSpec> = factors
        .iter()
        .zip(&eps)
        .map(|(f, e)| dilate_measure(f, *e))
        .collect::<Result<_, _>>()?;
    let compiled: Vec<_> =
        dilated.iter().map(|d| compile(ctx, d)).collect::<Result<Vec<_>, _>>()?;
    let law = ctx.law();
    let mut max_incr = vec![0.0f64; stages];
    for p in 0..paths {
        let mut partial = vec![0.0; law.dim()];
        for (i, c) in compiled.iter().enumerate() {
            let x = c.sample(stream.child(i as u64), p)?;
            // left-invariant increment between inverse partial products
            let incr = ctx.gauge().eval(&x);
            max_incr[i] = max_incr[i].max(incr);
            partial = law.multiply(&x, &partial).expect("dims fixed");
        }
        if partial.iter().any(|c| !c.is_finite()) {
            return Err(HarnessError::ConfigInvalid("non-finite cac partial product".into()));
        }
    }
    for (i, m) in max_incr.iter().enumerate() {
        let bound = 0.5f64.powi(i as i32 + 2) + 1e-12;
        lines.push(CheckLine::bounded(format!("stage-{}-max-increment", i + 1), *m, bound));
    }
    Ok(lines)
}

fn task_line_probe(
    ctx: &MeasureCtx,
    n: u64,
    stream: SamplerStream,
) -> Result<Vec<CheckLine>, HarnessError> {
    let law = ctx.law();
    let dim = law.dim();
    let e = vec![0.0; dim];
    let mut y = vec![0.0; dim];
    y[0] = 1.0;
    let half = aronszajn_line_probe(ctx, |g| g[0] > 0.0, &e, &y, (-1.0, 1.0), n, stream)?;
    let whole =
        aronszajn_line_probe(ctx, |_| true, &e, &y, (-1.0, 1.0), n, stream.child(1))?;
    let empty =
        aronszajn_line_probe(ctx, |_| false, &e, &y, (-1.0, 1.0), n, stream.child(2))?;
    Ok(vec![
        CheckLine::bounded("halfline-measure-defect", (half - 1.0).abs(), 1e-9),
        CheckLine::bounded("full-measure-defect", (whole - 2.0).abs(), 1e-12),
        CheckLine::bounded("empty-measure-defect", empty.abs(), 1e-12),
    ])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullProbeRow {
    pub level: usize,
    pub translate: usize,
    pub mass: MassEstimate,
}

/// Advisory mass table of an indicator set under truncated convolutions,
/// left-translated by each candidate point. No verdict: the table is data
/// for a null/non-null judgement made elsewhere.
#[allow(clippy::too_many_arguments)]
pub fn null_probe<F>(
    ctx: &MeasureCtx,
    indicator: F,
    filtration: &[crate::algebra::SubalgebraBasis],
    factors: &[MeasureSpec],
    translates: &[Vec<f64>],
    levels: &[usize],
    n: u64,
    stream: SamplerStream,
) -> Result<Vec<NullProbeRow>, HarnessError>
where
    F: Fn(&[f64]) -> bool + Sync,
{
    if levels.iter().any(|&l| l == 0 || l > filtration.len()) {
        return Err(HarnessError::ConfigInvalid("probe level outside the filtration".into()));
    }
    if translates.is_empty() {
        return Err(HarnessError::ConfigInvalid("null-probe needs translates".into()));
    }
    let law = ctx.law();
    for t in translates {
        if t.len() != law.dim() {
            return Err(HarnessError::ConfigInvalid("translate has wrong dimension".into()));
        }
    }
    let mut rows = Vec::with_capacity(levels.len() * translates.len());
    for (li, &level) in levels.iter().enumerate() {
        let spec = cac_truncated(ctx, &filtration[..level], &factors[..level])?;
        for (ti, g) in translates.iter().enumerate() {
            let mass = estimate_mass(
                ctx,
                &spec,
                |x| {
                    let shifted = law.multiply(g, x).expect("dims checked");
                    indicator(&shifted)
                },
                n,
                stream.child(li as u64).child(ti as u64),
            )?;
            rows.push(NullProbeRow { level, translate: ti, mass });
        }
    }
    Ok(rows)
}

/// Built-in configs runnable by name through `check`.
pub fn builtin_config(name: &str, seed: u64) -> Option<ExperimentConfig> {
    match name {
        "h1-full-suite" => Some(h1_full_suite(seed)),
        _ => None,
    }
}

pub fn builtin_names() -> &'static [&'static str] {
    &["h1-full-suite"]
}

/// The standing diagnostic battery on the first Heisenberg group: group law,
/// gauge, submetry, ball mass, convolution machinery, heat scaling, the
/// interchange identity, line probes, and the advisory null-mass table.
pub fn h1_full_suite(seed: u64) -> ExperimentConfig {
    let tasks = vec![
        Task {
            name: "group-law".into(),
            kind: TaskKind::Associativity { triples: 1000, box_radius: 1.5 },
        },
        Task { name: "gauge".into(), kind: TaskKind::Gauge { pairs: 20_000, box_radius: 1.5 } },
        Task {
            name: "submetry".into(),
            kind: TaskKind::Submetry { samples: 20_000, radius: 1.0 },
        },
        Task {
            name: "ball-mass".into(),
            kind: TaskKind::Mass {
                measure: Some(MeasureSpec::HaarBall { subgroup: SubgroupSpec::Full, radius: 1.0 }),
                indicator: Some(IndicatorSpec::GaugeBall { radius: 0.5 }),
                n: 20_000,
                expected: Some(0.0625),
            },
        },
        Task {
            name: "cac".into(),
            kind: TaskKind::Cac { stages: Some(1), radius: 1.0, confidence: 0.99, paths: 200 },
        },
        Task {
            name: "heat-scaling".into(),
            kind: TaskKind::Scaling { paths: 10_000, steps: 200, time: 1.0 },
        },
        Task {
            name: "exp-integral".into(),
            kind: TaskKind::ExpIntegral {
                n: 20_000,
                box_half_width: 2.0,
                functions: d_functions(),
            },
        },
        Task { name: "line-probe".into(), kind: TaskKind::LineProbe { n: 10_000 } },
        Task {
            name: "null-mass".into(),
            kind: TaskKind::NullProbe {
                levels: vec![1],
                translates: vec![vec![0.0, 0.0, 0.0], vec![0.3, -0.2, 0.4]],
                indicator: IndicatorSpec::CoordinateZero { coord: 2 },
                radius: 1.0,
                n: 10_000,
            },
        },
    ];
    ExperimentConfig {
        schema: CONFIG_SCHEMA,
        seed,
        algebra: AlgebraSource::Preset { preset: "h1".into() },
        gauge: GaugeSource::Calibrate { radius: 1.5, samples: 10_000, safety: 0.05 },
        tasks,
    }
}
