//! Sampleable measure specifications: Haar balls, layer-1 Gaussians,
//! densities, dilation pushforwards, convolutions, and the truncated
//! convolution-along-a-filtration construction with its epsilon selection.
//!
//! Haar measure in exponential coordinates is Lebesgue measure, so a Haar
//! ball is the uniform distribution on a gauge ball. The gauge ball factors
//! per layer, and each layer is drawn by rejection from its coordinate box;
//! the acceptance rate is scale-free by homogeneity.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{subalgebra_closure, GradedLieAlgebra, SubalgebraBasis};
use crate::group::GroupLaw;
use crate::metric::HomogeneousGauge;
use crate::rng::SamplerStream;
use crate::stats::{clopper_pearson_lower, wilson_interval, Z_99};

/// Total proposals allowed while producing one sample.
const REJECTION_BUDGET: u64 = 10_000_000;
/// Span membership tolerance for support and nesting checks.
const SUPPORT_TOL: f64 = 1e-9;
/// Internal seed for epsilon certification; the operation takes no stream.
const EPSILON_CERT_SEED: u64 = 0x5E1E_C7ED_0C0A_FE01;

#[derive(Debug, Error, PartialEq)]
pub enum MeasureError {
    #[error("measure spec references a different algebra")]
    AlgebraMismatch,
    #[error("coordinate vector of length {got}; expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("subgroup spec invalid: {0}")]
    SubgroupInvalid(&'static str),
    #[error("rejection sampler exhausted its proposal budget")]
    RejectionBudgetExceeded,
    #[error("density exceeds the stated bound on the support")]
    InvalidDensityBound,
    #[error("filtration stages are not nested")]
    FiltrationNotNested,
    #[error("factor {index} is not supported on its filtration stage")]
    SupportMismatch { index: usize },
    #[error("epsilon certification failed at stage {stage}")]
    CertificationFailed { stage: usize },
    #[error("sample size too small; need at least {min}")]
    InvalidSampleSize { min: u64 },
}

/// Serializable handle for a Carnot subgroup inside a fixed algebra.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SubgroupSpec {
    Full,
    Span { vectors: Vec<Vec<f64>> },
}

impl SubgroupSpec {
    pub fn resolve(&self, algebra: &GradedLieAlgebra) -> Result<SubalgebraBasis, MeasureError> {
        match self {
            SubgroupSpec::Full => Ok(SubalgebraBasis::full(algebra)),
            SubgroupSpec::Span { vectors } => subalgebra_closure(algebra, vectors)
                .map_err(|_| MeasureError::SubgroupInvalid("generators do not span a subalgebra")),
        }
    }
}

/// Named density shapes relative to the uniform Haar-ball proposal.
/// Values are unnormalized; rejection sampling only needs the bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum DensitySpec {
    Uniform,
    GaugeGaussian { scale: f64 },
    Cone { power: f64 },
}

impl DensitySpec {
    fn validate(&self) -> Result<(), MeasureError> {
        match self {
            DensitySpec::Uniform => Ok(()),
            DensitySpec::GaugeGaussian { scale } if *scale > 0.0 && scale.is_finite() => Ok(()),
            DensitySpec::GaugeGaussian { .. } => {
                Err(MeasureError::InvalidParameter("density scale must be positive and finite"))
            }
            DensitySpec::Cone { power } if *power >= 0.0 && power.is_finite() => Ok(()),
            DensitySpec::Cone { .. } => {
                Err(MeasureError::InvalidParameter("density power must be nonnegative and finite"))
            }
        }
    }

    fn value(&self, gauge: &HomogeneousGauge, x: &[f64]) -> f64 {
        match self {
            DensitySpec::Uniform => 1.0,
            DensitySpec::GaugeGaussian { scale } => {
                let t = gauge.eval(x) / scale;
                (-t * t).exp()
            }
            DensitySpec::Cone { power } => gauge.eval(x).powf(*power),
        }
    }
}

/// Composable description of a sampleable probability measure. Every
/// variant integrates to one by construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant")]
pub enum MeasureSpec {
    HaarBall {
        subgroup: SubgroupSpec,
        radius: f64,
    },
    GaussianLayer1 {
        covariance: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        basis: Option<Vec<Vec<f64>>>,
    },
    DensityOnSubgroup {
        subgroup: SubgroupSpec,
        density: DensitySpec,
        bound: f64,
        radius: f64,
    },
    PointMass {
        element: Vec<f64>,
    },
    Dilated {
        base: Box<MeasureSpec>,
        epsilon: f64,
    },
    Convolution {
        factors: Vec<MeasureSpec>,
    },
}

/// Shared context: the algebra, its group law and the gauge, one algebra id.
#[derive(Clone, Debug)]
pub struct MeasureCtx {
    algebra: Arc<GradedLieAlgebra>,
    law: Arc<GroupLaw<f64>>,
    gauge: HomogeneousGauge,
}

impl MeasureCtx {
    pub fn new(
        algebra: Arc<GradedLieAlgebra>,
        law: Arc<GroupLaw<f64>>,
        gauge: HomogeneousGauge,
    ) -> Result<Self, MeasureError> {
        if law.algebra_id() != algebra.id() || gauge.algebra_id() != algebra.id() {
            return Err(MeasureError::AlgebraMismatch);
        }
        Ok(MeasureCtx { algebra, law, gauge })
    }

    /// Context with the uncalibrated all-ones gauge.
    pub fn with_trivial_gauge(algebra: Arc<GradedLieAlgebra>) -> Result<Self, MeasureError> {
        let law = GroupLaw::new(&algebra).map_err(|_| MeasureError::AlgebraMismatch)?;
        let gauge = HomogeneousGauge::trivial(&law);
        MeasureCtx::new(algebra, Arc::new(law), gauge)
    }

    pub fn algebra(&self) -> &Arc<GradedLieAlgebra> {
        &self.algebra
    }

    pub fn law(&self) -> &Arc<GroupLaw<f64>> {
        &self.law
    }

    pub fn gauge(&self) -> &HomogeneousGauge {
        &self.gauge
    }
}

/// Per-layer coefficient block of a graded subgroup basis with the ball
/// radius of that layer in coefficient space.
#[derive(Debug)]
struct LayerBlock {
    coeff_indices: Vec<usize>,
    radius: f64,
}

#[derive(Debug)]
enum Node {
    HaarBall { sub: SubalgebraBasis, blocks: Vec<LayerBlock> },
    GaussianLayer1 { basis: Vec<Vec<f64>>, chol: Vec<Vec<f64>> },
    Density { sub: SubalgebraBasis, blocks: Vec<LayerBlock>, density: DensitySpec, bound: f64 },
    PointMass { element: Vec<f64> },
    Dilated { base: Box<Node>, epsilon: f64 },
    Convolution { factors: Vec<Node> },
}

/// A validated, resolved measure ready for repeated sampling.
#[derive(Debug)]
pub struct CompiledMeasure {
    ctx: MeasureCtx,
    node: Node,
}

fn layer_blocks(
    sub: &SubalgebraBasis,
    gauge: &HomogeneousGauge,
    radius: f64,
) -> Result<Vec<LayerBlock>, MeasureError> {
    if !sub.is_graded() {
        return Err(MeasureError::SubgroupInvalid("ball sampling needs a graded subgroup"));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(MeasureError::InvalidParameter("ball radius must be positive and finite"));
    }
    let mut blocks: Vec<LayerBlock> = Vec::new();
    for layer in 1..=gauge.step() {
        let coeff_indices: Vec<usize> = sub
            .layers()
            .iter()
            .enumerate()
            .filter(|&(_, &l)| l == layer)
            .map(|(j, _)| j)
            .collect();
        if coeff_indices.is_empty() {
            continue;
        }
        let radius = (radius / gauge.sigma()[layer - 1]).powi(layer as i32);
        blocks.push(LayerBlock { coeff_indices, radius });
    }
    Ok(blocks)
}

/// Uniform draw from the per-layer product of Euclidean balls, by rejection
/// from the per-layer coordinate boxes. Budget is shared across layers.
fn ball_coeffs(
    blocks: &[LayerBlock],
    dim: usize,
    rng: &mut crate::rng::SampleRng,
    budget: &mut u64,
) -> Result<Vec<f64>, MeasureError> {
    let mut coeffs = vec![0.0; dim];
    for block in blocks {
        loop {
            *budget += 1;
            if *budget > REJECTION_BUDGET {
                return Err(MeasureError::RejectionBudgetExceeded);
            }
            let mut sumsq = 0.0;
            for &j in &block.coeff_indices {
                let t = rng.uniform_in(-block.radius, block.radius);
                coeffs[j] = t;
                sumsq += t * t;
            }
            if sumsq.sqrt() <= block.radius {
                break;
            }
        }
    }
    Ok(coeffs)
}

fn validate_gaussian_layer1(
    ctx: &MeasureCtx,
    covariance: &[Vec<f64>],
    basis: &Option<Vec<Vec<f64>>>,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>), MeasureError> {
    let dim = ctx.law.dim();
    let layer1 = ctx.law.grading().layer_range(1);
    let basis: Vec<Vec<f64>> = match basis {
        Some(vs) => {
            for v in vs {
                if v.len() != dim {
                    return Err(MeasureError::DimensionMismatch { expected: dim, got: v.len() });
                }
                if v.iter().any(|c| !c.is_finite()) {
                    return Err(MeasureError::InvalidParameter("basis vector is not finite"));
                }
                if v.iter().enumerate().any(|(i, c)| !layer1.contains(&i) && *c != 0.0) {
                    return Err(MeasureError::InvalidParameter(
                        "basis vector has support outside layer 1",
                    ));
                }
            }
            // reject dependent directions; the covariance is expressed in this basis
            let mut ortho: Vec<Vec<f64>> = Vec::new();
            for v in vs {
                let mut w = v.clone();
                for _ in 0..2 {
                    for u in &ortho {
                        let d: f64 = w.iter().zip(u).map(|(a, b)| a * b).sum();
                        for (wi, ui) in w.iter_mut().zip(u) {
                            *wi -= d * ui;
                        }
                    }
                }
                let norm = w.iter().map(|c| c * c).sum::<f64>().sqrt();
                if norm <= 1e-10 {
                    return Err(MeasureError::InvalidParameter(
                        "basis vectors must be linearly independent",
                    ));
                }
                for c in &mut w {
                    *c /= norm;
                }
                ortho.push(w);
            }
            vs.clone()
        }
        None => layer1
            .clone()
            .map(|i| {
                let mut v = vec![0.0; dim];
                v[i] = 1.0;
                v
            })
            .collect(),
    };
    let m = basis.len();
    if covariance.len() != m || covariance.iter().any(|row| row.len() != m) {
        return Err(MeasureError::InvalidParameter("covariance shape must match the basis"));
    }
    let chol = crate::linalg::cholesky(covariance)
        .ok_or(MeasureError::InvalidParameter("covariance must be symmetric positive-definite"))?;
    Ok((basis, chol))
}

fn compile_node(ctx: &MeasureCtx, spec: &MeasureSpec) -> Result<Node, MeasureError> {
    match spec {
        MeasureSpec::HaarBall { subgroup, radius } => {
            let sub = subgroup.resolve(&ctx.algebra)?;
            let blocks = layer_blocks(&sub, &ctx.gauge, *radius)?;
            Ok(Node::HaarBall { sub, blocks })
        }
        MeasureSpec::GaussianLayer1 { covariance, basis } => {
            let (basis, chol) = validate_gaussian_layer1(ctx, covariance, basis)?;
            Ok(Node::GaussianLayer1 { basis, chol })
        }
        MeasureSpec::DensityOnSubgroup { subgroup, density, bound, radius } => {
            density.validate()?;
            if !(*bound > 0.0) || !bound.is_finite() {
                return Err(MeasureError::InvalidParameter("density bound must be positive"));
            }
            let sub = subgroup.resolve(&ctx.algebra)?;
            let blocks = layer_blocks(&sub, &ctx.gauge, *radius)?;
            Ok(Node::Density { sub, blocks, density: density.clone(), bound: *bound })
        }
        MeasureSpec::PointMass { element } => {
            if element.len() != ctx.law.dim() {
                return Err(MeasureError::DimensionMismatch {
                    expected: ctx.law.dim(),
                    got: element.len(),
                });
            }
            if element.iter().any(|c| !c.is_finite()) {
                return Err(MeasureError::InvalidParameter("point mass element is not finite"));
            }
            Ok(Node::PointMass { element: element.clone() })
        }
        MeasureSpec::Dilated { base, epsilon } => {
            if !(*epsilon > 0.0) || !epsilon.is_finite() {
                return Err(MeasureError::InvalidParameter("epsilon must be positive and finite"));
            }
            Ok(Node::Dilated { base: Box::new(compile_node(ctx, base)?), epsilon: *epsilon })
        }
        MeasureSpec::Convolution { factors } => {
            if factors.is_empty() {
                return Err(MeasureError::InvalidParameter("convolution needs a factor"));
            }
            let factors =
                factors.iter().map(|f| compile_node(ctx, f)).collect::<Result<Vec<_>, _>>()?;
            Ok(Node::Convolution { factors })
        }
    }
}

pub fn compile(ctx: &MeasureCtx, spec: &MeasureSpec) -> Result<CompiledMeasure, MeasureError> {
    Ok(CompiledMeasure { ctx: ctx.clone(), node: compile_node(ctx, spec)? })
}

impl CompiledMeasure {
    /// One draw. Pure function of (stream root, stream id, index).
    pub fn sample(&self, stream: SamplerStream, index: u64) -> Result<Vec<f64>, MeasureError> {
        let mut out = Vec::with_capacity(self.ctx.law.dim());
        self.sample_rec(&self.node, stream, index, &mut out)?;
        Ok(out)
    }

    fn sample_rec(
        &self,
        node: &Node,
        stream: SamplerStream,
        index: u64,
        out: &mut Vec<f64>,
    ) -> Result<(), MeasureError> {
        let law = &self.ctx.law;
        match node {
            Node::HaarBall { sub, blocks } => {
                let mut rng = stream.rng_at(index);
                let mut budget = 0;
                let coeffs = ball_coeffs(blocks, sub.dim(), &mut rng, &mut budget)?;
                *out = sub.embed(&coeffs);
            }
            Node::GaussianLayer1 { basis, chol } => {
                let mut rng = stream.rng_at(index);
                let m = basis.len();
                let mut z = vec![0.0; m];
                rng.fill_standard_normal(&mut z);
                out.clear();
                out.resize(law.dim(), 0.0);
                for (row, l_row) in chol.iter().enumerate() {
                    let w: f64 = l_row[..=row].iter().zip(&z).map(|(a, b)| a * b).sum();
                    for (oi, bi) in out.iter_mut().zip(&basis[row]) {
                        *oi += w * bi;
                    }
                }
            }
            Node::Density { sub, blocks, density, bound } => {
                let mut rng = stream.rng_at(index);
                let mut budget = 0;
                loop {
                    let coeffs = ball_coeffs(blocks, sub.dim(), &mut rng, &mut budget)?;
                    let x = sub.embed(&coeffs);
                    let f = density.value(&self.ctx.gauge, &x);
                    if f > *bound {
                        return Err(MeasureError::InvalidDensityBound);
                    }
                    if rng.uniform01() * bound <= f {
                        *out = x;
                        return Ok(());
                    }
                }
            }
            Node::PointMass { element } => {
                out.clear();
                out.extend_from_slice(element);
            }
            Node::Dilated { base, epsilon } => {
                self.sample_rec(base, stream, index, out)?;
                *out = law.dilate(epsilon, out);
            }
            Node::Convolution { factors } => {
                self.sample_rec(&factors[0], stream.child(0), index, out)?;
                let mut xj = Vec::with_capacity(law.dim());
                let mut prod = Vec::with_capacity(law.dim());
                let mut scratch = law.scratch();
                for (j, f) in factors.iter().enumerate().skip(1) {
                    self.sample_rec(f, stream.child(j as u64), index, &mut xj)?;
                    law.multiply_into(out, &xj, &mut prod, &mut scratch);
                    std::mem::swap(out, &mut prod);
                }
            }
        }
        Ok(())
    }
}

/// One draw without keeping the compiled form; see `compile` for loops.
pub fn sample(
    ctx: &MeasureCtx,
    spec: &MeasureSpec,
    stream: SamplerStream,
    index: u64,
) -> Result<Vec<f64>, MeasureError> {
    compile(ctx, spec)?.sample(stream, index)
}

/// Pushforward under the dilation by epsilon.
pub fn dilate_measure(spec: &MeasureSpec, epsilon: f64) -> Result<MeasureSpec, MeasureError> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(MeasureError::InvalidParameter("epsilon must be positive and finite"));
    }
    Ok(MeasureSpec::Dilated { base: Box::new(spec.clone()), epsilon })
}

fn supported_in(
    ctx: &MeasureCtx,
    spec: &MeasureSpec,
    stage: &SubalgebraBasis,
) -> Result<bool, MeasureError> {
    match spec {
        MeasureSpec::HaarBall { subgroup, .. }
        | MeasureSpec::DensityOnSubgroup { subgroup, .. } => {
            let sub = subgroup.resolve(&ctx.algebra)?;
            Ok(stage.contains(&sub, SUPPORT_TOL))
        }
        MeasureSpec::GaussianLayer1 { covariance, basis } => {
            let (basis, _) = validate_gaussian_layer1(ctx, covariance, basis)?;
            Ok(basis.iter().all(|v| stage.contains_vector(v, SUPPORT_TOL)))
        }
        MeasureSpec::PointMass { element } => Ok(stage.contains_vector(element, SUPPORT_TOL)),
        // a dilation keeps a graded span invariant
        MeasureSpec::Dilated { base, .. } => {
            Ok(stage.is_graded() && supported_in(ctx, base, stage)?)
        }
        MeasureSpec::Convolution { factors } => {
            for f in factors {
                if !supported_in(ctx, f, stage)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
    }
}

/// Truncated convolution along a nested filtration: the sample is
/// X_m * X_{m-1} * ... * X_1, highest stage leftmost.
pub fn cac_truncated(
    ctx: &MeasureCtx,
    filtration: &[SubalgebraBasis],
    factors: &[MeasureSpec],
) -> Result<MeasureSpec, MeasureError> {
    if filtration.is_empty() || filtration.len() != factors.len() {
        return Err(MeasureError::InvalidParameter(
            "filtration and factors must be nonempty and of equal length",
        ));
    }
    if filtration.iter().any(|h| h.algebra_id() != ctx.algebra.id()) {
        return Err(MeasureError::AlgebraMismatch);
    }
    for pair in filtration.windows(2) {
        if !pair[1].contains(&pair[0], SUPPORT_TOL) {
            return Err(MeasureError::FiltrationNotNested);
        }
    }
    for (index, (factor, stage)) in factors.iter().zip(filtration).enumerate() {
        if !supported_in(ctx, factor, stage)? {
            return Err(MeasureError::SupportMismatch { index });
        }
    }
    Ok(MeasureSpec::Convolution { factors: factors.iter().rev().cloned().collect() })
}

/// Gauge radius of a ball containing the support, when structurally known.
fn known_support_radius(spec: &MeasureSpec) -> Option<f64> {
    match spec {
        MeasureSpec::HaarBall { radius, .. } => Some(*radius),
        MeasureSpec::DensityOnSubgroup { radius, .. } => Some(*radius),
        MeasureSpec::Dilated { base, epsilon } => known_support_radius(base).map(|r| r * epsilon),
        _ => None,
    }
}

/// For stage i (1-based) returns epsilon_i such that the dilated factor puts
/// mass above 1 - 2^-i on the gauge ball of radius 2^-i. Factors with a known
/// support radius R get the closed form 2^-i / (2R); anything else is
/// certified by Monte Carlo with a Clopper-Pearson lower bound at the stated
/// confidence.
pub fn choose_epsilons(
    ctx: &MeasureCtx,
    filtration: &[SubalgebraBasis],
    factors: &[MeasureSpec],
    confidence: f64,
) -> Result<Vec<f64>, MeasureError> {
    if filtration.len() != factors.len() {
        return Err(MeasureError::InvalidParameter(
            "filtration and factors must have equal length",
        ));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(MeasureError::InvalidParameter("confidence must lie in (0, 1)"));
    }
    let mut epsilons = Vec::with_capacity(factors.len());
    for (idx, factor) in factors.iter().enumerate() {
        let stage = idx + 1;
        let target_radius = 0.5f64.powi(stage as i32);
        let target_mass = 1.0 - target_radius;
        if let Some(r) = known_support_radius(factor) {
            if !(r > 0.0) || !r.is_finite() {
                return Err(MeasureError::InvalidParameter(
                    "support radius must be positive and finite",
                ));
            }
            epsilons.push(target_radius / (2.0 * r));
            continue;
        }
        // monotone in epsilon: shrinking the dilation concentrates mass at e
        let n = ((8.0 / target_radius).ceil() as u64).max(4096);
        let stream = SamplerStream::new(EPSILON_CERT_SEED, ctx.algebra.id()).child(stage as u64);
        let mut chosen = None;
        for halving in 0..60i32 {
            let eps = 0.5f64.powi(halving);
            let compiled = compile(ctx, &dilate_measure(factor, eps)?)?;
            let cand = stream.child(halving as u64);
            let hits = (0..n)
                .into_par_iter()
                .map(|i| {
                    let x = compiled.sample(cand, i)?;
                    Ok(u64::from(ctx.gauge.eval(&x) <= target_radius))
                })
                .try_reduce(|| 0, |a, b| Ok(a + b))?;
            let lower = clopper_pearson_lower(hits, n, confidence)
                .map_err(|_| MeasureError::CertificationFailed { stage })?;
            if lower > target_mass {
                chosen = Some(eps);
                break;
            }
        }
        epsilons.push(chosen.ok_or(MeasureError::CertificationFailed { stage })?);
    }
    Ok(epsilons)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassEstimate {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub successes: u64,
    pub n: u64,
}

/// Monte Carlo mass of the indicator set with a 99% Wilson interval.
/// Degenerate counts (0 or n successes) collapse the interval.
pub fn estimate_mass<F>(
    ctx: &MeasureCtx,
    spec: &MeasureSpec,
    indicator: F,
    n_samples: u64,
    stream: SamplerStream,
) -> Result<MassEstimate, MeasureError>
where
    F: Fn(&[f64]) -> bool + Sync,
{
    if n_samples < 100 {
        return Err(MeasureError::InvalidSampleSize { min: 100 });
    }
    let compiled = compile(ctx, spec)?;
    let successes = (0..n_samples)
        .into_par_iter()
        .map(|i| Ok(u64::from(indicator(&compiled.sample(stream, i)?))))
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let (ci_low, ci_high) = if successes == 0 {
        (0.0, 0.0)
    } else if successes == n_samples {
        (1.0, 1.0)
    } else {
        wilson_interval(successes, n_samples, Z_99)
    };
    Ok(MassEstimate {
        estimate: successes as f64 / n_samples as f64,
        ci_low,
        ci_high,
        successes,
        n: n_samples,
    })
}

/// Fraction of Haar-ball mass the set keeps at each radius.
pub fn density_point_check<F>(
    ctx: &MeasureCtx,
    indicator: F,
    subgroup: &SubgroupSpec,
    radii: &[f64],
    n_per_radius: u64,
    stream: SamplerStream,
) -> Result<Vec<(f64, f64)>, MeasureError>
where
    F: Fn(&[f64]) -> bool + Sync,
{
    if radii.is_empty() || radii[0] <= 0.0 || radii.windows(2).any(|w| w[1] <= 0.0 || w[1] >= w[0])
    {
        return Err(MeasureError::InvalidParameter("radii must be positive and decreasing"));
    }
    if n_per_radius == 0 {
        return Err(MeasureError::InvalidSampleSize { min: 1 });
    }
    let mut out = Vec::with_capacity(radii.len());
    for (k, &radius) in radii.iter().enumerate() {
        let spec = MeasureSpec::HaarBall { subgroup: subgroup.clone(), radius };
        let compiled = compile(ctx, &spec)?;
        let sub_stream = stream.child(k as u64);
        let hits = (0..n_per_radius)
            .into_par_iter()
            .map(|i| Ok(u64::from(indicator(&compiled.sample(sub_stream, i)?))))
            .try_reduce(|| 0, |a, b| Ok(a + b))?;
        out.push((radius, hits as f64 / n_per_radius as f64));
    }
    Ok(out)
}

/// Stratified estimate of the 1-D Lebesgue measure of
/// {t in t_range : indicator(g * delta_t(Y)) holds} for layer-1 Y.
pub fn aronszajn_line_probe<F>(
    ctx: &MeasureCtx,
    indicator: F,
    g: &[f64],
    y: &[f64],
    t_range: (f64, f64),
    n_points: u64,
    stream: SamplerStream,
) -> Result<f64, MeasureError>
where
    F: Fn(&[f64]) -> bool + Sync,
{
    let law = &ctx.law;
    let dim = law.dim();
    if g.len() != dim || y.len() != dim {
        return Err(MeasureError::DimensionMismatch { expected: dim, got: g.len().max(y.len()) });
    }
    let layer1 = law.grading().layer_range(1);
    if y.iter().enumerate().any(|(i, c)| !layer1.contains(&i) && *c != 0.0) {
        return Err(MeasureError::InvalidParameter("direction must lie in layer 1"));
    }
    let (a, b) = t_range;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(MeasureError::InvalidParameter("t range must be finite and increasing"));
    }
    if n_points == 0 {
        return Err(MeasureError::InvalidSampleSize { min: 1 });
    }
    let width = b - a;
    let cell = width / n_points as f64;
    let hits = (0..n_points)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.rng_at(i);
            let t = a + cell * (i as f64 + rng.uniform01());
            let point = law
                .multiply(g, &law.dilate(&t, y))
                .map_err(|_| MeasureError::InvalidParameter("non-finite line point"))?;
            Ok(u64::from(indicator(&point)))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(width * hits as f64 / n_points as f64)
}

/// Fixed directions for distribution-equality checks; seeded, unit length.
pub fn seeded_functionals(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let stream = SamplerStream::new(seed, 0xFC);
    (0..count)
        .map(|k| {
            let mut rng = stream.rng_at(k as u64);
            let mut v = vec![0.0; dim];
            rng.fill_standard_normal(&mut v);
            let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt().max(1e-300);
            v.iter_mut().for_each(|c| *c /= norm);
            v
        })
        .collect()
}

fn l2_block_count(algebra: &GradedLieAlgebra) -> Result<usize, MeasureError> {
    let dims = algebra.grading().layer_dims();
    let k = if dims.len() == 2 && dims[0] == 2 * dims[1] { dims[1] } else { 0 };
    let ok = k > 0
        && crate::algebra::build_l2_triple_truncation(k)
            .map(|a| a.id() == algebra.id())
            .unwrap_or(false);
    if ok {
        Ok(k)
    } else {
        Err(MeasureError::InvalidParameter("algebra is not an l2-triple truncation"))
    }
}

/// Nested filtration of the l2-triple truncation by its leading Heisenberg
/// blocks: stage i is the subgroup generated by the pairs (x_b, y_b), b <= i,
/// which closes up to include the corresponding z_b.
pub fn l2_block_filtration(
    ctx: &MeasureCtx,
    stages: usize,
) -> Result<Vec<SubalgebraBasis>, MeasureError> {
    let k = l2_block_count(ctx.algebra())?;
    if stages == 0 || stages > k {
        return Err(MeasureError::InvalidParameter("stage count must lie in 1..=k"));
    }
    let dim = 3 * k;
    Ok((1..=stages)
        .map(|i| {
            let mut gens = Vec::with_capacity(2 * i);
            for b in 0..i {
                let mut vx = vec![0.0; dim];
                vx[b] = 1.0;
                let mut vy = vec![0.0; dim];
                vy[k + b] = 1.0;
                gens.push(vx);
                gens.push(vy);
            }
            subalgebra_closure(ctx.algebra(), &gens).expect("block generators are independent")
        })
        .collect())
}

/// Haar-ball factor supported on the 1-based Heisenberg block of the
/// l2-triple truncation; the natural increment measure of its filtration.
pub fn l2_block_ball(
    ctx: &MeasureCtx,
    block: usize,
    radius: f64,
) -> Result<MeasureSpec, MeasureError> {
    let k = l2_block_count(ctx.algebra())?;
    if block == 0 || block > k {
        return Err(MeasureError::InvalidParameter("block index must lie in 1..=k"));
    }
    let dim = 3 * k;
    let mut vx = vec![0.0; dim];
    vx[block - 1] = 1.0;
    let mut vy = vec![0.0; dim];
    vy[k + block - 1] = 1.0;
    Ok(MeasureSpec::HaarBall { subgroup: SubgroupSpec::Span { vectors: vec![vx, vy] }, radius })
}
