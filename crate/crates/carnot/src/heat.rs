//! Left-invariant Brownian motion driven by a layer-1 Gaussian, its
//! time-space scaling law, and Gauss-Haar windowed measures.
//!
//! Paths are simulated by increment composition: g <- g * exp(dB), which
//! keeps every sample exactly on the group and reproduces the step-2
//! bracket structure of each increment exactly. For step >= 3 algebras the
//! same simulator runs but is flagged experimental: no distributional
//! claims are attached beyond the scaling diagnostics.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measure::MeasureCtx;
use crate::rng::SamplerStream;
use crate::stats::{mean_variance, two_sample_ks};

/// Functional count of the scaling battery beyond gauge norm + coordinates.
const SCALING_EXTRA_FUNCTIONALS: usize = 5;
/// Seed for those functionals; fixed so reports are comparable across runs.
const SCALING_FUNCTIONAL_SEED: u64 = 0x5CA7_11E_D00D_u64;

#[derive(Debug, Error, PartialEq)]
pub enum HeatError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("sample size too small; need at least {min}")]
    InvalidSampleSize { min: u64 },
    #[error("test function support leaks through the window boundary (fraction {fraction})")]
    SupportLeakage { fraction: f64 },
    #[error("empty sample in a statistical comparison")]
    EmptySample,
}

/// Driving data of the hypoelliptic diffusion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatKernelSpec {
    /// Positive-definite covariance of the layer-1 driving Gaussian.
    pub covariance: Vec<Vec<f64>>,
    /// Terminal time T of the path.
    pub time: f64,
    /// Euler steps per path.
    pub steps: u32,
}

impl HeatKernelSpec {
    /// Standard driving Gaussian on layer 1, unit time.
    pub fn standard(d1: usize, steps: u32) -> HeatKernelSpec {
        let covariance =
            (0..d1).map(|i| (0..d1).map(|j| f64::from(i == j)).collect()).collect();
        HeatKernelSpec { covariance, time: 1.0, steps }
    }
}

/// Product of a layer-1 Gaussian with the uniform window on a commutator
/// coordinate box; the two parts are independent and assembled additively.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussHaarWindowSpec {
    pub covariance: Vec<Vec<f64>>,
    /// One half-width per commutator coordinate; zero collapses that
    /// coordinate to the identity.
    pub box_half_widths: Vec<f64>,
}

fn layer1_cholesky(
    ctx: &MeasureCtx,
    covariance: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>, HeatError> {
    let d1 = ctx.law().grading().layer_range(1).len();
    if covariance.len() != d1 || covariance.iter().any(|r| r.len() != d1) {
        return Err(HeatError::InvalidParameter("covariance must be square on layer 1"));
    }
    crate::linalg::cholesky(covariance)
        .ok_or(HeatError::InvalidParameter("covariance must be symmetric positive-definite"))
}

/// Endpoint sampler for one heat kernel spec.
#[derive(Debug)]
pub struct HeatSampler {
    law: Arc<crate::group::GroupLaw<f64>>,
    chol_scaled: Vec<Vec<f64>>,
    steps: u32,
    d1: usize,
    experimental: bool,
}

impl HeatSampler {
    pub fn new(ctx: &MeasureCtx, spec: &HeatKernelSpec) -> Result<HeatSampler, HeatError> {
        if !(spec.time > 0.0) || !spec.time.is_finite() {
            return Err(HeatError::InvalidParameter("time must be positive and finite"));
        }
        if spec.steps == 0 {
            return Err(HeatError::InvalidParameter("steps must be at least 1"));
        }
        let mut chol = layer1_cholesky(ctx, &spec.covariance)?;
        let scale = (spec.time / f64::from(spec.steps)).sqrt();
        for row in &mut chol {
            for c in row.iter_mut() {
                *c *= scale;
            }
        }
        let d1 = ctx.law().grading().layer_range(1).len();
        Ok(HeatSampler {
            law: ctx.law().clone(),
            chol_scaled: chol,
            steps: spec.steps,
            d1,
            experimental: ctx.law().step() >= 3,
        })
    }

    /// True when the algebra has step >= 3, where the scheme carries no
    /// distributional guarantee.
    pub fn is_experimental(&self) -> bool {
        self.experimental
    }

    /// Endpoint of one path started at the identity.
    pub fn sample(&self, stream: SamplerStream, index: u64) -> Vec<f64> {
        self.sample_from(None, stream, index)
    }

    /// Endpoint of one path started at `start`; increments multiply on the
    /// right, so this equals start * (endpoint from the identity) exactly.
    pub fn sample_from(
        &self,
        start: Option<&[f64]>,
        stream: SamplerStream,
        index: u64,
    ) -> Vec<f64> {
        let dim = self.law.dim();
        let mut rng = stream.rng_at(index);
        let mut g = match start {
            Some(s) => s.to_vec(),
            None => vec![0.0; dim],
        };
        let mut incr = vec![0.0; dim];
        let mut z = vec![0.0; self.d1];
        let mut out = Vec::with_capacity(dim);
        let mut scratch = self.law.scratch();
        for _ in 0..self.steps {
            rng.fill_standard_normal(&mut z);
            for (row, l_row) in self.chol_scaled.iter().enumerate() {
                incr[row] = l_row[..=row].iter().zip(&z).map(|(a, b)| a * b).sum();
            }
            self.law.multiply_into(&g, &incr, &mut out, &mut scratch);
            std::mem::swap(&mut g, &mut out);
        }
        g
    }
}

/// One endpoint draw; see `HeatSampler` for loops.
pub fn sample_heat_endpoint(
    ctx: &MeasureCtx,
    spec: &HeatKernelSpec,
    stream: SamplerStream,
    index: u64,
) -> Result<Vec<f64>, HeatError> {
    Ok(HeatSampler::new(ctx, spec)?.sample(stream, index))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestLine {
    pub label: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub lambda: f64,
    pub n_paths: u64,
    pub alpha_family: f64,
    pub alpha_each: f64,
    pub tests: Vec<TestLine>,
    pub all_pass: bool,
}

/// Tests Law(g_T) * Law(g_T) against the dilation pushforward of Law(g_T)
/// by sqrt(2): two-sample KS on the gauge norm, every coordinate, and five
/// seeded linear functionals, Bonferroni-corrected at family level 0.01.
pub fn scaling_check(
    ctx: &MeasureCtx,
    spec: &HeatKernelSpec,
    n_paths: u64,
    stream: SamplerStream,
) -> Result<ScalingReport, HeatError> {
    scaling_check_with_exponent(ctx, spec, n_paths, stream, std::f64::consts::SQRT_2)
}

/// Same battery with an arbitrary dilation factor on the one-endpoint side;
/// anything but sqrt(2) is a deliberate negative control.
pub fn scaling_check_with_exponent(
    ctx: &MeasureCtx,
    spec: &HeatKernelSpec,
    n_paths: u64,
    stream: SamplerStream,
    lambda: f64,
) -> Result<ScalingReport, HeatError> {
    if n_paths < 10_000 {
        return Err(HeatError::InvalidSampleSize { min: 10_000 });
    }
    let sampler = HeatSampler::new(ctx, spec)?;
    let law = ctx.law();
    let conv_stream = stream.child(0);
    let dil_stream = stream.child(1);
    let a: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let x = sampler.sample(conv_stream.child(0), i);
            let y = sampler.sample(conv_stream.child(1), i);
            law.multiply(&x, &y).expect("endpoints share the law")
        })
        .collect();
    let b: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|i| law.dilate(&lambda, &sampler.sample(dil_stream, i)))
        .collect();

    let dim = law.dim();
    let alpha_family = 0.01;
    let n_tests = 1 + dim + SCALING_EXTRA_FUNCTIONALS;
    let alpha_each = alpha_family / n_tests as f64;
    let mut tests = Vec::with_capacity(n_tests);
    let mut push = |label: String, pa: Vec<f64>, pb: Vec<f64>| -> Result<(), HeatError> {
        let ks = two_sample_ks(&pa, &pb, alpha_each).map_err(|_| HeatError::EmptySample)?;
        tests.push(TestLine {
            label,
            statistic: ks.statistic,
            threshold: ks.threshold,
            pass: ks.pass,
        });
        Ok(())
    };
    push(
        "gauge-norm".into(),
        a.iter().map(|x| ctx.gauge().eval(x)).collect(),
        b.iter().map(|x| ctx.gauge().eval(x)).collect(),
    )?;
    for k in 0..dim {
        push(
            format!("coordinate-{k}"),
            a.iter().map(|x| x[k]).collect(),
            b.iter().map(|x| x[k]).collect(),
        )?;
    }
    for (k, f) in crate::measure::seeded_functionals(dim, SCALING_EXTRA_FUNCTIONALS, SCALING_FUNCTIONAL_SEED)
        .iter()
        .enumerate()
    {
        let dot = |x: &Vec<f64>| x.iter().zip(f).map(|(u, v)| u * v).sum::<f64>();
        push(format!("functional-{k}"), a.iter().map(dot).collect(), b.iter().map(dot).collect())?;
    }
    let all_pass = tests.iter().all(|t| t.pass);
    Ok(ScalingReport { lambda, n_paths, alpha_family, alpha_each, tests, all_pass })
}

/// Sampler for the windowed Gauss-Haar product measure.
#[derive(Debug)]
pub struct GaussHaarSampler {
    law: Arc<crate::group::GroupLaw<f64>>,
    chol: Vec<Vec<f64>>,
    half_widths: Vec<f64>,
    d1: usize,
}

impl GaussHaarSampler {
    pub fn new(ctx: &MeasureCtx, spec: &GaussHaarWindowSpec) -> Result<GaussHaarSampler, HeatError> {
        let chol = layer1_cholesky(ctx, &spec.covariance)?;
        let d1 = ctx.law().grading().layer_range(1).len();
        let commutator = ctx.law().dim() - d1;
        if spec.box_half_widths.len() != commutator {
            return Err(HeatError::InvalidParameter(
                "one box half-width per commutator coordinate",
            ));
        }
        if spec.box_half_widths.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(HeatError::InvalidParameter("box half-widths must be nonnegative"));
        }
        Ok(GaussHaarSampler { law: ctx.law().clone(), chol, half_widths: spec.box_half_widths.clone(), d1 })
    }

    pub fn sample(&self, stream: SamplerStream, index: u64) -> Vec<f64> {
        let mut rng = stream.rng_at(index);
        let mut out = vec![0.0; self.law.dim()];
        let mut z = vec![0.0; self.d1];
        rng.fill_standard_normal(&mut z);
        for (row, l_row) in self.chol.iter().enumerate() {
            out[row] = l_row[..=row].iter().zip(&z).map(|(a, b)| a * b).sum();
        }
        for (slot, &w) in out[self.d1..].iter_mut().zip(&self.half_widths) {
            *slot = rng.uniform_in(-w, w);
        }
        out
    }
}

pub fn sample_gauss_haar(
    ctx: &MeasureCtx,
    spec: &GaussHaarWindowSpec,
    stream: SamplerStream,
    index: u64,
) -> Result<Vec<f64>, HeatError> {
    Ok(GaussHaarSampler::new(ctx, spec)?.sample(stream, index))
}

/// Bounded test functions for the interchange check; named so they can be
/// carried in configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum HeatTestFunction {
    Zero,
    /// Indicator of the centered coordinate cube.
    CentralCube { half_width: f64 },
    /// Compactly supported radial bump (1 - (|g|/radius)^2)^2.
    SmoothBump { radius: f64 },
    /// cos(frequency * first coordinate); depends on layer 1 only.
    LayerOneWave { frequency: f64 },
}

impl HeatTestFunction {
    pub fn eval(&self, g: &[f64]) -> f64 {
        match self {
            HeatTestFunction::Zero => 0.0,
            HeatTestFunction::CentralCube { half_width } => {
                f64::from(g.iter().all(|c| c.abs() <= *half_width))
            }
            HeatTestFunction::SmoothBump { radius } => {
                let q = g.iter().map(|c| c * c).sum::<f64>() / (radius * radius);
                if q >= 1.0 {
                    0.0
                } else {
                    (1.0 - q) * (1.0 - q)
                }
            }
            HeatTestFunction::LayerOneWave { frequency } => (frequency * g[0]).cos(),
        }
    }

    fn validate(&self) -> Result<(), HeatError> {
        let ok = match self {
            HeatTestFunction::Zero => true,
            HeatTestFunction::CentralCube { half_width } => {
                *half_width > 0.0 && half_width.is_finite()
            }
            HeatTestFunction::SmoothBump { radius } => *radius > 0.0 && radius.is_finite(),
            HeatTestFunction::LayerOneWave { frequency } => frequency.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(HeatError::InvalidParameter("test function parameter out of range"))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpIntegralLine {
    pub label: String,
    pub lhs_mean: f64,
    pub rhs_mean: f64,
    pub diff: f64,
    pub paired_se: f64,
    pub leak_fraction: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpIntegralReport {
    pub n: u64,
    pub margin: f64,
    pub lines: Vec<ExpIntegralLine>,
    pub all_pass: bool,
}

/// Paired Monte Carlo check of the interchange identity
/// int int f(x*y) m(dy) gamma(dx) = int int f(x+y) m(dy) gamma(dx),
/// with x gamma-distributed on layer 1 and y uniform on the commutator box.
/// Both sides use the same draws. The windowing is admissible only when the
/// function's support stays away from the box boundary by the observed shear
/// margin; violations raise SupportLeakage.
pub fn exp_integral_check(
    ctx: &MeasureCtx,
    covariance: &[Vec<f64>],
    functions: &[HeatTestFunction],
    box_half_widths: &[f64],
    n: u64,
    stream: SamplerStream,
) -> Result<ExpIntegralReport, HeatError> {
    if n < 100 {
        return Err(HeatError::InvalidSampleSize { min: 100 });
    }
    for f in functions {
        f.validate()?;
    }
    let spec = GaussHaarWindowSpec {
        covariance: covariance.to_vec(),
        box_half_widths: box_half_widths.to_vec(),
    };
    let sampler = GaussHaarSampler::new(ctx, &spec)?;
    let law = ctx.law();
    let d1 = sampler.d1;

    struct PairRow {
        product: Vec<f64>,
        sum: Vec<f64>,
        boundary_gap: f64,
        shift: f64,
    }
    let rows: Vec<PairRow> = (0..n)
        .into_par_iter()
        .map(|i| {
            let joint = sampler.sample(stream, i);
            let mut x = joint.clone();
            let mut y = vec![0.0; law.dim()];
            for k in d1..law.dim() {
                y[k] = joint[k];
                x[k] = 0.0;
            }
            let product = law.multiply(&x, &y).expect("window sample is finite");
            let mut boundary_gap = f64::INFINITY;
            for (k, &w) in sampler.half_widths.iter().enumerate() {
                boundary_gap = boundary_gap.min(w - y[d1 + k].abs());
            }
            let shift = product
                .iter()
                .zip(&joint)
                .skip(d1)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            PairRow { product, sum: joint, boundary_gap, shift }
        })
        .collect();

    let margin = rows.iter().map(|r| r.shift).fold(0.0f64, f64::max);
    let mut lines = Vec::with_capacity(functions.len());
    for (k, f) in functions.iter().enumerate() {
        let mut leaks = 0u64;
        let mut diffs = Vec::with_capacity(rows.len());
        let mut lhs = Vec::with_capacity(rows.len());
        let mut rhs = Vec::with_capacity(rows.len());
        for row in &rows {
            let l = f.eval(&row.product);
            let r = f.eval(&row.sum);
            // the shear at this sample is the distance the change of
            // variables moves its own window coordinate; support mass whose
            // boundary gap is smaller than that can cross the boundary
            if (l != 0.0 || r != 0.0) && row.boundary_gap <= row.shift {
                leaks += 1;
            }
            lhs.push(l);
            rhs.push(r);
            diffs.push(l - r);
        }
        let leak_fraction = leaks as f64 / n as f64;
        if leak_fraction > 1e-3 {
            return Err(HeatError::SupportLeakage { fraction: leak_fraction });
        }
        let (dmean, dvar) = mean_variance(&diffs);
        let paired_se = (dvar / n as f64).sqrt();
        lines.push(ExpIntegralLine {
            label: format!("f{k}:{f:?}"),
            lhs_mean: crate::stats::mean(&lhs),
            rhs_mean: crate::stats::mean(&rhs),
            diff: dmean,
            paired_se,
            leak_fraction,
            pass: dmean.abs() <= 3.0 * paired_se,
        });
    }
    let all_pass = lines.iter().all(|l| l.pass);
    Ok(ExpIntegralReport { n, margin, lines, all_pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{build_free_nilpotent, build_heisenberg};
    use crate::measure::MeasureCtx;

    fn h1_ctx() -> MeasureCtx {
        MeasureCtx::with_trivial_gauge(Arc::new(build_heisenberg(2, 1).unwrap())).unwrap()
    }

    #[test]
    fn single_step_endpoint_has_no_area() {
        let ctx = h1_ctx();
        let spec = HeatKernelSpec::standard(2, 1);
        for i in 0..50 {
            let g = sample_heat_endpoint(&ctx, &spec, SamplerStream::new(3, 0), i).unwrap();
            assert_eq!(g[2], 0.0, "one increment brackets with nothing");
        }
    }

    #[test]
    fn spec_validation() {
        let ctx = h1_ctx();
        let mut spec = HeatKernelSpec::standard(2, 10);
        spec.time = 0.0;
        assert!(HeatSampler::new(&ctx, &spec).is_err());
        let mut spec = HeatKernelSpec::standard(2, 0);
        spec.time = 1.0;
        assert!(HeatSampler::new(&ctx, &spec).is_err());
        let spec = HeatKernelSpec {
            covariance: vec![vec![1.0, 2.0], vec![2.0, 1.0]],
            time: 1.0,
            steps: 10,
        };
        assert_eq!(
            HeatSampler::new(&ctx, &spec).unwrap_err(),
            HeatError::InvalidParameter("covariance must be symmetric positive-definite")
        );
        assert!(!HeatSampler::new(&ctx, &HeatKernelSpec::standard(2, 5))
            .unwrap()
            .is_experimental());
        let free3 =
            MeasureCtx::with_trivial_gauge(Arc::new(build_free_nilpotent(2, 3).unwrap())).unwrap();
        assert!(HeatSampler::new(&free3, &HeatKernelSpec::standard(2, 5))
            .unwrap()
            .is_experimental());
    }

    #[test]
    fn endpoints_are_deterministic_and_translate() {
        let ctx = h1_ctx();
        let spec = HeatKernelSpec::standard(2, 64);
        let sampler = HeatSampler::new(&ctx, &spec).unwrap();
        let stream = SamplerStream::new(5, 1);
        let h = vec![0.4, -0.7, 0.2];
        for i in 0..20 {
            let g = sampler.sample(stream, i);
            assert_eq!(g, sampler.sample(stream, i));
            // increments attach on the right, so a translated start factors out
            let translated = sampler.sample_from(Some(&h), stream, i);
            let want = ctx.law().multiply(&h, &g).unwrap();
            for (a, b) in translated.iter().zip(&want) {
                assert!((a - b).abs() <= 1e-12, "translate mismatch {a} vs {b}");
            }
        }
    }

    #[test]
    fn layer1_marginal_is_the_driving_gaussian() {
        let ctx = h1_ctx();
        let spec = HeatKernelSpec::standard(2, 300);
        let sampler = HeatSampler::new(&ctx, &spec).unwrap();
        let stream = SamplerStream::new(7, 2);
        let n = 30_000u64;
        let endpoints: Vec<Vec<f64>> =
            (0..n).into_par_iter().map(|i| sampler.sample(stream.child(0), i)).collect();
        // reference draws from an independent stream
        let reference: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let mut rng = stream.child(1).rng_at(i);
                (rng.standard_normal(), rng.standard_normal())
            })
            .collect();
        for k in 0..2 {
            let a: Vec<f64> = endpoints.iter().map(|g| g[k]).collect();
            let b: Vec<f64> =
                reference.iter().map(|(u, v)| if k == 0 { *u } else { *v }).collect();
            let ks = two_sample_ks(&a, &b, 0.01).unwrap();
            assert!(ks.pass, "coordinate {k}: statistic {} threshold {}", ks.statistic, ks.threshold);
        }
    }

    #[test]
    fn area_variance_matches_the_levy_oracle() {
        // z is the stochastic area; at time 1 its variance is 1/4 and its
        // fourth moment is 5/16, with discretization bias -1/(4 steps)
        let ctx = h1_ctx();
        let steps = 400u32;
        let spec = HeatKernelSpec::standard(2, steps);
        let sampler = HeatSampler::new(&ctx, &spec).unwrap();
        let stream = SamplerStream::new(11, 3);
        let n = 20_000u64;
        let z: Vec<f64> =
            (0..n).into_par_iter().map(|i| sampler.sample(stream, i)[2]).collect();
        let (m, var) = mean_variance(&z);
        assert!(m.abs() < 0.01, "area mean {m}");
        let expected = 0.25 - 0.25 / f64::from(steps);
        let se = (2.0f64 * 0.25 * 0.25 / n as f64).sqrt().max(0.5 / (n as f64).sqrt());
        assert!((var - expected).abs() <= 3.0 * se, "area variance {var} vs {expected}");
        let m4 = z.iter().map(|a| a.powi(4)).sum::<f64>() / n as f64;
        assert!((m4 - 0.3125).abs() <= 0.05, "fourth moment {m4}");
    }

    #[test]
    fn doubling_steps_only_refines_the_riemann_sum() {
        let ctx = h1_ctx();
        let stream = SamplerStream::new(13, 4);
        let n = 20_000u64;
        let var_at = |steps: u32, branch: u64| {
            let sampler = HeatSampler::new(&ctx, &HeatKernelSpec::standard(2, steps)).unwrap();
            let z: Vec<f64> = (0..n)
                .into_par_iter()
                .map(|i| sampler.sample(stream.child(branch), i)[2])
                .collect();
            mean_variance(&z).1
        };
        let coarse = var_at(250, 0);
        let fine = var_at(1000, 1);
        // biases are 1/1000 and 1/4000; both estimates sit within MC error
        assert!((coarse - fine).abs() < 0.012, "coarse {coarse} fine {fine}");
    }

    #[test]
    fn scaling_identity_holds_and_wrong_exponent_fails() {
        let ctx = h1_ctx();
        let spec = HeatKernelSpec::standard(2, 200);
        let report =
            scaling_check(&ctx, &spec, 10_000, SamplerStream::new(17, 5)).unwrap();
        assert!(report.all_pass, "{:#?}", report.tests);
        assert_eq!(report.tests.len(), 1 + 3 + 5);
        let control =
            scaling_check_with_exponent(&ctx, &spec, 10_000, SamplerStream::new(17, 6), 2.0)
                .unwrap();
        assert!(!control.all_pass, "wrong exponent must be rejected");
        // the z coordinate carries the broken scaling: variance 4x vs 2x
        let z_line = control.tests.iter().find(|t| t.label == "coordinate-2").unwrap();
        assert!(!z_line.pass);
        assert_eq!(
            scaling_check(&ctx, &spec, 0, SamplerStream::new(17, 7)).unwrap_err(),
            HeatError::InvalidSampleSize { min: 10_000 }
        );
    }

    #[test]
    fn gauss_haar_window_samples() {
        let ctx = h1_ctx();
        let spec = GaussHaarWindowSpec {
            covariance: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            box_half_widths: vec![2.0],
        };
        let sampler = GaussHaarSampler::new(&ctx, &spec).unwrap();
        let stream = SamplerStream::new(19, 8);
        let n = 50_000u64;
        let mut sum_sq = [0.0f64; 3];
        let mut max_z = 0.0f64;
        for i in 0..n {
            let g = sampler.sample(stream, i);
            for (s, c) in sum_sq.iter_mut().zip(&g) {
                *s += c * c;
            }
            max_z = max_z.max(g[2].abs());
        }
        let nf = n as f64;
        assert!((sum_sq[0] / nf - 1.0).abs() < 0.03);
        assert!((sum_sq[1] / nf - 1.0).abs() < 0.03);
        // uniform on [-2,2] has second moment 4/3
        assert!((sum_sq[2] / nf - 4.0 / 3.0).abs() < 0.03);
        assert!(max_z <= 2.0 && max_z > 1.99);

        // zero-width window degenerates to the layer-1 Gaussian
        let flat = GaussHaarWindowSpec {
            covariance: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            box_half_widths: vec![0.0],
        };
        let sampler = GaussHaarSampler::new(&ctx, &flat).unwrap();
        for i in 0..100 {
            assert_eq!(sampler.sample(stream, i)[2], 0.0);
        }
        let bad = GaussHaarWindowSpec {
            covariance: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            box_half_widths: vec![2.0, 2.0],
        };
        assert!(GaussHaarSampler::new(&ctx, &bad).is_err());
    }

    #[test]
    fn interchange_is_exact_per_sample_on_step_two() {
        // with a central commutator x*y = x+y, so every line is exact
        let ctx = h1_ctx();
        let cov = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let fns = vec![
            HeatTestFunction::CentralCube { half_width: 0.8 },
            HeatTestFunction::LayerOneWave { frequency: 2.0 },
            HeatTestFunction::Zero,
        ];
        let report =
            exp_integral_check(&ctx, &cov, &fns, &[2.0], 20_000, SamplerStream::new(23, 9))
                .unwrap();
        assert!(report.all_pass, "{:#?}", report.lines);
        assert_eq!(report.margin, 0.0);
        for line in &report.lines {
            assert_eq!(line.diff, 0.0);
            assert_eq!(line.leak_fraction, 0.0);
        }
    }

    #[test]
    fn interchange_holds_statistically_on_step_three() {
        let ctx =
            MeasureCtx::with_trivial_gauge(Arc::new(build_free_nilpotent(2, 3).unwrap())).unwrap();
        let cov = vec![vec![0.25, 0.0], vec![0.0, 0.25]];
        let fns = vec![
            HeatTestFunction::SmoothBump { radius: 0.6 },
            HeatTestFunction::CentralCube { half_width: 0.5 },
        ];
        let report =
            exp_integral_check(&ctx, &cov, &fns, &[3.0, 3.0, 3.0], 40_000, SamplerStream::new(29, 10))
                .unwrap();
        assert!(report.margin > 0.0, "step 3 shears the window");
        assert!(report.all_pass, "{:#?}", report.lines);
    }

    #[test]
    fn interchange_flags_leaking_support() {
        let ctx =
            MeasureCtx::with_trivial_gauge(Arc::new(build_free_nilpotent(2, 3).unwrap())).unwrap();
        let cov = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        // the cube reaches the window boundary, so the shear can move mass out
        let fns = vec![HeatTestFunction::CentralCube { half_width: 1.0 }];
        let err =
            exp_integral_check(&ctx, &cov, &fns, &[1.0, 1.0, 1.0], 20_000, SamplerStream::new(31, 11))
                .unwrap_err();
        assert!(matches!(err, HeatError::SupportLeakage { .. }), "{err:?}");
    }

    #[test]
    fn endpoint_norms_are_finite() {
        let ctx = h1_ctx();
        let sampler = HeatSampler::new(&ctx, &HeatKernelSpec::standard(2, 100)).unwrap();
        let stream = SamplerStream::new(37, 12);
        let bad = (0..50_000u64)
            .into_par_iter()
            .filter(|&i| {
                let g = sampler.sample(stream, i);
                !ctx.gauge().eval(&g).is_finite() || g.iter().any(|c| !c.is_finite())
            })
            .count();
        assert_eq!(bad, 0);
    }
}
