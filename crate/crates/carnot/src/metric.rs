//! Homogeneous gauges and the metrics they induce.
//!
//! The gauge is N(x) = max_i sigma_i ‖x_i‖^(1/i) with sigma_1 = 1. Exact
//! subadditivity constants exist but are not computed in closed form;
//! calibration certifies a sigma empirically on a sample and the margin is
//! re-checked on fresh samples in tests.

use crate::algebra::SubalgebraBasis;
use crate::group::GroupLaw;
use crate::rng::SamplerStream;
use thiserror::Error;

/// Rounding slack for subadditivity checks; a violation must exceed it.
const SUBADD_SLACK: f64 = 1e-12;
/// Membership tolerance for the ideal validation in quotient distances.
const IDEAL_TOL: f64 = 1e-9;
/// Convergence tolerance of the quotient optimizer.
const QUOTIENT_TOL: f64 = 1e-6;
/// Internal seed for optimizer multi-start jitter; not user-visible.
const QUOTIENT_STARTS_SEED: u64 = 0x71B0_7A1E_5EED_0001;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("gauge, law and arguments must share one algebra")]
    AlgebraMismatch,
    #[error("coordinate vector of length {got}; expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("sigma must have one positive entry per layer, with sigma_1 = 1")]
    InvalidSigma,
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("no subadditive sigma found after {rounds} halving rounds")]
    CalibrationFailed { rounds: usize },
    #[error("subspace is not a graded two-sided ideal")]
    NotAnIdeal,
    #[error("quotient optimizer did not converge to tolerance {tol}")]
    OptimizerDidNotConverge { tol: f64 },
}

/// N(x) = max_i sigma_i ‖x_i‖^(1/i), homogeneous of degree 1 under dilations.
#[derive(Clone, Debug, PartialEq)]
pub struct HomogeneousGauge {
    algebra_id: u64,
    layer_dims: Vec<usize>,
    sigma: Vec<f64>,
}

impl HomogeneousGauge {
    pub fn new(law: &GroupLaw<f64>, sigma: Vec<f64>) -> Result<Self, MetricError> {
        let dims = law.grading().layer_dims();
        if sigma.len() != dims.len() || sigma[0] != 1.0 {
            return Err(MetricError::InvalidSigma);
        }
        if sigma.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(MetricError::InvalidSigma);
        }
        Ok(HomogeneousGauge {
            algebra_id: law.algebra_id(),
            layer_dims: dims.to_vec(),
            sigma,
        })
    }

    /// All-ones sigma; subadditive as-is only on step-1 (abelian) algebras.
    pub fn trivial(law: &GroupLaw<f64>) -> Self {
        HomogeneousGauge {
            algebra_id: law.algebra_id(),
            layer_dims: law.grading().layer_dims().to_vec(),
            sigma: vec![1.0; law.grading().step()],
        }
    }

    pub fn algebra_id(&self) -> u64 {
        self.algebra_id
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn dim(&self) -> usize {
        self.layer_dims.iter().sum()
    }

    pub fn step(&self) -> usize {
        self.layer_dims.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        let mut best = 0.0f64;
        let mut offset = 0;
        for (l, &d) in self.layer_dims.iter().enumerate() {
            let mut sumsq = 0.0;
            for &v in &x[offset..offset + d] {
                sumsq += v * v;
            }
            offset += d;
            let norm = sumsq.sqrt();
            let rooted = match l {
                0 => norm,
                1 => norm.sqrt(),
                _ => norm.powf(1.0 / (l + 1) as f64),
            };
            best = best.max(self.sigma[l] * rooted);
        }
        best
    }
}

fn check_pair(gauge: &HomogeneousGauge, law: &GroupLaw<f64>) -> Result<(), MetricError> {
    if gauge.algebra_id != law.algebra_id() {
        return Err(MetricError::AlgebraMismatch);
    }
    Ok(())
}

fn check_dim(law: &GroupLaw<f64>, v: &[f64]) -> Result<(), MetricError> {
    if v.len() != law.dim() {
        return Err(MetricError::DimensionMismatch { expected: law.dim(), got: v.len() });
    }
    Ok(())
}

/// Left-invariant distance d(g,h) = N(g⁻¹h).
pub fn distance(
    gauge: &HomogeneousGauge,
    law: &GroupLaw<f64>,
    g: &[f64],
    h: &[f64],
) -> Result<f64, MetricError> {
    check_pair(gauge, law)?;
    check_dim(law, g)?;
    check_dim(law, h)?;
    let p = law.multiply(&law.inverse(g), h).expect("dims checked");
    Ok(gauge.eval(&p))
}

/// Searches for sigma with no subadditivity violation on `samples` pairs
/// drawn uniformly from the coordinate box of the given radius, halving
/// sigma_2..sigma_s on each violating round, then applying the final
/// (1 - safety) shrink. Uniform shrinks never create new violations, so the
/// shrink preserves the certificate.
pub fn calibrate_gauge(
    law: &GroupLaw<f64>,
    radius: f64,
    samples: usize,
    safety: f64,
    stream: &SamplerStream,
) -> Result<HomogeneousGauge, MetricError> {
    if samples < 10_000 {
        return Err(MetricError::InvalidParameter("calibration needs samples >= 10^4"));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(MetricError::InvalidParameter("radius must be positive and finite"));
    }
    if !(0.0..1.0).contains(&safety) {
        return Err(MetricError::InvalidParameter("safety must lie in [0,1)"));
    }
    let n = law.dim();
    let mut pairs = Vec::with_capacity(samples);
    for idx in 0..samples as u64 {
        let mut rng = stream.rng_at(idx);
        let x: Vec<f64> = (0..n).map(|_| rng.uniform_in(-radius, radius)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.uniform_in(-radius, radius)).collect();
        pairs.push((x, y));
    }
    let mut scratch = law.scratch();
    let mut prod = Vec::with_capacity(n);
    let mut gauge = HomogeneousGauge::trivial(law);
    const MAX_ROUNDS: usize = 60;
    let mut passed = false;
    for _ in 0..=MAX_ROUNDS {
        let mut violated = false;
        for (x, y) in &pairs {
            law.multiply_into(x, y, &mut prod, &mut scratch);
            let lhs = gauge.eval(&prod);
            let rhs = gauge.eval(x) + gauge.eval(y);
            if lhs > rhs + SUBADD_SLACK * rhs.max(1.0) {
                violated = true;
                break;
            }
        }
        if !violated {
            passed = true;
            break;
        }
        if gauge.sigma.len() == 1 {
            // nothing to shrink; a violation here exceeds rounding slack on
            // an exactly subadditive norm, which indicates a bug
            return Err(MetricError::CalibrationFailed { rounds: 0 });
        }
        for s in gauge.sigma.iter_mut().skip(1) {
            *s *= 0.5;
        }
    }
    if !passed {
        return Err(MetricError::CalibrationFailed { rounds: MAX_ROUNDS });
    }
    for s in gauge.sigma.iter_mut().skip(1) {
        *s *= 1.0 - safety;
    }
    Ok(gauge)
}

/// Distance between the cosets gN and hN, computed as inf over n in N of
/// d(g, h·n). N must be the subgroup of a graded two-sided ideal; for the
/// full commutator block the layer-1 closed form is returned after
/// cross-validation against the optimizer.
pub fn quotient_distance(
    gauge: &HomogeneousGauge,
    law: &GroupLaw<f64>,
    g: &[f64],
    h: &[f64],
    ideal: &SubalgebraBasis,
) -> Result<f64, MetricError> {
    check_pair(gauge, law)?;
    check_dim(law, g)?;
    check_dim(law, h)?;
    if ideal.algebra_id() != law.algebra_id() {
        return Err(MetricError::AlgebraMismatch);
    }
    if !ideal.is_graded() {
        return Err(MetricError::NotAnIdeal);
    }
    for i in 1..=law.dim() {
        let mut e = vec![0.0; law.dim()];
        e[i - 1] = 1.0;
        for w in ideal.vectors() {
            if !ideal.contains_vector(&law.bracket(&e, w), IDEAL_TOL) {
                return Err(MetricError::NotAnIdeal);
            }
        }
    }
    let d0 = distance(gauge, law, g, h)?;
    if d0 == 0.0 || ideal.dim() == 0 {
        return Ok(d0);
    }

    let d1 = law.grading().layer_dims()[0];
    let is_commutator_block =
        ideal.dim() == law.dim() - d1 && ideal.layers().iter().all(|&l| l >= 2);
    let closed_form = if is_commutator_block {
        let mut sumsq = 0.0;
        for i in 0..d1 {
            let diff = h[i] - g[i];
            sumsq += diff * diff;
        }
        Some(sumsq.sqrt())
    } else {
        None
    };

    let opt = optimize_coset(gauge, law, g, h, ideal, d0)?;
    if let Some(cf) = closed_form {
        if (opt - cf).abs() > QUOTIENT_TOL * cf.max(1.0) {
            return Err(MetricError::OptimizerDidNotConverge { tol: QUOTIENT_TOL });
        }
        return Ok(cf);
    }
    Ok(opt)
}

/// Multi-start coordinate descent over the ideal coordinates, each within
/// the homogeneity box |t_j| <= (4 d0)^(layer of j). Plain axis descent
/// zigzags on the curved valleys of a max objective, so each round is
/// followed by a pattern (extrapolation) move, and one start is seeded by
/// the triangular greedy point that zeroes every ideal component of the
/// residual layer by layer.
fn optimize_coset(
    gauge: &HomogeneousGauge,
    law: &GroupLaw<f64>,
    g: &[f64],
    h: &[f64],
    ideal: &SubalgebraBasis,
    d0: f64,
) -> Result<f64, MetricError> {
    let m = ideal.dim();
    let rel0 = law.multiply(&law.inverse(g), h).expect("dims checked");
    let mut scratch = law.scratch();
    let mut rel = Vec::with_capacity(law.dim());
    let mut eval = |t: &[f64]| -> f64 {
        let n_vec = ideal.embed(t);
        law.multiply_into(&rel0, &n_vec, &mut rel, &mut scratch);
        gauge.eval(&rel)
    };
    let half_widths: Vec<f64> =
        ideal.layers().iter().map(|&k| (4.0 * d0).powi(k as i32)).collect();
    let clamp = |t: &mut [f64]| {
        for (tj, &w) in t.iter_mut().zip(&half_widths) {
            *tj = tj.clamp(-w, w);
        }
    };

    // greedy start: the product series is triangular across layers, so the
    // ideal component of layer k responds additively to t_j of layer k
    let mut greedy = vec![0.0; m];
    for layer in 1..=law.step() {
        let n_vec = ideal.embed(&greedy);
        let mut w = Vec::new();
        let mut sc = law.scratch();
        law.multiply_into(&rel0, &n_vec, &mut w, &mut sc);
        for j in 0..m {
            if ideal.layers()[j] == layer {
                let proj: f64 =
                    w.iter().zip(&ideal.vectors()[j]).map(|(a, b)| a * b).sum();
                greedy[j] -= proj;
            }
        }
    }
    clamp(&mut greedy);

    let starts_stream = SamplerStream::new(QUOTIENT_STARTS_SEED, law.algebra_id());
    let mut best = f64::INFINITY;
    let mut best_converged = false;
    for start in 0..8u64 {
        let mut t = match start {
            0 => greedy.clone(),
            1 => vec![0.0; m],
            _ => {
                let mut rng = starts_stream.rng_at(start);
                half_widths.iter().map(|&w| rng.uniform_in(-w, w)).collect()
            }
        };
        let mut f_cur = eval(&t);
        let mut converged = false;
        for _round in 0..200 {
            let f_before = f_cur;
            let t_before = t.clone();
            for j in 0..m {
                let (tj, fj) = line_minimize(
                    |v| {
                        let mut tt = t.clone();
                        tt[j] = v;
                        eval(&tt)
                    },
                    -half_widths[j],
                    half_widths[j],
                );
                if fj <= f_cur {
                    t[j] = tj;
                    f_cur = fj;
                }
            }
            let mut pattern: Vec<f64> =
                t.iter().zip(&t_before).map(|(a, b)| 2.0 * a - b).collect();
            clamp(&mut pattern);
            let fp = eval(&pattern);
            if fp < f_cur {
                t = pattern;
                f_cur = fp;
            }
            if f_before - f_cur <= 1e-10 * f_before.max(1.0) {
                converged = true;
                break;
            }
        }
        if f_cur < best {
            best = f_cur;
            best_converged = converged;
        }
    }
    if !best_converged {
        return Err(MetricError::OptimizerDidNotConverge { tol: QUOTIENT_TOL });
    }
    Ok(best.min(d0))
}

/// Coarse grid scan then golden-section refinement around the best cell.
/// The objective is a max of layer terms and need not be unimodal, hence
/// the scan.
fn line_minimize(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    const GRID: usize = 33;
    let width = hi - lo;
    let mut best_i = 0;
    let mut best_v = f64::INFINITY;
    for i in 0..GRID {
        let x = lo + width * (i as f64) / ((GRID - 1) as f64);
        let v = f(x);
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    let cell = width / ((GRID - 1) as f64);
    let mut a = (lo + cell * (best_i as f64 - 1.0)).max(lo);
    let mut b = (lo + cell * (best_i as f64 + 1.0)).min(hi);
    let inv_phi = 0.618_033_988_749_894_9;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    // deep refinement: objectives like sqrt|t - t*| need the bracket close
    // to machine precision before f itself is small
    for _ in 0..90 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (a + b);
    let fm = f(mid);
    if fm < best_v {
        (mid, fm)
    } else {
        (lo + cell * best_i as f64, best_v)
    }
}

/// Tightest empirical constants for the two-sided comparison
/// c_lower⁻¹ |x-y| <= d(x,y) and d(x,y) <= c_upper |x-y|^(1/s)
/// over pairs from the coordinate box.
pub fn holder_constants(
    gauge: &HomogeneousGauge,
    law: &GroupLaw<f64>,
    box_radius: f64,
    samples: usize,
    stream: &SamplerStream,
) -> Result<(f64, f64), MetricError> {
    check_pair(gauge, law)?;
    if samples < 10_000 {
        return Err(MetricError::InvalidParameter("holder estimation needs samples >= 10^4"));
    }
    if !(box_radius > 0.0) || !box_radius.is_finite() {
        return Err(MetricError::InvalidParameter("box radius must be positive and finite"));
    }
    let n = law.dim();
    let s = law.step() as f64;
    let mut scratch = law.scratch();
    let mut rel = Vec::with_capacity(n);
    let mut c_lower = 0.0f64;
    let mut c_upper = 0.0f64;
    for idx in 0..samples as u64 {
        let mut rng = stream.rng_at(idx);
        let x: Vec<f64> = (0..n).map(|_| rng.uniform_in(-box_radius, box_radius)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.uniform_in(-box_radius, box_radius)).collect();
        let euclid = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if euclid == 0.0 {
            continue;
        }
        law.multiply_into(&law.inverse(&x), &y, &mut rel, &mut scratch);
        let d = gauge.eval(&rel);
        if d > 0.0 {
            c_lower = c_lower.max(euclid / d);
        }
        c_upper = c_upper.max(d / euclid.powf(1.0 / s));
    }
    Ok((c_lower, c_upper))
}
