//! Acceptance battery. One test per contract line, each at its stated
//! tolerance and sample size; a test prints a single summary line when it
//! holds and aborts with the offending numbers when it does not.
//!
//! Randomness is drawn from named counter streams with a fixed root seed,
//! so every run of this file sees identical data.

use std::sync::Arc;

use carnot::algebra::{
    build_free_nilpotent, build_heisenberg, build_l2_triple_truncation, subalgebra_closure,
    GradedLieAlgebra,
};
use carnot::group::GroupLaw;
use carnot::harness::{self, h1_full_suite};
use carnot::heat::{
    exp_integral_check, scaling_check, scaling_check_with_exponent, HeatKernelSpec, HeatSampler,
    HeatTestFunction,
};
use carnot::measure::{
    cac_truncated, choose_epsilons, compile, dilate_measure, estimate_mass, l2_block_ball,
    l2_block_filtration, MeasureCtx, MeasureSpec, SubgroupSpec,
};
use carnot::metric::{calibrate_gauge, distance, quotient_distance, HomogeneousGauge};
use carnot::rng::SamplerStream;
use carnot::stats::{central_moment, mean_variance, two_sample_ks};
use carnot::Rational;
use num_traits::Zero;
use rayon::prelude::*;

const ROOT_SEED: u64 = 11;

fn presets() -> Vec<(&'static str, Arc<GradedLieAlgebra>)> {
    vec![
        ("h1", Arc::new(build_heisenberg(2, 1).unwrap())),
        ("heis-4-1", Arc::new(build_heisenberg(4, 1).unwrap())),
        ("free-2-3", Arc::new(build_free_nilpotent(2, 3).unwrap())),
        ("free-3-2", Arc::new(build_free_nilpotent(3, 2).unwrap())),
        ("l2triple-2", Arc::new(build_l2_triple_truncation(2).unwrap())),
        ("l2triple-3", Arc::new(build_l2_triple_truncation(3).unwrap())),
    ]
}

fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn norm2(xs: &[f64]) -> f64 {
    xs.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Construction re-validates the graded Jacobi identity in exact rationals;
/// on top of that, every (step+1)-fold bracket must vanish: identically in
/// exact arithmetic on dyadic vectors, and to 1e-12 in doubles.
#[test]
fn a01_jacobi_holds_and_deep_brackets_vanish() {
    for (name, algebra) in presets() {
        let s = algebra.step();
        let dim = algebra.dim();
        let stream = SamplerStream::named(ROOT_SEED, name, 0);
        let mut worst = 0.0f64;
        for trial in 0..100u64 {
            let mut rng = stream.rng_at(trial);
            let float: Vec<Vec<f64>> = (0..=s)
                .map(|_| (0..dim).map(|_| rng.uniform_in(-1.0, 1.0)).collect())
                .collect();
            let mut acc = float[0].clone();
            for v in &float[1..] {
                acc = algebra.bracket(&acc, v).unwrap();
            }
            worst = worst.max(max_abs(&acc));

            let exact: Vec<Vec<Rational>> = (0..=s)
                .map(|_| {
                    (0..dim)
                        .map(|_| {
                            let n = rng.uniform_in(-8.0, 9.0).floor() as i64;
                            let j = rng.uniform_in(0.0, 4.0).floor() as i32;
                            Rational::new(n.into(), (1i64 << j).into())
                        })
                        .collect()
                })
                .collect();
            let mut acc = exact[0].clone();
            for v in &exact[1..] {
                acc = algebra.bracket(&acc, v).unwrap();
            }
            assert!(
                acc.iter().all(Rational::is_zero),
                "{name}: exact {}-fold bracket is nonzero",
                s + 1
            );
        }
        assert!(worst <= 1e-12, "{name}: float deep bracket residual {worst:e}");
    }
    println!("[PASS] jacobi and nilpotency: exact zeros, float residual <= 1e-12");
}

fn moebius(mut n: u64) -> i64 {
    let mut prime_count = 0u32;
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            n /= p;
            if n % p == 0 {
                return 0;
            }
            prime_count += 1;
        }
        p += 1;
    }
    if n > 1 {
        prime_count += 1;
    }
    if prime_count % 2 == 0 {
        1
    } else {
        -1
    }
}

fn witt_dim(rank: i64, k: u64) -> usize {
    let mut total = 0i64;
    for d in 1..=k {
        if k % d == 0 {
            total += moebius(d) * rank.pow((k / d) as u32);
        }
    }
    (total / k as i64) as usize
}

/// Free nilpotent layer dimensions against the necklace-counting formula,
/// for every (rank, step) whose total dimension fits the default cap.
#[test]
fn a02_free_nilpotent_layer_dims_match_the_witt_formula() {
    let mut combos = 0;
    for rank in 2..=10usize {
        for step in 1..=7usize {
            let dims: Vec<usize> = (1..=step).map(|k| witt_dim(rank as i64, k as u64)).collect();
            if dims.iter().sum::<usize>() > 64 {
                break;
            }
            let algebra = build_free_nilpotent(rank, step).unwrap();
            assert_eq!(
                algebra.grading().layer_dims(),
                &dims[..],
                "free({rank},{step}) layer dims"
            );
            combos += 1;
        }
    }
    assert!(combos >= 25, "only {combos} (rank, step) pairs checked");
    println!("[PASS] witt dimensions: {combos} (rank, step) pairs match");
}

/// Products associate to 1e-9 relative on 1000 random triples per preset;
/// on step-2 groups the product equals x + y + [x,y]/2 to 1e-14.
#[test]
fn a03_products_associate_and_match_the_step_two_closed_form() {
    for (name, algebra) in presets() {
        let law = GroupLaw::<f64>::new(&algebra).unwrap();
        let dim = law.dim();
        let stream = SamplerStream::named(ROOT_SEED, name, 1);
        let mut worst = 0.0f64;
        for trial in 0..1000u64 {
            let mut rng = stream.rng_at(trial);
            let mut draw = || -> Vec<f64> { (0..dim).map(|_| rng.uniform_in(-2.0, 2.0)).collect() };
            let (x, y, z) = (draw(), draw(), draw());
            let left = law.multiply(&law.multiply(&x, &y).unwrap(), &z).unwrap();
            let right = law.multiply(&x, &law.multiply(&y, &z).unwrap()).unwrap();
            let scale = max_abs(&left).max(max_abs(&right)).max(1.0);
            let defect = left
                .iter()
                .zip(&right)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
                / scale;
            worst = worst.max(defect);
        }
        assert!(worst <= 1e-9, "{name}: associativity defect {worst:e}");

        if law.step() == 2 {
            let closed_stream = SamplerStream::named(ROOT_SEED, name, 2);
            let mut worst = 0.0f64;
            for trial in 0..1000u64 {
                let mut rng = closed_stream.rng_at(trial);
                let x: Vec<f64> = (0..dim).map(|_| rng.uniform_in(-2.0, 2.0)).collect();
                let y: Vec<f64> = (0..dim).map(|_| rng.uniform_in(-2.0, 2.0)).collect();
                let product = law.multiply(&x, &y).unwrap();
                let bracket = algebra.bracket(&x, &y).unwrap();
                for k in 0..dim {
                    let closed = x[k] + y[k] + 0.5 * bracket[k];
                    worst = worst.max((product[k] - closed).abs());
                }
            }
            assert!(worst <= 1e-14, "{name}: closed-form defect {worst:e}");
        }
    }
    println!("[PASS] associativity: <= 1e-9 relative, step-2 closed form <= 1e-14");
}

/// Dilations compose as a one-parameter group and act as automorphisms,
/// both to 1e-10 on 1000 random draws per preset.
#[test]
fn a04_dilations_compose_and_are_automorphisms() {
    for (name, algebra) in presets() {
        let law = GroupLaw::<f64>::new(&algebra).unwrap();
        let dim = law.dim();
        let stream = SamplerStream::named(ROOT_SEED, name, 3);
        let mut worst = 0.0f64;
        for trial in 0..1000u64 {
            let mut rng = stream.rng_at(trial);
            let lambda = rng.uniform_in(0.2, 2.5);
            let mu = rng.uniform_in(0.2, 2.5);
            let x: Vec<f64> = (0..dim).map(|_| rng.uniform_in(-2.0, 2.0)).collect();
            let y: Vec<f64> = (0..dim).map(|_| rng.uniform_in(-2.0, 2.0)).collect();

            let composed = law.dilate(&lambda, &law.dilate(&mu, &x));
            let direct = law.dilate(&(lambda * mu), &x);
            let scale = max_abs(&direct).max(1.0);
            for k in 0..dim {
                worst = worst.max((composed[k] - direct[k]).abs() / scale);
            }

            let of_product = law.dilate(&lambda, &law.multiply(&x, &y).unwrap());
            let of_factors = law
                .multiply(&law.dilate(&lambda, &x), &law.dilate(&lambda, &y))
                .unwrap();
            let scale = max_abs(&of_product).max(1.0);
            for k in 0..dim {
                worst = worst.max((of_product[k] - of_factors[k]).abs() / scale);
            }
        }
        assert!(worst <= 1e-10, "{name}: dilation defect {worst:e}");
    }
    println!("[PASS] dilations: composition and automorphism <= 1e-10");
}

/// Gauge homogeneity N(delta_lambda x) = lambda N(x) to 1e-12, and a
/// calibrated gauge admits no subadditivity violation on 1e5 fresh pairs.
#[test]
fn a05_gauges_are_homogeneous_and_calibration_certifies_subadditivity() {
    for (name, algebra) in presets() {
        let law = GroupLaw::<f64>::new(&algebra).unwrap();
        let gauge = HomogeneousGauge::trivial(&law);
        let dim = law.dim();
        let stream = SamplerStream::named(ROOT_SEED, name, 4);
        for trial in 0..1000u64 {
            let mut rng = stream.rng_at(trial);
            let lambda = rng.uniform_in(0.05, 8.0);
            let x: Vec<f64> = (0..dim).map(|_| rng.uniform_in(-2.0, 2.0)).collect();
            let scaled = gauge.eval(&law.dilate(&lambda, &x));
            let direct = lambda * gauge.eval(&x);
            assert!(
                (scaled - direct).abs() <= 1e-12 * direct.max(1.0),
                "{name}: homogeneity defect {scaled} vs {direct}"
            );
        }
    }

    let algebra = Arc::new(build_heisenberg(2, 1).unwrap());
    let law = GroupLaw::<f64>::new(&algebra).unwrap();
    let radius = 1.5;
    let gauge = calibrate_gauge(
        &law,
        radius,
        10_000,
        0.05,
        &SamplerStream::named(ROOT_SEED, "acceptance-calibrate", 0),
    )
    .unwrap();
    assert_eq!(gauge.sigma()[0], 1.0);

    let fresh = SamplerStream::named(ROOT_SEED, "acceptance-subadd", 0);
    let dim = law.dim();
    let violations: u64 = (0..100_000u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = fresh.rng_at(trial);
            let x: Vec<f64> = (0..dim).map(|_| rng.uniform_in(-radius, radius)).collect();
            let y: Vec<f64> = (0..dim).map(|_| rng.uniform_in(-radius, radius)).collect();
            let lhs = gauge.eval(&law.multiply(&x, &y).unwrap());
            let rhs = gauge.eval(&x) + gauge.eval(&y);
            u64::from(lhs > rhs * (1.0 + 1e-12) + 1e-12)
        })
        .sum();
    assert_eq!(violations, 0, "calibrated gauge violated subadditivity");
    println!(
        "[PASS] gauges: homogeneity <= 1e-12, calibrated sigma {:?} with 0/100000 violations",
        gauge.sigma()
    );
}

fn lu_det(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        if m[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        det *= m[col][col];
        let pivot_row = m[col].clone();
        for row in m.iter_mut().skip(col + 1) {
            let f = row[col] / pivot_row[col];
            for (entry, p) in row.iter_mut().zip(&pivot_row).skip(col) {
                *entry -= f * p;
            }
        }
    }
    det
}

/// Left and right translations are volume preserving: the numeric Jacobian
/// of y -> x.y (and y -> y.x) has determinant 1 to 1e-8. This is the change
/// of variables behind every convolution identity in the measure module.
#[test]
fn a06_translation_jacobians_have_unit_determinant() {
    let h = 1e-5;
    let mut worst = 0.0f64;
    for (name, algebra) in presets() {
        let law = GroupLaw::<f64>::new(&algebra).unwrap();
        let dim = law.dim();
        let stream = SamplerStream::named(ROOT_SEED, name, 5);
        for trial in 0..100u64 {
            let mut rng = stream.rng_at(trial);
            let x: Vec<f64> = (0..dim).map(|_| rng.uniform_in(-1.5, 1.5)).collect();
            let y: Vec<f64> = (0..dim).map(|_| rng.uniform_in(-1.5, 1.5)).collect();
            for left in [true, false] {
                let mut jac = vec![vec![0.0; dim]; dim];
                for j in 0..dim {
                    let mut up = y.clone();
                    let mut down = y.clone();
                    up[j] += h;
                    down[j] -= h;
                    let (fu, fd) = if left {
                        (law.multiply(&x, &up).unwrap(), law.multiply(&x, &down).unwrap())
                    } else {
                        (law.multiply(&up, &x).unwrap(), law.multiply(&down, &x).unwrap())
                    };
                    for i in 0..dim {
                        jac[i][j] = (fu[i] - fd[i]) / (2.0 * h);
                    }
                }
                let det = lu_det(jac);
                let defect = (det - 1.0).abs();
                assert!(defect <= 1e-8, "{name}: translation det {det} (defect {defect:e})");
                worst = worst.max(defect);
            }
        }
    }
    println!("[PASS] translation jacobians: max |det - 1| = {worst:.2e}");
}

/// The layer-1 projection is a submetry bound: |pi(g)| <= d(e, g) without
/// exception on 1e5 ball samples; the quotient distance by the center of
/// the first Heisenberg group matches a grid oracle at (1, 0, 5).
#[test]
fn a07_layer_one_projection_is_short_and_quotient_matches_the_grid() {
    let algebra = Arc::new(build_heisenberg(2, 1).unwrap());
    let ctx = MeasureCtx::with_trivial_gauge(Arc::clone(&algebra)).unwrap();
    let ball = compile(&ctx, &MeasureSpec::HaarBall { subgroup: SubgroupSpec::Full, radius: 1.0 })
        .unwrap();
    let stream = SamplerStream::named(ROOT_SEED, "acceptance-submetry", 0);
    let violations: u64 = (0..100_000u64)
        .into_par_iter()
        .map(|i| {
            let g = ball.sample(stream, i).unwrap();
            let horizontal = norm2(&g[..2]);
            u64::from(horizontal > ctx.gauge().eval(&g) * (1.0 + 1e-12))
        })
        .sum();
    assert_eq!(violations, 0, "layer-1 projection exceeded the gauge distance");

    let law = ctx.law();
    let center = subalgebra_closure(&algebra, &[algebra.basis_vector::<f64>(3)]).unwrap();
    let q = quotient_distance(ctx.gauge(), law, &[0.0; 3], &[1.0, 0.0, 5.0], &center).unwrap();
    let mut grid_min = f64::INFINITY;
    let mut t = -8.0;
    while t <= -2.0 {
        grid_min = grid_min.min(ctx.gauge().eval(&[1.0, 0.0, 5.0 + t]));
        t += 1e-4;
    }
    assert!((q - grid_min).abs() <= 1e-4, "quotient {q} vs grid {grid_min}");
    assert!((q - 1.0).abs() <= 1e-4, "quotient {q} should be 1");
    println!("[PASS] submetry: 0/100000 violations, quotient distance {q:.6}");
}

/// Haar-ball mass of the half-radius sub-ball is 2^-Q (0.0625 on the first
/// Heisenberg group) within the Wilson 99% interval at n = 1e6; convolving
/// with a point mass translates samples; dilation scales supports exactly.
#[test]
fn a08_ball_mass_convolution_and_dilation_behave() {
    let algebra = Arc::new(build_heisenberg(2, 1).unwrap());
    let ctx = MeasureCtx::with_trivial_gauge(Arc::clone(&algebra)).unwrap();
    let ball = MeasureSpec::HaarBall { subgroup: SubgroupSpec::Full, radius: 1.0 };

    let est = estimate_mass(
        &ctx,
        &ball,
        |x| ctx.gauge().eval(x) <= 0.5,
        1_000_000,
        SamplerStream::named(ROOT_SEED, "acceptance-mass", 0),
    )
    .unwrap();
    assert!(
        est.ci_low <= 0.0625 && 0.0625 <= est.ci_high,
        "half-radius mass {} with CI [{}, {}]",
        est.estimate,
        est.ci_low,
        est.ci_high
    );

    let point = vec![0.3, -0.2, 0.1];
    let convolved = compile(
        &ctx,
        &MeasureSpec::Convolution {
            factors: vec![ball.clone(), MeasureSpec::PointMass { element: point.clone() }],
        },
    )
    .unwrap();
    let direct = compile(&ctx, &ball).unwrap();
    let conv_stream = SamplerStream::named(ROOT_SEED, "acceptance-conv", 0);
    let ref_stream = SamplerStream::named(ROOT_SEED, "acceptance-conv-ref", 0);
    let n = 50_000u64;
    let a: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| convolved.sample(conv_stream, i).unwrap())
        .collect();
    let b: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let g = direct.sample(ref_stream, i).unwrap();
            ctx.law().multiply(&g, &point).unwrap()
        })
        .collect();
    let alpha_each = 0.01 / 4.0;
    let mut checks: Vec<(String, Vec<f64>, Vec<f64>)> = vec![(
        "gauge norm".into(),
        a.iter().map(|g| ctx.gauge().eval(g)).collect(),
        b.iter().map(|g| ctx.gauge().eval(g)).collect(),
    )];
    for k in 0..3 {
        checks.push((
            format!("coordinate {}", k + 1),
            a.iter().map(|g| g[k]).collect(),
            b.iter().map(|g| g[k]).collect(),
        ));
    }
    for (label, xs, ys) in checks {
        let ks = two_sample_ks(&xs, &ys, alpha_each).unwrap();
        assert!(
            ks.pass,
            "convolution with point mass: {label} KS {} over threshold {}",
            ks.statistic, ks.threshold
        );
    }

    let shrunk =
        compile(&ctx, &MeasureSpec::Dilated { base: Box::new(ball), epsilon: 0.05 }).unwrap();
    let dil_stream = SamplerStream::named(ROOT_SEED, "acceptance-dilated", 0);
    let leaks: u64 = (0..100_000u64)
        .into_par_iter()
        .map(|i| {
            let g = shrunk.sample(dil_stream, i).unwrap();
            u64::from(ctx.gauge().eval(&g) > 0.05 * (1.0 + 1e-12))
        })
        .sum();
    assert_eq!(leaks, 0, "dilated ball left its support");
    println!(
        "[PASS] measures: mass {:.5} in [{:.5}, {:.5}], KS ok, 0/100000 support leaks",
        est.estimate, est.ci_low, est.ci_high
    );
}

/// Commutator-block convolutions on a 12-block two-layer truncation: the
/// closed-form epsilons are hit exactly, and the left-invariant increments
/// of the inverse partial products equal the gauge of each new factor, so
/// that from stage 8 on they sit far below 2^(2-k).
#[test]
fn a09_block_convolution_epsilons_and_inverse_increments() {
    let blocks = 12usize;
    let algebra = Arc::new(build_l2_triple_truncation(blocks).unwrap());
    let ctx = MeasureCtx::with_trivial_gauge(Arc::clone(&algebra)).unwrap();
    let filtration = l2_block_filtration(&ctx, blocks).unwrap();
    let factors: Vec<MeasureSpec> = (1..=blocks)
        .map(|b| l2_block_ball(&ctx, b, 1.0).unwrap())
        .collect();

    let epsilons = choose_epsilons(&ctx, &filtration, &factors, 0.99).unwrap();
    for (i, eps) in epsilons.iter().enumerate() {
        assert_eq!(*eps, 0.5f64.powi(i as i32 + 2), "epsilon {}", i + 1);
    }

    let dilated: Vec<MeasureSpec> = factors
        .iter()
        .zip(&epsilons)
        .map(|(f, eps)| dilate_measure(f, *eps).unwrap())
        .collect();
    cac_truncated(&ctx, &filtration, &dilated).unwrap();
    let compiled: Vec<_> = dilated.iter().map(|f| compile(&ctx, f).unwrap()).collect();

    let law = ctx.law();
    let stream = SamplerStream::named(ROOT_SEED, "acceptance-cac", 0);
    let worst = (0..1000u64)
        .into_par_iter()
        .map(|path| {
            let mut product = law.identity();
            let mut inverse_points = vec![law.inverse(&product)];
            let mut factor_gauges = Vec::with_capacity(blocks);
            for (stage, factor) in compiled.iter().enumerate() {
                let x = factor.sample(stream.child(stage as u64), path).unwrap();
                factor_gauges.push(ctx.gauge().eval(&x));
                product = law.multiply(&x, &product).unwrap();
                inverse_points.push(law.inverse(&product));
            }
            let mut worst_ratio = 0.0f64;
            for k in 0..blocks {
                let step = distance(ctx.gauge(), law, &inverse_points[k], &inverse_points[k + 1])
                    .unwrap();
                assert!(
                    (step - factor_gauges[k]).abs() <= 1e-12 * factor_gauges[k].max(1.0),
                    "increment {} differs from the factor gauge",
                    k + 1
                );
                if k + 1 >= 8 {
                    let bound = 2.0f64.powi(2 - (k as i32 + 1));
                    assert!(step < bound, "increment {} = {step} over {bound}", k + 1);
                    worst_ratio = worst_ratio.max(step / bound);
                }
            }
            worst_ratio
        })
        .reduce(|| 0.0, f64::max);
    println!(
        "[PASS] block convolutions: closed-form epsilons exact, tail increment ratio {worst:.3e}"
    );
}

/// Heat endpoints on the first Heisenberg group at T = 1 with 1000 Euler
/// steps: layer-1 marginals match the driving Gaussian (KS), the area
/// variance is T^2/4 within 3 standard errors, the sqrt(2) scaling identity
/// passes, and a deliberately wrong exponent is rejected.
#[test]
fn a10_heat_endpoints_scale_like_the_kernel() {
    let algebra = Arc::new(build_heisenberg(2, 1).unwrap());
    let ctx = MeasureCtx::with_trivial_gauge(Arc::clone(&algebra)).unwrap();
    let spec = HeatKernelSpec::standard(2, 1000);
    let sampler = HeatSampler::new(&ctx, &spec).unwrap();
    let stream = SamplerStream::named(ROOT_SEED, "acceptance-heat", 0);
    let n = 100_000u64;
    let endpoints: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| sampler.sample(stream.child(0), i))
        .collect();

    let reference = stream.child(9);
    for (k, label) in [(0usize, "x"), (1usize, "y")] {
        let coord: Vec<f64> = endpoints.iter().map(|g| g[k]).collect();
        let gauss: Vec<f64> = (0..n)
            .map(|i| reference.child(k as u64).rng_at(i).standard_normal())
            .collect();
        let ks = two_sample_ks(&coord, &gauss, 0.005).unwrap();
        assert!(ks.pass, "{label} marginal KS {} over {}", ks.statistic, ks.threshold);
    }

    let zs: Vec<f64> = endpoints.iter().map(|g| g[2]).collect();
    let (_, var) = mean_variance(&zs);
    let m4 = central_moment(&zs, 4);
    let se = ((m4 - var * var) / n as f64).sqrt();
    assert!(
        (var - 0.25).abs() <= 3.0 * se,
        "area variance {var} vs 0.25 (3 se = {})",
        3.0 * se
    );

    let scaling_spec = HeatKernelSpec::standard(2, 250);
    let report = scaling_check(&ctx, &scaling_spec, 10_000, stream.child(1)).unwrap();
    assert!(report.all_pass, "scaling identity rejected: {:?}", report.tests);

    let wrong =
        scaling_check_with_exponent(&ctx, &scaling_spec, 10_000, stream.child(2), 2.0).unwrap();
    assert!(!wrong.all_pass, "doubling exponent should have been rejected");
    println!(
        "[PASS] heat kernel: KS ok, area variance {var:.5} (3 se {:.1e}), scaling ok, control rejected",
        3.0 * se
    );
}

/// Integrating f(x . y) against a commutator-window times layer-1 Gaussian
/// equals integrating f(x + y): paired means agree within 3 standard errors
/// for each window-compatible test function at n = 1e5.
#[test]
fn a11_group_and_additive_convolutions_agree_under_the_window() {
    let algebra = Arc::new(build_heisenberg(2, 1).unwrap());
    let ctx = MeasureCtx::with_trivial_gauge(Arc::clone(&algebra)).unwrap();
    let covariance = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let functions = vec![
        HeatTestFunction::CentralCube { half_width: 0.9 },
        HeatTestFunction::SmoothBump { radius: 0.8 },
        HeatTestFunction::LayerOneWave { frequency: 1.5 },
    ];
    let report = exp_integral_check(
        &ctx,
        &covariance,
        &functions,
        &[2.0],
        100_000,
        SamplerStream::named(ROOT_SEED, "acceptance-exp", 0),
    )
    .unwrap();
    for line in &report.lines {
        assert!(
            line.pass,
            "{}: |{}| over 3 x {}",
            line.label,
            line.diff,
            line.paired_se
        );
    }
    assert!(report.all_pass);
    println!(
        "[PASS] exponential-integral interchange: {} functions within 3 paired se, shear margin {:.1e}",
        report.lines.len(),
        report.margin
    );
}

/// The built-in experiment suite is a pure function of its seed: reports
/// from a 1-thread and an 8-thread pool agree field for field (wall time
/// aside), and the suite itself is green.
#[test]
fn a12_reports_do_not_depend_on_the_thread_count() {
    let config = h1_full_suite(42);
    let run_with = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| harness::run(&config))
            .unwrap()
    };
    let serial = run_with(1);
    let parallel = run_with(8);
    assert!(serial.all_pass, "built-in suite failed");
    assert_eq!(serial.comparison_body(), parallel.comparison_body());
    println!(
        "[PASS] determinism: {} tasks identical across 1 and 8 threads",
        serial.tasks.len()
    );
}
