//! Single-binary CLI over the carnot library.
//!
//! Exit codes: 0 ran to completion, 1 structural error, 2 usage or config
//! error, 3 statistical failure under --strict. Statistical failures never
//! change the exit code without --strict; they are data, not errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use carnot::algebra::{
    build_free_nilpotent, build_heisenberg, build_l2_triple_truncation, GradedLieAlgebra,
};
use carnot::group::GroupLaw;
use carnot::harness::{
    self, builtin_config, builtin_names, null_probe, ExperimentConfig, HarnessError,
    IndicatorSpec,
};
use carnot::heat::{
    exp_integral_check, scaling_check, HeatKernelSpec, HeatSampler, HeatTestFunction,
};
use carnot::io;
use carnot::measure::{
    cac_truncated, choose_epsilons, compile, dilate_measure, l2_block_ball, l2_block_filtration,
    MeasureCtx, MeasureSpec,
};
use carnot::metric::{calibrate_gauge, HomogeneousGauge};
use carnot::rng::SamplerStream;

#[derive(Parser)]
#[command(
    name = "carnot",
    version,
    about = "Stratified group toolkit: exact algebras, group sampling, heat diagnostics, experiment harness",
    propagate_version = true
)]
struct Cli {
    /// Root seed for anything that samples; required by sampling subcommands
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Sample count where a subcommand draws samples
    #[arg(long, global = true)]
    samples: Option<u64>,
    /// Worker thread cap; results are thread-count invariant
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file; stdout when omitted. Nothing else is written
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Exit 3 when any statistical check fails
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Construct or validate algebra files
    Algebra {
        #[command(subcommand)]
        cmd: AlgebraCmd,
    },
    /// Gauge calibration
    Gauge {
        #[command(subcommand)]
        cmd: GaugeCmd,
    },
    /// Draw samples from a measure spec into CSV
    Sample(SampleArgs),
    /// Hypoelliptic heat-kernel simulation and diagnostics
    Heat {
        #[command(subcommand)]
        cmd: HeatCmd,
    },
    /// Truncated convolution construction and probes
    Cac {
        #[command(subcommand)]
        cmd: CacCmd,
    },
    /// Run a named builtin diagnostic preset
    Check {
        /// Preset name; see --help for the list
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(builtin_names().iter().copied()))]
        name: String,
    },
    /// Run an experiment config file
    Run {
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum AlgebraCmd {
    /// Read an algebra file, run full validation, print a summary
    Validate { file: PathBuf },
    /// Free nilpotent algebra on `rank` generators truncated at `step`
    Free { rank: usize, step: usize },
    /// Heisenberg-type algebra with horizontal dim and center dim
    Heisenberg { dim_w: usize, dim_c: usize },
    /// k-block truncation of the l2 triple example
    L2triple { k: usize },
}

#[derive(Subcommand)]
enum GaugeCmd {
    /// Search a subadditive gauge scaling empirically (samples required)
    Calibrate {
        /// Algebra preset name or file path
        #[arg(long)]
        algebra: String,
        #[arg(long, default_value_t = 1.5)]
        radius: f64,
        #[arg(long, default_value_t = 0.05)]
        safety: f64,
    },
}

#[derive(Args)]
struct SampleArgs {
    /// Algebra preset name or file path
    #[arg(long)]
    algebra: String,
    /// Measure spec JSON file
    #[arg(long)]
    spec: PathBuf,
    /// Optional gauge file; trivial gauge otherwise
    #[arg(long)]
    gauge: Option<PathBuf>,
}

#[derive(Subcommand)]
enum HeatCmd {
    /// Endpoint draws of the layer-1 driven diffusion, CSV output
    Endpoints {
        #[arg(long)]
        algebra: String,
        #[arg(long, default_value_t = 100)]
        steps: u32,
        #[arg(long, default_value_t = 1.0)]
        time: f64,
    },
    /// Convolution square vs sqrt(2)-dilation KS battery, JSON report
    ScalingCheck {
        #[arg(long)]
        algebra: String,
        #[arg(long, default_value_t = 200)]
        steps: u32,
        #[arg(long, default_value_t = 1.0)]
        time: f64,
    },
    /// Paired Monte Carlo interchange-of-integrals check, JSON report
    ExpIntegral {
        #[arg(long)]
        algebra: String,
        #[arg(long, default_value_t = 2.0)]
        box_half_width: f64,
    },
}

#[derive(Args)]
struct CacCommon {
    /// Algebra preset name or file path; must be an l2triple truncation
    #[arg(long)]
    algebra: String,
    /// Stage count; all blocks when omitted
    #[arg(long)]
    stages: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    #[arg(long, default_value_t = 0.99)]
    confidence: f64,
}

#[derive(Subcommand)]
enum CacCmd {
    /// Emit the dilated truncated-convolution measure spec with its epsilons
    Build(CacCommon),
    /// Emit the chosen epsilon sequence only
    Epsilons(CacCommon),
    /// Advisory mass table of an indicator set under truncation levels
    Probe {
        #[command(flatten)]
        common: CacCommon,
        /// Indicator spec as inline JSON, e.g. '{"set":"gauge_ball","radius":0.5}'
        #[arg(long)]
        set: String,
        /// Truncation levels, comma separated; all stages when omitted
        #[arg(long)]
        levels: Option<String>,
        /// Left translate as comma-separated coordinates; repeatable
        #[arg(long = "translate")]
        translates: Vec<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        // ignore the error when a pool already exists (repeated in-process runs)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<u8, HarnessError> {
    match &cli.command {
        Command::Algebra { cmd } => run_algebra(cli, cmd),
        Command::Gauge { cmd } => run_gauge(cli, cmd),
        Command::Sample(args) => run_sample(cli, args),
        Command::Heat { cmd } => run_heat(cli, cmd),
        Command::Cac { cmd } => run_cac(cli, cmd),
        Command::Check { name } => run_check(cli, name),
        Command::Run { config } => run_config(cli, config),
    }
}

fn usage(msg: &str) -> HarnessError {
    HarnessError::ConfigInvalid(msg.to_string())
}

fn require_seed(cli: &Cli) -> Result<u64, HarnessError> {
    cli.seed.ok_or_else(|| usage("--seed is required for sampling subcommands"))
}

fn load_algebra_arg(arg: &str) -> Result<GradedLieAlgebra, HarnessError> {
    if Path::new(arg).exists() {
        io::read_algebra_file(Path::new(arg)).map_err(|e| HarnessError::AlgebraLoad(e.to_string()))
    } else {
        harness::parse_preset(arg)
    }
}

fn make_ctx(algebra: GradedLieAlgebra, gauge_file: Option<&Path>) -> Result<MeasureCtx, HarnessError> {
    let algebra = Arc::new(algebra);
    let law = Arc::new(
        GroupLaw::<f64>::new(&algebra).map_err(|e| HarnessError::AlgebraLoad(e.to_string()))?,
    );
    let gauge = match gauge_file {
        Some(path) => io::read_gauge_file(path, &law)?,
        None => HomogeneousGauge::trivial(&law),
    };
    Ok(MeasureCtx::new(algebra, law, gauge)?)
}

/// Writes to --out when given, stdout otherwise.
fn emit(cli: &Cli, body: &str) -> Result<(), HarnessError> {
    match &cli.out {
        Some(path) => std::fs::write(path, body).map_err(|e| HarnessError::File(e.into())),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn emit_csv(cli: &Cli, rows: &[Vec<f64>]) -> Result<(), HarnessError> {
    match &cli.out {
        Some(path) => io::write_csv_file(path, rows).map_err(HarnessError::File),
        None => {
            let mut buf = Vec::new();
            io::write_csv(&mut buf, rows).map_err(HarnessError::File)?;
            print!("{}", String::from_utf8(buf).expect("csv is ascii"));
            Ok(())
        }
    }
}

/// JSON envelope keeping every emitted document versioned.
fn versioned(kind: &str, body: serde_json::Value) -> String {
    let mut doc = serde_json::Map::new();
    doc.insert("schema".into(), serde_json::json!(1));
    doc.insert("kind".into(), serde_json::json!(kind));
    doc.insert("report".into(), body);
    let mut s = serde_json::to_string_pretty(&serde_json::Value::Object(doc))
        .expect("report serializes");
    s.push('\n');
    s
}

fn algebra_summary(alg: &GradedLieAlgebra) -> serde_json::Value {
    serde_json::json!({
        "layers": alg.grading().layer_dims(),
        "dim": alg.dim(),
        "step": alg.step(),
        "homogeneous_dimension": alg.grading().homogeneous_dimension(),
        "bracket_terms": alg.constants().len(),
        "fingerprint": alg.id(),
    })
}

fn run_algebra(cli: &Cli, cmd: &AlgebraCmd) -> Result<u8, HarnessError> {
    let build = |r: Result<GradedLieAlgebra, carnot::algebra::AlgebraError>| {
        r.map_err(|e| HarnessError::AlgebraLoad(e.to_string()))
    };
    match cmd {
        AlgebraCmd::Validate { file } => {
            let alg =
                io::read_algebra_file(file).map_err(|e| HarnessError::AlgebraLoad(e.to_string()));
            match alg {
                Ok(alg) => {
                    emit(cli, &versioned("algebra-summary", algebra_summary(&alg)))?;
                    Ok(0)
                }
                Err(e) => {
                    // validation failure is the structural result of this command
                    eprintln!("invalid algebra file: {e}");
                    Ok(1)
                }
            }
        }
        AlgebraCmd::Free { rank, step } => {
            let alg = build(build_free_nilpotent(*rank, *step))?;
            emit(cli, &io::algebra_to_json(&alg))?;
            Ok(0)
        }
        AlgebraCmd::Heisenberg { dim_w, dim_c } => {
            let alg = build(build_heisenberg(*dim_w, *dim_c))?;
            emit(cli, &io::algebra_to_json(&alg))?;
            Ok(0)
        }
        AlgebraCmd::L2triple { k } => {
            let alg = build(build_l2_triple_truncation(*k))?;
            emit(cli, &io::algebra_to_json(&alg))?;
            Ok(0)
        }
    }
}

fn run_gauge(cli: &Cli, cmd: &GaugeCmd) -> Result<u8, HarnessError> {
    match cmd {
        GaugeCmd::Calibrate { algebra, radius, safety } => {
            let seed = require_seed(cli)?;
            let samples = cli.samples.unwrap_or(10_000) as usize;
            let alg = load_algebra_arg(algebra)?;
            let law = GroupLaw::<f64>::new(&alg)
                .map_err(|e| HarnessError::AlgebraLoad(e.to_string()))?;
            let stream = SamplerStream::named(seed, "gauge-calibrate", 0);
            let gauge = calibrate_gauge(&law, *radius, samples, *safety, &stream)?;
            emit(cli, &io::gauge_to_json(&gauge))?;
            Ok(0)
        }
    }
}

fn run_sample(cli: &Cli, args: &SampleArgs) -> Result<u8, HarnessError> {
    let seed = require_seed(cli)?;
    let n = cli.samples.unwrap_or(1000);
    let spec_body = std::fs::read_to_string(&args.spec)
        .map_err(|e| usage(&format!("cannot read spec file: {e}")))?;
    let spec: MeasureSpec = serde_json::from_str(&spec_body)
        .map_err(|e| usage(&format!("bad measure spec: {e}")))?;
    let ctx = make_ctx(load_algebra_arg(&args.algebra)?, args.gauge.as_deref())?;
    let compiled = compile(&ctx, &spec)?;
    let stream = SamplerStream::named(seed, "sample", 0);
    let mut rows = Vec::with_capacity(n as usize);
    for i in 0..n {
        rows.push(compiled.sample(stream, i)?);
    }
    emit_csv(cli, &rows)?;
    Ok(0)
}

fn run_heat(cli: &Cli, cmd: &HeatCmd) -> Result<u8, HarnessError> {
    let seed = require_seed(cli)?;
    match cmd {
        HeatCmd::Endpoints { algebra, steps, time } => {
            let ctx = make_ctx(load_algebra_arg(algebra)?, None)?;
            let d1 = ctx.law().grading().layer_range(1).len();
            let mut spec = HeatKernelSpec::standard(d1, *steps);
            spec.time = *time;
            let sampler = HeatSampler::new(&ctx, &spec)?;
            if sampler.is_experimental() {
                eprintln!(
                    "note: step >= 3 endpoint simulation is experimental; \
                     no distributional guarantee is attached"
                );
            }
            let n = cli.samples.unwrap_or(1000);
            let stream = SamplerStream::named(seed, "heat-endpoints", 0);
            let rows: Vec<Vec<f64>> = (0..n).map(|i| sampler.sample(stream, i)).collect();
            emit_csv(cli, &rows)?;
            Ok(0)
        }
        HeatCmd::ScalingCheck { algebra, steps, time } => {
            let ctx = make_ctx(load_algebra_arg(algebra)?, None)?;
            let d1 = ctx.law().grading().layer_range(1).len();
            let mut spec = HeatKernelSpec::standard(d1, *steps);
            spec.time = *time;
            let n = cli.samples.unwrap_or(10_000);
            let stream = SamplerStream::named(seed, "heat-scaling", 0);
            let report = scaling_check(&ctx, &spec, n, stream)?;
            let ok = report.all_pass;
            emit(cli, &versioned("scaling-check", serde_json::to_value(&report).unwrap()))?;
            Ok(if !ok && cli.strict { 3 } else { 0 })
        }
        HeatCmd::ExpIntegral { algebra, box_half_width } => {
            let ctx = make_ctx(load_algebra_arg(algebra)?, None)?;
            let d1 = ctx.law().grading().layer_range(1).len();
            let cov: Vec<Vec<f64>> =
                (0..d1).map(|i| (0..d1).map(|j| f64::from(i == j)).collect()).collect();
            let functions = vec![
                HeatTestFunction::CentralCube { half_width: 0.8 },
                HeatTestFunction::LayerOneWave { frequency: 2.0 },
                HeatTestFunction::Zero,
            ];
            let widths = vec![*box_half_width; ctx.law().dim() - d1];
            let n = cli.samples.unwrap_or(20_000);
            let stream = SamplerStream::named(seed, "heat-exp-integral", 0);
            let report = exp_integral_check(&ctx, &cov, &functions, &widths, n, stream)?;
            let ok = report.all_pass;
            emit(cli, &versioned("exp-integral", serde_json::to_value(&report).unwrap()))?;
            Ok(if !ok && cli.strict { 3 } else { 0 })
        }
    }
}

struct CacPieces {
    ctx: MeasureCtx,
    filtration_dims: Vec<usize>,
    epsilons: Vec<f64>,
    dilated: Vec<MeasureSpec>,
    filtration: Vec<carnot::algebra::SubalgebraBasis>,
}

fn cac_pieces(common: &CacCommon) -> Result<CacPieces, HarnessError> {
    let ctx = make_ctx(load_algebra_arg(&common.algebra)?, None)?;
    let blocks = ctx.algebra().grading().layer_dims().get(1).copied().unwrap_or(0);
    let stages = common.stages.unwrap_or(blocks.max(1));
    let filtration = l2_block_filtration(&ctx, stages)?;
    let factors: Vec<MeasureSpec> = (1..=stages)
        .map(|b| l2_block_ball(&ctx, b, common.radius))
        .collect::<Result<_, _>>()?;
    cac_truncated(&ctx, &filtration, &factors)?;
    let epsilons = choose_epsilons(&ctx, &filtration, &factors, common.confidence)?;
    let dilated: Vec<MeasureSpec> = factors
        .iter()
        .zip(&epsilons)
        .map(|(f, e)| dilate_measure(f, *e))
        .collect::<Result<_, _>>()?;
    Ok(CacPieces {
        filtration_dims: filtration.iter().map(|h| h.dim()).collect(),
        epsilons,
        dilated,
        filtration,
        ctx,
    })
}

fn run_cac(cli: &Cli, cmd: &CacCmd) -> Result<u8, HarnessError> {
    match cmd {
        CacCmd::Build(common) => {
            let pieces = cac_pieces(common)?;
            let spec = cac_truncated(&pieces.ctx, &pieces.filtration, &pieces.dilated)?;
            let body = serde_json::json!({
                "filtration_dims": pieces.filtration_dims,
                "epsilons": pieces.epsilons,
                "measure": serde_json::to_value(&spec).unwrap(),
            });
            emit(cli, &versioned("cac-build", body))?;
            Ok(0)
        }
        CacCmd::Epsilons(common) => {
            let pieces = cac_pieces(common)?;
            let body = serde_json::json!({
                "filtration_dims": pieces.filtration_dims,
                "epsilons": pieces.epsilons,
            });
            emit(cli, &versioned("cac-epsilons", body))?;
            Ok(0)
        }
        CacCmd::Probe { common, set, levels, translates } => {
            let seed = require_seed(cli)?;
            let pieces = cac_pieces(common)?;
            let indicator: IndicatorSpec = serde_json::from_str(set)
                .map_err(|e| usage(&format!("bad indicator spec: {e}")))?;
            let dim = pieces.ctx.law().dim();
            let levels: Vec<usize> = match levels {
                Some(s) => s
                    .split(',')
                    .map(|p| p.trim().parse::<usize>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| usage("bad --levels list"))?,
                None => (1..=pieces.filtration.len()).collect(),
            };
            let translates: Vec<Vec<f64>> = if translates.is_empty() {
                vec![vec![0.0; dim]]
            } else {
                translates
                    .iter()
                    .map(|s| {
                        s.split(',')
                            .map(|p| p.trim().parse::<f64>())
                            .collect::<Result<Vec<f64>, _>>()
                            .map_err(|_| usage("bad --translate coordinates"))
                    })
                    .collect::<Result<_, _>>()?
            };
            let n = cli.samples.unwrap_or(10_000);
            let stream = SamplerStream::named(seed, "cac-probe", 0);
            let rows = null_probe(
                &pieces.ctx,
                |x| indicator.eval(pieces.ctx.gauge(), x),
                &pieces.filtration,
                &pieces.dilated,
                &translates,
                &levels,
                n,
                stream,
            )?;
            emit(cli, &versioned("cac-probe", serde_json::to_value(&rows).unwrap()))?;
            Ok(0)
        }
    }
}

fn run_check(cli: &Cli, name: &str) -> Result<u8, HarnessError> {
    let seed = require_seed(cli)?;
    let config = builtin_config(name, seed)
        .ok_or_else(|| usage(&format!("unknown preset {name:?}")))?;
    finish_run(cli, &config)
}

fn run_config(cli: &Cli, path: &Path) -> Result<u8, HarnessError> {
    let body = std::fs::read_to_string(path)
        .map_err(|e| usage(&format!("cannot read config: {e}")))?;
    let config = ExperimentConfig::from_json(&body)?;
    finish_run(cli, &config)
}

fn finish_run(cli: &Cli, config: &ExperimentConfig) -> Result<u8, HarnessError> {
    let report = harness::run(config)?;
    let body = match cli.out.as_ref().and_then(|p| p.extension()).and_then(|e| e.to_str()) {
        Some("csv") => report.to_csv(),
        _ => report.to_json(),
    };
    emit(cli, &body)?;
    Ok(if !report.all_pass && cli.strict { 3 } else { 0 })
}
