//! Command-line surface: `check`, `riesz`, `perturb`, `combine` and `gen`.
//!
//! Every command except `gen` prints a JSON report on standard output and a
//! one-line summary on standard error. Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | frame / pass |
//! | 1 | usage or parse error |
//! | 2 | Bessel-only family |
//! | 3 | not a frame / fail |
//! | 4 | hypotheses of the construction not met |

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{ArgGroup, Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::constructions::{
    direct_sum, measure_perturbation_radius, perturbation_condition_holds, predicted_perturbed_bounds,
    simple_perturbation_bounds, tensor_converse_extract, tensor_product, PerturbationParams, PredictedBounds,
    HYPOTHESIS_TOL, VIOLATION_TOL,
};
use crate::frameio::{frame_to_spec, generate_spec, parse_frame_spec, spec_to_string, GenClass, GenRequest};
use crate::gframe::{
    check_riesz, classify_with_bounds, estimate_bounds, verify_duality, FrameClass, FrameOptions, GPFusionFrame,
    DUALITY_TOL,
};
use crate::norm_est::{EstimatorConfig, RNG_ALGORITHM};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_BESSEL_ONLY: i32 = 2;
pub const EXIT_FAIL: i32 = 3;
pub const EXIT_INAPPLICABLE: i32 = 4;

/// Pairings sampled by `check` when verifying `U* = T`.
const DUALITY_SAMPLES: usize = 100;

#[derive(Debug, Parser)]
#[command(name = "gpfusion", version, about = "Generalized p-fusion frame laboratory")]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Restarts of the gradient estimator.
    #[arg(long, global = true, default_value_t = 24)]
    pub restarts: usize,
    /// Tolerance for tightness and predicted-vs-measured comparisons.
    #[arg(long, global = true, default_value_t = 1e-6)]
    pub tol: f64,
    /// Use exact singular values when p = 2 (default).
    #[arg(long, global = true, overrides_with = "no_p2_exact")]
    pub p2_exact: bool,
    /// Use the gradient estimator even when p = 2.
    #[arg(long, global = true, overrides_with = "p2_exact")]
    pub no_p2_exact: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate bounds, classify, and run the Riesz and duality checks.
    Check {
        /// Frame specification file.
        file: PathBuf,
    },
    /// Riesz-basis check; exits 0 only for a Riesz basis.
    Riesz {
        /// Frame specification file.
        file: PathBuf,
    },
    /// Compare a perturbed family against the predicted bounds.
    Perturb(PerturbArgs),
    /// Build a direct sum or tensor product and compare with its predicted bounds.
    Combine(CombineArgs),
    /// Print a seeded random specification file.
    Gen(GenArgs),
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("mode").required(true).args(["radius", "lambda1"])))]
pub struct PerturbArgs {
    /// Reference family.
    pub lambda_file: PathBuf,
    /// Perturbed family.
    pub gamma_file: PathBuf,
    /// Use the measured perturbation radius R and the bounds (A - R, B + R).
    #[arg(long)]
    pub radius: bool,
    /// Coefficient of ||U_Λ f|| in the general perturbation inequality, in (-1, 1).
    #[arg(long, requires_all = ["lambda2", "mu"], allow_hyphen_values = true)]
    pub lambda1: Option<f64>,
    /// Coefficient of ||U_Γ f||, in (-1, 1).
    #[arg(long, requires = "lambda1", allow_hyphen_values = true)]
    pub lambda2: Option<f64>,
    /// Coefficient of ||f||.
    #[arg(long, requires = "lambda1", allow_hyphen_values = true)]
    pub mu: Option<f64>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("op").required(true).args(["direct_sum", "tensor"])))]
pub struct CombineArgs {
    /// First family.
    pub x_file: PathBuf,
    /// Second family.
    pub y_file: PathBuf,
    /// Direct sum on R^n x R^m; both families need equal weights.
    #[arg(long)]
    pub direct_sum: bool,
    /// Tensor product on R^(nm).
    #[arg(long)]
    pub tensor: bool,
    /// Also write the combined specification file here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Ambient dimension n.
    #[arg(long)]
    pub dim: usize,
    /// Number of triples; defaults to the length of --block-dims.
    #[arg(long)]
    pub blocks: Option<usize>,
    /// Comma-separated block dimensions; defaults to all ones.
    #[arg(long, value_delimiter = ',')]
    pub block_dims: Vec<usize>,
    /// Exponent p > 1.
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, value_enum, default_value_t = GenClass::Frame)]
    pub class: GenClass,
    /// Write the file here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// What a run produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliOutcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl CliOutcome {
    fn usage(message: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_USAGE,
            stdout: String::new(),
            stderr: format!("error: {message}\n"),
        }
    }
}

#[derive(Debug, Serialize)]
struct Tolerances {
    compare: f64,
    tight: f64,
    bessel_only: f64,
    violation: f64,
    hypothesis: f64,
    duality: f64,
}

/// Full JSON report; `timing_ms` is the only field that varies between runs.
#[derive(Debug, Serialize)]
struct Report {
    command: Vec<String>,
    seed: u64,
    restarts: usize,
    rng: &'static str,
    p2_exact: bool,
    tolerances: Tolerances,
    result: Value,
    verdict: String,
    exit_code: i32,
    timing_ms: f64,
}

struct Ctx {
    argv: Vec<String>,
    opts: FrameOptions,
    tol: f64,
    started: Instant,
}

impl Ctx {
    fn finish(&self, result: Value, verdict: String, code: i32) -> CliOutcome {
        let report = Report {
            command: self.argv.clone(),
            seed: self.opts.estimator.seed,
            restarts: self.opts.estimator.restarts,
            rng: RNG_ALGORITHM,
            p2_exact: self.opts.p2_exact,
            tolerances: Tolerances {
                compare: self.tol,
                tight: self.opts.tight_tol,
                bessel_only: self.opts.bessel_only_tol,
                violation: VIOLATION_TOL,
                hypothesis: HYPOTHESIS_TOL,
                duality: DUALITY_TOL,
            },
            result,
            verdict: verdict.clone(),
            exit_code: code,
            timing_ms: self.started.elapsed().as_secs_f64() * 1e3,
        };
        let mut stdout = serde_json::to_string_pretty(&report).expect("report values are finite or null");
        stdout.push('\n');
        CliOutcome {
            code,
            stdout,
            stderr: format!("{verdict}\n"),
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serialisable report part")
}

fn load(path: &Path) -> Result<GPFusionFrame, CliOutcome> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliOutcome::usage(format!("cannot read {}: {e}", path.display())))?;
    parse_frame_spec(&text).map_err(|e| CliOutcome::usage(format!("{}: {e}", path.display())))
}

/// Parse `argv` (including the program name) and run the command.
pub fn run<I, T>(argv: I) -> CliOutcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            return if e.use_stderr() {
                CliOutcome {
                    code: EXIT_USAGE,
                    stdout: String::new(),
                    stderr: rendered,
                }
            } else {
                CliOutcome {
                    code: EXIT_OK,
                    stdout: rendered,
                    stderr: String::new(),
                }
            };
        }
    };
    if cli.restarts == 0 {
        return CliOutcome::usage("--restarts must be >= 1");
    }
    if !(cli.tol > 0.0 && cli.tol.is_finite()) {
        return CliOutcome::usage("--tol must be a positive number");
    }
    let opts = FrameOptions {
        estimator: EstimatorConfig::new(cli.restarts, cli.seed),
        p2_exact: !cli.no_p2_exact,
        tight_tol: cli.tol,
        ..FrameOptions::default()
    };
    let ctx = Ctx {
        argv: argv.iter().skip(1).map(|s| s.to_string_lossy().into_owned()).collect(),
        opts,
        tol: cli.tol,
        started: Instant::now(),
    };
    let outcome = match &cli.command {
        Command::Check { file } => run_check(&ctx, file),
        Command::Riesz { file } => run_riesz(&ctx, file),
        Command::Perturb(args) => run_perturb(&ctx, args),
        Command::Combine(args) => run_combine(&ctx, args),
        Command::Gen(args) => run_gen(cli.seed, args),
    };
    outcome.unwrap_or_else(|e| e)
}

fn class_exit(class: FrameClass) -> i32 {
    match class {
        FrameClass::Frame | FrameClass::Tight | FrameClass::Parseval => EXIT_OK,
        FrameClass::BesselOnly => EXIT_BESSEL_ONLY,
        FrameClass::NotFrame => EXIT_FAIL,
    }
}

fn fail<E: std::fmt::Display>(e: E) -> CliOutcome {
    CliOutcome::usage(e)
}

fn run_check(ctx: &Ctx, file: &Path) -> Result<CliOutcome, CliOutcome> {
    let frame = load(file)?;
    let bounds = estimate_bounds(&frame, &ctx.opts).map_err(fail)?;
    let classification = classify_with_bounds(&frame, &bounds, &ctx.opts);
    let riesz = check_riesz(&frame, &ctx.opts).map_err(fail)?;
    let duality = verify_duality(&frame, DUALITY_SAMPLES, ctx.opts.estimator.seed).map_err(fail)?;
    let (a, b) = bounds.values();
    let code = class_exit(classification.class);
    let verdict = format!(
        "{:?}: A = {a:.9}, B = {b:.9} ({:?}); riesz = {}; duality residual = {:.2e}",
        classification.class,
        bounds.lower().method,
        riesz.is_riesz,
        duality.max_residual
    );
    let result = json!({
        "file": file.display().to_string(),
        "space": { "dim": frame.dim(), "p": frame.p(), "q": frame.q() },
        "block_dims": frame.block_dims(),
        "bounds": { "lower": a, "upper": b, "estimates": to_value(&bounds) },
        "classification": to_value(&classification),
        "riesz": to_value(&riesz),
        "duality": to_value(&duality),
    });
    Ok(ctx.finish(result, verdict, code))
}

fn run_riesz(ctx: &Ctx, file: &Path) -> Result<CliOutcome, CliOutcome> {
    let frame = load(file)?;
    let riesz = check_riesz(&frame, &ctx.opts).map_err(fail)?;
    let bounds = estimate_bounds(&frame, &ctx.opts).map_err(fail)?;
    let classification = classify_with_bounds(&frame, &bounds, &ctx.opts);
    let code = if riesz.is_riesz { EXIT_OK } else { EXIT_FAIL };
    let verdict = format!(
        "riesz = {}: sandwich ({:.9}, {:.9}), {} subsets ({:?}); class {:?}",
        riesz.is_riesz,
        riesz.lower_sandwich.value,
        riesz.upper_sandwich.value,
        riesz.subsets_checked,
        riesz.subset_check,
        classification.class
    );
    let result = json!({
        "file": file.display().to_string(),
        "riesz": to_value(&riesz),
        "classification": to_value(&classification),
    });
    Ok(ctx.finish(result, verdict, code))
}

fn comparison_table(predicted: &PredictedBounds, measured: (f64, f64), tol: f64) -> Value {
    json!({
        "theorem": predicted.provenance.as_str(),
        "predicted": to_value(predicted),
        "measured": { "lower": measured.0, "upper": measured.1 },
        "lower_ok": measured.0 >= predicted.lower - tol,
        "upper_ok": measured.1 <= predicted.upper + tol,
    })
}

fn run_perturb(ctx: &Ctx, args: &PerturbArgs) -> Result<CliOutcome, CliOutcome> {
    let lambda = load(&args.lambda_file)?;
    let gamma = load(&args.gamma_file)?;
    let radius = measure_perturbation_radius(&lambda, &gamma, &ctx.opts).map_err(fail)?;
    let (a, b) = estimate_bounds(&lambda, &ctx.opts).map_err(fail)?.values();
    let measured = estimate_bounds(&gamma, &ctx.opts).map_err(fail)?.values();
    let mut result = json!({
        "lambda_file": args.lambda_file.display().to_string(),
        "gamma_file": args.gamma_file.display().to_string(),
        "reference_bounds": { "lower": a, "upper": b },
        "measured_radius": to_value(&radius),
    });
    let r = radius.value;

    let predicted = if args.radius {
        result["mode"] = json!("radius");
        match simple_perturbation_bounds(a, b, r) {
            Ok(p) => p,
            Err(e) => {
                result["hypothesis"] = json!({ "holds": false, "reason": e.to_string() });
                let verdict = format!("theorem inapplicable: measured radius R = {r:.9} is not below A = {a:.9}");
                return Ok(ctx.finish(result, verdict, EXIT_INAPPLICABLE));
            }
        }
    } else {
        result["mode"] = json!("general");
        let (l1, l2, mu) = (
            args.lambda1.expect("required by clap"),
            args.lambda2.expect("required by clap"),
            args.mu.expect("required by clap"),
        );
        let params = PerturbationParams::new(l1, l2, mu).map_err(fail)?;
        params.check_against(a, b).map_err(fail)?;
        result["params"] = to_value(&params);
        let check = perturbation_condition_holds(&lambda, &gamma, &params, &ctx.opts).map_err(fail)?;
        result["hypothesis"] = to_value(&check);
        if !check.holds {
            let verdict = format!(
                "theorem inapplicable: perturbation condition violated by {:.3e}",
                check.max_violation.value
            );
            return Ok(ctx.finish(result, verdict, EXIT_INAPPLICABLE));
        }
        predicted_perturbed_bounds(a, b, &params).map_err(fail)?
    };
    let table = comparison_table(&predicted, measured, ctx.tol);
    let pass = predicted.contains(measured.0, measured.1, ctx.tol);
    result["comparison"] = table;
    let verdict = format!(
        "{}: measured ({:.9}, {:.9}) vs predicted [{:.9}, {:.9}], R = {r:.9}",
        if pass { "pass" } else { "fail" },
        measured.0,
        measured.1,
        predicted.lower,
        predicted.upper
    );
    Ok(ctx.finish(result, verdict, if pass { EXIT_OK } else { EXIT_FAIL }))
}

fn run_combine(ctx: &Ctx, args: &CombineArgs) -> Result<CliOutcome, CliOutcome> {
    let x = load(&args.x_file)?;
    let y = load(&args.y_file)?;
    let (frame, predicted, converse, op) = if args.direct_sum {
        let c = direct_sum(&x, &y, &ctx.opts).map_err(fail)?;
        (c.frame, c.predicted, None, "direct-sum")
    } else {
        let tp = tensor_product(&x, &y, &ctx.opts).map_err(fail)?;
        let converse = tensor_converse_extract(&tp, &ctx.opts).map_err(fail)?;
        (tp.frame, tp.predicted, Some(converse), "tensor")
    };
    let measured = estimate_bounds(&frame, &ctx.opts).map_err(fail)?.values();
    let spec = frame_to_spec(&frame, Some(json!({ "combined": op })));
    if let Some(out) = &args.out {
        std::fs::write(out, spec_to_string(&spec))
            .map_err(|e| CliOutcome::usage(format!("cannot write {}: {e}", out.display())))?;
    }
    let pass = predicted.contains(measured.0, measured.1, ctx.tol);
    let result = json!({
        "operation": op,
        "x_file": args.x_file.display().to_string(),
        "y_file": args.y_file.display().to_string(),
        "comparison": comparison_table(&predicted, measured, ctx.tol),
        "tensor_converse": converse.as_ref().map(to_value),
        "frame": to_value(&spec),
    });
    let verdict = format!(
        "{}: {op} measured ({:.9}, {:.9}) vs predicted [{:.9}, {:.9}]",
        if pass { "pass" } else { "fail" },
        measured.0,
        measured.1,
        predicted.lower,
        predicted.upper
    );
    Ok(ctx.finish(result, verdict, if pass { EXIT_OK } else { EXIT_FAIL }))
}

fn run_gen(seed: u64, args: &GenArgs) -> Result<CliOutcome, CliOutcome> {
    let block_dims = match (args.blocks, args.block_dims.is_empty()) {
        (Some(m), true) => vec![1; m],
        (Some(m), false) if m != args.block_dims.len() => {
            return Err(CliOutcome::usage(format!(
                "--blocks {m} disagrees with {} entries in --block-dims",
                args.block_dims.len()
            )))
        }
        (None, true) => return Err(CliOutcome::usage("one of --blocks or --block-dims is required")),
        _ => args.block_dims.clone(),
    };
    let req = GenRequest {
        dim: args.dim,
        block_dims,
        p: args.p,
        seed,
        class: args.class,
    };
    let text = generate_spec(&req).map_err(fail)?;
    let summary = format!(
        "generated {:?} family: dim {}, block dims {:?}, p {}, seed {seed}\n",
        req.class, req.dim, req.block_dims, req.p
    );
    let stdout = match &args.out {
        Some(out) => {
            std::fs::write(out, &text)
                .map_err(|e| CliOutcome::usage(format!("cannot write {}: {e}", out.display())))?;
            String::new()
        }
        None => text,
    };
    Ok(CliOutcome {
        code: EXIT_OK,
        stdout,
        stderr: summary,
    })
}
