//! Argument parsing, dispatch and exit codes.

use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use dbx_core::classify::{classify_base_pair, classify_pair, perturbation_stability_probe};
use dbx_core::dimension::{dyadic_scales, estimate_dimension, DimEstimate, Family, FamilyParams};
use dbx_core::exec::Exec;
use dbx_core::expand::{critical_points, run_algorithm, BasePair, Mode};
use dbx_core::ineq::{eval_s, eval_s_to_tol, verify_positivity_sweep, SeriesInput, DEFAULT_PRECISION};
use dbx_core::phimap::{phi_forward, phi_inverse, phi_inverse_for_depth, PhiInverse, SolveConfig};
use dbx_core::real::{parse_rational, Hp, Rational, Real};
use dbx_core::seqcore::EpSeq;
use dbx_core::Error;

use crate::config::{merge, Config, ConfigError, Format, Layer};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PRECONDITION: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_CONFIG: i32 = 78;

#[derive(Parser, Debug)]
#[command(name = "dbx", version, about = "Double-base expansions, the map Φ and its inverse, univoque classifiers")]
struct Cli {
    /// Config file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Bits for high-precision arithmetic (at least 53).
    #[arg(long, global = true)]
    precision: Option<usize>,
    /// Absolute tolerance for root brackets.
    #[arg(long, global = true)]
    root_tol: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output format for tabular exports.
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Run sampling and sweeps on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a digit-selection algorithm.
    Expand(ExpandArgs),
    /// Forward map: (q0, q1) to the prefixes of (μ, α).
    Phi(PhiArgs),
    /// Inverse map: (μ, α) to (q0, q1).
    PhiInv(PhiInvArgs),
    /// Classify a symbolic pair or a base pair.
    Classify(ClassifyArgs),
    /// Region and classification over a grid of base pairs, as CSV.
    SampleRegion(RegionArgs),
    /// Box-counting estimate for a univoque block family.
    Dimension(DimensionArgs),
    /// Enclose the double series, or sweep random sequences.
    InequalityCheck(IneqArgs),
    /// Expansion agreement under small perturbations of a base pair.
    Perturb(PerturbArgs),
}

#[derive(Args, Debug)]
struct Bases {
    /// Decimal or p/q.
    #[arg(long, allow_hyphen_values = true)]
    q0: String,
    #[arg(long, allow_hyphen_values = true)]
    q1: String,
    /// Use binary floating point at the configured precision instead of exact rationals.
    #[arg(long)]
    float: bool,
}

#[derive(Args, Debug)]
struct ExpandArgs {
    #[command(flatten)]
    bases: Bases,
    /// Decimal, p/q, or `ell` / `r` for the critical points.
    #[arg(long, allow_hyphen_values = true)]
    x: String,
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[arg(long)]
    depth: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Greedy,
    QuasiGreedy,
    Lazy,
    QuasiLazy,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Greedy => Mode::Greedy,
            ModeArg::QuasiGreedy => Mode::QuasiGreedy,
            ModeArg::Lazy => Mode::Lazy,
            ModeArg::QuasiLazy => Mode::QuasiLazy,
        }
    }
}

#[derive(Args, Debug)]
struct PhiArgs {
    #[command(flatten)]
    bases: Bases,
    #[arg(long)]
    depth: Option<usize>,
}

#[derive(Args, Debug)]
struct PhiInvArgs {
    /// Sequence literal `PRE(PER)*`.
    #[arg(long)]
    mu: String,
    #[arg(long)]
    alpha: String,
    /// Choose the precision so that this many digits survive a forward run.
    #[arg(long)]
    depth: Option<usize>,
}

#[derive(Args, Debug)]
struct ClassifyArgs {
    #[arg(long, requires = "alpha", conflicts_with_all = ["q0", "q1"])]
    mu: Option<String>,
    #[arg(long, requires = "mu")]
    alpha: Option<String>,
    #[arg(long, requires = "q1", allow_hyphen_values = true)]
    q0: Option<String>,
    #[arg(long, requires = "q0", allow_hyphen_values = true)]
    q1: Option<String>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    float: bool,
    /// Uncertainty of the given bases in the max metric (float mode).
    #[arg(long, default_value_t = 0.0)]
    radius: f64,
}

#[derive(Args, Debug)]
struct RegionArgs {
    /// Cells as `WxH`.
    #[arg(long, default_value = "32x32")]
    grid: String,
    /// `lo,hi` for q0.
    #[arg(long, default_value = "1.05,3.5")]
    q0_range: String,
    #[arg(long, default_value = "1.05,3.5")]
    q1_range: String,
    /// Digits used by the classifier in B.
    #[arg(long, default_value_t = 32)]
    depth: usize,
}

#[derive(Args, Debug)]
struct DimensionArgs {
    /// Block length.
    #[arg(long = "N", short = 'N')]
    n: usize,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Box sides, comma separated and strictly decreasing (default 2^-4 .. 2^-12).
    #[arg(long)]
    scales: Option<String>,
    #[arg(long, value_enum, default_value = "full")]
    family: FamilyArg,
    /// Free blocks after the header.
    #[arg(long, default_value_t = 6)]
    depth_blocks: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FamilyArg {
    Full,
    Gap,
}

#[derive(Args, Debug)]
struct IneqArgs {
    #[arg(long)]
    x: String,
    #[arg(long)]
    y: String,
    /// Non-decreasing values, comma separated.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    n: String,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    ntilde: String,
    /// Terms per index; chosen from --tol when absent.
    #[arg(long = "K", short = 'K')]
    k: Option<usize>,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Sweep this many random sequence pairs instead.
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Args, Debug)]
struct PerturbArgs {
    #[command(flatten)]
    bases: Bases,
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long, default_value_t = 16)]
    samples: usize,
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Precondition(String),
    Numeric(String),
    Config(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Precondition(_) => EXIT_PRECONDITION,
            Failure::Numeric(_) => EXIT_NUMERIC,
            Failure::Config(_) => EXIT_CONFIG,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Precondition(m) | Failure::Numeric(m) | Failure::Config(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        match e {
            Error::Precondition(m) => Failure::Precondition(m),
            Error::Numeric(_) => Failure::Numeric(e.to_string()),
            Error::Parse(_) => Failure::Usage(e.to_string()),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Failure {
        Failure::Config(e.to_string())
    }
}

type Res<T> = Result<T, Failure>;

/// What a subcommand writes to stdout, plus an optional note for stderr.
enum Output {
    Json(Value),
    Csv(String),
    CsvWithSummary(String, Value),
}

/// Parses `args` (program name first), runs the subcommand and returns the exit code.
pub fn run<I, S>(args: I, env: &dyn Fn(&str) -> Option<String>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(cli, env) {
        Ok(output) => {
            let written = match output {
                Output::Json(v) => writeln!(out, "{}", serde_json::to_string_pretty(&v).expect("json")),
                Output::Csv(s) => write!(out, "{s}"),
                Output::CsvWithSummary(s, v) => {
                    let _ = writeln!(err, "{v}");
                    write!(out, "{s}")
                }
            };
            if written.is_err() {
                return EXIT_NUMERIC;
            }
            EXIT_OK
        }
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message());
            f.code()
        }
    }
}

fn load_config(cli: &Cli, env: &dyn Fn(&str) -> Option<String>) -> Res<Config> {
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            Layer::from_file_text(&path.display().to_string(), &text)?
        }
        None => Layer::default(),
    };
    let env = Layer::from_env(env)?;
    let flags = Layer {
        precision_bits: cli.precision,
        root_tol: cli.root_tol,
        depth_default: None,
        seed: cli.seed,
        output_format: cli.format.map(|f| match f {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        }),
    };
    Ok(merge(&[&file, &env, &flags])?)
}

fn execute(cli: Cli, env: &dyn Fn(&str) -> Option<String>) -> Res<Output> {
    let cfg = load_config(&cli, env)?;
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };
    let solve = SolveConfig { precision: cfg.precision_bits, root_tol: cfg.root_tol, ..SolveConfig::default() };
    match cli.command {
        Command::Expand(a) => cmd_expand(&a, &cfg),
        Command::Phi(a) => cmd_phi(&a, &cfg),
        Command::PhiInv(a) => cmd_phi_inv(&a, &solve),
        Command::Classify(a) => cmd_classify(&a, &cfg, &solve),
        Command::SampleRegion(a) => cmd_region(&a, &cfg, &solve, exec),
        Command::Dimension(a) => cmd_dimension(&a, &cfg, exec),
        Command::InequalityCheck(a) => cmd_ineq(&a, &cfg, exec),
        Command::Perturb(a) => cmd_perturb(&a, &cfg),
    }
}

fn rational(s: &str) -> Res<Rational> {
    Ok(parse_rational(s)?)
}

fn seq(s: &str) -> Res<EpSeq> {
    Ok(s.parse()?)
}

/// Decimal digits matching `bits` of binary precision.
fn digits_for(bits: usize) -> usize {
    (bits as f64 * std::f64::consts::LOG10_2).ceil() as usize + 2
}

/// Digits printed for exact values.
const EXACT_DIGITS: usize = 40;

fn arithmetic(float: bool, cfg: &Config) -> Value {
    if float {
        json!({ "kind": "binary", "precision_bits": cfg.precision_bits })
    } else {
        json!({ "kind": "exact" })
    }
}

/// Runs `f` on the bases as exact rationals, or as floats at the configured precision.
macro_rules! with_bases {
    ($b:expr, $cfg:expr, |$q:ident, $digits:ident| $body:expr) => {{
        let (r0, r1) = (rational(&$b.q0)?, rational(&$b.q1)?);
        if $b.float {
            let p = $cfg.precision_bits;
            let $q = BasePair::new(Hp::from_ratio_prec(&r0, p), Hp::from_ratio_prec(&r1, p))?;
            let $digits = digits_for(p);
            $body
        } else {
            let $q = BasePair::new(r0, r1)?;
            let $digits = EXACT_DIGITS;
            $body
        }
    }};
}

fn cmd_expand(a: &ExpandArgs, cfg: &Config) -> Res<Output> {
    let depth = a.depth.unwrap_or(cfg.depth_default);
    let mode: Mode = a.mode.into();
    fn go<R: Real>(q: &BasePair<R>, xs: &str, mode: Mode, depth: usize, digits: usize) -> Res<Value> {
        let x = match xs {
            "ell" => critical_points(q)?.0,
            "r" => critical_points(q)?.1,
            _ => q.q0().lift_ratio(&rational(xs)?),
        };
        let run = run_algorithm(q, &x, mode, depth)?;
        Ok(json!({
            "x": x.to_decimal(digits),
            "mode": mode,
            "digits": run.digits.to_string(),
            "certified_depth": run.certified_depth,
            "residual": [run.residual_lo.to_decimal(digits), run.residual_hi.to_decimal(digits)],
        }))
    }
    let mut v = with_bases!(a.bases, cfg, |q, d| go(&q, &a.x, mode, depth, d)?);
    v["arithmetic"] = arithmetic(a.bases.float, cfg);
    Ok(Output::Json(v))
}

fn cmd_phi(a: &PhiArgs, cfg: &Config) -> Res<Output> {
    let depth = a.depth.unwrap_or(cfg.depth_default);
    let (f, region) = with_bases!(a.bases, cfg, |q, _d| (phi_forward(&q, depth)?, q.region()));
    Ok(Output::Json(json!({
        "region": region,
        "mu": f.mu.to_string(),
        "alpha": f.alpha.to_string(),
        "certified": f.certified,
        "arithmetic": arithmetic(a.bases.float, cfg),
    })))
}

fn cmd_phi_inv(a: &PhiInvArgs, solve: &SolveConfig) -> Res<Output> {
    let (mu, alpha) = (seq(&a.mu)?, seq(&a.alpha)?);
    let r: PhiInverse<Hp> = match a.depth {
        Some(d) => phi_inverse_for_depth(&mu, &alpha, d, solve)?,
        None => phi_inverse(&mu, &alpha, solve)?,
    };
    let bits = r.q0.precision();
    let digits = digits_for(bits);
    Ok(Output::Json(json!({
        "mu": mu.to_string(),
        "alpha": alpha.to_string(),
        "q0": r.q0.to_decimal(digits),
        "q1": r.q1.to_decimal(digits),
        "precision_bits": bits,
        "residual_f": r.residual_f,
        "residual_ftilde": r.residual_f_tilde,
        "bracket_width": (r.q0_hi.clone() - r.q0_lo.clone()).to_f64(),
        "radius": r.radius,
        "iterations": r.iterations,
    })))
}

fn verdict_json(v: &dbx_core::classify::Verdict) -> Value {
    json!({ "verdict": v.verdict, "witness": v.witness.as_ref().map(|w| w.0.clone()) })
}

fn cmd_classify(a: &ClassifyArgs, cfg: &Config, solve: &SolveConfig) -> Res<Output> {
    if let (Some(m), Some(al)) = (&a.mu, &a.alpha) {
        let (mu, alpha) = (seq(m)?, seq(al)?);
        let pc = classify_pair(&mu, &alpha);
        return Ok(Output::Json(json!({
            "mu": mu.to_string(),
            "alpha": alpha.to_string(),
            "in_B_prime": verdict_json(&pc.in_b_prime),
            "in_U2_prime": verdict_json(&pc.in_u2_prime),
            "in_V2_prime": verdict_json(&pc.in_v2_prime),
            "in_closure_U2_prime": verdict_json(&pc.in_closure_u2_prime),
            "isolated_uv": pc.isolated_uv,
        })));
    }
    let (Some(q0), Some(q1)) = (&a.q0, &a.q1) else {
        return Err(Failure::Usage("classify needs either --mu and --alpha, or --q0 and --q1".into()));
    };
    let depth = a.depth.unwrap_or(cfg.depth_default);
    let bases = Bases { q0: q0.clone(), q1: q1.clone(), float: a.float };
    let c = with_bases!(bases, cfg, |q, _d| classify_base_pair(&q.with_radius(a.radius), depth, solve)?);
    Ok(Output::Json(json!({
        "region": c.region,
        "in_U2": c.in_u2,
        "in_V2": c.in_v2,
        "in_closure_U2": c.in_closure_u2,
        "certified_depth": c.certified_depth,
        "recognised": c.recognised.map(|(m, al)| json!({ "mu": m.to_string(), "alpha": al.to_string() })),
        "arithmetic": arithmetic(a.float, cfg),
    })))
}

fn pair_of(s: &str, what: &str) -> Res<(f64, f64)> {
    let bad = || Failure::Usage(format!("{what} must be \"lo,hi\" with lo < hi, got \"{s}\""));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    let (a, b): (f64, f64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    if !(a < b) {
        return Err(bad());
    }
    Ok((a, b))
}

fn cmd_region(a: &RegionArgs, cfg: &Config, solve: &SolveConfig, exec: Exec) -> Res<Output> {
    let bad = || Failure::Usage(format!("--grid must be WxH with positive sizes, got \"{}\"", a.grid));
    let (w, h) = a.grid.split_once(['x', 'X']).ok_or_else(bad)?;
    let (w, h): (usize, usize) = (w.parse().map_err(|_| bad())?, h.parse().map_err(|_| bad())?);
    if w == 0 || h == 0 {
        return Err(bad());
    }
    let (x0, x1) = pair_of(&a.q0_range, "--q0-range")?;
    let (y0, y1) = pair_of(&a.q1_range, "--q1-range")?;
    if x0 <= 1.0 || y0 <= 1.0 {
        return Err(Failure::Precondition("bases must exceed 1".into()));
    }
    let f64_solve = SolveConfig { precision: 53, ..solve.clone() };
    let rows = dbx_core::exec::map_indexed(exec, w * h, |idx| -> Res<(usize, usize, f64, f64, Value)> {
        let (i, j) = (idx % w, idx / w);
        let q0 = x0 + (x1 - x0) * (i as f64 + 0.5) / w as f64;
        let q1 = y0 + (y1 - y0) * (j as f64 + 0.5) / h as f64;
        let c = classify_base_pair(&BasePair::new(q0, q1)?, a.depth, &f64_solve)?;
        Ok((i, j, q0, q1, json!([c.region, c.in_u2, c.in_v2, c.in_closure_u2])))
    });
    let rows = rows.into_iter().collect::<Res<Vec<_>>>()?;
    if cfg.output_format == Some(Format::Json) {
        let cells: Vec<Value> = rows
            .iter()
            .map(|(i, j, q0, q1, c)| {
                json!({ "i": i, "j": j, "q0": q0, "q1": q1, "region": c[0], "in_U2": c[1], "in_V2": c[2], "in_closure_U2": c[3] })
            })
            .collect();
        return Ok(Output::Json(json!({ "width": w, "height": h, "cells": cells })));
    }
    let mut s = String::from("i,j,q0,q1,region,in_U2,in_V2,in_closure_U2\n");
    for (i, j, q0, q1, c) in rows {
        let t = |v: &Value| v.as_str().unwrap_or_default().to_string();
        s += &format!("{i},{j},{q0},{q1},{},{},{},{}\n", t(&c[0]), t(&c[1]), t(&c[2]), t(&c[3]));
    }
    Ok(Output::Csv(s))
}

fn parse_list(s: &str, what: &str) -> Res<Vec<f64>> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            parse_rational(t)
                .map(|r| r.to_f64().value())
                .map_err(|_| Failure::Usage(format!("{what}: \"{t}\" is not a number")))
        })
        .collect()
}

fn dim_summary(e: &DimEstimate) -> Value {
    json!({
        "N": e.n,
        "family": e.family,
        "sample_count": e.sample_count,
        "slope": e.slope,
        "bound": e.bound,
        "tau": e.tau,
        "eps_N": e.eps_n,
        "fit_range": [e.fit_range.0, e.fit_range.1],
    })
}

fn cmd_dimension(a: &DimensionArgs, cfg: &Config, exec: Exec) -> Res<Output> {
    let scales = match &a.scales {
        Some(s) => parse_list(s, "--scales")?,
        None => dyadic_scales(4, 12),
    };
    let family = match a.family {
        FamilyArg::Full => Family::Full,
        FamilyArg::Gap => Family::Gap,
    };
    let p = FamilyParams { n: a.n, depth_blocks: a.depth_blocks, family };
    let e = estimate_dimension(&p, a.samples, &scales, cfg.seed, exec)?;
    let summary = dim_summary(&e);
    if cfg.output_format == Some(Format::Json) {
        let mut v = summary;
        v["scales"] = json!(e.scales);
        v["counts"] = json!(e.counts);
        v["seed"] = json!(cfg.seed);
        return Ok(Output::Json(v));
    }
    let mut s = String::from("scale,count\n");
    for (sc, c) in e.scales.iter().zip(&e.counts) {
        s += &format!("{sc},{c}\n");
    }
    Ok(Output::CsvWithSummary(s, summary))
}

fn cmd_ineq(a: &IneqArgs, cfg: &Config, exec: Exec) -> Res<Output> {
    let x = rational(&a.x)?.to_f64().value();
    let y = rational(&a.y)?.to_f64().value();
    if let Some(trials) = a.trials {
        let r = verify_positivity_sweep(x, y, trials, cfg.seed, exec)?;
        return Ok(Output::Json(serde_json::to_value(&r).expect("json")));
    }
    let input = SeriesInput::new(x, y, parse_list(&a.n, "--n")?, parse_list(&a.ntilde, "--ntilde")?)?;
    let v = match a.k {
        Some(k) => eval_s(&input, k)?,
        None => eval_s_to_tol(&input, a.tol, DEFAULT_PRECISION)?,
    };
    Ok(Output::Json(json!({
        "x": x,
        "y": y,
        "n": input.n_seq,
        "ntilde": input.ntilde_seq,
        "lower": v.lower,
        "upper": v.upper,
        "K": v.k_terms,
        "tail_bound": v.tail_bound,
        "positive": v.lower > 0.0,
        "contains_zero": v.contains(0.0),
    })))
}

fn cmd_perturb(a: &PerturbArgs, cfg: &Config) -> Res<Output> {
    let depth = a.depth.unwrap_or(cfg.depth_default);
    let p = with_bases!(a.bases, cfg, |q, _d| perturbation_stability_probe(&q, a.eps, depth, a.samples, cfg.seed)?);
    Ok(Output::Json(serde_json::to_value(&p).expect("json")))
}
