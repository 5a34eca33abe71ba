//! Experiment runner: parses flags, drives the verifiers and writes
//! `report.json` and `summary.csv` into the output directory.
//!
//! Exit codes: 0 every bound holds, 2 a bound was violated, 3 the sieve or
//! a quadrature ran out of depth or budget, 1 anything else.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analysis::{lebesgue_map, lusin_compact_set, lusin_modulus_check, CompactContinuitySet, CoverFamily, ModulusCheck};
use crate::corpus::{lookup, metadata, CorpusFunction, CorpusOptions, FunctionMetadata};
use crate::error::{Error, Result};
use crate::geometry::{GaugeProvenance, NormKind};
use crate::measure::RadonMeasure;
use crate::partition::Sabotage;
use crate::riemann::{corollary_report, ApproximationReport, CorollaryReport, Pipeline, TheoremOptions};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_VIOLATED: i32 = 2;
pub const EXIT_DEPTH: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "morse-gauge", version, about = "Gauge construction and certified Riemann sums")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sieve gauge-fine families and check the L¹, local and truncation bounds.
    RunTheorem(RunArgs),
    /// Check the Riemann-sum and total-variation bounds for `G(E) = ∫_E f dμ`.
    RunCorollary(RunArgs),
    /// Build a compact set of continuity and sample its modulus.
    RunLusin(LusinArgs),
    /// Certified Lebesgue radii on a probe grid.
    LebesgueMap(MapArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyArg {
    Cube,
    Ball,
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Corpus entry.
    #[arg(long = "fn", value_name = "NAME")]
    pub function: String,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Norm on the target space: 1, 2 or inf.
    #[arg(long, default_value = "2", value_parser = parse_norm)]
    pub ynorm: NormKind,
    /// Norm on the domain: 1, 2 or inf.
    #[arg(long, default_value = "inf", value_parser = parse_norm)]
    pub domain_norm: NormKind,
    #[arg(long, value_enum, default_value_t = FamilyArg::Cube)]
    pub family: FamilyArg,
    /// Declared Morse constant; at least the family's own.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Density grid CSV (`level,value` rows); Lebesgue measure otherwise.
    #[arg(long)]
    pub density: Option<PathBuf>,
    /// `∫ ‖f‖` outside the universe.
    #[arg(long, default_value_t = 0.0)]
    pub tail_abs: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, required = true)]
    pub eps: Vec<f64>,
    /// Residual target of the sieve; derived from `eps` by default.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub max_depth: Option<u32>,
    #[arg(long, default_value_t = 1)]
    pub trials: u32,
    /// inflate-delta, overlap-cells or offcenter-tags.
    #[arg(long, value_parser = parse_sabotage)]
    pub sabotage: Option<Sabotage>,
    /// Also write every family as CSV under `families/`.
    #[arg(long)]
    pub families: bool,
}

#[derive(Args, Debug, Clone)]
pub struct LusinArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, required = true)]
    pub eps: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub pairs: usize,
}

#[derive(Args, Debug, Clone)]
pub struct MapArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub eps: f64,
    /// Probes per axis.
    #[arg(long, default_value_t = 16)]
    pub grid: usize,
}

fn parse_norm(s: &str) -> std::result::Result<NormKind, String> {
    NormKind::parse(s).map_err(|e| e.to_string())
}

fn parse_sabotage(s: &str) -> std::result::Result<Sabotage, String> {
    Sabotage::parse(s).map_err(|e| e.to_string())
}

/// The resolved configuration, echoed into `report.json`.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub command: String,
    pub function: String,
    pub dim: usize,
    pub ynorm: NormKind,
    pub domain_norm: NormKind,
    pub family: FamilyArg,
    pub lambda: f64,
    pub eps: Vec<f64>,
    pub eta: Option<f64>,
    pub max_depth: Option<u32>,
    pub trials: u32,
    pub seed: u64,
    pub sabotage: Option<Sabotage>,
    pub density: Option<PathBuf>,
    pub tail_abs: f64,
}

struct Setup {
    f: Arc<dyn CorpusFunction>,
    mu: Arc<RadonMeasure>,
    family: CoverFamily,
}

fn setup(c: &CommonArgs) -> Result<Setup> {
    let opts = CorpusOptions {
        dim: c.dim,
        y_norm: c.ynorm,
        tail_abs: c.tail_abs,
    };
    let f = lookup(&c.function, &opts)?;
    let u = *f.universe();
    let mu = match &c.density {
        Some(p) => RadonMeasure::load(u, p)?,
        None => RadonMeasure::lebesgue(u),
    };
    let mut family = match c.family {
        FamilyArg::Cube => CoverFamily::cubes(f.dim_in(), c.domain_norm),
        FamilyArg::Ball => CoverFamily::balls(c.domain_norm),
    };
    if let Some(l) = c.lambda {
        if !(l >= family.lambda) {
            return Err(Error::Config(format!(
                "--lambda {l} is below the family's Morse constant {}",
                family.lambda
            )));
        }
        family.lambda = l;
    }
    Ok(Setup {
        f,
        mu: Arc::new(mu),
        family,
    })
}

fn config(command: &str, c: &CommonArgs, s: &Setup, eps: Vec<f64>) -> ExperimentConfig {
    ExperimentConfig {
        command: command.to_string(),
        function: c.function.clone(),
        dim: s.f.dim_in(),
        ynorm: c.ynorm,
        domain_norm: c.domain_norm,
        family: c.family,
        lambda: s.family.lambda,
        eps,
        eta: None,
        max_depth: None,
        trials: 1,
        seed: c.seed,
        sabotage: None,
        density: c.density.clone(),
        tail_abs: c.tail_abs,
    }
}

fn check_eps(eps: &[f64]) -> Result<()> {
    match eps.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
        Some(e) => Err(Error::Config(format!("eps must be positive, got {e}"))),
        None => Ok(()),
    }
}

/// Exit code for an error that stopped a run.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::BoundViolated { .. } => EXIT_VIOLATED,
        Error::DepthExceeded { .. } | Error::ToleranceUnreachable { .. } | Error::ResidualStuck { .. } => EXIT_DEPTH,
        _ => EXIT_OTHER,
    }
}

fn status_of(code: i32) -> &'static str {
    match code {
        EXIT_PASS => "pass",
        EXIT_VIOLATED => "bound_violated",
        EXIT_DEPTH => "depth_exceeded",
        _ => "error",
    }
}

/// Worst code wins: depth/budget failures over violations over passes.
fn combine(a: i32, b: i32) -> i32 {
    let rank = |c: i32| match c {
        EXIT_PASS => 0,
        EXIT_VIOLATED => 1,
        EXIT_DEPTH => 2,
        _ => 3,
    };
    if rank(b) > rank(a) {
        b
    } else {
        a
    }
}

/// Fixed float formatting for CSV: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

fn write_outputs<T: Serialize>(out: &Path, report: &T, csv: &str) -> Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join("report.json"), serde_json::to_string_pretty(report)?)?;
    fs::write(out.join("summary.csv"), csv)?;
    Ok(())
}

#[derive(Serialize)]
struct TheoremRun {
    eps: f64,
    eta: Option<f64>,
    gamma: Option<f64>,
    status: &'static str,
    error: Option<String>,
    gauge: Option<GaugeProvenance>,
    reports: Vec<ApproximationReport>,
}

#[derive(Serialize)]
struct TheoremOutput {
    config: ExperimentConfig,
    function: FunctionMetadata,
    exit_code: i32,
    runs: Vec<TheoremRun>,
}

fn theorem_options(s: &Setup, a: &RunArgs) -> TheoremOptions {
    let mut o = TheoremOptions::new(s.f.as_ref(), s.family.clone());
    if let Some(d) = a.max_depth {
        o.max_depth = d;
    }
    o.eta = a.eta;
    o.seed = a.common.seed;
    o.sabotage = a.sabotage;
    o
}

fn run_config(command: &str, s: &Setup, a: &RunArgs) -> ExperimentConfig {
    let mut cfg = config(command, &a.common, s, a.eps.clone());
    cfg.eta = a.eta;
    cfg.max_depth = Some(theorem_options(s, a).max_depth);
    cfg.trials = a.trials.max(1);
    cfg.sabotage = a.sabotage;
    cfg
}

const THEOREM_HEADER: &str = "function,eps,trial,status,cell_count,residual_measure,l1_deviation,slack,local_error_sum,truncation_error,sum_error,pass\n";

pub fn run_theorem(a: &RunArgs) -> Result<i32> {
    check_eps(&a.eps)?;
    let s = setup(&a.common)?;
    let cfg = run_config("run-theorem", &s, a);
    let mut csv = String::from(THEOREM_HEADER);
    let mut runs = Vec::new();
    let mut code = EXIT_PASS;
    for (ei, &eps) in a.eps.iter().enumerate() {
        let mut run = TheoremRun {
            eps,
            eta: None,
            gamma: None,
            status: "pass",
            error: None,
            gauge: None,
            reports: Vec::new(),
        };
        let result = (|| -> Result<()> {
            let p = Pipeline::new(s.f.clone(), s.mu.clone(), eps, theorem_options(&s, a))?;
            run.eta = Some(p.sieve.eta);
            run.gamma = Some(p.gamma);
            run.gauge = Some(p.gauge.provenance.clone());
            for t in 0..cfg.trials {
                let (fam, r) = p.run_trial(t)?;
                if a.families {
                    let dir = a.common.out.join("families");
                    fs::create_dir_all(&dir)?;
                    fam.write_csv(fs::File::create(dir.join(format!("eps{ei}_trial{t}.csv")))?)?;
                }
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{},{},{},{},{}",
                    s.f.name(),
                    fmt_f64(eps),
                    t,
                    if r.passed() { "pass" } else { "bound_violated" },
                    r.cell_count,
                    fmt_f64(r.residual_measure),
                    fmt_f64(r.l1_deviation),
                    fmt_f64(r.slack()),
                    fmt_f64(r.local_error_sum),
                    fmt_f64(r.truncation_error),
                    fmt_f64(r.exact.sub(&r.simple_sum).norm()),
                    r.passed()
                );
                run.reports.push(r);
            }
            Ok(())
        })();
        let run_code = match &result {
            Ok(()) if run.reports.iter().all(|r| r.passed()) => EXIT_PASS,
            Ok(()) => EXIT_VIOLATED,
            Err(e) => {
                run.error = Some(e.to_string());
                let _ = writeln!(
                    csv,
                    "{},{},{},{},,,,,,,,false",
                    s.f.name(),
                    fmt_f64(eps),
                    run.reports.len(),
                    status_of(exit_code(e))
                );
                exit_code(e)
            }
        };
        run.status = status_of(run_code);
        code = combine(code, run_code);
        runs.push(run);
    }
    let out = TheoremOutput {
        config: cfg,
        function: metadata(s.f.as_ref())?,
        exit_code: code,
        runs,
    };
    write_outputs(&a.common.out, &out, &csv)?;
    Ok(code)
}

#[derive(Serialize)]
struct CorollaryRun {
    eps: f64,
    status: &'static str,
    error: Option<String>,
    report: Option<CorollaryReport>,
}

#[derive(Serialize)]
struct CorollaryOutput {
    config: ExperimentConfig,
    function: FunctionMetadata,
    exit_code: i32,
    runs: Vec<CorollaryRun>,
}

const COROLLARY_HEADER: &str =
    "function,eps,status,cell_count,riemann_sum_error,m_witness,abs_total,witness_gap,reconstruction_error,pass\n";

pub fn run_corollary(a: &RunArgs) -> Result<i32> {
    check_eps(&a.eps)?;
    let s = setup(&a.common)?;
    let mut cfg = run_config("run-corollary", &s, a);
    cfg.trials = 1;
    let mut csv = String::from(COROLLARY_HEADER);
    let mut runs = Vec::new();
    let mut code = EXIT_PASS;
    for &eps in &a.eps {
        let result =
            Pipeline::new(s.f.clone(), s.mu.clone(), eps, theorem_options(&s, a)).and_then(|p| corollary_report(&p));
        let (run_code, run) = match result {
            Ok(r) => {
                let c = if r.flags.all() { EXIT_PASS } else { EXIT_VIOLATED };
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{},{},{}",
                    s.f.name(),
                    fmt_f64(eps),
                    status_of(c),
                    r.cell_count,
                    fmt_f64(r.riemann_sum_error),
                    fmt_f64(r.m_witness),
                    fmt_f64(r.abs_total),
                    fmt_f64(r.witness_gap),
                    fmt_f64(r.reconstruction_error),
                    r.flags.all()
                );
                (
                    c,
                    CorollaryRun {
                        eps,
                        status: status_of(c),
                        error: None,
                        report: Some(r),
                    },
                )
            }
            Err(e) => {
                let c = exit_code(&e);
                let _ = writeln!(csv, "{},{},{},,,,,,,false", s.f.name(), fmt_f64(eps), status_of(c));
                (
                    c,
                    CorollaryRun {
                        eps,
                        status: status_of(c),
                        error: Some(e.to_string()),
                        report: None,
                    },
                )
            }
        };
        code = combine(code, run_code);
        runs.push(run);
    }
    let out = CorollaryOutput {
        config: cfg,
        function: metadata(s.f.as_ref())?,
        exit_code: code,
        runs,
    };
    write_outputs(&a.common.out, &out, &csv)?;
    Ok(code)
}

#[derive(Serialize)]
struct LusinRun {
    eps: f64,
    status: &'static str,
    error: Option<String>,
    compact_set: Option<CompactContinuitySet>,
    modulus: Option<ModulusCheck>,
}

#[derive(Serialize)]
struct LusinOutput {
    config: ExperimentConfig,
    exit_code: i32,
    runs: Vec<LusinRun>,
}

pub fn run_lusin(a: &LusinArgs) -> Result<i32> {
    check_eps(&a.eps)?;
    let s = setup(&a.common)?;
    let cfg = config("run-lusin", &a.common, &s, a.eps.clone());
    let mut csv = String::from("function,eps,status,pieces,omitted_measure,separation,margin,pairs,violations,pass\n");
    let mut runs = Vec::new();
    let mut code = EXIT_PASS;
    for &eps in &a.eps {
        let (run_code, run) = match lusin_compact_set(s.f.as_ref(), s.mu.universe(), eps, &s.mu) {
            Ok(k) => {
                let m = lusin_modulus_check(s.f.as_ref(), &k, a.pairs, a.common.seed);
                let ok = k.omitted_measure < eps && k.separation > 0.0 && m.violations == 0;
                let c = if ok { EXIT_PASS } else { EXIT_VIOLATED };
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{},{},{}",
                    s.f.name(),
                    fmt_f64(eps),
                    status_of(c),
                    k.pieces.len(),
                    fmt_f64(k.omitted_measure),
                    fmt_f64(k.separation),
                    fmt_f64(k.margin),
                    m.pairs,
                    m.violations,
                    ok
                );
                (
                    c,
                    LusinRun {
                        eps,
                        status: status_of(c),
                        error: None,
                        compact_set: Some(k),
                        modulus: Some(m),
                    },
                )
            }
            Err(e) => {
                let c = exit_code(&e);
                let _ = writeln!(csv, "{},{},{},,,,,,,false", s.f.name(), fmt_f64(eps), status_of(c));
                (
                    c,
                    LusinRun {
                        eps,
                        status: status_of(c),
                        error: Some(e.to_string()),
                        compact_set: None,
                        modulus: None,
                    },
                )
            }
        };
        code = combine(code, run_code);
        runs.push(run);
    }
    write_outputs(
        &a.common.out,
        &LusinOutput {
            config: cfg,
            exit_code: code,
            runs,
        },
        &csv,
    )?;
    Ok(code)
}

#[derive(Serialize)]
struct MapOutput {
    config: ExperimentConfig,
    exit_code: i32,
    probes: usize,
    certified: usize,
    uncertified: usize,
    failed: usize,
}

pub fn run_lebesgue_map(a: &MapArgs) -> Result<i32> {
    check_eps(&[a.eps])?;
    let s = setup(&a.common)?;
    let cfg = config("lebesgue-map", &a.common, &s, vec![a.eps]);
    let d = s.f.dim_in();
    let mut csv = String::new();
    for k in 0..d {
        let _ = write!(csv, "x{k},");
    }
    csv.push_str("radius,certified,route,budget,error\n");
    let (mut certified, mut uncertified, mut failed) = (0, 0, 0);
    let rows = lebesgue_map(s.f.as_ref(), &s.mu, a.eps, &s.family, a.grid.max(1));
    for (p, r) in &rows {
        for k in 0..d {
            let _ = write!(csv, "{},", fmt_f64(p.get(k)));
        }
        match r {
            Ok(r) => {
                if r.certified {
                    certified += 1;
                } else {
                    uncertified += 1;
                }
                let _ = writeln!(
                    csv,
                    "{},{},{},{},",
                    fmt_f64(r.radius),
                    r.certified,
                    r.route.name(),
                    fmt_f64(r.budget)
                );
            }
            Err(e) => {
                failed += 1;
                let _ = writeln!(csv, ",false,,,{}", e.to_string().replace(',', ";"));
            }
        }
    }
    let out = MapOutput {
        config: cfg,
        exit_code: EXIT_PASS,
        probes: rows.len(),
        certified,
        uncertified,
        failed,
    };
    fs::create_dir_all(&a.common.out)?;
    fs::write(a.common.out.join("lebesgue_map.csv"), &csv)?;
    write_outputs(&a.common.out, &out, &csv)?;
    Ok(EXIT_PASS)
}

/// Cap rayon's worker count from `MORSE_GAUGE_THREADS`, once per process.
fn configure_threads() {
    if let Some(n) = std::env::var("MORSE_GAUGE_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

pub fn execute(cli: &Cli) -> Result<i32> {
    configure_threads();
    match &cli.command {
        Command::RunTheorem(a) => run_theorem(a),
        Command::RunCorollary(a) => run_corollary(a),
        Command::RunLusin(a) => run_lusin(a),
        Command::LebesgueMap(a) => run_lebesgue_map(a),
    }
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_OTHER } else { EXIT_PASS };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("morse-gauge: {e}");
            exit_code(&e)
        }
    }
}
