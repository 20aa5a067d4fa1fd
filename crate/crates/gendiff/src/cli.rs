//! Command-line front end: argument parsing, spec loading, output
//! rendering and the exit-code contract.
//!
//! Subcommands pipe specs through the v1 text format; `-` reads stdin, so
//! `gendiff gallery cantor | gendiff rp-check -` needs no temporary files.
//! Every run opens with a header recording the tool version and the
//! resolved parameter set, and identical command lines produce
//! byte-identical output.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{self, Read, Write};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::characteristics::{DiffusionSpec, Formula, ScaleFunction, SpeedCoords};
use crate::error::{Error, Result};
use crate::gallery::{
    bm_spec, cantor_diffusion_spec, fat_cantor_set, feller_mckean_spec, ou_spec, sticky_bm_spec,
};
use crate::rp::{rp_verdict_at, Method, RPStatus, RPVerdict, DEFAULT_RESOLUTION};
use crate::simulate::{build_grid_chain, natural_window, simulate_ensemble, GridChain, WallRule};
use crate::specfile;
use crate::verify::{
    bm_characteristics_test, exit_probability_test, exit_time_test, feller_mckean_occupation_test,
    martingale_test, sticky_characteristics_test, sticky_occupation_test, StatReport,
};

const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Cells in the default simulation grid when `--h` is not given.
const DEFAULT_GRID_CELLS: f64 = 400.0;

/// Half-width of the default window around the start when an interval
/// endpoint is infinite.
const DEFAULT_HALF_WIDTH: f64 = 2.0;

/// Exit statuses of the binary.
pub mod exit_code {
    /// Success; for `rp-check`, a conclusive Holds or TriviallyHolds.
    pub const SUCCESS: i32 = 0;
    /// The representation property fails.
    pub const RP_FAILS: i32 = 2;
    /// Numeric verdict that could not separate the zero set from measure
    /// zero at the scan resolution.
    pub const INCONCLUSIVE: i32 = 3;
    /// A validation or verification check did not pass, or a computation
    /// failed.
    pub const CHECK_FAILED: i32 = 4;
    /// Command-line usage error.
    pub const USAGE: i32 = 64;
    /// Malformed or unreadable spec input.
    pub const PARSE: i32 = 65;
}

#[derive(Parser, Debug)]
#[command(
    name = "gendiff",
    version,
    about = "Scale and speed characteristics, representation-property verdicts, and \
             Markov-chain simulation of one-dimensional general diffusions"
)]
pub struct Cli {
    /// Emit machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a spec's structural and analytic invariants.
    Validate(ValidateArgs),
    /// Decide the representation property from the characteristics.
    RpCheck(RpCheckArgs),
    /// Sample ensemble paths of the speed-measure chain as CSV.
    Simulate(SimulateArgs),
    /// Run one Monte Carlo verification suite against its closed-form
    /// target.
    Verify(VerifyArgs),
    /// Print a ready-made spec in gendiff-spec v1 form.
    Gallery(GalleryArgs),
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Spec file path, or `-` for stdin.
    spec: String,
}

#[derive(Args, Debug)]
struct RpCheckArgs {
    /// Spec file path, or `-` for stdin.
    spec: String,
    /// Start point; defaults to the spec's own x0.
    #[arg(long, allow_negative_numbers = true)]
    x0: Option<f64>,
    /// Derivative threshold of the numeric fallback scan.
    #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
    resolution: f64,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Spec file path, or `-` for stdin.
    spec: String,
    /// Time horizon of every path.
    #[arg(long)]
    horizon: f64,
    /// Natural-scale grid step; defaults to 1/400 of the window span.
    #[arg(long)]
    h: Option<f64>,
    /// Number of paths.
    #[arg(long, default_value_t = 1)]
    paths: usize,
    /// Master seed; path i draws from stream i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Start point; defaults to the spec's own x0.
    #[arg(long, allow_negative_numbers = true)]
    x0: Option<f64>,
    /// State-space window to discretize; defaults to the interval where
    /// finite and to start +- 2 elsewhere.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    window: Option<Vec<f64>>,
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Spec file path or `-`; only suites that read a spec accept it.
    spec: Option<String>,
    /// Verification suite to run.
    #[arg(long, value_enum)]
    suite: Suite,
    /// Left exit point in state coordinates.
    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,
    /// Right exit point in state coordinates.
    #[arg(long, allow_negative_numbers = true)]
    b: Option<f64>,
    /// Start point; defaults to the spec's own x0.
    #[arg(long, allow_negative_numbers = true)]
    x0: Option<f64>,
    /// Checkpoint times of the martingale suite.
    #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.5, 0.75, 1.0])]
    checkpoints: Vec<f64>,
    /// Horizon of the occupation and characteristics suites.
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    /// Atom count of the atomic-occupation suite.
    #[arg(long, default_value_t = 200)]
    atoms: usize,
    /// Natural-scale grid step.
    #[arg(long, default_value_t = 0.01)]
    h: f64,
    /// Number of paths.
    #[arg(long, default_value_t = 1000)]
    paths: usize,
    /// Master seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Suite {
    /// Probability of exiting right against the scale ratio.
    ExitProbability,
    /// Mean exit time against the Green-function integral.
    ExitTime,
    /// Scale-transformed stopped paths keep a constant mean.
    Martingale,
    /// Time at the sticky origin against rho times the local time.
    Occupation,
    /// Quadratic variation against the time spent away from the origin.
    Characteristics,
    /// Fraction of time inside a truncated dense atom set.
    AtomicOccupation,
}

impl Suite {
    fn name(self) -> &'static str {
        match self {
            Suite::ExitProbability => "exit-probability",
            Suite::ExitTime => "exit-time",
            Suite::Martingale => "martingale",
            Suite::Occupation => "occupation",
            Suite::Characteristics => "characteristics",
            Suite::AtomicOccupation => "atomic-occupation",
        }
    }
}

#[derive(Args, Debug)]
struct GalleryArgs {
    #[command(subcommand)]
    name: GallerySpec,
}

#[derive(Subcommand, Debug)]
enum GallerySpec {
    /// Standard Brownian motion on the line.
    Bm {
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        x0: f64,
    },
    /// Ornstein-Uhlenbeck through its closed-form characteristics.
    Ou {
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        x0: f64,
    },
    /// Brownian motion sticky at the origin.
    Sticky {
        /// Speed-measure mass of the origin atom.
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        x0: f64,
    },
    /// Reflected diffusion on [-1, 1] with purely atomic speed on dyadic
    /// rationals.
    FellerMckean {
        /// Atoms kept in the truncation.
        #[arg(long, default_value_t = 200)]
        atoms: usize,
        /// Seed of the per-level shuffle of atom positions.
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        x0: f64,
    },
    /// Diffusion whose inverse scale is the fat-Cantor singular function.
    Cantor {
        /// Construction depth of the fat Cantor set.
        #[arg(long, default_value_t = 12)]
        levels: u32,
        /// Removal parameter in (0, 1].
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 0.5)]
        x0: f64,
    },
}

/// Parses `argv` and runs the selected subcommand, returning the process
/// exit code. Output goes to stdout, diagnostics to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => exit_code::SUCCESS,
                _ => exit_code::USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match execute(&cli, &mut out) {
        Ok(code) => code,
        Err(Error::OutputFailure(m)) if m == BROKEN_PIPE => exit_code::SUCCESS,
        Err(e) => {
            eprintln!("gendiff: {e}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } => exit_code::PARSE,
        Error::InvalidParameter(_)
        | Error::OrderViolation { .. }
        | Error::NonPositiveRho(_)
        | Error::NonPositiveStep(_)
        | Error::OutOfRange { .. }
        | Error::WindowTooSmall { .. }
        | Error::WindowOutOfRange { .. }
        | Error::StartOutsideWindow { .. }
        | Error::LevelOutsideWindow { .. } => exit_code::USAGE,
        _ => exit_code::CHECK_FAILED,
    }
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Validate(args) => validate_cmd(args, cli.json, out),
        Command::RpCheck(args) => rp_check_cmd(args, cli.json, out),
        Command::Simulate(args) => simulate_cmd(args, cli.json, out),
        Command::Verify(args) => verify_cmd(args, cli.json, out),
        Command::Gallery(args) => gallery_cmd(args, cli.json, out),
    }
}

/// Resolved parameters echoed in every output header; BTreeMap keeps the
/// rendering order stable.
#[derive(Default)]
struct Params(BTreeMap<String, String>);

impl Params {
    fn put(mut self, key: &str, value: impl fmt::Display) -> Self {
        self.0.insert(key.into(), value.to_string());
        self
    }
}

/// Sentinel for a reader that closed the pipe; the run exits quietly.
const BROKEN_PIPE: &str = "broken pipe";

fn wfail(e: io::Error) -> Error {
    if e.kind() == io::ErrorKind::BrokenPipe {
        return Error::OutputFailure(BROKEN_PIPE.into());
    }
    Error::OutputFailure(e.to_string())
}

/// Comment lines legal both ahead of CSV and inside a spec file.
fn header(out: &mut dyn Write, command: &str, params: &Params) -> Result<()> {
    writeln!(out, "# gendiff {VERSION} {command}").map_err(wfail)?;
    let rendered: Vec<String> = params.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
    writeln!(out, "# params: {}", rendered.join(" ")).map_err(wfail)?;
    Ok(())
}

fn json_envelope(command: &str, params: &Params) -> serde_json::Map<String, serde_json::Value> {
    let mut map = serde_json::Map::new();
    map.insert("tool".into(), json!("gendiff"));
    map.insert("version".into(), json!(VERSION));
    map.insert("command".into(), json!(command));
    map.insert("params".into(), json!(params.0));
    map
}

fn write_json(
    out: &mut dyn Write,
    envelope: serde_json::Map<String, serde_json::Value>,
) -> Result<()> {
    let text = serde_json::to_string(&serde_json::Value::Object(envelope))
        .map_err(|e| Error::OutputFailure(e.to_string()))?;
    writeln!(out, "{text}").map_err(wfail)
}

/// Reads and parses a spec from a file path or stdin (`-`).
fn load_spec(source: &str) -> Result<DiffusionSpec> {
    let text = if source == "-" {
        let mut buf = String::new();
        io::stdin().read_to_string(&mut buf).map_err(|e| Error::Parse {
            line: 1,
            column: 1,
            message: format!("cannot read stdin: {e}"),
        })?;
        buf
    } else {
        fs::read_to_string(source).map_err(|e| Error::Parse {
            line: 1,
            column: 1,
            message: format!("cannot read {source}: {e}"),
        })?
    };
    specfile::parse(&text)
}

fn validate_cmd(args: &ValidateArgs, json: bool, out: &mut dyn Write) -> Result<i32> {
    let spec = load_spec(&args.spec)?;
    let report = spec.validate();
    let params = Params::default().put("spec", &args.spec);
    if json {
        let mut envelope = json_envelope("validate", &params);
        envelope.insert("label".into(), json!(spec.label));
        envelope.insert("valid".into(), json!(report.is_valid()));
        envelope.insert("violations".into(), json!(report.violations));
        envelope.insert("notes".into(), json!(report.notes));
        write_json(out, envelope)?;
    } else {
        header(out, "validate", &params)?;
        writeln!(out, "spec: {}", spec.label).map_err(wfail)?;
        writeln!(out, "valid: {}", report.is_valid()).map_err(wfail)?;
        for violation in &report.violations {
            writeln!(out, "violation: {violation}").map_err(wfail)?;
        }
        for note in &report.notes {
            writeln!(out, "note: {note}").map_err(wfail)?;
        }
    }
    Ok(if report.is_valid() { exit_code::SUCCESS } else { exit_code::CHECK_FAILED })
}

fn start_point(requested: Option<f64>, spec: &DiffusionSpec) -> Result<f64> {
    requested.or(spec.x0).ok_or_else(|| {
        Error::InvalidParameter("the spec has no x0 and --x0 was not given".into())
    })
}

fn status_text(status: RPStatus) -> &'static str {
    match status {
        RPStatus::Holds => "Holds",
        RPStatus::Fails => "Fails",
        RPStatus::TriviallyHolds => "TriviallyHolds",
    }
}

fn method_text(method: Method) -> &'static str {
    match method {
        Method::Exact => "exact",
        Method::Numeric => "numeric",
    }
}

fn rp_check_cmd(args: &RpCheckArgs, json: bool, out: &mut dyn Write) -> Result<i32> {
    let spec = load_spec(&args.spec)?;
    let x0 = start_point(args.x0, &spec)?;
    let verdict = rp_verdict_at(&spec, x0, args.resolution)?;
    let params = Params::default()
        .put("resolution", args.resolution)
        .put("spec", &args.spec)
        .put("x0", x0);
    if json {
        let mut envelope = json_envelope("rp-check", &params);
        envelope.insert("label".into(), json!(spec.label));
        envelope.insert("status".into(), json!(status_text(verdict.status)));
        envelope.insert("zero_set_measure".into(), json!(verdict.zero_set_measure));
        envelope.insert("error".into(), json!(verdict.error));
        envelope.insert("method".into(), json!(method_text(verdict.method)));
        envelope.insert("extremal".into(), json!(verdict.is_extremal));
        envelope.insert("conclusive".into(), json!(verdict.conclusive()));
        envelope.insert("notes".into(), json!(verdict.notes));
        write_json(out, envelope)?;
    } else {
        header(out, "rp-check", &params)?;
        render_verdict(out, &spec.label, &verdict)?;
    }
    Ok(match verdict.status {
        RPStatus::Fails => exit_code::RP_FAILS,
        _ if !verdict.conclusive() => exit_code::INCONCLUSIVE,
        _ => exit_code::SUCCESS,
    })
}

fn render_verdict(out: &mut dyn Write, label: &str, verdict: &RPVerdict) -> Result<()> {
    writeln!(out, "spec: {label}").map_err(wfail)?;
    writeln!(out, "status: {}", status_text(verdict.status)).map_err(wfail)?;
    writeln!(out, "zero_set_measure: {}", verdict.zero_set_measure).map_err(wfail)?;
    writeln!(out, "error: {}", verdict.error).map_err(wfail)?;
    writeln!(out, "method: {}", method_text(verdict.method)).map_err(wfail)?;
    writeln!(out, "extremal: {}", verdict.is_extremal).map_err(wfail)?;
    writeln!(out, "conclusive: {}", verdict.conclusive()).map_err(wfail)?;
    for note in &verdict.notes {
        writeln!(out, "note: {note}").map_err(wfail)?;
    }
    Ok(())
}

fn simulate_cmd(args: &SimulateArgs, json: bool, out: &mut dyn Write) -> Result<i32> {
    if !(args.horizon > 0.0) || !args.horizon.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "horizon must be positive and finite, got {}",
            args.horizon
        )));
    }
    let spec = load_spec(&args.spec)?;
    let x0 = start_point(args.x0, &spec)?;
    let state_window = match &args.window {
        Some(w) => (w[0], w[1]),
        None => default_state_window(&spec, x0),
    };
    let window = natural_window(&spec, state_window)?;
    let h = args.h.unwrap_or((window.1 - window.0) / DEFAULT_GRID_CELLS);
    let chain = build_grid_chain(&spec, h, window)?;
    let paths = simulate_ensemble(&chain, x0, args.horizon, args.paths, args.seed)?;
    let params = Params::default()
        .put("h", chain.h)
        .put("horizon", args.horizon)
        .put("paths", args.paths)
        .put("seed", args.seed)
        .put("spec", &args.spec)
        .put("window", format_args!("{}..{}", state_window.0, state_window.1))
        .put("x0", x0);
    let render = |out: &mut dyn Write| -> Result<()> {
        if json {
            let mut envelope = json_envelope("simulate", &params);
            envelope.insert("label".into(), json!(spec.label));
            envelope.insert("grid".into(), grid_json(&chain));
            let path_objects: Vec<serde_json::Value> = paths
                .iter()
                .enumerate()
                .map(|(i, p)| json!({ "path_id": i, "times": p.times, "values": p.values }))
                .collect();
            envelope.insert("paths".into(), json!(path_objects));
            write_json(out, envelope)
        } else {
            header(out, "simulate", &params)?;
            render_grid(out, &chain)?;
            writeln!(out, "path_id,t,x").map_err(wfail)?;
            for (i, path) in paths.iter().enumerate() {
                for (t, x) in path.times.iter().zip(&path.values) {
                    writeln!(out, "{i},{t},{x}").map_err(wfail)?;
                }
            }
            Ok(())
        }
    };
    match &args.out {
        Some(path) => {
            let mut buf = Vec::new();
            render(&mut buf)?;
            fs::write(path, &buf).map_err(|e| Error::OutputFailure(format!("{path}: {e}")))?;
        }
        None => render(out)?,
    }
    Ok(exit_code::SUCCESS)
}

/// Window simulated when `--window` is absent: the state interval itself
/// where finite, a fixed neighborhood of the start elsewhere.
fn default_state_window(spec: &DiffusionSpec, x0: f64) -> (f64, f64) {
    let (lo, hi) = spec.interval.interior();
    let lo = if lo.is_finite() { lo } else { x0 - DEFAULT_HALF_WIDTH };
    let hi = if hi.is_finite() { hi } else { x0 + DEFAULT_HALF_WIDTH };
    (lo, hi)
}

fn wall_text(rule: WallRule) -> &'static str {
    match rule {
        WallRule::Absorb => "absorb",
        WallRule::ReflectInward => "reflect",
    }
}

fn render_grid(out: &mut dyn Write, chain: &GridChain) -> Result<()> {
    writeln!(
        out,
        "# grid: {} states, natural window [{}, {}], h {}",
        chain.values.len(),
        chain.grid[0],
        chain.grid[chain.grid.len() - 1],
        chain.h,
    )
    .map_err(wfail)?;
    let sides = [
        ("left", chain.left_rule, chain.left_artificial),
        ("right", chain.right_rule, chain.right_artificial),
    ];
    for (name, rule, artificial) in sides {
        let suffix = if artificial { " (artificial)" } else { "" };
        writeln!(out, "# wall {name}: {}{suffix}", wall_text(rule)).map_err(wfail)?;
    }
    Ok(())
}

fn grid_json(chain: &GridChain) -> serde_json::Value {
    json!({
        "states": chain.values.len(),
        "natural_window": [chain.grid[0], chain.grid[chain.grid.len() - 1]],
        "h": chain.h,
        "left_wall": wall_text(chain.left_rule),
        "right_wall": wall_text(chain.right_rule),
        "left_artificial": chain.left_artificial,
        "right_artificial": chain.right_artificial,
    })
}

/// The origin-atom mass when the spec is the sticky Brownian model the
/// occupation oracles cover; anything else gets no silent reinterpretation.
fn sticky_rho(spec: &DiffusionSpec) -> Option<f64> {
    let natural = matches!(spec.scale, ScaleFunction::Natural);
    let lebesgue = spec.speed.density.formula() == Some(Formula::Const(1.0))
        && spec.speed.coords == SpeedCoords::StateSpace;
    match spec.speed.atoms.as_slice() {
        [atom] if natural && lebesgue && atom.at == 0.0 => Some(atom.mass),
        _ => None,
    }
}

fn plain_bm(spec: &DiffusionSpec) -> bool {
    matches!(spec.scale, ScaleFunction::Natural)
        && spec.speed.density.formula() == Some(Formula::Const(1.0))
        && spec.speed.coords == SpeedCoords::StateSpace
        && spec.speed.atoms.is_empty()
}

fn verify_cmd(args: &VerifyArgs, json: bool, out: &mut dyn Write) -> Result<i32> {
    let (report, params) = run_suite(args)?;
    if json {
        let mut envelope = json_envelope("verify", &params);
        envelope.insert(
            "report".into(),
            serde_json::to_value(&report).map_err(|e| Error::OutputFailure(e.to_string()))?,
        );
        write_json(out, envelope)?;
    } else {
        header(out, "verify", &params)?;
        render_report(out, &report)?;
    }
    Ok(if report.pass { exit_code::SUCCESS } else { exit_code::CHECK_FAILED })
}

fn render_report(out: &mut dyn Write, report: &StatReport) -> Result<()> {
    writeln!(out, "name: {}", report.name).map_err(wfail)?;
    writeln!(out, "estimate: {}", report.estimate).map_err(wfail)?;
    writeln!(out, "stderr: {}", report.stderr).map_err(wfail)?;
    writeln!(out, "target: {}", report.target).map_err(wfail)?;
    writeln!(out, "z_score: {}", report.z_score).map_err(wfail)?;
    writeln!(out, "n_paths: {}", report.n_paths).map_err(wfail)?;
    writeln!(out, "pass: {}", report.pass).map_err(wfail)?;
    for (key, value) in &report.metadata {
        writeln!(out, "metadata.{key}: {value}").map_err(wfail)?;
    }
    Ok(())
}

fn run_suite(args: &VerifyArgs) -> Result<(StatReport, Params)> {
    let common = |params: Params| {
        params
            .put("suite", args.suite.name())
            .put("h", args.h)
            .put("paths", args.paths)
            .put("seed", args.seed)
    };
    match args.suite {
        Suite::ExitProbability | Suite::ExitTime | Suite::Martingale => {
            let spec = required_spec(args)?;
            let x0 = start_point(args.x0, &spec)?;
            let (a, b) = match (args.a, args.b) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "the {} suite needs --a and --b",
                        args.suite.name()
                    )));
                }
            };
            let source = args.spec.as_deref().unwrap_or("-");
            let params = common(Params::default())
                .put("a", a)
                .put("b", b)
                .put("spec", source)
                .put("x0", x0);
            let report = match args.suite {
                Suite::ExitProbability => {
                    exit_probability_test(&spec, x0, a, b, args.h, args.paths, args.seed)?
                }
                Suite::ExitTime => {
                    exit_time_test(&spec, x0, a, b, args.h, args.paths, args.seed)?
                }
                _ => {
                    let params = params.put(
                        "checkpoints",
                        args.checkpoints
                            .iter()
                            .map(f64::to_string)
                            .collect::<Vec<_>>()
                            .join(","),
                    );
                    let report = martingale_test(
                        &spec,
                        x0,
                        a,
                        b,
                        &args.checkpoints,
                        args.h,
                        args.paths,
                        args.seed,
                    )?;
                    return Ok((report, params));
                }
            };
            Ok((report, params))
        }
        Suite::Occupation | Suite::Characteristics => {
            let spec = required_spec(args)?;
            let x0 = start_point(args.x0, &spec)?;
            let source = args.spec.as_deref().unwrap_or("-");
            let params = common(Params::default())
                .put("horizon", args.horizon)
                .put("spec", source)
                .put("x0", x0);
            let report = match (args.suite, sticky_rho(&spec)) {
                (Suite::Occupation, Some(rho)) => {
                    sticky_occupation_test(rho, x0, args.horizon, args.h, args.paths, args.seed)?
                }
                (Suite::Occupation, None) => {
                    return Err(Error::Unsupported(
                        "the occupation suite covers the sticky gallery spec: natural scale, \
                         Lebesgue speed and a single atom at the origin"
                            .into(),
                    ));
                }
                (_, Some(rho)) => sticky_characteristics_test(
                    rho,
                    x0,
                    args.horizon,
                    args.h,
                    args.paths,
                    args.seed,
                )?,
                (_, None) if plain_bm(&spec) => {
                    bm_characteristics_test(x0, args.horizon, args.h, args.paths, args.seed)?
                }
                (_, None) => {
                    return Err(Error::Unsupported(
                        "the characteristics suite covers the bm and sticky gallery specs".into(),
                    ));
                }
            };
            Ok((report, params))
        }
        Suite::AtomicOccupation => {
            if args.spec.is_some() {
                return Err(Error::InvalidParameter(
                    "the atomic-occupation suite builds its own spec; drop the SPEC argument"
                        .into(),
                ));
            }
            let params = common(Params::default())
                .put("atoms", args.atoms)
                .put("horizon", args.horizon);
            let report = feller_mckean_occupation_test(
                args.atoms,
                args.horizon,
                args.h,
                args.paths,
                args.seed,
            )?;
            Ok((report, params))
        }
    }
}

fn required_spec(args: &VerifyArgs) -> Result<DiffusionSpec> {
    let source = args.spec.as_deref().ok_or_else(|| {
        Error::InvalidParameter(format!("the {} suite needs a spec argument", args.suite.name()))
    })?;
    load_spec(source)
}

fn gallery_cmd(args: &GalleryArgs, json: bool, out: &mut dyn Write) -> Result<i32> {
    let (name, spec, params) = match &args.name {
        GallerySpec::Bm { x0 } => ("bm", bm_spec(*x0), Params::default().put("x0", *x0)),
        GallerySpec::Ou { x0 } => ("ou", ou_spec(*x0), Params::default().put("x0", *x0)),
        GallerySpec::Sticky { rho, x0 } => (
            "sticky",
            sticky_bm_spec(*rho, *x0)?,
            Params::default().put("rho", *rho).put("x0", *x0),
        ),
        GallerySpec::FellerMckean { atoms, seed, x0 } => (
            "feller-mckean",
            feller_mckean_spec(*atoms, *seed, *x0),
            Params::default().put("atoms", *atoms).put("seed", *seed).put("x0", *x0),
        ),
        GallerySpec::Cantor { levels, alpha, x0 } => {
            let set = fat_cantor_set(*levels, *alpha)?;
            (
                "cantor",
                cantor_diffusion_spec(&set, *x0)?,
                Params::default().put("alpha", *alpha).put("levels", *levels).put("x0", *x0),
            )
        }
    };
    let text = specfile::emit(&spec)?;
    if json {
        let mut envelope = json_envelope(&format!("gallery {name}"), &params);
        envelope.insert("label".into(), json!(spec.label));
        envelope.insert("spec".into(), json!(text));
        write_json(out, envelope)?;
    } else {
        header(out, &format!("gallery {name}"), &params)?;
        out.write_all(text.as_bytes()).map_err(wfail)?;
    }
    Ok(exit_code::SUCCESS)
}
