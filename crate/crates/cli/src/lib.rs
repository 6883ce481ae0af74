//! Argument parsing and command dispatch for the `slicekit` binary.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use slicekit::bodies::{body_volume, StarBody};
use slicekit::john::john_ellipsoid;
use slicekit::lab::{self, InequalityId, LabConfig, StabilityReport, SuiteConfig};
use slicekit::measures::{body_measure_estimate, BodyMeasure, Density, DEFAULT_RADIAL_NODES, MIN_RADIAL_NODES};
use slicekit::radon::{self, SphereFunction, TrigPolynomial};
use slicekit::scalars::{format_sig12, DimensionConstants};
use slicekit::sphere::{sphere_grid, Direction, GridSpec, MAX_PRODUCT_DIM, MIN_LEVEL};
use slicekit::Error;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_CAPABILITY: i32 = 4;

#[derive(Parser, Debug, Clone)]
#[command(name = "slicekit", version, about = "Numerical checks of slicing inequalities for star bodies")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Describe a body, or list the supported body types.
    Bodies(BodiesArgs),
    /// Check one of the inequalities on a body and density.
    Verify(VerifyArgs),
    /// Check the stability inequality for the intersection body of a source body.
    Stability(StabilityArgs),
    /// Run the Radon-transform self-checks.
    RadonSelftest(RadonArgs),
    /// Compare the quadrature measure of a body with rejection sampling.
    Oracle(OracleArgs),
    /// Run the eq4 check over the standard bodies, densities and dimensions as one CSV.
    Suite(SuiteArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeArg {
    Gauss,
    Mc,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ineq {
    Eq1,
    Eq2,
    Eq3,
    Eq4,
}

impl From<Ineq> for InequalityId {
    fn from(i: Ineq) -> Self {
        match i {
            Ineq::Eq1 => InequalityId::Eq1,
            Ineq::Eq2 => InequalityId::Eq2,
            Ineq::Eq3 => InequalityId::Eq3,
            Ineq::Eq4 => InequalityId::Eq4,
        }
    }
}

fn parse_level(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|e| format!("{e}"))?;
    if v < MIN_LEVEL {
        return Err(format!("level must be at least {MIN_LEVEL}"));
    }
    Ok(v)
}

fn parse_dim(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|e| format!("{e}"))?;
    if v < 2 {
        return Err("dimension must be at least 2".into());
    }
    Ok(v)
}

fn parse_radial(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|e| format!("{e}"))?;
    if v < MIN_RADIAL_NODES {
        return Err(format!("radial node count must be at least {MIN_RADIAL_NODES}"));
    }
    Ok(v)
}

fn parse_threads(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|e| format!("{e}"))?;
    if v == 0 {
        return Err("thread count must be positive".into());
    }
    Ok(v)
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Grid level (defaults depend on the dimension).
    #[arg(long, value_parser = parse_level)]
    pub level: Option<usize>,
    /// Sphere quadrature scheme (gauss up to n = 6, mc beyond by default).
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Gauss–Legendre nodes per ray.
    #[arg(long = "radial-nodes", value_parser = parse_radial)]
    pub radial_nodes: Option<usize>,
    /// Output file (standard output by default).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker thread cap; results do not depend on it.
    #[arg(long, value_parser = parse_threads)]
    pub threads: Option<usize>,
    /// Embed a timestamp in JSON reports.
    #[arg(long)]
    pub timestamps: bool,
}

#[derive(Args, Debug, Clone)]
pub struct BodiesArgs {
    /// Body: inline JSON, a path to a JSON file, or a standard name with --dim.
    #[arg(long)]
    pub body: Option<String>,
    #[arg(long, value_parser = parse_dim)]
    pub dim: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub ineq: Ineq,
    #[arg(long)]
    pub body: String,
    #[arg(long, default_value = "uniform")]
    pub density: String,
    #[arg(long, value_parser = parse_dim)]
    pub dim: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct StabilityArgs {
    /// Source body L; the check runs on K = IB(L).
    #[arg(long)]
    pub body: String,
    /// Density f >= 1 on K.
    #[arg(long, default_value = "1+0.2*bump")]
    pub density: String,
    #[arg(long, value_parser = parse_dim)]
    pub dim: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct RadonArgs {
    #[arg(long, value_parser = parse_dim, default_value_t = 3)]
    pub dim: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct OracleArgs {
    #[arg(long)]
    pub body: String,
    #[arg(long, default_value = "uniform")]
    pub density: String,
    #[arg(long, value_parser = parse_dim)]
    pub dim: Option<usize>,
    #[arg(long, default_value_t = 10_000_000)]
    pub samples: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct SuiteArgs {
    /// Dimension range, `lo-hi`.
    #[arg(long, default_value = "2-10", value_parser = parse_dims)]
    pub dims: (usize, usize),
    #[command(flatten)]
    pub common: Common,
}

fn parse_dims(s: &str) -> Result<(usize, usize), String> {
    let (lo, hi) = s.split_once('-').unwrap_or((s, s));
    let lo = parse_dim(lo.trim())?;
    let hi = parse_dim(hi.trim())?;
    if lo > hi {
        return Err(format!("empty dimension range {s}"));
    }
    Ok((lo, hi))
}

/// Parses `argv` (including the program name). Usage errors carry exit code 2.
pub fn parse_config<I, T>(argv: I) -> Result<RunConfig, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    RunConfig::try_parse_from(argv)
}

/// Failure of a run, with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Domain(_) => EXIT_USAGE,
            Error::Data(_) | Error::Precondition(_) => EXIT_DATA,
            Error::Capability(_) | Error::Solver { .. } => EXIT_CAPABILITY,
            Error::Certificate { .. } => EXIT_FAIL,
        };
        CliError { code, message: e.to_string() }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError { code: EXIT_DATA, message: format!("i/o error: {e}") }
    }
}

type CliResult<T> = Result<T, CliError>;

fn data_error(msg: impl Into<String>) -> CliError {
    CliError { code: EXIT_DATA, message: format!("data error: {}", msg.into()) }
}

/// Resolves `--body`: inline JSON, `@path` or a path to a JSON file, or a
/// standard body name together with `--dim`.
pub fn load_body(arg: &str, dim: Option<usize>, seed: u64) -> CliResult<StarBody> {
    let trimmed = arg.trim();
    let body = if trimmed.starts_with('{') {
        StarBody::from_json(trimmed)?
    } else if let Some(path) = trimmed.strip_prefix('@') {
        StarBody::from_json(&fs::read_to_string(path).map_err(|e| data_error(format!("cannot read {path}: {e}")))?)?
    } else if Path::new(trimmed).is_file() {
        StarBody::from_json(&fs::read_to_string(trimmed)?)?
    } else if lab::SUITE_BODIES.contains(&trimmed) {
        let n =
            dim.ok_or_else(|| CliError { code: EXIT_USAGE, message: format!("body name \"{trimmed}\" needs --dim") })?;
        lab::suite_body(trimmed, n, seed)?
    } else {
        return Err(data_error(format!(
            "--body \"{trimmed}\" is neither JSON, a readable file, nor one of {}",
            lab::SUITE_BODIES.join(", ")
        )));
    };
    if let Some(n) = dim {
        if n != body.dim() {
            return Err(data_error(format!("--dim {n} disagrees with the body dimension {}", body.dim())));
        }
    }
    Ok(body)
}

fn grid_spec(n: usize, common: &Common) -> GridSpec {
    let scheme = common.scheme.unwrap_or(if n <= MAX_PRODUCT_DIM { SchemeArg::Gauss } else { SchemeArg::Mc });
    let default = lab::default_spec(n, common.seed);
    match scheme {
        SchemeArg::Gauss => {
            GridSpec::gauss(common.level.unwrap_or(if n <= MAX_PRODUCT_DIM { default.level } else { MIN_LEVEL }))
        }
        SchemeArg::Mc => GridSpec::monte_carlo(common.level.unwrap_or(64), common.seed),
    }
}

fn lab_config(n: usize, common: &Common) -> LabConfig {
    lab::lab_config(n, grid_spec(n, common), common.radial_nodes.unwrap_or(DEFAULT_RADIAL_NODES))
}

fn timestamp(common: &Common) -> Option<String> {
    common.timestamps.then(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut value = serde_json::to_value(value).expect("reports serialize");
    if let Some(obj) = value.as_object_mut() {
        if obj.get("timestamp").is_some_and(|t| t.is_null()) {
            obj.remove("timestamp");
        }
    }
    let mut s = serde_json::to_string_pretty(&value).expect("reports serialize");
    s.push('\n');
    s
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> String {
    let escape = |f: &str| {
        if f.contains([',', '"', '\n']) {
            format!("\"{}\"", f.replace('"', "\"\""))
        } else {
            f.to_string()
        }
    };
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.iter().map(|f| escape(f)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

/// Result of a successful run: the exit status and the report text.
#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub output: String,
}

fn common_of(cmd: &Command) -> &Common {
    match cmd {
        Command::Bodies(a) => &a.common,
        Command::Verify(a) => &a.common,
        Command::Stability(a) => &a.common,
        Command::RadonSelftest(a) => &a.common,
        Command::Oracle(a) => &a.common,
        Command::Suite(a) => &a.common,
    }
}

/// Executes the command and writes the report to `--out` or `stdout`.
pub fn run(config: &RunConfig, stdout: &mut dyn Write) -> CliResult<i32> {
    let common = common_of(&config.command);
    if let Some(threads) = common.threads {
        // the global pool can only be set once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let outcome = execute(config)?;
    match &common.out {
        Some(path) => fs::write(path, &outcome.output)?,
        None => stdout.write_all(outcome.output.as_bytes())?,
    }
    Ok(outcome.code)
}

pub fn execute(config: &RunConfig) -> CliResult<Outcome> {
    match &config.command {
        Command::Bodies(a) => bodies(a),
        Command::Verify(a) => verify(a),
        Command::Stability(a) => stability(a),
        Command::RadonSelftest(a) => radon_selftest(a),
        Command::Oracle(a) => oracle(a),
        Command::Suite(a) => suite(a),
    }
}

fn pass_code(pass: bool) -> i32 {
    if pass {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

fn bodies(a: &BodiesArgs) -> CliResult<Outcome> {
    let Some(spec) = &a.body else {
        let listing = json!({
            "types": ["ball", "lp-ball", "cube", "cross-polytope", "ellipsoid", "h-polytope", "intersection-body", "scaled", "rotated"],
            "standardNames": lab::SUITE_BODIES,
            "densities": ["uniform", "zero", "const(c)", "gaussian", "gaussian(sigma)", "sq-norm", "bump", "bump(radius)", "a+b*name", "{\"type\":\"composite\",...}"],
        });
        return Ok(Outcome { code: EXIT_PASS, output: to_json(&listing) });
    };
    let body = load_body(spec, a.dim, a.common.seed)?;
    let n = body.dim();
    let grid = sphere_grid(n, grid_spec(n, &a.common))?;
    let john = if body.is_convex() {
        let j = john_ellipsoid(&body)?;
        json!({"matrix": j.ellipsoid.row_major(), "method": j.method, "shrink": j.shrink})
    } else {
        serde_json::Value::Null
    };
    let report = json!({
        "body": body.describe(),
        "label": body.label(),
        "dim": n,
        "convex": body.is_convex(),
        "intersectionBody": body.is_intersection_body(),
        "smooth": body.is_smooth(),
        "volume": body_volume(&body, &grid)?,
        "maxRadius": body.max_radius(),
        "john": john,
        "grid": lab::GridMeta::from(grid.spec()),
        "timestamp": timestamp(&a.common),
    });
    Ok(Outcome { code: EXIT_PASS, output: to_json(&report) })
}

fn verify(a: &VerifyArgs) -> CliResult<Outcome> {
    let body = load_body(&a.body, a.dim, a.common.seed)?;
    let density = Density::parse(&a.density)?;
    let cfg = lab_config(body.dim(), &a.common);
    let mut report = lab::verify(a.ineq.into(), &body, &density, &cfg)?;
    report.timestamp = timestamp(&a.common);
    let output = match a.common.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&report),
        Format::Csv => csv_text(lab::InequalityReport::csv_header(), &[report.csv_record()]),
    };
    Ok(Outcome { code: pass_code(report.pass), output })
}

fn stability_row(r: &StabilityReport) -> Vec<String> {
    let c = &r.chain_slacks;
    vec![
        r.n.to_string(),
        r.density.clone(),
        format_sig12(r.epsilon),
        format_sig12(r.lhs),
        format_sig12(r.rhs),
        format_sig12(r.slack),
        format_sig12(c.integrated),
        format_sig12(c.lower_bound),
        format_sig12(c.holder),
        r.pass.to_string(),
    ]
}

fn stability(a: &StabilityArgs) -> CliResult<Outcome> {
    let source = load_body(&a.body, a.dim, a.common.seed)?;
    let f = Density::parse(&a.density)?;
    let cfg = lab_config(source.dim(), &a.common);
    let mut report = lab::verify_stability(&source, &f, &cfg)?;
    report.timestamp = timestamp(&a.common);
    let output = match a.common.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&report),
        Format::Csv => csv_text(
            &["n", "density", "epsilon", "lhs13", "rhs13", "slack", "integrated", "lowerBound", "holder", "pass"],
            &[stability_row(&report)],
        ),
    };
    Ok(Outcome { code: pass_code(report.pass), output })
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    fn below(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, pass: value < threshold }
    }
}

/// Radon self-checks at dimension `n` and resolution `spec`.
pub fn radon_checks(n: usize, spec: GridSpec, seed: u64) -> slicekit::Result<Vec<Check>> {
    let mut checks = Vec::new();
    let one = SphereFunction::constant(n, 1.0)?;
    let area = DimensionConstants::new(n)?.subsphere_area();
    let mut stream_err: f64 = 0.0;
    for k in 0..100u64 {
        let mut rng = slicekit::rng::stream(seed, 0x52_0000 + k);
        let xi = Direction::normalized(slicekit::rng::unit_vector(&mut rng, n))?;
        stream_err = stream_err.max((radon::radon(&one, &xi, spec)? - area).abs());
    }
    checks.push(Check::below("radon-of-one-max-error", stream_err, 1e-8));

    let grid = sphere_grid(n, spec)?;
    let f = SphereFunction::coordinate_square(n, 0)?;
    let g = SphereFunction::coordinate_square(n, 1)?;
    checks.push(Check::below(
        "selfdual-coordinate-squares",
        radon::selfdual_sides(&f, &g, &grid, spec)?.relative(),
        1e-6,
    ));

    let p = TrigPolynomial::random(n, 4, seed).to_function(n, "trig-a")?;
    let q = TrigPolynomial::random(n, 4, seed.wrapping_add(1)).to_function(n, "trig-b")?;
    checks.push(Check::below("selfdual-trig-family", radon::selfdual_sides(&p, &q, &grid, spec)?.relative(), 1e-5));

    let ball = StarBody::unit_ball(n)?;
    checks.push(Check::below("ib-pairing-ball", radon::ib_pairing_sides(&ball, &one, &grid, spec)?.relative(), 1e-8));
    Ok(checks)
}

fn radon_selftest(a: &RadonArgs) -> CliResult<Outcome> {
    let n = a.dim;
    let spec = match a.common.scheme.unwrap_or(SchemeArg::Gauss) {
        SchemeArg::Gauss => GridSpec::gauss(a.common.level.unwrap_or(32)),
        SchemeArg::Mc => GridSpec::monte_carlo(a.common.level.unwrap_or(64), a.common.seed),
    };
    let checks = radon_checks(n, spec, a.common.seed)?;
    let pass = checks.iter().all(|c| c.pass);
    let output = match a.common.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&json!({
            "n": n,
            "grid": lab::GridMeta::from(spec),
            "checks": checks,
            "pass": pass,
            "timestamp": timestamp(&a.common),
        })),
        Format::Csv => csv_text(
            &["check", "value", "threshold", "pass"],
            &checks
                .iter()
                .map(|c| vec![c.name.clone(), format_sig12(c.value), format_sig12(c.threshold), c.pass.to_string()])
                .collect::<Vec<_>>(),
        ),
    };
    Ok(Outcome { code: pass_code(pass), output })
}

fn oracle(a: &OracleArgs) -> CliResult<Outcome> {
    let body = load_body(&a.body, a.dim, a.common.seed)?;
    let m = BodyMeasure::new(body.clone(), Density::parse(&a.density)?)?;
    let n = body.dim();
    let spec = grid_spec(n, &a.common);
    let radial = a.common.radial_nodes.unwrap_or(DEFAULT_RADIAL_NODES);
    let quad = body_measure_estimate(&m, sphere_grid(n, spec)?.as_ref(), radial)?;
    let est = lab::mc_oracle(&m, a.samples, a.common.seed)?;
    let sigma = (est.stderr.powi(2) + quad.stderr.powi(2)).sqrt();
    let z = if sigma > 0.0 { (quad.value - est.estimate) / sigma } else { 0.0 };
    let pass = (quad.value - est.estimate).abs() <= 3.0 * sigma;
    let output = match a.common.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&json!({
            "body": body.describe(),
            "density": m.density.label(),
            "estimate": est.estimate,
            "stderr": est.stderr,
            "samples": est.samples,
            "acceptance": est.acceptance,
            "quadrature": quad.value,
            "quadratureStderr": quad.stderr,
            "zScore": z,
            "grid": lab::GridMeta::from(spec),
            "pass": pass,
            "timestamp": timestamp(&a.common),
        })),
        Format::Csv => csv_text(
            &["body", "density", "estimate", "stderr", "quadrature", "z", "pass"],
            &[vec![
                body.label(),
                m.density.label(),
                format_sig12(est.estimate),
                format_sig12(est.stderr),
                format_sig12(quad.value),
                format_sig12(z),
                pass.to_string(),
            ]],
        ),
    };
    Ok(Outcome { code: pass_code(pass), output })
}

fn suite(a: &SuiteArgs) -> CliResult<Outcome> {
    let cfg = SuiteConfig {
        dims: a.dims,
        seed: a.common.seed,
        radial_nodes: a.common.radial_nodes.unwrap_or(SuiteConfig::default().radial_nodes),
    };
    let mut reports = lab::run_suite(&cfg)?;
    let pass = reports.iter().all(|r| r.pass);
    let output = match a.common.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            csv_text(lab::InequalityReport::csv_header(), &reports.iter().map(|r| r.csv_record()).collect::<Vec<_>>())
        }
        Format::Json => {
            let ts = timestamp(&a.common);
            reports.iter_mut().for_each(|r| r.timestamp = ts.clone());
            to_json(&reports)
        }
    };
    Ok(Outcome { code: pass_code(pass), output })
}
