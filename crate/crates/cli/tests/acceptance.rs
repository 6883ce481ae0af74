//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use slicekit::bodies::{Ellipsoid, Facet, HPolytope, StarBody};
use slicekit::john::{john_ellipsoid, sandwich, solve_polytope, JohnMethod, VOLUME_STEP_TOL};
use slicekit::lab::{self, StabilityReport, SuiteConfig};
use slicekit::measures::{body_measure, BodyMeasure, Density};
use slicekit::radon::{self, SphereFunction, TrigPolynomial};
use slicekit::scalars::{log_unit_ball_volume, slicing_constant, sphere_area, DimensionConstants};
use slicekit::sphere::{sphere_grid, Direction, GridSpec};

type Outcome = Result<Vec<String>, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e(err: slicekit::Error) -> String {
    err.to_string()
}

/// Independent ball-volume oracle: the two-step recursion `|B_n| = 2π/n |B_{n-2}|`.
fn ball_volume_recursive(n: usize) -> f64 {
    let (mut v, start) = if n.is_multiple_of(2) { (1.0, 2) } else { (2.0, 3) };
    let mut k = start;
    while k <= n {
        v *= 2.0 * PI / k as f64;
        k += 2;
    }
    v
}

fn criterion_1() -> Outcome {
    for n in 2..=10_000 {
        let ln_c = slicekit::scalars::log_slicing_constant(n).map_err(e)?;
        ensure(ln_c < 0.0, || format!("ln c_{n} = {ln_c} is not negative"))?;
    }
    let c2 = slicing_constant(2).map_err(e)?;
    ensure((c2 - PI.sqrt() / 2.0).abs() < 1e-14, || format!("c_2 = {c2}"))?;
    let c3_oracle = (4.0 * PI / 3.0).powf(2.0 / 3.0) / PI;
    let c3 = slicing_constant(3).map_err(e)?;
    ensure((c3 - c3_oracle).abs() < 1e-10, || format!("c_3 = {c3}, oracle {c3_oracle}"))?;
    let mut worst: f64 = 0.0;
    for n in 2..=200 {
        let bn = log_unit_ball_volume(n).map_err(e)?.exp();
        let rec = ball_volume_recursive(n);
        worst = worst.max((bn - rec).abs() / rec);
        let area = sphere_area(n).map_err(e)?;
        worst = worst.max((area - n as f64 * rec).abs() / area);
        let sub = DimensionConstants::new(n).map_err(e)?.subsphere_area();
        let sub_oracle = (n - 1) as f64 * ball_volume_recursive(n - 1);
        worst = worst.max((sub - sub_oracle).abs() / sub_oracle);
    }
    ensure(worst < 1e-12, || format!("sphere/ball identities off by {worst:e}"))?;
    Ok(vec![format!("c_2={c2:.15} c_3={c3:.15} worst identity error {worst:.1e}")])
}

fn criterion_2() -> Outcome {
    let mut notes = Vec::new();
    for n in 3..=5 {
        let cfg = lab::suite_lab_config(n, 1, 64);
        let ball = StarBody::unit_ball(n).map_err(e)?;
        let r = lab::verify_eq2(&ball, &cfg).map_err(e)?;
        ensure((r.ratio - 1.0).abs() <= 1e-6, || format!("n={n}: ratio {}", r.ratio))?;
        notes.push(format!("n={n} ratio={:.12}", r.ratio));
    }
    Ok(notes)
}

fn criterion_3() -> Outcome {
    let spec = GridSpec::gauss(32);
    let mut notes = Vec::new();
    for n in [3, 4] {
        let grid = sphere_grid(n, spec).map_err(e)?;
        let mut worst: f64 = 0.0;
        for seed in 0..3u64 {
            let f = TrigPolynomial::random(n, 4, 2 * seed + 11).to_function(n, "f").map_err(e)?;
            let g = TrigPolynomial::random(n, 4, 2 * seed + 12).to_function(n, "g").map_err(e)?;
            worst = worst.max(radon::selfdual_sides(&f, &g, &grid, spec).map_err(e)?.relative());
        }
        ensure(worst < 1e-5, || format!("n={n}: trig self-duality residual {worst:e}"))?;

        let one = SphereFunction::constant(n, 1.0).map_err(e)?;
        let area = DimensionConstants::new(n).map_err(e)?.subsphere_area();
        let mut r1: f64 = 0.0;
        for k in 0..100u64 {
            let mut rng = slicekit::rng::stream(7, k);
            let xi = Direction::normalized(slicekit::rng::unit_vector(&mut rng, n)).map_err(e)?;
            r1 = r1.max((radon::radon(&one, &xi, spec).map_err(e)? - area).abs());
        }
        ensure(r1 < 1e-8, || format!("n={n}: R1 off by {r1:e}"))?;
        notes.push(format!("n={n} selfdual {worst:.1e} R1 {r1:.1e}"));
    }
    Ok(notes)
}

fn criterion_4() -> Outcome {
    let n = 3;
    let spec = GridSpec::gauss(32);
    let grid = sphere_grid(n, spec).map_err(e)?;
    let bodies = [
        ("ball", StarBody::unit_ball(n).map_err(e)?),
        ("ellipsoid", StarBody::ellipsoid(Ellipsoid::from_semi_axes(&[1.0, 0.7, 1.4]).map_err(e)?).map_err(e)?),
        ("lp-ball(4)", StarBody::lp_ball(n, 4.0).map_err(e)?),
    ];
    let functions = [
        SphereFunction::constant(n, 1.0).map_err(e)?,
        SphereFunction::coordinate_square(n, 0).map_err(e)?,
        TrigPolynomial::random(n, 4, 5).to_function(n, "trig").map_err(e)?,
    ];
    let mut worst: (f64, String) = (0.0, String::new());
    for (name, l) in &bodies {
        for f in &functions {
            let rel = radon::ib_pairing_sides(l, f, &grid, spec).map_err(e)?.relative();
            ensure(rel < 1e-4, || format!("{name} with {}: residual {rel:e}", f.label()))?;
            if rel > worst.0 {
                worst = (rel, format!("{name}/{}", f.label()));
            }
        }
    }
    Ok(vec![format!("worst relative residual {:.1e} ({})", worst.0, worst.1)])
}

fn slacks(r: &StabilityReport) -> [f64; 4] {
    let c = &r.chain_slacks;
    [r.slack, c.integrated, c.lower_bound, c.holder]
}

/// Slacks at or below ten times the slack tolerance count as zero when
/// comparing levels.
const DRIFT_FLOOR: f64 = 1e-4;

fn criterion_5() -> Outcome {
    let n = 3;
    let source = lab::unit_ib_source(n).map_err(e)?;
    let cfg = lab::lab_config(n, GridSpec::gauss(32), 64);
    let r = lab::verify_stability(&source, &Density::constant(1.1).map_err(e)?, &cfg).map_err(e)?;
    let expected = 0.05 * 4.0 * PI / 3.0;
    ensure((r.epsilon - 0.1 * PI).abs() < 1e-6, || format!("ball: epsilon {} vs {}", r.epsilon, 0.1 * PI))?;
    ensure((r.slack - expected).abs() < 1e-6, || format!("ball: slack {} vs {expected}", r.slack))?;
    ensure(r.pass, || "ball: report does not pass".into())?;

    let l4 = StarBody::lp_ball(n, 4.0).map_err(e)?;
    let f = Density::parse("1+0.2*bump").map_err(e)?;
    let mut runs = Vec::new();
    for level in [16, 32] {
        let cfg = lab::lab_config(n, GridSpec::gauss(level), 64);
        let r = lab::verify_stability(&l4, &f, &cfg).map_err(e)?;
        let s = slacks(&r);
        ensure(s.iter().all(|&v| v >= -1e-5), || format!("IB(l4) level {level}: slacks {s:?}"))?;
        runs.push(s);
    }
    let drift = runs[0]
        .iter()
        .zip(&runs[1])
        .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(DRIFT_FLOOR))
        .fold(0.0, f64::max);
    ensure(drift < 0.1, || format!("IB(l4): slack drift {drift:.3} between levels ({:?} vs {:?})", runs[0], runs[1]))?;
    Ok(vec![
        format!("ball slack {:.9} (expected {expected:.9})", r.slack),
        format!("IB(l4) slacks level 16 {:?}", runs[0]),
        format!("IB(l4) slacks level 32 {:?}, drift {drift:.2e}", runs[1]),
    ])
}

fn criterion_6() -> Outcome {
    let reports = lab::run_suite(&SuiteConfig::default()).map_err(e)?;
    let failed: Vec<String> = reports
        .iter()
        .filter(|r| !r.pass)
        .map(|r| format!("n={} {} {} slack {:e} tol {:e}", r.n, r.body_label, r.density, r.slack, r.num_tol))
        .collect();
    ensure(failed.is_empty(), || format!("{} failing rows: {}", failed.len(), failed.join("; ")))?;
    let ball = reports
        .iter()
        .find(|r| r.n == 3 && r.body_label == "ball" && r.density == "uniform")
        .ok_or("no ball/uniform n=3 row")?;
    let lhs = 4.0 * PI / 3.0;
    ensure((ball.lhs - lhs).abs() <= 1e-6, || format!("ball lhs {}", ball.lhs))?;
    ensure((ball.rhs - 10.883).abs() <= 1e-2, || format!("ball rhs {}", ball.rhs))?;
    let max_ratio = reports.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(vec![
        format!("{} rows pass, max ratio {max_ratio:.3}", reports.len()),
        format!("ball/uniform n=3 lhs {:.9} rhs {:.6}", ball.lhs, ball.rhs),
    ])
}

fn criterion_7() -> Outcome {
    let mut notes = Vec::new();
    for n in 2..=6 {
        let cube = StarBody::cube(n, 1.0).map_err(e)?;
        let analytic = john_ellipsoid(&cube).map_err(e)?;
        ensure(analytic.method == JohnMethod::Analytic, || "cube not on the analytic path".into())?;
        let facets: Vec<Facet> =
            (0..n).map(|i| Facet { normal: Direction::axis(n, i).into_inner(), offset: 1.0 }).collect();
        let solved = solve_polytope(&HPolytope::symmetric(n, &facets).map_err(e)?).map_err(e)?;
        let a = analytic.ellipsoid.row_major();
        let s = solved.ellipsoid.row_major();
        let diff = a.iter().zip(&s).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let identity = a.iter().enumerate().map(|(k, x)| (x - f64::from(k % (n + 1) == 0)).abs()).fold(0.0, f64::max);
        ensure(diff <= 1e-6 && identity <= 1e-6, || format!("n={n}: solver {diff:e}, analytic {identity:e}"))?;
        notes.push(format!("n={n} {diff:.1e}"));
    }
    // the same certificates the suite computes: every body on its suite grid
    let suite = SuiteConfig::default();
    let mut checked = 0;
    let mut tightest = f64::INFINITY;
    for n in suite.dims.0..=suite.dims.1 {
        let grid = sphere_grid(n, lab::default_spec(n, suite.seed)).map_err(e)?;
        for name in lab::SUITE_BODIES {
            let l = lab::suite_body(name, n, suite.seed).map_err(e)?;
            let c = sandwich(&l, &grid).map_err(e)?;
            let lower = c.lower_bound(n);
            let ok = c.min_ratio >= lower - c.tolerance && c.max_ratio <= 1.0 + c.tolerance;
            ensure(ok, || format!("n={n} {name}: ratios [{}, {}], bound {lower}", c.min_ratio, c.max_ratio))?;
            let root = (n as f64).sqrt();
            ensure(c.volume_ratio_root <= root + VOLUME_STEP_TOL, || {
                format!("n={n} {name}: volume ratio root {}", c.volume_ratio_root)
            })?;
            tightest = tightest.min(root - c.volume_ratio_root);
            checked += 1;
        }
    }
    Ok(vec![
        format!("cube solver vs analytic: {}", notes.join(", ")),
        format!("{checked} certificates valid, smallest sqrt(n) - volume root {tightest:.2e}"),
    ])
}

struct OracleCase {
    body: StarBody,
    density: &'static str,
    spec: GridSpec,
}

fn oracle_cases() -> Result<Vec<OracleCase>, String> {
    let case = |body: StarBody, density, level| OracleCase { body, density, spec: GridSpec::gauss(level) };
    // kinked bodies converge slowly, so they get fine grids and stay in low dimension
    Ok(vec![
        case(StarBody::unit_ball(2).map_err(e)?, "gaussian", 64),
        case(StarBody::cube(2, 0.5).map_err(e)?, "sq-norm", 4096),
        case(StarBody::cross_polytope(2).map_err(e)?, "bump", 4096),
        case(lab::random_polytope(2, 1).map_err(e)?, "uniform", 4096),
        case(StarBody::unit_ball(3).map_err(e)?, "bump", 64),
        case(StarBody::lp_ball(3, 3.0).map_err(e)?, "gaussian", 128),
        // a uniform cube fills its sampling box, which leaves the oracle with zero variance
        case(StarBody::cube(3, 0.5).map_err(e)?, "gaussian", 512),
        case(StarBody::ellipsoid(Ellipsoid::from_semi_axes(&[1.0, 0.6, 1.3]).map_err(e)?).map_err(e)?, "sq-norm", 64),
        case(StarBody::lp_ball(3, 1.5).map_err(e)?, "gaussian", 512),
        case(StarBody::unit_ball(4).map_err(e)?, "sq-norm", 16),
        case(StarBody::lp_ball(4, 3.0).map_err(e)?, "uniform", 48),
        case(StarBody::unit_ball(5).map_err(e)?, "gaussian", 8),
    ])
}

fn criterion_8() -> Outcome {
    let mut notes = Vec::new();
    for (k, c) in oracle_cases()?.into_iter().enumerate() {
        let n = c.body.dim();
        let label = format!("n={n} {}/{}", c.body.label(), c.density);
        let m = BodyMeasure::new(c.body, Density::parse(c.density).map_err(e)?).map_err(e)?;
        let quad = body_measure(&m, &*sphere_grid(n, c.spec).map_err(e)?, 64).map_err(e)?;
        let mc = lab::mc_oracle(&m, 10_000_000, 100 + k as u64).map_err(e)?;
        let z = (quad - mc.estimate) / mc.stderr;
        ensure(z.abs() <= 3.0, || {
            format!("{label}: quadrature {quad} vs {} ± {} (z = {z:.2})", mc.estimate, mc.stderr)
        })?;
        notes.push(format!("{label} z={z:+.2}"));
    }
    Ok(notes)
}

fn criterion_9() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_slicekit");
    let run = || -> Result<Vec<u8>, String> {
        let out = Command::new(bin).arg("suite").output().map_err(|err| format!("cannot run {bin}: {err}"))?;
        ensure(out.status.success(), || {
            format!("suite exited with {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr))
        })?;
        Ok(out.stdout)
    };
    let first = run()?;
    let second = run()?;
    ensure(!first.is_empty(), || "suite printed nothing".into())?;
    ensure(first == second, || "the two suite runs differ".into())?;
    let rows = first.iter().filter(|&&b| b == b'\n').count() - 1;
    Ok(vec![format!("{rows} rows, {} bytes, identical", first.len())])
}

fn report(id: usize, title: &str, budget: Duration, elapsed: Duration, outcome: Outcome) -> bool {
    let in_budget = elapsed <= budget;
    let pass = outcome.is_ok() && in_budget;
    println!(
        "{} criterion {id}: {title} ({:.1} s, budget {} s)",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    match outcome {
        Ok(notes) => notes.iter().for_each(|n| println!("    {n}")),
        Err(msg) => println!("    {msg}"),
    }
    if !in_budget {
        println!("    over the runtime budget");
    }
    pass
}

fn timed(f: impl FnOnce() -> Outcome) -> (Duration, Outcome) {
    let t = Instant::now();
    let out = f();
    (t.elapsed(), out)
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let mut ok = true;

    let (t, o) = timed(criterion_1);
    ok &= report(1, "constants", secs(1), t, o);
    let (t, o) = timed(criterion_2);
    ok &= report(2, "eq2 equality on the ball", secs(30), t, o);
    let (t, o) = timed(criterion_3);
    ok &= report(3, "Radon self-duality and R1", secs(120), t, o);
    let (t, o) = timed(criterion_4);
    ok &= report(4, "intersection-body pairing", secs(120), t, o);
    let (t, o) = timed(criterion_5);
    ok &= report(5, "stability chain", secs(180), t, o);

    let (t, o) = timed(criterion_6);
    ok &= report(6, "eq4 suite", secs(1200), t, o);
    let (t, o) = timed(criterion_7);
    ok &= report(7, "John sandwich", secs(120), t, o);

    let (t, o) = timed(criterion_8);
    ok &= report(8, "rejection-sampling oracle", secs(600), t, o);
    let (t, o) = timed(criterion_9);
    ok &= report(9, "byte-identical suite CSV", secs(2400), t, o);

    println!("acceptance: {}", if ok { "all criteria pass" } else { "FAILED" });
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
