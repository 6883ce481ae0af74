//! Verifiers for the slicing inequalities, the stability chain for
//! intersection bodies, the Monte Carlo oracle and the standard suite.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bodies::{intersection_body_of, Facet, HPolytope, StarBody};
use crate::error::{Error, Result};
use crate::john::{sandwich, SandwichCertificate};
use crate::measures::{
    body_measure_estimate, max_section, BodyMeasure, Density, SectionSearch, SectionValue, Smoothness,
    DEFAULT_RADIAL_NODES,
};
use crate::scalars::{format_sig12, DimensionConstants};
use crate::sphere::{orthonormal_frame, sphere_grid, Direction, Estimate, GridSpec, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum InequalityId {
    /// `|K|^{(n-1)/n} <= √n (n/(n-1)) c_n max_ξ |K ∩ ξ^⊥|` for convex `K`.
    #[serde(rename = "eq1-sqrtn")]
    Eq1,
    /// `|K|^{(n-1)/n} <= c_n max_ξ |K ∩ ξ^⊥|` for intersection bodies.
    #[serde(rename = "eq2-ib-volume")]
    Eq2,
    /// `μ(K) <= (n/(n-1)) c_n max_ξ μ(K ∩ ξ^⊥) |K|^{1/n}` for intersection bodies.
    #[serde(rename = "eq3-ib-measure")]
    Eq3,
    /// `μ(L) <= √n (n/(n-1)) c_n max_ξ μ(L ∩ ξ^⊥) |L|^{1/n}` for convex `L`.
    #[serde(rename = "eq4-thm1")]
    Eq4,
}

impl InequalityId {
    pub const ALL: [InequalityId; 4] = [InequalityId::Eq1, InequalityId::Eq2, InequalityId::Eq3, InequalityId::Eq4];

    pub fn name(self) -> &'static str {
        match self {
            InequalityId::Eq1 => "eq1-sqrtn",
            InequalityId::Eq2 => "eq2-ib-volume",
            InequalityId::Eq3 => "eq3-ib-measure",
            InequalityId::Eq4 => "eq4-thm1",
        }
    }
}

impl fmt::Display for InequalityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InequalityId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eq1" | "eq1-sqrtn" => Ok(InequalityId::Eq1),
            "eq2" | "eq2-ib-volume" => Ok(InequalityId::Eq2),
            "eq3" | "eq3-ib-measure" => Ok(InequalityId::Eq3),
            "eq4" | "eq4-thm1" => Ok(InequalityId::Eq4),
            _ => Err(Error::domain(format!("unknown inequality \"{s}\" (expected eq1, eq2, eq3 or eq4)"))),
        }
    }
}

/// Resolution settings shared by the verifiers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LabConfig {
    /// Full-sphere grid for volumes and measures.
    pub spec: GridSpec,
    pub radial_nodes: usize,
    pub search: SectionSearch,
}

impl LabConfig {
    pub fn new(n: usize, spec: GridSpec) -> Self {
        Self { spec, radial_nodes: DEFAULT_RADIAL_NODES, search: SectionSearch::new(n, spec) }
    }

    pub fn with_radial_nodes(mut self, radial_nodes: usize) -> Self {
        self.radial_nodes = radial_nodes;
        self.search.radial_nodes = radial_nodes;
        self
    }

    /// Same settings at twice the grid level.
    pub fn doubled(self) -> Self {
        let spec = self.spec.doubled();
        let mut search = self.search;
        search.spec = search.spec.doubled();
        Self { spec, search, ..self }
    }
}

/// Suite defaults: product grids up to `n = 6`, Monte Carlo beyond.
pub fn default_spec(n: usize, seed: u64) -> GridSpec {
    match n {
        2 => GridSpec::gauss(64),
        3 => GridSpec::gauss(32),
        4 => GridSpec::gauss(16),
        5 => GridSpec::gauss(8),
        6 => GridSpec::gauss(6),
        _ => GridSpec::monte_carlo(64, seed),
    }
}

/// Quadrature tolerance: `1e-6 (1 + |rhs|)` for smooth bodies and densities
/// on product grids at level ≥ 32, `1e-3 (1 + |rhs|)` otherwise, widened to
/// `3σ` on Monte Carlo grids.
pub fn num_tol(rhs: f64, smooth: bool, spec: GridSpec, sigma: f64) -> f64 {
    let fine = smooth && spec.scheme == Scheme::ProductGauss && spec.level >= 32;
    let base = if fine { 1e-6 } else { 1e-3 } * (1.0 + rhs.abs());
    if spec.scheme == Scheme::MonteCarlo {
        base.max(3.0 * sigma)
    } else {
        base
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridMeta {
    pub scheme: &'static str,
    pub level: usize,
    pub seed: u64,
}

impl From<GridSpec> for GridMeta {
    fn from(s: GridSpec) -> Self {
        Self { scheme: s.scheme.short_name(), level: s.level, seed: s.seed }
    }
}

/// Diagnostics of the convex-body pipeline: sandwich, composite density and
/// the intermediate bound through `|K|^{1/n}`.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Thm1Chain {
    pub sandwich: SandwichCertificate,
    /// `∫_K f − |K|` for `f = χ_K + gχ_L`; equals `μ(L)`.
    pub composite_excess: f64,
    pub composite_residual: f64,
    /// `(n/(n-1)) c_n |K|^{1/n} max_ξ μ(L ∩ ξ^⊥)`, between lhs and rhs.
    pub intermediate: f64,
    pub intermediate_holds: bool,
    /// `ratio / √n`-free ratio `lhs/intermediate`, tightness telemetry.
    pub tightness: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct InequalityReport {
    pub inequality_id: InequalityId,
    pub n: usize,
    pub body: serde_json::Value,
    pub density: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub ratio: f64,
    pub witness: Vec<f64>,
    pub grid: GridMeta,
    pub radial_nodes: usize,
    pub num_tol: f64,
    /// Combined standard error of both sides (zero on product grids).
    pub sigma: f64,
    /// `|slack| <= numTol`.
    pub equality: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain: Option<Thm1Chain>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
    #[serde(skip)]
    pub body_label: String,
}

impl InequalityReport {
    fn new(id: InequalityId, ev: &Evaluation, lhs: Estimate, rhs: Estimate, cfg: &LabConfig) -> Self {
        let slack = rhs.value - lhs.value;
        let ratio = if rhs.value == 0.0 && lhs.value == 0.0 { 0.0 } else { lhs.value / rhs.value };
        let sigma = (lhs.stderr.powi(2) + rhs.stderr.powi(2)).sqrt();
        let tol = num_tol(rhs.value, ev.smooth, cfg.spec, sigma);
        Self {
            inequality_id: id,
            n: ev.measure.body.dim(),
            body: ev.measure.body.describe(),
            density: ev.measure.density.label(),
            lhs: lhs.value,
            rhs: rhs.value,
            slack,
            ratio,
            witness: ev.max_section.direction.to_vec(),
            grid: cfg.spec.into(),
            radial_nodes: cfg.radial_nodes,
            num_tol: tol,
            sigma,
            equality: slack.abs() <= tol,
            chain: None,
            pass: slack >= -tol,
            timestamp: None,
            body_label: ev.measure.body.label(),
        }
    }

    pub fn csv_header() -> &'static [&'static str] {
        &["id", "n", "body", "density", "lhs", "rhs", "slack", "ratio", "pass"]
    }

    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.inequality_id.name().to_string(),
            self.n.to_string(),
            self.body_label.clone(),
            self.density.clone(),
            format_sig12(self.lhs),
            format_sig12(self.rhs),
            format_sig12(self.slack),
            format_sig12(self.ratio),
            self.pass.to_string(),
        ]
    }
}

/// Writes reports as CSV with the fixed column order.
pub fn write_csv<W: std::io::Write>(out: W, reports: &[InequalityReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::data(format!("writing CSV: {e}"));
    w.write_record(InequalityReport::csv_header()).map_err(io)?;
    for r in reports {
        w.write_record(r.csv_record()).map_err(io)?;
    }
    w.flush().map_err(|e| Error::data(format!("writing CSV: {e}")))?;
    Ok(())
}

/// Quantities shared by all verifiers on one body and density, computed once.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub measure: BodyMeasure,
    pub volume: Estimate,
    pub mass: Estimate,
    pub max_section: SectionValue,
    pub constants: DimensionConstants,
    pub smooth: bool,
}

pub fn evaluate(m: &BodyMeasure, cfg: &LabConfig) -> Result<Evaluation> {
    let n = m.dim();
    let grid = sphere_grid(n, cfg.spec)?;
    let volume = body_measure_estimate(&BodyMeasure::volume(m.body.clone()), &grid, cfg.radial_nodes)?;
    let mass = if matches!(m.density, Density::Constant(c) if c == 1.0) {
        volume
    } else {
        body_measure_estimate(m, &grid, cfg.radial_nodes)?
    };
    let max_section = if m.density.is_zero() {
        SectionValue { direction: Direction::axis(n, 0), value: 0.0, stderr: 0.0 }
    } else {
        max_section(m, &cfg.search)?
    };
    Ok(Evaluation {
        measure: m.clone(),
        volume,
        mass,
        max_section,
        constants: DimensionConstants::new(n)?,
        smooth: m.body.is_smooth() && m.density.smoothness() == Smoothness::Smooth,
    })
}

fn scaled(e: Estimate, c: f64) -> Estimate {
    Estimate { value: c * e.value, stderr: c.abs() * e.stderr }
}

/// `|K|^{1/n}` with a first-order error estimate.
fn volume_root(ev: &Evaluation) -> Estimate {
    let n = ev.measure.dim() as f64;
    let value = ev.volume.value.powf(1.0 / n);
    Estimate { value, stderr: value * ev.volume.stderr / (n * ev.volume.value) }
}

fn product(a: Estimate, b: Estimate) -> Estimate {
    let value = a.value * b.value;
    let rel = ((a.stderr / a.value).powi(2) + (b.stderr / b.value).powi(2)).sqrt();
    Estimate { value, stderr: if value == 0.0 { 0.0 } else { value.abs() * rel } }
}

fn section_estimate(ev: &Evaluation) -> Estimate {
    Estimate { value: ev.max_section.value, stderr: ev.max_section.stderr }
}

fn require_uniform(ev: &Evaluation, id: InequalityId) -> Result<()> {
    match ev.measure.density {
        Density::Constant(1.0) => Ok(()),
        _ => Err(Error::domain(format!("{id} compares volumes; the density must be uniform"))),
    }
}

fn volume_power(ev: &Evaluation) -> Estimate {
    let n = ev.measure.dim() as f64;
    let p = (n - 1.0) / n;
    let value = ev.volume.value.powf(p);
    Estimate { value, stderr: value * p * ev.volume.stderr / ev.volume.value }
}

/// Reports from a shared evaluation.
pub fn report(id: InequalityId, ev: &Evaluation, cfg: &LabConfig) -> Result<InequalityReport> {
    let n = ev.measure.dim() as f64;
    let c_n = ev.constants.slicing_const;
    let boost = n / (n - 1.0);
    match id {
        InequalityId::Eq1 => {
            require_uniform(ev, id)?;
            let rhs = scaled(section_estimate(ev), n.sqrt() * boost * c_n);
            Ok(InequalityReport::new(id, ev, volume_power(ev), rhs, cfg))
        }
        InequalityId::Eq2 => {
            require_uniform(ev, id)?;
            let rhs = scaled(section_estimate(ev), c_n);
            Ok(InequalityReport::new(id, ev, volume_power(ev), rhs, cfg))
        }
        InequalityId::Eq3 => {
            let rhs = scaled(product(section_estimate(ev), volume_root(ev)), boost * c_n);
            Ok(InequalityReport::new(id, ev, ev.mass, rhs, cfg))
        }
        InequalityId::Eq4 => {
            let rhs = scaled(product(section_estimate(ev), volume_root(ev)), n.sqrt() * boost * c_n);
            Ok(InequalityReport::new(id, ev, ev.mass, rhs, cfg))
        }
    }
}

fn require_intersection_body(k: &StarBody, id: InequalityId) -> Result<()> {
    if !k.is_intersection_body() {
        return Err(Error::capability(format!(
            "{id} needs an intersection body (ball, ellipsoid or IB of a star body); {} is not one by construction",
            k.label()
        )));
    }
    Ok(())
}

fn require_convex(l: &StarBody, id: InequalityId) -> Result<()> {
    if !l.is_convex() {
        return Err(Error::capability(format!("{id} needs a convex body; {} is not convex", l.label())));
    }
    Ok(())
}

pub fn verify_eq1(k: &StarBody, cfg: &LabConfig) -> Result<InequalityReport> {
    if !k.is_convex() && !k.is_intersection_body() {
        return Err(Error::capability(format!("eq1-sqrtn needs a convex body; {} is not convex", k.label())));
    }
    report(InequalityId::Eq1, &evaluate(&BodyMeasure::volume(k.clone()), cfg)?, cfg)
}

pub fn verify_eq2(k: &StarBody, cfg: &LabConfig) -> Result<InequalityReport> {
    require_intersection_body(k, InequalityId::Eq2)?;
    report(InequalityId::Eq2, &evaluate(&BodyMeasure::volume(k.clone()), cfg)?, cfg)
}

pub fn verify_eq3(k: &StarBody, density: &Density, cfg: &LabConfig) -> Result<InequalityReport> {
    require_intersection_body(k, InequalityId::Eq3)?;
    report(InequalityId::Eq3, &evaluate(&BodyMeasure::new(k.clone(), density.clone())?, cfg)?, cfg)
}

pub fn verify_thm1(l: &StarBody, density: &Density, cfg: &LabConfig) -> Result<InequalityReport> {
    require_convex(l, InequalityId::Eq4)?;
    let ev = evaluate(&BodyMeasure::new(l.clone(), density.clone())?, cfg)?;
    thm1_from(&ev, cfg)
}

/// The eq4 report plus its pipeline diagnostics from an evaluation.
pub fn thm1_from(ev: &Evaluation, cfg: &LabConfig) -> Result<InequalityReport> {
    let l = &ev.measure.body;
    let n = l.dim();
    let grid = sphere_grid(n, cfg.spec)?;
    let cert = sandwich(l, &grid)?;
    let k = StarBody::ellipsoid(cert.outer_ellipsoid.clone())?;

    // ∫_K (χ_K + gχ_L) − |K| = μ(L), with the ray split at min(ρ_L, ρ_K)
    let composite = Density::composite(k.clone(), l.clone(), ev.measure.density.clone())?;
    let k_volume = cert.outer_ellipsoid.volume();
    let excess =
        body_measure_estimate(&BodyMeasure::new(k.clone(), composite)?, &grid, cfg.radial_nodes)?.value - k_volume;

    let nf = n as f64;
    let intermediate = nf / (nf - 1.0) * ev.constants.slicing_const * k_volume.powf(1.0 / nf) * ev.max_section.value;
    let mut rep = report(InequalityId::Eq4, ev, cfg)?;
    let chain = Thm1Chain {
        composite_excess: excess,
        composite_residual: (excess - ev.mass.value).abs(),
        intermediate,
        intermediate_holds: ev.mass.value <= intermediate + rep.num_tol && intermediate <= rep.rhs + rep.num_tol,
        tightness: if intermediate > 0.0 { ev.mass.value / intermediate } else { 0.0 },
        sandwich: cert,
    };
    rep.chain = Some(chain);
    Ok(rep)
}

/// Dispatches on the inequality identifier.
pub fn verify(id: InequalityId, body: &StarBody, density: &Density, cfg: &LabConfig) -> Result<InequalityReport> {
    match id {
        InequalityId::Eq1 => {
            require_uniform_density(density, id)?;
            verify_eq1(body, cfg)
        }
        InequalityId::Eq2 => {
            require_uniform_density(density, id)?;
            verify_eq2(body, cfg)
        }
        InequalityId::Eq3 => verify_eq3(body, density, cfg),
        InequalityId::Eq4 => verify_thm1(body, density, cfg),
    }
}

fn require_uniform_density(d: &Density, id: InequalityId) -> Result<()> {
    match d {
        Density::Constant(c) if *c == 1.0 => Ok(()),
        _ => Err(Error::domain(format!("{id} compares volumes; use --density uniform"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ChainSlacks {
    /// Integrated condition: right side minus left side after pairing with `μ`.
    pub integrated: f64,
    /// Left side of the integrated condition minus `∫_K f + |K|/(n-1)`.
    pub lower_bound: f64,
    /// `(n/(n-1)) c_n |K|^{1/n} ε − ε ∫dμ`.
    pub holder: f64,
    /// Hölder's inequality itself: `|S^{n-1}|^{(n-1)/n} (n|K|)^{1/n} − ∫ ρ_K`.
    pub holder_raw: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StabilityReport {
    pub n: usize,
    pub source: serde_json::Value,
    pub density: String,
    pub epsilon: f64,
    /// The stated hypothesis `ε > 0`; the conclusion is checked regardless.
    pub epsilon_positive: bool,
    pub witness: Vec<f64>,
    pub volume: f64,
    #[serde(rename = "lhs13")]
    pub lhs: f64,
    #[serde(rename = "rhs13")]
    pub rhs: f64,
    pub slack: f64,
    pub chain_slacks: ChainSlacks,
    pub grid: GridMeta,
    pub num_tol: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

impl StabilityReport {
    pub fn min_slack(&self) -> f64 {
        let c = &self.chain_slacks;
        [self.slack, c.integrated, c.lower_bound, c.holder].into_iter().fold(f64::INFINITY, f64::min)
    }
}

/// Samples `f >= 1` on `K` along grid rays.
fn check_at_least_one(k: &StarBody, f: &Density, spec: GridSpec) -> Result<()> {
    let grid = sphere_grid(k.dim(), spec.with_level(spec.level.min(8)))?;
    let mut x = vec![0.0; k.dim()];
    for (theta, _) in grid.iter() {
        let rho = k.radial(theta);
        for s in [0.0, 0.25, 0.5, 0.75, 0.999] {
            x.iter_mut().zip(theta).for_each(|(xi, t)| *xi = s * rho * t);
            let v = f.eval(&x);
            if !(v >= 1.0 - 1e-12) {
                return Err(Error::Precondition(format!("density must be >= 1 on K, got {v} at {x:?}")));
            }
        }
    }
    Ok(())
}

/// Checks the stability inequality for `K = IB(source)` and its proof chain.
pub fn verify_stability(source: &StarBody, f: &Density, cfg: &LabConfig) -> Result<StabilityReport> {
    let n = source.dim();
    let nf = n as f64;
    let k = intersection_body_of(source, cfg.spec)?;
    check_at_least_one(&k, f, cfg.spec)?;
    let grid = sphere_grid(n, cfg.spec)?;
    let consts = DimensionConstants::new(n)?;
    let c_n = consts.slicing_const;

    let rho_k: Vec<f64> = (0..grid.len()).into_par_iter().map(|i| k.radial(grid.node(i))).collect();
    let volume = grid.integrate_values(&rho_k.iter().map(|r| r.powi(n as i32)).collect::<Vec<_>>()) / nf;

    let gl = crate::quad::GaussLegendre::cached(cfg.radial_nodes);
    let mut mass_values = Vec::with_capacity(grid.len());
    let mut paired_values = Vec::with_capacity(grid.len());
    for (i, (theta, _)) in grid.iter().enumerate() {
        let r = rho_k[i];
        mass_values.push(f.ray_integral(theta, r, n as i32 - 1, &gl));
        paired_values.push(r * f.ray_integral(theta, r, n as i32 - 2, &gl));
    }
    let lhs = grid.integrate_values(&mass_values);
    let paired_lhs = grid.integrate_values(&paired_values);

    let excess = Density::Sum(vec![(1.0, f.clone()), (-1.0, Density::uniform())]);
    let witness = max_section(&BodyMeasure::new(k.clone(), excess)?, &cfg.search)?;
    let epsilon = witness.value;

    // dμ = ρ_source^{n-1}/(n-1) dθ
    let mu_total = grid.integrate(|t| source.radial(t).powi(n as i32 - 1)) / (nf - 1.0);
    let holder_factor = nf / (nf - 1.0) * c_n * volume.powf(1.0 / nf);
    let rhs = volume + holder_factor * epsilon;
    // (1/(n-1)) ∫ ρ_K^n = n|K|/(n-1)
    let paired_rhs = nf * volume / (nf - 1.0) + epsilon * mu_total;
    let integral_rho = grid.integrate_values(&rho_k);
    let chain_slacks = ChainSlacks {
        integrated: paired_rhs - paired_lhs,
        lower_bound: paired_lhs - (lhs + volume / (nf - 1.0)),
        holder: holder_factor * epsilon - epsilon * mu_total,
        holder_raw: consts.sphere_area.powf((nf - 1.0) / nf) * (nf * volume).powf(1.0 / nf) - integral_rho,
    };
    let smooth = source.is_smooth() && f.smoothness() == Smoothness::Smooth;
    let tol = num_tol(rhs, smooth, cfg.spec, witness.stderr * holder_factor);
    let slack = rhs - lhs;
    let mut rep = StabilityReport {
        n,
        source: source.describe(),
        density: f.label(),
        epsilon,
        epsilon_positive: epsilon > 0.0,
        witness: witness.direction.to_vec(),
        volume,
        lhs,
        rhs,
        slack,
        chain_slacks,
        grid: cfg.spec.into(),
        num_tol: tol,
        pass: false,
        timestamp: None,
    };
    rep.pass = rep.min_slack() >= -tol;
    Ok(rep)
}

/// Ball whose intersection body is the unit ball.
pub fn unit_ib_source(n: usize) -> Result<StarBody> {
    let prev = DimensionConstants::new(n)?.prev_ball_volume();
    StarBody::ball(n, prev.powf(-1.0 / (n as f64 - 1.0)))
}

pub const MIN_ORACLE_SAMPLES: usize = 10_000;
const ORACLE_CHUNK: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct OracleEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
    pub acceptance: f64,
}

fn chunked_oracle(
    samples: usize,
    seed: u64,
    dim: usize,
    half: &[f64],
    value: impl Fn(&[f64]) -> Option<f64> + Sync,
) -> Result<OracleEstimate> {
    if samples < MIN_ORACLE_SAMPLES {
        return Err(Error::domain(format!("the oracle needs at least {MIN_ORACLE_SAMPLES} samples, got {samples}")));
    }
    let chunks = samples.div_ceil(ORACLE_CHUNK);
    let parts: Vec<(f64, f64, usize)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut stream = crate::rng::stream(seed, c as u64);
            let count = ORACLE_CHUNK.min(samples - c * ORACLE_CHUNK);
            let mut x = vec![0.0; dim];
            let (mut sum, mut sumsq, mut hits) = (0.0, 0.0, 0);
            for _ in 0..count {
                for (xi, h) in x.iter_mut().zip(half) {
                    *xi = h * (2.0 * stream.random::<f64>() - 1.0);
                }
                if let Some(v) = value(&x) {
                    sum += v;
                    sumsq += v * v;
                    hits += 1;
                }
            }
            (sum, sumsq, hits)
        })
        .collect();
    let (sum, sumsq, hits) = parts.iter().fold((0.0, 0.0, 0), |a, p| (a.0 + p.0, a.1 + p.1, a.2 + p.2));
    let acceptance = hits as f64 / samples as f64;
    if acceptance < 1e-6 {
        return Err(Error::Precondition(format!(
            "oracle acceptance rate {acceptance:e} below 1e-6; the bounding box is too loose"
        )));
    }
    let box_volume: f64 = half.iter().map(|h| 2.0 * h).product();
    let nf = samples as f64;
    let mean = sum / nf;
    let var = (sumsq / nf - mean * mean).max(0.0);
    Ok(OracleEstimate { estimate: box_volume * mean, stderr: box_volume * (var / nf).sqrt(), samples, acceptance })
}

/// Rejection sampling of `μ(K)` in the bounding box of `K`.
pub fn mc_oracle(m: &BodyMeasure, samples: usize, seed: u64) -> Result<OracleEstimate> {
    let half = m.body.bounding_half_widths();
    chunked_oracle(samples, seed, m.dim(), &half, |x| m.body.contains(x).then(|| m.density.eval(x)))
}

/// Rejection sampling of `μ(K ∩ ξ^⊥)` in a box of the hyperplane.
pub fn mc_section_oracle(m: &BodyMeasure, xi: &Direction, samples: usize, seed: u64) -> Result<OracleEstimate> {
    let frame = orthonormal_frame(xi)?;
    let n = m.dim();
    let r = m.body.max_radius();
    let half = vec![r; n - 1];
    chunked_oracle(samples, seed, n - 1, &half, |y| {
        let mut x = vec![0.0; n];
        frame.embed_into(y, &mut x);
        m.body.contains(&x).then(|| m.density.eval(&x))
    })
}

/// Seeded random symmetric polytope: `2n` facet pairs with unit normals and
/// offsets in `[0.8, 1.2]`.
pub fn random_polytope(n: usize, seed: u64) -> Result<StarBody> {
    let mut stream = crate::rng::stream(seed, 0x504f_4c59);
    let half: Vec<Facet> = (0..2 * n)
        .map(|_| Facet { normal: crate::rng::unit_vector(&mut stream, n), offset: stream.random_range(0.8..1.2) })
        .collect();
    StarBody::h_polytope(HPolytope::symmetric(n, &half)?)
}

pub const SUITE_BODIES: [&str; 7] =
    ["ball", "cube", "cross-polytope", "lp-ball(1)", "lp-ball(1.5)", "lp-ball(3)", "h-polytope"];
pub const SUITE_DENSITIES: [&str; 4] = ["uniform", "gaussian", "sq-norm", "bump"];

pub fn suite_body(name: &str, n: usize, seed: u64) -> Result<StarBody> {
    match name {
        "ball" => StarBody::unit_ball(n),
        "cube" => StarBody::cube(n, 0.5),
        "cross-polytope" => StarBody::cross_polytope(n),
        "lp-ball(1)" => StarBody::lp_ball(n, 1.0),
        "lp-ball(1.5)" => StarBody::lp_ball(n, 1.5),
        "lp-ball(3)" => StarBody::lp_ball(n, 3.0),
        "h-polytope" => random_polytope(n, seed),
        _ => Err(Error::domain(format!("unknown suite body {name}"))),
    }
}

/// Settings of the standard eq4 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteConfig {
    pub dims: (usize, usize),
    pub seed: u64,
    pub radial_nodes: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { dims: (2, 10), seed: 1, radial_nodes: 32 }
    }
}

/// Verifier settings for a grid, with a lighter section search on Monte
/// Carlo grids and in higher dimensions.
pub fn lab_config(n: usize, spec: GridSpec, radial_nodes: usize) -> LabConfig {
    let mut cfg = LabConfig::new(n, spec).with_radial_nodes(radial_nodes);
    if spec.scheme == Scheme::MonteCarlo {
        cfg.search.net_spec = GridSpec::monte_carlo(16, spec.seed);
        cfg.search.spec = GridSpec::monte_carlo(spec.level.min(32), spec.seed);
        cfg.search.polish_iters = 8;
        cfg.search.net_size = 512;
    } else if n >= 5 {
        cfg.search.polish_iters = 12;
    }
    cfg
}

/// Suite resolution for dimension `n`.
pub fn suite_lab_config(n: usize, seed: u64, radial_nodes: usize) -> LabConfig {
    lab_config(n, default_spec(n, seed), radial_nodes)
}

/// Runs eq4 over bodies × densities × dimensions. Reports come back in
/// matrix order regardless of scheduling.
pub fn run_suite(suite: &SuiteConfig) -> Result<Vec<InequalityReport>> {
    let mut jobs = Vec::new();
    for n in suite.dims.0..=suite.dims.1 {
        for body in SUITE_BODIES {
            for density in SUITE_DENSITIES {
                jobs.push((n, body, density));
            }
        }
    }
    jobs.into_iter()
        .map(|(n, body, density)| {
            let cfg = suite_lab_config(n, suite.seed, suite.radial_nodes);
            let l = suite_body(body, n, suite.seed)?;
            verify_thm1(&l, &Density::parse(density)?, &cfg)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::Ellipsoid;
    use std::f64::consts::PI;

    #[test]
    fn ids_round_trip() {
        for id in InequalityId::ALL {
            assert_eq!(id.name().parse::<InequalityId>().unwrap(), id);
        }
        assert!("eq9".parse::<InequalityId>().is_err());
    }

    #[test]
    fn eq2_equality_at_the_ball() {
        let cfg = LabConfig::new(3, GridSpec::gauss(32));
        let rep = verify_eq2(&StarBody::unit_ball(3).unwrap(), &cfg).unwrap();
        assert!((rep.ratio - 1.0).abs() < 1e-6, "{}", rep.ratio);
        assert!(rep.pass && rep.equality);
    }

    #[test]
    fn eq2_rejects_non_intersection_bodies() {
        let cfg = LabConfig::new(3, GridSpec::gauss(8));
        assert!(matches!(verify_eq2(&StarBody::cube(3, 1.0).unwrap(), &cfg), Err(Error::Capability(_))));
    }

    #[test]
    fn eq3_at_the_ball_is_the_weakened_equality() {
        let cfg = LabConfig::new(3, GridSpec::gauss(32));
        let rep = verify_eq3(&StarBody::unit_ball(3).unwrap(), &Density::uniform(), &cfg).unwrap();
        assert!((rep.ratio - 2.0 / 3.0).abs() < 1e-6);
        assert!(rep.pass);
    }

    #[test]
    fn thm1_ball_values() {
        let cfg = LabConfig::new(3, GridSpec::gauss(32));
        let rep = verify_thm1(&StarBody::unit_ball(3).unwrap(), &Density::uniform(), &cfg).unwrap();
        assert!((rep.lhs - 4.0 * PI / 3.0).abs() < 1e-6);
        // √3 · 1.5 · c_3 · π · (4π/3)^{1/3}, mpmath
        assert!((rep.rhs - 10.882_796_185_405_31).abs() < 1e-6);
        let chain = rep.chain.unwrap();
        assert!(chain.composite_residual < 1e-9);
        assert!(chain.intermediate_holds);
        assert!(rep.pass);
    }

    #[test]
    fn thm1_zero_density_is_degenerate_equality() {
        let cfg = LabConfig::new(3, GridSpec::gauss(8));
        let rep = verify_thm1(&StarBody::cube(3, 0.5).unwrap(), &Density::parse("zero").unwrap(), &cfg).unwrap();
        assert_eq!((rep.lhs, rep.rhs, rep.ratio), (0.0, 0.0, 0.0));
        assert!(rep.pass);
    }

    #[test]
    fn shared_max_section_links_eq3_and_eq4() {
        let cfg = LabConfig::new(3, GridSpec::gauss(16));
        let m = BodyMeasure::new(
            StarBody::ellipsoid(Ellipsoid::from_semi_axes(&[1.0, 0.7, 0.5]).unwrap()).unwrap(),
            Density::gaussian(1.0).unwrap(),
        )
        .unwrap();
        let ev = evaluate(&m, &cfg).unwrap();
        let r3 = report(InequalityId::Eq3, &ev, &cfg).unwrap();
        let r4 = report(InequalityId::Eq4, &ev, &cfg).unwrap();
        assert!((r4.rhs.ln() - r3.rhs.ln() - 0.5 * 3f64.ln()).abs() < 1e-14);
        assert!(r4.rhs >= r3.rhs);
    }

    #[test]
    fn stability_at_the_ball() {
        let source = unit_ib_source(3).unwrap();
        let cfg = LabConfig::new(3, GridSpec::gauss(32));
        let flat = verify_stability(&source, &Density::uniform(), &cfg).unwrap();
        assert!(flat.epsilon.abs() < 1e-12);
        assert!(flat.slack.abs() < 1e-9);

        let rep = verify_stability(&source, &Density::constant(1.1).unwrap(), &cfg).unwrap();
        assert!((rep.epsilon - 0.1 * PI).abs() < 1e-9);
        // |B_2^3| · 0.1 / 2, mpmath
        assert!((rep.slack - 0.209_439_510_239_319_5).abs() < 1e-6, "{}", rep.slack);
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn stability_rejects_densities_below_one() {
        let cfg = LabConfig::new(3, GridSpec::gauss(8));
        let source = unit_ib_source(3).unwrap();
        assert!(matches!(
            verify_stability(&source, &Density::gaussian(1.0).unwrap(), &cfg),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn oracle_examples() {
        let ball = BodyMeasure::volume(StarBody::unit_ball(3).unwrap());
        let est = mc_oracle(&ball, 1_000_000, 7).unwrap();
        assert!((est.estimate - 4.0 * PI / 3.0).abs() < 3.0 * est.stderr);
        assert_eq!(est, mc_oracle(&ball, 1_000_000, 7).unwrap());
        assert!(mc_oracle(&ball, 100, 7).is_err());

        let cube = BodyMeasure::volume(StarBody::cube(5, 0.5).unwrap());
        let est = mc_oracle(&cube, 100_000, 3).unwrap();
        assert!((est.estimate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_has_fixed_columns() {
        let cfg = LabConfig::new(2, GridSpec::gauss(16));
        let rep = verify_thm1(&StarBody::cube(2, 0.5).unwrap(), &Density::uniform(), &cfg).unwrap();
        let mut out = Vec::new();
        write_csv(&mut out, &[rep]).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("id,n,body,density,lhs,rhs,slack,ratio,pass\neq4-thm1,2,cube(h=0.5),uniform,"));
    }
}
