//! Measures with even, non-negative densities on star bodies: the polar
//! formula for `μ(K)`, section volumes and section measures through the
//! subsphere rules, and the search for the maximal section.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::bodies::{check_grid, StarBody};
use crate::error::{Error, Result};
use crate::quad::{CompensatedSum, GaussLegendre};
use crate::sphere::{
    norm2, orthonormal_frame, Direction, Estimate, GridSpec, Scheme, SphereGrid, SubsphereRule, MAX_PRODUCT_DIM,
};

/// Gauss–Legendre nodes per ray unless configured otherwise.
pub const DEFAULT_RADIAL_NODES: usize = 64;
pub const MIN_RADIAL_NODES: usize = 8;

pub type DensityFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Smoothness {
    Smooth,
    Continuous,
    IndicatorComposite,
}

/// Even, continuous, non-negative density on `R^n`.
#[derive(Clone)]
pub enum Density {
    Constant(f64),
    /// `exp(-|x|² / (2σ²))`.
    Gaussian {
        sigma: f64,
    },
    /// `|x|²`.
    SqNorm,
    /// `exp(1 - 1/(1 - |x|²/r²))` inside the ball of radius `r`, zero outside.
    Bump {
        radius: f64,
    },
    /// `Σ c_i f_i`.
    Sum(Vec<(f64, Density)>),
    /// `χ_K + g χ_L`, integrated piecewise at the ray breakpoints.
    Composite {
        outer: StarBody,
        inner: StarBody,
        g: Box<Density>,
    },
    Custom {
        f: Arc<DensityFn>,
        label: String,
        hint: Smoothness,
    },
}

impl fmt::Debug for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// `σ` of the named builtin `gaussian`, so that it reads `e^{-|x|²}`.
pub const DEFAULT_GAUSSIAN_SIGMA: f64 = std::f64::consts::FRAC_1_SQRT_2;

impl Density {
    pub fn uniform() -> Self {
        Density::Constant(1.0)
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::data(format!("constant density must be non-negative, got {c}")));
        }
        Ok(Density::Constant(c))
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::data(format!("gaussian sigma must be positive, got {sigma}")));
        }
        Ok(Density::Gaussian { sigma })
    }

    pub fn bump(radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::data(format!("bump radius must be positive, got {radius}")));
        }
        Ok(Density::Bump { radius })
    }

    /// `χ_K + g χ_L` for `L ⊂ K`.
    pub fn composite(outer: StarBody, inner: StarBody, g: Density) -> Result<Self> {
        if outer.dim() != inner.dim() {
            return Err(Error::data("composite density: bodies have different dimensions"));
        }
        Ok(Density::Composite { outer, inner, g: Box::new(g) })
    }

    pub fn custom(label: impl Into<String>, hint: Smoothness, f: Arc<DensityFn>) -> Self {
        Density::Custom { f, label: label.into(), hint }
    }

    /// `self + c · other`.
    pub fn plus(self, c: f64, other: Density) -> Self {
        let mut terms = match self {
            Density::Sum(terms) => terms,
            d => vec![(1.0, d)],
        };
        terms.push((c, other));
        Density::Sum(terms)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Density::Constant(c) => *c,
            Density::Gaussian { sigma } => (-x.iter().map(|v| v * v).sum::<f64>() / (2.0 * sigma * sigma)).exp(),
            Density::SqNorm => x.iter().map(|v| v * v).sum(),
            Density::Bump { radius } => bump_profile(norm2(x) / radius),
            Density::Sum(terms) => terms.iter().map(|(c, d)| c * d.eval(x)).sum(),
            Density::Composite { outer, inner, g } => {
                let mut v = if outer.contains(x) { 1.0 } else { 0.0 };
                if inner.contains(x) {
                    v += g.eval(x);
                }
                v
            }
            Density::Custom { f, .. } => f(x),
        }
    }

    pub fn smoothness(&self) -> Smoothness {
        match self {
            Density::Constant(_) | Density::Gaussian { .. } | Density::SqNorm => Smoothness::Smooth,
            Density::Bump { .. } => Smoothness::Continuous,
            Density::Composite { .. } => Smoothness::IndicatorComposite,
            Density::Custom { hint, .. } => *hint,
            Density::Sum(terms) => {
                terms.iter().map(|(_, d)| d.smoothness()).fold(Smoothness::Smooth, |a, b| match (a, b) {
                    (Smoothness::IndicatorComposite, _) | (_, Smoothness::IndicatorComposite) => {
                        Smoothness::IndicatorComposite
                    }
                    (Smoothness::Continuous, _) | (_, Smoothness::Continuous) => Smoothness::Continuous,
                    _ => Smoothness::Smooth,
                })
            }
        }
    }

    /// True unless non-negativity holds by construction.
    fn needs_sign_check(&self) -> bool {
        match self {
            Density::Sum(terms) => terms.iter().any(|(c, d)| *c < 0.0 || d.needs_sign_check()),
            Density::Composite { g, .. } => g.needs_sign_check(),
            Density::Custom { .. } => true,
            _ => false,
        }
    }

    /// Identically zero (only detects the syntactic cases).
    pub fn is_zero(&self) -> bool {
        match self {
            Density::Constant(c) => *c == 0.0,
            Density::Sum(terms) => terms.iter().all(|(c, d)| *c == 0.0 || d.is_zero()),
            _ => false,
        }
    }

    /// `∫_0^{rmax} r^k f(rθ) dr`.
    pub fn ray_integral(&self, theta: &[f64], rmax: f64, k: i32, gl: &GaussLegendre) -> f64 {
        match self {
            Density::Constant(c) => c * rmax.powi(k + 1) / (k + 1) as f64,
            Density::SqNorm => rmax.powi(k + 3) / (k + 3) as f64,
            Density::Gaussian { sigma } => {
                let s = 1.0 / (2.0 * sigma * sigma);
                gl.integrate(0.0, rmax, |r| r.powi(k) * (-s * r * r).exp())
            }
            Density::Bump { radius } => {
                let end = rmax.min(*radius);
                gl.integrate(0.0, end, |r| r.powi(k) * bump_profile(r / radius))
            }
            Density::Sum(terms) => terms.iter().map(|(c, d)| c * d.ray_integral(theta, rmax, k, gl)).sum(),
            Density::Composite { outer, inner, g } => {
                let outer_end = rmax.min(outer.radial(theta));
                let inner_end = rmax.min(inner.radial(theta));
                outer_end.powi(k + 1) / (k + 1) as f64 + g.ray_integral(theta, inner_end, k, gl)
            }
            Density::Custom { f, .. } => {
                let mut x = vec![0.0; theta.len()];
                gl.integrate(0.0, rmax, |r| {
                    x.iter_mut().zip(theta).for_each(|(xi, t)| *xi = r * t);
                    r.powi(k) * f(&x)
                })
            }
        }
    }

    fn check_ray(&self, theta: &[f64], rmax: f64, gl: &GaussLegendre) -> Result<()> {
        let mut x = vec![0.0; theta.len()];
        for t in &gl.nodes {
            let r = 0.5 * rmax * (t + 1.0);
            x.iter_mut().zip(theta).for_each(|(xi, th)| *xi = r * th);
            let v = self.eval(&x);
            if v < -1e-12 || v.is_nan() {
                return Err(Error::data(format!("density is negative ({v}) at point {x:?}")));
            }
        }
        Ok(())
    }

    /// Canonical textual form, parseable by [`Density::parse`] except for
    /// composite and custom densities.
    pub fn label(&self) -> String {
        match self {
            Density::Constant(c) if *c == 1.0 => "uniform".into(),
            Density::Constant(c) => format!("{c}"),
            Density::Gaussian { sigma } if *sigma == DEFAULT_GAUSSIAN_SIGMA => "gaussian".into(),
            Density::Gaussian { sigma } => format!("gaussian({sigma})"),
            Density::SqNorm => "sq-norm".into(),
            Density::Bump { radius } if *radius == 1.0 => "bump".into(),
            Density::Bump { radius } => format!("bump({radius})"),
            Density::Sum(terms) => terms
                .iter()
                .map(|(c, d)| match d {
                    Density::Constant(v) => format!("{}", c * v),
                    _ if *c == 1.0 => d.label(),
                    _ => format!("{c}*{}", d.label()),
                })
                .collect::<Vec<_>>()
                .join("+"),
            Density::Composite { outer, inner, g } => {
                format!("composite({};{};{})", outer.label(), inner.label(), g.label())
            }
            Density::Custom { label, .. } => label.clone(),
        }
    }

    /// Parses `term ('+' term)*` where a term is a number, a builtin name
    /// (`uniform`, `zero`, `gaussian`, `sq-norm`, `bump`, optionally with one
    /// parenthesized parameter) or `number '*' builtin`. A JSON object
    /// `{"type":"composite","outer":{..},"inner":{..},"g":"<density>"}` builds
    /// the indicator composite.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if text.starts_with('{') {
            return Self::parse_composite(text);
        }
        if text.is_empty() {
            return Err(Error::data("density spec is empty"));
        }
        let mut terms = Vec::new();
        for raw in text.split('+') {
            let term = raw.trim();
            if term.is_empty() {
                return Err(Error::data(format!("density spec \"{text}\": empty term")));
            }
            let (coef, atom) = match term.split_once('*') {
                Some((c, a)) => (parse_number(c.trim(), text)?, a.trim()),
                None => match term.parse::<f64>() {
                    Ok(c) => (c, "uniform"),
                    Err(_) => (1.0, term),
                },
            };
            terms.push((coef, parse_atom(atom, text)?));
        }
        let density = if terms.len() == 1 && terms[0].0 == 1.0 {
            terms.pop().unwrap().1
        } else if terms.len() == 1 {
            match terms[0] {
                (c, Density::Constant(v)) => Density::constant(c * v)?,
                _ => Density::Sum(terms),
            }
        } else {
            Density::Sum(terms)
        };
        if let Density::Sum(terms) = &density {
            if terms.iter().any(|(c, _)| *c < 0.0 || !c.is_finite()) {
                return Err(Error::data(format!("density spec \"{text}\": coefficients must be non-negative")));
            }
        }
        Ok(density)
    }

    fn parse_composite(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::data(format!("density spec: malformed JSON: {e}")))?;
        let obj = value.as_object().ok_or_else(|| Error::data("density spec: expected an object"))?;
        if obj.get("type").and_then(|t| t.as_str()) != Some("composite") {
            return Err(Error::data("density spec: JSON densities must have \"type\": \"composite\""));
        }
        let body = |field: &str| -> Result<StarBody> {
            let v = obj.get(field).ok_or_else(|| Error::data(format!("density spec: missing field \"{field}\"")))?;
            crate::bodies::BodySpec::from_value(v, field)?.build()
        };
        let g = match obj.get("g") {
            None => Density::uniform(),
            Some(v) => Density::parse(
                v.as_str().ok_or_else(|| Error::data("density spec: field \"g\" must be a density string"))?,
            )?,
        };
        Density::composite(body("outer")?, body("inner")?, g)
    }
}

fn parse_number(s: &str, whole: &str) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::data(format!("density spec \"{whole}\": \"{s}\" is not a number")))
}

fn parse_atom(atom: &str, whole: &str) -> Result<Density> {
    let (name, param) = match atom.split_once('(') {
        Some((name, rest)) => {
            let inner = rest.strip_suffix(')').ok_or_else(|| {
                Error::data(format!("density spec \"{whole}\": unbalanced parenthesis in \"{atom}\""))
            })?;
            (name.trim(), Some(parse_number(inner.trim(), whole)?))
        }
        None => (atom, None),
    };
    match (name, param) {
        ("uniform", None) => Ok(Density::uniform()),
        ("zero", None) => Ok(Density::Constant(0.0)),
        ("const", Some(c)) => Density::constant(c),
        ("gaussian", s) => Density::gaussian(s.unwrap_or(DEFAULT_GAUSSIAN_SIGMA)),
        ("sq-norm", None) => Ok(Density::SqNorm),
        ("bump", r) => Density::bump(r.unwrap_or(1.0)),
        _ => Err(Error::data(format!(
            "density spec \"{whole}\": unknown density \"{atom}\" (expected uniform, zero, const(c), gaussian[(sigma)], sq-norm, bump[(radius)] or a composite object)"
        ))),
    }
}

fn bump_profile(s: f64) -> f64 {
    if s >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

/// A star body carrying a density.
#[derive(Clone, Debug)]
pub struct BodyMeasure {
    pub body: StarBody,
    pub density: Density,
}

impl BodyMeasure {
    pub fn new(body: StarBody, density: Density) -> Result<Self> {
        if let Density::Composite { outer, .. } = &density {
            if outer.dim() != body.dim() {
                return Err(Error::data("density and body dimensions differ"));
            }
        }
        if matches!(density, Density::Custom { .. }) {
            check_custom_density(&body, &density)?;
        }
        Ok(Self { body, density })
    }

    pub fn volume(body: StarBody) -> Self {
        Self { body, density: Density::uniform() }
    }

    pub fn dim(&self) -> usize {
        self.body.dim()
    }
}

fn check_custom_density(body: &StarBody, density: &Density) -> Result<()> {
    let mut stream = crate::rng::stream(0xD0, 0);
    let r = body.max_radius();
    for _ in 0..64 {
        let theta = crate::rng::unit_vector(&mut stream, body.dim());
        let scale = r * rand::Rng::random::<f64>(&mut stream);
        let x: Vec<f64> = theta.iter().map(|t| scale * t).collect();
        let minus: Vec<f64> = x.iter().map(|v| -v).collect();
        let (a, b) = (density.eval(&x), density.eval(&minus));
        if a < 0.0 {
            return Err(Error::data(format!("density is negative ({a}) at point {x:?}")));
        }
        if (a - b).abs() > 1e-10 * (1.0 + a.abs()) {
            return Err(Error::data(format!("density is not even at point {x:?}: {a} vs {b}")));
        }
    }
    Ok(())
}

fn check_radial_nodes(radial_nodes: usize) -> Result<()> {
    if radial_nodes < MIN_RADIAL_NODES {
        return Err(Error::domain(format!(
            "radial node count must be at least {MIN_RADIAL_NODES}, got {radial_nodes}"
        )));
    }
    Ok(())
}

fn ray_values(m: &BodyMeasure, nodes: impl Iterator<Item = Vec<f64>>, k: i32, gl: &GaussLegendre) -> Result<Vec<f64>> {
    let check = m.density.needs_sign_check();
    nodes
        .map(|theta| {
            let rho = m.body.radial(&theta);
            if check {
                m.density.check_ray(&theta, rho, gl)?;
            }
            Ok(m.density.ray_integral(&theta, rho, k, gl))
        })
        .collect()
}

/// `μ(K) = Σ_i w_i ∫_0^{ρ_K(θ_i)} r^{n-1} f(rθ_i) dr`.
pub fn body_measure(m: &BodyMeasure, grid: &SphereGrid, radial_nodes: usize) -> Result<f64> {
    Ok(body_measure_estimate(m, grid, radial_nodes)?.value)
}

pub fn body_measure_estimate(m: &BodyMeasure, grid: &SphereGrid, radial_nodes: usize) -> Result<Estimate> {
    check_grid(&m.body, grid)?;
    check_radial_nodes(radial_nodes)?;
    let gl = GaussLegendre::cached(radial_nodes);
    let k = m.dim() as i32 - 1;
    let values = ray_values(m, grid.iter().map(|(t, _)| t.to_vec()), k, &gl)?;
    Ok(grid.estimate_values(&values))
}

fn check_direction(body: &StarBody, xi: &Direction) -> Result<()> {
    if xi.dim() != body.dim() {
        return Err(Error::domain(format!("direction has dimension {}, body has {}", xi.dim(), body.dim())));
    }
    Ok(())
}

/// `|K ∩ ξ^⊥| = (1/(n-1)) Σ_j w_j ρ_K(θ_j)^{n-1}` over `S^{n-1} ∩ ξ^⊥`.
pub fn section_volume(body: &StarBody, xi: &Direction, spec: GridSpec) -> Result<f64> {
    check_direction(body, xi)?;
    let rule = SubsphereRule::new(xi, spec)?;
    let k = body.dim() as i32 - 1;
    Ok(rule.integrate(|t| body.radial(t).powi(k)) / k as f64)
}

/// `μ(K ∩ ξ^⊥)` with its direction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectionValue {
    pub direction: Direction,
    pub value: f64,
    /// Standard error for Monte Carlo rules, zero otherwise.
    pub stderr: f64,
}

/// `μ(K ∩ ξ^⊥) = Σ_j w_j ∫_0^{ρ_K(θ_j)} r^{n-2} f(rθ_j) dr` over the subsphere.
pub fn section_measure(m: &BodyMeasure, xi: &Direction, spec: GridSpec, radial_nodes: usize) -> Result<SectionValue> {
    check_direction(&m.body, xi)?;
    check_radial_nodes(radial_nodes)?;
    let rule = SubsphereRule::new(xi, spec)?;
    let gl = GaussLegendre::cached(radial_nodes);
    let k = m.dim() as i32 - 2;
    let mut nodes = Vec::with_capacity(rule.len());
    rule.for_each_node(|x, _| nodes.push(x.to_vec()));
    let values = ray_values(m, nodes.into_iter(), k, &gl)?;
    let est = rule.to_grid().estimate_values(&values);
    Ok(SectionValue { direction: xi.clone(), value: est.value, stderr: est.stderr })
}

/// Configuration of the maximal-section search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SectionSearch {
    /// Resolution used on the candidate net.
    pub net_spec: GridSpec,
    /// Resolution used to refine and polish the best candidates.
    pub spec: GridSpec,
    /// Quasi-random directions added to the axes and diagonals.
    pub net_size: usize,
    pub refine_top: usize,
    pub polish_iters: usize,
    pub radial_nodes: usize,
    pub seed: u64,
}

impl SectionSearch {
    /// Defaults for dimension `n` at fine resolution `spec`.
    pub fn new(n: usize, spec: GridSpec) -> Self {
        let net_level = match spec.scheme {
            Scheme::ProductGauss => spec.level.min(net_level_for(n)),
            Scheme::MonteCarlo => spec.level.min(16),
        };
        Self {
            net_spec: spec.with_level(net_level.max(crate::sphere::MIN_LEVEL)),
            spec,
            net_size: if n <= MAX_PRODUCT_DIM { 4096 } else { 1024 },
            refine_top: 8,
            polish_iters: 24,
            radial_nodes: DEFAULT_RADIAL_NODES,
            seed: spec.seed,
        }
    }

    pub fn with_radial_nodes(self, radial_nodes: usize) -> Self {
        Self { radial_nodes, ..self }
    }
}

fn net_level_for(n: usize) -> usize {
    match n {
        2 | 3 => 16,
        4 => 8,
        5 => 6,
        _ => 4,
    }
}

/// Axes, canonical diagonals `(1, ±1, …, ±1)/√n` and a seeded quasi-random
/// net, one representative per antipodal pair, deduplicated.
pub fn candidate_directions(n: usize, net_size: usize, seed: u64) -> Vec<Direction> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut push = |d: Direction, out: &mut Vec<Direction>| {
        let d = d.canonical();
        let key: Vec<u64> = d.iter().map(|x| (x + 0.0).to_bits()).collect();
        if seen.insert(key) {
            out.push(d);
        }
    };
    for i in 0..n {
        push(Direction::axis(n, i), &mut out);
    }
    let diagonals = 1usize << (n - 1).min(20);
    let inv = 1.0 / (n as f64).sqrt();
    for mask in 0..diagonals {
        let v = (0..n).map(|i| if i > 0 && mask >> (i - 1) & 1 == 1 { -inv } else { inv }).collect();
        push(Direction::normalized(v).expect("non-zero"), &mut out);
    }
    // R_d Kronecker sequence, mapped to Gaussians by Box–Muller
    let m = n + n % 2;
    let phi = (1..=40).fold(2.0_f64, |x, _| (1.0 + x).powf(1.0 / (m as f64 + 1.0)));
    let alpha: Vec<f64> = (1..=m).map(|j| (1.0 / phi.powi(j as i32)).fract()).collect();
    let mut stream = crate::rng::stream(seed, 0x4e45_5400);
    let start: Vec<f64> = (0..m).map(|_| rand::Rng::random::<f64>(&mut stream)).collect();
    for k in 1..=net_size {
        let u: Vec<f64> = (0..m).map(|j| (start[j] + k as f64 * alpha[j]).fract()).collect();
        let mut v = Vec::with_capacity(m);
        for pair in u.chunks_exact(2) {
            let r = (-2.0 * (1.0 - pair[0]).ln()).sqrt();
            let (s, c) = (2.0 * std::f64::consts::PI * pair[1]).sin_cos();
            v.push(r * c);
            v.push(r * s);
        }
        v.truncate(n);
        if let Ok(d) = Direction::normalized(v) {
            push(d, &mut out);
        }
    }
    out
}

fn better(a: &SectionValue, b: &SectionValue) -> bool {
    a.value > b.value || (a.value == b.value && lex_less(&a.direction, &b.direction))
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x != y {
            return x < y;
        }
    }
    false
}

fn best_of(values: Vec<SectionValue>) -> Option<SectionValue> {
    values.into_iter().reduce(|best, v| if better(&v, &best) { v } else { best })
}

/// Approximates `max_ξ μ(K ∩ ξ^⊥)`: coarse net, refinement of the best
/// `refine_top` candidates at the fine resolution, then local polishing by
/// tangent steps with a shrinking step size.
///
/// The result is a lower bound of the true maximum up to quadrature error.
/// For Monte Carlo rules the winner is re-estimated on an independent
/// stream so that the selection does not bias the reported value upward.
pub fn max_section(m: &BodyMeasure, search: &SectionSearch) -> Result<SectionValue> {
    let n = m.dim();
    let candidates = candidate_directions(n, search.net_size, search.seed);
    let eval = |xi: &Direction, spec: GridSpec| section_measure(m, xi, spec, search.radial_nodes);

    let coarse: Vec<SectionValue> = candidates.par_iter().map(|xi| eval(xi, search.net_spec)).collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..coarse.len()).collect();
    order.sort_by(|&i, &j| {
        if better(&coarse[i], &coarse[j]) {
            std::cmp::Ordering::Less
        } else if better(&coarse[j], &coarse[i]) {
            std::cmp::Ordering::Greater
        } else {
            std::cmp::Ordering::Equal
        }
    });
    let top: Vec<&Direction> = order.iter().take(search.refine_top.max(1)).map(|&i| &coarse[i].direction).collect();
    let refined: Vec<SectionValue> = top.par_iter().map(|xi| eval(xi, search.spec)).collect::<Result<_>>()?;
    let mut best = best_of(refined).expect("at least one candidate");

    let mut step = 0.25 * (std::f64::consts::PI / (candidates.len() as f64).powf(1.0 / (n as f64 - 1.0).max(1.0)));
    for _ in 0..search.polish_iters {
        if n < 2 {
            break;
        }
        let frame = orthonormal_frame(&best.direction)?;
        let trials: Vec<Direction> = frame
            .basis
            .iter()
            .flat_map(|b| {
                [step, -step].map(|s| best.direction.iter().zip(b).map(|(x, bk)| x + s * bk).collect::<Vec<f64>>())
            })
            .filter_map(|v| Direction::normalized(v).ok().map(|d| d.canonical()))
            .collect();
        let values: Vec<SectionValue> = trials.par_iter().map(|xi| eval(xi, search.spec)).collect::<Result<_>>()?;
        match best_of(values) {
            Some(v) if v.value > best.value => best = v,
            _ => step *= 0.5,
        }
    }

    if search.spec.scheme == Scheme::MonteCarlo {
        let fresh = GridSpec { seed: search.spec.seed.wrapping_add(0x9E37_79B9_7F4A_7C15), ..search.spec };
        best = eval(&best.direction, fresh)?;
    }
    Ok(best)
}

/// Convenience wrapper: sum of `w_i f(θ_i)` per node in parallel with an
/// ordered, compensated reduction.
pub fn parallel_integrate(grid: &SphereGrid, f: impl Fn(&[f64]) -> f64 + Sync) -> f64 {
    let values: Vec<f64> = (0..grid.len()).into_par_iter().map(|i| f(grid.node(i))).collect();
    let mut acc = CompensatedSum::default();
    for (v, w) in values.iter().zip(grid.weights()) {
        acc.add(v * w);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::{body_volume, Ellipsoid};
    use crate::sphere::sphere_grid;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn uniform_measure_equals_volume() {
        let g = sphere_grid(3, GridSpec::gauss(24)).unwrap();
        for body in [StarBody::lp_ball(3, 3.0).unwrap(), StarBody::cube(3, 0.5).unwrap()] {
            let m = BodyMeasure::volume(body.clone());
            assert_relative_eq!(
                body_measure(&m, &g, 64).unwrap(),
                body_volume(&body, &g).unwrap(),
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn gaussian_on_ball_matches_closed_form() {
        // 4π ∫_0^1 r² e^{-r²} dr, mpmath
        let expected = 2.380_979_718_752_334;
        let g = sphere_grid(3, GridSpec::gauss(16)).unwrap();
        let m = BodyMeasure::new(StarBody::unit_ball(3).unwrap(), Density::parse("gaussian").unwrap()).unwrap();
        assert!((body_measure(&m, &g, 64).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn measure_is_linear_in_density() {
        let g = sphere_grid(3, GridSpec::gauss(16)).unwrap();
        let body = StarBody::lp_ball(3, 3.0).unwrap();
        let f = Density::gaussian(0.8).unwrap();
        let h = Density::bump(1.1).unwrap();
        let (a, b) = (0.7, 2.5);
        let combo = Density::Sum(vec![(a, f.clone()), (b, h.clone())]);
        let mf = body_measure(&BodyMeasure::new(body.clone(), f).unwrap(), &g, 32).unwrap();
        let mh = body_measure(&BodyMeasure::new(body.clone(), h).unwrap(), &g, 32).unwrap();
        let mc = body_measure(&BodyMeasure::new(body, combo).unwrap(), &g, 32).unwrap();
        assert_relative_eq!(mc, a * mf + b * mh, max_relative = 1e-13);
    }

    #[test]
    fn negative_density_is_reported_with_point() {
        let g = sphere_grid(3, GridSpec::gauss(8)).unwrap();
        let bad = Density::uniform().plus(-2.0, Density::SqNorm);
        let m = BodyMeasure::new(StarBody::unit_ball(3).unwrap(), bad).unwrap();
        match body_measure(&m, &g, 16) {
            Err(Error::Data(msg)) => assert!(msg.contains("point"), "{msg}"),
            other => panic!("expected data error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_few_radial_nodes() {
        let g = sphere_grid(3, GridSpec::gauss(8)).unwrap();
        let m = BodyMeasure::volume(StarBody::unit_ball(3).unwrap());
        assert!(body_measure(&m, &g, 4).is_err());
    }

    #[test]
    fn section_volume_examples() {
        let ball4 = StarBody::unit_ball(4).unwrap();
        let xi = Direction::normalized(vec![0.1, 0.2, -0.3, 0.9]).unwrap();
        assert!((section_volume(&ball4, &xi, GridSpec::gauss(32)).unwrap() - 4.0 * PI / 3.0).abs() < 1e-8);

        let cube3 = StarBody::cube(3, 0.5).unwrap();
        let v = section_volume(&cube3, &Direction::axis(3, 2), GridSpec::gauss(1024)).unwrap();
        assert!((v - 1.0).abs() < 1e-4, "{v}");

        let square = StarBody::cube(2, 0.5).unwrap();
        let diag = Direction::normalized(vec![1.0, 1.0]).unwrap();
        assert!((section_volume(&square, &diag, GridSpec::gauss(8)).unwrap() - 2f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn section_volume_scaling_law() {
        let body = StarBody::lp_ball(4, 4.0).unwrap();
        let xi = Direction::normalized(vec![0.3, 0.1, -0.5, 0.8]).unwrap();
        let t: f64 = 1.3;
        let a = section_volume(&body, &xi, GridSpec::gauss(16)).unwrap();
        let b = section_volume(&body.scaled(t).unwrap(), &xi, GridSpec::gauss(16)).unwrap();
        assert_relative_eq!(b, t.powi(3) * a, max_relative = 1e-12);
    }

    #[test]
    fn section_measure_examples() {
        let body = StarBody::lp_ball(3, 3.0).unwrap();
        let xi = Direction::normalized(vec![0.2, -0.4, 0.8]).unwrap();
        let spec = GridSpec::gauss(32);
        let sm = section_measure(&BodyMeasure::volume(body.clone()), &xi, spec, 64).unwrap();
        assert_relative_eq!(sm.value, section_volume(&body, &xi, spec).unwrap(), max_relative = 1e-10);

        let m = BodyMeasure::new(body, Density::bump(0.9).unwrap()).unwrap();
        let a = section_measure(&m, &xi, spec, 32).unwrap();
        let b = section_measure(&m, &xi.antipode(), spec, 32).unwrap();
        assert_eq!(a.value, b.value);

        // ∫_{B_2^2} e^{-|y|²} dy = π(1 − e^{-1})
        let gm = BodyMeasure::new(StarBody::unit_ball(3).unwrap(), Density::parse("gaussian").unwrap()).unwrap();
        let v = section_measure(&gm, &xi, spec, 64).unwrap().value;
        assert!((v - PI * (1.0 - (-1.0_f64).exp())).abs() < 1e-6);
    }

    #[test]
    fn composite_density_splits_rays_exactly() {
        // χ_K + g χ_L with K = 2B, L = B and g ≡ 3: measure = |2B| + 3|B|
        let k = StarBody::ball(3, 2.0).unwrap();
        let l = StarBody::unit_ball(3).unwrap();
        let f = Density::composite(k.clone(), l, Density::constant(3.0).unwrap()).unwrap();
        let g = sphere_grid(3, GridSpec::gauss(8)).unwrap();
        let v = body_measure(&BodyMeasure::new(k, f).unwrap(), &g, 8).unwrap();
        assert_relative_eq!(v, 4.0 * PI / 3.0 * (8.0 + 3.0), max_relative = 1e-13);
    }

    #[test]
    fn density_parsing() {
        assert_eq!(Density::parse("uniform").unwrap().label(), "uniform");
        assert_eq!(Density::parse("gaussian(0.5)").unwrap().label(), "gaussian(0.5)");
        assert_eq!(Density::parse("1+0.2*bump").unwrap().label(), "1+0.2*bump");
        assert_eq!(Density::parse("1.1").unwrap().eval(&[0.3, 0.0]), 1.1);
        assert_eq!(Density::parse("zero").unwrap().eval(&[0.3, 0.0]), 0.0);
        assert!(Density::parse("sq-norm").unwrap().eval(&[3.0, 4.0]) == 25.0);
        assert!(Density::parse("gauss").is_err());
        assert!(Density::parse("bump(").is_err());
        assert!(Density::parse("1+-2*sq-norm").is_err());
        assert!(Density::parse("").is_err());
        let comp = Density::parse(
            r#"{"type":"composite","outer":{"type":"ball","dim":2,"radius":2},"inner":{"type":"cube","dim":2,"halfwidth":1},"g":"gaussian"}"#,
        )
        .unwrap();
        assert_eq!(comp.smoothness(), Smoothness::IndicatorComposite);
        assert_eq!(comp.eval(&[1.5, 0.0]), 1.0);
        assert!(Density::parse(r#"{"type":"composite","outer":{"type":"ball","dim":2}}"#).is_err());
    }

    #[test]
    fn custom_density_must_be_even() {
        let odd = Density::custom("odd", Smoothness::Smooth, Arc::new(|x: &[f64]| 1.0 + 0.5 * x[0]));
        assert!(BodyMeasure::new(StarBody::unit_ball(2).unwrap(), odd).is_err());
    }

    #[test]
    fn candidate_net_contains_axes_and_diagonals() {
        let net = candidate_directions(3, 4096, 1);
        assert!(net.len() >= 4096);
        assert!(net.contains(&Direction::axis(3, 2)));
        let d = Direction::normalized(vec![1.0, -1.0, 1.0]).unwrap();
        assert!(net.iter().any(|x| x.iter().zip(d.iter()).all(|(a, b)| (a - b).abs() < 1e-15)));
        assert_eq!(net, candidate_directions(3, 4096, 1));
        for x in &net {
            assert_eq!(x, &x.canonical());
        }
    }

    #[test]
    fn max_section_of_square_is_the_diagonal() {
        let m = BodyMeasure::volume(StarBody::cube(2, 0.5).unwrap());
        let best = max_section(&m, &SectionSearch::new(2, GridSpec::gauss(8))).unwrap();
        assert!((best.value - 2f64.sqrt()).abs() < 1e-6);
        assert!((best.direction[0].abs() - best.direction[1].abs()).abs() < 1e-6);
    }

    #[test]
    fn max_section_of_ellipse_is_the_long_chord() {
        let e = StarBody::ellipsoid(Ellipsoid::diagonal(&[1.0, 4.0]).unwrap()).unwrap();
        let best = max_section(&BodyMeasure::volume(e), &SectionSearch::new(2, GridSpec::gauss(8))).unwrap();
        assert!((best.value - 2.0).abs() < 1e-6);
        assert!((best.direction[1].abs() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn max_section_of_ball_is_direction_independent() {
        let m = BodyMeasure::new(StarBody::unit_ball(3).unwrap(), Density::parse("gaussian").unwrap()).unwrap();
        let search = SectionSearch::new(3, GridSpec::gauss(32)).with_radial_nodes(32);
        let best = max_section(&m, &search).unwrap();
        let e1 = section_measure(&m, &Direction::axis(3, 0), GridSpec::gauss(32), 32).unwrap();
        assert!((best.value - e1.value).abs() < 1e-8);
        assert_eq!(best, max_section(&m, &search).unwrap());
    }
}
