//! Quadrature on the unit sphere `S^{n-1}` and on great subspheres
//! `S^{n-1} ∩ ξ^⊥`.
//!
//! Two schemes are available. `ProductGauss` tensorizes Gauss rules in the
//! cosines of the polar angles (Gegenbauer weights, so polynomials integrate
//! exactly) with a periodic trapezoid rule in the last (azimuthal)
//! angle; its node count grows like `level^{n-1}`, so it is limited to
//! `n <= 6`. `MonteCarlo` draws normalized Gaussian samples from a seeded
//! counter-based stream.
//!
//! Both schemes are built as a "half" node set `H` followed by `-H` with
//! identical weights, so every grid is antipodally symmetric bit for bit and
//! node `i` is paired with node `i + len/2`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fs;
use std::io::{self, Read, Write};
use std::ops::Deref;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use once_cell::sync::Lazy;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{CompensatedSum, GaussGegenbauer};
use crate::{rng, scalars};

/// Largest ambient dimension served by the tensor-product scheme.
pub const MAX_PRODUCT_DIM: usize = 6;
/// Smallest accepted resolution level.
pub const MIN_LEVEL: usize = 4;
/// Environment variable naming a directory for binary grid dumps.
pub const CACHE_DIR_ENV: &str = "SLICEKIT_CACHE_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ProductGauss,
    MonteCarlo,
}

impl Scheme {
    pub fn short_name(self) -> &'static str {
        match self {
            Scheme::ProductGauss => "gauss",
            Scheme::MonteCarlo => "mc",
        }
    }
}

/// Resolution of a sphere rule.
///
/// For `ProductGauss`, `level` is the number of Gauss nodes per polar
/// angle (the azimuth gets `2 * level` trapezoid nodes). For `MonteCarlo` the
/// grid has `2 * level^2` nodes (`level^2` samples plus their antipodes).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    pub scheme: Scheme,
    pub level: usize,
    pub seed: u64,
}

impl GridSpec {
    pub fn gauss(level: usize) -> Self {
        Self { scheme: Scheme::ProductGauss, level, seed: 0 }
    }

    pub fn monte_carlo(level: usize, seed: u64) -> Self {
        Self { scheme: Scheme::MonteCarlo, level, seed }
    }

    pub fn with_level(self, level: usize) -> Self {
        Self { level, ..self }
    }

    pub fn doubled(self) -> Self {
        self.with_level(self.level * 2)
    }

    fn validate(&self, ambient_dim: usize) -> Result<()> {
        if self.level < MIN_LEVEL {
            return Err(Error::domain(format!("grid level {} is below the minimum of {MIN_LEVEL}", self.level)));
        }
        if self.scheme == Scheme::ProductGauss && ambient_dim > MAX_PRODUCT_DIM {
            return Err(Error::capability(format!(
                "product-gauss grids are limited to n <= {MAX_PRODUCT_DIM} (got n = {ambient_dim}); use the monte-carlo scheme"
            )));
        }
        Ok(())
    }
}

/// A unit vector `ξ ∈ S^{n-1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Direction(Vec<f64>);

impl Direction {
    /// Accepts `coords` as-is when its Euclidean norm is 1 within `1e-12`.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        let norm = norm2(&coords);
        if coords.is_empty() || !norm.is_finite() || (norm - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!("not a unit vector (norm {norm})")));
        }
        Ok(Self(coords))
    }

    /// Scales a non-zero vector onto the sphere.
    pub fn normalized(mut coords: Vec<f64>) -> Result<Self> {
        let norm = norm2(&coords);
        if coords.is_empty() || !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::domain("cannot normalize a zero or non-finite vector"));
        }
        coords.iter_mut().for_each(|x| *x /= norm);
        Ok(Self(coords))
    }

    /// The `i`-th coordinate axis of `R^n`.
    pub fn axis(n: usize, i: usize) -> Self {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn antipode(&self) -> Self {
        Self(self.0.iter().map(|x| -x).collect())
    }

    /// Representative of `{ξ, -ξ}` whose first non-zero coordinate is positive.
    pub fn canonical(&self) -> Self {
        match self.0.iter().find(|x| **x != 0.0) {
            Some(x) if *x < 0.0 => self.antipode(),
            _ => self.clone(),
        }
    }
}

impl Deref for Direction {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// An orthonormal basis of `ξ^⊥` together with its axis `ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub axis: Direction,
    /// `n - 1` unit vectors spanning `ξ^⊥`.
    pub basis: Vec<Vec<f64>>,
}

impl Frame {
    /// Maps frame coordinates `y ∈ R^{n-1}` into `ξ^⊥ ⊂ R^n`.
    pub fn embed_into(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (yk, bk) in y.iter().zip(&self.basis) {
            for (o, b) in out.iter_mut().zip(bk) {
                *o += yk * b;
            }
        }
    }
}

/// Householder frame: the reflector `H = I - 2vvᵀ/vᵀv` with
/// `v = ξ + sign(ξ_1) e_1` maps `e_1` to `∓ξ`; its columns `2..n` span `ξ^⊥`.
pub fn orthonormal_frame(xi: &Direction) -> Result<Frame> {
    let n = xi.dim();
    let norm = norm2(xi);
    if n == 0 || (norm - 1.0).abs() > 1e-12 {
        return Err(Error::domain(format!("frame axis must be a unit vector (norm {norm})")));
    }
    let sign = if xi[0] >= 0.0 { 1.0 } else { -1.0 };
    let mut v = xi.to_vec();
    v[0] += sign;
    let vtv = dot(&v, &v);
    let basis = (1..n)
        .map(|k| {
            let scale = 2.0 * v[k] / vtv;
            (0..n).map(|i| if i == k { 1.0 } else { 0.0 } - scale * v[i]).collect()
        })
        .collect();
    Ok(Frame { axis: xi.clone(), basis })
}

/// Integration estimate; `stderr` is zero for deterministic rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// Nodes and weights on `S^{d}` embedded in `R^{ambient_dim}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereGrid {
    ambient_dim: usize,
    intrinsic_dim: usize,
    /// Row-major, `ambient_dim` coordinates per node.
    nodes: Vec<f64>,
    weights: Vec<f64>,
    spec: GridSpec,
}

impl SphereGrid {
    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.intrinsic_dim
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.ambient_dim..(i + 1) * self.ambient_dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.nodes.chunks_exact(self.ambient_dim).zip(self.weights.iter().copied())
    }

    pub fn total_weight(&self) -> f64 {
        crate::quad::compensated_sum(self.weights.iter().copied())
    }

    /// `Σ w_i f(θ_i)` with compensated summation in node order.
    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        let mut acc = CompensatedSum::default();
        for (node, w) in self.iter() {
            acc.add(w * f(node));
        }
        acc.value()
    }

    /// Like [`integrate`](Self::integrate) but takes precomputed node values.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.len());
        let mut acc = CompensatedSum::default();
        for (v, w) in values.iter().zip(&self.weights) {
            acc.add(w * v);
        }
        acc.value()
    }

    /// Estimate with a standard error computed from antipodal pair averages
    /// (Monte Carlo grids only; product rules report zero).
    pub fn estimate_values(&self, values: &[f64]) -> Estimate {
        let value = self.integrate_values(values);
        if self.spec.scheme != Scheme::MonteCarlo || self.len() < 4 {
            return Estimate { value, stderr: 0.0 };
        }
        let half = self.len() / 2;
        let total = self.total_weight();
        let pairs: Vec<f64> = (0..half).map(|i| 0.5 * (values[i] + values[i + half])).collect();
        let mean = crate::quad::compensated_sum(pairs.iter().copied()) / half as f64;
        let var = pairs.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (half as f64 - 1.0);
        Estimate { value, stderr: total * (var / half as f64).sqrt() }
    }

    pub fn estimate(&self, f: impl FnMut(&[f64]) -> f64) -> Estimate {
        let values: Vec<f64> = self.nodes.chunks_exact(self.ambient_dim).map(f).collect();
        self.estimate_values(&values)
    }

    /// Writes one record per node: the coordinates followed by the weight,
    /// all as little-endian `f64`.
    pub fn write_binary(&self, mut out: impl Write) -> io::Result<()> {
        let mut buf = Vec::with_capacity(self.len() * (self.ambient_dim + 1) * 8);
        for (node, w) in self.iter() {
            for x in node {
                buf.extend_from_slice(&x.to_le_bytes());
            }
            buf.extend_from_slice(&w.to_le_bytes());
        }
        out.write_all(&buf)
    }

    /// Reads records produced by [`write_binary`](Self::write_binary).
    pub fn read_binary(mut input: impl Read, ambient_dim: usize, intrinsic_dim: usize, spec: GridSpec) -> Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes).map_err(|e| Error::data(format!("reading grid dump: {e}")))?;
        let record = (ambient_dim + 1) * 8;
        if bytes.is_empty() || bytes.len() % record != 0 {
            return Err(Error::data(format!(
                "grid dump length {} is not a multiple of the {record}-byte record size",
                bytes.len()
            )));
        }
        let mut nodes = Vec::with_capacity(bytes.len() / 8);
        let mut weights = Vec::with_capacity(bytes.len() / record);
        for rec in bytes.chunks_exact(record) {
            let mut vals = rec.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap()));
            nodes.extend(vals.by_ref().take(ambient_dim));
            weights.push(vals.next().unwrap());
        }
        Ok(Self { ambient_dim, intrinsic_dim, nodes, weights, spec })
    }

    fn from_half(
        ambient_dim: usize,
        intrinsic_dim: usize,
        half_nodes: Vec<f64>,
        half_weights: Vec<f64>,
        spec: GridSpec,
    ) -> Self {
        let mut nodes = half_nodes;
        let half_len = nodes.len();
        nodes.reserve(half_len);
        for i in 0..half_len {
            let x = -nodes[i];
            nodes.push(x);
        }
        let mut weights = half_weights;
        weights.extend_from_within(..);
        Self { ambient_dim, intrinsic_dim, nodes, weights, spec }
    }
}

/// Half of the product rule on `S^d ⊂ R^{d+1}`: `(cos φ, sin φ · ω)` with `ω`
/// from the half rule on `S^{d-1}`.
fn product_half(d: usize, level: usize) -> (Vec<f64>, Vec<f64>) {
    match d {
        0 => (vec![1.0], vec![1.0]),
        1 => {
            let step = PI / level as f64;
            let mut nodes = Vec::with_capacity(2 * level);
            for j in 0..level {
                let psi = (j as f64 + 0.5) * step;
                nodes.push(psi.cos());
                nodes.push(psi.sin());
            }
            (nodes, vec![step; level])
        }
        _ => {
            let (sub_nodes, sub_weights) = product_half(d - 1, level);
            // t = cos φ turns sin^{d-1}φ dφ into (1 - t²)^{(d-2)/2} dt
            let rule = GaussGegenbauer::cached(level, 0.5 * (d as f64 - 2.0));
            let mut nodes = Vec::with_capacity(level * sub_nodes.len() / d * (d + 1));
            let mut weights = Vec::with_capacity(level * sub_weights.len());
            for (&c, &wphi) in rule.nodes.iter().zip(&rule.weights).rev() {
                let s = (1.0 - c * c).sqrt();
                for (omega, wo) in sub_nodes.chunks_exact(d).zip(&sub_weights) {
                    nodes.push(c);
                    nodes.extend(omega.iter().map(|x| s * x));
                    weights.push(wphi * wo);
                }
            }
            (nodes, weights)
        }
    }
}

fn monte_carlo_half(d: usize, level: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    if d == 0 {
        return (vec![1.0], vec![1.0]);
    }
    let count = level * level;
    let total = scalars::sphere_area(d + 1).expect("d + 1 >= 1");
    let w = total / (2 * count) as f64;
    let mut stream = rng::stream(seed, 0x5348_0000 + d as u64);
    let mut nodes = Vec::with_capacity(count * (d + 1));
    for _ in 0..count {
        nodes.extend(rng::unit_vector(&mut stream, d + 1));
    }
    (nodes, vec![w; count])
}

type GridKey = (usize, GridSpec);

static REFERENCE_GRIDS: Lazy<Mutex<HashMap<GridKey, Arc<SphereGrid>>>> = Lazy::new(Default::default);

fn cache_file(dir: &Path, d: usize, spec: &GridSpec) -> PathBuf {
    dir.join(format!("grid-n{}-d{}-{}-l{}-s{}.bin", d + 1, d, spec.scheme.short_name(), spec.level, spec.seed))
}

fn build_reference(d: usize, spec: GridSpec) -> SphereGrid {
    // only Monte Carlo grids depend on the seed
    let spec = match spec.scheme {
        Scheme::ProductGauss => GridSpec { seed: 0, ..spec },
        Scheme::MonteCarlo => spec,
    };
    let dir = std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from);
    if let Some(dir) = &dir {
        if let Ok(file) = fs::File::open(cache_file(dir, d, &spec)) {
            if let Ok(grid) = SphereGrid::read_binary(io::BufReader::new(file), d + 1, d, spec) {
                return grid;
            }
        }
    }
    let (nodes, weights) = match spec.scheme {
        Scheme::ProductGauss => product_half(d, spec.level),
        Scheme::MonteCarlo => monte_carlo_half(d, spec.level, spec.seed),
    };
    let grid = SphereGrid::from_half(d + 1, d, nodes, weights, spec);
    if let Some(dir) = &dir {
        // best effort; an unwritable cache only costs recomputation
        let _ = fs::create_dir_all(dir)
            .and_then(|_| fs::File::create(cache_file(dir, d, &spec)))
            .and_then(|f| grid.write_binary(io::BufWriter::new(f)));
    }
    grid
}

/// Shared rule on `S^d ⊂ R^{d+1}`; no dimension or scheme checks.
fn reference_grid(d: usize, spec: GridSpec) -> Arc<SphereGrid> {
    let key = (d, spec);
    if let Some(grid) = REFERENCE_GRIDS.lock().get(&key) {
        return grid.clone();
    }
    let grid = Arc::new(build_reference(d, spec));
    REFERENCE_GRIDS.lock().entry(key).or_insert(grid).clone()
}

/// Quadrature rule on the full sphere `S^{n-1}`.
pub fn sphere_grid(n: usize, spec: GridSpec) -> Result<Arc<SphereGrid>> {
    if n < 2 {
        return Err(Error::domain(format!("sphere grids need n >= 2, got {n}")));
    }
    spec.validate(n)?;
    Ok(reference_grid(n - 1, spec))
}

/// Rule on the great subsphere `S^{n-1} ∩ ξ^⊥`, kept in frame coordinates and
/// mapped through the frame on the fly.
#[derive(Debug, Clone)]
pub struct SubsphereRule {
    frame: Frame,
    reference: Arc<SphereGrid>,
}

impl SubsphereRule {
    pub fn new(xi: &Direction, spec: GridSpec) -> Result<Self> {
        let n = xi.dim();
        if n < 2 {
            return Err(Error::domain(format!("subsphere rules need n >= 2, got {n}")));
        }
        spec.validate(n)?;
        // ξ and −ξ share one frame, so the rule is exactly even in ξ
        let frame = orthonormal_frame(&xi.canonical())?;
        Ok(Self { frame, reference: reference_grid(n - 2, spec) })
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn len(&self) -> usize {
        self.reference.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reference.is_empty()
    }

    pub fn spec(&self) -> GridSpec {
        self.reference.spec
    }

    /// Visits every mapped node with its weight.
    pub fn for_each_node(&self, mut visit: impl FnMut(&[f64], f64)) {
        let mut x = vec![0.0; self.frame.axis.dim()];
        for (y, w) in self.reference.iter() {
            self.frame.embed_into(y, &mut x);
            visit(&x, w);
        }
    }

    pub fn node_values(&self, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
        let mut values = Vec::with_capacity(self.len());
        self.for_each_node(|x, _| values.push(f(x)));
        values
    }

    pub fn integrate(&self, f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.reference.integrate_values(&self.node_values(f))
    }

    pub fn estimate(&self, f: impl FnMut(&[f64]) -> f64) -> Estimate {
        self.reference.estimate_values(&self.node_values(f))
    }

    /// Materializes the mapped nodes as a standalone grid.
    pub fn to_grid(&self) -> SphereGrid {
        let n = self.frame.axis.dim();
        let mut nodes = Vec::with_capacity(self.len() * n);
        self.for_each_node(|x, _| nodes.extend_from_slice(x));
        SphereGrid {
            ambient_dim: n,
            intrinsic_dim: n - 2,
            nodes,
            weights: self.reference.weights.clone(),
            spec: self.reference.spec,
        }
    }
}

/// Materialized grid on `S^{n-1} ∩ ξ^⊥` with total weight `|S^{n-2}|`.
pub fn subsphere_grid(xi: &Direction, spec: GridSpec) -> Result<SphereGrid> {
    Ok(SubsphereRule::new(xi, spec)?.to_grid())
}
