//! The spherical Radon transform `Rf(ξ) = ∫_{S^{n-1} ∩ ξ^⊥} f`, its
//! self-duality and the pairing identity for intersection bodies with a
//! continuous sphere density.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bodies::{check_grid, StarBody};
use crate::error::{Error, Result};
use crate::quad::CompensatedSum;
use crate::sphere::{dot, Direction, GridSpec, SphereGrid, SubsphereRule};

pub type SphereFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A continuous function on `S^{n-1}`.
#[derive(Clone)]
pub struct SphereFunction {
    dim: usize,
    eval: Arc<SphereFn>,
    even: bool,
    label: String,
}

impl fmt::Debug for SphereFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SphereFunction({}, n={})", self.label, self.dim)
    }
}

const EVENNESS_SAMPLES: usize = 64;

impl SphereFunction {
    /// Wraps `f`; when `even` is set, evenness is checked on seeded samples.
    pub fn new(dim: usize, even: bool, label: impl Into<String>, f: Arc<SphereFn>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::domain(format!("sphere functions need n >= 2, got {dim}")));
        }
        let g = Self { dim, eval: f, even, label: label.into() };
        if even {
            let mut stream = crate::rng::stream(0x5F, dim as u64);
            for _ in 0..EVENNESS_SAMPLES {
                let theta = crate::rng::unit_vector(&mut stream, dim);
                let minus: Vec<f64> = theta.iter().map(|t| -t).collect();
                let (a, b) = (g.eval(&theta), g.eval(&minus));
                if (a - b).abs() > 1e-10 * (1.0 + a.abs()) {
                    return Err(Error::data(format!("{} is not even at {theta:?}: {a} vs {b}", g.label)));
                }
            }
        }
        Ok(g)
    }

    pub fn constant(dim: usize, c: f64) -> Result<Self> {
        Self::new(dim, true, format!("{c}"), Arc::new(move |_| c))
    }

    /// `θ ↦ θ_i²`.
    pub fn coordinate_square(dim: usize, i: usize) -> Result<Self> {
        if i >= dim {
            return Err(Error::domain(format!("coordinate {i} out of range for n = {dim}")));
        }
        Self::new(dim, true, format!("theta{}^2", i + 1), Arc::new(move |t| t[i] * t[i]))
    }

    /// `θ ↦ ρ_L(θ)^{n-1} / (n-1)`, the sphere density whose Radon transform
    /// is the radial function of `IB(L)`.
    pub fn section_density(body: &StarBody) -> Result<Self> {
        let body = body.clone();
        let k = body.dim() as i32 - 1;
        let label = format!("rho^{k}/{k} of {}", body.label());
        Self::new(body.dim(), false, label, Arc::new(move |t| body.radial(t).powi(k) / k as f64))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_even(&self) -> bool {
        self.even
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, theta: &[f64]) -> f64 {
        (self.eval)(theta)
    }

    /// `αf + βg`.
    pub fn combine(alpha: f64, f: &SphereFunction, beta: f64, g: &SphereFunction) -> Result<Self> {
        if f.dim != g.dim {
            return Err(Error::domain("sphere functions live on different spheres"));
        }
        let (fe, ge) = (f.eval.clone(), g.eval.clone());
        Ok(Self {
            dim: f.dim,
            eval: Arc::new(move |t| alpha * fe(t) + beta * ge(t)),
            even: f.even && g.even,
            label: format!("{alpha}*({})+{beta}*({})", f.label, g.label),
        })
    }
}

/// Seeded smooth even trigonometric sums `c_0 + Σ_k a_k cos(ω_k ⟨v_k, θ⟩)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrigPolynomial {
    pub offset: f64,
    pub terms: Vec<TrigTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrigTerm {
    pub amplitude: f64,
    pub frequency: f64,
    pub axis: Vec<f64>,
}

impl TrigPolynomial {
    pub fn random(dim: usize, terms: usize, seed: u64) -> Self {
        let mut stream = crate::rng::stream(seed, 0x7219);
        let offset = stream.random_range(0.5..1.5);
        let terms = (0..terms)
            .map(|_| TrigTerm {
                amplitude: stream.random_range(-1.0..1.0),
                frequency: stream.random_range(0.5..3.0),
                axis: crate::rng::unit_vector(&mut stream, dim),
            })
            .collect();
        Self { offset, terms }
    }

    pub fn eval(&self, theta: &[f64]) -> f64 {
        self.offset + self.terms.iter().map(|t| t.amplitude * (t.frequency * dot(&t.axis, theta)).cos()).sum::<f64>()
    }

    pub fn to_function(&self, dim: usize, label: impl Into<String>) -> Result<SphereFunction> {
        if self.terms.iter().any(|t| t.axis.len() != dim) {
            return Err(Error::domain("trigonometric sum has the wrong dimension"));
        }
        let p = self.clone();
        SphereFunction::new(dim, true, label, Arc::new(move |t| p.eval(t)))
    }
}

fn check_dims(f: &SphereFunction, n: usize) -> Result<()> {
    if f.dim != n {
        return Err(Error::domain(format!("{} lives on S^{}, expected S^{}", f.label, f.dim - 1, n - 1)));
    }
    Ok(())
}

/// `Rf(ξ)` by the subsphere rule at `ξ`.
pub fn radon(f: &SphereFunction, xi: &Direction, spec: GridSpec) -> Result<f64> {
    check_dims(f, xi.dim())?;
    Ok(SubsphereRule::new(xi, spec)?.integrate(|t| f.eval(t)))
}

/// `Rf` at every node of `grid`. Node `i` and node `i + len/2` are antipodal
/// and share a subsphere, so only the first half is evaluated.
pub fn radon_on_grid(f: &SphereFunction, grid: &SphereGrid, spec: GridSpec) -> Result<Vec<f64>> {
    check_dims(f, grid.ambient_dim())?;
    let half = grid.len() / 2;
    let first: Vec<f64> = (0..half)
        .into_par_iter()
        .map(|i| {
            let xi = Direction::normalized(grid.node(i).to_vec())?;
            radon(f, &xi, spec)
        })
        .collect::<Result<_>>()?;
    let mut all = first.clone();
    all.extend_from_slice(&first);
    Ok(all)
}

/// Both sides of a pairing identity and their absolute difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Pairing {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

impl Pairing {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self { lhs, rhs, residual: (lhs - rhs).abs() }
    }

    /// Residual relative to the magnitude of the pairing.
    pub fn relative(&self) -> f64 {
        self.residual / self.lhs.abs().max(self.rhs.abs()).max(f64::MIN_POSITIVE)
    }
}

fn weighted(grid: &SphereGrid, a: &[f64], b: impl Fn(&[f64]) -> f64) -> f64 {
    let mut acc = CompensatedSum::default();
    for (i, (theta, w)) in grid.iter().enumerate() {
        acc.add(w * a[i] * b(theta));
    }
    acc.value()
}

/// `∫ Rf·g` and `∫ f·Rg` over `grid`, inner transforms at resolution `spec`.
pub fn selfdual_sides(f: &SphereFunction, g: &SphereFunction, grid: &SphereGrid, spec: GridSpec) -> Result<Pairing> {
    check_dims(g, f.dim)?;
    let rf = radon_on_grid(f, grid, spec)?;
    let rg = radon_on_grid(g, grid, spec)?;
    Ok(Pairing::new(weighted(grid, &rf, |t| g.eval(t)), weighted(grid, &rg, |t| f.eval(t))))
}

/// `|∫ Rf·g − ∫ f·Rg|`.
pub fn selfdual_residual(f: &SphereFunction, g: &SphereFunction, grid: &SphereGrid, spec: GridSpec) -> Result<f64> {
    Ok(selfdual_sides(f, g, grid, spec)?.residual)
}

/// `∫ ρ_{IB(L)} f` against `∫ Rf · ρ_L^{n-1}/(n-1)`.
pub fn ib_pairing_sides(l: &StarBody, f: &SphereFunction, grid: &SphereGrid, spec: GridSpec) -> Result<Pairing> {
    check_grid(l, grid)?;
    check_dims(f, l.dim())?;
    let density = SphereFunction::section_density(l)?;
    // ρ_{IB(L)}(θ) = |L ∩ θ^⊥| = R(ρ_L^{n-1}/(n-1))(θ)
    let rho_ib = radon_on_grid(&density, grid, spec)?;
    let rf = radon_on_grid(f, grid, spec)?;
    Ok(Pairing::new(weighted(grid, &rho_ib, |t| f.eval(t)), weighted(grid, &rf, |t| density.eval(t))))
}

pub fn ib_pairing_residual(l: &StarBody, f: &SphereFunction, grid: &SphereGrid, spec: GridSpec) -> Result<f64> {
    Ok(ib_pairing_sides(l, f, grid, spec)?.residual)
}
