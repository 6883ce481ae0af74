//! Origin-symmetric star bodies described by their radial function.
//!
//! A [`StarBody`] is a cheap, clonable handle around an immutable
//! [`BodyKind`]. Everything downstream only ever asks for `ρ_K(θ)` on unit
//! vectors; membership, Minkowski functionals and volumes are derived from
//! it.

mod spec;
mod tabulated;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use parking_lot::RwLock;

use crate::error::{Error, Result};
use crate::measures;
use crate::scalars;
use crate::sphere::{dot, norm2, Direction, GridSpec, SphereGrid};

pub use spec::{BodySpec, Facet};
pub use tabulated::Tabulated;

pub type RadialFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Solid ellipsoid `{x : xᵀ M x <= 1}` with `M` symmetric positive-definite.
#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    matrix: DMatrix<f64>,
}

impl Ellipsoid {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || matrix.ncols() != n {
            return Err(Error::data("ellipsoid matrix must be square and non-empty"));
        }
        for i in 0..n {
            for j in 0..i {
                let (a, b) = (matrix[(i, j)], matrix[(j, i)]);
                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::data(format!("ellipsoid matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::data("ellipsoid matrix has non-finite entries"));
        }
        let sym = (&matrix + matrix.transpose()) * 0.5;
        let min_eig = sym.clone().symmetric_eigenvalues().min();
        if !(min_eig > 0.0) {
            return Err(Error::data(format!(
                "ellipsoid matrix is not positive-definite (smallest eigenvalue {min_eig})"
            )));
        }
        Ok(Self { matrix: sym })
    }

    pub fn from_row_major(n: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::data(format!("ellipsoid matrix needs {} entries, got {}", n * n, entries.len())));
        }
        Self::new(DMatrix::from_row_slice(n, n, entries))
    }

    /// `M = diag(d)`.
    pub fn diagonal(d: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    /// Axis-aligned ellipsoid with the given semi-axis lengths.
    pub fn from_semi_axes(axes: &[f64]) -> Result<Self> {
        let d: Vec<f64> = axes.iter().map(|a| 1.0 / (a * a)).collect();
        Self::diagonal(&d)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn row_major(&self) -> Vec<f64> {
        self.matrix.transpose().iter().copied().collect()
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for (i, xi) in x.iter().enumerate().take(n) {
            let row: f64 = x.iter().enumerate().take(n).map(|(j, xj)| self.matrix[(i, j)] * xj).sum();
            acc += xi * row;
        }
        acc
    }

    pub fn radial(&self, theta: &[f64]) -> f64 {
        self.quadratic_form(theta).sqrt().recip()
    }

    /// `ln |E| = ln |B_2^n| − ½ ln det M`.
    pub fn log_volume(&self) -> f64 {
        let ln_det = self.matrix.clone().cholesky().map_or_else(
            || self.matrix.determinant().ln(),
            |c| 2.0 * c.l().diagonal().iter().map(|x| x.ln()).sum::<f64>(),
        );
        scalars::log_unit_ball_volume(self.dim()).expect("dim >= 1") - 0.5 * ln_det
    }

    pub fn volume(&self) -> f64 {
        self.log_volume().exp()
    }

    /// `t · E`, i.e. `M / t²`.
    pub fn scaled(&self, t: f64) -> Self {
        Self { matrix: &self.matrix / (t * t) }
    }

    /// `Q E` for an orthogonal `Q`: `M ↦ Q M Qᵀ`.
    pub fn rotated(&self, q: &DMatrix<f64>) -> Self {
        let m = q * &self.matrix * q.transpose();
        Self { matrix: (&m + m.transpose()) * 0.5 }
    }

    fn half_widths(&self) -> Vec<f64> {
        match self.matrix.clone().try_inverse() {
            Some(inv) => (0..self.dim()).map(|i| inv[(i, i)].sqrt()).collect(),
            None => vec![f64::INFINITY; self.dim()],
        }
    }
}

/// Symmetric polytope `{x : ⟨a_i, x⟩ <= b_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HPolytope {
    dim: usize,
    facets: Vec<Facet>,
}

impl HPolytope {
    /// Validates dimensions, positive offsets, symmetry of the facet list
    /// (each `(a, b)` has a partner `(-a, b)`) and boundedness.
    pub fn new(dim: usize, facets: Vec<Facet>) -> Result<Self> {
        if facets.is_empty() {
            return Err(Error::data("h-polytope needs at least one facet"));
        }
        for (i, f) in facets.iter().enumerate() {
            if f.normal.len() != dim {
                return Err(Error::data(format!("facets[{i}]: normal has {} entries, expected {dim}", f.normal.len())));
            }
            if !(f.offset > 0.0) || !f.offset.is_finite() {
                return Err(Error::data(format!(
                    "facets[{i}]: offset must be positive so the origin is interior, got {}",
                    f.offset
                )));
            }
            if norm2(&f.normal) == 0.0 {
                return Err(Error::data(format!("facets[{i}]: zero normal")));
            }
        }
        for (i, f) in facets.iter().enumerate() {
            let mirrored = facets.iter().any(|g| {
                (g.offset - f.offset).abs() <= 1e-12 * f.offset.max(1.0)
                    && g.normal.iter().zip(&f.normal).all(|(x, y)| (x + y).abs() <= 1e-12 * (1.0 + y.abs()))
            });
            if !mirrored {
                return Err(Error::data(format!(
                    "facets[{i}]: no antipodal partner (-a, b); facet list must be symmetric"
                )));
            }
        }
        let a = DMatrix::from_fn(facets.len(), dim, |i, j| facets[i].normal[j]);
        if a.rank(1e-10) < dim {
            return Err(Error::data("h-polytope is unbounded: facet normals do not span the space"));
        }
        Ok(Self { dim, facets })
    }

    /// Builds the symmetric polytope `{x : |⟨a_i, x⟩| <= b_i}` from one facet per pair.
    pub fn symmetric(dim: usize, half: &[Facet]) -> Result<Self> {
        let mut facets = Vec::with_capacity(2 * half.len());
        for f in half {
            facets.push(f.clone());
            facets.push(Facet { normal: f.normal.iter().map(|x| -x).collect(), offset: f.offset });
        }
        Self::new(dim, facets)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    /// `ρ(θ) = min_{⟨a_i,θ⟩ > 0} b_i / ⟨a_i, θ⟩`.
    pub fn radial(&self, theta: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        for f in &self.facets {
            let d = dot(&f.normal, theta);
            if d > 0.0 {
                best = best.min(f.offset / d);
            }
        }
        best
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.facets.iter().all(|f| dot(&f.normal, x) <= f.offset)
    }

    /// Exact per-axis half-widths of the bounding box, by linear programming.
    pub fn half_widths(&self) -> Vec<f64> {
        use minilp::{ComparisonOp, OptimizationDirection, Problem};
        (0..self.dim)
            .map(|axis| {
                let mut lp = Problem::new(OptimizationDirection::Maximize);
                let vars: Vec<_> = (0..self.dim)
                    .map(|j| lp.add_var(if j == axis { 1.0 } else { 0.0 }, (f64::NEG_INFINITY, f64::INFINITY)))
                    .collect();
                for f in &self.facets {
                    let expr: Vec<_> = vars.iter().copied().zip(f.normal.iter().copied()).collect();
                    lp.add_constraint(&expr[..], ComparisonOp::Le, f.offset);
                }
                // bounded by construction; a solver failure falls back to "unknown"
                lp.solve().map_or(f64::INFINITY, |s| s.objective())
            })
            .collect()
    }
}

/// `IB(L)`: radial value at `ξ` is `|L ∩ ξ^⊥|`, computed by subsphere
/// quadrature and memoized per direction.
pub struct IntersectionBody {
    source: StarBody,
    spec: GridSpec,
    memo: RwLock<HashMap<Vec<u64>, f64>>,
}

impl IntersectionBody {
    pub fn source(&self) -> &StarBody {
        &self.source
    }

    pub fn grid_spec(&self) -> GridSpec {
        self.spec
    }

    fn radial(&self, theta: &[f64]) -> f64 {
        // ξ and −ξ share a hyperplane; key on a sign-canonical representative
        let flip = theta.iter().find(|x| **x != 0.0).is_some_and(|x| *x < 0.0);
        let key: Vec<u64> = theta.iter().map(|x| if flip { -x } else { *x }.to_bits()).collect();
        if let Some(v) = self.memo.read().get(&key) {
            return *v;
        }
        let xi = Direction::normalized(key.iter().map(|b| f64::from_bits(*b)).collect())
            .expect("radial oracle evaluated at a unit vector");
        let value =
            measures::section_volume(&self.source, &xi, self.spec).expect("grid spec validated at construction");
        // concurrent writers insert identical values
        self.memo.write().insert(key, value);
        value
    }

    pub fn memo_len(&self) -> usize {
        self.memo.read().len()
    }
}

impl fmt::Debug for IntersectionBody {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IntersectionBody")
            .field("source", &self.source)
            .field("spec", &self.spec)
            .finish_non_exhaustive()
    }
}

pub enum BodyKind {
    Ball {
        radius: f64,
    },
    /// Unit ball of `ℓ_p`, `p >= 1` for convexity (any `p > 0` is a star body).
    LpBall {
        p: f64,
    },
    Cube {
        halfwidth: f64,
    },
    /// Unit ball of `ℓ_1`.
    CrossPolytope,
    Ellipsoid(Ellipsoid),
    HPolytope(HPolytope),
    Tabulated(Tabulated),
    Intersection(IntersectionBody),
    Scaled {
        inner: StarBody,
        factor: f64,
    },
    /// `Q · inner`, with `Q` orthogonal (row-major).
    Rotated {
        inner: StarBody,
        rotation: DMatrix<f64>,
    },
    Custom {
        radial: Arc<RadialFn>,
        convex: bool,
        label: String,
    },
}

impl fmt::Debug for BodyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BodyKind::Ball { radius } => write!(f, "Ball({radius})"),
            BodyKind::LpBall { p } => write!(f, "LpBall({p})"),
            BodyKind::Cube { halfwidth } => write!(f, "Cube({halfwidth})"),
            BodyKind::CrossPolytope => write!(f, "CrossPolytope"),
            BodyKind::Ellipsoid(e) => write!(f, "Ellipsoid({:?})", e.row_major()),
            BodyKind::HPolytope(p) => write!(f, "HPolytope({} facets)", p.facets.len()),
            BodyKind::Tabulated(t) => write!(f, "Tabulated({} values)", t.len()),
            BodyKind::Intersection(ib) => write!(f, "{ib:?}"),
            BodyKind::Scaled { inner, factor } => write!(f, "Scaled({factor}, {inner:?})"),
            BodyKind::Rotated { inner, .. } => write!(f, "Rotated({inner:?})"),
            BodyKind::Custom { label, .. } => write!(f, "Custom({label})"),
        }
    }
}

/// Origin-symmetric star body in `R^n`.
#[derive(Clone, Debug)]
pub struct StarBody {
    dim: usize,
    kind: Arc<BodyKind>,
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        Err(Error::data(format!("body dimension must be at least 2, got {dim}")))
    } else {
        Ok(())
    }
}

impl StarBody {
    fn wrap(dim: usize, kind: BodyKind) -> Self {
        Self { dim, kind: Arc::new(kind) }
    }

    pub fn unit_ball(dim: usize) -> Result<Self> {
        Self::ball(dim, 1.0)
    }

    pub fn ball(dim: usize, radius: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::data(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Self::wrap(dim, BodyKind::Ball { radius }))
    }

    pub fn lp_ball(dim: usize, p: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(p > 0.0) || p.is_nan() {
            return Err(Error::data(format!("lp-ball exponent p must be positive, got {p}")));
        }
        if p.is_infinite() {
            return Self::cube(dim, 1.0);
        }
        Ok(Self::wrap(dim, BodyKind::LpBall { p }))
    }

    pub fn cube(dim: usize, halfwidth: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(halfwidth > 0.0) || !halfwidth.is_finite() {
            return Err(Error::data(format!("cube halfwidth must be positive, got {halfwidth}")));
        }
        Ok(Self::wrap(dim, BodyKind::Cube { halfwidth }))
    }

    pub fn cross_polytope(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self::wrap(dim, BodyKind::CrossPolytope))
    }

    pub fn ellipsoid(e: Ellipsoid) -> Result<Self> {
        check_dim(e.dim())?;
        Ok(Self::wrap(e.dim(), BodyKind::Ellipsoid(e)))
    }

    pub fn h_polytope(p: HPolytope) -> Result<Self> {
        check_dim(p.dim())?;
        Ok(Self::wrap(p.dim(), BodyKind::HPolytope(p)))
    }

    pub fn tabulated(t: Tabulated) -> Result<Self> {
        check_dim(t.dim())?;
        Ok(Self::wrap(t.dim(), BodyKind::Tabulated(t)))
    }

    /// A body given by an arbitrary radial oracle. The oracle must be even
    /// and positive; `convex` is trusted as stated.
    pub fn custom(dim: usize, label: impl Into<String>, convex: bool, radial: Arc<RadialFn>) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self::wrap(dim, BodyKind::Custom { radial, convex, label: label.into() }))
    }

    /// `t · K`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(Error::data(format!("scale factor must be positive, got {factor}")));
        }
        Ok(match &*self.kind {
            BodyKind::Scaled { inner, factor: f } => {
                Self::wrap(self.dim, BodyKind::Scaled { inner: inner.clone(), factor: f * factor })
            }
            _ => Self::wrap(self.dim, BodyKind::Scaled { inner: self.clone(), factor }),
        })
    }

    /// `Q · K` for an orthogonal `Q`.
    pub fn rotated(&self, rotation: DMatrix<f64>) -> Result<Self> {
        let n = self.dim;
        if rotation.nrows() != n || rotation.ncols() != n {
            return Err(Error::data(format!("rotation must be {n}x{n}")));
        }
        let gram = rotation.transpose() * &rotation;
        if (gram - DMatrix::<f64>::identity(n, n)).amax() > 1e-10 {
            return Err(Error::data("rotation matrix is not orthogonal"));
        }
        Ok(Self::wrap(n, BodyKind::Rotated { inner: self.clone(), rotation }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &BodyKind {
        &self.kind
    }

    /// `ρ_K(θ)` for a unit vector `θ`.
    pub fn radial(&self, theta: &[f64]) -> f64 {
        match &*self.kind {
            BodyKind::Ball { radius } => *radius,
            BodyKind::LpBall { p } => {
                let p = *p;
                let s: f64 = theta.iter().map(|x| x.abs().powf(p)).sum();
                s.powf(-1.0 / p)
            }
            BodyKind::Cube { halfwidth } => halfwidth / theta.iter().fold(0.0_f64, |m, x| m.max(x.abs())),
            BodyKind::CrossPolytope => 1.0 / theta.iter().map(|x| x.abs()).sum::<f64>(),
            BodyKind::Ellipsoid(e) => e.radial(theta),
            BodyKind::HPolytope(p) => p.radial(theta),
            BodyKind::Tabulated(t) => t.radial(theta),
            BodyKind::Intersection(ib) => ib.radial(theta),
            BodyKind::Scaled { inner, factor } => factor * inner.radial(theta),
            BodyKind::Rotated { inner, rotation } => {
                // ρ_{QK}(θ) = ρ_K(Qᵀθ)
                let n = self.dim;
                let mut y = vec![0.0; n];
                for (j, yj) in y.iter_mut().enumerate() {
                    for (i, t) in theta.iter().enumerate() {
                        *yj += rotation[(i, j)] * t;
                    }
                }
                inner.radial(&y)
            }
            BodyKind::Custom { radial, .. } => radial(theta),
        }
    }

    /// `‖x‖_K = |x|₂ / ρ_K(x/|x|₂)`, zero at the origin.
    pub fn minkowski_functional(&self, x: &[f64]) -> f64 {
        let r = norm2(x);
        if r == 0.0 {
            return 0.0;
        }
        let theta: Vec<f64> = x.iter().map(|v| v / r).collect();
        r / self.radial(&theta)
    }

    /// Direct membership test for the closed-form convex bodies; falls back
    /// to the gauge otherwise.
    pub fn contains(&self, x: &[f64]) -> bool {
        match &*self.kind {
            BodyKind::Ball { radius } => norm2(x) <= *radius,
            BodyKind::LpBall { p } => x.iter().map(|v| v.abs().powf(*p)).sum::<f64>() <= 1.0,
            BodyKind::Cube { halfwidth } => x.iter().all(|v| v.abs() <= *halfwidth),
            BodyKind::CrossPolytope => x.iter().map(|v| v.abs()).sum::<f64>() <= 1.0,
            BodyKind::Ellipsoid(e) => e.quadratic_form(x) <= 1.0,
            BodyKind::HPolytope(p) => p.contains(x),
            BodyKind::Scaled { inner, factor } => {
                let y: Vec<f64> = x.iter().map(|v| v / factor).collect();
                inner.contains(&y)
            }
            BodyKind::Rotated { inner, rotation } => {
                let y = (rotation.transpose() * DVector::from_column_slice(x)).data.as_vec().clone();
                inner.contains(&y)
            }
            _ => self.minkowski_functional(x) <= 1.0,
        }
    }

    pub fn is_convex(&self) -> bool {
        match &*self.kind {
            BodyKind::Ball { .. } | BodyKind::Cube { .. } | BodyKind::CrossPolytope => true,
            BodyKind::Ellipsoid(_) | BodyKind::HPolytope(_) => true,
            BodyKind::LpBall { p } => *p >= 1.0,
            BodyKind::Scaled { inner, .. } | BodyKind::Rotated { inner, .. } => inner.is_convex(),
            BodyKind::Custom { convex, .. } => *convex,
            BodyKind::Tabulated(_) | BodyKind::Intersection(_) => false,
        }
    }

    /// True when the body is an intersection body by construction.
    pub fn is_intersection_body(&self) -> bool {
        match &*self.kind {
            BodyKind::Ball { .. } | BodyKind::Ellipsoid(_) | BodyKind::Intersection(_) => true,
            BodyKind::Scaled { inner, .. } | BodyKind::Rotated { inner, .. } => inner.is_intersection_body(),
            _ => false,
        }
    }

    /// True when the radial function is smooth enough for spectral quadrature
    /// convergence (no kinks on the sphere).
    pub fn is_smooth(&self) -> bool {
        match &*self.kind {
            BodyKind::Ball { .. } | BodyKind::Ellipsoid(_) => true,
            BodyKind::LpBall { p } => *p >= 2.0 && p.fract() == 0.0 && (*p as u64).is_multiple_of(2),
            BodyKind::Intersection(ib) => ib.source.is_smooth(),
            BodyKind::Scaled { inner, .. } | BodyKind::Rotated { inner, .. } => inner.is_smooth(),
            _ => false,
        }
    }

    /// Per-axis half-widths of a box containing the body. Exact for the
    /// closed-form bodies; sampled with a 25% margin for oracle-only bodies.
    pub fn bounding_half_widths(&self) -> Vec<f64> {
        let n = self.dim;
        match &*self.kind {
            BodyKind::Ball { radius } => vec![*radius; n],
            BodyKind::LpBall { .. } | BodyKind::CrossPolytope => vec![1.0; n],
            BodyKind::Cube { halfwidth } => vec![*halfwidth; n],
            BodyKind::Ellipsoid(e) => e.half_widths(),
            BodyKind::HPolytope(p) => p.half_widths(),
            BodyKind::Scaled { inner, factor } => inner.bounding_half_widths().iter().map(|w| w * factor).collect(),
            BodyKind::Rotated { inner, rotation } => {
                let w = inner.bounding_half_widths();
                (0..n).map(|i| (0..n).map(|j| rotation[(i, j)].abs() * w[j]).sum()).collect()
            }
            BodyKind::Tabulated(_) | BodyKind::Intersection(_) | BodyKind::Custom { .. } => {
                vec![1.25 * self.sampled_max_radius(); n]
            }
        }
    }

    /// Upper bound on `max ρ_K`.
    pub fn max_radius(&self) -> f64 {
        let n = self.dim as f64;
        match &*self.kind {
            BodyKind::Ball { radius } => *radius,
            BodyKind::LpBall { p } => n.powf((0.5 - 1.0 / p).max(0.0)),
            BodyKind::Cube { halfwidth } => halfwidth * n.sqrt(),
            BodyKind::CrossPolytope => 1.0,
            BodyKind::Ellipsoid(e) => e.matrix.clone().symmetric_eigenvalues().min().sqrt().recip(),
            BodyKind::Scaled { inner, factor } => factor * inner.max_radius(),
            BodyKind::Rotated { inner, .. } => inner.max_radius(),
            _ => norm2(&self.bounding_half_widths()),
        }
    }

    fn sampled_max_radius(&self) -> f64 {
        let spec =
            if self.dim <= crate::sphere::MAX_PRODUCT_DIM { GridSpec::gauss(8) } else { GridSpec::monte_carlo(64, 0) };
        let grid = crate::sphere::sphere_grid(self.dim, spec).expect("valid default grid");
        grid.iter().map(|(t, _)| self.radial(t)).fold(0.0, f64::max)
    }

    /// Canonical description used in reports.
    pub fn describe(&self) -> serde_json::Value {
        match self.to_spec() {
            Some(spec) => serde_json::to_value(spec).expect("spec serializes"),
            None => match &*self.kind {
                BodyKind::Custom { label, .. } => {
                    serde_json::json!({"type": "custom", "dim": self.dim, "label": label})
                }
                BodyKind::Tabulated(t) => serde_json::json!({"type": "tabulated", "dim": self.dim, "values": t.len()}),
                BodyKind::Scaled { inner, factor } => {
                    serde_json::json!({"type": "scaled", "factor": factor, "of": inner.describe()})
                }
                BodyKind::Rotated { inner, rotation } => serde_json::json!({
                    "type": "rotated",
                    "matrix": rotation.transpose().iter().copied().collect::<Vec<f64>>(),
                    "of": inner.describe(),
                }),
                BodyKind::Intersection(ib) => {
                    serde_json::json!({"type": "intersection-body", "of": ib.source.describe()})
                }
                _ => unreachable!("closed-form bodies always have a spec"),
            },
        }
    }

    /// Short human-readable label (`cube`, `lp-ball(1.5)`, …).
    pub fn label(&self) -> String {
        match &*self.kind {
            BodyKind::Ball { radius } if *radius == 1.0 => "ball".into(),
            BodyKind::Ball { radius } => format!("ball(r={radius})"),
            BodyKind::LpBall { p } => format!("lp-ball({p})"),
            BodyKind::Cube { halfwidth } => format!("cube(h={halfwidth})"),
            BodyKind::CrossPolytope => "cross-polytope".into(),
            BodyKind::Ellipsoid(_) => "ellipsoid".into(),
            BodyKind::HPolytope(p) => format!("h-polytope({})", p.facets.len()),
            BodyKind::Tabulated(_) => "tabulated".into(),
            BodyKind::Intersection(ib) => format!("IB({})", ib.source.label()),
            BodyKind::Scaled { inner, factor } => format!("{factor}*{}", inner.label()),
            BodyKind::Rotated { inner, .. } => format!("rot({})", inner.label()),
            BodyKind::Custom { label, .. } => label.clone(),
        }
    }
}

/// `|K| = (1/n) Σ w_i ρ_K(θ_i)^n` on a full-sphere grid.
pub fn body_volume(body: &StarBody, grid: &SphereGrid) -> Result<f64> {
    check_grid(body, grid)?;
    let n = body.dim() as i32;
    Ok(grid.integrate(|t| body.radial(t).powi(n)) / n as f64)
}

pub(crate) fn check_grid(body: &StarBody, grid: &SphereGrid) -> Result<()> {
    if grid.ambient_dim() != body.dim() || grid.intrinsic_dim() + 1 != body.dim() {
        return Err(Error::domain(format!(
            "grid on S^{} in R^{} does not match a body in R^{}",
            grid.intrinsic_dim(),
            grid.ambient_dim(),
            body.dim()
        )));
    }
    Ok(())
}

/// The intersection body `IB(L)` of a star body, with sections evaluated at
/// the given subsphere resolution.
pub fn intersection_body_of(source: &StarBody, spec: GridSpec) -> Result<StarBody> {
    // surfaces capability errors now rather than inside the oracle
    crate::sphere::SubsphereRule::new(&Direction::axis(source.dim(), 0), spec)?;
    Ok(StarBody::wrap(
        source.dim(),
        BodyKind::Intersection(IntersectionBody { source: source.clone(), spec, memo: RwLock::new(HashMap::new()) }),
    ))
}

/// Haar-random rotation from the QR factorization of a Gaussian matrix.
pub fn random_rotation(n: usize, seed: u64) -> DMatrix<f64> {
    let mut stream = crate::rng::stream(seed, 0x524f_5400);
    let mut entries = vec![0.0; n * n];
    crate::rng::fill_normal(&mut stream, &mut entries);
    let qr = DMatrix::from_row_slice(n, n, &entries).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}
