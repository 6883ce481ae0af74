//! Maximum-volume inscribed ellipsoids of origin-symmetric convex bodies and
//! the sandwich `(1/√n)K ⊂ L ⊂ K` with `K = √n E`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::bodies::{body_volume, check_grid, BodyKind, Ellipsoid, Facet, HPolytope, StarBody};
use crate::error::{Error, Result};
use crate::sphere::{sphere_grid, GridSpec, SphereGrid, MAX_PRODUCT_DIM};

/// The solver stops once `max_i c_iᵀQ⁻¹c_i <= n + SOLVER_TOL`, which bounds
/// the relative volume gap of the ellipsoid by `SOLVER_TOL / 2`.
pub const SOLVER_TOL: f64 = 1e-7;
pub const SOLVER_MAX_ITERS: usize = 200_000;
/// Resolution of the tangent-facet sampling used for convex bodies without
/// a closed form.
pub const FACET_SAMPLING_LEVEL: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum JohnMethod {
    Analytic,
    Solver,
    FacetSampling,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JohnEllipsoid {
    pub ellipsoid: Ellipsoid,
    pub method: JohnMethod,
    pub iterations: usize,
    /// Factor applied to pull a sampled solution back inside the body
    /// (1 when no shrinking was needed).
    pub shrink: f64,
}

/// Maximum-volume origin-symmetric ellipsoid contained in a convex body.
pub fn inscribed_ellipsoid(l: &StarBody) -> Result<Ellipsoid> {
    Ok(john_ellipsoid(l)?.ellipsoid)
}

pub fn john_ellipsoid(l: &StarBody) -> Result<JohnEllipsoid> {
    if !l.is_convex() {
        return Err(Error::capability(format!("{} is not a convex body; no John ellipsoid", l.label())));
    }
    let n = l.dim();
    let analytic =
        |e: Ellipsoid| JohnEllipsoid { ellipsoid: e, method: JohnMethod::Analytic, iterations: 0, shrink: 1.0 };
    let ball = |r: f64| Ellipsoid::new(DMatrix::identity(n, n) / (r * r));
    Ok(match l.kind() {
        BodyKind::Ball { radius } => analytic(ball(*radius)?),
        BodyKind::LpBall { p } => analytic(ball((n as f64).powf((0.5 - 1.0 / p).min(0.0)))?),
        BodyKind::Cube { halfwidth } => analytic(ball(*halfwidth)?),
        BodyKind::CrossPolytope => analytic(ball(1.0 / (n as f64).sqrt())?),
        BodyKind::Ellipsoid(e) => analytic(e.clone()),
        BodyKind::HPolytope(p) => solve_polytope(p)?,
        BodyKind::Scaled { inner, factor } => {
            let j = john_ellipsoid(inner)?;
            JohnEllipsoid { ellipsoid: j.ellipsoid.scaled(*factor), ..j }
        }
        BodyKind::Rotated { inner, rotation } => {
            let j = john_ellipsoid(inner)?;
            JohnEllipsoid { ellipsoid: j.ellipsoid.rotated(rotation), ..j }
        }
        _ => facet_sampling(l)?,
    })
}

/// Runs the solver on an h-polytope regardless of any closed form.
pub fn solve_polytope(p: &HPolytope) -> Result<JohnEllipsoid> {
    // ±c give the same outer product, keep one of each pair
    let points: Vec<DVector<f64>> = p
        .facets()
        .iter()
        .filter(|f| f.normal.iter().find(|a| **a != 0.0).is_some_and(|a| *a > 0.0))
        .map(|f| DVector::from_iterator(p.dim(), f.normal.iter().map(|a| a / f.offset)))
        .collect();
    let (q, iterations) = centered_mvee(&points, p.dim())?;
    // E = polar of the minimum-volume ellipsoid {y : yᵀ(nQ)⁻¹y <= 1} around ±a_i/b_i
    let m = q * p.dim() as f64;
    let m = (&m + m.transpose()) * 0.5;
    Ok(JohnEllipsoid { ellipsoid: Ellipsoid::new(m)?, method: JohnMethod::Solver, iterations, shrink: 1.0 })
}

/// Weights `u` on the simplex maximizing `ln det Q(u)`, `Q(u) = Σ u_i c_i c_iᵀ`.
/// Pairwise Frank–Wolfe: each step moves weight from the active point with
/// the smallest `κ_i = c_iᵀQ⁻¹c_i` to the point with the largest, with exact
/// line search. Returns `Q` and the iteration count.
fn centered_mvee(points: &[DVector<f64>], n: usize) -> Result<(DMatrix<f64>, usize)> {
    let m = points.len();
    let mut u = vec![1.0 / m as f64; m];
    let nf = n as f64;
    let mut q = DMatrix::zeros(n, n);
    for c in points {
        q.ger(1.0 / m as f64, c, c, 1.0);
    }
    let mut gap = f64::INFINITY;
    for iter in 0..SOLVER_MAX_ITERS {
        if iter % 256 == 255 {
            // refresh against drift from the rank-two updates
            q.fill(0.0);
            for (ui, c) in u.iter().zip(points) {
                q.ger(*ui, c, c, 1.0);
            }
        }
        let chol = q.clone().cholesky().ok_or_else(|| Error::Solver { iters: iter, gap, last: row_major(&q) })?;
        let solved: Vec<DVector<f64>> = points.iter().map(|c| chol.solve(c)).collect();
        let kappa: Vec<f64> = points.iter().zip(&solved).map(|(c, s)| c.dot(s)).collect();
        let (j, kj) =
            kappa.iter().copied().enumerate().fold((0, f64::MIN), |b, (i, k)| if k > b.1 { (i, k) } else { b });
        let (k, kk) = kappa
            .iter()
            .copied()
            .enumerate()
            .filter(|(i, _)| u[*i] > 0.0)
            .fold((0, f64::MAX), |b, (i, k)| if k < b.1 { (i, k) } else { b });
        gap = kj / nf - 1.0;
        if gap <= SOLVER_TOL / nf {
            return Ok((q, iter));
        }
        // det ratio after moving δ from k to j: 1 + δ(κ_j − κ_k) + δ²(g² − κ_jκ_k)
        let g = points[j].dot(&solved[k]);
        let curvature = kj * kk - g * g;
        let delta = if j == k || curvature <= 0.0 { u[k] } else { ((kj - kk) / (2.0 * curvature)).min(u[k]) };
        u[k] -= delta;
        u[j] += delta;
        if u[k] <= 1e-300 {
            u[k] = 0.0;
        }
        q.ger(delta, &points[j], &points[j], 1.0);
        q.ger(-delta, &points[k], &points[k], 1.0);
    }
    Err(Error::Solver { iters: SOLVER_MAX_ITERS, gap, last: row_major(&q) })
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])).collect()
}

fn sampling_grid(n: usize) -> Result<std::sync::Arc<SphereGrid>> {
    let spec = if n <= MAX_PRODUCT_DIM {
        GridSpec::gauss(FACET_SAMPLING_LEVEL.min(match n {
            2 | 3 => FACET_SAMPLING_LEVEL,
            4 => 8,
            _ => 5,
        }))
    } else {
        GridSpec::monte_carlo(16, 0x4A4F_484E)
    };
    sphere_grid(n, spec)
}

/// Circumscribed polytope from tangent halfspaces `⟨∇‖x_j‖_K, y⟩ <= 1` at the
/// boundary points `x_j = ρ_K(θ_j)θ_j`, solved, then shrunk until it lies in
/// the body on the sampling grid.
fn facet_sampling(l: &StarBody) -> Result<JohnEllipsoid> {
    let n = l.dim();
    let grid = sampling_grid(n)?;
    let h = 1e-6;
    let mut facets = Vec::with_capacity(grid.len());
    for (theta, _) in grid.iter() {
        let r = l.radial(theta);
        let x: Vec<f64> = theta.iter().map(|t| r * t).collect();
        let mut grad = vec![0.0; n];
        let mut y = x.clone();
        for i in 0..n {
            y[i] = x[i] + h;
            let up = l.minkowski_functional(&y);
            y[i] = x[i] - h;
            let down = l.minkowski_functional(&y);
            y[i] = x[i];
            grad[i] = (up - down) / (2.0 * h);
        }
        // Euler: ⟨∇‖x‖, x⟩ = ‖x‖ = 1 on the boundary
        let offset: f64 = grad.iter().zip(&x).map(|(g, xi)| g * xi).sum();
        if offset > 0.0 {
            facets.push(Facet { normal: grad, offset });
        }
    }
    let polytope = HPolytope::new(n, facets)
        .map_err(|_| Error::capability(format!("could not build a circumscribed polytope for {}", l.label())))?;
    let sol = solve_polytope(&polytope)?;
    let worst = grid.iter().map(|(t, _)| l.radial(t) / sol.ellipsoid.radial(t)).fold(f64::INFINITY, f64::min);
    let shrink = worst.min(1.0);
    Ok(JohnEllipsoid {
        ellipsoid: sol.ellipsoid.scaled(shrink),
        method: JohnMethod::FacetSampling,
        iterations: sol.iterations,
        shrink,
    })
}

/// `(1/√n)K ⊂ L ⊂ K` with `K = √n·E`, checked on a grid.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SandwichCertificate {
    /// Row-major matrix of the inscribed ellipsoid `E`.
    pub inner: Vec<f64>,
    /// Row-major matrix of `K = √n·E`.
    pub outer: Vec<f64>,
    pub min_ratio: f64,
    pub min_direction: Vec<f64>,
    pub max_ratio: f64,
    pub max_direction: Vec<f64>,
    /// `(|K|/|L|)^{1/n}`, bounded by `√n`.
    pub volume_ratio_root: f64,
    pub method: JohnMethod,
    pub shrink: f64,
    pub tolerance: f64,
    #[serde(skip)]
    pub outer_ellipsoid: Ellipsoid,
}

pub const ANALYTIC_TOL: f64 = 1e-6;
pub const SOLVER_CERT_TOL: f64 = 1e-3;
pub const VOLUME_STEP_TOL: f64 = 1e-9;

impl SandwichCertificate {
    pub fn lower_bound(&self, n: usize) -> f64 {
        1.0 / (n as f64).sqrt()
    }
}

/// Builds `K = √n·E` and checks `1/√n <= ρ_L/ρ_K <= 1` over `check_grid`.
pub fn sandwich(l: &StarBody, check_grid_: &SphereGrid) -> Result<SandwichCertificate> {
    check_grid(l, check_grid_)?;
    let n = l.dim();
    let john = john_ellipsoid(l)?;
    let outer = john.ellipsoid.scaled((n as f64).sqrt());
    let ratios: Vec<f64> = (0..check_grid_.len())
        .into_par_iter()
        .map(|i| {
            let t = check_grid_.node(i);
            l.radial(t) / outer.radial(t)
        })
        .collect();
    let (mut lo, mut hi) = (0, 0);
    for (i, r) in ratios.iter().enumerate() {
        if *r < ratios[lo] {
            lo = i;
        }
        if *r > ratios[hi] {
            hi = i;
        }
    }
    let tolerance = if john.method == JohnMethod::Analytic { ANALYTIC_TOL } else { SOLVER_CERT_TOL };
    let lower = 1.0 / (n as f64).sqrt();
    for i in [lo, hi] {
        let r = ratios[i];
        if r < lower - tolerance || r > 1.0 + tolerance {
            return Err(Error::Certificate { direction: check_grid_.node(i).to_vec(), ratio: r, lower, upper: 1.0 });
        }
    }
    let ln_l = body_volume(l, check_grid_)?.ln();
    let volume_ratio_root = ((outer.log_volume() - ln_l) / n as f64).exp();
    Ok(SandwichCertificate {
        inner: john.ellipsoid.row_major(),
        outer: outer.row_major(),
        min_ratio: ratios[lo],
        min_direction: check_grid_.node(lo).to_vec(),
        max_ratio: ratios[hi],
        max_direction: check_grid_.node(hi).to_vec(),
        volume_ratio_root,
        method: john.method,
        shrink: john.shrink,
        tolerance,
        outer_ellipsoid: outer,
    })
}
