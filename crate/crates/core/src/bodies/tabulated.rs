//! Star bodies given by radial values stored on a sphere grid.
//!
//! `n = 2`: piecewise-linear in the polar angle. `n = 3`: bilinear in
//! (polar, azimuth) on a latitude–longitude grid. `n >= 4`: inverse-distance
//! average of the `2n` nearest stored directions.

use std::f64::consts::PI;

use super::StarBody;
use crate::error::{Error, Result};
use crate::sphere::{dot, sphere_grid, GridSpec, MAX_PRODUCT_DIM};

#[derive(Debug, Clone)]
enum Layout {
    Circle { count: usize },
    LatLong { polar: usize, azimuth: usize },
    Scattered { nodes: Vec<f64>, neighbours: usize },
}

#[derive(Debug, Clone)]
pub struct Tabulated {
    dim: usize,
    layout: Layout,
    values: Vec<f64>,
}

impl Tabulated {
    /// Samples `body` at a resolution comparable to a sphere grid of `level`.
    pub fn from_body(body: &StarBody, level: usize) -> Result<Self> {
        if level < 2 {
            return Err(Error::domain("tabulation level must be at least 2"));
        }
        let n = body.dim();
        let (layout, values) = match n {
            2 => {
                let count = 4 * level;
                let values = (0..count)
                    .map(|j| {
                        let a = 2.0 * PI * j as f64 / count as f64;
                        body.radial(&[a.cos(), a.sin()])
                    })
                    .collect();
                (Layout::Circle { count }, values)
            }
            3 => {
                let (polar, azimuth) = (2 * level, 4 * level);
                let mut values = Vec::with_capacity((polar + 1) * azimuth);
                for i in 0..=polar {
                    let (s, c) = (PI * i as f64 / polar as f64).sin_cos();
                    for j in 0..azimuth {
                        let (sp, cp) = (2.0 * PI * j as f64 / azimuth as f64).sin_cos();
                        values.push(body.radial(&[c, s * cp, s * sp]));
                    }
                }
                (Layout::LatLong { polar, azimuth }, values)
            }
            _ => {
                let spec = if n <= MAX_PRODUCT_DIM {
                    GridSpec::gauss(level.max(4))
                } else {
                    GridSpec::monte_carlo(level.max(4), 0)
                };
                let grid = sphere_grid(n, spec)?;
                let nodes: Vec<f64> = grid.iter().flat_map(|(t, _)| t.iter().copied()).collect();
                let values = grid.iter().map(|(t, _)| body.radial(t)).collect();
                (Layout::Scattered { nodes, neighbours: 2 * n }, values)
            }
        };
        Ok(Self { dim: n, layout, values })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub(super) fn radial(&self, theta: &[f64]) -> f64 {
        match &self.layout {
            Layout::Circle { count } => {
                let h = 2.0 * PI / *count as f64;
                let a = theta[1].atan2(theta[0]).rem_euclid(2.0 * PI) / h;
                let j = (a.floor() as usize).min(count - 1);
                let t = a - j as f64;
                (1.0 - t) * self.values[j] + t * self.values[(j + 1) % count]
            }
            Layout::LatLong { polar, azimuth } => {
                let phi = theta[0].clamp(-1.0, 1.0).acos() / PI * *polar as f64;
                let psi = theta[2].atan2(theta[1]).rem_euclid(2.0 * PI) / (2.0 * PI) * *azimuth as f64;
                let i = (phi.floor() as usize).min(polar - 1);
                let j = (psi.floor() as usize).min(azimuth - 1);
                let (u, v) = (phi - i as f64, psi - j as f64);
                let at = |i: usize, j: usize| self.values[i * azimuth + j % azimuth];
                (1.0 - u) * ((1.0 - v) * at(i, j) + v * at(i, j + 1))
                    + u * ((1.0 - v) * at(i + 1, j) + v * at(i + 1, j + 1))
            }
            Layout::Scattered { nodes, neighbours } => {
                let mut best: Vec<(f64, usize)> = Vec::with_capacity(neighbours + 1);
                for (idx, node) in nodes.chunks_exact(self.dim).enumerate() {
                    let d = dot(node, theta);
                    if best.len() < *neighbours || d > best[best.len() - 1].0 {
                        let pos = best.partition_point(|(b, _)| *b >= d);
                        best.insert(pos, (d, idx));
                        best.truncate(*neighbours);
                    }
                }
                let (mut num, mut den) = (0.0, 0.0);
                for (d, idx) in best {
                    let dist2 = (2.0 - 2.0 * d).max(0.0);
                    if dist2 < 1e-24 {
                        return self.values[idx];
                    }
                    num += self.values[idx] / dist2;
                    den += 1.0 / dist2;
                }
                num / den
            }
        }
    }
}
