//! One-dimensional Gauss rules and compensated summation.

use std::collections::HashMap;
use std::sync::Arc;

use once_cell::sync::Lazy;
use parking_lot::Mutex;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

static RULES: Lazy<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = Lazy::new(Default::default);

impl GaussLegendre {
    /// Computes the `n`-point rule by Newton iteration on `P_n`.
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi's initial guess for the i-th largest root
            let mut x = ((i as f64 + 0.75) / (nf + 0.5) * std::f64::consts::PI).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_and_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_and_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Shared, lazily computed rule with `n` nodes.
    pub fn cached(n: usize) -> Arc<GaussLegendre> {
        RULES.lock().entry(n).or_insert_with(|| Arc::new(GaussLegendre::new(n))).clone()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

/// Gauss rule for the weight `(1 - t²)^a` on `[-1, 1]`, `a >= 0`.
///
/// Nodes start from the eigenvalues of the Jacobi matrix and are polished by
/// Newton steps on the orthonormal recurrence; weights are Christoffel numbers.
#[derive(Debug, Clone)]
pub struct GaussGegenbauer {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

type GegenbauerCache = HashMap<(usize, u64), Arc<GaussGegenbauer>>;

static GEGENBAUER_RULES: Lazy<Mutex<GegenbauerCache>> = Lazy::new(Default::default);

impl GaussGegenbauer {
    pub fn new(n: usize, a: f64) -> Self {
        assert!(n > 0, "Gauss rule needs at least one node");
        assert!(a >= 0.0, "weight exponent must be nonnegative");
        if a == 0.0 {
            let gl = GaussLegendre::new(n);
            return Self { nodes: gl.nodes, weights: gl.weights };
        }
        let b: Vec<f64> = (1..=n)
            .map(|k| {
                let k = k as f64;
                (k * (k + 2.0 * a) / ((2.0 * k + 2.0 * a + 1.0) * (2.0 * k + 2.0 * a - 1.0))).sqrt()
            })
            .collect();
        let mu0 = (0.5 * std::f64::consts::PI.ln() + ln_gamma_pos(a + 1.0) - ln_gamma_pos(a + 1.5)).exp();
        let jacobi = nalgebra::DMatrix::from_fn(n, n, |i, j| if i + 1 == j || j + 1 == i { b[i.min(j)] } else { 0.0 });
        let mut nodes: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
        nodes.sort_by(f64::total_cmp);

        // orthonormal p_0..p_n at t, with the derivative of p_n
        let eval = |t: f64| {
            let mut p_prev = 0.0;
            let mut p = 1.0 / mu0.sqrt();
            let (mut d_prev, mut d) = (0.0, 0.0);
            let mut sumsq = p * p;
            for k in 0..n {
                let back = if k == 0 { 0.0 } else { b[k - 1] };
                let p_next = (t * p - back * p_prev) / b[k];
                let d_next = (p + t * d - back * d_prev) / b[k];
                p_prev = p;
                p = p_next;
                d_prev = d;
                d = d_next;
                if k + 1 < n {
                    sumsq += p * p;
                }
            }
            (p, d, sumsq)
        };
        let mut weights = Vec::with_capacity(n);
        for t in nodes.iter_mut() {
            for _ in 0..3 {
                let (p, d, _) = eval(*t);
                if d == 0.0 {
                    break;
                }
                *t -= p / d;
            }
            weights.push(1.0 / eval(*t).2);
        }
        // the weight is even: symmetrize away rounding
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let x = 0.5 * (nodes[j] - nodes[i]);
            let w = 0.5 * (weights[i] + weights[j]);
            nodes[i] = -x;
            nodes[j] = x;
            weights[i] = w;
            weights[j] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn cached(n: usize, a: f64) -> Arc<GaussGegenbauer> {
        GEGENBAUER_RULES.lock().entry((n, a.to_bits())).or_insert_with(|| Arc::new(GaussGegenbauer::new(n, a))).clone()
    }
}

fn ln_gamma_pos(x: f64) -> f64 {
    crate::scalars::ln_gamma(x).expect("positive argument")
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Neumaier (improved Kahan–Babuška) running sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().collect::<CompensatedSum>().value()
}
