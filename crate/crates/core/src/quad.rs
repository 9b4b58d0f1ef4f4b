//! Gauss-Legendre rules used by every integral in the crate.
//!
//! Besides the usual nodes and weights the rule carries a collocation
//! matrix `partial[i][j] = ∫_{-1}^{x_i} L_j(x) dx` (with `L_j` the Lagrange
//! basis on the nodes). Multiplying sampled integrand values by a row of it
//! gives the running integral up to that node, which the encoder needs to
//! evaluate energy-dependent bias terms inside a cell.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Nodes per cell. Exact for polynomials up to degree 15; running integrals
/// are exact up to degree 7.
pub const ORDER: usize = 8;

#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: [f64; ORDER],
    pub weights: [f64; ORDER],
    pub partial: [[f64; ORDER]; ORDER],
}

impl GaussLegendre {
    pub fn get() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(GaussLegendre::build)
    }

    fn build() -> Self {
        let (nodes, weights) = legendre_nodes(ORDER);
        let mut n = [0.0; ORDER];
        let mut w = [0.0; ORDER];
        n.copy_from_slice(&nodes);
        w.copy_from_slice(&weights);

        let mut partial = [[0.0; ORDER]; ORDER];
        for (i, row) in partial.iter_mut().enumerate() {
            // ∫_{-1}^{x_i} L_j: degree ORDER-1 integrand, exact with the same rule.
            let half = 0.5 * (n[i] + 1.0);
            let mid = 0.5 * (n[i] - 1.0);
            for (j, cell) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for k in 0..ORDER {
                    let x = mid + half * n[k];
                    acc += w[k] * lagrange(&n, j, x);
                }
                *cell = half * acc;
            }
        }
        GaussLegendre {
            nodes: n,
            weights: w,
            partial,
        }
    }

    /// ∫_a^b f via the rule.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        let mut acc = 0.0;
        for k in 0..ORDER {
            acc += self.weights[k] * f(mid + half * self.nodes[k]);
        }
        half * acc
    }

    /// Composite rule over `cells` equal panels of [a, b].
    pub fn integrate_composite(
        &self,
        a: f64,
        b: f64,
        cells: usize,
        mut f: impl FnMut(f64) -> f64,
    ) -> f64 {
        let cells = cells.max(1);
        let h = (b - a) / cells as f64;
        (0..cells)
            .map(|k| {
                let lo = a + k as f64 * h;
                let hi = if k + 1 == cells { b } else { lo + h };
                self.integrate(lo, hi, &mut f)
            })
            .sum()
    }
}

fn lagrange(nodes: &[f64], j: usize, x: f64) -> f64 {
    nodes
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != j)
        .map(|(_, &xk)| (x - xk) / (nodes[j] - xk))
        .product()
}

/// Legendre roots by Newton iteration from the Chebyshev-like initial guess.
fn legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_eval(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_eval(n, x);
        dp = if d != 0.0 { d } else { dp };
        // ascending order
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_eval(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
