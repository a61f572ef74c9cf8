//! Chebyshev spectral reference solver for the steady Allen-Cahn problem
//! `-eps^2 Lap u + u^3 - u = 0` on `(-1, 1)^2` with zero Dirichlet data.
//!
//! Newton iteration on the tensor Chebyshev collocation system, started from
//! a user-supplied guess; the converged grid values are interpolated with the
//! barycentric formula.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::linalg::{solve_square, DenseMatrix};

/// Converged spectral solution.
#[derive(Debug, Clone)]
pub struct SpectralSolution {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    // values[i * (n + 1) + j] at (nodes[i], nodes[j]), zero on the boundary
    values: Vec<f64>,
    pub newton_iterations: usize,
    pub residual_max: f64,
}

/// Chebyshev points `cos(pi j / n)` and the first-derivative matrix.
pub fn chebyshev_differentiation(n: usize) -> (Vec<f64>, DenseMatrix) {
    let x: Vec<f64> = (0..=n).map(|j| (PI * j as f64 / n as f64).cos()).collect();
    let c = |j: usize| {
        let s = if j == 0 || j == n { 2.0 } else { 1.0 };
        if j % 2 == 0 {
            s
        } else {
            -s
        }
    };
    let mut d = DenseMatrix::zeros(n + 1, n + 1);
    for i in 0..=n {
        let mut diag = 0.0;
        for j in 0..=n {
            if i != j {
                let v = c(i) / c(j) / (x[i] - x[j]);
                d.set(i, j, v);
                diag -= v;
            }
        }
        d.set(i, i, diag);
    }
    (x, d)
}

fn barycentric(nodes: &[f64], weights: &[f64], values: &[f64], t: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((&xj, &wj), &fj) in nodes.iter().zip(weights).zip(values) {
        let diff = t - xj;
        if diff == 0.0 {
            return fj;
        }
        let q = wj / diff;
        num += q * fj;
        den += q;
    }
    num / den
}

impl SpectralSolution {
    /// Runs Newton from `guess` with `n` Chebyshev intervals per axis.
    pub fn allen_cahn(
        eps: f64,
        n: usize,
        guess: impl Fn(&Point) -> f64,
        tolerance: f64,
        max_iterations: usize,
    ) -> Result<Self> {
        if n < 4 {
            return Err(Error::InvalidArgument("spectral grid needs n >= 4".into()));
        }
        let (x, d) = chebyshev_differentiation(n);
        let d2 = d.matmul(&d)?;
        let m = n - 1;
        let e2 = eps * eps;
        // interior second-derivative block
        let dd = |i: usize, j: usize| d2.get(i + 1, j + 1);
        let mut u: Vec<f64> = (0..m * m)
            .map(|k| guess(&[x[k / m + 1], x[k % m + 1]]))
            .collect();
        let residual = |u: &[f64]| -> Vec<f64> {
            (0..m * m)
                .map(|k| {
                    let (i, j) = (k / m, k % m);
                    let mut lap = 0.0;
                    for a in 0..m {
                        lap += dd(i, a) * u[a * m + j] + dd(j, a) * u[i * m + a];
                    }
                    -e2 * lap + u[k].powi(3) - u[k]
                })
                .collect()
        };
        let mut res = residual(&u);
        let mut iterations = 0;
        let mut res_max = res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        while res_max > tolerance {
            if iterations == max_iterations {
                return Err(Error::InvalidArgument(format!(
                    "spectral Newton did not converge (residual {res_max:.3e})"
                )));
            }
            let mut jac = DenseMatrix::zeros(m * m, m * m);
            for k in 0..m * m {
                let (i, j) = (k / m, k % m);
                for a in 0..m {
                    let c1 = a * m + j;
                    jac.set(k, c1, jac.get(k, c1) - e2 * dd(i, a));
                    let c2 = i * m + a;
                    jac.set(k, c2, jac.get(k, c2) - e2 * dd(j, a));
                }
                jac.set(k, k, jac.get(k, k) + 3.0 * u[k] * u[k] - 1.0);
            }
            let step = solve_square(&jac, &res)?;
            for (v, s) in u.iter_mut().zip(&step) {
                *v -= s;
            }
            res = residual(&u);
            res_max = res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            iterations += 1;
        }
        let mut values = vec![0.0; (n + 1) * (n + 1)];
        for k in 0..m * m {
            values[(k / m + 1) * (n + 1) + k % m + 1] = u[k];
        }
        let weights = (0..=n)
            .map(|j| {
                let s = if j == 0 || j == n { 0.5 } else { 1.0 };
                if j % 2 == 0 {
                    s
                } else {
                    -s
                }
            })
            .collect();
        Ok(Self {
            nodes: x,
            weights,
            values,
            newton_iterations: iterations,
            residual_max: res_max,
        })
    }

    /// Interpolated value at `p`.
    pub fn value(&self, p: &Point) -> f64 {
        let n1 = self.nodes.len();
        let along_y: Vec<f64> = (0..n1)
            .map(|i| {
                let row = &self.values[i * n1..(i + 1) * n1];
                barycentric(&self.nodes, &self.weights, row, p[1])
            })
            .collect();
        barycentric(&self.nodes, &self.weights, &along_y, p[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn differentiation_is_exact_on_cubics() {
        let (x, d) = chebyshev_differentiation(8);
        let f: Vec<f64> = x.iter().map(|t| t.powi(3) - 2.0 * t).collect();
        let df = d.matvec(&f);
        for (t, v) in x.iter().zip(&df) {
            assert!((v - (3.0 * t * t - 2.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_reproduces_polynomials() {
        let s = SpectralSolution {
            nodes: chebyshev_differentiation(6).0,
            weights: vec![0.5, -1.0, 1.0, -1.0, 1.0, -1.0, 0.5],
            values: Vec::new(),
            newton_iterations: 0,
            residual_max: 0.0,
        };
        let f: Vec<f64> = s.nodes.iter().map(|t| t.powi(4) - t).collect();
        for t in [-0.93, -0.2, 0.0, 0.41, 0.999] {
            let v = barycentric(&s.nodes, &s.weights, &f, t);
            assert!((v - (t.powi(4) - t)).abs() < 1e-13);
        }
    }

    #[test]
    fn allen_cahn_reference_is_resolved() {
        let plateau = crate::problems::presets::plateau(0.7, 0.9);
        let guess = |p: &Point| plateau(p, 0).value();
        let coarse = SpectralSolution::allen_cahn(0.1, 24, guess, 1e-10, 30).unwrap();
        let fine = SpectralSolution::allen_cahn(0.1, 32, guess, 1e-10, 30).unwrap();
        let mut diff = 0.0f64;
        for k in 0..50 {
            let p = [
                -0.95 + 1.9 * (k % 7) as f64 / 6.0,
                -0.9 + 1.8 * k as f64 / 49.0,
            ];
            diff = diff.max((coarse.value(&p) - fine.value(&p)).abs());
        }
        assert!(diff < 1e-4, "{diff}");
        // the nontrivial state is near +1 in the middle
        let c = fine.value(&[0.0, 0.0]);
        assert!(
            (c - 1.0).abs() < 1e-3,
            "{c} after {} steps",
            fine.newton_iterations
        );
    }
}
