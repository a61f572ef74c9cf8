//! Single-hidden-layer networks `sum_i c_i sigma(w_i . x + b_i)`.
//!
//! The partial `d^alpha` of a neuron is `sigma^(|alpha|)(z) w^alpha`, so any
//! operator row `sum_alpha a_alpha d^alpha` evaluates to
//! `sum_alpha a_alpha sigma^(|alpha|)(z) w^alpha`. Differentiating that
//! expression in `w` and `b` needs one more activation derivative, which is
//! why gradients are available up to the activation's ceiling minus one.

use super::localized::SecondOrder;
use crate::activation::{ActivationKind, MAX_DERIVATIVE_ORDER};
use crate::error::{Error, Result};
use crate::geometry::{Point, PointSet};
use crate::jet::{jet_len, Jet, JET_LEN, MAX_JET_ORDER, MULTI_INDEX};
use crate::linalg::DenseMatrix;
use crate::operators::RowBlock;

const POW_LEN: usize = MAX_DERIVATIVE_ORDER + 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Slfn {
    dim: usize,
    weights: Vec<Point>,
    biases: Vec<f64>,
    coefficients: Vec<f64>,
    activation: ActivationKind,
}

/// `w . x + b`, evaluated in one fixed order so that biases built as
/// `-(w . x_base)` make the pre-activation vanish exactly at the base point.
#[inline]
pub fn pre_activation(w: &Point, b: f64, x: &Point) -> f64 {
    (w[0] * x[0] + w[1] * x[1]) + b
}

/// Powers `w_k^0 ..= w_k^5` per axis.
#[inline]
fn powers(w: &Point) -> [[f64; POW_LEN]; 2] {
    let mut out = [[1.0; POW_LEN]; 2];
    for k in 0..2 {
        for p in 1..POW_LEN {
            out[k][p] = out[k][p - 1] * w[k];
        }
    }
    out
}

impl Slfn {
    pub fn new(
        dim: usize,
        weights: Vec<Point>,
        biases: Vec<f64>,
        coefficients: Vec<f64>,
        activation: ActivationKind,
    ) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::InvalidArgument(format!(
                "unsupported dimension {dim}"
            )));
        }
        let n = weights.len();
        if n == 0 {
            return Err(Error::InvalidArgument(
                "network width must be at least 1".into(),
            ));
        }
        if biases.len() != n || coefficients.len() != n {
            return Err(Error::Dimension(format!(
                "{n} weights, {} biases, {} coefficients",
                biases.len(),
                coefficients.len()
            )));
        }
        if dim == 1 && weights.iter().any(|w| w[1] != 0.0) {
            return Err(Error::InvalidArgument(
                "1D network with a second weight component".into(),
            ));
        }
        let net = Self {
            dim,
            weights,
            biases,
            coefficients,
            activation,
        };
        if !net.is_finite() {
            return Err(Error::NonFinite("network parameters"));
        }
        Ok(net)
    }

    fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .all(|w| w[0].is_finite() && w[1].is_finite())
            && self.biases.iter().all(|b| b.is_finite())
            && self.coefficients.iter().all(|c| c.is_finite())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn width(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Point] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn activation(&self) -> ActivationKind {
        self.activation
    }

    pub fn set_coefficients(&mut self, c: &[f64]) -> Result<()> {
        if c.len() != self.width() {
            return Err(Error::Dimension(
                "coefficient vector vs network width".into(),
            ));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network coefficients"));
        }
        self.coefficients.copy_from_slice(c);
        Ok(())
    }

    /// Number of trainable parameters `N (d + 2)`.
    pub fn param_len(&self) -> usize {
        self.width() * (self.dim + 2)
    }

    /// Flattened `(W row-major, b, c)`.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_len());
        for w in &self.weights {
            out.extend_from_slice(&w[..self.dim]);
        }
        out.extend_from_slice(&self.biases);
        out.extend_from_slice(&self.coefficients);
        out
    }

    pub fn set_params(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.param_len() {
            return Err(Error::Dimension("parameter vector vs network size".into()));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network parameters"));
        }
        let (n, d) = (self.width(), self.dim);
        for (i, w) in self.weights.iter_mut().enumerate() {
            w[..d].copy_from_slice(&theta[i * d..(i + 1) * d]);
        }
        self.biases.copy_from_slice(&theta[n * d..n * (d + 1)]);
        self.coefficients.copy_from_slice(&theta[n * (d + 1)..]);
        Ok(())
    }

    /// Each hidden neuron as a width-1 network with unit coefficient.
    pub fn neurons(&self) -> Vec<Slfn> {
        (0..self.width())
            .map(|i| Slfn {
                dim: self.dim,
                weights: vec![self.weights[i]],
                biases: vec![self.biases[i]],
                coefficients: vec![1.0],
                activation: self.activation,
            })
            .collect()
    }

    fn check_order(&self, order: usize) -> Result<()> {
        if order > MAX_JET_ORDER {
            return Err(Error::UnsupportedOrder {
                what: "network",
                requested: order,
                max: MAX_JET_ORDER,
            });
        }
        Ok(())
    }

    /// All partials up to `order` at `x`.
    pub fn jet(&self, x: &Point, order: usize) -> Result<Jet> {
        self.check_order(order)?;
        let n = jet_len(order);
        let mut partials = [0.0; JET_LEN];
        let mut sig = [0.0; MAX_DERIVATIVE_ORDER + 1];
        for ((w, &b), &c) in self
            .weights
            .iter()
            .zip(&self.biases)
            .zip(&self.coefficients)
        {
            self.activation
                .derivatives_into(pre_activation(w, b, x), order, &mut sig);
            let pw = powers(w);
            for (idx, p) in partials.iter_mut().enumerate().take(n) {
                let (a, bb) = MULTI_INDEX[idx];
                *p += c * sig[a + bb] * pw[0][a] * pw[1][bb];
            }
        }
        Ok(Jet::from_partials(order, &partials))
    }

    /// Network value of the block operator at every row.
    pub(crate) fn apply_block(&self, block: &RowBlock) -> Result<Vec<f64>> {
        let order = block.required_order();
        self.check_order(order)?;
        let pts = block.points().points();
        let pw: Vec<_> = self.weights.iter().map(powers).collect();
        let mut sig = [0.0; MAX_DERIVATIVE_ORDER + 1];
        let mut out = Vec::with_capacity(block.len());
        for r in 0..block.len() {
            let x = &pts[block.point_of_row(r)];
            let f = block.functional(r);
            let mut acc = 0.0;
            for i in 0..self.width() {
                self.activation.derivatives_into(
                    pre_activation(&self.weights[i], self.biases[i], x),
                    order,
                    &mut sig,
                );
                let v: f64 = f
                    .terms()
                    .iter()
                    .map(|&(a, b, cf)| {
                        cf * sig[(a + b) as usize] * pw[i][0][a as usize] * pw[i][1][b as usize]
                    })
                    .sum();
                acc += self.coefficients[i] * v;
            }
            out.push(acc);
        }
        Ok(out)
    }

    /// `[u, u_x, u_y, u_xx, u_xy, u_yy]` at every point.
    pub(crate) fn second_order_on(&self, points: &PointSet) -> Vec<SecondOrder> {
        let mut sig = [0.0; MAX_DERIVATIVE_ORDER + 1];
        points
            .points()
            .iter()
            .map(|x| {
                let mut acc = [0.0; 6];
                for ((w, &b), &c) in self
                    .weights
                    .iter()
                    .zip(&self.biases)
                    .zip(&self.coefficients)
                {
                    self.activation
                        .derivatives_into(pre_activation(w, b, x), 2, &mut sig);
                    let (s1, s2) = (c * sig[1], c * sig[2]);
                    acc[0] += c * sig[0];
                    acc[1] += s1 * w[0];
                    acc[2] += s1 * w[1];
                    acc[3] += s2 * w[0] * w[0];
                    acc[4] += s2 * w[0] * w[1];
                    acc[5] += s2 * w[1] * w[1];
                }
                acc
            })
            .collect()
    }

    /// Writes `L sigma(w_i . x + b_i)` for every neuron as consecutive columns.
    pub(crate) fn fill_neuron_columns(
        &self,
        block: &RowBlock,
        out: &mut DenseMatrix,
        row_offset: usize,
        col_offset: usize,
    ) -> Result<()> {
        let order = block.required_order();
        self.check_order(order)?;
        let pts = block.points().points();
        let pw: Vec<_> = self.weights.iter().map(powers).collect();
        let mut sig = [0.0; MAX_DERIVATIVE_ORDER + 1];
        let n = self.width();
        for r in 0..block.len() {
            let x = &pts[block.point_of_row(r)];
            let f = block.functional(r);
            let row = &mut out.row_mut(row_offset + r)[col_offset..col_offset + n];
            for (i, slot) in row.iter_mut().enumerate() {
                self.activation.derivatives_into(
                    pre_activation(&self.weights[i], self.biases[i], x),
                    order,
                    &mut sig,
                );
                *slot = f
                    .terms()
                    .iter()
                    .map(|&(a, b, cf)| {
                        cf * sig[(a + b) as usize] * pw[i][0][a as usize] * pw[i][1][b as usize]
                    })
                    .sum();
            }
        }
        Ok(())
    }

    /// Adds the gradient of `sum_r (L psi(x_r) - scale * t_r)^2` over this
    /// block to `grad` (layout of [`Slfn::params`]) and returns the block loss.
    pub(crate) fn accumulate_loss_gradient(
        &self,
        block: &RowBlock,
        targets: &[f64],
        grad: &mut [f64],
    ) -> Result<f64> {
        let order = block.required_order();
        if order + 1 > MAX_DERIVATIVE_ORDER {
            return Err(Error::UnsupportedOrder {
                what: "network parameter gradient",
                requested: order + 1,
                max: MAX_DERIVATIVE_ORDER,
            });
        }
        if targets.len() != block.len() || grad.len() != self.param_len() {
            return Err(Error::Dimension("targets or gradient buffer".into()));
        }
        let (n, d) = (self.width(), self.dim);
        let pts = block.points().points();
        let pw: Vec<_> = self.weights.iter().map(powers).collect();
        let scale = block.scale();
        let mut sig = [0.0; MAX_DERIVATIVE_ORDER + 1];
        // per neuron: L phi_i, d/db, d/dw_0, d/dw_1 of L phi_i
        let mut work = vec![[0.0f64; 4]; n];
        let mut loss = 0.0;
        for r in 0..block.len() {
            let x = &pts[block.point_of_row(r)];
            let f = block.functional(r);
            let mut value = 0.0;
            for i in 0..n {
                self.activation.derivatives_into(
                    pre_activation(&self.weights[i], self.biases[i], x),
                    order + 1,
                    &mut sig,
                );
                let p = &pw[i];
                let mut acc = [0.0; 4];
                for &(a, b, cf) in f.terms() {
                    let (a, b) = (a as usize, b as usize);
                    let m = p[0][a] * p[1][b];
                    acc[0] += cf * sig[a + b] * m;
                    acc[1] += cf * sig[a + b + 1] * m;
                    if a > 0 {
                        acc[2] += cf * sig[a + b] * a as f64 * p[0][a - 1] * p[1][b];
                    }
                    if b > 0 {
                        acc[3] += cf * sig[a + b] * b as f64 * p[0][a] * p[1][b - 1];
                    }
                }
                acc[2] += x[0] * acc[1];
                acc[3] += x[1] * acc[1];
                value += self.coefficients[i] * acc[0];
                work[i] = acc;
            }
            let res = value - scale * targets[r];
            loss += res * res;
            let g = 2.0 * res;
            for (i, acc) in work.iter().enumerate() {
                let gc = g * self.coefficients[i];
                grad[i * d] += gc * acc[2];
                if d == 2 {
                    grad[i * d + 1] += gc * acc[3];
                }
                grad[n * d + i] += gc * acc[1];
                grad[n * (d + 1) + i] += g * acc[0];
            }
        }
        Ok(loss)
    }
}
