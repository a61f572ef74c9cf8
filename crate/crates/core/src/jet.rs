//! Truncated bivariate Taylor expansions ("jets").
//!
//! A [`Jet`] of order `k` at a point stores every partial derivative
//! `d^(a+b) f / dx^a dy^b` with `a + b <= k`, kept internally as Taylor
//! coefficients so that products and compositions are plain polynomial
//! arithmetic. One-dimensional functions are jets that never depend on `y`.

use std::ops::{Add, Mul, Neg, Sub};

/// Highest total derivative order carried by a jet.
pub const MAX_JET_ORDER: usize = 4;
/// Number of multi-indices `(a, b)` with `a + b <= MAX_JET_ORDER`.
pub const JET_LEN: usize = (MAX_JET_ORDER + 1) * (MAX_JET_ORDER + 2) / 2;

/// Position of the multi-index `(a, b)`; ordered by total degree, then by `b`.
#[inline]
pub const fn jet_index(a: usize, b: usize) -> usize {
    let n = a + b;
    n * (n + 1) / 2 + b
}

/// Number of entries used by a jet of the given order.
#[inline]
pub const fn jet_len(order: usize) -> usize {
    (order + 1) * (order + 2) / 2
}

/// `MULTI_INDEX[i] = (a, b)` inverts [`jet_index`].
pub const MULTI_INDEX: [(usize, usize); JET_LEN] = multi_indices();

/// `a! * b!` for each multi-index.
pub const FACTORIAL: [f64; JET_LEN] = factorials();

const fn multi_indices() -> [(usize, usize); JET_LEN] {
    let mut out = [(0, 0); JET_LEN];
    let mut n = 0;
    while n <= MAX_JET_ORDER {
        let mut b = 0;
        while b <= n {
            out[jet_index(n - b, b)] = (n - b, b);
            b += 1;
        }
        n += 1;
    }
    out
}

const fn fact(n: usize) -> f64 {
    let mut acc = 1.0;
    let mut k = 2;
    while k <= n {
        acc *= k as f64;
        k += 1;
    }
    acc
}

const fn factorials() -> [f64; JET_LEN] {
    let idx = multi_indices();
    let mut out = [0.0; JET_LEN];
    let mut i = 0;
    while i < JET_LEN {
        out[i] = fact(idx[i].0) * fact(idx[i].1);
        i += 1;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    order: usize,
    coef: [f64; JET_LEN],
}

impl Jet {
    pub fn zero(order: usize) -> Self {
        assert!(
            order <= MAX_JET_ORDER,
            "jet order {order} exceeds {MAX_JET_ORDER}"
        );
        Self {
            order,
            coef: [0.0; JET_LEN],
        }
    }

    pub fn constant(order: usize, value: f64) -> Self {
        let mut j = Self::zero(order);
        j.coef[0] = value;
        j
    }

    /// The coordinate function `x` (axis 0) or `y` (axis 1) expanded at `x0`.
    pub fn variable(order: usize, x0: f64, axis: usize) -> Self {
        let mut j = Self::constant(order, x0);
        if order >= 1 {
            j.coef[if axis == 0 {
                jet_index(1, 0)
            } else {
                jet_index(0, 1)
            }] = 1.0;
        }
        j
    }

    /// Builds a jet from partial derivatives indexed by [`jet_index`].
    pub fn from_partials(order: usize, partials: &[f64]) -> Self {
        let mut j = Self::zero(order);
        for i in 0..jet_len(order).min(partials.len()) {
            j.coef[i] = partials[i] / FACTORIAL[i];
        }
        j
    }

    /// Builds a jet directly from Taylor coefficients.
    pub fn from_taylor(order: usize, taylor: [f64; JET_LEN]) -> Self {
        let mut j = Self::zero(order);
        let n = jet_len(order);
        j.coef[..n].copy_from_slice(&taylor[..n]);
        j
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.coef[0]
    }

    /// `d^(a+b) f / dx^a dy^b`; zero beyond the jet's order.
    pub fn partial(&self, a: usize, b: usize) -> f64 {
        if a + b > self.order {
            return 0.0;
        }
        let i = jet_index(a, b);
        self.coef[i] * FACTORIAL[i]
    }

    /// Partial derivative at a flat multi-index position.
    #[inline]
    pub fn partial_at(&self, index: usize) -> f64 {
        self.coef[index] * FACTORIAL[index]
    }

    pub fn taylor(&self) -> &[f64; JET_LEN] {
        &self.coef
    }

    pub fn partials(&self) -> [f64; JET_LEN] {
        let mut out = [0.0; JET_LEN];
        for (i, o) in out.iter_mut().enumerate().take(jet_len(self.order)) {
            *o = self.partial_at(i);
        }
        out
    }

    /// Same expansion truncated to a lower order.
    pub fn truncate(&self, order: usize) -> Self {
        let order = order.min(self.order);
        let mut j = Self::zero(order);
        let n = jet_len(order);
        j.coef[..n].copy_from_slice(&self.coef[..n]);
        j
    }

    pub fn scale(mut self, s: f64) -> Self {
        for c in self.coef.iter_mut() {
            *c *= s;
        }
        self
    }

    /// `self += s * other` over the common order.
    pub fn add_scaled(&mut self, s: f64, other: &Jet) {
        let order = self.order.min(other.order);
        self.order = order;
        for i in 0..jet_len(order) {
            self.coef[i] += s * other.coef[i];
        }
        for c in self.coef[jet_len(order)..].iter_mut() {
            *c = 0.0;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coef[..jet_len(self.order)]
            .iter()
            .all(|c| c.is_finite())
    }

    /// `g(self)` given `derivs[k] = g^(k)(self.value())` for `k <= order`.
    pub fn compose(&self, derivs: &[f64]) -> Self {
        let order = self.order;
        let mut shifted = *self;
        shifted.coef[0] = 0.0;
        let mut out = Self::constant(order, derivs[0]);
        let mut power = Self::constant(order, 1.0);
        let mut kfact = 1.0;
        for (k, d) in derivs.iter().enumerate().take(order + 1).skip(1) {
            power = power * shifted;
            kfact *= k as f64;
            out.add_scaled(d / kfact, &power);
        }
        out
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        self.compose(&[e; MAX_JET_ORDER + 1])
    }

    pub fn ln(&self) -> Self {
        let v = self.value();
        self.compose(&[
            v.ln(),
            1.0 / v,
            -1.0 / (v * v),
            2.0 / (v * v * v),
            -6.0 / (v * v * v * v),
        ])
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.compose(&[s, c, -s, -c, s])
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.compose(&[c, -s, -c, s, c])
    }

    pub fn atan(&self) -> Self {
        let v = self.value();
        let q = 1.0 + v * v;
        self.compose(&[
            v.atan(),
            1.0 / q,
            -2.0 * v / (q * q),
            2.0 * (3.0 * v * v - 1.0) / (q * q * q),
            -24.0 * v * (v * v - 1.0) / (q * q * q * q),
        ])
    }

    pub fn powf(&self, p: f64) -> Self {
        let v = self.value();
        let mut derivs = [0.0; MAX_JET_ORDER + 1];
        let mut falling = 1.0;
        for (k, d) in derivs.iter_mut().enumerate() {
            *d = falling * v.powf(p - k as f64);
            falling *= p - k as f64;
        }
        self.compose(&derivs)
    }

    pub fn powi(&self, n: u32) -> Self {
        let mut out = Self::constant(self.order, 1.0);
        for _ in 0..n {
            out = out * *self;
        }
        out
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        self.add_scaled(1.0, &rhs);
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: Jet) -> Jet {
        self.add_scaled(-1.0, &rhs);
        self
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.coef[0] += rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let mut out = Jet::zero(order);
        for i in 0..jet_len(order) {
            let ai = self.coef[i];
            if ai == 0.0 {
                continue;
            }
            let (a1, b1) = MULTI_INDEX[i];
            for j in 0..jet_len(order - (a1 + b1)) {
                let (a2, b2) = MULTI_INDEX[j];
                out.coef[jet_index(a1 + a2, b1 + b2)] += ai * rhs.coef[j];
            }
        }
        out
    }
}

/// A linear combination of partial derivatives, `sum_t c_t d^(a_t, b_t)`.
///
/// Differential and boundary operators are turned into one functional per
/// collocation row; applying it to a jet gives the operator value there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Functional {
    terms: [(u8, u8, f64); JET_LEN],
    len: usize,
}

impl Default for Functional {
    fn default() -> Self {
        Self {
            terms: [(0, 0, 0.0); JET_LEN],
            len: 0,
        }
    }
}

impl Functional {
    pub fn new() -> Self {
        Self::default()
    }

    /// The point evaluation `u(x)`.
    pub fn value() -> Self {
        Self::new().with(0, 0, 1.0)
    }

    /// Adds `coef * d^(a, b)`, merging with an existing term.
    pub fn with(mut self, a: usize, b: usize, coef: f64) -> Self {
        assert!(
            a + b <= MAX_JET_ORDER,
            "partial ({a}, {b}) beyond jet order"
        );
        if let Some(t) = self.terms[..self.len]
            .iter_mut()
            .find(|t| t.0 as usize == a && t.1 as usize == b)
        {
            t.2 += coef;
        } else {
            self.terms[self.len] = (a as u8, b as u8, coef);
            self.len += 1;
        }
        self
    }

    pub fn terms(&self) -> &[(u8, u8, f64)] {
        &self.terms[..self.len]
    }

    /// Highest derivative order with a term (zero for the empty functional).
    pub fn order(&self) -> usize {
        self.terms()
            .iter()
            .map(|t| (t.0 + t.1) as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for t in self.terms[..self.len].iter_mut() {
            t.2 *= s;
        }
        self
    }

    pub fn apply(&self, jet: &Jet) -> f64 {
        self.terms()
            .iter()
            .map(|&(a, b, c)| c * jet.partial(a as usize, b as usize))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xy(order: usize, x: f64, y: f64) -> (Jet, Jet) {
        (Jet::variable(order, x, 0), Jet::variable(order, y, 1))
    }

    #[test]
    fn index_layout() {
        assert_eq!(JET_LEN, 15);
        assert_eq!(jet_index(0, 0), 0);
        assert_eq!(jet_index(1, 0), 1);
        assert_eq!(jet_index(0, 1), 2);
        assert_eq!(jet_index(0, 4), 14);
        for (i, &(a, b)) in MULTI_INDEX.iter().enumerate() {
            assert_eq!(jet_index(a, b), i);
        }
        assert_eq!(FACTORIAL[jet_index(3, 1)], 6.0);
    }

    #[test]
    fn polynomial_partials() {
        // f = x^3 y^2 at (2, 3)
        let (x, y) = xy(4, 2.0, 3.0);
        let f = x.powi(3) * y.powi(2);
        assert_eq!(f.value(), 72.0);
        assert_eq!(f.partial(1, 0), 3.0 * 4.0 * 9.0);
        assert_eq!(f.partial(2, 1), 6.0 * 2.0 * 2.0 * 3.0);
        assert_eq!(f.partial(3, 1), 6.0 * 6.0);
        assert_eq!(f.partial(0, 4), 0.0);
    }

    #[test]
    fn composition_matches_closed_form() {
        // f = sin(x y) at (0.3, 0.7): f_xy = cos(xy) - xy sin(xy)
        let (x, y) = xy(3, 0.3, 0.7);
        let f = (x * y).sin();
        let p = 0.21f64;
        assert!((f.partial(1, 1) - (p.cos() - p * p.sin())).abs() < 1e-15);
        // d^3/dx^3 exp(2x) = 8 exp(2x)
        let e = (x * 2.0).exp();
        assert!((e.partial(3, 0) - 8.0 * (0.6f64).exp()).abs() < 1e-13);
        // atan derivative
        let a = x.atan();
        assert!((a.partial(2, 0) + 2.0 * 0.3 / (1.09f64 * 1.09)).abs() < 1e-15);
    }

    #[test]
    fn log_and_power_round_trip() {
        let (x, y) = xy(4, 0.8, -0.4);
        let r2 = x * x + y * y;
        let a = r2.ln().scale(0.5).exp();
        let b = r2.powf(0.5);
        for i in 0..JET_LEN {
            assert!((a.partial_at(i) - b.partial_at(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn functional_applies_and_merges_terms() {
        let (x, y) = xy(2, 0.5, 2.0);
        let f = x * x * y; // fxx = 2y = 4, fyy = 0, f = 0.5
        let lap = Functional::new()
            .with(2, 0, 1.0)
            .with(0, 2, 1.0)
            .with(2, 0, 1.0);
        assert_eq!(lap.terms().len(), 2);
        assert_eq!(lap.order(), 2);
        assert_eq!(lap.apply(&f), 8.0);
        assert_eq!(Functional::value().scaled(3.0).apply(&f), 1.5);
    }
}
