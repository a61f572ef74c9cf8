//! Closed-form basis members: user-supplied functions given as jets, and the
//! corner-singular harmonic functions `r^(2i/3) sin(2i theta / 3)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::jet::{jet_len, Jet, JET_LEN, MAX_JET_ORDER, MULTI_INDEX};

type JetFn = dyn Fn(&Point, usize) -> Jet + Send + Sync;

/// A function known in closed form. The callback receives the point and the
/// requested order and returns the Taylor jet there, typically built with
/// the [`Jet`] algebra.
#[derive(Clone)]
pub struct ClosedForm {
    label: Arc<str>,
    max_order: usize,
    f: Arc<JetFn>,
}

impl fmt::Debug for ClosedForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClosedForm")
            .field("label", &self.label)
            .field("max_order", &self.max_order)
            .finish()
    }
}

impl ClosedForm {
    pub fn new(
        label: &str,
        max_order: usize,
        f: impl Fn(&Point, usize) -> Jet + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            max_order: max_order.min(MAX_JET_ORDER),
            f: Arc::new(f),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn jet(&self, x: &Point, order: usize) -> Result<Jet> {
        if order > self.max_order {
            return Err(Error::UnsupportedOrder {
                what: "closed-form function",
                requested: order,
                max: self.max_order,
            });
        }
        let j = (self.f)(x, order);
        Ok(j.truncate(order))
    }
}

/// Distance from the corner below which evaluation is moved off the corner.
pub const ORIGIN_PERTURBATION: f64 = 1e-10;

/// `r^lambda sin(lambda theta)` with `lambda = 2 i / 3`, where `(r, theta)`
/// are polar coordinates around `center` with `theta` measured
/// counter-clockwise from `start_angle` and taken in `[-pi/4, 7 pi/4)`. Inside a
/// 270 degree wedge starting at `start_angle` the function is harmonic and
/// vanishes on both wedge edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularTerm {
    pub index: usize,
    pub start_angle: f64,
    pub center: Point,
}

impl SingularTerm {
    pub fn new(index: usize, start_angle: f64, center: Point) -> Self {
        assert!(index >= 1, "singular terms are indexed from 1");
        Self {
            index,
            start_angle,
            center,
        }
    }

    pub fn exponent(&self) -> f64 {
        2.0 * self.index as f64 / 3.0
    }

    /// The term is the imaginary part of the analytic function
    /// `F(z) = (e^{-i phi0} (z - z0))^lambda`, so
    /// `d^a_x d^b_y f = Im(i^b F^(a+b)(z))`.
    pub fn jet(&self, x: &Point, order: usize) -> Result<Jet> {
        if order > MAX_JET_ORDER {
            return Err(Error::UnsupportedOrder {
                what: "singular term",
                requested: order,
                max: MAX_JET_ORDER,
            });
        }
        let lambda = self.exponent();
        let (s0, c0) = self.start_angle.sin_cos();
        let (dx, dy) = (x[0] - self.center[0], x[1] - self.center[1]);
        // rotate so theta is measured from the start angle
        let (mut zx, mut zy) = (c0 * dx + s0 * dy, -s0 * dx + c0 * dy);
        if zx.hypot(zy) < ORIGIN_PERTURBATION {
            // move toward the interior along the wedge bisector
            let t: f64 = 0.75 * PI;
            zx = ORIGIN_PERTURBATION * t.cos();
            zy = ORIGIN_PERTURBATION * t.sin();
        }
        let r = zx.hypot(zy);
        // branch cut at 7 pi / 4, inside the excluded quadrant, so both wedge
        // edges are evaluated continuously
        let theta = (zy.atan2(zx) + 0.25 * PI).rem_euclid(2.0 * PI) - 0.25 * PI;

        // F^(n) = lambda (lambda-1)...(lambda-n+1) e^{-i n phi0} zeta^(lambda-n)
        let mut derivs = [(0.0, 0.0); MAX_JET_ORDER + 1];
        let mut falling = 1.0;
        for (n, slot) in derivs.iter_mut().enumerate().take(order + 1) {
            let mu = lambda - n as f64;
            let mag = falling * r.powf(mu);
            let arg = mu * theta - n as f64 * self.start_angle;
            *slot = (mag * arg.cos(), mag * arg.sin());
            falling *= mu;
        }
        let mut partials = [0.0; JET_LEN];
        for (idx, p) in partials.iter_mut().enumerate().take(jet_len(order)) {
            let (a, b) = MULTI_INDEX[idx];
            let (re, im) = derivs[a + b];
            // Im(i^b (re + i im))
            *p = match b % 4 {
                0 => im,
                1 => re,
                2 => -im,
                _ => -re,
            };
        }
        Ok(Jet::from_partials(order, &partials))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_value_example() {
        let s = SingularTerm::new(1, 0.0, [0.0, 0.0]);
        let v = s.jet(&[0.0, 1.0], 0).unwrap().value();
        assert!((v - (PI / 3.0).sin()).abs() < 1e-15);
    }

    #[test]
    fn singular_terms_are_harmonic_and_vanish_on_l_shape_edges() {
        for i in 1..=20 {
            let s = SingularTerm::new(i, -PI / 2.0, [0.0, 0.0]);
            for k in 0..40 {
                let r = 0.1 + 0.9 * k as f64 / 39.0;
                let t = -PI / 2.0 + 1.5 * PI * (k as f64 + 0.5) / 40.0;
                let j = s.jet(&[r * t.cos(), r * t.sin()], 4).unwrap();
                let lap = j.partial(2, 0) + j.partial(0, 2);
                let scale = j.partial(2, 0).abs().max(1.0);
                assert!(lap.abs() < 1e-9 * scale, "i={i} lap={lap}");
            }
            // edges: negative y axis and negative x axis
            let a = s.jet(&[0.0, -0.5], 0).unwrap().value();
            let b = s.jet(&[-0.5, 0.0], 0).unwrap().value();
            assert!(a.abs() < 1e-14 && b.abs() < 1e-12, "i={i} {a} {b}");
        }
    }

    #[test]
    fn singular_gradient_matches_polar_formula() {
        // f = r^(2/3) sin(2 theta / 3), df/dr = (2/3) r^(-1/3) sin(2 theta/3)
        let s = SingularTerm::new(1, 0.0, [0.0, 0.0]);
        let (r, t) = (0.7f64, 1.1f64);
        let j = s.jet(&[r * t.cos(), r * t.sin()], 1).unwrap();
        let fr = j.partial(1, 0) * t.cos() + j.partial(0, 1) * t.sin();
        let ft = -j.partial(1, 0) * r * t.sin() + j.partial(0, 1) * r * t.cos();
        assert!((fr - 2.0 / 3.0 * r.powf(-1.0 / 3.0) * (2.0 * t / 3.0).sin()).abs() < 1e-14);
        assert!((ft - r.powf(2.0 / 3.0) * 2.0 / 3.0 * (2.0 * t / 3.0).cos()).abs() < 1e-14);
    }

    #[test]
    fn origin_is_perturbed_not_singular() {
        let s = SingularTerm::new(1, -PI / 2.0, [0.0, 0.0]);
        let j = s.jet(&[0.0, 0.0], 2).unwrap();
        assert!(j.is_finite());
    }

    #[test]
    fn closed_form_rejects_excess_order() {
        let f = ClosedForm::new("x", 2, |p, o| Jet::variable(o, p[0], 0));
        assert!(f.jet(&[0.0, 0.0], 3).is_err());
        assert_eq!(f.jet(&[0.5, 0.0], 2).unwrap().partial(1, 0), 1.0);
    }
}
