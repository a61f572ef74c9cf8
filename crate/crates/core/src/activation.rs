//! Activation functions and their derivatives of arbitrary (bounded) order.
//!
//! For `tanh` every derivative is a polynomial in `t = tanh(z)`:
//! `P_0(t) = t` and `P_{n+1}(t) = P_n'(t) (1 - t^2)`. The coefficient table is
//! generated from that recurrence at compile time.

use crate::error::{Error, Result};

/// Highest derivative order that can be requested.
pub const MAX_DERIVATIVE_ORDER: usize = 5;

const TABLE_LEN: usize = MAX_DERIVATIVE_ORDER + 1;
const POLY_LEN: usize = MAX_DERIVATIVE_ORDER + 2;

/// `TANH_POLY[n][k]` is the coefficient of `t^k` in `P_n`.
const TANH_POLY: [[f64; POLY_LEN]; TABLE_LEN] = tanh_polynomials();

const fn tanh_polynomials() -> [[f64; POLY_LEN]; TABLE_LEN] {
    let mut table = [[0.0; POLY_LEN]; TABLE_LEN];
    table[0][1] = 1.0;
    let mut n = 0;
    while n < MAX_DERIVATIVE_ORDER {
        // derivative of P_n
        let mut deriv = [0.0; POLY_LEN];
        let mut k = 1;
        while k < POLY_LEN {
            deriv[k - 1] = table[n][k] * k as f64;
            k += 1;
        }
        // multiply by (1 - t^2)
        let mut k = 0;
        while k < POLY_LEN {
            let mut c = deriv[k];
            if k >= 2 {
                c -= deriv[k - 2];
            }
            table[n + 1][k] = c;
            k += 1;
        }
        n += 1;
    }
    table
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ActivationKind {
    #[default]
    Tanh,
}

impl ActivationKind {
    /// `d^order sigma / dz^order` at `z`.
    pub fn derivative(self, order: usize, z: f64) -> Result<f64> {
        if order > MAX_DERIVATIVE_ORDER {
            return Err(Error::UnsupportedOrder {
                what: "activation",
                requested: order,
                max: MAX_DERIVATIVE_ORDER,
            });
        }
        let mut out = [0.0; TABLE_LEN];
        self.derivatives_into(z, order, &mut out);
        Ok(out[order])
    }

    /// Fills `out[0..=max_order]` with the derivatives at `z`.
    ///
    /// `max_order` must not exceed [`MAX_DERIVATIVE_ORDER`]; callers validate
    /// that once per operator rather than per evaluation.
    #[inline]
    pub fn derivatives_into(self, z: f64, max_order: usize, out: &mut [f64; TABLE_LEN]) {
        debug_assert!(max_order <= MAX_DERIVATIVE_ORDER);
        match self {
            ActivationKind::Tanh => {
                let t = z.tanh();
                out[0] = t;
                for (n, slot) in out.iter_mut().enumerate().take(max_order + 1).skip(1) {
                    *slot = TANH_POLY[n].iter().rev().fold(0.0, |acc, c| acc * t + c);
                }
            }
        }
    }
}

/// Free-function form of [`ActivationKind::derivative`].
pub fn activation_derivative(kind: ActivationKind, order: usize, z: f64) -> Result<f64> {
    kind.derivative(order, z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_matches_hand_expansion() {
        // P3 = -2 + 8t^2 - 6t^4, P5 = 16 - 136t^2 + 240t^4 - 120t^6
        assert_eq!(&TANH_POLY[3][..5], &[-2.0, 0.0, 8.0, 0.0, -6.0]);
        assert_eq!(TANH_POLY[5], [16.0, 0.0, -136.0, 0.0, 240.0, 0.0, -120.0]);
    }

    #[test]
    fn values_at_origin() {
        let k = ActivationKind::Tanh;
        assert_eq!(k.derivative(0, 0.0).unwrap(), 0.0);
        assert_eq!(k.derivative(1, 0.0).unwrap(), 1.0);
        assert_eq!(k.derivative(3, 0.0).unwrap(), -2.0);
        assert_eq!(k.derivative(5, 0.0).unwrap(), 16.0);
    }

    #[test]
    fn order_beyond_ceiling_is_rejected() {
        assert!(matches!(
            activation_derivative(ActivationKind::Tanh, 6, 0.1),
            Err(Error::UnsupportedOrder { requested: 6, .. })
        ));
    }

    #[test]
    fn parity_and_bound() {
        let k = ActivationKind::Tanh;
        for i in 0..200 {
            let z = -6.0 + 0.06 * i as f64;
            for n in 0..=MAX_DERIVATIVE_ORDER {
                let a = k.derivative(n, z).unwrap();
                let b = k.derivative(n, -z).unwrap();
                let sign = if n % 2 == 0 { -1.0 } else { 1.0 };
                assert!((a - sign * b).abs() < 1e-14, "parity n={n} z={z}");
                assert!(a.abs() <= 16.0);
            }
        }
        assert!(k.derivative(5, 1e300).unwrap().is_finite());
    }

    #[test]
    fn matches_closed_forms() {
        let k = ActivationKind::Tanh;
        for &z in &[-2.3, -0.4, 0.7, 1.9] {
            let t: f64 = f64::tanh(z);
            let sech2 = 1.0 - t * t;
            assert!((k.derivative(1, z).unwrap() - sech2).abs() < 1e-15);
            assert!((k.derivative(2, z).unwrap() + 2.0 * t * sech2).abs() < 1e-15);
        }
    }
}
