//! Closed forms for the built-in benchmark problems.

use std::f64::consts::PI;

use crate::geometry::Point;
use crate::jet::Jet;

fn xy(p: &Point, order: usize) -> (Jet, Jet) {
    (Jet::variable(order, p[0], 0), Jet::variable(order, p[1], 1))
}

/// `sin x + sin(3 pi x)/3 + sin(5 pi x)/5 + sin(7 pi x)/7`.
pub fn square_wave_partial_sum(p: &Point, order: usize) -> Jet {
    let x = Jet::variable(order, p[0], 0);
    let mut acc = x.sin();
    for k in [3.0, 5.0, 7.0] {
        acc.add_scaled(1.0 / k, &(x * (k * PI)).sin());
    }
    acc
}

/// Solution of `-eps u'' + b u' = 1` on `(-1, 1)` with zero boundary values.
pub fn boundary_layer_solution(eps: f64, b: f64) -> impl Fn(&Point, usize) -> Jet + Send + Sync {
    move |p, order| {
        let x = Jet::variable(order, p[0], 0);
        let e2 = (-2.0 * b / eps).exp();
        let ratio = (e2 + 1.0) / (e2 - 1.0);
        let layer = ((x + (-1.0)) * (b / eps)).exp() * (2.0 / (e2 + 1.0)) + (-1.0);
        x * (1.0 / b) + layer * (ratio / b)
    }
}

/// `16 x (1-x) y (1-y) (1/2 + atan((r - |x - c|^2) / eps) / pi)` with
/// `r = 1/16`, `c = (1/2, 1/2)`.
pub fn rapid_solution(eps: f64) -> impl Fn(&Point, usize) -> Jet + Send + Sync {
    move |p, order| {
        let (x, y) = xy(p, order);
        let bubble = x * (-x + 1.0) * y * (-y + 1.0) * 16.0;
        let (dx, dy) = (x + (-0.5), y + (-0.5));
        let q = (dx * dx + dy * dy) * -1.0 + 1.0 / 16.0;
        let step = (q * (1.0 / eps)).atan() * (1.0 / PI) + 0.5;
        bubble * step
    }
}

/// `-Laplacian` of [`rapid_solution`], expanded by hand.
pub fn rapid_source(eps: f64) -> impl Fn(&Point) -> f64 + Send + Sync {
    move |p| {
        let (x, y) = (p[0], p[1]);
        let (bx, by) = (x * (1.0 - x), y * (1.0 - y));
        let bubble = 16.0 * bx * by;
        let bubble_x = 16.0 * (1.0 - 2.0 * x) * by;
        let bubble_y = 16.0 * bx * (1.0 - 2.0 * y);
        let bubble_lap = 16.0 * (-2.0 * by - 2.0 * bx);

        let (dx, dy) = (x - 0.5, y - 0.5);
        let q = 1.0 / 16.0 - (dx * dx + dy * dy);
        let v = q / eps;
        let den = 1.0 + v * v;
        let step = 0.5 + v.atan() / PI;
        // derivatives of the step with respect to q
        let g1 = 1.0 / (PI * eps * den);
        let g2 = -2.0 * v / (PI * eps * eps * den * den);
        let (qx, qy) = (-2.0 * dx, -2.0 * dy);
        let step_lap = g1 * -4.0 + g2 * (qx * qx + qy * qy);
        let grad_dot = bubble_x * g1 * qx + bubble_y * g1 * qy;
        -(bubble_lap * step + 2.0 * grad_dot + bubble * step_lap)
    }
}

/// `sin^2(pi x) sin^2(pi y) + (1 - x^2)^4 (1 - y^2)^4`.
pub fn biharmonic_solution(p: &Point, order: usize) -> Jet {
    let (x, y) = xy(p, order);
    let (sx, sy) = ((x * PI).sin(), (y * PI).sin());
    let (bx, by) = ((x * x) * -1.0 + 1.0, (y * y) * -1.0 + 1.0);
    sx * sx * sy * sy + bx.powi(4) * by.powi(4)
}

/// Bi-Laplacian of [`biharmonic_solution`], derived symbolically.
pub fn biharmonic_source(p: &Point) -> f64 {
    let (x, y) = (p[0], p[1]);
    let (sx, sy) = ((PI * x).sin().powi(2), (PI * y).sin().powi(2));
    let trig = PI.powi(4) * (64.0 * sx * sy - 24.0 * sx - 24.0 * sy + 8.0);
    let (x2, y2) = (x * x, y * y);
    let (x4, y4) = (x2 * x2, y2 * y2);
    let (x6, y6) = (x4 * x2, y4 * y2);
    let (x8, y8) = (x4 * x4, y4 * y4);
    let poly = 105.0 * x8 * y4 - 90.0 * x8 * y2 + 9.0 * x8 + 392.0 * x6 * y6 - 1260.0 * x6 * y4
        + 864.0 * x6 * y2
        - 92.0 * x6
        + 105.0 * x4 * y8
        - 1260.0 * x4 * y6
        + 3060.0 * x4 * y4
        - 2040.0 * x4 * y2
        + 279.0 * x4
        - 90.0 * x2 * y8
        + 864.0 * x2 * y6
        - 2040.0 * x2 * y4
        + 1368.0 * x2 * y2
        - 198.0 * x2
        + 9.0 * y8
        - 92.0 * y6
        + 279.0 * y4
        - 198.0 * y2
        + 26.0;
    trig + 16.0 * poly
}

/// Constants `(c1, c2)` of the clamped-disk point-load solution.
pub fn point_load_constants(eps1: f64, eps2: f64) -> (f64, f64) {
    let c1 = (-1.0 / (2.0 * PI) - eps2 / (8.0 * PI)) / (4.0 + 2.0 * eps2);
    let c2 = -c1 + eps1 / (2.0 * PI);
    (c1, c2)
}

/// `r^2 ln(r) / (8 pi) + c1 r^2 + c2`.
pub fn point_load_solution(eps1: f64, eps2: f64) -> impl Fn(&Point, usize) -> Jet + Send + Sync {
    let (c1, c2) = point_load_constants(eps1, eps2);
    move |p, order| {
        let (x, y) = xy(p, order);
        let r2 = x * x + y * y;
        r2 * r2.ln() * (1.0 / (16.0 * PI)) + r2 * c1 + c2
    }
}

/// Radial plateau: 1 inside `r0`, logarithmic ramp to 0 at `r1`.
pub fn plateau(r0: f64, r1: f64) -> impl Fn(&Point, usize) -> Jet + Send + Sync {
    move |p, order| {
        let r = p[0].hypot(p[1]);
        if r <= r0 {
            Jet::constant(order, 1.0)
        } else if r >= r1 {
            Jet::zero(order)
        } else {
            let (x, y) = xy(p, order);
            let r2 = x * x + y * y;
            (r2.ln() * -0.5 + r1.ln()) * (1.0 / (r1 / r0).ln())
        }
    }
}
