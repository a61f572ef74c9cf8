//! Residual-driven initialization of hidden parameters.
//!
//! Weights are uniform in `(-R, R)`; each neuron's partition hyperplane
//! `w . x + b = 0` is then pinned to a base point drawn with density
//! proportional to the current residual, so neurons concentrate where the
//! residual is large.

use rand::Rng;

use super::slfn::pre_activation;
use super::Slfn;
use crate::activation::ActivationKind;
use crate::error::{Error, Result};
use crate::geometry::{rejection_sample_tabulated, Domain, Point, PointSet};

#[derive(Debug, Clone)]
pub struct InitOutcome {
    pub weights: Vec<Point>,
    pub biases: Vec<f64>,
    pub base_points: PointSet,
    /// The residual vanished on the candidate grid and base points are uniform.
    pub uniform_fallback: bool,
}

impl InitOutcome {
    /// Network with these hidden parameters and zero output coefficients.
    pub fn into_network(self, activation: ActivationKind) -> Result<Slfn> {
        let n = self.weights.len();
        Slfn::new(
            self.base_points.dim(),
            self.weights,
            self.biases,
            vec![0.0; n],
            activation,
        )
    }
}

/// Uniform draw from the open interval `(-radius, radius)`.
fn open_uniform<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return radius * (2.0 * u - 1.0);
        }
    }
}

/// Draws `width` weights and base points; `residual` holds the residual on
/// the `candidates` grid.
pub fn adaptive_init<R: Rng + ?Sized>(
    residual: &[f64],
    domain: &Domain,
    candidates: &PointSet,
    width: usize,
    radius: f64,
    rng: &mut R,
) -> Result<InitOutcome> {
    if width == 0 {
        return Err(Error::InvalidArgument(
            "network width must be at least 1".into(),
        ));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "weight radius {radius} must be positive"
        )));
    }
    let dim = domain.dim();
    let weights: Vec<Point> = (0..width)
        .map(|_| {
            let mut w = [0.0; 2];
            for v in w.iter_mut().take(dim) {
                *v = open_uniform(radius, rng);
            }
            w
        })
        .collect();
    let sample = rejection_sample_tabulated(residual, domain, width, candidates, rng)?;
    let biases = weights
        .iter()
        .zip(sample.points.points())
        .map(|(w, x)| -pre_activation(w, 0.0, x))
        .collect();
    Ok(InitOutcome {
        weights,
        biases,
        base_points: sample.points,
        uniform_fallback: sample.uniform_fallback,
    })
}

/// Fraction of neurons whose partition hyperplane passes within distance
/// `tau` of `x`. Neurons with a zero weight vector have no hyperplane.
pub fn hyperplane_density(x: &Point, weights: &[Point], biases: &[f64], tau: f64) -> f64 {
    if weights.is_empty() {
        return 0.0;
    }
    let hits = weights
        .iter()
        .zip(biases)
        .filter(|(w, &b)| {
            let norm = w[0].hypot(w[1]);
            norm > 0.0 && pre_activation(w, b, x).abs() / norm <= tau
        })
        .count();
    hits as f64 / weights.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::candidate_grid;
    use crate::rng::{stream, Purpose};

    #[test]
    fn hyperplanes_pass_through_base_points() {
        let d = Domain::standard_l_shape();
        let grid = candidate_grid(&d, 100).unwrap();
        let res: Vec<f64> = grid
            .points()
            .iter()
            .map(|p| (3.0 * p[0]).sin() * p[1])
            .collect();
        let mut rng = stream(11, 1, Purpose::BasePoints, 0);
        let out = adaptive_init(&res, &d, &grid, 500, 4.0, &mut rng).unwrap();
        for ((w, &b), x) in out
            .weights
            .iter()
            .zip(&out.biases)
            .zip(out.base_points.points())
        {
            assert_eq!(pre_activation(w, b, x), 0.0);
            assert!(w[0].abs() < 4.0 && w[1].abs() < 4.0);
        }
    }

    #[test]
    fn density_examples() {
        let tau = 0.1;
        assert_eq!(
            hyperplane_density(&[0.3, 0.0], &[[1.0, 0.0]], &[-0.3], tau),
            1.0
        );
        assert_eq!(
            hyperplane_density(&[2.0 * tau, 0.0], &[[1.0, 0.0]], &[0.0], tau),
            0.0
        );
        let w = [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let b = [0.0, -5.0, -5.0];
        assert!((hyperplane_density(&[0.0, 0.0], &w, &b, tau) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(
            hyperplane_density(&[0.0, 0.0], &[[0.0, 0.0]], &[0.0], tau),
            0.0
        );
    }

    #[test]
    fn vanishing_residual_falls_back_to_uniform() {
        let d = Domain::Interval { a: 0.0, b: 1.0 };
        let grid = candidate_grid(&d, 100).unwrap();
        let mut rng = stream(2, 1, Purpose::BasePoints, 0);
        let out = adaptive_init(&vec![0.0; 100], &d, &grid, 10, 1.0, &mut rng).unwrap();
        assert!(out.uniform_fallback);
        assert_eq!(out.into_network(ActivationKind::Tanh).unwrap().width(), 10);
    }
}
