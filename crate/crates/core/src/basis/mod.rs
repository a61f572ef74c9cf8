//! Basis functions and their linear combinations.
//!
//! Every basis function can report its Taylor [`Jet`] at a point up to a
//! supported order, and can be evaluated under a collocation [`RowBlock`].
//! Networks and localized families override the block evaluation with
//! batched kernels; everything else goes through per-point jets.

mod init;
mod localized;
mod slfn;
mod special;

pub use init::{adaptive_init, hyperplane_density, InitOutcome};
pub use localized::{
    make_localized_basis, LocalizedNetwork, ReferenceField, SecondOrder, LOCALIZED_MAX_ORDER,
};
pub use slfn::{pre_activation, Slfn};
pub use special::{ClosedForm, SingularTerm, ORIGIN_PERTURBATION};

use crate::error::{Error, Result};
use crate::geometry::{Point, PointSet};
use crate::jet::{Jet, MAX_JET_ORDER};
use crate::operators::RowBlock;

#[derive(Debug, Clone)]
pub enum BasisFunction {
    Network(Slfn),
    ClosedForm(ClosedForm),
    Singular(SingularTerm),
    Localized(LocalizedNetwork),
    /// A fixed linear combination, e.g. a trained network together with the
    /// singular terms that were fitted alongside it.
    Sum(Vec<(f64, BasisFunction)>),
}

impl BasisFunction {
    /// Highest total derivative order this function supports.
    pub fn max_order(&self) -> usize {
        match self {
            BasisFunction::Network(_) | BasisFunction::Singular(_) => MAX_JET_ORDER,
            BasisFunction::ClosedForm(c) => c.max_order(),
            BasisFunction::Localized(_) => LOCALIZED_MAX_ORDER,
            BasisFunction::Sum(parts) => parts
                .iter()
                .map(|(_, f)| f.max_order())
                .min()
                .unwrap_or(MAX_JET_ORDER),
        }
    }

    fn check_order(&self, order: usize) -> Result<()> {
        let max = self.max_order();
        if order > max {
            return Err(Error::UnsupportedOrder {
                what: "basis function",
                requested: order,
                max,
            });
        }
        Ok(())
    }

    pub fn jet(&self, x: &Point, order: usize) -> Result<Jet> {
        self.check_order(order)?;
        match self {
            BasisFunction::Network(n) => n.jet(x, order),
            BasisFunction::ClosedForm(c) => c.jet(x, order),
            BasisFunction::Singular(s) => s.jet(x, order),
            BasisFunction::Localized(l) => l.jet(x, order),
            BasisFunction::Sum(parts) => {
                let mut acc = Jet::zero(order);
                for (c, f) in parts {
                    acc.add_scaled(*c, &f.jet(x, order)?);
                }
                Ok(acc)
            }
        }
    }

    /// `[u, u_x, u_y, u_xx, u_xy, u_yy]` at every point of `points`.
    pub fn second_order_on(&self, points: &PointSet) -> Result<Vec<SecondOrder>> {
        self.check_order(2)?;
        match self {
            BasisFunction::Network(n) => Ok(n.second_order_on(points)),
            BasisFunction::Localized(l) => l.second_order_on(points),
            BasisFunction::Sum(parts) => {
                let mut acc = vec![[0.0; 6]; points.len()];
                for (c, f) in parts {
                    for (a, v) in acc.iter_mut().zip(f.second_order_on(points)?) {
                        for (ai, vi) in a.iter_mut().zip(v) {
                            *ai += c * vi;
                        }
                    }
                }
                Ok(acc)
            }
            _ => points
                .points()
                .iter()
                .map(|x| Ok(localized::second_order(&self.jet(x, 2)?)))
                .collect(),
        }
    }

    /// Value of the block's operator applied to this function, one entry per row.
    pub fn apply_block(&self, block: &RowBlock) -> Result<Vec<f64>> {
        let order = block.required_order();
        self.check_order(order)?;
        match self {
            BasisFunction::Network(n) => n.apply_block(block),
            BasisFunction::Localized(l) => l.apply_block(block),
            BasisFunction::Sum(parts) => {
                let mut acc = vec![0.0; block.len()];
                for (c, f) in parts {
                    for (a, v) in acc.iter_mut().zip(f.apply_block(block)?) {
                        *a += c * v;
                    }
                }
                Ok(acc)
            }
            _ => {
                let rpp = block.rows_per_point();
                let mut out = Vec::with_capacity(block.len());
                for (p, x) in block.points().points().iter().enumerate() {
                    let jet = self.jet(x, order)?;
                    for k in 0..rpp {
                        out.push(block.functional(p * rpp + k).apply(&jet));
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Rows of `block` computed from stored partials of order at most two.
pub fn rows_from_second_order(block: &RowBlock, partials: &[SecondOrder]) -> Result<Vec<f64>> {
    if block.required_order() > 2 {
        return Err(Error::UnsupportedOrder {
            what: "second-order partials",
            requested: block.required_order(),
            max: 2,
        });
    }
    if partials.len() != block.points().len() {
        return Err(Error::Dimension("partials vs row block points".into()));
    }
    let rpp = block.rows_per_point();
    let mut out = Vec::with_capacity(block.len());
    for (p, d) in partials.iter().enumerate() {
        let jet = Jet::from_partials(2, d);
        for k in 0..rpp {
            out.push(block.functional(p * rpp + k).apply(&jet));
        }
    }
    Ok(out)
}

/// `d^(a+b) f / dx^a dy^b` at `x` (a slice of length 1 or 2).
pub fn eval_partial(f: &BasisFunction, alpha: (usize, usize), x: &[f64]) -> Result<f64> {
    let p = to_point(x)?;
    Ok(f.jet(&p, alpha.0 + alpha.1)?.partial(alpha.0, alpha.1))
}

fn to_point(x: &[f64]) -> Result<Point> {
    match x {
        [a] if a.is_finite() => Ok([*a, 0.0]),
        [a, b] if a.is_finite() && b.is_finite() => Ok([*a, *b]),
        [_] | [_, _] => Err(Error::NonFinite("evaluation point")),
        _ => Err(Error::Dimension(format!("{}-dimensional point", x.len()))),
    }
}

/// `u(x) = sum_n beta_n psi_n(x)`.
#[derive(Debug, Clone, Default)]
pub struct BasisSet {
    pub members: Vec<BasisFunction>,
    pub coefficients: Vec<f64>,
}

impl BasisSet {
    pub fn new(members: Vec<BasisFunction>, coefficients: Vec<f64>) -> Result<Self> {
        if members.len() != coefficients.len() {
            return Err(Error::Dimension(format!(
                "{} members, {} coefficients",
                members.len(),
                coefficients.len()
            )));
        }
        Ok(Self {
            members,
            coefficients,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn jet(&self, x: &Point, order: usize) -> Result<Jet> {
        let mut acc = Jet::zero(order);
        for (f, c) in self.members.iter().zip(&self.coefficients) {
            if *c != 0.0 {
                acc.add_scaled(*c, &f.jet(x, order)?);
            }
        }
        Ok(acc)
    }

    pub fn apply_block(&self, block: &RowBlock) -> Result<Vec<f64>> {
        let mut acc = vec![0.0; block.len()];
        for (f, c) in self.members.iter().zip(&self.coefficients) {
            if *c != 0.0 {
                for (a, v) in acc.iter_mut().zip(f.apply_block(block)?) {
                    *a += c * v;
                }
            }
        }
        Ok(acc)
    }

    /// Point values of the combination.
    pub fn values(&self, points: &PointSet) -> Result<Vec<f64>> {
        eval_combination(self, (0, 0), points)
    }

    /// The combination as a single basis function.
    pub fn to_function(&self) -> BasisFunction {
        BasisFunction::Sum(
            self.coefficients
                .iter()
                .copied()
                .zip(self.members.iter().cloned())
                .collect(),
        )
    }
}

/// `sum_n beta_n d^alpha psi_n` at each point.
pub fn eval_combination(
    set: &BasisSet,
    alpha: (usize, usize),
    points: &PointSet,
) -> Result<Vec<f64>> {
    let order = alpha.0 + alpha.1;
    let f = crate::jet::Functional::new().with(alpha.0, alpha.1, 1.0);
    let mut acc = vec![0.0; points.len()];
    for (m, c) in set.members.iter().zip(&set.coefficients) {
        if *c == 0.0 {
            continue;
        }
        m.check_order(order)?;
        match m {
            BasisFunction::Network(_) | BasisFunction::Localized(_) => {
                let block = RowBlock::partial(alpha, points);
                for (a, v) in acc.iter_mut().zip(m.apply_block(&block)?) {
                    *a += c * v;
                }
            }
            _ => {
                for (a, x) in acc.iter_mut().zip(points.points()) {
                    *a += c * f.apply(&m.jet(x, order)?);
                }
            }
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::ActivationKind;
    use crate::rng::{stream, Purpose};
    use rand::Rng;

    fn neuron(w: Point, b: f64) -> BasisFunction {
        BasisFunction::Network(
            Slfn::new(2, vec![w], vec![b], vec![1.0], ActivationKind::Tanh).unwrap(),
        )
    }

    #[test]
    fn network_examples() {
        let f = neuron([1.0, 0.0], 0.0);
        assert_eq!(eval_partial(&f, (0, 0), &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(eval_partial(&f, (1, 0), &[0.0, 0.0]).unwrap(), 1.0);
        assert!(eval_partial(&f, (5, 0), &[0.0, 0.0]).is_err());
        assert!(eval_partial(&f, (0, 0), &[f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn combination_of_zero_coefficients_vanishes() {
        let set = BasisSet::new(vec![neuron([1.0, 2.0], 0.3)], vec![0.0]).unwrap();
        let pts = PointSet::new(2, vec![[0.1, 0.2], [0.5, -0.4]]);
        assert_eq!(set.values(&pts).unwrap(), vec![0.0, 0.0]);
        assert!(BasisSet::new(vec![], vec![1.0]).is_err());
    }

    #[test]
    fn combination_matches_member_sum() {
        let mut rng = stream(4, 0, Purpose::Auxiliary, 0);
        let a = neuron([1.3, -0.7], 0.2);
        let b = BasisFunction::Singular(SingularTerm::new(
            2,
            -std::f64::consts::FRAC_PI_2,
            [0.0, 0.0],
        ));
        let set = BasisSet::new(vec![a.clone(), b.clone()], vec![0.7, -1.9]).unwrap();
        let pts: Vec<Point> = (0..100)
            .map(|_| [rng.random_range(0.05..1.0), rng.random_range(0.05..1.0)])
            .collect();
        let pts = PointSet::new(2, pts);
        for alpha in [(0, 0), (1, 0), (1, 1), (0, 2)] {
            let got = eval_combination(&set, alpha, &pts).unwrap();
            for (k, x) in pts.points().iter().enumerate() {
                let want = 0.7 * eval_partial(&a, alpha, x).unwrap()
                    - 1.9 * eval_partial(&b, alpha, x).unwrap();
                assert!((got[k] - want).abs() < 1e-14 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn network_partials_match_finite_differences() {
        let mut rng = stream(8, 0, Purpose::Auxiliary, 0);
        let n = 6;
        let net = Slfn::new(
            2,
            (0..n)
                .map(|_| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
                .collect(),
            (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            ActivationKind::Tanh,
        )
        .unwrap();
        let f = BasisFunction::Network(net);
        let h = 1e-5;
        for _ in 0..50 {
            let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            for (a, b) in [(1, 0), (0, 1), (2, 1), (1, 3), (0, 4)] {
                let (pa, pb, dx) = if a > 0 {
                    (a - 1, b, [h, 0.0])
                } else {
                    (a, b - 1, [0.0, h])
                };
                let plus = eval_partial(&f, (pa, pb), &[x[0] + dx[0], x[1] + dx[1]]).unwrap();
                let minus = eval_partial(&f, (pa, pb), &[x[0] - dx[0], x[1] - dx[1]]).unwrap();
                let fd = (plus - minus) / (2.0 * h);
                let exact = eval_partial(&f, (a, b), &x).unwrap();
                assert!(
                    (fd - exact).abs() <= 1e-6 * exact.abs().max(1.0),
                    "{a},{b}: {fd} vs {exact}"
                );
            }
        }
    }
}
