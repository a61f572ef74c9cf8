//! Differential and boundary operators, collocation row blocks and the
//! analytic loss gradient used by the Adam refinement.
//!
//! Every operator is linear, so at a point it is a [`Functional`]: a fixed
//! combination of partial derivatives whose coefficients may depend on the
//! position (the radial point-load operator) or the outward normal (boundary
//! conditions). A [`RowBlock`] pairs an operator with a point set and turns
//! each point into one or two such rows.

use std::f64::consts::PI;

use crate::basis::{BasisFunction, Slfn};
use crate::error::{Error, Result};
use crate::geometry::{BoundarySet, Point, PointSet};
use crate::jet::Functional;
use crate::linalg::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatorSpec {
    Identity,
    /// `-eps u'' + b u'` (one-dimensional).
    AdvectionDiffusion {
        eps: f64,
        b: f64,
    },
    NegLaplacian,
    Biharmonic,
    /// `2 pi r d/dr (Laplacian u)` written in Cartesian partials.
    RadialPointLoad,
    /// `eps^2 Laplacian u - alpha eps^2 u`.
    LinearizedAC {
        eps: f64,
        alpha: f64,
    },
}

impl OperatorSpec {
    pub fn required_order(&self) -> usize {
        match self {
            OperatorSpec::Identity => 0,
            OperatorSpec::AdvectionDiffusion { .. }
            | OperatorSpec::NegLaplacian
            | OperatorSpec::LinearizedAC { .. } => 2,
            OperatorSpec::RadialPointLoad => 3,
            OperatorSpec::Biharmonic => 4,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OperatorSpec::Identity => "identity",
            OperatorSpec::AdvectionDiffusion { .. } => "advection_diffusion",
            OperatorSpec::NegLaplacian => "neg_laplacian",
            OperatorSpec::Biharmonic => "biharmonic",
            OperatorSpec::RadialPointLoad => "radial_point_load",
            OperatorSpec::LinearizedAC { .. } => "linearized_allen_cahn",
        }
    }

    /// The operator at `x` as a combination of partials.
    pub fn functional(&self, dim: usize, x: &Point) -> Functional {
        let two_d = dim == 2;
        let f = Functional::new();
        match *self {
            OperatorSpec::Identity => f.with(0, 0, 1.0),
            OperatorSpec::AdvectionDiffusion { eps, b } => f.with(2, 0, -eps).with(1, 0, b),
            OperatorSpec::NegLaplacian => laplacian(f, two_d, -1.0),
            OperatorSpec::Biharmonic => {
                let f = f.with(4, 0, 1.0);
                if two_d {
                    f.with(2, 2, 2.0).with(0, 4, 1.0)
                } else {
                    f
                }
            }
            OperatorSpec::RadialPointLoad => {
                let (cx, cy) = (2.0 * PI * x[0], 2.0 * PI * x[1]);
                let f = f.with(3, 0, cx);
                if two_d {
                    f.with(1, 2, cx).with(2, 1, cy).with(0, 3, cy)
                } else {
                    f
                }
            }
            OperatorSpec::LinearizedAC { eps, alpha } => {
                laplacian(f, two_d, eps * eps).with(0, 0, -alpha * eps * eps)
            }
        }
    }
}

fn laplacian(f: Functional, two_d: bool, coef: f64) -> Functional {
    let f = f.with(2, 0, coef);
    if two_d {
        f.with(0, 2, coef)
    } else {
        f
    }
}

fn normal_derivative(f: Functional, two_d: bool, n: &Point, coef: f64) -> Functional {
    let f = f.with(1, 0, coef * n[0]);
    if two_d {
        f.with(0, 1, coef * n[1])
    } else {
        f
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundarySpec {
    Dirichlet,
    Neumann,
    /// `u` and `du/dn` as two consecutive rows.
    DirichletAndNormal,
    /// `u - eps1 d(Laplacian u)/dn` and `Laplacian u + eps2 du/dn`.
    RobinPair {
        eps1: f64,
        eps2: f64,
    },
}

impl BoundarySpec {
    pub fn rows_per_point(&self) -> usize {
        match self {
            BoundarySpec::Dirichlet | BoundarySpec::Neumann => 1,
            BoundarySpec::DirichletAndNormal | BoundarySpec::RobinPair { .. } => 2,
        }
    }

    pub fn required_order(&self) -> usize {
        match self {
            BoundarySpec::Dirichlet => 0,
            BoundarySpec::Neumann | BoundarySpec::DirichletAndNormal => 1,
            BoundarySpec::RobinPair { .. } => 3,
        }
    }

    /// Condition `row` (0 or 1) at a boundary point with outward normal `n`.
    pub fn functional(&self, dim: usize, n: &Point, row: usize) -> Functional {
        let two_d = dim == 2;
        let f = Functional::new();
        match (*self, row) {
            (BoundarySpec::Dirichlet, _) | (BoundarySpec::DirichletAndNormal, 0) => {
                f.with(0, 0, 1.0)
            }
            (BoundarySpec::Neumann, _) | (BoundarySpec::DirichletAndNormal, _) => {
                normal_derivative(f, two_d, n, 1.0)
            }
            (BoundarySpec::RobinPair { eps1, .. }, 0) => {
                let f = f.with(0, 0, 1.0).with(3, 0, -eps1 * n[0]);
                if two_d {
                    f.with(1, 2, -eps1 * n[0])
                        .with(2, 1, -eps1 * n[1])
                        .with(0, 3, -eps1 * n[1])
                } else {
                    f
                }
            }
            (BoundarySpec::RobinPair { eps2, .. }, _) => {
                normal_derivative(laplacian(f, two_d, 1.0), two_d, n, eps2)
            }
        }
    }
}

#[derive(Debug, Clone)]
enum RowKind {
    Interior(OperatorSpec),
    Partial(usize, usize),
    Boundary(BoundarySpec, Vec<Point>),
}

/// Collocation rows: an operator attached to a point set, with a uniform
/// scale applied to every row (the boundary penalty `lambda`).
#[derive(Debug, Clone)]
pub struct RowBlock {
    kind: RowKind,
    points: PointSet,
    scale: f64,
}

impl RowBlock {
    pub fn interior(op: OperatorSpec, points: &PointSet) -> Self {
        Self {
            kind: RowKind::Interior(op),
            points: points.clone(),
            scale: 1.0,
        }
    }

    /// Rows evaluating the plain partial `d^(a, b)`.
    pub fn partial(alpha: (usize, usize), points: &PointSet) -> Self {
        Self {
            kind: RowKind::Partial(alpha.0, alpha.1),
            points: points.clone(),
            scale: 1.0,
        }
    }

    pub fn boundary(spec: BoundarySpec, boundary: &BoundarySet, scale: f64) -> Self {
        Self {
            kind: RowKind::Boundary(spec, boundary.normals.clone()),
            points: boundary.points.clone(),
            scale,
        }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn rows_per_point(&self) -> usize {
        match &self.kind {
            RowKind::Interior(_) | RowKind::Partial(..) => 1,
            RowKind::Boundary(spec, _) => spec.rows_per_point(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len() * self.rows_per_point()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn required_order(&self) -> usize {
        match &self.kind {
            RowKind::Interior(op) => op.required_order(),
            RowKind::Partial(a, b) => a + b,
            RowKind::Boundary(spec, _) => spec.required_order(),
        }
    }

    /// Point index of row `r`.
    #[inline]
    pub fn point_of_row(&self, r: usize) -> usize {
        r / self.rows_per_point()
    }

    /// Scaled functional of row `r`.
    pub fn functional(&self, r: usize) -> Functional {
        let rpp = self.rows_per_point();
        let p = r / rpp;
        let dim = self.points.dim();
        let f = match &self.kind {
            RowKind::Interior(op) => op.functional(dim, &self.points.points()[p]),
            RowKind::Partial(a, b) => Functional::new().with(*a, *b, 1.0),
            RowKind::Boundary(spec, normals) => spec.functional(dim, &normals[p], r % rpp),
        };
        f.scaled(self.scale)
    }
}

/// `op` applied to `f` at each point.
pub fn apply_operator(op: OperatorSpec, f: &BasisFunction, points: &PointSet) -> Result<Vec<f64>> {
    f.apply_block(&RowBlock::interior(op, points))
}

/// A member or a family of columns of a collocation matrix.
#[derive(Debug, Clone, Copy)]
pub enum Dictionary<'a> {
    /// Each hidden neuron `sigma(w_i . x + b_i)` of the network is a column.
    Neurons(&'a Slfn),
    /// Each localized neuron is a column.
    Localized(&'a crate::basis::LocalizedNetwork),
    /// A single basis function is one column.
    Function(&'a BasisFunction),
}

impl Dictionary<'_> {
    pub fn columns(&self) -> usize {
        match self {
            Dictionary::Neurons(n) => n.width(),
            Dictionary::Localized(l) => l.len(),
            Dictionary::Function(_) => 1,
        }
    }

    /// Writes the columns of this dictionary for `block` into
    /// `out[row_offset + r][col_offset + j]`.
    fn fill(
        &self,
        block: &RowBlock,
        out: &mut DenseMatrix,
        row_offset: usize,
        col_offset: usize,
    ) -> Result<()> {
        match self {
            Dictionary::Neurons(n) => n.fill_neuron_columns(block, out, row_offset, col_offset),
            Dictionary::Localized(l) => l.fill_neuron_columns(block, out, row_offset, col_offset),
            Dictionary::Function(f) => {
                let col = f.apply_block(block)?;
                for (r, v) in col.into_iter().enumerate() {
                    out.set(row_offset + r, col_offset, v);
                }
                Ok(())
            }
        }
    }
}

/// Stacks the row blocks vertically and the dictionaries horizontally.
pub fn assemble(blocks: &[&RowBlock], dictionary: &[Dictionary]) -> Result<DenseMatrix> {
    let rows: usize = blocks.iter().map(|b| b.len()).sum();
    let cols: usize = dictionary.iter().map(Dictionary::columns).sum();
    let mut out = DenseMatrix::zeros(rows, cols);
    let mut r0 = 0;
    for block in blocks {
        let mut c0 = 0;
        for d in dictionary {
            d.fill(block, &mut out, r0, c0)?;
            c0 += d.columns();
        }
        r0 += block.len();
    }
    if out.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("assembled collocation matrix"));
    }
    Ok(out)
}

/// Single-block assembly with an explicit scale.
pub fn assemble_block(
    block: &RowBlock,
    dictionary: &[BasisFunction],
    scale: f64,
) -> Result<DenseMatrix> {
    if dictionary.is_empty() {
        return Err(Error::InvalidArgument("empty dictionary".into()));
    }
    let block = block.clone().with_scale(scale);
    let dict: Vec<Dictionary> = dictionary.iter().map(Dictionary::Function).collect();
    assemble(&[&block], &dict)
}

/// Row blocks with per-row targets (unscaled; the block scale multiplies both
/// the operator rows and the targets).
#[derive(Debug, Clone, Default)]
pub struct System {
    pub blocks: Vec<RowBlock>,
    pub targets: Vec<Vec<f64>>,
}

impl System {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, block: RowBlock, targets: Vec<f64>) -> Result<()> {
        if targets.len() != block.len() {
            return Err(Error::Dimension(format!(
                "{} targets for {} rows",
                targets.len(),
                block.len()
            )));
        }
        self.blocks.push(block);
        self.targets.push(targets);
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.blocks.iter().map(RowBlock::len).sum()
    }

    /// Scaled right-hand side stacked like [`System::matrix`].
    pub fn rhs(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .zip(&self.targets)
            .flat_map(|(b, t)| t.iter().map(move |v| b.scale() * v))
            .collect()
    }

    pub fn matrix(&self, dictionary: &[Dictionary]) -> Result<DenseMatrix> {
        let blocks: Vec<&RowBlock> = self.blocks.iter().collect();
        assemble(&blocks, dictionary)
    }

    /// `sum over rows of (scale * (L f - target))^2`.
    pub fn loss(&self, f: &BasisFunction) -> Result<f64> {
        let mut total = 0.0;
        for (b, t) in self.blocks.iter().zip(&self.targets) {
            let vals = f.apply_block(b)?;
            total += vals
                .iter()
                .zip(t)
                .map(|(v, t)| (v - b.scale() * t).powi(2))
                .sum::<f64>();
        }
        Ok(total)
    }
}

/// Loss and its exact gradient with respect to the network parameters, in
/// the layout of [`Slfn::params`].
pub fn loss_param_gradient(system: &System, net: &Slfn) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; net.param_len()];
    let mut loss = 0.0;
    for (b, t) in system.blocks.iter().zip(&system.targets) {
        loss += net.accumulate_loss_gradient(b, t, &mut grad)?;
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::ActivationKind;
    use crate::basis::ClosedForm;
    use crate::geometry::{boundary_points, Domain};
    use crate::jet::Jet;

    fn poly_1d() -> BasisFunction {
        BasisFunction::ClosedForm(ClosedForm::new("x(1-x)", 4, |p, order| {
            let x = Jet::variable(order, p[0], 0);
            x * (-x + 1.0)
        }))
    }

    #[test]
    fn neg_laplacian_of_parabola_is_two() {
        let pts = PointSet::from_1d(&[0.1, 0.4, 0.9]);
        let v = apply_operator(OperatorSpec::NegLaplacian, &poly_1d(), &pts).unwrap();
        assert!(v.iter().all(|&x| (x - 2.0).abs() < 1e-14));
    }

    #[test]
    fn biharmonic_matches_symbolic_oracle() {
        let f = BasisFunction::ClosedForm(ClosedForm::new("sin^2 sin^2", 4, |p, order| {
            let x = Jet::variable(order, p[0], 0) * PI;
            let y = Jet::variable(order, p[1], 1) * PI;
            let (sx, sy) = (x.sin(), y.sin());
            sx * sx * sy * sy
        }));
        let pts = PointSet::new(2, vec![[0.3, 0.7]]);
        let v = apply_operator(OperatorSpec::Biharmonic, &f, &pts).unwrap()[0];
        // sin^2 t = (1 - cos 2t)/2; the biharmonic of the product, expanded by hand:
        // with a = cos(2 pi x), c = cos(2 pi y):
        // u = (1 - a)(1 - c)/4, u_xxxx = -(16 pi^4 a)(1 - c)/4, u_xxyy = (4 pi^2)^2 a c / 4
        let (a, c) = ((2.0 * PI * 0.3).cos(), (2.0 * PI * 0.7).cos());
        let p4 = PI.powi(4);
        let oracle = -16.0 * p4 * a * (1.0 - c) / 4.0 + 2.0 * 16.0 * p4 * a * c / 4.0
            - 16.0 * p4 * c * (1.0 - a) / 4.0;
        assert!(
            (v - oracle).abs() < 1e-9 * oracle.abs().max(1.0),
            "{v} vs {oracle}"
        );
    }

    #[test]
    fn radial_point_load_on_exact_solution() {
        let (e1, e2) = (1.0, 1.0);
        let c1 = (-1.0 / (2.0 * PI) - e2 / (8.0 * PI)) / (4.0 + 2.0 * e2);
        let c2 = -c1 + e1 / (2.0 * PI);
        let f = BasisFunction::ClosedForm(ClosedForm::new("point load", 4, move |p, order| {
            let x = Jet::variable(order, p[0], 0);
            let y = Jet::variable(order, p[1], 1);
            let r2 = x * x + y * y;
            r2 * r2.ln() * (1.0 / (16.0 * PI)) + r2 * c1 + c2
        }));
        let pts: Vec<Point> = (0..50)
            .map(|k| {
                let r = 0.05 + 0.9 * k as f64 / 49.0;
                let t = 0.37 * k as f64;
                [r * t.cos(), r * t.sin()]
            })
            .collect();
        let pts = PointSet::new(2, pts);
        let v = apply_operator(OperatorSpec::RadialPointLoad, &f, &pts).unwrap();
        assert!(v.iter().all(|&x| (x - 1.0).abs() < 1e-8));

        let bd = boundary_points(
            &Domain::Disk {
                center: [0.0, 0.0],
                radius: 1.0,
            },
            16,
        )
        .unwrap();
        let block = RowBlock::boundary(BoundarySpec::RobinPair { eps1: e1, eps2: e2 }, &bd, 1.0);
        assert_eq!(block.len(), 32);
        let g = f.apply_block(&block).unwrap();
        assert!(g.iter().all(|&x| x.abs() < 1e-12), "{g:?}");
    }

    #[test]
    fn identity_block_and_zero_scale() {
        let net = Slfn::new(
            1,
            vec![[1.0, 0.0], [-2.0, 0.0]],
            vec![0.1, 0.3],
            vec![1.0, 1.0],
            ActivationKind::Tanh,
        )
        .unwrap();
        let members: Vec<BasisFunction> = net
            .neurons()
            .into_iter()
            .map(BasisFunction::Network)
            .collect();
        let pts = PointSet::from_1d(&[0.0, 0.5, 1.0]);
        let block = RowBlock::interior(OperatorSpec::Identity, &pts);
        let m = assemble_block(&block, &members, 1.0).unwrap();
        assert_eq!((m.rows(), m.cols()), (3, 2));
        assert_eq!(m.get(1, 1), (-2.0f64 * 0.5 + 0.3).tanh());
        let z = assemble_block(&block, &members, 0.0).unwrap();
        assert!(z.as_slice().iter().all(|&v| v == 0.0));
        // the neuron fast path agrees with per-function evaluation
        let fast = assemble(&[&block], &[Dictionary::Neurons(&net)]).unwrap();
        assert_eq!(fast.as_slice(), m.as_slice());
    }

    #[test]
    fn neumann_rows_use_outward_normals() {
        let f = BasisFunction::ClosedForm(ClosedForm::new("x+2y", 4, |p, order| {
            Jet::variable(order, p[0], 0) + Jet::variable(order, p[1], 1) * 2.0
        }));
        let bd = boundary_points(
            &Domain::Box2D {
                lo: [-1.0, -1.0],
                hi: [1.0, 1.0],
            },
            8,
        )
        .unwrap();
        let v = f
            .apply_block(&RowBlock::boundary(BoundarySpec::Neumann, &bd, 1.0))
            .unwrap();
        assert_eq!(v, vec![-2.0, -2.0, 1.0, 1.0, 2.0, 2.0, -1.0, -1.0]);
    }
}
