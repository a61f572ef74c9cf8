//! The stage loop: residual-driven sampling, construction and training of a
//! new basis function, least-squares resolution in the enlarged space, and
//! the a posteriori estimator `|||u_s - u_{s-1}|||`.
//!
//! Per-member evaluations on the fixed point sets (collocation, candidate,
//! validation and evaluation grids) are computed once when the member is
//! added; the approximation on those sets is then a matrix-vector product.
//! With a localized phase the members' second-order partials are kept too,
//! so the reference field of each localized stage is a linear combination.

pub mod config;

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

pub use config::{LocalizedConfig, SolverConfig};

use crate::activation::ActivationKind;
use crate::basis::{
    adaptive_init, make_localized_basis, rows_from_second_order, BasisFunction, BasisSet,
    ReferenceField, SecondOrder, SingularTerm, Slfn,
};
use crate::error::{Error, Result};
use crate::geometry::{
    boundary_points, candidate_grid, evaluation_grid, rejection_sample_tabulated, uniform_interior,
    validation_interior, BoundarySet, EvaluationGrid, PointSet,
};
use crate::linalg::{lstsq, DenseMatrix, LsqResult};
use crate::operators::{Dictionary, OperatorSpec, RowBlock, System};
use crate::problems::{error_from_values, AllenCahn, ErrorPair, ProblemSpec};
use crate::rng::{stream, Purpose};
use crate::training::{adaptive_basis_training, collo_lsq};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageKind {
    Network,
    Localized,
    Nonlinear,
}

/// Losses of the inner training run of a stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingLosses {
    pub initial_fit: f64,
    pub after_adam: f64,
    pub final_fit: f64,
}

/// One fixed-point iteration of a nonlinear stage.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationReport {
    pub iteration: usize,
    /// Nonlinear residual norm on the validation grid.
    pub residual_interior: f64,
    pub errors: Option<ErrorPair>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub stage: usize,
    pub kind: StageKind,
    /// Hidden neurons of the new basis function.
    pub width: usize,
    /// `|||u_s - u_{s-1}|||` on the validation grid.
    pub estimator: f64,
    /// Residual norm of `u_{s-1}`; for linear problems this equals
    /// `|||u - u_{s-1}|||`.
    pub previous_residual: f64,
    /// `||L u_s - f||` over the domain (validation quadrature).
    pub residual_interior: f64,
    /// `||B u_s - g||` over the boundary, without the penalty `lambda`.
    pub residual_boundary: f64,
    pub errors: Option<ErrorPair>,
    /// Outer least-squares diagnostics.
    pub lsq_residual: f64,
    pub lsq_rank: usize,
    pub columns: usize,
    pub training: Option<TrainingLosses>,
    /// The residual vanished on the candidates and points were drawn uniformly.
    pub uniform_fallback: bool,
    pub iterations: Vec<IterationReport>,
    pub wall_ms: f64,
}

/// Evaluations of one basis member on the fixed point sets.
#[derive(Debug, Clone, Default)]
struct Columns {
    op_x1: Vec<f64>,
    op_cand: Vec<f64>,
    op_val: Vec<f64>,
    bd_xb: Vec<f64>,
    bd_val: Vec<f64>,
    eval: Vec<f64>,
    // point values, kept only for nonlinear problems
    val_x1: Vec<f64>,
    val_cand: Vec<f64>,
    val_val: Vec<f64>,
    second: Option<SecondColumns>,
}

/// `[u, u_x, u_y, u_xx, u_xy, u_yy]` of one member on the fixed point sets.
#[derive(Debug, Clone, Default)]
struct SecondColumns {
    x1: Vec<SecondOrder>,
    cand: Vec<SecondOrder>,
    val: Vec<SecondOrder>,
    eval: Vec<SecondOrder>,
    xb: Vec<SecondOrder>,
    val_b: Vec<SecondOrder>,
}

/// Accessor of one fixed set in [`SecondColumns`].
type PickSecond = fn(&SecondColumns) -> &Vec<SecondOrder>;

fn combine_second<'b>(
    parts: impl Iterator<Item = &'b Vec<SecondOrder>>,
    coefficients: &[f64],
    n: usize,
) -> Vec<SecondOrder> {
    let mut acc = vec![[0.0; 6]; n];
    for (p, &c) in parts.zip(coefficients) {
        if c == 0.0 {
            continue;
        }
        for (a, v) in acc.iter_mut().zip(p) {
            for (ai, vi) in a.iter_mut().zip(v) {
                *ai += c * vi;
            }
        }
    }
    acc
}

/// Evaluations of one member on the current adaptive points.
#[derive(Debug, Clone, Default)]
struct AdaptiveColumn {
    op: Vec<f64>,
    values: Vec<f64>,
    second: Vec<SecondOrder>,
}

struct Grids {
    x1: PointSet,
    xb: BoundarySet,
    candidates: PointSet,
    val: PointSet,
    val_b: BoundarySet,
    eval: EvaluationGrid,
    f_x1: Vec<f64>,
    f_cand: Vec<f64>,
    f_val: Vec<f64>,
    g_xb: Vec<f64>,
    g_val: Vec<f64>,
    exact_eval: Option<Vec<f64>>,
}

fn combine<'a>(columns: impl Iterator<Item = &'a Vec<f64>>, coefs: &[f64], len: usize) -> Vec<f64> {
    let mut acc = vec![0.0; len];
    for (col, &c) in columns.zip(coefs) {
        if c == 0.0 {
            continue;
        }
        for (a, v) in acc.iter_mut().zip(col) {
            *a += c * v;
        }
    }
    acc
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Discrete `|||v|||` from `L v` on interior quadrature points and `B v` on
/// boundary points (all rows of a point together).
pub fn triple_norm_from_values(
    interior: &[f64],
    interior_measure: f64,
    boundary: &[f64],
    boundary_points: usize,
    boundary_measure: f64,
    lambda: f64,
) -> f64 {
    let mut total = if interior.is_empty() {
        0.0
    } else {
        interior_measure / interior.len() as f64 * sum_sq(interior)
    };
    if boundary_points > 0 {
        total += lambda * lambda * boundary_measure / boundary_points as f64 * sum_sq(boundary);
    }
    total.sqrt()
}

/// `|||v|||` of a function for the problem's operator on the given grids.
pub fn triple_norm(
    v: &BasisFunction,
    problem: &ProblemSpec,
    interior: &PointSet,
    boundary: &BoundarySet,
    lambda: f64,
) -> Result<f64> {
    if interior.is_empty() {
        return Err(Error::InvalidArgument("norm grid is empty".into()));
    }
    let li = v.apply_block(&RowBlock::interior(problem.operator, interior))?;
    let bi = match problem.boundary {
        Some(spec) if !boundary.is_empty() => {
            v.apply_block(&RowBlock::boundary(spec, boundary, 1.0))?
        }
        _ => Vec::new(),
    };
    let nb = if bi.is_empty() { 0 } else { boundary.len() };
    Ok(triple_norm_from_values(
        &li,
        problem.domain.measure(),
        &bi,
        nb,
        problem.domain.boundary_measure(),
        lambda,
    ))
}

/// Everything produced by [`solve`].
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub reports: Vec<StageReport>,
    pub basis: BasisSet,
    /// Residual norms of `u_0` (interior, boundary) and its errors.
    pub initial_residual: (f64, f64),
    pub initial_errors: Option<ErrorPair>,
    pub grid: EvaluationGrid,
    pub exact_on_grid: Option<Vec<f64>>,
    /// `u_s` on the evaluation grid for `s = 0, ..., S`.
    pub fields: Vec<Vec<f64>>,
}

/// State of the stage loop: the basis set with its coefficients, the fixed
/// point sets and the cached member evaluations.
pub struct SolverState<'a> {
    problem: &'a ProblemSpec,
    config: &'a SolverConfig,
    stage: usize,
    grids: Grids,
    members: Vec<BasisFunction>,
    coefficients: Vec<f64>,
    columns: Vec<Columns>,
    /// Adaptive points of the current stage and member evaluations there.
    x2: PointSet,
    x2_columns: Vec<AdaptiveColumn>,
    f_x2: Vec<f64>,
    /// Singular terms fitted alongside every network.
    knowledge: Vec<BasisFunction>,
    reference: Option<Arc<ReferenceField>>,
    /// Coefficients of the reference field of each localized member, by
    /// member index; the reference combines the members before it.
    reference_coefficients: HashMap<usize, Vec<f64>>,
    fields: Vec<Vec<f64>>,
    last_lsq: Option<LsqResult>,
    initial: ((f64, f64), Option<ErrorPair>),
}

impl<'a> SolverState<'a> {
    /// Builds the point sets and the initial approximation `u_0`.
    pub fn new(problem: &'a ProblemSpec, config: &'a SolverConfig) -> Result<Self> {
        config.validate()?;
        let domain = &problem.domain;
        let dim = domain.dim();
        if config.interior_uniform == 0 {
            return Err(Error::InvalidArgument(
                "the fixed interior point set must be nonempty".into(),
            ));
        }
        let x1 = uniform_interior(domain, config.interior_uniform)?;
        let (xb, val_b) = match problem.boundary {
            Some(_) => (
                boundary_points(domain, config.boundary_points)?,
                boundary_points(domain, config.validation_boundary)?,
            ),
            None => (BoundarySet::empty(dim), BoundarySet::empty(dim)),
        };
        let candidates = candidate_grid(domain, config.candidates_per_axis)?;
        let val = validation_interior(domain, config.validation_interior)?;
        let eval = evaluation_grid(domain, config.error_grid_per_axis);
        let exact_eval = match &problem.exact {
            Some(e) => Some(e.values(&eval.points)?),
            None => None,
        };
        let grids = Grids {
            f_x1: problem.source_on(&x1),
            f_cand: problem.source_on(&candidates),
            f_val: problem.source_on(&val),
            g_xb: problem.boundary_on(&xb.points, &xb.normals),
            g_val: problem.boundary_on(&val_b.points, &val_b.normals),
            x1,
            xb,
            candidates,
            val,
            val_b,
            eval,
            exact_eval,
        };
        let knowledge = match (config.knowledge_neurons, problem.singular_corner) {
            (true, Some((center, start))) => (1..=config.knowledge_terms)
                .map(|i| BasisFunction::Singular(SingularTerm::new(i, start, center)))
                .collect(),
            _ => Vec::new(),
        };
        let mut state = Self {
            problem,
            config,
            stage: 0,
            grids,
            members: Vec::new(),
            coefficients: Vec::new(),
            columns: Vec::new(),
            x2: PointSet::new(dim, Vec::new()),
            x2_columns: Vec::new(),
            f_x2: Vec::new(),
            knowledge: knowledge.clone(),
            reference: None,
            reference_coefficients: HashMap::new(),
            fields: Vec::new(),
            last_lsq: None,
            initial: ((0.0, 0.0), None),
        };
        if let Some(u0) = &problem.initial_guess {
            state.push_member(u0.clone(), 1.0)?;
        }
        for k in knowledge {
            state.push_member(k, 0.0)?;
        }
        let field = state.field_on_eval();
        state.initial = (
            state.residuals(&state.coefficients),
            state.errors_of(&field)?,
        );
        state.fields.push(field);
        Ok(state)
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn problem(&self) -> &ProblemSpec {
        self.problem
    }

    /// The current approximation `u_s` as basis members with coefficients.
    pub fn basis_set(&self) -> BasisSet {
        BasisSet {
            members: self.members.clone(),
            coefficients: self.coefficients.clone(),
        }
    }

    pub fn evaluation_grid(&self) -> &EvaluationGrid {
        &self.grids.eval
    }

    pub fn exact_on_grid(&self) -> Option<&[f64]> {
        self.grids.exact_eval.as_deref()
    }

    /// `u_s` on the evaluation grid for every completed stage.
    pub fn fields(&self) -> &[Vec<f64>] {
        &self.fields
    }

    /// Diagnostics of the most recent outer least-squares solve.
    pub fn last_lsq(&self) -> Option<&LsqResult> {
        self.last_lsq.as_ref()
    }

    fn nonlinear(&self) -> Option<AllenCahn> {
        self.problem.nonlinearity
    }

    fn op(&self) -> OperatorSpec {
        self.problem.operator
    }

    /// Whether all rows follow from value, gradient and Hessian.
    fn second_order_suffices(&self) -> bool {
        self.op().required_order() <= 2
            && self
                .problem
                .boundary
                .is_none_or(|b| b.required_order() <= 2)
    }

    /// Whether member partials are stored (localized phase).
    fn tracks_partials(&self) -> bool {
        self.config.localized.is_some()
            && self.nonlinear().is_none()
            && self.second_order_suffices()
    }

    /// One pass per point set yields both operator rows and point values.
    fn fuses_values(&self) -> bool {
        self.nonlinear().is_some() && self.second_order_suffices()
    }

    fn evaluate_from_partials(&self, f: &BasisFunction) -> Result<Columns> {
        let g = &self.grids;
        let op = self.op();
        let s = SecondColumns {
            x1: f.second_order_on(&g.x1)?,
            cand: f.second_order_on(&g.candidates)?,
            val: f.second_order_on(&g.val)?,
            eval: f.second_order_on(&g.eval.points)?,
            xb: f.second_order_on(&g.xb.points)?,
            val_b: f.second_order_on(&g.val_b.points)?,
        };
        let nonlinear = self.nonlinear().is_some();
        let values = |p: &[SecondOrder]| -> Vec<f64> {
            if nonlinear {
                p.iter().map(|d| d[0]).collect()
            } else {
                Vec::new()
            }
        };
        let interior = |pts: &PointSet, p: &[SecondOrder]| {
            rows_from_second_order(&RowBlock::interior(op, pts), p)
        };
        let boundary = |b: &BoundarySet, p: &[SecondOrder]| match self.problem.boundary {
            Some(spec) if !b.is_empty() => {
                rows_from_second_order(&RowBlock::boundary(spec, b, 1.0), p)
            }
            _ => Ok(Vec::new()),
        };
        Ok(Columns {
            op_x1: interior(&g.x1, &s.x1)?,
            op_cand: interior(&g.candidates, &s.cand)?,
            op_val: interior(&g.val, &s.val)?,
            bd_xb: boundary(&g.xb, &s.xb)?,
            bd_val: boundary(&g.val_b, &s.val_b)?,
            eval: s.eval.iter().map(|p| p[0]).collect(),
            val_x1: values(&s.x1),
            val_cand: values(&s.cand),
            val_val: values(&s.val),
            second: self.tracks_partials().then_some(s),
        })
    }

    /// Stores the partials of `sum_j coefficients[j] * member_j` on every
    /// fixed set and on the current adaptive points in `reference`.
    fn prefill_reference(&self, reference: &ReferenceField, coefficients: &[f64]) -> Result<()> {
        let g = &self.grids;
        let n = coefficients.len();
        let sets: [(&PointSet, PickSecond); 6] = [
            (&g.x1, |s| &s.x1),
            (&g.candidates, |s| &s.cand),
            (&g.val, |s| &s.val),
            (&g.eval.points, |s| &s.eval),
            (&g.xb.points, |s| &s.xb),
            (&g.val_b.points, |s| &s.val_b),
        ];
        for (pts, pick) in sets {
            let parts = self.columns[..n]
                .iter()
                .map(|c| {
                    c.second
                        .as_ref()
                        .map(pick)
                        .ok_or(Error::Dimension("member partials missing".into()))
                })
                .collect::<Result<Vec<_>>>()?;
            reference.prefill(
                pts,
                combine_second(parts.into_iter(), coefficients, pts.len()),
            )?;
        }
        self.prefill_adaptive(reference, coefficients)
    }

    fn prefill_adaptive(&self, reference: &ReferenceField, coefficients: &[f64]) -> Result<()> {
        let n = coefficients.len();
        let parts = self.x2_columns[..n].iter().map(|c| &c.second);
        reference.prefill(&self.x2, combine_second(parts, coefficients, self.x2.len()))
    }

    fn evaluate(&self, f: &BasisFunction) -> Result<Columns> {
        if self.tracks_partials() || self.fuses_values() {
            return self.evaluate_from_partials(f);
        }
        let g = &self.grids;
        let op = self.op();
        let interior = |pts: &PointSet| f.apply_block(&RowBlock::interior(op, pts));
        let values =
            |pts: &PointSet| f.apply_block(&RowBlock::interior(OperatorSpec::Identity, pts));
        let boundary = |b: &BoundarySet| match self.problem.boundary {
            Some(spec) if !b.is_empty() => f.apply_block(&RowBlock::boundary(spec, b, 1.0)),
            _ => Ok(Vec::new()),
        };
        let nonlinear = self.nonlinear().is_some();
        Ok(Columns {
            op_x1: interior(&g.x1)?,
            op_cand: interior(&g.candidates)?,
            op_val: interior(&g.val)?,
            bd_xb: boundary(&g.xb)?,
            bd_val: boundary(&g.val_b)?,
            eval: values(&g.eval.points)?,
            val_x1: if nonlinear {
                values(&g.x1)?
            } else {
                Vec::new()
            },
            val_cand: if nonlinear {
                values(&g.candidates)?
            } else {
                Vec::new()
            },
            val_val: if nonlinear {
                values(&g.val)?
            } else {
                Vec::new()
            },
            second: None,
        })
    }

    fn evaluate_adaptive(&self, f: &BasisFunction) -> Result<AdaptiveColumn> {
        if self.tracks_partials() || self.fuses_values() {
            let second = f.second_order_on(&self.x2)?;
            return Ok(AdaptiveColumn {
                op: rows_from_second_order(&RowBlock::interior(self.op(), &self.x2), &second)?,
                values: if self.fuses_values() {
                    second.iter().map(|d| d[0]).collect()
                } else {
                    Vec::new()
                },
                second: if self.tracks_partials() {
                    second
                } else {
                    Vec::new()
                },
            });
        }
        Ok(AdaptiveColumn {
            op: f.apply_block(&RowBlock::interior(self.op(), &self.x2))?,
            values: if self.nonlinear().is_some() {
                f.apply_block(&RowBlock::interior(OperatorSpec::Identity, &self.x2))?
            } else {
                Vec::new()
            },
            second: Vec::new(),
        })
    }

    fn push_member(&mut self, f: BasisFunction, coefficient: f64) -> Result<()> {
        let cols = self.evaluate(&f)?;
        let adaptive = self.evaluate_adaptive(&f)?;
        self.members.push(f);
        self.coefficients.push(coefficient);
        self.columns.push(cols);
        self.x2_columns.push(adaptive);
        Ok(())
    }

    fn field_on_eval(&self) -> Vec<f64> {
        combine(
            self.columns.iter().map(|c| &c.eval),
            &self.coefficients,
            self.grids.eval.points.len(),
        )
    }

    fn errors_of(&self, field: &[f64]) -> Result<Option<ErrorPair>> {
        match &self.grids.exact_eval {
            Some(u) => Ok(Some(error_from_values(
                u,
                field,
                &self.problem.domain,
                &self.grids.eval,
            )?)),
            None => Ok(None),
        }
    }

    fn lambda(&self) -> f64 {
        self.config.lambda
    }

    fn interior_norm(&self, v: &[f64]) -> f64 {
        triple_norm_from_values(v, self.problem.domain.measure(), &[], 0, 0.0, 0.0)
    }

    fn boundary_norm(&self, v: &[f64]) -> f64 {
        let n = self.grids.val_b.len();
        if n == 0 {
            return 0.0;
        }
        (self.problem.domain.boundary_measure() / n as f64 * sum_sq(v)).sqrt()
    }

    /// `|||.|||` of the combination with coefficients `coefs`.
    fn coefficient_norm(&self, coefs: &[f64]) -> f64 {
        let li = combine(
            self.columns.iter().map(|c| &c.op_val),
            coefs,
            self.grids.val.len(),
        );
        let bi = combine(
            self.columns.iter().map(|c| &c.bd_val),
            coefs,
            self.grids.g_val.len(),
        );
        let nb = if bi.is_empty() {
            0
        } else {
            self.grids.val_b.len()
        };
        triple_norm_from_values(
            &li,
            self.problem.domain.measure(),
            &bi,
            nb,
            self.problem.domain.boundary_measure(),
            self.lambda(),
        )
    }

    /// Interior and boundary residual norms of the linear problem.
    fn linear_residuals(&self, coefs: &[f64]) -> (f64, f64) {
        let g = &self.grids;
        let li = combine(self.columns.iter().map(|c| &c.op_val), coefs, g.val.len());
        let bi = combine(self.columns.iter().map(|c| &c.bd_val), coefs, g.g_val.len());
        (
            self.interior_norm(&diff(&g.f_val, &li)),
            self.boundary_norm(&diff(&g.g_val, &bi)),
        )
    }

    /// Interior residual of the nonlinear equation and the boundary residual.
    fn nonlinear_residuals(
        &self,
        ac: AllenCahn,
        coefs: &[f64],
        extra: Option<(&Columns, f64)>,
    ) -> (f64, f64) {
        let g = &self.grids;
        let n = g.val.len();
        let mut u = combine(self.columns.iter().map(|c| &c.val_val), coefs, n);
        let mut lu = combine(self.columns.iter().map(|c| &c.op_val), coefs, n);
        let mut bu = combine(self.columns.iter().map(|c| &c.bd_val), coefs, g.g_val.len());
        if let Some((cols, c)) = extra {
            axpy(&mut u, c, &cols.val_val);
            axpy(&mut lu, c, &cols.op_val);
            axpy(&mut bu, c, &cols.bd_val);
        }
        let r: Vec<f64> = u.iter().zip(&lu).map(|(v, l)| ac.source(*v) - l).collect();
        (
            self.interior_norm(&r),
            self.boundary_norm(&diff(&g.g_val, &bu)),
        )
    }

    fn residuals(&self, coefs: &[f64]) -> (f64, f64) {
        match self.nonlinear() {
            Some(ac) => self.nonlinear_residuals(ac, coefs, None),
            None => self.linear_residuals(coefs),
        }
    }

    /// Residual norms and errors of `u_0`.
    pub fn initial_summary(&self) -> ((f64, f64), Option<ErrorPair>) {
        self.initial
    }

    /// Draws the adaptive points of a stage and evaluates the members there.
    fn draw_adaptive(&mut self, density: &[f64], stage: usize, iteration: usize) -> Result<bool> {
        if self.config.interior_adaptive == 0 {
            self.x2 = PointSet::new(self.problem.domain.dim(), Vec::new());
            self.x2_columns = vec![AdaptiveColumn::default(); self.members.len()];
            self.f_x2.clear();
            return Ok(false);
        }
        let mut rng = stream(self.config.seed, stage, Purpose::Collocation, iteration);
        let sample = rejection_sample_tabulated(
            density,
            &self.problem.domain,
            self.config.interior_adaptive,
            &self.grids.candidates,
            &mut rng,
        )?;
        if let Some(r) = &self.reference {
            r.forget(&self.x2);
        }
        self.x2 = sample.points;
        self.f_x2 = self.problem.source_on(&self.x2);
        self.x2_columns.clear();
        for k in 0..self.members.len() {
            // localized members need their reference field on the new points,
            // assembled from the members before them
            let column = match (&self.members[k], self.reference_coefficients.get(&k)) {
                (BasisFunction::Localized(l), Some(c)) if self.tracks_partials() => {
                    self.prefill_adaptive(l.reference(), c)?;
                    let column = self.evaluate_adaptive(&self.members[k])?;
                    l.reference().forget(&self.x2);
                    column
                }
                (m, _) => self.evaluate_adaptive(m)?,
            };
            self.x2_columns.push(column);
        }
        Ok(sample.uniform_fallback)
    }

    /// Residual system of the current stage with the given targets.
    fn residual_system(&self, t_x1: Vec<f64>, t_x2: Vec<f64>, t_b: Vec<f64>) -> Result<System> {
        let mut sys = System::new();
        sys.push(RowBlock::interior(self.op(), &self.grids.x1), t_x1)?;
        if !self.x2.is_empty() {
            sys.push(RowBlock::interior(self.op(), &self.x2), t_x2)?;
        }
        if let Some(spec) = self.problem.boundary {
            if !self.grids.xb.is_empty() {
                sys.push(RowBlock::boundary(spec, &self.grids.xb, self.lambda()), t_b)?;
            }
        }
        Ok(sys)
    }

    /// Least squares over the first `count` members, plus an optional extra
    /// member, on `X1 u X2 u Xb` against the given interior and boundary
    /// targets.
    fn outer_lsq(
        &self,
        count: usize,
        extra: Option<(&Columns, &AdaptiveColumn)>,
        t_x1: &[f64],
        t_x2: &[f64],
        t_b: &[f64],
    ) -> Result<LsqResult> {
        let lambda = self.lambda();
        let stacked = |c: &Columns, a: &AdaptiveColumn| -> Vec<f64> {
            let mut v = Vec::with_capacity(t_x1.len() + t_x2.len() + t_b.len());
            v.extend_from_slice(&c.op_x1);
            v.extend_from_slice(&a.op);
            v.extend(c.bd_xb.iter().map(|x| lambda * x));
            v
        };
        // for semilinear problems the initial guess only starts the fixed-point
        // iteration and is not a member of the spans
        let start = usize::from(self.problem.initial_guess.is_some() && self.nonlinear().is_some())
            .min(count);
        let mut cols: Vec<Vec<f64>> = self.columns[start..count]
            .iter()
            .zip(&self.x2_columns[start..count])
            .map(|(c, a)| stacked(c, a))
            .collect();
        if let Some((c, a)) = extra {
            cols.push(stacked(c, a));
        }
        let mut rhs = Vec::with_capacity(t_x1.len() + t_x2.len() + t_b.len());
        rhs.extend_from_slice(t_x1);
        rhs.extend_from_slice(t_x2);
        rhs.extend(t_b.iter().map(|x| lambda * x));
        let mut lsq = if cols.is_empty() {
            LsqResult {
                solution: Vec::new(),
                residual_norm: sum_sq(&rhs).sqrt(),
                effective_rank: 0,
                max_singular_value: 0.0,
                min_kept_singular_value: 0.0,
            }
        } else {
            let a = DenseMatrix::from_columns(rhs.len(), &cols)?;
            lstsq(&a, &rhs, self.config.rcond)?
        };
        lsq.solution.splice(0..0, std::iter::repeat_n(0.0, start));
        Ok(lsq)
    }

    /// Re-solves the coefficients of all members, appended `extra` members
    /// included, against the original data on the current stage's points.
    pub fn extend_and_resolve(&mut self, extra: Vec<BasisFunction>) -> Result<LsqResult> {
        for f in extra {
            self.push_member(f, 0.0)?;
        }
        let lsq = self.outer_lsq(
            self.members.len(),
            None,
            &self.grids.f_x1,
            &self.f_x2,
            &self.grids.g_xb,
        )?;
        self.coefficients.clone_from(&lsq.solution);
        self.last_lsq = Some(lsq.clone());
        Ok(lsq)
    }

    /// Residual of the current approximation on the candidate grid.
    fn candidate_residual(&self) -> Vec<f64> {
        let g = &self.grids;
        let n = g.candidates.len();
        let lu = combine(
            self.columns.iter().map(|c| &c.op_cand),
            &self.coefficients,
            n,
        );
        match self.nonlinear() {
            Some(ac) => {
                let u = combine(
                    self.columns.iter().map(|c| &c.val_cand),
                    &self.coefficients,
                    n,
                );
                u.iter().zip(&lu).map(|(v, l)| ac.source(*v) - l).collect()
            }
            None => diff(&g.f_cand, &lu),
        }
    }

    /// Targets `f - L u_s` on X1 and X2 and `g - B u_s` on Xb.
    fn residual_targets(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let g = &self.grids;
        let c = &self.coefficients;
        let lu1 = combine(self.columns.iter().map(|m| &m.op_x1), c, g.x1.len());
        let lu2 = combine(self.x2_columns.iter().map(|m| &m.op), c, self.x2.len());
        let bu = combine(self.columns.iter().map(|m| &m.bd_xb), c, g.g_xb.len());
        (
            diff(&g.f_x1, &lu1),
            diff(&self.f_x2, &lu2),
            diff(&g.g_xb, &bu),
        )
    }

    /// Runs one stage (a nonlinear stage for semilinear problems).
    pub fn run_stage(&mut self) -> Result<StageReport> {
        if let Some(ac) = self.nonlinear() {
            return self.run_nonlinear_stage(ac);
        }
        let start = Instant::now();
        let s = self.stage + 1;
        let previous = self.coefficients.clone();
        let (pi, pb) = self.linear_residuals(&previous);
        let previous_residual = (pi * pi + self.lambda().powi(2) * pb * pb).sqrt();

        // (a) residual-sampled points
        let density = self.candidate_residual();
        let fallback = self.draw_adaptive(&density, s, 0)?;
        let (t1, t2, tb) = self.residual_targets();
        let system = self.residual_system(t1, t2, tb)?;

        let (kind, width, new_member, training) = if self.config.is_localized_stage(s) {
            // localized neurons around residual-sampled centers, fitted by
            // least squares only
            let l = self
                .config
                .localized
                .expect("localized stage without a localized phase");
            // reference field u* = u_{s-1}
            let reference = ReferenceField::new(self.basis_set());
            let snapshot = self.coefficients.clone();
            if self.tracks_partials() {
                self.prefill_reference(&reference, &snapshot)?;
            }
            self.reference = Some(reference.clone());
            self.reference_coefficients
                .insert(self.members.len(), snapshot);
            let mut rng = stream(self.config.seed, s, Purpose::Centers, 0);
            let centers = rejection_sample_tabulated(
                &density,
                &self.problem.domain,
                l.neurons,
                &self.grids.candidates,
                &mut rng,
            )?;
            let mut rng = stream(self.config.seed, s, Purpose::Weights, 0);
            let mut loc = make_localized_basis(reference, &centers.points, l.radius, &mut rng)?;
            let lsq = collo_lsq(&system, &[Dictionary::Localized(&loc)], self.config.rcond)?;
            loc.set_coefficients(&lsq.solution)?;
            let loss = lsq.residual_norm * lsq.residual_norm;
            let losses = TrainingLosses {
                initial_fit: loss,
                after_adam: loss,
                final_fit: loss,
            };
            (
                StageKind::Localized,
                l.neurons,
                BasisFunction::Localized(loc),
                Some(losses),
            )
        } else {
            // (b) adaptive initialization, (c) training on the residual problem
            let width = self.config.width(s);
            let mut rng = stream(self.config.seed, s, Purpose::Weights, 0);
            let init = adaptive_init(
                &density,
                &self.problem.domain,
                &self.grids.candidates,
                width,
                self.config.radius(s),
                &mut rng,
            )?;
            let net = init.into_network(ActivationKind::Tanh)?;
            let out = adaptive_basis_training(
                &system,
                net,
                &self.knowledge,
                &self.config.train_config(),
            )?;
            let losses = TrainingLosses {
                initial_fit: out.loss_initial_fit,
                after_adam: out.loss_after_adam,
                final_fit: out.loss_final,
            };
            (StageKind::Network, width, out.function, Some(losses))
        };

        // (d) outer resolve against the original data
        let lsq = self.extend_and_resolve(vec![new_member])?;
        if let (StageKind::Localized, Some(r)) = (kind, &self.reference) {
            if self.tracks_partials() {
                r.clear();
            }
        }
        self.stage = s;
        let field = self.field_on_eval();
        let errors = self.errors_of(&field)?;
        self.fields.push(field);

        // (e) estimator
        let mut delta = self.coefficients.clone();
        for (d, p) in delta.iter_mut().zip(&previous) {
            *d -= p;
        }
        let (ri, rb) = self.linear_residuals(&self.coefficients);
        Ok(StageReport {
            stage: s,
            kind,
            width,
            estimator: self.coefficient_norm(&delta),
            previous_residual,
            residual_interior: ri,
            residual_boundary: rb,
            errors,
            lsq_residual: lsq.residual_norm,
            lsq_rank: lsq.effective_rank,
            columns: self.members.len(),
            training,
            uniform_fallback: fallback,
            iterations: Vec::new(),
            wall_ms: elapsed_ms(start),
        })
    }

    /// Fixed-point stage for the semilinear problem: the new network is
    /// retrained against the linearized residual at every iteration and
    /// the approximation is updated in the enlarged space.
    fn run_nonlinear_stage(&mut self, ac: AllenCahn) -> Result<StageReport> {
        let start = Instant::now();
        let s = self.stage + 1;
        let iterations = self.config.iterations(s);
        let count = self.members.len();
        let previous = self.coefficients.clone();
        let (pi, _) = self.nonlinear_residuals(ac, &previous, None);
        let g_len = self.grids.g_xb.len();

        // (1) initialize the candidate network from the current residual
        let width = self.config.width(s);
        let density = self.candidate_residual();
        let mut rng = stream(self.config.seed, s, Purpose::Weights, 0);
        let init = adaptive_init(
            &density,
            &self.problem.domain,
            &self.grids.candidates,
            width,
            self.config.radius(s),
            &mut rng,
        )?;
        let mut net: Slfn = init.into_network(ActivationKind::Tanh)?;

        let mut tilde = previous.clone();
        let mut candidate: Option<(BasisFunction, Columns)> = None;
        let mut tilde_extra = 0.0;
        let mut last_residual = pi;
        let mut reports = Vec::with_capacity(iterations);
        let mut fallback = false;
        let mut losses = None;
        let mut final_lsq = None;
        for i in 0..iterations {
            // values of the running iterate on the candidates
            let n = self.grids.candidates.len();
            let mut u_c = combine(self.columns.iter().map(|c| &c.val_cand), &tilde, n);
            let mut lu_c = combine(self.columns.iter().map(|c| &c.op_cand), &tilde, n);
            if let Some((_, cols)) = &candidate {
                axpy(&mut u_c, tilde_extra, &cols.val_cand);
                axpy(&mut lu_c, tilde_extra, &cols.op_cand);
            }
            let density: Vec<f64> = u_c
                .iter()
                .zip(&lu_c)
                .map(|(u, l)| ac.source(*u) - l)
                .collect();

            // (2) residual-sampled points
            fallback |= self.draw_adaptive(&density, s, i)?;
            let cand_x2 = match &candidate {
                Some((f, _)) => Some(self.evaluate_adaptive(f)?),
                None => None,
            };

            // source F(u~) on X1 and X2
            let mut u1 = combine(
                self.columns.iter().map(|c| &c.val_x1),
                &tilde,
                self.grids.x1.len(),
            );
            let mut u2 = combine(
                self.x2_columns.iter().map(|c| &c.values),
                &tilde,
                self.x2.len(),
            );
            if let (Some((_, cols)), Some(a)) = (&candidate, &cand_x2) {
                axpy(&mut u1, tilde_extra, &cols.val_x1);
                axpy(&mut u2, tilde_extra, &a.values);
            }
            let f1: Vec<f64> = u1.iter().map(|u| ac.source(*u)).collect();
            let f2: Vec<f64> = u2.iter().map(|u| ac.source(*u)).collect();
            let g = &self.grids.g_xb;

            // (3) solve in the previous space
            let inner = self.outer_lsq(count, None, &f1, &f2, g)?;
            let c = &inner.solution;
            let lu1 = combine(self.columns.iter().map(|m| &m.op_x1), c, f1.len());
            let lu2 = combine(self.x2_columns.iter().map(|m| &m.op), c, f2.len());
            let bu = combine(self.columns.iter().map(|m| &m.bd_xb), c, g_len);
            let system = self.residual_system(diff(&f1, &lu1), diff(&f2, &lu2), diff(g, &bu))?;

            // (4) retrain the candidate network, warm-started
            let out = adaptive_basis_training(&system, net, &[], &self.config.train_config())?;
            losses = Some(TrainingLosses {
                initial_fit: out.loss_initial_fit,
                after_adam: out.loss_after_adam,
                final_fit: out.loss_final,
            });
            net = out.network;
            let psi = out.function;
            let cols = self.evaluate(&psi)?;
            let adaptive = self.evaluate_adaptive(&psi)?;

            // (5) update in the enlarged space
            let lsq = self.outer_lsq(count, Some((&cols, &adaptive)), &f1, &f2, g)?;
            tilde = lsq.solution[..count].to_vec();
            tilde_extra = lsq.solution[count];
            final_lsq = Some(lsq);

            let (ri, _) = self.nonlinear_residuals(ac, &tilde, Some((&cols, tilde_extra)));
            if !(ri <= self.config.divergence_factor * last_residual) {
                return Err(Error::Diverged {
                    stage: s,
                    iteration: i + 1,
                    previous: last_residual,
                    current: ri,
                });
            }
            last_residual = ri;
            let mut field = combine(
                self.columns.iter().map(|c| &c.eval),
                &tilde,
                self.grids.eval.points.len(),
            );
            axpy(&mut field, tilde_extra, &cols.eval);
            reports.push(IterationReport {
                iteration: i + 1,
                residual_interior: ri,
                errors: self.errors_of(&field)?,
            });
            candidate = Some((psi, cols));
        }

        // (7) commit the last candidate
        let (psi, cols) = candidate.expect("at least one nonlinear iteration");
        let adaptive = self.evaluate_adaptive(&psi)?;
        self.members.push(psi);
        self.columns.push(cols);
        self.x2_columns.push(adaptive);
        tilde.push(tilde_extra);
        self.coefficients = tilde;
        self.last_lsq = final_lsq.clone();
        self.stage = s;
        let field = self.field_on_eval();
        let errors = self.errors_of(&field)?;
        self.fields.push(field);

        let mut delta = self.coefficients.clone();
        for (d, p) in delta.iter_mut().zip(&previous) {
            *d -= p;
        }
        let (ri, rb) = self.nonlinear_residuals(ac, &self.coefficients, None);
        let lsq = final_lsq.expect("at least one nonlinear iteration");
        Ok(StageReport {
            stage: s,
            kind: StageKind::Nonlinear,
            width,
            estimator: self.coefficient_norm(&delta),
            previous_residual: pi,
            residual_interior: ri,
            residual_boundary: rb,
            errors,
            lsq_residual: lsq.residual_norm,
            lsq_rank: lsq.effective_rank,
            columns: self.members.len(),
            training: losses,
            uniform_fallback: fallback,
            iterations: reports,
            wall_ms: elapsed_ms(start),
        })
    }

    /// Consumes the state into a [`SolveOutcome`].
    pub fn finish(self, reports: Vec<StageReport>) -> Result<SolveOutcome> {
        let (initial_residual, initial_errors) = self.initial;
        Ok(SolveOutcome {
            reports,
            basis: self.basis_set(),
            initial_residual,
            initial_errors,
            grid: self.grids.eval,
            exact_on_grid: self.grids.exact_eval,
            fields: self.fields,
        })
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (v, w) in y.iter_mut().zip(x) {
        *v += a * w;
    }
}

/// Runs up to `config.stages` stages, stopping early once the estimator
/// falls below `config.estimator_tolerance`.
pub fn solve(problem: &ProblemSpec, config: &SolverConfig) -> Result<SolveOutcome> {
    solve_with(problem, config, |_| {})
}

/// [`solve`] with a callback after every stage.
pub fn solve_with(
    problem: &ProblemSpec,
    config: &SolverConfig,
    mut on_stage: impl FnMut(&StageReport),
) -> Result<SolveOutcome> {
    let mut state = SolverState::new(problem, config)?;
    let mut reports = Vec::with_capacity(config.stages);
    for _ in 0..config.stages {
        let report = state.run_stage()?;
        on_stage(&report);
        let stop = config
            .estimator_tolerance
            .is_some_and(|t| report.estimator < t);
        reports.push(report);
        if stop {
            break;
        }
    }
    state.finish(reports)
}

/// Semilinear solve; fails when the problem has no nonlinearity.
pub fn solve_nonlinear_ac(problem: &ProblemSpec, config: &SolverConfig) -> Result<SolveOutcome> {
    if problem.nonlinearity.is_none() {
        return Err(Error::InvalidArgument(format!(
            "{} is not a semilinear problem",
            problem.name
        )));
    }
    solve(problem, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::ClosedForm;
    use crate::geometry::Point;
    use crate::jet::Jet;
    use crate::problems::builtin;

    fn closed(f: impl Fn(&Point, usize) -> Jet + Send + Sync + 'static) -> BasisFunction {
        BasisFunction::ClosedForm(ClosedForm::new("test", 4, f))
    }

    fn small(name: &str, pairs: &[(&str, &str)]) -> (ProblemSpec, SolverConfig) {
        let p = builtin(name).unwrap();
        let mut c = p.defaults.clone();
        for (k, v) in pairs {
            c.set(k, v).unwrap();
        }
        (p, c)
    }

    #[test]
    fn norm_of_zero_and_constants() {
        let p = builtin("function_fitting").unwrap();
        let val = validation_interior(&p.domain, 1000).unwrap();
        let none = BoundarySet::empty(1);
        let zero = closed(|_, o| Jet::zero(o));
        assert_eq!(triple_norm(&zero, &p, &val, &none, 1.0).unwrap(), 0.0);
        // identity operator on (-1, 1): |||c||| = |c| sqrt(2)
        let c = closed(|_, o| Jet::constant(o, -0.75));
        let n = triple_norm(&c, &p, &val, &none, 1.0).unwrap();
        assert!((n - 0.75 * 2f64.sqrt()).abs() < 1e-12, "{n}");
    }

    #[test]
    fn norm_of_a_quadratic_matches_the_integral() {
        // -Laplacian(x^2 + y^2) = -4 on the unit square; boundary integral
        // of (x^2 + y^2)^2 is 62/15
        let p = builtin("poisson_rapid_120").unwrap();
        let val = validation_interior(&p.domain, 10_000).unwrap();
        let bd = boundary_points(&p.domain, 4000).unwrap();
        let v = closed(|x, o| {
            let (a, b) = (Jet::variable(o, x[0], 0), Jet::variable(o, x[1], 1));
            a * a + b * b
        });
        let lambda: f64 = 2.0;
        let exact = (16.0 + lambda * lambda * 62.0 / 15.0).sqrt();
        let n = triple_norm(&v, &p, &val, &bd, lambda).unwrap();
        assert!(((n - exact) / exact).abs() < 1e-3, "{n} vs {exact}");
    }

    #[test]
    fn zero_stages_return_the_initial_guess() {
        let (p, c) = small("function_fitting", &[("S", "0")]);
        let out = solve(&p, &c).unwrap();
        assert!(out.reports.is_empty());
        assert_eq!(out.fields.len(), 1);
        assert!(out.fields[0].iter().all(|v| *v == 0.0));
        let e = out.initial_errors.unwrap();
        assert!(e.linf > 0.5);
    }

    #[test]
    fn estimator_tolerance_stops_early() {
        let (p, c) = small("function_fitting", &[("estimator_tolerance", "1e300")]);
        let out = solve(&p, &c).unwrap();
        assert_eq!(out.reports.len(), 1);
    }

    #[test]
    fn runs_are_deterministic() {
        let (p, c) = small("function_fitting", &[("S", "3"), ("seed", "7")]);
        let strip = |o: SolveOutcome| {
            o.reports
                .into_iter()
                .map(|mut r| {
                    r.wall_ms = 0.0;
                    r
                })
                .collect::<Vec<_>>()
        };
        let a = strip(solve(&p, &c).unwrap());
        let b = strip(solve(&p, &c).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn zero_member_leaves_the_residual_unchanged() {
        let (p, c) = small("boundary_layer", &[("S", "2")]);
        let mut state = SolverState::new(&p, &c).unwrap();
        state.run_stage().unwrap();
        state.run_stage().unwrap();
        let before = state.extend_and_resolve(Vec::new()).unwrap().residual_norm;
        let after = state
            .extend_and_resolve(vec![closed(|_, o| Jet::zero(o))])
            .unwrap()
            .residual_norm;
        assert!(
            (after - before).abs() <= 1e-12 * before.max(1.0),
            "{before} -> {after}"
        );
    }

    #[test]
    fn adding_members_never_increases_the_outer_residual() {
        let (p, c) = small("boundary_layer", &[("S", "1")]);
        let mut state = SolverState::new(&p, &c).unwrap();
        state.run_stage().unwrap();
        let mut prev = state.extend_and_resolve(Vec::new()).unwrap().residual_norm;
        for k in 1..4 {
            let extra = closed(move |x, o| (Jet::variable(o, x[0], 0) * (k as f64)).sin());
            let r = state.extend_and_resolve(vec![extra]).unwrap().residual_norm;
            assert!(r <= prev * (1.0 + 1e-12), "{prev} -> {r}");
            prev = r;
        }
    }

    #[test]
    fn estimator_tracks_the_previous_residual_on_fitting() {
        let (p, c) = small("function_fitting", &[("S", "4")]);
        let out = solve(&p, &c).unwrap();
        for r in &out.reports {
            let ratio = r.estimator / r.previous_residual;
            assert!(
                (1.0 / 3.0..=3.0).contains(&ratio),
                "stage {}: {ratio}",
                r.stage
            );
        }
    }

    #[test]
    fn single_nonlinear_iteration_commits_one_network() {
        let (p, c) = small(
            "allen_cahn",
            &[
                ("S", "1"),
                ("I_offset", "0"),
                ("M1", "400"),
                ("M2", "100"),
                ("M_boundary", "200"),
                ("candidates_per_axis", "100"),
                ("validation_interior", "400"),
                ("error_grid_per_axis", "20"),
            ],
        );
        let out = solve_nonlinear_ac(&p, &c).unwrap();
        assert_eq!(out.reports.len(), 1);
        let r = &out.reports[0];
        assert_eq!(r.kind, StageKind::Nonlinear);
        assert_eq!(r.iterations.len(), 1);
        // initial guess plus the committed network
        assert_eq!(r.columns, 2);
    }

    #[test]
    fn linear_problems_are_rejected_by_the_nonlinear_entry() {
        let (p, c) = small("function_fitting", &[("S", "1")]);
        assert!(matches!(
            solve_nonlinear_ac(&p, &c),
            Err(Error::InvalidArgument(_))
        ));
    }
}
