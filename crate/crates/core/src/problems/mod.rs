//! Built-in benchmark problems, their exact solutions and the error metrics.

pub mod presets;
pub mod reference;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use rand::Rng;

use crate::basis::{BasisFunction, ClosedForm};
use crate::error::{Error, Result};
use crate::geometry::{boundary_points, Domain, EvaluationGrid, GridKind, Point, PointSet};
use crate::operators::{BoundarySpec, OperatorSpec};
use crate::rng::{stream, Purpose};
use crate::solver::config::{LocalizedConfig, SolverConfig};

use reference::SpectralSolution;

pub type ScalarField = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
/// Boundary data `g(x, n, row)` for boundary conditions with several rows.
pub type BoundaryField = Arc<dyn Fn(&Point, &Point, usize) -> f64 + Send + Sync>;

/// Names accepted by [`builtin`].
pub const PRESET_NAMES: [&str; 8] = [
    "function_fitting",
    "boundary_layer",
    "poisson_lshape",
    "poisson_rapid_120",
    "poisson_rapid_500",
    "biharmonic_smooth",
    "biharmonic_point_load",
    "allen_cahn",
];

/// Semilinear term of `-eps^2 Lap u + u^3 - u = 0`, solved by the
/// linearization `(eps^2 Lap - alpha eps^2) u_k = u_{k-1}^3 - (1 + alpha eps^2) u_{k-1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllenCahn {
    pub eps: f64,
    pub alpha: f64,
}

impl AllenCahn {
    pub fn operator(&self) -> OperatorSpec {
        OperatorSpec::LinearizedAC {
            eps: self.eps,
            alpha: self.alpha,
        }
    }

    /// Right-hand side of the linearized equation at the previous iterate.
    pub fn source(&self, u: f64) -> f64 {
        u * u * u - (1.0 + self.alpha * self.eps * self.eps) * u
    }
}

/// Numerical reference for problems without a closed-form solution,
/// computed on first use.
pub struct SpectralReference {
    eps: f64,
    resolution: usize,
    guess: ScalarField,
    cell: OnceLock<std::result::Result<SpectralSolution, String>>,
}

impl SpectralReference {
    pub fn solution(&self) -> Result<&SpectralSolution> {
        self.cell
            .get_or_init(|| {
                SpectralSolution::allen_cahn(
                    self.eps,
                    self.resolution,
                    |p| (self.guess)(p),
                    1e-11,
                    50,
                )
                .map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|e| Error::InvalidArgument(format!("reference solution: {e}")))
    }
}

#[derive(Clone)]
pub enum ExactSolution {
    Closed(ClosedForm),
    /// High-resolution spectral solution used in place of an exact one.
    Spectral(Arc<SpectralReference>),
}

impl fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExactSolution::Closed(c) => write!(f, "Closed({})", c.label()),
            ExactSolution::Spectral(r) => write!(f, "Spectral(n = {})", r.resolution),
        }
    }
}

impl ExactSolution {
    pub fn values(&self, points: &PointSet) -> Result<Vec<f64>> {
        match self {
            ExactSolution::Closed(c) => points
                .points()
                .iter()
                .map(|p| Ok(c.jet(p, 0)?.value()))
                .collect(),
            ExactSolution::Spectral(r) => {
                let s = r.solution()?;
                Ok(points.points().iter().map(|p| s.value(p)).collect())
            }
        }
    }

    pub fn is_reference(&self) -> bool {
        matches!(self, ExactSolution::Spectral(_))
    }
}

/// A linear (or linearized) boundary value problem `L u = f` in the domain,
/// `B u = g` on its boundary.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub domain: Domain,
    pub operator: OperatorSpec,
    /// `None` for pure fitting problems.
    pub boundary: Option<BoundarySpec>,
    pub source: ScalarField,
    pub boundary_data: BoundaryField,
    pub exact: Option<ExactSolution>,
    /// Initial approximation `u_0`; zero when absent.
    pub initial_guess: Option<BasisFunction>,
    pub nonlinearity: Option<AllenCahn>,
    /// Reentrant corner `(center, start angle)` for singular terms.
    pub singular_corner: Option<(Point, f64)>,
    pub params: BTreeMap<String, f64>,
    /// The parameter row this problem runs with by default.
    pub defaults: SolverConfig,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("operator", &self.operator)
            .field("boundary", &self.boundary)
            .field("exact", &self.exact)
            .field("params", &self.params)
            .finish()
    }
}

fn zero_boundary() -> BoundaryField {
    Arc::new(|_, _, _| 0.0)
}

fn constant(c: f64) -> ScalarField {
    Arc::new(move |_| c)
}

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn square(lo: f64, hi: f64) -> Domain {
    Domain::Box2D {
        lo: [lo, lo],
        hi: [hi, hi],
    }
}

/// Shared parameter row; `N_s = width_base 2^s`, `R_s = slope s + offset`.
#[allow(clippy::too_many_arguments)]
fn row(
    m1: usize,
    m2: usize,
    mb: usize,
    lambda: f64,
    stages: usize,
    width_base: f64,
    radius: (f64, f64),
    n_opt: usize,
    lr: f64,
) -> SolverConfig {
    SolverConfig {
        stages,
        width_base,
        radius_slope: radius.0,
        radius_offset: radius.1,
        interior_uniform: m1,
        interior_adaptive: m2,
        boundary_points: mb,
        lambda,
        n_opt,
        learning_rate: lr,
        seed: 1,
        ..SolverConfig::default()
    }
}

fn one_dimensional(mut c: SolverConfig) -> SolverConfig {
    c.candidates_per_axis = 1000;
    c.validation_interior = 1000;
    c.validation_boundary = 2;
    c.error_grid_per_axis = 1000;
    c
}

fn rapid(name: &str, eps: f64, large: bool) -> ProblemSpec {
    let mut defaults = if large {
        row(90_000, 45_000, 16_000, 1e3, 13, 10.0, (3.0, -2.0), 10, 5e-2)
    } else {
        row(10_000, 5_000, 4_000, 1e3, 11, 10.0, (3.0, -2.0), 10, 5e-2)
    };
    defaults.localized = Some(LocalizedConfig {
        network_stages: 8,
        stages: if large { 5 } else { 3 },
        neurons: 1500,
        radius: 10.0,
    });
    ProblemSpec {
        name: name.into(),
        domain: square(0.0, 1.0),
        operator: OperatorSpec::NegLaplacian,
        boundary: Some(BoundarySpec::Dirichlet),
        source: Arc::new(presets::rapid_source(eps)),
        boundary_data: zero_boundary(),
        exact: Some(ExactSolution::Closed(ClosedForm::new(
            "arctan bump",
            4,
            presets::rapid_solution(eps),
        ))),
        initial_guess: None,
        nonlinearity: None,
        singular_corner: None,
        params: params(&[("eps", eps), ("r", 1.0 / 16.0), ("c_x", 0.5), ("c_y", 0.5)]),
        defaults,
    }
}

fn build(name: &str) -> Result<ProblemSpec> {
    let p = match name {
        "function_fitting" => ProblemSpec {
            name: name.into(),
            domain: Domain::Interval { a: -1.0, b: 1.0 },
            operator: OperatorSpec::Identity,
            // the target is also matched at the two end points
            boundary: Some(BoundarySpec::Dirichlet),
            source: Arc::new(|p| presets::square_wave_partial_sum(p, 0).value()),
            boundary_data: Arc::new(|p, _, _| presets::square_wave_partial_sum(p, 0).value()),
            exact: Some(ExactSolution::Closed(ClosedForm::new(
                "square-wave partial sum",
                4,
                presets::square_wave_partial_sum,
            ))),
            initial_guess: None,
            nonlinearity: None,
            singular_corner: None,
            params: BTreeMap::new(),
            defaults: one_dimensional(row(512, 256, 2, 1.0, 7, 2.5, (3.0, -2.0), 10, 5e-2)),
        },
        "boundary_layer" => {
            let (eps, b) = (1e-2, -1.0);
            ProblemSpec {
                name: name.into(),
                domain: Domain::Interval { a: -1.0, b: 1.0 },
                operator: OperatorSpec::AdvectionDiffusion { eps, b },
                boundary: Some(BoundarySpec::Dirichlet),
                source: constant(1.0),
                boundary_data: zero_boundary(),
                exact: Some(ExactSolution::Closed(ClosedForm::new(
                    "boundary layer",
                    4,
                    presets::boundary_layer_solution(eps, b),
                ))),
                initial_guess: None,
                nonlinearity: None,
                singular_corner: None,
                params: params(&[("eps", eps), ("b", b)]),
                defaults: one_dimensional(row(512, 256, 2, 10.0, 5, 20.0, (3.0, 7.0), 20, 5e-2)),
            }
        }
        "poisson_lshape" => ProblemSpec {
            name: name.into(),
            domain: Domain::standard_l_shape(),
            operator: OperatorSpec::NegLaplacian,
            boundary: Some(BoundarySpec::Dirichlet),
            source: constant(1.0),
            boundary_data: zero_boundary(),
            exact: None,
            initial_guess: None,
            nonlinearity: None,
            singular_corner: Some(([0.0, 0.0], -PI / 2.0)),
            params: BTreeMap::new(),
            defaults: SolverConfig {
                knowledge_neurons: true,
                ..row(10_000, 5_000, 4_000, 1e3, 9, 10.0, (2.0, -1.0), 10, 5e-3)
            },
        },
        "poisson_rapid_120" => rapid(name, 1.0 / 120.0, false),
        "poisson_rapid_500" => rapid(name, 1.0 / 500.0, true),
        "biharmonic_smooth" => ProblemSpec {
            name: name.into(),
            domain: square(-1.0, 1.0),
            operator: OperatorSpec::Biharmonic,
            boundary: Some(BoundarySpec::DirichletAndNormal),
            source: Arc::new(presets::biharmonic_source),
            boundary_data: zero_boundary(),
            exact: Some(ExactSolution::Closed(ClosedForm::new(
                "smooth biharmonic",
                4,
                presets::biharmonic_solution,
            ))),
            initial_guess: None,
            nonlinearity: None,
            singular_corner: None,
            params: BTreeMap::new(),
            defaults: row(10_000, 5_000, 4_000, 1e3, 7, 20.0, (1.0, 1.0), 10, 5e-3),
        },
        "biharmonic_point_load" => {
            let (eps1, eps2) = (1.0, 1.0);
            let (c1, c2) = presets::point_load_constants(eps1, eps2);
            ProblemSpec {
                name: name.into(),
                domain: Domain::Disk {
                    center: [0.0, 0.0],
                    radius: 1.0,
                },
                operator: OperatorSpec::RadialPointLoad,
                boundary: Some(BoundarySpec::RobinPair { eps1, eps2 }),
                source: constant(1.0),
                boundary_data: zero_boundary(),
                exact: Some(ExactSolution::Closed(ClosedForm::new(
                    "clamped point load",
                    4,
                    presets::point_load_solution(eps1, eps2),
                ))),
                initial_guess: None,
                nonlinearity: None,
                singular_corner: None,
                params: params(&[("eps1", eps1), ("eps2", eps2), ("c1", c1), ("c2", c2)]),
                defaults: row(10_000, 5_000, 4_000, 1e3, 8, 10.0, (1.0, 0.0), 10, 5e-3),
            }
        }
        "allen_cahn" => {
            let (eps, r0, r1) = (0.1, 0.7, 0.9);
            let ac = AllenCahn {
                eps,
                alpha: 2.0 / (eps * eps),
            };
            let guess = presets::plateau(r0, r1);
            let guess_value: ScalarField = Arc::new(move |p| guess(p, 0).value());
            ProblemSpec {
                name: name.into(),
                domain: square(-1.0, 1.0),
                operator: ac.operator(),
                boundary: Some(BoundarySpec::Dirichlet),
                source: constant(0.0),
                boundary_data: zero_boundary(),
                exact: Some(ExactSolution::Spectral(Arc::new(SpectralReference {
                    eps,
                    resolution: 40,
                    guess: guess_value,
                    cell: OnceLock::new(),
                }))),
                initial_guess: Some(BasisFunction::ClosedForm(ClosedForm::new(
                    "plateau",
                    2,
                    presets::plateau(r0, r1),
                ))),
                nonlinearity: Some(ac),
                singular_corner: None,
                params: params(&[("eps", eps), ("alpha", ac.alpha), ("R0", r0), ("R1", r1)]),
                defaults: row(10_000, 5_000, 400, 1e3, 6, 20.0, (1.0, 0.0), 10, 5e-3),
            }
        }
        other => return Err(Error::UnknownProblem(other.to_string())),
    };
    Ok(p)
}

/// The named preset, after checking its exact solution against the PDE.
pub fn builtin(name: &str) -> Result<ProblemSpec> {
    let p = build(name)?;
    p.self_check()?;
    Ok(p)
}

impl ProblemSpec {
    /// Relative tolerance of the exact-solution self-check.
    fn check_tolerance(&self) -> f64 {
        match self.operator {
            OperatorSpec::AdvectionDiffusion { .. } => 1e-4,
            _ => 1e-6,
        }
    }

    /// Verifies that a closed-form exact solution satisfies the PDE at 100
    /// seeded interior points and the boundary conditions on the boundary.
    pub fn self_check(&self) -> Result<()> {
        let Some(ExactSolution::Closed(exact)) = &self.exact else {
            return Ok(());
        };
        let tol = self.check_tolerance();
        let dim = self.domain.dim();
        let (lo, hi) = self.domain.bounding_box();
        let mut rng = stream(0, 0, Purpose::Auxiliary, 0);
        let mut checked = 0;
        while checked < 100 {
            let mut x = [0.0; 2];
            for k in 0..dim {
                x[k] = lo[k] + (hi[k] - lo[k]) * rng.random::<f64>();
            }
            if !self.domain.contains(&x) {
                continue;
            }
            let f = self.operator.functional(dim, &x);
            let lhs = f.apply(&exact.jet(&x, f.order())?);
            let rhs = (self.source)(&x);
            if (lhs - rhs).abs() > tol * rhs.abs().max(1.0) {
                return Err(Error::InvalidArgument(format!(
                    "{}: exact solution misses the PDE at {x:?} ({lhs} vs {rhs})",
                    self.name
                )));
            }
            checked += 1;
        }
        if let Some(spec) = self.boundary {
            let count = if dim == 1 { 2 } else { 100 };
            let bd = boundary_points(&self.domain, count)?;
            for (x, n) in bd.points.points().iter().zip(&bd.normals) {
                for row in 0..spec.rows_per_point() {
                    let f = spec.functional(dim, n, row);
                    let lhs = f.apply(&exact.jet(x, f.order())?);
                    let rhs = (self.boundary_data)(x, n, row);
                    if (lhs - rhs).abs() > tol * rhs.abs().max(1.0) {
                        return Err(Error::InvalidArgument(format!(
                            "{}: exact solution misses boundary row {row} at {x:?} ({lhs} vs {rhs})",
                            self.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn source_on(&self, points: &PointSet) -> Vec<f64> {
        points.points().iter().map(|p| (self.source)(p)).collect()
    }

    /// Boundary data row by row, matching a boundary row block.
    pub fn boundary_on(&self, points: &PointSet, normals: &[Point]) -> Vec<f64> {
        let rows = self.boundary.map_or(0, |b| b.rows_per_point());
        points
            .points()
            .iter()
            .zip(normals)
            .flat_map(|(x, n)| (0..rows).map(move |r| (self.boundary_data)(x, n, r)))
            .collect()
    }
}

/// Maximum and discrete L2 errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorPair {
    pub linf: f64,
    pub l2: f64,
}

/// Errors from pointwise values on an evaluation grid. Uniform grids use
/// `sqrt(|Omega| / |X| sum e^2)`; polar grids weight each point by its
/// distance to the disk center, `sqrt(P / |X| sum |x - c| e^2)` with `P`
/// the perimeter.
pub fn error_from_values(
    exact: &[f64],
    approx: &[f64],
    domain: &Domain,
    grid: &EvaluationGrid,
) -> Result<ErrorPair> {
    let n = grid.points.len();
    if exact.len() != n || approx.len() != n {
        return Err(Error::Dimension("error metrics: values vs grid".into()));
    }
    if n == 0 {
        return Err(Error::EmptyDomain);
    }
    let mut linf = 0.0f64;
    let mut sum = 0.0;
    for (i, (u, v)) in exact.iter().zip(approx).enumerate() {
        let e = u - v;
        linf = linf.max(e.abs());
        let w = match (grid.kind, domain) {
            (GridKind::Polar, Domain::Disk { center, .. }) => {
                let p = grid.points.points()[i];
                (p[0] - center[0]).hypot(p[1] - center[1])
            }
            _ => 1.0,
        };
        sum += w * e * e;
    }
    let factor = match grid.kind {
        GridKind::Polar => domain.boundary_measure(),
        GridKind::Uniform => domain.measure(),
    };
    Ok(ErrorPair {
        linf,
        l2: (factor / n as f64 * sum).sqrt(),
    })
}

/// [`error_from_values`] for an exact field and an approximation function.
pub fn error_metrics(
    exact: &ExactSolution,
    approx: &BasisFunction,
    domain: &Domain,
    grid: &EvaluationGrid,
) -> Result<ErrorPair> {
    let u = exact.values(&grid.points)?;
    let v: Vec<f64> = grid
        .points
        .points()
        .iter()
        .map(|p| approx.jet(p, 0).map(|j| j.value()))
        .collect::<Result<_>>()?;
    error_from_values(&u, &v, domain, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::evaluation_grid;

    #[test]
    fn every_preset_builds_and_passes_its_self_check() {
        for name in PRESET_NAMES {
            let p = builtin(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(p.name, name);
            p.defaults.validate().unwrap();
        }
        assert!(matches!(builtin("nope"), Err(Error::UnknownProblem(_))));
    }

    #[test]
    fn boundary_layer_vanishes_at_both_ends() {
        let p = builtin("boundary_layer").unwrap();
        let Some(ExactSolution::Closed(u)) = &p.exact else {
            panic!()
        };
        assert!(u.jet(&[1.0, 0.0], 0).unwrap().value().abs() < 1e-12);
        assert!(u.jet(&[-1.0, 0.0], 0).unwrap().value().abs() < 1e-12);
    }

    #[test]
    fn point_load_constant_matches_substitution() {
        let p = builtin("biharmonic_point_load").unwrap();
        assert!((p.params["c1"] + 5.0 / (48.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn self_check_catches_a_wrong_source() {
        let mut p = build("biharmonic_smooth").unwrap();
        p.source = constant(1.0);
        assert!(p.self_check().is_err());
    }

    #[test]
    fn error_of_exact_is_zero_and_constant_error_is_its_size() {
        let d = Domain::Interval { a: 0.0, b: 1.0 };
        let g = evaluation_grid(&d, 1000);
        let u: Vec<f64> = g.points.points().iter().map(|p| p[0].sin()).collect();
        let e = error_from_values(&u, &u, &d, &g).unwrap();
        assert_eq!((e.linf, e.l2), (0.0, 0.0));
        let v: Vec<f64> = u.iter().map(|x| x + 0.25).collect();
        let e = error_from_values(&u, &v, &d, &g).unwrap();
        assert!((e.linf - 0.25).abs() < 1e-15 && (e.l2 - 0.25).abs() < 1e-15);
    }

    #[test]
    fn error_matches_direct_summation() {
        let d = Domain::Box2D {
            lo: [-1.0, -1.0],
            hi: [1.0, 1.0],
        };
        let g = evaluation_grid(&d, 30);
        let mut rng = stream(3, 0, Purpose::Auxiliary, 0);
        let u: Vec<f64> = (0..g.points.len()).map(|_| rng.random::<f64>()).collect();
        let v: Vec<f64> = g
            .points
            .points()
            .iter()
            .map(|p| if p[0] < 0.1 { 0.3 } else { -0.2 })
            .collect();
        let e = error_from_values(&u, &v, &d, &g).unwrap();
        let mut s = 0.0;
        let mut m = 0.0f64;
        for k in 0..u.len() {
            s += (u[k] - v[k]).powi(2);
            m = m.max((u[k] - v[k]).abs());
        }
        let l2 = (4.0 * s / u.len() as f64).sqrt();
        assert!((e.l2 - l2).abs() < 1e-14 && e.linf == m);
        assert!(e.l2 <= e.linf * 2.0);
    }

    #[test]
    fn polar_l2_integrates_radial_functions_exactly() {
        // with weight r and factor 2 pi R the polar formula is the midpoint
        // rule in r, exact for e^2 = r^2 up to the O(h^2) midpoint term
        let d = Domain::Disk {
            center: [0.0, 0.0],
            radius: 1.0,
        };
        let g = evaluation_grid(&d, 300);
        let e: Vec<f64> = g.points.points().iter().map(|p| p[0].hypot(p[1])).collect();
        let pair = error_from_values(&e, &vec![0.0; e.len()], &d, &g).unwrap();
        // integral of r^2 over the disk is pi / 2
        assert!((pair.l2 - (PI / 2.0).sqrt()).abs() < 1e-4);
    }
}
