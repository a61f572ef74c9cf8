//! Small self-contained oracle checks: analytic loss gradients and
//! activation derivatives against finite differences, monotonicity of the
//! least-squares residual under column augmentation, and the distribution of
//! residual-driven sampling.
//!
//! Each check returns its worst observed statistic so callers can compare
//! against their own tolerance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::activation::{ActivationKind, MAX_DERIVATIVE_ORDER};
use crate::basis::{adaptive_init, Slfn};
use crate::error::Result;
use crate::geometry::{boundary_points, candidate_grid, rejection_sample, Domain, Point, PointSet};
use crate::linalg::{lstsq, DenseMatrix};
use crate::operators::{loss_param_gradient, BoundarySpec, OperatorSpec, RowBlock, System};

/// The six interior operators, each with the boundary rows it is used with.
pub fn operator_catalog() -> Vec<(OperatorSpec, Option<BoundarySpec>, Domain)> {
    let square = Domain::Box2D {
        lo: [-1.0, -1.0],
        hi: [1.0, 1.0],
    };
    vec![
        (
            OperatorSpec::Identity,
            None,
            Domain::Interval { a: -1.0, b: 1.0 },
        ),
        (
            OperatorSpec::AdvectionDiffusion { eps: 0.1, b: -1.0 },
            Some(BoundarySpec::Dirichlet),
            Domain::Interval { a: -1.0, b: 1.0 },
        ),
        (
            OperatorSpec::NegLaplacian,
            Some(BoundarySpec::Dirichlet),
            square,
        ),
        (
            OperatorSpec::Biharmonic,
            Some(BoundarySpec::DirichletAndNormal),
            square,
        ),
        (
            OperatorSpec::RadialPointLoad,
            Some(BoundarySpec::RobinPair {
                eps1: 1.0,
                eps2: 1.0,
            }),
            Domain::Disk {
                center: [0.0, 0.0],
                radius: 1.0,
            },
        ),
        (
            OperatorSpec::LinearizedAC {
                eps: 0.1,
                alpha: 200.0,
            },
            Some(BoundarySpec::Dirichlet),
            square,
        ),
    ]
}

fn random_points<R: Rng + ?Sized>(domain: &Domain, count: usize, rng: &mut R) -> PointSet {
    let (lo, hi) = domain.bounding_box();
    let dim = domain.dim();
    let mut pts = Vec::with_capacity(count);
    while pts.len() < count {
        let mut p = [0.0; 2];
        for k in 0..dim {
            p[k] = rng.random_range(lo[k]..hi[k]);
        }
        if domain.contains(&p) {
            pts.push(p);
        }
    }
    PointSet::new(dim, pts)
}

fn random_network<R: Rng + ?Sized>(dim: usize, width: usize, rng: &mut R) -> Result<Slfn> {
    let mut weights = Vec::with_capacity(width);
    for _ in 0..width {
        let mut w = [0.0; 2];
        for v in w.iter_mut().take(dim) {
            *v = rng.random_range(-2.0..2.0);
        }
        weights.push(w);
    }
    let biases = (0..width).map(|_| rng.random_range(-1.0..1.0)).collect();
    let coefs = (0..width).map(|_| rng.random_range(-1.0..1.0)).collect();
    Slfn::new(dim, weights, biases, coefs, ActivationKind::Tanh)
}

/// Relative deviation `max_i |g_i - fd_i| / max_i |g_i|` between the
/// analytic gradient and central differences.
pub fn gradient_deviation(system: &System, net: &Slfn) -> Result<f64> {
    let (_, grad) = loss_param_gradient(system, net)?;
    let theta = net.params();
    let mut probe = net.clone();
    let mut worst = 0.0f64;
    for i in 0..theta.len() {
        let h = 1e-5 * theta[i].abs().max(1.0);
        let mut at = |delta: f64| -> Result<f64> {
            let mut t = theta.clone();
            t[i] += delta;
            probe.set_params(&t)?;
            Ok(loss_param_gradient(system, &probe)?.0)
        };
        let fd = (at(h)? - at(-h)?) / (2.0 * h);
        worst = worst.max((grad[i] - fd).abs());
    }
    let scale = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

/// Worst [`gradient_deviation`] over `configs` random networks and point
/// sets for every operator of [`operator_catalog`], per operator name.
pub fn gradient_check(configs: usize, seed: u64) -> Result<Vec<(&'static str, f64)>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (op, bc, domain) in operator_catalog() {
        let mut worst = 0.0f64;
        for _ in 0..configs {
            let width = rng.random_range(2..6);
            let net = random_network(domain.dim(), width, &mut rng)?;
            let interior = random_points(&domain, 12, &mut rng);
            let mut system = System::new();
            let targets = (0..interior.len())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            system.push(RowBlock::interior(op, &interior), targets)?;
            if let Some(spec) = bc {
                let boundary = boundary_points(&domain, if domain.dim() == 1 { 2 } else { 6 })?;
                let block = RowBlock::boundary(spec, &boundary, 3.0);
                let targets = (0..block.len())
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect();
                system.push(block, targets)?;
            }
            worst = worst.max(gradient_deviation(&system, &net)?);
        }
        out.push((op.name(), worst));
    }
    Ok(out)
}

/// Worst relative deviation of derivative orders `1..=5` from central
/// differences of the next lower order, at `points` random arguments in
/// `[-4, 4]`. The relative error uses `max(|exact|, 1e-3)` as denominator so
/// arguments near a zero of the derivative do not dominate.
pub fn activation_check(points: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let kind = ActivationKind::Tanh;
    let h = 1e-5;
    let mut worst = 0.0f64;
    for order in 1..=MAX_DERIVATIVE_ORDER {
        for _ in 0..points {
            let z: f64 = rng.random_range(-4.0..4.0);
            let exact = kind.derivative(order, z)?;
            let fd = (kind.derivative(order - 1, z + h)? - kind.derivative(order - 1, z - h)?)
                / (2.0 * h);
            worst = worst.max((exact - fd).abs() / exact.abs().max(1e-3));
        }
    }
    Ok(worst)
}

/// Largest relative increase `(r_after - r_before) / max(r_before, |b|)` of
/// the least-squares residual when one column is appended, over `systems`
/// random systems. Some systems are rank deficient and some appended
/// columns repeat an existing one or vanish.
pub fn augmentation_check(systems: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for k in 0..systems {
        let rows = rng.random_range(8..60);
        let cols = rng.random_range(1..rows);
        let mut columns: Vec<Vec<f64>> = (0..cols)
            .map(|_| (0..rows).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        if k % 4 == 1 && cols > 1 {
            columns[cols - 1] = columns[0].iter().map(|v| 2.0 * v).collect();
        }
        let b: Vec<f64> = (0..rows).map(|_| rng.random_range(-1.0..1.0)).collect();
        let extra: Vec<f64> = match k % 5 {
            2 => vec![0.0; rows],
            3 => columns[rng.random_range(0..cols)].clone(),
            _ => (0..rows).map(|_| rng.random_range(-1.0..1.0)).collect(),
        };
        let a = DenseMatrix::from_columns(rows, &columns)?;
        let before = lstsq(&a, &b, 1e-12)?.residual_norm;
        let after = lstsq(&a.append_column(&extra)?, &b, 1e-12)?.residual_norm;
        let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst = worst.max((after - before) / before.max(bnorm));
    }
    Ok(worst)
}

/// Kolmogorov-Smirnov distance between `samples` residual-driven draws on
/// `(-1, 1)` with density `|x|^2` and its CDF `(x^3 + 1) / 2`.
pub fn sampling_ks_check(samples: usize, seed: u64) -> Result<f64> {
    let domain = Domain::Interval { a: -1.0, b: 1.0 };
    let candidates = candidate_grid(&domain, 1000)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let out = rejection_sample(
        |p: &Point| p[0] * p[0],
        &domain,
        samples,
        &candidates,
        &mut rng,
    )?;
    let mut xs: Vec<f64> = out.points.points().iter().map(|p| p[0]).collect();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let cdf = |x: f64| (x.powi(3) + 1.0) / 2.0;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d
            .max((f - i as f64 / n).abs())
            .max(((i + 1) as f64 / n - f).abs());
    }
    Ok(d)
}

/// Largest `|w . x + b|` over neurons initialized on a random residual in
/// 2D, with `x` the neuron's base point.
pub fn hyperplane_check(width: usize, seed: u64) -> Result<f64> {
    let domain = Domain::Box2D {
        lo: [-1.0, -1.0],
        hi: [1.0, 1.0],
    };
    let candidates = candidate_grid(&domain, 200)?;
    let residual: Vec<f64> = candidates
        .points()
        .iter()
        .map(|p| (3.0 * p[0]).sin() * p[1])
        .collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let init = adaptive_init(&residual, &domain, &candidates, width, 5.0, &mut rng)?;
    Ok(init
        .weights
        .iter()
        .zip(&init.biases)
        .zip(init.base_points.points())
        .map(|((w, b), x)| ((w[0] * x[0] + w[1] * x[1]) + b).abs())
        .fold(0.0, f64::max))
}

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckOutcome {
    fn new(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }
}

/// Runs every check at the sizes used by the acceptance suite.
pub fn run_all(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    for (name, dev) in gradient_check(10, seed)? {
        out.push(CheckOutcome::new(
            format!("loss gradient vs finite differences ({name})"),
            dev,
            1e-5,
        ));
    }
    out.push(CheckOutcome::new(
        "activation derivatives vs finite differences",
        activation_check(50, seed)?,
        1e-6,
    ));
    out.push(CheckOutcome::new(
        "column augmentation never increases the residual",
        augmentation_check(100, seed)?,
        1e-12,
    ));
    out.push(CheckOutcome::new(
        "rejection sampling KS distance",
        sampling_ks_check(10_000, seed)?,
        0.02,
    ));
    out.push(CheckOutcome::new(
        "hyperplanes pass through base points",
        hyperplane_check(1000, seed)?,
        0.0,
    ));
    Ok(out)
}
