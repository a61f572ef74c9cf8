//! Collocation least squares, the Adam optimizer and adaptive basis training.
//!
//! Training a new basis function alternates linear and nonlinear work: the
//! output coefficients are first fitted by least squares with the hidden
//! parameters frozen, then all parameters take a few Adam steps on the
//! collocation loss, and finally the output coefficients are re-fitted.

use crate::basis::{BasisFunction, Slfn};
use crate::error::{Error, Result};
use crate::linalg::{lstsq, LsqResult, DEFAULT_RCOND};
use crate::operators::{loss_param_gradient, Dictionary, System};

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step_count: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One bias-corrected Adam update of `theta` in place.
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64], learning_rate: f64) -> Result<()> {
        if theta.len() != self.first_moment.len() || grad.len() != theta.len() {
            return Err(Error::Dimension(
                "Adam state, parameters and gradient".into(),
            ));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (((x, g), m), v) in theta
            .iter_mut()
            .zip(grad)
            .zip(self.first_moment.iter_mut())
            .zip(self.second_moment.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *x -= learning_rate * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Functional form of [`AdamState::step`].
pub fn adam_step(
    state: &AdamState,
    theta: &[f64],
    grad: &[f64],
    learning_rate: f64,
) -> Result<(AdamState, Vec<f64>)> {
    let mut s = state.clone();
    let mut t = theta.to_vec();
    s.step(&mut t, grad, learning_rate)?;
    Ok((s, t))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    /// Boundary penalty.
    pub lambda: f64,
    /// Adam steps between the two least-squares fits.
    pub n_opt: usize,
    pub learning_rate: f64,
    pub rcond: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            n_opt: 10,
            learning_rate: 5e-2,
            rcond: DEFAULT_RCOND,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(
                "lambda and learning rate must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Least-squares coefficients of `dictionary` for the collocation system.
pub fn collo_lsq(system: &System, dictionary: &[Dictionary], rcond: f64) -> Result<LsqResult> {
    if dictionary.is_empty() || dictionary.iter().all(|d| d.columns() == 0) {
        return Err(Error::InvalidArgument("empty dictionary".into()));
    }
    if system.rows() == 0 {
        return Err(Error::InvalidArgument(
            "collocation system without rows".into(),
        ));
    }
    let a = system.matrix(dictionary)?;
    lstsq(&a, &system.rhs(), rcond)
}

/// Collocation loss `sum (L f - f_res)^2 + lambda^2 sum (B f - g_res)^2`.
pub fn loss(system: &System, f: &BasisFunction) -> Result<f64> {
    system.loss(f)
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    /// The trained network plus any fixed extra members, as one function.
    pub function: BasisFunction,
    pub network: Slfn,
    /// Coefficients of the extra members from the final fit.
    pub extra_coefficients: Vec<f64>,
    pub loss_initial_fit: f64,
    pub loss_after_adam: f64,
    pub loss_final: f64,
    pub lsq: LsqResult,
}

fn with_extras(net: &Slfn, extras: &[BasisFunction], coefs: &[f64]) -> BasisFunction {
    if extras.is_empty() {
        return BasisFunction::Network(net.clone());
    }
    let mut parts = vec![(1.0, BasisFunction::Network(net.clone()))];
    parts.extend(coefs.iter().copied().zip(extras.iter().cloned()));
    BasisFunction::Sum(parts)
}

fn fit_output_layer(
    system: &System,
    net: &mut Slfn,
    extras: &[BasisFunction],
    rcond: f64,
) -> Result<(LsqResult, Vec<f64>)> {
    let mut dict = vec![Dictionary::Neurons(net)];
    dict.extend(extras.iter().map(Dictionary::Function));
    let lsq = collo_lsq(system, &dict, rcond)?;
    let n = net.width();
    net.set_coefficients(&lsq.solution[..n])?;
    let extra = lsq.solution[n..].to_vec();
    Ok((lsq, extra))
}

/// Trains a freshly initialized network on the (residual) collocation
/// system: least-squares output fit, `n_opt` Adam steps on all network
/// parameters, and a final least-squares output fit. `extras` are fixed
/// members (e.g. singular terms) whose coefficients are fitted alongside the
/// output layer but which Adam does not touch.
pub fn adaptive_basis_training(
    system: &System,
    mut net: Slfn,
    extras: &[BasisFunction],
    config: &TrainConfig,
) -> Result<TrainingOutcome> {
    config.validate()?;
    let (first, extra_coefs) = fit_output_layer(system, &mut net, extras, config.rcond)?;
    let loss_initial_fit = first.residual_norm * first.residual_norm;
    if config.n_opt == 0 {
        return Ok(TrainingOutcome {
            function: with_extras(&net, extras, &extra_coefs),
            network: net,
            extra_coefficients: extra_coefs,
            loss_initial_fit,
            loss_after_adam: loss_initial_fit,
            loss_final: loss_initial_fit,
            lsq: first,
        });
    }

    // Adam sees the extra members as a fixed shift of the targets.
    let shifted;
    let adam_system = if extras.is_empty() {
        system
    } else {
        let mut s = system.clone();
        for (block, targets) in s.blocks.iter().zip(s.targets.iter_mut()) {
            let unit = block.clone().with_scale(1.0);
            for (e, c) in extras.iter().zip(&extra_coefs) {
                for (t, v) in targets.iter_mut().zip(e.apply_block(&unit)?) {
                    *t -= c * v;
                }
            }
        }
        shifted = s;
        &shifted
    };

    let mut theta = net.params();
    let mut adam = AdamState::new(theta.len());
    for _ in 0..config.n_opt {
        let (_, grad) = loss_param_gradient(adam_system, &net)?;
        adam.step(&mut theta, &grad, config.learning_rate)?;
        net.set_params(&theta)?;
    }
    let loss_after_adam = loss_param_gradient(adam_system, &net)?.0;

    let (lsq, extra_coefs) = fit_output_layer(system, &mut net, extras, config.rcond)?;
    let loss_final = lsq.residual_norm * lsq.residual_norm;
    Ok(TrainingOutcome {
        function: with_extras(&net, extras, &extra_coefs),
        network: net,
        extra_coefficients: extra_coefs,
        loss_initial_fit,
        loss_after_adam,
        loss_final,
        lsq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::ActivationKind;
    use crate::basis::ClosedForm;
    use crate::geometry::{boundary_points, uniform_interior, Domain, PointSet};
    use crate::jet::Jet;
    use crate::operators::{BoundarySpec, OperatorSpec, RowBlock};
    use crate::rng::{stream, Purpose};
    use rand::Rng;

    #[test]
    fn adam_zero_gradient_is_identity() {
        let s = AdamState::new(3);
        let (_, t) = adam_step(&s, &[1.0, 2.0, 3.0], &[0.0; 3], 0.1).unwrap();
        assert_eq!(t, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let s = AdamState::new(1);
        let (_, t) = adam_step(&s, &[0.5], &[3.0], 0.01).unwrap();
        let step = 0.5 - t[0];
        assert!((step - 0.01).abs() <= 0.01 * 1e-6);
    }

    #[test]
    fn adam_two_steps_match_recurrence() {
        let (g, lr, b1, b2, eps) = (0.7f64, 0.05, 0.9f64, 0.999f64, 1e-8);
        let mut s = AdamState::new(1);
        let mut th = [1.0];
        s.step(&mut th, &[g], lr).unwrap();
        s.step(&mut th, &[g], lr).unwrap();
        let mut x = 1.0;
        let (mut m, mut v) = (0.0, 0.0);
        for t in 1..=2 {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            x -= lr * (m / (1.0 - b1.powi(t))) / ((v / (1.0 - b2.powi(t))).sqrt() + eps);
        }
        assert!((th[0] - x).abs() < 1e-12);
    }

    fn poisson_1d() -> (System, BasisFunction) {
        let d = Domain::Interval { a: 0.0, b: 1.0 };
        let xi = uniform_interior(&d, 20).unwrap();
        let xb = boundary_points(&d, 2).unwrap();
        let mut sys = System::new();
        sys.push(
            RowBlock::interior(OperatorSpec::NegLaplacian, &xi),
            vec![2.0; 20],
        )
        .unwrap();
        sys.push(
            RowBlock::boundary(BoundarySpec::Dirichlet, &xb, 10.0),
            vec![0.0; 2],
        )
        .unwrap();
        let exact = BasisFunction::ClosedForm(ClosedForm::new("x(1-x)", 4, |p, o| {
            let x = Jet::variable(o, p[0], 0);
            x * (-x + 1.0)
        }));
        (sys, exact)
    }

    #[test]
    fn exact_member_gets_unit_coefficient() {
        let (sys, exact) = poisson_1d();
        let r = collo_lsq(&sys, &[Dictionary::Function(&exact)], DEFAULT_RCOND).unwrap();
        assert!((r.solution[0] - 1.0).abs() < 1e-12);
        assert!(r.residual_norm < 1e-10);
        assert!(loss(&sys, &exact).unwrap() < 1e-20);
    }

    #[test]
    fn zero_function_loss_is_data_energy() {
        let (sys, _) = poisson_1d();
        let zero = BasisFunction::ClosedForm(ClosedForm::new("0", 4, |_, o| Jet::zero(o)));
        assert!((loss(&sys, &zero).unwrap() - 80.0).abs() < 1e-12);
    }

    fn random_net(width: usize, seed: u64) -> Slfn {
        let mut rng = stream(seed, 0, Purpose::Auxiliary, 0);
        Slfn::new(
            1,
            (0..width)
                .map(|_| [rng.random_range(-3.0..3.0), 0.0])
                .collect(),
            (0..width).map(|_| rng.random_range(-1.0..1.0)).collect(),
            vec![0.0; width],
            ActivationKind::Tanh,
        )
        .unwrap()
    }

    #[test]
    fn square_interpolation_matches_direct_solve() {
        let pts = PointSet::from_1d(&(0..10).map(|i| -0.9 + 0.2 * i as f64).collect::<Vec<_>>());
        let target: Vec<f64> = pts.points().iter().map(|p| (3.0 * p[0]).sin()).collect();
        let mut sys = System::new();
        sys.push(
            RowBlock::interior(OperatorSpec::Identity, &pts),
            target.clone(),
        )
        .unwrap();
        let net = random_net(10, 3);
        let r = collo_lsq(&sys, &[Dictionary::Neurons(&net)], 1e-15).unwrap();
        let a = sys.matrix(&[Dictionary::Neurons(&net)]).unwrap();
        let fitted = a.matvec(&r.solution);
        let direct: f64 = fitted
            .iter()
            .zip(&target)
            .map(|(f, t)| (f - t).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!((r.residual_norm - direct).abs() < 1e-8);
    }

    #[test]
    fn training_final_fit_is_optimal() {
        let (sys, _) = poisson_1d();
        let out =
            adaptive_basis_training(&sys, random_net(8, 5), &[], &TrainConfig::default()).unwrap();
        let base = loss(&sys, &out.function).unwrap();
        assert!((base - out.loss_final).abs() <= 1e-10 * base.max(1e-12));
        assert!(out.loss_final <= out.loss_after_adam + 1e-10);
        let mut rng = stream(6, 0, Purpose::Auxiliary, 0);
        for _ in 0..20 {
            let mut net = out.network.clone();
            let mut delta: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
            delta.iter_mut().for_each(|d| *d *= 1e-3 / norm);
            let c: Vec<f64> = net
                .coefficients()
                .iter()
                .zip(&delta)
                .map(|(c, d)| c + d)
                .collect();
            net.set_coefficients(&c).unwrap();
            let perturbed = loss(&sys, &BasisFunction::Network(net)).unwrap();
            assert!(perturbed >= base - 1e-12);
        }
    }

    #[test]
    fn no_adam_steps_is_a_single_fit() {
        let (sys, _) = poisson_1d();
        let cfg = TrainConfig {
            n_opt: 0,
            ..Default::default()
        };
        let net = random_net(6, 9);
        let out = adaptive_basis_training(&sys, net.clone(), &[], &cfg).unwrap();
        let r = collo_lsq(&sys, &[Dictionary::Neurons(&net)], cfg.rcond).unwrap();
        assert_eq!(out.network.coefficients(), &r.solution[..]);
        assert_eq!(out.network.weights(), net.weights());
    }

    #[test]
    fn doubling_lambda_doubles_boundary_rows() {
        let (sys, _) = poisson_1d();
        let mut sys2 = sys.clone();
        sys2.blocks[1] = sys2.blocks[1].clone().with_scale(20.0);
        let net = random_net(4, 1);
        let a = sys.matrix(&[Dictionary::Neurons(&net)]).unwrap();
        let b = sys2.matrix(&[Dictionary::Neurons(&net)]).unwrap();
        for r in 0..20 {
            assert_eq!(a.row(r), b.row(r));
        }
        for r in 20..22 {
            for (x, y) in a.row(r).iter().zip(b.row(r)) {
                assert_eq!(2.0 * x, *y);
            }
        }
        let (ra, rb) = (sys.rhs(), sys2.rhs());
        assert_eq!(ra[..20], rb[..20]);
        assert_eq!(
            rb[20..].iter().map(|v| v / 2.0).collect::<Vec<_>>(),
            ra[20..].to_vec()
        );
    }
}
