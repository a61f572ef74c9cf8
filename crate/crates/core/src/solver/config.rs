//! Solver parameters and their flat `key = value` text form.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::DEFAULT_RCOND;
use crate::training::TrainConfig;

/// Stages that build localized networks after the network stages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizedConfig {
    /// Number of network stages before the localized phase.
    pub network_stages: usize,
    /// Number of localized stages.
    pub stages: usize,
    /// Localized neurons per stage.
    pub neurons: usize,
    /// Shape parameters are uniform in `(-radius, radius)`.
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Total number of stages.
    pub stages: usize,
    /// Width rule `N_s = round(width_base * 2^s)`.
    pub width_base: f64,
    /// Explicit per-stage widths overriding the rule.
    pub widths: Option<Vec<usize>>,
    /// Weight radius rule `R_s = radius_slope * s + radius_offset`.
    pub radius_slope: f64,
    pub radius_offset: f64,
    /// Fixed uniform interior collocation points.
    pub interior_uniform: usize,
    /// Residual-sampled interior points drawn each stage.
    pub interior_adaptive: usize,
    pub boundary_points: usize,
    /// Boundary penalty.
    pub lambda: f64,
    pub n_opt: usize,
    pub learning_rate: f64,
    pub rcond: f64,
    pub seed: u64,
    /// Candidate grid resolution for rejection sampling.
    pub candidates_per_axis: usize,
    pub validation_interior: usize,
    pub validation_boundary: usize,
    /// Evaluation grid resolution for errors and field output.
    pub error_grid_per_axis: usize,
    /// Stop once the estimator drops below this value.
    pub estimator_tolerance: Option<f64>,
    /// Fit corner-singular terms alongside every network stage.
    pub knowledge_neurons: bool,
    pub knowledge_terms: usize,
    pub localized: Option<LocalizedConfig>,
    /// Nonlinear iterations per stage `I_s = s + iteration_offset`.
    pub iteration_offset: usize,
    /// Abort when the nonlinear residual grows by this factor in one iteration.
    pub divergence_factor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            stages: 5,
            width_base: 10.0,
            widths: None,
            radius_slope: 1.0,
            radius_offset: 0.0,
            interior_uniform: 1000,
            interior_adaptive: 500,
            boundary_points: 400,
            lambda: 1.0,
            n_opt: 10,
            learning_rate: 5e-3,
            rcond: DEFAULT_RCOND,
            seed: 0,
            candidates_per_axis: 400,
            validation_interior: 10_000,
            validation_boundary: 400,
            error_grid_per_axis: 300,
            estimator_tolerance: None,
            knowledge_neurons: false,
            knowledge_terms: 20,
            localized: None,
            iteration_offset: 1,
            divergence_factor: 10.0,
        }
    }
}

fn localized_mut(cfg: &mut SolverConfig) -> &mut LocalizedConfig {
    let stages = cfg.stages;
    cfg.localized.get_or_insert(LocalizedConfig {
        network_stages: stages,
        stages: 0,
        neurons: 1500,
        radius: 10.0,
    })
}

impl SolverConfig {
    /// Width of the network built at stage `s >= 1`.
    pub fn width(&self, s: usize) -> usize {
        if let Some(w) = &self.widths {
            if let Some(&n) = w.get(s - 1) {
                return n;
            }
        }
        (self.width_base * 2f64.powi(s as i32)).round().max(1.0) as usize
    }

    pub fn radius(&self, s: usize) -> f64 {
        self.radius_slope * s as f64 + self.radius_offset
    }

    /// Nonlinear iterations in stage `s >= 1`.
    pub fn iterations(&self, s: usize) -> usize {
        s + self.iteration_offset
    }

    /// Whether stage `s` builds a localized network.
    pub fn is_localized_stage(&self, s: usize) -> bool {
        self.localized.is_some_and(|l| s > l.network_stages)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lambda: self.lambda,
            n_opt: self.n_opt,
            learning_rate: self.learning_rate,
            rcond: self.rcond,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.lambda > 0.0) || !(self.learning_rate > 0.0) {
            return bad("lambda and learning rate must be positive");
        }
        if !(self.rcond > 0.0 && self.rcond < 1.0) {
            return bad("rcond must lie in (0, 1)");
        }
        if self.interior_uniform + self.interior_adaptive == 0 {
            return bad("at least one interior collocation point is required");
        }
        if self.candidates_per_axis < 2 || self.error_grid_per_axis < 2 {
            return bad("grids need at least 2 points per axis");
        }
        if self.validation_interior == 0 {
            return bad("validation grid must be nonempty");
        }
        if !(self.width_base > 0.0) && self.widths.is_none() {
            return bad("width_base must be positive");
        }
        for s in 1..=self.stages {
            if !self.is_localized_stage(s) && !(self.radius(s) > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "weight radius at stage {s} is {} (must be positive)",
                    self.radius(s)
                )));
            }
        }
        if let Some(l) = self.localized {
            if l.network_stages + l.stages != self.stages {
                return bad("S must equal S1 + S2 when a localized phase is configured");
            }
            if l.network_stages == 0 || l.neurons == 0 || !(l.radius > 0.0) {
                return bad("localized phase needs S1 >= 1, N_L >= 1 and R_L > 0");
            }
        }
        if !(self.divergence_factor > 1.0) {
            return bad("divergence factor must exceed 1");
        }
        Ok(())
    }

    /// Every parameter as `(key, value)` text pairs, in a stable order.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |x| format!("{x:e}"));
        let mut out = vec![
            ("S", self.stages.to_string()),
            ("N0", format!("{}", self.width_base)),
            (
                "widths",
                self.widths.as_ref().map_or_else(
                    || "rule".to_string(),
                    |w| {
                        w.iter()
                            .map(|n| n.to_string())
                            .collect::<Vec<_>>()
                            .join(",")
                    },
                ),
            ),
            ("R_slope", format!("{}", self.radius_slope)),
            ("R_offset", format!("{}", self.radius_offset)),
            ("M1", self.interior_uniform.to_string()),
            ("M2", self.interior_adaptive.to_string()),
            ("M_boundary", self.boundary_points.to_string()),
            ("lambda", format!("{:e}", self.lambda)),
            ("N_opt", self.n_opt.to_string()),
            ("lr", format!("{:e}", self.learning_rate)),
            ("rcond", format!("{:e}", self.rcond)),
            ("seed", self.seed.to_string()),
            ("candidates_per_axis", self.candidates_per_axis.to_string()),
            ("validation_interior", self.validation_interior.to_string()),
            ("validation_boundary", self.validation_boundary.to_string()),
            ("error_grid_per_axis", self.error_grid_per_axis.to_string()),
            ("estimator_tolerance", opt(self.estimator_tolerance)),
            ("knowledge_neurons", self.knowledge_neurons.to_string()),
            ("N_k", self.knowledge_terms.to_string()),
        ];
        match self.localized {
            Some(l) => out.extend([
                ("S1", l.network_stages.to_string()),
                ("S2", l.stages.to_string()),
                ("N_L", l.neurons.to_string()),
                ("R_L", format!("{}", l.radius)),
            ]),
            None => out.push(("S2", "0".to_string())),
        }
        out.push(("I_offset", self.iteration_offset.to_string()));
        out.push(("divergence_factor", format!("{}", self.divergence_factor)));
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.to_pairs() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// Sets one parameter from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let err = || Error::InvalidArgument(format!("invalid value `{value}` for `{key}`"));
        let uint = || value.parse::<usize>().map_err(|_| err());
        let real = || value.parse::<f64>().map_err(|_| err());
        match key.trim() {
            "S" => self.stages = uint()?,
            "N0" => self.width_base = real()?,
            "widths" => {
                self.widths = if value == "rule" {
                    None
                } else {
                    Some(
                        value
                            .split(',')
                            .map(|t| t.trim().parse::<usize>().map_err(|_| err()))
                            .collect::<Result<_>>()?,
                    )
                }
            }
            "R_slope" => self.radius_slope = real()?,
            "R_offset" => self.radius_offset = real()?,
            "M1" => self.interior_uniform = uint()?,
            "M2" => self.interior_adaptive = uint()?,
            "M_boundary" => self.boundary_points = uint()?,
            "lambda" => self.lambda = real()?,
            "N_opt" => self.n_opt = uint()?,
            "lr" => self.learning_rate = real()?,
            "rcond" => self.rcond = real()?,
            "seed" => self.seed = value.parse().map_err(|_| err())?,
            "candidates_per_axis" => self.candidates_per_axis = uint()?,
            "validation_interior" => self.validation_interior = uint()?,
            "validation_boundary" => self.validation_boundary = uint()?,
            "error_grid_per_axis" => self.error_grid_per_axis = uint()?,
            "estimator_tolerance" => {
                self.estimator_tolerance = if value == "none" { None } else { Some(real()?) }
            }
            "knowledge_neurons" => self.knowledge_neurons = value.parse().map_err(|_| err())?,
            "N_k" => self.knowledge_terms = uint()?,
            "S1" => localized_mut(self).network_stages = uint()?,
            "S2" => {
                let n = uint()?;
                if n == 0 {
                    self.localized = None;
                } else {
                    localized_mut(self).stages = n;
                }
            }
            "N_L" => localized_mut(self).neurons = uint()?,
            "R_L" => localized_mut(self).radius = real()?,
            "I_offset" => self.iteration_offset = uint()?,
            "divergence_factor" => self.divergence_factor = real()?,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown parameter `{other}`"
                )))
            }
        }
        Ok(())
    }

    /// Applies a `key = value` text (blank lines and `#` comments allowed).
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::InvalidArgument(format!("line {}: expected `key = value`", n + 1))
            })?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn width_rule_doubles() {
        let c = SolverConfig {
            width_base: 2.5,
            ..Default::default()
        };
        assert_eq!(
            (1..=4).map(|s| c.width(s)).collect::<Vec<_>>(),
            vec![5, 10, 20, 40]
        );
        let c = SolverConfig {
            widths: Some(vec![3, 7]),
            ..c
        };
        assert_eq!(c.width(2), 7);
        assert_eq!(c.width(3), 20);
    }

    #[test]
    fn text_round_trip() {
        let mut c = SolverConfig {
            stages: 11,
            localized: Some(LocalizedConfig {
                network_stages: 8,
                stages: 3,
                neurons: 1500,
                radius: 10.0,
            }),
            estimator_tolerance: Some(1e-7),
            seed: 42,
            learning_rate: 0.05,
            ..Default::default()
        };
        c.widths = Some(vec![1, 2, 3]);
        let mut d = SolverConfig::default();
        d.apply_text(&c.to_text()).unwrap();
        assert_eq!(c, d);
        assert!(d.validate().is_ok());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let mut c = SolverConfig::default();
        assert!(c.set("nonsense", "1").is_err());
        assert!(c.set("S", "-1").is_err());
        assert!(c.apply_text("S 3").is_err());
        c.set("S", "3").unwrap();
        c.set("S1", "2").unwrap();
        assert!(c.validate().is_err(), "S1 + S2 != S");
    }
}
