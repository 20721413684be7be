use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Result, TgarmaError};
use crate::model::{ModelOrder, ParamVector};

/// Independent priors: normal on `beta0`, `phi` and `theta`, lognormal on
/// the dispersion `u` and uniform on `lambda` over `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub beta0_mean: f64,
    pub beta0_var: f64,
    pub phi_mean: Vec<f64>,
    pub phi_var: f64,
    pub theta_mean: Vec<f64>,
    pub theta_var: f64,
    pub u_logmean: f64,
    pub u_logvar: f64,
}

pub const DEFAULT_PRIOR_VARIANCE: f64 = 200.0;

impl PriorSpec {
    /// Mean zero, variance 200 everywhere.
    pub fn default_for(order: ModelOrder) -> Self {
        Self::flat(order, DEFAULT_PRIOR_VARIANCE)
    }

    pub fn flat(order: ModelOrder, variance: f64) -> Self {
        Self {
            beta0_mean: 0.0,
            beta0_var: variance,
            phi_mean: vec![0.0; order.p],
            phi_var: variance,
            theta_mean: vec![0.0; order.q],
            theta_var: variance,
            u_logmean: 0.0,
            u_logvar: variance,
        }
    }

    pub fn validate(&self, order: ModelOrder) -> Result<()> {
        if self.phi_mean.len() != order.p || self.theta_mean.len() != order.q {
            return Err(TgarmaError::Dimension(format!(
                "prior means have lengths ({}, {}), order is ({}, {})",
                self.phi_mean.len(),
                self.theta_mean.len(),
                order.p,
                order.q
            )));
        }
        for (name, v) in [
            ("beta0_var", self.beta0_var),
            ("phi_var", self.phi_var),
            ("theta_var", self.theta_var),
            ("u_logvar", self.u_logvar),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(TgarmaError::Config(format!("prior variance {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

fn normal_ln(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (2.0 * PI * var).ln() - d * d / (2.0 * var)
}

/// Joint log prior density; `-inf` outside the support.
pub fn log_prior(params: &ParamVector, priors: &PriorSpec, order: ModelOrder) -> f64 {
    debug_assert_eq!(params.phi.len(), order.p);
    debug_assert_eq!(params.theta.len(), order.q);
    if !(-1.0..=1.0).contains(&params.lambda) || !(params.u > 0.0) {
        return f64::NEG_INFINITY;
    }
    let mut lp = normal_ln(params.beta0, priors.beta0_mean, priors.beta0_var);
    lp += params
        .phi
        .iter()
        .zip(&priors.phi_mean)
        .map(|(x, m)| normal_ln(*x, *m, priors.phi_var))
        .sum::<f64>();
    lp += params
        .theta
        .iter()
        .zip(&priors.theta_mean)
        .map(|(x, m)| normal_ln(*x, *m, priors.theta_var))
        .sum::<f64>();
    let log_u = params.u.ln();
    lp += normal_ln(log_u, priors.u_logmean, priors.u_logvar) - log_u;
    lp - 2.0f64.ln()
}
