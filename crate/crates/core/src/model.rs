//! Conditional densities, the log-link recursion and the conditional
//! log-likelihood of a transformed GARMA model.

use rand::Rng;
use rand_distr::{Distribution, Gamma, InverseGaussian};
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};
use std::f64::consts::{PI, SQRT_2};

use crate::error::{Result, TgarmaError};
use crate::transform::TransformedSeries;

/// Conditional family of the transformed observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gamma,
    #[serde(rename = "invgauss")]
    InverseGaussian,
}

impl Family {
    /// Name of the dispersion parameter `u`.
    pub fn dispersion_name(self) -> &'static str {
        match self {
            Family::Gamma => "nu",
            Family::InverseGaussian => "sigma2",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Gamma => "gamma",
            Family::InverseGaussian => "invgauss",
        }
    }

    pub fn logpdf(self, y: f64, mu: f64, u: f64) -> Result<f64> {
        match self {
            Family::Gamma => gamma_logpdf(y, mu, u),
            Family::InverseGaussian => invgauss_logpdf(y, mu, u),
        }
    }

    /// `(F(y), 1 - F(y))`, each computed on its own tail where possible.
    pub fn cdf_sf(self, y: f64, mu: f64, u: f64) -> Result<(f64, f64)> {
        check_positive(&[("y", y), ("mu", mu), ("u", u)])?;
        Ok(match self {
            Family::Gamma => {
                let x = u * y / mu;
                (gamma_lr(u, x), gamma_ur(u, x))
            }
            Family::InverseGaussian => {
                let f = invgauss_cdf(y, mu, u);
                (f, 1.0 - f)
            }
        })
    }

    /// Draws one value with conditional mean `mu` and dispersion `u`.
    pub fn sample<R: Rng + ?Sized>(self, mu: f64, u: f64, rng: &mut R) -> Result<f64> {
        let draw = match self {
            Family::Gamma => Gamma::new(u, mu / u)
                .map_err(|e| TgarmaError::Domain(format!("gamma(mean {mu}, nu {u}): {e}")))?
                .sample(rng),
            Family::InverseGaussian => InverseGaussian::new(mu, 1.0 / u)
                .map_err(|e| TgarmaError::Domain(format!("inverse gaussian(mean {mu}, sigma2 {u}): {e}")))?
                .sample(rng),
        };
        Ok(draw.max(f64::MIN_POSITIVE))
    }

    /// Conditional variance at mean `mu`.
    pub fn variance(self, mu: f64, u: f64) -> f64 {
        match self {
            Family::Gamma => mu * mu / u,
            Family::InverseGaussian => u * mu * mu * mu,
        }
    }
}

impl std::str::FromStr for Family {
    type Err = TgarmaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gamma" => Ok(Family::Gamma),
            "invgauss" | "inverse-gaussian" | "inverse_gaussian" | "ig" => Ok(Family::InverseGaussian),
            other => Err(TgarmaError::Config(format!("unknown family '{other}' (expected gamma or invgauss)"))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// AR order `p` and MA order `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelOrder {
    pub p: usize,
    pub q: usize,
}

impl ModelOrder {
    pub fn new(p: usize, q: usize) -> Self {
        Self { p, q }
    }

    /// Number of conditioning observations, `max(p, q)`.
    pub fn r(&self) -> usize {
        self.p.max(self.q)
    }
}

impl std::fmt::Display for ModelOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "TGARMA({},{})", self.p, self.q)
    }
}

/// Model parameters. `u` is `nu` for the gamma family and `sigma2` for
/// the inverse Gaussian family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub beta0: f64,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub u: f64,
    pub lambda: f64,
}

impl ParamVector {
    pub fn validate(&self, order: ModelOrder) -> Result<()> {
        if self.phi.len() != order.p || self.theta.len() != order.q {
            return Err(TgarmaError::Dimension(format!(
                "parameter vector has {} AR and {} MA coefficients, order is ({}, {})",
                self.phi.len(),
                self.theta.len(),
                order.p,
                order.q
            )));
        }
        if !(self.u > 0.0) {
            return Err(TgarmaError::Domain(format!("dispersion u must be positive, got {}", self.u)));
        }
        if !(-1.0..=1.0).contains(&self.lambda) {
            return Err(TgarmaError::Domain(format!("lambda must lie in [-1, 1], got {}", self.lambda)));
        }
        Ok(())
    }

    /// Flattened as `(beta0, phi.., theta.., u, lambda)`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(3 + self.phi.len() + self.theta.len());
        v.push(self.beta0);
        v.extend_from_slice(&self.phi);
        v.extend_from_slice(&self.theta);
        v.push(self.u);
        v.push(self.lambda);
        v
    }

    pub fn from_slice(v: &[f64], order: ModelOrder) -> Result<Self> {
        let d = 3 + order.p + order.q;
        if v.len() != d {
            return Err(TgarmaError::Dimension(format!("expected {d} values, got {}", v.len())));
        }
        Ok(Self {
            beta0: v[0],
            phi: v[1..1 + order.p].to_vec(),
            theta: v[1 + order.p..1 + order.p + order.q].to_vec(),
            u: v[d - 2],
            lambda: v[d - 1],
        })
    }

    /// Column names matching [`ParamVector::to_vec`].
    pub fn names(order: ModelOrder, family: Family) -> Vec<String> {
        let mut names = vec!["beta0".to_string()];
        names.extend((1..=order.p).map(|j| format!("phi{j}")));
        names.extend((1..=order.q).map(|j| format!("theta{j}")));
        names.push(family.dispersion_name().to_string());
        names.push("lambda".to_string());
        names
    }
}

/// Linear predictors and conditional means of the link recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkState {
    pub eta: Vec<f64>,
    pub mu: Vec<f64>,
    /// First index (0-based) entering the likelihood, equal to `max(p, q)`.
    pub valid_from: usize,
}

fn check_positive(args: &[(&str, f64)]) -> Result<()> {
    for (name, v) in args {
        if !(*v > 0.0) || !v.is_finite() {
            return Err(TgarmaError::Domain(format!("{name} must be positive and finite, got {v}")));
        }
    }
    Ok(())
}

/// Gamma log-density with mean `mu` and shape `nu`.
pub fn gamma_logpdf(y: f64, mu: f64, nu: f64) -> Result<f64> {
    check_positive(&[("y", y), ("mu", mu), ("nu", nu)])?;
    Ok(nu * (nu / mu).ln() + (nu - 1.0) * y.ln() - y * nu / mu - ln_gamma(nu))
}

/// Inverse Gaussian log-density with mean `mu` and dispersion `sigma2`
/// (variance `sigma2 * mu^3`).
pub fn invgauss_logpdf(y: f64, mu: f64, sigma2: f64) -> Result<f64> {
    check_positive(&[("y", y), ("mu", mu), ("sigma2", sigma2)])?;
    let dev = y - mu;
    Ok(-dev * dev / (2.0 * sigma2 * mu * mu * y) - 0.5 * (2.0 * PI * sigma2 * y * y * y).ln())
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal quantile.
pub fn std_normal_quantile(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}

/// `log Phi(-a)` for `a >= 0`, continued asymptotically past erfc underflow.
fn ln_std_normal_sf(a: f64) -> f64 {
    if a < 30.0 {
        (0.5 * erfc(a / SQRT_2)).ln()
    } else {
        let a2 = a * a;
        -0.5 * a2 - a.ln() - 0.5 * (2.0 * PI).ln() + (1.0 - 1.0 / a2 + 3.0 / (a2 * a2)).ln()
    }
}

fn invgauss_cdf(y: f64, mu: f64, sigma2: f64) -> f64 {
    let shape = 1.0 / sigma2;
    let s = (shape / y).sqrt();
    let first = std_normal_cdf(s * (y / mu - 1.0));
    let second = (2.0 * shape / mu + ln_std_normal_sf(s * (y / mu + 1.0))).exp();
    (first + second).clamp(0.0, 1.0)
}

/// Runs the log-link recursion over a transformed series.
///
/// Positions `t < r` are seeded with `eta_t = log(values_t)`, so the MA
/// innovation is zero there.
pub fn compute_link(ts: &TransformedSeries, params: &ParamVector, order: ModelOrder) -> Result<LinkState> {
    let n = ts.len();
    let r = order.r();
    if params.phi.len() != order.p || params.theta.len() != order.q {
        return Err(TgarmaError::Dimension(format!(
            "parameters do not match order ({}, {})",
            order.p, order.q
        )));
    }
    if n <= r {
        return Err(TgarmaError::Dimension(format!(
            "series of length {n} is too short for max(p, q) = {r}"
        )));
    }
    let log_y: Vec<f64> = ts.values.iter().map(|v| v.ln()).collect();
    let mut eta = vec![0.0; n];
    eta[..r].copy_from_slice(&log_y[..r]);
    for t in r..n {
        let mut e = params.beta0;
        for (j, phi) in params.phi.iter().enumerate() {
            e += phi * log_y[t - j - 1];
        }
        for (j, theta) in params.theta.iter().enumerate() {
            e += theta * (log_y[t - j - 1] - eta[t - j - 1]);
        }
        eta[t] = e;
    }
    let mu: Vec<f64> = eta.iter().map(|e| e.exp()).collect();
    Ok(LinkState { eta, mu, valid_from: r })
}

/// Per-term conditional log-densities for `t = r..n` (0-based).
pub fn loglik_terms(
    ts: &TransformedSeries,
    params: &ParamVector,
    order: ModelOrder,
    family: Family,
) -> Result<Vec<f64>> {
    let link = compute_link(ts, params, order)?;
    (link.valid_from..ts.len())
        .map(|t| family.logpdf(ts.density_arg(t), link.mu[t], params.u))
        .collect()
}

/// Conditional log-likelihood given the first `max(p, q)` observations.
pub fn loglik(ts: &TransformedSeries, params: &ParamVector, order: ModelOrder, family: Family) -> Result<f64> {
    let total: f64 = loglik_terms(ts, params, order, family)?.iter().sum();
    if total.is_finite() {
        Ok(total)
    } else {
        Err(TgarmaError::Numeric(format!("log-likelihood is not finite ({total})")))
    }
}
