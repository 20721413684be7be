use serde::{Deserialize, Serialize};

use crate::error::{Result, TgarmaError};
use crate::inference::prior::{log_prior, PriorSpec};
use crate::model::{loglik_terms, Family, ModelOrder, ParamVector};
use crate::transform::{transform_logs, Series, TransformedSeries, DEFAULT_FLOOR_C};

/// A log-density on an unconstrained real vector space.
///
/// Implementations return `-inf` outside the support rather than failing.
pub trait LogTarget {
    fn dim(&self) -> usize;
    fn ln_density(&self, x: &[f64]) -> f64;
}

/// Adapts a closure into a [`LogTarget`].
pub struct FnTarget<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64> FnTarget<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64> LogTarget for FnTarget<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn ln_density(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// Model-level options that change the target density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelOptions {
    pub floor_c: f64,
    /// Adds `sum (lambda - 1) log y_t` so the density refers to the raw
    /// data. Without it the transformed-data likelihood rewards shrinking
    /// the data scale and lambda drifts to -1.
    pub include_jacobian: bool,
    /// Pins lambda instead of sampling it.
    pub lambda_fixed: Option<f64>,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self { floor_c: DEFAULT_FLOOR_C, include_jacobian: true, lambda_fixed: None }
    }
}

/// Posterior of a TGARMA(p, q) model for one observed series.
///
/// The sampling coordinates are `(beta0, phi.., theta.., log u, atanh lambda)`,
/// with the last one dropped when lambda is fixed.
#[derive(Debug, Clone)]
pub struct TgarmaPosterior {
    raw: Series,
    log_raw: Vec<f64>,
    pub order: ModelOrder,
    pub family: Family,
    pub priors: PriorSpec,
    pub options: ModelOptions,
}

impl TgarmaPosterior {
    pub fn new(raw: Series, order: ModelOrder, family: Family, priors: PriorSpec, options: ModelOptions) -> Result<Self> {
        priors.validate(order)?;
        if raw.len() <= order.r() {
            return Err(TgarmaError::Dimension(format!(
                "series of length {} is too short for max(p, q) = {}",
                raw.len(),
                order.r()
            )));
        }
        if !(options.floor_c > 0.0 && options.floor_c < 1.0) {
            return Err(TgarmaError::Config(format!("floor_c must lie in (0, 1), got {}", options.floor_c)));
        }
        if let Some(l) = options.lambda_fixed {
            if !(-1.0..=1.0).contains(&l) {
                return Err(TgarmaError::Config(format!("fixed lambda must lie in [-1, 1], got {l}")));
            }
        }
        let log_raw = raw.values().iter().map(|y| y.ln()).collect();
        Ok(Self { raw, log_raw, order, family, priors, options })
    }

    pub fn raw(&self) -> &Series {
        &self.raw
    }

    pub fn lambda_free(&self) -> bool {
        self.options.lambda_fixed.is_none()
    }

    /// Number of sampled parameters.
    pub fn dim(&self) -> usize {
        2 + self.order.p + self.order.q + usize::from(self.lambda_free())
    }

    /// Number of likelihood terms, `n - max(p, q)`.
    pub fn n_terms(&self) -> usize {
        self.raw.len() - self.order.r()
    }

    pub fn transform(&self, lambda: f64) -> Result<TransformedSeries> {
        transform_logs(&self.log_raw, lambda, self.options.floor_c)
    }

    /// Per-term log-likelihood contributions, with the Box-Cox Jacobian
    /// folded in when enabled.
    pub fn log_terms(&self, params: &ParamVector) -> Result<Vec<f64>> {
        let ts = self.transform(params.lambda)?;
        let mut terms = loglik_terms(&ts, params, self.order, self.family)?;
        if self.options.include_jacobian {
            let r = self.order.r();
            for (term, ly) in terms.iter_mut().zip(&self.log_raw[r..]) {
                *term += (params.lambda - 1.0) * ly;
            }
        }
        Ok(terms)
    }

    pub fn loglik(&self, params: &ParamVector) -> Result<f64> {
        let total: f64 = self.log_terms(params)?.iter().sum();
        if total.is_finite() {
            Ok(total)
        } else {
            Err(TgarmaError::Numeric(format!("log-likelihood is not finite ({total})")))
        }
    }

    pub fn log_prior(&self, params: &ParamVector) -> f64 {
        log_prior(params, &self.priors, self.order)
    }

    /// `loglik + log_prior`; `-inf` outside the prior support.
    pub fn log_posterior(&self, params: &ParamVector) -> Result<f64> {
        params.validate(self.order).or_else(|e| match e {
            TgarmaError::Domain(_) => Ok(()),
            other => Err(other),
        })?;
        let lp = self.log_prior(params);
        if lp == f64::NEG_INFINITY {
            return Ok(lp);
        }
        Ok(self.loglik(params)? + lp)
    }

    pub fn to_unconstrained(&self, params: &ParamVector) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dim());
        x.push(params.beta0);
        x.extend_from_slice(&params.phi);
        x.extend_from_slice(&params.theta);
        x.push(params.u.ln());
        if self.lambda_free() {
            x.push(params.lambda.clamp(-0.999_999, 0.999_999).atanh());
        }
        x
    }

    pub fn from_unconstrained(&self, x: &[f64]) -> ParamVector {
        let (p, q) = (self.order.p, self.order.q);
        ParamVector {
            beta0: x[0],
            phi: x[1..1 + p].to_vec(),
            theta: x[1 + p..1 + p + q].to_vec(),
            u: x[1 + p + q].exp(),
            lambda: match self.options.lambda_fixed {
                Some(l) => l,
                None => x[2 + p + q].tanh(),
            },
        }
    }

    /// Posterior log-density with respect to `(beta0, phi, theta, log u, lambda)`.
    ///
    /// This is the coordinate system in which all priors are flat in the
    /// large-variance limit; its maximizer is the reported posterior mode.
    pub fn mode_objective(&self) -> impl LogTarget + '_ {
        FnTarget::new(self.dim(), move |x: &[f64]| {
            let p = self.from_unconstrained(x);
            match self.log_posterior(&p) {
                Ok(v) if !v.is_nan() => v + x[1 + self.order.p + self.order.q],
                _ => f64::NEG_INFINITY,
            }
        })
    }
}

/// The sampling target: posterior density of the unconstrained coordinates.
impl LogTarget for TgarmaPosterior {
    fn dim(&self) -> usize {
        TgarmaPosterior::dim(self)
    }

    fn ln_density(&self, x: &[f64]) -> f64 {
        let p = self.from_unconstrained(x);
        let mut jac = x[1 + self.order.p + self.order.q];
        if self.lambda_free() {
            jac += (1.0 - p.lambda * p.lambda).ln();
        }
        match self.log_posterior(&p) {
            Ok(v) if !v.is_nan() => v + jac,
            _ => f64::NEG_INFINITY,
        }
    }
}
