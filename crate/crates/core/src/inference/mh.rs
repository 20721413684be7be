//! Block random-walk Metropolis with a Gaussian proposal whose scale is
//! adapted during burn-in and frozen afterwards.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TgarmaError};
use crate::inference::posterior::LogTarget;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    /// Number of stored draws after burn-in and thinning.
    pub draws: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub target_accept: (f64, f64),
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self { draws: 5000, burn_in: 1000, thin: 3, target_accept: (0.3, 0.6), seed: 1 }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.target_accept;
        if self.draws == 0 || self.thin == 0 {
            return Err(TgarmaError::Config("draws and thin must be positive".into()));
        }
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(TgarmaError::Config(format!("target acceptance band ({lo}, {hi}) must satisfy 0 < lo < hi < 1")));
        }
        Ok(())
    }

    pub fn total_iterations(&self) -> usize {
        self.burn_in + self.draws * self.thin
    }
}

/// Draws in the target's own coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct RawChain {
    pub draws: Vec<Vec<f64>>,
    /// Accepted proposals after burn-in.
    pub accepted: usize,
    /// Proposals after burn-in.
    pub proposals: usize,
    pub burn_in_accepted: usize,
    /// Frozen proposal scale `s` used after burn-in.
    pub scale: f64,
}

impl RawChain {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }
}

/// Samples `target` with proposals `x + s L z`, `L L' = cov`.
pub fn mh_sample(target: &dyn LogTarget, start: &[f64], cov: &DMatrix<f64>, config: &McmcConfig) -> Result<RawChain> {
    config.validate()?;
    let d = target.dim();
    if start.len() != d || cov.nrows() != d || cov.ncols() != d {
        return Err(TgarmaError::Dimension(format!(
            "start has {} coordinates and covariance is {}x{}, target has {d}",
            start.len(),
            cov.nrows(),
            cov.ncols()
        )));
    }
    let chol = cov
        .clone()
        .cholesky()
        .ok_or_else(|| TgarmaError::Sampler("proposal covariance is not positive-definite".into()))?;
    let l = chol.l();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut x = DVector::from_column_slice(start);
    let mut fx = target.ln_density(start);
    if !fx.is_finite() {
        return Err(TgarmaError::Sampler("starting point has zero target density".into()));
    }

    let (lo, hi) = config.target_accept;
    let goal = lo + 0.25 * (hi - lo);
    let mut log_scale = (2.38 / (d as f64).sqrt()).ln();
    let window = (config.burn_in / 10).max(50);
    let mut window_accepts = 0usize;
    let mut burn_in_accepted = 0usize;
    let mut accepted = 0usize;
    let mut draws = Vec::with_capacity(config.draws);

    for iter in 0..config.total_iterations() {
        let in_burn_in = iter < config.burn_in;
        let z = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let prop = &x + &l * z * log_scale.exp();
        let fp = target.ln_density(prop.as_slice());
        let log_alpha = if fp.is_nan() { f64::NEG_INFINITY } else { fp - fx };
        let u: f64 = rng.random();
        let accept = log_alpha >= 0.0 || u.ln() < log_alpha;
        if accept {
            x = prop;
            fx = fp;
        }
        if in_burn_in {
            burn_in_accepted += usize::from(accept);
            window_accepts += usize::from(accept);
            let alpha = log_alpha.min(0.0).exp();
            log_scale += ((iter + 1) as f64).powf(-0.6) * (alpha - goal);
            if (iter + 1) % window == 0 {
                if window_accepts == 0 {
                    return Err(TgarmaError::Sampler(format!(
                        "no proposals accepted in {window} burn-in iterations; try a smaller proposal scale"
                    )));
                }
                window_accepts = 0;
            }
        } else {
            accepted += usize::from(accept);
            if (iter - config.burn_in + 1) % config.thin == 0 {
                draws.push(x.as_slice().to_vec());
            }
        }
    }

    Ok(RawChain {
        draws,
        accepted,
        proposals: config.draws * config.thin,
        burn_in_accepted,
        scale: log_scale.exp(),
    })
}
