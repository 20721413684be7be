use nalgebra::DMatrix;

use crate::error::{Result, TgarmaError};
use crate::inference::chain::Chain;
use crate::inference::mh::{mh_sample, McmcConfig};
use crate::inference::optimize::{find_mode, ModeOptions};
use crate::inference::posterior::{LogTarget, ModelOptions, TgarmaPosterior};
use crate::inference::prior::PriorSpec;
use crate::model::{Family, ModelOrder, ParamVector};
use crate::transform::Series;

/// Posterior mode and the inverse negated Hessian in sampling coordinates.
#[derive(Debug, Clone)]
pub struct PosteriorMode {
    pub params: ParamVector,
    pub value: f64,
    pub neg_hessian_inv: DMatrix<f64>,
    pub regularized: bool,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub mode: PosteriorMode,
    pub chain: Chain,
}

/// Moment-based starting point at a given lambda, with zero ARMA terms.
pub fn moment_init(post: &TgarmaPosterior, lambda: f64) -> Result<ParamVector> {
    let ts = post.transform(lambda)?;
    let r = post.order.r();
    let vals: Vec<f64> = (r..ts.len()).map(|t| ts.density_arg(t)).collect();
    let n = vals.len() as f64;
    let m = vals.iter().sum::<f64>() / n;
    let var = if vals.len() > 1 {
        vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)
    } else {
        m * m
    }
    .max(1e-8 * m * m);
    let u = match post.family {
        Family::Gamma => m * m / var,
        Family::InverseGaussian => var / (m * m * m),
    };
    Ok(ParamVector {
        beta0: m.ln(),
        phi: vec![0.0; post.order.p],
        theta: vec![0.0; post.order.q],
        u: u.clamp(1e-6, 1e6),
        lambda,
    })
}

/// Posterior mode from one starting point.
pub fn find_posterior_mode(post: &TgarmaPosterior, init: &ParamVector) -> Result<PosteriorMode> {
    init.validate(post.order)?;
    let objective = post.mode_objective();
    let mode = find_mode(&objective, &post.to_unconstrained(init), &ModeOptions::default())?;
    Ok(PosteriorMode {
        params: post.from_unconstrained(&mode.x),
        value: mode.value,
        neg_hessian_inv: mode.neg_hessian_inv,
        regularized: mode.regularized,
    })
}

/// Runs the mode search from several lambda starts and keeps the best.
pub fn find_posterior_mode_multistart(post: &TgarmaPosterior, init: Option<&ParamVector>) -> Result<PosteriorMode> {
    let mut starts = Vec::new();
    if let Some(p) = init {
        starts.push(p.clone());
    }
    let lambdas: Vec<f64> = match post.options.lambda_fixed {
        Some(l) => vec![l],
        None => vec![-0.5, 0.0, 0.5, 0.9],
    };
    for l in lambdas {
        starts.push(moment_init(post, l)?);
    }
    let mut best: Option<PosteriorMode> = None;
    let mut last_err = None;
    for s in &starts {
        match find_posterior_mode(post, s) {
            Ok(m) => {
                if best.as_ref().is_none_or(|b| m.value > b.value) {
                    best = Some(m);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| TgarmaError::Numeric("no starting point available".into())))
}

/// Mode search followed by random-walk Metropolis started at the mode.
pub fn fit(post: &TgarmaPosterior, init: Option<&ParamVector>, mcmc: &McmcConfig) -> Result<FitResult> {
    mcmc.validate()?;
    let mode = find_posterior_mode_multistart(post, init)?;
    let start = post.to_unconstrained(&mode.params);
    let raw = mh_sample(post as &dyn LogTarget, &start, &mode.neg_hessian_inv, mcmc)?;
    let draws = raw.draws.iter().map(|x| post.from_unconstrained(x).to_vec()).collect();
    let chain = Chain {
        order: post.order,
        family: post.family,
        draws,
        acceptance_count: raw.accepted,
        proposals: raw.proposals,
        proposal_scale: raw.scale,
        burn_in: mcmc.burn_in,
        thin: mcmc.thin,
        seed: mcmc.seed,
        lambda_fixed: post.options.lambda_fixed,
    };
    Ok(FitResult { mode, chain })
}

/// Convenience wrapper building the posterior with default priors.
pub fn fit_series(
    raw: &Series,
    order: ModelOrder,
    family: Family,
    options: ModelOptions,
    mcmc: &McmcConfig,
) -> Result<(TgarmaPosterior, FitResult)> {
    let post = TgarmaPosterior::new(raw.clone(), order, family, PriorSpec::default_for(order), options)?;
    let fit = fit(&post, None, mcmc)?;
    Ok((post, fit))
}
