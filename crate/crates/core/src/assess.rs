//! Model-selection criteria, quantile residuals, autocorrelations and MAPE.

use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::{Result, TgarmaError};
use crate::inference::chain::csv_err;
use crate::inference::{Chain, TgarmaPosterior};
use crate::model::{compute_link, std_normal_quantile, ParamVector};

/// Clamp applied to CDF values before the normal quantile.
pub const CDF_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriteriaReport {
    pub dic: f64,
    pub ebic: f64,
    /// Sum over likelihood terms of log CPO_t.
    pub cpo: f64,
    pub n_eff_terms: usize,
    pub p_d: f64,
    pub mean_deviance: f64,
    pub deviance_at_mean: f64,
    pub sampled_dim: usize,
}

fn check_chain(chain: &Chain, post: &TgarmaPosterior) -> Result<()> {
    if chain.is_empty() {
        return Err(TgarmaError::Dimension("criteria need a nonempty chain".into()));
    }
    if chain.order != post.order || chain.family != post.family {
        return Err(TgarmaError::Dimension(format!(
            "chain is {} {} but the model is {} {}",
            chain.family, chain.order, post.family, post.order
        )));
    }
    Ok(())
}

fn terms_for(post: &TgarmaPosterior, p: &ParamVector, draw: usize) -> Result<Vec<f64>> {
    let terms = post.log_terms(p)?;
    if let Some(t) = terms.iter().position(|v| !v.is_finite()) {
        return Err(TgarmaError::Numeric(format!(
            "log-density of term t = {} is not finite for draw {draw}",
            t + post.order.r() + 1
        )));
    }
    Ok(terms)
}

fn draw_terms(chain: &Chain, post: &TgarmaPosterior) -> Result<Vec<Vec<f64>>> {
    draw_terms_from(chain, post, post.order.r())
}

fn skip_for(post: &TgarmaPosterior, start: usize) -> Result<usize> {
    let r = post.order.r();
    if start < r || start >= post.raw().len() {
        return Err(TgarmaError::Dimension(format!(
            "criteria start index {start} must lie in {r}..{}",
            post.raw().len()
        )));
    }
    Ok(start - r)
}

fn draw_terms_from(chain: &Chain, post: &TgarmaPosterior, start: usize) -> Result<Vec<Vec<f64>>> {
    check_chain(chain, post)?;
    let skip = skip_for(post, start)?;
    chain
        .params()
        .enumerate()
        .map(|(l, p)| terms_for(post, &p, l).map(|v| v[skip..].to_vec()))
        .collect()
}

fn deviance_of(terms: &[f64]) -> f64 {
    -2.0 * terms.iter().sum::<f64>()
}

fn deviance_at_mean(chain: &Chain, post: &TgarmaPosterior, skip: usize) -> Result<f64> {
    let mean = chain.sampling_scale_mean();
    let d = post
        .log_terms(&mean)
        .map(|v| -2.0 * v[skip..].iter().sum::<f64>())
        .map_err(|e| TgarmaError::Numeric(format!("deviance at the posterior mean: {e}")))?;
    if d.is_finite() {
        Ok(d)
    } else {
        Err(TgarmaError::Numeric("deviance at the posterior mean is not finite".into()))
    }
}

fn log_cpo_sum(per_draw: &[Vec<f64>]) -> Result<f64> {
    let q = per_draw.len() as f64;
    let n_terms = per_draw[0].len();
    let mut total = 0.0;
    for t in 0..n_terms {
        // log CPO_t = log Q - logsumexp_l(-l_{t,l})
        let neg: Vec<f64> = per_draw.iter().map(|d| -d[t]).collect();
        let m = neg.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + neg.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        let v = q.ln() - lse;
        if !v.is_finite() {
            return Err(TgarmaError::Numeric(format!("log CPO of term {t} is not finite")));
        }
        total += v;
    }
    Ok(total)
}

/// `D(theta_bar) + 2 p_D` with `p_D = mean D - D(theta_bar)`.
pub fn dic(chain: &Chain, post: &TgarmaPosterior) -> Result<f64> {
    let per_draw = draw_terms(chain, post)?;
    let mean_dev = per_draw.iter().map(|t| deviance_of(t)).sum::<f64>() / per_draw.len() as f64;
    let d_bar = deviance_at_mean(chain, post, 0)?;
    Ok(d_bar + 2.0 * (mean_dev - d_bar))
}

/// Posterior mean deviance plus `d log(n_eff_terms)`.
pub fn ebic(chain: &Chain, post: &TgarmaPosterior) -> Result<f64> {
    let per_draw = draw_terms(chain, post)?;
    let mean_dev = per_draw.iter().map(|t| deviance_of(t)).sum::<f64>() / per_draw.len() as f64;
    Ok(mean_dev + chain.sampled_dim() as f64 * (post.n_terms() as f64).ln())
}

/// Harmonic-mean CPO estimate, returned as `sum_t log CPO_t`.
pub fn cpo(chain: &Chain, post: &TgarmaPosterior) -> Result<f64> {
    log_cpo_sum(&draw_terms(chain, post)?)
}

/// All three criteria from a single pass over the draws.
pub fn criteria(chain: &Chain, post: &TgarmaPosterior) -> Result<CriteriaReport> {
    criteria_from(chain, post, post.order.r())
}

/// Criteria built from the likelihood terms at 0-based times `start..n`
/// only, so that candidates with different orders are scored on the same
/// observations.
pub fn criteria_from(chain: &Chain, post: &TgarmaPosterior, start: usize) -> Result<CriteriaReport> {
    let per_draw = draw_terms_from(chain, post, start)?;
    let mean_deviance = per_draw.iter().map(|t| deviance_of(t)).sum::<f64>() / per_draw.len() as f64;
    let deviance_at_mean = deviance_at_mean(chain, post, skip_for(post, start)?)?;
    let p_d = mean_deviance - deviance_at_mean;
    let n_eff_terms = per_draw[0].len();
    let sampled_dim = chain.sampled_dim();
    Ok(CriteriaReport {
        dic: deviance_at_mean + 2.0 * p_d,
        ebic: mean_deviance + sampled_dim as f64 * (n_eff_terms as f64).ln(),
        cpo: log_cpo_sum(&per_draw)?,
        n_eff_terms,
        p_d,
        mean_deviance,
        deviance_at_mean,
        sampled_dim,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// Residuals for `t = r+1..n` (1-based).
    pub residuals: Vec<f64>,
    pub acf: Vec<f64>,
    pub pacf: Vec<f64>,
    pub maxlag: usize,
    /// 1-based time indices whose CDF value had to be clamped.
    pub clamped: Vec<usize>,
}

impl ResidualReport {
    /// Two-column ACF/PACF table with a lag column.
    pub fn write_acf_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["lag", "acf", "pacf"]).map_err(csv_err)?;
        for k in 0..=self.maxlag {
            wtr.write_record([k.to_string(), self.acf[k].to_string(), self.pacf[k].to_string()])
                .map_err(csv_err)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn cdf_values(post: &TgarmaPosterior, p: &ParamVector) -> Result<Vec<(f64, f64)>> {
    let ts = post.transform(p.lambda)?;
    let link = compute_link(&ts, p, post.order)?;
    (link.valid_from..ts.len())
        .map(|t| post.family.cdf_sf(ts.density_arg(t), link.mu[t], p.u))
        .collect()
}

fn residuals_from(cdfs: &[(f64, f64)], r: usize, maxlag: usize) -> Result<ResidualReport> {
    let mut clamped = Vec::new();
    let residuals: Vec<f64> = cdfs
        .iter()
        .enumerate()
        .map(|(i, &(f, sf))| {
            let (f, sf) = if f < CDF_CLAMP || sf < CDF_CLAMP {
                clamped.push(i + r + 1);
                (f.clamp(CDF_CLAMP, 1.0 - CDF_CLAMP), sf.clamp(CDF_CLAMP, 1.0 - CDF_CLAMP))
            } else {
                (f, sf)
            };
            // use the tail with more precision
            if f <= 0.5 {
                std_normal_quantile(f)
            } else {
                -std_normal_quantile(sf)
            }
        })
        .collect();
    let maxlag = maxlag.min(residuals.len().saturating_sub(1));
    let (acf, pacf) = acf_pacf(&residuals, maxlag)?;
    Ok(ResidualReport { residuals, acf, pacf, maxlag, clamped })
}

/// Quantile residuals `Phi^-1(F(y_t | past))` with a point estimate plugged in.
pub fn quantile_residuals(point: &ParamVector, post: &TgarmaPosterior, maxlag: usize) -> Result<ResidualReport> {
    residuals_from(&cdf_values(post, point)?, post.order.r(), maxlag)
}

/// Quantile residuals at the chain's posterior mean.
pub fn quantile_residuals_at_mean(chain: &Chain, post: &TgarmaPosterior, maxlag: usize) -> Result<ResidualReport> {
    check_chain(chain, post)?;
    quantile_residuals(&chain.sampling_scale_mean(), post, maxlag)
}

/// Quantile residuals with `F` averaged over all draws.
pub fn quantile_residuals_averaged(chain: &Chain, post: &TgarmaPosterior, maxlag: usize) -> Result<ResidualReport> {
    check_chain(chain, post)?;
    let mut acc: Option<Vec<(f64, f64)>> = None;
    for p in chain.params() {
        let c = cdf_values(post, &p)?;
        match acc.as_mut() {
            None => acc = Some(c),
            Some(a) => {
                for (x, y) in a.iter_mut().zip(c) {
                    x.0 += y.0;
                    x.1 += y.1;
                }
            }
        }
    }
    let q = chain.len() as f64;
    let avg: Vec<(f64, f64)> = acc.unwrap_or_default().into_iter().map(|(f, s)| (f / q, s / q)).collect();
    residuals_from(&avg, post.order.r(), maxlag)
}

/// Sample autocorrelations and partial autocorrelations (Durbin-Levinson),
/// both indexed from lag 0 (`acf[0] = pacf[0] = 1`).
pub fn acf_pacf(x: &[f64], maxlag: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = x.len();
    if n <= maxlag {
        return Err(TgarmaError::Dimension(format!("series of length {n} is too short for lag {maxlag}")));
    }
    let m = x.iter().sum::<f64>() / n as f64;
    let denom: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    if !(denom > 0.0) {
        return Err(TgarmaError::Numeric("zero variance series has no autocorrelation".into()));
    }
    let acf: Vec<f64> = (0..=maxlag)
        .map(|k| (0..n - k).map(|t| (x[t] - m) * (x[t + k] - m)).sum::<f64>() / denom)
        .collect();
    let mut pacf = vec![1.0; maxlag + 1];
    let mut phi: Vec<f64> = Vec::new();
    let mut v = 1.0;
    for k in 1..=maxlag {
        let num = acf[k] - phi.iter().enumerate().map(|(j, p)| p * acf[k - 1 - j]).sum::<f64>();
        let refl = num / v;
        let mut next: Vec<f64> = phi.iter().enumerate().map(|(j, p)| p - refl * phi[k - 2 - j]).collect();
        next.push(refl);
        phi = next;
        v *= 1.0 - refl * refl;
        pacf[k] = refl;
    }
    Ok((acf, pacf))
}

/// Mean absolute percentage error in percent.
pub fn mape(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.len() != predicted.len() || actual.is_empty() {
        return Err(TgarmaError::Dimension(format!(
            "mape needs equal nonempty lengths, got {} and {}",
            actual.len(),
            predicted.len()
        )));
    }
    if let Some(i) = actual.iter().position(|a| !(*a > 0.0)) {
        return Err(TgarmaError::Domain(format!("actual value at index {i} must be positive")));
    }
    let h = actual.len() as f64;
    Ok(100.0 * actual.iter().zip(predicted).map(|(a, p)| (a - p).abs() / a).sum::<f64>() / h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{ModelOptions, PriorSpec};
    use crate::model::{Family, ModelOrder};
    use crate::transform::Series;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn post(order: ModelOrder, family: Family, values: Vec<f64>) -> TgarmaPosterior {
        TgarmaPosterior::new(Series::new(values).unwrap(), order, family, PriorSpec::default_for(order), ModelOptions::default()).unwrap()
    }

    fn chain(order: ModelOrder, draws: Vec<Vec<f64>>) -> Chain {
        Chain {
            order,
            family: Family::Gamma,
            draws,
            acceptance_count: 1,
            proposals: 2,
            proposal_scale: 1.0,
            burn_in: 0,
            thin: 1,
            seed: 0,
            lambda_fixed: None,
        }
    }

    fn data() -> Vec<f64> {
        vec![3.2, 2.7, 4.1, 3.9, 2.2, 3.0, 5.4, 4.4, 3.1, 2.9, 3.6, 4.8]
    }

    #[test]
    fn single_draw_chain() {
        let order = ModelOrder::new(1, 0);
        let m = post(order, Family::Gamma, data());
        let draw = vec![0.4, 0.5, 3.0, 0.4];
        let c = chain(order, vec![draw.clone()]);
        let ll = m.loglik(&ParamVector::from_slice(&draw, order).unwrap()).unwrap();
        let rep = criteria(&c, &m).unwrap();
        assert!(rep.p_d.abs() < 1e-9);
        assert!((rep.dic + 2.0 * ll).abs() < 1e-9);
        assert!((rep.cpo - ll).abs() < 1e-9);
        assert_eq!(rep.n_eff_terms, 11);
        assert!((rep.ebic - (-2.0 * ll + 4.0 * 11f64.ln())).abs() < 1e-9);
        assert_eq!(dic(&c, &m).unwrap(), rep.dic);
        assert_eq!(cpo(&c, &m).unwrap(), rep.cpo);
        assert_eq!(ebic(&c, &m).unwrap(), rep.ebic);
    }

    #[test]
    fn two_draw_chain_by_hand() {
        let order = ModelOrder::new(0, 0);
        let m = post(order, Family::Gamma, vec![2.5]);
        let draws = vec![vec![0.2, 2.0, 0.5], vec![0.6, 1.0, 0.3]];
        let c = chain(order, draws.clone());
        let ll: Vec<f64> = draws.iter().map(|d| m.loglik(&ParamVector::from_slice(d, order).unwrap()).unwrap()).collect();
        let (f1, f2) = (ll[0].exp(), ll[1].exp());
        assert!((cpo(&c, &m).unwrap() - (-(0.5 * (1.0 / f1 + 1.0 / f2)).ln())).abs() < 1e-12);

        let mean_dev = -(ll[0] + ll[1]);
        let bar = ParamVector {
            beta0: 0.4,
            phi: vec![],
            theta: vec![],
            u: (0.5 * (2.0f64.ln() + 1.0f64.ln())).exp(),
            lambda: (0.5 * (0.5f64.atanh() + 0.3f64.atanh())).tanh(),
        };
        let d_bar = -2.0 * m.loglik(&bar).unwrap();
        assert!((dic(&c, &m).unwrap() - (2.0 * mean_dev - d_bar)).abs() < 1e-10);
        // EBIC minus mean deviance is exactly d log n_eff
        let e = ebic(&c, &m).unwrap();
        assert!((e - mean_dev - 3.0 * 1f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn later_start_drops_leading_terms() {
        let order = ModelOrder::new(1, 0);
        let m = post(order, Family::Gamma, data());
        let draws = vec![vec![0.4, 0.5, 3.0, 0.4], vec![0.3, 0.6, 2.0, 0.5]];
        let c = chain(order, draws.clone());
        assert_eq!(criteria_from(&c, &m, 1).unwrap(), criteria(&c, &m).unwrap());
        let later = criteria_from(&c, &m, 3).unwrap();
        assert_eq!(later.n_eff_terms, 9);
        let full: Vec<Vec<f64>> = draws.iter().map(|d| m.log_terms(&ParamVector::from_slice(d, order).unwrap()).unwrap()).collect();
        let mean_dev = -(full[0][2..].iter().sum::<f64>() + full[1][2..].iter().sum::<f64>());
        assert!((later.mean_deviance - mean_dev).abs() < 1e-10);
        assert!(criteria_from(&c, &m, 0).is_err());
        assert!(criteria_from(&c, &m, 12).is_err());
    }

    #[test]
    fn empty_or_mismatched_chain() {
        let order = ModelOrder::new(1, 0);
        let m = post(order, Family::Gamma, data());
        assert!(criteria(&chain(order, vec![]), &m).is_err());
        let other = chain(ModelOrder::new(0, 0), vec![vec![0.1, 1.0, 0.5]]);
        assert!(criteria(&other, &m).is_err());
    }

    #[test]
    fn exponential_median_gives_zero_residual() {
        // nu = 1, p = q = 0, lambda = 1: y - 1 = mu log 2 is the median
        let order = ModelOrder::new(0, 0);
        let mu = 2.0f64;
        let m = post(order, Family::Gamma, vec![1.0 + mu * 2f64.ln(), 1.0 + mu * 0.05]);
        let p = ParamVector { beta0: mu.ln(), phi: vec![], theta: vec![], u: 1.0, lambda: 1.0 };
        let rep = quantile_residuals(&p, &m, 1).unwrap();
        assert!(rep.residuals[0].abs() < 1e-9, "{}", rep.residuals[0]);
        let f = 1.0 - (-0.05f64).exp();
        assert!((rep.residuals[1] - std_normal_quantile(f)).abs() < 1e-9);
    }

    #[test]
    fn residual_tail_values() {
        // F = 0.975 -> 1.959964
        let order = ModelOrder::new(0, 0);
        let y = -(0.025f64).ln();
        let m = post(order, Family::Gamma, vec![1.0 + y, 1.5]);
        let p = ParamVector { beta0: 0.0, phi: vec![], theta: vec![], u: 1.0, lambda: 1.0 };
        let rep = quantile_residuals(&p, &m, 1).unwrap();
        assert!((rep.residuals[0] - 1.959964).abs() < 1e-6);
        assert!(rep.clamped.is_empty());
        let m = post(order, Family::Gamma, vec![1.0 + 60.0, 1.5]);
        let rep = quantile_residuals(&p, &m, 1).unwrap();
        assert_eq!(rep.clamped, vec![1]);
        assert!(rep.residuals[0].is_finite());
    }

    #[test]
    fn averaged_residuals_equal_plug_in_for_degenerate_chain() {
        let order = ModelOrder::new(1, 0);
        let m = post(order, Family::Gamma, data());
        let draw = vec![0.4, 0.5, 3.0, 0.4];
        let c = chain(order, vec![draw.clone(); 3]);
        let a = quantile_residuals_averaged(&c, &m, 3).unwrap();
        let b = quantile_residuals_at_mean(&c, &m, 3).unwrap();
        for (x, y) in a.residuals.iter().zip(&b.residuals) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn acf_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 10_000;
        let e: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let (acf, pacf) = acf_pacf(&e, 20).unwrap();
        assert_eq!(acf[0], 1.0);
        let bound = 3.0 / (n as f64).sqrt();
        let inside = acf[1..].iter().filter(|a| a.abs() < bound).count();
        assert!(inside >= 19);
        let mut x = vec![0.0; n];
        for t in 1..n {
            x[t] = 0.5 * x[t - 1] + e[t];
        }
        let (acf, pacf2) = acf_pacf(&x, 5).unwrap();
        assert!((acf[1] - 0.5).abs() < 0.05);
        assert!((pacf2[1] - acf[1]).abs() < 1e-12);
        assert!(pacf2[2].abs() < 0.05);
        assert_eq!(pacf.len(), 21);
        assert!(acf_pacf(&[1.0; 10], 3).is_err());
        assert!(acf_pacf(&[1.0, 2.0], 3).is_err());
    }

    #[test]
    fn mape_examples() {
        assert_eq!(mape(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((mape(&[100.0], &[96.3]).unwrap() - 3.7).abs() < 1e-12);
        assert!((mape(&[10.0, 20.0], &[11.0, 18.0]).unwrap() - 10.0).abs() < 1e-12);
        assert!(mape(&[0.0], &[1.0]).is_err());
        assert!(mape(&[1.0], &[1.0, 2.0]).is_err());
    }
}
