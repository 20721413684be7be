//! Convergence diagnostics and posterior summaries.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TgarmaError};
use crate::inference::chain::Chain;

/// Mean shifted by the first element, exact for constant input.
fn mean(x: &[f64]) -> f64 {
    let x0 = x[0];
    x0 + x.iter().map(|v| v - x0).sum::<f64>() / x.len() as f64
}

fn autocov(x: &[f64], m: f64, k: usize) -> f64 {
    let n = x.len();
    (0..n - k).map(|t| (x[t] - m) * (x[t + k] - m)).sum::<f64>() / n as f64
}

/// Estimator of the spectral density at frequency zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralMethod {
    /// Yule-Walker AR fit, order chosen by AIC up to `10 log10 n`.
    #[default]
    Autoregressive,
    /// Bartlett kernel with lag window `floor(n^(1/3))`.
    NeweyWest,
}

/// Newey-West (Bartlett kernel) long-run variance with lag `floor(n^(1/3))`.
pub fn long_run_variance(x: &[f64]) -> f64 {
    let n = x.len();
    let m = mean(x);
    let lags = (n as f64).cbrt().floor() as usize;
    let mut s = autocov(x, m, 0);
    for k in 1..=lags.min(n.saturating_sub(1)) {
        s += 2.0 * (1.0 - k as f64 / (lags as f64 + 1.0)) * autocov(x, m, k);
    }
    s
}

/// Spectral density at zero from an AR model fitted by Durbin-Levinson.
pub fn ar_spectrum0(x: &[f64]) -> f64 {
    let n = x.len();
    let m = mean(x);
    let max_order = ((10.0 * (n as f64).log10()) as usize).min(n - 1);
    let g: Vec<f64> = (0..=max_order).map(|k| autocov(x, m, k)).collect();
    if !(g[0] > 0.0) {
        return 0.0;
    }
    let mut coef = vec![0.0; max_order + 1];
    let mut innov = g[0];
    let (mut best_aic, mut best_var, mut best_sum) = (n as f64 * innov.ln(), innov, 0.0);
    for k in 1..=max_order {
        let mut num = g[k];
        for j in 1..k {
            num -= coef[j] * g[k - j];
        }
        let refl = num / innov;
        let prev = coef.clone();
        coef[k] = refl;
        for j in 1..k {
            coef[j] = prev[j] - refl * prev[k - j];
        }
        innov *= 1.0 - refl * refl;
        if !(innov > 0.0) {
            break;
        }
        let aic = n as f64 * innov.ln() + 2.0 * k as f64;
        if aic < best_aic {
            best_aic = aic;
            best_var = innov;
            best_sum = coef[1..=k].iter().sum();
        }
    }
    best_var / (1.0 - best_sum).powi(2)
}

/// Geweke z-score comparing the first `frac_first` and the last
/// `frac_last` of a chain column, with AR spectral variances.
pub fn geweke(x: &[f64], frac_first: f64, frac_last: f64) -> Result<f64> {
    geweke_with(x, frac_first, frac_last, SpectralMethod::Autoregressive)
}

pub fn geweke_with(x: &[f64], frac_first: f64, frac_last: f64, method: SpectralMethod) -> Result<f64> {
    if !(frac_first > 0.0 && frac_last > 0.0 && frac_first + frac_last <= 1.0) {
        return Err(TgarmaError::Config(format!("invalid Geweke window fractions ({frac_first}, {frac_last})")));
    }
    let n = x.len();
    let n_a = (frac_first * n as f64).floor() as usize;
    let n_b = (frac_last * n as f64).floor() as usize;
    if n_a < 10 || n_b < 10 {
        return Err(TgarmaError::Dimension(format!("chain of length {n} is too short for Geweke windows")));
    }
    let a = &x[..n_a];
    let b = &x[n - n_b..];
    let spec = match method {
        SpectralMethod::Autoregressive => ar_spectrum0,
        SpectralMethod::NeweyWest => long_run_variance,
    };
    let (s_a, s_b) = (spec(a), spec(b));
    if !(s_a > 0.0) || !(s_b > 0.0) {
        return Err(TgarmaError::Numeric("degenerate chain: zero variance in a Geweke window".into()));
    }
    Ok((mean(a) - mean(b)) / (s_a / n_a as f64 + s_b / n_b as f64).sqrt())
}

/// Shortest interval covering `ceil(level * Q)` of the sorted draws.
/// Ties go to the leftmost window.
pub fn hpd(x: &[f64], level: f64) -> (f64, f64) {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let q = s.len();
    if q == 0 {
        return (f64::NAN, f64::NAN);
    }
    let k = ((level * q as f64 - 1e-9).ceil() as usize).clamp(1, q);
    let mut best = (s[0], s[k - 1]);
    for i in 1..=q - k {
        if s[i + k - 1] - s[i] < best.1 - best.0 {
            best = (s[i], s[i + k - 1]);
        }
    }
    best
}

/// Equal-tail empirical quantile with linear interpolation.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub parameter: String,
    pub mean: f64,
    pub sd: f64,
    pub hpd_lower: f64,
    pub hpd_upper: f64,
    pub acceptance_rate: f64,
    pub geweke_z: Option<f64>,
}

/// Posterior means, SDs, 95% HPD limits and Geweke scores per parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub draws: usize,
    pub level: f64,
    pub acceptance_rate: f64,
    pub parameters: Vec<ParamSummary>,
}

impl FitSummary {
    pub fn get(&self, name: &str) -> Option<&ParamSummary> {
        self.parameters.iter().find(|p| p.parameter == name)
    }

    pub fn means(&self) -> Vec<f64> {
        self.parameters.iter().map(|p| p.mean).collect()
    }
}

pub fn summarize(chain: &Chain) -> FitSummary {
    summarize_at(chain, 0.95)
}

pub fn summarize_at(chain: &Chain, level: f64) -> FitSummary {
    let q = chain.len();
    let rate = chain.acceptance_rate();
    let parameters = chain
        .names()
        .into_iter()
        .enumerate()
        .map(|(j, name)| {
            let col = chain.column(j);
            let m = mean(&col);
            let sd = if q > 1 {
                (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (q - 1) as f64).sqrt()
            } else {
                0.0
            };
            let (hpd_lower, hpd_upper) = hpd(&col, level);
            ParamSummary {
                parameter: name,
                mean: m,
                sd,
                hpd_lower,
                hpd_upper,
                acceptance_rate: rate,
                geweke_z: geweke(&col, 0.1, 0.5).ok(),
            }
        })
        .collect();
    FitSummary { draws: q, level, acceptance_rate: rate, parameters }
}
