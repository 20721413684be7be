//! Posterior predictive forecasts from a fitted chain.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::str::FromStr;

use crate::error::{Result, TgarmaError};
use crate::inference::chain::csv_err;
use crate::inference::diagnostics::quantile;
use crate::inference::Chain;
use crate::model::{compute_link, ParamVector};
use crate::transform::{inv_boxcox, transform_series, Series};

/// Largest fraction of draws that may fail the back-transform.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointMethod {
    #[default]
    Mean,
    Median,
}

impl FromStr for PointMethod {
    type Err = TgarmaError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Self::Mean),
            "median" => Ok(Self::Median),
            _ => Err(TgarmaError::Config(format!("unknown point method '{s}', expected mean or median"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastOptions {
    pub horizon: usize,
    pub level: f64,
    pub point: PointMethod,
    /// Sample observations from the conditional family along each path, so
    /// the interval is a full predictive interval instead of one for the mean.
    pub predictive: bool,
    pub seed: u64,
    pub keep_draws: bool,
}

impl Default for ForecastOptions {
    fn default() -> Self {
        Self { horizon: 1, level: 0.95, point: PointMethod::Mean, predictive: false, seed: 1, keep_draws: false }
    }
}

impl ForecastOptions {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(TgarmaError::Config("horizon must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(TgarmaError::Config(format!("level must lie in (0, 1), got {}", self.level)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    pub horizon: usize,
    pub point: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub level: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_draw_mu: Option<Vec<Vec<f64>>>,
    pub draws_used: usize,
    pub draws_excluded: usize,
}

#[derive(Serialize)]
pub struct ForecastMeta {
    pub h: usize,
    pub level: f64,
    pub draws_used: usize,
    pub draws_excluded: usize,
}

impl ForecastResult {
    pub fn meta(&self) -> ForecastMeta {
        ForecastMeta { h: self.horizon, level: self.level, draws_used: self.draws_used, draws_excluded: self.draws_excluded }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["step", "point", "lower", "upper"]).map_err(csv_err)?;
        for k in 0..self.horizon {
            wtr.write_record([
                (k + 1).to_string(),
                self.point[k].to_string(),
                self.lower[k].to_string(),
                self.upper[k].to_string(),
            ])
            .map_err(csv_err)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

struct Path {
    mu: Vec<f64>,
    point: Vec<f64>,
    interval: Vec<f64>,
}

/// Extends the link recursion `h` steps past the end of `raw` for one draw.
fn draw_path(
    raw: &Series,
    p: &ParamVector,
    chain: &Chain,
    floor_c: f64,
    opts: &ForecastOptions,
    rng: &mut ChaCha8Rng,
) -> Result<Path> {
    let order = chain.order;
    let ts = transform_series(raw, p.lambda, floor_c)?;
    let link = compute_link(&ts, p, order)?;
    let n = ts.len();
    let h = opts.horizon;
    let mut g: Vec<f64> = ts.values.iter().map(|v| v.ln()).collect();
    let mut innov: Vec<f64> = g.iter().zip(&link.eta).map(|(a, e)| a - e).collect();
    // noisy copies diverge from the mean path once an observation is sampled
    let mut g_noise = g.clone();
    let mut innov_noise = innov.clone();
    let step = |g: &[f64], innov: &[f64], t: usize| {
        let mut e = p.beta0;
        for (j, phi) in p.phi.iter().enumerate() {
            e += phi * g[t - j - 1];
        }
        for (j, theta) in p.theta.iter().enumerate() {
            e += theta * innov[t - j - 1];
        }
        e
    };
    let mut mu = Vec::with_capacity(h);
    let mut point = Vec::with_capacity(h);
    let mut interval = Vec::with_capacity(h);
    for k in 0..h {
        let t = n + k;
        let eta = step(&g, &innov, t);
        g.push(eta);
        innov.push(0.0);
        let m = eta.exp();
        let y = inv_boxcox(m, p.lambda)?;
        mu.push(m);
        point.push(y);
        if opts.predictive {
            let eta_n = step(&g_noise, &innov_noise, t);
            let z = chain.family.sample(eta_n.exp(), p.u, rng)?;
            let lz = z.max(floor_c).ln();
            g_noise.push(lz);
            innov_noise.push(lz - eta_n);
            interval.push(inv_boxcox(z, p.lambda)?);
        } else {
            interval.push(y);
        }
    }
    if point.iter().chain(&interval).any(|v| !v.is_finite()) {
        return Err(TgarmaError::Domain("forecast overflowed".into()));
    }
    Ok(Path { mu, point, interval })
}

/// h-step forecasts: each draw's back-transformed conditional means are
/// averaged (or their median taken) and the interval is the equal-tailed
/// quantile range across draws.
pub fn forecast(chain: &Chain, raw: &Series, floor_c: f64, opts: &ForecastOptions) -> Result<ForecastResult> {
    opts.validate()?;
    if chain.is_empty() {
        return Err(TgarmaError::Dimension("forecast needs a nonempty chain".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut paths = Vec::with_capacity(chain.len());
    let mut excluded = 0usize;
    for p in chain.params() {
        match draw_path(raw, &p, chain, floor_c, opts, &mut rng) {
            Ok(path) => paths.push(path),
            Err(TgarmaError::Domain(_)) => excluded += 1,
            Err(e) => return Err(e),
        }
    }
    let total = chain.len();
    if excluded as f64 > MAX_EXCLUDED_FRACTION * total as f64 {
        return Err(TgarmaError::Numeric(format!(
            "{excluded} of {total} draws fell outside the inverse Box-Cox range"
        )));
    }
    let h = opts.horizon;
    let alpha = 1.0 - opts.level;
    let mut point = Vec::with_capacity(h);
    let mut lower = Vec::with_capacity(h);
    let mut upper = Vec::with_capacity(h);
    for k in 0..h {
        let mut pts: Vec<f64> = paths.iter().map(|p| p.point[k]).collect();
        point.push(match opts.point {
            PointMethod::Mean => pts.iter().sum::<f64>() / pts.len() as f64,
            PointMethod::Median => {
                pts.sort_by(f64::total_cmp);
                quantile(&pts, 0.5)
            }
        });
        let mut iv: Vec<f64> = paths.iter().map(|p| p.interval[k]).collect();
        iv.sort_by(f64::total_cmp);
        lower.push(quantile(&iv, alpha / 2.0));
        upper.push(quantile(&iv, 1.0 - alpha / 2.0));
    }
    let per_draw_mu = opts.keep_draws.then(|| paths.iter().map(|p| p.mu.clone()).collect());
    Ok(ForecastResult {
        horizon: h,
        point,
        lower,
        upper,
        level: opts.level,
        per_draw_mu,
        draws_used: paths.len(),
        draws_excluded: excluded,
    })
}

/// One-step-ahead forecasts for the last `holdout` points of `full`, with the
/// chain held fixed and the observed values revealed one at a time.
pub fn rolling_one_step(chain: &Chain, full: &Series, holdout: usize, floor_c: f64, opts: &ForecastOptions) -> Result<ForecastResult> {
    let n = full.len();
    if holdout == 0 || holdout >= n {
        return Err(TgarmaError::Config(format!("holdout must lie in 1..{n}, got {holdout}")));
    }
    let one = ForecastOptions { horizon: 1, keep_draws: false, ..opts.clone() };
    let mut out = ForecastResult {
        horizon: holdout,
        point: vec![],
        lower: vec![],
        upper: vec![],
        level: opts.level,
        per_draw_mu: None,
        draws_used: chain.len(),
        draws_excluded: 0,
    };
    for k in 0..holdout {
        let f = forecast(chain, &full.head(n - holdout + k)?, floor_c, &ForecastOptions { seed: opts.seed.wrapping_add(k as u64), ..one.clone() })?;
        out.point.push(f.point[0]);
        out.lower.push(f.lower[0]);
        out.upper.push(f.upper[0]);
        out.draws_used = out.draws_used.min(f.draws_used);
        out.draws_excluded = out.draws_excluded.max(f.draws_excluded);
    }
    Ok(out)
}
