//! Simulation of TGARMA series and Monte Carlo replication studies.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use crate::assess::{criteria, criteria_from};
use crate::error::{Result, TgarmaError};
use crate::inference::chain::csv_err;
use crate::inference::{fit, summarize, FitResult, McmcConfig, ModelOptions, PriorSpec, TgarmaPosterior};
use crate::model::{Family, ModelOrder, ParamVector};
use crate::transform::{inv_boxcox, Series, DEFAULT_FLOOR_C};

const SERIES_CHANNEL: u64 = 0;
const FIT_CHANNEL: u64 = 1;

/// Simulates `n` observations.
///
/// Transformed values are drawn from the conditional family and mapped back
/// with the inverse Box-Cox transform. The first `max(p, q)` transformed
/// values are i.i.d. with mean `exp(beta0)`; their link states are seeded
/// with `log max(z_t, floor_c)`, matching the likelihood's conditioning.
pub fn simulate_tgarma(
    params: &ParamVector,
    order: ModelOrder,
    family: Family,
    n: usize,
    floor_c: f64,
    seed: u64,
) -> Result<Series> {
    params.validate(order)?;
    if !(params.lambda > 0.0) {
        return Err(TgarmaError::Domain(format!(
            "simulation requires lambda in (0, 1], got {}",
            params.lambda
        )));
    }
    let r = order.r();
    if n <= r {
        return Err(TgarmaError::Dimension(format!("n = {n} must exceed max(p, q) = {r}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut log_floored = Vec::with_capacity(n);
    let mut eta = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for t in 0..n {
        let e = if t < r {
            params.beta0
        } else {
            let mut e = params.beta0;
            for (j, phi) in params.phi.iter().enumerate() {
                e += phi * log_floored[t - j - 1];
            }
            for (j, theta) in params.theta.iter().enumerate() {
                e += theta * (log_floored[t - j - 1] - eta[t - j - 1]);
            }
            e
        };
        let mu = e.exp();
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(TgarmaError::Numeric(format!("simulated conditional mean diverged at t = {t}")));
        }
        let z = family.sample(mu, params.u, &mut rng)?;
        let lf = z.max(floor_c).ln();
        log_floored.push(lf);
        eta.push(if t < r { lf } else { e });
        y.push(inv_boxcox(z, params.lambda)?);
    }
    Series::new(y)
}

/// Counter-based seed for replication `index` under `master`.
pub fn replication_seed(master: u64, index: u64, channel: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.set_word_pos(u128::from(channel) * 16);
    rng.next_u64()
}

/// Settings for replication and selection studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub true_params: ParamVector,
    pub order: ModelOrder,
    pub family: Family,
    pub n: usize,
    pub m: usize,
    pub mcmc: McmcConfig,
    pub seed: u64,
    pub floor_c: f64,
    pub include_jacobian: bool,
    pub priors: Option<PriorSpec>,
    pub criteria_models: Vec<ModelOrder>,
    /// Score every candidate on the observations after the largest
    /// `max(p, q)` among the candidates.
    pub common_start: bool,
    /// Worker threads; `None` uses the global rayon pool. Left out of
    /// serialized reports since results do not depend on it.
    #[serde(skip_serializing)]
    pub workers: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            true_params: ParamVector { beta0: 0.7, phi: vec![0.3], theta: vec![0.5], u: 0.5, lambda: 0.3 },
            order: ModelOrder::new(1, 1),
            family: Family::Gamma,
            n: 1000,
            m: 100,
            mcmc: McmcConfig { draws: 3000, burn_in: 500, thin: 3, ..McmcConfig::default() },
            seed: 1,
            floor_c: DEFAULT_FLOOR_C,
            include_jacobian: true,
            priors: None,
            criteria_models: vec![ModelOrder::new(1, 1), ModelOrder::new(2, 2)],
            common_start: true,
            workers: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.true_params
            .validate(self.order)
            .map_err(|e| TgarmaError::Config(format!("true_params: {e}")))?;
        if !(self.true_params.lambda > 0.0 && self.true_params.lambda <= 1.0) {
            return Err(TgarmaError::Config(format!(
                "true lambda must lie in (0, 1], got {}",
                self.true_params.lambda
            )));
        }
        if self.n <= self.order.r() + 10 {
            return Err(TgarmaError::Config(format!("n = {} must exceed max(p, q) + 10", self.n)));
        }
        if self.m == 0 {
            return Err(TgarmaError::Config("m must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(TgarmaError::Config("workers must be at least 1".into()));
        }
        if let Some(p) = &self.priors {
            p.validate(self.order).map_err(|e| TgarmaError::Config(format!("priors: {e}")))?;
        }
        self.mcmc.validate().map_err(|e| TgarmaError::Config(format!("mcmc: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: SimConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => toml::from_str(&text).map_err(|e| TgarmaError::Config(format!("{}: {e}", path.display())))?,
            _ => serde_json::from_str(&text).map_err(|e| TgarmaError::Config(format!("{}: {e}", path.display())))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn model_options(&self) -> ModelOptions {
        ModelOptions { floor_c: self.floor_c, include_jacobian: self.include_jacobian, lambda_fixed: None }
    }

    fn posterior(&self, series: Series, order: ModelOrder) -> Result<TgarmaPosterior> {
        let priors = match &self.priors {
            Some(p) if order == self.order => p.clone(),
            _ => PriorSpec::default_for(order),
        };
        TgarmaPosterior::new(series, order, self.family, priors, self.model_options())
    }

    pub fn simulate(&self, index: usize) -> Result<Series> {
        simulate_tgarma(
            &self.true_params,
            self.order,
            self.family,
            self.n,
            self.floor_c,
            replication_seed(self.seed, index as u64, SERIES_CHANNEL),
        )
    }

    fn mcmc_for(&self, index: usize, channel: u64) -> McmcConfig {
        McmcConfig { seed: replication_seed(self.seed, index as u64, channel), ..self.mcmc.clone() }
    }
}

/// One simulated series and its fit under the true order.
pub struct Replicate {
    pub index: usize,
    pub posterior: TgarmaPosterior,
    pub fit: FitResult,
}

/// Runs `f` over indices `0..m` on the configured pool, keeping index order.
pub fn par_indexed<T: Send>(m: usize, workers: Option<usize>, f: impl Fn(usize) -> T + Sync) -> Result<Vec<T>> {
    let run = || (0..m).into_par_iter().map(&f).collect::<Vec<T>>();
    match workers {
        None => Ok(run()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| TgarmaError::Config(format!("cannot build worker pool: {e}")))?;
            Ok(pool.install(run))
        }
    }
}

/// Simulates and fits every replication, then applies `f` to each fit.
pub fn replicate_fits<T: Send>(cfg: &SimConfig, f: impl Fn(&Replicate) -> Result<T> + Sync) -> Result<Vec<Result<T>>> {
    cfg.validate()?;
    par_indexed(cfg.m, cfg.workers, |i| {
        let posterior = cfg.posterior(cfg.simulate(i)?, cfg.order)?;
        let fit = fit(&posterior, None, &cfg.mcmc_for(i, FIT_CHANNEL))?;
        f(&Replicate { index: i, posterior, fit })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationOutcome {
    pub index: usize,
    pub estimates: Vec<f64>,
    pub acceptance_rate: f64,
    pub geweke_z: Vec<Option<f64>>,
}

impl ReplicationOutcome {
    pub fn from_replicate(rep: &Replicate) -> Self {
        let s = summarize(&rep.fit.chain);
        Self {
            index: rep.index,
            estimates: s.means(),
            acceptance_rate: s.acceptance_rate,
            geweke_z: s.parameters.iter().map(|p| p.geweke_z).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRow {
    pub parameter: String,
    pub true_value: f64,
    pub mean: f64,
    pub variance: Option<f64>,
    /// Absent when the true value is zero.
    pub cb: Option<f64>,
    /// Absent when fewer than two replications succeeded.
    pub ce: Option<f64>,
    pub ap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub config: SimConfig,
    pub rows: Vec<SimRow>,
    pub succeeded: usize,
    pub failures: usize,
    pub failure_messages: Vec<(usize, String)>,
    pub outcomes: Vec<ReplicationOutcome>,
}

impl SimReport {
    pub fn row(&self, name: &str) -> Option<&SimRow> {
        self.rows.iter().find(|r| r.parameter == name)
    }

    /// Table with columns Parameter, True, Mean, Variance, CB, CE, AP.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["Parameter", "True", "Mean", "Variance", "CB", "CE", "AP"]).map_err(csv_err)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            wtr.write_record([
                r.parameter.clone(),
                r.true_value.to_string(),
                r.mean.to_string(),
                opt(r.variance),
                opt(r.cb),
                opt(r.ce),
                r.ap.to_string(),
            ])
            .map_err(csv_err)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// CB, CE and AP for each parameter from per-replication point estimates.
pub fn summarize_replications(names: &[String], truth: &[f64], outcomes: &[ReplicationOutcome]) -> Result<Vec<SimRow>> {
    let m = outcomes.len();
    if m == 0 {
        return Err(TgarmaError::Sampler("all replications failed".into()));
    }
    let mf = m as f64;
    let ap = outcomes.iter().map(|o| o.acceptance_rate).sum::<f64>() / mf;
    Ok(names
        .iter()
        .zip(truth)
        .enumerate()
        .map(|(j, (name, &theta))| {
            let est: Vec<f64> = outcomes.iter().map(|o| o.estimates[j]).collect();
            let mean = est.iter().sum::<f64>() / mf;
            let variance = (m > 1).then(|| est.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (mf - 1.0));
            let cb = (theta != 0.0).then(|| est.iter().map(|e| ((theta - e) / theta).abs()).sum::<f64>() / mf);
            let mse = est.iter().map(|e| (e - theta) * (e - theta)).sum::<f64>() / mf;
            let ce = variance.and_then(|tau2| {
                if mse == 0.0 {
                    Some(0.0)
                } else if tau2 > 0.0 {
                    Some((mse / tau2).sqrt())
                } else {
                    None
                }
            });
            SimRow { parameter: name.clone(), true_value: theta, mean, variance, cb, ce, ap }
        })
        .collect())
}

fn split_outcomes<T>(results: Vec<Result<T>>) -> (Vec<T>, Vec<(usize, String)>) {
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => failed.push((i, e.to_string())),
        }
    }
    (ok, failed)
}

/// Builds the report from already collected outcomes.
pub fn replication_report(cfg: &SimConfig, results: Vec<Result<ReplicationOutcome>>) -> Result<SimReport> {
    let (outcomes, failure_messages) = split_outcomes(results);
    let names = ParamVector::names(cfg.order, cfg.family);
    let rows = summarize_replications(&names, &cfg.true_params.to_vec(), &outcomes)?;
    Ok(SimReport {
        config: cfg.clone(),
        rows,
        succeeded: outcomes.len(),
        failures: failure_messages.len(),
        failure_messages,
        outcomes,
    })
}

/// `m` simulate-then-fit cycles summarized by CB, CE and AP.
pub fn run_replication_study(cfg: &SimConfig) -> Result<SimReport> {
    let results = replicate_fits(cfg, |rep| Ok(ReplicationOutcome::from_replicate(rep)))?;
    replication_report(cfg, results)
}

pub const CRITERIA: [&str; 3] = ["DIC", "EBIC", "CPO"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub config: SimConfig,
    pub candidates: Vec<ModelOrder>,
    pub true_index: usize,
    /// Chosen candidate index per successful replication, ordered as `CRITERIA`.
    pub picks: Vec<[usize; 3]>,
    /// Fraction of successful replications choosing each candidate, per criterion.
    pub pick_proportions: Vec<Vec<f64>>,
    /// Fraction choosing the true order, per criterion.
    pub correct: Vec<f64>,
    pub succeeded: usize,
    pub failures: usize,
    pub failure_messages: Vec<(usize, String)>,
}

impl SelectionReport {
    pub fn correct_for(&self, criterion: &str) -> Option<f64> {
        CRITERIA.iter().position(|c| *c == criterion).map(|i| self.correct[i])
    }

    /// Long table: criterion, candidate, proportion, with one row per pair.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["Criterion", "Candidate", "Proportion", "Correct"]).map_err(csv_err)?;
        for (c, name) in CRITERIA.iter().enumerate() {
            for (k, cand) in self.candidates.iter().enumerate() {
                wtr.write_record([
                    name.to_string(),
                    cand.to_string(),
                    self.pick_proportions[c][k].to_string(),
                    (k == self.true_index).to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Index of the best value; the first candidate wins ties.
fn best_index(values: &[f64], maximize: bool) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        let better = if maximize { *v > values[best] } else { *v < values[best] };
        if better {
            best = i;
        }
    }
    best
}

/// Fits every candidate order to each simulated series and records which
/// one each criterion prefers.
pub fn run_selection_study(cfg: &SimConfig) -> Result<SelectionReport> {
    cfg.validate()?;
    let candidates = cfg.criteria_models.clone();
    let true_index = candidates.iter().position(|c| *c == cfg.order).ok_or_else(|| {
        TgarmaError::Config(format!("true order {} is not among the candidates", cfg.order))
    })?;
    let results = par_indexed(cfg.m, cfg.workers, |i| -> Result<[usize; 3]> {
        let series = cfg.simulate(i)?;
        let r_max = candidates.iter().map(|c| c.r()).max().unwrap_or(0);
        let mut dic = Vec::new();
        let mut ebic = Vec::new();
        let mut cpo = Vec::new();
        for cand in &candidates {
            // repeated orders share a seed, so they tie and the first one wins
            let k = candidates.iter().position(|c| c == cand).unwrap_or(0);
            let post = cfg.posterior(series.clone(), *cand)?;
            let fitted = fit(&post, None, &cfg.mcmc_for(i, FIT_CHANNEL + k as u64))?;
            let rep = match cfg.common_start {
                true => criteria_from(&fitted.chain, &post, r_max)?,
                false => criteria(&fitted.chain, &post)?,
            };
            dic.push(rep.dic);
            ebic.push(rep.ebic);
            cpo.push(rep.cpo);
        }
        Ok([best_index(&dic, false), best_index(&ebic, false), best_index(&cpo, true)])
    })?;
    let (picks, failure_messages) = split_outcomes(results);
    if picks.is_empty() {
        return Err(TgarmaError::Sampler("all replications failed".into()));
    }
    let s = picks.len() as f64;
    let pick_proportions: Vec<Vec<f64>> = (0..3)
        .map(|c| (0..candidates.len()).map(|k| picks.iter().filter(|p| p[c] == k).count() as f64 / s).collect())
        .collect();
    let correct = pick_proportions.iter().map(|row| row[true_index]).collect();
    Ok(SelectionReport {
        config: cfg.clone(),
        candidates,
        true_index,
        succeeded: picks.len(),
        picks,
        pick_proportions,
        correct,
        failures: failure_messages.len(),
        failure_messages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn outcome(index: usize, estimates: Vec<f64>, rate: f64) -> ReplicationOutcome {
        ReplicationOutcome { index, estimates, acceptance_rate: rate, geweke_z: vec![] }
    }

    #[test]
    fn iid_gamma_structure() {
        let p = ParamVector { beta0: 0.5, phi: vec![], theta: vec![], u: 2.0, lambda: 1.0 };
        let s = simulate_tgarma(&p, ModelOrder::new(0, 0), Family::Gamma, 5, 0.01, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for y in s.values() {
            let z = Family::Gamma.sample(0.5f64.exp(), 2.0, &mut rng).unwrap();
            assert!((y - (z + 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn simulated_mean_within_three_se() {
        let p = ParamVector { beta0: 0.4, phi: vec![], theta: vec![], u: 1.5, lambda: 0.5 };
        let n = 100_000;
        let s = simulate_tgarma(&p, ModelOrder::new(0, 0), Family::Gamma, n, 0.01, 11).unwrap();
        let z: Vec<f64> = s.values().iter().map(|y| crate::transform::boxcox(*y, 0.5).unwrap()).collect();
        let mu = 0.4f64.exp();
        let mean = z.iter().sum::<f64>() / n as f64;
        let se = (mu * mu / 1.5 / n as f64).sqrt();
        assert!((mean - mu).abs() < 3.0 * se);
    }

    #[test]
    fn simulation_is_reproducible_and_checks_lambda() {
        let cfg = SimConfig::default();
        assert_eq!(cfg.simulate(4).unwrap(), cfg.simulate(4).unwrap());
        assert_ne!(cfg.simulate(4).unwrap(), cfg.simulate(5).unwrap());
        let bad = ParamVector { lambda: -0.2, ..cfg.true_params.clone() };
        assert!(simulate_tgarma(&bad, cfg.order, cfg.family, 50, 0.01, 1).is_err());
    }

    #[test]
    fn seeds_differ_by_index_and_channel() {
        let a = replication_seed(1, 0, 0);
        assert_ne!(a, replication_seed(1, 1, 0));
        assert_ne!(a, replication_seed(1, 0, 1));
        assert_ne!(a, replication_seed(2, 0, 0));
        assert_eq!(a, replication_seed(1, 0, 0));
    }

    #[test]
    fn single_replication_formulas() {
        let names = vec!["a".to_string(), "b".to_string()];
        let rows = summarize_replications(&names, &[2.0, 0.0], &[outcome(0, vec![2.5, 0.1], 0.4)]).unwrap();
        assert!((rows[0].cb.unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(rows[0].ce, None);
        assert_eq!(rows[0].variance, None);
        assert_eq!(rows[1].cb, None);
        assert_eq!(rows[0].ap, 0.4);
    }

    #[test]
    fn exact_estimates_give_zero_cb_ce() {
        let names = vec!["a".to_string()];
        let outs: Vec<_> = (0..5).map(|i| outcome(i, vec![1.5], 0.3 + 0.1 * i as f64)).collect();
        let rows = summarize_replications(&names, &[1.5], &outs).unwrap();
        assert_eq!(rows[0].cb, Some(0.0));
        assert_eq!(rows[0].ce, Some(0.0));
        // AP is the plain mean of per-replication rates
        assert!((rows[0].ap - 0.5).abs() < 1e-15);
        assert!(summarize_replications(&names, &[1.5], &[]).is_err());
    }

    #[test]
    fn ce_of_unbiased_estimates_near_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let outs: Vec<_> = (0..10_000)
            .map(|i| {
                let e: f64 = StandardNormal.sample(&mut rng);
                outcome(i, vec![3.0 + 0.2 * e], 0.4)
            })
            .collect();
        let rows = summarize_replications(&["x".to_string()], &[3.0], &outs).unwrap();
        assert!((rows[0].ce.unwrap() - 1.0).abs() < 0.05);
    }

    #[test]
    fn tie_break_prefers_first() {
        assert_eq!(best_index(&[1.0, 1.0, 2.0], false), 0);
        assert_eq!(best_index(&[3.0, 1.0, 1.0], false), 1);
        assert_eq!(best_index(&[1.0, 2.0, 2.0], true), 1);
    }

    fn small_cfg() -> SimConfig {
        SimConfig {
            true_params: ParamVector { beta0: 0.5, phi: vec![0.4], theta: vec![], u: 3.0, lambda: 0.5 },
            order: ModelOrder::new(1, 0),
            n: 80,
            m: 3,
            mcmc: McmcConfig { draws: 150, burn_in: 100, thin: 1, ..McmcConfig::default() },
            criteria_models: vec![ModelOrder::new(1, 0)],
            ..SimConfig::default()
        }
    }

    #[test]
    fn single_candidate_selection() {
        let r = run_selection_study(&small_cfg()).unwrap();
        assert_eq!(r.correct, vec![1.0, 1.0, 1.0]);
        assert_eq!(r.succeeded, 3);
    }

    #[test]
    fn duplicate_candidates_tie_to_first() {
        let cfg = SimConfig { criteria_models: vec![ModelOrder::new(1, 0), ModelOrder::new(1, 0)], m: 2, ..small_cfg() };
        let r = run_selection_study(&cfg).unwrap();
        assert_eq!(r.pick_proportions, vec![vec![1.0, 0.0]; 3]);
        let missing = SimConfig { criteria_models: vec![ModelOrder::new(2, 0)], ..small_cfg() };
        assert!(run_selection_study(&missing).is_err());
    }

    #[test]
    fn study_is_independent_of_worker_count() {
        let a = run_replication_study(&SimConfig { workers: Some(1), ..small_cfg() }).unwrap();
        let b = run_replication_study(&SimConfig { workers: Some(3), ..small_cfg() }).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.outcomes, b.outcomes);
        assert_eq!(a.succeeded + a.failures, 3);
    }

    #[test]
    fn config_validation_and_files() {
        assert!(SimConfig { m: 0, ..SimConfig::default() }.validate().is_err());
        assert!(SimConfig { n: 11, ..SimConfig::default() }.validate().is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("study.toml");
        std::fs::write(&path, "n = 200\nm = 4\n[mcmc]\ndraws = 100\n").unwrap();
        let cfg = SimConfig::from_path(&path).unwrap();
        assert_eq!((cfg.n, cfg.m, cfg.mcmc.draws, cfg.mcmc.thin), (200, 4, 100, 3));
        let json = dir.path().join("study.json");
        std::fs::write(&json, serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(SimConfig::from_path(&json).unwrap(), cfg);
    }
}
