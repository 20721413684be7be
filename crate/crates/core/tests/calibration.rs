//! Monte Carlo calibration of the sampler, criteria and forecasts.

use statrs::distribution::{ContinuousCDF, Normal};

use tgarma_core::forecast::{forecast, ForecastOptions};
use tgarma_core::inference::{mh_sample, Chain, FnTarget, McmcConfig};
use tgarma_core::simlab::{replicate_fits, run_selection_study, ReplicationOutcome, SimConfig};
use tgarma_core::{Family, ModelOrder, ParamVector};

fn ks_pvalue(mut x: Vec<f64>) -> f64 {
    let n = x.len() as f64;
    x.sort_by(f64::total_cmp);
    let norm = Normal::standard();
    let d = x
        .iter()
        .enumerate()
        .map(|(i, v)| (norm.cdf(*v) - i as f64 / n).max((i + 1) as f64 / n - norm.cdf(*v)))
        .fold(0.0, f64::max);
    let t = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let p: f64 = (1..=100).map(|k| 2.0 * if k % 2 == 1 { 1.0 } else { -1.0 } * (-2.0 * (k * k) as f64 * t * t).exp()).sum();
    p.clamp(0.0, 1.0)
}

#[test]
fn one_dimensional_ks_smoke() {
    let target = FnTarget::new(1, |x: &[f64]| -0.5 * x[0] * x[0]);
    let cov = nalgebra::DMatrix::identity(1, 1);
    let passed = (1..=100u64)
        .filter(|&seed| {
            let c = mh_sample(&target, &[0.0], &cov, &McmcConfig { seed, ..McmcConfig::default() }).unwrap();
            ks_pvalue(c.draws.iter().step_by(10).map(|d| d[0]).collect()) > 0.01
        })
        .count();
    assert!(passed >= 95, "{passed}/100");
}

fn ar1_config(m: usize, n: usize) -> SimConfig {
    SimConfig {
        true_params: ParamVector { beta0: 0.5, phi: vec![0.6], theta: vec![], u: 2.0, lambda: 0.4 },
        order: ModelOrder::new(1, 0),
        n,
        m,
        seed: 21,
        mcmc: McmcConfig { draws: 2000, burn_in: 500, thin: 3, ..McmcConfig::default() },
        criteria_models: vec![ModelOrder::new(1, 0), ModelOrder::new(2, 0)],
        ..SimConfig::default()
    }
}

#[test]
fn geweke_and_support_across_fits() {
    let cfg = ar1_config(50, 500);
    let results = replicate_fits(&cfg, |rep| {
        for d in &rep.fit.chain.draws {
            let (u, l) = (d[d.len() - 2], d[d.len() - 1]);
            assert!(u > 0.0 && (-1.0..=1.0).contains(&l), "draw outside the support: {d:?}");
        }
        Ok(ReplicationOutcome::from_replicate(rep))
    })
    .unwrap();
    let zs: Vec<Option<f64>> = results.into_iter().flat_map(|r| r.unwrap().geweke_z).collect();
    let inside = zs.iter().filter(|z| z.is_some_and(|z| z.abs() < 2.0)).count();
    assert!(inside as f64 >= 0.9 * zs.len() as f64, "{inside}/{}", zs.len());
}

#[test]
fn generating_model_wins_nested_comparison() {
    let r = run_selection_study(&ar1_config(50, 1000)).unwrap();
    assert_eq!(r.failures, 0);
    for c in ["DIC", "EBIC", "CPO"] {
        assert!(r.correct_for(c).unwrap() >= 0.7, "{c}: {:?}", r.correct);
    }
}

#[test]
fn mean_interval_coverage() {
    let cfg = SimConfig { mcmc: McmcConfig { draws: 1000, burn_in: 500, thin: 2, ..McmcConfig::default() }, ..ar1_config(200, 200) };
    let truth = cfg.true_params.to_vec();
    let hits = replicate_fits(&cfg, |rep| {
        let truth_chain = Chain { draws: vec![truth.clone()], lambda_fixed: None, ..rep.fit.chain.clone() };
        let raw = rep.posterior.raw();
        let target = forecast(&truth_chain, raw, 0.01, &ForecastOptions::default())?.point[0];
        let f = forecast(&rep.fit.chain, raw, 0.01, &ForecastOptions::default())?;
        Ok(f.lower[0] <= target && target <= f.upper[0])
    })
    .unwrap()
    .into_iter()
    .filter(|h| *h.as_ref().unwrap())
    .count();
    let rate = hits as f64 / 200.0;
    assert!((0.90..=0.99).contains(&rate), "coverage {rate}");
}

#[test]
fn inverse_gaussian_fit_runs() {
    let cfg = SimConfig { family: Family::InverseGaussian, true_params: ParamVector { u: 0.1, ..ar1_config(1, 300).true_params }, ..ar1_config(3, 300) };
    let results = replicate_fits(&cfg, |rep| Ok(ReplicationOutcome::from_replicate(rep))).unwrap();
    for r in results {
        let o = r.unwrap();
        assert!((o.estimates[1] - 0.6).abs() < 0.25, "{:?}", o.estimates);
    }
}
