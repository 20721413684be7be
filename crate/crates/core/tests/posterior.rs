use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tgarma_core::assess::criteria;
use tgarma_core::inference::{
    find_mode, find_posterior_mode, fit, moment_init, FnTarget, McmcConfig, ModeOptions, ModelOptions, PriorSpec, TgarmaPosterior,
};
use tgarma_core::simlab::simulate_tgarma;
use tgarma_core::{Family, ModelOrder, ParamVector, Series};

fn fixture(n: usize, seed: u64) -> Series {
    let p = ParamVector { beta0: 0.6, phi: vec![0.5], theta: vec![0.2], u: 2.5, lambda: 0.4 };
    simulate_tgarma(&p, ModelOrder::new(1, 1), Family::Gamma, n, 0.01, seed).unwrap()
}

fn posterior(series: Series, priors: PriorSpec) -> TgarmaPosterior {
    TgarmaPosterior::new(series, ModelOrder::new(1, 1), Family::Gamma, priors, ModelOptions::default()).unwrap()
}

#[test]
fn log_posterior_gradient_matches_richardson_stencil() {
    let order = ModelOrder::new(1, 1);
    let post = posterior(fixture(200, 1), PriorSpec::default_for(order));
    let f = |x: &[f64]| post.log_posterior(&ParamVector::from_slice(x, order).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let x = vec![
            rng.random_range(0.3..0.9),
            rng.random_range(0.3..0.7),
            rng.random_range(0.0..0.4),
            rng.random_range(1.5..3.5),
            rng.random_range(0.2..0.6),
        ];
        for j in 0..x.len() {
            let d = |h: f64| {
                let (mut a, mut b) = (x.clone(), x.clone());
                a[j] += h;
                b[j] -= h;
                (f(&a) - f(&b)) / (2.0 * h)
            };
            let h = 1e-4;
            let central = d(h);
            let richardson = (4.0 * d(h / 2.0) - d(h)) / 3.0;
            let scale = central.abs().max(1.0);
            assert!((central - richardson).abs() / scale < 1e-4, "coordinate {j} at {x:?}: {central} vs {richardson}");
        }
    }
}

#[test]
fn flat_priors_recover_likelihood_maximizer() {
    let order = ModelOrder::new(1, 1);
    let post = posterior(fixture(300, 3), PriorSpec::flat(order, 1e8));
    let init = moment_init(&post, 0.5).unwrap();
    let mode = find_posterior_mode(&post, &init).unwrap();
    let dim = post.to_unconstrained(&init).len();
    let ll = FnTarget::new(dim, |x: &[f64]| post.loglik(&post.from_unconstrained(x)).unwrap_or(f64::NEG_INFINITY));
    let mle = find_mode(&ll, &post.to_unconstrained(&init), &ModeOptions::default()).unwrap();
    let mle = post.from_unconstrained(&mle.x).to_vec();
    for (a, b) in mode.params.to_vec().iter().zip(&mle) {
        assert!((a - b).abs() < 1e-3, "{:?} vs {mle:?}", mode.params);
    }
}

#[test]
fn criteria_stable_under_thinning() {
    let order = ModelOrder::new(1, 1);
    let post = posterior(fixture(400, 5), PriorSpec::default_for(order));
    let fitted = fit(&post, None, &McmcConfig { draws: 4000, burn_in: 1000, thin: 3, ..McmcConfig::default() }).unwrap();
    let full = criteria(&fitted.chain, &post).unwrap();
    let thin = criteria(&fitted.chain.thinned(2), &post).unwrap();
    for (a, b) in [(full.dic, thin.dic), (full.ebic, thin.ebic), (full.cpo, thin.cpo)] {
        assert!((a - b).abs() <= 0.02 * a.abs(), "{a} vs {b}");
    }
}
