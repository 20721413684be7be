//! Priors, posterior, mode search, Metropolis sampling and diagnostics.

pub mod chain;
pub mod diagnostics;
pub mod fit;
pub mod mh;
pub mod optimize;
pub mod posterior;
pub mod prior;

pub use chain::{Chain, ChainMeta};
pub use diagnostics::{ar_spectrum0, geweke, geweke_with, hpd, long_run_variance, summarize, FitSummary, ParamSummary, SpectralMethod};
pub use fit::{find_posterior_mode, find_posterior_mode_multistart, fit, fit_series, moment_init, FitResult, PosteriorMode};
pub use mh::{mh_sample, McmcConfig, RawChain};
pub use optimize::{find_mode, Mode, ModeOptions};
pub use posterior::{FnTarget, LogTarget, ModelOptions, TgarmaPosterior};
pub use prior::{log_prior, PriorSpec};
