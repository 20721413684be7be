//! Bayesian Box-Cox transformed GARMA models.
//!
//! Gamma and inverse Gaussian conditional families on a log link, fitted
//! by random-walk Metropolis, with DIC/EBIC/CPO model selection,
//! quantile residuals, forecasting and a replication harness.

pub mod assess;
pub mod cli;
pub mod error;
pub mod forecast;
pub mod inference;
pub mod model;
pub mod simlab;
pub mod transform;

pub use error::{Result, TgarmaError};
pub use model::{Family, LinkState, ModelOrder, ParamVector};
pub use transform::{Series, TransformedSeries};
