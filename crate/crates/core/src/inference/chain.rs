use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

use crate::error::{Result, TgarmaError};
use crate::model::{Family, ModelOrder, ParamVector};

/// Post-burn-in, thinned posterior draws on the original parameter scale,
/// ordered as `(beta0, phi.., theta.., u, lambda)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub order: ModelOrder,
    pub family: Family,
    pub draws: Vec<Vec<f64>>,
    pub acceptance_count: usize,
    pub proposals: usize,
    pub proposal_scale: f64,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub lambda_fixed: Option<f64>,
}

/// JSON sidecar written next to the chain CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMeta {
    pub seed: u64,
    #[serde(rename = "Q")]
    pub q: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub acceptance_rate: f64,
    pub proposal_scale: f64,
    pub acceptance_count: usize,
    pub proposals: usize,
    pub family: Family,
    pub order: ModelOrder,
    pub lambda_fixed: Option<f64>,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        ParamVector::names(self.order, self.family)
    }

    pub fn n_params(&self) -> usize {
        3 + self.order.p + self.order.q
    }

    /// Number of sampled coordinates (excludes a pinned lambda).
    pub fn sampled_dim(&self) -> usize {
        self.n_params() - usize::from(self.lambda_fixed.is_some())
    }

    pub fn param(&self, i: usize) -> ParamVector {
        ParamVector::from_slice(&self.draws[i], self.order).expect("draw width matches order")
    }

    pub fn params(&self) -> impl Iterator<Item = ParamVector> + '_ {
        (0..self.len()).map(|i| self.param(i))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d[j]).collect()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.acceptance_count as f64 / self.proposals as f64
        }
    }

    /// Posterior mean taken on the sampling scale (`log u`, `atanh lambda`)
    /// and mapped back.
    pub fn sampling_scale_mean(&self) -> ParamVector {
        let width = self.n_params();
        let q = self.len() as f64;
        let mut acc = vec![0.0; width];
        for d in &self.draws {
            for j in 0..width - 2 {
                acc[j] += d[j];
            }
            acc[width - 2] += d[width - 2].ln();
            acc[width - 1] += d[width - 1].clamp(-1.0 + 1e-15, 1.0 - 1e-15).atanh();
        }
        let mut mean: Vec<f64> = acc.iter().map(|a| a / q).collect();
        mean[width - 2] = mean[width - 2].exp();
        mean[width - 1] = match self.lambda_fixed {
            Some(l) => l,
            None => mean[width - 1].tanh(),
        };
        ParamVector::from_slice(&mean, self.order).expect("width matches order")
    }

    /// Keeps every `k`-th draw.
    pub fn thinned(&self, k: usize) -> Chain {
        let k = k.max(1);
        Chain { draws: self.draws.iter().step_by(k).cloned().collect(), thin: self.thin * k, ..self.clone() }
    }

    pub fn meta(&self) -> ChainMeta {
        ChainMeta {
            seed: self.seed,
            q: self.len(),
            burn_in: self.burn_in,
            thin: self.thin,
            acceptance_rate: self.acceptance_rate(),
            proposal_scale: self.proposal_scale,
            acceptance_count: self.acceptance_count,
            proposals: self.proposals,
            family: self.family,
            order: self.order,
            lambda_fixed: self.lambda_fixed,
        }
    }

    /// Columnar CSV, one column per parameter at full precision.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(self.names()).map_err(csv_err)?;
        for d in &self.draws {
            wtr.write_record(d.iter().map(|v| v.to_string())).map_err(csv_err)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, meta: &ChainMeta) -> Result<Chain> {
        let mut rdr = csv::Reader::from_reader(r);
        let expected = ParamVector::names(meta.order, meta.family);
        let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
        if header != expected {
            return Err(TgarmaError::Data { line: 1, message: format!("chain header {header:?} does not match {expected:?}") });
        }
        let mut draws = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let row = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| TgarmaError::Data { line: i + 2, message: e.to_string() })?;
            if row.len() != expected.len() {
                return Err(TgarmaError::Data { line: i + 2, message: format!("expected {} fields", expected.len()) });
            }
            draws.push(row);
        }
        Ok(Chain {
            order: meta.order,
            family: meta.family,
            draws,
            acceptance_count: meta.acceptance_count,
            proposals: meta.proposals,
            proposal_scale: meta.proposal_scale,
            burn_in: meta.burn_in,
            thin: meta.thin,
            seed: meta.seed,
            lambda_fixed: meta.lambda_fixed,
        })
    }
}

pub(crate) fn csv_err(e: csv::Error) -> TgarmaError {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    TgarmaError::Data { line, message: e.to_string() }
}
