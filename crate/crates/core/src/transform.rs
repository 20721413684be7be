//! Box-Cox power transformation and the truncation floor applied to
//! transformed observations before they enter the log link.

use crate::error::{Result, TgarmaError};

/// Below this magnitude of lambda the logarithmic branch is used.
pub const EPS_LAMBDA: f64 = 1e-7;

/// Default truncation floor for transformed values.
pub const DEFAULT_FLOOR_C: f64 = 0.01;

/// A strictly positive observed series.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    values: Vec<f64>,
}

impl Series {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(TgarmaError::Dimension("series must contain at least one value".into()));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(TgarmaError::Domain(format!(
                "series value at index {i} must be positive and finite, got {v}"
            )));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// First `len` observations as a new series.
    pub fn head(&self, len: usize) -> Result<Series> {
        if len == 0 || len > self.len() {
            return Err(TgarmaError::Dimension(format!(
                "cannot take {len} leading values from a series of length {}",
                self.len()
            )));
        }
        Ok(Series { values: self.values[..len].to_vec() })
    }
}

/// The Box-Cox image of a [`Series`] for one value of lambda.
///
/// `values` holds `max(y^(lambda), floor_c)`, the form used in lagged link
/// terms. `unfloored` keeps the raw transformed values.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedSeries {
    pub values: Vec<f64>,
    pub unfloored: Vec<f64>,
    pub lambda: f64,
    pub floor_c: f64,
    pub floored_mask: Vec<bool>,
}

impl TransformedSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Argument passed to the conditional density at position `t`.
    ///
    /// The raw transformed value when it is inside the density support,
    /// otherwise the floor. The sign of `y^(lambda)` equals the sign of
    /// `log y` for every lambda, so the set of positions taking the floor
    /// here does not move with lambda.
    pub fn density_arg(&self, t: usize) -> f64 {
        let z = self.unfloored[t];
        if z > 0.0 {
            z
        } else {
            self.floor_c
        }
    }
}

/// `(y^lambda - 1) / lambda`, or `log y` when `|lambda| <= EPS_LAMBDA`.
pub fn boxcox(y: f64, lambda: f64) -> Result<f64> {
    if !(y > 0.0) || !y.is_finite() {
        return Err(TgarmaError::Domain(format!("box-cox requires y > 0, got {y}")));
    }
    Ok(boxcox_from_log(y.ln(), lambda))
}

/// Box-Cox transform from a precomputed `log y`.
#[inline]
pub fn boxcox_from_log(log_y: f64, lambda: f64) -> f64 {
    if lambda.abs() <= EPS_LAMBDA {
        log_y
    } else {
        (lambda * log_y).exp_m1() / lambda
    }
}

/// Inverse Box-Cox, `(lambda z + 1)^(1/lambda)` or `exp(z)` near zero.
pub fn inv_boxcox(z: f64, lambda: f64) -> Result<f64> {
    if lambda.abs() <= EPS_LAMBDA {
        let y = z.exp();
        if y > 0.0 && y.is_finite() {
            return Ok(y);
        }
        return Err(TgarmaError::Domain(format!("exp({z}) is outside the representable range")));
    }
    let base = lambda * z + 1.0;
    if !(base > 0.0) {
        return Err(TgarmaError::Domain(format!(
            "z = {z} with lambda = {lambda} is outside invertible range (lambda z + 1 = {base})"
        )));
    }
    let y = ((lambda * z).ln_1p() / lambda).exp();
    if y > 0.0 && y.is_finite() {
        Ok(y)
    } else {
        Err(TgarmaError::Domain(format!(
            "inverse box-cox of z = {z} with lambda = {lambda} overflows"
        )))
    }
}

fn check_floor(floor_c: f64) -> Result<()> {
    if floor_c > 0.0 && floor_c < 1.0 {
        Ok(())
    } else {
        Err(TgarmaError::Domain(format!("floor_c must lie in (0, 1), got {floor_c}")))
    }
}

/// Element-wise Box-Cox followed by `max(., floor_c)`.
pub fn transform_series(s: &Series, lambda: f64, floor_c: f64) -> Result<TransformedSeries> {
    let logs: Vec<f64> = s.values().iter().map(|y| y.ln()).collect();
    transform_logs(&logs, lambda, floor_c)
}

/// [`transform_series`] over cached `log y` values.
pub fn transform_logs(log_y: &[f64], lambda: f64, floor_c: f64) -> Result<TransformedSeries> {
    check_floor(floor_c)?;
    let n = log_y.len();
    let mut values = Vec::with_capacity(n);
    let mut unfloored = Vec::with_capacity(n);
    let mut floored_mask = Vec::with_capacity(n);
    for &ly in log_y {
        let z = boxcox_from_log(ly, lambda);
        if !z.is_finite() {
            return Err(TgarmaError::Numeric(format!(
                "box-cox of log y = {ly} with lambda = {lambda} is not finite"
            )));
        }
        unfloored.push(z);
        if z < floor_c {
            values.push(floor_c);
            floored_mask.push(true);
        } else {
            values.push(z);
            floored_mask.push(false);
        }
    }
    Ok(TransformedSeries { values, unfloored, lambda, floor_c, floored_mask })
}

/// Applies the floor a second time; flooring is idempotent.
pub fn refloor(ts: &TransformedSeries) -> TransformedSeries {
    let mut out = ts.clone();
    for (v, m) in out.values.iter_mut().zip(out.floored_mask.iter_mut()) {
        if *v < ts.floor_c {
            *v = ts.floor_c;
            *m = true;
        }
    }
    out
}
