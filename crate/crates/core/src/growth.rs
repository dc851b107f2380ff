//! Growth-order estimates for fitness curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::linear_fit;

/// Minimum number of positive points a window must contain.
pub const MIN_FIT_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    /// Least-squares slope of ln(fitness) against ln(t): the polynomial exponent.
    pub slope: f64,
    pub r2_loglog: f64,
    /// Slope of ln(fitness) against t: the exponential rate.
    pub loglin_rate: f64,
    /// R² of ln(fitness) against t. Close to 1 for exponential growth.
    pub r2_loglin: f64,
    pub window_start: u64,
    pub window_end: u64,
    pub points: usize,
}

/// Last half of a curve with `len` generations: `[max(1, len / 2), len]`.
pub fn default_window(len: usize) -> (u64, u64) {
    ((len as u64 / 2).max(1), len as u64)
}

/// Fits a curve whose element `j` is the value at generation `j + 1`.
/// Only strictly positive values inside the inclusive window are used.
pub fn fit_growth_order(series: &[f64], window: (u64, u64)) -> Result<GrowthFit> {
    let (start, end) = window;
    if start < 1 || end < start || end as usize > series.len() {
        return Err(Error::Contract(format!(
            "window [{start}, {end}] outside generations [1, {}]",
            series.len()
        )));
    }
    let mut ts = Vec::new();
    let mut log_ts = Vec::new();
    let mut log_ys = Vec::new();
    for t in start..=end {
        let y = series[(t - 1) as usize];
        if y > 0.0 && y.is_finite() {
            ts.push(t as f64);
            log_ts.push((t as f64).ln());
            log_ys.push(y.ln());
        }
    }
    if ts.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} positive points in window [{start}, {end}], need {MIN_FIT_POINTS}",
            ts.len()
        )));
    }
    let degenerate = || Error::InsufficientData("window has a single distinct generation".into());
    let loglog = linear_fit(&log_ts, &log_ys).ok_or_else(degenerate)?;
    let loglin = linear_fit(&ts, &log_ys).ok_or_else(degenerate)?;
    Ok(GrowthFit {
        slope: loglog.slope,
        r2_loglog: loglog.r2,
        loglin_rate: loglin.slope,
        r2_loglin: loglin.r2,
        window_start: start,
        window_end: end,
        points: ts.len(),
    })
}
