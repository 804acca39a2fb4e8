//! Log-log least squares for convergence-rate studies.

use serde::Serialize;

use crate::error::{Error, Result};

/// Gaps below this are raised to it before taking logarithms.
pub const GAP_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
    /// Points dropped because their gap was not positive.
    pub dropped: usize,
}

/// Fits `ln gap = intercept + slope ln t`.
pub fn rate_fit(series: &[(f64, f64)]) -> Result<RateFit> {
    let mut xs = Vec::with_capacity(series.len());
    let mut ys = Vec::with_capacity(series.len());
    let mut dropped = 0;
    for &(t, gap) in series {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument(format!("episode {t} is not positive")));
        }
        if !(gap > 0.0 && gap.is_finite()) {
            dropped += 1;
            continue;
        }
        xs.push(t.ln());
        ys.push(gap.max(GAP_FLOOR).ln());
    }
    if xs.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "rate fit needs at least 3 positive gaps, got {}",
            xs.len()
        )));
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("rate fit needs distinct episodes".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        points: xs.len(),
        dropped,
    })
}
