use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Least-squares line through `(log eps, log error)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
    /// Points dropped for a nonpositive or non-finite error.
    pub excluded: usize,
}

impl RateFit {
    pub fn predict(&self, eps: f64) -> f64 {
        (self.intercept + self.slope * eps.ln()).exp()
    }
}

pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    let mut pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(e, v)| *e > 0.0 && *v > 0.0 && e.is_finite() && v.is_finite())
        .map(|&(e, v)| (e.ln(), v.ln()))
        .collect();
    let excluded = points.len() - pts.len();
    if pts.len() < 2 {
        return Err(Error::Fit(format!(
            "need two points with positive error, got {} of {}",
            pts.len(),
            points.len()
        )));
    }
    // a fixed order makes the fit independent of the input order bitwise
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Fit("all points share one eps".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(RateFit {
        slope,
        intercept,
        r2,
        points: pts.len(),
        excluded,
    })
}
