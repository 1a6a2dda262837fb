//! Least-squares power-law fits `metric ≈ c·N^slope` on log-log axes.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    /// `ln c`
    pub intercept: f64,
    /// Points used after filtering.
    pub used: usize,
    /// Points dropped because N or the metric was not positive.
    pub dropped: usize,
}

/// Fit `ln metric = intercept + slope·ln n` over `(n, metric)` pairs.
pub fn fit_loglog(points: &[(f64, f64)]) -> Result<RateFit> {
    let kept: Vec<(f64, f64)> = points
        .iter()
        .filter(|(n, m)| *n > 0.0 && *m > 0.0 && n.is_finite() && m.is_finite())
        .map(|(n, m)| (n.ln(), m.ln()))
        .collect();
    let dropped = points.len() - kept.len();
    if dropped > 0 {
        log::warn!("rate fit: dropped {dropped} nonpositive or non-finite points");
    }
    if kept.len() < 2 {
        return invalid(format!(
            "rate fit needs at least 2 positive points, got {}",
            kept.len()
        ));
    }
    let k = kept.len() as f64;
    let mx = kept.iter().map(|p| p.0).sum::<f64>() / k;
    let my = kept.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = kept.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return invalid("rate fit needs at least two distinct iteration counts");
    }
    let sxy: f64 = kept.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok(RateFit {
        slope,
        intercept: my - slope * mx,
        used: kept.len(),
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = [100.0, 400.0, 1600.0, 6400.0]
            .iter()
            .map(|n: &f64| (*n, 3.0 / n.sqrt()))
            .collect();
        let f = fit_loglog(&pts).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-6);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn constant_series_has_zero_slope() {
        let f = fit_loglog(&[(1.0, 2.0), (10.0, 2.0), (100.0, 2.0)]).unwrap();
        assert!(f.slope.abs() < 1e-12);
    }

    #[test]
    fn nonpositive_points_are_dropped() {
        let f = fit_loglog(&[(1.0, 1.0), (2.0, 0.0), (4.0, 0.25), (8.0, -1.0)]).unwrap();
        assert_eq!((f.used, f.dropped), (2, 2));
        assert!((f.slope + 1.0).abs() < 1e-12);
        assert!(fit_loglog(&[(1.0, 0.0), (2.0, 1.0)]).is_err());
    }
}
