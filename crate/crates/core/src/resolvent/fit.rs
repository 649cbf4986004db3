//! Exponential decay fits of fractional moments against distance.

use super::moments::MomentEstimate;
use crate::error::{Error, Result};
use crate::stats::fit_line;

/// Mean of a quantity over all sites at one max-norm distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceRow {
    pub distance: u64,
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    /// Slope of `log(mean)` against distance.
    pub rate: f64,
    pub intercept: f64,
    /// `rate ≤ log k_s + 0.05`.
    pub pass: bool,
    pub bins_used: usize,
}

pub const MIN_BINS: usize = 6;

/// Least-squares fit over rows with `mean > 10·stderr`.
pub fn decay_rate_fit_rows(rows: &[DistanceRow], k_s: f64) -> Result<DecayFit> {
    if !(k_s > 0.0) {
        return Err(Error::invalid("k_s must be positive"));
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.mean > 0.0 && r.mean.is_finite() && r.mean > 10.0 * r.stderr)
        .map(|r| (r.distance as f64, r.mean.ln()))
        .collect();
    if pts.len() < MIN_BINS {
        return Err(Error::FitDegenerate(format!(
            "{} reliable distance bins, need at least {MIN_BINS}",
            pts.len()
        )));
    }
    let line = fit_line(&pts).ok_or_else(|| Error::FitDegenerate("all bins share one distance".into()))?;
    Ok(DecayFit {
        rate: line.slope,
        intercept: line.intercept,
        pass: line.slope <= k_s.ln() + 0.05,
        bins_used: pts.len(),
    })
}

/// Fit over the interior distance bins of a moment estimate.
pub fn decay_rate_fit(est: &MomentEstimate, k_s: f64) -> Result<DecayFit> {
    decay_rate_fit_rows(&est.interior_rows(), k_s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(d: u64, mean: f64, stderr: f64) -> DistanceRow {
        DistanceRow {
            distance: d,
            mean,
            stderr,
            samples: 10,
        }
    }

    #[test]
    fn exact_exponential_recovered() {
        let k: f64 = 0.37;
        let rows: Vec<_> = (0..12).map(|d| row(d, 2.5 * k.powi(d as i32), 0.0)).collect();
        let fit = decay_rate_fit_rows(&rows, 0.5).unwrap();
        assert!((fit.rate - k.ln()).abs() < 1e-12);
        assert!((fit.intercept - 2.5f64.ln()).abs() < 1e-12);
        assert!(fit.pass);
        assert!(!decay_rate_fit_rows(&rows, 0.3).unwrap().pass);
    }

    #[test]
    fn noisy_bins_excluded() {
        let mut rows: Vec<_> = (0..8).map(|d| row(d, (-(d as f64)).exp(), 1e-6)).collect();
        // noise-dominated tail would flatten the slope if it were used
        rows.extend((8..20).map(|d| row(d, 1e-3, 5e-4)));
        let fit = decay_rate_fit_rows(&rows, 0.5).unwrap();
        assert_eq!(fit.bins_used, 8);
        assert!((fit.rate + 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_bins() {
        let rows: Vec<_> = (0..5).map(|d| row(d, 1.0 / (d + 1) as f64, 0.0)).collect();
        assert!(matches!(decay_rate_fit_rows(&rows, 0.5), Err(Error::FitDegenerate(_))));
    }
}
