//! On-chip detection efficiency from a count trace and an incident flux.

use std::fmt;

use serde::Serialize;

use super::{AnalysisError, CountTrace};
use crate::calibration::PhotonFlux;

/// Points around the operating bias whose spread sets the count uncertainty.
pub const NEIGHBORHOOD: usize = 7;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyReport {
    pub ode: f64,
    pub ode_sigma: f64,
    pub bias: f64,
    pub wavelength: f64,
    pub photon_rate: f64,
    pub dark_rate: f64,
    /// Sample standard deviation of the photon rate over the neighborhood.
    pub count_sigma: f64,
    pub flux: f64,
    pub flux_sigma: f64,
    pub integration_time: f64,
    /// Biases of the points that entered `count_sigma`, ascending.
    pub neighborhood: Vec<f64>,
}

impl fmt::Display for EfficiencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "ODE {:.3} ± {:.3} % at {:.4} µA, {:.1} nm",
            self.ode * 100.0,
            self.ode_sigma * 100.0,
            self.bias * 1e6,
            self.wavelength * 1e9
        )?;
        writeln!(f, "  photon rate {:.6e} Hz (σ {:.3e} Hz over {} points)", self.photon_rate, self.count_sigma, self.neighborhood.len())?;
        writeln!(f, "  dark rate   {:.6e} Hz", self.dark_rate)?;
        write!(f, "  flux        {:.6e} ± {:.3e} photons/s", self.flux, self.flux_sigma)
    }
}

/// Indices of the `k` points nearest `bias`; equal distances go to the lower bias.
fn nearest(trace: &CountTrace, bias: f64, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..trace.len()).collect();
    let pts = trace.points();
    idx.sort_by(|&a, &b| {
        let (da, db) = ((pts[a].bias - bias).abs(), (pts[b].bias - bias).abs());
        da.total_cmp(&db).then(pts[a].bias.total_cmp(&pts[b].bias))
    });
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

fn sample_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// `ODE = (photon − dark) / Φ` at `at_bias`, with
/// `σ_ODE = ODE · sqrt((σ_counts / rate)² + (σ_Φ / Φ)²)`.
pub fn extract_ode(
    trace: &CountTrace,
    at_bias: f64,
    flux: PhotonFlux,
    wavelength: f64,
) -> Result<EfficiencyReport, AnalysisError> {
    if trace.len() < NEIGHBORHOOD {
        return Err(AnalysisError::InsufficientPoints { needed: NEIGHBORHOOD, got: trace.len() });
    }
    let i = trace.index_of(at_bias)?;
    let p = trace.points()[i];
    let hood = nearest(trace, p.bias, NEIGHBORHOOD);
    let rates: Vec<f64> = hood.iter().map(|&j| trace.points()[j].photon_rate).collect();
    let count_sigma = sample_std(&rates);

    let ode = (p.photon_rate - p.dark_rate) / flux.rate;
    if !(0.0..=1.0).contains(&ode) {
        return Err(AnalysisError::EfficiencyOutOfRange { ode });
    }
    let rel_counts = if p.photon_rate > 0.0 { count_sigma / p.photon_rate } else { 0.0 };
    let rel_flux = flux.sigma / flux.rate;
    let ode_sigma = ode * rel_counts.hypot(rel_flux);

    Ok(EfficiencyReport {
        ode,
        ode_sigma,
        bias: p.bias,
        wavelength,
        photon_rate: p.photon_rate,
        dark_rate: p.dark_rate,
        count_sigma,
        flux: flux.rate,
        flux_sigma: flux.sigma,
        integration_time: trace.integration_time(),
        neighborhood: hood.iter().map(|&j| trace.points()[j].bias).collect(),
    })
}

/// Dark rate at `bias`; granularity was already enforced at ingestion.
pub fn dark_count_rate(trace: &CountTrace, bias: f64) -> Result<f64, AnalysisError> {
    Ok(trace.points()[trace.index_of(bias)?].dark_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::CountPoint;

    fn flat_trace(n: usize, rate: f64, dark: f64) -> CountTrace {
        let pts = (0..n)
            .map(|i| CountPoint { bias: (6.0 + 0.1 * i as f64) * 1e-6, photon_rate: rate, dark_rate: dark })
            .collect();
        CountTrace::new(0.1, pts).unwrap()
    }

    #[test]
    fn paper_rate_over_flux() {
        let t = flat_trace(9, 1_356_000.0, 40.0);
        let flux = PhotonFlux { rate: 1.738e7, sigma: 0.0 };
        let r = extract_ode(&t, 6.4e-6, flux, 1.57e-6).unwrap();
        assert!((r.ode - 0.078).abs() < 5e-4, "{}", r.ode);
        assert_eq!(r.ode_sigma, 0.0);
    }

    #[test]
    fn rate_equal_to_flux_is_unity() {
        let t = flat_trace(7, 1_000_000.0, 0.0);
        let r = extract_ode(&t, 6.0e-6, PhotonFlux { rate: 1e6, sigma: 0.0 }, 1.57e-6).unwrap();
        assert_eq!(r.ode, 1.0);
    }

    #[test]
    fn zero_count_spread_leaves_flux_term() {
        let t = flat_trace(10, 500_000.0, 10.0);
        let flux = PhotonFlux { rate: 2e7, sigma: 2e5 };
        let r = extract_ode(&t, 6.5e-6, flux, 1.57e-6).unwrap();
        assert_eq!(r.count_sigma, 0.0);
        assert!((r.ode_sigma - r.ode * 0.01).abs() < 1e-15);
    }

    fn unit_trace(biases: &[f64], rates: &[f64]) -> CountTrace {
        let pts = biases
            .iter()
            .zip(rates)
            .map(|(&bias, &photon_rate)| CountPoint { bias, photon_rate, dark_rate: 0.0 })
            .collect();
        CountTrace::new(1.0, pts).unwrap()
    }

    #[test]
    fn neighborhood_includes_the_point_and_ties_go_low() {
        let biases: Vec<f64> = (1..=8).map(f64::from).collect();
        let t = unit_trace(&biases, &[5.0; 8]);
        let f = PhotonFlux { rate: 10.0, sigma: 0.0 };
        // distance 3 ties between 1 and 7; the lower bias wins
        let r = extract_ode(&t, 4.0, f, 1.57e-6).unwrap();
        assert_eq!(r.neighborhood, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        // at the top edge the window slides down
        let r = extract_ode(&t, 8.0, f, 1.57e-6).unwrap();
        assert_eq!(r.neighborhood, vec![2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
    }

    #[test]
    fn sample_standard_deviation() {
        let biases: Vec<f64> = (0..7).map(f64::from).collect();
        let rates: Vec<f64> = (0..7).map(|i| [10.0, 20.0][i % 2]).collect();
        let t = unit_trace(&biases, &rates);
        let r = extract_ode(&t, 3.0, PhotonFlux { rate: 1e3, sigma: 0.0 }, 1.57e-6).unwrap();
        // four 10s and three 20s, n - 1 denominator
        let mean = 100.0 / 7.0;
        let direct = ((4.0 * (10.0f64 - mean).powi(2) + 3.0 * (20.0f64 - mean).powi(2)) / 6.0).sqrt();
        assert!((r.count_sigma - direct).abs() < 1e-12);
        assert!((r.ode_sigma - r.ode * direct / 20.0).abs() < 1e-15);
    }

    #[test]
    fn contract_errors() {
        let t = flat_trace(6, 100.0, 0.0);
        let f = PhotonFlux { rate: 1e3, sigma: 0.0 };
        assert_eq!(
            extract_ode(&t, 6.0e-6, f, 1.57e-6).unwrap_err(),
            AnalysisError::InsufficientPoints { needed: 7, got: 6 }
        );
        let t = flat_trace(7, 100.0, 0.0);
        assert!(matches!(extract_ode(&t, 9e-6, f, 1.57e-6), Err(AnalysisError::BiasNotFound { .. })));
        let low = PhotonFlux { rate: 10.0, sigma: 0.0 };
        assert!(matches!(
            extract_ode(&t, 6.0e-6, low, 1.57e-6),
            Err(AnalysisError::EfficiencyOutOfRange { .. })
        ));
    }

    #[test]
    fn dark_rate_lookup() {
        let t = flat_trace(7, 100.0, 40.0);
        assert_eq!(dark_count_rate(&t, 6.2e-6).unwrap(), 40.0);
        assert!(dark_count_rate(&t, 1.0).is_err());
    }
}
