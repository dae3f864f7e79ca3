//! Off-chip loss budget and incident photon flux.
//!
//! The flux reaching the on-chip waveguide is
//! `Φ = (P_in / hν) · 10^(-(dB_f + dB_c + dB_attn + dB_extra)/10)`.
//! Stage uncertainties in dB add in quadrature and map onto the flux through
//! `σ_Φ = Φ · (ln 10 / 10) · σ_dB`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Planck constant, J·s (exact, 2019 SI).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("loopback loss {total} dB is below the fiber losses {fibers} dB")]
    NegativeLoss { total: f64, fibers: f64 },
    #[error("invalid loss budget: {0}")]
    InvalidBudget(String),
}

pub fn photon_energy(wavelength: f64) -> f64 {
    PLANCK * SPEED_OF_LIGHT / wavelength
}

/// Sum of a chain of dB stages.
pub fn chain_db(stages: &[f64]) -> f64 {
    stages.iter().sum()
}

/// Per-facet coupler loss from a loopback measurement, both facets assumed equal.
pub fn facet_loss_from_loopback(
    loopback_total_db: f64,
    db_fiber_in: f64,
    db_fiber_out: f64,
) -> Result<f64, CalibrationError> {
    let fibers = db_fiber_in + db_fiber_out;
    if loopback_total_db < fibers {
        return Err(CalibrationError::NegativeLoss { total: loopback_total_db, fibers });
    }
    Ok((loopback_total_db - fibers) / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossBudget {
    /// Laser output power, W.
    pub p_in: f64,
    pub wavelength: f64,
    /// Laser to fiber facet, including the cryostat feedthrough.
    pub db_fiber: f64,
    /// PIC facet (edge coupler) loss.
    pub db_coupler: f64,
    /// Variable attenuator setting.
    pub db_attenuator: f64,
    /// Extra on-chip loss, e.g. a routing coupler. Zero unless studied.
    #[serde(default)]
    pub db_extra: f64,
    pub db_fiber_sigma: f64,
    #[serde(default)]
    pub db_coupler_sigma: f64,
    #[serde(default)]
    pub db_attenuator_sigma: f64,
    #[serde(default)]
    pub db_extra_sigma: f64,
}

impl LossBudget {
    pub fn new(
        p_in: f64,
        wavelength: f64,
        db_fiber: f64,
        db_coupler: f64,
        db_attenuator: f64,
        db_fiber_sigma: f64,
    ) -> Result<Self, CalibrationError> {
        let b = Self {
            p_in,
            wavelength,
            db_fiber,
            db_coupler,
            db_attenuator,
            db_extra: 0.0,
            db_fiber_sigma,
            db_coupler_sigma: 0.0,
            db_attenuator_sigma: 0.0,
            db_extra_sigma: 0.0,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), CalibrationError> {
        let bad = |s: &str| Err(CalibrationError::InvalidBudget(s.to_string()));
        if !(self.p_in.is_finite() && self.p_in > 0.0) {
            return bad("p_in must be positive");
        }
        if !(self.wavelength.is_finite() && self.wavelength > 0.0) {
            return bad("wavelength must be positive");
        }
        let all = [
            self.db_fiber,
            self.db_coupler,
            self.db_attenuator,
            self.db_extra,
            self.db_fiber_sigma,
            self.db_coupler_sigma,
            self.db_attenuator_sigma,
            self.db_extra_sigma,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad("all dB values and uncertainties must be finite and >= 0");
        }
        Ok(())
    }

    pub fn total_db(&self) -> f64 {
        chain_db(&[self.db_fiber, self.db_coupler, self.db_attenuator, self.db_extra])
    }

    /// Quadrature sum of stage uncertainties, dB.
    pub fn sigma_db(&self) -> f64 {
        [self.db_fiber_sigma, self.db_coupler_sigma, self.db_attenuator_sigma, self.db_extra_sigma]
            .iter()
            .map(|s| s * s)
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhotonFlux {
    /// photons/s
    pub rate: f64,
    pub sigma: f64,
}

pub fn photon_flux(budget: &LossBudget) -> PhotonFlux {
    let rate = budget.p_in / photon_energy(budget.wavelength) * 10f64.powf(-budget.total_db() / 10.0);
    let sigma = rate * std::f64::consts::LN_10 / 10.0 * budget.sigma_db();
    PhotonFlux { rate, sigma }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_photon_per_second() {
        let lambda = 1.57e-6;
        let b = LossBudget::new(photon_energy(lambda), lambda, 0.0, 0.0, 0.0, 0.0).unwrap();
        let f = photon_flux(&b);
        assert!((f.rate - 1.0).abs() < 1e-12);
        assert_eq!(f.sigma, 0.0);
    }

    #[test]
    fn table_chain_at_1570() {
        // 1 mW at 1570 nm through 5.53 + 8.35 + 70 dB
        let db_f = chain_db(&[4.18, 1.35]);
        let b = LossBudget::new(1e-3, 1570e-9, db_f, 8.35, 70.0, 0.0).unwrap();
        let f = photon_flux(&b);
        let hand = 1e-3 / (6.626_070_15e-34 * 299_792_458.0 / 1570e-9) * 10f64.powf(-8.388);
        assert!((f.rate - hand).abs() / hand < 1e-12);
        assert!((f.rate - 3.235e7).abs() / 3.235e7 < 1e-3);
    }

    #[test]
    fn chain_sums() {
        assert!((chain_db(&[4.18, 1.35]) - 5.53).abs() < 1e-12);
        assert_eq!(chain_db(&[]), 0.0);
        assert_eq!(chain_db(&[70.0]), 70.0);
    }

    #[test]
    fn loopback_halving() {
        let c = facet_loss_from_loopback(22.23, 2.70, 2.83).unwrap();
        assert!((c - 8.35).abs() < 1e-12);
        assert_eq!(facet_loss_from_loopback(5.53, 2.70, 2.83).unwrap(), 0.0);
        assert!(matches!(
            facet_loss_from_loopback(5.0, 2.70, 2.83),
            Err(CalibrationError::NegativeLoss { .. })
        ));
    }

    #[test]
    fn sigma_follows_fiber_uncertainty() {
        let mut b = LossBudget::new(1e-3, 1570e-9, 5.53, 8.35, 70.0, 0.1).unwrap();
        let f = photon_flux(&b);
        assert!((f.sigma / f.rate - std::f64::consts::LN_10 / 100.0).abs() < 1e-15);
        b.db_coupler_sigma = 0.1;
        let g = photon_flux(&b);
        assert!((g.sigma / g.rate - std::f64::consts::LN_10 / 10.0 * 0.1 * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn budget_validation() {
        assert!(LossBudget::new(0.0, 1.57e-6, 0.0, 0.0, 0.0, 0.0).is_err());
        assert!(LossBudget::new(1e-3, 1.57e-6, -1.0, 0.0, 0.0, 0.0).is_err());
        assert!(LossBudget::new(1e-3, 1.57e-6, 0.0, f64::NAN, 0.0, 0.0).is_err());
    }
}
