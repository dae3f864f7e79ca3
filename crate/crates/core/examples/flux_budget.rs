//! Off-chip loss budget and photon flux into the on-chip waveguide.
//!
//! ```text
//! cargo run --example flux_budget
//! ```

use snspd_link::calibration::{chain_db, facet_loss_from_loopback, photon_energy, photon_flux, LossBudget};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let lambda = 1.57e-6;
    let fiber = chain_db(&[4.18, 1.35]);
    // loopback through two identical facets with 5.53 dB of fiber on either side
    let coupler = facet_loss_from_loopback(27.76, fiber, fiber)?;
    println!("fiber {fiber:.2} dB, per-facet coupler {coupler:.2} dB, attenuator 70 dB");

    let budget = LossBudget::new(1e-3, lambda, fiber, coupler, 70.0, 0.1)?;
    let phi = photon_flux(&budget);
    println!("photon energy {:.4e} J", photon_energy(lambda));
    println!("1 mW in -> {:.4e} +- {:.2e} photons/s on chip ({:.2} dB total)", phi.rate, phi.sigma, budget.total_db());

    // a measured 1.356 MHz at 7.8 % efficiency implies this flux
    let implied = 1.356e6 / 0.078;
    let p_in = 1e-3 * implied / phi.rate;
    let check = photon_flux(&LossBudget { p_in, ..budget });
    println!("flux {implied:.4e} /s needs P_in = {:.4} mW (recomputed {:.4e} /s)", p_in * 1e3, check.rate);
    Ok(())
}
