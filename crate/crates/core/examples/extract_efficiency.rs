//! Measured on-chip detection efficiency from a bias sweep and a loss budget.
//!
//! ```text
//! cargo run --example extract_efficiency [trace.csv]
//! ```

use std::path::PathBuf;

use snspd_link::analysis::{detect_plateau, extract_ode, CountTrace, PlateauCriteria};
use snspd_link::calibration::{photon_flux, LossBudget};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/paper_counts.csv"));
    let trace = CountTrace::from_csv(std::fs::File::open(&path)?, 0.1)?;
    println!("{} points from {}", trace.len(), path.display());

    if let Some(p) = detect_plateau(&trace, &PlateauCriteria::default())? {
        println!("plateau {:.1}-{:.1} uA, mean {:.4e} Hz", p.bias_lo * 1e6, p.bias_hi * 1e6, p.mean_rate);
    }

    let lambda = 1.57e-6;
    let budget = LossBudget::new(0.5374392192097347e-3, lambda, 5.53, 8.35, 70.0, 0.1)?;
    let report = extract_ode(&trace, 7e-6, photon_flux(&budget), lambda)?;
    println!("{report}");
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
