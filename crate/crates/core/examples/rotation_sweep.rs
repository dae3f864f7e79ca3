//! Rotational misalignment: normalization of external absorbed-energy sweeps,
//! and optionally the APPROXIMATE lateral-shift model.
//!
//! ```text
//! cargo run --example rotation_sweep [--approximate]
//! ```

use snspd_link::geometry::ConverterGeometry;
use snspd_link::propagation::{approximate_rotation_sweep, normalize_rotation_sweep, TipTransmissions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // absorbed energies from a full-wave tool, arbitrary units, unsorted
    let sweep = [(0.8, 0.574), (0.4, 1.21), (0.0, 2.0), (-0.4, 1.19)];
    let mut rows = normalize_rotation_sweep(&sweep, 0.303)?;
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    println!("normalized to 30.3 % at 0 deg");
    for (angle, ode) in &rows {
        println!("  {angle:>5.1} deg  {:>6.2} %", ode * 100.0);
    }

    if std::env::args().any(|a| a == "--approximate") {
        println!("\nAPPROXIMATE lateral-shift model (no mode coupling), 16 slices");
        let angles = [0.0, 0.2, 0.4];
        let rows = approximate_rotation_sweep(&ConverterGeometry::default(), 1.57e-6, &angles, 16, TipTransmissions::default())?;
        for (angle, ode) in rows {
            println!("  {angle:>5.1} deg  {:>6.2} %", ode * 100.0);
        }
    }
    Ok(())
}
