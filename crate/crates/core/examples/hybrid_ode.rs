//! On-chip detection efficiency of the hybrid converter.
//!
//! Solves the fundamental mode slice by slice, integrates the attenuation and
//! applies the two-segment efficiency formula. About half a minute on one core.
//!
//! ```text
//! cargo run --release --example hybrid_ode [overlap_um] [profile.csv]
//! ```

use snspd_link::geometry::ConverterGeometry;
use snspd_link::propagation::OdeSimulator;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let mut g = ConverterGeometry::default();
    if let Some(um) = args.next() {
        g.segmentation.delta_z2 = um.parse::<f64>()? * 1e-6;
    }
    let sim = OdeSimulator::new(g, 1.57e-6)?;
    let c = sim.converge(1e-3)?;
    let s = sim.geometry().segmentation;
    let p = &c.profile;
    println!("ODE {:.4} ({} slices, last change {:.1e}, {} distinct mode solves)", c.ode, c.slices, c.change, sim.solves());
    println!("survival over the taper     {:.4}", p.transmission(s.z1, s.z2)?);
    println!("survival past the PIC end   {:.4}", p.transmission(s.z2, p.z_end())?);
    println!("\n    z/um   alpha/(1/m)   n_eff");
    for sl in p.slices() {
        println!("  {:>6.2}   {:>10.1}   {:.5}{:+.2e}i", sl.z * 1e6, sl.alpha, sl.n_eff.re, sl.n_eff.im);
    }
    if let Some(path) = args.next() {
        p.write_csv(std::fs::File::create(&path)?)?;
        println!("profile written to {path}");
    }
    Ok(())
}
