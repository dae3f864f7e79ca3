//! Loading a run configuration: unit suffixes, a geometry preset with
//! overrides, and custom materials.
//!
//! ```text
//! cargo run --example config_driven
//! ```

use std::path::PathBuf;

use snspd_link::config::LoadedConfig;

const CONFIG: &str = r#"{
  "materials": {
    "nbtin_thin_film": {"table": [
      {"wavelength": "1500 nm", "n": 4.9, "k": 5.6},
      {"wavelength": "1600 nm", "n": 5.1, "k": 5.9}
    ]}
  },
  "simulate_ode": {
    "wavelength": "1570 nm",
    "geometry": {
      "preset": "paper_default",
      "nanowire": {"gap": "150 nm", "material": "nbtin_thin_film"},
      "segmentation": {"delta_z2": "80 um"}
    },
    "tol": 1e-3
  }
}"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let loaded = LoadedConfig::from_str(CONFIG, PathBuf::from("."))?;
    let sim = loaded.config.simulate_ode.as_ref().expect("section present");
    let geometry = sim.geometry.as_ref().expect("geometry given").build(&loaded.materials)?;
    println!("wavelength {:e} m", sim.wavelength.get());
    println!("hairpin gap {:e} m, overlap {:e} m", geometry.nanowire.gap, geometry.segmentation.delta_z2);
    println!("wire material {:?} n = {:.3}", geometry.nanowire.material.name(), geometry.nanowire.material.at(1.57e-6)?.n);
    println!("tips default to {:?} when omitted", sim.tips.unwrap_or_default());
    // the resolved form is what reports echo
    println!("{}", serde_json::to_string_pretty(&loaded.config)?);

    let bad = r#"{"simulate_ode": {"wavelength": "1570 nm", "geometry": {"preset": "paper_default", "pic": {"widht": 1}}}}"#;
    if let Err(e) = LoadedConfig::from_str(bad, PathBuf::from(".")) {
        println!("strict schema: {e}");
    }
    Ok(())
}
