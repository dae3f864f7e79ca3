//! Material tables and the converter cross-section along z.
//!
//! ```text
//! cargo run --example materials_cross_section
//! ```

use snspd_link::geometry::{cross_section_at, cross_section_past_pic_end, ConverterGeometry};
use snspd_link::materials::library;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let lambda = 1.57e-6;
    println!("materials at {:.0} nm", lambda * 1e9);
    for name in library::NAMES {
        let m = library::by_name(name).expect("listed name");
        let idx = m.at(lambda)?;
        println!("  {name:<18} n = {:.4}  k = {:.4}", idx.n, idx.k);
    }

    let g = ConverterGeometry::default();
    println!(
        "\ndefault converter: hairpin {:.0} um long, PIC taper {:.0} -> {:.0} nm over {:.0} um",
        g.length() * 1e6,
        g.pic.width_start * 1e9,
        g.pic.width_end * 1e9,
        g.pic.taper_length * 1e6
    );
    for z in [0.0, 10e-6, 20e-6, 30e-6, 39.9e-6] {
        let cs = cross_section_at(&g, z, lambda)?;
        let raster = cs.rasterize();
        println!(
            "  z = {:>5.1} um: PIC width {:>5.1} nm, grid {}x{}, {} materials",
            z * 1e6,
            g.pic_width(z) * 1e9,
            raster.nx,
            raster.ny,
            raster.palette.len()
        );
    }
    let past = cross_section_past_pic_end(&g, lambda)?;
    println!("  past the PIC end: {} rectangles", past.rects().len());

    // coarse picture of the stack at the taper start
    let cs = cross_section_at(&g, 0.0, lambda)?;
    let r = cs.rasterize();
    let glyph = |name: &str| match name {
        "silicon" => '#',
        "silicon_nitride" => '=',
        "nbtin_placeholder" => 'W',
        "silica" => '.',
        _ => ' ',
    };
    let (y_lo, y_hi) = cs.rects().iter().filter(|r| r.material.name() != "silica").fold((f64::MAX, f64::MIN), |(lo, hi), r| (lo.min(r.y0), hi.max(r.y1)));
    println!("\ncross-section, 30 nm per column, 20 nm per row");
    let mut y = y_hi + 20e-9;
    while y > y_lo - 40e-9 {
        let j = ((y - r.y_min) / r.dy) as usize;
        let row: String = (-20..=20)
            .map(|c| {
                let i = ((c as f64 * 30e-9 - r.x_min) / r.dx) as usize;
                glyph(r.material(i.min(r.nx - 1), j.min(r.ny - 1)).name())
            })
            .collect();
        println!("  {:>6.0} nm |{row}|", y * 1e9);
        y -= 20e-9;
    }
    Ok(())
}
