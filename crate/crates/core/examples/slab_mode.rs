//! Mode solver on a slab with a known answer, plus field export.
//!
//! ```text
//! cargo run --example slab_mode [field.csv]
//! ```

use std::f64::consts::PI;

use snspd_link::geometry::{CrossSection, Domain, Rect};
use snspd_link::materials::Material;
use snspd_link::mode_solver::{modal_absorption, solve_modes_with, Boundary, SolverOptions};

/// Even TE root of `h·tan(h·d/2) = γ` by bisection.
fn analytic(n_core: f64, n_clad: f64, d: f64, lambda: f64) -> f64 {
    let k0 = 2.0 * PI / lambda;
    let f = |n: f64| {
        let h = k0 * (n_core * n_core - n * n).sqrt();
        let g = k0 * (n * n - n_clad * n_clad).sqrt();
        h * (h * d / 2.0).tan() - g
    };
    let (mut lo, mut hi) = (n_clad + 1e-9, n_core - 1e-9);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(lo) * f(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (lambda, thickness) = (1.57e-6, 250e-9);
    let exact = analytic(2.0, 1.444, thickness, lambda);
    // x-invariant: a narrow window with zero-slope side walls
    let opts = SolverOptions { boundary_x: Boundary::ZeroSlope, ..SolverOptions::default() };
    let clad = Material::constant("clad", 1.444, 0.0)?;
    println!("analytic TE0 index {exact:.6}");
    for k in [0.0, 1e-4] {
        let core = Material::constant("core", 2.0, k)?;
        for dy in [10e-9, 5e-9] {
            let width = 10.0 * dy;
            let domain = Domain { x_min: 0.0, x_max: width, y_min: -2e-6, y_max: thickness + 2e-6 };
            let cs = CrossSection::new(domain, dy, dy, clad.clone(), vec![Rect::new(0.0, width, 0.0, thickness, core.clone())])?;
            let mode = solve_modes_with(&cs, lambda, 1, &opts)?.remove(0);
            println!(
                "core k = {k:<6}, dy = {:>2.0} nm: n_eff = {:.6} {:+.3e}i, error {:.2e}, alpha = {:.3e} /m, residual {:.1e}",
                dy * 1e9,
                mode.n_real(),
                -mode.n_imag(),
                (mode.n_real() - exact).abs(),
                modal_absorption(&mode) + 0.0,
                mode.residual
            );
            if let (Some(path), 0.0, true) = (std::env::args().nth(1), k, dy == 5e-9) {
                mode.write_field_csv(std::fs::File::create(&path)?)?;
                println!("field written to {path} (columns x,y,re_e,im_e)");
            }
        }
    }
    Ok(())
}
