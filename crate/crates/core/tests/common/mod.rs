//! Independent oracles and fixture builders shared by the integration tests.

#![allow(dead_code)]

pub mod fixtures;

pub mod slab {
    use std::f64::consts::PI;

    use snspd_link::geometry::{CrossSection, Domain, Rect};
    use snspd_link::materials::Material;
    use snspd_link::mode_solver::{Boundary, SolverOptions};

    pub const CORE_N: f64 = 2.0;
    pub const CLAD_N: f64 = 1.444;
    pub const THICKNESS: f64 = 250e-9;
    pub const WAVELENGTH: f64 = 1.57e-6;

    /// Even TE mode of a symmetric slab: `h·tan(h·d/2) = γ`, solved by bisection.
    pub fn te0_index(n_core: f64, n_clad: f64, d: f64, wavelength: f64) -> f64 {
        let k0 = 2.0 * PI / wavelength;
        let f = |neff: f64| {
            let h = k0 * (n_core * n_core - neff * neff).sqrt();
            let g = k0 * (neff * neff - n_clad * n_clad).sqrt();
            h * (h * d / 2.0).tan() - g
        };
        // TE0 lives where h·d/2 < π/2
        let n_lo_cut = (n_core * n_core - (PI / (k0 * d)).powi(2)).max(n_clad * n_clad).sqrt();
        let (mut lo, mut hi) = (n_lo_cut + 1e-12, n_core - 1e-12);
        assert!(f(lo) * f(hi) < 0.0, "root not bracketed");
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(lo) * f(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Fraction of `∫|E|²` inside the core for the analytic TE0 field.
    pub fn te0_field_confinement(n_core: f64, n_clad: f64, d: f64, wavelength: f64) -> f64 {
        let k0 = 2.0 * PI / wavelength;
        let neff = te0_index(n_core, n_clad, d, wavelength);
        let h = k0 * (n_core * n_core - neff * neff).sqrt();
        let g = k0 * (neff * neff - n_clad * n_clad).sqrt();
        let core = d / 2.0 + (h * d).sin() / (2.0 * h);
        let clad = (h * d / 2.0).cos().powi(2) / g;
        core / (core + clad)
    }

    /// First-order `n''` for core extinction `k`: `Im(δ n²) = -2·n·k·Γ_E`,
    /// so `n'' = n_core·k·Γ_E / n_eff`.
    pub fn te0_extinction(n_core: f64, k: f64, n_clad: f64, d: f64, wavelength: f64) -> f64 {
        let neff = te0_index(n_core, n_clad, d, wavelength);
        n_core * k * te0_field_confinement(n_core, n_clad, d, wavelength) / neff
    }

    /// x-invariant slab occupying `0 <= y <= 250 nm`, `ny` cells at step `dy`.
    pub fn cross_section(core_k: f64, dy: f64, nx: usize, below: f64, above: f64) -> CrossSection {
        let core = Material::constant("core", CORE_N, core_k).unwrap();
        let clad = Material::constant("clad", CLAD_N, 0.0).unwrap();
        let width = nx as f64 * dy;
        let domain = Domain { x_min: 0.0, x_max: width, y_min: -below, y_max: THICKNESS + above };
        CrossSection::new(domain, dy, dy, clad, vec![Rect::new(0.0, width, 0.0, THICKNESS, core)])
            .unwrap()
    }

    pub fn options() -> SolverOptions {
        SolverOptions { boundary_x: Boundary::ZeroSlope, ..SolverOptions::default() }
    }
}

/// Planar stack between zero-field walls, solved as a complex characteristic
/// equation with layer transfer matrices.
pub mod stack {
    use num_complex::Complex64;
    use std::f64::consts::PI;

    /// `(thickness, ε)` from the bottom wall to the top wall.
    pub type Layer = (f64, Complex64);

    /// `E(top)` for a field launched as `E = 0, E' = 1` at the bottom wall.
    fn top_field(layers: &[Layer], k0: f64, beta_sq: Complex64) -> Complex64 {
        let (mut e, mut de) = (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0));
        for &(d, eps) in layers {
            let q = (eps * k0 * k0 - beta_sq).sqrt();
            let (c, s) = ((q * d).cos(), (q * d).sin());
            let sinc = if q.norm() * d < 1e-12 { Complex64::new(d, 0.0) } else { s / q };
            (e, de) = (c * e + sinc * de, -q * s * e + c * de);
        }
        e
    }

    /// TE root nearest `guess` (an effective index), by the secant method on `n_eff²`.
    pub fn te_root(layers: &[Layer], wavelength: f64, guess: Complex64) -> Complex64 {
        let k0 = 2.0 * PI / wavelength;
        let f = |n2: Complex64| top_field(layers, k0, n2 * k0 * k0);
        let (mut a, mut b) = (guess * guess, guess * guess * (1.0 + 1e-6));
        let (mut fa, mut fb) = (f(a), f(b));
        for _ in 0..200 {
            if fb == fa {
                break;
            }
            let c = b - fb * (b - a) / (fb - fa);
            (a, fa) = (b, fb);
            b = c;
            fb = f(b);
            if (b - a).norm() < 1e-15 * b.norm() {
                break;
            }
        }
        let mut n = b.sqrt();
        if n.re < 0.0 {
            n = -n;
        }
        n
    }
}
