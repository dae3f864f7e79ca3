mod common;

use std::time::Instant;

use common::slab;
use snspd_link::geometry::{cross_section_at, ConverterGeometry};
use snspd_link::materials::library;
use snspd_link::mode_solver::{
    absorbed_fraction_by_region, modal_absorption, overlap_extinction, solve_modes,
    solve_modes_with, Boundary, SolverOptions,
};

fn slab_neff(dy: f64, core_k: f64) -> snspd_link::mode_solver::ModeSolution {
    let cs = slab::cross_section(core_k, dy, 10, 2.0e-6, 2.0e-6);
    solve_modes_with(&cs, slab::WAVELENGTH, 1, &slab::options()).unwrap().remove(0)
}

#[test]
fn slab_index_matches_dispersion_root() {
    let exact = slab::te0_index(slab::CORE_N, slab::CLAD_N, slab::THICKNESS, slab::WAVELENGTH);
    let m = slab_neff(10e-9, 0.0);
    let err = (m.n_real() - exact).abs();
    println!("analytic {exact:.9} solver {:.9} err {err:.2e}", m.n_real());
    assert!(err < 1e-3);
    assert!(m.residual <= 1e-8);
}

#[test]
fn slab_error_shrinks_under_refinement() {
    let exact = slab::te0_index(slab::CORE_N, slab::CLAD_N, slab::THICKNESS, slab::WAVELENGTH);
    let steps = [10e-9, 5e-9, 2.5e-9, 1.25e-9];
    let neffs: Vec<f64> = steps.iter().map(|&d| slab_neff(d, 0.0).n_real()).collect();
    let errors: Vec<f64> = neffs.iter().map(|n| (n - exact).abs()).collect();
    println!("errors {errors:?}");
    assert!(errors.windows(2).all(|w| w[1] < w[0]));
    let deltas: Vec<f64> = neffs.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    assert!(deltas.windows(2).all(|w| w[1] < w[0]), "successive differences {deltas:?}");
}

#[test]
fn weak_absorption_matches_perturbation_theory() {
    let k = 1e-4;
    let expected = slab::te0_extinction(slab::CORE_N, k, slab::CLAD_N, slab::THICKNESS, slab::WAVELENGTH);
    let cs = slab::cross_section(k, 10e-9, 10, 2.0e-6, 2.0e-6);
    let m = solve_modes_with(&cs, slab::WAVELENGTH, 1, &slab::options()).unwrap().remove(0);
    let rel = (m.n_imag() - expected).abs() / expected;
    println!("n'' solver {:.6e} perturbation {expected:.6e} rel {rel:.3e}", m.n_imag());
    assert!(rel < 0.10);

    // overlap-integral route agrees with the eigenvalue
    let via_overlap = overlap_extinction(&m, &cs).unwrap();
    let rel = (via_overlap - m.n_imag()).abs() / m.n_imag();
    assert!(rel < 0.05, "overlap {via_overlap:e} vs eigen {:e}", m.n_imag());
    let alpha = modal_absorption(&m);
    assert!((alpha - 2.0 * std::f64::consts::PI * m.n_imag() / slab::WAVELENGTH).abs() < 1e-9);
}

#[test]
fn padding_doubling_leaves_index_unchanged() {
    let a = solve_modes_with(&slab::cross_section(0.0, 10e-9, 10, 1.5e-6, 1.5e-6), slab::WAVELENGTH, 1, &slab::options())
        .unwrap()
        .remove(0);
    let b = solve_modes_with(&slab::cross_section(0.0, 10e-9, 10, 3.0e-6, 3.0e-6), slab::WAVELENGTH, 1, &slab::options())
        .unwrap()
        .remove(0);
    assert!((a.n_real() - b.n_real()).abs() < 1e-4, "{} vs {}", a.n_real(), b.n_real());
}

#[test]
fn uniform_medium_approaches_bulk_index_as_window_grows() {
    let n15 = snspd_link::materials::Material::constant("n15", 1.5, 0.0).unwrap();
    let opts = SolverOptions { require_guided: false, ..SolverOptions::default() };
    let (d, lambda) = (50e-9, 1.55e-6);
    let mut gaps = Vec::new();
    for half in [1e-6, 2e-6, 4e-6] {
        let domain = snspd_link::geometry::Domain { x_min: -half, x_max: half, y_min: -half, y_max: half };
        let cs = snspd_link::geometry::CrossSection::new(domain, d, d, n15.clone(), vec![]).unwrap();
        let m = solve_modes_with(&cs, lambda, 1, &opts).unwrap().remove(0);
        // lowest discrete Dirichlet mode on N cells per axis
        let cells = (2.0 * half / d).round();
        let k0d = 2.0 * std::f64::consts::PI / lambda * d;
        let drop = 2.0 * 2.0 / (k0d * k0d) * (1.0 - (std::f64::consts::PI / (cells + 1.0)).cos());
        assert!((m.n_real() - (2.25 - drop).sqrt()).abs() < 1e-10);
        gaps.push(1.5 - m.n_real());
    }
    println!("gaps {gaps:?}");
    assert!(gaps.iter().all(|&g| g > 0.0));
    // the gap shrinks as the window area grows, ~4x per doubling
    for w in gaps.windows(2) {
        let ratio = w[0] / w[1];
        assert!(ratio > 3.5 && ratio < 4.5, "{gaps:?}");
    }
}

#[test]
fn solve_on_300_by_300_grid_is_fast() {
    let cs = slab::cross_section(0.0, 10e-9, 300, 1.375e-6, 1.375e-6);
    assert_eq!((cs.nx(), cs.ny()), (300, 300));
    let t = Instant::now();
    let m = solve_modes_with(&cs, slab::WAVELENGTH, 1, &slab::options()).unwrap().remove(0);
    let elapsed = t.elapsed();
    println!("300x300 solve in {elapsed:?}, n_eff {}", m.n_eff);
    assert!(elapsed.as_secs_f64() < 10.0);
}

#[test]
fn hybrid_fundamental_is_symmetric_and_nanowire_dominates_loss() {
    let g = ConverterGeometry::default();
    let cs = cross_section_at(&g, 60e-6, 1.57e-6).unwrap();
    let t = Instant::now();
    let modes = solve_modes(&cs, 1.57e-6, 2).unwrap();
    println!("hybrid solve {:?}: {:?}", t.elapsed(), modes.iter().map(|m| m.n_eff).collect::<Vec<_>>());
    let m = &modes[0];
    assert!(m.antisymmetric_fraction() < 1e-6, "odd part {}", m.antisymmetric_fraction());
    assert!(m.n_imag() > 0.0);
    let frac = absorbed_fraction_by_region(m, &cs, &library::nbtin_placeholder()).unwrap();
    assert!(frac > 0.99);
    assert_eq!(m.residual <= 1e-8, true);
    let _ = Boundary::ZeroField;
}

/// SiN film under a thin absorbing metal sheet, x-invariant: the strong-loss
/// regime where first-order perturbation no longer applies.
fn metal_topped_stack(dy: f64) -> (snspd_link::geometry::CrossSection, Vec<common::stack::Layer>) {
    use snspd_link::geometry::{CrossSection, Domain, Rect};
    let (below, core, film, above) = (1.5e-6, 250e-9, 10e-9, 1.5e-6);
    let width = 10.0 * dy;
    let domain = Domain { x_min: 0.0, x_max: width, y_min: -below, y_max: core + film + above };
    let nbtin = library::nbtin_placeholder();
    let rects = vec![
        Rect::new(0.0, width, -below, 0.0, library::silica()),
        Rect::new(0.0, width, 0.0, core, library::silicon_nitride()),
        Rect::new(0.0, width, core, core + film, nbtin.clone()),
    ];
    let cs = CrossSection::new(domain, dy, dy, library::vacuum(), rects).unwrap();
    let eps = |m: &snspd_link::materials::Material| m.permittivity(slab::WAVELENGTH).unwrap();
    let layers = vec![
        (below, eps(&library::silica())),
        (core, eps(&library::silicon_nitride())),
        (film, eps(&nbtin)),
        (above, eps(&library::vacuum())),
    ];
    (cs, layers)
}

#[test]
fn metal_film_matches_transfer_matrix_root() {
    let mut errors = Vec::new();
    for dy in [10e-9, 5e-9, 2.5e-9] {
        let (cs, layers) = metal_topped_stack(dy);
        let m = solve_modes_with(&cs, slab::WAVELENGTH, 1, &slab::options()).unwrap().remove(0);
        let exact = common::stack::te_root(&layers, slab::WAVELENGTH, m.n_eff);
        let rel_im = (m.n_imag() - (-exact.im)).abs() / -exact.im;
        println!("dy {dy:e}: solver {} exact {exact} n'' rel err {rel_im:.3e}", m.n_eff);
        assert!((m.n_real() - exact.re).abs() < 3e-3);
        assert!(rel_im < 0.05);
        errors.push(rel_im);
    }
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    assert!(errors[2] < 0.01, "{errors:?}");
}
