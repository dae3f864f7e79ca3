//! Finite-difference eigenmode solver for lossy waveguide cross-sections.
//!
//! Discretizes the semi-vectorial quasi-TE Helmholtz equation on the
//! cell-centered grid of a [`CrossSection`] and finds the modes with the
//! largest `Re(n_eff)` by shift-invert Arnoldi. Full-vector corrections are
//! not modeled.
//!
//! Sign convention: fields travel as `exp(-iβz)` with
//! `β = k0·(n' - i·n'')`, so a passive mode has `n'' >= 0` and its amplitude
//! decays as `exp(-αz)` with `α = k0·n''`.

mod eigen;
mod operator;

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{CrossSection, Raster};
use crate::materials::{Material, MaterialError};

pub use eigen::{ArnoldiReport, ArnoldiSettings};
pub use operator::HelmholtzOperator;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("no guided mode: best Re(n_eff) = {best_neff:.6} does not exceed cladding index {cladding:.6}")]
    NoGuidedMode { best_neff: f64, cladding: f64 },
    #[error("eigen-solver did not converge after {restarts} restarts (Krylov dim {krylov_dim}, residuals {residuals:?})")]
    ConvergenceFailure {
        restarts: usize,
        krylov_dim: usize,
        residuals: Vec<f64>,
    },
    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),
    #[error("n_modes must be at least 1")]
    NoModesRequested,
    #[error("region material {0:?} does not appear in the cross-section")]
    RegionNotFound(String),
    #[error("total absorption Σ Im(ε)|E|² is zero; structure is lossless")]
    DegenerateDenominator,
    #[error("mode grid does not match the cross-section grid")]
    GridMismatch,
    #[error(transparent)]
    Material(#[from] MaterialError),
}

/// Field condition imposed at the edge of the computational window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Boundary {
    /// Perfect-conductor wall, field forced to zero just outside the grid.
    ZeroField,
    /// Mirror wall with zero normal derivative.
    ZeroSlope,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Polarization {
    TeLike,
    TmLike,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub boundary_x: Boundary,
    pub boundary_y: Boundary,
    pub arnoldi: ArnoldiSettings,
    /// Reject modes at or below the cladding light line.
    pub require_guided: bool,
    /// Extra eigenpairs computed beyond `n_modes` before ranking by `Re(n_eff)`.
    pub guard_modes: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            boundary_x: Boundary::ZeroField,
            boundary_y: Boundary::ZeroField,
            arnoldi: ArnoldiSettings::default(),
            require_guided: true,
            guard_modes: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSolution {
    pub wavelength: f64,
    /// `n' - i·n''`
    pub n_eff: Complex64,
    pub polarization: Polarization,
    pub mode_index: usize,
    /// `‖(H - β²)ψ‖ / (|β²|·‖ψ‖)` of the returned eigenpair.
    pub residual: f64,
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub x_min: f64,
    pub y_min: f64,
    /// Row-major `Ex` samples, `Σ|E|²·dx·dy = 1`.
    #[serde(skip)]
    pub field: Vec<Complex64>,
}

impl ModeSolution {
    pub fn n_real(&self) -> f64 {
        self.n_eff.re
    }

    /// `n''`, non-negative for passive structures.
    pub fn n_imag(&self) -> f64 {
        -self.n_eff.im
    }

    /// Phase constant `k = 2π·n'/λ`.
    pub fn propagation_constant(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.n_real() / self.wavelength
    }

    pub fn field_at(&self, i: usize, j: usize) -> Complex64 {
        self.field[j * self.nx + i]
    }

    /// Norm of the part of the field odd under `x → -x`, relative to the whole.
    pub fn antisymmetric_fraction(&self) -> f64 {
        let mut odd = 0.0;
        let mut total = 0.0;
        for j in 0..self.ny {
            for i in 0..self.nx {
                let a = self.field_at(i, j);
                let b = self.field_at(self.nx - 1 - i, j);
                odd += (0.5 * (a - b)).norm_sqr();
                total += a.norm_sqr();
            }
        }
        (odd / total).sqrt()
    }

    /// Writes `x,y,re_e,im_e` rows, one per grid cell.
    pub fn write_field_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "re_e", "im_e"])?;
        for j in 0..self.ny {
            let y = self.y_min + (j as f64 + 0.5) * self.dy;
            for i in 0..self.nx {
                let x = self.x_min + (i as f64 + 0.5) * self.dx;
                let e = self.field_at(i, j);
                w.write_record([x.to_string(), y.to_string(), e.re.to_string(), e.im.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Highest real index supported by the grid, `sqrt(max Re ε)`.
///
/// Metals have `Re ε < 0` and never raise this bound.
pub fn max_index(eps: &[Complex64]) -> f64 {
    eps.iter().map(|e| e.re).fold(f64::MIN, f64::max).max(0.0).sqrt()
}

/// Light line: real index of the cross-section background material.
pub fn cladding_index(raster: &Raster, wavelength: f64) -> Result<f64, MaterialError> {
    Ok(raster.palette[0].at(wavelength)?.n)
}

pub fn solve_modes(
    cs: &CrossSection,
    wavelength: f64,
    n_modes: usize,
) -> Result<Vec<ModeSolution>, SolverError> {
    solve_modes_with(cs, wavelength, n_modes, &SolverOptions::default())
}

pub fn solve_modes_with(
    cs: &CrossSection,
    wavelength: f64,
    n_modes: usize,
    opts: &SolverOptions,
) -> Result<Vec<ModeSolution>, SolverError> {
    if n_modes == 0 {
        return Err(SolverError::NoModesRequested);
    }
    let raster = cs.rasterize();
    solve_raster(&raster, wavelength, n_modes, opts)
}

pub fn solve_raster(
    raster: &Raster,
    wavelength: f64,
    n_modes: usize,
    opts: &SolverOptions,
) -> Result<Vec<ModeSolution>, SolverError> {
    if n_modes == 0 {
        return Err(SolverError::NoModesRequested);
    }
    let eps = raster.permittivity(wavelength)?;
    let (nx, ny) = (raster.nx, raster.ny);
    let op = HelmholtzOperator::assemble(
        &eps,
        nx,
        ny,
        raster.dx,
        raster.dy,
        wavelength,
        opts.boundary_x,
        opts.boundary_y,
    );
    let n_max = max_index(&eps);
    let target = n_max - 1e-4;
    let shift = Complex64::new(target * target, 0.0);
    let (pairs, report) = eigen::eigs_near(&op, shift, n_modes, opts.guard_modes, opts.arnoldi).map_err(|f| match f {
        eigen::EigenFailure::NotConverged(r) => SolverError::ConvergenceFailure {
            restarts: r.restarts,
            krylov_dim: r.krylov_dim,
            residuals: r.residuals,
        },
        eigen::EigenFailure::Factorization(s) | eigen::EigenFailure::Dense(s) => {
            SolverError::LinearAlgebra(s)
        }
    })?;

    let mut modes: Vec<(Complex64, Vec<Complex64>, f64)> = pairs
        .into_iter()
        .filter(|p| p.residual <= opts.arnoldi.tol)
        .map(|p| (passive_sqrt(p.value), p.vector, p.residual))
        .collect();
    if modes.is_empty() {
        return Err(SolverError::ConvergenceFailure {
            restarts: report.restarts,
            krylov_dim: report.krylov_dim,
            residuals: report.residuals,
        });
    }
    modes.sort_by(|a, b| b.0.re.total_cmp(&a.0.re));

    let cladding = cladding_index(raster, wavelength)?;
    if opts.require_guided {
        let best = modes[0].0.re;
        modes.retain(|m| m.0.re > cladding);
        if modes.is_empty() {
            return Err(SolverError::NoGuidedMode { best_neff: best, cladding });
        }
    }

    let cell = raster.dx * raster.dy;
    Ok(modes
        .into_iter()
        .take(n_modes)
        .enumerate()
        .map(|(mode_index, (n_eff, field, residual))| ModeSolution {
            wavelength,
            n_eff,
            polarization: Polarization::TeLike,
            mode_index,
            residual,
            nx,
            ny,
            dx: raster.dx,
            dy: raster.dy,
            x_min: raster.x_min,
            y_min: raster.y_min,
            field: normalize_field(field, cell),
        })
        .collect())
}

/// `sqrt` on the branch with `Re > 0`; round-off gain on a lossless mode is clamped to zero.
fn passive_sqrt(value: Complex64) -> Complex64 {
    let mut n = value.sqrt();
    if n.re < 0.0 {
        n = -n;
    }
    if n.im > 0.0 && n.im < 1e-12 * n.re {
        n.im = 0.0;
    }
    n
}

/// Scales to unit power norm and rotates the largest sample onto the positive real axis.
fn normalize_field(mut field: Vec<Complex64>, cell: f64) -> Vec<Complex64> {
    let power: f64 = field.iter().map(|e| e.norm_sqr()).sum::<f64>() * cell;
    let peak = field
        .iter()
        .copied()
        .max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()))
        .unwrap_or(Complex64::new(1.0, 0.0));
    let phase = if peak.norm() > 0.0 { peak.conj() / peak.norm() } else { Complex64::new(1.0, 0.0) };
    let scale = phase / power.sqrt();
    for e in field.iter_mut() {
        *e *= scale;
    }
    field
}

/// Amplitude attenuation rate `α = 2π·n''/λ` in 1/m; power decays as `exp(-2αL)`.
pub fn modal_absorption(mode: &ModeSolution) -> f64 {
    2.0 * std::f64::consts::PI * mode.n_imag() / mode.wavelength
}

fn check_grid(mode: &ModeSolution, raster: &Raster) -> Result<(), SolverError> {
    if raster.nx != mode.nx || raster.ny != mode.ny || raster.dx != mode.dx || raster.dy != mode.dy {
        return Err(SolverError::GridMismatch);
    }
    Ok(())
}

/// Share of the absorbed power density `|Im ε|·|E|²` carried by cells of `region_material`.
pub fn absorbed_fraction_by_region(
    mode: &ModeSolution,
    cs: &CrossSection,
    region_material: &Material,
) -> Result<f64, SolverError> {
    let raster = cs.rasterize();
    check_grid(mode, &raster)?;
    let slot = raster
        .palette
        .iter()
        .position(|m| m == region_material)
        .ok_or_else(|| SolverError::RegionNotFound(region_material.name().to_string()))?;
    let eps = raster.permittivity(mode.wavelength)?;
    let mut region = 0.0;
    let mut total = 0.0;
    for (p, e) in eps.iter().enumerate() {
        let density = e.im.abs() * mode.field[p].norm_sqr();
        total += density;
        if raster.cells[p] as usize == slot {
            region += density;
        }
    }
    if total == 0.0 {
        return Err(SolverError::DegenerateDenominator);
    }
    Ok(region / total)
}

/// `n''` estimated from the absorbed-energy overlap `Σ|Im ε|·|E|² / (2n'·Σ|E|²)`,
/// an independent route to the eigenvalue's imaginary part.
pub fn overlap_extinction(mode: &ModeSolution, cs: &CrossSection) -> Result<f64, SolverError> {
    let raster = cs.rasterize();
    check_grid(mode, &raster)?;
    let eps = raster.permittivity(mode.wavelength)?;
    let mut absorbed = 0.0;
    let mut norm = 0.0;
    for (e, f) in eps.iter().zip(&mode.field) {
        absorbed += e.im.abs() * f.norm_sqr();
        norm += f.norm_sqr();
    }
    Ok(absorbed / (2.0 * mode.n_real() * norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Domain, Rect};
    use crate::materials::{library, Material};

    fn slab(core: Material, dy: f64) -> CrossSection {
        let clad = Material::constant("clad", 1.444, 0.0).unwrap();
        let domain = Domain { x_min: 0.0, x_max: 10.0 * dy, y_min: -2.0e-6, y_max: 2.25e-6 };
        CrossSection::new(domain, dy, dy, clad, vec![Rect::new(0.0, 10.0 * dy, 0.0, 250e-9, core)])
            .unwrap()
    }

    fn slab_opts() -> SolverOptions {
        SolverOptions { boundary_x: Boundary::ZeroSlope, ..SolverOptions::default() }
    }

    #[test]
    fn slab_mode_is_guided_and_normalized() {
        let core = Material::constant("core", 2.0, 0.0).unwrap();
        let cs = slab(core, 10e-9);
        let modes = solve_modes_with(&cs, 1.57e-6, 1, &slab_opts()).unwrap();
        let m = &modes[0];
        assert!(m.n_real() > 1.444 && m.n_real() < 2.0);
        assert_eq!(m.n_imag(), 0.0);
        assert!(m.residual <= 1e-8);
        let power: f64 = m.field.iter().map(|e| e.norm_sqr()).sum::<f64>() * m.dx * m.dy;
        assert!((power - 1.0).abs() < 1e-12);
        assert_eq!(modal_absorption(m), 0.0);
    }

    #[test]
    fn uniform_medium_zero_slope_is_exact() {
        let n = Material::constant("n15", 1.5, 0.0).unwrap();
        let domain = Domain { x_min: 0.0, x_max: 200e-9, y_min: 0.0, y_max: 200e-9 };
        let cs = CrossSection::new(domain, 10e-9, 10e-9, n, vec![]).unwrap();
        let opts = SolverOptions {
            boundary_x: Boundary::ZeroSlope,
            boundary_y: Boundary::ZeroSlope,
            require_guided: false,
            ..SolverOptions::default()
        };
        let m = &solve_modes_with(&cs, 1.55e-6, 1, &opts).unwrap()[0];
        assert!((m.n_real() - 1.5).abs() < 1e-10);
    }

    #[test]
    fn uniform_medium_is_not_guided() {
        let n = Material::constant("n15", 1.5, 0.0).unwrap();
        let domain = Domain { x_min: 0.0, x_max: 200e-9, y_min: 0.0, y_max: 200e-9 };
        let cs = CrossSection::new(domain, 10e-9, 10e-9, n, vec![]).unwrap();
        let e = solve_modes(&cs, 1.55e-6, 1).unwrap_err();
        assert!(matches!(e, SolverError::NoGuidedMode { .. }));
    }

    #[test]
    fn modal_absorption_arithmetic() {
        let mut m = solve_modes_with(&slab(Material::constant("c", 2.0, 0.0).unwrap(), 10e-9), 1.57e-6, 1, &slab_opts())
            .unwrap()
            .remove(0);
        m.n_eff = Complex64::new(m.n_eff.re, -1e-3);
        let alpha = modal_absorption(&m);
        assert!((alpha - 2.0 * std::f64::consts::PI * 1e-3 / 1.57e-6).abs() < 1e-9);
        assert!((alpha - 4002.0).abs() < 1.0);
        m.n_eff = Complex64::new(m.n_eff.re, -2e-3);
        assert!((modal_absorption(&m) - 2.0 * alpha).abs() < 1e-9);
    }

    #[test]
    fn single_absorber_takes_all_absorption() {
        let core = Material::constant("lossy", 2.0, 1e-4).unwrap();
        let cs = slab(core.clone(), 10e-9);
        let m = &solve_modes_with(&cs, 1.57e-6, 1, &slab_opts()).unwrap()[0];
        assert_eq!(absorbed_fraction_by_region(m, &cs, &core).unwrap(), 1.0);
        assert!(m.n_imag() > 0.0);
    }

    #[test]
    fn lossless_region_fraction_is_degenerate() {
        let core = Material::constant("core", 2.0, 0.0).unwrap();
        let cs = slab(core.clone(), 10e-9);
        let m = &solve_modes_with(&cs, 1.57e-6, 1, &slab_opts()).unwrap()[0];
        assert_eq!(absorbed_fraction_by_region(m, &cs, &core), Err(SolverError::DegenerateDenominator));
        let missing = library::silicon();
        assert!(matches!(
            absorbed_fraction_by_region(m, &cs, &missing),
            Err(SolverError::RegionNotFound(_))
        ));
    }

    #[test]
    fn zero_modes_rejected() {
        let cs = slab(Material::constant("c", 2.0, 0.0).unwrap(), 10e-9);
        assert_eq!(solve_modes(&cs, 1.57e-6, 0), Err(SolverError::NoModesRequested));
    }

    #[test]
    fn field_csv_has_one_row_per_cell() {
        let cs = slab(Material::constant("c", 2.0, 0.0).unwrap(), 10e-9);
        let m = &solve_modes_with(&cs, 1.57e-6, 1, &slab_opts()).unwrap()[0];
        let mut buf = Vec::new();
        m.write_field_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,y,re_e,im_e\n"));
        assert_eq!(text.lines().count(), 1 + m.nx * m.ny);
    }
}
