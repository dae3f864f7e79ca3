//! Cross-sections of the hybrid taper/nanowire converter.
//!
//! Coordinates: `x` is lateral, `y` is vertical with `y = 0` at the bottom of
//! the PIC waveguide, `z` runs along propagation with `z = 0` at the start
//! of the structure. All lengths are meters.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::materials::{library, Material, MaterialError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("rectangle {index} ({x0:e}..{x1:e}, {y0:e}..{y1:e}) lies outside the domain")]
    RectangleOutsideDomain {
        index: usize,
        x0: f64,
        x1: f64,
        y0: f64,
        y1: f64,
    },
    #[error("invalid converter geometry: {0}")]
    InvalidGeometry(String),
    #[error("z = {z:e} m outside structure [0, {length:e}] m")]
    OutOfRange { z: f64, length: f64 },
    #[error(transparent)]
    Material(#[from] MaterialError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Domain {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub material: Material,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64, material: Material) -> Self {
        Self { x0, x1, y0, y1, material }
    }

    /// Closed-interval containment.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.contains_within(x, y, 0.0, 0.0)
    }

    fn contains_within(&self, x: f64, y: f64, tol_x: f64, tol_y: f64) -> bool {
        x >= self.x0 - tol_x && x <= self.x1 + tol_x && y >= self.y0 - tol_y && y <= self.y1 + tol_y
    }
}

/// A 2D stack of material rectangles on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossSection {
    domain: Domain,
    dx: f64,
    dy: f64,
    nx: usize,
    ny: usize,
    background: Material,
    rects: Vec<Rect>,
}

fn cell_count(extent: f64, step: f64, axis: &str) -> Result<usize, GeometryError> {
    if !(step.is_finite() && step > 0.0) {
        return Err(GeometryError::InvalidGrid(format!("d{axis} must be positive")));
    }
    if !(extent.is_finite() && extent > 0.0) {
        return Err(GeometryError::InvalidGrid(format!("{axis} extent must be positive")));
    }
    let cells = (extent / step).round();
    if (cells * step - extent).abs() > 1e-6 * step {
        return Err(GeometryError::InvalidGrid(format!(
            "{axis} extent {extent:e} is not a whole number of d{axis} = {step:e} cells"
        )));
    }
    if cells < 10.0 {
        return Err(GeometryError::InvalidGrid(format!(
            "domain needs at least 10 cells along {axis}, got {cells}"
        )));
    }
    Ok(cells as usize)
}

impl CrossSection {
    pub fn new(
        domain: Domain,
        dx: f64,
        dy: f64,
        background: Material,
        rects: Vec<Rect>,
    ) -> Result<Self, GeometryError> {
        let nx = cell_count(domain.x_max - domain.x_min, dx, "x")?;
        let ny = cell_count(domain.y_max - domain.y_min, dy, "y")?;
        let slack = 1e-9 * (dx + dy);
        for (index, r) in rects.iter().enumerate() {
            let inside = r.x0 <= r.x1
                && r.y0 <= r.y1
                && r.x0 >= domain.x_min - slack
                && r.x1 <= domain.x_max + slack
                && r.y0 >= domain.y_min - slack
                && r.y1 <= domain.y_max + slack;
            if !inside {
                return Err(GeometryError::RectangleOutsideDomain {
                    index,
                    x0: r.x0,
                    x1: r.x1,
                    y0: r.y0,
                    y1: r.y1,
                });
            }
        }
        Ok(Self { domain, dx, dy, nx, ny, background, rects })
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn dy(&self) -> f64 {
        self.dy
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn background(&self) -> &Material {
        &self.background
    }
    pub fn rects(&self) -> &[Rect] {
        &self.rects
    }

    pub fn x_center(&self, i: usize) -> f64 {
        self.domain.x_min + (i as f64 + 0.5) * self.dx
    }

    pub fn y_center(&self, j: usize) -> f64 {
        self.domain.y_min + (j as f64 + 0.5) * self.dy
    }

    /// Cell-center sampling: each cell takes the last rectangle containing its center.
    ///
    /// Edges that land on a cell center (to within 1e-6 of a cell) count as
    /// containing it, so mirror-symmetric layouts rasterize symmetrically.
    pub fn rasterize(&self) -> Raster {
        let (tol_x, tol_y) = (1e-6 * self.dx, 1e-6 * self.dy);
        let mut palette = vec![self.background.clone()];
        let rect_slot: Vec<u16> = self
            .rects
            .iter()
            .map(|r| match palette.iter().position(|m| *m == r.material) {
                Some(p) => p as u16,
                None => {
                    palette.push(r.material.clone());
                    (palette.len() - 1) as u16
                }
            })
            .collect();
        let mut cells = vec![0u16; self.nx * self.ny];
        for j in 0..self.ny {
            let y = self.y_center(j);
            for i in 0..self.nx {
                let x = self.x_center(i);
                if let Some(k) = self.rects.iter().rposition(|r| r.contains_within(x, y, tol_x, tol_y)) {
                    cells[j * self.nx + i] = rect_slot[k];
                }
            }
        }
        Raster {
            nx: self.nx,
            ny: self.ny,
            dx: self.dx,
            dy: self.dy,
            x_min: self.domain.x_min,
            y_min: self.domain.y_min,
            palette,
            cells,
        }
    }
}

/// Material index per cell, row-major with `x` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub x_min: f64,
    pub y_min: f64,
    pub palette: Vec<Material>,
    pub cells: Vec<u16>,
}

impl Raster {
    pub fn material(&self, i: usize, j: usize) -> &Material {
        &self.palette[self.cells[j * self.nx + i] as usize]
    }

    pub fn permittivity(&self, wavelength: f64) -> Result<Vec<Complex64>, MaterialError> {
        let eps: Vec<Complex64> = self
            .palette
            .iter()
            .map(|m| m.permittivity(wavelength))
            .collect::<Result<_, _>>()?;
        Ok(self.cells.iter().map(|&c| eps[c as usize]).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PicWaveguide {
    pub thickness: f64,
    pub width_start: f64,
    pub width_end: f64,
    pub taper_length: f64,
    pub material: Material,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectorWaveguide {
    pub thickness: f64,
    pub width: f64,
    pub material: Material,
}

/// The hairpin, modeled as two parallel wires centered on the detector waveguide.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Nanowire {
    pub thickness: f64,
    pub wire_width: f64,
    pub gap: f64,
    pub material: Material,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapLayer {
    pub thickness: f64,
    pub material: Material,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Claddings {
    pub above: Material,
    pub below: Material,
}

/// `z1` is where the hairpin starts, `z2` where the PIC waveguide ends and
/// `delta_z2` how far the hairpin continues past `z2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Segmentation {
    pub z1: f64,
    pub z2: f64,
    pub delta_z2: f64,
}

impl Segmentation {
    pub fn delta_z1(&self) -> f64 {
        self.z2 - self.z1
    }

    pub fn hairpin_length(&self) -> f64 {
        self.delta_z1() + self.delta_z2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mesh {
    pub dx: f64,
    pub dy: f64,
    pub padding_x: f64,
    pub padding_y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConverterGeometry {
    pub pic: PicWaveguide,
    pub detector: DetectorWaveguide,
    pub nanowire: Nanowire,
    pub gap_layer: GapLayer,
    pub claddings: Claddings,
    pub segmentation: Segmentation,
    /// Rotation of the detector chiplet about the y axis, in degrees.
    pub rotation_offset_deg: f64,
    pub pivot_z: f64,
    pub mesh: Mesh,
}

impl Default for ConverterGeometry {
    /// Silicon PIC taper under a transferred silicon nitride detector
    /// waveguide carrying an NbTiN hairpin, with the placeholder NbTiN table.
    fn default() -> Self {
        Self {
            pic: PicWaveguide {
                thickness: 220e-9,
                width_start: 400e-9,
                width_end: 200e-9,
                taper_length: 40e-6,
                material: library::silicon(),
            },
            detector: DetectorWaveguide {
                thickness: 250e-9,
                width: 1e-6,
                material: library::silicon_nitride(),
            },
            nanowire: Nanowire {
                thickness: 9e-9,
                wire_width: 90e-9,
                gap: 120e-9,
                material: library::nbtin_placeholder(),
            },
            gap_layer: GapLayer { thickness: 0.0, material: library::vacuum() },
            claddings: Claddings { above: library::vacuum(), below: library::silica() },
            segmentation: Segmentation { z1: 0.0, z2: 40e-6, delta_z2: 50e-6 },
            rotation_offset_deg: 0.0,
            pivot_z: 0.0,
            mesh: Mesh { dx: 20e-9, dy: 10e-9, padding_x: 1.5e-6, padding_y: 1.5e-6 },
        }
    }
}

fn positive(value: f64, what: &str) -> Result<(), GeometryError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(GeometryError::InvalidGeometry(format!("{what} must be positive, got {value:e}")))
    }
}

impl ConverterGeometry {
    pub fn validate(&self) -> Result<(), GeometryError> {
        positive(self.pic.thickness, "PIC thickness")?;
        positive(self.pic.width_start, "PIC start width")?;
        positive(self.pic.width_end, "PIC end width")?;
        positive(self.pic.taper_length, "PIC taper length")?;
        positive(self.detector.thickness, "detector thickness")?;
        positive(self.detector.width, "detector width")?;
        positive(self.nanowire.thickness, "nanowire thickness")?;
        positive(self.nanowire.wire_width, "nanowire wire width")?;
        positive(self.mesh.dx, "mesh dx")?;
        positive(self.mesh.dy, "mesh dy")?;
        positive(self.mesh.padding_x, "x padding")?;
        positive(self.mesh.padding_y, "y padding")?;
        if !(self.nanowire.gap >= 0.0) {
            return Err(GeometryError::InvalidGeometry("hairpin gap must be >= 0".into()));
        }
        if !(self.gap_layer.thickness >= 0.0) {
            return Err(GeometryError::InvalidGeometry("gap layer thickness must be >= 0".into()));
        }
        let hairpin_width = 2.0 * self.nanowire.wire_width + self.nanowire.gap;
        if hairpin_width > self.detector.width {
            return Err(GeometryError::InvalidGeometry(format!(
                "hairpin ({hairpin_width:e} m) wider than detector waveguide"
            )));
        }
        let s = self.segmentation;
        if !(s.z1 >= 0.0 && s.z1 < s.z2) {
            return Err(GeometryError::InvalidGeometry(format!(
                "need 0 <= z1 < z2, got z1 = {:e}, z2 = {:e}",
                s.z1, s.z2
            )));
        }
        if !(s.delta_z2 >= 0.0 && s.delta_z2.is_finite()) {
            return Err(GeometryError::InvalidGeometry("delta_z2 must be >= 0".into()));
        }
        if !self.rotation_offset_deg.is_finite() || self.rotation_offset_deg.abs() >= 45.0 {
            return Err(GeometryError::InvalidGeometry("rotation offset must be within ±45°".into()));
        }
        Ok(())
    }

    /// Structure length, from `z = 0` to the end of the hairpin.
    pub fn length(&self) -> f64 {
        self.segmentation.z2 + self.segmentation.delta_z2
    }

    pub fn taper_start(&self) -> f64 {
        self.segmentation.z2 - self.pic.taper_length
    }

    /// PIC width at `z`: flat before the taper, linear along it.
    pub fn pic_width(&self, z: f64) -> f64 {
        let t = ((z - self.taper_start()) / self.pic.taper_length).clamp(0.0, 1.0);
        self.pic.width_start + t * (self.pic.width_end - self.pic.width_start)
    }

    /// Lateral shift of the detector chiplet at `z` under the rotation model.
    pub fn lateral_shift(&self, z: f64) -> f64 {
        (z - self.pivot_z) * self.rotation_offset_deg.to_radians().tan()
    }

    pub fn detector_bottom(&self) -> f64 {
        self.pic.thickness + self.gap_layer.thickness
    }

    pub fn nanowire_bottom(&self) -> f64 {
        self.detector_bottom() + self.detector.thickness
    }

    /// Simulation window, fixed over all `z` so every slice shares one grid.
    pub fn domain(&self) -> Domain {
        let mesh = self.mesh;
        let max_shift = self.lateral_shift(0.0).abs().max(self.lateral_shift(self.length()).abs());
        let half = (self.detector.width / 2.0 + max_shift)
            .max(self.pic.width_start.max(self.pic.width_end) / 2.0)
            + mesh.padding_x;
        let half = (half / mesh.dx).ceil() * mesh.dx;
        let y_min = -(mesh.padding_y / mesh.dy).ceil() * mesh.dy;
        let top = self.nanowire_bottom() + self.nanowire.thickness + mesh.padding_y;
        let y_max = (top / mesh.dy).ceil() * mesh.dy;
        Domain { x_min: -half, x_max: half, y_min, y_max }
    }

    pub fn materials(&self) -> [&Material; 6] {
        [
            &self.pic.material,
            &self.detector.material,
            &self.nanowire.material,
            &self.gap_layer.material,
            &self.claddings.above,
            &self.claddings.below,
        ]
    }
}

/// The layer stack at `z`.
///
/// Nonzero `rotation_offset_deg` shifts the detector waveguide and nanowire
/// rigidly by `(z - pivot_z)·tan(θ)`. This is an APPROXIMATE rotation model:
/// it ignores the tilt of the structures within each slice and any mode
/// coupling it causes.
pub fn cross_section_at(
    geom: &ConverterGeometry,
    z: f64,
    wavelength: f64,
) -> Result<CrossSection, GeometryError> {
    layer_stack(geom, z, wavelength, z <= geom.segmentation.z2)
}

/// Right-hand limit at the PIC tip: the stack at `z2` with the PIC already gone.
pub fn cross_section_past_pic_end(
    geom: &ConverterGeometry,
    wavelength: f64,
) -> Result<CrossSection, GeometryError> {
    layer_stack(geom, geom.segmentation.z2, wavelength, false)
}

fn layer_stack(
    geom: &ConverterGeometry,
    z: f64,
    wavelength: f64,
    with_pic: bool,
) -> Result<CrossSection, GeometryError> {
    geom.validate()?;
    let length = geom.length();
    if !(z >= 0.0 && z <= length) {
        return Err(GeometryError::OutOfRange { z, length });
    }
    for m in geom.materials() {
        m.at(wavelength)?;
    }
    let domain = geom.domain();
    let mut rects = vec![Rect::new(
        domain.x_min,
        domain.x_max,
        domain.y_min,
        0.0,
        geom.claddings.below.clone(),
    )];
    if with_pic {
        let w = geom.pic_width(z);
        rects.push(Rect::new(-w / 2.0, w / 2.0, 0.0, geom.pic.thickness, geom.pic.material.clone()));
    }
    let shift = geom.lateral_shift(z);
    let half_det = geom.detector.width / 2.0;
    if geom.gap_layer.thickness > 0.0 {
        rects.push(Rect::new(
            shift - half_det,
            shift + half_det,
            geom.pic.thickness,
            geom.detector_bottom(),
            geom.gap_layer.material.clone(),
        ));
    }
    rects.push(Rect::new(
        shift - half_det,
        shift + half_det,
        geom.detector_bottom(),
        geom.nanowire_bottom(),
        geom.detector.material.clone(),
    ));
    if z >= geom.segmentation.z1 {
        let nw = &geom.nanowire;
        let inner = nw.gap / 2.0;
        let outer = inner + nw.wire_width;
        let y0 = geom.nanowire_bottom();
        let y1 = y0 + nw.thickness;
        rects.push(Rect::new(shift - outer, shift - inner, y0, y1, nw.material.clone()));
        rects.push(Rect::new(shift + inner, shift + outer, y0, y1, nw.material.clone()));
    }
    CrossSection::new(domain, geom.mesh.dx, geom.mesh.dy, geom.claddings.above.clone(), rects)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LAMBDA: f64 = 1.57e-6;

    fn pic_rect(cs: &CrossSection) -> Option<&Rect> {
        cs.rects().iter().find(|r| r.material.name() == "silicon")
    }

    fn detector_rect(cs: &CrossSection) -> &Rect {
        cs.rects().iter().find(|r| r.material.name() == "silicon_nitride").unwrap()
    }

    #[test]
    fn taper_endpoints() {
        let g = ConverterGeometry::default();
        let start = cross_section_at(&g, 0.0, LAMBDA).unwrap();
        let r = pic_rect(&start).unwrap();
        assert!((r.x1 - r.x0 - 400e-9).abs() < 1e-15);
        let end = cross_section_at(&g, 40e-6, LAMBDA).unwrap();
        let r = pic_rect(&end).unwrap();
        assert!((r.x1 - r.x0 - 200e-9).abs() < 1e-15);
    }

    #[test]
    fn pic_omitted_past_its_end() {
        let g = ConverterGeometry::default();
        let cs = cross_section_at(&g, 41e-6, LAMBDA).unwrap();
        assert!(pic_rect(&cs).is_none());
        assert_eq!(cs.rects().iter().filter(|r| r.material.name() == "nbtin_placeholder").count(), 2);
    }

    #[test]
    fn nanowire_starts_at_z1() {
        let mut g = ConverterGeometry::default();
        g.segmentation.z1 = 10e-6;
        let before = cross_section_at(&g, 5e-6, LAMBDA).unwrap();
        assert!(before.rects().iter().all(|r| r.material.name() != "nbtin_placeholder"));
        let after = cross_section_at(&g, 10e-6, LAMBDA).unwrap();
        assert!(after.rects().iter().any(|r| r.material.name() == "nbtin_placeholder"));
    }

    #[test]
    fn rotation_shifts_detector() {
        let mut g = ConverterGeometry::default();
        g.rotation_offset_deg = 0.8;
        g.pivot_z = 0.0;
        let cs = cross_section_at(&g, 40e-6, LAMBDA).unwrap();
        let det = detector_rect(&cs);
        let center = 0.5 * (det.x0 + det.x1);
        // tan x ≈ x + x³/3 + 2x⁵/15 for x = 0.8° in radians
        let x = 0.8 * std::f64::consts::PI / 180.0;
        let hand = 40e-6 * (x + x.powi(3) / 3.0 + 2.0 * x.powi(5) / 15.0);
        assert!((center - hand).abs() < 1e-15, "center {center:e}");
        assert!((center - 0.5586e-6).abs() < 1e-10);
        let pic = pic_rect(&cs).unwrap();
        assert!((pic.x0 + pic.x1).abs() < 1e-18);
    }

    #[test]
    fn out_of_range_z() {
        let g = ConverterGeometry::default();
        assert!(matches!(cross_section_at(&g, -1e-9, LAMBDA), Err(GeometryError::OutOfRange { .. })));
        assert!(matches!(cross_section_at(&g, 91e-6, LAMBDA), Err(GeometryError::OutOfRange { .. })));
        assert!(cross_section_at(&g, 90e-6, LAMBDA).is_ok());
    }

    #[test]
    fn wavelength_outside_material_tables() {
        let g = ConverterGeometry::default();
        assert!(matches!(cross_section_at(&g, 2.0e-6, 2.0e-6), Err(GeometryError::Material(_))));
    }

    #[test]
    fn raster_is_mirror_symmetric_when_aligned() {
        let g = ConverterGeometry::default();
        for z in [0.0, 17e-6, 40e-6, 60e-6] {
            let r = cross_section_at(&g, z, LAMBDA).unwrap().rasterize();
            for j in 0..r.ny {
                for i in 0..r.nx / 2 {
                    let a = r.cells[j * r.nx + i];
                    let b = r.cells[j * r.nx + (r.nx - 1 - i)];
                    assert_eq!(a, b, "asymmetric at z={z:e}, i={i}, j={j}");
                }
            }
        }
    }

    #[test]
    fn later_rectangles_win() {
        let vac = library::vacuum();
        let si = library::silicon();
        let sio2 = library::silica();
        let domain = Domain { x_min: 0.0, x_max: 1.0, y_min: 0.0, y_max: 1.0 };
        let cs = CrossSection::new(
            domain,
            0.1,
            0.1,
            vac,
            vec![Rect::new(0.0, 1.0, 0.0, 1.0, si), Rect::new(0.0, 0.5, 0.0, 1.0, sio2.clone())],
        )
        .unwrap();
        let r = cs.rasterize();
        assert_eq!(r.material(0, 0), &sio2);
        assert_eq!(r.material(9, 0).name(), "silicon");
    }

    #[test]
    fn grid_validation() {
        let vac = library::vacuum();
        let domain = Domain { x_min: 0.0, x_max: 1.0, y_min: 0.0, y_max: 1.0 };
        assert!(CrossSection::new(domain, 0.2, 0.1, vac.clone(), vec![]).is_err());
        assert!(CrossSection::new(domain, 0.1, -0.1, vac.clone(), vec![]).is_err());
        assert!(CrossSection::new(domain, 0.03, 0.1, vac.clone(), vec![]).is_err());
        let outside = Rect::new(0.5, 1.5, 0.0, 1.0, vac.clone());
        assert!(matches!(
            CrossSection::new(domain, 0.1, 0.1, vac, vec![outside]),
            Err(GeometryError::RectangleOutsideDomain { index: 0, .. })
        ));
    }

    #[test]
    fn geometry_validation() {
        let mut g = ConverterGeometry::default();
        g.segmentation.z1 = 50e-6;
        assert!(g.validate().is_err());
        let mut g = ConverterGeometry::default();
        g.nanowire.gap = 900e-9;
        assert!(g.validate().is_err());
        let mut g = ConverterGeometry::default();
        g.pic.thickness = 0.0;
        assert!(g.validate().is_err());
    }
}
