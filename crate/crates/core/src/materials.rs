//! Dispersive optical materials.
//!
//! A [`Material`] is a tabulated complex refractive index `n - i·k` over
//! wavelength. Lookups interpolate linearly between knots and refuse to
//! extrapolate. The permittivity follows the forward-field convention
//! `exp(-iβz)`, so `ε = (n - i·k)²` and absorbing media have `Im ε < 0`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaterialError {
    #[error("material {name:?}: wavelength {wavelength:e} m outside table range [{min:e}, {max:e}] m")]
    OutOfRange {
        name: String,
        wavelength: f64,
        min: f64,
        max: f64,
    },
    #[error("material {name:?}: {reason}")]
    InvalidTable { name: String, reason: String },
}

/// One knot of a dispersion table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionPoint {
    pub wavelength: f64,
    pub n: f64,
    pub k: f64,
}

/// Complex refractive index `n - i·k` at one wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefractiveIndex {
    pub n: f64,
    pub k: f64,
}

impl RefractiveIndex {
    pub fn permittivity(&self) -> Complex64 {
        let m = Complex64::new(self.n, -self.k);
        m * m
    }

    pub fn is_absorbing(&self) -> bool {
        self.k > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Material {
    name: String,
    table: Vec<DispersionPoint>,
}

impl Material {
    pub fn new(name: impl Into<String>, table: Vec<DispersionPoint>) -> Result<Self, MaterialError> {
        let name = name.into();
        let invalid = |reason: &str| MaterialError::InvalidTable {
            name: name.clone(),
            reason: reason.to_string(),
        };
        if table.is_empty() {
            return Err(invalid("dispersion table is empty"));
        }
        for p in &table {
            if !(p.wavelength.is_finite() && p.wavelength > 0.0) {
                return Err(invalid("wavelengths must be finite and positive"));
            }
            if !(p.n.is_finite() && p.k.is_finite()) {
                return Err(invalid("n and k must be finite"));
            }
            if p.k < 0.0 {
                return Err(invalid("k must be non-negative (passive media only)"));
            }
        }
        if table.windows(2).any(|w| w[1].wavelength <= w[0].wavelength) {
            return Err(invalid("wavelengths must be strictly increasing"));
        }
        Ok(Self { name, table })
    }

    /// A non-dispersive material valid from 100 nm to 100 µm.
    pub fn constant(name: impl Into<String>, n: f64, k: f64) -> Result<Self, MaterialError> {
        Self::new(
            name,
            vec![
                DispersionPoint { wavelength: 100e-9, n, k },
                DispersionPoint { wavelength: 100e-6, n, k },
            ],
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn table(&self) -> &[DispersionPoint] {
        &self.table
    }

    pub fn wavelength_range(&self) -> (f64, f64) {
        (self.table[0].wavelength, self.table[self.table.len() - 1].wavelength)
    }

    pub fn at(&self, wavelength: f64) -> Result<RefractiveIndex, MaterialError> {
        material_at(self, wavelength)
    }

    pub fn permittivity(&self, wavelength: f64) -> Result<Complex64, MaterialError> {
        Ok(self.at(wavelength)?.permittivity())
    }
}

/// Linearly interpolated `(n, k)` of `material` at `wavelength`.
pub fn material_at(material: &Material, wavelength: f64) -> Result<RefractiveIndex, MaterialError> {
    let (min, max) = material.wavelength_range();
    if !(wavelength >= min && wavelength <= max) {
        return Err(MaterialError::OutOfRange {
            name: material.name.clone(),
            wavelength,
            min,
            max,
        });
    }
    let table = &material.table;
    let hi = table.partition_point(|p| p.wavelength < wavelength);
    let b = table[hi];
    if b.wavelength == wavelength || hi == 0 {
        return Ok(RefractiveIndex { n: b.n, k: b.k });
    }
    let a = table[hi - 1];
    let t = (wavelength - a.wavelength) / (b.wavelength - a.wavelength);
    Ok(RefractiveIndex {
        n: a.n + t * (b.n - a.n),
        k: a.k + t * (b.k - a.k),
    })
}

/// Built-in material tables for the telecom O to L bands (1.26 to 1.65 µm).
pub mod library {
    use super::{DispersionPoint, Material};

    fn tabulated(name: &str, rows: &[(f64, f64, f64)]) -> Material {
        let table = rows
            .iter()
            .map(|&(um, n, k)| DispersionPoint { wavelength: um * 1e-6, n, k })
            .collect();
        Material::new(name, table).expect("built-in table is valid")
    }

    pub fn vacuum() -> Material {
        Material::constant("vacuum", 1.0, 0.0).expect("valid")
    }

    pub fn silicon() -> Material {
        tabulated(
            "silicon",
            &[
                (1.26, 3.5087, 0.0),
                (1.31, 3.5030, 0.0),
                (1.40, 3.4935, 0.0),
                (1.50, 3.4800, 0.0),
                (1.55, 3.4757, 0.0),
                (1.60, 3.4600, 0.0),
                (1.65, 3.4560, 0.0),
            ],
        )
    }

    pub fn silica() -> Material {
        tabulated(
            "silica",
            &[
                (1.26, 1.4475, 0.0),
                (1.31, 1.4469, 0.0),
                (1.55, 1.4440, 0.0),
                (1.57, 1.4440, 0.0),
                (1.65, 1.4430, 0.0),
            ],
        )
    }

    /// Stoichiometric LPCVD silicon nitride.
    pub fn silicon_nitride() -> Material {
        tabulated(
            "silicon_nitride",
            &[
                (1.26, 2.0010, 0.0),
                (1.31, 2.0000, 0.0),
                (1.55, 1.9963, 0.0),
                (1.57, 1.9960, 0.0),
                (1.65, 1.9950, 0.0),
            ],
        )
    }

    /// PLACEHOLDER optical constants for thin-film NbTiN.
    ///
    /// These are literature-style values for a ~10 nm film, not measured
    /// data for any particular device. Replace them with ellipsometry of
    /// the actual film before trusting absolute efficiencies.
    pub fn nbtin_placeholder() -> Material {
        tabulated(
            "nbtin_placeholder",
            &[(1.26, 4.60, 5.20), (1.31, 4.70, 5.30), (1.55, 5.20, 5.80), (1.65, 5.40, 6.00)],
        )
    }

    pub fn by_name(name: &str) -> Option<Material> {
        Some(match name {
            "vacuum" | "air" => vacuum(),
            "silicon" => silicon(),
            "silica" => silica(),
            "silicon_nitride" => silicon_nitride(),
            "nbtin_placeholder" => nbtin_placeholder(),
            _ => return None,
        })
    }

    pub const NAMES: &[&str] = &["vacuum", "silicon", "silica", "silicon_nitride", "nbtin_placeholder"];
}
