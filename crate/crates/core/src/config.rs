//! Run configuration: a strict JSON schema with unit-aware quantities.
//!
//! Unknown keys are rejected everywhere. Lengths, currents, times, powers
//! and rates accept a bare SI number or a suffixed string (`"220 nm"`).
//! Materials are referenced by name, either from the built-in library or
//! from the top-level `materials` table. Relative file paths resolve
//! against the directory holding the config file.
//!
//! A geometry is either complete, or `{"preset": "paper_default", ...}`
//! with any subset of fields overriding the preset.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::analysis::PlateauCriteria;
use crate::calibration::LossBudget;
use crate::geometry::{
    Claddings, ConverterGeometry, DetectorWaveguide, GapLayer, Mesh, Nanowire, PicWaveguide,
    Segmentation,
};
use crate::materials::{library, DispersionPoint, Material, MaterialError};
use crate::propagation::TipTransmissions;
use crate::units::{Amperes, Hertz, Meters, Seconds, Volts, Watts};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("unknown material {0:?}; define it under \"materials\" or use one of {1:?}")]
    UnknownMaterial(String, &'static [&'static str]),
    #[error("material {name:?}: {source}")]
    Material {
        name: String,
        #[source]
        source: MaterialError,
    },
    #[error("unknown geometry preset {0:?}; available: \"paper_default\"")]
    UnknownPreset(String),
    #[error("missing section \"{0}\" for this command")]
    MissingSection(&'static str),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionRow {
    pub wavelength: Meters,
    pub n: f64,
    #[serde(default)]
    pub k: f64,
}

/// `{"n": .., "k": ..}` for a constant index or `{"table": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<DispersionRow>>,
}

impl MaterialSpec {
    fn build(&self, name: &str) -> Result<Material, ConfigError> {
        let wrap = |source| ConfigError::Material { name: name.to_string(), source };
        match (self.n, &self.table) {
            (Some(n), None) => Material::constant(name, n, self.k.unwrap_or(0.0)).map_err(wrap),
            (None, Some(rows)) if self.k.is_none() => {
                let table = rows
                    .iter()
                    .map(|r| DispersionPoint { wavelength: r.wavelength.get(), n: r.n, k: r.k })
                    .collect();
                Material::new(name, table).map_err(wrap)
            }
            _ => Err(ConfigError::Invalid(format!(
                "material {name:?} needs either \"n\" (and optional \"k\") or \"table\""
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicSpec {
    pub thickness: Meters,
    pub width_start: Meters,
    pub width_end: Meters,
    pub taper_length: Meters,
    pub material: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    pub thickness: Meters,
    pub width: Meters,
    pub material: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NanowireSpec {
    pub thickness: Meters,
    pub wire_width: Meters,
    pub gap: Meters,
    pub material: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapLayerSpec {
    pub thickness: Meters,
    pub material: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CladdingSpec {
    pub above: String,
    pub below: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentationSpec {
    pub z1: Meters,
    pub z2: Meters,
    pub delta_z2: Meters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    pub dx: Meters,
    pub dy: Meters,
    pub padding_x: Meters,
    pub padding_y: Meters,
}

/// Fully specified converter geometry, materials by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub pic: PicSpec,
    pub detector: DetectorSpec,
    pub nanowire: NanowireSpec,
    pub gap_layer: GapLayerSpec,
    pub claddings: CladdingSpec,
    pub segmentation: SegmentationSpec,
    pub rotation_offset_deg: f64,
    pub pivot_z: Meters,
    pub mesh: MeshSpec,
}

impl GeometrySpec {
    pub fn paper_default() -> Self {
        let g = ConverterGeometry::default();
        let m = |x: f64| Meters(x);
        let name = |mat: &Material| mat.name().to_string();
        Self {
            pic: PicSpec {
                thickness: m(g.pic.thickness),
                width_start: m(g.pic.width_start),
                width_end: m(g.pic.width_end),
                taper_length: m(g.pic.taper_length),
                material: name(&g.pic.material),
            },
            detector: DetectorSpec {
                thickness: m(g.detector.thickness),
                width: m(g.detector.width),
                material: name(&g.detector.material),
            },
            nanowire: NanowireSpec {
                thickness: m(g.nanowire.thickness),
                wire_width: m(g.nanowire.wire_width),
                gap: m(g.nanowire.gap),
                material: name(&g.nanowire.material),
            },
            gap_layer: GapLayerSpec {
                thickness: m(g.gap_layer.thickness),
                material: name(&g.gap_layer.material),
            },
            claddings: CladdingSpec { above: name(&g.claddings.above), below: name(&g.claddings.below) },
            segmentation: SegmentationSpec {
                z1: m(g.segmentation.z1),
                z2: m(g.segmentation.z2),
                delta_z2: m(g.segmentation.delta_z2),
            },
            rotation_offset_deg: g.rotation_offset_deg,
            pivot_z: m(g.pivot_z),
            mesh: MeshSpec {
                dx: m(g.mesh.dx),
                dy: m(g.mesh.dy),
                padding_x: m(g.mesh.padding_x),
                padding_y: m(g.mesh.padding_y),
            },
        }
    }

    /// Reads a geometry object, expanding `"preset"` with overrides.
    pub fn from_value(value: Value) -> Result<Self, serde_json::Error> {
        let Value::Object(mut map) = value else {
            return serde_json::from_value(value);
        };
        match map.remove("preset") {
            None => serde_json::from_value(Value::Object(map)),
            Some(Value::String(p)) if p == "paper_default" => {
                let mut base = serde_json::to_value(Self::paper_default())?;
                merge(&mut base, Value::Object(map));
                serde_json::from_value(base)
            }
            Some(other) => Err(serde::de::Error::custom(format!(
                "unknown geometry preset {other}; available: \"paper_default\""
            ))),
        }
    }

    pub fn build(&self, materials: &MaterialTable) -> Result<ConverterGeometry, ConfigError> {
        let g = ConverterGeometry {
            pic: PicWaveguide {
                thickness: self.pic.thickness.get(),
                width_start: self.pic.width_start.get(),
                width_end: self.pic.width_end.get(),
                taper_length: self.pic.taper_length.get(),
                material: materials.get(&self.pic.material)?,
            },
            detector: DetectorWaveguide {
                thickness: self.detector.thickness.get(),
                width: self.detector.width.get(),
                material: materials.get(&self.detector.material)?,
            },
            nanowire: Nanowire {
                thickness: self.nanowire.thickness.get(),
                wire_width: self.nanowire.wire_width.get(),
                gap: self.nanowire.gap.get(),
                material: materials.get(&self.nanowire.material)?,
            },
            gap_layer: GapLayer {
                thickness: self.gap_layer.thickness.get(),
                material: materials.get(&self.gap_layer.material)?,
            },
            claddings: Claddings {
                above: materials.get(&self.claddings.above)?,
                below: materials.get(&self.claddings.below)?,
            },
            segmentation: Segmentation {
                z1: self.segmentation.z1.get(),
                z2: self.segmentation.z2.get(),
                delta_z2: self.segmentation.delta_z2.get(),
            },
            rotation_offset_deg: self.rotation_offset_deg,
            pivot_z: self.pivot_z.get(),
            mesh: Mesh {
                dx: self.mesh.dx.get(),
                dy: self.mesh.dy.get(),
                padding_x: self.mesh.padding_x.get(),
                padding_y: self.mesh.padding_y.get(),
            },
        };
        g.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(g)
    }
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn geometry_field<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<GeometrySpec>, D::Error> {
    let v = Option::<Value>::deserialize(d)?;
    v.map(|v| GeometrySpec::from_value(v).map_err(serde::de::Error::custom)).transpose()
}

/// Constant attenuation over the whole hairpin; a closed-form check of the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformAbsorberSpec {
    /// Amplitude attenuation, 1/m.
    pub alpha: f64,
    pub n_eff: f64,
    pub z1: Meters,
    pub z2: Meters,
    /// End of the hairpin.
    pub end: Meters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub wavelength: Meters,
    #[serde(default, deserialize_with = "geometry_field", skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometrySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform_absorber: Option<UniformAbsorberSpec>,
    /// Physics default: 0.995 / 0.925, echoed in the report when omitted.
    #[serde(default)]
    pub tips: Option<TipTransmissions>,
    /// Fixed interval count; otherwise slices double until `tol` is met.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slices: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotationConfig {
    /// CSV with header `angle_deg,u_a`.
    pub sweep: PathBuf,
    pub aligned_ode: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSpec {
    pub p_in: Watts,
    pub wavelength: Meters,
    pub db_fiber: f64,
    pub db_coupler: f64,
    pub db_attenuator: f64,
    #[serde(default)]
    pub db_extra: f64,
    pub db_fiber_sigma: f64,
    #[serde(default)]
    pub db_coupler_sigma: f64,
    #[serde(default)]
    pub db_attenuator_sigma: f64,
    #[serde(default)]
    pub db_extra_sigma: f64,
}

impl BudgetSpec {
    pub fn build(&self) -> Result<LossBudget, ConfigError> {
        let b = LossBudget {
            p_in: self.p_in.get(),
            wavelength: self.wavelength.get(),
            db_fiber: self.db_fiber,
            db_coupler: self.db_coupler,
            db_attenuator: self.db_attenuator,
            db_extra: self.db_extra,
            db_fiber_sigma: self.db_fiber_sigma,
            db_coupler_sigma: self.db_coupler_sigma,
            db_attenuator_sigma: self.db_attenuator_sigma,
            db_extra_sigma: self.db_extra_sigma,
        };
        b.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractConfig {
    /// CSV with header `bias_a,photon_rate_hz,dark_rate_hz`.
    pub trace: PathBuf,
    pub integration_time: Seconds,
    pub bias: Amperes,
    pub budget: BudgetSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IvSpec {
    pub file: PathBuf,
    /// Default 50 µV, echoed when omitted.
    #[serde(default)]
    pub v_threshold: Option<Volts>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JitterSpec {
    pub file: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearitySpec {
    pub file: PathBuf,
    /// Rates at or below this floor are excluded from the fit.
    pub floor: Hertz,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtinctionSpec {
    pub coupled_rate: Hertz,
    pub uncoupled_rate: Hertz,
    pub integration_time: Seconds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountsSpec {
    pub trace: PathBuf,
    pub integration_time: Seconds,
    /// Operating bias for the dark-count rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<Amperes>,
    /// Plateau thresholds; defaults 5 %, 3 points, 10x dark, echoed when omitted.
    #[serde(default)]
    pub plateau: Option<PlateauCriteria>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iv: Option<IvSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jitter: Option<JitterSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linearity: Option<LinearitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extinction: Option<ExtinctionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<CountsSpec>,
}

impl AnalyzeConfig {
    pub fn is_empty(&self) -> bool {
        self.iv.is_none()
            && self.jitter.is_none()
            && self.linearity.is_none()
            && self.extinction.is_none()
            && self.counts.is_none()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Output directory; `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub materials: BTreeMap<String, MaterialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate_ode: Option<SimulateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<RotationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extract_ode: Option<ExtractConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analyze: Option<AnalyzeConfig>,
}

/// Built-in materials plus the config's own definitions (which win on name clashes).
#[derive(Debug, Clone)]
pub struct MaterialTable {
    custom: BTreeMap<String, Material>,
}

impl MaterialTable {
    pub fn new(specs: &BTreeMap<String, MaterialSpec>) -> Result<Self, ConfigError> {
        let custom = specs
            .iter()
            .map(|(name, spec)| Ok((name.clone(), spec.build(name)?)))
            .collect::<Result<_, ConfigError>>()?;
        Ok(Self { custom })
    }

    pub fn get(&self, name: &str) -> Result<Material, ConfigError> {
        if let Some(m) = self.custom.get(name) {
            return Ok(m.clone());
        }
        library::by_name(name).ok_or_else(|| ConfigError::UnknownMaterial(name.to_string(), library::NAMES))
    }
}

/// A parsed config together with the directory its relative paths refer to.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
    pub materials: MaterialTable,
}

impl LoadedConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_str(&text, base_dir).map_err(|e| match e {
            ConfigError::Parse { source, .. } => ConfigError::Parse { path: path.to_path_buf(), source },
            other => other,
        })
    }

    pub fn from_str(text: &str, base_dir: PathBuf) -> Result<Self, ConfigError> {
        let config: RunConfig = serde_json::from_str(text)
            .map_err(|source| ConfigError::Parse { path: PathBuf::from("<config>"), source })?;
        let materials = MaterialTable::new(&config.materials)?;
        Ok(Self { config, base_dir, materials })
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Opens a referenced data file.
    pub fn open(&self, path: &Path) -> Result<std::fs::File, ConfigError> {
        let full = self.resolve(path);
        std::fs::File::open(&full).map_err(|source| ConfigError::Io { path: full, source })
    }
}
