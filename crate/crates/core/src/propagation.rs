//! Mode evolution along the hybrid converter and on-chip detection efficiency.
//!
//! The fundamental mode amplitude obeys `dA/dz = (-i·k(z) - α(z))·A` with
//! `α >= 0` the amplitude attenuation rate, normalized so `A(z, 0) = 1`.
//! Only `|A|²` enters the efficiency, and it is integrated with the
//! trapezoid rule on uniformly spaced slices:
//!
//! ```text
//! |A|²(z[j+1]) = |A|²(z[j]) · exp(-(α[j] + α[j+1])·Δz)
//! ```
//!
//! The two-segment efficiency is
//! `ODE = t_det·(1 - |A1|²) + t_det·t_pic·|A1|²·(1 - |A2|²)`, where `|A1|²` is
//! the survival from hairpin start `z1` to PIC end `z2`, `|A2|²` the survival
//! from `z2` to the end of the hairpin, and `t_det`, `t_pic` are tip power
//! transmissions.

use std::collections::HashMap;
use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::{Read, Write};
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    cross_section_at, cross_section_past_pic_end, ConverterGeometry, GeometryError, Raster,
};
use crate::mode_solver::{modal_absorption, solve_raster, SolverError, SolverOptions};

#[derive(Debug, Error)]
pub enum PropagationError {
    #[error("mode solve failed at z = {z:e} m: {source}")]
    Solver {
        z: f64,
        #[source]
        source: SolverError,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("z = {z:e} m outside profile [{start:e}, {end:e}] m")]
    OutOfRange { z: f64, start: f64, end: f64 },
    #[error("invalid absorption profile: {0}")]
    InvalidProfile(String),
    #[error("tip transmissions must lie in (0, 1], got t_det² = {t_det_sq}, t_pic² = {t_pic_sq}")]
    InvalidTips { t_det_sq: f64, t_pic_sq: f64 },
    #[error("need z1 < z2, got z1 = {z1:e}, z2 = {z2:e}")]
    SegmentOrder { z1: f64, z2: f64 },
    #[error("rotation sweep has no 0° entry")]
    MissingAlignedPoint,
    #[error("absorbed energy at 0° must be positive, got {0}")]
    NonPositiveAlignedEnergy(f64),
    #[error("invalid rotation sweep: {0}")]
    InvalidSweep(String),
    #[error("at least {min} slices required, got {got}")]
    TooFewSlices { min: usize, got: usize },
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("ODE not converged to {tol} at {slices} slices (last change {last_change:e})")]
    NonConvergence { tol: f64, slices: usize, last_change: f64 },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Slice {
    pub z: f64,
    /// Phase constant, rad/m.
    pub k: f64,
    /// Amplitude attenuation rate, 1/m.
    pub alpha: f64,
    pub n_eff: Complex64,
}

/// Sampled `k(z)`, `α(z)` with the trapezoid survival `|A(z)|²`.
///
/// Slice positions never decrease. A repeated `z` marks a geometric
/// discontinuity (the end of the PIC taper): the two slices hold the left and
/// right limits and the zero-length interval between them absorbs nothing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbsorptionProfile {
    slices: Vec<Slice>,
    log_survival: Vec<f64>,
    convergence_estimate: Option<f64>,
}

impl AbsorptionProfile {
    pub fn from_slices(slices: Vec<Slice>) -> Result<Self, PropagationError> {
        if slices.len() < 2 {
            return Err(PropagationError::InvalidProfile("need at least two slices".into()));
        }
        for s in &slices {
            if !(s.z.is_finite() && s.alpha.is_finite() && s.alpha >= 0.0) {
                return Err(PropagationError::InvalidProfile(format!(
                    "slice at z = {:e} has invalid α = {}",
                    s.z, s.alpha
                )));
            }
        }
        for w in slices.windows(3) {
            if w[0].z == w[1].z && w[1].z == w[2].z {
                return Err(PropagationError::InvalidProfile("z repeated more than twice".into()));
            }
        }
        if slices.windows(2).any(|w| w[1].z < w[0].z) {
            return Err(PropagationError::InvalidProfile("z must not decrease".into()));
        }
        if slices[slices.len() - 1].z <= slices[0].z {
            return Err(PropagationError::InvalidProfile("profile has zero length".into()));
        }
        let mut log_survival = Vec::with_capacity(slices.len());
        log_survival.push(0.0);
        for w in slices.windows(2) {
            let dz = w[1].z - w[0].z;
            let last = log_survival[log_survival.len() - 1];
            log_survival.push(last - (w[0].alpha + w[1].alpha) * dz);
        }
        Ok(Self { slices, log_survival, convergence_estimate: None })
    }

    /// Constant attenuation `alpha` over `[z_start, z_end]` on `intervals` uniform steps.
    pub fn uniform(
        z_start: f64,
        z_end: f64,
        intervals: usize,
        alpha: f64,
        n_eff: Complex64,
        wavelength: f64,
    ) -> Result<Self, PropagationError> {
        if intervals < 1 {
            return Err(PropagationError::TooFewSlices { min: 1, got: intervals });
        }
        let k = 2.0 * std::f64::consts::PI * n_eff.re / wavelength;
        let slices = (0..=intervals)
            .map(|i| Slice {
                z: z_start + (z_end - z_start) * (i as f64) / (intervals as f64),
                k,
                alpha,
                n_eff,
            })
            .collect();
        Self::from_slices(slices)
    }

    pub fn slices(&self) -> &[Slice] {
        &self.slices
    }

    /// `|A(z)|²` at each slice, starting at 1.
    pub fn survival(&self) -> Vec<f64> {
        self.log_survival.iter().map(|l| l.exp()).collect()
    }

    pub fn z_start(&self) -> f64 {
        self.slices[0].z
    }

    pub fn z_end(&self) -> f64 {
        self.slices[self.slices.len() - 1].z
    }

    /// `|ODE(n) - ODE(n/2)|` when the profile came from a slice-halving check.
    pub fn convergence_estimate(&self) -> Option<f64> {
        self.convergence_estimate
    }

    fn log_survival_at(&self, z: f64) -> Result<f64, PropagationError> {
        let (start, end) = (self.z_start(), self.z_end());
        if !(z >= start && z <= end) {
            return Err(PropagationError::OutOfRange { z, start, end });
        }
        let hi = self.slices.partition_point(|s| s.z < z);
        let b = &self.slices[hi];
        if b.z == z || hi == 0 {
            return Ok(self.log_survival[hi]);
        }
        // exact integral of the linearly interpolated α over [z_a, z]
        let a = &self.slices[hi - 1];
        let h = z - a.z;
        let slope = (b.alpha - a.alpha) / (b.z - a.z);
        Ok(self.log_survival[hi - 1] - 2.0 * (a.alpha * h + 0.5 * slope * h * h))
    }

    pub fn survival_at(&self, z: f64) -> Result<f64, PropagationError> {
        Ok(self.log_survival_at(z)?.exp())
    }

    /// `|A(a, b - a)|²`, the power surviving from `a` to `b`.
    pub fn transmission(&self, a: f64, b: f64) -> Result<f64, PropagationError> {
        Ok((self.log_survival_at(b)? - self.log_survival_at(a)?).exp())
    }

    /// Writes `z,k,alpha,survival` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), PropagationError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["z", "k", "alpha", "survival"])?;
        for (s, l) in self.slices.iter().zip(&self.log_survival) {
            w.write_record([s.z.to_string(), s.k.to_string(), s.alpha.to_string(), l.exp().to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TipTransmissions {
    pub t_det_sq: f64,
    pub t_pic_sq: f64,
}

impl Default for TipTransmissions {
    /// FDTD estimates for the silicon taper under a silicon nitride chiplet.
    fn default() -> Self {
        Self { t_det_sq: 0.995, t_pic_sq: 0.925 }
    }
}

impl TipTransmissions {
    pub fn new(t_det_sq: f64, t_pic_sq: f64) -> Result<Self, PropagationError> {
        let t = Self { t_det_sq, t_pic_sq };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), PropagationError> {
        let ok = |v: f64| v > 0.0 && v <= 1.0;
        if ok(self.t_det_sq) && ok(self.t_pic_sq) {
            Ok(())
        } else {
            Err(PropagationError::InvalidTips { t_det_sq: self.t_det_sq, t_pic_sq: self.t_pic_sq })
        }
    }
}

/// Two-segment efficiency from survivals `|A1|²` and `|A2|²`.
pub fn ode_from_survivals(a1: f64, a2: f64, tips: TipTransmissions) -> f64 {
    tips.t_det_sq * (1.0 - a1) + tips.t_det_sq * tips.t_pic_sq * a1 * (1.0 - a2)
}

pub fn compute_ode(
    profile: &AbsorptionProfile,
    z1: f64,
    z2: f64,
    tips: TipTransmissions,
) -> Result<f64, PropagationError> {
    tips.validate()?;
    if !(z1 < z2) {
        return Err(PropagationError::SegmentOrder { z1, z2 });
    }
    let a1 = profile.transmission(z1, z2)?;
    let a2 = profile.transmission(z2, profile.z_end())?;
    Ok(ode_from_survivals(a1, a2, tips))
}

/// Scales absorbed energies so the 0° entry equals `aligned_ode`.
/// Output order matches input order.
pub fn normalize_rotation_sweep(
    absorbed_energy: &[(f64, f64)],
    aligned_ode: f64,
) -> Result<Vec<(f64, f64)>, PropagationError> {
    if !(0.0..=1.0).contains(&aligned_ode) {
        return Err(PropagationError::InvalidSweep(format!("aligned ODE {aligned_ode} not in [0, 1]")));
    }
    if absorbed_energy.iter().any(|(a, u)| !a.is_finite() || !u.is_finite() || *u < 0.0) {
        return Err(PropagationError::InvalidSweep("angles and energies must be finite, energies >= 0".into()));
    }
    let u0 = absorbed_energy
        .iter()
        .find(|(angle, _)| *angle == 0.0)
        .map(|&(_, u)| u)
        .ok_or(PropagationError::MissingAlignedPoint)?;
    if u0 <= 0.0 {
        return Err(PropagationError::NonPositiveAlignedEnergy(u0));
    }
    Ok(absorbed_energy.iter().map(|&(a, u)| (a, aligned_ode * u / u0)).collect())
}

/// Reads `angle_deg,u_a` rows.
pub fn read_sweep_csv<R: Read>(input: R) -> Result<Vec<(f64, f64)>, PropagationError> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Row {
        angle_deg: f64,
        u_a: f64,
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["angle_deg", "u_a"] {
        return Err(PropagationError::InvalidSweep(format!(
            "expected header angle_deg,u_a, got {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    rdr.deserialize::<Row>()
        .map(|r| r.map(|r| (r.angle_deg, r.u_a)).map_err(PropagationError::from))
        .collect()
}

/// Writes `angle_deg,ode` rows.
pub fn write_rotation_csv<W: Write>(rows: &[(f64, f64)], out: W) -> Result<(), PropagationError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["angle_deg", "ode"])?;
    for (a, o) in rows {
        w.write_record([a.to_string(), o.to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Clone, Copy)]
struct SliceMode {
    k: f64,
    alpha: f64,
    n_eff: Complex64,
}

struct CacheEntry {
    raster: Raster,
    mode: SliceMode,
}

/// Builds absorption profiles for one geometry and wavelength.
///
/// Fundamental-mode solves are memoized by rasterized cross-section, so
/// z-invariant stretches of the structure cost one solve and slice counts
/// that refine a previous layout reuse every earlier slice.
pub struct OdeSimulator {
    geometry: ConverterGeometry,
    wavelength: f64,
    tips: TipTransmissions,
    solver: SolverOptions,
    cache: Arc<Mutex<HashMap<u64, Vec<CacheEntry>>>>,
}

impl OdeSimulator {
    pub fn new(geometry: ConverterGeometry, wavelength: f64) -> Result<Self, PropagationError> {
        geometry.validate()?;
        cross_section_at(&geometry, 0.0, wavelength)?;
        Ok(Self {
            geometry,
            wavelength,
            tips: TipTransmissions::default(),
            solver: SolverOptions::default(),
            cache: Arc::new(Mutex::new(HashMap::new())),
        })
    }

    /// Simulator for another geometry at the same wavelength, tips and solver
    /// settings. Solved cross-sections are shared, so sweeps over lengths
    /// only pay for rasters they have not met before.
    pub fn for_geometry(&self, geometry: ConverterGeometry) -> Result<Self, PropagationError> {
        geometry.validate()?;
        cross_section_at(&geometry, 0.0, self.wavelength)?;
        Ok(Self {
            geometry,
            wavelength: self.wavelength,
            tips: self.tips,
            solver: self.solver,
            cache: Arc::clone(&self.cache),
        })
    }

    pub fn with_tips(mut self, tips: TipTransmissions) -> Result<Self, PropagationError> {
        tips.validate()?;
        self.tips = tips;
        Ok(self)
    }

    pub fn with_solver_options(mut self, solver: SolverOptions) -> Self {
        self.solver = solver;
        self
    }

    pub fn geometry(&self) -> &ConverterGeometry {
        &self.geometry
    }

    pub fn tips(&self) -> TipTransmissions {
        self.tips
    }

    /// Number of distinct cross-sections solved so far, across simulators sharing the cache.
    pub fn solves(&self) -> usize {
        self.cache.lock().expect("cache lock").values().map(Vec::len).sum()
    }

    /// Segment boundaries inside the hairpin: `z1`, the taper start when it
    /// falls inside, `z2` and the hairpin end.
    fn breakpoints(&self) -> Vec<f64> {
        let s = self.geometry.segmentation;
        let mut b = vec![s.z1];
        let taper = self.geometry.taper_start();
        if taper > s.z1 && taper < s.z2 {
            b.push(taper);
        }
        b.push(s.z2);
        if s.delta_z2 > 0.0 {
            b.push(self.geometry.length());
        }
        b
    }

    /// Intervals per segment, proportional to length, at least one each.
    fn layout(&self, n_slices: usize) -> Vec<usize> {
        let b = self.breakpoints();
        let total = b[b.len() - 1] - b[0];
        b.windows(2)
            .map(|w| (((w[1] - w[0]) / total * n_slices as f64).round() as usize).max(1))
            .collect()
    }

    fn positions(&self, layout: &[usize]) -> Vec<f64> {
        let b = self.breakpoints();
        let z2 = self.geometry.segmentation.z2;
        let mut zs = Vec::new();
        for (seg, &m) in b.windows(2).zip(layout) {
            let (a, c) = (seg[0], seg[1]);
            let first = if zs.is_empty() || a == z2 { 0 } else { 1 };
            for i in first..=m {
                zs.push(if i == m { c } else { a + (c - a) * (i as f64) / (m as f64) });
            }
        }
        zs
    }

    fn raster_at(&self, z: f64, past_pic_end: bool) -> Result<Raster, PropagationError> {
        let cs = if past_pic_end {
            cross_section_past_pic_end(&self.geometry, self.wavelength)?
        } else {
            cross_section_at(&self.geometry, z, self.wavelength)?
        };
        Ok(cs.rasterize())
    }

    fn key(raster: &Raster) -> u64 {
        let mut h = DefaultHasher::new();
        raster.cells.hash(&mut h);
        for m in &raster.palette {
            m.name().hash(&mut h);
        }
        h.finish()
    }

    fn lookup(&self, raster: &Raster) -> Option<SliceMode> {
        let cache = self.cache.lock().expect("cache lock");
        cache
            .get(&Self::key(raster))?
            .iter()
            .find(|e| e.raster == *raster)
            .map(|e| e.mode)
    }

    fn solve_slices(&self, zs: &[(f64, bool)]) -> Result<Vec<SliceMode>, PropagationError> {
        let rasters: Vec<Raster> = zs
            .iter()
            .map(|&(z, after)| self.raster_at(z, after))
            .collect::<Result<_, _>>()?;
        let mut pending: Vec<usize> = Vec::new();
        for (i, r) in rasters.iter().enumerate() {
            if self.lookup(r).is_none() && !pending.iter().any(|&p| rasters[p] == *r) {
                pending.push(i);
            }
        }
        let solved: Vec<Result<SliceMode, PropagationError>> = pending
            .par_iter()
            .map(|&i| {
                let modes = solve_raster(&rasters[i], self.wavelength, 1, &self.solver)
                    .map_err(|source| PropagationError::Solver { z: zs[i].0, source })?;
                let m = &modes[0];
                Ok(SliceMode { k: m.propagation_constant(), alpha: modal_absorption(m), n_eff: m.n_eff })
            })
            .collect();
        {
            let mut cache = self.cache.lock().expect("cache lock");
            for (&i, mode) in pending.iter().zip(solved) {
                let mode = mode?;
                cache
                    .entry(Self::key(&rasters[i]))
                    .or_default()
                    .push(CacheEntry { raster: rasters[i].clone(), mode });
            }
        }
        Ok(rasters
            .iter()
            .map(|r| self.lookup(r).expect("every raster solved"))
            .collect())
    }

    fn profile_for_layout(&self, layout: &[usize]) -> Result<AbsorptionProfile, PropagationError> {
        let z2 = self.geometry.segmentation.z2;
        let mut points: Vec<(f64, bool)> = Vec::new();
        for z in self.positions(layout) {
            let after = z == z2 && points.iter().any(|&(p, _)| p == z2);
            points.push((z, after));
        }
        let modes = self.solve_slices(&points)?;
        let slices = points
            .iter()
            .zip(modes)
            .map(|(&(z, _), m)| Slice { z, k: m.k, alpha: m.alpha, n_eff: m.n_eff })
            .collect();
        AbsorptionProfile::from_slices(slices)
    }

    fn ode_of(&self, profile: &AbsorptionProfile) -> Result<f64, PropagationError> {
        let s = self.geometry.segmentation;
        compute_ode(profile, s.z1, s.z2, self.tips)
    }

    /// Profile on `n_slices` uniform intervals spread over the hairpin
    /// segments, with the estimate `|ODE(n) - ODE(n/2)|` attached.
    pub fn profile(&self, n_slices: usize) -> Result<AbsorptionProfile, PropagationError> {
        if n_slices < 2 {
            return Err(PropagationError::TooFewSlices { min: 2, got: n_slices });
        }
        let layout = self.layout(n_slices);
        let mut profile = self.profile_for_layout(&layout)?;
        let half: Vec<usize> = layout.iter().map(|&m| m.div_ceil(2)).collect();
        if half != layout {
            let coarse = self.profile_for_layout(&half)?;
            profile.convergence_estimate =
                Some((self.ode_of(&profile)? - self.ode_of(&coarse)?).abs());
        }
        Ok(profile)
    }

    pub fn ode(&self, n_slices: usize) -> Result<(f64, AbsorptionProfile), PropagationError> {
        let p = self.profile(n_slices)?;
        Ok((self.ode_of(&p)?, p))
    }

    /// Doubles the slice count from 8 until successive efficiencies differ by
    /// less than `tol`. Returns the last efficiency, its profile and slice count.
    pub fn converge(&self, tol: f64) -> Result<ConvergedOde, PropagationError> {
        if !(tol > 0.0) {
            return Err(PropagationError::InvalidTolerance(tol));
        }
        let base = self.layout(8);
        let mut n = 8usize;
        let mut layout = base;
        let mut previous = self.ode_of(&self.profile_for_layout(&layout)?)?;
        loop {
            let next_n = n * 2;
            if next_n > 1024 {
                return Err(PropagationError::NonConvergence {
                    tol,
                    slices: n,
                    last_change: f64::NAN,
                });
            }
            layout = layout.iter().map(|m| m * 2).collect();
            let mut profile = self.profile_for_layout(&layout)?;
            let ode = self.ode_of(&profile)?;
            let change = (ode - previous).abs();
            profile.convergence_estimate = Some(change);
            n = next_n;
            if change < tol {
                return Ok(ConvergedOde { ode, slices: n, change, profile });
            }
            if n * 2 > 1024 {
                return Err(PropagationError::NonConvergence { tol, slices: n, last_change: change });
            }
            previous = ode;
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConvergedOde {
    pub ode: f64,
    pub slices: usize,
    pub change: f64,
    pub profile: AbsorptionProfile,
}

pub fn build_absorption_profile(
    geom: &ConverterGeometry,
    wavelength: f64,
    n_slices: usize,
) -> Result<AbsorptionProfile, PropagationError> {
    OdeSimulator::new(geom.clone(), wavelength)?.profile(n_slices)
}

/// Efficiency with slice doubling from 8 up to 1024, default tip transmissions.
pub fn ode_convergence(
    geom: &ConverterGeometry,
    wavelength: f64,
    tol: f64,
) -> Result<(f64, usize), PropagationError> {
    let c = OdeSimulator::new(geom.clone(), wavelength)?.converge(tol)?;
    Ok((c.ode, c.slices))
}

/// APPROXIMATE rotation study: each angle rebuilds the profile with the
/// detector shifted laterally slice by slice. Mode coupling between the
/// fundamental and higher-order modes is ignored, so this cannot reproduce
/// features driven by that coupling. Prefer [`normalize_rotation_sweep`] on
/// absorbed energies from a full propagation tool.
pub fn approximate_rotation_sweep(
    geom: &ConverterGeometry,
    wavelength: f64,
    angles_deg: &[f64],
    n_slices: usize,
    tips: TipTransmissions,
) -> Result<Vec<(f64, f64)>, PropagationError> {
    angles_deg
        .iter()
        .map(|&angle| {
            let mut g = geom.clone();
            g.rotation_offset_deg = angle;
            let sim = OdeSimulator::new(g, wavelength)?.with_tips(tips)?;
            Ok((angle, sim.ode(n_slices)?.0))
        })
        .collect()
}
