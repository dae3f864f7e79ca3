//! Plateau, switching current, linearity and extinction.

use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::trace::expect_header;
use super::{AnalysisError, CountTrace, IvTrace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlateauCriteria {
    /// Largest neighbor-to-neighbor rate step, as a fraction of the interval mean.
    pub flatness: f64,
    pub min_points: usize,
    /// Interval mean rate must exceed this multiple of the mean dark rate.
    pub dark_margin: f64,
}

impl Default for PlateauCriteria {
    fn default() -> Self {
        Self { flatness: 0.05, min_points: 3, dark_margin: 10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Plateau {
    pub bias_lo: f64,
    pub bias_hi: f64,
    pub points: usize,
    pub mean_rate: f64,
}

/// Longest contiguous run of points meeting `criteria`; on equal length the
/// higher-bias run wins. `None` when nothing qualifies.
pub fn detect_plateau(
    trace: &CountTrace,
    criteria: &PlateauCriteria,
) -> Result<Option<Plateau>, AnalysisError> {
    const MIN_TRACE: usize = 5;
    if trace.len() < MIN_TRACE {
        return Err(AnalysisError::InsufficientPoints { needed: MIN_TRACE, got: trace.len() });
    }
    let pts = trace.points();
    let need = criteria.min_points.max(2);
    let mut best: Option<Plateau> = None;
    for lo in 0..pts.len() {
        let (mut sum, mut dark, mut step) = (0.0, 0.0, 0.0f64);
        for hi in lo..pts.len() {
            sum += pts[hi].photon_rate;
            dark += pts[hi].dark_rate;
            if hi > lo {
                step = step.max((pts[hi].photon_rate - pts[hi - 1].photon_rate).abs());
            }
            let n = hi - lo + 1;
            if n < need {
                continue;
            }
            let mean = sum / n as f64;
            let ok = step <= criteria.flatness * mean && mean > criteria.dark_margin * (dark / n as f64);
            let longer = best.is_none_or(|b| n >= b.points);
            if ok && longer {
                best = Some(Plateau { bias_lo: pts[lo].bias, bias_hi: pts[hi].bias, points: n, mean_rate: mean });
            }
        }
    }
    Ok(best)
}

/// Default voltage criterion for leaving the superconducting branch.
pub const DEFAULT_V_THRESHOLD: f64 = 50e-6;

/// Bias of the last point below `v_threshold` before the first point at or above it.
pub fn switching_current(iv: &IvTrace, v_threshold: f64) -> Result<f64, AnalysisError> {
    let pts = iv.points();
    match pts.iter().position(|p| p.voltage.abs() >= v_threshold) {
        Some(0) => Err(AnalysisError::NoSwitch { v_threshold, at_origin: true }),
        Some(i) => Ok(pts[i - 1].bias),
        None => Err(AnalysisError::NoSwitch { v_threshold, at_origin: false }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearityFit {
    /// Decades of rate per decade of transmission; 1 for single-photon detection.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points_used: usize,
}

/// Least squares of `log10(rate)` against `−dB/10`, over points above `floor`.
pub fn linearity_fit(points: &[(f64, f64)], floor: f64) -> Result<LinearityFit, AnalysisError> {
    let used: Vec<(f64, f64)> = points
        .iter()
        .filter(|(db, rate)| db.is_finite() && rate.is_finite() && *rate > floor && *rate > 0.0)
        .map(|&(db, rate)| (-db / 10.0, rate.log10()))
        .collect();
    if used.len() < 3 {
        return Err(AnalysisError::InsufficientPoints { needed: 3, got: used.len() });
    }
    let n = used.len() as f64;
    let mx = used.iter().map(|p| p.0).sum::<f64>() / n;
    let my = used.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = used.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = used.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = used.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= f64::EPSILON * used.iter().map(|p| p.0 * p.0).sum::<f64>() {
        return Err(AnalysisError::DegenerateFit("all attenuations are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = used.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    // a flat response is fitted perfectly
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(LinearityFit { slope, intercept, r_squared, points_used: used.len() })
}

/// Reads `attenuation_db,rate_hz` rows.
pub fn read_linearity_csv<R: Read>(input: R) -> Result<Vec<(f64, f64)>, AnalysisError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    expect_header(&mut reader, &["attenuation_db", "rate_hz"])?;
    Ok(reader.deserialize().collect::<Result<Vec<(f64, f64)>, _>>()?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "db", rename_all = "snake_case")]
pub enum Extinction {
    Measured(f64),
    /// No uncoupled counts: bounded by one count per gate.
    LowerBound(f64),
}

impl Extinction {
    pub fn db(&self) -> f64 {
        match *self {
            Extinction::Measured(db) | Extinction::LowerBound(db) => db,
        }
    }
}

impl fmt::Display for Extinction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extinction::Measured(db) => write!(f, "{db:.2} dB"),
            Extinction::LowerBound(db) => write!(f, "> {db:.2} dB"),
        }
    }
}

/// `10·log10(coupled / uncoupled)`; a zero uncoupled rate falls back to the
/// counter floor `1 / integration_time`.
pub fn extinction_ratio(
    coupled_rate: f64,
    uncoupled_rate: f64,
    integration_time: f64,
) -> Result<Extinction, AnalysisError> {
    if !(uncoupled_rate.is_finite() && uncoupled_rate >= 0.0) {
        return Err(AnalysisError::InvalidRate(uncoupled_rate));
    }
    if !(coupled_rate.is_finite() && coupled_rate > 0.0) {
        return Err(AnalysisError::InvalidRate(coupled_rate));
    }
    if uncoupled_rate > 0.0 {
        return Ok(Extinction::Measured(10.0 * (coupled_rate / uncoupled_rate).log10()));
    }
    if !(integration_time.is_finite() && integration_time > 0.0) {
        return Err(AnalysisError::InvalidTrace(format!(
            "integration time must be positive, got {integration_time}"
        )));
    }
    let floor = 1.0 / integration_time;
    Ok(Extinction::LowerBound(10.0 * (coupled_rate / floor).log10()))
}
