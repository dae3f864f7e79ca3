//! Timing-jitter histograms and their Gaussian-plus-background fit.

use std::io::Read;

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::{Dyn, OMatrix, OVector, Owned, U4, Vector4};
use serde::Serialize;

use super::trace::expect_header;
use super::AnalysisError;

/// `2·sqrt(2·ln 2)`
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;
pub const MIN_NONEMPTY_BINS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JitterHistogram {
    /// Center of the first bin, seconds.
    pub start: f64,
    pub bin_width: f64,
    pub counts: Vec<u64>,
}

impl JitterHistogram {
    pub fn new(start: f64, bin_width: f64, counts: Vec<u64>) -> Result<Self, AnalysisError> {
        if !(bin_width.is_finite() && bin_width > 0.0) {
            return Err(AnalysisError::InvalidHistogram(format!("bin width must be positive, got {bin_width}")));
        }
        if !start.is_finite() {
            return Err(AnalysisError::InvalidHistogram("non-finite start time".into()));
        }
        if counts.iter().all(|&c| c == 0) {
            return Err(AnalysisError::InvalidHistogram("histogram is empty".into()));
        }
        Ok(Self { start, bin_width, counts })
    }

    /// Bins events of `times` between `start - width/2` and the last bin edge.
    pub fn from_events(times: &[f64], start: f64, bin_width: f64, bins: usize) -> Result<Self, AnalysisError> {
        let mut counts = vec![0u64; bins];
        let lo = start - 0.5 * bin_width;
        for &t in times {
            let k = ((t - lo) / bin_width).floor();
            if k >= 0.0 && (k as usize) < bins {
                counts[k as usize] += 1;
            }
        }
        Self::new(start, bin_width, counts)
    }

    /// Reads `time_s,counts` rows; bin centers must be uniformly spaced.
    pub fn from_csv<R: Read>(input: R) -> Result<Self, AnalysisError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        expect_header(&mut reader, &["time_s", "counts"])?;
        let rows = reader.deserialize().collect::<Result<Vec<(f64, u64)>, _>>()?;
        if rows.len() < 2 {
            return Err(AnalysisError::InvalidHistogram("need at least two bins".into()));
        }
        let width = (rows[rows.len() - 1].0 - rows[0].0) / (rows.len() - 1) as f64;
        for (k, (t, _)) in rows.iter().enumerate() {
            let expected = rows[0].0 + k as f64 * width;
            if (t - expected).abs() > 1e-6 * width {
                return Err(AnalysisError::InvalidHistogram(format!(
                    "bin {k} at {t:e} s breaks the uniform spacing {width:e} s"
                )));
            }
        }
        Self::new(rows[0].0, width, rows.into_iter().map(|r| r.1).collect())
    }

    pub fn nonempty_bins(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    pub fn bin_center(&self, k: usize) -> f64 {
        self.start + k as f64 * self.bin_width
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JitterFit {
    pub fwhm: f64,
    pub sigma: f64,
    pub center: f64,
    pub amplitude: f64,
    pub background: f64,
    pub rms_residual: f64,
    /// Fewer than `MIN_NONEMPTY_BINS` occupied bins: `fwhm` is the bin width,
    /// an upper bound, and no fit was attempted.
    pub resolution_limited: bool,
    pub warning: Option<String>,
}

/// `a·exp(-(t-μ)²/(2σ²)) + c` on bin index coordinates.
struct GaussianProblem {
    t: Vec<f64>,
    y: Vec<f64>,
    p: Vector4<f64>,
}

impl LeastSquaresProblem<f64, Dyn, U4> for GaussianProblem {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, U4>;
    type ParameterStorage = Owned<f64, U4>;

    fn set_params(&mut self, x: &Vector4<f64>) {
        self.p = *x;
    }

    fn params(&self) -> Vector4<f64> {
        self.p
    }

    fn residuals(&self) -> Option<OVector<f64, Dyn>> {
        let [a, mu, s, c] = [self.p[0], self.p[1], self.p[2], self.p[3]];
        Some(OVector::<f64, Dyn>::from_iterator(
            self.t.len(),
            self.t.iter().zip(&self.y).map(|(&t, &y)| a * (-(t - mu).powi(2) / (2.0 * s * s)).exp() + c - y),
        ))
    }

    fn jacobian(&self) -> Option<OMatrix<f64, Dyn, U4>> {
        let [a, mu, s, _] = [self.p[0], self.p[1], self.p[2], self.p[3]];
        let mut j = OMatrix::<f64, Dyn, U4>::zeros(self.t.len());
        for (r, &t) in self.t.iter().enumerate() {
            let d = t - mu;
            let g = (-d * d / (2.0 * s * s)).exp();
            j[(r, 0)] = g;
            j[(r, 1)] = a * g * d / (s * s);
            j[(r, 2)] = a * g * d * d / (s * s * s);
            j[(r, 3)] = 1.0;
        }
        Some(j)
    }
}

/// FWHM of the detection-time distribution from a least-squares Gaussian
/// with flat background.
pub fn jitter_fwhm(hist: &JitterHistogram) -> Result<JitterFit, AnalysisError> {
    let total: f64 = hist.counts.iter().map(|&c| c as f64).sum();
    // moments in bin units, measured from the first bin so shifts cancel exactly
    let mean = hist.counts.iter().enumerate().map(|(k, &c)| k as f64 * c as f64).sum::<f64>() / total;
    let var = hist
        .counts
        .iter()
        .enumerate()
        .map(|(k, &c)| (k as f64 - mean).powi(2) * c as f64)
        .sum::<f64>()
        / total;

    if hist.nonempty_bins() < MIN_NONEMPTY_BINS {
        return Ok(JitterFit {
            fwhm: hist.bin_width,
            sigma: var.sqrt() * hist.bin_width,
            center: hist.start + mean * hist.bin_width,
            amplitude: hist.counts.iter().copied().max().unwrap_or(0) as f64,
            background: 0.0,
            rms_residual: 0.0,
            resolution_limited: true,
            warning: Some(format!(
                "only {} nonempty bins; width not resolved, FWHM <= bin width {:e} s",
                hist.nonempty_bins(),
                hist.bin_width
            )),
        });
    }

    let y: Vec<f64> = hist.counts.iter().map(|&c| c as f64).collect();
    let t: Vec<f64> = (0..y.len()).map(|k| k as f64).collect();
    let floor = y.iter().copied().fold(f64::INFINITY, f64::min);
    let peak = y.iter().copied().fold(0.0, f64::max);
    let init = Vector4::new(peak - floor, mean, var.sqrt().max(0.5), floor);
    let problem = GaussianProblem { t, y, p: init };
    let (fitted, report) = LevenbergMarquardt::new().minimize(problem);
    let rms = (2.0 * report.objective_function / fitted.y.len() as f64).sqrt();
    let [a, mu, s, c] = [fitted.p[0], fitted.p[1], fitted.p[2].abs(), fitted.p[3]];
    if !report.termination.was_successful() || !(s.is_finite() && s > 0.0 && a > 0.0) {
        return Err(AnalysisError::FitFailure {
            reason: format!("{:?}", report.termination),
            rms_residual: rms,
            evaluations: report.number_of_evaluations,
        });
    }
    let sigma = s * hist.bin_width;
    Ok(JitterFit {
        fwhm: FWHM_PER_SIGMA * sigma,
        sigma,
        center: hist.start + mu * hist.bin_width,
        amplitude: a,
        background: c,
        rms_residual: rms,
        resolution_limited: false,
        warning: None,
    })
}
