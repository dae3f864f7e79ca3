//! Detector figures of merit from bench traces.
//!
//! Rates are in Hz, biases in amperes, voltages in volts, times in seconds.
//! CSV inputs carry a fixed header row:
//!
//! | trace     | columns                               |
//! |-----------|---------------------------------------|
//! | counts    | `bias_a,photon_rate_hz,dark_rate_hz`  |
//! | IV        | `bias_a,voltage_v`                    |
//! | linearity | `attenuation_db,rate_hz`              |
//! | jitter    | `time_s,counts` (bin centers, uniform)|

mod efficiency;
mod figures;
mod jitter;
mod trace;

use thiserror::Error;

pub use efficiency::{dark_count_rate, extract_ode, EfficiencyReport, NEIGHBORHOOD};
pub use figures::{
    detect_plateau, extinction_ratio, linearity_fit, read_linearity_csv, switching_current,
    Extinction, LinearityFit, Plateau, PlateauCriteria, DEFAULT_V_THRESHOLD,
};
pub use jitter::{jitter_fwhm, JitterFit, JitterHistogram, FWHM_PER_SIGMA, MIN_NONEMPTY_BINS};
pub use trace::{rate_from_counts, CountPoint, CountTrace, IvPoint, IvTrace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("need at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
    #[error("bias {bias:e} A is not a point of the trace")]
    BiasNotFound { bias: f64 },
    #[error(
        "{column} = {rate} Hz at bias {bias:e} A is not a multiple of 1/{integration_time} s \
         (counter granularity)"
    )]
    Granularity { column: &'static str, bias: f64, rate: f64, integration_time: f64 },
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("invalid histogram: {0}")]
    InvalidHistogram(String),
    #[error("efficiency {ode} outside [0, 1]; check the trace against the photon flux")]
    EfficiencyOutOfRange { ode: f64 },
    #[error(
        "{}",
        if *at_origin {
            format!("no switch: first IV point already at or above {v_threshold:e} V")
        } else {
            format!("no switch: voltage never reaches {v_threshold:e} V")
        }
    )]
    NoSwitch { v_threshold: f64, at_origin: bool },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("jitter fit failed: {reason} (rms residual {rms_residual:e}, {evaluations} evaluations)")]
    FitFailure { reason: String, rms_residual: f64, evaluations: usize },
    #[error("uncoupled rate must be non-negative and finite, got {0}")]
    InvalidRate(f64),
    #[error("csv: {0}")]
    Csv(String),
}

impl From<csv::Error> for AnalysisError {
    fn from(e: csv::Error) -> Self {
        AnalysisError::Csv(e.to_string())
    }
}
