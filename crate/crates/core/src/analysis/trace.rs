//! Count and IV traces with their CSV ingestion.

use std::io::Read;

use serde::{Deserialize, Serialize};

use super::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountPoint {
    #[serde(rename = "bias_a")]
    pub bias: f64,
    #[serde(rename = "photon_rate_hz")]
    pub photon_rate: f64,
    #[serde(rename = "dark_rate_hz")]
    pub dark_rate: f64,
}

/// Photon and dark count rates against bias, from a gated counter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountTrace {
    integration_time: f64,
    points: Vec<CountPoint>,
}

/// Rate for `counts` events in one gate of `integration_time` seconds.
pub fn rate_from_counts(counts: u64, integration_time: f64) -> f64 {
    counts as f64 / integration_time
}

/// Relative slack on "rate × gate is an integer", for decimal round-off in files.
const GRANULARITY_SLACK: f64 = 1e-6;

fn check_granularity(
    column: &'static str,
    bias: f64,
    rate: f64,
    integration_time: f64,
) -> Result<(), AnalysisError> {
    let counts = rate * integration_time;
    if (counts - counts.round()).abs() > GRANULARITY_SLACK * counts.abs().max(1.0) {
        return Err(AnalysisError::Granularity { column, bias, rate, integration_time });
    }
    Ok(())
}

fn check_increasing(biases: impl Iterator<Item = f64>) -> Result<(), AnalysisError> {
    let mut last = f64::NEG_INFINITY;
    for b in biases {
        if !b.is_finite() {
            return Err(AnalysisError::InvalidTrace(format!("non-finite bias {b}")));
        }
        if b <= last {
            return Err(AnalysisError::InvalidTrace(format!(
                "bias must be strictly increasing ({last:e} then {b:e})"
            )));
        }
        last = b;
    }
    Ok(())
}

impl CountTrace {
    pub fn new(integration_time: f64, points: Vec<CountPoint>) -> Result<Self, AnalysisError> {
        if !(integration_time.is_finite() && integration_time > 0.0) {
            return Err(AnalysisError::InvalidTrace(format!(
                "integration time must be positive, got {integration_time}"
            )));
        }
        check_increasing(points.iter().map(|p| p.bias))?;
        for p in &points {
            for (column, rate) in [("photon_rate_hz", p.photon_rate), ("dark_rate_hz", p.dark_rate)] {
                if !(rate.is_finite() && rate >= 0.0) {
                    return Err(AnalysisError::InvalidTrace(format!(
                        "{column} must be finite and >= 0, got {rate} at bias {:e} A",
                        p.bias
                    )));
                }
                check_granularity(column, p.bias, rate, integration_time)?;
            }
        }
        Ok(Self { integration_time, points })
    }

    /// Reads `bias_a,photon_rate_hz,dark_rate_hz` rows.
    pub fn from_csv<R: Read>(input: R, integration_time: f64) -> Result<Self, AnalysisError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        expect_header(&mut reader, &["bias_a", "photon_rate_hz", "dark_rate_hz"])?;
        let points = reader.deserialize().collect::<Result<Vec<CountPoint>, _>>()?;
        Self::new(integration_time, points)
    }

    pub fn integration_time(&self) -> f64 {
        self.integration_time
    }

    pub fn points(&self) -> &[CountPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the point at `bias`, allowing for decimal round-off.
    pub fn index_of(&self, bias: f64) -> Result<usize, AnalysisError> {
        let scale = self.points.iter().map(|p| p.bias.abs()).fold(0.0, f64::max);
        let tol = 1e-9 * scale;
        self.points
            .iter()
            .position(|p| (p.bias - bias).abs() <= tol)
            .ok_or(AnalysisError::BiasNotFound { bias })
    }
}

pub(crate) fn expect_header<R: Read>(
    reader: &mut csv::Reader<R>,
    expected: &[&str],
) -> Result<(), AnalysisError> {
    let header = reader.headers()?;
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(AnalysisError::Csv(format!(
            "expected header {}, found {}",
            expected.join(","),
            got.join(",")
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IvPoint {
    #[serde(rename = "bias_a")]
    pub bias: f64,
    #[serde(rename = "voltage_v")]
    pub voltage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IvTrace {
    points: Vec<IvPoint>,
}

impl IvTrace {
    pub fn new(points: Vec<IvPoint>) -> Result<Self, AnalysisError> {
        check_increasing(points.iter().map(|p| p.bias))?;
        if let Some(p) = points.iter().find(|p| !p.voltage.is_finite()) {
            return Err(AnalysisError::InvalidTrace(format!("non-finite voltage at {:e} A", p.bias)));
        }
        Ok(Self { points })
    }

    /// Reads `bias_a,voltage_v` rows.
    pub fn from_csv<R: Read>(input: R) -> Result<Self, AnalysisError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        expect_header(&mut reader, &["bias_a", "voltage_v"])?;
        let points = reader.deserialize().collect::<Result<Vec<IvPoint>, _>>()?;
        Self::new(points)
    }

    pub fn points(&self) -> &[IvPoint] {
        &self.points
    }
}
