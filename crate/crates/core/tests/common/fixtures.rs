//! Generators for the files under `fixtures/`.
//!
//! The committed files are the source of truth for the CLI; these functions
//! document how each was built, and a test checks the two agree.
//! Set `SNSPD_LINK_REGENERATE=1` to rewrite the directory.

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::json;
use snspd_link::analysis::FWHM_PER_SIGMA;
use snspd_link::calibration::photon_energy;

pub const INTEGRATION_TIME: f64 = 0.1;
pub const OPERATING_BIAS_UA: f64 = 7.0;
pub const PAPER_RATE: f64 = 1.356e6;
pub const PAPER_DARK: f64 = 40.0;
pub const PAPER_ODE: f64 = 0.078;
pub const WAVELENGTH: f64 = 1.57e-6;
pub const TABLE_DB: [f64; 3] = [5.53, 8.35, 70.0];
pub const SWITCHING_UA: f64 = 7.1;
pub const JITTER_FWHM: f64 = 242e-12;
pub const JITTER_EVENTS: usize = 1_000_000;
pub const JITTER_BIN_PS: i64 = 5;
pub const ALIGNED_ODE: f64 = 0.303;

pub fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// `(bias µA, photon rate Hz, dark rate Hz)`; every rate a whole number of
/// counts in 0.1 s.
pub fn paper_trace_rows() -> Vec<(f64, f64, f64)> {
    vec![
        (5.0, 21_000.0, 0.0),
        (5.2, 98_000.0, 0.0),
        (5.4, 390_000.0, 0.0),
        (5.6, 870_000.0, 0.0),
        (5.8, 1_190_000.0, 0.0),
        (6.0, 1_310_000.0, 0.0),
        (6.2, 1_344_200.0, 0.0),
        (6.4, 1_355_100.0, 10.0),
        (6.6, 1_355_800.0, 10.0),
        (6.8, 1_356_700.0, 20.0),
        (7.0, PAPER_RATE, PAPER_DARK),
        (7.2, 1_355_300.0, 90.0),
        (7.4, 1_357_100.0, 210.0),
        (7.6, 1_356_400.0, 480.0),
    ]
}

fn count_csv(rows: &[(f64, f64, f64)]) -> String {
    let mut s = String::from("bias_a,photon_rate_hz,dark_rate_hz\n");
    for (b, p, d) in rows {
        s.push_str(&format!("{b}e-6,{p},{d}\n"));
    }
    s
}

/// Photon flux making the operating point read exactly `PAPER_ODE`.
pub fn paper_flux() -> f64 {
    (PAPER_RATE - PAPER_DARK) / PAPER_ODE
}

/// Input power that, through the loss table, delivers [`paper_flux`].
pub fn paper_p_in() -> f64 {
    let total: f64 = TABLE_DB.iter().sum();
    paper_flux() * photon_energy(WAVELENGTH) * 10f64.powf(total / 10.0)
}

pub fn iv_csv() -> String {
    let mut s = String::from("bias_a,voltage_v\n");
    for i in 0..=100 {
        let ua = i as f64 / 10.0;
        // superconducting branch with microvolt pickup, then the resistive jump
        let v = if i <= 71 { 2e-6 * ((i as f64) * 0.7).sin() } else { 1.2e-3 + 250.0 * ua * 1e-6 };
        s.push_str(&format!("{ua}e-6,{v:e}\n"));
    }
    s
}

pub fn jitter_csv() -> String {
    let sigma = JITTER_FWHM / FWHM_PER_SIGMA;
    let normal = Normal::new(0.0, sigma).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_242);
    let (first_ps, last_ps) = (-600i64, 600i64);
    let bins = ((last_ps - first_ps) / JITTER_BIN_PS + 1) as usize;
    let width = JITTER_BIN_PS as f64 * 1e-12;
    let lo = first_ps as f64 * 1e-12 - 0.5 * width;
    let mut counts = vec![0u64; bins];
    for _ in 0..JITTER_EVENTS {
        let k = ((normal.sample(&mut rng) - lo) / width).floor();
        if k >= 0.0 && (k as usize) < bins {
            counts[k as usize] += 1;
        }
    }
    let mut s = String::from("time_s,counts\n");
    for (k, c) in counts.iter().enumerate() {
        s.push_str(&format!("{}e-12,{c}\n", first_ps + k as i64 * JITTER_BIN_PS));
    }
    s
}

pub fn linearity_csv() -> String {
    let mut s = String::from("attenuation_db,rate_hz\n");
    for i in 0..=15 {
        let db = 2.0 * i as f64;
        s.push_str(&format!("{db},{:e}\n", 2e6 * 10f64.powf(-db / 10.0)));
    }
    s
}

fn pretty(v: serde_json::Value) -> String {
    serde_json::to_string_pretty(&v).unwrap() + "\n"
}

fn budget() -> serde_json::Value {
    json!({
        "p_in": paper_p_in(),
        "wavelength": "1570 nm",
        "db_fiber": TABLE_DB[0],
        "db_coupler": TABLE_DB[1],
        "db_attenuator": TABLE_DB[2],
        "db_fiber_sigma": 0.1
    })
}

/// Every fixture as `(file name, contents)`.
pub fn all() -> Vec<(&'static str, String)> {
    let rows = paper_trace_rows();
    let mut granular = rows.clone();
    granular[10].2 = 43.0;
    vec![
        ("paper_counts.csv", count_csv(&rows)),
        ("short_counts.csv", count_csv(&rows[..6])),
        ("granularity_violation.csv", count_csv(&granular)),
        ("iv.csv", iv_csv()),
        ("jitter.csv", jitter_csv()),
        ("linearity.csv", linearity_csv()),
        ("rotation_sweep.csv", "angle_deg,u_a\n0.8,0.574\n0,2.0\n".to_string()),
        (
            "extract_paper.json",
            pretty(json!({"extract_ode": {
                "trace": "paper_counts.csv",
                "integration_time": "0.1 s",
                "bias": "7 uA",
                "budget": budget()
            }})),
        ),
        (
            "extract_short.json",
            pretty(json!({"extract_ode": {
                "trace": "short_counts.csv",
                "integration_time": "0.1 s",
                "bias": "6 uA",
                "budget": budget()
            }})),
        ),
        (
            "simulate_constant_alpha.json",
            pretty(json!({"simulate_ode": {
                "wavelength": "1570 nm",
                "uniform_absorber": {"alpha": 4002.0, "n_eff": 1.8, "z1": "0 um", "z2": "40 um", "end": "90 um"},
                "tol": 1e-9
            }})),
        ),
        (
            "simulate_lossless.json",
            pretty(json!({"simulate_ode": {
                "wavelength": "1570 nm",
                "uniform_absorber": {"alpha": 0.0, "n_eff": 1.8, "z1": "0 um", "z2": "40 um", "end": "90 um"},
                "tol": 1e-3
            }})),
        ),
        (
            "simulate_paper_default.json",
            pretty(json!({"simulate_ode": {
                "wavelength": "1570 nm",
                "geometry": {"preset": "paper_default"},
                "tol": 1e-3
            }})),
        ),
        (
            "rotation_paper.json",
            pretty(json!({"rotation": {"sweep": "rotation_sweep.csv", "aligned_ode": ALIGNED_ODE}})),
        ),
        (
            "analyze_paper.json",
            pretty(json!({"analyze": {
                "iv": {"file": "iv.csv"},
                "jitter": {"file": "jitter.csv"},
                "linearity": {"file": "linearity.csv", "floor": "100 Hz"},
                "extinction": {"coupled_rate": "1 MHz", "uncoupled_rate": "100 Hz", "integration_time": "0.1 s"},
                "counts": {"trace": "paper_counts.csv", "integration_time": "0.1 s", "bias": "7 uA"}
            }})),
        ),
        (
            "analyze_granularity.json",
            pretty(json!({"analyze": {
                "counts": {"trace": "granularity_violation.csv", "integration_time": "0.1 s", "bias": "7 uA"}
            }})),
        ),
    ]
}
