//! Command-line front end.
//!
//! ```text
//! snspd-link <simulate-ode|rotation-normalize|extract-ode|analyze>
//!     --config PATH [--out DIR] [--slices N] [--tol X] [--threads N]
//! ```
//!
//! Outputs (all written atomically into the output directory):
//!
//! | command              | files                                                   |
//! |----------------------|---------------------------------------------------------|
//! | `simulate-ode`       | `ode_report.json`, `absorption_profile.csv` (`z,k,alpha,survival`) |
//! | `rotation-normalize` | `rotation_report.json`, `rotation_ode.csv` (`angle_deg,ode`) |
//! | `extract-ode`        | `efficiency_report.json`, `efficiency_summary.txt`      |
//! | `analyze`            | `analysis_report.json`                                  |
//!
//! Every report carries the resolved configuration, documented defaults
//! filled in. Failures print one JSON object to stderr,
//! `{"error": {"category", "exit_code", "message"}}`, and exit with 2 (config),
//! 3 (numerical) or 4 (data contract).

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::{
    dark_count_rate, detect_plateau, extinction_ratio, extract_ode, jitter_fwhm, linearity_fit,
    read_linearity_csv, switching_current, AnalysisError, CountTrace, IvTrace, JitterHistogram,
    PlateauCriteria, DEFAULT_V_THRESHOLD,
};
use crate::calibration::{photon_flux, CalibrationError};
use crate::config::{ConfigError, LoadedConfig, RunConfig, SimulateConfig};
use crate::geometry::GeometryError;
use crate::materials::MaterialError;
use crate::mode_solver::SolverError;
use crate::propagation::{
    compute_ode, normalize_rotation_sweep, read_sweep_csv, write_rotation_csv, AbsorptionProfile,
    OdeSimulator, PropagationError,
};
use crate::units::Volts;

pub const THREADS_ENV: &str = "SNSPD_LINK_THREADS";

#[derive(Debug, Parser)]
#[command(name = "snspd-link", version, about = "Waveguide-integrated SNSPD simulation and analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Simulate on-chip detection efficiency from geometry and materials.
    SimulateOde,
    /// Normalize an absorbed-energy rotation sweep to the aligned ODE.
    RotationNormalize,
    /// Extract measured ODE from a count trace and a loss budget.
    ExtractOde,
    /// IV, jitter, linearity, extinction and count-trace figures of merit.
    Analyze,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Fixed slice count for simulate-ode.
    #[arg(long, global = true, value_name = "N")]
    pub slices: Option<usize>,
    /// Slice-doubling convergence tolerance on ODE for simulate-ode.
    #[arg(long, global = true, value_name = "X")]
    pub tol: Option<f64>,
    /// Worker threads for per-slice mode solves.
    #[arg(long, global = true, value_name = "N", env = THREADS_ENV)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Config,
    Numerical,
    DataContract,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Config => 2,
            Category::Numerical => 3,
            Category::DataContract => 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CliError {
    pub category: Category,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { category: Category::Config, message: message.into() }
    }

    pub fn to_json(&self) -> Value {
        json!({"error": {
            "category": self.category,
            "exit_code": self.category.exit_code(),
            "message": self.message,
        }})
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.category, self.message)
    }
}

impl std::error::Error for CliError {}

fn err(category: Category, e: impl fmt::Display) -> CliError {
    CliError { category, message: e.to_string() }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        err(Category::Config, e)
    }
}

impl From<MaterialError> for CliError {
    fn from(e: MaterialError) -> Self {
        err(Category::Config, e)
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        err(Category::Config, e)
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        let c = match e {
            SolverError::Material(_) => Category::Config,
            _ => Category::Numerical,
        };
        err(c, e)
    }
}

impl From<PropagationError> for CliError {
    fn from(e: PropagationError) -> Self {
        use PropagationError as P;
        let c = match &e {
            P::Solver { source, .. } => CliError::from(source.clone()).category,
            P::Geometry(_) | P::InvalidTips { .. } | P::SegmentOrder { .. } | P::TooFewSlices { .. } => {
                Category::Config
            }
            P::InvalidTolerance(_) => Category::Config,
            P::OutOfRange { .. } | P::InvalidProfile(_) | P::NonConvergence { .. } => Category::Numerical,
            P::MissingAlignedPoint | P::NonPositiveAlignedEnergy(_) | P::InvalidSweep(_) | P::Csv(_) => {
                Category::DataContract
            }
        };
        err(c, e)
    }
}

impl From<CalibrationError> for CliError {
    fn from(e: CalibrationError) -> Self {
        let c = match e {
            CalibrationError::InvalidBudget(_) => Category::Config,
            CalibrationError::NegativeLoss { .. } => Category::DataContract,
        };
        err(c, e)
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        let c = match e {
            AnalysisError::FitFailure { .. } | AnalysisError::DegenerateFit(_) => Category::Numerical,
            _ => Category::DataContract,
        };
        err(c, e)
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.category.exit_code()
        }
    }
}

/// Runs a parsed command, returning the stdout summary.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    let config_path = cli
        .common
        .config
        .as_deref()
        .ok_or_else(|| CliError::config("--config PATH is required"))?;
    let loaded = LoadedConfig::from_file(config_path)?;
    let out_dir = match (&cli.common.out, &loaded.config.output_dir) {
        (Some(out), _) => out.clone(),
        (None, Some(dir)) => loaded.resolve(dir),
        (None, None) => return Err(CliError::config("no output directory: pass --out DIR or set output_dir")),
    };
    configure_threads(cli.common.threads)?;
    if cli.command != Command::SimulateOde && (cli.common.slices.is_some() || cli.common.tol.is_some()) {
        return Err(CliError::config("--slices and --tol apply to simulate-ode only"));
    }
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::config(format!("cannot create {}: {e}", out_dir.display())))?;
    match cli.command {
        Command::SimulateOde => simulate(&loaded, &cli.common, &out_dir),
        Command::RotationNormalize => rotation(&loaded, &out_dir),
        Command::ExtractOde => extract(&loaded, &out_dir),
        Command::Analyze => analyze(&loaded, &out_dir),
    }
}

fn configure_threads(threads: Option<usize>) -> Result<(), CliError> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(CliError::config("--threads must be at least 1"));
    }
    // A second call in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Writes through a temporary sibling and renames into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::config(format!("cannot write {}: {e}", path.display()));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    let mut f = std::fs::File::create(&tmp).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(io)
}

fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// The config as echoed in reports: output location dropped, physics defaults filled.
fn echo(config: &RunConfig) -> Value {
    let mut c = config.clone();
    c.output_dir = None;
    serde_json::to_value(c).expect("config serializes")
}

fn open_data(loaded: &LoadedConfig, path: &Path) -> Result<std::fs::File, CliError> {
    Ok(loaded.open(path)?)
}

enum SliceControl {
    Fixed(usize),
    Tolerance(f64),
}

fn slice_control(sim: &SimulateConfig, args: &CommonArgs) -> Result<SliceControl, CliError> {
    let (slices, tol) = if args.slices.is_some() || args.tol.is_some() {
        (args.slices, args.tol)
    } else {
        (sim.slices, sim.tol)
    };
    match (slices, tol) {
        (Some(n), None) => Ok(SliceControl::Fixed(n)),
        (None, Some(t)) if t > 0.0 && t.is_finite() => Ok(SliceControl::Tolerance(t)),
        (None, Some(t)) => Err(CliError::config(format!("tolerance must be positive, got {t}"))),
        (Some(_), Some(_)) => Err(CliError::config("give either a slice count or a tolerance, not both")),
        (None, None) => Err(CliError::config("simulate_ode needs \"slices\" or \"tol\" (or --slices / --tol)")),
    }
}

struct SimOutcome {
    ode: f64,
    slices: usize,
    change: Option<f64>,
    profile: AbsorptionProfile,
    solves: Option<usize>,
}

/// Slice doubling from 8 for a closed-form profile builder.
fn converge_with<F>(tol: f64, mut ode_at: F) -> Result<SimOutcome, CliError>
where
    F: FnMut(usize) -> Result<(f64, AbsorptionProfile), CliError>,
{
    let (mut previous, _) = ode_at(8)?;
    let mut n = 8;
    let mut change = f64::NAN;
    while n * 2 <= 1024 {
        n *= 2;
        let (ode, profile) = ode_at(n)?;
        change = (ode - previous).abs();
        if change < tol {
            return Ok(SimOutcome { ode, slices: n, change: Some(change), profile, solves: None });
        }
        previous = ode;
    }
    Err(PropagationError::NonConvergence { tol, slices: n, last_change: change }.into())
}

fn simulate(loaded: &LoadedConfig, args: &CommonArgs, out: &Path) -> Result<String, CliError> {
    let sim = loaded.config.simulate_ode.as_ref().ok_or(ConfigError::MissingSection("simulate_ode"))?;
    let wavelength = sim.wavelength.get();
    let tips = sim.tips.unwrap_or_default();
    tips.validate()?;
    let control = slice_control(sim, args)?;

    let (outcome, z1, z2) = match (&sim.geometry, &sim.uniform_absorber) {
        (Some(spec), None) => {
            let geom = spec.build(&loaded.materials)?;
            let (z1, z2) = (geom.segmentation.z1, geom.segmentation.z2);
            let simulator = OdeSimulator::new(geom, wavelength)?.with_tips(tips)?;
            let outcome = match control {
                SliceControl::Fixed(n) => {
                    let (ode, profile) = simulator.ode(n)?;
                    SimOutcome { ode, slices: n, change: None, profile, solves: None }
                }
                SliceControl::Tolerance(tol) => {
                    let c = simulator.converge(tol)?;
                    SimOutcome { ode: c.ode, slices: c.slices, change: Some(c.change), profile: c.profile, solves: None }
                }
            };
            (SimOutcome { solves: Some(simulator.solves()), ..outcome }, z1, z2)
        }
        (None, Some(u)) => {
            let (z1, z2, end) = (u.z1.get(), u.z2.get(), u.end.get());
            let n_eff = num_complex::Complex64::new(u.n_eff, 0.0);
            let ode_at = |n: usize| -> Result<(f64, AbsorptionProfile), CliError> {
                let profile = AbsorptionProfile::uniform(z1, end, n, u.alpha, n_eff, wavelength)?;
                Ok((compute_ode(&profile, z1, z2, tips)?, profile))
            };
            let outcome = match control {
                SliceControl::Fixed(n) => {
                    let (ode, profile) = ode_at(n)?;
                    SimOutcome { ode, slices: n, change: None, profile, solves: None }
                }
                SliceControl::Tolerance(tol) => converge_with(tol, ode_at)?,
            };
            (outcome, z1, z2)
        }
        _ => {
            return Err(CliError::config("simulate_ode needs exactly one of \"geometry\" or \"uniform_absorber\""))
        }
    };

    let a1 = outcome.profile.transmission(z1, z2)?;
    let a2 = outcome.profile.transmission(z2, outcome.profile.z_end())?;
    let mut csv = Vec::new();
    outcome.profile.write_csv(&mut csv)?;
    write_atomic(&out.join("absorption_profile.csv"), &csv)?;

    let mut resolved = loaded.config.clone();
    if let Some(s) = resolved.simulate_ode.as_mut() {
        s.tips = Some(tips);
        match control {
            SliceControl::Fixed(n) => (s.slices, s.tol) = (Some(n), None),
            SliceControl::Tolerance(t) => (s.slices, s.tol) = (None, Some(t)),
        }
    }
    let report = json!({
        "command": "simulate-ode",
        "ode": outcome.ode,
        "slices": outcome.slices,
        "convergence_estimate": outcome.change,
        "survival_segment1": a1,
        "survival_segment2": a2,
        "asymptote": tips.t_det_sq * (1.0 - a1) + tips.t_det_sq * tips.t_pic_sq * a1,
        "z1": z1,
        "z2": z2,
        "z_end": outcome.profile.z_end(),
        "mode_solves": outcome.solves,
        "config": echo(&resolved),
    });
    write_json(&out.join("ode_report.json"), &report)?;
    let change = outcome.change.map_or("n/a (fixed slices)".to_string(), |c| format!("{c:.3e}"));
    Ok(format!(
        "ODE {:.5e} ({:.4} %)\nslices {}\nconvergence estimate {}",
        outcome.ode,
        outcome.ode * 100.0,
        outcome.slices,
        change
    ))
}

fn rotation(loaded: &LoadedConfig, out: &Path) -> Result<String, CliError> {
    let rot = loaded.config.rotation.as_ref().ok_or(ConfigError::MissingSection("rotation"))?;
    let sweep = read_sweep_csv(open_data(loaded, &rot.sweep)?)?;
    let mut rows = normalize_rotation_sweep(&sweep, rot.aligned_ode)?;
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut csv = Vec::new();
    write_rotation_csv(&rows, &mut csv)?;
    write_atomic(&out.join("rotation_ode.csv"), &csv)?;
    let table: Vec<Value> = rows.iter().map(|(a, o)| json!({"angle_deg": a, "ode": o})).collect();
    write_json(
        &out.join("rotation_report.json"),
        &json!({
            "command": "rotation-normalize",
            "aligned_ode": rot.aligned_ode,
            "rows": table,
            "config": echo(&loaded.config),
        }),
    )?;
    let mut s = format!("aligned ODE {}\nangle_deg ode", rot.aligned_ode);
    for (a, o) in &rows {
        s.push_str(&format!("\n{a} {o:.6}"));
    }
    Ok(s)
}

fn extract(loaded: &LoadedConfig, out: &Path) -> Result<String, CliError> {
    let ex = loaded.config.extract_ode.as_ref().ok_or(ConfigError::MissingSection("extract_ode"))?;
    let budget = ex.budget.build()?;
    let trace = CountTrace::from_csv(open_data(loaded, &ex.trace)?, ex.integration_time.get())?;
    let flux = photon_flux(&budget);
    let report = extract_ode(&trace, ex.bias.get(), flux, budget.wavelength)?;
    let summary = report.to_string();
    write_json(
        &out.join("efficiency_report.json"),
        &json!({
            "command": "extract-ode",
            "report": report,
            "total_loss_db": budget.total_db(),
            "loss_sigma_db": budget.sigma_db(),
            "config": echo(&loaded.config),
        }),
    )?;
    write_atomic(&out.join("efficiency_summary.txt"), format!("{summary}\n").as_bytes())?;
    Ok(summary)
}

fn section<T: Serialize>(result: Result<T, CliError>) -> (Value, Option<CliError>) {
    match result {
        Ok(v) => {
            let mut obj = serde_json::to_value(v).expect("results serialize");
            if let Value::Object(map) = &mut obj {
                map.insert("status".into(), json!("ok"));
            } else {
                obj = json!({"status": "ok", "value": obj});
            }
            (obj, None)
        }
        Err(e) => (
            json!({"status": "error", "category": e.category, "exit_code": e.category.exit_code(), "message": e.message}),
            Some(e),
        ),
    }
}

fn analyze(loaded: &LoadedConfig, out: &Path) -> Result<String, CliError> {
    let an = loaded.config.analyze.as_ref().ok_or(ConfigError::MissingSection("analyze"))?;
    if an.is_empty() {
        return Err(CliError::config("analyze section lists no inputs (iv, jitter, linearity, extinction, counts)"));
    }
    let mut resolved = loaded.config.clone();
    let ra = resolved.analyze.as_mut().expect("checked above");
    if let Some(iv) = ra.iv.as_mut() {
        iv.v_threshold.get_or_insert(Volts(DEFAULT_V_THRESHOLD));
    }
    if let Some(c) = ra.counts.as_mut() {
        c.plateau.get_or_insert(PlateauCriteria::default());
    }
    let an = resolved.analyze.clone().expect("checked above");

    let iv = an.iv.as_ref().map(|iv| -> Result<Value, CliError> {
        let trace = IvTrace::from_csv(open_data(loaded, &iv.file)?)?;
        let v = iv.v_threshold.expect("filled").get();
        let ic = switching_current(&trace, v)?;
        Ok(json!({"switching_current_a": ic, "v_threshold_v": v}))
    });
    let jitter = an.jitter.as_ref().map(|j| -> Result<Value, CliError> {
        let hist = JitterHistogram::from_csv(open_data(loaded, &j.file)?)?;
        Ok(serde_json::to_value(jitter_fwhm(&hist)?).expect("fit serializes"))
    });
    let linearity = an.linearity.as_ref().map(|l| -> Result<Value, CliError> {
        let points = read_linearity_csv(open_data(loaded, &l.file)?)?;
        Ok(serde_json::to_value(linearity_fit(&points, l.floor.get())?).expect("fit serializes"))
    });
    let extinction = an.extinction.as_ref().map(|x| -> Result<Value, CliError> {
        let e = extinction_ratio(x.coupled_rate.get(), x.uncoupled_rate.get(), x.integration_time.get())?;
        Ok(json!({"extinction": e, "display": e.to_string()}))
    });
    let counts = an.counts.as_ref().map(|c| -> Result<Value, CliError> {
        let trace = CountTrace::from_csv(open_data(loaded, &c.trace)?, c.integration_time.get())?;
        let plateau = detect_plateau(&trace, &c.plateau.expect("filled"))?;
        let dark = c.bias.map(|b| dark_count_rate(&trace, b.get())).transpose()?;
        Ok(json!({"plateau": plateau, "dark_count_rate_hz": dark}))
    });

    let mut sections = serde_json::Map::new();
    let mut failures = Vec::new();
    let mut lines = Vec::new();
    let all = [("iv", iv), ("jitter", jitter), ("linearity", linearity), ("extinction", extinction), ("counts", counts)];
    for (name, result) in all {
        let value = match result {
            None => {
                lines.push(format!("{name}: skipped (no input configured)"));
                json!({"status": "skipped", "notice": "no input configured"})
            }
            Some(r) => {
                let (v, e) = section(r);
                match &e {
                    None => lines.push(format!("{name}: ok")),
                    Some(e) => lines.push(format!("{name}: error ({})", e.message)),
                }
                failures.extend(e);
                v
            }
        };
        sections.insert(name.to_string(), value);
    }

    write_json(
        &out.join("analysis_report.json"),
        &json!({"command": "analyze", "sections": sections, "config": echo(&resolved)}),
    )?;
    match failures.into_iter().next() {
        None => Ok(lines.join("\n")),
        Some(first) => {
            for l in &lines {
                eprintln!("{l}");
            }
            Err(first)
        }
    }
}

