//! Detector figures of merit from bench data: switching current, timing
//! jitter, linearity, extinction and dark counts.
//!
//! ```text
//! cargo run --example detector_figures
//! ```

use std::fs::File;
use std::path::PathBuf;

use snspd_link::analysis::{
    dark_count_rate, extinction_ratio, jitter_fwhm, linearity_fit, read_linearity_csv, switching_current,
    CountTrace, IvTrace, JitterHistogram, DEFAULT_V_THRESHOLD,
};

fn fixture(name: &str) -> std::io::Result<File> {
    File::open(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let iv = IvTrace::from_csv(fixture("iv.csv")?)?;
    println!("switching current {:.2} uA", switching_current(&iv, DEFAULT_V_THRESHOLD)? * 1e6);

    let fit = jitter_fwhm(&JitterHistogram::from_csv(fixture("jitter.csv")?)?)?;
    println!("jitter FWHM {:.1} ps (sigma {:.2} ps, background {:.1} counts/bin)", fit.fwhm * 1e12, fit.sigma * 1e12, fit.background);

    let lin = linearity_fit(&read_linearity_csv(fixture("linearity.csv")?)?, 100.0)?;
    println!("linearity slope {:.4}, r^2 {:.6} over {} points", lin.slope, lin.r_squared, lin.points_used);

    println!("extinction {}", extinction_ratio(1e6, 100.0, 0.1)?);
    println!("extinction with no uncoupled counts {}", extinction_ratio(1e6, 0.0, 0.1)?);

    let trace = CountTrace::from_csv(fixture("paper_counts.csv")?, 0.1)?;
    println!("dark counts at 7 uA: {} Hz", dark_count_rate(&trace, 7e-6)?);
    match CountTrace::from_csv(fixture("granularity_violation.csv")?, 0.1) {
        Err(e) => println!("rejected trace: {e}"),
        Ok(_) => println!("granularity check did not trigger"),
    }
    Ok(())
}
