//! CSV output: one row per sample, linear MSD and its dB value for the model
//! and the simulation. Missing series are left as empty fields.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::ExperimentOutput;
use crate::error::Result;
use crate::sim::McResult;
use crate::theory::{ModelKind, TheoryTrajectory};
use crate::to_db;

pub const CSV_HEADER: &str = "n,msd_theory,msd_mc,msd_theory_db,msd_mc_db,mean_dev_norm";

fn push_field(line: &mut String, value: Option<f64>) {
    line.push(',');
    if let Some(v) = value {
        write!(line, "{v}").expect("writing to a String cannot fail");
    }
}

/// Renders one CSV table; `mean_dev_norm` comes from the simulation when it
/// ran, otherwise from the model.
pub fn csv_string(theory: Option<&TheoryTrajectory>, mc: Option<&McResult>) -> String {
    let len = theory
        .map(|t| t.msd.len())
        .or(mc.map(|m| m.msd.len()))
        .unwrap_or(0);
    let mc_norm = mc.map(|m| m.mean_deviation_norm());
    let mut out = String::with_capacity(64 * (len + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for n in 0..len {
        let th = theory.map(|t| t.msd[n]);
        let sim = mc.map(|m| m.msd[n]);
        let norm = match (&mc_norm, theory) {
            (Some(v), _) => Some(v[n]),
            (None, Some(t)) => Some(t.mean_dev_norm[n]),
            (None, None) => None,
        };
        let mut line = n.to_string();
        push_field(&mut line, th);
        push_field(&mut line, sim);
        push_field(&mut line, th.map(to_db));
        push_field(&mut line, sim.map(to_db));
        push_field(&mut line, norm);
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Writes `<prefix>.csv`, plus `<prefix>.slow.csv` when both models ran.
pub fn write_outputs(output: &ExperimentOutput, prefix: &Path) -> Result<Vec<PathBuf>> {
    if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut written = Vec::new();
    let mc = output.mc.as_ref();
    let main = with_suffix(prefix, ".csv");
    fs::write(&main, csv_string(output.theory.first(), mc))?;
    written.push(main);
    if output.theory.len() > 1 {
        if let Some(slow) = output.theory.iter().skip(1).find(|t| t.kind == ModelKind::Slow) {
            let path = with_suffix(prefix, ".slow.csv");
            fs::write(&path, csv_string(Some(slow), mc))?;
            written.push(path);
        }
    }
    Ok(written)
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}
