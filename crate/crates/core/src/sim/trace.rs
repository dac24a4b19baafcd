use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::SimError;

/// Fraction of the simulated window averaged into the stabilized error.
pub const STABILIZED_FRACTION: f64 = 0.1;

/// Error rate against timestep over an evaluated set.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    error: Vec<f64>,
    final_counts: Vec<Vec<u32>>,
}

impl SimTrace {
    pub fn new(error: Vec<f64>, final_counts: Vec<Vec<u32>>) -> Self {
        Self { error, final_counts }
    }

    /// `error()[t]` is the misclassified fraction after timestep `t + 1`.
    pub fn error(&self) -> &[f64] {
        &self.error
    }

    /// Output spike counts of every image at the end of the run.
    pub fn final_counts(&self) -> &[Vec<u32>] {
        &self.final_counts
    }

    /// Mean error over the last `ceil(10%)` of timesteps.
    pub fn stabilized_error(&self) -> f64 {
        stabilized_mean(&self.error)
    }

    /// `timestep,error_rate` rows, timesteps counted from 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("timestep,error_rate\n");
        for (t, e) in self.error.iter().enumerate() {
            writeln!(out, "{},{}", t + 1, e).expect("writing to a String");
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), SimError> {
        fs::write(path, self.to_csv()).map_err(|source| SimError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Mean of the trailing `ceil(len / 10)` values (at least one).
pub fn stabilized_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let window = ((values.len() as f64 * STABILIZED_FRACTION).ceil() as usize).clamp(1, values.len());
    let tail = &values[values.len() - window..];
    tail.iter().sum::<f64>() / window as f64
}

/// `out.csv` -> `out.csv.meta.json`
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Writes `meta` as pretty JSON next to `path`.
pub fn write_sidecar(path: &Path, meta: &impl Serialize) -> Result<PathBuf, SimError> {
    let target = sidecar_path(path);
    let mut text = serde_json::to_string_pretty(meta).expect("metadata serializes");
    text.push('\n');
    fs::write(&target, text).map_err(|source| SimError::Io {
        path: target.clone(),
        source,
    })?;
    Ok(target)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stabilized_window() {
        let values: Vec<f64> = (0..300).map(|t| if t < 270 { 1.0 } else { 0.25 }).collect();
        assert_eq!(stabilized_mean(&values), 0.25);
        // ceil(15 / 10) = 2
        let short = [9.0; 13].iter().copied().chain([1.0, 3.0]).collect::<Vec<_>>();
        assert_eq!(stabilized_mean(&short), 2.0);
        assert_eq!(stabilized_mean(&[0.4]), 0.4);
    }

    #[test]
    fn csv_layout() {
        let t = SimTrace::new(vec![0.5, 0.25], vec![vec![1, 2]]);
        assert_eq!(t.to_csv(), "timestep,error_rate\n1,0.5\n2,0.25\n");
        assert_eq!(sidecar_path(Path::new("a/b.csv")), PathBuf::from("a/b.csv.meta.json"));
    }
}
