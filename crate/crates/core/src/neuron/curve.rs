//! Transfer curves: membrane potential against number of input spikes.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AccumulationModel, NeuronError};

/// Trajectory of a neuron fed `n_spikes` identical spikes of weight
/// `w_per_spike`, starting at rest with thresholding disabled.
///
/// Returns `n_spikes + 1` points `(k, v_k)` beginning with `(0, 0.0)`.
pub fn potential_curve(
    model: &AccumulationModel,
    w_per_spike: f64,
    n_spikes: usize,
) -> Result<Vec<(usize, f64)>, NeuronError> {
    if n_spikes == 0 {
        return Err(NeuronError::InvalidParameter(
            "a transfer curve needs at least one spike".into(),
        ));
    }
    let mut v = 0.0;
    let mut out = Vec::with_capacity(n_spikes + 1);
    out.push((0, v));
    for k in 1..=n_spikes {
        model.check_potential(v)?;
        v = model.apply(v, w_per_spike);
        out.push((k, v));
    }
    Ok(out)
}

/// Per-spike gain as a function of membrane potential, sampled at the
/// midpoints of a transfer curve and linearly interpolated between them.
///
/// Outside the sampled range the nearest endpoint gain is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainTable {
    knots: Vec<(f64, f64)>,
}

impl GainTable {
    /// `(potential, gain)` knots in increasing potential order.
    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn eval(&self, v: f64) -> f64 {
        eval_knots(&self.knots, v)
    }
}

fn eval_knots(knots: &[(f64, f64)], v: f64) -> f64 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if v <= first.0 {
        return first.1;
    }
    if v >= last.0 {
        return last.1;
    }
    // first knot strictly above v
    let hi = knots.partition_point(|&(x, _)| x <= v);
    let (x0, g0) = knots[hi - 1];
    let (x1, g1) = knots[hi];
    g0 + (g1 - g0) * (v - x0) / (x1 - x0)
}

/// Turns a measured transfer curve `(n, v)` into a per-spike gain function.
///
/// Forward differences `Δv/Δn` are placed at segment midpoints `v̄`, the result
/// is interpolated piecewise-linearly over `v`, and every gain is divided by
/// the raw gain at `v = 0` so that a spike at rest counts exactly its weight.
pub fn derive_gain_from_curve(curve: &[(f64, f64)]) -> Result<GainTable, NeuronError> {
    if curve.len() < 3 {
        return Err(NeuronError::TooFewPoints { found: curve.len() });
    }
    for (i, &(n, v)) in curve.iter().enumerate() {
        if !(n.is_finite() && v.is_finite()) {
            return Err(NeuronError::NotMonotone { index: i });
        }
        if i > 0 {
            let (pn, pv) = curve[i - 1];
            if !(n > pn && v > pv) {
                return Err(NeuronError::NotMonotone { index: i });
            }
        }
    }
    let raw: Vec<(f64, f64)> = curve
        .windows(2)
        .map(|p| {
            let (n0, v0) = p[0];
            let (n1, v1) = p[1];
            (0.5 * (v0 + v1), (v1 - v0) / (n1 - n0))
        })
        .collect();
    let at_rest = eval_knots(&raw, 0.0);
    Ok(GainTable {
        knots: raw.into_iter().map(|(v, g)| (v, g / at_rest)).collect(),
    })
}

const CURVE_HEADER: &str = "n_norm,v_norm";

/// Parses the transfer-curve CSV format: a `n_norm,v_norm` header, one
/// `n,v` row per sample sorted by `n`, both columns within `[-1, 1]`.
/// Lines starting with `#` and blank lines are ignored.
pub fn parse_transfer_curve(text: &str) -> Result<Vec<(f64, f64)>, NeuronError> {
    let err = |line: usize, message: String| NeuronError::Curve { line, message };
    let mut rows = Vec::new();
    let mut seen_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !seen_header {
            let header: Vec<&str> = line.split(',').map(str::trim).collect();
            if header.join(",") != CURVE_HEADER {
                return Err(err(line_no, format!("expected header {CURVE_HEADER:?}")));
            }
            seen_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(err(line_no, format!("expected 2 columns, found {}", fields.len())));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| err(line_no, format!("bad number {s:?}: {e}")))
        };
        let (n, v) = (parse(fields[0])?, parse(fields[1])?);
        for x in [n, v] {
            if !(-1.0..=1.0).contains(&x) {
                return Err(err(line_no, format!("value {x} outside [-1, 1]")));
            }
        }
        if let Some(&(prev, _)) = rows.last() {
            if n < prev {
                return Err(err(line_no, "rows must be sorted by n_norm".into()));
            }
        }
        rows.push((n, v));
    }
    if !seen_header {
        return Err(err(0, format!("missing {CURVE_HEADER:?} header")));
    }
    Ok(rows)
}

pub fn read_transfer_curve(path: &Path) -> Result<Vec<(f64, f64)>, NeuronError> {
    let text = fs::read_to_string(path).map_err(|source| NeuronError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_transfer_curve(&text)
}

pub fn write_transfer_curve(path: &Path, points: &[(f64, f64)]) -> std::io::Result<()> {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for (n, v) in points {
        out.push_str(&format!("{n},{v}\n"));
    }
    fs::write(path, out)
}
