//! Per-spike membrane accumulation models.
//!
//! Every model answers one question: when a synapse of weight `w` delivers a
//! spike to a neuron sitting at potential `v`, where does the potential end up?
//! Potentials are in normalized units where the firing threshold is `1.0`.
//!
//! * [`AccumulationModel::Ideal`] adds exactly `w`.
//! * [`AccumulationModel::TimeDomain`] adds `gain * w` and never clips. The
//!   potential lives in an oscillator phase, which can wind without limit.
//! * [`AccumulationModel::VoltageClm`] is a capacitor charged by current
//!   sources whose output depends on their drain-source voltage (channel-length
//!   modulation, `I ∝ 1 + λ·V_DS`). The charging source sits between the
//!   upper rail and the capacitor, the discharging source between the capacitor
//!   and the lower rail:
//!
//!   ```text
//!   f+(v) = (1 + λ(V_H - v)) / (1 + λ·V_H)      w >= 0
//!   f-(v) = (1 + λ(v - V_L)) / (1 - λ·V_L)      w <  0
//!   ```
//!
//!   Both are normalized to `1` at `v = 0`, clamped at `>= 0`, and the result
//!   is clipped to `[V_L, V_H]`. Positive steps shrink as the potential rises
//!   and negative steps shrink as it falls.
//! * [`AccumulationModel::Table`] uses a gain curve derived from a measured
//!   transfer curve, clipped to `[-1, 1]`.
//! * [`AccumulationModel::Rescaled`] stretches another model's transfer curve
//!   vertically by `c`: `Δv = c · Δv_base(v / c, w)`, with bounds scaled by `c`.

mod curve;
mod neutral;
mod rescale;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use curve::{
    derive_gain_from_curve, parse_transfer_curve, potential_curve, read_transfer_curve,
    write_transfer_curve, GainTable,
};
pub use neutral::neutral_point;
pub use rescale::{fit_factor, rescale, RescaleMode, SWEEP_FACTORS};

/// Default channel-length-modulation strength in normalized units.
pub const DEFAULT_LAMBDA: f64 = 0.5;
/// Per-spike weight used when probing transfer curves.
pub const PROBE_WEIGHT: f64 = 0.01;
/// Number of spikes used when probing transfer curves.
pub const PROBE_SPIKES: usize = 100;

#[derive(Debug, Error)]
pub enum NeuronError {
    #[error("potential {v} is outside the legal range [{low}, {high}]")]
    OutOfRange { v: f64, low: f64, high: f64 },
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
    #[error("transfer curve is not strictly increasing at point {index}")]
    NotMonotone { index: usize },
    #[error("transfer curve needs at least 3 points, found {found}")]
    TooFewPoints { found: usize },
    #[error("base model never leaves zero; cannot fit a rescale factor")]
    DegenerateBase,
    #[error("transfer curve line {line}: {message}")]
    Curve { line: usize, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Membrane accumulation behaviour of a neuron family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AccumulationModel {
    Ideal,
    VoltageClm {
        lambda: f64,
        v_low: f64,
        v_high: f64,
    },
    TimeDomain {
        gain: f64,
    },
    Table(GainTable),
    Rescaled {
        base: Box<AccumulationModel>,
        factor: f64,
    },
}

impl AccumulationModel {
    /// Voltage-domain neuron on the default rails `[-1, 1]`.
    pub fn voltage(lambda: f64) -> Result<Self, NeuronError> {
        Self::voltage_with_rails(lambda, -1.0, 1.0)
    }

    pub fn voltage_with_rails(lambda: f64, v_low: f64, v_high: f64) -> Result<Self, NeuronError> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(NeuronError::InvalidParameter(format!(
                "lambda {lambda} must be finite and >= 0"
            )));
        }
        if !(v_low < 0.0 && v_high > 0.0 && v_low.is_finite() && v_high.is_finite()) {
            return Err(NeuronError::InvalidParameter(format!(
                "rails must satisfy v_low < 0 < v_high, got [{v_low}, {v_high}]"
            )));
        }
        Ok(Self::VoltageClm {
            lambda,
            v_low,
            v_high,
        })
    }

    pub fn time_domain(gain: f64) -> Result<Self, NeuronError> {
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(NeuronError::InvalidParameter(format!(
                "time-domain gain {gain} must be positive"
            )));
        }
        Ok(Self::TimeDomain { gain })
    }

    pub fn table(curve: &[(f64, f64)]) -> Result<Self, NeuronError> {
        Ok(Self::Table(derive_gain_from_curve(curve)?))
    }

    /// Wraps `base` with a constant vertical stretch `factor`.
    pub fn rescaled(base: AccumulationModel, factor: f64) -> Result<Self, NeuronError> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(NeuronError::InvalidParameter(format!(
                "rescale factor {factor} must be positive"
            )));
        }
        Ok(Self::Rescaled {
            base: Box::new(base),
            factor,
        })
    }

    /// Short name used in reports.
    pub fn name(&self) -> String {
        match self {
            Self::Ideal => "ideal".into(),
            Self::VoltageClm { lambda, .. } => format!("voltage(lambda={lambda})"),
            Self::TimeDomain { gain } => format!("time(gain={gain})"),
            Self::Table(_) => "table".into(),
            Self::Rescaled { base, factor } => format!("{}*{factor}", base.name()),
        }
    }

    /// Clipping range of the potential, or `None` for unbounded models.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match self {
            Self::Ideal | Self::TimeDomain { .. } => None,
            Self::VoltageClm { v_low, v_high, .. } => Some((*v_low, *v_high)),
            Self::Table(_) => Some((-1.0, 1.0)),
            Self::Rescaled { base, factor } => base.bounds().map(|(l, h)| (l * factor, h * factor)),
        }
    }

    /// Effective multiplier on a weight of the given sign at potential `v`.
    #[inline]
    pub fn gain(&self, v: f64, excitatory: bool) -> f64 {
        match self {
            Self::Ideal => 1.0,
            Self::TimeDomain { gain } => *gain,
            Self::VoltageClm {
                lambda,
                v_low,
                v_high,
            } => {
                let f = if excitatory {
                    (1.0 + lambda * (v_high - v)) / (1.0 + lambda * v_high)
                } else {
                    (1.0 + lambda * (v - v_low)) / (1.0 - lambda * v_low)
                };
                f.max(0.0)
            }
            Self::Table(t) => t.eval(v),
            Self::Rescaled { base, factor } => factor * base.gain(v / factor, excitatory),
        }
    }

    #[inline]
    pub fn clip(&self, v: f64) -> f64 {
        match self.bounds() {
            Some((lo, hi)) => v.clamp(lo, hi),
            None => v,
        }
    }

    /// Potential after one spike of weight `w` arrives at potential `v`.
    ///
    /// Does not validate `v`; see [`AccumulationModel::increment`].
    #[inline]
    pub fn apply(&self, v: f64, w: f64) -> f64 {
        self.clip(v + w * self.gain(v, w >= 0.0))
    }

    /// Potential after several spikes arrive at once: every contribution is
    /// weighted by the gain at the current potential, then the sum is clipped.
    /// `excitatory` and `inhibitory` are the summed positive and negative drive.
    #[inline]
    pub fn apply_simultaneous(&self, v: f64, excitatory: f64, inhibitory: f64) -> f64 {
        let mut next = v;
        if excitatory != 0.0 {
            next += excitatory * self.gain(v, true);
        }
        if inhibitory != 0.0 {
            next += inhibitory * self.gain(v, false);
        }
        self.clip(next)
    }

    /// Rejects potentials outside the model's legal range.
    pub fn check_potential(&self, v: f64) -> Result<(), NeuronError> {
        let (low, high) = self.bounds().unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
        if !(v.is_finite() && v >= low && v <= high) {
            return Err(NeuronError::OutOfRange { v, low, high });
        }
        Ok(())
    }

    /// Potential change `Δv` caused by one spike of weight `w` at potential `v`.
    pub fn increment(&self, v: f64, w: f64) -> Result<f64, NeuronError> {
        self.check_potential(v)?;
        Ok(self.apply(v, w) - v)
    }
}
