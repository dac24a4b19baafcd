use super::{potential_curve, AccumulationModel, NeuronError};

/// Constant stretch factors swept when trying to rescue a nonlinear neuron.
pub const SWEEP_FACTORS: [f64; 6] = [1.2, 1.4, 1.5, 1.6, 1.8, 2.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RescaleMode {
    /// Stretch by a fixed factor.
    Constant(f64),
    /// Stretch so the base curve's largest excursion matches the ideal
    /// neuron's under the same probe (`n_spikes` spikes of `w_per_spike`).
    FitToMax { w_per_spike: f64, n_spikes: usize },
}

/// Ratio of the largest absolute potential on `reference` to that on `base`.
pub fn fit_factor(reference: &[(usize, f64)], base: &[(usize, f64)]) -> Result<f64, NeuronError> {
    let peak = |c: &[(usize, f64)]| c.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    let base_peak = peak(base);
    if base_peak == 0.0 {
        return Err(NeuronError::DegenerateBase);
    }
    Ok(peak(reference) / base_peak)
}

pub fn rescale(base: AccumulationModel, mode: RescaleMode) -> Result<AccumulationModel, NeuronError> {
    let factor = match mode {
        RescaleMode::Constant(c) => c,
        RescaleMode::FitToMax {
            w_per_spike,
            n_spikes,
        } => {
            let ideal = potential_curve(&AccumulationModel::Ideal, w_per_spike, n_spikes)?;
            let probe = potential_curve(&base, w_per_spike, n_spikes)?;
            fit_factor(&ideal, &probe)?
        }
    };
    AccumulationModel::rescaled(base, factor)
}
