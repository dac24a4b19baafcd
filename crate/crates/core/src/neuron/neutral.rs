/// Potential at which an excitatory synapse of weight `w + ε` and an
/// inhibitory synapse of weight `-w`, firing at the same rate, cancel exactly
/// on a voltage-domain neuron with channel-length modulation `lambda` and
/// rails `[v_low, v_high]`.
///
/// Solving `(w + ε)·f+(V) = w·f-(V)` gives
///
/// ```text
/// V* = ε / (λ·(A + B)),   A = (w + ε) / (1 + λ·V_H),   B = w / (1 - λ·V_L)
/// ```
///
/// which for rails `±1` is `ε(1 + λ) / (λ(2w + ε))`. Returns `None` for an
/// ideal neuron (`λ = 0`) or when `V*` lies above the upper rail.
///
/// Panics unless `w > 0`, `ε >= 0`, `λ >= 0` and `v_low < 0 < v_high`.
pub fn neutral_point(lambda: f64, w: f64, eps: f64, v_high: f64, v_low: f64) -> Option<f64> {
    assert!(w > 0.0, "w must be positive");
    assert!(eps >= 0.0, "epsilon must be non-negative");
    assert!(lambda >= 0.0, "lambda must be non-negative");
    assert!(v_low < 0.0 && v_high > 0.0, "rails must straddle zero");
    if lambda == 0.0 {
        return None;
    }
    let a = (w + eps) / (1.0 + lambda * v_high);
    let b = w / (1.0 - lambda * v_low);
    let v = eps / (lambda * (a + b));
    (v <= v_high).then_some(v)
}
