use crate::error::{invalid, Result};

/// Schroeder backward-integrated energy decay curve in dB, normalized to 0 dB
/// at the first sample. Samples after the last nonzero value are `-inf`.
pub fn edc(ir: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = ir.iter().map(|v| v * v).sum();
    if total <= 0.0 || !total.is_finite() {
        return invalid("energy decay curve needs a response with nonzero energy");
    }
    let mut out = vec![0.0; ir.len()];
    let mut acc = 0.0;
    for i in (0..ir.len()).rev() {
        acc += ir[i] * ir[i];
        out[i] = acc;
    }
    // Forward pass so rounding in the running sum can never make the curve rise.
    let mut prev = f64::INFINITY;
    for v in &mut out {
        let db = if *v > 0.0 {
            10.0 * (*v / total).log10()
        } else {
            f64::NEG_INFINITY
        };
        *v = db.min(prev);
        prev = *v;
    }
    out[0] = 0.0;
    Ok(out)
}
