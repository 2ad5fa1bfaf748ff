use crate::error::{invalid, Result};

/// Unity-plateau window with raised-cosine rise and fall of `flank_taps`
/// samples each. Total length is `round(total_ms * fs / 1000)`.
pub fn hann_flank_window(total_ms: f64, flank_taps: usize, sample_rate: u32) -> Result<Vec<f64>> {
    if !(total_ms > 0.0) {
        return invalid("window duration must be positive");
    }
    let n = (total_ms * f64::from(sample_rate) / 1000.0).round() as usize;
    if n < 2 * flank_taps || n == 0 {
        return invalid(format!(
            "window of {n} samples cannot hold two flanks of {flank_taps} taps"
        ));
    }
    let mut w = vec![1.0; n];
    for i in 0..flank_taps {
        let phase = std::f64::consts::PI * (i as f64 + 1.0) / (flank_taps as f64 + 1.0);
        let v = 0.5 * (1.0 - phase.cos());
        w[i] = v;
        w[n - 1 - i] = v;
    }
    Ok(w)
}

/// Symmetric Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos()))
        .collect()
}

/// Zeroth-order modified Bessel function of the first kind.
pub(crate) fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Kaiser window value at normalized position `u` in [-1, 1].
pub(crate) fn kaiser(u: f64, beta: f64) -> f64 {
    if u.abs() > 1.0 {
        return 0.0;
    }
    bessel_i0(beta * (1.0 - u * u).sqrt()) / bessel_i0(beta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_window_shape() {
        let w = hann_flank_window(3.0, 32, 44100).unwrap();
        assert_eq!(w.len(), 132);
        assert_eq!(w.iter().filter(|v| **v == 1.0).count(), 68);
        for i in 0..w.len() {
            assert!((w[i] - w[w.len() - 1 - i]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_flank_is_rectangular() {
        let w = hann_flank_window(1.0, 0, 8000).unwrap();
        assert_eq!(w, vec![1.0; 8]);
    }

    #[test]
    fn window_shorter_than_flanks_fails() {
        assert!(hann_flank_window(1.0, 32, 44100).is_err());
    }

    #[test]
    fn kaiser_edges() {
        assert!((kaiser(0.0, 8.0) - 1.0).abs() < 1e-15);
        assert!(kaiser(1.0, 8.0) < 1e-2);
        assert_eq!(kaiser(1.5, 8.0), 0.0);
    }
}
