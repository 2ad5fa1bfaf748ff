use crate::error::{invalid, Result};

/// Least-squares polynomial fit of `y` sampled at `x`, evaluated at `at`.
fn polyfit_eval(x: &[f64], y: &[f64], order: usize, at: &[f64]) -> Result<Vec<f64>> {
    let m = order + 1;
    // Normal equations on abscissae scaled to [-1, 1].
    let (lo, hi) = (x[0], x[x.len() - 1]);
    let mid = 0.5 * (lo + hi);
    let half = (0.5 * (hi - lo)).max(1.0);
    let scale = |v: f64| (v - mid) / half;
    let mut a = vec![vec![0.0; m + 1]; m];
    for (&xi, &yi) in x.iter().zip(y) {
        let t = scale(xi);
        let mut pows = vec![1.0; 2 * m];
        for k in 1..2 * m {
            pows[k] = pows[k - 1] * t;
        }
        for r in 0..m {
            for c in 0..m {
                a[r][c] += pows[r + c];
            }
            a[r][m] += pows[r] * yi;
        }
    }
    // Gaussian elimination with partial pivoting.
    for col in 0..m {
        let piv = (col..m)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[piv][col].abs() < 1e-300 {
            return invalid("singular Savitzky-Golay system");
        }
        a.swap(col, piv);
        for r in 0..m {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=m {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    let coef: Vec<f64> = (0..m).map(|r| a[r][m] / a[r][r]).collect();
    Ok(at
        .iter()
        .map(|&v| {
            let t = scale(v);
            coef.iter().rev().fold(0.0, |acc, c| acc * t + c)
        })
        .collect())
}

/// Savitzky-Golay smoothing with a centered window of `window` samples.
/// The first and last half-windows are evaluated from the fit of the first
/// and last full window, so polynomials up to `order` are reproduced exactly
/// everywhere.
pub fn savitzky_golay_smooth(y: &[f64], window: usize, order: usize) -> Result<Vec<f64>> {
    if window % 2 == 0 || window <= order {
        return invalid(format!(
            "Savitzky-Golay needs an odd window larger than the order (window {window}, order {order})"
        ));
    }
    if y.len() < window {
        return invalid("signal shorter than the Savitzky-Golay window");
    }
    let half = window / 2;
    let xs: Vec<f64> = (0..window).map(|i| i as f64 - half as f64).collect();

    // Convolution weights for the window center: fit to unit vectors.
    let mut weights = vec![0.0; window];
    for (j, w) in weights.iter_mut().enumerate() {
        let mut e = vec![0.0; window];
        e[j] = 1.0;
        *w = polyfit_eval(&xs, &e, order, &[0.0])?[0];
    }

    let n = y.len();
    let mut out = vec![0.0; n];
    for i in half..n - half {
        out[i] = weights
            .iter()
            .zip(&y[i - half..=i + half])
            .map(|(w, v)| w * v)
            .sum();
    }
    let head_x: Vec<f64> = (0..window).map(|i| i as f64).collect();
    let head_at: Vec<f64> = (0..half).map(|i| i as f64).collect();
    let head = polyfit_eval(&head_x, &y[..window], order, &head_at)?;
    out[..half].copy_from_slice(&head);
    let tail_x: Vec<f64> = ((n - window)..n).map(|i| i as f64).collect();
    let tail_at: Vec<f64> = ((n - half)..n).map(|i| i as f64).collect();
    let tail = polyfit_eval(&tail_x, &y[n - window..], order, &tail_at)?;
    out[n - half..].copy_from_slice(&tail);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reproduces_polynomials() {
        let ramp: Vec<f64> = (0..200).map(|i| 0.5 + 0.01 * i as f64).collect();
        let out = savitzky_golay_smooth(&ramp, 21, 1).unwrap();
        for (a, b) in ramp.iter().zip(&out) {
            assert!((a - b).abs() < 1e-9);
        }
        let cubic: Vec<f64> = (0..300)
            .map(|i| {
                let t = i as f64 / 100.0;
                1.0 - 2.0 * t + 0.5 * t * t - 0.1 * t * t * t
            })
            .collect();
        let out = savitzky_golay_smooth(&cubic, 65, 3).unwrap();
        for (a, b) in cubic.iter().zip(&out) {
            assert!((a - b).abs() < 1e-8);
        }
        let c = vec![3.25; 100];
        let out = savitzky_golay_smooth(&c, 9, 2).unwrap();
        assert!(out.iter().all(|v| (v - 3.25).abs() < 1e-12));
    }

    #[test]
    fn reduces_noise_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let clean: Vec<f64> = (0..2000).map(|i| (i as f64 * 0.01).sin()).collect();
        let noisy: Vec<f64> = clean.iter().map(|v| v + rng.gen_range(-0.3..0.3)).collect();
        let out = savitzky_golay_smooth(&noisy, 31, 3).unwrap();
        let var = |a: &[f64]| a.iter().zip(&clean).map(|(x, c)| (x - c).powi(2)).sum::<f64>();
        assert!(var(&out) < var(&noisy));
    }

    #[test]
    fn rejects_bad_parameters() {
        let y = vec![0.0; 100];
        assert!(savitzky_golay_smooth(&y, 10, 3).is_err());
        assert!(savitzky_golay_smooth(&y, 3, 3).is_err());
        assert!(savitzky_golay_smooth(&y[..5], 7, 2).is_err());
    }
}
