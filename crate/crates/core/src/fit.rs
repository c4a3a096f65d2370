//! Log-log slope fits.

/// Least-squares slope of `ln y` against `ln x`. `None` with fewer than two
/// usable points (non-positive values are skipped).
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && a.is_finite() && b.is_finite())
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Slope over the last `window` points.
pub fn windowed_slope(x: &[f64], y: &[f64], window: usize) -> Option<f64> {
    let n = x.len().min(y.len());
    let start = n.saturating_sub(window);
    loglog_slope(&x[start..n], &y[start..n])
}

/// Both slopes reported for a sweep: full least squares and last three points.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SlopeFit {
    pub full: Option<f64>,
    pub last3: Option<f64>,
}

pub fn fit(x: &[f64], y: &[f64]) -> SlopeFit {
    SlopeFit {
        full: loglog_slope(x, y),
        last3: windowed_slope(x, y, 3),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn recovers_power_laws(p in -4.0f64..4.0, c in 0.01f64..100.0) {
            let x = [1.0f64, 3.0, 10.0, 100.0];
            let y: Vec<f64> = x.iter().map(|v| c * v.powf(p)).collect();
            prop_assert!((loglog_slope(&x, &y).unwrap() - p).abs() < 1e-10);
            prop_assert!((windowed_slope(&x, &y, 3).unwrap() - p).abs() < 1e-10);
        }
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(loglog_slope(&[1.0], &[2.0]), None);
        assert_eq!(loglog_slope(&[2.0, 2.0], &[1.0, 3.0]), None);
        assert_eq!(loglog_slope(&[1.0, 2.0], &[0.0, 3.0]), None);
    }
}
