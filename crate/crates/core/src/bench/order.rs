//! Empirical convergence order of a residual history.

/// Least-squares slope of `log r_{k+1}` against `log r_k` over the last
/// `pairs` consecutive pairs of positive residuals. `None` when fewer than two
/// usable pairs exist or the abscissae coincide.
pub fn fit_order(residuals: &[f64], pairs: usize) -> Option<f64> {
    let logs: Vec<(f64, f64)> = residuals
        .windows(2)
        .filter(|w| w[0] > 0.0 && w[1] > 0.0 && w[0].is_finite() && w[1].is_finite())
        .map(|w| (w[0].ln(), w[1].ln()))
        .collect();
    let tail = &logs[logs.len().saturating_sub(pairs)..];
    if tail.len() < 2 {
        return None;
    }
    let n = tail.len() as f64;
    let mx = tail.iter().map(|p| p.0).sum::<f64>() / n;
    let my = tail.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = tail.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = tail.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Number of trailing pairs used by the harness.
pub const ORDER_PAIRS: usize = 3;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_orders() {
        let quad: Vec<f64> = (0..5).map(|k| 0.5f64.powi(1 << k)).collect();
        assert!((fit_order(&quad, 3).unwrap() - 2.0).abs() < 1e-12);
        let lin: Vec<f64> = (0..30).map(|k| 0.7f64.powi(k)).collect();
        assert!((fit_order(&lin, 3).unwrap() - 1.0).abs() < 1e-12);
        assert!(fit_order(&[1.0, 0.5], 3).is_none());
        assert!(fit_order(&[1.0, 1.0, 1.0], 3).is_none());
    }
}
