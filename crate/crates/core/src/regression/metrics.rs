//! MAE, MAPE and the weekly-dose safety window.

use serde::Serialize;

use super::RegressionError;

/// Relative half-width of the safety window around the true weekly dose.
pub const WINDOW: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClinicalReport {
    pub n: usize,
    pub mae: f64,
    /// Percent.
    pub mape: f64,
    pub under: f64,
    pub in_window: f64,
    pub over: f64,
}

/// Doses are daily; the window compares weekly totals.
pub fn clinical_metrics(
    predicted: &[f64],
    truth: &[f64],
) -> Result<ClinicalReport, RegressionError> {
    if predicted.len() != truth.len() {
        return Err(RegressionError::DimMismatch(truth.len(), predicted.len()));
    }
    if truth.is_empty() {
        return Err(RegressionError::EmptyValidation);
    }
    if let Some((i, &y)) = truth.iter().enumerate().find(|(_, y)| !(**y > 0.0)) {
        return Err(RegressionError::NonPositiveDose(y, i));
    }
    let n = truth.len();
    let (mut abs, mut pct) = (0.0, 0.0);
    let (mut under, mut inside, mut over) = (0usize, 0usize, 0usize);
    for (&p, &y) in predicted.iter().zip(truth) {
        abs += (p - y).abs();
        pct += (p - y).abs() / y;
        let (wp, wy) = (7.0 * p, 7.0 * y);
        if wp < wy * (1.0 - WINDOW) {
            under += 1;
        } else if wp > wy * (1.0 + WINDOW) {
            over += 1;
        } else {
            inside += 1;
        }
    }
    let nf = n as f64;
    Ok(ClinicalReport {
        n,
        mae: abs / nf,
        mape: 100.0 * pct / nf,
        under: under as f64 / nf,
        in_window: inside as f64 / nf,
        over: over as f64 / nf,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn perfect_model() {
        let y = [2.0, 5.0, 7.5];
        let r = clinical_metrics(&y, &y).unwrap();
        assert_eq!((r.mae, r.mape, r.in_window), (0.0, 0.0, 1.0));
    }

    #[test]
    fn constant_over_prediction() {
        let y = [2.0, 5.0, 7.5, 10.0];
        let p: Vec<f64> = y.iter().map(|v| v * 1.3).collect();
        let r = clinical_metrics(&p, &y).unwrap();
        assert_eq!((r.in_window, r.over, r.under), (0.0, 1.0, 0.0));
        assert!((r.mape - 30.0).abs() < 1e-9);
        let mae = y.iter().map(|v| 0.3 * v).sum::<f64>() / 4.0;
        assert!((r.mae - mae).abs() < 1e-12);
    }

    #[test]
    fn window_edges_are_inside() {
        let r = clinical_metrics(&[4.0, 6.0, 3.9], &[5.0, 5.0, 5.0]).unwrap();
        assert!((r.in_window - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.under - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            clinical_metrics(&[], &[]),
            Err(RegressionError::EmptyValidation)
        ));
        assert!(matches!(
            clinical_metrics(&[1.0], &[0.0]),
            Err(RegressionError::NonPositiveDose(..))
        ));
        assert!(clinical_metrics(&[1.0], &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn fractions_partition(pairs in prop::collection::vec((0.0f64..30.0, 0.1f64..30.0), 1..200)) {
            let (p, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let r = clinical_metrics(&p, &y).unwrap();
            for f in [r.under, r.in_window, r.over] {
                prop_assert!((0.0..=1.0).contains(&f));
            }
            prop_assert!((r.under + r.in_window + r.over - 1.0).abs() < 1e-9);
        }
    }
}
