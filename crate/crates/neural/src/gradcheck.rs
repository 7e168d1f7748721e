//! Central finite-difference verification of analytic gradients.

use crate::{NeuralError, Result};

pub const DEFAULT_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckReport {
    pub max_rel_error: f64,
    /// Coordinate where the maximum was attained.
    pub worst_coordinate: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// `|a − n| / max(|a|, |n|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares the gradient returned by `f` at `point` with central
/// differences `(f(x + h·eᵢ) − f(x − h·eᵢ)) / 2h` for every coordinate.
pub fn gradcheck<F>(mut f: F, point: &[f64], h: f64) -> Result<GradcheckReport>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    if !(h > 0.0) {
        return Err(NeuralError::invalid(format!("step must be positive, got {h}")));
    }
    let (value, grad) = f(point)?;
    if !value.is_finite() {
        return Err(NeuralError::NonFinite {
            coordinate: 0,
            detail: format!("objective is {value} at the base point"),
        });
    }
    if grad.len() != point.len() {
        return Err(NeuralError::shape(format!(
            "gradient has {} entries for a {}-dimensional point",
            grad.len(),
            point.len()
        )));
    }
    let mut report = GradcheckReport {
        max_rel_error: 0.0,
        worst_coordinate: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    let mut x = point.to_vec();
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + h;
        let (fp, _) = f(&x)?;
        x[i] = orig - h;
        let (fm, _) = f(&x)?;
        x[i] = orig;
        let numeric = (fp - fm) / (2.0 * h);
        let analytic = grad[i];
        if !numeric.is_finite() || !analytic.is_finite() {
            return Err(NeuralError::NonFinite {
                coordinate: i,
                detail: format!("analytic {analytic}, f(x+h) {fp}, f(x-h) {fm}"),
            });
        }
        let err = relative_error(analytic, numeric);
        if err > report.max_rel_error || i == 0 {
            report = GradcheckReport {
                max_rel_error: err,
                worst_coordinate: i,
                analytic,
                numeric,
            };
        }
    }
    Ok(report)
}
