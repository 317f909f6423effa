use crate::error::{Error, Result};

/// Compares an analytic gradient against central finite differences.
///
/// `f` returns the scalar value and its analytic gradient at the given
/// parameters. The result is `max_i |g_i − fd_i| / max(1, |g_i|)`.
pub fn grad_check<F>(mut f: F, theta: &[f64], eps: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (value, analytic) = f(theta);
    if !value.is_finite() {
        return Err(Error::Numeric("function is not finite at θ".into()));
    }
    if analytic.len() != theta.len() {
        return Err(Error::shape(format!(
            "gradient has {} entries for {} parameters",
            analytic.len(),
            theta.len()
        )));
    }
    let mut probe = theta.to_vec();
    let mut worst = 0.0f64;
    for i in 0..theta.len() {
        probe[i] = theta[i] + eps;
        let plus = f(&probe).0;
        probe[i] = theta[i] - eps;
        let minus = f(&probe).0;
        probe[i] = theta[i];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Numeric(format!("non-finite value when perturbing coordinate {i}")));
        }
        let numeric = (plus - minus) / (2.0 * eps);
        let err = (analytic[i] - numeric).abs() / analytic[i].abs().max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}
