//! Central finite differences and gradient comparison.
//!
//! Used by the gradient-check suites (and the `check` CLI command) to verify
//! every analytic gradient in the crate against an independent numerical
//! estimate.

/// Central difference df/dx ≈ (f(x+h) − f(x−h)) / 2h of a scalar function.
pub fn central_diff<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Central-difference gradient of a scalar function of a coordinate vector.
pub fn central_diff_grad<F>(f: F, point: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut grad = Vec::with_capacity(point.len());
    let mut probe = point.to_vec();
    for i in 0..point.len() {
        probe[i] = point[i] + h;
        let plus = f(&probe);
        probe[i] = point[i] - h;
        let minus = f(&probe);
        probe[i] = point[i];
        grad.push((plus - minus) / (2.0 * h));
    }
    grad
}

/// Relative error between an analytic and a numerical value.
///
/// Normalized by `max(|a|, |b|, floor)` so that near-zero pairs compare on an
/// absolute scale instead of blowing up; `floor` should sit well above the
/// rounding noise of the finite-difference estimate.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Largest per-component relative error between two gradients.
///
/// Panics if the lengths differ; that is a harness bug, not a data condition.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &b)| rel_err(a, b, floor))
        .fold(0.0, f64::max)
}

/// Default normalization floor for comparisons of O(1) losses.
pub const DEFAULT_FLOOR: f64 = 1e-3;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_diff_matches_polynomial_derivative() {
        // f(x) = x^3 - 2x, f'(2) = 10
        let d = central_diff(|x| x * x * x - 2.0 * x, 2.0, 1e-5);
        assert!((d - 10.0).abs() < 1e-8);
    }

    #[test]
    fn grad_of_quadratic_form() {
        let f = |v: &[f64]| v[0] * v[0] + 3.0 * v[0] * v[1];
        let g = central_diff_grad(f, &[1.0, 2.0], 1e-6);
        assert!((g[0] - 8.0).abs() < 1e-6);
        assert!((g[1] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn rel_err_uses_floor_near_zero() {
        assert_eq!(rel_err(0.0, 0.0, 1e-3), 0.0);
        assert!(rel_err(1e-9, 0.0, 1e-3) < 1e-5);
    }
}
