//! Smoothing kernels.

/// Order-4 kernel `K(x) = (45 - 150 x^2 + 105 x^4)/32` on `[-1, 1]`.
///
/// Integrates to one with vanishing second moment, which pushes the
/// smoothing bias of the curve estimator to `O(b^4)`.
pub fn kernel_k(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        return 0.0;
    }
    let x2 = x * x;
    (45.0 - 150.0 * x2 + 105.0 * x2 * x2) / 32.0
}

/// Epanechnikov kernel `H(x) = 0.75 (1 - x^2)` on `[-1, 1]`.
pub fn kernel_h(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        return 0.0;
    }
    0.75 * (1.0 - x * x)
}
