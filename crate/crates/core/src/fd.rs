//! Finite-difference stencils shared by the curvature and tractor code.

use std::ops::{Add, Mul, Sub};

use crate::Vector;

/// Default step for first derivatives of smooth fields in ball coordinates.
pub const DEFAULT_STEP: f64 = 1e-5;

fn shifted(x: &Vector, k: usize, h: f64) -> Vector {
    let mut y = x.clone();
    y[k] += h;
    y
}

/// Second-order central difference of `f` along coordinate `k`.
pub fn central<T, F>(f: F, x: &Vector, k: usize, h: f64) -> T
where
    F: Fn(&Vector) -> T,
    T: Sub<Output = T> + Mul<f64, Output = T>,
{
    (f(&shifted(x, k, h)) - f(&shifted(x, k, -h))) * (0.5 / h)
}

/// Fourth-order five-point central difference of `f` along coordinate `k`.
pub fn central4<T, F>(f: F, x: &Vector, k: usize, h: f64) -> T
where
    F: Fn(&Vector) -> T,
    T: Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    let p1 = f(&shifted(x, k, h));
    let m1 = f(&shifted(x, k, -h));
    let p2 = f(&shifted(x, k, 2.0 * h));
    let m2 = f(&shifted(x, k, -2.0 * h));
    ((p1 - m1) * 8.0 - (p2 - m2)) * (1.0 / (12.0 * h))
}

/// Step for differentiating quantities that already contain one derivative
/// (Christoffel symbols, tractor slots). Shrinks towards the boundary, where
/// fields vary on the scale `1 - r`.
pub fn outer_step(x: &Vector) -> f64 {
    let r = x.norm();
    2e-3 * (1.0 - r).clamp(0.05, 0.5)
}
