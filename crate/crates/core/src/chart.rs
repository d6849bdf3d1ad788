//! The Poincaré ball model: background metric, defining functions and the
//! KID solutions of the hyperbolic metric.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::metric::{gradient_of, hessian_of, Background, Christoffel, MetricField, ScalarField};
use crate::{Matrix, Vector};

pub const MIN_DIM: usize = 3;
pub const MAX_DIM: usize = 6;

pub fn check_dim(n: usize) -> Result<()> {
    if (MIN_DIM..=MAX_DIM).contains(&n) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(n))
    }
}

/// A point of the open unit ball.
#[derive(Debug, Clone, PartialEq)]
pub struct BallPoint(Vector);

impl BallPoint {
    pub fn new(x: Vector) -> Result<Self> {
        if x.iter().all(|v| v.is_finite()) && x.norm() < 1.0 {
            Ok(Self(x))
        } else {
            Err(Error::OutsideBall(x.iter().copied().collect()))
        }
    }

    /// The point `r·ω` for a unit vector `ω`.
    pub fn polar(omega: &Vector, r: f64) -> Result<Self> {
        Self::new(omega * r)
    }

    pub fn coords(&self) -> &Vector {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn radius(&self) -> f64 {
        self.0.norm()
    }

    pub fn direction(&self) -> Result<Vector> {
        let r = self.radius();
        if r == 0.0 {
            Err(Error::GradientAtOrigin)
        } else {
            Ok(&self.0 / r)
        }
    }
}

impl AsRef<Vector> for BallPoint {
    fn as_ref(&self) -> &Vector {
        &self.0
    }
}

/// `g = 4/(1−r²)² δ`.
pub fn hyperbolic_metric(n: usize) -> Result<MetricField> {
    check_dim(n)?;
    Ok(MetricField::new(n, Background::Hyperbolic, "hyperbolic"))
}

/// `ḡ = ρ²g = 16/(1+r)⁴ δ` for the canonical `ρ`.
pub fn compactified_metric(n: usize) -> Result<MetricField> {
    check_dim(n)?;
    Ok(MetricField::new(n, Background::Compactified, "compactified"))
}

/// Canonical `ρ = 2(1−r)/(1+r)`.
pub fn canonical_rho(r: f64) -> f64 {
    2.0 * (1.0 - r) / (1.0 + r)
}

/// Radius of the level set `ρ = ε` of the canonical defining function.
pub fn radius_of(eps: f64) -> f64 {
    (2.0 - eps) / (2.0 + eps)
}

struct CanonicalRho;

impl ScalarField for CanonicalRho {
    fn value(&self, x: &Vector) -> f64 {
        canonical_rho(x.norm())
    }

    fn gradient(&self, x: &Vector) -> Option<Vector> {
        let r = x.norm();
        (r > 0.0).then(|| x * (-4.0 / ((1.0 + r) * (1.0 + r) * r)))
    }

    fn hessian(&self, x: &Vector) -> Option<Matrix> {
        let r = x.norm();
        if r == 0.0 {
            return None;
        }
        let n = x.len();
        let w = x / r;
        let a = -4.0 / ((1.0 + r) * (1.0 + r));
        let da = 8.0 / (1.0 + r).powi(3);
        let proj = Matrix::identity(n, n) - &w * w.transpose();
        Some(&w * w.transpose() * da + proj * (a / r))
    }
}

struct Rescaled {
    base: Arc<dyn ScalarField>,
    log_factor: Arc<dyn ScalarField>,
}

impl ScalarField for Rescaled {
    fn value(&self, x: &Vector) -> f64 {
        self.log_factor.value(x).exp() * self.base.value(x)
    }

    fn gradient(&self, x: &Vector) -> Option<Vector> {
        let e = self.log_factor.value(x).exp();
        let df = gradient_of(self.log_factor.as_ref(), x);
        let db = self.base.gradient(x)?;
        Some((db + df * self.base.value(x)) * e)
    }
}

/// A defining function `ρ` for the boundary sphere.
#[derive(Clone)]
pub struct DefiningFunction {
    dim: usize,
    field: Arc<dyn ScalarField>,
    canonical: bool,
}

impl std::fmt::Debug for DefiningFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DefiningFunction")
            .field("dim", &self.dim)
            .field("canonical", &self.canonical)
            .finish()
    }
}

/// The canonical adapted defining function `ρ = 2(1−r)/(1+r)`.
pub fn adapted_rho(n: usize) -> DefiningFunction {
    DefiningFunction {
        dim: n,
        field: Arc::new(CanonicalRho),
        canonical: true,
    }
}

impl DefiningFunction {
    /// `e^f ρ`; a defining function for the same boundary when `f` is smooth.
    pub fn rescaled(&self, log_factor: Arc<dyn ScalarField>) -> DefiningFunction {
        DefiningFunction {
            dim: self.dim,
            field: Arc::new(Rescaled {
                base: self.field.clone(),
                log_factor,
            }),
            canonical: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_canonical(&self) -> bool {
        self.canonical
    }

    pub fn eval(&self, x: &Vector) -> f64 {
        self.field.value(x)
    }

    /// The covector `dρ`; undefined at the origin.
    pub fn grad(&self, x: &Vector) -> Result<Vector> {
        if x.norm() == 0.0 {
            return Err(Error::GradientAtOrigin);
        }
        Ok(gradient_of(self.field.as_ref(), x))
    }

    pub fn hessian(&self, x: &Vector) -> Result<Matrix> {
        if x.norm() == 0.0 {
            return Err(Error::GradientAtOrigin);
        }
        Ok(hessian_of(self.field.as_ref(), x))
    }

    pub fn as_scalar_field(&self) -> Arc<dyn ScalarField> {
        self.field.clone()
    }

    /// Radius along `ω` at which `ρ = ε`, searched in the collar `r ∈ [½, 1)`.
    pub fn radius_at(&self, omega: &Vector, eps: f64) -> Result<f64> {
        if self.canonical {
            return Ok(radius_of(eps));
        }
        let f = |r: f64| self.eval(&(omega * r)) - eps;
        let (mut lo, mut hi) = (0.5, 1.0 - 1e-15);
        if f(lo) < 0.0 || f(hi) > 0.0 {
            return Err(Error::InvalidSchedule(format!(
                "level set rho = {eps} not found in the collar along {:?}",
                omega.as_slice()
            )));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-16 {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// `(ρ²g)⁻¹(dρ, dρ)`, identically one for an adapted defining function.
    pub fn adaptedness(&self, g: &MetricField, x: &Vector) -> Result<f64> {
        let rho = self.eval(x);
        let d = self.grad(x)?;
        let ginv = g.inverse(x)?;
        Ok(d.dot(&(ginv * &d)) / (rho * rho))
    }
}

/// Levi-Civita symbols of `metric` at an interior point.
pub fn christoffels(metric: &MetricField, x: &BallPoint) -> Result<Christoffel> {
    if metric.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: metric.dim(),
            found: x.dim(),
        });
    }
    metric.christoffels(x.coords())
}

/// A solution of the KID equation of the hyperbolic metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KidSolution {
    pub index: usize,
    pub dim: usize,
}

impl KidSolution {
    pub fn eval(&self, x: &Vector) -> f64 {
        let r2 = x.norm_squared();
        match self.index {
            0 => (1.0 + r2) / (1.0 - r2),
            i => 2.0 * x[i - 1] / (1.0 - r2),
        }
    }

    pub fn boundary_value(&self, omega: &Vector) -> f64 {
        match self.index {
            0 => 1.0,
            i => omega[i - 1],
        }
    }
}

impl ScalarField for KidSolution {
    fn value(&self, x: &Vector) -> f64 {
        self.eval(x)
    }

    fn gradient(&self, x: &Vector) -> Option<Vector> {
        let d = 1.0 - x.norm_squared();
        Some(match self.index {
            0 => x * (4.0 / (d * d)),
            i => {
                let mut g = x * (4.0 * x[i - 1] / (d * d));
                g[i - 1] += 2.0 / d;
                g
            }
        })
    }

    fn hessian(&self, x: &Vector) -> Option<Matrix> {
        let n = x.len();
        let d = 1.0 - x.norm_squared();
        let xx = x * x.transpose();
        Some(match self.index {
            0 => (Matrix::identity(n, n) * (2.0 / (d * d)) + &xx * (8.0 / (d * d * d))) * 2.0,
            i => {
                let c = i - 1;
                let mut h = Matrix::from_fn(n, n, |a, b| {
                    let mut v = 16.0 * x[c] * x[a] * x[b] / (d * d * d);
                    let mut s = 0.0;
                    if a == c {
                        s += x[b];
                    }
                    if b == c {
                        s += x[a];
                    }
                    if a == b {
                        s += x[c];
                    }
                    v += 4.0 * s / (d * d);
                    v
                });
                h = (&h + h.transpose()) * 0.5;
                h
            }
        })
    }
}

/// `V₀ = (1+r²)/(1−r²)` and `V_i = 2x_i/(1−r²)`.
pub fn kid_basis(n: usize) -> Vec<KidSolution> {
    (0..=n).map(|index| KidSolution { index, dim: n }).collect()
}

/// `∇∇V − gΔV + (n−1)gV` for the metric `g`.
pub fn kid_residual(g: &MetricField, v: &dyn ScalarField, x: &Vector) -> Result<Matrix> {
    let n = g.dim();
    let gamma = g.christoffels(x)?;
    let dv = gradient_of(v, x);
    let hess = hessian_of(v, x) - gamma.contract_upper(&dv);
    let gm = g.eval(x);
    let lap = (g.inverse(x)? * &hess).trace();
    Ok(hess - &gm * lap + gm * ((n as f64 - 1.0) * v.value(x)))
}
