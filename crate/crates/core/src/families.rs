//! Built-in metric families on the Poincaré ball.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chart::{canonical_rho, check_dim, hyperbolic_metric};
use crate::error::{Error, Result};
use crate::harmonics::Chi;
use crate::metric::{MetricField, SymTensorField};
use crate::{Matrix, Vector};

/// Radial coordinate `s = 2r/(1−r²)` of the warped-product form, with `s'` and `s''`.
fn areal_radius(r: f64) -> (f64, f64, f64) {
    let d = 1.0 - r * r;
    let s = 2.0 * r / d;
    let s1 = 2.0 * (1.0 + r * r) / (d * d);
    let s2 = 4.0 * r / (d * d) + 8.0 * r * (1.0 + r * r) / (d * d * d);
    (s, s1, s2)
}

/// `g_m − g` for the Schwarzschild–AdS metric `F_m⁻¹ds² + s²dΩ²`,
/// `F_m = 1 + s² − 2m s^{2−n}`, in ball coordinates: `a(r) ω⊗ω`.
#[derive(Debug, Clone, Copy)]
pub struct SchwarzschildPerturbation {
    pub dim: usize,
    pub mass: f64,
}

impl SchwarzschildPerturbation {
    fn lapse(&self, s: f64) -> (f64, f64) {
        let f0 = 1.0 + s * s;
        (f0, f0 - 2.0 * self.mass * s.powi(2 - self.dim as i32))
    }

    fn profile(&self, r: f64) -> (f64, f64) {
        let n = self.dim as i32;
        let (s, s1, s2) = areal_radius(r);
        let (f0, fm) = self.lapse(s);
        let a = 2.0 * self.mass * s.powi(2 - n) * s1 * s1 / (fm * f0);
        let df0 = 2.0 * s * s1;
        let dfm = df0 + 2.0 * self.mass * (n - 2) as f64 * s.powi(1 - n) * s1;
        let log_da = (2 - n) as f64 * s1 / s + 2.0 * s2 / s1 - dfm / fm - df0 / f0;
        (a, a * log_da)
    }
}

impl SymTensorField for SchwarzschildPerturbation {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &Vector) -> Matrix {
        let r = x.norm();
        if self.mass == 0.0 || r < 1e-8 {
            return Matrix::zeros(self.dim, self.dim);
        }
        let w = x / r;
        &w * w.transpose() * self.profile(r).0
    }

    fn deriv(&self, x: &Vector) -> Option<Vec<Matrix>> {
        let n = self.dim;
        let r = x.norm();
        if self.mass == 0.0 || r < 1e-8 {
            return Some(vec![Matrix::zeros(n, n); n]);
        }
        let w = x / r;
        let (a, da) = self.profile(r);
        let proj = Matrix::identity(n, n) - &w * w.transpose();
        Some(
            (0..n)
                .map(|k| {
                    Matrix::from_fn(n, n, |i, j| {
                        da * w[k] * w[i] * w[j] + a * (proj[(i, k)] * w[j] + w[i] * proj[(j, k)]) / r
                    })
                })
                .collect(),
        )
    }
}

/// Schwarzschild–AdS with mass parameter `m`, valid on the collar `r ≥ ½`.
pub fn schwarzschild_ads(n: usize, m: f64) -> Result<MetricField> {
    check_dim(n)?;
    if m < 0.0 || !m.is_finite() {
        return Err(Error::NegativeMass(m));
    }
    let p = SchwarzschildPerturbation { dim: n, mass: m };
    let (s, _, _) = areal_radius(0.5);
    let (_, lapse) = p.lapse(s);
    if lapse <= 0.0 {
        return Err(Error::HorizonInShell { radius: 0.5, lapse });
    }
    let g = hyperbolic_metric(n)?.with_family("schwarzschild-ads").with_param("m", m);
    Ok(if m == 0.0 { g } else { g.with_perturbation(Arc::new(p)) })
}

/// Tensor profile of an aspect perturbation, in `ḡ`-unit normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AspectProfile {
    /// `δ`: pure trace.
    Trace,
    /// `ω⊗ω`: normal–normal.
    Normal,
    /// `a_T⊗a_T − |a_T|²/(n−1)·(δ − ω⊗ω)` for the fixed vector `a = (1, 0, …)`,
    /// tangential and trace-free.
    Tangential,
}

impl AspectProfile {
    pub fn name(&self) -> &'static str {
        match self {
            AspectProfile::Trace => "trace",
            AspectProfile::Normal => "normal",
            AspectProfile::Tangential => "tangential",
        }
    }

    /// Profile tensor at `ω` and its derivatives along each ambient direction.
    fn tensor(&self, w: &Vector) -> (Matrix, Vec<Matrix>) {
        let n = w.len();
        let id = Matrix::identity(n, n);
        match self {
            AspectProfile::Trace => (id, vec![Matrix::zeros(n, n); n]),
            AspectProfile::Normal => {
                let q = w * w.transpose();
                let d = (0..n)
                    .map(|k| {
                        Matrix::from_fn(n, n, |i, j| {
                            (if i == k { w[j] } else { 0.0 }) + (if j == k { w[i] } else { 0.0 })
                        })
                    })
                    .collect();
                (q, d)
            }
            AspectProfile::Tangential => {
                let mut a = Vector::zeros(n);
                a[0] = 1.0;
                let wa = w.dot(&a);
                let at = &a - w * wa;
                let at2 = at.norm_squared();
                let c = 1.0 / (n as f64 - 1.0);
                let proj = &id - w * w.transpose();
                let q = &at * at.transpose() - &proj * (at2 * c);
                let d = (0..n)
                    .map(|k| {
                        let mut dat = w * (-a[k]);
                        dat[k] -= wa;
                        let dat2 = -2.0 * wa * a[k];
                        Matrix::from_fn(n, n, |i, j| {
                            let dproj = -(if i == k { w[j] } else { 0.0 }) - (if j == k { w[i] } else { 0.0 });
                            dat[i] * at[j] + at[i] * dat[j] - c * (dat2 * proj[(i, j)] + at2 * dproj)
                        })
                    })
                    .collect();
                (q, d)
            }
        }
    }
}

impl FromStr for AspectProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trace" => Ok(AspectProfile::Trace),
            "normal" => Ok(AspectProfile::Normal),
            "tangential" => Ok(AspectProfile::Tangential),
            other => Err(Error::InvalidParameter {
                field: "profile".into(),
                message: format!("unknown profile '{other}', expected trace|normal|tangential"),
            }),
        }
    }
}

impl fmt::Display for AspectProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn psi(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

fn dpsi(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        psi(t) / (t * t)
    }
}

/// C^∞ step: 0 for `r ≤ ¼`, 1 for `r ≥ ½`, with its derivative.
pub fn cutoff(r: f64) -> (f64, f64) {
    let t = 4.0 * (r - 0.25);
    if t <= 0.0 {
        return (0.0, 0.0);
    }
    if t >= 1.0 {
        return (1.0, 0.0);
    }
    let (a, b) = (psi(t), psi(1.0 - t));
    let (da, db) = (dpsi(t), -dpsi(1.0 - t));
    let s = a + b;
    (a / s, 4.0 * (da * s - a * (da + db)) / (s * s))
}

/// `ρ^p · b(r) · 16/(1+r)⁴ · χ(ω) · Q(ω)`.
#[derive(Debug, Clone)]
pub struct AspectField {
    pub dim: usize,
    pub chi: Chi,
    pub profile: AspectProfile,
    pub order: f64,
}

impl AspectField {
    fn radial(&self, r: f64) -> (f64, f64) {
        let rho = canonical_rho(r);
        let drho = -4.0 / ((1.0 + r) * (1.0 + r));
        let (b, db) = cutoff(r);
        let c = 16.0 / (1.0 + r).powi(4);
        let dc = -64.0 / (1.0 + r).powi(5);
        let rp = rho.powf(self.order);
        let drp = if self.order == 0.0 { 0.0 } else { self.order * rho.powf(self.order - 1.0) * drho };
        (rp * b * c, drp * b * c + rp * db * c + rp * b * dc)
    }
}

impl SymTensorField for AspectField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &Vector) -> Matrix {
        let r = x.norm();
        let (a, _) = self.radial(r);
        if a == 0.0 {
            return Matrix::zeros(self.dim, self.dim);
        }
        let w = x / r;
        self.profile.tensor(&w).0 * (a * self.chi.value(&w))
    }

    fn deriv(&self, x: &Vector) -> Option<Vec<Matrix>> {
        let n = self.dim;
        let r = x.norm();
        let (a, da) = self.radial(r);
        if a == 0.0 && da == 0.0 {
            return Some(vec![Matrix::zeros(n, n); n]);
        }
        let w = x / r;
        let chi = self.chi.value(&w);
        let dchi = self.chi.gradient(&w);
        let (q, dq) = self.profile.tensor(&w);
        let dq_radial: Matrix = dq.iter().enumerate().fold(Matrix::zeros(n, n), |acc, (k, m)| acc + m * w[k]);
        Some(
            (0..n)
                .map(|k| {
                    let tangential_q = (&dq[k] - &dq_radial * w[k]) / r;
                    let tangential_chi = (dchi[k] - w[k] * dchi.dot(&w)) / r;
                    &q * (da * w[k] * chi) + (&q * tangential_chi + tangential_q * chi) * a
                })
                .collect(),
        )
    }
}

/// Number of pseudo-random collar samples used for the positivity check.
const POSITIVITY_SAMPLES: usize = 256;

/// `h = g + ρ^{order}·μ`, `μ = b(r)·χ(ω)·Q(ω)` in `ḡ`-units; `order` defaults to `n − 2`.
pub fn aspect_perturbation(
    n: usize,
    chi: &Chi,
    profile: AspectProfile,
    order: Option<f64>,
) -> Result<MetricField> {
    check_dim(n)?;
    chi.check_dim(n)?;
    let order = order.unwrap_or((n - 2) as f64);
    let g = hyperbolic_metric(n)?
        .with_family("aspect-perturbation")
        .with_param("profile", profile)
        .with_param("order", order);
    if chi.is_zero() {
        return Ok(g);
    }
    let field = AspectField {
        dim: n,
        chi: chi.clone(),
        profile,
        order,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for i in 0..POSITIVITY_SAMPLES {
        let w = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let w = if w.norm() < 1e-3 { Vector::from_fn(n, |k, _| if k == 0 { 1.0 } else { 0.0 }) } else { w.normalize() };
        let r = 0.25 + 0.749 * (i as f64 + 0.5) / POSITIVITY_SAMPLES as f64;
        let x = &w * r;
        let h = g.eval(&x) + field.eval(&x);
        if h.cholesky().is_none() {
            return Err(Error::NotPositiveDefinite(x.iter().copied().collect()));
        }
    }
    Ok(g.with_perturbation(Arc::new(field)))
}

/// A named metric family together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricFamily {
    Hyperbolic,
    SchwarzschildAds { m: f64 },
    AspectPerturbation { chi: Chi, profile: AspectProfile, order: Option<f64> },
}

impl MetricFamily {
    pub fn name(&self) -> &'static str {
        match self {
            MetricFamily::Hyperbolic => "hyperbolic",
            MetricFamily::SchwarzschildAds { .. } => "schwarzschild-ads",
            MetricFamily::AspectPerturbation { .. } => "aspect-perturbation",
        }
    }

    pub fn build(&self, n: usize) -> Result<MetricField> {
        match self {
            MetricFamily::Hyperbolic => hyperbolic_metric(n),
            MetricFamily::SchwarzschildAds { m } => schwarzschild_ads(n, *m),
            MetricFamily::AspectPerturbation { chi, profile, order } => {
                aspect_perturbation(n, chi, *profile, *order)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd;
    use proptest::prelude::{prop_assert, proptest};
    use rand::Rng;

    fn sample_points(n: usize) -> Vec<Vector> {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        (0..20)
            .map(|_| {
                let w = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)).normalize();
                w * rng.random_range(0.5..0.99)
            })
            .collect()
    }

    fn check_deriv(field: &dyn SymTensorField, x: &Vector, tol: f64) {
        let d = field.deriv(x).unwrap();
        for (k, dk) in d.iter().enumerate() {
            let oracle = fd::central4(|y| field.eval(y), x, k, 1e-4);
            let scale = dk.amax().max(1.0);
            assert!((dk - &oracle).amax() / scale < tol, "k = {k}: {}", (dk - oracle).amax());
        }
    }

    #[test]
    fn zero_parameter_is_background() {
        for n in 3..=6 {
            let g = hyperbolic_metric(n).unwrap();
            let families = [
                MetricFamily::SchwarzschildAds { m: 0.0 },
                MetricFamily::AspectPerturbation { chi: Chi::zero(n), profile: AspectProfile::Trace, order: None },
            ];
            for fam in families {
                let h = fam.build(n).unwrap();
                for x in sample_points(n) {
                    assert!((h.eval(&x) - g.eval(&x)).amax() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn schwarzschild_errors() {
        assert!(matches!(schwarzschild_ads(3, -0.1), Err(Error::NegativeMass(_))));
        assert!(matches!(schwarzschild_ads(3, 5.0), Err(Error::HorizonInShell { .. })));
        assert!(matches!(schwarzschild_ads(2, 0.1), Err(Error::UnsupportedDimension(2))));
    }

    #[test]
    fn schwarzschild_matches_warped_product() {
        let m = 0.1;
        let h = schwarzschild_ads(3, m).unwrap();
        let w = Vector::from_vec(vec![0.6, 0.0, 0.8]);
        let r = 0.8;
        let (s, s1, _) = areal_radius(r);
        let radial = s1 * s1 / (1.0 + s * s - 2.0 * m / s);
        let hm = h.eval(&(&w * r));
        assert!((w.dot(&(&hm * &w)) - radial).abs() < 1e-12 * radial);
        let t = Vector::from_vec(vec![0.0, 1.0, 0.0]);
        assert!((t.dot(&(&hm * &t)) - s * s / (r * r)).abs() < 1e-10);
    }

    #[test]
    fn schwarzschild_derivative() {
        for n in 3..=5 {
            let p = SchwarzschildPerturbation { dim: n, mass: 0.2 };
            for x in sample_points(n) {
                check_deriv(&p, &x, 1e-7);
            }
        }
    }

    #[test]
    fn aspect_derivatives() {
        let chi3 = Chi::from_json(3, "[[0,0,1.0],[1,1,0.4],[2,-1,0.3]]").unwrap();
        for profile in [AspectProfile::Trace, AspectProfile::Normal, AspectProfile::Tangential] {
            let f = AspectField { dim: 3, chi: chi3.clone(), profile, order: 1.0 };
            for x in sample_points(3) {
                check_deriv(&f, &x, 1e-7);
            }
            let chi4 = Chi::Affine { c0: 0.5, c: Vector::from_vec(vec![0.1, 0.2, -0.3, 0.4]) };
            let f = AspectField { dim: 4, chi: chi4, profile, order: 2.0 };
            for x in sample_points(4) {
                check_deriv(&f, &x, 1e-7);
            }
        }
    }

    #[test]
    fn cutoff_shape() {
        assert_eq!(cutoff(0.2), (0.0, 0.0));
        assert_eq!(cutoff(0.6), (1.0, 0.0));
        assert!((cutoff(0.375).0 - 0.5).abs() < 1e-15);
        for r in [0.3, 0.375, 0.45] {
            let d = (cutoff(r + 1e-6).0 - cutoff(r - 1e-6).0) / 2e-6;
            assert!((cutoff(r).1 - d).abs() < 1e-6);
        }
    }

    #[test]
    fn tangential_profile_is_tangent_and_trace_free() {
        let w = Vector::from_vec(vec![0.2, 0.4, 0.4, 0.8]).normalize();
        let (q, _) = AspectProfile::Tangential.tensor(&w);
        assert!(q.trace().abs() < 1e-14);
        assert!((&q * &w).amax() < 1e-14);
    }

    #[test]
    fn non_positive_perturbation_rejected() {
        let chi = Chi::constant(3, -50.0);
        assert!(matches!(
            aspect_perturbation(3, &chi, AspectProfile::Trace, None),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    proptest! {
        #[test]
        fn rotated_family_derivative(a in -3.0f64..3.0, b in -1.5f64..1.5, c in -3.0f64..3.0) {
            let rot = nalgebra::Rotation3::from_euler_angles(a, b, c);
            let r = Matrix::from_fn(3, 3, |i, j| rot.matrix()[(i, j)]);
            let h = aspect_perturbation(3, &Chi::coordinate(3, 0), AspectProfile::Normal, None).unwrap().rotated(&r);
            let x = Vector::from_vec(vec![0.3, 0.5, -0.4]);
            let d = h.deriv(&x);
            for (k, dk) in d.iter().enumerate() {
                let oracle = fd::central4(|y| h.eval(y), &x, k, 1e-4);
                prop_assert!((dk - oracle).amax() < 1e-7);
            }
        }
    }
}
