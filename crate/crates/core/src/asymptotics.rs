//! Boundary coefficients of a metric pair `g ~ h` and the order-of-contact
//! test between them.

use serde::Serialize;

use crate::chart::{adapted_rho, radius_of, DefiningFunction};
use crate::error::{Error, Result};
use crate::metric::{invert_sym, MetricField};
use crate::richardson::{diverges, extrapolate, Extrapolation};
use crate::{Matrix, Vector};

/// Geometric sampling `ε_i = ε₀ qⁱ`, `i < count`, extrapolated with `stages` stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsilonSchedule {
    pub eps0: f64,
    pub ratio: f64,
    pub count: usize,
    pub stages: usize,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            eps0: 0.1,
            ratio: 0.5,
            count: 8,
            stages: 4,
        }
    }
}

impl EpsilonSchedule {
    pub fn new(eps0: f64, ratio: f64, count: usize, stages: usize) -> Result<Self> {
        let s = Self {
            eps0,
            ratio,
            count,
            stages,
        };
        s.validate()?;
        Ok(s)
    }

    /// All sample radii must lie in `(½, 1)`, i.e. `0 < ε₀ < ⅔`.
    pub fn validate(&self) -> Result<()> {
        if !(self.eps0 > 0.0 && self.eps0 < 2.0 / 3.0) {
            return Err(Error::InvalidSchedule(format!(
                "eps0 = {} must lie in (0, 2/3) so that r(eps) > 1/2",
                self.eps0
            )));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::InvalidSchedule(format!("ratio = {} must lie in (0, 1)", self.ratio)));
        }
        if self.count < 2 {
            return Err(Error::InvalidSchedule(format!("count = {} must be >= 2", self.count)));
        }
        if self.stages == 0 || self.stages >= self.count {
            return Err(Error::InvalidSchedule(format!(
                "stages = {} must lie in [1, count - 1] = [1, {}]",
                self.stages,
                self.count - 1
            )));
        }
        let last = self.epsilons()[self.count - 1];
        if radius_of(last) >= 1.0 || last <= 0.0 {
            return Err(Error::InvalidSchedule(format!("smallest eps = {last:e} reaches the boundary")));
        }
        Ok(())
    }

    pub fn epsilons(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.eps0 * self.ratio.powi(i as i32)).collect()
    }
}

/// Extracted boundary data at one direction `ω`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticData {
    pub n: usize,
    pub direction: Vec<f64>,
    /// `ḡ∞`-orthonormal frame at `ω`, one row per vector; row 0 is `ω`.
    pub frame: Vec<Vec<f64>>,
    pub mu_inf: f64,
    pub mu_err: f64,
    /// Components of `μ⁰∞` in `frame`, row-major.
    pub mu0_inf: Vec<Vec<f64>>,
    pub mu0_err: f64,
    pub eps: Vec<f64>,
    pub mu_samples: Vec<f64>,
    pub mu0_nn_samples: Vec<f64>,
}

impl AsymptoticData {
    pub fn mu0_matrix(&self) -> Matrix {
        Matrix::from_fn(self.n, self.n, |i, j| self.mu0_inf[i][j])
    }

    pub fn frame_matrix(&self) -> Matrix {
        Matrix::from_fn(self.n, self.n, |i, j| self.frame[j][i])
    }

    /// `ḡ∞`-trace of `μ⁰∞`.
    pub fn mu0_trace(&self) -> f64 {
        (0..self.n).map(|i| self.mu0_inf[i][i]).sum()
    }

    /// Data for a prescribed boundary tensor `μ` (components in a frame with
    /// the normal first): `μ∞ = tr μ`, `μ⁰∞ = μ − (tr μ/n) δ`.
    pub fn from_boundary_tensor(mu: &Matrix) -> Self {
        let n = mu.nrows();
        let tr = mu.trace();
        let mu0 = mu - Matrix::identity(n, n) * (tr / n as f64);
        Self {
            n,
            direction: (0..n).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect(),
            frame: (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect(),
            mu_inf: tr,
            mu_err: 0.0,
            mu0_inf: (0..n).map(|i| (0..n).map(|j| mu0[(i, j)]).collect()).collect(),
            mu0_err: 0.0,
            eps: Vec::new(),
            mu_samples: Vec::new(),
            mu0_nn_samples: Vec::new(),
        }
    }
}

/// Euclidean orthonormal frame with `ω` first; tangential vectors from the
/// coordinate axes least aligned with `ω`.
pub fn boundary_frame(omega: &Vector) -> Matrix {
    let n = omega.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| omega[a].abs().total_cmp(&omega[b].abs()).then(a.cmp(&b)));
    let mut cols: Vec<Vector> = vec![omega.normalize()];
    for &k in &order {
        if cols.len() == n {
            break;
        }
        let mut v = Vector::zeros(n);
        v[k] = 1.0;
        for c in &cols {
            v -= c * c.dot(&v);
        }
        for c in &cols {
            v -= c * c.dot(&v);
        }
        let norm = v.norm();
        if norm > 1e-8 {
            cols.push(v / norm);
        }
    }
    Matrix::from_columns(&cols)
}

/// `ḡ`-orthonormal frame at `x` built from the Euclidean boundary frame.
fn compact_frame(gbar: &Matrix, seeds: &Matrix, normal: &Vector) -> Matrix {
    let n = gbar.nrows();
    let mut cols: Vec<Vector> = Vec::with_capacity(n);
    let mut first = normal.clone();
    first /= first.dot(&(gbar * &first)).sqrt();
    cols.push(first);
    for k in 1..n {
        let mut v: Vector = seeds.column(k).into();
        for _ in 0..2 {
            for c in &cols {
                let p = c.dot(&(gbar * &v));
                v -= c * p;
            }
        }
        v /= v.dot(&(gbar * &v)).sqrt();
        cols.push(v);
    }
    Matrix::from_columns(&cols)
}

const DIVERGENCE_FLOOR: f64 = 1e-12;

/// Successive differences below this are rounding, not growth.
fn divergence_floor(noise: &[f64]) -> f64 {
    noise.iter().fold(DIVERGENCE_FLOOR, |a, e| a.max(16.0 * e))
}

fn samples_noise(values: &[f64], eps: &[f64], n: usize) -> Vec<f64> {
    values
        .iter()
        .zip(eps)
        .map(|(v, e)| v.abs() * f64::EPSILON * (2.0 * (n as f64 + 2.0) / e + 8.0))
        .collect()
}

/// Extract `μ∞` and `μ⁰∞` of `h` relative to `g` along `ω` with the defining function `ρ`.
pub fn extract(
    g: &MetricField,
    h: &MetricField,
    rho: &DefiningFunction,
    omega: &Vector,
    schedule: &EpsilonSchedule,
) -> Result<AsymptoticData> {
    schedule.validate()?;
    let n = g.dim();
    if h.dim() != n || omega.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if h.dim() != n { h.dim() } else { omega.len() },
        });
    }
    let omega = omega.normalize();
    let seeds = boundary_frame(&omega);
    let eps = schedule.epsilons();
    let nf = n as f64;
    let mut mu = Vec::with_capacity(eps.len());
    let mut mu0: Vec<Matrix> = Vec::with_capacity(eps.len());
    for &e in &eps {
        let r = rho.radius_at(&omega, e)?;
        let x = &omega * r;
        let gm = g.eval(&x);
        let ginv = invert_sym(&gm).ok_or_else(|| Error::SingularMetric(x.iter().copied().collect()))?;
        let lambda = MetricField::difference(h, g, &x);
        let tr = (&ginv * &lambda).trace();
        mu.push(tr / e.powi(n as i32));
        let lambda0 = &lambda - &gm * (tr / nf);
        let gbar = &gm * (e * e);
        let drho = rho.grad(&x)?;
        let normal = -(invert_sym(&gbar).unwrap_or_else(|| Matrix::identity(n, n)) * drho);
        let frame = compact_frame(&gbar, &seeds, &normal);
        let comp = frame.transpose() * lambda0 * &frame / e.powi(n as i32 - 2);
        mu0.push((&comp + comp.transpose()) * 0.5);
    }
    let mu_noise = samples_noise(&mu, &eps, n);
    if diverges(&mu, schedule.ratio, divergence_floor(&mu_noise)) {
        return Err(Error::DivergentTail(omega.iter().copied().collect()));
    }
    let mu_ex = extrapolate(&mu, &mu_noise, schedule.ratio, schedule.stages)?;
    let mut mu0_inf = vec![vec![0.0; n]; n];
    let mut mu0_err = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let series: Vec<f64> = mu0.iter().map(|m| m[(i, j)]).collect();
            let noise = samples_noise(&series, &eps, n);
            if diverges(&series, schedule.ratio, divergence_floor(&noise)) {
                return Err(Error::DivergentTail(omega.iter().copied().collect()));
            }
            let ex: Extrapolation = extrapolate(&series, &noise, schedule.ratio, schedule.stages)?;
            mu0_inf[i][j] = ex.value;
            mu0_inf[j][i] = ex.value;
            mu0_err = mu0_err.max(ex.err);
        }
    }
    Ok(AsymptoticData {
        n,
        direction: omega.iter().copied().collect(),
        frame: (0..n).map(|k| seeds.column(k).iter().copied().collect()).collect(),
        mu_inf: mu_ex.value,
        mu_err: mu_ex.err,
        mu0_inf,
        mu0_err,
        eps,
        mu0_nn_samples: mu0.iter().map(|m| m[(0, 0)]).collect(),
        mu_samples: mu,
    })
}

/// `μ∞ = lim ε^{−n} g^{ij}(h_ij − g_ij)` along `ω`, with error estimate.
pub fn extract_mu(
    g: &MetricField,
    h: &MetricField,
    rho: &DefiningFunction,
    omega: &Vector,
    schedule: &EpsilonSchedule,
) -> Result<(f64, f64)> {
    let d = extract(g, h, rho, omega, schedule)?;
    Ok((d.mu_inf, d.mu_err))
}

/// `μ⁰∞` in the `ḡ∞`-orthonormal frame at `ω`, with error estimate.
pub fn extract_mu0(
    g: &MetricField,
    h: &MetricField,
    rho: &DefiningFunction,
    omega: &Vector,
    schedule: &EpsilonSchedule,
) -> Result<(Matrix, f64)> {
    let d = extract(g, h, rho, omega, schedule)?;
    Ok((d.mu0_matrix(), d.mu0_err))
}

/// Result of the order-of-contact test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equivalence {
    pub pass: bool,
    /// Fitted exponent `p` in `‖ρ²(h − g)‖ ~ C ρ^p`; `None` when the
    /// difference vanishes to rounding (infinite order).
    pub order: Option<f64>,
    pub required: f64,
    pub exact: bool,
    pub residuals: Vec<f64>,
}

/// Directions probed by [`check_equivalence`]: `±e_k` and the normalized
/// all-ones and alternating vectors.
pub fn probe_directions(n: usize) -> Vec<Vector> {
    let mut out = Vec::with_capacity(2 * n + 2);
    for k in 0..n {
        for s in [1.0, -1.0] {
            let mut v = Vector::zeros(n);
            v[k] = s;
            out.push(v);
        }
    }
    out.push(Vector::from_element(n, 1.0).normalize());
    out.push(Vector::from_fn(n, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 }).normalize());
    out
}

const EXACT_RESIDUAL: f64 = 1e-14;

/// Fit the decay order of `ρ²(h − g)` along the schedule; pass iff `p ≥ n − 0.1`.
pub fn check_equivalence(g: &MetricField, h: &MetricField, schedule: &EpsilonSchedule) -> Result<Equivalence> {
    schedule.validate()?;
    let n = g.dim();
    if h.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: h.dim(),
        });
    }
    let required = n as f64 - 0.1;
    let rho = adapted_rho(n);
    let dirs = probe_directions(n);
    let eps = schedule.epsilons();
    let mut residuals = Vec::with_capacity(eps.len());
    for &e in &eps {
        let mut worst = 0.0f64;
        for w in &dirs {
            let r = rho.radius_at(w, e)?;
            let lambda = MetricField::difference(h, g, &(w * r));
            worst = worst.max(lambda.amax() * e * e);
        }
        if !worst.is_finite() {
            return Err(Error::NonFinite("equivalence residual".into()));
        }
        residuals.push(worst);
    }
    if residuals.iter().all(|r| *r <= EXACT_RESIDUAL) {
        return Ok(Equivalence {
            pass: true,
            order: None,
            required,
            exact: true,
            residuals,
        });
    }
    if residuals.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Less)) {
        return Err(Error::Inconclusive(format!(
            "equivalence residuals are not monotone along the schedule: {residuals:?}"
        )));
    }
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = residuals.iter().map(|r| r.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let p = sxy / sxx;
    Ok(Equivalence {
        pass: p >= required,
        order: Some(p),
        required,
        exact: false,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::hyperbolic_metric;
    use crate::families::{aspect_perturbation, schwarzschild_ads, AspectProfile};
    use crate::harmonics::Chi;
    use crate::metric::ScalarFn;
    use std::sync::Arc;

    fn dir(v: &[f64]) -> Vector {
        Vector::from_vec(v.to_vec()).normalize()
    }

    #[test]
    fn schedule_validation() {
        assert!(EpsilonSchedule::default().validate().is_ok());
        assert!(EpsilonSchedule::new(0.7, 0.5, 8, 4).is_err());
        assert!(EpsilonSchedule::new(0.1, 1.0, 8, 4).is_err());
        assert!(EpsilonSchedule::new(0.1, 0.5, 1, 0).is_err());
        assert!(EpsilonSchedule::new(0.1, 0.5, 4, 4).is_err());
        for e in EpsilonSchedule::default().epsilons() {
            let r = radius_of(e);
            assert!(r > 0.5 && r < 1.0);
        }
    }

    #[test]
    fn identical_metrics() {
        let g = hyperbolic_metric(3).unwrap();
        let s = EpsilonSchedule::default();
        let eq = check_equivalence(&g, &g, &s).unwrap();
        assert!(eq.pass && eq.exact && eq.order.is_none());
        let d = extract(&g, &g, &adapted_rho(3), &dir(&[1.0, 2.0, 3.0]), &s).unwrap();
        assert!(d.mu_inf.abs() < 1e-12);
        assert!(d.mu0_matrix().amax() < 1e-12);
    }

    #[test]
    fn schwarzschild_order_and_symmetry() {
        let g = hyperbolic_metric(3).unwrap();
        let h = schwarzschild_ads(3, 0.1).unwrap();
        let s = EpsilonSchedule::default();
        let eq = check_equivalence(&g, &h, &s).unwrap();
        assert!(eq.pass, "{eq:?}");
        assert!((eq.order.unwrap() - 3.0).abs() < 0.1);
        let rho = adapted_rho(3);
        let w = dir(&[0.3, -0.2, 0.9]);
        let (a, _) = extract_mu(&g, &h, &rho, &w, &s).unwrap();
        let (b, _) = extract_mu(&g, &h, &rho, &(-&w), &s).unwrap();
        assert!((a - b).abs() < 1e-8);
        assert!((a - 0.2).abs() < 1e-6, "mu = {a}");
        let d = extract(&g, &h, &rho, &w, &s).unwrap();
        assert!(d.mu0_trace().abs() < 1e-6);
        let h2 = schwarzschild_ads(3, 0.2).unwrap();
        let (c, _) = extract_mu(&g, &h2, &rho, &w, &s).unwrap();
        assert!((c / a - 2.0).abs() < 1e-3);
    }

    #[test]
    fn low_order_perturbation_fails() {
        let g = hyperbolic_metric(3).unwrap();
        let h = aspect_perturbation(3, &Chi::constant(3, 1.0), AspectProfile::Trace, Some(0.0)).unwrap();
        let eq = check_equivalence(&g, &h, &EpsilonSchedule::default()).unwrap();
        assert!(!eq.pass);
        assert!((eq.order.unwrap() - 2.0).abs() < 0.1);
        let err = extract(&g, &h, &adapted_rho(3), &dir(&[1.0, 0.0, 0.0]), &EpsilonSchedule::default());
        assert!(matches!(err, Err(Error::DivergentTail(_))));
    }

    #[test]
    fn aspect_trace_profile_constant() {
        let g = hyperbolic_metric(3).unwrap();
        let h = aspect_perturbation(3, &Chi::constant(3, 1.0), AspectProfile::Trace, None).unwrap();
        let s = EpsilonSchedule::default();
        let rho = adapted_rho(3);
        let vals: Vec<f64> = [[1.0, 0.0, 0.0], [0.2, 0.3, -0.9], [-0.5, 0.5, 0.5], [0.0, 0.0, -1.0]]
            .iter()
            .map(|v| extract_mu(&g, &h, &rho, &dir(v), &s).unwrap().0)
            .collect();
        for v in &vals {
            assert!((v - 3.0).abs() < 1e-6, "{v}");
        }
        let (m0, _) = extract_mu0(&g, &h, &rho, &dir(&[0.1, 0.7, 0.2]), &s).unwrap();
        assert!(m0.amax() < 1e-6);
    }

    #[test]
    fn normal_profile_components() {
        let g = hyperbolic_metric(4).unwrap();
        let chi = Chi::constant(4, 2.0);
        let h = aspect_perturbation(4, &chi, AspectProfile::Normal, None).unwrap();
        let d = extract(&g, &h, &adapted_rho(4), &dir(&[0.1, 0.2, 0.3, 0.4]), &EpsilonSchedule::default()).unwrap();
        assert!((d.mu_inf - 2.0).abs() < 1e-6);
        assert!((d.mu0_inf[0][0] - 2.0 * 0.75).abs() < 1e-6);
        assert!(d.mu0_trace().abs() < 3.0 * d.mu0_err.max(1e-12));
    }

    #[test]
    fn defining_function_independence() {
        let g = hyperbolic_metric(3).unwrap();
        let h = aspect_perturbation(3, &Chi::coordinate(3, 2), AspectProfile::Normal, None).unwrap();
        let canonical = adapted_rho(3);
        let bump = ScalarFn::new(|x: &Vector| 0.3 * (1.0 - x.norm_squared()) * (1.0 + x[0]))
            .with_gradient(|x: &Vector| {
                let mut gr = x * (-0.6 * (1.0 + x[0]));
                gr[0] += 0.3 * (1.0 - x.norm_squared());
                gr
            });
        let other = canonical.rescaled(Arc::new(bump));
        let s = EpsilonSchedule::new(0.05, 0.5, 8, 4).unwrap();
        let w = dir(&[0.2, 0.4, 0.8]);
        let a = extract(&g, &h, &canonical, &w, &s).unwrap();
        let b = extract(&g, &h, &other, &w, &s).unwrap();
        let tol = 5.0 * (a.mu_err + b.mu_err).max(1e-9);
        assert!((a.mu_inf - b.mu_inf).abs() < tol, "{} vs {}", a.mu_inf, b.mu_inf);
        let tol0 = 5.0 * (a.mu0_err + b.mu0_err).max(1e-9);
        assert!((a.mu0_matrix() - b.mu0_matrix()).amax() < tol0);
    }

    #[test]
    fn frame_is_orthonormal() {
        let w = dir(&[0.0, 1.0, 1e-9, -0.3]);
        let f = boundary_frame(&w);
        assert!((f.transpose() * &f - Matrix::identity(4, 4)).amax() < 1e-14);
        assert!((f.column(0) - &w).amax() < 1e-15);
    }
}
