//! Standard tractors of the conformal class of the ball.
//!
//! Every slot is stored as its trivialization in the reference scale `ḡ`; a
//! [`TractorTriple`] additionally records the scale `ĝ = e^{2f}ḡ` whose
//! splitting it is written in. In these conventions the tractor metric reads
//! `σν̃ + νσ̃ + ḡ^{ab}μ_aμ̃_b` in every splitting.

use std::sync::Arc;

use rand::Rng;

use crate::asymptotics::EpsilonSchedule;
use crate::chart::{compactified_metric, radius_of};
use crate::error::{Error, Result};
use crate::fd;
use crate::metric::{gradient_of, hessian_of, invert_sym, ScalarField, SymTensorField};
use crate::richardson::extrapolate;
use crate::tensors::Scale;
use crate::{Matrix, Vector};

/// A standard tractor `(σ, μ_a, ν)` at a point, in the splitting of `scale`.
#[derive(Debug, Clone)]
pub struct TractorTriple {
    pub scale: Arc<Scale>,
    pub point: Vector,
    pub top: f64,
    pub middle: Vector,
    pub bottom: f64,
}

impl TractorTriple {
    pub fn new(scale: Arc<Scale>, point: Vector, top: f64, middle: Vector, bottom: f64) -> Self {
        Self {
            scale,
            point,
            top,
            middle,
            bottom,
        }
    }

    /// The canonical tractor `X = (0, 0, 1)`.
    pub fn x(scale: Arc<Scale>, point: Vector) -> Self {
        let n = point.len();
        Self::new(scale, point, 0.0, Vector::zeros(n), 1.0)
    }

    pub fn zero(scale: Arc<Scale>, point: Vector) -> Self {
        let n = point.len();
        Self::new(scale, point, 0.0, Vector::zeros(n), 0.0)
    }

    pub fn dim(&self) -> usize {
        self.middle.len()
    }

    /// Slots packed as `(σ, μ_1, …, μ_n, ν)`.
    pub fn to_vector(&self) -> Vector {
        let n = self.dim();
        let mut v = Vector::zeros(n + 2);
        v[0] = self.top;
        v.rows_mut(1, n).copy_from(&self.middle);
        v[n + 1] = self.bottom;
        v
    }

    fn with_slots(&self, v: &Vector) -> Self {
        let n = self.dim();
        Self::new(self.scale.clone(), self.point.clone(), v[0], v.rows(1, n).into(), v[n + 1])
    }

    pub fn max_abs_diff(&self, other: &TractorTriple) -> f64 {
        (self.to_vector() - other.to_vector()).amax()
    }
}

fn reference_inverse(scale: &Scale, x: &Vector) -> Result<Matrix> {
    scale.reference_metric().inverse(x)
}

/// `⟨T₁, T₂⟩ = σν̃ + νσ̃ + ḡ^{ab}μ_aμ̃_b`; `T₂` is first moved to the splitting of `T₁`.
pub fn tractor_pairing(t1: &TractorTriple, t2: &TractorTriple) -> Result<f64> {
    let t2 = if Arc::ptr_eq(&t1.scale, &t2.scale) { t2.clone() } else { change_scale(t2, t1.scale.clone())? };
    let ginv = reference_inverse(&t1.scale, &t1.point)?;
    Ok(t1.top * t2.bottom + t1.bottom * t2.top + t1.middle.dot(&(ginv * &t2.middle)))
}

/// Rewrite `t` in the splitting of `to`: with `Υ = d(f_to − f_from)`,
/// `(σ, μ + Υσ, ν − ḡ^{ij}(Υ_iμ_j + ½Υ_iΥ_jσ))`.
pub fn change_scale(t: &TractorTriple, to: Arc<Scale>) -> Result<TractorTriple> {
    let x = &t.point;
    let upsilon = to.upsilon(x) - t.scale.upsilon(x);
    let ginv = reference_inverse(&to, x)?;
    let gu = &ginv * &upsilon;
    let middle = &t.middle + &upsilon * t.top;
    let bottom = t.bottom - gu.dot(&t.middle) - 0.5 * gu.dot(&upsilon) * t.top;
    Ok(TractorTriple::new(to, x.clone(), t.top, middle, bottom))
}

/// Geometric data of a splitting at a point.
struct SplittingData {
    upsilon: Vector,
    gbar: Matrix,
    gbar_inv: Matrix,
    gamma: crate::metric::Christoffel,
    schouten: Matrix,
}

impl SplittingData {
    fn at(scale: &Scale, x: &Vector) -> Result<Self> {
        let gbar = scale.reference_metric().eval(x);
        let gbar_inv = invert_sym(&gbar).ok_or_else(|| Error::SingularMetric(x.iter().copied().collect()))?;
        Ok(Self {
            upsilon: scale.upsilon(x),
            gbar,
            gbar_inv,
            gamma: scale.metric().christoffels(x)?,
            schouten: scale.schouten(x)?.components,
        })
    }
}

/// `∇_a T` for a tractor field given in a fixed splitting, along coordinate `a`.
pub fn tractor_derivative(
    field: &dyn Fn(&Vector) -> Result<TractorTriple>,
    x: &Vector,
    a: usize,
) -> Result<TractorTriple> {
    let t = field(x)?;
    let data = SplittingData::at(&t.scale, x)?;
    let d = slot_derivative(field, x, a)?;
    Ok(apply_connection(&t, &d, &data, a))
}

fn slot_derivative(field: &dyn Fn(&Vector) -> Result<TractorTriple>, x: &Vector, a: usize) -> Result<Vector> {
    let n = x.len();
    let failure = std::cell::RefCell::new(None);
    let d = fd::central4(
        |y| match field(y) {
            Ok(t) => t.to_vector(),
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                Vector::from_element(n + 2, f64::NAN)
            }
        },
        x,
        a,
        fd::outer_step(x),
    );
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(d),
    }
}

fn apply_connection(t: &TractorTriple, d: &Vector, data: &SplittingData, a: usize) -> TractorTriple {
    let n = t.dim();
    let ups = &data.upsilon;
    let top = d[0] + ups[a] * t.top - t.middle[a];
    let middle = Vector::from_fn(n, |b, _| {
        let conn: f64 = (0..n).map(|k| data.gamma.get(k, a, b) * t.middle[k]).sum();
        d[1 + b] - conn + ups[a] * t.middle[b] + data.gbar[(a, b)] * t.bottom + data.schouten[(a, b)] * t.top
    });
    let p_row: Vector = data.schouten.row(a).transpose();
    let bottom = d[n + 1] - ups[a] * t.bottom - p_row.dot(&(&data.gbar_inv * &t.middle));
    TractorTriple::new(t.scale.clone(), t.point.clone(), top, middle, bottom)
}

/// The tractor `D`-operator on a weight-`w` density `τ` (given by its
/// `ḡ`-trivialization), written in the splitting of `scale`:
/// `(w(n+2w−2)τ, (n+2w−2)∇τ, −ḡ^{ij}(∇_i∇_j τ + P_ij τ))`.
pub fn d_operator(tau: &dyn ScalarField, weight: i32, scale: Arc<Scale>, x: &Vector) -> Result<TractorTriple> {
    let n = x.len();
    let w = weight as f64;
    let data = SplittingData::at(&scale, x)?;
    let ups = &data.upsilon;
    let value = tau.value(x);
    let grad = gradient_of(tau, x);
    let hess = hessian_of(tau, x);
    let dups = scale.upsilon_deriv(x);
    let v = &grad + ups * (w * value);
    let dv = &hess + &dups * (w * value) + &grad * ups.transpose() * w;
    let nabla_v = Matrix::from_fn(n, n, |i, j| {
        let conn: f64 = (0..n).map(|k| data.gamma.get(k, i, j) * v[k]).sum();
        dv[(i, j)] - conn + w * ups[i] * v[j]
    });
    let c = n as f64 + 2.0 * w - 2.0;
    let bottom = -(&data.gbar_inv * (nabla_v + &data.schouten * value)).trace();
    Ok(TractorTriple::new(scale, x.clone(), w * c * value, v * c, bottom))
}

/// The scale tractor `I = (1/n) D σ` of `scale`, in its own splitting.
pub fn scale_tractor(scale: Arc<Scale>, x: &Vector) -> Result<TractorTriple> {
    let n = x.len() as f64;
    let sigma = scale.density();
    let d = d_operator(&sigma, 1, scale, x)?;
    Ok(TractorTriple {
        top: d.top / n,
        middle: d.middle / n,
        bottom: d.bottom / n,
        ..d
    })
}

/// Boundary value of the scale tractor of `scale` at `ω`, written in the
/// splitting of `boundary_scale`, by extrapolating along `ρ = ε`.
pub fn scale_tractor_boundary(
    scale: Arc<Scale>,
    boundary_scale: Arc<Scale>,
    omega: &Vector,
    schedule: &EpsilonSchedule,
) -> Result<(TractorTriple, f64)> {
    schedule.validate()?;
    let n = omega.len();
    let eps = schedule.epsilons();
    let mut series: Vec<Vector> = Vec::with_capacity(eps.len());
    for &e in &eps {
        let x = omega * radius_of(e);
        let i = scale_tractor(scale.clone(), &x)?;
        series.push(change_scale(&i, boundary_scale.clone())?.to_vector());
    }
    let mut limit = Vector::zeros(n + 2);
    let mut err = 0.0f64;
    for k in 0..n + 2 {
        let vals: Vec<f64> = series.iter().map(|v| v[k]).collect();
        let noise: Vec<f64> = vals.iter().zip(&eps).map(|(v, e)| v.abs() * 1e-15 / e).collect();
        let ex = extrapolate(&vals, &noise, schedule.ratio, schedule.stages)?;
        limit[k] = ex.value;
        err = err.max(ex.err);
    }
    let t = TractorTriple::zero(boundary_scale, omega.clone()).with_slots(&limit);
    Ok((t, err))
}

/// Mean curvature `H = (1/(n−1))(ĝ^{ij} − n^in^j)∇̂_i n_j` of the unit sphere
/// in the metric of `scale`, with `n` the inward unit conormal.
pub fn boundary_mean_curvature(scale: &Scale, omega: &Vector) -> Result<f64> {
    let n = omega.len();
    let metric = scale.metric();
    let conormal = |y: &Vector| -> Vector {
        let c = -(y / y.norm());
        let ginv = metric.inverse(y).unwrap_or_else(|_| Matrix::from_element(n, n, f64::NAN));
        &c / c.dot(&(ginv * &c)).sqrt()
    };
    let x = omega.normalize();
    let ginv = metric.inverse(&x)?;
    let gamma = metric.christoffels(&x)?;
    let nn = conormal(&x);
    let h = 1e-3;
    let dn = Matrix::from_fn(n, n, |_, _| 0.0);
    let mut dn = dn;
    for i in 0..n {
        let col = fd::central4(conormal, &x, i, h);
        dn.set_row(i, &col.transpose());
    }
    let nabla = dn - gamma.contract_upper(&nn);
    let up = &ginv * &nn;
    let proj = &ginv - &up * up.transpose();
    let value = (proj.component_mul(&nabla)).sum() / (n as f64 - 1.0);
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(format!("mean curvature in scale '{}'", scale.label())))
    }
}

/// Normal tractor `(0, n_a, −H)` at the boundary point `ω`, in the splitting of
/// `scale`, which must extend smoothly to the boundary.
pub fn normal_tractor(scale: Arc<Scale>, omega: &Vector) -> Result<TractorTriple> {
    let x = omega.normalize();
    let gbar_inv = scale.reference_metric().inverse(&x)?;
    let c = -&x;
    let normal = &c / c.dot(&(gbar_inv * &c)).sqrt();
    let mean = boundary_mean_curvature(&scale, &x)? * scale.weight_factor(&x);
    Ok(TractorTriple::new(scale, x, 0.0, normal, -mean))
}

/// Identification of `N^⊥` with boundary tractors: `(σ, μ − H n σ, ν + ½H²σ)`.
pub fn identify_boundary(t: &TractorTriple, normal: &Vector, mean_curvature: f64) -> TractorTriple {
    TractorTriple::new(
        t.scale.clone(),
        t.point.clone(),
        t.top,
        &t.middle - normal * (mean_curvature * t.top),
        t.bottom + 0.5 * mean_curvature * mean_curvature * t.top,
    )
}

/// A tractor-valued 1-form: one triple per coordinate direction.
#[derive(Debug, Clone)]
pub struct TractorOneForm {
    pub scale: Arc<Scale>,
    pub point: Vector,
    pub components: Vec<TractorTriple>,
}

impl TractorOneForm {
    /// Membership in `ker ∂*`: all top slots vanish and the middle slots form a
    /// `ḡ`-trace-free tensor.
    pub fn in_kernel(&self, tol: f64) -> Result<bool> {
        let n = self.components.len();
        let ginv = reference_inverse(&self.scale, &self.point)?;
        let m = Matrix::from_fn(n, n, |a, b| self.components[a].middle[b]);
        let tops = self.components.iter().map(|c| c.top.abs()).fold(0.0, f64::max);
        let scale = m.amax().max(1.0);
        Ok(tops <= tol * scale && (&ginv * &m).trace().abs() <= tol * scale)
    }
}

const TRACE_TOL: f64 = 1e-10;

fn covariant_phi(phi: &dyn SymTensorField, data: &SplittingData, x: &Vector) -> Vec<Matrix> {
    let n = x.len();
    let p = phi.eval(x);
    let dphi: Vec<Matrix> = match phi.deriv(x) {
        Some(d) => d,
        None => (0..n).map(|k| fd::central4(|y| phi.eval(y), x, k, fd::outer_step(x))).collect(),
    };
    (0..n)
        .map(|i| {
            Matrix::from_fn(n, n, |a, j| {
                let mut v = dphi[i][(a, j)] + data.upsilon[i] * p[(a, j)];
                for k in 0..n {
                    v -= data.gamma.get(k, i, a) * p[(k, j)] + data.gamma.get(k, i, j) * p[(a, k)];
                }
                v
            })
        })
        .collect()
}

/// `S(φ)_a = (0, φ_ab, −1/(n−1) ḡ^{ij}∇_iφ_aj)` for a weight-1 trace-free
/// symmetric tensor `φ` (its `ḡ`-trivialization), in the splitting of `scale`.
pub fn splitting_s(phi: &dyn SymTensorField, scale: Arc<Scale>, x: &Vector) -> Result<TractorOneForm> {
    let n = x.len();
    let data = SplittingData::at(&scale, x)?;
    let p = phi.eval(x);
    let asym = (&p - p.transpose()).amax();
    if asym > TRACE_TOL * p.amax().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    let tr = (&data.gbar_inv * &p).trace();
    let rel = tr.abs() / p.amax().max(1.0);
    if rel > TRACE_TOL {
        return Err(Error::NotTraceFree(rel));
    }
    let nabla = covariant_phi(phi, &data, x);
    let components = (0..n)
        .map(|a| {
            let div: f64 = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .map(|(i, j)| data.gbar_inv[(i, j)] * nabla[i][(a, j)])
                .sum();
            TractorTriple::new(scale.clone(), x.clone(), 0.0, p.row(a).transpose(), -div / (n as f64 - 1.0))
        })
        .collect();
    Ok(TractorOneForm {
        scale,
        point: x.clone(),
        components,
    })
}

/// `ḡ^{bc}` contracted with the middle slot of `∇_aS_b − ∇_bS_a`, for each `a`;
/// vanishes for the normalized splitting operator.
pub fn splitting_residual(phi: &dyn SymTensorField, scale: Arc<Scale>, x: &Vector) -> Result<Vector> {
    let n = x.len();
    let data = SplittingData::at(&scale, x)?;
    let mut grad: Vec<Vec<TractorTriple>> = Vec::with_capacity(n);
    for a in 0..n {
        let mut row = Vec::with_capacity(n);
        for b in 0..n {
            let field = |y: &Vector| -> Result<TractorTriple> {
                Ok(splitting_s(phi, scale.clone(), y)?.components[b].clone())
            };
            let t = field(x)?;
            let d = slot_derivative(&field, x, a)?;
            row.push(apply_connection(&t, &d, &data, a));
        }
        grad.push(row);
    }
    Ok(Vector::from_fn(n, |a, _| {
        let mut acc = 0.0;
        for (b, row) in grad.iter().enumerate() {
            for c in 0..n {
                acc += data.gbar_inv[(b, c)] * (grad[a][b].middle[c] - row[a].middle[c]);
            }
        }
        acc
    }))
}

/// Trace-free part `A − (ḡ^{ij}A_ij/n) ḡ` of a symmetric field, for building test inputs.
pub struct TraceFreePart<F: SymTensorField> {
    pub field: F,
    pub reference: crate::metric::MetricField,
}

impl<F: SymTensorField> SymTensorField for TraceFreePart<F> {
    fn dim(&self) -> usize {
        self.field.dim()
    }

    fn eval(&self, x: &Vector) -> Matrix {
        let a = self.field.eval(x);
        let g = self.reference.eval(x);
        let ginv = invert_sym(&g).unwrap_or_else(|| Matrix::from_element(g.nrows(), g.ncols(), f64::NAN));
        let tr = (ginv * &a).trace();
        a - g * (tr / self.dim() as f64)
    }
}

/// Symmetric field `sym(A₀ + Σ x_k A_k + |x|² A_{n+1})`.
#[derive(Debug, Clone)]
pub struct PolynomialSym {
    pub coeffs: Vec<Matrix>,
}

impl SymTensorField for PolynomialSym {
    fn dim(&self) -> usize {
        self.coeffs[0].nrows()
    }

    fn eval(&self, x: &Vector) -> Matrix {
        let n = self.dim();
        let mut m = self.coeffs[0].clone();
        for k in 0..n {
            m += &self.coeffs[k + 1] * x[k];
        }
        m += &self.coeffs[n + 1] * x.norm_squared();
        (&m + m.transpose()) * 0.5
    }
}

/// `ḡ`-trace-free part of a polynomial field with coefficients uniform in `[−1, 1]`.
pub fn random_trace_free<R: Rng>(rng: &mut R, n: usize) -> Result<TraceFreePart<PolynomialSym>> {
    Ok(TraceFreePart {
        field: PolynomialSym {
            coeffs: (0..n + 2).map(|_| Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))).collect(),
        },
        reference: compactified_metric(n)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::adapted_rho;
    use crate::metric::{MetricField, Quadratic};
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_point(rng: &mut ChaCha8Rng, n: usize, rmin: f64, rmax: f64) -> Vector {
        let w = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)).normalize();
        w * rng.random_range(rmin..rmax)
    }

    fn rand_triple(rng: &mut ChaCha8Rng, scale: Arc<Scale>, x: &Vector) -> TractorTriple {
        let n = x.len();
        TractorTriple::new(
            scale,
            x.clone(),
            rng.random_range(-1.0..1.0),
            Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)),
            rng.random_range(-1.0..1.0),
        )
    }

    fn rand_scale(rng: &mut ChaCha8Rng, n: usize) -> Arc<Scale> {
        let f = Quadratic::new(
            rng.random_range(-0.3..0.3),
            Vector::from_fn(n, |_, _| rng.random_range(-0.3..0.3)),
            Matrix::from_fn(n, n, |_, _| rng.random_range(-0.3..0.3)),
        );
        Arc::new(Scale::conformal("random", compactified_metric(n).unwrap(), Arc::new(f)))
    }

    #[test]
    fn x_pairings() {
        let s = Arc::new(Scale::compactified(3).unwrap());
        let x = Vector::from_vec(vec![0.2, 0.3, 0.1]);
        let xt = TractorTriple::x(s.clone(), x.clone());
        let t = TractorTriple::new(s.clone(), x.clone(), 0.7, Vector::from_vec(vec![1.0, 2.0, 3.0]), -4.0);
        assert_eq!(tractor_pairing(&xt, &t).unwrap(), 0.7);
        assert_eq!(tractor_pairing(&xt, &xt).unwrap(), 0.0);
    }

    #[test]
    fn change_scale_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let base = Arc::new(Scale::compactified(3).unwrap());
        let x = Vector::from_vec(vec![0.2, -0.3, 0.4]);
        let same = change_scale(&rand_triple(&mut rng, base.clone(), &x), base.clone()).unwrap();
        let again = change_scale(&same, base.clone()).unwrap();
        assert_eq!(same.max_abs_diff(&again), 0.0);

        let f = Quadratic::new(0.0, Vector::from_vec(vec![0.5, -0.25, 1.0]), Matrix::zeros(3, 3));
        let other = Arc::new(Scale::conformal("lin", compactified_metric(3).unwrap(), Arc::new(f)));
        let t = TractorTriple::new(base.clone(), x.clone(), 2.0, Vector::zeros(3), 0.0);
        let moved = change_scale(&t, other).unwrap();
        let ups = Vector::from_vec(vec![0.5, -0.25, 1.0]);
        let ginv = compactified_metric(3).unwrap().inverse(&x).unwrap();
        assert!((moved.middle - &ups * 2.0).amax() < 1e-14);
        assert!((moved.bottom + 0.5 * ups.dot(&(ginv * &ups)) * 2.0).abs() < 1e-14);
    }

    #[test]
    fn flat_constant_tractor_is_parallel() {
        let flat = Arc::new(Scale::reference(MetricField::flat(3)));
        let x = Vector::from_vec(vec![0.1, 0.2, 0.3]);
        let field = |y: &Vector| Ok(TractorTriple::new(flat.clone(), y.clone(), 1.0, Vector::zeros(3), 0.0));
        for a in 0..3 {
            let d = tractor_derivative(&field, &x, a).unwrap();
            assert!(d.to_vector().amax() < 1e-12);
        }
    }

    #[test]
    fn flat_d_operator_on_constant() {
        let flat = Arc::new(Scale::reference(MetricField::flat(4)));
        let one = Quadratic::new(1.0, Vector::zeros(4), Matrix::zeros(4, 4));
        let d = d_operator(&one, 1, flat, &Vector::from_vec(vec![0.1, 0.0, 0.2, 0.0])).unwrap();
        assert_eq!(d.top, 4.0);
        assert_eq!(d.middle.amax(), 0.0);
        assert_eq!(d.bottom, 0.0);
    }

    #[test]
    fn hyperbolic_scale_tractor() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 3..=5 {
            let hyp = Arc::new(Scale::hyperbolic(n).unwrap());
            for _ in 0..5 {
                let x = rand_point(&mut rng, n, 0.3, 0.95);
                let i = scale_tractor(hyp.clone(), &x).unwrap();
                let rho = adapted_rho(n).eval(&x);
                assert!((i.top - rho).abs() < 1e-12);
                assert!(i.middle.amax() < 1e-9 * (1.0 / rho));
                assert!((i.bottom - 0.5 / rho).abs() < 1e-8 / rho);
                assert!((tractor_pairing(&i, &i).unwrap() - 1.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn scale_tractor_parallel_in_both_splittings() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let hyp = Arc::new(Scale::hyperbolic(3).unwrap());
        let bar = Arc::new(Scale::compactified(3).unwrap());
        for _ in 0..5 {
            let x = rand_point(&mut rng, 3, 0.3, 0.9);
            let own = |y: &Vector| scale_tractor(hyp.clone(), y);
            let moved = |y: &Vector| change_scale(&scale_tractor(hyp.clone(), y)?, bar.clone());
            for a in 0..3 {
                let d = tractor_derivative(&own, &x, a).unwrap();
                assert!(d.to_vector().amax() < 1e-5, "{:?}", d.to_vector());
                let d = tractor_derivative(&moved, &x, a).unwrap();
                assert!(d.to_vector().amax() < 1e-5, "{:?}", d.to_vector());
            }
        }
    }

    #[test]
    fn connection_preserves_metric() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let scale = rand_scale(&mut rng, 3);
        let s2 = scale.clone();
        let field = move |y: &Vector| {
            Ok(TractorTriple::new(
                s2.clone(),
                y.clone(),
                (y[0] * 2.0).sin() + 0.3,
                Vector::from_vec(vec![y[1] * y[2], y[0].cos(), y[0] + y[2] * y[2]]),
                y.norm_squared() - 0.4,
            ))
        };
        let x = rand_point(&mut rng, 3, 0.2, 0.7);
        let t = field(&x).unwrap();
        for a in 0..3 {
            let lhs = fd::central4(|y| {
                let t = field(y).unwrap();
                tractor_pairing(&t, &t).unwrap()
            }, &x, a, 1e-3);
            let dt = tractor_derivative(&field, &x, a).unwrap();
            let rhs = 2.0 * tractor_pairing(&dt, &t).unwrap();
            assert!((lhs - rhs).abs() < 1e-5, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn normal_tractor_properties() {
        let bar = Arc::new(Scale::compactified(3).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let w = rand_point(&mut rng, 3, 1.0, 1.0 + 1e-12).normalize();
            let nt = normal_tractor(bar.clone(), &w).unwrap();
            assert!((tractor_pairing(&nt, &nt).unwrap() - 1.0).abs() < 1e-8);
            let xt = TractorTriple::x(bar.clone(), w.clone());
            assert_eq!(tractor_pairing(&nt, &xt).unwrap(), 0.0);
            assert!(nt.bottom.abs() < 1e-8);
        }
        let flat = Scale::reference(MetricField::flat(3));
        let h = boundary_mean_curvature(&flat, &Vector::from_vec(vec![0.0, 0.6, 0.8])).unwrap();
        assert!((h + 1.0).abs() < 1e-8);
        let hyp = Scale::hyperbolic(3).unwrap();
        assert!(normal_tractor(Arc::new(hyp), &Vector::from_vec(vec![1.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn scale_tractor_meets_normal_tractor() {
        let hyp = Arc::new(Scale::hyperbolic(3).unwrap());
        let bar = Arc::new(Scale::compactified(3).unwrap());
        let w = Vector::from_vec(vec![0.48, -0.6, 0.64]);
        let (i, err) = scale_tractor_boundary(hyp, bar.clone(), &w, &EpsilonSchedule::default()).unwrap();
        let nt = normal_tractor(bar, &w).unwrap();
        assert!(i.max_abs_diff(&nt) < 1e-6, "{:?} vs {:?} (err {err})", i.to_vector(), nt.to_vector());
    }

    #[test]
    fn identification_map_round_trip() {
        let s = Arc::new(Scale::compactified(3).unwrap());
        let w = Vector::from_vec(vec![1.0, 0.0, 0.0]);
        let t = TractorTriple::new(s, w.clone(), 0.5, Vector::from_vec(vec![0.0, 1.0, 2.0]), 3.0);
        let moved = identify_boundary(&identify_boundary(&t, &w, 0.7), &w, -0.7);
        assert!((moved.middle - &t.middle).amax() < 1e-15);
    }

    #[test]
    fn splitting_operator_examples() {
        let flat = Arc::new(Scale::reference(MetricField::flat(3)));
        let x = Vector::from_vec(vec![0.1, 0.2, 0.3]);
        struct Zero;
        impl SymTensorField for Zero {
            fn dim(&self) -> usize {
                3
            }
            fn eval(&self, _x: &Vector) -> Matrix {
                Matrix::zeros(3, 3)
            }
        }
        let s = splitting_s(&Zero, flat.clone(), &x).unwrap();
        assert!(s.components.iter().all(|c| c.to_vector().amax() == 0.0));
        struct Const;
        impl SymTensorField for Const {
            fn dim(&self) -> usize {
                3
            }
            fn eval(&self, _x: &Vector) -> Matrix {
                Matrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 2.0, -3.0, 1.0, 0.0, 1.0, 2.0])
            }
        }
        let s = splitting_s(&Const, flat.clone(), &x).unwrap();
        assert!(s.components.iter().all(|c| c.bottom.abs() < 1e-9));
        assert!(s.in_kernel(1e-12).unwrap());
        struct Traceful;
        impl SymTensorField for Traceful {
            fn dim(&self) -> usize {
                3
            }
            fn eval(&self, _x: &Vector) -> Matrix {
                Matrix::identity(3, 3)
            }
        }
        assert!(matches!(splitting_s(&Traceful, flat, &x), Err(Error::NotTraceFree(_))));
    }

    #[test]
    fn splitting_normalization_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in [3, 4] {
            let scales = [Arc::new(Scale::compactified(n).unwrap()), Arc::new(Scale::hyperbolic(n).unwrap()), rand_scale(&mut rng, n)];
            for scale in scales {
                let phi = random_trace_free(&mut rng, n).unwrap();
                let x = rand_point(&mut rng, n, 0.3, 0.8);
                let res = splitting_residual(&phi, scale.clone(), &x).unwrap();
                assert!(res.amax() < 1e-4, "n = {n}, scale {}: {res:?}", scale.label());
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn pairing_and_round_trip(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let base = Arc::new(Scale::compactified(3).unwrap());
            let other = rand_scale(&mut rng, 3);
            let x = rand_point(&mut rng, 3, 0.1, 0.9);
            let t1 = rand_triple(&mut rng, base.clone(), &x);
            let t2 = rand_triple(&mut rng, base.clone(), &x);
            let p = tractor_pairing(&t1, &t2).unwrap();
            let m1 = change_scale(&t1, other.clone()).unwrap();
            let m2 = change_scale(&t2, other.clone()).unwrap();
            prop_assert!((tractor_pairing(&m1, &m2).unwrap() - p).abs() < 1e-12 * p.abs().max(1.0));
            let back = change_scale(&m1, base).unwrap();
            prop_assert!(back.max_abs_diff(&t1) < 1e-12);
            prop_assert_eq!(m1.top, t1.top);
        }

        #[test]
        fn operations_commute_with_scale_change(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s1 = rand_scale(&mut rng, 3);
            let s2 = rand_scale(&mut rng, 3);
            let x = rand_point(&mut rng, 3, 0.2, 0.7);
            let tau = Quadratic::new(0.8, Vector::from_vec(vec![0.1, -0.2, 0.3]), Matrix::from_fn(3, 3, |i, j| if i == j { 0.4 } else { 0.1 }));
            let d1 = change_scale(&d_operator(&tau, 1, s1.clone(), &x).unwrap(), s2.clone()).unwrap();
            let d2 = d_operator(&tau, 1, s2.clone(), &x).unwrap();
            prop_assert!(d1.max_abs_diff(&d2) < 1e-6, "D: {:?} vs {:?}", d1.to_vector(), d2.to_vector());

            let ss = s1.clone();
            let field = move |y: &Vector| Ok(TractorTriple::new(ss.clone(), y.clone(), y[0] + 0.5, Vector::from_vec(vec![y[1], y[2] * y[0], 1.0]), y[2]));
            let s2c = s2.clone();
            let moved = move |y: &Vector| change_scale(&field(y)?, s2c.clone());
            let fieldb = {
                let ss = s1.clone();
                move |y: &Vector| Ok(TractorTriple::new(ss.clone(), y.clone(), y[0] + 0.5, Vector::from_vec(vec![y[1], y[2] * y[0], 1.0]), y[2]))
            };
            for a in 0..3 {
                let lhs = change_scale(&tractor_derivative(&fieldb, &x, a).unwrap(), s2.clone()).unwrap();
                let rhs = tractor_derivative(&moved, &x, a).unwrap();
                prop_assert!(lhs.max_abs_diff(&rhs) < 1e-6, "a = {a}: {:?} vs {:?}", lhs.to_vector(), rhs.to_vector());
            }
        }
    }
}
