//! Symmetric tensor fields, scalar fields and Riemannian metrics on coordinate
//! patches of ℝⁿ, together with their Levi-Civita data.
//!
//! A [`MetricField`] is stored as a background (flat, hyperbolic, the
//! compactified ball metric, or an arbitrary field) plus a list of additive
//! perturbations. Differences between two metrics sharing a background are
//! formed from the perturbations alone, which keeps `h - g` accurate near the
//! boundary where both metrics blow up like `ρ⁻²`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fd;
use crate::{Matrix, Vector};

/// A smooth symmetric 2-tensor field given by its coordinate components.
pub trait SymTensorField: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &Vector) -> Matrix;

    /// Analytic first derivatives `∂_k T_ij`, one matrix per `k`.
    fn deriv(&self, _x: &Vector) -> Option<Vec<Matrix>> {
        None
    }
}

/// A smooth scalar function with optional analytic derivatives.
pub trait ScalarField: Send + Sync {
    fn value(&self, x: &Vector) -> f64;

    fn gradient(&self, _x: &Vector) -> Option<Vector> {
        None
    }

    fn hessian(&self, _x: &Vector) -> Option<Matrix> {
        None
    }
}

/// Gradient of `f`, analytic when available and central differences otherwise.
pub fn gradient_of(f: &dyn ScalarField, x: &Vector) -> Vector {
    if let Some(g) = f.gradient(x) {
        return g;
    }
    let n = x.len();
    Vector::from_fn(n, |k, _| fd::central4(|y| f.value(y), x, k, 0.5 * fd::outer_step(x)))
}

/// Hessian of `f`: analytic, or differences of the (possibly analytic) gradient.
pub fn hessian_of(f: &dyn ScalarField, x: &Vector) -> Matrix {
    if let Some(h) = f.hessian(x) {
        return h;
    }
    let n = x.len();
    let h = fd::outer_step(x);
    let mut out = Matrix::zeros(n, n);
    for k in 0..n {
        let col = fd::central4(|y| gradient_of(f, y), x, k, h);
        out.set_column(k, &col);
    }
    (&out + out.transpose()) * 0.5
}

type VectorFn = Box<dyn Fn(&Vector) -> Vector + Send + Sync>;
type MatrixFn = Box<dyn Fn(&Vector) -> Matrix + Send + Sync>;

/// Closure-backed scalar field.
pub struct ScalarFn {
    value: Box<dyn Fn(&Vector) -> f64 + Send + Sync>,
    gradient: Option<VectorFn>,
    hessian: Option<MatrixFn>,
}

impl ScalarFn {
    pub fn new(value: impl Fn(&Vector) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            value: Box::new(value),
            gradient: None,
            hessian: None,
        }
    }

    pub fn with_gradient(mut self, g: impl Fn(&Vector) -> Vector + Send + Sync + 'static) -> Self {
        self.gradient = Some(Box::new(g));
        self
    }

    pub fn with_hessian(mut self, h: impl Fn(&Vector) -> Matrix + Send + Sync + 'static) -> Self {
        self.hessian = Some(Box::new(h));
        self
    }
}

impl ScalarField for ScalarFn {
    fn value(&self, x: &Vector) -> f64 {
        (self.value)(x)
    }

    fn gradient(&self, x: &Vector) -> Option<Vector> {
        self.gradient.as_ref().map(|g| g(x))
    }

    fn hessian(&self, x: &Vector) -> Option<Matrix> {
        self.hessian.as_ref().map(|h| h(x))
    }
}

/// `c + b·x + ½ xᵀ A x` with exact derivatives.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub constant: f64,
    pub linear: Vector,
    pub quadratic: Matrix,
}

impl Quadratic {
    pub fn new(constant: f64, linear: Vector, quadratic: Matrix) -> Self {
        let quadratic = (&quadratic + quadratic.transpose()) * 0.5;
        Self {
            constant,
            linear,
            quadratic,
        }
    }
}

impl ScalarField for Quadratic {
    fn value(&self, x: &Vector) -> f64 {
        self.constant + self.linear.dot(x) + 0.5 * x.dot(&(&self.quadratic * x))
    }

    fn gradient(&self, x: &Vector) -> Option<Vector> {
        Some(&self.linear + &self.quadratic * x)
    }

    fn hessian(&self, _x: &Vector) -> Option<Matrix> {
        Some(self.quadratic.clone())
    }
}

/// Pointwise sum of scalar fields.
pub struct SumScalar(pub Vec<Arc<dyn ScalarField>>);

impl ScalarField for SumScalar {
    fn value(&self, x: &Vector) -> f64 {
        self.0.iter().map(|f| f.value(x)).sum()
    }

    fn gradient(&self, x: &Vector) -> Option<Vector> {
        let mut acc = Vector::zeros(x.len());
        for f in &self.0 {
            acc += f.gradient(x)?;
        }
        Some(acc)
    }

    fn hessian(&self, x: &Vector) -> Option<Matrix> {
        let mut acc = Matrix::zeros(x.len(), x.len());
        for f in &self.0 {
            acc += f.hessian(x)?;
        }
        Some(acc)
    }
}

/// The constant function zero.
pub struct ZeroScalar;

impl ScalarField for ZeroScalar {
    fn value(&self, _x: &Vector) -> f64 {
        0.0
    }

    fn gradient(&self, x: &Vector) -> Option<Vector> {
        Some(Vector::zeros(x.len()))
    }

    fn hessian(&self, x: &Vector) -> Option<Matrix> {
        Some(Matrix::zeros(x.len(), x.len()))
    }
}

/// Christoffel symbols `Γ^k_ij`, stored flat with index `k·n² + i·n + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    dim: usize,
    data: Vector,
}

impl Christoffel {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: Vector::zeros(dim * dim * dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.dim + i) * self.dim + j]
    }

    #[inline]
    fn set(&mut self, k: usize, i: usize, j: usize, v: f64) {
        let n = self.dim;
        self.data[(k * n + i) * n + j] = v;
    }

    /// Levi-Civita symbols of a conformally flat metric `e^{2u} δ`.
    pub fn conformally_flat(du: &Vector) -> Self {
        let n = du.len();
        let mut out = Self::zeros(n);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut v = 0.0;
                    if k == i {
                        v += du[j];
                    }
                    if k == j {
                        v += du[i];
                    }
                    if i == j {
                        v -= du[k];
                    }
                    out.set(k, i, j, v);
                }
            }
        }
        out
    }

    /// `½ g^{kl}(∂_i g_jl + ∂_j g_il − ∂_l g_ij)`.
    pub fn from_metric(ginv: &Matrix, dg: &[Matrix]) -> Self {
        let n = ginv.nrows();
        let mut lowered = vec![0.0; n * n * n];
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    lowered[(l * n + i) * n + j] =
                        0.5 * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                }
            }
        }
        let mut out = Self::zeros(n);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let v = (0..n).map(|l| ginv[(k, l)] * lowered[(l * n + i) * n + j]).sum();
                    out.set(k, i, j, v);
                }
            }
        }
        out
    }

    /// `Γ^k_ij v_k`, the matrix contracting the upper index with a covector.
    pub fn contract_upper(&self, v: &Vector) -> Matrix {
        let n = self.dim;
        Matrix::from_fn(n, n, |i, j| (0..n).map(|k| self.get(k, i, j) * v[k]).sum())
    }

    /// `Γ^m_{k i} t_{m j}` as a matrix in `(i, j)` for fixed `k`.
    pub fn contract_upper_left(&self, k: usize, t: &Matrix) -> Matrix {
        let n = self.dim;
        Matrix::from_fn(n, n, |i, j| (0..n).map(|m| self.get(m, k, i) * t[(m, j)]).sum())
    }

    pub fn as_vector(&self) -> &Vector {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.amax()
    }
}

/// Fixed reference geometry underlying a [`MetricField`].
#[derive(Clone)]
pub enum Background {
    /// `δ_ij`.
    Flat,
    /// The Poincaré ball metric `4/(1−r²)² δ_ij`.
    Hyperbolic,
    /// The compactified ball metric `16/(1+r)⁴ δ_ij = ρ² g_hyp`.
    Compactified,
    Custom(Arc<dyn SymTensorField>),
}

impl Background {
    fn same_as(&self, other: &Background) -> bool {
        match (self, other) {
            (Background::Flat, Background::Flat)
            | (Background::Hyperbolic, Background::Hyperbolic)
            | (Background::Compactified, Background::Compactified) => true,
            (Background::Custom(a), Background::Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }

    /// `(u, du)` when the background is `e^{2u} δ`.
    fn log_conformal_factor(&self, x: &Vector) -> Option<(f64, Vector)> {
        let r2 = x.norm_squared();
        match self {
            Background::Flat => Some((0.0, Vector::zeros(x.len()))),
            Background::Hyperbolic => {
                let d = 1.0 - r2;
                Some(((2.0 / d).ln(), x * (2.0 / d)))
            }
            Background::Compactified => {
                let r = r2.sqrt();
                let u = (4.0f64).ln() - 2.0 * (1.0 + r).ln();
                if r == 0.0 {
                    Some((u, Vector::zeros(x.len())))
                } else {
                    Some((u, x * (-2.0 / (r * (1.0 + r)))))
                }
            }
            Background::Custom(_) => None,
        }
    }

    fn eval(&self, x: &Vector) -> Matrix {
        match self {
            Background::Custom(f) => f.eval(x),
            _ => {
                let (u, _) = self.log_conformal_factor(x).expect("conformally flat");
                Matrix::identity(x.len(), x.len()) * (2.0 * u).exp()
            }
        }
    }

    fn deriv(&self, x: &Vector) -> Option<Vec<Matrix>> {
        match self {
            Background::Custom(f) => f.deriv(x),
            _ => {
                let (u, du) = self.log_conformal_factor(x).expect("conformally flat");
                let psi = (2.0 * u).exp();
                let id = Matrix::identity(x.len(), x.len());
                Some((0..x.len()).map(|k| &id * (2.0 * psi * du[k])).collect())
            }
        }
    }
}

impl fmt::Debug for Background {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Background::Flat => write!(f, "Flat"),
            Background::Hyperbolic => write!(f, "Hyperbolic"),
            Background::Compactified => write!(f, "Compactified"),
            Background::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// A Riemannian metric on (a subset of) ℝⁿ: background plus perturbations.
#[derive(Clone)]
pub struct MetricField {
    dim: usize,
    background: Background,
    perturbations: Vec<Arc<dyn SymTensorField>>,
    fd_step: f64,
    family: String,
    params: BTreeMap<String, String>,
}

impl fmt::Debug for MetricField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricField")
            .field("dim", &self.dim)
            .field("background", &self.background)
            .field("perturbations", &self.perturbations.len())
            .field("family", &self.family)
            .field("params", &self.params)
            .finish()
    }
}

impl MetricField {
    pub fn new(dim: usize, background: Background, family: impl Into<String>) -> Self {
        Self {
            dim,
            background,
            perturbations: Vec::new(),
            fd_step: fd::DEFAULT_STEP,
            family: family.into(),
            params: BTreeMap::new(),
        }
    }

    pub fn flat(dim: usize) -> Self {
        Self::new(dim, Background::Flat, "flat")
    }

    /// A metric given entirely by an arbitrary tensor field.
    pub fn custom(field: Arc<dyn SymTensorField>, family: impl Into<String>) -> Self {
        Self::new(field.dim(), Background::Custom(field), family)
    }

    pub fn with_perturbation(mut self, p: Arc<dyn SymTensorField>) -> Self {
        assert_eq!(p.dim(), self.dim, "perturbation dimension");
        self.perturbations.push(p);
        self
    }

    pub fn with_param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    pub fn with_family(mut self, family: impl Into<String>) -> Self {
        self.family = family.into();
        self
    }

    pub fn with_fd_step(mut self, h: f64) -> Self {
        self.fd_step = h;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family(&self) -> &str {
        &self.family
    }

    pub fn params(&self) -> &BTreeMap<String, String> {
        &self.params
    }

    pub fn background(&self) -> &Background {
        &self.background
    }

    pub fn perturbations(&self) -> &[Arc<dyn SymTensorField>] {
        &self.perturbations
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    /// True when the background is conformally flat with a closed-form factor
    /// and no perturbation is present.
    pub fn is_pure_background(&self) -> bool {
        self.perturbations.is_empty() && !matches!(self.background, Background::Custom(_))
    }

    pub fn perturbation(&self, x: &Vector) -> Matrix {
        let mut acc = Matrix::zeros(self.dim, self.dim);
        for p in &self.perturbations {
            acc += p.eval(x);
        }
        acc
    }

    fn perturbation_deriv(&self, x: &Vector) -> Vec<Matrix> {
        let mut acc = vec![Matrix::zeros(self.dim, self.dim); self.dim];
        for p in &self.perturbations {
            let d = match p.deriv(x) {
                Some(d) => d,
                None => (0..self.dim)
                    .map(|k| fd::central(|y| p.eval(y), x, k, self.fd_step))
                    .collect(),
            };
            for (a, b) in acc.iter_mut().zip(d) {
                *a += b;
            }
        }
        acc
    }

    pub fn eval(&self, x: &Vector) -> Matrix {
        self.background.eval(x) + self.perturbation(x)
    }

    pub fn has_analytic_deriv(&self) -> bool {
        let x = Vector::from_element(self.dim, 0.1);
        self.background.deriv(&x).is_some() && self.perturbations.iter().all(|p| p.deriv(&x).is_some())
    }

    /// `∂_k g_ij`, analytic where supplied, central differences otherwise.
    pub fn deriv(&self, x: &Vector) -> Vec<Matrix> {
        let bg = match self.background.deriv(x) {
            Some(d) => d,
            None => (0..self.dim)
                .map(|k| fd::central(|y| self.background.eval(y), x, k, self.fd_step))
                .collect(),
        };
        bg.into_iter()
            .zip(self.perturbation_deriv(x))
            .map(|(a, b)| a + b)
            .collect()
    }

    pub fn inverse(&self, x: &Vector) -> Result<Matrix> {
        invert_sym(&self.eval(x)).ok_or_else(|| Error::SingularMetric(x.iter().copied().collect()))
    }

    /// `h − g`, computed from perturbations alone when the backgrounds agree.
    pub fn difference(h: &MetricField, g: &MetricField, x: &Vector) -> Matrix {
        if h.background.same_as(&g.background) {
            h.perturbation(x) - g.perturbation(x)
        } else {
            h.eval(x) - g.eval(x)
        }
    }

    /// `∂_k (h − g)_ij`.
    pub fn difference_deriv(h: &MetricField, g: &MetricField, x: &Vector) -> Vec<Matrix> {
        if h.background.same_as(&g.background) {
            h.perturbation_deriv(x)
                .into_iter()
                .zip(g.perturbation_deriv(x))
                .map(|(a, b)| a - b)
                .collect()
        } else {
            h.deriv(x).into_iter().zip(g.deriv(x)).map(|(a, b)| a - b).collect()
        }
    }

    /// Levi-Civita Christoffel symbols; closed form for unperturbed conformally
    /// flat backgrounds.
    pub fn christoffels(&self, x: &Vector) -> Result<Christoffel> {
        if self.perturbations.is_empty() {
            if let Some((_, du)) = self.background.log_conformal_factor(x) {
                return Ok(Christoffel::conformally_flat(&du));
            }
        }
        let ginv = self.inverse(x)?;
        Ok(Christoffel::from_metric(&ginv, &self.deriv(x)))
    }

    /// Riemann tensor `R^a_{bcd}` (index `((a·n + b)·n + c)·n + d`), with
    /// `R^a_{bcd} = ∂_c Γ^a_{db} − ∂_d Γ^a_{cb} + Γ^a_{ce}Γ^e_{db} − Γ^a_{de}Γ^e_{cb}`.
    pub fn riemann(&self, x: &Vector) -> Result<Vec<f64>> {
        let n = self.dim;
        let gamma = self.christoffels(x)?;
        let h = fd::outer_step(x);
        let mut dgamma = Vec::with_capacity(n);
        for c in 0..n {
            let d: Vector = fd::central4(
                |y| {
                    self.christoffels(y)
                        .map(|g| g.data)
                        .unwrap_or_else(|_| Vector::from_element(n * n * n, f64::NAN))
                },
                x,
                c,
                h,
            );
            dgamma.push(d);
        }
        let dg = |c: usize, a: usize, d: usize, b: usize| dgamma[c][(a * n + d) * n + b];
        let mut out = vec![0.0; n * n * n * n];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let mut v = dg(c, a, d, b) - dg(d, a, c, b);
                        for e in 0..n {
                            v += gamma.get(a, c, e) * gamma.get(e, d, b)
                                - gamma.get(a, d, e) * gamma.get(e, c, b);
                        }
                        out[((a * n + b) * n + c) * n + d] = v;
                    }
                }
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Riemann tensor".into()));
        }
        Ok(out)
    }

    /// Ricci tensor `Ric_bd = R^a_{bad}`.
    pub fn ricci(&self, x: &Vector) -> Result<Matrix> {
        let n = self.dim;
        let riem = self.riemann(x)?;
        let ric = Matrix::from_fn(n, n, |b, d| (0..n).map(|a| riem[((a * n + b) * n + a) * n + d]).sum());
        Ok((&ric + ric.transpose()) * 0.5)
    }

    /// Sectional curvature of the 2-plane spanned by `u, v`.
    pub fn sectional_curvature(&self, x: &Vector, u: &Vector, v: &Vector) -> Result<f64> {
        let n = self.dim;
        let riem = self.riemann(x)?;
        let g = self.eval(x);
        let mut num = 0.0;
        for a in 0..n {
            let ua: f64 = (0..n).map(|e| g[(a, e)] * u[e]).sum();
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        num += ua * riem[((a * n + b) * n + c) * n + d] * v[b] * u[c] * v[d];
                    }
                }
            }
        }
        let guu = u.dot(&(&g * u));
        let gvv = v.dot(&(&g * v));
        let guv = u.dot(&(&g * v));
        Ok(num / (guu * gvv - guv * guv))
    }
}

/// Inverse of a symmetric matrix, `None` when (numerically) singular.
pub fn invert_sym(m: &Matrix) -> Option<Matrix> {
    let inv = m.clone().try_inverse()?;
    if inv.iter().all(|v| v.is_finite()) {
        Some((&inv + inv.transpose()) * 0.5)
    } else {
        None
    }
}

/// A perturbation obtained by pushing a field forward along a rotation:
/// `T'(x) = R T(Rᵀx) Rᵀ`.
pub struct RotatedField {
    inner: Arc<dyn SymTensorField>,
    rotation: Matrix,
}

impl RotatedField {
    pub fn new(inner: Arc<dyn SymTensorField>, rotation: Matrix) -> Self {
        Self { inner, rotation }
    }
}

impl SymTensorField for RotatedField {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, x: &Vector) -> Matrix {
        let y = self.rotation.transpose() * x;
        &self.rotation * self.inner.eval(&y) * self.rotation.transpose()
    }

    fn deriv(&self, x: &Vector) -> Option<Vec<Matrix>> {
        let y = self.rotation.transpose() * x;
        let d = self.inner.deriv(&y)?;
        let n = self.dim();
        let r = &self.rotation;
        let rotated: Vec<Matrix> = d.iter().map(|m| r * m * r.transpose()).collect();
        Some(
            (0..n)
                .map(|k| {
                    let mut acc = Matrix::zeros(n, n);
                    for (c, m) in rotated.iter().enumerate() {
                        acc += m * r[(k, c)];
                    }
                    acc
                })
                .collect(),
        )
    }
}

impl MetricField {
    /// Push the metric forward along the rotation `R`. Requires a rotation
    /// invariant background, which all built-in backgrounds are.
    pub fn rotated(&self, rotation: &Matrix) -> MetricField {
        let mut out = self.clone();
        out.perturbations = self
            .perturbations
            .iter()
            .map(|p| Arc::new(RotatedField::new(p.clone(), rotation.clone())) as Arc<dyn SymTensorField>)
            .collect();
        if let Background::Custom(f) = &self.background {
            out.background = Background::Custom(Arc::new(RotatedField::new(f.clone(), rotation.clone())));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere_chart() -> MetricField {
        // stereographic unit sphere: 4/(1+r²)² δ
        struct Stereo;
        impl SymTensorField for Stereo {
            fn dim(&self) -> usize {
                3
            }
            fn eval(&self, x: &Vector) -> Matrix {
                let d = 1.0 + x.norm_squared();
                Matrix::identity(3, 3) * (4.0 / (d * d))
            }
        }
        MetricField::custom(Arc::new(Stereo), "sphere")
    }

    #[test]
    fn flat_metric_has_no_connection() {
        let g = MetricField::flat(4);
        let x = Vector::from_vec(vec![0.1, 0.2, -0.3, 0.05]);
        assert_eq!(g.christoffels(&x).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn general_christoffels_match_closed_form() {
        struct Hyp;
        impl SymTensorField for Hyp {
            fn dim(&self) -> usize {
                3
            }
            fn eval(&self, x: &Vector) -> Matrix {
                let d = 1.0 - x.norm_squared();
                Matrix::identity(3, 3) * (4.0 / (d * d))
            }
        }
        let generic = MetricField::custom(Arc::new(Hyp), "hyp-fd");
        let closed = MetricField::new(3, Background::Hyperbolic, "hyperbolic");
        let x = Vector::from_vec(vec![0.3, -0.4, 0.2]);
        let a = generic.christoffels(&x).unwrap();
        let b = closed.christoffels(&x).unwrap();
        assert!((a.as_vector() - b.as_vector()).amax() < 1e-6);
    }

    #[test]
    fn unit_sphere_has_curvature_one() {
        let g = sphere_chart();
        let x = Vector::from_vec(vec![0.2, 0.1, -0.3]);
        let u = Vector::from_vec(vec![1.0, 0.0, 0.2]);
        let v = Vector::from_vec(vec![0.1, 1.0, 0.0]);
        let k = g.sectional_curvature(&x, &u, &v).unwrap();
        assert!((k - 1.0).abs() < 1e-6, "K = {k}");
        let ric = g.ricci(&x).unwrap();
        let expect = g.eval(&x) * 2.0;
        assert!((ric - expect).amax() < 1e-5);
    }

    #[test]
    fn singular_metric_is_reported() {
        struct Degenerate;
        impl SymTensorField for Degenerate {
            fn dim(&self) -> usize {
                3
            }
            fn eval(&self, _x: &Vector) -> Matrix {
                Matrix::zeros(3, 3)
            }
        }
        let g = MetricField::custom(Arc::new(Degenerate), "zero");
        let x = Vector::from_vec(vec![0.1, 0.1, 0.1]);
        assert!(matches!(g.christoffels(&x), Err(Error::SingularMetric(_))));
    }

    #[test]
    fn rotated_derivative_matches_differences() {
        struct Poly;
        impl SymTensorField for Poly {
            fn dim(&self) -> usize {
                3
            }
            fn eval(&self, x: &Vector) -> Matrix {
                Matrix::from_fn(3, 3, |i, j| x[i] * x[j] + x[0] * (i + j) as f64)
            }
            fn deriv(&self, x: &Vector) -> Option<Vec<Matrix>> {
                Some(
                    (0..3)
                        .map(|k| {
                            Matrix::from_fn(3, 3, |i, j| {
                                let mut v = 0.0;
                                if i == k {
                                    v += x[j];
                                }
                                if j == k {
                                    v += x[i];
                                }
                                if k == 0 {
                                    v += (i + j) as f64;
                                }
                                v
                            })
                        })
                        .collect(),
                )
            }
        }
        let rot = nalgebra::Rotation3::from_euler_angles(0.3, -0.7, 1.1);
        let r = Matrix::from_fn(3, 3, |i, j| rot.matrix()[(i, j)]);
        let f = RotatedField::new(Arc::new(Poly), r);
        let x = Vector::from_vec(vec![0.2, -0.1, 0.4]);
        let d = f.deriv(&x).unwrap();
        for (k, dk) in d.iter().enumerate() {
            let fdk = fd::central4(|y| f.eval(y), &x, k, 1e-3);
            assert!((dk - fdk).amax() < 1e-10);
        }
    }
}
