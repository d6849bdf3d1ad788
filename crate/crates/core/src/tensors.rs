//! Scales of the conformal class, weighted tensors and Schouten tensors.
//!
//! Densities are carried as their trivialization in the reference scale
//! `ḡ = ρ²g`. A weight-`w` density `τ` has trivialization `e^{wf}τ` in the
//! scale `ĝ = e^{2f}ḡ`.

use std::fmt;
use std::sync::Arc;

use crate::chart::{adapted_rho, check_dim, compactified_metric, hyperbolic_metric};
use crate::error::{Error, Result};
use crate::metric::{gradient_of, hessian_of, Background, MetricField, ScalarField, ScalarFn, SumScalar, SymTensorField, ZeroScalar};
use crate::{Matrix, Vector};

/// `e^{2f} g` as a tensor field with analytic derivatives when `g` has them.
pub struct ConformalField {
    base: MetricField,
    log_factor: Arc<dyn ScalarField>,
}

impl ConformalField {
    pub fn new(base: MetricField, log_factor: Arc<dyn ScalarField>) -> Self {
        Self { base, log_factor }
    }
}

impl SymTensorField for ConformalField {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn eval(&self, x: &Vector) -> Matrix {
        self.base.eval(x) * (2.0 * self.log_factor.value(x)).exp()
    }

    fn deriv(&self, x: &Vector) -> Option<Vec<Matrix>> {
        let e = (2.0 * self.log_factor.value(x)).exp();
        let df = gradient_of(self.log_factor.as_ref(), x);
        let g = self.base.eval(x);
        Some(
            self.base
                .deriv(x)
                .into_iter()
                .enumerate()
                .map(|(k, dg)| (&g * (2.0 * df[k]) + dg) * e)
                .collect(),
        )
    }
}

/// `e^{2f} g` as a metric field.
pub fn conformal_metric(g: &MetricField, log_factor: Arc<dyn ScalarField>) -> MetricField {
    MetricField::custom(Arc::new(ConformalField::new(g.clone(), log_factor)), "conformal")
        .with_fd_step(g.fd_step())
}

/// A metric `ĝ = e^{2f} ḡ` of the conformal class, with `ḡ` the reference scale.
#[derive(Clone)]
pub struct Scale {
    label: String,
    reference: MetricField,
    log_factor: Arc<dyn ScalarField>,
    metric: MetricField,
}

impl fmt::Debug for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scale").field("label", &self.label).field("metric", &self.metric).finish()
    }
}

impl Scale {
    /// The reference scale itself.
    pub fn reference(reference: MetricField) -> Self {
        Self {
            label: "reference".into(),
            metric: reference.clone(),
            reference,
            log_factor: Arc::new(ZeroScalar),
        }
    }

    /// `ḡ = ρ²g` on the ball.
    pub fn compactified(n: usize) -> Result<Self> {
        Ok(Self::reference(compactified_metric(n)?))
    }

    /// The hyperbolic metric `g = ρ⁻²ḡ`, i.e. `f = −log ρ`.
    pub fn hyperbolic(n: usize) -> Result<Self> {
        check_dim(n)?;
        let rho = adapted_rho(n);
        let (r1, r2, r3) = (rho.clone(), rho.clone(), rho);
        let f = ScalarFn::new(move |x| -r1.eval(x).ln())
            .with_gradient(move |x| -(r2.grad(x).unwrap_or_else(|_| Vector::zeros(x.len()))) / r2.eval(x))
            .with_hessian(move |x| {
                let p = r3.eval(x);
                let d = r3.grad(x).unwrap_or_else(|_| Vector::zeros(x.len()));
                let h = r3.hessian(x).unwrap_or_else(|_| Matrix::zeros(x.len(), x.len()));
                -h / p + &d * d.transpose() / (p * p)
            });
        Ok(Self {
            label: "hyperbolic".into(),
            reference: compactified_metric(n)?,
            log_factor: Arc::new(f),
            metric: hyperbolic_metric(n)?,
        })
    }

    /// `e^{2f} ḡ` for a reference metric `ḡ`.
    pub fn conformal(label: impl Into<String>, reference: MetricField, log_factor: Arc<dyn ScalarField>) -> Self {
        let metric = conformal_metric(&reference, log_factor.clone());
        Self {
            label: label.into(),
            reference,
            log_factor,
            metric,
        }
    }

    /// `e^{2f₂}ĝ`; log factors add.
    pub fn compose(&self, label: impl Into<String>, log_factor: Arc<dyn ScalarField>) -> Self {
        let f: Arc<dyn ScalarField> = Arc::new(SumScalar(vec![self.log_factor.clone(), log_factor]));
        Self::conformal(label, self.reference.clone(), f)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.reference.dim()
    }

    pub fn reference_metric(&self) -> &MetricField {
        &self.reference
    }

    pub fn metric(&self) -> &MetricField {
        &self.metric
    }

    pub fn log_factor(&self) -> &Arc<dyn ScalarField> {
        &self.log_factor
    }

    pub fn log_factor_at(&self, x: &Vector) -> f64 {
        self.log_factor.value(x)
    }

    /// `e^f`: converts weight-1 trivializations from `ḡ` to this scale.
    pub fn weight_factor(&self, x: &Vector) -> f64 {
        self.log_factor.value(x).exp()
    }

    /// `Υ = df`.
    pub fn upsilon(&self, x: &Vector) -> Vector {
        gradient_of(self.log_factor.as_ref(), x)
    }

    /// `∂_a Υ_b`.
    pub fn upsilon_deriv(&self, x: &Vector) -> Matrix {
        hessian_of(self.log_factor.as_ref(), x)
    }

    /// `ḡ`-trivialization `e^{−f}` of the scale density `σ` with `ĝ = σ⁻²𝐠`.
    pub fn density(&self) -> ScalarFn {
        let (f1, f2, f3) = (self.log_factor.clone(), self.log_factor.clone(), self.log_factor.clone());
        ScalarFn::new(move |x| (-f1.value(x)).exp())
            .with_gradient(move |x| -gradient_of(f2.as_ref(), x) * (-f2.value(x)).exp())
            .with_hessian(move |x| {
                let d = gradient_of(f3.as_ref(), x);
                (&d * d.transpose() - hessian_of(f3.as_ref(), x)) * (-f3.value(x)).exp()
            })
    }

    pub fn schouten(&self, x: &Vector) -> Result<SchoutenTensor> {
        schouten(&self.metric, x)
    }
}

/// Weight-`w` scalar density, trivialized in a stated scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedScalar {
    pub weight: i32,
    pub value: f64,
}

/// Weight-`w` covector density.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedCovector {
    pub weight: i32,
    pub components: Vector,
}

/// Weight-`w` symmetric 2-tensor density.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSym2 {
    pub weight: i32,
    pub components: Matrix,
}

impl WeightedScalar {
    /// Trivialization after passing to the scale `e^{2f}` times the current one.
    pub fn rescaled(&self, f: f64) -> Self {
        Self {
            weight: self.weight,
            value: self.value * (self.weight as f64 * f).exp(),
        }
    }
}

impl WeightedCovector {
    pub fn rescaled(&self, f: f64) -> Self {
        Self {
            weight: self.weight,
            components: &self.components * (self.weight as f64 * f).exp(),
        }
    }
}

impl WeightedSym2 {
    pub fn rescaled(&self, f: f64) -> Self {
        Self {
            weight: self.weight,
            components: &self.components * (self.weight as f64 * f).exp(),
        }
    }
}

/// `P = (Ric − J g)/(n − 2)` with trace `J = g^{ij}P_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchoutenTensor {
    pub components: Matrix,
    pub trace: f64,
}

/// Schouten tensor of `metric` at `x`; closed form on the unperturbed model
/// backgrounds, curvature by differences otherwise.
pub fn schouten(metric: &MetricField, x: &Vector) -> Result<SchoutenTensor> {
    let n = metric.dim();
    if n < 3 {
        return Err(Error::UnsupportedDimension(n));
    }
    if metric.perturbations().is_empty() {
        match metric.background() {
            Background::Hyperbolic => {
                return Ok(SchoutenTensor {
                    components: metric.eval(x) * -0.5,
                    trace: -0.5 * n as f64,
                })
            }
            Background::Flat => {
                return Ok(SchoutenTensor {
                    components: Matrix::zeros(n, n),
                    trace: 0.0,
                })
            }
            _ => {}
        }
    }
    let ginv = metric.inverse(x)?;
    let ric = metric.ricci(x)?;
    let scalar = (&ginv * &ric).trace();
    let j = scalar / (2.0 * (n as f64 - 1.0));
    let p = (ric - metric.eval(x) * j) / (n as f64 - 2.0);
    let p = (&p + p.transpose()) * 0.5;
    Ok(SchoutenTensor {
        trace: (&ginv * &p).trace(),
        components: p,
    })
}

/// Both sides of the Schouten transformation law for `ĝ = e^{2f}g`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalChange {
    pub upsilon: Vector,
    /// `P − ∇Υ + Υ⊗Υ − ½|Υ|²g`.
    pub predicted: Matrix,
    /// Schouten tensor of `ĝ` assembled from its own curvature.
    pub direct: Matrix,
}

impl ConformalChange {
    pub fn residual(&self) -> f64 {
        (&self.predicted - &self.direct).amax()
    }
}

pub fn conformal_change_data(g: &MetricField, f: Arc<dyn ScalarField>, x: &Vector) -> Result<ConformalChange> {
    let upsilon = gradient_of(f.as_ref(), x);
    let gamma = g.christoffels(x)?;
    let nabla_upsilon = hessian_of(f.as_ref(), x) - gamma.contract_upper(&upsilon);
    let gm = g.eval(x);
    let ginv = g.inverse(x)?;
    let norm2 = upsilon.dot(&(&ginv * &upsilon));
    let p = schouten(g, x)?.components;
    let predicted = p - nabla_upsilon + &upsilon * upsilon.transpose() - gm * (0.5 * norm2);
    let direct = schouten(&conformal_metric(g, f), x)?.components;
    Ok(ConformalChange {
        upsilon,
        predicted,
        direct,
    })
}
