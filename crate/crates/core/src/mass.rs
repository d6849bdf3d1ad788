//! Energy–momentum of `h` relative to the hyperbolic metric `g`, by the
//! tractor cocycle route and by the Michel flux route.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::{check_equivalence, extract, EpsilonSchedule, Equivalence};
use crate::chart::{adapted_rho, kid_basis, radius_of, KidSolution};
use crate::cocycle::{density_errors, mass_aspect};
use crate::error::{Error, Result};
use crate::metric::{MetricField, ScalarField};
use crate::quadrature::QuadratureRule;
use crate::richardson::extrapolate;
use crate::{Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Tractor,
    Michel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

/// Outcome of one named identity or convergence check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub value: Option<f64>,
    pub tolerance: Option<f64>,
    pub detail: Option<String>,
}

impl Check {
    pub fn new(name: impl Into<String>, status: Status) -> Self {
        Self {
            name: name.into(),
            status,
            value: None,
            tolerance: None,
            detail: None,
        }
    }

    /// Pass iff `value ≤ tolerance`.
    pub fn bounded(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        let status = if value <= tolerance { Status::Pass } else { Status::Fail };
        Self {
            value: Some(value),
            tolerance: Some(tolerance),
            ..Self::new(name, status)
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

/// Per-`ε` finite-shell values and their extrapolation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsTable {
    pub eps: Vec<f64>,
    /// `values[i] = [p0, p1, …, pn]` at `eps[i]`.
    pub values: Vec<Vec<f64>>,
    /// Richardson table of the energy component.
    pub p0_table: Vec<Vec<f64>>,
    /// Error estimates of `[p0, p1, …, pn]`.
    pub err: Vec<f64>,
}

/// Mass aspect at one quadrature node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AspectSample {
    pub index: usize,
    pub omega: Vec<f64>,
    pub weight: f64,
    pub value: f64,
    pub err: f64,
    pub converged: bool,
}

/// Energy–momentum from one route.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassReport {
    pub route: Route,
    pub n: usize,
    pub family: String,
    pub params: BTreeMap<String, String>,
    pub p0: f64,
    pub p: Vec<f64>,
    pub eps_table: EpsTable,
    pub node_count: usize,
    pub checks: Vec<Check>,
    #[serde(skip)]
    pub aspect: Option<Vec<AspectSample>>,
}

impl MassReport {
    /// `[p0, p1, …, pn]`.
    pub fn energy_momentum(&self) -> Vec<f64> {
        std::iter::once(self.p0).chain(self.p.iter().copied()).collect()
    }

    pub fn status(&self) -> Status {
        worst(self.checks.iter().map(|c| c.status))
    }
}

/// `Fail` dominates `Inconclusive`, which dominates `Pass`.
pub fn worst(statuses: impl IntoIterator<Item = Status>) -> Status {
    statuses.into_iter().fold(Status::Pass, |acc, s| match (acc, s) {
        (Status::Fail, _) | (_, Status::Fail) => Status::Fail,
        (Status::Inconclusive, _) | (_, Status::Inconclusive) => Status::Inconclusive,
        _ => Status::Pass,
    })
}

/// Settings shared by both routes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassOptions {
    pub schedule: EpsilonSchedule,
    /// Extraction or flux error above which a result is flagged inconclusive.
    pub extraction_tol: f64,
}

impl Default for MassOptions {
    fn default() -> Self {
        Self {
            schedule: EpsilonSchedule::default(),
            extraction_tol: 1e-6,
        }
    }
}

fn require_hyperbolic(g: &MetricField, h: &MetricField) -> Result<()> {
    if g.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            found: h.dim(),
        });
    }
    crate::chart::check_dim(g.dim())
}

fn equivalence_check(g: &MetricField, h: &MetricField, schedule: &EpsilonSchedule) -> Result<(Equivalence, Check)> {
    let eq = check_equivalence(g, h, schedule)?;
    if !eq.pass {
        return Err(Error::NotEquivalent {
            order: eq.order.unwrap_or(f64::INFINITY),
            required: eq.required,
        });
    }
    let detail = match eq.order {
        Some(p) => format!("fitted order {p:.4} >= {:.1}", eq.required),
        None => "difference vanishes to rounding".to_string(),
    };
    let check = Check {
        value: eq.order,
        tolerance: Some(eq.required),
        ..Check::new("equivalence", Status::Pass)
    }
    .with_detail(detail);
    Ok((eq, check))
}

/// Mass aspect `m(ω)` at every node, in node order.
pub fn mass_aspect_samples(
    g: &MetricField,
    h: &MetricField,
    quadrature: &QuadratureRule,
    options: &MassOptions,
) -> Result<(Vec<AspectSample>, Vec<Vec<f64>>)> {
    let n = g.dim();
    if quadrature.ambient_dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: quadrature.ambient_dim(),
        });
    }
    let rho = adapted_rho(n);
    let nf = n as f64;
    let results: Vec<Result<(AspectSample, Vec<f64>)>> = quadrature
        .nodes()
        .par_iter()
        .enumerate()
        .map(|(index, (omega, weight))| {
            let data = extract(g, h, &rho, omega, &options.schedule)?;
            let value = mass_aspect(&data);
            let (_, _, err) = density_errors(&data);
            let series: Vec<f64> = data
                .mu_samples
                .iter()
                .zip(&data.mu0_nn_samples)
                .map(|(mu, nn)| nn - (nf * nf - 1.0) / nf * mu)
                .collect();
            Ok((
                AspectSample {
                    index,
                    omega: omega.iter().copied().collect(),
                    weight: *weight,
                    value,
                    err,
                    converged: err <= options.extraction_tol,
                },
                series,
            ))
        })
        .collect();
    let mut samples = Vec::with_capacity(results.len());
    let mut series = Vec::with_capacity(results.len());
    for r in results {
        let (s, v) = r?;
        if !s.value.is_finite() {
            return Err(Error::NonFinite(format!("mass aspect at node {}", s.index)));
        }
        samples.push(s);
        series.push(v);
    }
    Ok((samples, series))
}

fn energy_momentum(quadrature: &QuadratureRule, f: impl Fn(usize) -> f64) -> Vec<f64> {
    let n = quadrature.ambient_dim();
    let mut out = vec![0.0; n + 1];
    for (k, (omega, w)) in quadrature.nodes().iter().enumerate() {
        let m = f(k);
        out[0] += w * m;
        for i in 0..n {
            out[i + 1] += w * m * omega[i];
        }
    }
    out
}

/// Pair the combined cocycle density with the KID boundary values `1, ω_i`.
pub fn tractor_mass(
    g: &MetricField,
    h: &MetricField,
    quadrature: &QuadratureRule,
    options: &MassOptions,
) -> Result<MassReport> {
    require_hyperbolic(g, h)?;
    let n = g.dim();
    let (_, eq_check) = equivalence_check(g, h, &options.schedule)?;
    let (samples, series) = mass_aspect_samples(g, h, quadrature, options)?;
    let pm = energy_momentum(quadrature, |k| samples[k].value);
    let perr = energy_momentum(quadrature, |k| samples[k].err);
    let eps = options.schedule.epsilons();
    let values: Vec<Vec<f64>> = (0..eps.len())
        .map(|i| energy_momentum(quadrature, |k| series[k][i]))
        .collect();
    let p0_series: Vec<f64> = values.iter().map(|v| v[0]).collect();
    let p0_table = extrapolate(&p0_series, &vec![0.0; p0_series.len()], options.schedule.ratio, options.schedule.stages)?.table;
    let unconverged = samples.iter().filter(|s| !s.converged).count();
    let mut converged = Check {
        value: Some(samples.iter().map(|s| s.err).fold(0.0, f64::max)),
        tolerance: Some(options.extraction_tol),
        ..Check::new(
            "nodes_converged",
            if unconverged == 0 { Status::Pass } else { Status::Inconclusive },
        )
    };
    if unconverged > 0 {
        let flagged: Vec<usize> = samples.iter().filter(|s| !s.converged).map(|s| s.index).collect();
        converged = converged.with_detail(format!("{unconverged} inconclusive nodes: {flagged:?}"));
    }
    Ok(MassReport {
        route: Route::Tractor,
        n,
        family: h.family().to_string(),
        params: h.params().clone(),
        p0: pm[0],
        p: pm[1..].to_vec(),
        eps_table: EpsTable {
            eps,
            values,
            p0_table,
            err: perr.iter().map(|e| e.abs()).collect(),
        },
        node_count: quadrature.len(),
        checks: vec![eq_check, converged],
        aspect: Some(samples),
    })
}

/// Covariant data of `λ = h − g` at a point.
struct Perturbation {
    ginv: Matrix,
    lambda: Matrix,
    /// `∇_k λ_ij`, one matrix per `k`.
    nabla: Vec<Matrix>,
}

impl Perturbation {
    fn at(g: &MetricField, h: &MetricField, x: &Vector) -> Result<Self> {
        let n = g.dim();
        let ginv = g.inverse(x)?;
        let gamma = g.christoffels(x)?;
        let lambda = MetricField::difference(h, g, x);
        let dl = MetricField::difference_deriv(h, g, x);
        let nabla = (0..n)
            .map(|k| {
                let conn = gamma.contract_upper_left(k, &lambda);
                &dl[k] - &conn - conn.transpose()
            })
            .collect();
        Ok(Self { ginv, lambda, nabla })
    }

    fn trace(&self) -> f64 {
        (&self.ginv * &self.lambda).trace()
    }

    /// `∇_a tr λ`.
    fn grad_trace(&self) -> Vector {
        Vector::from_fn(self.lambda.nrows(), |a, _| (&self.ginv * &self.nabla[a]).trace())
    }

    /// `g^{ik}∇_k λ_ia` for the tensor `λ − c g`, which has the same
    /// divergence structure with `∇g = 0`.
    fn divergence(&self, trace_shift: Option<&Vector>) -> Vector {
        let n = self.lambda.nrows();
        Vector::from_fn(n, |a, _| {
            let mut s = 0.0;
            for i in 0..n {
                for k in 0..n {
                    s += self.ginv[(i, k)] * self.nabla[k][(i, a)];
                }
            }
            if let Some(dt) = trace_shift {
                s -= dt[a] / n as f64;
            }
            s
        })
    }
}

/// Michel integrand `V(∇^iλ_ia − ∇_a tr λ) − λ_ia∇^iV + tr λ ∇_aV`, assembled
/// as `(V∇^iλ⁰_ia − λ⁰_ia∇^iV) + ((n−1)/n)(tr λ ∇_aV − V∇_a tr λ)`.
pub fn michel_integrand(g: &MetricField, h: &MetricField, v: &KidSolution, x: &Vector) -> Result<Vector> {
    let n = g.dim();
    let nf = n as f64;
    let p = Perturbation::at(g, h, x)?;
    let tr = p.trace();
    let dtr = p.grad_trace();
    let vv = v.value(x);
    let dv = v.gradient(x).expect("analytic KID gradient");
    let gm = g.eval(x);
    let lambda0 = &p.lambda - &gm * (tr / nf);
    let div0 = p.divergence(Some(&dtr));
    let up = &p.ginv * &dv;
    let trace_free = &div0 * vv - &lambda0 * &up;
    let trace_part = (&dv * tr - &dtr * vv) * ((nf - 1.0) / nf);
    Ok(trace_free + trace_part)
}

/// The same integrand in its undecomposed form.
pub fn michel_integrand_direct(g: &MetricField, h: &MetricField, v: &KidSolution, x: &Vector) -> Result<Vector> {
    let p = Perturbation::at(g, h, x)?;
    let tr = p.trace();
    let dtr = p.grad_trace();
    let vv = v.value(x);
    let dv = v.gradient(x).expect("analytic KID gradient");
    let div = p.divergence(None);
    let up = &p.ginv * &dv;
    Ok((div - &dtr) * vv - &p.lambda * up + dv * tr)
}

/// `∮_{ρ=ε} U^a ν_a dA_g` with `ν` the inward `g`-unit normal, for every KID solution.
pub fn michel_flux(
    g: &MetricField,
    h: &MetricField,
    quadrature: &QuadratureRule,
    eps: f64,
) -> Result<Vec<f64>> {
    let n = g.dim();
    let kids = kid_basis(n);
    let r = radius_of(eps);
    let contributions: Vec<Result<Vec<f64>>> = quadrature
        .nodes()
        .par_iter()
        .map(|(omega, w)| {
            let x = omega * r;
            let gm = g.eval(&x);
            let ginv = g.inverse(&x)?;
            let density = gm.determinant().sqrt() * r.powi(n as i32 - 1);
            let normal = &ginv * omega;
            kids.iter()
                .map(|v| Ok(-w * density * michel_integrand(g, h, v, &x)?.dot(&normal)))
                .collect()
        })
        .collect();
    let mut total = vec![0.0; n + 1];
    for c in contributions {
        for (t, v) in total.iter_mut().zip(c?) {
            *t += v;
        }
    }
    Ok(total)
}

/// Extrapolate the level-set Michel fluxes to `ε → 0`.
pub fn michel_mass(
    g: &MetricField,
    h: &MetricField,
    quadrature: &QuadratureRule,
    options: &MassOptions,
) -> Result<MassReport> {
    require_hyperbolic(g, h)?;
    let n = g.dim();
    if quadrature.ambient_dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: quadrature.ambient_dim(),
        });
    }
    let (_, eq_check) = equivalence_check(g, h, &options.schedule)?;
    let eps = options.schedule.epsilons();
    let values: Vec<Vec<f64>> = eps
        .iter()
        .map(|&e| michel_flux(g, h, quadrature, e))
        .collect::<Result<_>>()?;
    let mut pm = vec![0.0; n + 1];
    let mut err = vec![0.0; n + 1];
    let mut p0_table = Vec::new();
    for k in 0..=n {
        let series: Vec<f64> = values.iter().map(|v| v[k]).collect();
        let noise: Vec<f64> = series.iter().map(|v| v.abs() * 1e3 * f64::EPSILON).collect();
        if crate::richardson::diverges(&series, options.schedule.ratio, 1e-10) {
            return Err(Error::Inconclusive(format!("Michel flux tail diverges for KID solution {k}")));
        }
        let ex = extrapolate(&series, &noise, options.schedule.ratio, options.schedule.stages)?;
        pm[k] = ex.value;
        err[k] = ex.err;
        if k == 0 {
            p0_table = ex.table;
        }
    }
    let worst_rel = (0..=n).map(|k| err[k] / pm[k].abs().max(1.0)).fold(0.0, f64::max);
    let converged = Check {
        value: Some(worst_rel),
        tolerance: Some(options.extraction_tol),
        ..Check::new(
            "flux_converged",
            if worst_rel <= options.extraction_tol { Status::Pass } else { Status::Inconclusive },
        )
    };
    Ok(MassReport {
        route: Route::Michel,
        n,
        family: h.family().to_string(),
        params: h.params().clone(),
        p0: pm[0],
        p: pm[1..].to_vec(),
        eps_table: EpsTable {
            eps,
            values,
            p0_table,
            err,
        },
        node_count: quadrature.len(),
        checks: vec![eq_check, converged],
        aspect: None,
    })
}

/// Cross-route agreement of two reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    /// `|a − b| / max(|a|, |b|, floor)` for `[p0, p1, …, pn]`.
    pub relative_diff: Vec<f64>,
    pub tolerance: f64,
    pub floor: f64,
    pub pass: bool,
}

/// Absolute floor in relative differences.
pub const COMPARISON_FLOOR: f64 = 1e-8;

pub fn compare_reports(a: &MassReport, b: &MassReport, tolerance: f64) -> Comparison {
    let relative_diff: Vec<f64> = a
        .energy_momentum()
        .iter()
        .zip(b.energy_momentum())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(COMPARISON_FLOOR))
        .collect();
    let pass = relative_diff.iter().all(|d| *d < tolerance);
    Comparison {
        relative_diff,
        tolerance,
        floor: COMPARISON_FLOOR,
        pass,
    }
}

/// Run both routes and compare them componentwise.
pub fn compare_routes(
    g: &MetricField,
    h: &MetricField,
    quadrature: &QuadratureRule,
    options: &MassOptions,
    tolerance: f64,
) -> Result<(MassReport, MassReport, Comparison)> {
    let tractor = tractor_mass(g, h, quadrature, options)?;
    let michel = michel_mass(g, h, quadrature, options)?;
    for r in [&tractor, &michel] {
        if r.status() == Status::Inconclusive {
            return Err(Error::Inconclusive(format!("{:?} route did not converge", r.route)));
        }
    }
    let cmp = compare_reports(&tractor, &michel, tolerance);
    Ok((tractor, michel, cmp))
}
