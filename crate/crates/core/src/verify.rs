//! Invariant suite run by the `verify` subcommand.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::asymptotics::{check_equivalence, extract, AsymptoticData};
use crate::chart::{adapted_rho, hyperbolic_metric, kid_basis, kid_residual};
use crate::cocycle::{additivity, alignment_transform, antisymmetry, densities_of_tensor, AlignmentInput, CocycleCheck};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::families::{aspect_perturbation, AspectProfile};
use crate::harmonics::Chi;
use crate::mass::{mass_aspect_samples, worst, Check, Status};
use crate::metric::MetricField;
use crate::tensors::Scale;
use crate::tractor::{
    normal_tractor, random_trace_free, scale_tractor, scale_tractor_boundary, splitting_residual, tractor_derivative,
    tractor_pairing,
};
use crate::{Matrix, Vector};

/// Tolerances of the invariant suite.
pub mod tol {
    pub const KID: f64 = 1e-6;
    pub const ALIGNMENT: f64 = 1e-12;
    pub const SCALE_NORM: f64 = 1e-8;
    pub const PARALLEL: f64 = 1e-5;
    pub const BOUNDARY_NORMAL: f64 = 1e-6;
    pub const SPLITTING: f64 = 1e-4;
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub command: &'static str,
    pub n: usize,
    pub family: String,
    pub params: BTreeMap<String, String>,
    pub seed: u64,
    pub status: Status,
    pub checks: Vec<Check>,
}

pub fn random_direction<R: Rng>(rng: &mut R, n: usize) -> Vector {
    loop {
        let v = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let norm = v.norm();
        if norm > 0.1 && norm <= 1.0 {
            return v / norm;
        }
    }
}

pub fn random_point<R: Rng>(rng: &mut R, n: usize, rmin: f64, rmax: f64) -> Vector {
    random_direction(rng, n) * rng.random_range(rmin..rmax)
}

pub fn random_symmetric<R: Rng>(rng: &mut R, n: usize) -> Matrix {
    let m = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    (&m + m.transpose()) * 0.5
}

/// Small random aspect perturbation of the hyperbolic metric.
pub fn random_perturbation<R: Rng>(rng: &mut R, n: usize) -> Result<MetricField> {
    let profile = [AspectProfile::Trace, AspectProfile::Normal, AspectProfile::Tangential][rng.random_range(0..3)];
    let chi = Chi::Affine {
        c0: rng.random_range(-0.5..0.5),
        c: Vector::from_fn(n, |_, _| rng.random_range(-0.3..0.3)),
    };
    aspect_perturbation(n, &chi, profile, None)
}

fn from_result(name: &str, r: Result<Check>) -> Check {
    r.unwrap_or_else(|e| {
        let status = match e {
            Error::Inconclusive(_) | Error::DivergentTail(_) => Status::Inconclusive,
            _ => Status::Fail,
        };
        Check::new(name, status).with_detail(e.to_string())
    })
}

/// Largest KID residual of every basis solution at `points` random points.
pub fn kid_check<R: Rng>(rng: &mut R, n: usize, points: usize) -> Result<Check> {
    let g = hyperbolic_metric(n)?;
    let mut worst_res = 0.0f64;
    for _ in 0..points {
        let x = random_point(rng, n, 0.05, 0.9);
        for v in kid_basis(n) {
            worst_res = worst_res.max(kid_residual(&g, &v, &x)?.amax());
        }
    }
    Ok(Check::bounded("kid_residuals", worst_res, tol::KID))
}

/// Combined density invariant under alignment; `c₁` and `c₂` alone are not.
pub fn alignment_checks<R: Rng>(rng: &mut R, n: usize, samples: usize) -> Result<Vec<Check>> {
    let mut combined = 0.0f64;
    let mut c1_moved = 0.0f64;
    let mut c2_moved = 0.0f64;
    for _ in 0..samples {
        let mu = random_symmetric(rng, n);
        let out = alignment_transform(&AlignmentInput { mu: mu.clone(), normal: 0, order: n })?;
        let a = densities_of_tensor(&mu, 0);
        let b = densities_of_tensor(&out, 0);
        combined = combined.max((a.2 - b.2).abs());
        c1_moved = c1_moved.max((a.0 - b.0).abs());
        c2_moved = c2_moved.max((a.1 - b.1).abs());
    }
    let forced = c1_moved > tol::ALIGNMENT && c2_moved > tol::ALIGNMENT;
    Ok(vec![
        Check::bounded("alignment_invariance", combined, tol::ALIGNMENT),
        Check {
            value: Some(c1_moved.min(c2_moved)),
            tolerance: Some(tol::ALIGNMENT),
            ..Check::new("alignment_forces_combination", if forced { Status::Pass } else { Status::Fail })
        }
        .with_detail(format!("max change of c1 {c1_moved:.3e}, of c2 {c2_moved:.3e}")),
    ])
}

/// Scale tractor of the hyperbolic metric: unit norm, parallel, and equal to
/// the normal tractor at the boundary.
pub fn scale_tractor_checks<R: Rng>(rng: &mut R, n: usize, points: usize, config: &RunConfig) -> Result<Vec<Check>> {
    let hyp = Arc::new(Scale::hyperbolic(n)?);
    let bar = Arc::new(Scale::compactified(n)?);
    let mut norm_dev = 0.0f64;
    let mut parallel = 0.0f64;
    for _ in 0..points {
        let x = random_point(rng, n, 0.2, 0.9);
        let i = scale_tractor(hyp.clone(), &x)?;
        norm_dev = norm_dev.max((tractor_pairing(&i, &i)? - 1.0).abs());
        let field = |y: &Vector| scale_tractor(hyp.clone(), y);
        for a in 0..n {
            parallel = parallel.max(tractor_derivative(&field, &x, a)?.to_vector().amax());
        }
    }
    let mut boundary = 0.0f64;
    let mut boundary_err = 0.0f64;
    for _ in 0..3 {
        let w = random_direction(rng, n);
        let (i, err) = scale_tractor_boundary(hyp.clone(), bar.clone(), &w, &config.schedule)?;
        let nt = normal_tractor(bar.clone(), &w)?;
        boundary = boundary.max(i.max_abs_diff(&nt));
        boundary_err = boundary_err.max(err);
    }
    let mut boundary_check = Check::bounded("scale_tractor_boundary_normal", boundary, tol::BOUNDARY_NORMAL);
    if boundary_check.status == Status::Fail && boundary_err > tol::BOUNDARY_NORMAL {
        boundary_check = Check {
            status: Status::Inconclusive,
            ..boundary_check
        }
        .with_detail(format!("extrapolation error {boundary_err:.3e} exceeds the tolerance"));
    }
    Ok(vec![
        Check::bounded("scale_tractor_norm", norm_dev, tol::SCALE_NORM),
        Check::bounded("scale_tractor_parallel", parallel, tol::PARALLEL),
        boundary_check,
    ])
}

/// Normalization residual of the splitting operator on random trace-free fields.
pub fn splitting_check<R: Rng>(rng: &mut R, n: usize, fields: usize) -> Result<Check> {
    let bar = Arc::new(Scale::compactified(n)?);
    let mut worst_res = 0.0f64;
    for _ in 0..fields {
        let phi = random_trace_free(rng, n)?;
        let x = random_point(rng, n, 0.2, 0.8);
        worst_res = worst_res.max(splitting_residual(&phi, bar.clone(), &x)?.amax());
    }
    Ok(Check::bounded("splitting_normalization", worst_res, tol::SPLITTING))
}

fn cocycle_summary(name: &str, checks: &[Vec<CocycleCheck>]) -> Vec<Check> {
    let kinds = ["c1", "c2", "combined"];
    (0..3)
        .map(|k| {
            let worst_excess = checks
                .iter()
                .map(|c| &c[k])
                .max_by(|a, b| (a.residual - a.bound).total_cmp(&(b.residual - b.bound)))
                .copied();
            match worst_excess {
                Some(c) => Check {
                    value: Some(c.residual),
                    tolerance: Some(c.bound),
                    ..Check::new(format!("{name}_{}", kinds[k]), if c.pass() { Status::Pass } else { Status::Fail })
                },
                None => Check::new(format!("{name}_{}", kinds[k]), Status::Pass),
            }
        })
        .collect()
}

/// Antisymmetry and additivity of `c₁`, `c₂`, `c` for `(g, h, k)` along `directions`.
pub fn cocycle_checks(
    g: &MetricField,
    h: &MetricField,
    k: &MetricField,
    directions: &[Vector],
    config: &RunConfig,
) -> Result<Vec<Check>> {
    let rho = adapted_rho(g.dim());
    let ex = |a: &MetricField, b: &MetricField, w: &Vector| -> Result<AsymptoticData> {
        extract(a, b, &rho, w, &config.schedule)
    };
    let mut anti = Vec::with_capacity(directions.len());
    let mut add = Vec::with_capacity(directions.len());
    for w in directions {
        let gh = ex(g, h, w)?;
        let hg = ex(h, g, w)?;
        let gk = ex(g, k, w)?;
        let hk = ex(h, k, w)?;
        anti.push(antisymmetry(&gh, &hg));
        add.push(additivity(&gk, &gh, &hk));
    }
    let mut out = cocycle_summary("cocycle_antisymmetry", &anti);
    out.extend(cocycle_summary("cocycle_additivity", &add));
    Ok(out)
}

/// Run the full suite for `config`.
pub fn run(config: &RunConfig) -> Result<VerifyReport> {
    config.validate()?;
    let n = config.dim;
    let g = hyperbolic_metric(n)?;
    let h = config.build_metric()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut checks = Vec::new();

    let equivalent = match check_equivalence(&g, &h, &config.schedule) {
        Ok(eq) => {
            let detail = match eq.order {
                Some(p) => format!("fitted order {p:.4}, need >= {:.1}", eq.required),
                None => "difference vanishes to rounding".into(),
            };
            checks.push(
                Check {
                    value: eq.order,
                    tolerance: Some(eq.required),
                    ..Check::new("equivalence", if eq.pass { Status::Pass } else { Status::Fail })
                }
                .with_detail(detail),
            );
            eq.pass
        }
        Err(e) => {
            checks.push(from_result("equivalence", Err(e)));
            false
        }
    };

    checks.push(from_result("kid_residuals", kid_check(&mut rng, n, 50)));
    match alignment_checks(&mut rng, n, 100) {
        Ok(c) => checks.extend(c),
        Err(e) => checks.push(from_result("alignment_invariance", Err(e))),
    }
    match scale_tractor_checks(&mut rng, n, 5, config) {
        Ok(c) => checks.extend(c),
        Err(e) => checks.push(from_result("scale_tractor", Err(e))),
    }
    checks.push(from_result("splitting_normalization", splitting_check(&mut rng, n, 3)));

    if equivalent {
        let k = {
            let extra = random_perturbation(&mut rng, n)?;
            let mut k = h.clone();
            for p in extra.perturbations() {
                k = k.with_perturbation(Arc::clone(p));
            }
            k
        };
        let directions: Vec<Vector> = (0..8).map(|_| random_direction(&mut rng, n)).collect();
        match cocycle_checks(&g, &h, &k, &directions, config) {
            Ok(c) => checks.extend(c),
            Err(e) => checks.push(from_result("cocycle", Err(e))),
        }
        let quadrature = config.quadrature()?;
        match mass_aspect_samples(&g, &h, &quadrature, &config.options()) {
            Ok((samples, _)) => {
                let flagged: Vec<usize> = samples.iter().filter(|s| !s.converged).map(|s| s.index).collect();
                let max_err = samples.iter().map(|s| s.err).fold(0.0, f64::max);
                let status = if flagged.is_empty() { Status::Pass } else { Status::Inconclusive };
                let mut c = Check {
                    value: Some(max_err),
                    tolerance: Some(config.extraction_tol),
                    ..Check::new("nodes_converged", status)
                };
                if !flagged.is_empty() {
                    c = c.with_detail(format!("inconclusive nodes: {flagged:?}"));
                }
                checks.push(c);
            }
            Err(e) => checks.push(from_result("nodes_converged", Err(e))),
        }
    }

    Ok(VerifyReport {
        command: "verify",
        n,
        family: h.family().to_string(),
        params: h.params().clone(),
        seed: config.seed,
        status: worst(checks.iter().map(|c| c.status)),
        checks,
    })
}
