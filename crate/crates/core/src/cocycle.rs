//! Boundary cocycle densities and the alignment transform.
//!
//! Densities are the scalar coefficients of `vol_{ḡ∞}·X` at a boundary
//! direction, computed from extracted [`AsymptoticData`].

use serde::{Deserialize, Serialize};

use crate::asymptotics::AsymptoticData;
use crate::error::{Error, Result};
use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CocycleKind {
    C1,
    C2,
    Combined,
}

/// `((n²−1)/2) μ∞`.
pub fn c1_density(data: &AsymptoticData) -> f64 {
    let n = data.n as f64;
    0.5 * (n * n - 1.0) * data.mu_inf
}

/// `−(μ⁰∞)_nn`, the normal–normal frame component with sign reversed.
pub fn c2_density(data: &AsymptoticData) -> f64 {
    -data.mu0_inf[0][0]
}

/// Normalization of the combined cocycle `c = a·(−(2/n)c₁ − c₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization(pub f64);

impl Default for Normalization {
    fn default() -> Self {
        Normalization(1.0)
    }
}

/// `a·(−(2/n)c₁ − c₂)`.
pub fn combined_c_density(n: usize, c1: f64, c2: f64, normalization: Normalization) -> f64 {
    normalization.0 * (-(2.0 / n as f64) * c1 - c2)
}

/// Combined density straight from extracted data, with the default normalization.
pub fn mass_aspect(data: &AsymptoticData) -> f64 {
    combined_c_density(data.n, c1_density(data), c2_density(data), Normalization::default())
}

/// Error bounds on `(c₁, c₂, c)` inherited from the extraction errors.
pub fn density_errors(data: &AsymptoticData) -> (f64, f64, f64) {
    let n = data.n as f64;
    let e1 = 0.5 * (n * n - 1.0) * data.mu_err;
    let e2 = data.mu0_err;
    (e1, e2, 2.0 / n * e1 + e2)
}

/// Boundary tensor `μ` in a `ḡ∞`-orthonormal frame whose vector `normal` is `ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentInput {
    pub mu: Matrix,
    pub normal: usize,
    pub order: usize,
}

const SYMMETRY_TOL: f64 = 1e-12;

/// `μ̃_ij = μ_ij − ρ_i μ_jl ξ^l − ρ_j μ_il ξ^l + (ξμξ/N)(δ_ij + (N−1)ρ_iρ_j)`.
pub fn alignment_transform(input: &AlignmentInput) -> Result<Matrix> {
    let mu = &input.mu;
    let n = mu.nrows();
    if mu.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: mu.ncols(),
        });
    }
    if input.normal >= n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: input.normal + 1,
        });
    }
    let asym = (mu - mu.transpose()).amax();
    if asym > SYMMETRY_TOL * mu.amax().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    let k = input.normal;
    let big_n = input.order as f64;
    let col = mu.column(k).into_owned();
    let mnn = mu[(k, k)];
    Ok(Matrix::from_fn(n, n, |i, j| {
        let ri = if i == k { 1.0 } else { 0.0 };
        let rj = if j == k { 1.0 } else { 0.0 };
        let dij = if i == j { 1.0 } else { 0.0 };
        mu[(i, j)] - ri * col[j] - rj * col[i] + mnn / big_n * (dij + (big_n - 1.0) * ri * rj)
    }))
}

/// Densities `(c₁, c₂, c)` of a boundary tensor given directly in the frame.
pub fn densities_of_tensor(mu: &Matrix, normal: usize) -> (f64, f64, f64) {
    let n = mu.nrows();
    let nf = n as f64;
    let tr = mu.trace();
    let c1 = 0.5 * (nf * nf - 1.0) * tr;
    let c2 = -(mu[(normal, normal)] - tr / nf);
    (c1, c2, combined_c_density(n, c1, c2, Normalization::default()))
}

/// Residual of `c(g,h) + c(h,g) = 0` and its admissible bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CocycleCheck {
    pub kind: CocycleKind,
    pub residual: f64,
    pub bound: f64,
}

impl CocycleCheck {
    pub fn pass(&self) -> bool {
        self.residual <= self.bound
    }
}

/// Multiple of the summed extraction errors allowed in cocycle identities.
pub const ERR_FACTOR: f64 = 5.0;

fn triple(data: &AsymptoticData) -> [(CocycleKind, f64, f64); 3] {
    let (e1, e2, e) = density_errors(data);
    [
        (CocycleKind::C1, c1_density(data), e1),
        (CocycleKind::C2, c2_density(data), e2),
        (CocycleKind::Combined, mass_aspect(data), e),
    ]
}

/// Antisymmetry `c(g,h) + c(h,g)` for each kind.
pub fn antisymmetry(gh: &AsymptoticData, hg: &AsymptoticData) -> Vec<CocycleCheck> {
    triple(gh)
        .iter()
        .zip(triple(hg))
        .map(|(a, b)| CocycleCheck {
            kind: a.0,
            residual: (a.1 + b.1).abs(),
            bound: ERR_FACTOR * (a.2 + b.2),
        })
        .collect()
}

/// Additivity `c(g,k) − c(g,h) − c(h,k)` for each kind.
pub fn additivity(gk: &AsymptoticData, gh: &AsymptoticData, hk: &AsymptoticData) -> Vec<CocycleCheck> {
    let (a, b, c) = (triple(gk), triple(gh), triple(hk));
    (0..3)
        .map(|i| CocycleCheck {
            kind: a[i].0,
            residual: (a[i].1 - b[i].1 - c[i].1).abs(),
            bound: ERR_FACTOR * (a[i].2 + b[i].2 + c[i].2),
        })
        .collect()
}
