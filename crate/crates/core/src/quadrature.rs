//! Product quadrature on spheres `S^d ⊂ ℝ^{d+1}`, `2 ≤ d ≤ 5`.
//!
//! `S^d` is parametrized as `ω = (√(1−t²)·ω′, t)` with `ω′ ∈ S^{d−1}`, so
//! `dσ_d = (1−t²)^{(d−2)/2} dt dσ_{d−1}`. The `t` integral uses Gauss–Gegenbauer
//! nodes for that weight and the recursion bottoms out in the uniform rule on
//! the circle.

use std::f64::consts::PI;

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::{Matrix, Vector};

/// Gauss rule for the weight `(1−t²)^a` on `[−1, 1]` with `count` nodes.
pub fn gauss_gegenbauer(count: usize, a: f64) -> (Vec<f64>, Vec<f64>) {
    let mut jacobi = Matrix::zeros(count, count);
    for k in 1..count {
        let kf = k as f64;
        let b = (kf * (kf + 2.0 * a) / ((2.0 * kf + 2.0 * a + 1.0) * (2.0 * kf + 2.0 * a - 1.0))).sqrt();
        jacobi[(k, k - 1)] = b;
        jacobi[(k - 1, k)] = b;
    }
    let moment = weight_moment(a);
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..count)
        .map(|i| (eig.eigenvalues[i], moment * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    // symmetrize to remove eigen-solver asymmetry
    let sym: Vec<(f64, f64)> = (0..count)
        .map(|i| {
            let j = count - 1 - i;
            (0.5 * (pairs[i].0 - pairs[j].0), 0.5 * (pairs[i].1 + pairs[j].1))
        })
        .collect();
    sym.into_iter().unzip()
}

/// `∫_{−1}^{1} (1−t²)^a dt` for `a` a non-negative multiple of ½.
fn weight_moment(a: f64) -> f64 {
    if a < 0.25 {
        2.0
    } else if a < 0.75 {
        PI / 2.0
    } else {
        2.0 * a / (2.0 * a + 1.0) * weight_moment(a - 1.0)
    }
}

/// Area of the unit sphere `S^d`.
pub fn sphere_area(d: usize) -> f64 {
    match d {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (d as f64 - 1.0) * sphere_area(d - 2),
    }
}

/// Nodes and weights on a sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    sphere_dim: usize,
    level: usize,
    degree: usize,
    nodes: Vec<(Vector, f64)>,
}

impl QuadratureRule {
    /// Dimension `d` of the sphere `S^d`.
    pub fn sphere_dim(&self) -> usize {
        self.sphere_dim
    }

    /// Dimension of the ambient space, `d + 1`.
    pub fn ambient_dim(&self) -> usize {
        self.sphere_dim + 1
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// Polynomial degree integrated exactly.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn nodes(&self) -> &[(Vector, f64)] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(&Vector) -> f64) -> f64 {
        self.nodes.iter().map(|(w, wt)| wt * f(w)).sum()
    }
}

fn circle(m: usize) -> Vec<(Vector, f64)> {
    (0..m)
        .map(|k| {
            let phi = 2.0 * PI * k as f64 / m as f64;
            (Vector::from_vec(vec![phi.cos(), phi.sin()]), 2.0 * PI / m as f64)
        })
        .collect()
}

/// Product rule on `S^d` with `4·level` nodes per polar variable and
/// `8·level` azimuthal nodes.
pub fn sphere_quadrature(d: usize, level: usize) -> Result<QuadratureRule> {
    if !(2..=5).contains(&d) {
        return Err(Error::UnsupportedSphere(d));
    }
    if level == 0 {
        return Err(Error::InvalidLevel(level));
    }
    let polar = 4 * level;
    let azimuth = 8 * level;
    let mut nodes = circle(azimuth);
    for k in 2..=d {
        let (ts, ws) = gauss_gegenbauer(polar, (k as f64 - 2.0) / 2.0);
        let mut next = Vec::with_capacity(nodes.len() * polar);
        for (t, wt) in ts.iter().zip(&ws) {
            let c = (1.0 - t * t).max(0.0).sqrt();
            for (w, ww) in &nodes {
                let mut v = Vector::zeros(k + 1);
                v.rows_mut(0, k).copy_from(&(w * c));
                v[k] = *t;
                next.push((v, wt * ww));
            }
        }
        nodes = next;
    }
    Ok(QuadratureRule {
        sphere_dim: d,
        level,
        degree: (2 * polar - 1).min(azimuth - 1),
        nodes,
    })
}
