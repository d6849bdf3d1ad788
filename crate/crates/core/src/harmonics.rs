//! Boundary functions `χ` on the unit sphere: affine functions in any
//! dimension and real spherical-harmonic expansions on S².

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd;
use crate::Vector;

/// Highest accepted harmonic degree.
pub const MAX_DEGREE: u32 = 16;

/// One term `coeff · Y_lm` of a real spherical-harmonic expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicTerm {
    pub l: u32,
    pub m: i32,
    pub coeff: f64,
}

/// A smooth function on the boundary sphere.
#[derive(Debug, Clone, PartialEq)]
pub enum Chi {
    /// `c0 + c·ω`.
    Affine { c0: f64, c: Vector },
    /// `Σ coeff·Y_lm(ω)` on S² (ambient dimension 3).
    Harmonics(Vec<HarmonicTerm>),
}

impl Chi {
    pub fn constant(n: usize, c0: f64) -> Self {
        Chi::Affine { c0, c: Vector::zeros(n) }
    }

    pub fn zero(n: usize) -> Self {
        Self::constant(n, 0.0)
    }

    /// `ω_k`.
    pub fn coordinate(n: usize, k: usize) -> Self {
        let mut c = Vector::zeros(n);
        c[k] = 1.0;
        Chi::Affine { c0: 0.0, c }
    }

    pub fn harmonics(terms: Vec<HarmonicTerm>) -> Result<Self> {
        for t in &terms {
            if t.l > MAX_DEGREE {
                return Err(Error::Harmonics(format!("degree {} exceeds {MAX_DEGREE}", t.l)));
            }
            if t.m.unsigned_abs() > t.l {
                return Err(Error::Harmonics(format!("order {} out of range for degree {}", t.m, t.l)));
            }
            if !t.coeff.is_finite() {
                return Err(Error::Harmonics("non-finite coefficient".into()));
            }
        }
        Ok(Chi::Harmonics(terms))
    }

    /// Parse `[[l, m, coeff], ...]`; expansions are defined on S² only.
    pub fn from_json(n: usize, text: &str) -> Result<Self> {
        if n != 3 {
            return Err(Error::Harmonics(format!(
                "spherical-harmonic coefficients need n = 3, got n = {n}"
            )));
        }
        let raw: Vec<(i64, i64, f64)> =
            serde_json::from_str(text).map_err(|e| Error::Harmonics(e.to_string()))?;
        let mut terms = Vec::with_capacity(raw.len());
        for (l, m, coeff) in raw {
            if l < 0 {
                return Err(Error::Harmonics(format!("negative degree {l}")));
            }
            let l = u32::try_from(l).map_err(|_| Error::Harmonics(format!("degree {l} too large")))?;
            let m = i32::try_from(m).map_err(|_| Error::Harmonics(format!("order {m} too large")))?;
            terms.push(HarmonicTerm { l, m, coeff });
        }
        Self::harmonics(terms)
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Chi::Affine { c0, c } => *c0 == 0.0 && c.iter().all(|v| *v == 0.0),
            Chi::Harmonics(t) => t.iter().all(|t| t.coeff == 0.0),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        match self {
            Chi::Affine { c0, c } => Chi::Affine { c0: c0 * s, c: c * s },
            Chi::Harmonics(t) => Chi::Harmonics(
                t.iter()
                    .map(|t| HarmonicTerm { coeff: t.coeff * s, ..*t })
                    .collect(),
            ),
        }
    }

    pub fn check_dim(&self, n: usize) -> Result<()> {
        match self {
            Chi::Affine { c, .. } if c.len() != n => Err(Error::DimensionMismatch {
                expected: n,
                found: c.len(),
            }),
            Chi::Harmonics(_) if n != 3 => Err(Error::Harmonics(format!(
                "spherical-harmonic coefficients need n = 3, got n = {n}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn value(&self, omega: &Vector) -> f64 {
        match self {
            Chi::Affine { c0, c } => c0 + c.dot(omega),
            Chi::Harmonics(terms) => terms.iter().map(|t| t.coeff * real_ylm(t.l, t.m, omega)).sum(),
        }
    }

    /// Gradient at the unit vector `ω` of the 0-homogeneous extension
    /// `x ↦ χ(x/|x|)`, hence tangent to the sphere.
    pub fn gradient(&self, omega: &Vector) -> Vector {
        match self {
            Chi::Affine { c, .. } => c - omega * omega.dot(c),
            Chi::Harmonics(_) => {
                let f = |y: &Vector| self.value(&(y / y.norm()));
                Vector::from_fn(omega.len(), |k, _| fd::central4(f, omega, k, 1e-3))
            }
        }
    }
}

fn double_factorial_odd(m: u32) -> f64 {
    (1..=m).map(|k| (2 * k - 1) as f64).product()
}

/// `P_l^m(z) / (1−z²)^{m/2}` without the Condon–Shortley phase; a polynomial in `z`.
fn reduced_legendre(l: u32, m: u32, z: f64) -> f64 {
    let mut pmm = double_factorial_odd(m);
    if l == m {
        return pmm;
    }
    let mut pm1 = z * (2 * m + 1) as f64 * pmm;
    for k in (m + 2)..=l {
        let next = ((2 * k - 1) as f64 * z * pm1 - (k + m - 1) as f64 * pmm) / (k - m) as f64;
        pmm = pm1;
        pm1 = next;
    }
    pm1
}

fn normalization(l: u32, m: u32) -> f64 {
    let ratio: f64 = ((l - m + 1)..=(l + m)).map(|k| 1.0 / k as f64).product();
    ((2 * l + 1) as f64 / (4.0 * std::f64::consts::PI) * ratio).sqrt()
}

/// Real orthonormal spherical harmonic `Y_lm` at a unit vector of ℝ³, with
/// polar axis `ω₂` and azimuth measured from `ω₀` towards `ω₁`.
pub fn real_ylm(l: u32, m: i32, omega: &Vector) -> f64 {
    let am = m.unsigned_abs();
    let (x, y, z) = (omega[0], omega[1], omega[2]);
    let base = normalization(l, am) * reduced_legendre(l, am, z);
    if m == 0 {
        return base;
    }
    // Re/Im of (x + iy)^|m| = sin^|m|θ · (cos, sin)(|m|φ)
    let (mut re, mut im) = (1.0, 0.0);
    for _ in 0..am {
        let t = re * x - im * y;
        im = re * y + im * x;
        re = t;
    }
    std::f64::consts::SQRT_2 * base * if m > 0 { re } else { im }
}
