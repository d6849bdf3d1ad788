//! Richardson extrapolation on geometric sequences `ε_i = ε₀ qⁱ`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Outcome of extrapolating one scalar sequence to `ε → 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extrapolation {
    pub value: f64,
    pub err: f64,
    /// Row `i` holds `T[i][0..=min(i, stages)]`.
    pub table: Vec<Vec<f64>>,
}

/// Extrapolate `values[i] ≈ f(ε₀qⁱ)` assuming `f(ε) = f₀ + Σ_j a_j εʲ`.
///
/// `noise[i]` bounds the rounding error of `values[i]`; the reported error is
/// the last-stage difference plus the propagated noise.
pub fn extrapolate(values: &[f64], noise: &[f64], q: f64, stages: usize) -> Result<Extrapolation> {
    let k = values.len();
    if k < 2 || stages == 0 || stages >= k {
        return Err(Error::InvalidSchedule(format!(
            "need 1 <= stages < samples, got {stages} stages for {k} samples"
        )));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("extrapolation sample {i}")));
    }
    let mut table: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut weights: Vec<Vec<Vec<f64>>> = Vec::with_capacity(k);
    for i in 0..k {
        let mut row = vec![values[i]];
        let mut unit = vec![0.0; k];
        unit[i] = 1.0;
        let mut wrow = vec![unit];
        for j in 1..=i.min(stages) {
            let qj = q.powi(j as i32);
            let t = (row[j - 1] - qj * table[i - 1][j - 1]) / (1.0 - qj);
            let w: Vec<f64> = wrow[j - 1]
                .iter()
                .zip(&weights[i - 1][j - 1])
                .map(|(a, b)| (a - qj * b) / (1.0 - qj))
                .collect();
            row.push(t);
            wrow.push(w);
        }
        table.push(row);
        weights.push(wrow);
    }
    let last = &table[k - 1];
    let value = last[stages];
    let propagated: f64 = weights[k - 1][stages]
        .iter()
        .zip(noise)
        .map(|(w, e)| w.abs() * e)
        .sum();
    let err = (last[stages] - last[stages - 1]).abs() + propagated;
    Ok(Extrapolation { value, err, table })
}

/// True when the last two successive differences both grow by more than `q^{−½}`.
pub fn diverges(values: &[f64], q: f64, floor: f64) -> bool {
    if values.len() < 4 {
        return false;
    }
    let d: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let m = d.len();
    let grow = q.powf(-0.5);
    d[m - 1] > floor && d[m - 1] > grow * d[m - 2] && d[m - 2] > grow * d[m - 3]
}
