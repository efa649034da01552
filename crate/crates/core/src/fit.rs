//! Least-squares fits of `value ≈ X^a ∑_{i=0}^{k} βᵢ (log X)^{k−i}`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest accepted ratio of singular values of the column-scaled design.
pub const MIN_RECIPROCAL_CONDITION: f64 = 1e-13;
/// Required relative size of `Aᵀr` against `|Aᵀ||y|`.
pub const NORMAL_EQUATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFit {
    pub a: f64,
    pub k: usize,
    /// `β₀` multiplies `(log X)^k`.
    pub coefficients: Vec<f64>,
    /// `(fitted − value) / value` per point.
    pub residuals: Vec<f64>,
    pub reciprocal_condition: f64,
    pub normal_equation_residual: f64,
}

impl AsymptoticFit {
    pub fn leading(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn predict(&self, x: f64) -> f64 {
        let l = x.ln();
        let poly = self.coefficients.iter().fold(0.0, |acc, &b| acc * l + b);
        x.powf(self.a) * poly
    }
}

/// Fits `value/X^a` against `(log X)^k, …, 1`.
pub fn fit_log_poly(points: &[(f64, f64)], a: f64, k: usize) -> Result<AsymptoticFit> {
    let n = points.len();
    if n < k + 2 {
        return Err(Error::Conditioning(format!(
            "{n} points cannot determine a degree-{k} fit; need at least {}",
            k + 2
        )));
    }
    for (i, &(x, v)) in points.iter().enumerate() {
        if !(x > 1.0) || !x.is_finite() || !v.is_finite() {
            return Err(Error::Domain(format!("fit point {i} = ({x}, {v}) needs finite X > 1")));
        }
        if points[..i].iter().any(|&(y, _)| y == x) {
            return Err(Error::Conditioning(format!("repeated abscissa X = {x}")));
        }
    }
    let design = DMatrix::from_fn(n, k + 1, |r, c| points[r].0.ln().powi((k - c) as i32));
    let y = DVector::from_iterator(n, points.iter().map(|&(x, v)| v / x.powf(a)));

    let scale: Vec<f64> = (0..=k).map(|c| design.column(c).norm()).collect();
    let mut scaled = design.clone();
    for (c, s) in scale.iter().enumerate() {
        scaled.column_mut(c).scale_mut(1.0 / s);
    }
    let svd = scaled.clone().svd(true, true);
    let sv = &svd.singular_values;
    let rcond = sv.min() / sv.max();
    if !(rcond > MIN_RECIPROCAL_CONDITION) {
        return Err(Error::Conditioning(format!(
            "design matrix is rank deficient (reciprocal condition {rcond:.3e}); spread the X values further apart"
        )));
    }
    let mut z = svd.solve(&y, 0.0).map_err(|e| Error::Conditioning(e.to_string()))?;
    // one round of refinement keeps the normal equations tight
    let r = &y - &scaled * &z;
    z += svd.solve(&r, 0.0).map_err(|e| Error::Conditioning(e.to_string()))?;

    let r = &y - &scaled * &z;
    let atr = scaled.transpose() * &r;
    let denom = scaled.abs().transpose() * y.abs();
    let normal = atr
        .iter()
        .zip(denom.iter())
        .map(|(g, d)| if *d > 0.0 { g.abs() / d } else { g.abs() })
        .fold(0.0, f64::max);
    if normal > NORMAL_EQUATION_TOLERANCE {
        return Err(Error::Conditioning(format!("normal equations violated by {normal:.3e}")));
    }
    let coefficients: Vec<f64> = z.iter().zip(&scale).map(|(v, s)| v / s).collect();
    let fit_values = &design * DVector::from_column_slice(&coefficients);
    let residuals = (0..n).map(|i| (fit_values[i] - y[i]) / y[i]).collect();
    Ok(AsymptoticFit {
        a,
        k,
        coefficients,
        residuals,
        reciprocal_condition: rcond,
        normal_equation_residual: normal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        (10..=17).map(|e| 2f64.powi(e)).collect()
    }

    #[test]
    fn recovers_pure_leading_term() {
        let pts: Vec<_> = grid().into_iter().map(|x| (x, 7.0 * x * x * x.ln().powi(3))).collect();
        let f = fit_log_poly(&pts, 2.0, 3).unwrap();
        assert!((f.leading() - 7.0).abs() < 1e-9 * 7.0, "{:?}", f.coefficients);
    }

    #[test]
    fn recovers_constant_term() {
        let pts: Vec<_> = grid().into_iter().map(|x| (x, x * x * (x.ln().powi(3) + 5.0))).collect();
        let f = fit_log_poly(&pts, 2.0, 3).unwrap();
        assert!((f.coefficients[0] - 1.0).abs() < 1e-9);
        assert!((f.coefficients[3] - 5.0).abs() < 1e-9 * 5.0);
    }

    #[test]
    fn rejects_repeated_points() {
        let pts = vec![(2.0, 1.0), (2.0, 1.0), (3.0, 1.0), (4.0, 1.0), (5.0, 1.0)];
        assert!(matches!(fit_log_poly(&pts, 0.0, 3), Err(Error::Conditioning(_))));
        let close: Vec<_> = (0..6).map(|i| (1e6 * (1.0 + 1e-13 * i as f64), 1.0)).collect();
        assert!(matches!(fit_log_poly(&close, 0.0, 3), Err(Error::Conditioning(_))));
    }
}
