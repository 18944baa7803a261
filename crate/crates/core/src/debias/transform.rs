use serde::{Deserialize, Serialize};

use super::DebiasError;

/// Monotone polynomial score transform.
///
/// Scores are first pre-mapped with `u = (y - input_shift) / input_scale`
/// (the fitted biased range lands on `[0, 1]`), then evaluated as
/// `W_0 + W_1 u + ... + W_d u^d`. Every coefficient above the constant term
/// is non-negative and `W_1` is strictly positive, so the map is strictly
/// increasing on `[0, 1]` and above it. Below the fitted range (`u < 0`) the
/// map continues along its tangent at 0, which keeps every input in order.
/// The constant term only shifts the output and is left unconstrained so the
/// image can cover negative z-scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialTransform {
    pub coefficients: Vec<f64>,
    pub input_shift: f64,
    pub input_scale: f64,
}

impl PolynomialTransform {
    pub fn new(coefficients: Vec<f64>, input_shift: f64, input_scale: f64) -> Result<Self, DebiasError> {
        if coefficients.len() < 2 {
            return Err(DebiasError::BadDegree(coefficients.len().saturating_sub(1)));
        }
        if !(input_scale > 0.0) || !input_scale.is_finite() {
            return Err(DebiasError::InvalidTransform(format!("input scale {input_scale}")));
        }
        if coefficients[1..].iter().any(|&w| !(w >= 0.0)) || !(coefficients[1] > 0.0) {
            return Err(DebiasError::InvalidTransform(
                "coefficients above the constant term must be non-negative, W_1 positive".into(),
            ));
        }
        Ok(PolynomialTransform {
            coefficients,
            input_shift,
            input_scale,
        })
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn premap(&self, y: f64) -> f64 {
        (y - self.input_shift) / self.input_scale
    }

    pub fn eval_premapped(&self, u: f64) -> f64 {
        if u < 0.0 {
            return self.coefficients[0] + self.coefficients[1] * u;
        }
        self.coefficients.iter().rev().fold(0.0, |acc, &w| acc * u + w)
    }

    pub fn eval(&self, y: f64) -> f64 {
        self.eval_premapped(self.premap(y))
    }
}

/// Applies `t` elementwise.
pub fn apply_transform(t: &PolynomialTransform, scores: &[f64]) -> Vec<f64> {
    scores.iter().map(|&y| t.eval(y)).collect()
}

/// Vandermonde design matrix, `(d + 1) x n`, entry `(p, i) = u_i^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DesignMatrix {
    pub fn new(premapped: &[f64], degree: usize) -> Self {
        let cols = premapped.len();
        let rows = degree + 1;
        let mut data = vec![0.0; rows * cols];
        for (i, &u) in premapped.iter().enumerate() {
            let mut pow = 1.0;
            for p in 0..rows {
                data[p * cols + i] = pow;
                pow *= u;
            }
        }
        DesignMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, p: usize, i: usize) -> f64 {
        self.data[p * self.cols + i]
    }

    pub fn row(&self, p: usize) -> &[f64] {
        &self.data[p * self.cols..(p + 1) * self.cols]
    }

    /// `O = W^T X`.
    pub fn outputs(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (p, &wp) in w.iter().enumerate().take(self.rows) {
            for (o, &x) in out.iter_mut().zip(self.row(p)) {
                *o += wp * x;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_hand_evaluation() {
        let id = PolynomialTransform::new(vec![0.0, 1.0], 0.0, 1.0).unwrap();
        assert_eq!(apply_transform(&id, &[0.2, 0.5, 0.9]), vec![0.2, 0.5, 0.9]);
        let t = PolynomialTransform::new(vec![1.0, 2.0, 3.0], 0.0, 1.0).unwrap();
        assert_eq!(t.eval(0.5), 2.75);
    }

    #[test]
    fn below_range_follows_the_tangent() {
        let t = PolynomialTransform::new(vec![1.0, 2.0, 3.0], 10.0, 2.0).unwrap();
        assert_eq!(t.eval(8.0), -1.0);
        assert!(t.eval(6.0) < t.eval(8.0) && t.eval(8.0) < t.eval(10.0));
        assert_eq!(t.eval(14.0), 1.0 + 2.0 * 2.0 + 3.0 * 4.0);
    }

    #[test]
    fn rejects_negative_coefficients() {
        assert!(PolynomialTransform::new(vec![0.0, 1.0, -0.1], 0.0, 1.0).is_err());
        assert!(PolynomialTransform::new(vec![0.0, 0.0], 0.0, 1.0).is_err());
        assert!(PolynomialTransform::new(vec![0.0, 1.0], 0.0, 0.0).is_err());
        assert!(PolynomialTransform::new(vec![-4.0, 1.0], 0.0, 1.0).is_ok());
    }

    #[test]
    fn design_matrix_rows() {
        let x = DesignMatrix::new(&[0.0, 0.5, 2.0], 3);
        assert_eq!(x.row(0), &[1.0, 1.0, 1.0]);
        assert_eq!(x.row(1), &[0.0, 0.5, 2.0]);
        assert_eq!(x.row(3), &[0.0, 0.125, 8.0]);
        assert_eq!(x.outputs(&[1.0, 2.0, 0.0, 1.0]), vec![1.0, 2.125, 13.0]);
    }
}
