//! JSON dump format for [`LcqProblem`] regression fixtures.
//!
//! Infinite bounds are written as `null`. The constant offsets `l0` and `r0` are optional and
//! default to zero.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::LcqProblem;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LcqProblemFile {
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    pub g: Vec<f64>,
    #[serde(rename = "A", default)]
    pub a: Vec<Vec<f64>>,
    #[serde(default)]
    pub b: Vec<f64>,
    #[serde(default)]
    pub eq_rows: Vec<usize>,
    #[serde(rename = "L", default)]
    pub l: Vec<Vec<f64>>,
    #[serde(rename = "R", default)]
    pub r: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lb: Option<Vec<Option<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ub: Option<Vec<Option<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<Vec<f64>>,
}

fn matrix<T: Real>(what: &str, rows: &[Vec<f64>], ncols: usize) -> Result<DMatrix<T>> {
    if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
        return Err(Error::InvalidProblem(format!(
            "{what} row {bad} has {} entries, expected {ncols}",
            rows[bad].len()
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| T::lit(rows[i][j])))
}

fn vector<T: Real>(v: &[f64]) -> DVector<T> {
    DVector::from_iterator(v.len(), v.iter().map(|x| T::lit(*x)))
}

fn bounds<T: Real>(v: &Option<Vec<Option<f64>>>, missing: f64) -> Option<DVector<T>> {
    v.as_ref()
        .map(|v| DVector::from_iterator(v.len(), v.iter().map(|x| T::lit(x.unwrap_or(missing)))))
}

fn rows<T: Real>(m: &DMatrix<T>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().map(|v| v.as_f64()).collect()).collect()
}

fn unbounded<T: Real>(v: &Option<DVector<T>>) -> Option<Vec<Option<f64>>> {
    v.as_ref()
        .map(|v| v.iter().map(|x| x.is_finite_val().then(|| x.as_f64())).collect())
}

impl LcqProblemFile {
    pub fn into_problem<T: Real>(&self) -> Result<LcqProblem<T>> {
        let n = self.g.len();
        let nc = self.l.len();
        let q = matrix("Q", &self.q, n)?;
        let a = matrix("A", &self.a, n)?;
        let l = matrix("L", &self.l, n)?;
        let r = matrix("R", &self.r, n)?;
        let l0 = self.l0.as_deref().map_or_else(|| DVector::zeros(nc), vector);
        let r0 = self.r0.as_deref().map_or_else(|| DVector::zeros(r.nrows()), vector);
        let problem = LcqProblem::new(q, vector(&self.g))
            .with_linear(a, vector(&self.b), self.eq_rows.clone())
            .with_complementarity(l, r)
            .with_offsets(l0, r0)
            .with_bounds(bounds(&self.lb, f64::NEG_INFINITY), bounds(&self.ub, f64::INFINITY));
        problem.validate()?;
        Ok(problem)
    }

    pub fn from_problem<T: Real>(p: &LcqProblem<T>) -> Self {
        let nonzero = |v: &DVector<T>| v.iter().any(|x| *x != T::zero());
        Self {
            q: rows(&p.q),
            g: p.g.iter().map(|v| v.as_f64()).collect(),
            a: rows(&p.a),
            b: p.b.iter().map(|v| v.as_f64()).collect(),
            eq_rows: p.eq_rows.clone(),
            l: rows(&p.l),
            r: rows(&p.r),
            lb: unbounded(&p.lb),
            ub: unbounded(&p.ub),
            l0: nonzero(&p.l0).then(|| p.l0.iter().map(|v| v.as_f64()).collect()),
            r0: nonzero(&p.r0).then(|| p.r0.iter().map(|v| v.as_f64()).collect()),
        }
    }
}

impl<T: Real> LcqProblem<T> {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: LcqProblemFile = serde_json::from_str(text).map_err(|e| Error::Json(e.to_string()))?;
        file.into_problem()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&LcqProblemFile::from_problem(self)).expect("plain data serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Json(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_json())
            .map_err(|e| Error::Json(format!("{}: {e}", path.as_ref().display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let p = LcqProblem::new(
            DMatrix::from_row_slice(2, 2, &[2.0, 0.1, 0.1, 1.0 / 3.0]),
            DVector::from_column_slice(&[-0.1, 0.7]),
        )
        .with_linear(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), DVector::from_column_slice(&[0.3]), vec![0])
        .with_complementarity(DMatrix::from_row_slice(1, 2, &[1.0, 0.0]), DMatrix::from_row_slice(1, 2, &[0.0, 1.0]))
        .with_bounds(
            Some(DVector::from_column_slice(&[0.0, f64::NEG_INFINITY])),
            Some(DVector::from_column_slice(&[f64::INFINITY, 5.0])),
        );
        let back: LcqProblem<f64> = LcqProblem::from_json(&p.to_json()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn ragged_matrix_is_rejected() {
        let text = r#"{"Q":[[1,0],[0]],"g":[0,0]}"#;
        assert!(matches!(
            LcqProblem::<f64>::from_json(text),
            Err(Error::InvalidProblem(_))
        ));
    }
}
