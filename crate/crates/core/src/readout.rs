//! Linear readout trained with the (ridge-regularised) normal equations.
//!
//! States are augmented with a constant bias column. The decision threshold
//! is the mean readout output over the training rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_RIDGE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutModel {
    /// One weight per state component followed by the bias.
    pub weights: Vec<f64>,
    pub threshold: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabeledStates {
    pub states: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl LabeledStates {
    pub fn validate(&self) -> Result<()> {
        if self.states.len() != self.labels.len() {
            return Err(Error::DimensionMismatch {
                context: "labels",
                expected: self.states.len(),
                actual: self.labels.len(),
            });
        }
        if self.labels.iter().any(|&l| l > 1) {
            return Err(Error::InvalidConfig("labels must be 0 or 1".into()));
        }
        Ok(())
    }

    pub fn targets(&self) -> Vec<f64> {
        self.labels.iter().map(|&l| f64::from(l)).collect()
    }
}

impl ReadoutModel {
    pub fn dim(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn output(&self, state: &[f64]) -> Result<f64> {
        if state.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "readout state",
                expected: self.dim(),
                actual: state.len(),
            });
        }
        Ok(augmented_dot(&self.weights, state))
    }

    /// 1 when the output is strictly above threshold.
    pub fn classify(&self, state: &[f64]) -> Result<u8> {
        Ok(u8::from(self.output(state)? > self.threshold))
    }

    pub fn classify_all(&self, states: &[Vec<f64>]) -> Result<Vec<u8>> {
        states.iter().map(|s| self.classify(s)).collect()
    }
}

fn augmented_dot(weights: &[f64], state: &[f64]) -> f64 {
    let (w, bias) = weights.split_at(state.len());
    w.iter().zip(state).map(|(a, b)| a * b).sum::<f64>() + bias[0]
}

pub fn classify(state: &[f64], model: &ReadoutModel) -> Result<u8> {
    model.classify(state)
}

pub fn train_binary(data: &LabeledStates, ridge: f64) -> Result<ReadoutModel> {
    data.validate()?;
    train_normal_equations(&data.states, &data.targets(), ridge)
}

/// Solves `(XᵀX + ridge·I) w = Xᵀy` with `X = [states | 1]`.
pub fn train_normal_equations(states: &[Vec<f64>], targets: &[f64], ridge: f64) -> Result<ReadoutModel> {
    if states.is_empty() {
        return Err(Error::EmptyInput("readout training states"));
    }
    if states.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            context: "readout targets",
            expected: states.len(),
            actual: targets.len(),
        });
    }
    if !(ridge >= 0.0) {
        return Err(Error::InvalidConfig("ridge must be non-negative".into()));
    }
    let n = states[0].len();
    if let Some(bad) = states.iter().find(|s| s.len() != n) {
        return Err(Error::DimensionMismatch {
            context: "readout state",
            expected: n,
            actual: bad.len(),
        });
    }

    let (gram, rhs) = normal_equations(states, targets, ridge);
    // A positive ridge keeps the system positive definite, so only exact
    // breakdown is rejected.
    let tol = if ridge > 0.0 { 0.0 } else { default_tolerance(&gram, n + 1) };
    let weights = solve_dense_with_tolerance(gram, rhs, n + 1, tol)?;
    let outputs: f64 = states.iter().map(|s| augmented_dot(&weights, s)).sum();
    Ok(ReadoutModel {
        threshold: outputs / states.len() as f64,
        weights,
    })
}

/// Row-major `XᵀX + ridge·I` and `Xᵀy` for the bias-augmented design.
pub fn normal_equations(states: &[Vec<f64>], targets: &[f64], ridge: f64) -> (Vec<f64>, Vec<f64>) {
    let d = states.first().map_or(0, Vec::len) + 1;
    let mut gram = vec![0.0; d * d];
    let mut rhs = vec![0.0; d];
    let mut row = vec![1.0; d];
    for (s, &y) in states.iter().zip(targets) {
        row[..d - 1].copy_from_slice(s);
        for i in 0..d {
            let xi = row[i];
            if xi == 0.0 {
                continue;
            }
            rhs[i] += xi * y;
            for j in i..d {
                gram[i * d + j] += xi * row[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            gram[i * d + j] = gram[j * d + i];
        }
        gram[i * d + i] += ridge;
    }
    (gram, rhs)
}

fn default_tolerance(a: &[f64], d: usize) -> f64 {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    scale * d as f64 * f64::EPSILON
}

/// Gaussian elimination with partial pivoting on a row-major `d × d` system.
/// Pivots below `max|a| · d · ε` count as singular.
pub fn solve_dense(a: Vec<f64>, b: Vec<f64>, d: usize) -> Result<Vec<f64>> {
    let tol = default_tolerance(&a, d);
    solve_dense_with_tolerance(a, b, d, tol)
}

pub fn solve_dense_with_tolerance(mut a: Vec<f64>, mut b: Vec<f64>, d: usize, tol: f64) -> Result<Vec<f64>> {
    for col in 0..d {
        let pivot_row = (col..d)
            .max_by(|&i, &j| a[i * d + col].abs().total_cmp(&a[j * d + col].abs()))
            .unwrap_or(col);
        let pivot = a[pivot_row * d + col];
        if !(pivot.abs() > tol) || !pivot.is_finite() {
            return Err(Error::SingularSystem { column: col, pivot });
        }
        if pivot_row != col {
            for k in 0..d {
                a.swap(col * d + k, pivot_row * d + k);
            }
            b.swap(col, pivot_row);
        }
        for row in col + 1..d {
            let f = a[row * d + col] / pivot;
            if f == 0.0 {
                continue;
            }
            for k in col..d {
                a[row * d + k] -= f * a[col * d + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; d];
    for row in (0..d).rev() {
        let tail: f64 = (row + 1..d).map(|k| a[row * d + k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row * d + row];
    }
    Ok(x)
}

pub fn accuracy(predictions: &[u8], labels: &[u8]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::EmptyInput("accuracy"));
    }
    if predictions.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "accuracy labels",
            expected: predictions.len(),
            actual: labels.len(),
        });
    }
    let hits = predictions.iter().zip(labels).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / predictions.len() as f64)
}
