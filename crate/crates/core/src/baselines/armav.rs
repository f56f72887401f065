//! First-order autoregression on trust with current and lagged robot outcome:
//! `t_i = a1 * t_{i-1} + b0 * p_i + b1 * p_{i-1} + c`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{training_reports, visible_report};
use crate::evaluation::ReportSchedule;
use crate::record::AgentRecord;
use crate::{Error, Result};

/// Penalty added to the normal equations when they are singular.
pub const RIDGE_PENALTY: f64 = 1e-6;

/// Trust assumed before the first trial, when no previous value exists.
pub const INITIAL_TRUST: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmavModel {
    pub a1: f64,
    pub b0: f64,
    pub b1: f64,
    pub c: f64,
}

impl ArmavModel {
    #[inline]
    fn raw(&self, prev_trust: f64, outcome: f64, prev_outcome: f64) -> f64 {
        self.a1 * prev_trust + self.b0 * outcome + self.b1 * prev_outcome + self.c
    }
}

/// Solve the 4x4 system with partial pivoting; `None` if a pivot vanishes.
fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    let scale = (0..4).map(|i| a[i][i].abs()).fold(0.0, f64::max).max(1.0);
    for col in 0..4 {
        let pivot = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..4 {
            let factor = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let tail: f64 = (row + 1..4).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}

/// Ordinary least squares on the dense training prefix `1..=training_len`.
///
/// Falls back to ridge regression with [`RIDGE_PENALTY`] when the design is singular.
pub fn fit_armav(record: &AgentRecord, training_len: usize) -> Result<ArmavModel> {
    let trust = training_reports(record, training_len)?;
    let p: Vec<f64> = record.outcomes()[..training_len]
        .iter()
        .map(|o| o.as_u8() as f64)
        .collect();

    let mut xtx = [[0.0; 4]; 4];
    let mut xty = [0.0; 4];
    for i in 1..training_len {
        let row = [trust[i - 1], p[i], p[i - 1], 1.0];
        for r in 0..4 {
            for c in 0..4 {
                xtx[r][c] += row[r] * row[c];
            }
            xty[r] += row[r] * trust[i];
        }
    }
    let coef = solve4(xtx, xty)
        .or_else(|| {
            let mut ridge = xtx;
            for (d, row) in ridge.iter_mut().enumerate() {
                row[d] += RIDGE_PENALTY;
            }
            solve4(ridge, xty)
        })
        .ok_or_else(|| Error::FitFailure("ARMAV normal equations".into()))?;
    if coef.iter().any(|v| !v.is_finite()) {
        return Err(Error::FitFailure("ARMAV coefficients not finite".into()));
    }
    Ok(ArmavModel {
        a1: coef[0],
        b0: coef[1],
        b1: coef[2],
        c: coef[3],
    })
}

/// One-step recursion over every trial.
///
/// The previous trust is the report at the previous trial when the schedule
/// exposes one, otherwise the model's own previous prediction.
pub fn predict_armav(model: &ArmavModel, record: &AgentRecord, schedule: &ReportSchedule) -> Vec<f64> {
    let mut prev_trust = INITIAL_TRUST;
    let mut prev_outcome = 0.0;
    let mut out = Vec::with_capacity(record.n_trials());
    for (idx, o) in record.outcomes().iter().enumerate() {
        let trial = idx + 1;
        let outcome = o.as_u8() as f64;
        let pred = model.raw(prev_trust, outcome, prev_outcome).clamp(0.0, 1.0);
        out.push(pred);
        prev_trust = visible_report(record, schedule, trial).unwrap_or(pred);
        prev_outcome = outcome;
    }
    out
}
