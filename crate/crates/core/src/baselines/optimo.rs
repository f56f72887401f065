//! Scalar linear-Gaussian state-space model with trust as the hidden state.
//!
//! `x_i = a * x_{i-1} + g(p_i) + w`, `w ~ N(0, Q)`, and a report `y_i = x_i + v`, `v ~ N(0, R)`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{training_reports, visible_report};
use crate::evaluation::ReportSchedule;
use crate::model::Outcome;
use crate::optimize::{multi_start_minimize, Bounds, SearchConfig};
use crate::record::AgentRecord;
use crate::{Error, Result};

/// Smallest observation variance the fit may choose.
pub const MIN_VARIANCE: f64 = 1e-8;

/// Floor on process and initial variance. Without it a short training
/// session drives the process noise to zero and the filter stops listening
/// to later reports.
pub const MIN_STATE_VARIANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimoModel {
    pub transition: f64,
    pub gain_success: f64,
    pub gain_failure: f64,
    pub process_var: f64,
    pub obs_var: f64,
    pub init_mean: f64,
    pub init_var: f64,
}

/// Filter moments at one trial: after the time update and after the (optional) measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterStep {
    pub prior_mean: f64,
    pub prior_var: f64,
    pub post_mean: f64,
    pub post_var: f64,
}

impl OptimoModel {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.transition,
            self.gain_success,
            self.gain_failure,
            self.init_mean,
        ]
        .iter()
        .all(|v| v.is_finite());
        let positive = [self.process_var, self.obs_var, self.init_var]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if finite && positive {
            Ok(())
        } else {
            Err(Error::InvalidParameter("Optimo parameters must be finite with positive variances".into()))
        }
    }

    #[inline]
    fn gain(&self, o: Outcome) -> f64 {
        if o.is_success() {
            self.gain_success
        } else {
            self.gain_failure
        }
    }

    fn to_vector(self) -> [f64; 7] {
        [
            self.transition,
            self.gain_success,
            self.gain_failure,
            self.process_var.ln(),
            self.obs_var.ln(),
            self.init_mean,
            self.init_var.ln(),
        ]
    }

    fn from_vector(v: &[f64; 7]) -> Self {
        Self {
            transition: v[0],
            gain_success: v[1],
            gain_failure: v[2],
            process_var: v[3].exp(),
            obs_var: v[4].exp(),
            init_mean: v[5],
            init_var: v[6].exp(),
        }
    }

    /// Run the filter; `report(i)` returns the measurement for trial `i`, if any.
    fn run<F: FnMut(usize) -> Option<f64>>(&self, outcomes: &[Outcome], mut report: F, mut visit: impl FnMut(FilterStep, Option<f64>)) {
        let (mut m, mut p) = (self.init_mean, self.init_var);
        for (idx, &o) in outcomes.iter().enumerate() {
            let prior_mean = self.transition * m + self.gain(o);
            let prior_var = self.transition * self.transition * p + self.process_var;
            let y = report(idx + 1);
            (m, p) = match y {
                Some(y) => {
                    let k = prior_var / (prior_var + self.obs_var);
                    (prior_mean + k * (y - prior_mean), (1.0 - k) * prior_var)
                }
                None => (prior_mean, prior_var),
            };
            visit(
                FilterStep {
                    prior_mean,
                    prior_var,
                    post_mean: m,
                    post_var: p,
                },
                y,
            );
        }
    }

    /// Log predictive likelihood of a dense report sequence.
    fn log_likelihood(&self, outcomes: &[Outcome], reports: &[f64]) -> f64 {
        let mut ll = 0.0;
        self.run(
            &outcomes[..reports.len()],
            |i| Some(reports[i - 1]),
            |step, y| {
                let s = step.prior_var + self.obs_var;
                let v = y.unwrap_or(step.prior_mean) - step.prior_mean;
                ll -= 0.5 * ((2.0 * PI * s).ln() + v * v / s);
            },
        );
        ll
    }
}

/// Maximum filtering likelihood on the dense training prefix `1..=training_len`.
pub fn fit_optimo(record: &AgentRecord, training_len: usize, config: &SearchConfig) -> Result<OptimoModel> {
    let reports = training_reports(record, training_len)?;
    let outcomes = &record.outcomes()[..training_len];
    let lv = MIN_VARIANCE.ln();
    let ls = MIN_STATE_VARIANCE.ln();
    let bounds = Bounds {
        lower: [0.0, -1.0, -1.0, ls, lv, 0.0, ls],
        upper: [1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0],
    };
    let base = OptimoModel {
        transition: 1.0,
        gain_success: 0.0,
        gain_failure: 0.0,
        process_var: 1e-2,
        obs_var: 1e-2,
        init_mean: reports[0].clamp(0.0, 1.0),
        init_var: 1e-2,
    };
    let damped = OptimoModel {
        transition: 0.9,
        gain_success: 0.1,
        gain_failure: 0.0,
        ..base
    };
    let starts = [base.to_vector(), damped.to_vector()];
    let cfg = SearchConfig { grid_points: 0, ..*config };
    let mut objective = |v: &[f64; 7]| -OptimoModel::from_vector(v).log_likelihood(outcomes, &reports);
    let best = multi_start_minimize(&mut objective, &bounds, &starts, &cfg);
    if !best.value.is_finite() {
        return Err(Error::FitFailure("Optimo likelihood not finite".into()));
    }
    let model = OptimoModel::from_vector(&best.x);
    model.validate()?;
    Ok(model)
}

/// Full filter trace, measuring only at scheduled reports.
pub fn filter_optimo(model: &OptimoModel, record: &AgentRecord, schedule: &ReportSchedule) -> Vec<FilterStep> {
    let mut out = Vec::with_capacity(record.n_trials());
    model.run(record.outcomes(), |i| visible_report(record, schedule, i), |s, _| out.push(s));
    out
}

/// Predicted mean for each trial before its own report is seen, clamped to `[0, 1]`.
pub fn predict_optimo(model: &OptimoModel, record: &AgentRecord, schedule: &ReportSchedule) -> Vec<f64> {
    filter_optimo(model, record, schedule)
        .into_iter()
        .map(|s| s.prior_mean.clamp(0.0, 1.0))
        .collect()
}
