//! Comparison predictors that, like the proposed model, see only the robot's
//! outcomes and the scheduled trust reports.
//!
//! Both emit predictions clamped to `[0, 1]`.

pub mod armav;
pub mod optimo;

pub use armav::{fit_armav, predict_armav, ArmavModel};
pub use optimo::{filter_optimo, fit_optimo, predict_optimo, FilterStep, OptimoModel};

use alloc::vec::Vec;

use crate::evaluation::ReportSchedule;
use crate::record::AgentRecord;
use crate::{Error, Result};

/// Fewest dense training trials either baseline will fit on.
pub const MIN_TRAINING_TRIALS: usize = 5;

/// Reports for trials `1..=training_len`, all of which must exist.
pub(crate) fn training_reports(record: &AgentRecord, training_len: usize) -> Result<Vec<f64>> {
    if training_len < MIN_TRAINING_TRIALS {
        return Err(Error::TooFew {
            required: MIN_TRAINING_TRIALS,
            got: training_len,
        });
    }
    if training_len > record.n_trials() {
        return Err(Error::TooFew {
            required: training_len,
            got: record.n_trials(),
        });
    }
    (1..=training_len)
        .map(|i| record.report(i).ok_or(Error::MissingTruth(i)))
        .collect()
}

/// Report at `trial` if the schedule exposes it.
#[inline]
pub(crate) fn visible_report(record: &AgentRecord, schedule: &ReportSchedule, trial: usize) -> Option<f64> {
    if schedule.contains(trial) {
        record.report(trial)
    } else {
        None
    }
}
