//! One agent's aligned robot outcomes and (possibly sparse) trust reports.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::model::Outcome;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgentId(pub String);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AgentId {
    fn from(s: &str) -> Self {
        AgentId(s.into())
    }
}

impl From<String> for AgentId {
    fn from(s: String) -> Self {
        AgentId(s)
    }
}

/// Trials are 1-based: `outcomes[i - 1]` is the outcome of trial `i`, and
/// `reports[&i]` the trust reported right after it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub id: AgentId,
    outcomes: Vec<Outcome>,
    reports: BTreeMap<usize, f64>,
}

impl AgentRecord {
    pub fn new(
        id: impl Into<AgentId>,
        outcomes: Vec<Outcome>,
        reports: BTreeMap<usize, f64>,
    ) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::EmptyInput("outcomes"));
        }
        for (&trial, &t) in &reports {
            if trial == 0 || trial > outcomes.len() {
                return Err(Error::Domain {
                    value: trial as f64,
                    domain: "report trial in [1, n]",
                });
            }
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Domain {
                    value: t,
                    domain: "trust in [0, 1]",
                });
            }
        }
        Ok(AgentRecord {
            id: id.into(),
            outcomes,
            reports,
        })
    }

    /// A record with a report after every trial.
    pub fn dense(id: impl Into<AgentId>, outcomes: Vec<Outcome>, trust: &[f64]) -> Result<Self> {
        if trust.len() != outcomes.len() {
            return Err(Error::LengthMismatch {
                left: outcomes.len(),
                right: trust.len(),
            });
        }
        let reports = trust.iter().enumerate().map(|(i, &t)| (i + 1, t)).collect();
        Self::new(id, outcomes, reports)
    }

    pub fn n_trials(&self) -> usize {
        self.outcomes.len()
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn reports(&self) -> &BTreeMap<usize, f64> {
        &self.reports
    }

    pub fn report_count(&self) -> usize {
        self.reports.len()
    }

    pub fn report(&self, trial: usize) -> Option<f64> {
        self.reports.get(&trial).copied()
    }

    pub fn is_dense(&self) -> bool {
        self.reports.len() == self.outcomes.len()
    }

    /// All reports in trial order, or the first trial that lacks one.
    pub fn dense_trust(&self) -> core::result::Result<Vec<f64>, usize> {
        (1..=self.n_trials())
            .map(|i| self.report(i).ok_or(i))
            .collect()
    }

    /// Same outcomes, keeping only the reports whose trial satisfies `keep`.
    pub fn filter_reports(&self, mut keep: impl FnMut(usize) -> bool) -> AgentRecord {
        AgentRecord {
            id: self.id.clone(),
            outcomes: self.outcomes.clone(),
            reports: self
                .reports
                .iter()
                .filter(|(&i, _)| keep(i))
                .map(|(&i, &t)| (i, t))
                .collect(),
        }
    }

    pub fn with_report(&self, trial: usize, trust: f64) -> Result<AgentRecord> {
        let mut reports = self.reports.clone();
        reports.insert(trial, trust);
        AgentRecord::new(self.id.clone(), self.outcomes.clone(), reports)
    }

    /// Cumulative (successes, failures) after each trial, 1-based: index 0 is `(0, 0)`.
    pub fn cumulative_counts(&self) -> Vec<(u32, u32)> {
        let mut acc = (0u32, 0u32);
        let mut out = Vec::with_capacity(self.outcomes.len() + 1);
        out.push(acc);
        for o in &self.outcomes {
            if o.is_success() {
                acc.0 += 1;
            } else {
                acc.1 += 1;
            }
            out.push(acc);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Outcome::{Failure as F, Success as S};

    #[test]
    fn rejects_out_of_range_reports() {
        let mut r = BTreeMap::new();
        r.insert(0, 0.5);
        assert!(AgentRecord::new("a", alloc::vec![S], r).is_err());
        let mut r = BTreeMap::new();
        r.insert(2, 0.5);
        assert!(AgentRecord::new("a", alloc::vec![S], r).is_err());
        let mut r = BTreeMap::new();
        r.insert(1, 1.2);
        assert!(AgentRecord::new("a", alloc::vec![S], r).is_err());
        assert!(AgentRecord::new("a", alloc::vec![], BTreeMap::new()).is_err());
    }

    #[test]
    fn counts_and_filters() {
        let rec = AgentRecord::dense("a", alloc::vec![S, F, S], &[0.5, 0.4, 0.6]).unwrap();
        assert_eq!(rec.cumulative_counts(), alloc::vec![(0, 0), (1, 0), (1, 1), (2, 1)]);
        let odd = rec.filter_reports(|i| i % 2 == 1);
        assert_eq!(odd.report_count(), 2);
        assert_eq!(odd.dense_trust(), Err(2));
        assert_eq!(rec.dense_trust().unwrap(), alloc::vec![0.5, 0.4, 0.6]);
    }
}
