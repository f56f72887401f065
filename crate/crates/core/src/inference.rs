//! Per-agent parameter fitting (MLE and MAP) and population-prior learning.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::{beta_log_density_terms, clamp_trust, ThetaParams};
use crate::optimize::{multi_start_minimize, Bounds, SearchConfig};
use crate::prior::PriorModel;
use crate::record::{AgentId, AgentRecord};
use crate::{Error, Result};

/// Search box for every fitted parameter.
pub const THETA_LOWER: f64 = 1e-3;
pub const THETA_UPPER: f64 = 1e3;

/// Minimum reports for an unregularized fit: one per free parameter.
pub const MIN_MLE_REPORTS: usize = 4;

pub fn theta_in_box(theta: &ThetaParams) -> bool {
    theta
        .to_array()
        .iter()
        .all(|&v| (THETA_LOWER..=THETA_UPPER).contains(&v))
}

pub fn clamp_to_box(theta: ThetaParams) -> ThetaParams {
    ThetaParams::from_array(theta.to_array().map(|v| v.max(THETA_LOWER).min(THETA_UPPER)))
}

fn log_bounds() -> Bounds<4> {
    Bounds::uniform(THETA_LOWER.ln(), THETA_UPPER.ln())
}

#[inline]
fn theta_from_log(x: &[f64; 4]) -> ThetaParams {
    ThetaParams::from_array(x.map(f64::exp))
}

#[inline]
fn theta_to_log(theta: &ThetaParams) -> [f64; 4] {
    theta.to_array().map(|v| v.ln())
}

/// One report, reduced to what the likelihood needs: the success/failure
/// counts up to its trial and the logs of the clamped value.
#[derive(Debug, Clone, Copy)]
struct ReportTerm {
    successes: f64,
    failures: f64,
    ln_t: f64,
    ln_1mt: f64,
}

/// Precomputed likelihood of a record's reports; evaluation is O(reports).
#[derive(Debug, Clone)]
pub struct Likelihood {
    terms: Vec<ReportTerm>,
}

impl Likelihood {
    pub fn new(record: &AgentRecord) -> Self {
        let counts = record.cumulative_counts();
        let terms = record
            .reports()
            .iter()
            .map(|(&i, &t)| {
                let t = clamp_trust(t);
                ReportTerm {
                    successes: counts[i].0 as f64,
                    failures: counts[i].1 as f64,
                    ln_t: t.ln(),
                    ln_1mt: (1.0 - t).ln(),
                }
            })
            .collect();
        Likelihood { terms }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Sum of report log-densities under `theta`.
    pub fn log_likelihood(&self, theta: &ThetaParams) -> f64 {
        self.terms
            .iter()
            .map(|r| {
                let s = theta.state_after(r.successes, r.failures);
                beta_log_density_terms(r.ln_t, r.ln_1mt, s.alpha, s.beta)
            })
            .sum()
    }
}

/// Log-likelihood of all reports in `record` under `theta`.
pub fn mle_objective(theta: &ThetaParams, record: &AgentRecord) -> Result<f64> {
    if record.report_count() == 0 {
        return Err(Error::EmptyInput("reports"));
    }
    if !theta_in_box(theta) {
        return Err(Error::InvalidParameter(alloc::format!(
            "{theta:?} outside [{THETA_LOWER}, {THETA_UPPER}]"
        )));
    }
    Ok(Likelihood::new(record).log_likelihood(theta))
}

/// Log posterior (up to a constant): likelihood plus prior log-density.
pub fn map_objective(theta: &ThetaParams, record: &AgentRecord, prior: &PriorModel) -> f64 {
    Likelihood::new(record).log_likelihood(theta) + prior.log_density(theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta: ThetaParams,
    /// Attained log-likelihood (MLE) or unnormalized log-posterior (MAP).
    pub objective: f64,
    pub n_restarts_used: usize,
    pub converged: bool,
    /// Number of reports the fit saw.
    pub reports_used: usize,
}

fn run_search(
    objective: impl Fn(&ThetaParams) -> f64,
    named_starts: &[ThetaParams],
    reports_used: usize,
    config: &SearchConfig,
) -> Result<FitResult> {
    let bounds = log_bounds();
    let starts: Vec<[f64; 4]> = named_starts
        .iter()
        .map(|t| {
            let mut x = theta_to_log(&clamp_to_box(*t));
            bounds.project(&mut x);
            x
        })
        .collect();
    let mut neg = |x: &[f64; 4]| -objective(&theta_from_log(x));
    let best = multi_start_minimize(&mut neg, &bounds, &starts, config);
    if !best.value.is_finite() {
        return Err(Error::FitFailure("objective not finite anywhere in the search box".into()));
    }
    Ok(FitResult {
        theta: clamp_to_box(theta_from_log(&best.x)),
        objective: -best.value,
        n_restarts_used: best.starts,
        converged: best.converged,
        reports_used,
    })
}

/// Maximum-likelihood parameters for a fully observed agent.
pub fn fit_theta_mle(record: &AgentRecord, config: &SearchConfig) -> Result<FitResult> {
    let n = record.report_count();
    if n < MIN_MLE_REPORTS {
        return Err(Error::UnderDetermined {
            reports: n,
            required: MIN_MLE_REPORTS,
        });
    }
    let lik = Likelihood::new(record);
    run_search(|t| lik.log_likelihood(t), &[], n, config)
}

/// Prior mode clamped into the search box.
pub fn prior_mode(prior: &PriorModel) -> ThetaParams {
    clamp_to_box(prior.mode())
}

/// MAP parameters given whatever reports the record holds (possibly none).
pub fn fit_theta_map(
    record: &AgentRecord,
    prior: &PriorModel,
    config: &SearchConfig,
) -> Result<FitResult> {
    map_search(record, prior, None, config)
}

/// Refit after the record gained at least one report, warm-starting from `current`.
pub fn refit_on_report(
    current: &FitResult,
    record: &AgentRecord,
    prior: &PriorModel,
    config: &SearchConfig,
) -> Result<FitResult> {
    if record.report_count() <= current.reports_used {
        return Err(Error::NoNewReport(current.reports_used));
    }
    map_search(record, prior, Some(current.theta), config)
}

fn map_search(
    record: &AgentRecord,
    prior: &PriorModel,
    warm: Option<ThetaParams>,
    config: &SearchConfig,
) -> Result<FitResult> {
    let n = record.report_count();
    if n == 0 {
        let theta = prior_mode(prior);
        let objective = prior.log_density(&theta);
        if !objective.is_finite() {
            return Err(Error::FitFailure("prior density not finite at its mode".into()));
        }
        return Ok(FitResult {
            theta,
            objective,
            n_restarts_used: 0,
            converged: true,
            reports_used: 0,
        });
    }
    let lik = Likelihood::new(record);
    let mut starts = Vec::with_capacity(3);
    let mut config = *config;
    if let Some(w) = warm {
        starts.push(w);
        config.restarts += 1;
    }
    starts.push(prior.mode());
    starts.push(prior.mean());
    run_search(
        |t| lik.log_likelihood(t) + prior.log_density(t),
        &starts,
        n,
        &config,
    )
}

/// Outcome of fitting every old agent, kept so priors for different
/// held-out subsets can be formed without refitting.
#[derive(Debug, Clone)]
pub struct PopulationFits {
    pub fits: Vec<(AgentId, Result<FitResult>)>,
}

impl PopulationFits {
    pub fn fit(records: &[AgentRecord], config: &SearchConfig) -> Self {
        PopulationFits {
            fits: records
                .iter()
                .map(|r| (r.id.clone(), fit_theta_mle(r, config)))
                .collect(),
        }
    }

    /// Prior learned from every successful fit whose agent passes `include`.
    pub fn prior_where(&self, mut include: impl FnMut(&AgentId) -> bool) -> Result<PriorModel> {
        let thetas: Vec<ThetaParams> = self
            .fits
            .iter()
            .filter(|(id, _)| include(id))
            .filter_map(|(_, f)| f.as_ref().ok().map(|f| f.theta))
            .collect();
        if thetas.len() < 2 {
            return Err(Error::TooFew {
                required: 2,
                got: thetas.len(),
            });
        }
        PriorModel::fit(&thetas)
    }

    pub fn failures(&self) -> impl Iterator<Item = (&AgentId, &Error)> {
        self.fits
            .iter()
            .filter_map(|(id, f)| f.as_ref().err().map(|e| (id, e)))
    }
}

/// Learn the population prior from fully observed old agents.
///
/// Agents whose fit fails are skipped (see [`PopulationFits::failures`]);
/// fewer than two surviving fits is an error.
pub fn learn_prior(
    old_records: &[AgentRecord],
    config: &SearchConfig,
) -> Result<(PriorModel, PopulationFits)> {
    if old_records.is_empty() {
        return Err(Error::EmptyInput("old agent records"));
    }
    let fits = PopulationFits::fit(old_records, config);
    let prior = fits.prior_where(|_| true)?;
    Ok((prior, fits))
}
