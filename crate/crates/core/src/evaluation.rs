//! Report scheduling, scoring, leave-one-out evaluation and parameter sweeps.
//!
//! An agent first completes a training session of `l` trials with a report
//! after every trial, then reports only every `q`-th trial. Every model sees
//! the same outcomes and the same scheduled reports; predictions for trials
//! `l + 1..=n` are scored against the agent's full report sequence.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{fit_armav, fit_optimo, predict_armav, predict_optimo};
use crate::inference::{fit_theta_map, refit_on_report, FitResult, PopulationFits};
use crate::model::{predict_trust, BetaState};
use crate::optimize::SearchConfig;
use crate::prior::PriorModel;
use crate::record::{AgentId, AgentRecord};
use crate::{Error, Result};

/// Fewest agents leave-one-out accepts.
pub const MIN_LOO_AGENTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub training_len: usize,
    pub report_gap: usize,
    pub total_trials: usize,
}

impl EvalConfig {
    pub fn new(training_len: usize, report_gap: usize, total_trials: usize) -> Result<Self> {
        let c = EvalConfig {
            training_len,
            report_gap,
            total_trials,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.training_len == 0 || self.training_len >= self.total_trials {
            return Err(Error::InvalidParameter(alloc::format!(
                "training length {} must be in [1, {})",
                self.training_len,
                self.total_trials
            )));
        }
        if self.report_gap == 0 {
            return Err(Error::InvalidParameter("report gap must be at least 1".into()));
        }
        Ok(())
    }
}

/// Trials at which the agent's report is visible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportSchedule {
    trials: BTreeSet<usize>,
    n_trials: usize,
}

impl ReportSchedule {
    /// Schedule over `n_trials` trials; indices outside `1..=n_trials` are dropped.
    pub fn from_trials(trials: impl IntoIterator<Item = usize>, n_trials: usize) -> Self {
        ReportSchedule {
            trials: trials
                .into_iter()
                .filter(|&i| (1..=n_trials).contains(&i))
                .collect(),
            n_trials,
        }
    }

    #[inline]
    pub fn contains(&self, trial: usize) -> bool {
        self.trials.contains(&trial)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.trials.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn n_trials(&self) -> usize {
        self.n_trials
    }
}

/// `{1..=l} ∪ {l + q, l + 2q, ...}`, capped at `n`.
pub fn build_schedule(config: &EvalConfig) -> ReportSchedule {
    let l = config.training_len;
    let n = config.total_trials;
    let post = (l + config.report_gap..=n).step_by(config.report_gap.max(1));
    ReportSchedule::from_trials((1..=l).chain(post), n)
}

/// The record as a model under `schedule` may see it.
pub fn visible_record(record: &AgentRecord, schedule: &ReportSchedule) -> AgentRecord {
    record.filter_reports(|i| schedule.contains(i))
}

/// Root mean squared error over trials `l + 1..=n`.
pub fn rmse_agent(truth: &[f64], predicted: &[f64], l: usize) -> Result<f64> {
    if truth.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: predicted.len(),
        });
    }
    if truth.len() <= l {
        return Err(Error::TooFew {
            required: l + 1,
            got: truth.len(),
        });
    }
    let sq: f64 = truth[l..]
        .iter()
        .zip(&predicted[l..])
        .map(|(t, p)| (t - p) * (t - p))
        .sum();
    Ok((sq / (truth.len() - l) as f64).sqrt())
}

/// A trust model under evaluation.
///
/// `predict` receives a record already reduced to the scheduled reports and
/// must return one prediction per trial.
pub trait TrustPredictor {
    fn tag(&self) -> &str;

    /// Whether `predict` needs a population prior.
    fn uses_prior(&self) -> bool {
        false
    }

    fn predict(&self, visible: &AgentRecord, prior: Option<&PriorModel>, config: &EvalConfig) -> Result<Vec<f64>>;
}

/// Trajectory of the proposed model with the fits behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposedTrace {
    pub predictions: Vec<f64>,
    pub states: Vec<BetaState>,
    /// `(first trial, fit)`: each fit drives predictions from that trial on.
    pub fits: Vec<(usize, FitResult)>,
}

/// Run the proposed model over a record.
///
/// The first fit uses the training reports and also drives the (unscored)
/// training-trial predictions. After each later scheduled report the
/// parameters are refit, and predictions from the next trial on use the new
/// fit. Parameters stay frozen between reports while the Beta state keeps
/// updating with every outcome.
pub fn predict_proposed(
    record: &AgentRecord,
    prior: &PriorModel,
    config: &EvalConfig,
    search: &SearchConfig,
) -> Result<ProposedTrace> {
    config.validate()?;
    let n = record.n_trials();
    let schedule = build_schedule(&EvalConfig { total_trials: n, ..*config });
    let visible = visible_record(record, &schedule);
    let l = config.training_len.min(n);

    let mut current = fit_theta_map(&visible.filter_reports(|i| i <= l), prior, search)?;
    let mut fits = alloc::vec![(1, current)];
    for &trial in visible.reports().keys().filter(|&&i| i > l && i < n) {
        current = refit_on_report(&current, &visible.filter_reports(|i| i <= trial), prior, search)?;
        fits.push((trial + 1, current));
    }

    let counts = record.cumulative_counts();
    let mut states = Vec::with_capacity(n);
    let mut seg = 0;
    for m in 1..=n {
        while seg + 1 < fits.len() && fits[seg + 1].0 <= m {
            seg += 1;
        }
        let (s, f) = counts[m];
        states.push(fits[seg].1.theta.state_after(s as f64, f as f64));
    }
    let predictions = states.iter().map(predict_trust).collect();
    Ok(ProposedTrace {
        predictions,
        states,
        fits,
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ProposedPredictor {
    pub search: SearchConfig,
}

impl TrustPredictor for ProposedPredictor {
    fn tag(&self) -> &str {
        ModelTag::Proposed.as_str()
    }

    fn uses_prior(&self) -> bool {
        true
    }

    fn predict(&self, visible: &AgentRecord, prior: Option<&PriorModel>, config: &EvalConfig) -> Result<Vec<f64>> {
        let prior = prior.ok_or_else(|| Error::InvalidParameter("proposed model needs a prior".into()))?;
        Ok(predict_proposed(visible, prior, config, &self.search)?.predictions)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ArmavPredictor;

impl TrustPredictor for ArmavPredictor {
    fn tag(&self) -> &str {
        ModelTag::Armav.as_str()
    }

    fn predict(&self, visible: &AgentRecord, _prior: Option<&PriorModel>, config: &EvalConfig) -> Result<Vec<f64>> {
        let schedule = build_schedule(config);
        let model = fit_armav(visible, config.training_len)?;
        Ok(predict_armav(&model, visible, &schedule))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OptimoPredictor {
    pub search: SearchConfig,
}

impl TrustPredictor for OptimoPredictor {
    fn tag(&self) -> &str {
        ModelTag::Optimo.as_str()
    }

    fn predict(&self, visible: &AgentRecord, _prior: Option<&PriorModel>, config: &EvalConfig) -> Result<Vec<f64>> {
        let schedule = build_schedule(config);
        let model = fit_optimo(visible, config.training_len, &self.search)?;
        Ok(predict_optimo(&model, visible, &schedule))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelTag {
    Proposed,
    Armav,
    Optimo,
}

impl ModelTag {
    pub const ALL: [ModelTag; 3] = [ModelTag::Proposed, ModelTag::Armav, ModelTag::Optimo];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelTag::Proposed => "proposed",
            ModelTag::Armav => "armav",
            ModelTag::Optimo => "optimo",
        }
    }

    pub fn predictor(self, search: SearchConfig) -> Box<dyn TrustPredictor> {
        match self {
            ModelTag::Proposed => Box::new(ProposedPredictor { search }),
            ModelTag::Armav => Box::new(ArmavPredictor),
            ModelTag::Optimo => Box::new(OptimoPredictor { search }),
        }
    }
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelTag::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidParameter(alloc::format!("unknown model `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentEval {
    pub predictions: Vec<f64>,
    pub rmse: f64,
}

/// Evaluate one agent: hide unscheduled reports, predict every trial, score
/// trials after the training session against the full report sequence.
pub fn run_agent_eval(
    record: &AgentRecord,
    prior: Option<&PriorModel>,
    config: &EvalConfig,
    predictor: &dyn TrustPredictor,
) -> Result<AgentEval> {
    config.validate()?;
    if record.n_trials() != config.total_trials {
        return Err(Error::LengthMismatch {
            left: record.n_trials(),
            right: config.total_trials,
        });
    }
    let truth = record.dense_trust().map_err(Error::MissingTruth)?;
    let visible = visible_record(record, &build_schedule(config));
    let predictions = predictor.predict(&visible, prior, config)?;
    let rmse = rmse_agent(&truth, &predictions, config.training_len)?;
    Ok(AgentEval { predictions, rmse })
}

/// Mean, sample standard deviation and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub se: f64,
}

impl Summary {
    /// `sd` and `se` are 0 for a single value.
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("values"));
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Ok(Summary {
            n,
            mean,
            sd,
            se: sd / (n as f64).sqrt(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmseReport {
    pub model_tag: String,
    pub per_agent: BTreeMap<AgentId, f64>,
    /// Agents whose evaluation failed, with the reason; excluded from the aggregates.
    pub missing: BTreeMap<AgentId, String>,
    pub mean: f64,
    pub sd: f64,
    pub se: f64,
}

impl RmseReport {
    pub fn new(model_tag: impl Into<String>, per_agent: BTreeMap<AgentId, f64>, missing: BTreeMap<AgentId, String>) -> Result<Self> {
        let values: Vec<f64> = per_agent.values().copied().collect();
        let s = Summary::of(&values).map_err(|_| Error::FitFailure("no agent could be evaluated".into()))?;
        Ok(RmseReport {
            model_tag: model_tag.into(),
            per_agent,
            missing,
            mean: s.mean,
            sd: s.sd,
            se: s.se,
        })
    }
}

fn check_dataset(dataset: &[AgentRecord]) -> Result<usize> {
    if dataset.len() < MIN_LOO_AGENTS {
        return Err(Error::TooFew {
            required: MIN_LOO_AGENTS,
            got: dataset.len(),
        });
    }
    let mut ids = BTreeSet::new();
    for r in dataset {
        if !ids.insert(&r.id) {
            return Err(Error::InvalidParameter(alloc::format!("duplicate agent id `{}`", r.id)));
        }
    }
    let n = dataset[0].n_trials();
    if let Some(r) = dataset.iter().find(|r| r.n_trials() != n) {
        return Err(Error::LengthMismatch {
            left: n,
            right: r.n_trials(),
        });
    }
    Ok(n)
}

/// Fits for prior learning, computed only if some predictor needs a prior.
fn fits_for(dataset: &[AgentRecord], predictors: &[&dyn TrustPredictor], search: &SearchConfig) -> Option<PopulationFits> {
    predictors
        .iter()
        .any(|p| p.uses_prior())
        .then(|| PopulationFits::fit(dataset, search))
}

/// Leave-one-out evaluation: each agent is scored with a prior learned from
/// the others.
pub fn leave_one_out(
    dataset: &[AgentRecord],
    config: &EvalConfig,
    predictor: &dyn TrustPredictor,
    search: &SearchConfig,
) -> Result<RmseReport> {
    check_dataset(dataset)?;
    let fits = fits_for(dataset, &[predictor], search);
    leave_one_out_with_fits(dataset, fits.as_ref(), config, predictor)
}

/// [`leave_one_out`] reusing per-agent fits of the whole dataset.
pub fn leave_one_out_with_fits(
    dataset: &[AgentRecord],
    fits: Option<&PopulationFits>,
    config: &EvalConfig,
    predictor: &dyn TrustPredictor,
) -> Result<RmseReport> {
    check_dataset(dataset)?;
    config.validate()?;
    if predictor.uses_prior() && fits.is_none() {
        return Err(Error::InvalidParameter("population fits required for a prior".into()));
    }
    let mut per_agent = BTreeMap::new();
    let mut missing = BTreeMap::new();
    for held in dataset {
        let result = match fits.filter(|_| predictor.uses_prior()) {
            Some(f) => f
                .prior_where(|id| *id != held.id)
                .and_then(|prior| run_agent_eval(held, Some(&prior), config, predictor)),
            None => run_agent_eval(held, None, config, predictor),
        };
        match result {
            Ok(e) => {
                per_agent.insert(held.id.clone(), e.rmse);
            }
            Err(e) => {
                missing.insert(held.id.clone(), e.to_string());
            }
        }
    }
    RmseReport::new(predictor.tag(), per_agent, missing)
}

/// Per-agent `other - reference` RMSE over agents scored by both.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedDiff {
    pub reference: String,
    pub model: String,
    pub per_agent: BTreeMap<AgentId, f64>,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// One report per predictor, in the order given.
    pub reports: Vec<RmseReport>,
    pub paired: Vec<PairedDiff>,
}

/// Leave-one-out for several models on the same agents, with paired
/// differences against the proposed model (or the first model if absent).
pub fn compare_models(
    dataset: &[AgentRecord],
    config: &EvalConfig,
    predictors: &[&dyn TrustPredictor],
    search: &SearchConfig,
) -> Result<Comparison> {
    if predictors.len() < 2 {
        return Err(Error::TooFew {
            required: 2,
            got: predictors.len(),
        });
    }
    check_dataset(dataset)?;
    let fits = fits_for(dataset, predictors, search);
    let reports = predictors
        .iter()
        .map(|p| leave_one_out_with_fits(dataset, fits.as_ref(), config, *p))
        .collect::<Result<Vec<_>>>()?;
    let r = reports
        .iter()
        .position(|r| r.model_tag == ModelTag::Proposed.as_str())
        .unwrap_or(0);
    let reference = &reports[r];
    let mut paired = Vec::new();
    for (i, other) in reports.iter().enumerate() {
        if i == r {
            continue;
        }
        let per_agent: BTreeMap<AgentId, f64> = other
            .per_agent
            .iter()
            .filter_map(|(id, v)| reference.per_agent.get(id).map(|rv| (id.clone(), v - rv)))
            .collect();
        let values: Vec<f64> = per_agent.values().copied().collect();
        paired.push(PairedDiff {
            reference: reference.model_tag.clone(),
            model: other.model_tag.clone(),
            summary: Summary::of(&values)?,
            per_agent,
        });
    }
    Ok(Comparison { reports, paired })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SweepParam {
    /// `q`
    ReportGap,
    /// `l`
    TrainingLen,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::ReportGap => "q",
            SweepParam::TrainingLen => "l",
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: SweepParam,
    pub value: usize,
    pub report: RmseReport,
}

/// Leave-one-out at each value of one schedule parameter, the other held at
/// `fixed`. Rows come back in ascending parameter order.
pub fn sweep(
    dataset: &[AgentRecord],
    param: SweepParam,
    fixed: usize,
    values: &[usize],
    predictor: &dyn TrustPredictor,
    search: &SearchConfig,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::EmptyInput("sweep values"));
    }
    let n = check_dataset(dataset)?;
    let values: BTreeSet<usize> = values.iter().copied().collect();
    let configs = values
        .iter()
        .map(|&v| match param {
            SweepParam::ReportGap => EvalConfig::new(fixed, v, n),
            SweepParam::TrainingLen => EvalConfig::new(v, fixed, n),
        })
        .collect::<Result<Vec<_>>>()?;
    let fits = fits_for(dataset, &[predictor], search);
    values
        .iter()
        .zip(&configs)
        .map(|(&value, config)| {
            Ok(SweepRow {
                param,
                value,
                report: leave_one_out_with_fits(dataset, fits.as_ref(), config, predictor)?,
            })
        })
        .collect()
}

/// Proposed-model sweep over report gaps at fixed training length `l`.
pub fn sweep_report_gap(dataset: &[AgentRecord], l: usize, gaps: &[usize], search: &SearchConfig) -> Result<Vec<SweepRow>> {
    sweep(dataset, SweepParam::ReportGap, l, gaps, &ProposedPredictor { search: *search }, search)
}

/// Proposed-model sweep over training lengths at fixed report gap `q`.
pub fn sweep_training_duration(
    dataset: &[AgentRecord],
    q: usize,
    durations: &[usize],
    search: &SearchConfig,
) -> Result<Vec<SweepRow>> {
    sweep(dataset, SweepParam::TrainingLen, q, durations, &ProposedPredictor { search: *search }, search)
}
