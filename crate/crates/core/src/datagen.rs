//! Seeded synthetic robots, agents and populations used as ground truth.
//!
//! Every agent draws from its own streams, derived from the population seed
//! and the agent's index, so agents can be generated in any order.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::inference::clamp_to_box;
use crate::model::{clamp_trust, sample_trust, state_trajectory, Outcome, ThetaParams};
use crate::optimize::derive_seed;
use crate::prior::{Marginal, PriorModel};
use crate::record::{AgentId, AgentRecord};
use crate::{Error, Result};

/// Means of the default generating prior for (alpha0, beta0, ws, wf).
pub const DEFAULT_PRIOR_MEANS: [f64; 4] = [4.0, 2.0, 20.0, 50.0];
pub const DEFAULT_PRIOR_SHAPE: f64 = 4.0;

const STREAM_TRAITS: u64 = 1;
const STREAM_OUTCOMES: u64 = 2;
const STREAM_REPORTS: u64 = 3;
const STREAM_PHASE: u64 = 4;
/// Population-level stream for the archetype permutation; agent indices never reach it.
const STREAM_MIX: u64 = u64::MAX;

pub fn default_generating_prior() -> PriorModel {
    PriorModel::from_marginals(
        DEFAULT_PRIOR_MEANS.map(|m| Marginal::gamma_with_mean(m, DEFAULT_PRIOR_SHAPE).expect("positive")),
    )
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Archetype {
    Bayesian,
    Oscillator,
    Disbeliever,
}

impl Archetype {
    pub const ALL: [Archetype; 3] = [Archetype::Bayesian, Archetype::Oscillator, Archetype::Disbeliever];

    pub fn as_str(self) -> &'static str {
        match self {
            Archetype::Bayesian => "bayesian",
            Archetype::Oscillator => "oscillator",
            Archetype::Disbeliever => "disbeliever",
        }
    }
}

impl fmt::Display for Archetype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Archetype {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Archetype::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown archetype {s:?}")))
    }
}

/// `n` independent Bernoulli(`reliability`) task outcomes.
pub fn simulate_robot(reliability: f64, n: usize, seed: u64) -> Result<Vec<Outcome>> {
    if !(0.0..=1.0).contains(&reliability) {
        return Err(Error::Domain {
            value: reliability,
            domain: "[0, 1]",
        });
    }
    let mut rng = rng(seed);
    Ok((0..n).map(|_| Outcome::from(rng.random_bool(reliability))).collect())
}

/// Dense reports drawn from the model's Beta state after every outcome.
pub fn simulate_bayesian_agent(
    id: impl Into<AgentId>,
    theta: &ThetaParams,
    outcomes: &[Outcome],
    seed: u64,
) -> Result<AgentRecord> {
    theta.validate()?;
    let mut rng = rng(seed);
    let trust: Vec<f64> = state_trajectory(theta, outcomes)?
        .iter()
        .map(|s| sample_trust(s, &mut rng))
        .collect();
    AgentRecord::dense(id, outcomes.to_vec(), &trust)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorSpec {
    pub amplitude: f64,
    /// Period of the perturbation, in trials.
    pub period: f64,
}

impl Default for OscillatorSpec {
    fn default() -> Self {
        OscillatorSpec {
            amplitude: 0.35,
            period: 12.0,
        }
    }
}

/// Bayesian reports plus a sinusoid with a seeded phase, clamped to `[eps, 1 - eps]`.
///
/// Uses the same report stream as [`simulate_bayesian_agent`] with the same
/// seed, so only the perturbation and the clamp differ.
pub fn simulate_oscillator_agent(
    id: impl Into<AgentId>,
    base_theta: &ThetaParams,
    outcomes: &[Outcome],
    spec: &OscillatorSpec,
    seed: u64,
) -> Result<AgentRecord> {
    if !(spec.amplitude > 0.0 && spec.amplitude <= 0.5) {
        return Err(Error::Domain {
            value: spec.amplitude,
            domain: "amplitude in (0, 0.5]",
        });
    }
    if !(spec.period >= 2.0) {
        return Err(Error::Domain {
            value: spec.period,
            domain: "period >= 2",
        });
    }
    let base = simulate_bayesian_agent(id, base_theta, outcomes, seed)?;
    let phase = rng(derive_seed(seed, STREAM_PHASE)).random::<f64>() * 2.0 * PI;
    let trust: Vec<f64> = base
        .dense_trust()
        .expect("dense by construction")
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let wave = spec.amplitude * (2.0 * PI * (i + 1) as f64 / spec.period + phase).sin();
            clamp_trust(t + wave)
        })
        .collect();
    AgentRecord::dense(base.id.clone(), base.outcomes().to_vec(), &trust)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisbelieverSpec {
    pub level_min: f64,
    pub level_max: f64,
    /// Standard deviation of the per-report jitter.
    pub jitter: f64,
}

impl Default for DisbelieverSpec {
    fn default() -> Self {
        DisbelieverSpec {
            level_min: 0.02,
            level_max: 0.1,
            jitter: 0.02,
        }
    }
}

pub const MAX_DISBELIEVER_LEVEL: f64 = 0.15;
pub const MAX_DISBELIEVER_JITTER: f64 = 0.03;

/// Reports i.i.d. around a low `level`, ignoring the robot entirely.
pub fn simulate_disbeliever_agent(
    id: impl Into<AgentId>,
    level: f64,
    jitter: f64,
    outcomes: &[Outcome],
    seed: u64,
) -> Result<AgentRecord> {
    if !(level > 0.0 && level <= MAX_DISBELIEVER_LEVEL) {
        return Err(Error::Domain {
            value: level,
            domain: "level in (0, 0.15]",
        });
    }
    if !(0.0..=MAX_DISBELIEVER_JITTER).contains(&jitter) {
        return Err(Error::Domain {
            value: jitter,
            domain: "jitter in [0, 0.03]",
        });
    }
    let mut rng = rng(seed);
    let trust: Vec<f64> = outcomes
        .iter()
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            clamp_trust(level + jitter * z)
        })
        .collect();
    AgentRecord::dense(id, outcomes.to_vec(), &trust)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ThetaSource {
    Prior(PriorModel),
    /// Used cyclically by agent index.
    Explicit(Vec<ThetaParams>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub n_agents: usize,
    pub n_trials: usize,
    pub reliability: f64,
    pub theta_source: ThetaSource,
    /// Proportions of (bayesian, oscillator, disbeliever).
    pub mix: [f64; 3],
    pub oscillator: OscillatorSpec,
    pub disbeliever: DisbelieverSpec,
    pub seed: u64,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        PopulationSpec {
            n_agents: 39,
            n_trials: 100,
            reliability: 0.8,
            theta_source: ThetaSource::Prior(default_generating_prior()),
            mix: [1.0, 0.0, 0.0],
            oscillator: OscillatorSpec::default(),
            disbeliever: DisbelieverSpec::default(),
            seed: 0,
        }
    }
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 {
            return Err(Error::EmptyInput("agents"));
        }
        if self.n_trials == 0 {
            return Err(Error::EmptyInput("trials"));
        }
        if !(0.0..=1.0).contains(&self.reliability) {
            return Err(Error::Domain {
                value: self.reliability,
                domain: "reliability in [0, 1]",
            });
        }
        let total: f64 = self.mix.iter().sum();
        if self.mix.iter().any(|&p| !(p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "archetype mix {:?} must be nonnegative and sum to 1",
                self.mix
            )));
        }
        if let ThetaSource::Explicit(list) = &self.theta_source {
            if list.is_empty() {
                return Err(Error::EmptyInput("explicit theta list"));
            }
            for t in list {
                t.validate()?;
            }
        }
        let d = &self.disbeliever;
        if !(d.level_min > 0.0 && d.level_min <= d.level_max && d.level_max <= MAX_DISBELIEVER_LEVEL) {
            return Err(Error::InvalidParameter(format!("disbeliever levels {d:?}")));
        }
        Ok(())
    }

    /// Agents per archetype: `mix * n_agents` rounded by largest remainder,
    /// ties to the earlier archetype.
    pub fn archetype_counts(&self) -> [usize; 3] {
        let exact = self.mix.map(|p| p * self.n_agents as f64);
        let mut counts = exact.map(|x| x.floor() as usize);
        let mut order = [0, 1, 2];
        order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())));
        let short = self.n_agents.saturating_sub(counts.iter().sum());
        for &i in order.iter().cycle().take(short) {
            counts[i] += 1;
        }
        counts
    }

    /// Archetype of every agent: [`Self::archetype_counts`] in a seeded random order.
    pub fn archetypes(&self) -> Vec<Archetype> {
        let counts = self.archetype_counts();
        let mut all: Vec<Archetype> = Archetype::ALL
            .iter()
            .zip(counts)
            .flat_map(|(&a, c)| core::iter::repeat_n(a, c))
            .collect();
        all.shuffle(&mut rng(derive_seed(self.seed, STREAM_MIX)));
        all
    }

    fn agent_id(&self, index: usize) -> AgentId {
        let width = (self.n_agents.ilog10() as usize + 1).max(3);
        AgentId(format!("agent_{:0width$}", index + 1))
    }
}

/// Hidden generator labels; kept apart from the records models consume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub id: AgentId,
    pub archetype: Archetype,
    pub theta: Option<ThetaParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub records: Vec<AgentRecord>,
    pub labels: Vec<GroundTruth>,
}

fn draw_theta<R: Rng>(prior: &PriorModel, rng: &mut R) -> ThetaParams {
    let draw = |m: Marginal, rng: &mut R| match m {
        Marginal::Gamma { shape, rate } => Gamma::new(shape, 1.0 / rate).expect("valid gamma").sample(rng),
    };
    let a = draw(prior.alpha0, rng);
    let b = draw(prior.beta0, rng);
    let s = draw(prior.ws, rng);
    let f = draw(prior.wf, rng);
    clamp_to_box(ThetaParams::from_array([a, b, s, f]))
}

/// One agent of a population. Depends only on the spec and `index`.
///
/// `index` must be below `spec.n_agents`.
pub fn generate_agent(spec: &PopulationSpec, index: usize) -> Result<(AgentRecord, GroundTruth)> {
    let archetype = *spec.archetypes().get(index).ok_or(Error::TooFew {
        required: index + 1,
        got: spec.n_agents,
    })?;
    agent_with(spec, index, archetype)
}

fn agent_with(spec: &PopulationSpec, index: usize, archetype: Archetype) -> Result<(AgentRecord, GroundTruth)> {
    let agent_seed = derive_seed(spec.seed, index as u64);
    let id = spec.agent_id(index);
    let mut traits = rng(derive_seed(agent_seed, STREAM_TRAITS));

    let theta = match &spec.theta_source {
        ThetaSource::Prior(p) => draw_theta(p, &mut traits),
        ThetaSource::Explicit(list) => list[index % list.len()],
    };
    let outcomes = simulate_robot(spec.reliability, spec.n_trials, derive_seed(agent_seed, STREAM_OUTCOMES))?;
    let report_seed = derive_seed(agent_seed, STREAM_REPORTS);

    let (record, theta) = match archetype {
        Archetype::Bayesian => (simulate_bayesian_agent(id.clone(), &theta, &outcomes, report_seed)?, Some(theta)),
        Archetype::Oscillator => (
            simulate_oscillator_agent(id.clone(), &theta, &outcomes, &spec.oscillator, report_seed)?,
            Some(theta),
        ),
        Archetype::Disbeliever => {
            let d = &spec.disbeliever;
            let level = d.level_min + traits.random::<f64>() * (d.level_max - d.level_min);
            (
                simulate_disbeliever_agent(id.clone(), level, d.jitter, &outcomes, report_seed)?,
                None,
            )
        }
    };
    Ok((record, GroundTruth { id, archetype, theta }))
}

pub fn generate_population(spec: &PopulationSpec) -> Result<Population> {
    spec.validate()?;
    let mut records = Vec::with_capacity(spec.n_agents);
    let mut labels = Vec::with_capacity(spec.n_agents);
    for (i, a) in spec.archetypes().into_iter().enumerate() {
        let (r, l) = agent_with(spec, i, a)?;
        records.push(r);
        labels.push(l);
    }
    Ok(Population { records, labels })
}
