//! Beta trust state, its outcome-driven update and closed-form analyses.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::special::ln_beta;
use crate::{Error, Result};

/// Clamp applied to reported trust before any log-density evaluation.
pub const TRUST_EPSILON: f64 = 1e-3;

/// Clamp a trust value into `[TRUST_EPSILON, 1 - TRUST_EPSILON]`.
#[inline]
pub fn clamp_trust(t: f64) -> f64 {
    t.max(TRUST_EPSILON).min(1.0 - TRUST_EPSILON)
}

/// Robot task outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Failure,
    Success,
}

impl Outcome {
    pub fn is_success(self) -> bool {
        matches!(self, Outcome::Success)
    }

    pub fn as_u8(self) -> u8 {
        self.is_success() as u8
    }
}

impl From<bool> for Outcome {
    fn from(success: bool) -> Self {
        if success {
            Outcome::Success
        } else {
            Outcome::Failure
        }
    }
}

impl TryFrom<u8> for Outcome {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Outcome::Failure),
            1 => Ok(Outcome::Success),
            _ => Err(Error::Domain {
                value: v as f64,
                domain: "{0, 1}",
            }),
        }
    }
}

/// Per-agent trust-dynamics parameters.
///
/// `alpha0`/`beta0` are the initial positive/negative experience masses,
/// `ws`/`wf` the mass added on each robot success/failure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaParams {
    pub alpha0: f64,
    pub beta0: f64,
    pub ws: f64,
    pub wf: f64,
}

impl ThetaParams {
    /// Initial masses must be positive; gains may be zero (a frozen agent).
    pub fn new(alpha0: f64, beta0: f64, ws: f64, wf: f64) -> Result<Self> {
        let theta = ThetaParams {
            alpha0,
            beta0,
            ws,
            wf,
        };
        theta.validate()?;
        Ok(theta)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha0.is_finite()
            && self.beta0.is_finite()
            && self.ws.is_finite()
            && self.wf.is_finite()
            && self.alpha0 > 0.0
            && self.beta0 > 0.0
            && self.ws >= 0.0
            && self.wf >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(alloc::format!("{self:?}")))
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.alpha0, self.beta0, self.ws, self.wf]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        ThetaParams {
            alpha0: a[0],
            beta0: a[1],
            ws: a[2],
            wf: a[3],
        }
    }

    /// State after `successes` and `failures` outcomes, in any order.
    #[inline]
    pub fn state_after(&self, successes: f64, failures: f64) -> BetaState {
        BetaState {
            alpha: self.alpha0 + self.ws * successes,
            beta: self.beta0 + self.wf * failures,
        }
    }
}

/// Parameters of the current Beta trust distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaState {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaState {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if alpha.is_finite() && beta.is_finite() && alpha > 0.0 && beta > 0.0 {
            Ok(BetaState { alpha, beta })
        } else {
            Err(Error::InvalidParameter(alloc::format!(
                "beta state ({alpha}, {beta})"
            )))
        }
    }

    /// Total experience mass `alpha + beta`.
    #[inline]
    pub fn mass(&self) -> f64 {
        self.alpha + self.beta
    }
}

pub fn init_state(theta: &ThetaParams) -> BetaState {
    BetaState {
        alpha: theta.alpha0,
        beta: theta.beta0,
    }
}

/// One step of the dynamics: a success adds `ws` to `alpha`, a failure adds `wf` to `beta`.
#[inline]
pub fn update_state(state: BetaState, outcome: Outcome, theta: &ThetaParams) -> BetaState {
    match outcome {
        Outcome::Success => BetaState {
            alpha: state.alpha + theta.ws,
            beta: state.beta,
        },
        Outcome::Failure => BetaState {
            alpha: state.alpha,
            beta: state.beta + theta.wf,
        },
    }
}

/// Predicted trust: the mean of the Beta distribution.
#[inline]
pub fn predict_trust(state: &BetaState) -> f64 {
    state.alpha / (state.alpha + state.beta)
}

/// Beta states after each outcome, starting from `init_state(theta)`.
pub fn state_trajectory(theta: &ThetaParams, outcomes: &[Outcome]) -> Result<Vec<BetaState>> {
    if outcomes.is_empty() {
        return Err(Error::EmptyInput("outcomes"));
    }
    let mut state = init_state(theta);
    Ok(outcomes
        .iter()
        .map(|&o| {
            state = update_state(state, o, theta);
            state
        })
        .collect())
}

/// Predicted trust after each outcome. Element `i` reflects outcomes `0..=i`.
pub fn trust_trajectory(theta: &ThetaParams, outcomes: &[Outcome]) -> Result<Vec<f64>> {
    Ok(state_trajectory(theta, outcomes)?
        .iter()
        .map(predict_trust)
        .collect())
}

/// Trust rise on a success minus trust drop on a failure, from `state`.
///
/// Negative means a failure moves trust more than a success does.
pub fn asymmetry_gap(state: &BetaState, theta: &ThetaParams) -> f64 {
    let d = state.mass();
    (theta.ws * state.beta / (d + theta.ws) - theta.wf * state.alpha / (d + theta.wf)) / d
}

/// Whether a failure changes trust strictly more than a success would.
pub fn failure_dominates(state: &BetaState, theta: &ThetaParams) -> bool {
    let d = state.mass();
    let (ws, wf) = (theta.ws, theta.wf);
    // alpha/beta > (ws d + ws wf)/(wf d + ws wf), cross-multiplied (all terms positive)
    state.alpha * (wf * d + ws * wf) > state.beta * (ws * d + ws * wf)
}

/// Limit of predicted trust under a robot of constant `reliability`.
pub fn asymptotic_trust(theta: &ThetaParams, reliability: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&reliability) {
        return Err(Error::Domain {
            value: reliability,
            domain: "[0, 1]",
        });
    }
    let gain_s = reliability * theta.ws;
    let denom = gain_s + (1.0 - reliability) * theta.wf;
    if denom <= 0.0 {
        return Err(Error::InvalidParameter(alloc::format!(
            "no expected gain at reliability {reliability} with ws={}, wf={}",
            theta.ws,
            theta.wf
        )));
    }
    Ok(gain_s / denom)
}

/// Log Beta density of a (clamped) trust value.
#[inline]
pub fn trust_log_density(t: f64, state: &BetaState) -> f64 {
    let t = clamp_trust(t);
    beta_log_density_terms(t.ln(), (1.0 - t).ln(), state.alpha, state.beta)
}

#[inline]
pub(crate) fn beta_log_density_terms(ln_t: f64, ln_1mt: f64, a: f64, b: f64) -> f64 {
    (a - 1.0) * ln_t + (b - 1.0) * ln_1mt - ln_beta(a, b)
}

/// Draw a trust value from `Beta(alpha, beta)`.
pub fn sample_trust<R: Rng + ?Sized>(state: &BetaState, rng: &mut R) -> f64 {
    // parameters are validated positive by construction of BetaState
    let dist = Beta::new(state.alpha, state.beta).expect("positive Beta parameters");
    dist.sample(rng)
}
