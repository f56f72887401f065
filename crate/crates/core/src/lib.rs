//! Beta-distribution trust dynamics for human-robot teaming.
//!
//! A human agent's trust after the robot's `i`-th task is modeled as
//! `Beta(alpha_i, beta_i)`. Successes add `ws` to `alpha`, failures add `wf`
//! to `beta`, and the predicted trust is the Beta mean. The four parameters
//! `(alpha0, beta0, ws, wf)` are personalized per agent by MAP estimation
//! against a population prior learned from previously observed agents.
//!
//! The crate is `no_std` (it needs `alloc`). File formats and the command-line
//! front end live in the `trustdyn` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod baselines;
pub mod clustering;
pub mod datagen;
mod error;
pub mod evaluation;
pub mod inference;
pub mod model;
pub mod optimize;
pub mod prior;
pub mod record;
pub mod special;

pub use error::{Error, Result};
pub use model::{BetaState, Outcome, ThetaParams, TRUST_EPSILON};
pub use prior::{Marginal, PriorModel};
pub use record::{AgentId, AgentRecord};
