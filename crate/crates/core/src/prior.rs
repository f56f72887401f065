//! Population prior over the four trust parameters: independent Gamma marginals.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::ThetaParams;
use crate::special::{digamma, gamma_quantile, ln_gamma, trigamma};
use crate::{Error, Result};

/// Smallest variance allowed for the log of a fitted marginal.
pub const LOG_VARIANCE_FLOOR: f64 = 1e-4;

/// A positive-support, unimodal marginal distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Marginal {
    Gamma { shape: f64, rate: f64 },
}

impl Marginal {
    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        if shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite() {
            Ok(Marginal::Gamma { shape, rate })
        } else {
            Err(Error::InvalidParameter(alloc::format!(
                "gamma(shape={shape}, rate={rate})"
            )))
        }
    }

    /// Checks parameters of a marginal built without [`Marginal::gamma`], e.g. deserialized.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Marginal::Gamma { shape, rate } => Self::gamma(shape, rate).map(|_| ()),
        }
    }

    /// Gamma marginal with the given mean and shape.
    pub fn gamma_with_mean(mean: f64, shape: f64) -> Result<Self> {
        Self::gamma(shape, shape / mean)
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        match *self {
            Marginal::Gamma { shape, rate } => {
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Marginal::Gamma { shape, rate } => shape / rate,
        }
    }

    pub fn median(&self) -> f64 {
        match *self {
            Marginal::Gamma { shape, rate } => gamma_quantile(0.5, shape, rate),
        }
    }

    /// Density maximum; falls back to the median when the density peaks at zero.
    pub fn mode(&self) -> f64 {
        match *self {
            Marginal::Gamma { shape, rate } if shape > 1.0 => (shape - 1.0) / rate,
            _ => self.median(),
        }
    }

    pub fn variance_of_log(&self) -> f64 {
        match *self {
            Marginal::Gamma { shape, .. } => trigamma(shape),
        }
    }

    /// Maximum-likelihood Gamma fit.
    ///
    /// The shape is capped so that the variance of `ln x` never drops below
    /// [`LOG_VARIANCE_FLOOR`], which keeps identical samples from producing a
    /// point mass.
    pub fn fit_gamma(samples: &[f64]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::TooFew {
                required: 2,
                got: samples.len(),
            });
        }
        if let Some(&bad) = samples.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::Domain {
                value: bad,
                domain: "(0, inf)",
            });
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let mean_log = samples.iter().map(|x| x.ln()).sum::<f64>() / n;
        let s = mean.ln() - mean_log;
        let max_shape = max_shape_for_floor();

        let shape = if s <= 0.0 {
            max_shape
        } else {
            // Minka's closed-form start, then Newton on ln k - digamma(k) = s
            let mut k = (3.0 - s + ((s - 3.0) * (s - 3.0) + 24.0 * s).sqrt()) / (12.0 * s);
            for _ in 0..100 {
                let g = k.ln() - digamma(k) - s;
                let dg = 1.0 / k - trigamma(k);
                let mut next = k - g / dg;
                if !(next > 0.0) {
                    next = 0.5 * k;
                }
                let done = (next - k).abs() <= 1e-14 * k;
                k = next;
                if done || k > max_shape {
                    break;
                }
            }
            k.min(max_shape)
        };
        Self::gamma(shape, shape / mean)
    }
}

fn max_shape_for_floor() -> f64 {
    // trigamma is decreasing: find k with trigamma(k) = floor
    let (mut lo, mut hi) = (1.0f64, 1e9f64);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if trigamma(mid) > LOG_VARIANCE_FLOOR {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Independent marginals for `alpha0`, `beta0`, `ws`, `wf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorModel {
    pub alpha0: Marginal,
    pub beta0: Marginal,
    pub ws: Marginal,
    pub wf: Marginal,
}

impl PriorModel {
    pub fn marginals(&self) -> [Marginal; 4] {
        [self.alpha0, self.beta0, self.ws, self.wf]
    }

    pub fn validate(&self) -> Result<()> {
        self.marginals().iter().try_for_each(Marginal::validate)
    }

    pub fn from_marginals(m: [Marginal; 4]) -> Self {
        PriorModel {
            alpha0: m[0],
            beta0: m[1],
            ws: m[2],
            wf: m[3],
        }
    }

    /// Sum of the four marginal log-densities.
    pub fn log_density(&self, theta: &ThetaParams) -> f64 {
        self.marginals()
            .iter()
            .zip(theta.to_array())
            .map(|(m, x)| m.ln_pdf(x))
            .sum()
    }

    pub fn mode(&self) -> ThetaParams {
        ThetaParams::from_array(self.marginals().map(|m| m.mode()))
    }

    pub fn mean(&self) -> ThetaParams {
        ThetaParams::from_array(self.marginals().map(|m| m.mean()))
    }

    /// Fit each marginal independently to per-agent parameter estimates.
    pub fn fit(samples: &[ThetaParams]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::TooFew {
                required: 2,
                got: samples.len(),
            });
        }
        let mut out = Vec::with_capacity(4);
        for c in 0..4 {
            let column: Vec<f64> = samples.iter().map(|t| t.to_array()[c]).collect();
            out.push(Marginal::fit_gamma(&column)?);
        }
        Ok(Self::from_marginals([out[0], out[1], out[2], out[3]]))
    }
}
