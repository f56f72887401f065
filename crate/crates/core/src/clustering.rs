//! Trust-dynamics typology: per-agent features, k-means with an elbow
//! choice of `k`, and archetype labels for three clusters.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::Archetype;
use crate::model::TRUST_EPSILON;
use crate::optimize::derive_seed;
use crate::record::AgentRecord;
use crate::{Error, Result};

/// Floor on a feature's standard deviation during normalization.
pub const SD_FLOOR: f64 = 1e-9;
pub const KMEANS_RESTARTS: usize = 10;
pub const KMEANS_MAX_ITER: usize = 300;
/// An elbow is low-confidence when the drop after it exceeds this fraction
/// of the drop into it.
pub const ELBOW_DROP_RATIO: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub rmse: f64,
    pub avg_log_trust: f64,
}

impl FeatureVector {
    pub fn to_array(self) -> [f64; 2] {
        [self.rmse, self.avg_log_trust]
    }

    pub fn from_array(a: [f64; 2]) -> Self {
        FeatureVector {
            rmse: a[0],
            avg_log_trust: a[1],
        }
    }
}

/// Mean of `ln t` with each value raised to at least the trust epsilon.
pub fn avg_log_trust(reports: &[f64]) -> f64 {
    reports.iter().map(|&t| t.max(TRUST_EPSILON).ln()).sum::<f64>() / reports.len() as f64
}

pub fn compute_features(record: &AgentRecord, rmse: f64) -> Result<FeatureVector> {
    let trust = record.dense_trust().map_err(Error::MissingTruth)?;
    if !(rmse.is_finite() && rmse >= 0.0) {
        return Err(Error::Domain {
            value: rmse,
            domain: "rmse >= 0",
        });
    }
    Ok(FeatureVector {
        rmse,
        avg_log_trust: avg_log_trust(&trust),
    })
}

/// Per-component mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub means: [f64; 2],
    pub sds: [f64; 2],
}

impl Normalization {
    pub fn apply(&self, f: &FeatureVector) -> [f64; 2] {
        let a = f.to_array();
        [0, 1].map(|j| (a[j] - self.means[j]) / self.sds[j])
    }

    pub fn invert(&self, z: &[f64; 2]) -> FeatureVector {
        FeatureVector::from_array([0, 1].map(|j| z[j] * self.sds[j] + self.means[j]))
    }
}

/// z-scores using the population (1/N) standard deviation, floored at [`SD_FLOOR`].
pub fn zscore_normalize(features: &[FeatureVector]) -> Result<(Vec<[f64; 2]>, Normalization)> {
    if features.len() < 2 {
        return Err(Error::TooFew {
            required: 2,
            got: features.len(),
        });
    }
    let n = features.len() as f64;
    let mut means = [0.0; 2];
    let mut sds = [0.0; 2];
    for j in 0..2 {
        means[j] = features.iter().map(|f| f.to_array()[j]).sum::<f64>() / n;
        let var = features
            .iter()
            .map(|f| (f.to_array()[j] - means[j]).powi(2))
            .sum::<f64>()
            / n;
        sds[j] = var.sqrt().max(SD_FLOOR);
    }
    let norm = Normalization { means, sds };
    Ok((features.iter().map(|f| norm.apply(f)).collect(), norm))
}

#[inline]
fn sq_dist<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid; ties go to the lower index.
fn nearest<const D: usize>(p: &[f64; D], centroids: &[[f64; D]]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(p, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult<const D: usize> {
    pub k: usize,
    /// Cluster index for each input point, in input order.
    pub assignments: Vec<usize>,
    pub centroids: Vec<[f64; D]>,
    /// Sum of squared point-to-centroid distances.
    pub within_cluster_variance: f64,
    /// Variance after each assignment step of the winning run.
    pub history: Vec<f64>,
}

fn kmeans_plus_plus<const D: usize>(points: &[[f64; D]], k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; D]> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..points.len())]);
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..points.len())
        };
        centroids.push(points[idx]);
        for (p, d) in points.iter().zip(d2.iter_mut()) {
            *d = d.min(sq_dist(p, &points[idx]));
        }
    }
    centroids
}

fn lloyd<const D: usize>(points: &[[f64; D]], mut centroids: Vec<[f64; D]>) -> ClusterResult<D> {
    let k = centroids.len();
    let mut assignments = alloc::vec![usize::MAX; points.len()];
    let mut history = Vec::new();
    for _ in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        let mut variance = 0.0;
        for (p, a) in points.iter().zip(assignments.iter_mut()) {
            let (c, d) = nearest(p, &centroids);
            variance += d;
            if *a != c {
                *a = c;
                changed = true;
            }
        }
        history.push(variance);
        if !changed {
            break;
        }
        let mut sums = alloc::vec![[0.0; D]; k];
        let mut counts = alloc::vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            for j in 0..D {
                sums[a][j] += p[j];
            }
        }
        for c in 0..k {
            // An emptied cluster keeps its old centroid.
            if counts[c] > 0 {
                centroids[c] = sums[c].map(|s| s / counts[c] as f64);
            }
        }
    }
    let within_cluster_variance = points
        .iter()
        .zip(&assignments)
        .map(|(p, &a)| sq_dist(p, &centroids[a]))
        .sum();
    ClusterResult {
        k,
        assignments,
        centroids,
        within_cluster_variance,
        history,
    }
}

/// Best of [`KMEANS_RESTARTS`] k-means++ initialized Lloyd runs.
pub fn kmeans<const D: usize>(points: &[[f64; D]], k: usize, seed: u64) -> Result<ClusterResult<D>> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if k > points.len() {
        return Err(Error::TooFew {
            required: k,
            got: points.len(),
        });
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("points must be finite".into()));
    }
    let mut best: Option<ClusterResult<D>> = None;
    for restart in 0..KMEANS_RESTARTS {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, restart as u64));
        let run = lloyd(points, kmeans_plus_plus(points, k, &mut rng));
        if best
            .as_ref()
            .map_or(true, |b| run.within_cluster_variance < b.within_cluster_variance)
        {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElbowFlag {
    /// Fewer than three values of `k`; the minimum-variance `k` was returned.
    NoCurvature,
    /// The variance keeps dropping substantially past the chosen `k`.
    LowConfidence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElbowResult<const D: usize> {
    pub k: usize,
    /// `(k, within-cluster variance)` for every `k` tried, ascending.
    pub curve: Vec<(usize, f64)>,
    pub flag: Option<ElbowFlag>,
    pub result: ClusterResult<D>,
}

/// Pick `k` by the largest discrete second difference of the variance curve.
pub fn elbow_select<const D: usize>(points: &[[f64; D]], k_range: &[usize], seed: u64) -> Result<ElbowResult<D>> {
    let mut ks: Vec<usize> = k_range.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() {
        return Err(Error::EmptyInput("k range"));
    }
    let results = ks
        .iter()
        .map(|&k| kmeans(points, k, derive_seed(seed, k as u64)))
        .collect::<Result<Vec<_>>>()?;
    let curve: Vec<(usize, f64)> = ks
        .iter()
        .zip(&results)
        .map(|(&k, r)| (k, r.within_cluster_variance))
        .collect();
    let v: Vec<f64> = curve.iter().map(|c| c.1).collect();

    let (pick, flag) = if ks.len() < 3 {
        let i = (0..v.len()).fold(0, |b, i| if v[i] < v[b] { i } else { b });
        (i, Some(ElbowFlag::NoCurvature))
    } else {
        let mut pick = 1;
        for i in 2..v.len() - 1 {
            if v[i - 1] - 2.0 * v[i] + v[i + 1] > v[pick - 1] - 2.0 * v[pick] + v[pick + 1] {
                pick = i;
            }
        }
        let before = v[pick - 1] - v[pick];
        let after = v[pick] - v[pick + 1];
        let weak = !(before > 0.0) || after > ELBOW_DROP_RATIO * before;
        (pick, weak.then_some(ElbowFlag::LowConfidence))
    };
    let result = results.into_iter().nth(pick).expect("pick in range");
    Ok(ElbowResult {
        k: ks[pick],
        curve,
        flag,
        result,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchetypeLabels {
    /// Archetype of each cluster, by cluster index.
    pub by_cluster: Vec<Archetype>,
    /// Set when the disbeliever choice had to break a tie on average log trust.
    pub tie_broken: bool,
}

/// Two average log trusts closer than this are a tie.
pub const LABEL_TIE_TOLERANCE: f64 = 1e-9;

/// Label three clusters from their centroids in raw feature space.
///
/// The disbeliever cluster has the lowest average log trust (ties go to the
/// lower RMSE), the oscillator has the highest RMSE of the other two, and the
/// remaining cluster is the Bayesian decision maker.
pub fn label_archetypes(centroids: &[FeatureVector]) -> Result<ArchetypeLabels> {
    if centroids.len() != 3 {
        return Err(Error::InvalidParameter(alloc::format!(
            "archetype labels need exactly 3 clusters, got {}",
            centroids.len()
        )));
    }
    let lowest = centroids
        .iter()
        .map(|c| c.avg_log_trust)
        .fold(f64::INFINITY, f64::min);
    let tied: Vec<usize> = (0..3)
        .filter(|&i| centroids[i].avg_log_trust - lowest <= LABEL_TIE_TOLERANCE)
        .collect();
    let disbeliever = tied
        .iter()
        .copied()
        .min_by(|&a, &b| centroids[a].rmse.total_cmp(&centroids[b].rmse))
        .expect("non-empty");
    let rest: Vec<usize> = (0..3).filter(|&i| i != disbeliever).collect();
    let oscillator = if centroids[rest[1]].rmse > centroids[rest[0]].rmse {
        rest[1]
    } else {
        rest[0]
    };
    let by_cluster = (0..3)
        .map(|i| {
            if i == disbeliever {
                Archetype::Disbeliever
            } else if i == oscillator {
                Archetype::Oscillator
            } else {
                Archetype::Bayesian
            }
        })
        .collect();
    Ok(ArchetypeLabels {
        by_cluster,
        tie_broken: tied.len() > 1,
    })
}

/// Fraction of agents whose assigned archetype matches the true one.
pub fn label_purity(assigned: &[Archetype], truth: &[Archetype]) -> Result<f64> {
    if assigned.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: assigned.len(),
            right: truth.len(),
        });
    }
    if assigned.is_empty() {
        return Err(Error::EmptyInput("labels"));
    }
    let hits = assigned.iter().zip(truth).filter(|(a, t)| a == t).count();
    Ok(hits as f64 / assigned.len() as f64)
}

/// How [`cluster_typology`] picks the number of clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KChoice {
    Elbow(Vec<usize>),
    Fixed(usize),
}

/// Full typology run over raw features.
#[derive(Debug, Clone, PartialEq)]
pub struct Typology {
    pub normalization: Normalization,
    pub k: usize,
    /// Elbow curve; empty when `k` was fixed.
    pub curve: Vec<(usize, f64)>,
    pub flag: Option<ElbowFlag>,
    pub result: ClusterResult<2>,
    /// Centroids in raw feature space, by cluster index.
    pub centroids: Vec<FeatureVector>,
    /// Present only for three clusters.
    pub labels: Option<ArchetypeLabels>,
}

impl Typology {
    /// Archetype of each input agent, if labels exist.
    pub fn agent_archetypes(&self) -> Option<Vec<Archetype>> {
        let labels = self.labels.as_ref()?;
        Some(self.result.assignments.iter().map(|&c| labels.by_cluster[c]).collect())
    }
}

/// Normalize, cluster and, for three clusters, label.
pub fn cluster_typology(features: &[FeatureVector], choice: &KChoice, seed: u64) -> Result<Typology> {
    let (points, normalization) = zscore_normalize(features)?;
    let (curve, flag, result) = match choice {
        KChoice::Elbow(range) => {
            let e = elbow_select(&points, range, seed)?;
            (e.curve, e.flag, e.result)
        }
        KChoice::Fixed(k) => (Vec::new(), None, kmeans(&points, *k, derive_seed(seed, *k as u64))?),
    };
    let centroids: Vec<FeatureVector> = result.centroids.iter().map(|z| normalization.invert(z)).collect();
    let labels = if result.k == 3 {
        Some(label_archetypes(&centroids)?)
    } else {
        None
    };
    Ok(Typology {
        normalization,
        k: result.k,
        curve,
        flag,
        result,
        centroids,
        labels,
    })
}
