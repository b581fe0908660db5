//! Regime pre-clustering: k-means with k-means++ seeding over standardised
//! `[s_t, a_{t−1}]` features, producing the per-step group labels `q_t`.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kuramoto::{Split, TrajectoryDataset};
use crate::math;

pub const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClusterError {
    #[error("need at least {wanted} distinct points, found {found}")]
    TooFewPoints { wanted: usize, found: usize },
    #[error("cluster count must be positive")]
    ZeroClusters,
    #[error("points have inconsistent dimensions")]
    Ragged,
}

/// Fitted centroids plus the standardisation learned alongside them.
#[derive(Clone, Debug, PartialEq)]
pub struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best_d {
            best_d = d;
            best = k;
        }
    }
    best
}

fn count_distinct(points: &[Vec<f64>], limit: usize) -> usize {
    let mut seen: Vec<&Vec<f64>> = Vec::new();
    for p in points {
        if !seen.contains(&p) {
            seen.push(p);
            if seen.len() >= limit {
                break;
            }
        }
    }
    seen.len()
}

impl KMeans {
    /// Standardises `points` per dimension (unit scale kept for constant
    /// dimensions), seeds with k-means++ and runs Lloyd iterations until
    /// assignments stop changing or [`MAX_ITERATIONS`] is reached.
    pub fn fit(points: &[Vec<f64>], k: usize, seed: u64) -> Result<Self, ClusterError> {
        if k == 0 {
            return Err(ClusterError::ZeroClusters);
        }
        let dim = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return Err(ClusterError::Ragged);
        }
        let found = count_distinct(points, k);
        if found < k {
            return Err(ClusterError::TooFewPoints { wanted: k, found });
        }
        let count = points.len() as f64;
        let mut mean = vec![0.0; dim];
        for p in points {
            for (m, x) in mean.iter_mut().zip(p) {
                *m += x / count;
            }
        }
        let mut scale = vec![0.0; dim];
        for p in points {
            for ((s, x), m) in scale.iter_mut().zip(p).zip(&mean) {
                *s += (x - m) * (x - m) / count;
            }
        }
        for s in &mut scale {
            *s = if *s > 0.0 { math::sqrt(*s) } else { 1.0 };
        }
        let mut model = Self { centroids: Vec::new(), mean, scale, iterations: 0 };
        let data: Vec<Vec<f64>> = points.iter().map(|p| model.standardise(p)).collect();

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut centroids = vec![data[rng.random_range(0..data.len())].clone()];
        let mut dist: Vec<f64> = data.iter().map(|p| sq_dist(p, &centroids[0])).collect();
        while centroids.len() < k {
            let total: f64 = dist.iter().sum();
            let mut pick = data.len() - 1;
            if total > 0.0 {
                let mut target = rng.random::<f64>() * total;
                for (i, d) in dist.iter().enumerate() {
                    if *d > 0.0 && target < *d {
                        pick = i;
                        break;
                    }
                    target -= d;
                }
                if dist[pick] == 0.0 {
                    pick = dist.iter().rposition(|d| *d > 0.0).expect("positive mass");
                }
            }
            let chosen = data[pick].clone();
            for (d, p) in dist.iter_mut().zip(&data) {
                *d = d.min(sq_dist(p, &chosen));
            }
            centroids.push(chosen);
        }

        let mut labels = vec![usize::MAX; data.len()];
        for iteration in 1..=MAX_ITERATIONS {
            model.iterations = iteration;
            let mut changed = false;
            for (l, p) in labels.iter_mut().zip(&data) {
                let best = nearest(p, &centroids);
                if *l != best {
                    *l = best;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            let mut sums = vec![vec![0.0; dim]; k];
            let mut counts = vec![0usize; k];
            for (l, p) in labels.iter().zip(&data) {
                counts[*l] += 1;
                for (s, x) in sums[*l].iter_mut().zip(p) {
                    *s += x;
                }
            }
            for ((c, s), n) in centroids.iter_mut().zip(sums).zip(&counts) {
                // an emptied cluster keeps its previous centroid
                if *n > 0 {
                    *c = s.into_iter().map(|x| x / *n as f64).collect();
                }
            }
        }
        model.centroids = centroids;
        Ok(model)
    }

    pub fn standardise(&self, point: &[f64]) -> Vec<f64> {
        point.iter().zip(&self.mean).zip(&self.scale).map(|((x, m), s)| (x - m) / s).collect()
    }

    pub fn predict(&self, point: &[f64]) -> usize {
        nearest(&self.standardise(point), &self.centroids)
    }
}

/// `[s_t, a_{t−1}]` for every step of a sequence, `a_{−1} = 0`.
pub fn step_features(states: &crate::diff::Matrix, prev_actions: &crate::diff::Matrix) -> Vec<Vec<f64>> {
    (0..states.rows()).map(|t| states.row(t).iter().chain(prev_actions.row(t)).copied().collect()).collect()
}

/// Fits on the training split and labels every step of every sequence.
pub fn cluster_regimes(dataset: &TrajectoryDataset, groups: usize, seed: u64) -> Result<Vec<Vec<usize>>, ClusterError> {
    let features: Vec<Vec<Vec<f64>>> =
        dataset.sequences.iter().map(|s| step_features(&s.states, &s.previous_actions())).collect();
    let train: Vec<Vec<f64>> = dataset
        .sequences
        .iter()
        .zip(&features)
        .filter(|(s, _)| s.split == Split::Train)
        .flat_map(|(_, f)| f.iter().cloned())
        .collect();
    let model = KMeans::fit(&train, groups, seed)?;
    Ok(features.iter().map(|f| f.iter().map(|p| model.predict(p)).collect()).collect())
}
