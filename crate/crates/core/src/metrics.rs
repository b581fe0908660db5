//! Evaluation: edge AUROC, template-to-truth matching, teacher-forced action
//! error and selection accuracy.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::diff::{DiffError, Matrix};
use crate::graph::Adjacency;
use crate::kuramoto::{Split, TrajectoryDataset};
use crate::model::CailModel;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("score matrix is {got:?}, ground truth has {nodes} nodes")]
    Dimension { got: (usize, usize), nodes: usize },
    #[error(transparent)]
    Model(#[from] DiffError),
    #[error("split {0} holds no sequences")]
    EmptySplit(&'static str),
}

/// Rank-based AUROC of `|scores|` against `gt` over off-diagonal pairs.
/// Ties count one half. `None` when every pair is positive or every pair is
/// negative.
pub fn auroc(scores: &Matrix, gt: &Adjacency) -> Result<Option<f64>, MetricError> {
    let n = gt.n();
    if scores.shape() != (n, n) {
        return Err(MetricError::Dimension { got: scores.shape(), nodes: n });
    }
    let mut pairs: Vec<(f64, bool)> = Vec::with_capacity(n * n.saturating_sub(1));
    for j in 0..n {
        for k in 0..n {
            if j != k {
                pairs.push((scores.get(j, k).abs(), gt.has_edge(j, k)));
            }
        }
    }
    let positives = pairs.iter().filter(|p| p.1).count();
    let negatives = pairs.len() - positives;
    if positives == 0 || negatives == 0 {
        return Ok(None);
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // sum of average ranks (1-based) of positive pairs
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        let mut j = i;
        while j + 1 < pairs.len() && pairs[j + 1].0 == pairs[i].0 {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += avg_rank * pairs[i..=j].iter().filter(|p| p.1).count() as f64;
        i = j + 1;
    }
    let (p, q) = (positives as f64, negatives as f64);
    Ok(Some((rank_sum - p * (p + 1.0) / 2.0) / (p * q)))
}

/// Best template-to-truth correspondence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    /// `(template index, ground-truth index)` pairs.
    pub pairs: Vec<(usize, usize)>,
    /// AUROC of each pair, `None` when undefined.
    pub aurocs: Vec<Option<f64>>,
    pub mean_auroc: Option<f64>,
}

impl Matching {
    pub fn truth_of(&self, template: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == template).map(|p| p.1)
    }
}

fn injections(domain: usize, codomain: usize, out: &mut Vec<Vec<usize>>) {
    fn rec(domain: usize, codomain: usize, used: &mut Vec<bool>, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == domain {
            out.push(cur.clone());
            return;
        }
        for k in 0..codomain {
            if !used[k] {
                used[k] = true;
                cur.push(k);
                rec(domain, codomain, used, cur, out);
                cur.pop();
                used[k] = false;
            }
        }
    }
    rec(domain, codomain, &mut vec![false; codomain], &mut Vec::new(), out);
}

fn mean_defined(values: &[Option<f64>]) -> Option<f64> {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

/// Exhaustive search over injective assignments from the smaller side to the
/// larger one, maximising the mean per-pair AUROC. Ties keep the first
/// assignment in lexicographic order.
pub fn match_templates(templates: &[Matrix], truth: &[Adjacency]) -> Result<Matching, MetricError> {
    let table: Vec<Vec<Option<f64>>> =
        templates.iter().map(|g| truth.iter().map(|t| auroc(g, t)).collect::<Result<_, _>>()).collect::<Result<_, _>>()?;
    let flip = templates.len() > truth.len();
    let (domain, codomain) = if flip { (truth.len(), templates.len()) } else { (templates.len(), truth.len()) };
    let mut candidates = Vec::new();
    injections(domain, codomain, &mut candidates);
    let mut best: Option<Matching> = None;
    for cand in candidates {
        let pairs: Vec<(usize, usize)> =
            cand.iter().enumerate().map(|(a, &b)| if flip { (b, a) } else { (a, b) }).collect();
        let aurocs: Vec<Option<f64>> = pairs.iter().map(|&(i, k)| table[i][k]).collect();
        let mean_auroc = mean_defined(&aurocs);
        let better = match &best {
            None => true,
            Some(b) => mean_auroc.unwrap_or(f64::NEG_INFINITY) > b.mean_auroc.unwrap_or(f64::NEG_INFINITY),
        };
        if better {
            best = Some(Matching { pairs, aurocs, mean_auroc });
        }
    }
    Ok(best.unwrap_or(Matching { pairs: Vec::new(), aurocs: Vec::new(), mean_auroc: None }))
}

/// Frozen-model outputs for every sequence of a split.
#[derive(Clone, Debug)]
pub struct SplitPredictions {
    pub indices: Vec<usize>,
    pub alphas: Vec<Option<Matrix>>,
    pub graphs: Vec<Option<Matrix>>,
    pub actions: Vec<Matrix>,
}

pub fn predict_split(model: &CailModel, dataset: &TrajectoryDataset, split: Split) -> Result<SplitPredictions, MetricError> {
    let indices = dataset.split_indices(split);
    if indices.is_empty() {
        return Err(MetricError::EmptySplit(split.as_str()));
    }
    let mut out = SplitPredictions { indices: Vec::new(), alphas: Vec::new(), graphs: Vec::new(), actions: Vec::new() };
    for &i in &indices {
        let seq = &dataset.sequences[i];
        let inf = model.infer(&seq.states, &seq.previous_actions())?;
        out.alphas.push(inf.alpha);
        out.graphs.push(inf.graphs);
        out.actions.push(inf.action_means);
    }
    out.indices = indices;
    Ok(out)
}

/// Mean squared difference between predicted means and expert actions.
pub fn action_error(pred: &SplitPredictions, dataset: &TrajectoryDataset) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for (&i, means) in pred.indices.iter().zip(&pred.actions) {
        for (m, a) in means.as_slice().iter().zip(dataset.sequences[i].actions.as_slice()) {
            total += (m - a) * (m - a);
            count += 1;
        }
    }
    total / count.max(1) as f64
}

/// Closed-loop variant: states stay teacher-forced but `a_{t−1}` is the
/// model's own previous prediction (zero at `t = 0`).
pub fn closed_loop_action_error(model: &CailModel, dataset: &TrajectoryDataset, split: Split) -> Result<f64, MetricError> {
    let mut total = 0.0;
    let mut count = 0usize;
    let na = dataset.n_action;
    for seq in dataset.split(split) {
        let steps = seq.len();
        let mut prev = Matrix::zeros(steps, na);
        for t in 0..steps {
            let states = Matrix::from_fn(t + 1, dataset.n_state, |r, c| seq.states.get(r, c));
            let prefix = Matrix::from_fn(t + 1, na, |r, c| prev.get(r, c));
            let inf = model.infer(&states, &prefix)?;
            for k in 0..na {
                let m = inf.action_means.get(t, k);
                let a = seq.actions.get(t, k);
                total += (m - a) * (m - a);
                count += 1;
                if t + 1 < steps {
                    prev.set(t + 1, k, m);
                }
            }
        }
    }
    if count == 0 {
        return Err(MetricError::EmptySplit(split.as_str()));
    }
    Ok(total / count as f64)
}

/// Time-averaged `|G_t|` over every step of the split.
pub fn static_edge_scores(pred: &SplitPredictions, nodes: usize) -> Option<Matrix> {
    let mut acc = Matrix::zeros(nodes, nodes);
    let mut steps = 0usize;
    for g in pred.graphs.iter().flatten() {
        for t in 0..g.rows() {
            for (a, v) in acc.as_mut_slice().iter_mut().zip(g.row(t)) {
                *a += v.abs();
            }
            steps += 1;
        }
    }
    (steps > 0).then(|| {
        acc.scale_assign(1.0 / steps as f64);
        acc
    })
}

/// Fraction of steps whose arg-max template maps to the active regime.
pub fn selection_accuracy(pred: &SplitPredictions, dataset: &TrajectoryDataset, matching: &Matching) -> Option<f64> {
    let mut hits = 0usize;
    let mut total = 0usize;
    for (&i, alpha) in pred.indices.iter().zip(&pred.alphas) {
        let alpha = alpha.as_ref()?;
        for (t, &regime) in dataset.sequences[i].regimes.iter().enumerate() {
            let row = alpha.row(t);
            let arg = (0..row.len()).fold(0, |b, k| if row[k] > row[b] { k } else { b });
            if matching.truth_of(arg) == Some(regime) {
                hits += 1;
            }
            total += 1;
        }
    }
    (total > 0).then(|| hits as f64 / total as f64)
}

/// Metrics of a frozen model on one split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub split: Split,
    pub static_auroc: Option<f64>,
    pub dynamic_auroc: Option<f64>,
    pub assignment: Vec<(usize, usize)>,
    pub template_aurocs: Vec<Option<f64>>,
    pub selection_accuracy: Option<f64>,
    pub action_mse: f64,
    pub action_mse_closed_loop: Option<f64>,
}

pub fn evaluate(
    model: &CailModel,
    dataset: &TrajectoryDataset,
    split: Split,
    closed_loop: bool,
) -> Result<EvalMetrics, MetricError> {
    let pred = predict_split(model, dataset, split)?;
    let action_mse = action_error(&pred, dataset);
    let action_mse_closed_loop = if closed_loop { Some(closed_loop_action_error(model, dataset, split)?) } else { None };
    let templates = model.templates();
    let (static_auroc, matching) = if templates.is_empty() {
        (None, None)
    } else {
        let stat = match (dataset.gt_graphs.len(), static_edge_scores(&pred, dataset.n_nodes())) {
            (1, Some(scores)) => auroc(&scores, &dataset.gt_graphs[0])?,
            _ => None,
        };
        (stat, Some(match_templates(&templates, &dataset.gt_graphs)?))
    };
    let selection_accuracy = matching.as_ref().and_then(|m| selection_accuracy(&pred, dataset, m));
    Ok(EvalMetrics {
        split,
        static_auroc,
        dynamic_auroc: matching.as_ref().and_then(|m| m.mean_auroc),
        assignment: matching.as_ref().map(|m| m.pairs.clone()).unwrap_or_default(),
        template_aurocs: matching.map(|m| m.aurocs).unwrap_or_default(),
        selection_accuracy,
        action_mse,
        action_mse_closed_loop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> Adjacency {
        let mut g = Adjacency::empty(3);
        g.set(0, 1, true);
        g.set(1, 2, true);
        g
    }

    #[test]
    fn perfect_and_tied_scores() {
        let gt = chain();
        let scores = Matrix::from_fn(3, 3, |j, k| if gt.has_edge(j, k) { 0.9 } else { 0.1 });
        assert_eq!(auroc(&scores, &gt).unwrap(), Some(1.0));
        assert_eq!(auroc(&Matrix::filled(3, 3, 0.4), &gt).unwrap(), Some(0.5));
        assert_eq!(auroc(&scores, &Adjacency::empty(3)).unwrap(), None);
        assert!(auroc(&Matrix::zeros(2, 2), &gt).is_err());
    }

    #[test]
    fn matching_recovers_permutation() {
        let a = chain();
        let mut b = Adjacency::empty(3);
        b.set(2, 0, true);
        let bank = [b.to_matrix(), a.to_matrix()];
        let m = match_templates(&bank, &[a.clone(), b.clone()]).unwrap();
        assert_eq!(m.pairs, vec![(0, 1), (1, 0)]);
        assert_eq!(m.mean_auroc, Some(1.0));
        let single = match_templates(&bank[1..], core::slice::from_ref(&a)).unwrap();
        assert_eq!(single.mean_auroc, auroc(&bank[1], &a).unwrap());
        let wide = match_templates(&bank, &[b]).unwrap();
        assert_eq!(wide.pairs, vec![(0, 0)]);
    }
}
