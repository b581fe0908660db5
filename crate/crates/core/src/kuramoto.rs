//! Phase-coupled Kuramoto oscillators as an expert-demonstration generator.
//!
//! Each sequence integrates
//!
//! ```text
//! dθ_i/dt = ω_i + (K/n) · Σ_j C[j,i] · sin(θ_j − θ_i)
//! ```
//!
//! with classic RK4, where `C` is a sampled DAG (`C[j,i] = 1` means `j` drives
//! `i`). Observed features are `sin θ`. The last oscillators play the actions,
//! the rest are states, and `C` is the ground truth over that joint node set.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diff::Matrix;
use crate::graph::Adjacency;
use crate::math;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DataError {
    #[error("unknown scale '{0}' (expected kura5, kura10 or kura50)")]
    UnknownScale(alloc::string::String),
    #[error("unknown mode '{0}' (expected static or vary)")]
    UnknownMode(alloc::string::String),
    #[error("phase became non-finite at step {step}")]
    NonFinite { step: usize },
    #[error("invalid dataset configuration: {0}")]
    Config(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Kura5,
    Kura10,
    Kura50,
}

impl Scale {
    /// `(state oscillators, action oscillators)`.
    pub fn dims(self) -> (usize, usize) {
        match self {
            Scale::Kura5 => (4, 1),
            Scale::Kura10 => (8, 2),
            Scale::Kura50 => (42, 8),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scale::Kura5 => "kura5",
            Scale::Kura10 => "kura10",
            Scale::Kura50 => "kura50",
        }
    }
}

impl FromStr for Scale {
    type Err = DataError;
    fn from_str(s: &str) -> Result<Self, DataError> {
        match s {
            "kura5" => Ok(Scale::Kura5),
            "kura10" => Ok(Scale::Kura10),
            "kura50" => Ok(Scale::Kura50),
            other => Err(DataError::UnknownScale(other.into())),
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Static,
    Vary,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Static => "static",
            Mode::Vary => "vary",
        }
    }
}

impl FromStr for Mode {
    type Err = DataError;
    fn from_str(s: &str) -> Result<Self, DataError> {
        match s {
            "static" => Ok(Mode::Static),
            "vary" => Ok(Mode::Vary),
            other => Err(DataError::UnknownMode(other.into())),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = DataError;
    fn from_str(s: &str) -> Result<Self, DataError> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(DataError::Config("split must be train, val or test")),
        }
    }
}

/// Train : validation : test proportions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRatio(pub [u32; 3]);

impl Default for SplitRatio {
    fn default() -> Self {
        SplitRatio([2, 3, 5])
    }
}

impl SplitRatio {
    /// Assigns `count` sequences in index order: train first, then validation,
    /// test takes the remainder.
    pub fn assign(&self, count: usize) -> Vec<Split> {
        let total: u64 = self.0.iter().map(|&x| u64::from(x)).sum();
        let train = (count as u64 * u64::from(self.0[0]) / total) as usize;
        let val = (count as u64 * u64::from(self.0[1]) / total) as usize;
        (0..count)
            .map(|i| if i < train { Split::Train } else if i < train + val { Split::Val } else { Split::Test })
            .collect()
    }
}

impl FromStr for SplitRatio {
    type Err = DataError;
    fn from_str(s: &str) -> Result<Self, DataError> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(DataError::Config("split ratio must look like 2:3:5"));
        }
        let mut out = [0u32; 3];
        for (o, p) in out.iter_mut().zip(parts) {
            *o = p.trim().parse().map_err(|_| DataError::Config("split ratio parts must be integers"))?;
        }
        if out.iter().all(|&x| x == 0) {
            return Err(DataError::Config("split ratio must not be all zero"));
        }
        Ok(SplitRatio(out))
    }
}

impl fmt::Display for SplitRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.0[0], self.0[1], self.0[2])
    }
}

/// Draws a random node order, then keeps each order-consistent pair with
/// probability `edge_prob`.
pub fn sample_dag<R: Rng + ?Sized>(n: usize, edge_prob: f64, rng: &mut R) -> Adjacency {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut adj = Adjacency::empty(n);
    for a in 0..n {
        for b in (a + 1)..n {
            if rng.random::<f64>() < edge_prob {
                adj.set(order[a], order[b], true);
            }
        }
    }
    adj
}

#[derive(Clone, Debug, PartialEq)]
pub struct OscillatorSystem {
    pub omega: Vec<f64>,
    pub coupling: Adjacency,
    pub strength: f64,
    pub dt: f64,
}

impl OscillatorSystem {
    pub fn n(&self) -> usize {
        self.omega.len()
    }

    /// Integrates `steps − 1` RK4 steps from `init`; row `t` holds the
    /// unwrapped phases after `t` steps.
    pub fn simulate(&self, steps: usize, init: &[f64]) -> Result<Matrix, DataError> {
        let schedule = alloc::vec![0; steps.saturating_sub(1)];
        simulate_switching(&self.omega, core::slice::from_ref(&self.coupling), &schedule, self.strength, self.dt, init)
    }
}

fn phase_velocity(omega: &[f64], coupling: &Adjacency, gain: f64, theta: &[f64], out: &mut [f64]) {
    let n = omega.len();
    for i in 0..n {
        let mut pull = 0.0;
        for j in 0..n {
            if coupling.has_edge(j, i) {
                pull += math::sin(theta[j] - theta[i]);
            }
        }
        out[i] = omega[i] + gain * pull;
    }
}

/// RK4 integration where transition `t → t+1` uses `couplings[schedule[t]]`.
pub fn simulate_switching(
    omega: &[f64],
    couplings: &[Adjacency],
    schedule: &[usize],
    strength: f64,
    dt: f64,
    init: &[f64],
) -> Result<Matrix, DataError> {
    let n = omega.len();
    if init.len() != n || couplings.iter().any(|c| c.n() != n) {
        return Err(DataError::Config("oscillator count mismatch"));
    }
    if !(dt > 0.0) || !(strength >= 0.0) {
        return Err(DataError::Config("dt must be positive and K non-negative"));
    }
    if schedule.is_empty() {
        return Err(DataError::Config("need at least two steps"));
    }
    let steps = schedule.len() + 1;
    let gain = strength / n as f64;
    let mut phases = Matrix::zeros(steps, n);
    phases.row_mut(0).copy_from_slice(init);
    let mut theta = init.to_vec();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (alloc::vec![0.0; n], alloc::vec![0.0; n], alloc::vec![0.0; n], alloc::vec![0.0; n], alloc::vec![0.0; n]);
    for (t, &regime) in schedule.iter().enumerate() {
        let c = &couplings[regime];
        phase_velocity(omega, c, gain, &theta, &mut k1);
        for i in 0..n {
            tmp[i] = theta[i] + 0.5 * dt * k1[i];
        }
        phase_velocity(omega, c, gain, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = theta[i] + 0.5 * dt * k2[i];
        }
        phase_velocity(omega, c, gain, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = theta[i] + dt * k3[i];
        }
        phase_velocity(omega, c, gain, &tmp, &mut k4);
        for i in 0..n {
            theta[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            if !theta[i].is_finite() {
                return Err(DataError::NonFinite { step: t + 1 });
            }
        }
        phases.row_mut(t + 1).copy_from_slice(&theta);
    }
    Ok(phases)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub scale: Scale,
    pub mode: Mode,
    pub seed: u64,
    pub sequences: usize,
    pub steps: usize,
    pub split: SplitRatio,
    /// Coupling gain `K`.
    pub strength: f64,
    pub dt: f64,
    /// Integration steps per recorded step.
    pub observe_every: usize,
    pub omega_min: f64,
    pub omega_max: f64,
    pub edge_prob: f64,
    /// Candidate graphs in vary mode.
    pub candidates: usize,
    pub segment_min: usize,
    pub segment_max: usize,
}

impl DatasetConfig {
    pub fn new(scale: Scale, mode: Mode, seed: u64) -> Self {
        Self {
            scale,
            mode,
            seed,
            sequences: 500,
            steps: 100,
            split: SplitRatio::default(),
            strength: 2.0,
            dt: 0.05,
            observe_every: 10,
            omega_min: 1.0,
            omega_max: 3.0,
            edge_prob: 0.5,
            candidates: 3,
            segment_min: 25,
            segment_max: 50,
        }
    }

    fn validate(&self) -> Result<(), DataError> {
        if self.steps < 2 {
            return Err(DataError::Config("sequences need at least 2 steps"));
        }
        if self.sequences == 0 {
            return Err(DataError::Config("need at least one sequence"));
        }
        if self.observe_every == 0 {
            return Err(DataError::Config("observe_every must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.edge_prob) {
            return Err(DataError::Config("edge_prob must lie in [0, 1]"));
        }
        if !(self.omega_max >= self.omega_min) {
            return Err(DataError::Config("omega range is empty"));
        }
        if self.mode == Mode::Vary {
            if self.candidates < 2 {
                return Err(DataError::Config("vary mode needs at least two candidate graphs"));
            }
            if self.segment_min == 0 || self.segment_min > self.segment_max || 2 * self.segment_min > self.segment_max + 1 {
                return Err(DataError::Config("segment bounds must satisfy 1 ≤ min and 2·min ≤ max + 1"));
            }
            if self.steps < self.segment_min {
                return Err(DataError::Config("vary mode needs steps ≥ segment_min"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sequence {
    /// `T × n_state`.
    pub states: Matrix,
    /// `T × n_action`.
    pub actions: Matrix,
    /// Index into the dataset's ground-truth graphs for every step.
    pub regimes: Vec<usize>,
    pub split: Split,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.states.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.states.rows() == 0
    }

    /// Actions shifted down one step, with zeros at `t = 0`.
    pub fn previous_actions(&self) -> Matrix {
        let (steps, na) = self.actions.shape();
        Matrix::from_fn(steps, na, |t, k| if t == 0 { 0.0 } else { self.actions.get(t - 1, k) })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDataset {
    pub scale: Scale,
    pub mode: Mode,
    pub seed: u64,
    pub n_state: usize,
    pub n_action: usize,
    /// Over the joint node order: states `0..n_state`, then actions.
    pub gt_graphs: Vec<Adjacency>,
    pub sequences: Vec<Sequence>,
}

impl TrajectoryDataset {
    pub fn n_nodes(&self) -> usize {
        self.n_state + self.n_action
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Sequence> {
        self.sequences.iter().filter(move |s| s.split == split)
    }

    pub fn split_indices(&self, split: Split) -> Vec<usize> {
        self.sequences.iter().enumerate().filter(|(_, s)| s.split == split).map(|(i, _)| i).collect()
    }

    /// Checks the structural invariants a loaded file must satisfy.
    pub fn validate(&self) -> Result<(), DataError> {
        let n = self.n_nodes();
        if self.gt_graphs.is_empty() || self.gt_graphs.iter().any(|g| g.n() != n) {
            return Err(DataError::Config("ground-truth graphs must be n×n over states and actions"));
        }
        if self.mode == Mode::Static && self.gt_graphs.len() != 1 {
            return Err(DataError::Config("static datasets carry exactly one ground-truth graph"));
        }
        for s in &self.sequences {
            if s.states.cols() != self.n_state || s.actions.cols() != self.n_action {
                return Err(DataError::Config("sequence dimensions disagree with the header"));
            }
            if s.actions.rows() != s.states.rows() || s.regimes.len() != s.states.rows() {
                return Err(DataError::Config("sequence fields have different lengths"));
            }
            if s.states.rows() < 2 {
                return Err(DataError::Config("sequences need at least 2 steps"));
            }
            if s.regimes.iter().any(|&r| r >= self.gt_graphs.len()) {
                return Err(DataError::Config("regime label out of range"));
            }
        }
        Ok(())
    }
}

/// Contiguous segment lengths covering `steps`, each within `[min, max]`.
fn segment_lengths<R: Rng + ?Sized>(steps: usize, min: usize, max: usize, rng: &mut R) -> Vec<usize> {
    let mut out = Vec::new();
    let mut remaining = steps;
    while remaining > 0 {
        let len = if remaining <= max { remaining } else { rng.random_range(min..=max.min(remaining - min)) };
        out.push(len);
        remaining -= len;
    }
    out
}

pub fn make_dataset(config: &DatasetConfig) -> Result<TrajectoryDataset, DataError> {
    config.validate()?;
    let (n_state, n_action) = config.scale.dims();
    let n = n_state + n_action;
    let mut graph_rng = ChaCha8Rng::seed_from_u64(config.seed);
    graph_rng.set_stream(1);
    let candidate_count = match config.mode {
        Mode::Static => 1,
        Mode::Vary => config.candidates,
    };
    let gt_graphs: Vec<Adjacency> =
        (0..candidate_count).map(|_| sample_dag(n, config.edge_prob, &mut graph_rng)).collect();
    let splits = config.split.assign(config.sequences);

    let mut sequences = Vec::with_capacity(config.sequences);
    for (index, split) in splits.into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(index as u64));
        let omega: Vec<f64> = (0..n).map(|_| rng.random_range(config.omega_min..=config.omega_max)).collect();
        let init: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 * PI).collect();
        let regimes = match config.mode {
            Mode::Static => alloc::vec![0; config.steps],
            Mode::Vary => {
                let mut labels = Vec::with_capacity(config.steps);
                let mut previous: Option<usize> = None;
                for len in segment_lengths(config.steps, config.segment_min, config.segment_max, &mut rng) {
                    // a new segment never repeats its predecessor, so label runs stay within bounds
                    let pick = match previous {
                        None => rng.random_range(0..candidate_count),
                        Some(p) => (p + 1 + rng.random_range(0..candidate_count - 1)) % candidate_count,
                    };
                    labels.extend(core::iter::repeat_n(pick, len));
                    previous = Some(pick);
                }
                labels
            }
        };
        let every = config.observe_every;
        let fine: Vec<usize> =
            regimes[..config.steps - 1].iter().flat_map(|&r| core::iter::repeat_n(r, every)).collect();
        let phases = simulate_switching(&omega, &gt_graphs, &fine, config.strength, config.dt, &init)?;
        let states = Matrix::from_fn(config.steps, n_state, |t, j| math::sin(phases.get(t * every, j)));
        let actions = Matrix::from_fn(config.steps, n_action, |t, k| math::sin(phases.get(t * every, n_state + k)));
        sequences.push(Sequence { states, actions, regimes, split });
    }

    Ok(TrajectoryDataset {
        scale: config.scale,
        mode: config.mode,
        seed: config.seed,
        n_state,
        n_action,
        gt_graphs,
        sequences,
    })
}
