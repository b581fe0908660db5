use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::diff::Matrix;

/// Directed binary adjacency over `n` nodes; entry `[j, i]` set means `j → i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Adjacency {
    n: usize,
    edges: Vec<bool>,
}

impl Adjacency {
    pub fn empty(n: usize) -> Self {
        Self { n, edges: vec![false; n * n] }
    }

    /// Entries with `|w| ≥ threshold` off the diagonal become edges.
    pub fn from_weights(weights: &Matrix, threshold: f64) -> Self {
        let n = weights.rows();
        let mut adj = Self::empty(n);
        for j in 0..n {
            for i in 0..n {
                if i != j && weights.get(j, i).abs() >= threshold && weights.get(j, i) != 0.0 {
                    adj.set(j, i, true);
                }
            }
        }
        adj
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Option<Self> {
        let n = rows.len();
        let mut adj = Self::empty(n);
        for (j, row) in rows.iter().enumerate() {
            if row.len() != n {
                return None;
            }
            for (i, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 => adj.set(j, i, true),
                    _ => return None,
                }
            }
        }
        Some(adj)
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.n).map(|j| (0..self.n).map(|i| u8::from(self.has_edge(j, i))).collect()).collect()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.edges[from * self.n + to]
    }

    pub fn set(&mut self, from: usize, to: usize, present: bool) {
        self.edges[from * self.n + to] = present;
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().filter(|e| **e).count()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |j| (0..self.n).filter(move |&i| self.has_edge(j, i)).map(move |i| (j, i)))
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_fn(self.n, self.n, |j, i| if self.has_edge(j, i) { 1.0 } else { 0.0 })
    }

    /// Kahn's algorithm; `None` when a directed cycle (or self-loop) exists.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.n;
        let mut indegree = vec![0usize; n];
        for (_, i) in self.edges() {
            indegree[i] += 1;
        }
        let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(j) = ready.pop() {
            order.push(j);
            for i in 0..n {
                if self.has_edge(j, i) {
                    indegree[i] -= 1;
                    if indegree[i] == 0 {
                        ready.push(i);
                    }
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }
}
