//! Small building blocks shared by the learnable modules.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::diff::{Binding, DiffError, Matrix, ParamId, ParamStore, Tape, Var};
use crate::math;

/// Glorot-uniform matrix.
pub fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let limit = math::sqrt(6.0 / (rows + cols) as f64);
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-limit..limit))
}

/// `x · w + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, input: usize, output: usize, rng: &mut R) -> Self {
        let weight = store.add(format!("{name}.weight"), glorot(input, output, rng));
        let bias = store.add(format!("{name}.bias"), Matrix::zeros(1, output));
        Self { weight, bias }
    }

    pub fn ids(&self) -> [ParamId; 2] {
        [self.weight, self.bias]
    }

    pub fn forward(&self, tape: &mut Tape, bind: &Binding, x: Var) -> Result<Var, DiffError> {
        tape.affine(x, bind.var(self.weight), bind.var(self.bias))
    }
}

/// Stack of dense layers with ReLU between them (none after the last).
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, widths: &[usize], rng: &mut R) -> Self {
        let layers =
            widths.windows(2).enumerate().map(|(i, w)| Dense::new(store, &format!("{name}.{i}"), w[0], w[1], rng)).collect();
        Self { layers }
    }

    pub fn ids(&self) -> Vec<ParamId> {
        self.layers.iter().flat_map(Dense::ids).collect()
    }

    pub fn forward(&self, tape: &mut Tape, bind: &Binding, mut x: Var) -> Result<Var, DiffError> {
        let last = self.layers.len().saturating_sub(1);
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.forward(tape, bind, x)?;
            if i < last {
                x = tape.relu(x);
            }
        }
        Ok(x)
    }
}
