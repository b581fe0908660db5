use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{Matrix, Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named learnable matrices, addressed by insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Matrix>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    pub fn total_len(&self) -> usize {
        self.values.iter().map(Matrix::len).sum()
    }

    /// Places `ids` on `tape`, as leaves when `trainable`, otherwise as constants.
    pub fn bind(&self, tape: &mut Tape, ids: &[ParamId], trainable: bool) -> Binding {
        let mut binding = Binding { vars: vec![None; self.values.len()] };
        binding.extend(self, tape, ids, trainable);
        binding
    }
}

/// Map from parameters to the tape variables standing in for them.
#[derive(Clone, Debug)]
pub struct Binding {
    vars: Vec<Option<Var>>,
}

impl Binding {
    pub fn extend(&mut self, store: &ParamStore, tape: &mut Tape, ids: &[ParamId], trainable: bool) {
        for &id in ids {
            let value = store.get(id).clone();
            self.vars[id.0] = Some(if trainable { tape.leaf(value) } else { tape.constant(value) });
        }
    }

    /// Panics if `id` was never bound: forward code must bind what it reads.
    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0].unwrap_or_else(|| panic!("parameter {} not bound on this tape", id.0))
    }

    /// Gradients of every bound leaf after [`Tape::backward`], indexed by parameter.
    pub fn grads(&self, tape: &Tape) -> Vec<Option<Matrix>> {
        self.vars.iter().map(|v| v.and_then(|v| tape.grad(v).cloned())).collect()
    }
}
