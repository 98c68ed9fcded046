use std::collections::BTreeMap;
use std::fmt;

use super::Tensor;

/// Identifies one learnable tensor: the module (or other owner) it
/// belongs to and its slot within that owner.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct ParamId {
    pub owner: u32,
    pub slot: u8,
}

impl ParamId {
    pub const fn new(owner: u32, slot: u8) -> Self {
        Self { owner, slot }
    }
}

impl fmt::Display for ParamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.owner, self.slot)
    }
}

/// A collection of learnable tensors addressable by [`ParamId`].
pub trait Parameters {
    /// Every parameter id, in a stable order.
    fn param_ids(&self) -> Vec<ParamId>;
    fn param(&self, id: ParamId) -> Option<&Tensor>;
    fn param_mut(&mut self, id: ParamId) -> Option<&mut Tensor>;
}

impl Parameters for BTreeMap<ParamId, Tensor> {
    fn param_ids(&self) -> Vec<ParamId> {
        self.keys().copied().collect()
    }

    fn param(&self, id: ParamId) -> Option<&Tensor> {
        self.get(&id)
    }

    fn param_mut(&mut self, id: ParamId) -> Option<&mut Tensor> {
        self.get_mut(&id)
    }
}

/// Gradient of a scalar loss with respect to each parameter on a tape.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gradients {
    grads: BTreeMap<ParamId, Tensor>,
}

impl Gradients {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.grads.get(&id)
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        self.grads.iter().map(|(k, v)| (*k, v))
    }

    /// Add `grad` into the entry for `id`, creating it if absent.
    pub fn add(&mut self, id: ParamId, grad: &Tensor) {
        match self.grads.get_mut(&id) {
            Some(existing) => existing.add_assign(grad),
            None => {
                self.grads.insert(id, grad.clone());
            }
        }
    }

    pub fn insert(&mut self, id: ParamId, grad: Tensor) {
        self.grads.insert(id, grad);
    }

    /// Sum another gradient map into this one.
    pub fn accumulate(&mut self, other: &Gradients) {
        for (id, g) in other.iter() {
            self.add(id, g);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.grads.values_mut().for_each(|g| g.scale(factor));
    }

    pub fn into_inner(self) -> BTreeMap<ParamId, Tensor> {
        self.grads
    }
}

impl FromIterator<(ParamId, Tensor)> for Gradients {
    fn from_iter<I: IntoIterator<Item = (ParamId, Tensor)>>(iter: I) -> Self {
        let mut g = Gradients::new();
        for (id, t) in iter {
            g.add(id, &t);
        }
        g
    }
}
