use std::collections::BTreeMap;

use super::scalar::Scalar;
use super::tensor::Tensor;

/// Handle into a [`ParamSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamId(pub(super) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A named trainable tensor with its gradient accumulator.
#[derive(Clone, Debug)]
pub struct Parameter<S> {
    pub name: String,
    pub value: Tensor<S>,
    pub grad: Tensor<S>,
}

/// Ordered collection of model parameters; names are unique, insertion
/// order defines the checkpoint manifest order.
#[derive(Clone, Debug, Default)]
pub struct ParamSet<S> {
    params: Vec<Parameter<S>>,
    index: BTreeMap<String, usize>,
}

impl<S: Scalar> ParamSet<S> {
    pub fn new() -> Self {
        ParamSet {
            params: Vec::new(),
            index: BTreeMap::new(),
        }
    }

    /// Register a parameter. Panics on a duplicate name: models construct
    /// their parameter sets in code, so a collision is a bug, not input.
    pub fn add(&mut self, name: &str, value: Tensor<S>) -> ParamId {
        assert!(
            !self.index.contains_key(name),
            "duplicate parameter name `{name}`"
        );
        let id = ParamId(self.params.len());
        self.index.insert(name.to_string(), id.0);
        let grad = Tensor::zeros(value.shape());
        self.params.push(Parameter {
            name: name.to_string(),
            value,
            grad,
        });
        id
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter<S> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter<S> {
        &mut self.params[id.0]
    }

    pub fn param_at(&self, index: usize) -> &Parameter<S> {
        &self.params[index]
    }

    pub fn param_at_mut(&mut self, index: usize) -> &mut Parameter<S> {
        &mut self.params[index]
    }

    pub fn by_name(&self, name: &str) -> Option<&Parameter<S>> {
        self.index.get(name).map(|&i| &self.params[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<S>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter<S>> {
        self.params.iter_mut()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            for g in p.grad.data_mut() {
                *g = S::zero();
            }
        }
    }

    /// Total number of scalar coordinates.
    pub fn coordinate_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_and_lookup() {
        let mut ps: ParamSet<f64> = ParamSet::new();
        let id = ps.add("w", Tensor::from_vec(&[2], vec![1.0, 2.0]).unwrap());
        assert_eq!(ps.get(id).name, "w");
        assert_eq!(ps.by_name("w").unwrap().value.data(), &[1.0, 2.0]);
        assert_eq!(ps.get(id).grad.data(), &[0.0, 0.0]);
    }

    #[test]
    #[should_panic(expected = "duplicate parameter name")]
    fn duplicate_names_panic() {
        let mut ps: ParamSet<f64> = ParamSet::new();
        ps.add("w", Tensor::zeros(&[1]));
        ps.add("w", Tensor::zeros(&[1]));
    }
}
