use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::{Graph, Scalar, Var};

/// One learnable tensor with its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
    /// `None` until a backward pass has been collected.
    pub grad: Option<Vec<f32>>,
}

impl Param {
    pub fn numel(&self) -> usize {
        self.data.len()
    }
}

/// Named parameters in deterministic (lexicographic) order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: BTreeMap<String, Param>,
}

/// Graph handles of every parameter bound into one graph.
#[derive(Debug, Clone, Default)]
pub struct Bindings {
    vars: BTreeMap<String, Var>,
}

impl Bindings {
    pub fn get(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("parameter {name} is not bound")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Var)> {
        self.vars.iter().map(|(k, &v)| (k.as_str(), v))
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        data: Vec<f32>,
    ) -> Result<()> {
        let name = name.into();
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "{name}: shape {shape:?} does not hold {} values",
                data.len()
            )));
        }
        if self.params.contains_key(&name) {
            return Err(Error::InvalidArgument(format!(
                "duplicate parameter {name}"
            )));
        }
        self.params.insert(
            name,
            Param {
                shape: shape.to_vec(),
                data,
                grad: None,
            },
        );
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param> {
        self.params.get_mut(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Param)> {
        self.params.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    /// Total scalar count across all tensors.
    pub fn count(&self) -> usize {
        self.params.values().map(Param::numel).sum()
    }

    /// Parameters whose name starts with `prefix`.
    pub fn count_prefix(&self, prefix: &str) -> usize {
        self.params
            .iter()
            .filter(|(k, _)| k.starts_with(prefix))
            .map(|(_, p)| p.numel())
            .sum()
    }

    pub fn zero_grad(&mut self) {
        self.params.values_mut().for_each(|p| p.grad = None);
    }

    /// Records every parameter as a `requires_grad` leaf of `g`.
    pub fn bind<T: Scalar>(&self, g: &mut Graph<T>) -> Bindings {
        let vars = self
            .params
            .iter()
            .map(|(name, p)| {
                let data = p.data.iter().map(|&v| T::of(v as f64)).collect();
                let var = g
                    .param(&p.shape, data)
                    .expect("stored shapes are consistent");
                (name.clone(), var)
            })
            .collect();
        Bindings { vars }
    }

    /// Adds `scale ·` the graph gradients into the stored gradients.
    ///
    /// Parameters the backward pass did not reach receive zeros, so after
    /// any collection every gradient is populated.
    pub fn accumulate_grads<T: Scalar>(&mut self, g: &Graph<T>, bindings: &Bindings, scale: f32) {
        for (name, var) in bindings.iter() {
            let Some(p) = self.params.get_mut(name) else {
                continue;
            };
            let slot = p.grad.get_or_insert_with(|| vec![0.0; p.data.len()]);
            if let Some(src) = g.grad(var) {
                for (s, &d) in slot.iter_mut().zip(src) {
                    *s += scale * d.f64() as f32;
                }
            }
        }
    }

    /// Euclidean norm of all gradients taken together.
    pub fn grad_norm(&self) -> f64 {
        self.params
            .values()
            .filter_map(|p| p.grad.as_ref())
            .flat_map(|g| g.iter())
            .map(|&v| (v as f64) * (v as f64))
            .sum::<f64>()
            .sqrt()
    }
}
