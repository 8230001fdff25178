//! Named parameters with gradients and ADAM moments.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{shape_ensure, NeuralError, Result};
use crate::graph::Gradients;
use crate::tensor::{Real, Shape, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub value: Tensor<T>,
    pub grad: Option<Tensor<T>>,
    pub m: Tensor<T>,
    pub v: Tensor<T>,
}

impl<T: Real> Param<T> {
    pub fn new(value: Tensor<T>) -> Self {
        let shape = value.shape();
        Param {
            value,
            grad: None,
            m: Tensor::zeros(shape),
            v: Tensor::zeros(shape),
        }
    }
}

/// Parameters keyed by name, iterated in name order.
///
/// `step` is the ADAM time step shared by all parameters; `iteration` is the
/// trainer's progress counter saved alongside it in checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<T> {
    params: BTreeMap<String, Param<T>>,
    pub step: u64,
    pub iteration: u64,
    pub rng_seed: u64,
}

impl<T: Real> ParamStore<T> {
    pub fn new(rng_seed: u64) -> Self {
        ParamStore {
            params: BTreeMap::new(),
            step: 0,
            iteration: 0,
            rng_seed,
        }
    }

    /// Adds a parameter drawn from He-uniform, `U(-b, b)` with
    /// `b = sqrt(6 / fan_in)` and `fan_in = shape[1] * shape[2] * shape[3]`.
    pub fn add_he_uniform(&mut self, name: &str, shape: Shape) -> Result<()> {
        self.add_fan_in_uniform(name, shape, 6.0)
    }

    /// `U(-b, b)` with `b = sqrt(gain / fan_in)`. The stream depends only on
    /// the store seed and the name, so insertion order does not matter.
    pub fn add_fan_in_uniform(&mut self, name: &str, shape: Shape, gain: f64) -> Result<()> {
        let fan_in = shape[1] * shape[2] * shape[3];
        shape_ensure!(fan_in > 0, "parameter {name:?} has zero fan-in");
        shape_ensure!(gain > 0.0, "parameter {name:?}: gain must be positive");
        let bound = (gain / fan_in as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed ^ name_hash(name));
        let t = Tensor::from_fn(shape, |_| T::lit(rng.random_range(-bound..bound)));
        self.insert(name, t)
    }

    pub fn add_zeros(&mut self, name: &str, shape: Shape) -> Result<()> {
        self.insert(name, Tensor::zeros(shape))
    }

    pub fn insert(&mut self, name: &str, value: Tensor<T>) -> Result<()> {
        if self.params.contains_key(name) {
            return Err(NeuralError::Contract(format!("parameter {name:?} already exists")));
        }
        self.params.insert(name.to_owned(), Param::new(value));
        Ok(())
    }

    /// Inserts a fully specified parameter (used when loading checkpoints).
    pub fn insert_param(&mut self, name: &str, param: Param<T>) -> Result<()> {
        let s = param.value.shape();
        shape_ensure!(
            param.m.shape() == s && param.v.shape() == s && param.grad.as_ref().is_none_or(|g| g.shape() == s),
            "parameter {name:?}: state shapes differ from value shape {s:?}"
        );
        if self.params.contains_key(name) {
            return Err(NeuralError::Contract(format!("parameter {name:?} already exists")));
        }
        self.params.insert(name.to_owned(), param);
        Ok(())
    }

    pub fn value(&self, name: &str) -> Option<&Tensor<T>> {
        self.params.get(name).map(|p| &p.value)
    }

    pub fn value_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.params.get_mut(name).map(|p| &mut p.value)
    }

    pub fn get(&self, name: &str) -> Option<&Param<T>> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param<T>> {
        self.params.get_mut(name)
    }

    pub fn grad(&self, name: &str) -> Option<&Tensor<T>> {
        self.params.get(name).and_then(|p| p.grad.as_ref())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param<T>)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Param<T>)> {
        self.params.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.params.values().map(|p| p.value.len()).sum()
    }

    /// Sets every gradient to zero (allocating where absent).
    pub fn zero_grad(&mut self) {
        for p in self.params.values_mut() {
            match &mut p.grad {
                Some(g) => g.fill(T::zero()),
                slot @ None => *slot = Some(Tensor::zeros(p.value.shape())),
            }
        }
    }

    /// Adds `scale * grads` into the stored gradients. Repeated calls
    /// accumulate; parameters absent from `grads` get a zero contribution.
    pub fn accumulate(&mut self, grads: &Gradients<T>, scale: T) -> Result<()> {
        for (name, g) in grads.params() {
            let p = self
                .params
                .get_mut(name)
                .ok_or_else(|| NeuralError::UnknownParam(name.clone()))?;
            shape_ensure!(
                g.shape() == p.value.shape(),
                "gradient for {name:?} has shape {:?}, parameter {:?}",
                g.shape(),
                p.value.shape()
            );
            let dst = p.grad.get_or_insert_with(|| Tensor::zeros(g.shape()));
            for (d, &s) in dst.data_mut().iter_mut().zip(g.data()) {
                *d += scale * s;
            }
        }
        for p in self.params.values_mut() {
            if p.grad.is_none() {
                p.grad = Some(Tensor::zeros(p.value.shape()));
            }
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|(k, p)| {
                    (
                        k.clone(),
                        Param {
                            value: p.value.cast(),
                            grad: p.grad.as_ref().map(Tensor::cast),
                            m: p.m.cast(),
                            v: p.v.cast(),
                        },
                    )
                })
                .collect(),
            step: self.step,
            iteration: self.iteration,
            rng_seed: self.rng_seed,
        }
    }
}

/// FNV-1a, stable across platforms and releases.
fn name_hash(name: &str) -> u64 {
    name.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}
