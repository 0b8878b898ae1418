//! Named collections of trainable matrices. Iteration order is always
//! name order, which keeps optimizer trajectories and checkpoint bytes
//! independent of construction order.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::tensor::matrix::DenseMatrix;

#[derive(Debug, Clone, Default)]
pub struct ParamStore<S> {
    entries: BTreeMap<String, DenseMatrix<S>>,
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        Self { entries: BTreeMap::new() }
    }

    pub fn insert(&mut self, name: impl Into<String>, value: DenseMatrix<S>) -> Result<()> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(Error::Contract(format!("duplicate parameter '{name}'")));
        }
        self.entries.insert(name, value);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&DenseMatrix<S>> {
        self.entries
            .get(name)
            .ok_or_else(|| Error::Lookup { kind: "parameter", name: name.to_string() })
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut DenseMatrix<S>> {
        self.entries
            .get_mut(name)
            .ok_or_else(|| Error::Lookup { kind: "parameter", name: name.to_string() })
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Name-ordered iteration.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &DenseMatrix<S>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn scalar_count(&self) -> usize {
        self.entries.values().map(DenseMatrix::len).sum()
    }

    pub fn cast<T: Scalar>(&self) -> ParamStore<T> {
        ParamStore {
            entries: self.entries.iter().map(|(k, v)| (k.clone(), v.cast())).collect(),
        }
    }
}
