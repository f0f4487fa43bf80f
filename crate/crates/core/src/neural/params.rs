use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Position and shape of one named tensor inside the flat vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSlice {
    pub name: String,
    pub offset: usize,
    pub shape: Vec<usize>,
}

impl ParamSlice {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Flat parameter vector with named slices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub values: Vec<f64>,
    pub layout: Vec<ParamSlice>,
}

impl ModelParams {
    /// Zero-filled parameters for `(name, shape)` entries in order.
    pub fn zeros(entries: &[(&str, Vec<usize>)]) -> Self {
        let mut offset = 0;
        let layout: Vec<ParamSlice> = entries
            .iter()
            .map(|(name, shape)| {
                let s = ParamSlice {
                    name: name.to_string(),
                    offset,
                    shape: shape.clone(),
                };
                offset += s.len();
                s
            })
            .collect();
        Self {
            values: vec![0.0; offset],
            layout,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn slice_info(&self, name: &str) -> Result<&ParamSlice> {
        self.layout
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::invalid(format!("no parameter named {name:?}")))
    }

    pub fn range(&self, name: &str) -> Range<usize> {
        self.slice_info(name).expect("parameter name from model layout").range()
    }

    pub fn get(&self, name: &str) -> &[f64] {
        &self.values[self.range(name)]
    }

    pub fn get_mut(&mut self, name: &str) -> &mut [f64] {
        let r = self.range(name);
        &mut self.values[r]
    }

    pub fn fill(&mut self, name: &str, v: f64) {
        self.get_mut(name).fill(v);
    }

    pub fn fill_uniform<R: Rng + ?Sized>(&mut self, name: &str, bound: f64, rng: &mut R) {
        for p in self.get_mut(name) {
            *p = rng.random_range(-bound..bound);
        }
    }

    /// Same names and shapes as `other`.
    pub fn check_layout(&self, other: &[ParamSlice]) -> Result<()> {
        if self.layout != other {
            return Err(Error::Shape("parameter layout differs from model".into()));
        }
        Ok(())
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::Numerical(format!("non-finite parameter at index {i}"))),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_offsets_are_contiguous() {
        let mut p = ModelParams::zeros(&[("a", vec![2, 3]), ("b", vec![4])]);
        assert_eq!(p.len(), 10);
        assert_eq!(p.range("b"), 6..10);
        p.fill("b", 1.5);
        assert_eq!(p.get("b"), &[1.5; 4]);
        assert!(p.get("a").iter().all(|v| *v == 0.0));
        assert!(p.slice_info("c").is_err());
    }
}
