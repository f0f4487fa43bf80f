//! Two linear layers with a sigmoid in between, on fixed feature vectors.

use ndarray::{Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::ModelParams;
use super::{sigmoid, Model};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mlp2Config {
    pub in_features: usize,
    pub hidden_units: usize,
    pub n_outputs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp2 {
    pub config: Mlp2Config,
    pub params: ModelParams,
}

impl Mlp2 {
    pub fn new(config: Mlp2Config, seed: u64) -> Result<Self> {
        if config.in_features == 0 || config.hidden_units == 0 || config.n_outputs == 0 {
            return Err(Error::invalid("MLP dimensions must be positive"));
        }
        let (i, h, o) = (config.in_features, config.hidden_units, config.n_outputs);
        let mut params = ModelParams::zeros(&[
            ("fc1_w", vec![h, i]),
            ("fc1_b", vec![h]),
            ("fc2_w", vec![o, h]),
            ("fc2_b", vec![o]),
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b1 = 1.0 / (i as f64).sqrt();
        params.fill_uniform("fc1_w", b1, &mut rng);
        params.fill_uniform("fc1_b", b1, &mut rng);
        let b2 = 1.0 / (h as f64).sqrt();
        params.fill_uniform("fc2_w", b2, &mut rng);
        params.fill_uniform("fc2_b", b2, &mut rng);
        Ok(Self { config, params })
    }

    fn view(&self, name: &str, rows: usize, cols: usize) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((rows, cols), self.params.get(name)).expect("layout shape")
    }

    fn forward_cached(&self, batch: &[&[f64]]) -> Result<(Array2<f64>, Array2<f64>, Array2<f64>)> {
        let Mlp2Config {
            in_features: i,
            hidden_units: h,
            n_outputs: o,
        } = self.config;
        if batch.is_empty() || batch.iter().any(|x| x.len() != i) {
            return Err(Error::Shape(format!("MLP expects non-empty batches of {i} features")));
        }
        let x = Array2::from_shape_fn((batch.len(), i), |(r, c)| batch[r][c]);
        let mut hidden = x.dot(&self.view("fc1_w", h, i).t());
        hidden += &ArrayView2::from_shape((1, h), self.params.get("fc1_b")).expect("bias");
        hidden.mapv_inplace(sigmoid);
        let mut out = hidden.dot(&self.view("fc2_w", o, h).t());
        out += &ArrayView2::from_shape((1, o), self.params.get("fc2_b")).expect("bias");
        Ok((out, hidden, x))
    }
}

impl Model for Mlp2 {
    fn params(&self) -> &ModelParams {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ModelParams {
        &mut self.params
    }

    fn input_len(&self) -> usize {
        self.config.in_features
    }

    fn n_outputs(&self) -> usize {
        self.config.n_outputs
    }

    fn forward(&self, batch: &[&[f64]]) -> Result<Array2<f64>> {
        Ok(self.forward_cached(batch)?.0)
    }

    fn loss_grad(
        &self,
        batch: &[&[f64]],
        loss: &mut dyn FnMut(&Array2<f64>) -> Result<(f64, Array2<f64>)>,
    ) -> Result<(f64, Vec<f64>)> {
        let (out, hidden, x) = self.forward_cached(batch)?;
        let (value, dout) = loss(&out)?;
        let (h, o) = (self.config.hidden_units, self.config.n_outputs);
        let mut grad = ModelParams {
            values: vec![0.0; self.params.len()],
            layout: self.params.layout.clone(),
        };
        let mut set = |name: &str, m: Array2<f64>| {
            grad.get_mut(name).copy_from_slice(m.as_standard_layout().as_slice().expect("contiguous"));
        };
        set("fc2_w", dout.t().dot(&hidden));
        set("fc2_b", dout.sum_axis(Axis(0)).insert_axis(Axis(0)));
        let mut dz = dout.dot(&self.view("fc2_w", o, h));
        dz.zip_mut_with(&hidden, |d, s| *d *= s * (1.0 - s));
        set("fc1_w", dz.t().dot(&x));
        set("fc1_b", dz.sum_axis(Axis(0)).insert_axis(Axis(0)));
        Ok((value, grad.values))
    }
}
