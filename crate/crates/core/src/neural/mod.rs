//! Small differentiable models trained from scratch in f64: the CNN decoder,
//! a two-layer MLP, the losses and AdamW.

mod adamw;
mod checkpoint;
mod cnn;
pub mod losses;
mod mlp;
mod params;
mod train;

use ndarray::Array2;

use crate::error::Result;

pub use adamw::{AdamW, AdamWConfig};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use cnn::{SimpleCnn, SimpleCnnConfig, LAYER_NORM_EPS};
pub use losses::LossKind;
pub use mlp::{Mlp2, Mlp2Config};
pub use params::{ModelParams, ParamSlice};
pub use train::{cosine_scores, evaluate, mlp2_train, predict_outputs, train, EpochRecord, History, Objective, Split, TrainConfig};

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// A model over flattened inputs with an analytic gradient.
pub trait Model {
    fn params(&self) -> &ModelParams;
    fn params_mut(&mut self) -> &mut ModelParams;
    fn input_len(&self) -> usize;
    fn n_outputs(&self) -> usize;
    fn forward(&self, batch: &[&[f64]]) -> Result<Array2<f64>>;
    /// Loss value and gradient with respect to every parameter; `loss` maps
    /// the batch outputs to a scalar and its output gradient.
    fn loss_grad(
        &self,
        batch: &[&[f64]],
        loss: &mut dyn FnMut(&Array2<f64>) -> Result<(f64, Array2<f64>)>,
    ) -> Result<(f64, Vec<f64>)>;
}
