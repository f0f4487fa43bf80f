//! Layer norm, full-height valid convolution, global average pooling and two
//! fully connected layers with a sigmoid between them.

use ndarray::{Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::ModelParams;
use super::{sigmoid, Model};
use crate::error::{Error, Result};

pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimpleCnnConfig {
    pub in_channels: usize,
    pub in_timepoints: usize,
    pub conv_filters: usize,
    pub kernel_width: usize,
    pub hidden_units: usize,
    pub n_outputs: usize,
}

impl SimpleCnnConfig {
    /// Defaults for data at `fs`: 100 filters spanning all channels and
    /// 100 ms, 64 hidden units.
    pub fn for_input(in_channels: usize, in_timepoints: usize, fs: f64, n_outputs: usize) -> Self {
        Self {
            in_channels,
            in_timepoints,
            conv_filters: 100,
            kernel_width: ((0.1 * fs).round() as usize).max(1),
            hidden_units: 64,
            n_outputs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.in_timepoints == 0 || self.conv_filters == 0 || self.hidden_units == 0 || self.n_outputs == 0 {
            return Err(Error::invalid("CNN dimensions must be positive"));
        }
        if self.kernel_width == 0 || self.kernel_width > self.in_timepoints {
            return Err(Error::invalid(format!(
                "kernel width {} must be in 1..={}",
                self.kernel_width, self.in_timepoints
            )));
        }
        Ok(())
    }

    /// Positions of the valid convolution along time.
    pub fn out_width(&self) -> usize {
        self.in_timepoints - self.kernel_width + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimpleCnn {
    pub config: SimpleCnnConfig,
    pub params: ModelParams,
}

/// Per-batch intermediates kept for the backward pass.
struct Cache {
    xhat: Vec<Vec<f64>>,
    window_means: Array2<f64>,
    pooled: Array2<f64>,
    hidden: Array2<f64>,
}

impl SimpleCnn {
    pub fn layout(config: &SimpleCnnConfig) -> ModelParams {
        let (c, t, f, k, h, o) = (
            config.in_channels,
            config.in_timepoints,
            config.conv_filters,
            config.kernel_width,
            config.hidden_units,
            config.n_outputs,
        );
        ModelParams::zeros(&[
            ("ln_gamma", vec![c, t]),
            ("ln_beta", vec![c, t]),
            ("conv_w", vec![f, c, k]),
            ("conv_b", vec![f]),
            ("fc1_w", vec![h, f]),
            ("fc1_b", vec![h]),
            ("fc2_w", vec![o, h]),
            ("fc2_b", vec![o]),
        ])
    }

    /// Unit scale, zero shift; weights and biases uniform in
    /// `+-1/sqrt(fan_in)`.
    pub fn new(config: SimpleCnnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut params = Self::layout(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        params.fill("ln_gamma", 1.0);
        let conv_bound = 1.0 / ((config.in_channels * config.kernel_width) as f64).sqrt();
        params.fill_uniform("conv_w", conv_bound, &mut rng);
        params.fill_uniform("conv_b", conv_bound, &mut rng);
        let fc1_bound = 1.0 / (config.conv_filters as f64).sqrt();
        params.fill_uniform("fc1_w", fc1_bound, &mut rng);
        params.fill_uniform("fc1_b", fc1_bound, &mut rng);
        let fc2_bound = 1.0 / (config.hidden_units as f64).sqrt();
        params.fill_uniform("fc2_w", fc2_bound, &mut rng);
        params.fill_uniform("fc2_b", fc2_bound, &mut rng);
        Ok(Self { config, params })
    }

    pub fn from_params(config: SimpleCnnConfig, params: ModelParams) -> Result<Self> {
        config.validate()?;
        params.check_layout(&Self::layout(&config).layout)?;
        params.check_finite()?;
        Ok(Self { config, params })
    }

    fn view(&self, name: &str, rows: usize, cols: usize) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((rows, cols), self.params.get(name)).expect("layout shape")
    }

    fn check_batch(&self, batch: &[&[f64]]) -> Result<()> {
        let want = self.input_len();
        if batch.is_empty() {
            return Err(Error::Shape("empty batch".into()));
        }
        if let Some(x) = batch.iter().find(|x| x.len() != want) {
            return Err(Error::Shape(format!(
                "sample of {} values, model expects {}x{} = {want}",
                x.len(),
                self.config.in_channels,
                self.config.in_timepoints
            )));
        }
        Ok(())
    }

    fn forward_cached(&self, batch: &[&[f64]]) -> Result<(Array2<f64>, Cache)> {
        self.check_batch(batch)?;
        let cfg = &self.config;
        let (c, t, k, f) = (cfg.in_channels, cfg.in_timepoints, cfg.kernel_width, cfg.conv_filters);
        let w = cfg.out_width();
        let n = batch.len();
        let gamma = self.params.get("ln_gamma");
        let beta = self.params.get("ln_beta");
        let mut xhat = Vec::with_capacity(n);
        let mut window_means = Array2::<f64>::zeros((n, c * k));
        let mut prefix = vec![0.0; t + 1];
        for (b, x) in batch.iter().enumerate() {
            let len = x.len() as f64;
            let mean = x.iter().sum::<f64>() / len;
            let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / len;
            let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            let xh: Vec<f64> = x.iter().map(|v| (v - mean) * is).collect();
            // Mean of the normalized input over each kernel offset's window:
            // pooled conv output is then linear in these window means.
            let mut row = window_means.row_mut(b);
            let row = row.as_slice_mut().expect("contiguous");
            for ch in 0..c {
                let base = ch * t;
                for j in 0..t {
                    let y = gamma[base + j] * xh[base + j] + beta[base + j];
                    prefix[j + 1] = prefix[j] + y;
                }
                for kk in 0..k {
                    row[ch * k + kk] = (prefix[kk + w] - prefix[kk]) / w as f64;
                }
            }
            xhat.push(xh);
        }
        let conv_w = self.view("conv_w", f, c * k);
        let mut pooled = window_means.dot(&conv_w.t());
        pooled += &ArrayView2::from_shape((1, f), self.params.get("conv_b")).expect("bias");
        let h = cfg.hidden_units;
        let mut hidden = pooled.dot(&self.view("fc1_w", h, f).t());
        hidden += &ArrayView2::from_shape((1, h), self.params.get("fc1_b")).expect("bias");
        hidden.mapv_inplace(sigmoid);
        let o = cfg.n_outputs;
        let mut out = hidden.dot(&self.view("fc2_w", o, h).t());
        out += &ArrayView2::from_shape((1, o), self.params.get("fc2_b")).expect("bias");
        Ok((
            out,
            Cache {
                xhat,
                window_means,
                pooled,
                hidden,
            },
        ))
    }

    /// Outputs and the pooled (post-averaging) features.
    pub fn forward_features(&self, batch: &[&[f64]]) -> Result<(Array2<f64>, Array2<f64>)> {
        let (out, cache) = self.forward_cached(batch)?;
        Ok((out, cache.pooled))
    }

    fn backward(&self, batch: &[&[f64]], cache: &Cache, dout: &Array2<f64>) -> Vec<f64> {
        let cfg = &self.config;
        let (c, t, k, f, h, o) = (
            cfg.in_channels,
            cfg.in_timepoints,
            cfg.kernel_width,
            cfg.conv_filters,
            cfg.hidden_units,
            cfg.n_outputs,
        );
        let w = cfg.out_width();
        let mut grad = ModelParams {
            values: vec![0.0; self.params.len()],
            layout: self.params.layout.clone(),
        };

        let set = |grad: &mut ModelParams, name: &str, m: &Array2<f64>| {
            grad.get_mut(name).copy_from_slice(m.as_standard_layout().as_slice().expect("contiguous"));
        };
        set(&mut grad, "fc2_w", &dout.t().dot(&cache.hidden));
        set(&mut grad, "fc2_b", &dout.sum_axis(Axis(0)).insert_axis(Axis(0)));
        let mut dz1 = dout.dot(&self.view("fc2_w", o, h));
        dz1.zip_mut_with(&cache.hidden, |d, s| *d *= s * (1.0 - s));
        set(&mut grad, "fc1_w", &dz1.t().dot(&cache.pooled));
        set(&mut grad, "fc1_b", &dz1.sum_axis(Axis(0)).insert_axis(Axis(0)));
        let dpooled = dz1.dot(&self.view("fc1_w", h, f));
        set(&mut grad, "conv_w", &dpooled.t().dot(&cache.window_means));
        set(&mut grad, "conv_b", &dpooled.sum_axis(Axis(0)).insert_axis(Axis(0)));
        let dmeans = dpooled.dot(&self.view("conv_w", f, c * k));

        let mut dgamma = vec![0.0; c * t];
        let mut dbeta = vec![0.0; c * t];
        let mut prefix = vec![0.0; k + 1];
        for b in 0..batch.len() {
            let dm = dmeans.row(b);
            let xh = &cache.xhat[b];
            for ch in 0..c {
                for kk in 0..k {
                    prefix[kk + 1] = prefix[kk] + dm[ch * k + kk];
                }
                for j in 0..t {
                    // Offsets kk whose window [kk, kk + w) covers j.
                    let lo = (j + 1).saturating_sub(w);
                    let hi = (j + 1).min(k);
                    if lo >= hi {
                        continue;
                    }
                    let dy = (prefix[hi] - prefix[lo]) / w as f64;
                    let idx = ch * t + j;
                    dgamma[idx] += dy * xh[idx];
                    dbeta[idx] += dy;
                }
            }
        }
        grad.get_mut("ln_gamma").copy_from_slice(&dgamma);
        grad.get_mut("ln_beta").copy_from_slice(&dbeta);
        grad.values
    }
}

impl Model for SimpleCnn {
    fn params(&self) -> &ModelParams {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ModelParams {
        &mut self.params
    }

    fn input_len(&self) -> usize {
        self.config.in_channels * self.config.in_timepoints
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
        let (out, cache) = self.forward_cached(batch)?;
        let (value, dout) = loss(&out)?;
        Ok((value, self.backward(batch, &cache, &dout)))
    }
}
