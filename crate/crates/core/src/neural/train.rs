use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adamw::{AdamW, AdamWConfig};
use super::losses::{argmax_rows, cosine_loss_grad, cross_entropy_grad, infonce_grad, LossKind};
use super::mlp::{Mlp2, Mlp2Config};
use super::Model;
use crate::error::{Error, Result};

const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            weight_decay: 0.01,
            batch_size: 64,
            max_epochs: 50,
            early_stop_patience: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::invalid("batch_size and max_epochs must be at least 1"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::invalid("weight decay must be non-negative"));
        }
        Ok(())
    }
}

/// Inputs (flattened samples) with their class labels.
#[derive(Debug, Clone, Default)]
pub struct Split<'a> {
    pub inputs: Vec<&'a [f64]>,
    pub labels: Vec<usize>,
}

impl<'a> Split<'a> {
    pub fn new(inputs: Vec<&'a [f64]>, labels: Vec<usize>) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::Shape(format!("{} inputs for {} labels", inputs.len(), labels.len())));
        }
        Ok(Self { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Loss plus how model outputs map to labels. Embedding losses regress onto
/// `bank` rows (one per class) and predict the most cosine-similar row.
#[derive(Debug, Clone, Copy)]
pub struct Objective<'a> {
    pub loss: LossKind,
    pub bank: Option<ArrayView2<'a, f64>>,
}

impl<'a> Objective<'a> {
    pub fn classification() -> Self {
        Self {
            loss: LossKind::CrossEntropy,
            bank: None,
        }
    }

    pub fn embedding(loss: LossKind, bank: ArrayView2<'a, f64>) -> Self {
        Self { loss, bank: Some(bank) }
    }

    fn bank(&self) -> Result<ArrayView2<'a, f64>> {
        self.bank.ok_or_else(|| Error::invalid("embedding loss needs an embedding bank"))
    }

    pub fn loss_grad(&self, out: &Array2<f64>, labels: &[usize]) -> Result<(f64, Array2<f64>)> {
        match self.loss {
            LossKind::CrossEntropy => cross_entropy_grad(out.view(), labels),
            LossKind::Cosine => cosine_loss_grad(out.view(), self.targets(labels)?.view()),
            LossKind::InfoNce { tau } => infonce_grad(out.view(), self.targets(labels)?.view(), tau),
        }
    }

    fn targets(&self, labels: &[usize]) -> Result<Array2<f64>> {
        let bank = self.bank()?;
        if let Some(l) = labels.iter().find(|&&l| l >= bank.nrows()) {
            return Err(Error::invalid(format!("label {l} has no bank entry")));
        }
        Ok(bank.select(Axis(0), labels))
    }

    /// Per-row candidate scores: logits, or cosine similarity to every bank row.
    pub fn scores(&self, out: &Array2<f64>) -> Result<Array2<f64>> {
        match self.loss {
            LossKind::CrossEntropy => Ok(out.clone()),
            _ => cosine_scores(out.view(), self.bank()?),
        }
    }

    pub fn predict(&self, out: &Array2<f64>) -> Result<Vec<usize>> {
        Ok(argmax_rows(self.scores(out)?.view()))
    }
}

/// Cosine similarity of every prediction row with every candidate row.
pub fn cosine_scores(pred: ArrayView2<f64>, candidates: ArrayView2<f64>) -> Result<Array2<f64>> {
    let unit = |m: ArrayView2<f64>| -> Result<Array2<f64>> {
        let mut u = m.to_owned();
        for mut r in u.outer_iter_mut() {
            let n = r.dot(&r).sqrt();
            if n == 0.0 {
                return Err(Error::Numerical("zero-norm embedding".into()));
            }
            r /= n;
        }
        Ok(u)
    };
    Ok(unit(pred)?.dot(&unit(candidates)?.t()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Model outputs for all inputs, evaluated in chunks.
pub fn predict_outputs<M: Model + ?Sized>(model: &M, inputs: &[&[f64]]) -> Result<Array2<f64>> {
    if inputs.is_empty() {
        return Ok(Array2::zeros((0, model.n_outputs())));
    }
    let parts = inputs.chunks(EVAL_CHUNK).map(|c| model.forward(c)).collect::<Result<Vec<_>>>()?;
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    concatenate(Axis(0), &views).map_err(|e| Error::Shape(e.to_string()))
}

/// Mean loss and accuracy (percent) over a split.
pub fn evaluate<M: Model + ?Sized>(model: &M, objective: &Objective, split: &Split) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (inputs, labels) in split.inputs.chunks(EVAL_CHUNK).zip(split.labels.chunks(EVAL_CHUNK)) {
        let out = model.forward(inputs)?;
        loss += objective.loss_grad(&out, labels)?.0 * inputs.len() as f64;
        correct += objective.predict(&out)?.iter().zip(labels).filter(|(p, l)| p == l).count();
    }
    let n = split.len() as f64;
    Ok((loss / n, 100.0 * correct as f64 / n))
}

/// Mini-batch AdamW with per-epoch seeded shuffling. Keeps the parameters of
/// the epoch with the best validation accuracy (lower validation loss breaks
/// ties) and stops after `early_stop_patience` epochs without improvement.
/// An empty validation split falls back to the training split.
pub fn train<M: Model + ?Sized>(
    model: &mut M,
    cfg: &TrainConfig,
    objective: &Objective,
    train_split: &Split,
    val_split: &Split,
) -> Result<History> {
    cfg.validate()?;
    if train_split.is_empty() {
        return Err(Error::invalid("training split is empty"));
    }
    let monitor = if val_split.is_empty() { train_split } else { val_split };
    let mut opt = AdamW::new(
        AdamWConfig {
            lr: cfg.lr,
            weight_decay: cfg.weight_decay,
            ..Default::default()
        },
        model.params().len(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..train_split.len()).collect();
    let mut best: Option<(f64, f64, Vec<f64>, usize)> = None;
    let mut epochs = Vec::new();
    let mut since_best = 0;
    let mut stopped_early = false;
    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let inputs: Vec<&[f64]> = chunk.iter().map(|&i| train_split.inputs[i]).collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| train_split.labels[i]).collect();
            let (loss, grad) = match model.loss_grad(&inputs, &mut |out| objective.loss_grad(out, &labels)) {
                Err(Error::Numerical(_)) => return Err(Error::Diverged { epoch }),
                other => other?,
            };
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch });
            }
            total += loss * chunk.len() as f64;
            opt.step(&mut model.params_mut().values, &grad)?;
        }
        let train_loss = total / train_split.len() as f64;
        let (val_loss, val_accuracy) = evaluate(&*model, objective, monitor)?;
        if !val_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_accuracy,
        });
        let improved = match &best {
            None => true,
            Some((acc, loss, _, _)) => val_accuracy > *acc || (val_accuracy == *acc && val_loss < *loss),
        };
        if improved {
            best = Some((val_accuracy, val_loss, model.params().values.clone(), epoch));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.early_stop_patience {
                stopped_early = true;
                break;
            }
        }
    }
    let (_, _, values, best_epoch) = best.expect("at least one epoch");
    model.params_mut().values = values;
    Ok(History {
        epochs,
        best_epoch,
        stopped_early,
    })
}

/// Train a two-layer classifier on fixed feature vectors.
pub fn mlp2_train(
    train_split: &Split,
    val_split: &Split,
    n_classes: usize,
    hidden_units: usize,
    cfg: &TrainConfig,
) -> Result<(Mlp2, History)> {
    let in_features = train_split
        .inputs
        .first()
        .map(|x| x.len())
        .ok_or_else(|| Error::invalid("training split is empty"))?;
    let mut model = Mlp2::new(
        Mlp2Config {
            in_features,
            hidden_units,
            n_outputs: n_classes,
        },
        cfg.seed,
    )?;
    let history = train(&mut model, cfg, &Objective::classification(), train_split, val_split)?;
    Ok((model, history))
}
