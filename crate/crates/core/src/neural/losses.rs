//! Scalar losses and their batch forms returning gradients with respect to
//! the model outputs. Batch losses are means over the batch.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TAU: f64 = 0.07;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum LossKind {
    CrossEntropy,
    Cosine,
    InfoNce { tau: f64 },
}

impl LossKind {
    pub fn info_nce() -> Self {
        LossKind::InfoNce { tau: DEFAULT_TAU }
    }

    pub fn name(self) -> &'static str {
        match self {
            LossKind::CrossEntropy => "cross_entropy",
            LossKind::Cosine => "cosine",
            LossKind::InfoNce { .. } => "infonce",
        }
    }

    pub fn is_embedding(self) -> bool {
        !matches!(self, LossKind::CrossEntropy)
    }
}

/// Softmax with max-subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `-log softmax(logits)[class]`.
pub fn cross_entropy(logits: &[f64], class: usize) -> Result<f64> {
    if class >= logits.len() {
        return Err(Error::invalid(format!("class {class} out of range for {} logits", logits.len())));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite logit".into()));
    }
    Ok((log_sum_exp(logits) - logits[class]).max(0.0))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Numerical("zero-norm embedding".into()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb))
}

/// Mean of `1 - cos(pred_i, target_i)`.
pub fn cosine_loss(pred: ArrayView2<f64>, target: ArrayView2<f64>) -> Result<f64> {
    Ok(cosine_loss_grad(pred, target)?.0)
}

/// In-batch InfoNCE, prediction to target direction.
pub fn infonce(pred: ArrayView2<f64>, target: ArrayView2<f64>, tau: f64) -> Result<f64> {
    Ok(infonce_grad(pred, target, tau)?.0)
}

fn check_pair(pred: &ArrayView2<f64>, target: &ArrayView2<f64>) -> Result<()> {
    if pred.dim() != target.dim() || pred.nrows() == 0 {
        return Err(Error::Shape(format!("prediction {:?} vs target {:?}", pred.dim(), target.dim())));
    }
    Ok(())
}

pub fn cross_entropy_grad(logits: ArrayView2<f64>, labels: &[usize]) -> Result<(f64, Array2<f64>)> {
    if logits.nrows() != labels.len() || labels.is_empty() {
        return Err(Error::Shape(format!("{} logit rows for {} labels", logits.nrows(), labels.len())));
    }
    let n = labels.len() as f64;
    let mut grad = Array2::zeros(logits.dim());
    let mut total = 0.0;
    for ((row, &y), mut g) in logits.outer_iter().zip(labels).zip(grad.outer_iter_mut()) {
        let row = row.to_vec();
        total += cross_entropy(&row, y)?;
        for (gk, pk) in g.iter_mut().zip(softmax(&row)) {
            *gk = pk / n;
        }
        g[y] -= 1.0 / n;
    }
    Ok((total / n, grad))
}

pub fn cosine_loss_grad(pred: ArrayView2<f64>, target: ArrayView2<f64>) -> Result<(f64, Array2<f64>)> {
    check_pair(&pred, &target)?;
    let n = pred.nrows() as f64;
    let mut grad = Array2::zeros(pred.dim());
    let mut total = 0.0;
    for ((p, t), mut g) in pred.outer_iter().zip(target.outer_iter()).zip(grad.outer_iter_mut()) {
        let (p, t) = (p.to_vec(), t.to_vec());
        let c = cosine(&p, &t)?;
        total += 1.0 - c;
        let (np, nt) = (norm(&p), norm(&t));
        for ((gk, pk), tk) in g.iter_mut().zip(&p).zip(&t) {
            *gk = -(tk / (np * nt) - c * pk / (np * np)) / n;
        }
    }
    Ok((total / n, grad))
}

pub fn infonce_grad(pred: ArrayView2<f64>, target: ArrayView2<f64>, tau: f64) -> Result<(f64, Array2<f64>)> {
    check_pair(&pred, &target)?;
    if !(tau > 0.0) {
        return Err(Error::invalid(format!("temperature must be positive, got {tau}")));
    }
    let b = pred.nrows();
    let normalize = |m: ArrayView2<f64>| -> Result<(Array2<f64>, Vec<f64>)> {
        let norms: Vec<f64> = m.outer_iter().map(|r| norm(r.as_slice().unwrap_or(&r.to_vec()))).collect();
        if norms.contains(&0.0) {
            return Err(Error::Numerical("zero-norm embedding".into()));
        }
        let mut u = m.to_owned();
        for (mut r, nv) in u.outer_iter_mut().zip(&norms) {
            r /= *nv;
        }
        Ok((u, norms))
    };
    let (up, np) = normalize(pred)?;
    let (ut, _) = normalize(target)?;
    let sim = up.dot(&ut.t());
    let mut dsim = Array2::<f64>::zeros((b, b));
    let mut total = 0.0;
    for i in 0..b {
        let logits: Vec<f64> = sim.row(i).iter().map(|s| s / tau).collect();
        total += log_sum_exp(&logits) - logits[i];
        for (j, pj) in softmax(&logits).into_iter().enumerate() {
            dsim[[i, j]] = (pj - if i == j { 1.0 } else { 0.0 }) / (tau * b as f64);
        }
    }
    // d sim_ij / d p_i = (u_tj - sim_ij u_pi) / |p_i|
    let mut grad = dsim.dot(&ut);
    for i in 0..b {
        let proj: f64 = dsim.row(i).iter().zip(sim.row(i)).map(|(d, s)| d * s).sum();
        let mut g = grad.row_mut(i);
        g.scaled_add(-proj, &up.row(i));
        g /= np[i];
    }
    Ok((total / b as f64, grad))
}

/// Index of the largest entry of each row (first on ties).
pub fn argmax_rows(m: ArrayView2<f64>) -> Vec<usize> {
    m.axis_iter(Axis(0))
        .map(|r| {
            r.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                .0
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn finite_diff(f: impl Fn(&Array2<f64>) -> f64, x: &Array2<f64>) -> Array2<f64> {
        let h = 1e-6;
        let mut g = Array2::zeros(x.dim());
        for idx in 0..x.len() {
            let mut a = x.clone();
            let mut b = x.clone();
            a.as_slice_mut().unwrap()[idx] += h;
            b.as_slice_mut().unwrap()[idx] -= h;
            g.as_slice_mut().unwrap()[idx] = (f(&a) - f(&b)) / (2.0 * h);
        }
        g
    }

    #[test]
    fn uniform_logits_give_log_k() {
        assert!((cross_entropy(&[0.3; 40], 7).unwrap() - 40f64.ln()).abs() < 1e-12);
        let mut l = vec![0.0; 5];
        l[2] = 30.0;
        assert!(cross_entropy(&l, 2).unwrap() < 1e-12);
        assert!(cross_entropy(&l, 5).is_err());
    }

    #[test]
    fn cross_entropy_matches_direct_evaluation() {
        let l: [f64; 4] = [0.25, -1.5, 2.0, 0.75];
        let direct = -l[2].exp().ln() + l.iter().map(|v: &f64| v.exp()).sum::<f64>().ln();
        assert!((cross_entropy(&l, 2).unwrap() - direct).abs() < 1e-12);
        let p = softmax(&l);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_identity_and_infonce_equal_logits() {
        let a = array![[1.0, 2.0, 3.0], [-1.0, 0.5, 0.0]];
        assert!(cosine_loss(a.view(), a.view()).unwrap().abs() < 1e-15);
        let same = Array2::from_elem((5, 3), 0.7);
        assert!((infonce(same.view(), same.view(), 0.07).unwrap() - 5f64.ln()).abs() < 1e-12);
        let z = Array2::zeros((2, 3));
        assert!(cosine_loss(z.view(), a.view()).is_err());
    }

    #[test]
    fn infonce_orthonormal_direct() {
        let eye = Array2::from_shape_fn((4, 4), |(i, j)| if i == j { 1.0 } else { 0.0 });
        let tau: f64 = 0.07;
        let expected = -((1.0 / tau).exp() / ((1.0 / tau).exp() + 3.0)).ln();
        assert!((infonce(eye.view(), eye.view(), tau).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn batch_gradients_match_finite_differences() {
        let x = array![[0.3, -1.2, 0.8], [1.1, 0.4, -0.6], [-0.2, 0.9, 0.5]];
        let t = array![[1.0, 0.2, -0.4], [0.1, -0.7, 0.3], [0.6, 0.6, 0.1]];
        let labels = [2, 0, 1];
        let checks: Vec<(Array2<f64>, Array2<f64>)> = vec![
            (
                cross_entropy_grad(x.view(), &labels).unwrap().1,
                finite_diff(|m| cross_entropy_grad(m.view(), &labels).unwrap().0, &x),
            ),
            (
                cosine_loss_grad(x.view(), t.view()).unwrap().1,
                finite_diff(|m| cosine_loss(m.view(), t.view()).unwrap(), &x),
            ),
            (
                infonce_grad(x.view(), t.view(), 0.5).unwrap().1,
                finite_diff(|m| infonce(m.view(), t.view(), 0.5).unwrap(), &x),
            ),
        ];
        for (a, n) in checks {
            for (p, q) in a.iter().zip(&n) {
                assert!((p - q).abs() < 1e-7, "{p} vs {q}");
            }
        }
    }

    #[test]
    fn argmax_first_on_ties() {
        assert_eq!(argmax_rows(array![[1.0, 3.0, 3.0], [0.0, 0.0, -1.0]].view()), vec![1, 0]);
    }
}
