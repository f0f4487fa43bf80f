//! Accuracy-type metrics on prediction tables.

use std::collections::BTreeSet;

use ndarray::ArrayView2;

use crate::error::{Error, Result};

pub fn count_correct(pred: &[usize], truth: &[usize]) -> usize {
    pred.iter().zip(truth).filter(|(p, t)| p == t).count()
}

pub fn accuracy_pct(pred: &[usize], truth: &[usize]) -> f64 {
    100.0 * count_correct(pred, truth) as f64 / truth.len() as f64
}

/// 1-based rank of `target` among `scores`, counting only strictly larger
/// scores ahead of it (ties resolve in the target's favour).
pub fn rank_of(scores: &[f64], target: usize) -> usize {
    1 + scores.iter().filter(|&&s| s > scores[target]).count()
}

fn check(scores: &ArrayView2<f64>, targets: &[usize]) -> Result<()> {
    if scores.nrows() != targets.len() || targets.is_empty() {
        return Err(Error::Shape(format!("{} score rows for {} targets", scores.nrows(), targets.len())));
    }
    if let Some(t) = targets.iter().find(|&&t| t >= scores.ncols()) {
        return Err(Error::invalid(format!("target {t} outside {} candidates", scores.ncols())));
    }
    Ok(())
}

/// Rows whose target ranks within the top `k`.
pub fn top_k_hits(scores: ArrayView2<f64>, targets: &[usize], k: usize) -> Result<usize> {
    check(&scores, targets)?;
    Ok(scores
        .outer_iter()
        .zip(targets)
        .filter(|(row, &t)| rank_of(row.as_slice().unwrap_or(&row.to_vec()), t) <= k)
        .count())
}

pub fn top_k_pct(scores: ArrayView2<f64>, targets: &[usize], k: usize) -> Result<f64> {
    Ok(100.0 * top_k_hits(scores, targets, k)? as f64 / targets.len() as f64)
}

/// Mean of `(N - r) / (N - 1) * 100` over rows, `N` candidates per row.
pub fn rank_accuracy_pct(scores: ArrayView2<f64>, targets: &[usize]) -> Result<f64> {
    check(&scores, targets)?;
    let n = scores.ncols();
    if n < 2 {
        return Err(Error::invalid("rank accuracy needs at least two candidates"));
    }
    let total: f64 = scores
        .outer_iter()
        .zip(targets)
        .map(|(row, &t)| {
            let r = rank_of(row.as_slice().unwrap_or(&row.to_vec()), t);
            (n - r) as f64 / (n - 1) as f64 * 100.0
        })
        .sum();
    Ok(total / targets.len() as f64)
}

fn position(order: &[usize], class: usize) -> Option<usize> {
    order.iter().position(|&c| c == class)
}

/// Trained classes presented immediately before or after `class`.
pub fn trained_neighbours(class: usize, order: &[usize], trained: &BTreeSet<usize>) -> Vec<usize> {
    let Some(i) = position(order, class) else {
        return Vec::new();
    };
    [i.checked_sub(1), Some(i + 1)]
        .into_iter()
        .flatten()
        .filter_map(|j| order.get(j).copied())
        .filter(|c| trained.contains(c))
        .collect()
}

/// Share of predictions landing on a trained class temporally adjacent to
/// the true class in presentation `order`.
pub fn acc_near_pct(pred: &[usize], truth: &[usize], order: &[usize], trained: &BTreeSet<usize>) -> f64 {
    let hits = pred
        .iter()
        .zip(truth)
        .filter(|(p, t)| trained_neighbours(**t, order, trained).contains(p))
        .count();
    100.0 * hits as f64 / truth.len() as f64
}

/// Expected [`acc_near_pct`] under uniform guessing over the trained classes.
pub fn acc_near_chance_pct(truth: &[usize], order: &[usize], trained: &BTreeSet<usize>) -> f64 {
    let m = trained.len() as f64;
    let total: f64 = truth.iter().map(|t| trained_neighbours(*t, order, trained).len() as f64 / m).sum();
    100.0 * total / truth.len() as f64
}

/// Share of predictions equal to the seventh-presented class.
pub fn acc_7th_pct(pred: &[usize], order: &[usize]) -> f64 {
    match order.get(6) {
        Some(&c) => 100.0 * pred.iter().filter(|&&p| p == c).count() as f64 / pred.len() as f64,
        None => 0.0,
    }
}
