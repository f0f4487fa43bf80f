//! Summary statistics and hypothesis tests used by the audit and LRTC reports.

use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alternative {
    Greater,
    Less,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n - 1 denominator).
pub fn sample_sd(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0)).sqrt()
}

/// Standard error of the mean; zero for fewer than two values.
pub fn sem(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    sample_sd(values) / (values.len() as f64).sqrt()
}

pub fn one_sample_ttest(values: &[f64], mu0: f64, alternative: Alternative) -> Result<TTest> {
    if values.len() < 2 {
        return Err(Error::invalid(format!("t-test needs at least 2 values, got {}", values.len())));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite value in t-test sample".into()));
    }
    let n = values.len() as f64;
    let m = mean(values);
    let sd = sample_sd(values);
    if !(sd > m.abs().max(1.0) * 1e-13) {
        return Err(Error::ZeroVariance(format!("{} identical values", values.len())));
    }
    let t = (m - mu0) / (sd / n.sqrt());
    let df = n - 1.0;
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Numerical(e.to_string()))?;
    let p = match alternative {
        Alternative::Greater => dist.sf(t),
        Alternative::Less => dist.cdf(t),
        Alternative::TwoSided => 2.0 * dist.sf(t.abs()),
    };
    Ok(TTest { t, df, p: p.clamp(0.0, 1.0) })
}

fn check_p(p: &[f64]) -> Result<()> {
    match p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        Some(v) => Err(Error::invalid(format!("p-value {v} outside [0, 1]"))),
        None => Ok(()),
    }
}

/// Bonferroni adjustment with the family size taken from the list.
pub fn bonferroni(p: &[f64]) -> Result<Vec<f64>> {
    bonferroni_m(p, p.len())
}

/// Bonferroni adjustment for a family of `m` tests.
pub fn bonferroni_m(p: &[f64], m: usize) -> Result<Vec<f64>> {
    check_p(p)?;
    if m < p.len() {
        return Err(Error::invalid(format!("family size {m} is smaller than {} p-values", p.len())));
    }
    Ok(p.iter().map(|v| (v * m as f64).min(1.0)).collect())
}

/// Benjamini-Hochberg step-up. Returns adjusted p-values (in input order)
/// and the rejection mask at level `q`.
pub fn bh_fdr(p: &[f64], q: f64) -> Result<(Vec<f64>, Vec<bool>)> {
    check_p(p)?;
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::invalid(format!("FDR level must be in (0, 1], got {q}")));
    }
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for (rank, &i) in order.iter().enumerate().rev() {
        running = running.min(p[i] * m as f64 / (rank + 1) as f64);
        adjusted[i] = running.min(1.0);
    }
    // Largest k with p_(k) <= k q / m; reject the k smallest.
    let k = order
        .iter()
        .enumerate()
        .filter(|(rank, &i)| p[i] <= (rank + 1) as f64 * q / m as f64)
        .map(|(rank, _)| rank + 1)
        .max()
        .unwrap_or(0);
    let mut reject = vec![false; m];
    for &i in &order[..k] {
        reject[i] = true;
    }
    Ok((adjusted, reject))
}

/// Binomial standard error of an accuracy, in percentage points.
pub fn binomial_se_pct(accuracy_pct: f64, n: usize) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    let a = (accuracy_pct / 100.0).clamp(0.0, 1.0);
    100.0 * (a * (1.0 - a) / n as f64).sqrt()
}

/// Exact `P(X >= k)` for `X ~ Binomial(n, p0)`.
pub fn binomial_p_greater(k: u64, n: u64, p0: f64) -> Result<f64> {
    if k > n {
        return Err(Error::invalid(format!("{k} successes out of {n} trials")));
    }
    if k == 0 {
        return Ok(1.0);
    }
    let dist = Binomial::new(p0, n).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(dist.sf(k - 1).clamp(0.0, 1.0))
}

/// Ranks starting at 1, ties averaged.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (Pearson on average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    crate::dsp::pearson(&average_ranks(x), &average_ranks(y))
}
