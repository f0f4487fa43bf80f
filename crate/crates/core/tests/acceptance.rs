//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Grids are scaled down (channels, filters,
//! epochs, subjects) so the whole suite fits a single CPU core.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use ndarray::Array2;
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::json;

use templeak::design::{DatasetIndex, SampleMeta, TemplateKind};
use templeak::dsp::{half_length, Band, WaveletSpec};
use templeak::experiments::metrics::{acc_7th_pct, acc_near_pct, rank_accuracy_pct, top_k_hits};
use templeak::experiments::{run_band_audit, sweep_domain_strength, AuditReport, CellStatus, Metric, RunConfig, TaskKind};
use templeak::lrtc::{lrtc_map, read_matrix, write_acf, LrtcConfig, LrtcInput};
use templeak::neural::losses::{cosine_loss_grad, cross_entropy_grad, infonce_grad};
use templeak::neural::{Model, SimpleCnn, SimpleCnnConfig};
use templeak::signal::{synth, SurrogateSpec};
use templeak::splits::{leave_domains_out, leave_samples_out, leave_subjects_out, SampleKey, SplitPlan, ValStrategy};
use templeak::stats::{bh_fdr, bonferroni, spearman};
use templeak::MultichannelSeries;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn config(preset: &str, patch: serde_json::Value) -> RunConfig {
    RunConfig::preset(preset).unwrap().overlay(patch).unwrap()
}

fn composite(channels: usize) -> serde_json::Value {
    json!({
        "type": "surrogate",
        "kind": {"type": "composite", "white": 0.5, "powerlaw": 1.0, "beta": 1.5},
        "channels": channels,
        "channel_mixing": 0.2,
        "line_noise": {"f0": 50.0, "amplitude": 0.5, "amplitude_drift_scale": 0.2}
    })
}

fn summary(r: &AuditReport, task: TaskKind, split: &str, metric: Metric, variant: Option<&str>) -> Result<(f64, Option<f64>), String> {
    let c = r
        .summary(task, TemplateKind::KulLike, split, Band::Full, metric, variant)
        .or_else(|| r.summary(task, TemplateKind::CvprLike, split, Band::Full, metric, variant))
        .ok_or_else(|| format!("no {task} {split} {} summary", metric.name()))?;
    let acc = c.accuracy_pct.ok_or_else(|| format!("{task} {split}: {:?} {:?}", c.status, c.note))?;
    Ok((acc, c.p_value))
}

const LSO: &str = "leave_samples_out";
const LDO: &str = "leave_domains_out";

/// White-noise surrogates without signatures: every decoding cell sits
/// within three binomial standard errors of its chance level.
fn null_soundness() -> Outcome {
    let start = Instant::now();
    let cfg = config(
        "table1",
        json!({
            "templates": ["cvpr_like", "deap_like", "kul_like"],
            "tasks": ["dlc", "tlc_eeg", "tlc_eeg_wodo", "retrieval"],
            "splits": [LSO, LDO],
            "subjects": 1,
            "seeds": [1, 2, 3, 4, 5],
            "signature_strength": 0.0,
            "source": {"type": "surrogate", "kind": {"type": "white"}, "channels": 4},
            "channel_policies": {"cvpr_like": "keep_all", "deap_like": "keep_all"},
            "train": {"max_epochs": 8},
            "cnn": {"conv_filters": 8, "hidden_units": 16}
        }),
    );
    let r = run_band_audit(&cfg, &[Band::Full]).map_err(|e| e.to_string())?;
    let mut checked = 0;
    let mut chances = BTreeSet::new();
    let mut worst: f64 = 0.0;
    for c in r.summaries().filter(|c| matches!(c.metric, Some(Metric::Accuracy) | Some(Metric::Top1))) {
        ensure(c.status == CellStatus::Ok, format!("{} {} {}: {:?}", c.task, c.template, c.split, c.note))?;
        let (acc, chance, n) = (c.accuracy_pct.unwrap(), c.chance_pct.unwrap(), c.n_test.unwrap());
        let p0 = chance / 100.0;
        let se = 100.0 * (p0 * (1.0 - p0) / n as f64).sqrt();
        let z = (acc - chance).abs() / se;
        worst = worst.max(z);
        ensure(z <= 3.0, format!("{} {} {}: {acc:.2} vs chance {chance:.2} ({z:.2} SE)", c.task, c.template, c.split))?;
        chances.insert((chance * 100.0).round() as i64);
        checked += 1;
    }
    // DLC x3, TLC-EEG x3, woDO x2 (one domain per class on cvpr), retrieval Top1 x2 splits x2 losses.
    ensure(checked == 12, format!("expected 12 cells, checked {checked}"))?;
    ensure(
        [250, 1250, 2500, 5000].iter().all(|c| chances.contains(c)),
        format!("chance levels seen: {chances:?}"),
    )?;
    Ok(format!(
        "{checked} cells, max deviation {worst:.2} SE, reduced grid in {:.0} s",
        start.elapsed().as_secs_f64()
    ))
}

fn pitfall_reproduction() -> Outcome {
    let cfg = config(
        "table1",
        json!({
            "templates": ["kul_like"],
            "tasks": ["dlc", "tlc_eeg", "tlc_eeg_wodo"],
            "subjects": 4,
            "seeds": [1, 2, 3, 4, 5],
            "signature_strength": 1.0,
            "source": composite(8),
            "train": {"max_epochs": 15},
            "cnn": {"conv_filters": 16, "hidden_units": 32}
        }),
    );
    let r = run_band_audit(&cfg, &[Band::Full]).map_err(|e| e.to_string())?;
    let (dlc, p_dlc) = summary(&r, TaskKind::Dlc, LSO, Metric::Accuracy, None)?;
    let (tlc, p_tlc) = summary(&r, TaskKind::TlcEeg, LSO, Metric::Accuracy, None)?;
    let (wodo, p_wodo) = summary(&r, TaskKind::TlcEegWodo, LDO, Metric::Accuracy, None)?;
    let (p_dlc, p_tlc, p_wodo) = (p_dlc.unwrap_or(1.0), p_tlc.unwrap_or(1.0), p_wodo.unwrap_or(1.0));
    ensure(dlc >= 50.0 && p_dlc < 0.01, format!("DLC {dlc:.2} p={p_dlc:.2e}"))?;
    ensure(tlc >= 75.0 && p_tlc < 0.01, format!("TLC-EEG {tlc:.2} p={p_tlc:.2e}"))?;
    ensure((wodo - 50.0).abs() <= 10.0 && p_wodo >= 0.05, format!("woDO {wodo:.2} p={p_wodo:.2e}"))?;
    ensure(!r.warnings.is_empty(), "expected a leakage warning")?;
    Ok(format!(
        "DLC {dlc:.2} (p={p_dlc:.1e}), TLC-EEG {tlc:.2} (p={p_tlc:.1e}), woDO {wodo:.2} (p={p_wodo:.2})"
    ))
}

fn monotone_leakage() -> Outcome {
    let cfg = config(
        "table1",
        json!({
            "subjects": 2,
            "seeds": [1, 2, 3],
            "source": composite(8),
            "train": {"max_epochs": 15},
            "cnn": {"conv_filters": 16, "hidden_units": 32}
        }),
    );
    let gammas = [0.0, 0.25, 0.5, 0.75, 1.0];
    let pts = sweep_domain_strength(&cfg, TemplateKind::KulLike, &gammas, TaskKind::TlcEeg).map_err(|e| e.to_string())?;
    let means: Vec<f64> = pts.iter().map(|p| p.mean_pct).collect();
    let rho = spearman(&gammas, &means).map_err(|e| e.to_string())?;
    let shown: Vec<String> = means.iter().map(|m| format!("{m:.1}")).collect();
    ensure(rho >= 0.9, format!("rho {rho:.3}, accuracies {shown:?}"))?;
    Ok(format!("rho {rho:.3}, accuracies {}", shown.join(" / ")))
}

fn retrieval_pattern() -> Outcome {
    let cfg = config(
        "retrieval",
        json!({
            "splits": [LSO, LDO],
            "subjects": 1,
            "seeds": [1, 2, 3],
            "signature_strength": 1.0,
            "source": composite(8),
            "channel_policies": {"cvpr_like": "keep_all"},
            "train": {"max_epochs": 12},
            "cnn": {"conv_filters": 16, "hidden_units": 32}
        }),
    );
    let r = run_band_audit(&cfg, &[Band::Full]).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    for loss in ["cosine", "infonce"] {
        let (top1, _) = summary(&r, TaskKind::Retrieval, LSO, Metric::Top1, Some(loss))?;
        let (rank, _) = summary(&r, TaskKind::Retrieval, LSO, Metric::RankAcc, Some(loss))?;
        let (rank_ldo, _) = summary(&r, TaskKind::Retrieval, LDO, Metric::RankAcc, Some(loss))?;
        ensure(top1 >= 25.0, format!("{loss}: LSO Top1 {top1:.2}"))?;
        ensure(rank >= 80.0, format!("{loss}: LSO RankAcc {rank:.2}"))?;
        ensure((rank_ldo - 50.0).abs() <= 5.0, format!("{loss}: LDO RankAcc {rank_ldo:.2}"))?;
        parts.push(format!("{loss} LSO Top1 {top1:.1} RankAcc {rank:.1}, LDO RankAcc {rank_ldo:.1}"));
    }
    Ok(parts.join("; "))
}

fn gradient_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for case in 0..50 {
        let cfg = SimpleCnnConfig {
            in_channels: rng.random_range(1..=3),
            in_timepoints: rng.random_range(4..=10),
            conv_filters: rng.random_range(2..=5),
            kernel_width: rng.random_range(1..=3),
            hidden_units: rng.random_range(2..=5),
            n_outputs: rng.random_range(2..=4),
        };
        let (o, n) = (cfg.n_outputs, cfg.in_channels * cfg.in_timepoints);
        let mut model = SimpleCnn::new(cfg, rng.random()).map_err(|e| e.to_string())?;
        // Move the normalization affine off its identity start.
        for v in model.params_mut().values.iter_mut() {
            *v += rng.random_range(-0.1..0.1);
        }
        let batch_size = rng.random_range(2..=4);
        let xs: Vec<Vec<f64>> = (0..batch_size).map(|_| (0..n).map(|_| rng.random_range(-1.5..1.5)).collect()).collect();
        let batch: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let labels: Vec<usize> = (0..batch_size).map(|_| rng.random_range(0..o)).collect();
        let targets = Array2::from_shape_fn((batch_size, o), |_| rng.random_range(-1.0..1.0));
        let tau = rng.random_range(0.05..1.0);
        type LossFn<'a> = Box<dyn Fn(&Array2<f64>) -> templeak::Result<(f64, Array2<f64>)> + 'a>;
        let losses: [(&str, LossFn); 3] = [
            ("cross_entropy", Box::new(|out: &Array2<f64>| cross_entropy_grad(out.view(), &labels))),
            ("cosine", Box::new(|out: &Array2<f64>| cosine_loss_grad(out.view(), targets.view()))),
            ("infonce", Box::new(|out: &Array2<f64>| infonce_grad(out.view(), targets.view(), tau))),
        ];
        for (name, loss) in &losses {
            let (_, g) = model.loss_grad(&batch, &mut |out| loss(out)).map_err(|e| e.to_string())?;
            let mut probe = model.clone();
            for i in 0..g.len() {
                let orig = probe.params().values[i];
                probe.params_mut().values[i] = orig + h;
                let up = loss(&probe.forward(&batch).unwrap()).unwrap().0;
                probe.params_mut().values[i] = orig - h;
                let down = loss(&probe.forward(&batch).unwrap()).unwrap().0;
                probe.params_mut().values[i] = orig;
                let fd = (up - down) / (2.0 * h);
                let rel = (g[i] - fd).abs() / g[i].abs().max(fd.abs()).max(1e-6);
                worst = worst.max(rel);
                ensure(rel < 1e-4, format!("case {case} {name} param {i}: analytic {} vs fd {fd}", g[i]))?;
                checked += 1;
            }
        }
    }
    Ok(format!("50 instances, {checked} partials, max relative error {worst:.2e}"))
}

// Brute-force references, written independently of the library code.

fn brute_rank(row: &[f64], target: usize) -> usize {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    // Descending score; among equal scores the target comes first.
    idx.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap().then((a != target).cmp(&(b != target))));
    idx.iter().position(|&i| i == target).unwrap() + 1
}

fn brute_bh(p: &[f64], q: f64) -> (Vec<f64>, Vec<bool>) {
    let m = p.len();
    let count_le = |x: f64| p.iter().filter(|&&v| v <= x).count();
    let threshold = p
        .iter()
        .copied()
        .filter(|&pj| pj <= count_le(pj) as f64 * q / m as f64)
        .fold(f64::NEG_INFINITY, f64::max);
    let reject = p.iter().map(|&pi| pi <= threshold).collect();
    let adjusted = p
        .iter()
        .map(|&pi| {
            p.iter()
                .filter(|&&pj| pj >= pi)
                .map(|&pj| pj * m as f64 / count_le(pj) as f64)
                .fold(f64::INFINITY, f64::min)
                .min(1.0)
        })
        .collect();
    (adjusted, reject)
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for table in 0..100 {
        let n_rows = rng.random_range(1..40);
        let n_cand = rng.random_range(2..45);
        // Coarse scores so that ties occur.
        let scores = Array2::from_shape_fn((n_rows, n_cand), |_| (rng.random_range(0..20) as f64) / 4.0);
        let targets: Vec<usize> = (0..n_rows).map(|_| rng.random_range(0..n_cand)).collect();
        let ranks: Vec<usize> = scores
            .outer_iter()
            .zip(&targets)
            .map(|(r, &t)| brute_rank(&r.to_vec(), t))
            .collect();
        for k in [1, 5, n_cand] {
            let brute = ranks.iter().filter(|&&r| r <= k).count();
            let got = top_k_hits(scores.view(), &targets, k).map_err(|e| e.to_string())?;
            ensure(got == brute, format!("table {table}: top-{k} {got} vs {brute}"))?;
        }
        let brute_rank_acc =
            ranks.iter().map(|&r| (n_cand - r) as f64 / (n_cand - 1) as f64 * 100.0).sum::<f64>() / n_rows as f64;
        let got = rank_accuracy_pct(scores.view(), &targets).map_err(|e| e.to_string())?;
        ensure(got == brute_rank_acc, format!("table {table}: rank accuracy {got} vs {brute_rank_acc}"))?;

        // Zero-shot tables: a presentation order, a trained subset, predictions on held-out classes.
        let n_classes = rng.random_range(8..41);
        let mut order: Vec<usize> = (0..n_classes).collect();
        for i in (1..n_classes).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let held: Vec<usize> = order.iter().copied().filter(|_| rng.random_bool(0.3)).collect();
        let held = if held.is_empty() { vec![order[0]] } else { held };
        let trained: BTreeSet<usize> = (0..n_classes).filter(|c| !held.contains(c)).collect();
        let trained_list: Vec<usize> = trained.iter().copied().collect();
        let truth: Vec<usize> = (0..rng.random_range(1..60)).map(|_| held[rng.random_range(0..held.len())]).collect();
        let pred: Vec<usize> = truth
            .iter()
            .map(|_| trained_list.get(rng.random_range(0..trained_list.len().max(1))).copied().unwrap_or(0))
            .collect();
        let mut near_hits = 0;
        for (p, t) in pred.iter().zip(&truth) {
            let pos = order.iter().position(|c| c == t).unwrap();
            let mut neighbours = Vec::new();
            if pos > 0 {
                neighbours.push(order[pos - 1]);
            }
            if pos + 1 < order.len() {
                neighbours.push(order[pos + 1]);
            }
            if neighbours.iter().any(|nb| nb == p && trained.contains(nb)) {
                near_hits += 1;
            }
        }
        let brute_near = 100.0 * near_hits as f64 / truth.len() as f64;
        let got = acc_near_pct(&pred, &truth, &order, &trained);
        ensure(got == brute_near, format!("table {table}: Acc_near {got} vs {brute_near}"))?;
        let seventh = 100.0 * pred.iter().filter(|&&p| p == order[6]).count() as f64 / pred.len() as f64;
        let got = acc_7th_pct(&pred, &order);
        ensure(got == seventh, format!("table {table}: Acc_7th {got} vs {seventh}"))?;

        let m = rng.random_range(1..60);
        let p: Vec<f64> = (0..m)
            .map(|_| if rng.random_bool(0.2) { 0.001 * rng.random_range(0..5) as f64 } else { rng.random::<f64>() })
            .collect();
        let bonf: Vec<f64> = p.iter().map(|v| (v * m as f64).min(1.0)).collect();
        ensure(bonferroni(&p).unwrap() == bonf, format!("table {table}: Bonferroni"))?;
        let q = [0.01, 0.05, 0.1][table % 3];
        let (adj, rej) = bh_fdr(&p, q).unwrap();
        let (badj, brej) = brute_bh(&p, q);
        ensure(rej == brej, format!("table {table}: BH rejections differ"))?;
        ensure(adj == badj, format!("table {table}: BH adjusted p-values differ"))?;
    }
    Ok("100 tables: top-k, rank accuracy, Acc_near, Acc_7th, Bonferroni and BH-FDR agree exactly".into())
}

/// Unit-variance AR(1) amplitude process with time constant `tau_s`
/// modulating a 10 Hz carrier, plus white noise.
fn am_surrogate(duration_s: f64, fs: f64, channels: usize, tau_s: f64, seed: u64) -> MultichannelSeries {
    let n = (duration_s * fs) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi = (-1.0 / (tau_s * fs)).exp();
    let innov = (1.0 - phi * phi).sqrt();
    let data = Array2::from_shape_fn((channels, n), |_| 0.0);
    let mut data = data;
    for mut row in data.outer_iter_mut() {
        let mut a: f64 = rng.sample(StandardNormal);
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        for (i, v) in row.iter_mut().enumerate() {
            a = phi * a + innov * rng.sample::<f64, _>(StandardNormal);
            let t = i as f64 / fs;
            let carrier = (std::f64::consts::TAU * 10.0 * t + phase).sin();
            *v = (0.6 * a).exp() * carrier + 0.5 * rng.sample::<f64, _>(StandardNormal);
        }
    }
    MultichannelSeries::new(data, fs, "am").unwrap()
}

fn lrtc_calibration() -> Outcome {
    let fs = 200.0;
    let cfg = LrtcConfig {
        wavelet: WaveletSpec::default().with_linear_freqs(2.0, 30.0, 15).with_log_lags(0.5, 50.0, 20),
        n_segments: 5,
        alpha: 0.01,
        duration_s: None,
    };
    let duration = 5.0 * 104.0;
    let am: Vec<LrtcInput> = (0..3).map(|s| LrtcInput::Continuous(am_surrogate(duration, fs, 2, 20.0, 10 + s))).collect();
    let m = lrtc_map(&am, &cfg).map_err(|e| e.to_string())?;
    let alpha_rows: Vec<usize> = (0..m.freqs.len()).filter(|&i| (8.0..=12.0).contains(&m.freqs[i])).collect();
    let hits = alpha_rows
        .iter()
        .flat_map(|&i| (0..m.lags_s.len()).map(move |j| (i, j)))
        .filter(|&(i, j)| m.reject[[i, j]] && m.lags_s[j] <= 50.0 && m.lags_s[j] * fs > half_length(m.freqs[i], 7.0, fs) as f64)
        .count();
    ensure(hits >= 3, format!("only {hits} significant 8-12 Hz cells beyond the wavelet support"))?;

    let white: Vec<LrtcInput> = (0..3)
        .map(|s| LrtcInput::Continuous(synth(&SurrogateSpec::white(duration, fs, 2, 100 + s)).unwrap()))
        .collect();
    let w = lrtc_map(&white, &cfg).map_err(|e| e.to_string())?;
    let total = w.freqs.len() * w.lags_s.len();
    let false_pos = (0..w.freqs.len())
        .flat_map(|i| (0..w.lags_s.len()).map(move |j| (i, j)))
        .filter(|&(i, j)| w.reject[[i, j]] && w.lags_s[j] * fs > half_length(w.freqs[i], 7.0, fs) as f64)
        .count();
    let inside = w.reject.iter().filter(|r| **r).count() - false_pos;
    let rate = false_pos as f64 / total as f64;
    ensure(rate <= 0.01, format!("white control: {false_pos}/{total} significant cells"))?;

    // Default grid on a recording long enough for the 500 s lag.
    let def = LrtcConfig::default();
    let long = synth(&SurrogateSpec::white(def.surrogate_duration(), fs, 2, 9)).unwrap();
    let dm = lrtc_map(&[LrtcInput::Continuous(long)], &def).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    write_acf(dir.path(), &dm, def.alpha).map_err(|e| e.to_string())?;
    let (f, l, v) = read_matrix(&dir.path().join("acf_values.csv")).map_err(|e| e.to_string())?;
    ensure(v.dim() == (95, 200) && f.len() == 95 && l.len() == 200, format!("default grid {:?}", v.dim()))?;
    Ok(format!(
        "{hits} significant 8-12 Hz cells; white control {false_pos}/{total} beyond wavelet support \
         ({inside} within it); default grid 95x200"
    ))
}

fn random_index(n_domains: usize, n_classes: usize, per_domain: &[usize]) -> DatasetIndex {
    let mut entries = Vec::new();
    let mut t = 0.0;
    for (d, &k) in per_domain.iter().enumerate().take(n_domains) {
        for _ in 0..k {
            entries.push(SampleMeta {
                domain_id: d,
                class_id: d % n_classes,
                t_start: t,
            });
            t += 1.0;
        }
    }
    DatasetIndex {
        kind: TemplateKind::Custom,
        n_classes,
        class_is_domain: n_classes == n_domains,
        entries,
    }
}

fn all_keys(plan: &SplitPlan) -> Vec<SampleKey> {
    plan.train.iter().chain(&plan.val).chain(&plan.test).copied().collect()
}

fn split_laws() -> Outcome {
    let mut runner = TestRunner::new(PropConfig {
        cases: 10_000,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let strategy = (2usize..10, 1usize..5, proptest::collection::vec(10usize..40, 10), any::<u64>(), 2usize..6);
    let result = runner.run(&strategy, |(n_domains, n_classes, per_domain, seed, n_subjects)| {
        let n_classes = n_classes.min(n_domains / 2).max(1);
        let idx = random_index(n_domains, n_classes, &per_domain);
        let n = idx.entries.len();
        let everything: BTreeSet<SampleKey> = (0..n).map(|i| SampleKey::new(0, i)).collect();

        let lso = leave_samples_out(&idx, 0, (8, 1, 1), seed).unwrap();
        let keys = all_keys(&lso);
        prop_assert_eq!(keys.len(), n, "overlap or loss under leave-samples-out");
        prop_assert_eq!(keys.iter().copied().collect::<BTreeSet<_>>(), everything.clone());
        for d in 0..n_domains {
            let in_d = |v: &[SampleKey]| v.iter().filter(|k| idx.entries[k.index].domain_id == d).count() as f64;
            let size = per_domain[d] as f64;
            for (part, share) in [(&lso.train, 0.8), (&lso.val, 0.1), (&lso.test, 0.1)] {
                prop_assert!((in_d(part) - size * share).abs() <= 1.0, "domain {} ratio off", d);
            }
        }

        for fold in leave_domains_out(&idx, 0, seed).unwrap() {
            let keys = all_keys(&fold);
            prop_assert_eq!(keys.len(), n);
            prop_assert_eq!(keys.iter().copied().collect::<BTreeSet<_>>(), everything.clone());
            let doms = |v: &[SampleKey]| v.iter().map(|k| idx.entries[k.index].domain_id).collect::<BTreeSet<_>>();
            let (tr, va, te) = (doms(&fold.train), doms(&fold.val), doms(&fold.test));
            prop_assert!(tr.is_disjoint(&te) && va.is_disjoint(&te), "domain shared with test");
        }

        let subjects: Vec<(u32, usize)> = (0..n_subjects as u32).map(|s| (s * 3 + 1, per_domain[s as usize] * 2)).collect();
        let total: usize = subjects.iter().map(|s| s.1).sum();
        for val in [ValStrategy::Samples, ValStrategy::Subjects] {
            if val == ValStrategy::Subjects && n_subjects < 3 {
                continue;
            }
            for fold in leave_subjects_out(&subjects, val, seed).unwrap() {
                let keys = all_keys(&fold);
                prop_assert_eq!(keys.len(), total);
                prop_assert_eq!(keys.iter().copied().collect::<BTreeSet<_>>().len(), total);
                let subj = |v: &[SampleKey]| v.iter().map(|k| k.subject).collect::<BTreeSet<_>>();
                let (tr, va, te) = (subj(&fold.train), subj(&fold.val), subj(&fold.test));
                prop_assert!(tr.is_disjoint(&te) && va.is_disjoint(&te), "subject shared with test");
                if val == ValStrategy::Subjects {
                    prop_assert!(tr.is_disjoint(&va), "subject shared between train and val");
                }
            }
        }
        Ok(())
    });
    result.map_err(|e| e.to_string())?;
    Ok("10000 cases, zero violations".into())
}

fn without_timestamp(r: &AuditReport) -> String {
    let mut r = r.clone();
    r.meta.timestamp = 0;
    r.to_json()
}

fn replayability() -> Outcome {
    let tiny = json!({
        "subjects": 3,
        "seeds": [3, 4],
        "source": {"type": "surrogate", "kind": {"type": "white"}, "channels": 2},
        "channel_policies": {"cvpr_like": "keep_all", "deap_like": "keep_all"},
        "signature_strength": 0.5,
        "train": {"max_epochs": 1},
        "cnn": {"conv_filters": 3, "hidden_units": 3},
        "retrieval_folds": 2
    });
    let mut checked = Vec::new();
    for preset in ["table1", "table5", "bands", "zeroshot", "retrieval"] {
        let mut patch = tiny.clone();
        if preset == "bands" {
            patch["templates"] = json!(["kul_like"]);
        }
        let cfg = config(preset, patch);
        let a = run_band_audit(&cfg, &cfg.bands).map_err(|e| format!("{preset}: {e}"))?;
        let b = run_band_audit(&cfg, &cfg.bands).map_err(|e| format!("{preset}: {e}"))?;
        ensure(without_timestamp(&a) == without_timestamp(&b), format!("{preset}: reports differ"))?;
        ensure(a.units().any(|c| c.status == CellStatus::Ok), format!("{preset}: no completed cells"))?;
        checked.push(preset);
    }
    let lrtc = |seed: u64| {
        let cfg = LrtcConfig {
            wavelet: WaveletSpec::default().with_linear_freqs(4.0, 20.0, 3).with_log_lags(0.5, 2.0, 4),
            n_segments: 2,
            ..LrtcConfig::default()
        };
        let inputs: Vec<LrtcInput> =
            (0..2).map(|s| LrtcInput::Continuous(synth(&SurrogateSpec::white(10.0, 200.0, 1, seed + s)).unwrap())).collect();
        let dir = tempfile::tempdir().unwrap();
        write_acf(dir.path(), &lrtc_map(&inputs, &cfg).unwrap(), cfg.alpha).unwrap();
        ["acf_values.csv", "acf_pvalues.csv", "acf.json"].map(|f| std::fs::read(dir.path().join(f)).unwrap())
    };
    ensure(lrtc(5) == lrtc(5), "lrtc: outputs differ")?;
    checked.push("lrtc");
    Ok(format!("byte-identical replays for {}", checked.join(", ")))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 9] = [
        (1, "null soundness", null_soundness),
        (2, "pitfall reproduction", pitfall_reproduction),
        (3, "monotone leakage law", monotone_leakage),
        (4, "retrieval pattern", retrieval_pattern),
        (5, "gradient correctness", gradient_correctness),
        (6, "metric oracles", metric_oracles),
        (7, "LRTC calibration", lrtc_calibration),
        (8, "split laws", split_laws),
        (9, "replayability", replayability),
    ];
    let only: Option<u32> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (id, name, run) in criteria {
        if only.map_or(false, |o| o != id) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {id} ({name}): {detail} [{secs:.1} s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {id} ({name}): {detail} [{secs:.1} s]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
