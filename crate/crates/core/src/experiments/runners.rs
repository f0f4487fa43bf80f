//! One function per audit task. Each trains from scratch on the samples a
//! split plan names and scores the held-out part.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::{Array2, Axis};

use super::bank::EmbeddingBank;
use super::config::CnnOverrides;
use super::metrics::{rank_of, trained_neighbours};
use super::{Metric, MetricValue, Pool};
use crate::design::Sample;
use crate::error::{Error, Result};
use crate::neural::{
    cosine_scores, mlp2_train, predict_outputs, train, LossKind, Model, Objective, SimpleCnn, SimpleCnnConfig, Split,
    TrainConfig,
};
use crate::splits::{SplitPlan, Strategy, ZeroShotMode};

/// Hidden width of the classifier trained on frozen domain features.
pub const TLC_DF_HIDDEN: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Done(Vec<MetricValue>),
    /// The task does not apply to this dataset.
    Skipped(String),
    /// The band cannot be analysed at this sampling rate.
    Unavailable(String),
    /// The task raised an error; recorded instead of aborting the grid.
    Failed(String),
}

/// Samples available to a task plus the training setup shared by its models.
#[derive(Debug, Clone)]
pub struct TaskContext<'a> {
    pub pool: Pool<'a>,
    pub train: TrainConfig,
    pub cnn: CnnOverrides,
}

impl<'a> TaskContext<'a> {
    pub fn new(pool: Pool<'a>, train: TrainConfig) -> Self {
        Self {
            pool,
            train,
            cnn: CnnOverrides::default(),
        }
    }

    pub fn cnn_config(&self, n_outputs: usize) -> SimpleCnnConfig {
        let ds = self.pool.first();
        self.cnn
            .apply(SimpleCnnConfig::for_input(ds.channels(), ds.timepoints(), ds.fs(), n_outputs))
    }

    fn fit(
        &self,
        plan: &SplitPlan,
        n_outputs: usize,
        objective: &Objective,
        label: &dyn Fn(&Sample) -> usize,
    ) -> Result<(SimpleCnn, Split<'a>)> {
        let mut model = SimpleCnn::new(self.cnn_config(n_outputs), self.train.seed)?;
        let tr = self.pool.split(&plan.train, label)?;
        let va = self.pool.split(&plan.val, label)?;
        train(&mut model, &self.train, objective, &tr, &va)?;
        let te = self.pool.split(&plan.test, label)?;
        Ok((model, te))
    }
}

fn require_nonempty_test(plan: &SplitPlan) -> Result<()> {
    if plan.test.is_empty() {
        return Err(Error::invalid(format!("{} plan has an empty test partition", plan.strategy)));
    }
    Ok(())
}

fn hits<M: Model + ?Sized>(model: &M, objective: &Objective, split: &Split) -> Result<usize> {
    let out = predict_outputs(model, &split.inputs)?;
    let pred = objective.predict(&out)?;
    Ok(pred.iter().zip(&split.labels).filter(|(p, l)| p == l).count())
}

/// Domain-label classification under leave-samples-out. The trained model is
/// returned for the domain-feature task.
pub fn run_dlc(ctx: &TaskContext, plan: &SplitPlan) -> Result<(SimpleCnn, MetricValue)> {
    if plan.strategy != Strategy::LeaveSamplesOut {
        return Err(Error::invalid(format!("domain classification runs on leave_samples_out, got {}", plan.strategy)));
    }
    require_nonempty_test(plan)?;
    let template = &ctx.pool.first().template;
    let objective = Objective::classification();
    let (model, test) = ctx.fit(plan, template.n_domains, &objective, &|s| s.domain_id)?;
    let k = hits(&model, &objective, &test)?;
    Ok((model, MetricValue::proportion(Metric::Accuracy, k, test.len(), template.domain_chance_pct())))
}

fn features(model: &SimpleCnn, split: &Split) -> Result<Array2<f64>> {
    let mut rows = Vec::with_capacity(split.len());
    for chunk in split.inputs.chunks(256) {
        rows.push(model.forward_features(chunk)?.1);
    }
    let views: Vec<_> = rows.iter().map(|m| m.view()).collect();
    if views.is_empty() {
        return Ok(Array2::zeros((0, model.config.conv_filters)));
    }
    Ok(ndarray::concatenate(Axis(0), &views).expect("same feature width"))
}

fn standardize(m: &mut Array2<f64>, mean: &ndarray::Array1<f64>, sd: &ndarray::Array1<f64>) {
    for mut row in m.outer_iter_mut() {
        row -= mean;
        row /= sd;
    }
}

fn rows(m: &Array2<f64>) -> Vec<&[f64]> {
    let w = m.ncols().max(1);
    m.as_slice().expect("standard layout").chunks(w).collect()
}

/// Class decoding from the frozen domain model's pooled features, on the same
/// partition the domain model was trained on.
pub fn run_tlc_df(ctx: &TaskContext, plan: &SplitPlan, dlc: Option<&SimpleCnn>) -> Result<Outcome> {
    let template = &ctx.pool.first().template;
    if template.class_is_domain() {
        return Ok(Outcome::Skipped("class and domain coincide; domain features decode the class trivially".into()));
    }
    let dlc = dlc.ok_or_else(|| Error::invalid("domain-feature decoding needs a trained domain classifier"))?;
    require_nonempty_test(plan)?;
    let class = |s: &Sample| s.class_id;
    let (tr, va, te) = (
        ctx.pool.split(&plan.train, class)?,
        ctx.pool.split(&plan.val, class)?,
        ctx.pool.split(&plan.test, class)?,
    );
    let (mut ftr, mut fva, mut fte) = (features(dlc, &tr)?, features(dlc, &va)?, features(dlc, &te)?);
    let mean = ftr.mean_axis(Axis(0)).ok_or_else(|| Error::invalid("training split is empty"))?;
    let sd = ftr.std_axis(Axis(0), 0.0).mapv(|v| if v > 1e-12 { v } else { 1.0 });
    for m in [&mut ftr, &mut fva, &mut fte] {
        standardize(m, &mean, &sd);
    }
    let (rtr, rva, rte) = (rows(&ftr), rows(&fva), rows(&fte));
    let strain = Split::new(rtr, tr.labels)?;
    let sval = Split::new(rva, va.labels)?;
    let stest = Split::new(rte, te.labels)?;
    let (mlp, _) = mlp2_train(&strain, &sval, template.n_classes, TLC_DF_HIDDEN, &ctx.train)?;
    let k = hits(&mlp, &Objective::classification(), &stest)?;
    Ok(Outcome::Done(vec![MetricValue::proportion(
        Metric::Accuracy,
        k,
        stest.len(),
        template.class_chance_pct(),
    )]))
}

/// End-to-end class decoding on one plan.
pub fn run_tlc_eeg(ctx: &TaskContext, plan: &SplitPlan) -> Result<MetricValue> {
    run_tlc_eeg_wodo(ctx, std::slice::from_ref(plan))
}

/// End-to-end class decoding pooled over folds (typically leave-domains-out).
pub fn run_tlc_eeg_wodo(ctx: &TaskContext, folds: &[SplitPlan]) -> Result<MetricValue> {
    if folds.is_empty() {
        return Err(Error::invalid("no folds to evaluate"));
    }
    let template = &ctx.pool.first().template;
    let objective = Objective::classification();
    let (mut k, mut n) = (0, 0);
    for plan in folds {
        require_nonempty_test(plan)?;
        let (model, test) = ctx.fit(plan, template.n_classes, &objective, &|s| s.class_id)?;
        k += hits(&model, &objective, &test)?;
        n += test.len();
    }
    Ok(MetricValue::proportion(Metric::Accuracy, k, n, template.class_chance_pct()))
}

/// Trains on the non-held-out classes and reports where held-out samples land:
/// on a trained class adjacent in presentation order (random mode only), and
/// on the seventh-presented class.
pub fn run_zero_shot(ctx: &TaskContext, plan: &SplitPlan) -> Result<Vec<MetricValue>> {
    let Strategy::ZeroShot { mode } = plan.strategy else {
        return Err(Error::invalid(format!("zero-shot evaluation needs a zero-shot plan, got {}", plan.strategy)));
    };
    require_nonempty_test(plan)?;
    let trained: BTreeSet<usize> = ctx
        .pool
        .samples(&plan.train)?
        .into_iter()
        .chain(ctx.pool.samples(&plan.val)?)
        .map(|s| s.class_id)
        .collect();
    let compact: BTreeMap<usize, usize> = trained.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let expand: Vec<usize> = trained.iter().copied().collect();
    let objective = Objective::classification();
    let label = |s: &Sample| compact.get(&s.class_id).copied().unwrap_or(0);
    let (model, test) = ctx.fit(plan, trained.len(), &objective, &label)?;
    let truth: Vec<usize> = ctx.pool.samples(&plan.test)?.iter().map(|s| s.class_id).collect();
    let pred: Vec<usize> = objective
        .predict(&predict_outputs(&model, &test.inputs)?)?
        .into_iter()
        .map(|i| expand[i])
        .collect();
    let order = ctx.pool.first().presentation_order();
    let n = truth.len();
    let m = trained.len() as f64;
    let mut out = Vec::new();
    if mode == ZeroShotMode::Random {
        let mut near_hits = 0;
        let mut chance = 0.0;
        for (p, t) in pred.iter().zip(&truth) {
            let nb = trained_neighbours(*t, &order, &trained);
            near_hits += usize::from(nb.contains(p));
            chance += nb.len() as f64 / m;
        }
        out.push(MetricValue::proportion(Metric::AccNear, near_hits, n, 100.0 * chance / n as f64));
    }
    let seventh = order.get(6).copied();
    let k7 = pred.iter().filter(|&&p| Some(p) == seventh).count();
    let chance7 = match seventh {
        Some(c) if trained.contains(&c) => 100.0 / m,
        _ => 0.0,
    };
    out.push(MetricValue::proportion(Metric::Acc7th, k7, n, chance7));
    let tag = match mode {
        ZeroShotMode::FirstSix => "first_six",
        ZeroShotMode::Random => "random",
    };
    Ok(out.into_iter().map(|v| v.with_variant(tag)).collect())
}

/// Regresses class embeddings and ranks candidates by cosine similarity.
/// Candidates are all classes when every class was trained on, otherwise the
/// classes held out by the fold. Results are pooled over `plans`.
pub fn run_retrieval(ctx: &TaskContext, plans: &[SplitPlan], loss: LossKind, bank: &EmbeddingBank) -> Result<Vec<MetricValue>> {
    if !loss.is_embedding() {
        return Err(Error::invalid("retrieval needs an embedding loss (cosine or infonce)"));
    }
    if plans.is_empty() {
        return Err(Error::invalid("no retrieval folds"));
    }
    let template = &ctx.pool.first().template;
    if bank.n_classes() != template.n_classes {
        return Err(Error::invalid(format!(
            "bank holds {} classes, template has {}",
            bank.n_classes(),
            template.n_classes
        )));
    }
    let objective = Objective::embedding(loss, bank.vectors().view());
    let (mut top1, mut top5, mut rank_sum, mut n, mut chance1, mut chance5) = (0, 0, 0.0, 0, 0.0, 0.0);
    for plan in plans {
        require_nonempty_test(plan)?;
        let mut model = SimpleCnn::new(ctx.cnn_config(bank.dim()), ctx.train.seed)?;
        let class = |s: &Sample| s.class_id;
        let tr = ctx.pool.split(&plan.train, class)?;
        let va = ctx.pool.split(&plan.val, class)?;
        train(&mut model, &ctx.train, &objective, &tr, &va)?;
        let te = ctx.pool.split(&plan.test, class)?;
        let seen: BTreeSet<usize> = tr.labels.iter().chain(&va.labels).copied().collect();
        let candidates: Vec<usize> = if te.labels.iter().all(|c| seen.contains(c)) {
            (0..bank.n_classes()).collect()
        } else {
            te.labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
        };
        let nc = candidates.len();
        if nc < 2 {
            return Err(Error::invalid("retrieval needs at least two candidates"));
        }
        let pos: BTreeMap<usize, usize> = candidates.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let cand = bank.vectors().select(Axis(0), &candidates);
        let scores = cosine_scores(predict_outputs(&model, &te.inputs)?.view(), cand.view())?;
        for (row, label) in scores.outer_iter().zip(&te.labels) {
            let r = rank_of(&row.to_vec(), pos[label]);
            top1 += usize::from(r == 1);
            top5 += usize::from(r <= 5);
            rank_sum += (nc - r) as f64 / (nc - 1) as f64 * 100.0;
        }
        let m = te.len();
        n += m;
        chance1 += m as f64 * 100.0 / nc as f64;
        chance5 += m as f64 * 100.0 * nc.min(5) as f64 / nc as f64;
    }
    let nf = n as f64;
    Ok(vec![
        MetricValue::proportion(Metric::Top1, top1, n, chance1 / nf),
        MetricValue::proportion(Metric::Top5, top5, n, chance5 / nf),
        MetricValue {
            metric: Metric::RankAcc,
            variant: None,
            accuracy_pct: rank_sum / nf,
            chance_pct: 50.0,
            n_test: n,
            n_correct: None,
        },
    ]
    .into_iter()
    .map(|v| v.with_variant(loss.name()))
    .collect())
}

/// End-to-end class decoding on leave-subjects-out folds, reporting the
/// training, validation and test accuracy pooled over folds.
pub fn run_cross_subject(ctx: &TaskContext, folds: &[SplitPlan]) -> Result<Vec<MetricValue>> {
    if folds.is_empty() {
        return Err(Error::invalid("no folds to evaluate"));
    }
    let template = &ctx.pool.first().template;
    let objective = Objective::classification();
    let mut counts = [(0, 0); 3];
    for plan in folds {
        require_nonempty_test(plan)?;
        let (model, test) = ctx.fit(plan, template.n_classes, &objective, &|s| s.class_id)?;
        let tr = ctx.pool.split(&plan.train, |s| s.class_id)?;
        let va = ctx.pool.split(&plan.val, |s| s.class_id)?;
        for (slot, split) in counts.iter_mut().zip([&tr, &va, &test]) {
            slot.0 += hits(&model, &objective, split)?;
            slot.1 += split.len();
        }
    }
    let chance = template.class_chance_pct();
    Ok(["train", "val", "test"]
        .into_iter()
        .zip(counts)
        .filter(|(_, (_, n))| *n > 0)
        .map(|(tag, (k, n))| MetricValue::proportion(Metric::Accuracy, k, n, chance).with_variant(tag))
        .collect())
}
