//! Expands a run configuration into independent jobs, runs them on a worker
//! pool and returns their results in a fixed order.

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bank::{EmbeddingBank, EMBEDDING_DIM};
use super::config::{RunConfig, Source};
use super::report::AuditReport;
use super::runners::{
    run_cross_subject, run_dlc, run_retrieval, run_tlc_df, run_tlc_eeg, run_tlc_eeg_wodo, run_zero_shot, Outcome,
    TaskContext,
};
use super::{Metric, MetricValue, Pool, TaskKind};
use crate::design::{reorganize_band, DesignTemplate, LabeledDataset, TemplateKind};
use crate::dsp::Band;
use crate::error::{Error, Result};
use crate::neural::SimpleCnn;
use crate::signal::{inject_domain_signatures, load_recording, synth, DomainSignature, MultichannelSeries};
use crate::splits::{
    class_disjoint_folds, leave_domains_out, leave_samples_out, leave_subjects_out, SplitPlan, Strategy,
};
use crate::stats::{mean, sem};

const STREAM_SYNTH: u64 = 0;
const STREAM_SIGNATURE: u64 = 1;
const STREAM_LAYOUT: u64 = 2;
const STREAM_SPLIT: u64 = 3;
const STREAM_MODEL: u64 = 4;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix(a: u64, b: u64) -> u64 {
    splitmix64(a ^ splitmix64(b))
}

fn template_tag(kind: TemplateKind) -> u64 {
    match kind {
        TemplateKind::CvprLike => 1,
        TemplateKind::DeapLike => 2,
        TemplateKind::KulLike => 3,
        TemplateKind::Custom => 4,
    }
}

/// Root seed of one (seed, template, subject) recording. Bands share it, so
/// every band of a unit is cut from the same recording.
fn unit_seed(seed: u64, kind: TemplateKind, subject: u32) -> u64 {
    mix(mix(seed, template_tag(kind)), u64::from(subject))
}

/// Result of one task within one job.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskResult {
    pub task: TaskKind,
    pub split: String,
    pub outcome: Outcome,
}

/// Results of one (template, band, seed, subject) job; `subject` is `None`
/// for cross-subject jobs that pool every subject.
#[derive(Debug, Clone, PartialEq)]
pub struct JobResult {
    pub template: TemplateKind,
    pub band: Band,
    pub seed: u64,
    pub subject: Option<u32>,
    pub tasks: Vec<TaskResult>,
}

/// Seed of the domain layout for one (seed, template, subject) unit.
pub fn layout_seed(seed: u64, kind: TemplateKind, subject: u32) -> u64 {
    mix(unit_seed(seed, kind, subject), STREAM_LAYOUT)
}

/// Synthesize (or load) one subject's continuous recording. Surrogates carry
/// one domain signature per domain, placed by [`layout_seed`].
pub fn build_recording(cfg: &RunConfig, template: &DesignTemplate, subject: u32, seed: u64) -> Result<MultichannelSeries> {
    let unit = unit_seed(seed, template.kind, subject);
    let layout_seed = mix(unit, STREAM_LAYOUT);
    Ok(match &cfg.source {
        Source::Surrogate { .. } => {
            let spec = cfg
                .surrogate_spec(template, template.required_duration(), mix(unit, STREAM_SYNTH))
                .expect("surrogate source");
            let needed = template.required_duration();
            if cfg.signature_strength > 0.0 && spec.duration_s > 0.0 && spec.duration_s < needed {
                return Err(Error::Config(format!(
                    "surrogate duration {} s is shorter than the {} layout ({needed} s)",
                    spec.duration_s, template.kind
                )));
            }
            let series = synth(&spec)?.with_origin(format!("surrogate:seed={seed}:subject={subject}"));
            if cfg.signature_strength > 0.0 {
                let fs = series.fs();
                let windows: Vec<_> = template.layout(layout_seed).iter().map(|w| w.samples(fs)).collect();
                let mut rng = ChaCha8Rng::seed_from_u64(mix(unit, STREAM_SIGNATURE));
                let sigs: Vec<DomainSignature> = (0..windows.len())
                    .map(|d| {
                        DomainSignature::draw(d, series.channels(), &cfg.signature_profile, cfg.signature_strength, &mut rng)
                    })
                    .collect();
                inject_domain_signatures(&series, &windows, &sigs)?
            } else {
                series
            }
        }
        Source::Recordings { paths } => {
            let path = paths
                .get(&template.kind)
                .and_then(|v| v.get(subject as usize))
                .ok_or_else(|| Error::Config(format!("no recording for {} subject {subject}", template.kind)))?;
            load_recording(path)?
        }
    })
}

/// [`build_recording`] followed by band filtering and reorganization.
pub fn build_dataset(
    cfg: &RunConfig,
    template: &DesignTemplate,
    subject: u32,
    seed: u64,
    band: Band,
) -> Result<LabeledDataset> {
    let series = build_recording(cfg, template, subject, seed)?;
    reorganize_band(&series, template, subject, layout_seed(seed, template.kind, subject), band)
}

fn failed(e: Error) -> Outcome {
    Outcome::Failed(e.to_string())
}

struct SubjectRun<'a> {
    cfg: &'a RunConfig,
    ds: &'a LabeledDataset,
    ctx: TaskContext<'a>,
    split_seed: u64,
    lso_plan: Option<SplitPlan>,
    dlc: Option<(SimpleCnn, MetricValue)>,
}

impl<'a> SubjectRun<'a> {
    fn lso_plan(&mut self) -> Result<SplitPlan> {
        if self.lso_plan.is_none() {
            self.lso_plan = Some(leave_samples_out(&self.ds.index(), self.ds.subject_id, (8, 1, 1), self.split_seed)?);
        }
        Ok(self.lso_plan.clone().expect("just set"))
    }

    fn dlc(&mut self) -> Result<&(SimpleCnn, MetricValue)> {
        if self.dlc.is_none() {
            let plan = self.lso_plan()?;
            self.dlc = Some(run_dlc(&self.ctx, &plan)?);
        }
        Ok(self.dlc.as_ref().expect("just set"))
    }

    fn run(&mut self, task: TaskKind) -> Vec<TaskResult> {
        let one = |split: String, outcome: Outcome| {
            vec![TaskResult {
                task,
                split,
                outcome,
            }]
        };
        let lso_name = Strategy::LeaveSamplesOut.to_string();
        let template = &self.ds.template;
        match task {
            TaskKind::Dlc => one(lso_name, self.dlc().map_or_else(failed, |d| Outcome::Done(vec![d.1.clone()]))),
            TaskKind::TlcDf => {
                let r = (|| {
                    let plan = self.lso_plan()?;
                    if template.class_is_domain() {
                        return run_tlc_df(&self.ctx, &plan, None);
                    }
                    let model = self.dlc()?.0.clone();
                    run_tlc_df(&self.ctx, &plan, Some(&model))
                })();
                one(lso_name, r.unwrap_or_else(failed))
            }
            TaskKind::TlcEeg => {
                // With class identical to domain, class decoding is domain decoding.
                let r = if template.class_is_domain() {
                    self.dlc().map(|d| d.1.clone())
                } else {
                    self.lso_plan().and_then(|p| run_tlc_eeg(&self.ctx, &p))
                };
                one(lso_name, r.map_or_else(failed, |v| Outcome::Done(vec![v])))
            }
            TaskKind::TlcEegWodo => {
                let split = Strategy::LeaveDomainsOut.to_string();
                if template.class_is_domain() {
                    return one(split, Outcome::Skipped("every class has a single domain".into()));
                }
                let r = leave_domains_out(&self.ds.index(), self.ds.subject_id, self.split_seed)
                    .and_then(|folds| run_tlc_eeg_wodo(&self.ctx, &folds));
                one(split, r.map_or_else(failed, |v| Outcome::Done(vec![v])))
            }
            TaskKind::ZeroShot => {
                if template.kind != TemplateKind::CvprLike || !template.class_is_domain() {
                    return one("zero_shot".into(), Outcome::Skipped("needs a 40-class block design".into()));
                }
                self.cfg
                    .zero_shot_modes
                    .iter()
                    .map(|&mode| {
                        let r = crate::splits::zero_shot_split(
                            &self.ds.index(),
                            self.ds.subject_id,
                            mode,
                            self.cfg.zero_shot_held_out,
                            self.split_seed,
                        )
                        .and_then(|plan| run_zero_shot(&self.ctx, &plan));
                        TaskResult {
                            task,
                            split: Strategy::ZeroShot { mode }.to_string(),
                            outcome: r.map_or_else(failed, Outcome::Done),
                        }
                    })
                    .collect()
            }
            TaskKind::Retrieval => {
                if template.kind != TemplateKind::CvprLike || !template.class_is_domain() {
                    return one("retrieval".into(), Outcome::Skipped("needs a 40-class block design".into()));
                }
                let bank = match EmbeddingBank::new(template.n_classes, EMBEDDING_DIM, self.cfg.bank_seed) {
                    Ok(b) => b,
                    Err(e) => return one("retrieval".into(), failed(e)),
                };
                let mut out = Vec::new();
                for split in self
                    .cfg
                    .splits
                    .iter()
                    .filter(|s| matches!(s, Strategy::LeaveSamplesOut | Strategy::LeaveDomainsOut))
                {
                    let plans = match split {
                        Strategy::LeaveSamplesOut => self.lso_plan().map(|p| vec![p]),
                        _ => class_disjoint_folds(
                            &self.ds.index(),
                            self.ds.subject_id,
                            self.cfg.retrieval_folds,
                            self.split_seed,
                        ),
                    };
                    let r = plans.and_then(|plans| {
                        let mut all = Vec::new();
                        for loss in &self.cfg.retrieval_losses {
                            all.extend(run_retrieval(&self.ctx, &plans, *loss, &bank)?);
                        }
                        Ok(all)
                    });
                    out.push(TaskResult {
                        task,
                        split: split.to_string(),
                        outcome: r.map_or_else(failed, Outcome::Done),
                    });
                }
                out
            }
        }
    }
}

fn unavailable(tasks: &[TaskKind], split: &str, why: &str) -> Vec<TaskResult> {
    tasks
        .iter()
        .map(|&task| TaskResult {
            task,
            split: split.to_string(),
            outcome: Outcome::Unavailable(why.to_string()),
        })
        .collect()
}

fn all_failed(tasks: &[TaskKind], split: &str, e: &Error) -> Vec<TaskResult> {
    tasks
        .iter()
        .map(|&task| TaskResult {
            task,
            split: split.to_string(),
            outcome: Outcome::Failed(e.to_string()),
        })
        .collect()
}

fn subject_job(cfg: &RunConfig, kind: TemplateKind, band: Band, seed: u64, subject: u32) -> JobResult {
    let mut result = JobResult {
        template: kind,
        band,
        seed,
        subject: Some(subject),
        tasks: Vec::new(),
    };
    let tasks: Vec<TaskKind> = cfg.tasks.clone();
    let template = match cfg.template(kind) {
        Ok(t) => t,
        Err(e) => {
            result.tasks = all_failed(&tasks, "-", &e);
            return result;
        }
    };
    if !band.available_at(template.target_fs) {
        result.tasks = unavailable(&tasks, "-", &format!("{band} is not below Nyquist at {} Hz", template.target_fs));
        return result;
    }
    info!("job {kind} band={band} seed={seed} subject={subject}");
    let ds = match build_dataset(cfg, &template, subject, seed, band) {
        Ok(d) => d,
        Err(e) => {
            warn!("{kind} subject {subject}: {e}");
            result.tasks = all_failed(&tasks, "-", &e);
            return result;
        }
    };
    let unit = unit_seed(seed, kind, subject);
    let mut ctx = TaskContext::new(Pool::single(&ds), cfg.train.with_seed(mix(unit, STREAM_MODEL)));
    ctx.cnn = cfg.cnn;
    let mut run = SubjectRun {
        cfg,
        ds: &ds,
        ctx,
        split_seed: mix(unit, STREAM_SPLIT),
        lso_plan: None,
        dlc: None,
    };
    for task in tasks {
        result.tasks.extend(run.run(task));
    }
    result
}

fn cross_subject_job(cfg: &RunConfig, kind: TemplateKind, band: Band, seed: u64) -> JobResult {
    let splits: Vec<Strategy> = cfg
        .splits
        .iter()
        .copied()
        .filter(|s| matches!(s, Strategy::LeaveSubjectsOut { .. }))
        .collect();
    let mut result = JobResult {
        template: kind,
        band,
        seed,
        subject: None,
        tasks: Vec::new(),
    };
    let outcome = |split: &Strategy, outcome: Outcome| TaskResult {
        task: TaskKind::TlcEeg,
        split: split.to_string(),
        outcome,
    };
    let datasets = (|| {
        let template = cfg.template(kind)?;
        if !band.available_at(template.target_fs) {
            return Ok(None);
        }
        info!("cross-subject job {kind} band={band} seed={seed}");
        (0..cfg.n_subjects(kind))
            .map(|s| build_dataset(cfg, &template, s, seed, band))
            .collect::<Result<Vec<_>>>()
            .map(Some)
    })();
    let datasets = match datasets {
        Ok(Some(d)) => d,
        Ok(None) => {
            result.tasks = splits
                .iter()
                .map(|s| outcome(s, Outcome::Unavailable(format!("{band} is not below Nyquist"))))
                .collect();
            return result;
        }
        Err(e) => {
            result.tasks = splits.iter().map(|s| outcome(s, Outcome::Failed(e.to_string()))).collect();
            return result;
        }
    };
    let base = mix(mix(seed, template_tag(kind)), u64::MAX);
    for split in &splits {
        let Strategy::LeaveSubjectsOut { val } = *split else { unreachable!() };
        let r = Pool::new(datasets.iter()).and_then(|pool| {
            let folds = leave_subjects_out(&pool.subjects(), val, mix(base, STREAM_SPLIT))?;
            let mut ctx = TaskContext::new(pool, cfg.train.with_seed(mix(base, STREAM_MODEL)));
            ctx.cnn = cfg.cnn;
            run_cross_subject(&ctx, &folds)
        });
        result.tasks.push(outcome(split, r.map_or_else(failed, Outcome::Done)));
    }
    result
}

#[derive(Debug, Clone, Copy)]
enum Job {
    Subject(TemplateKind, Band, u64, u32),
    Cross(TemplateKind, Band, u64),
}

fn jobs(cfg: &RunConfig) -> Vec<Job> {
    let cross = cfg.tasks.contains(&TaskKind::TlcEeg)
        && cfg.splits.iter().any(|s| matches!(s, Strategy::LeaveSubjectsOut { .. }));
    let per_subject = !cross || cfg.splits.iter().any(|s| !matches!(s, Strategy::LeaveSubjectsOut { .. }));
    let mut out = Vec::new();
    for &kind in &cfg.templates {
        for &band in &cfg.bands {
            for &seed in &cfg.seeds {
                if per_subject {
                    out.extend((0..cfg.n_subjects(kind)).map(|s| Job::Subject(kind, band, seed, s)));
                }
                if cross {
                    out.push(Job::Cross(kind, band, seed));
                }
            }
        }
    }
    out
}

/// Runs the configured grid. Only configuration problems are fatal; task
/// failures are recorded in the results.
pub fn run_audit(cfg: &RunConfig) -> Result<Vec<JobResult>> {
    cfg.validate()?;
    let jobs = jobs(cfg);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(|| {
        jobs.par_iter()
            .map(|job| match *job {
                Job::Subject(k, b, s, subj) => subject_job(cfg, k, b, s, subj),
                Job::Cross(k, b, s) => cross_subject_job(cfg, k, b, s),
            })
            .collect()
    }))
}

/// Runs the grid once per band in `bands` and assembles the report.
pub fn run_band_audit(cfg: &RunConfig, bands: &[Band]) -> Result<AuditReport> {
    let cfg = RunConfig {
        bands: bands.to_vec(),
        ..cfg.clone()
    };
    let jobs = run_audit(&cfg)?;
    AuditReport::build(&cfg, &jobs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub gamma: f64,
    pub mean_pct: f64,
    pub sem_pct: f64,
    pub chance_pct: f64,
    /// One value per (subject, seed) unit.
    pub values: Vec<f64>,
}

/// Accuracy of `task` under leave-samples-out as the domain-signature
/// strength varies. The primary metric of the task is used (top-1 for
/// retrieval).
pub fn sweep_domain_strength(cfg: &RunConfig, template: TemplateKind, gammas: &[f64], task: TaskKind) -> Result<Vec<SweepPoint>> {
    if gammas.is_empty() || gammas.iter().any(|g| !(0.0..=1.0).contains(g)) || gammas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("strength grid must be non-empty, within [0, 1] and ascending"));
    }
    if cfg.seeds.len() < 3 {
        return Err(Error::invalid("a strength sweep needs at least 3 seeds"));
    }
    if matches!(cfg.source, Source::Recordings { .. }) {
        return Err(Error::invalid("a strength sweep needs a surrogate source"));
    }
    let lso_name = Strategy::LeaveSamplesOut.to_string();
    gammas
        .iter()
        .map(|&gamma| {
            let c = RunConfig {
                templates: vec![template],
                tasks: vec![task],
                splits: vec![Strategy::LeaveSamplesOut],
                bands: vec![Band::Full],
                signature_strength: gamma,
                ..cfg.clone()
            };
            let mut values = Vec::new();
            let mut chance = Vec::new();
            for job in run_audit(&c)? {
                for t in job.tasks.iter().filter(|t| t.split == lso_name) {
                    match &t.outcome {
                        Outcome::Done(v) => {
                            let m = v
                                .iter()
                                .find(|m| matches!(m.metric, Metric::Accuracy | Metric::Top1))
                                .ok_or_else(|| Error::invalid(format!("{task} has no accuracy metric")))?;
                            values.push(m.accuracy_pct);
                            chance.push(m.chance_pct);
                        }
                        Outcome::Failed(e) => return Err(Error::Numerical(e.clone())),
                        Outcome::Skipped(why) | Outcome::Unavailable(why) => {
                            return Err(Error::invalid(format!("{task} cannot be swept: {why}")))
                        }
                    }
                }
            }
            Ok(SweepPoint {
                gamma,
                mean_pct: mean(&values),
                sem_pct: if values.len() > 1 { sem(&values) } else { 0.0 },
                chance_pct: mean(&chance),
                values,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::ChannelPolicy;
    use crate::neural::TrainConfig;
    use crate::signal::SurrogateKind;
    use std::collections::BTreeMap;

    fn tiny(tasks: Vec<TaskKind>) -> RunConfig {
        RunConfig {
            templates: vec![TemplateKind::KulLike],
            tasks,
            source: Source::Surrogate {
                kind: SurrogateKind::White,
                channels: 2,
                channel_mixing: 0.0,
                line_noise: None,
                fs: None,
                duration_s: None,
            },
            train: TrainConfig {
                max_epochs: 1,
                batch_size: 128,
                ..Default::default()
            },
            cnn: super::super::CnnOverrides {
                conv_filters: Some(4),
                kernel_width: Some(4),
                hidden_units: Some(4),
            },
            channel_policies: BTreeMap::from([(TemplateKind::CvprLike, ChannelPolicy::KeepAll)]),
            ..RunConfig::default()
        }
    }

    #[test]
    fn seeds_are_reproducible_and_distinct() {
        let cfg = tiny(vec![TaskKind::Dlc]);
        let t = cfg.template(TemplateKind::KulLike).unwrap();
        let a = build_dataset(&cfg, &t, 0, 1, Band::Full).unwrap();
        let b = build_dataset(&cfg, &t, 0, 1, Band::Full).unwrap();
        let c = build_dataset(&cfg, &t, 1, 1, Band::Full).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.samples[0].data, c.samples[0].data);
    }

    #[test]
    fn grid_shape_and_unavailable_bands() {
        let mut cfg = tiny(vec![TaskKind::Dlc, TaskKind::TlcEegWodo]);
        cfg.bands = vec![Band::Full, Band::HighGamma];
        let jobs = run_audit(&cfg).unwrap();
        assert_eq!(jobs.len(), 2);
        assert_eq!(jobs[1].band, Band::HighGamma);
        assert!(jobs[1].tasks.iter().all(|t| matches!(t.outcome, Outcome::Unavailable(_))));
        assert!(jobs[0].tasks.iter().all(|t| matches!(t.outcome, Outcome::Done(_))));
        assert_eq!(jobs[0].tasks.len(), 2);
    }

    #[test]
    fn task_failures_do_not_abort() {
        let mut cfg = tiny(vec![TaskKind::Dlc]);
        cfg.train.lr = 1e300;
        let jobs = run_audit(&cfg).unwrap();
        assert!(matches!(jobs[0].tasks[0].outcome, Outcome::Failed(_)), "{:?}", jobs[0].tasks[0].outcome);
    }

    #[test]
    fn sweep_rejects_bad_grids() {
        let cfg = RunConfig {
            seeds: vec![0, 1, 2],
            ..tiny(vec![TaskKind::Dlc])
        };
        assert!(sweep_domain_strength(&cfg, TemplateKind::KulLike, &[0.5, 0.1], TaskKind::Dlc).is_err());
        assert!(sweep_domain_strength(&cfg, TemplateKind::KulLike, &[0.0, 1.5], TaskKind::Dlc).is_err());
        let few = RunConfig {
            seeds: vec![0],
            ..cfg
        };
        assert!(sweep_domain_strength(&few, TemplateKind::KulLike, &[0.0], TaskKind::Dlc).is_err());
    }
}
