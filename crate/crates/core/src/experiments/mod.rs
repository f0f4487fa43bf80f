//! Audit tasks, the grid orchestrator and report assembly.

mod bank;
mod config;
pub mod metrics;
mod orchestrator;
pub mod report;
mod runners;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::design::{LabeledDataset, Sample};
use crate::error::{Error, Result};
use crate::neural::Split;
use crate::splits::SampleKey;

pub use bank::{EmbeddingBank, EMBEDDING_DIM};
pub use config::{CnnOverrides, RunConfig, Source};
pub use orchestrator::{build_dataset, build_recording, layout_seed, run_audit, run_band_audit, sweep_domain_strength, JobResult, SweepPoint, TaskResult};
pub use report::{AuditReport, Cell, CellStatus, ReportMeta};
pub use runners::{
    run_cross_subject, run_dlc, run_retrieval, run_tlc_df, run_tlc_eeg, run_tlc_eeg_wodo, run_zero_shot, Outcome,
    TaskContext,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Dlc,
    TlcDf,
    TlcEeg,
    TlcEegWodo,
    ZeroShot,
    Retrieval,
}

impl TaskKind {
    pub const ALL: [TaskKind; 6] = [
        TaskKind::Dlc,
        TaskKind::TlcDf,
        TaskKind::TlcEeg,
        TaskKind::TlcEegWodo,
        TaskKind::ZeroShot,
        TaskKind::Retrieval,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Dlc => "dlc",
            TaskKind::TlcDf => "tlc_df",
            TaskKind::TlcEeg => "tlc_eeg",
            TaskKind::TlcEegWodo => "tlc_eeg_wodo",
            TaskKind::ZeroShot => "zero_shot",
            TaskKind::Retrieval => "retrieval",
        }
    }

    /// Row label used in table grids.
    pub fn label(self) -> &'static str {
        match self {
            TaskKind::Dlc => "DLC",
            TaskKind::TlcDf => "TLC-DF",
            TaskKind::TlcEeg => "TLC-EEG",
            TaskKind::TlcEegWodo => "TLC-EEG-woDO",
            TaskKind::ZeroShot => "Zero-shot",
            TaskKind::Retrieval => "Retrieval",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskKind::ALL
            .into_iter()
            .find(|t| t.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown task {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    Top1,
    Top5,
    RankAcc,
    AccNear,
    Acc7th,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Accuracy,
        Metric::Top1,
        Metric::Top5,
        Metric::RankAcc,
        Metric::AccNear,
        Metric::Acc7th,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Top1 => "top1",
            Metric::Top5 => "top5",
            Metric::RankAcc => "rank_acc",
            Metric::AccNear => "acc_near",
            Metric::Acc7th => "acc_7th",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Metric::Accuracy => "Accuracy",
            Metric::Top1 => "Top1",
            Metric::Top5 => "Top5",
            Metric::RankAcc => "RankAcc",
            Metric::AccNear => "Acc_near",
            Metric::Acc7th => "Acc_7th",
        }
    }
}

/// One measured quantity on one test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub metric: Metric,
    /// Distinguishes several values of one metric within a task: retrieval
    /// loss, zero-shot mode, or the partition of a cross-subject run.
    pub variant: Option<String>,
    pub accuracy_pct: f64,
    pub chance_pct: f64,
    pub n_test: usize,
    /// Hit count when the metric is a proportion of independent trials.
    pub n_correct: Option<usize>,
}

impl MetricValue {
    pub fn proportion(metric: Metric, hits: usize, n: usize, chance_pct: f64) -> Self {
        Self {
            metric,
            variant: None,
            accuracy_pct: 100.0 * hits as f64 / n as f64,
            chance_pct,
            n_test: n,
            n_correct: Some(hits),
        }
    }

    pub fn with_variant(mut self, variant: impl Into<String>) -> Self {
        self.variant = Some(variant.into());
        self
    }
}

/// Samples of one or more subjects, addressed by [`SampleKey`].
#[derive(Debug, Clone, Default)]
pub struct Pool<'a> {
    sets: BTreeMap<u32, &'a LabeledDataset>,
}

impl<'a> Pool<'a> {
    pub fn new(datasets: impl IntoIterator<Item = &'a LabeledDataset>) -> Result<Self> {
        let mut sets = BTreeMap::new();
        for ds in datasets {
            if sets.insert(ds.subject_id, ds).is_some() {
                return Err(Error::invalid(format!("subject {} appears twice", ds.subject_id)));
            }
        }
        let first = sets.values().next().ok_or_else(|| Error::invalid("empty dataset pool"))?;
        let (c, t) = (first.channels(), first.timepoints());
        if sets.values().any(|d| d.channels() != c || d.timepoints() != t || d.template != first.template) {
            return Err(Error::Shape("pooled datasets differ in shape or template".into()));
        }
        Ok(Self { sets })
    }

    pub fn single(dataset: &'a LabeledDataset) -> Self {
        Self {
            sets: BTreeMap::from([(dataset.subject_id, dataset)]),
        }
    }

    pub fn dataset(&self, subject: u32) -> Result<&'a LabeledDataset> {
        self.sets
            .get(&subject)
            .copied()
            .ok_or_else(|| Error::invalid(format!("subject {subject} is not in the pool")))
    }

    pub fn first(&self) -> &'a LabeledDataset {
        self.sets.values().next().expect("pool is never empty")
    }

    pub fn subjects(&self) -> Vec<(u32, usize)> {
        self.sets.iter().map(|(s, d)| (*s, d.len())).collect()
    }

    pub fn sample(&self, key: SampleKey) -> Result<&'a Sample> {
        self.dataset(key.subject)?
            .samples
            .get(key.index)
            .ok_or_else(|| Error::invalid(format!("sample {}:{} out of range", key.subject, key.index)))
    }

    pub fn samples(&self, keys: &[SampleKey]) -> Result<Vec<&'a Sample>> {
        keys.iter().map(|k| self.sample(*k)).collect()
    }

    pub fn split(&self, keys: &[SampleKey], label: impl Fn(&Sample) -> usize) -> Result<Split<'a>> {
        let samples = self.samples(keys)?;
        Split::new(
            samples.iter().map(|s| s.values()).collect(),
            samples.iter().map(|s| label(s)).collect(),
        )
    }
}
