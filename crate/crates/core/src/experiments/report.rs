//! Audit reports: per-unit and summary cells, table-shaped CSV grids, the
//! leakage rule and a plain-text summary.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::orchestrator::JobResult;
use super::runners::Outcome;
use super::{Metric, MetricValue, TaskKind};
use crate::design::TemplateKind;
use crate::dsp::Band;
use crate::error::{Error, Result};
use crate::splits::Strategy;
use crate::stats::{binomial_p_greater, binomial_se_pct, bonferroni, mean, one_sample_ttest, sem, Alternative};

pub const DISPERSION: &str =
    "summary sem_pct: standard error of the mean over (subject, seed) units; unit sem_pct: binomial standard error";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Skipped,
    Unavailable,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub task: TaskKind,
    pub template: TemplateKind,
    pub split: String,
    pub band: Band,
    pub metric: Option<Metric>,
    pub variant: Option<String>,
    /// `None` on summary cells and on cross-subject units.
    pub subject: Option<u32>,
    /// `None` on summary cells.
    pub seed: Option<u64>,
    pub summary: bool,
    pub accuracy_pct: Option<f64>,
    pub chance_pct: Option<f64>,
    pub sem_pct: Option<f64>,
    pub p_value: Option<f64>,
    /// Bonferroni-adjusted across summary cells.
    pub p_adjusted: Option<f64>,
    pub n_test: Option<usize>,
    pub n_correct: Option<usize>,
    pub n_units: usize,
    pub status: CellStatus,
    pub note: Option<String>,
}

type GroupKey = (TaskKind, TemplateKind, String, Band, Option<Metric>, Option<String>);

impl Cell {
    fn key(&self) -> GroupKey {
        (
            self.task,
            self.template,
            self.split.clone(),
            self.band,
            self.metric,
            self.variant.clone(),
        )
    }

    fn blank(task: TaskKind, template: TemplateKind, split: &str, band: Band) -> Self {
        Self {
            task,
            template,
            split: split.to_string(),
            band,
            metric: None,
            variant: None,
            subject: None,
            seed: None,
            summary: false,
            accuracy_pct: None,
            chance_pct: None,
            sem_pct: None,
            p_value: None,
            p_adjusted: None,
            n_test: None,
            n_correct: None,
            n_units: 1,
            status: CellStatus::Ok,
            note: None,
        }
    }

    fn from_metric(mut self, v: &MetricValue) -> Self {
        self.metric = Some(v.metric);
        self.variant = v.variant.clone();
        self.accuracy_pct = Some(v.accuracy_pct);
        self.chance_pct = Some(v.chance_pct);
        self.n_test = Some(v.n_test);
        self.n_correct = v.n_correct;
        if let Some(k) = v.n_correct {
            self.sem_pct = Some(binomial_se_pct(v.accuracy_pct, v.n_test));
            let p0 = v.chance_pct / 100.0;
            if p0 > 0.0 && p0 < 1.0 {
                self.p_value = binomial_p_greater(k as u64, v.n_test as u64, p0).ok();
            }
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub version: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    /// Unix seconds; the only field that differs between replays.
    pub timestamp: u64,
    pub dispersion: String,
    pub leakage_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub meta: ReportMeta,
    pub cells: Vec<Cell>,
    pub warnings: Vec<String>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn unit_cells(jobs: &[JobResult]) -> Vec<Cell> {
    let mut cells = Vec::new();
    for job in jobs {
        for t in &job.tasks {
            let mut base = Cell::blank(t.task, job.template, &t.split, job.band);
            base.subject = job.subject;
            base.seed = Some(job.seed);
            match &t.outcome {
                Outcome::Done(values) => cells.extend(values.iter().map(|v| base.clone().from_metric(v))),
                Outcome::Skipped(why) | Outcome::Unavailable(why) | Outcome::Failed(why) => {
                    base.status = match t.outcome {
                        Outcome::Skipped(_) => CellStatus::Skipped,
                        Outcome::Unavailable(_) => CellStatus::Unavailable,
                        _ => CellStatus::Error,
                    };
                    base.note = Some(why.clone());
                    cells.push(base);
                }
            }
        }
    }
    cells
}

fn summarize(units: &[Cell]) -> Vec<Cell> {
    let mut groups: BTreeMap<GroupKey, Vec<&Cell>> = BTreeMap::new();
    for c in units.iter().filter(|c| !c.summary) {
        groups.entry(c.key()).or_default().push(c);
    }
    // Units that did not finish carry no metric and summarize on their own.
    let mut out = Vec::new();
    for (_, members) in groups {
        let ok: Vec<&Cell> = members.iter().copied().filter(|c| c.status == CellStatus::Ok).collect();
        let first = members[0];
        let mut s = Cell::blank(first.task, first.template, &first.split, first.band);
        s.metric = first.metric;
        s.variant = first.variant.clone();
        s.summary = true;
        s.n_units = ok.len();
        if ok.is_empty() {
            s.status = first.status;
            s.note = first.note.clone();
            s.n_units = 0;
            out.push(s);
            continue;
        }
        let acc: Vec<f64> = ok.iter().filter_map(|c| c.accuracy_pct).collect();
        let chance: Vec<f64> = ok.iter().filter_map(|c| c.chance_pct).collect();
        let (m, ch) = (mean(&acc), mean(&chance));
        s.accuracy_pct = Some(m);
        s.chance_pct = Some(ch);
        s.n_test = Some(ok.iter().filter_map(|c| c.n_test).sum());
        if ok.iter().all(|c| c.n_correct.is_some()) {
            s.n_correct = Some(ok.iter().filter_map(|c| c.n_correct).sum());
        }
        if acc.len() >= 2 {
            s.sem_pct = Some(sem(&acc));
            match one_sample_ttest(&acc, ch, Alternative::Greater) {
                Ok(t) => s.p_value = Some(t.p),
                Err(e) => s.note = Some(e.to_string()),
            }
        }
        let lost = members.len() - ok.len();
        if lost > 0 {
            s.note = Some(format!("{lost} unit(s) not ok"));
        }
        out.push(s);
    }
    let idx: Vec<usize> = (0..out.len()).filter(|&i| out[i].p_value.is_some()).collect();
    let ps: Vec<f64> = idx.iter().map(|&i| out[i].p_value.expect("filtered")).collect();
    if let Ok(adj) = bonferroni(&ps) {
        for (i, a) in idx.into_iter().zip(adj) {
            out[i].p_adjusted = Some(a);
        }
    }
    out
}

fn fmt_num(v: f64) -> String {
    format!("{v:.2}")
}

/// Pairs of summary cells compared by the leakage rule: the same task under
/// leave-samples-out and leave-domains-out, plus end-to-end class decoding
/// against its without-domain-overlap variant.
fn leakage_warnings(cells: &[Cell], threshold: f64) -> Vec<String> {
    let lso = Strategy::LeaveSamplesOut.to_string();
    let ldo = Strategy::LeaveDomainsOut.to_string();
    let summaries: BTreeMap<GroupKey, &Cell> = cells
        .iter()
        .filter(|c| c.summary && c.status == CellStatus::Ok)
        .map(|c| (c.key(), c))
        .collect();
    let mut out = Vec::new();
    for (key, a) in &summaries {
        if key.2 != lso {
            continue;
        }
        let partner_task = if key.0 == TaskKind::TlcEeg { TaskKind::TlcEegWodo } else { key.0 };
        if partner_task == TaskKind::Retrieval && key.4 != Some(Metric::RankAcc) {
            continue;
        }
        let pk = (partner_task, key.1, ldo.clone(), key.3, key.4, key.5.clone());
        let Some(b) = summaries.get(&pk) else { continue };
        let (Some(va), Some(vb)) = (a.accuracy_pct, b.accuracy_pct) else { continue };
        let gap = va - vb;
        if gap > threshold {
            let metric = a.metric.map_or("", |m| m.label());
            let variant = a.variant.as_deref().map(|v| format!(" [{v}]")).unwrap_or_default();
            out.push(format!(
                "LEAKAGE WARNING: {} {} {} band={}{}: {} {} under {lso} vs {} under {ldo} (+{} points > {})",
                a.template,
                a.task.label(),
                metric,
                a.band,
                variant,
                fmt_num(va),
                a.task.label(),
                fmt_num(vb),
                fmt_num(gap),
                threshold,
            ));
        }
    }
    out
}

impl AuditReport {
    pub fn build(cfg: &RunConfig, jobs: &[JobResult]) -> Result<Self> {
        let meta = ReportMeta {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: cfg.hash(),
            seeds: cfg.seeds.clone(),
            timestamp: now(),
            dispersion: DISPERSION.to_string(),
            leakage_threshold: cfg.leakage_threshold,
        };
        Ok(Self::from_units(meta, unit_cells(jobs)))
    }

    /// Recomputes summary cells and warnings from the per-unit cells.
    pub fn from_units(meta: ReportMeta, units: Vec<Cell>) -> Self {
        let mut cells: Vec<Cell> = units.into_iter().filter(|c| !c.summary).collect();
        let summaries = summarize(&cells);
        let warnings = leakage_warnings(&summaries, meta.leakage_threshold);
        cells.extend(summaries);
        Self { meta, cells, warnings }
    }

    /// Union of several reports: unit cells are concatenated and summaries
    /// recomputed over the combined units.
    pub fn merge(reports: &[AuditReport]) -> Result<Self> {
        let first = reports.first().ok_or_else(|| Error::invalid("nothing to merge"))?;
        let mut seeds: BTreeSet<u64> = BTreeSet::new();
        let mut hashes = Vec::new();
        for r in reports {
            seeds.extend(&r.meta.seeds);
            if !hashes.contains(&r.meta.config_hash) {
                hashes.push(r.meta.config_hash.clone());
            }
        }
        let meta = ReportMeta {
            version: first.meta.version.clone(),
            config_hash: hashes.join("+"),
            seeds: seeds.into_iter().collect(),
            timestamp: reports.iter().map(|r| r.meta.timestamp).max().unwrap_or(0),
            dispersion: first.meta.dispersion.clone(),
            leakage_threshold: first.meta.leakage_threshold,
        };
        let units = reports.iter().flat_map(|r| r.cells.iter().filter(|c| !c.summary).cloned()).collect();
        Ok(Self::from_units(meta, units))
    }

    pub fn summaries(&self) -> impl Iterator<Item = &Cell> {
        self.cells.iter().filter(|c| c.summary)
    }

    pub fn units(&self) -> impl Iterator<Item = &Cell> {
        self.cells.iter().filter(|c| !c.summary)
    }

    /// The summary cell for a task/split/metric, if present.
    pub fn summary(
        &self,
        task: TaskKind,
        template: TemplateKind,
        split: &str,
        band: Band,
        metric: Metric,
        variant: Option<&str>,
    ) -> Option<&Cell> {
        self.summaries().find(|c| {
            c.task == task
                && c.template == template
                && c.split == split
                && c.band == band
                && c.metric == Some(metric)
                && c.variant.as_deref() == variant
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed report: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// Writes `report.json` and every applicable grid CSV into `dir`;
    /// returns the written file names.
    pub fn write(&self, dir: &Path) -> Result<Vec<String>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("report.json");
        fs::write(&path, self.to_json()).map_err(|e| Error::io(&path, e))?;
        let mut names = vec!["report.json".to_string()];
        for (name, grid) in self.grids() {
            grid.write(&dir.join(&name))?;
            names.push(name);
        }
        Ok(names)
    }

    fn templates(&self) -> Vec<TemplateKind> {
        self.cells.iter().map(|c| c.template).collect::<BTreeSet<_>>().into_iter().collect()
    }

    fn bands(&self) -> Vec<Band> {
        self.cells.iter().map(|c| c.band).collect::<BTreeSet<_>>().into_iter().collect()
    }

    fn has_task(&self, task: TaskKind) -> bool {
        self.cells.iter().any(|c| c.task == task)
    }

    fn value(&self, task: TaskKind, t: TemplateKind, split: &str, band: Band, metric: Metric, variant: Option<&str>) -> GridValue {
        self.summary(task, t, split, band, metric, variant)
            .map_or(GridValue::Missing, GridValue::from_cell)
    }

    fn chance(&self, tasks: &[TaskKind], t: TemplateKind, band: Band, metric: Metric, variant: Option<&str>) -> GridValue {
        self.summaries()
            .find(|c| {
                tasks.contains(&c.task)
                    && c.template == t
                    && c.band == band
                    && c.metric == Some(metric)
                    && c.variant.as_deref() == variant
            })
            .and_then(|c| c.chance_pct)
            .map_or(GridValue::Missing, GridValue::Value)
    }

    /// CSV grids shaped like the published tables, named by file.
    pub fn grids(&self) -> Vec<(String, Grid)> {
        let lso = Strategy::LeaveSamplesOut.to_string();
        let ldo = Strategy::LeaveDomainsOut.to_string();
        let templates = self.templates();
        let bands = self.bands();
        let main_band = if bands.contains(&Band::Full) { Band::Full } else { bands.first().copied().unwrap_or(Band::Full) };
        let cols: Vec<String> = templates.iter().map(|t| t.to_string()).collect();
        let mut out = Vec::new();
        let tlc = [TaskKind::TlcDf, TaskKind::TlcEeg, TaskKind::TlcEegWodo];
        let split_of = |task: TaskKind| if task == TaskKind::TlcEegWodo { ldo.clone() } else { lso.clone() };

        if [TaskKind::Dlc].iter().chain(&tlc).any(|t| self.has_task(*t)) {
            let mut g = Grid::new("row", cols.clone());
            let row = |task: TaskKind| -> Vec<GridValue> {
                templates
                    .iter()
                    .map(|&t| self.value(task, t, &split_of(task), main_band, Metric::Accuracy, None))
                    .collect()
            };
            g.push("DLC", row(TaskKind::Dlc));
            g.push(
                "DLC (chance level)",
                templates.iter().map(|&t| self.chance(&[TaskKind::Dlc], t, main_band, Metric::Accuracy, None)).collect(),
            );
            for task in tlc {
                g.push(task.label(), row(task));
            }
            g.push(
                "TCL (chance level)",
                templates.iter().map(|&t| self.chance(&tlc, t, main_band, Metric::Accuracy, None)).collect(),
            );
            out.push(("table1.csv".to_string(), g));
        }

        let zs: Vec<(TemplateKind, String)> = self
            .summaries()
            .filter(|c| c.task == TaskKind::ZeroShot && c.status == CellStatus::Ok)
            .map(|c| (c.template, c.split.clone()))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if !zs.is_empty() {
            let mut g = Grid::new("row", zs.iter().map(|(t, s)| format!("{t}/{s}")).collect());
            for metric in [Metric::AccNear, Metric::Acc7th] {
                let cells: Vec<Option<&Cell>> = zs
                    .iter()
                    .map(|(t, s)| {
                        self.summaries()
                            .find(|c| c.task == TaskKind::ZeroShot && c.template == *t && c.split == *s && c.band == main_band && c.metric == Some(metric))
                    })
                    .collect();
                g.push(metric.label(), cells.iter().map(|c| c.map_or(GridValue::Missing, GridValue::from_cell)).collect());
                g.push(
                    &format!("{} (chance level)", metric.label()),
                    cells
                        .iter()
                        .map(|c| c.and_then(|c| c.chance_pct).map_or(GridValue::Missing, GridValue::Value))
                        .collect(),
                );
            }
            out.push(("table2.csv".to_string(), g));
        }

        let retrieval_templates: Vec<TemplateKind> = templates
            .iter()
            .copied()
            .filter(|t| self.summaries().any(|c| c.task == TaskKind::Retrieval && c.template == *t && c.status == CellStatus::Ok))
            .collect();
        for &t in &retrieval_templates {
            let metrics = [Metric::Top1, Metric::Top5, Metric::RankAcc];
            let mut g = Grid::new("row", metrics.iter().map(|m| m.label().to_string()).collect());
            let combos: BTreeSet<(String, String)> = self
                .summaries()
                .filter(|c| c.task == TaskKind::Retrieval && c.template == t && c.band == main_band && c.status == CellStatus::Ok)
                .map(|c| (c.split.clone(), c.variant.clone().unwrap_or_default()))
                .collect();
            let splits: BTreeSet<String> = combos.iter().map(|(s, _)| s.clone()).collect();
            for (split, loss) in &combos {
                let v = metrics
                    .iter()
                    .map(|&m| self.value(TaskKind::Retrieval, t, split, main_band, m, Some(loss)))
                    .collect();
                g.push(&format!("{loss}/{split}"), v);
            }
            for split in &splits {
                let v = metrics
                    .iter()
                    .map(|&m| {
                        self.summaries()
                            .find(|c| c.task == TaskKind::Retrieval && c.template == t && c.split == *split && c.band == main_band && c.metric == Some(m))
                            .and_then(|c| c.chance_pct)
                            .map_or(GridValue::Missing, GridValue::Value)
                    })
                    .collect();
                g.push(&format!("Chance level/{split}"), v);
            }
            let name = if retrieval_templates.len() == 1 { "table3.csv".to_string() } else { format!("table3_{t}.csv") };
            out.push((name, g));
        }

        let los: Vec<String> = self
            .cells
            .iter()
            .filter(|c| c.split.starts_with("leave_subjects_out"))
            .map(|c| c.split.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if !los.is_empty() {
            let mut g = Grid::new("row", cols.clone());
            for split in &los {
                for (variant, label) in [("train", "Training"), ("val", "Validation"), ("test", "Test")] {
                    g.push(
                        &format!("{split}/{label}"),
                        templates
                            .iter()
                            .map(|&t| self.value(TaskKind::TlcEeg, t, split, main_band, Metric::Accuracy, Some(variant)))
                            .collect(),
                    );
                }
                g.push(
                    &format!("{split}/Chance level"),
                    templates
                        .iter()
                        .map(|&t| {
                            self.summaries()
                                .find(|c| c.template == t && c.split == *split && c.band == main_band && c.chance_pct.is_some())
                                .and_then(|c| c.chance_pct)
                                .map_or(GridValue::Missing, GridValue::Value)
                        })
                        .collect(),
                );
            }
            out.push(("table5.csv".to_string(), g));
        }

        if bands.len() > 1 {
            for task in [TaskKind::Dlc, TaskKind::TlcDf, TaskKind::TlcEeg, TaskKind::TlcEegWodo] {
                if !self.has_task(task) {
                    continue;
                }
                let mut g = Grid::new("band", cols.clone());
                for &b in &bands {
                    g.push(
                        b.name(),
                        templates
                            .iter()
                            .map(|&t| self.value(task, t, &split_of(task), b, Metric::Accuracy, None))
                            .collect(),
                    );
                }
                out.push((format!("bands_{}.csv", task.name()), g));
            }
        }
        out
    }

    /// Plain-text summary: one line per summary cell, then warnings.
    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "templeak report v{} config {} seeds {:?}\n",
            self.meta.version, self.meta.config_hash, self.meta.seeds
        ));
        s.push_str(&format!("dispersion: {}\n", self.meta.dispersion));
        for c in self.summaries() {
            let metric = c.metric.map_or("-", |m| m.label());
            let variant = c.variant.as_deref().map(|v| format!("[{v}]")).unwrap_or_default();
            let head = format!(
                "{:<13} {:<10} {:<10} {:<33} {}{}",
                c.task.label(),
                c.template,
                c.band,
                c.split,
                metric,
                variant
            );
            match (c.status, c.accuracy_pct) {
                (CellStatus::Ok, Some(a)) => {
                    let sem = c.sem_pct.map(|v| format!(" ± {}", fmt_num(v))).unwrap_or_default();
                    let stars = c.p_adjusted.map_or("", stars);
                    let p = c.p_adjusted.map(|p| format!(" p_adj={p:.3e}")).unwrap_or_default();
                    s.push_str(&format!(
                        "{head}: {}{sem} (chance {}) n={}{p} {stars}\n",
                        fmt_num(a),
                        c.chance_pct.map_or("-".into(), fmt_num),
                        c.n_units
                    ));
                }
                (status, _) => {
                    s.push_str(&format!("{head}: {status:?} {}\n", c.note.as_deref().unwrap_or("")));
                }
            }
        }
        for w in &self.warnings {
            s.push_str(w);
            s.push('\n');
        }
        s
    }
}

fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// One grid entry: missing, a single value, or mean ± dispersion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridValue {
    Missing,
    Value(f64),
    MeanSem(f64, f64),
}

impl GridValue {
    fn from_cell(c: &Cell) -> Self {
        match (c.status, c.accuracy_pct, c.sem_pct) {
            (CellStatus::Ok, Some(a), Some(s)) => GridValue::MeanSem(a, s),
            (CellStatus::Ok, Some(a), None) => GridValue::Value(a),
            _ => GridValue::Missing,
        }
    }
}

impl fmt::Display for GridValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridValue::Missing => f.write_str("-"),
            GridValue::Value(v) => write!(f, "{v}"),
            GridValue::MeanSem(m, s) => write!(f, "{m}±{s}"),
        }
    }
}

impl FromStr for GridValue {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| Error::invalid(format!("grid value {s:?}: {e}")));
        Ok(match s.trim() {
            "-" => GridValue::Missing,
            t => match t.split_once('±') {
                Some((m, d)) => GridValue::MeanSem(num(m)?, num(d)?),
                None => GridValue::Value(num(t)?),
            },
        })
    }
}

/// A labelled table of grid values.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub corner: String,
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<GridValue>)>,
}

impl Grid {
    pub fn new(corner: &str, columns: Vec<String>) -> Self {
        Self {
            corner: corner.to_string(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, label: &str, values: Vec<GridValue>) {
        self.rows.push((label.to_string(), values));
    }

    pub fn get(&self, row: &str, column: &str) -> Option<GridValue> {
        let j = self.columns.iter().position(|c| c == column)?;
        self.rows.iter().find(|(l, _)| l == row).map(|(_, v)| v[j])
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(std::iter::once(&self.corner).chain(&self.columns))?;
        for (label, vals) in &self.rows {
            let rec: Vec<String> = std::iter::once(label.clone()).chain(vals.iter().map(|v| v.to_string())).collect();
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        let header = r.headers()?.clone();
        let mut g = Grid::new(header.get(0).unwrap_or(""), header.iter().skip(1).map(String::from).collect());
        for rec in r.records() {
            let rec = rec?;
            let vals = rec.iter().skip(1).map(str::parse).collect::<Result<Vec<GridValue>>>()?;
            g.push(rec.get(0).unwrap_or(""), vals);
        }
        Ok(g)
    }
}
