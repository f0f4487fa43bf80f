//! Command-line front end: `synth`, `reorganize`, `audit`, `lrtc`, `report`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;

use crate::design::reorganize_band;
use crate::error::{Error, Result};
use crate::experiments::{build_recording, layout_seed, run_band_audit, AuditReport, RunConfig, Source};
use crate::lrtc::{lrtc_map, write_acf, LrtcInput};
use crate::signal::{save_recording, Dtype};

const DEFAULT_OUT: &str = "templeak-out";

#[derive(Debug, Parser)]
#[command(name = "templeak", version, about = "Temporal-leakage audit for block-design decoding pipelines")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every pipeline command.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// JSON config, overlaid onto the preset (or the defaults).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Named grid: table1, table5, bands, zeroshot, retrieval, lrtc.
    #[arg(long)]
    pub preset: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed; repeat for several. Replaces the configured list.
    #[arg(long = "seed")]
    pub seeds: Vec<u64>,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write one surrogate recording per (template, subject, seed).
    Synth(Common),
    /// Cut recordings into labeled block-design datasets.
    Reorganize {
        #[command(flatten)]
        common: Common,
        /// Recording files, one per subject; replaces the configured source.
        inputs: Vec<PathBuf>,
    },
    /// Run the decoding grid and write report JSON and table CSVs.
    Audit(Common),
    /// Envelope autocorrelation map over frequencies and lags.
    Lrtc {
        #[command(flatten)]
        common: Common,
        /// Recording files, one per subject; replaces the configured source.
        inputs: Vec<PathBuf>,
    },
    /// Merge report files and print a summary.
    Report {
        /// `report.json` files or directories holding one.
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Also write the merged report and its tables here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl Common {
    /// Preset (or defaults), then the config overlay, then flag overrides.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.preset {
            Some(name) => RunConfig::preset(name)?,
            None => RunConfig::default(),
        };
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let patch: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            cfg = cfg.overlay(patch)?;
        }
        if !self.seeds.is_empty() {
            cfg.seeds = self.seeds.clone();
        }
        if self.jobs.is_some() {
            cfg.jobs = self.jobs;
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        Ok(cfg)
    }
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn with_inputs(mut cfg: RunConfig, inputs: &[PathBuf]) -> RunConfig {
    if !inputs.is_empty() {
        let paths: BTreeMap<_, _> = cfg.templates.iter().map(|t| (*t, inputs.to_vec())).collect();
        cfg.source = Source::Recordings { paths };
    }
    cfg
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn cmd_synth(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate_common()?;
    if !matches!(cfg.source, Source::Surrogate { .. }) {
        return Err(Error::Config("synth needs a surrogate source".into()));
    }
    let dir = out_dir(cfg);
    create_dir(&dir)?;
    let mut written = Vec::new();
    for &kind in &cfg.templates {
        let template = cfg.template(kind)?;
        for subject in 0..cfg.n_subjects(kind) {
            for &seed in &cfg.seeds {
                let series = build_recording(cfg, &template, subject, seed)?;
                let path = dir.join(format!("{kind}_sub{subject:02}_seed{seed}.raw"));
                save_recording(&path, &series, Dtype::F32)?;
                println!(
                    "{}: {} ch x {} samples, {:.1} s at {} Hz",
                    path.display(),
                    series.channels(),
                    series.timepoints(),
                    series.duration_s(),
                    series.fs()
                );
                written.push(path);
            }
        }
    }
    Ok(written)
}

pub fn cmd_reorganize(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate_common()?;
    let dir = out_dir(cfg);
    let mut written = Vec::new();
    for &kind in &cfg.templates {
        let template = cfg.template(kind)?;
        for subject in 0..cfg.n_subjects(kind) {
            for &seed in &cfg.seeds {
                let series = build_recording(cfg, &template, subject, seed)?;
                for &band in &cfg.bands {
                    let ds = reorganize_band(&series, &template, subject, layout_seed(seed, kind, subject), band)?;
                    let path = dir.join(format!("{kind}/seed{seed}/sub{subject:02}/{band}"));
                    ds.save(&path)?;
                    println!("{}: {} samples, {} classes", path.display(), ds.len(), template.n_classes);
                    written.push(path);
                }
            }
        }
    }
    Ok(written)
}

pub fn cmd_audit(cfg: &RunConfig) -> Result<AuditReport> {
    let report = run_band_audit(cfg, &cfg.bands)?;
    let dir = out_dir(cfg);
    let names = report.write(&dir)?;
    print!("{}", report.render());
    println!("wrote {} to {}", names.join(", "), dir.display());
    Ok(report)
}

pub fn cmd_lrtc(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.validate_common()?;
    let inputs: Vec<LrtcInput> = match &cfg.source {
        Source::Recordings { paths } => {
            let files: Vec<&PathBuf> = cfg.templates.iter().filter_map(|t| paths.get(t)).flatten().collect();
            if files.is_empty() {
                return Err(Error::Config("no recordings listed for the configured templates".into()));
            }
            files
                .into_iter()
                .map(|p| crate::signal::load_recording(p).map(LrtcInput::Continuous))
                .collect::<Result<_>>()?
        }
        Source::Surrogate { .. } => {
            // Envelope statistics concern the background signal only.
            let mut syn = cfg.clone();
            syn.signature_strength = 0.0;
            if let Source::Surrogate { duration_s, .. } = &mut syn.source {
                duration_s.get_or_insert(cfg.lrtc.surrogate_duration());
            }
            let kind = *cfg
                .templates
                .first()
                .ok_or_else(|| Error::Config("templates must not be empty".into()))?;
            let template = cfg.template(kind)?;
            let mut v = Vec::new();
            for &seed in &cfg.seeds {
                for subject in 0..cfg.subjects {
                    v.push(LrtcInput::Continuous(build_recording(&syn, &template, subject, seed)?));
                }
            }
            v
        }
    };
    info!("lrtc over {} recording(s)", inputs.len());
    let m = lrtc_map(&inputs, &cfg.lrtc)?;
    let dir = out_dir(cfg);
    write_acf(&dir, &m, cfg.lrtc.alpha)?;
    println!(
        "{} freqs x {} lags over {} units; {} significant cells at q = {}; wrote {}",
        m.freqs.len(),
        m.lags_s.len(),
        m.n_units,
        m.reject.iter().filter(|r| **r).count(),
        cfg.lrtc.alpha,
        dir.display()
    );
    Ok(dir)
}

pub fn cmd_report(paths: &[PathBuf], out: Option<&Path>) -> Result<AuditReport> {
    let reports = paths
        .iter()
        .map(|p| {
            let file = if p.is_dir() { p.join("report.json") } else { p.clone() };
            AuditReport::load(&file)
        })
        .collect::<Result<Vec<_>>>()?;
    let merged = AuditReport::merge(&reports)?;
    print!("{}", merged.render());
    if let Some(dir) = out {
        merged.write(dir)?;
    }
    Ok(merged)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(c) => cmd_synth(&c.resolve()?).map(drop),
        Command::Reorganize { common, inputs } => cmd_reorganize(&with_inputs(common.resolve()?, &inputs)).map(drop),
        Command::Audit(c) => cmd_audit(&c.resolve()?).map(drop),
        Command::Lrtc { common, inputs } => cmd_lrtc(&with_inputs(common.resolve()?, &inputs)).map(drop),
        Command::Report { reports, out } => cmd_report(&reports, out.as_deref()).map(drop),
    }
}
