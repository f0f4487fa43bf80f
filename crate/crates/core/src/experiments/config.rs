//! Run configuration: one JSON document describing the audit grid.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::TaskKind;
use crate::design::{ChannelPolicy, DesignTemplate, TemplateKind};
use crate::dsp::Band;
use crate::error::{Error, Result};
use crate::lrtc::LrtcConfig;
use crate::neural::{LossKind, SimpleCnnConfig, TrainConfig};
use crate::signal::{LineNoise, SignatureProfile, SurrogateKind, SurrogateSpec};
use crate::splits::{Strategy, ZeroShotMode};

/// Optional replacements for the CNN's default sizes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CnnOverrides {
    pub conv_filters: Option<usize>,
    pub kernel_width: Option<usize>,
    pub hidden_units: Option<usize>,
}

impl CnnOverrides {
    pub fn apply(&self, mut cfg: SimpleCnnConfig) -> SimpleCnnConfig {
        if let Some(f) = self.conv_filters {
            cfg.conv_filters = f;
        }
        if let Some(k) = self.kernel_width {
            cfg.kernel_width = k;
        }
        if let Some(h) = self.hidden_units {
            cfg.hidden_units = h;
        }
        cfg
    }
}

/// Where the continuous recordings come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Source {
    /// Phantom recordings, one per (template, subject, seed).
    Surrogate {
        kind: SurrogateKind,
        channels: usize,
        #[serde(default)]
        channel_mixing: f64,
        #[serde(default)]
        line_noise: Option<LineNoise>,
        /// Synthesis rate; each template's target rate when absent.
        #[serde(default)]
        fs: Option<f64>,
        /// Recording length; each template's required length when absent.
        #[serde(default)]
        duration_s: Option<f64>,
    },
    /// Raw-format recording files, one per subject, keyed by template.
    Recordings { paths: BTreeMap<TemplateKind, Vec<PathBuf>> },
}

impl Default for Source {
    fn default() -> Self {
        Source::Surrogate {
            kind: SurrogateKind::Composite {
                white: 0.5,
                powerlaw: 1.0,
                beta: 1.5,
            },
            channels: 32,
            channel_mixing: 0.2,
            line_noise: Some(LineNoise {
                f0: 50.0,
                amplitude: 0.5,
                amplitude_drift_scale: 0.2,
            }),
            fs: None,
            duration_s: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub templates: Vec<TemplateKind>,
    pub tasks: Vec<TaskKind>,
    /// Strategies to evaluate where a task admits more than one. Domain
    /// classification always uses leave-samples-out and the woDO task always
    /// leave-domains-out; leave-subjects-out entries add cross-subject runs.
    pub splits: Vec<Strategy>,
    pub bands: Vec<Band>,
    pub seeds: Vec<u64>,
    /// Surrogate subjects per template; recordings define their own count.
    pub subjects: u32,
    pub source: Source,
    /// Domain-signature strength injected into surrogates, in [0, 1].
    pub signature_strength: f64,
    pub signature_profile: SignatureProfile,
    pub train: TrainConfig,
    pub cnn: CnnOverrides,
    pub class_map_seed: u64,
    pub class_maps: BTreeMap<TemplateKind, Vec<usize>>,
    pub channel_policies: BTreeMap<TemplateKind, ChannelPolicy>,
    pub zero_shot_modes: Vec<ZeroShotMode>,
    pub zero_shot_held_out: usize,
    pub retrieval_losses: Vec<LossKind>,
    /// Class-disjoint folds used for leave-domains-out retrieval.
    pub retrieval_folds: usize,
    pub bank_seed: u64,
    pub leakage_threshold: f64,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub lrtc: LrtcConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            templates: vec![TemplateKind::KulLike],
            tasks: Vec::new(),
            splits: vec![Strategy::LeaveSamplesOut, Strategy::LeaveDomainsOut],
            bands: vec![Band::Full],
            seeds: vec![0],
            subjects: 1,
            source: Source::default(),
            signature_strength: 1.0,
            signature_profile: SignatureProfile::default(),
            train: TrainConfig::default(),
            cnn: CnnOverrides::default(),
            class_map_seed: 0,
            class_maps: BTreeMap::new(),
            channel_policies: BTreeMap::new(),
            zero_shot_modes: vec![ZeroShotMode::FirstSix, ZeroShotMode::Random],
            zero_shot_held_out: 6,
            retrieval_losses: vec![LossKind::Cosine, LossKind::info_nce()],
            retrieval_folds: 5,
            bank_seed: 0,
            leakage_threshold: 10.0,
            jobs: None,
            out: None,
            lrtc: LrtcConfig::default(),
        }
    }
}

fn config_err(e: serde_json::Error) -> Error {
    Error::Config(e.to_string())
}

/// Recursively overlays `patch` onto `base`; objects merge key by key, every
/// other value replaces.
pub fn merge_json(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge_json(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(config_err)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// `self` with the fields present in `patch` replaced.
    pub fn overlay(&self, patch: serde_json::Value) -> Result<Self> {
        let mut base = serde_json::to_value(self)?;
        merge_json(&mut base, patch);
        serde_json::from_value(base).map_err(config_err)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Named experiment grids. Surrogate sizes follow the canonical
    /// templates; override fields with a config overlay to shrink them.
    pub fn preset(name: &str) -> Result<Self> {
        let all = vec![TemplateKind::CvprLike, TemplateKind::DeapLike, TemplateKind::KulLike];
        let base = Self {
            subjects: 10,
            ..Self::default()
        };
        Ok(match name {
            "table1" => Self {
                templates: all,
                tasks: vec![TaskKind::Dlc, TaskKind::TlcDf, TaskKind::TlcEeg, TaskKind::TlcEegWodo],
                ..base
            },
            "table5" => Self {
                templates: all,
                tasks: vec![TaskKind::TlcEeg],
                splits: vec![
                    Strategy::LeaveSubjectsOut {
                        val: crate::splits::ValStrategy::Samples,
                    },
                    Strategy::LeaveSubjectsOut {
                        val: crate::splits::ValStrategy::Subjects,
                    },
                ],
                ..base
            },
            "bands" => Self {
                templates: all,
                tasks: vec![TaskKind::Dlc, TaskKind::TlcDf, TaskKind::TlcEeg, TaskKind::TlcEegWodo],
                bands: Band::ALL.to_vec(),
                ..base
            },
            "zeroshot" => Self {
                templates: vec![TemplateKind::CvprLike],
                tasks: vec![TaskKind::ZeroShot],
                ..base
            },
            "retrieval" => Self {
                templates: vec![TemplateKind::CvprLike],
                tasks: vec![TaskKind::Retrieval],
                ..base
            },
            "lrtc" => Self {
                templates: vec![TemplateKind::KulLike],
                tasks: Vec::new(),
                subjects: 2,
                source: Source::Surrogate {
                    kind: SurrogateKind::PowerLaw { beta: 1.0 },
                    channels: 4,
                    channel_mixing: 0.0,
                    line_noise: None,
                    fs: Some(200.0),
                    duration_s: None,
                },
                ..base
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown preset {other:?}; expected table1, table5, bands, zeroshot, retrieval or lrtc"
                )))
            }
        })
    }

    /// Checks that apply to every command.
    pub fn validate_common(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if self.subjects == 0 {
            return Err(Error::Config("subjects must be at least 1".into()));
        }
        match &self.source {
            Source::Surrogate { channels, .. } if *channels == 0 => {
                return Err(Error::Config("surrogate channels must be at least 1".into()));
            }
            Source::Recordings { paths } => {
                for p in paths.values().flatten() {
                    if !p.exists() {
                        return Err(Error::Config(format!("recording {} does not exist", p.display())));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Checks for an audit run.
    pub fn validate(&self) -> Result<()> {
        self.validate_common()?;
        if self.tasks.is_empty() {
            return Err(Error::Config("at least one task is required".into()));
        }
        if self.templates.is_empty() || self.bands.is_empty() {
            return Err(Error::Config("templates and bands must not be empty".into()));
        }
        if !(0.0..=1.0).contains(&self.signature_strength) {
            return Err(Error::Config(format!(
                "signature_strength must lie in [0, 1], got {}",
                self.signature_strength
            )));
        }
        if self.tasks.contains(&TaskKind::Retrieval) {
            if self.retrieval_losses.iter().any(|l| !l.is_embedding()) || self.retrieval_losses.is_empty() {
                return Err(Error::Config("retrieval_losses must list cosine and/or infonce".into()));
            }
            if self.retrieval_folds < 2 {
                return Err(Error::Config("retrieval_folds must be at least 2".into()));
            }
        }
        if self.tasks.contains(&TaskKind::ZeroShot) && self.zero_shot_modes.is_empty() {
            return Err(Error::Config("zero_shot_modes must not be empty".into()));
        }
        if let Source::Recordings { paths } = &self.source {
            for t in &self.templates {
                if paths.get(t).map_or(true, |v| v.is_empty()) {
                    return Err(Error::Config(format!("no recordings listed for template {t}")));
                }
            }
        }
        for t in &self.templates {
            self.template(*t).map_err(|e| Error::Config(format!("template {t}: {e}")))?;
        }
        self.train.validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// Template with this run's class-map and channel-policy overrides.
    pub fn template(&self, kind: TemplateKind) -> Result<DesignTemplate> {
        let mut t = DesignTemplate::from_kind(kind, self.class_map_seed)?;
        if let Some(p) = self.channel_policies.get(&kind) {
            t = t.with_channel_policy(*p);
        }
        if let Some(m) = self.class_maps.get(&kind) {
            t = t.with_class_map(m.clone())?;
        }
        Ok(t)
    }

    /// Number of subjects available for `kind`.
    pub fn n_subjects(&self, kind: TemplateKind) -> u32 {
        match &self.source {
            Source::Surrogate { .. } => self.subjects,
            Source::Recordings { paths } => paths.get(&kind).map_or(0, |v| v.len() as u32),
        }
    }

    /// Surrogate spec for a template, or `None` for recording sources.
    pub fn surrogate_spec(&self, template: &DesignTemplate, duration_s: f64, seed: u64) -> Option<SurrogateSpec> {
        match &self.source {
            Source::Surrogate {
                kind,
                channels,
                channel_mixing,
                line_noise,
                fs,
                duration_s: fixed,
            } => Some(SurrogateSpec {
                kind: *kind,
                duration_s: fixed.unwrap_or(duration_s),
                fs: fs.unwrap_or(template.target_fs),
                channels: *channels,
                channel_mixing: *channel_mixing,
                line_noise: *line_noise,
                seed,
            }),
            Source::Recordings { .. } => None,
        }
    }
}
