//! Block-design reorganization: lay domains out along a continuous recording,
//! slice them into fixed-length samples and attach subject, domain and class
//! labels.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use ndarray::{s, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::{self, Band};
use crate::error::{Error, Result};
use crate::signal::{read_recording, write_recording, Dtype, MultichannelSeries, RawHeader, TimeWindow};

const DATASET_FORMAT: &str = "templeak-dataset/1";
const MANIFEST: &str = "manifest.json";
const PAYLOAD: &str = "samples.raw";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    CvprLike,
    DeapLike,
    KulLike,
    Custom,
}

impl TemplateKind {
    pub fn name(self) -> &'static str {
        match self {
            TemplateKind::CvprLike => "cvpr_like",
            TemplateKind::DeapLike => "deap_like",
            TemplateKind::KulLike => "kul_like",
            TemplateKind::Custom => "custom",
        }
    }
}

impl fmt::Display for TemplateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TemplateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "cvpr_like" | "cvpr" => Ok(TemplateKind::CvprLike),
            "deap_like" | "deap" => Ok(TemplateKind::DeapLike),
            "kul_like" | "kul" => Ok(TemplateKind::KulLike),
            "custom" => Ok(TemplateKind::Custom),
            other => Err(Error::Config(format!("unknown template {other:?}"))),
        }
    }
}

/// Rest between consecutive domains, in whole seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestSpec {
    Fixed(u32),
    /// Drawn uniformly per gap from the inclusive range.
    Range(u32, u32),
}

impl RestSpec {
    pub fn max(self) -> u32 {
        match self {
            RestSpec::Fixed(r) => r,
            RestSpec::Range(_, hi) => hi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelPolicy {
    KeepAll,
    FirstK(usize),
    /// Tile the channel block until it reaches the given count.
    ReplicateTo(usize),
}

impl ChannelPolicy {
    pub fn apply(self, data: &Array2<f64>) -> Result<Array2<f64>> {
        let c = data.nrows();
        match self {
            ChannelPolicy::KeepAll => Ok(data.clone()),
            ChannelPolicy::FirstK(k) => {
                if k == 0 || k > c {
                    return Err(Error::invalid(format!("first_k({k}) needs at least {k} channels, have {c}")));
                }
                Ok(data.slice(s![0..k, ..]).to_owned())
            }
            ChannelPolicy::ReplicateTo(n) => {
                if n < c || n % c != 0 {
                    return Err(Error::invalid(format!(
                        "replicate_to({n}) needs a channel count dividing {n}, have {c}"
                    )));
                }
                let views: Vec<_> = (0..n / c).map(|_| data.view()).collect();
                ndarray::concatenate(ndarray::Axis(0), &views).map_err(|e| Error::Shape(e.to_string()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignTemplate {
    pub kind: TemplateKind,
    pub n_domains: usize,
    pub domain_duration_s: f64,
    pub rest: RestSpec,
    pub sample_length_s: f64,
    pub target_fs: f64,
    pub channel_policy: ChannelPolicy,
    pub n_classes: usize,
    /// `class_map[domain_id] = class_id`.
    pub class_map: Vec<usize>,
}

/// One domain's position in the source recording, in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainWindow {
    pub domain_id: usize,
    pub start_s: f64,
    pub end_s: f64,
}

impl DomainWindow {
    pub fn samples(&self, fs: f64) -> TimeWindow {
        (self.start_s * fs).round() as usize..(self.end_s * fs).round() as usize
    }
}

/// Class assignment used when the caller does not override it.
pub fn default_class_map(kind: TemplateKind, seed: u64) -> Result<Vec<usize>> {
    match kind {
        TemplateKind::CvprLike => Ok((0..40).collect()),
        TemplateKind::DeapLike => {
            let mut map: Vec<usize> = (0..40).map(|d| d % 4).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            map.shuffle(&mut rng);
            Ok(map)
        }
        TemplateKind::KulLike => Ok((0..8).map(|d| d % 2).collect()),
        TemplateKind::Custom => Err(Error::invalid("custom templates need an explicit class map")),
    }
}

impl DesignTemplate {
    pub fn cvpr_like() -> Self {
        Self {
            kind: TemplateKind::CvprLike,
            n_domains: 40,
            domain_duration_s: 25.0,
            rest: RestSpec::Fixed(10),
            sample_length_s: 0.5,
            target_fs: 1000.0,
            channel_policy: ChannelPolicy::ReplicateTo(128),
            n_classes: 40,
            class_map: default_class_map(TemplateKind::CvprLike, 0).expect("builtin"),
        }
    }

    pub fn deap_like(class_map_seed: u64) -> Self {
        Self {
            kind: TemplateKind::DeapLike,
            n_domains: 40,
            domain_duration_s: 60.0,
            rest: RestSpec::Fixed(40),
            sample_length_s: 2.0,
            target_fs: 128.0,
            channel_policy: ChannelPolicy::FirstK(32),
            n_classes: 4,
            class_map: default_class_map(TemplateKind::DeapLike, class_map_seed).expect("builtin"),
        }
    }

    pub fn kul_like() -> Self {
        Self {
            kind: TemplateKind::KulLike,
            n_domains: 8,
            domain_duration_s: 360.0,
            rest: RestSpec::Range(60, 120),
            sample_length_s: 1.0,
            target_fs: 128.0,
            channel_policy: ChannelPolicy::KeepAll,
            n_classes: 2,
            class_map: default_class_map(TemplateKind::KulLike, 0).expect("builtin"),
        }
    }

    pub fn from_kind(kind: TemplateKind, class_map_seed: u64) -> Result<Self> {
        match kind {
            TemplateKind::CvprLike => Ok(Self::cvpr_like()),
            TemplateKind::DeapLike => Ok(Self::deap_like(class_map_seed)),
            TemplateKind::KulLike => Ok(Self::kul_like()),
            TemplateKind::Custom => Err(Error::invalid("custom templates are built with DesignTemplate::custom")),
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn custom(
        n_domains: usize,
        domain_duration_s: f64,
        rest: RestSpec,
        sample_length_s: f64,
        target_fs: f64,
        channel_policy: ChannelPolicy,
        class_map: Vec<usize>,
    ) -> Result<Self> {
        let n_classes = distinct(&class_map);
        let t = Self {
            kind: TemplateKind::Custom,
            n_domains,
            domain_duration_s,
            rest,
            sample_length_s,
            target_fs,
            channel_policy,
            n_classes,
            class_map,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn with_channel_policy(mut self, policy: ChannelPolicy) -> Self {
        self.channel_policy = policy;
        self
    }

    pub fn with_class_map(mut self, class_map: Vec<usize>) -> Result<Self> {
        self.n_classes = distinct(&class_map);
        self.class_map = class_map;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_domains == 0 {
            return Err(Error::invalid("template needs at least one domain"));
        }
        if !(self.sample_length_s > 0.0 && self.domain_duration_s > 0.0 && self.target_fs > 0.0) {
            return Err(Error::invalid("durations and target_fs must be positive"));
        }
        let ratio = self.domain_duration_s / self.sample_length_s;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return Err(Error::invalid(format!(
                "domain duration {} s is not an integer multiple of sample length {} s",
                self.domain_duration_s, self.sample_length_s
            )));
        }
        let tp = self.sample_length_s * self.target_fs;
        if (tp - tp.round()).abs() > 1e-9 || tp.round() < 1.0 {
            return Err(Error::invalid(format!(
                "sample length {} s is not a whole number of samples at {} Hz",
                self.sample_length_s, self.target_fs
            )));
        }
        let dur = self.domain_duration_s * self.target_fs;
        if (dur - dur.round()).abs() > 1e-9 {
            return Err(Error::invalid("domain duration is not a whole number of samples"));
        }
        if let RestSpec::Range(lo, hi) = self.rest {
            if lo > hi {
                return Err(Error::invalid(format!("rest range {lo}..={hi} is empty")));
            }
        }
        if self.class_map.len() != self.n_domains {
            return Err(Error::invalid(format!(
                "class map covers {} domains, template has {}",
                self.class_map.len(),
                self.n_domains
            )));
        }
        let image = distinct(&self.class_map);
        if image != self.n_classes || self.class_map.iter().any(|&c| c >= self.n_classes) {
            return Err(Error::invalid(format!(
                "class map must use exactly the classes 0..{} (found {image} distinct)",
                self.n_classes
            )));
        }
        Ok(())
    }

    pub fn samples_per_domain(&self) -> usize {
        (self.domain_duration_s / self.sample_length_s).round() as usize
    }

    pub fn sample_timepoints(&self) -> usize {
        (self.sample_length_s * self.target_fs).round() as usize
    }

    pub fn n_samples(&self) -> usize {
        self.n_domains * self.samples_per_domain()
    }

    /// Worst-case recording length: all domains plus maximal rests.
    pub fn required_duration(&self) -> f64 {
        self.n_domains as f64 * self.domain_duration_s
            + (self.n_domains.saturating_sub(1)) as f64 * self.rest.max() as f64
    }

    /// Whether domain and class labels coincide one-to-one.
    pub fn class_is_domain(&self) -> bool {
        self.n_classes == self.n_domains && self.class_map.iter().enumerate().all(|(d, &c)| d == c)
    }

    pub fn domain_chance_pct(&self) -> f64 {
        100.0 / self.n_domains as f64
    }

    pub fn class_chance_pct(&self) -> f64 {
        100.0 / self.n_classes as f64
    }

    /// Domain windows laid out left to right from t = 0. Range rests are drawn
    /// from `seed`, so the same seed reproduces the layout used by
    /// [`reorganize`].
    pub fn layout(&self, seed: u64) -> Vec<DomainWindow> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let mut t = 0.0;
        (0..self.n_domains)
            .map(|d| {
                if d > 0 {
                    t += match self.rest {
                        RestSpec::Fixed(r) => r as f64,
                        RestSpec::Range(lo, hi) => rng.random_range(lo..=hi) as f64,
                    };
                }
                let w = DomainWindow {
                    domain_id: d,
                    start_s: t,
                    end_s: t + self.domain_duration_s,
                };
                t = w.end_s;
                w
            })
            .collect()
    }
}

fn distinct(v: &[usize]) -> usize {
    let mut s = v.to_vec();
    s.sort_unstable();
    s.dedup();
    s.len()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub subject_id: u32,
    pub domain_id: usize,
    pub class_id: usize,
    /// Absolute start time in the source recording, seconds.
    pub t_start: f64,
    /// `channels x timepoints`, standard layout.
    pub data: Array2<f64>,
}

impl Sample {
    pub fn values(&self) -> &[f64] {
        self.data.as_slice().expect("sample data is standard layout")
    }
}

/// Label metadata of one sample, without its data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub domain_id: usize,
    pub class_id: usize,
    pub t_start: f64,
}

/// What the splitters need to know about a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetIndex {
    pub kind: TemplateKind,
    pub n_classes: usize,
    pub class_is_domain: bool,
    pub entries: Vec<SampleMeta>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub samples: Vec<Sample>,
    pub template: DesignTemplate,
    pub subject_id: u32,
    pub provenance: String,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.samples.first().map_or(0, |s| s.data.nrows())
    }

    pub fn timepoints(&self) -> usize {
        self.samples.first().map_or(0, |s| s.data.ncols())
    }

    pub fn fs(&self) -> f64 {
        self.template.target_fs
    }

    pub fn index(&self) -> DatasetIndex {
        DatasetIndex {
            kind: self.template.kind,
            n_classes: self.template.n_classes,
            class_is_domain: self.template.class_is_domain(),
            entries: self
                .samples
                .iter()
                .map(|s| SampleMeta {
                    domain_id: s.domain_id,
                    class_id: s.class_id,
                    t_start: s.t_start,
                })
                .collect(),
        }
    }

    /// Domain ids ordered by presentation time.
    pub fn presentation_order(&self) -> Vec<usize> {
        self.index().presentation_order()
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let c = self.channels();
        let l = self.timepoints();
        let mut payload = Array2::<f64>::zeros((c, l * self.samples.len()));
        let mut entries = Vec::with_capacity(self.samples.len());
        for (i, smp) in self.samples.iter().enumerate() {
            payload.slice_mut(s![.., i * l..(i + 1) * l]).assign(&smp.data);
            entries.push(ManifestEntry {
                domain_id: smp.domain_id,
                class_id: smp.class_id,
                t_start: smp.t_start,
                offset: i * l,
            });
        }
        let manifest = Manifest {
            format: DATASET_FORMAT.to_string(),
            template: self.template.clone(),
            subject_id: self.subject_id,
            provenance: self.provenance.clone(),
            class_map: self.template.class_map.clone(),
            channels: c,
            sample_timepoints: l,
            fs: self.fs(),
            samples: entries,
        };
        let mpath = dir.join(MANIFEST);
        fs::write(&mpath, serde_json::to_vec_pretty(&manifest)?).map_err(|e| Error::io(&mpath, e))?;
        let header = RawHeader {
            channels: c,
            fs: self.fs(),
            timepoints: l * self.samples.len(),
            dtype: Dtype::F64,
            origin: self.provenance.clone(),
            extra: Vec::new(),
        };
        let mut buf = Vec::new();
        write_recording(&mut buf, &header, payload.as_slice().expect("standard layout"))?;
        let ppath = dir.join(PAYLOAD);
        fs::write(&ppath, buf).map_err(|e| Error::io(&ppath, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mpath = dir.join(MANIFEST);
        let text = fs::read(&mpath).map_err(|e| Error::io(&mpath, e))?;
        let manifest: Manifest = serde_json::from_slice(&text)?;
        if manifest.format != DATASET_FORMAT {
            return Err(Error::MalformedHeader(format!("unknown dataset format {:?}", manifest.format)));
        }
        manifest.template.validate()?;
        let ppath = dir.join(PAYLOAD);
        let bytes = fs::read(&ppath).map_err(|e| Error::io(&ppath, e))?;
        let (header, values) = read_recording(&bytes)?;
        let (c, l) = (manifest.channels, manifest.sample_timepoints);
        if header.channels != c {
            return Err(Error::Shape(format!("payload has {} channels, manifest {c}", header.channels)));
        }
        let payload = Array2::from_shape_vec((c, header.timepoints), values).map_err(|e| Error::Shape(e.to_string()))?;
        let samples = manifest
            .samples
            .iter()
            .map(|e| {
                if e.offset + l > header.timepoints {
                    return Err(Error::LengthMismatch {
                        expected: e.offset + l,
                        found: header.timepoints,
                    });
                }
                Ok(Sample {
                    subject_id: manifest.subject_id,
                    domain_id: e.domain_id,
                    class_id: e.class_id,
                    t_start: e.t_start,
                    data: payload.slice(s![.., e.offset..e.offset + l]).to_owned(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            samples,
            template: manifest.template,
            subject_id: manifest.subject_id,
            provenance: manifest.provenance,
        })
    }
}

impl DatasetIndex {
    pub fn presentation_order(&self) -> Vec<usize> {
        let mut first: Vec<(f64, usize)> = Vec::new();
        for e in &self.entries {
            match first.iter_mut().find(|(_, d)| *d == e.domain_id) {
                Some(slot) => slot.0 = slot.0.min(e.t_start),
                None => first.push((e.t_start, e.domain_id)),
            }
        }
        first.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        first.into_iter().map(|(_, d)| d).collect()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    template: DesignTemplate,
    subject_id: u32,
    provenance: String,
    class_map: Vec<usize>,
    channels: usize,
    sample_timepoints: usize,
    fs: f64,
    samples: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    domain_id: usize,
    class_id: usize,
    t_start: f64,
    offset: usize,
}

/// Reorganize a continuous recording into a labeled block-design dataset.
pub fn reorganize(series: &MultichannelSeries, template: &DesignTemplate, subject_id: u32, seed: u64) -> Result<LabeledDataset> {
    reorganize_band(series, template, subject_id, seed, Band::Full)
}

/// As [`reorganize`], band-filtering the continuous recording after
/// resampling and before segmentation.
pub fn reorganize_band(
    series: &MultichannelSeries,
    template: &DesignTemplate,
    subject_id: u32,
    seed: u64,
    band: Band,
) -> Result<LabeledDataset> {
    template.validate()?;
    let required = template.required_duration();
    let available = series.duration_s();
    if available + 1e-9 < required {
        return Err(Error::RecordingTooShort {
            required_s: required,
            available_s: available,
            shortfall_s: required - available,
        });
    }
    if series.fs() < template.target_fs {
        return Err(Error::invalid(format!(
            "recording at {} Hz cannot be reorganized at {} Hz",
            series.fs(),
            template.target_fs
        )));
    }
    let resampled = dsp::resample(series, template.target_fs)?;
    let filtered = dsp::bandpass(&resampled, band)?;
    let data = template.channel_policy.apply(filtered.data())?;

    let fs = template.target_fs;
    let len = template.sample_timepoints();
    let mut samples = Vec::with_capacity(template.n_samples());
    for w in template.layout(seed) {
        let class_id = template.class_map[w.domain_id];
        for i in 0..template.samples_per_domain() {
            let t_start = w.start_s + i as f64 * template.sample_length_s;
            let start = (t_start * fs).round() as usize;
            if start + len > data.ncols() {
                return Err(Error::RecordingTooShort {
                    required_s: (start + len) as f64 / fs,
                    available_s: data.ncols() as f64 / fs,
                    shortfall_s: (start + len - data.ncols()) as f64 / fs,
                });
            }
            samples.push(Sample {
                subject_id,
                domain_id: w.domain_id,
                class_id,
                t_start,
                data: data.slice(s![.., start..start + len]).to_owned(),
            });
        }
    }
    Ok(LabeledDataset {
        samples,
        template: template.clone(),
        subject_id,
        provenance: format!("{}|{}|band={band}", series.origin(), template.kind),
    })
}
