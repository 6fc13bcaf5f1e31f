//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Later assignments
//! win, and command-line overrides are applied after the file. The config
//! hash covers every key except `out` and `jobs`, which change where and
//! how fast a run happens but not what it computes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::aggregate::TieBreak;
use crate::augment::AugmentParams;
use crate::backbone::{hex, BackboneId, BackboneSpec, PreprocessMode};
use crate::error::{Error, Result};
use crate::head::TrainConfig;
use crate::rng::stream_seed;
use crate::synthetic::SyntheticSpec;
use crate::TOOL_VERSION;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Manifest,
    Synthetic,
}

impl FromStr for Source {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "manifest" => Ok(Source::Manifest),
            "synthetic" => Ok(Source::Synthetic),
            o => Err(format!("expected manifest or synthetic, got {o:?}")),
        }
    }
}

/// How training frames are augmented.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugmentMode {
    /// No augmentation; every epoch sees the unaugmented features.
    Off,
    /// `copies` augmented copies per training frame are extracted once and
    /// kept in the feature cache; epoch `e` reads copy `e mod copies + 1`.
    Cached,
    /// A fresh augmented copy per training frame and epoch, never
    /// persisted.
    Faithful,
}

impl FromStr for AugmentMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "off" => Ok(AugmentMode::Off),
            "cached" => Ok(AugmentMode::Cached),
            "faithful" => Ok(AugmentMode::Faithful),
            o => Err(format!("expected off, cached or faithful, got {o:?}")),
        }
    }
}

impl AugmentMode {
    fn name(self) -> &'static str {
        match self {
            AugmentMode::Off => "off",
            AugmentMode::Cached => "cached",
            AugmentMode::Faithful => "faithful",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: Source,
    pub manifest: Option<PathBuf>,
    /// Base directory for relative image paths; defaults to the manifest's
    /// directory.
    pub image_root: Option<PathBuf>,
    /// Feature cache file; defaults to `<out>/features.lusf`.
    pub features: Option<PathBuf>,
    pub backbone: BackboneId,
    pub model_file: Option<PathBuf>,
    /// Only for `backbone = custom`; named backbones use the registry.
    pub input_size: Option<usize>,
    pub feature_dim: Option<usize>,
    pub preprocess: Option<PreprocessMode>,
    pub pre_pooled: bool,
    pub augment_mode: AugmentMode,
    pub augment_copies: usize,
    pub augment: AugmentParams,
    pub train: TrainConfig,
    pub k: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub jobs: usize,
    pub tie_break: TieBreak,
    pub synthetic: SyntheticSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            source: Source::Manifest,
            manifest: None,
            image_root: None,
            features: None,
            backbone: BackboneId::Resnet50,
            model_file: None,
            input_size: None,
            feature_dim: None,
            preprocess: None,
            pre_pooled: false,
            augment_mode: AugmentMode::Cached,
            augment_copies: 3,
            augment: AugmentParams::default(),
            train: TrainConfig::default(),
            k: 3,
            seed: 0,
            out: PathBuf::from("out"),
            jobs: 1,
            tie_break: TieBreak::High,
            synthetic: SyntheticSpec::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse {value:?}: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {value:?}"))),
    }
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("config file {}: {e}", path.display())))?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`, got {line:?}", n + 1))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "source" => self.source = parse(key, value)?,
            "manifest" => self.manifest = opt_path(value),
            "image_root" => self.image_root = opt_path(value),
            "features" => self.features = opt_path(value),
            "backbone" => self.backbone = parse(key, value)?,
            "model_file" => self.model_file = opt_path(value),
            "input_size" => self.input_size = Some(parse(key, value)?),
            "feature_dim" => self.feature_dim = Some(parse(key, value)?),
            "preprocess" => self.preprocess = Some(parse(key, value)?),
            "pre_pooled" => self.pre_pooled = parse_bool(key, value)?,
            "augment.mode" => self.augment_mode = parse(key, value)?,
            "augment.copies" => self.augment_copies = parse(key, value)?,
            "augment.max_rotation_deg" => self.augment.max_rotation_deg = parse(key, value)?,
            "augment.max_shift_frac" => self.augment.max_shift_frac = parse(key, value)?,
            "augment.max_scale_delta" => self.augment.max_scale_delta = parse(key, value)?,
            "augment.hflip_prob" => self.augment.hflip_prob = parse(key, value)?,
            "epochs" => self.train.epochs = parse(key, value)?,
            "batch_size" => self.train.batch_size = parse(key, value)?,
            "learning_rate" => self.train.learning_rate = parse(key, value)?,
            "dropout" => self.train.dropout_rate = parse(key, value)?,
            "adam.beta1" => self.train.adam_beta1 = parse(key, value)?,
            "adam.beta2" => self.train.adam_beta2 = parse(key, value)?,
            "adam.epsilon" => self.train.adam_epsilon = parse(key, value)?,
            "class_weights" => self.train.class_weights = parse_bool(key, value)?,
            "k" => self.k = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "jobs" => self.jobs = parse(key, value)?,
            "tie_break" => self.tie_break = parse(key, value)?,
            "synthetic.n_per_class" => self.synthetic.n_per_class = parse(key, value)?,
            "synthetic.feature_dim" => self.synthetic.feature_dim = parse(key, value)?,
            "synthetic.separation" => self.synthetic.class_separation = parse(key, value)?,
            "synthetic.n_patients" => self.synthetic.n_patients = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.k < 2 {
            return cfg(format!("k: must be at least 2, got {}", self.k));
        }
        if self.jobs < 1 {
            return cfg("jobs: must be at least 1".into());
        }
        self.train_config()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.augment
            .validate()
            .map_err(|e| Error::Config(format!("augment: {e}")))?;
        if self.augment_mode == AugmentMode::Cached && self.augment_copies < 1 {
            return cfg("augment.copies: must be at least 1 in cached mode".into());
        }
        match self.source {
            Source::Synthetic => {
                self.synthetic_spec()
                    .validate()
                    .map_err(|e| Error::Config(e.to_string()))?;
            }
            Source::Manifest => {
                match &self.manifest {
                    None => return cfg("manifest: required when source = manifest".into()),
                    Some(p) if !p.is_file() => {
                        return cfg(format!("manifest: file {} not found", p.display()))
                    }
                    _ => {}
                }
                if let Some(root) = &self.image_root {
                    if !root.is_dir() {
                        return cfg(format!("image_root: directory {} not found", root.display()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Backbone description; only meaningful for `source = manifest`.
    pub fn backbone_spec(&self) -> Result<BackboneSpec> {
        let model = self
            .model_file
            .clone()
            .ok_or_else(|| Error::Config("model_file: required to extract features".into()))?;
        let spec = match BackboneSpec::named(self.backbone, &model) {
            Some(mut named) => {
                if let Some(d) = self.feature_dim {
                    named.feature_dim = d;
                }
                if self.input_size.is_some_and(|s| s != named.input_size)
                    || self.preprocess.is_some_and(|p| p != named.preprocess_mode)
                {
                    return Err(Error::Config(format!(
                        "input_size/preprocess: fixed by the {} registry entry",
                        self.backbone
                    )));
                }
                named
            }
            None => {
                let need = |name: &str| Error::Config(format!("{name}: required for backbone = custom"));
                BackboneSpec::custom(
                    model,
                    self.input_size.ok_or_else(|| need("input_size"))?,
                    self.feature_dim.ok_or_else(|| need("feature_dim"))?,
                    self.preprocess.ok_or_else(|| need("preprocess"))?,
                )
            }
        };
        let spec = spec.with_pre_pooled(self.pre_pooled);
        spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(spec)
    }

    /// Head settings with the training seed derived from the run seed.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: stream_seed(self.seed, b"train"),
            ..self.train
        }
    }

    pub fn augment_seed(&self) -> u64 {
        stream_seed(self.seed, b"augment")
    }

    pub fn synthetic_spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            seed: self.seed,
            ..self.synthetic
        }
    }

    pub fn features_path(&self) -> PathBuf {
        self.features
            .clone()
            .unwrap_or_else(|| self.out.join("features.lusf"))
    }

    pub fn image_base(&self) -> PathBuf {
        self.image_root.clone().unwrap_or_else(|| {
            self.manifest
                .as_deref()
                .and_then(Path::parent)
                .map(Path::to_path_buf)
                .unwrap_or_default()
        })
    }

    /// Copy indices read by training epochs, in epoch order of reuse.
    pub fn train_copies(&self) -> Vec<u32> {
        match (self.source, self.augment_mode) {
            (Source::Synthetic, _) | (_, AugmentMode::Off) => vec![0],
            (_, AugmentMode::Cached) => (1..=self.augment_copies as u32).collect(),
            (_, AugmentMode::Faithful) => (1..=self.train.epochs as u32).collect(),
        }
    }

    /// Every key with its value, sorted, one `key = value` per line.
    pub fn render(&self) -> String {
        let opt = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let num = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
        let mut kv: BTreeMap<&str, String> = BTreeMap::new();
        kv.insert("source", match self.source {
            Source::Manifest => "manifest".into(),
            Source::Synthetic => "synthetic".into(),
        });
        kv.insert("manifest", opt(&self.manifest));
        kv.insert("image_root", opt(&self.image_root));
        kv.insert("features", opt(&self.features));
        kv.insert("backbone", self.backbone.to_string());
        kv.insert("model_file", opt(&self.model_file));
        kv.insert("input_size", num(self.input_size));
        kv.insert("feature_dim", num(self.feature_dim));
        kv.insert("preprocess", self.preprocess.map(|p| p.to_string()).unwrap_or_default());
        kv.insert("pre_pooled", self.pre_pooled.to_string());
        kv.insert("augment.mode", self.augment_mode.name().into());
        kv.insert("augment.copies", self.augment_copies.to_string());
        kv.insert("augment.max_rotation_deg", self.augment.max_rotation_deg.to_string());
        kv.insert("augment.max_shift_frac", self.augment.max_shift_frac.to_string());
        kv.insert("augment.max_scale_delta", self.augment.max_scale_delta.to_string());
        kv.insert("augment.hflip_prob", self.augment.hflip_prob.to_string());
        kv.insert("epochs", self.train.epochs.to_string());
        kv.insert("batch_size", self.train.batch_size.to_string());
        kv.insert("learning_rate", self.train.learning_rate.to_string());
        kv.insert("dropout", self.train.dropout_rate.to_string());
        kv.insert("adam.beta1", self.train.adam_beta1.to_string());
        kv.insert("adam.beta2", self.train.adam_beta2.to_string());
        kv.insert("adam.epsilon", self.train.adam_epsilon.to_string());
        kv.insert("class_weights", self.train.class_weights.to_string());
        kv.insert("k", self.k.to_string());
        kv.insert("seed", self.seed.to_string());
        kv.insert("out", self.out.display().to_string());
        kv.insert("jobs", self.jobs.to_string());
        kv.insert("tie_break", self.tie_break.to_string());
        kv.insert("synthetic.n_per_class", self.synthetic.n_per_class.to_string());
        kv.insert("synthetic.feature_dim", self.synthetic.feature_dim.to_string());
        kv.insert("synthetic.separation", self.synthetic.class_separation.to_string());
        kv.insert("synthetic.n_patients", self.synthetic.n_patients.to_string());
        let mut out = String::new();
        for (k, v) in kv {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Hex SHA-256 of the rendering without `out` and `jobs`.
    pub fn hash(&self) -> String {
        let canonical: String = self
            .render()
            .lines()
            .filter(|l| !l.starts_with("out =") && !l.starts_with("jobs ="))
            .map(|l| format!("{l}\n"))
            .collect();
        hex(&Sha256::digest(canonical.as_bytes()))
    }

    /// First line of every text artifact.
    pub fn header(&self) -> String {
        format!("# {TOOL_VERSION} config={} seed={}\n", self.hash(), self.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_mirror_training_setup() {
        let c = RunConfig::default();
        assert_eq!(c.train.epochs, 3);
        assert_eq!(c.train.batch_size, 32);
        assert_eq!(c.train.learning_rate, 0.001);
        assert_eq!(c.train.dropout_rate, 0.5);
        assert_eq!(c.k, 3);
        assert_eq!(c.augment_copies, 3);
        assert_eq!(c.tie_break, TieBreak::High);
        assert!(!c.train.class_weights);
    }

    #[test]
    fn file_then_overrides() {
        let mut c = RunConfig::default();
        c.apply_text("# comment\nsource = synthetic\nepochs = 5\n\nk=4\n").unwrap();
        c.apply_override("epochs=7").unwrap();
        assert_eq!(c.source, Source::Synthetic);
        assert_eq!(c.train.epochs, 7);
        assert_eq!(c.k, 4);
        c.validate().unwrap();
    }

    #[test]
    fn errors_name_the_field() {
        let mut c = RunConfig::default();
        let e = c.set("epochs", "three").unwrap_err().to_string();
        assert!(e.contains("epochs"), "{e}");
        let e = c.set("nonsense", "1").unwrap_err().to_string();
        assert!(e.contains("nonsense"), "{e}");
        assert!(c.apply_text("just words").is_err());
        let e = RunConfig::default().validate().unwrap_err().to_string();
        assert!(e.contains("manifest"), "{e}");
        let mut c = RunConfig {
            source: Source::Synthetic,
            ..RunConfig::default()
        };
        c.train.epochs = 0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn hash_ignores_out_and_jobs() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.out = PathBuf::from("elsewhere");
        b.jobs = 8;
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert!(a.header().starts_with("# lus "));
    }

    #[test]
    fn render_round_trips() {
        let mut a = RunConfig::default();
        a.apply_text("source = synthetic\nbackbone = custom\ninput_size = 8\nfeature_dim = 4\npreprocess = scale_pm1\naugment.mode = faithful\ntie_break = low\nclass_weights = true").unwrap();
        let mut b = RunConfig::default();
        b.apply_text(&a.render()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn backbone_spec_resolution() {
        let mut c = RunConfig::default();
        assert!(c.backbone_spec().is_err());
        c.model_file = Some("m.onnx".into());
        let s = c.backbone_spec().unwrap();
        assert_eq!((s.input_size, s.feature_dim), (224, 2048));
        c.input_size = Some(100);
        assert!(c.backbone_spec().is_err());
        c.backbone = BackboneId::Custom;
        assert!(c.backbone_spec().is_err());
        c.feature_dim = Some(4);
        c.preprocess = Some(PreprocessMode::ScalePm1);
        assert_eq!(c.backbone_spec().unwrap().input_size, 100);
    }
}
