//! Run configuration file (TOML). Every section and key is optional and
//! falls back to the defaults below; unknown keys are errors.
//!
//! ```toml
//! [data]
//! manifest = "manifest.csv"   # relative to this file
//! features = "features"       # directory holding <wsi_id>.<domain>.fbag
//! domains = ["rgb"]
//! stream_mode = "bag-union"
//!
//! [model]
//! head = "mrl"
//! hidden = 128
//! dropout = 0.25
//! pooling = "mean"
//!
//! [train]
//! lr = 0.001
//! weight_decay = 0.001
//! clip = 0.08                 # 0 turns clipping off
//! epochs = 25
//! seed = 0
//! threshold = 0.5
//!
//! [loss]
//! gamma_pos = 0.0
//! gamma_neg = 1.0
//! margin = 0.0
//!
//! [output]
//! dir = "run"
//! ```

use std::path::{Path, PathBuf};

use jointstream_core::attention::HeadConfig;
use jointstream_core::features::StreamMode;
use jointstream_core::training::TrainConfig;
use jointstream_core::{AslConfig, Domain, HeadKind, MrlPooling};
use serde::{Deserialize, Serialize};

use crate::error::{io, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub manifest: String,
    pub features: String,
    pub domains: Vec<String>,
    pub stream_mode: String,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            manifest: "manifest.csv".into(),
            features: "features".into(),
            domains: vec!["rgb".into()],
            stream_mode: StreamMode::default().name().into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub head: String,
    pub hidden: usize,
    pub dropout: f64,
    pub pooling: String,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { head: "mrl".into(), hidden: 128, dropout: 0.25, pooling: MrlPooling::Mean.name().into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub lr: f64,
    pub weight_decay: f64,
    pub clip: f64,
    pub epochs: usize,
    pub seed: u64,
    pub threshold: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self { lr: 0.001, weight_decay: 0.001, clip: 0.08, epochs: 25, seed: 0, threshold: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossSection {
    pub gamma_pos: f64,
    pub gamma_neg: f64,
    pub margin: f64,
}

impl Default for LossSection {
    fn default() -> Self {
        let d = AslConfig::default();
        Self { gamma_pos: d.gamma_pos, gamma_neg: d.gamma_neg, margin: d.margin }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "run".into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: DataSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub loss: LossSection,
    pub output: OutputSection,
}

/// A validated configuration with paths made absolute.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub raw: RunConfig,
    pub manifest: PathBuf,
    pub features: PathBuf,
    pub output: PathBuf,
    pub domains: Vec<Domain>,
    pub stream_mode: StreamMode,
    pub threshold: f64,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn load(path: &Path) -> Result<Resolved> {
        let text = std::fs::read_to_string(path).map_err(io(path))?;
        let bad = |message: String| Error::Config { path: path.to_path_buf(), message };
        let cfg = Self::parse(&text).map_err(bad)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve(base).map_err(bad)
    }

    /// Checks every value and builds the typed settings.
    pub fn resolve(&self, base: &Path) -> std::result::Result<Resolved, String> {
        let mut domains = Vec::new();
        for name in &self.data.domains {
            let d: Domain = name.parse().map_err(|e: jointstream_core::features::FeatureError| e.to_string())?;
            if domains.contains(&d) {
                return Err(format!("domain {name} listed twice"));
            }
            domains.push(d);
        }
        if domains.is_empty() {
            return Err("data.domains is empty".into());
        }
        let stream_mode = self.data.stream_mode.parse().map_err(|e: jointstream_core::features::FeatureError| e.to_string())?;
        let kind: HeadKind = self.model.head.parse().map_err(|e: jointstream_core::attention::AttentionError| e.to_string())?;
        let pooling = self.model.pooling.parse().map_err(|e: jointstream_core::attention::AttentionError| e.to_string())?;
        if self.model.hidden == 0 {
            return Err("model.hidden must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.model.dropout) {
            return Err("model.dropout must lie in [0, 1)".into());
        }
        let t = &self.train;
        if !(t.lr > 0.0 && t.lr.is_finite()) {
            return Err("train.lr must be positive".into());
        }
        if !(t.weight_decay >= 0.0 && t.weight_decay.is_finite()) {
            return Err("train.weight_decay must be non-negative".into());
        }
        if !(t.clip >= 0.0 && t.clip.is_finite()) {
            return Err("train.clip must be non-negative".into());
        }
        let asl = AslConfig { gamma_pos: self.loss.gamma_pos, gamma_neg: self.loss.gamma_neg, margin: self.loss.margin };
        if !asl.is_valid() || asl.margin >= 1.0 {
            return Err("loss needs 0 <= gamma_pos <= gamma_neg and 0 <= margin < 1".into());
        }
        let head = HeadConfig { kind, pooling, dropout_rate: self.model.dropout };
        let train = TrainConfig {
            lr: t.lr,
            weight_decay: t.weight_decay,
            clip: (t.clip > 0.0).then_some(t.clip),
            epochs: t.epochs,
            hidden: self.model.hidden,
            seed: t.seed,
            head,
            asl,
        };
        Ok(Resolved {
            raw: self.clone(),
            manifest: base.join(&self.data.manifest),
            features: base.join(&self.data.features),
            output: base.join(&self.output.dir),
            domains,
            stream_mode,
            threshold: t.threshold,
            train,
        })
    }
}
