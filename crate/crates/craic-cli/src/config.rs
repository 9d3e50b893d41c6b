//! Pipeline configuration: a key=value file plus command-line overrides;
//! flags win over file values, file values win over defaults.

use crate::error::CliError;
use craic_core::compress::CompressionScheme;
use craic_core::neural::{ModelConfig, ModelKind};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Profile {
    Desk,
    Full,
}

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub work: PathBuf,
    pub seed: u64,
    pub compression: CompressionScheme,
    pub max_tokens: usize,
    pub vocab_size: usize,
    /// Explicit split sizes; when absent the corpus splits 80/10/10.
    pub train_n: Option<usize>,
    pub valid_n: Option<usize>,
    pub test_n: Option<usize>,
    pub profile: Profile,
    pub hidden_size_lm: Option<usize>,
    pub hidden_size_s2s: Option<usize>,
    pub learning_rate: Option<f32>,
    pub decay_factor: Option<f32>,
    pub batch_size: Option<usize>,
    pub dropout_keep: Option<f32>,
    pub clip_norm: Option<f32>,
    pub tbptt_steps: Option<usize>,
    pub max_epochs_lm: Option<usize>,
    pub max_epochs_s2s: Option<usize>,
    pub min_count: usize,
    pub strip_threshold: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: None,
            work: PathBuf::from("craic-work"),
            seed: 42,
            compression: CompressionScheme::BeginEnd,
            max_tokens: craic_core::compress::DEFAULT_MAX_TOKENS,
            vocab_size: 2000,
            train_n: None,
            valid_n: None,
            test_n: None,
            profile: Profile::Desk,
            hidden_size_lm: None,
            hidden_size_s2s: None,
            learning_rate: None,
            decay_factor: None,
            batch_size: None,
            dropout_keep: None,
            clip_norm: None,
            tbptt_steps: None,
            max_epochs_lm: None,
            max_epochs_s2s: None,
            min_count: 25,
            strip_threshold: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::ConfigInvalid(format!("cannot read {}: {e}", path.display()))
        })?;
        let mut entries = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::ConfigInvalid(format!(
                    "{}:{}: expected key=value, got `{line}`",
                    path.display(),
                    lineno + 1
                ))
            })?;
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        let mut config = PipelineConfig::default();
        config.apply_entries(&entries)?;
        Ok(config)
    }

    fn apply_entries(&mut self, entries: &BTreeMap<String, String>) -> Result<(), CliError> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
            value
                .parse()
                .map_err(|_| CliError::ConfigInvalid(format!("bad value for {key}: `{value}`")))
        }
        for (key, value) in entries {
            match key.as_str() {
                "input" => self.input = Some(PathBuf::from(value)),
                "work" => self.work = PathBuf::from(value),
                "seed" => self.seed = parse(key, value)?,
                "compression" => {
                    self.compression = value
                        .parse()
                        .map_err(|e: String| CliError::ConfigInvalid(e))?
                }
                "max_tokens" => self.max_tokens = parse(key, value)?,
                "vocab_size" => self.vocab_size = parse(key, value)?,
                "train_n" => self.train_n = Some(parse(key, value)?),
                "valid_n" => self.valid_n = Some(parse(key, value)?),
                "test_n" => self.test_n = Some(parse(key, value)?),
                "profile" => {
                    self.profile = match value.as_str() {
                        "desk" => Profile::Desk,
                        "full" => Profile::Full,
                        other => {
                            return Err(CliError::ConfigInvalid(format!(
                                "unknown profile `{other}` (expected desk|full)"
                            )))
                        }
                    }
                }
                "hidden_size_lm" => self.hidden_size_lm = Some(parse(key, value)?),
                "hidden_size_s2s" => self.hidden_size_s2s = Some(parse(key, value)?),
                "learning_rate" => self.learning_rate = Some(parse(key, value)?),
                "decay_factor" => self.decay_factor = Some(parse(key, value)?),
                "batch_size" => self.batch_size = Some(parse(key, value)?),
                "dropout_keep" => self.dropout_keep = Some(parse(key, value)?),
                "dropout_drop" => {
                    let drop: f32 = parse(key, value)?;
                    self.dropout_keep = Some(1.0 - drop);
                }
                "clip_norm" => self.clip_norm = Some(parse(key, value)?),
                "tbptt_steps" => self.tbptt_steps = Some(parse(key, value)?),
                "max_epochs_lm" => self.max_epochs_lm = Some(parse(key, value)?),
                "max_epochs_s2s" => self.max_epochs_s2s = Some(parse(key, value)?),
                "min_count" => self.min_count = parse(key, value)?,
                "strip_threshold" => self.strip_threshold = Some(parse(key, value)?),
                other => {
                    return Err(CliError::ConfigInvalid(format!(
                        "unknown config key `{other}`"
                    )))
                }
            }
        }
        Ok(())
    }

    /// Concrete model configuration for one model kind, folding the profile
    /// defaults under any explicit overrides. Vocabulary sizes are filled in
    /// later from the built vocabularies.
    pub fn model_config(&self, kind: ModelKind) -> ModelConfig {
        let mut mc = match self.profile {
            Profile::Desk => ModelConfig::desk(kind),
            Profile::Full => ModelConfig::full_scale(kind),
        };
        mc.seed = self.seed;
        let hidden = match kind {
            ModelKind::Lm => self.hidden_size_lm,
            ModelKind::Seq2Seq => self.hidden_size_s2s,
        };
        if let Some(h) = hidden {
            mc.hidden_size = h;
        }
        if let Some(v) = self.learning_rate {
            mc.learning_rate = v;
        }
        if let Some(v) = self.decay_factor {
            mc.decay_factor = v;
        }
        if let Some(v) = self.batch_size {
            mc.batch_size = v;
        }
        if let Some(v) = self.dropout_keep {
            mc.dropout_keep = v;
        }
        if let Some(v) = self.clip_norm {
            mc.clip_norm = v;
        }
        if let Some(v) = self.tbptt_steps {
            mc.tbptt_steps = v;
        }
        let epochs = match kind {
            ModelKind::Lm => self.max_epochs_lm,
            ModelKind::Seq2Seq => self.max_epochs_s2s,
        };
        if let Some(e) = epochs {
            mc.max_epochs = e;
        }
        mc
    }

    /// Split sizes used at full corpus scale.
    pub const FULL_SPLIT: (usize, usize, usize) = (3_000_000, 5000, 5000);

    /// When sizes are not pinned explicitly, the desk profile splits
    /// 80/10/10 and the full profile uses its fixed 3M/5000/5000 draw.
    pub fn split_sizes(&self, total: usize) -> Result<(usize, usize, usize), CliError> {
        match (self.train_n, self.valid_n, self.test_n) {
            (None, None, None) => match self.profile {
                Profile::Desk => {
                    let train = total * 8 / 10;
                    let valid = total / 10;
                    let test = total - train - valid;
                    Ok((train, valid, test))
                }
                Profile::Full => Ok(Self::FULL_SPLIT),
            },
            (Some(train), Some(valid), Some(test)) => Ok((train, valid, test)),
            _ => Err(CliError::ConfigInvalid(
                "train_n, valid_n and test_n must be given together".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_file_and_overrides_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("craic.conf");
        std::fs::write(
            &path,
            "# comment\nseed = 7\ncompression = signature\nvocab_size=500\ndropout_drop=0.35\n",
        )
        .unwrap();
        let config = PipelineConfig::from_file(&path).unwrap();
        assert_eq!(config.seed, 7);
        assert_eq!(config.compression, CompressionScheme::Signature);
        assert_eq!(config.vocab_size, 500);
        assert!((config.dropout_keep.unwrap() - 0.65).abs() < 1e-6);
    }

    #[test]
    fn rejects_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("craic.conf");
        std::fs::write(&path, "nonsense = 1\n").unwrap();
        assert!(matches!(
            PipelineConfig::from_file(&path),
            Err(CliError::ConfigInvalid(_))
        ));
    }

    #[test]
    fn profile_defaults_flow_into_model_config() {
        let config = PipelineConfig::default();
        let lm = config.model_config(ModelKind::Lm);
        assert_eq!(lm.hidden_size, 128);
        assert_eq!(lm.seed, 42);
        let mut full = config.clone();
        full.profile = Profile::Full;
        assert_eq!(full.model_config(ModelKind::Seq2Seq).hidden_size, 512);
    }

    #[test]
    fn split_defaults() {
        let config = PipelineConfig::default();
        assert_eq!(config.split_sizes(100).unwrap(), (80, 10, 10));
        assert_eq!(config.split_sizes(37).unwrap(), (29, 3, 5));
        let mut full = config.clone();
        full.profile = Profile::Full;
        assert_eq!(full.split_sizes(4_000_000).unwrap(), (3_000_000, 5000, 5000));
        // Explicit sizes always win.
        full.train_n = Some(10);
        full.valid_n = Some(2);
        full.test_n = Some(2);
        assert_eq!(full.split_sizes(100).unwrap(), (10, 2, 2));
    }
}
