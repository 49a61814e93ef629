//! Tool configuration: built-in defaults, overridden by a flat key-value
//! config file, overridden by same-named command-line flags.

use anyhow::{Context, Result};
use imix_core::adaptor::AdaptorConfig;
use imix_core::mixer::LambdaDistribution;
use imix_core::signal::AnalysisConfig;
use std::fmt;
use std::path::Path;

/// Marker for problems with configuration (file or flags); mapped to its
/// own exit code.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(ConfigError(msg.into()).into())
}

/// Every tunable of the pipeline. Adaptor vocabulary sizes are
/// placeholders here; the trainer derives them from the corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct ToolConfig {
    pub analysis: AnalysisConfig,
    pub mixer_count: usize,
    pub mixer_distribution: LambdaDistribution,
    pub mixer_seed: u64,
    pub adaptor: AdaptorConfig,
    pub train_steps: u64,
    pub use_discriminator: bool,
}

impl Default for ToolConfig {
    fn default() -> Self {
        Self {
            analysis: AnalysisConfig::default(),
            mixer_count: 200,
            mixer_distribution: LambdaDistribution::Beta,
            mixer_seed: 17,
            adaptor: AdaptorConfig {
                embedding_dim: 16,
                hidden_dim: 32,
                phoneme_vocab: 1,
                speakers: 1,
                lr_generator: 1e-4,
                lr_discriminator: 1e-3,
                batch_size: 8,
                seed: 17,
            },
            train_steps: 2000,
            use_discriminator: true,
        }
    }
}

impl ToolConfig {
    /// Applies one `key = value` pair. Keys use dotted section names and
    /// match the corresponding command flags exactly.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            match value.parse() {
                Ok(v) => Ok(v),
                Err(_) => config_err(format!("cannot parse {key} value {value:?}")),
            }
        }
        match key {
            "analysis.frame_length" => self.analysis.frame_length = parse(key, value)?,
            "analysis.hop_length" => self.analysis.hop_length = parse(key, value)?,
            "analysis.f0_min" => self.analysis.f0_min = parse(key, value)?,
            "analysis.f0_max" => self.analysis.f0_max = parse(key, value)?,
            "analysis.yin_threshold" => self.analysis.yin_threshold = parse(key, value)?,
            "analysis.n_mels" => self.analysis.n_mels = parse(key, value)?,
            "analysis.n_cepstra" => self.analysis.n_cepstra = parse(key, value)?,
            "mixer.count" => self.mixer_count = parse(key, value)?,
            "mixer.distribution" => {
                self.mixer_distribution = match value.parse::<LambdaDistribution>() {
                    Ok(d) => d,
                    Err(e) => return config_err(e.to_string()),
                }
            }
            "mixer.seed" => self.mixer_seed = parse(key, value)?,
            "adaptor.embedding_dim" => self.adaptor.embedding_dim = parse(key, value)?,
            "adaptor.hidden_dim" => self.adaptor.hidden_dim = parse(key, value)?,
            "adaptor.lr_generator" => self.adaptor.lr_generator = parse(key, value)?,
            "adaptor.lr_discriminator" => self.adaptor.lr_discriminator = parse(key, value)?,
            "adaptor.batch_size" => self.adaptor.batch_size = parse(key, value)?,
            "adaptor.seed" => self.adaptor.seed = parse(key, value)?,
            "train.steps" => self.train_steps = parse(key, value)?,
            "train.discriminator" => self.use_discriminator = parse(key, value)?,
            other => return config_err(format!("unknown configuration key {other:?}")),
        }
        Ok(())
    }

    /// Parses a config file: one `key = value` per line, '#' comments.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))
            .map_err(|e| ConfigError(format!("{e:#}")))?;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return config_err(format!(
                    "{}:{}: expected `key = value`, found {line:?}",
                    path.display(),
                    i + 1
                ));
            };
            self.set(key.trim(), value.trim())
                .map_err(|e| ConfigError(format!("{}:{}: {e:#}", path.display(), i + 1)))?;
        }
        Ok(())
    }

    /// Resolves the final configuration: defaults, then the optional file,
    /// then the global seed, then per-flag overrides (most specific last).
    pub fn resolve(
        file: Option<&Path>,
        seed: Option<u64>,
        overrides: &[(String, String)],
    ) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(path) = file {
            cfg.apply_file(path)?;
        }
        if let Some(seed) = seed {
            cfg.mixer_seed = seed;
            cfg.adaptor.seed = seed;
        }
        for (key, value) in overrides {
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }

    /// Validates the sections a command is about to use.
    pub fn check_analysis(&self, sample_rate: u32) -> Result<()> {
        if let Err(e) = self.analysis.validate(sample_rate) {
            return config_err(e.to_string());
        }
        Ok(())
    }

    pub fn check_adaptor(&self) -> Result<()> {
        let mut probe = self.adaptor.clone();
        probe.phoneme_vocab = 1;
        probe.speakers = 1;
        if let Err(e) = probe.validate() {
            return config_err(e.to_string());
        }
        Ok(())
    }

    pub fn check_mixer(&self) -> Result<()> {
        if self.mixer_count == 0 {
            return config_err("mixer.count must be positive");
        }
        Ok(())
    }
}
