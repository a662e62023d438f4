//! Declarative run configuration: a flat key-value TOML file with sections,
//! every seed pinned, and a content fingerprint for sweep bookkeeping.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::noise::InstrumentModel;
use crate::preprocess::Mode;
use crate::reservoir::Shots;

/// Inline dataset generation spec, used when no dataset path is given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerateSpec {
    pub n: usize,
    pub seed: u64,
}

impl Default for GenerateSpec {
    fn default() -> Self {
        GenerateSpec { n: 4080, seed: 7 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PcaSection {
    pub components: usize,
}

impl Default for PcaSection {
    fn default() -> Self {
        PcaSection { components: 5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterSection {
    pub components: usize,
}

impl Default for FilterSection {
    fn default() -> Self {
        FilterSection {
            components: crate::preprocess::FILTER_COMPONENTS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSection {
    pub fraction: f64,
    pub seed: u64,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            fraction: 0.75,
            seed: 11,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapSection {
    pub resamples: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapSection {
    fn default() -> Self {
        BootstrapSection {
            resamples: 1000,
            level: 0.95,
            seed: 171,
        }
    }
}

/// Everything one end-to-end run needs. Defaults follow the reference
/// configuration: JWST mode, 4080 generated spectra, M = 5 components,
/// 20000 shots, 75/25 split, 5% threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    /// Dataset CSV to load; when absent, [`RunConfig::generate`] is used.
    pub dataset: Option<PathBuf>,
    pub generate: GenerateSpec,
    /// Explicit patch edges (µm); default is the mode's preset layout.
    pub patches: Option<Vec<f64>>,
    pub pca: PcaSection,
    pub filter: FilterSection,
    pub split: SplitSection,
    pub shots: Shots,
    /// Seed of the fixed random reservoir angles.
    pub reservoir_seed: u64,
    /// Seed of the finite-shot measurement streams.
    pub sampling_seed: u64,
    /// Seed of the injected photometric noise (noisy modes).
    pub noise_seed: u64,
    /// Success threshold in percent.
    pub threshold: f64,
    /// Threshold axis of the tolerance sweep.
    pub thresholds: Vec<f64>,
    pub bootstrap: BootstrapSection,
    pub instrument: InstrumentModel,
    /// Truncate the training side to this size (after the split).
    pub train_size: Option<usize>,
    /// Truncate the test side to this size (after the split).
    pub test_size: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::Jwst,
            dataset: None,
            generate: GenerateSpec::default(),
            patches: None,
            pca: PcaSection::default(),
            filter: FilterSection::default(),
            split: SplitSection::default(),
            shots: Shots::Finite(20000),
            reservoir_seed: 42,
            sampling_seed: 1234,
            noise_seed: 99,
            threshold: crate::readout::DEFAULT_THRESHOLD,
            thresholds: (1..=20).map(|i| i as f64 * 0.5).collect(),
            bootstrap: BootstrapSection::default(),
            instrument: InstrumentModel::default(),
            train_size: None,
            test_size: None,
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pca.components == 0 {
            return Err(Error::Config("pca.components must be at least 1".into()));
        }
        if self.filter.components == 0 {
            return Err(Error::Config("filter.components must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.split.fraction) || self.split.fraction == 0.0 {
            return Err(Error::Config(format!(
                "split.fraction must lie strictly between 0 and 1, got {}",
                self.split.fraction
            )));
        }
        if let Shots::Finite(0) = self.shots {
            return Err(Error::Config("shots must be at least 1 or \"infinite\"".into()));
        }
        if self.generate.n == 0 && self.dataset.is_none() {
            return Err(Error::Config("generate.n must be at least 1".into()));
        }
        if !self.threshold.is_finite() || self.threshold < 0.0 {
            return Err(Error::Config(format!(
                "threshold must be nonnegative, got {}",
                self.threshold
            )));
        }
        if self.thresholds.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Config("thresholds must be ascending".into()));
        }
        if !(0.0..1.0).contains(&self.bootstrap.level) || self.bootstrap.level == 0.0 {
            return Err(Error::Config(format!(
                "bootstrap.level must lie strictly between 0 and 1, got {}",
                self.bootstrap.level
            )));
        }
        if self.bootstrap.resamples < 100 {
            return Err(Error::Config("bootstrap.resamples must be at least 100".into()));
        }
        self.instrument.validate()?;
        if let Some(path) = &self.dataset {
            if !path.exists() {
                return Err(Error::Config(format!(
                    "dataset {} does not exist",
                    path.display()
                )));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("serialize config: {e}")))
    }

    /// SHA-256 over the canonical JSON form, with the named field blanked —
    /// sweep points emit this to prove only the swept variable moved.
    /// `except` is one of "", "m", "shots", "train_size", "threshold".
    pub fn fingerprint(&self, except: &str) -> String {
        let mut masked = self.clone();
        match except {
            "" => {}
            "m" => masked.pca.components = 0,
            "shots" => {
                masked.shots = Shots::Finite(0);
                masked.sampling_seed = 0;
            }
            "train_size" => masked.train_size = None,
            "threshold" => {
                masked.threshold = 0.0;
                masked.thresholds = Vec::new();
            }
            other => panic!("unknown sweep variable {other:?}"),
        }
        let json = serde_json::to_string(&masked).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
