//! Run configuration, read from a TOML file.
//!
//! ```toml
//! seed = 7
//! workers = 2
//! surrogates = ["s1", "s2", "s3"]
//! targets = ["t1"]
//!
//! [paths]            # relative to the config file's directory
//! corpus = "corpus"
//! inputs = "inputs"
//! models = "models"
//! output = "out"
//!
//! [[detectors]]
//! name = "s1"
//! conv1 = 8
//! conv2 = 8
//! pool = 1
//! seed = 11
//!
//! [synth]      # SynthConfig
//! [train]      # TrainConfig
//! [attack]     # AttackConfig
//! [preprocess] # PreprocessConfig
//! [report]
//! ```
//!
//! Every section is optional; unknown keys are rejected.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::synth::SynthConfig;
use crate::attacks::{AttackConfig, PreprocessConfig};
use crate::error::{Error, Result};
use crate::models::{Architecture, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    /// Training corpus, laid out as `real/*.png` and `fake/*.png`.
    pub corpus: PathBuf,
    /// Images to attack.
    pub inputs: PathBuf,
    pub models: PathBuf,
    pub output: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            corpus: "corpus".into(),
            inputs: "inputs".into(),
            models: "models".into(),
            output: "out".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    pub name: String,
    pub conv1: usize,
    pub conv2: usize,
    pub pool: usize,
    /// Mixed with the run seed to seed initialization and shuffling.
    pub seed: u64,
}

impl DetectorSpec {
    pub fn architecture(&self) -> Architecture {
        Architecture {
            conv1: self.conv1,
            conv2: self.conv2,
            pool: self.pool,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportConfig {
    /// Also write per-stream rows to `ablation.csv`.
    pub ablation: bool,
    /// Also score the unattacked inputs as a baseline set.
    pub clean_baseline: bool,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            ablation: true,
            clean_baseline: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub workers: usize,
    pub paths: PathsConfig,
    pub detectors: Vec<DetectorSpec>,
    pub surrogates: Vec<String>,
    /// Held-out classifiers used for selection and evaluation.
    pub targets: Vec<String>,
    pub synth: SynthConfig,
    pub train: TrainConfig,
    pub attack: AttackConfig,
    pub preprocess: PreprocessConfig,
    pub report: ReportConfig,
}

fn detector(name: &str, conv1: usize, conv2: usize, pool: usize, seed: u64) -> DetectorSpec {
    DetectorSpec {
        name: name.into(),
        conv1,
        conv2,
        pool,
        seed,
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: 1,
            paths: PathsConfig::default(),
            detectors: vec![
                detector("s1", 8, 8, 1, 11),
                detector("s2", 6, 10, 2, 12),
                detector("s3", 10, 6, 3, 13),
                detector("t1", 12, 12, 2, 99),
            ],
            surrogates: vec!["s1".into(), "s2".into(), "s3".into()],
            targets: vec!["t1".into()],
            synth: SynthConfig::default(),
            train: TrainConfig::default(),
            attack: AttackConfig::default(),
            preprocess: PreprocessConfig::default(),
            report: ReportConfig::default(),
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl RunConfig {
    /// Parses TOML text. Relative paths stay relative; see [`RunConfig::resolve_paths`].
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    /// Reads, resolves relative paths against the file's directory, and validates.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err(e.to_string()))
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [
            &mut self.paths.corpus,
            &mut self.paths.inputs,
            &mut self.paths.models,
            &mut self.paths.output,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn detector(&self, name: &str) -> Option<&DetectorSpec> {
        self.detectors.iter().find(|d| d.name == name)
    }

    /// Structural checks that need no filesystem access.
    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(config_err("workers must be at least 1"));
        }
        let mut names = BTreeSet::new();
        for d in &self.detectors {
            if d.name.is_empty() || !d.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(config_err(format!(
                    "detector name {:?} must be non-empty and use only [A-Za-z0-9_-]",
                    d.name
                )));
            }
            if !names.insert(d.name.as_str()) {
                return Err(config_err(format!("detector {:?} is defined twice", d.name)));
            }
            d.architecture()
                .validate()
                .map_err(|e| config_err(format!("detector {:?}: {e}", d.name)))?;
        }
        if self.surrogates.is_empty() {
            return Err(config_err("at least one surrogate is required"));
        }
        if self.targets.is_empty() {
            return Err(config_err("at least one target is required"));
        }
        for (role, list) in [("surrogate", &self.surrogates), ("target", &self.targets)] {
            let mut seen = BTreeSet::new();
            for n in list.iter() {
                if !names.contains(n.as_str()) {
                    return Err(config_err(format!("{role} {n:?} is not a configured detector")));
                }
                if !seen.insert(n) {
                    return Err(config_err(format!("{role} {n:?} is listed twice")));
                }
            }
        }
        if let Some(both) = self.surrogates.iter().find(|s| self.targets.contains(s)) {
            return Err(config_err(format!(
                "{both:?} is both a surrogate and a target; the sets must be disjoint"
            )));
        }
        if self.train.seed != 0 || self.attack.seed != 0 {
            return Err(config_err(
                "train.seed and attack.seed are derived from the top-level seed; set `seed` instead",
            ));
        }
        if self.synth.size < 16 {
            return Err(config_err("synth.size must be at least 16"));
        }
        self.attack.validate().map_err(|e| config_err(format!("attack: {e}")))?;
        self.preprocess
            .validate()
            .map_err(|e| config_err(format!("preprocess: {e}")))?;
        Ok(())
    }

    /// Settings that affect results, without paths or worker count.
    pub fn echo(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("paths");
            obj.remove("workers");
        }
        v
    }
}

/// splitmix64 finalizer over `a` and `b`.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(0x632b_e59b_d9b4_e019);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn empty_file_means_defaults() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("sed = 3").is_err());
        assert!(RunConfig::from_toml("[attack]\nalfa = 0.1").is_err());
        assert!(RunConfig::from_toml("[paths]\nmodel = \"m\"").is_err());
    }

    #[test]
    fn overlapping_roles_rejected() {
        let cfg = RunConfig {
            targets: vec!["t1".into(), "s2".into()],
            ..RunConfig::default()
        };
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("disjoint"), "{err}");
    }

    #[test]
    fn unknown_and_duplicate_names_rejected() {
        let mut cfg = RunConfig {
            surrogates: vec!["nope".into()],
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
        cfg = RunConfig::default();
        cfg.detectors.push(cfg.detectors[0].clone());
        assert!(cfg.validate().is_err());
        cfg = RunConfig::default();
        cfg.detectors[0].name = "../x".into();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn stray_seeds_rejected() {
        let text = "[attack]\nseed = 4\n";
        assert!(RunConfig::from_toml(text).unwrap().validate().is_err());
    }

    #[test]
    fn relative_paths_resolve_against_base() {
        let mut cfg = RunConfig::from_toml("[paths]\noutput = \"/abs/out\"\n").unwrap();
        cfg.resolve_paths(Path::new("/runs/a"));
        assert_eq!(cfg.paths.corpus, PathBuf::from("/runs/a/corpus"));
        assert_eq!(cfg.paths.output, PathBuf::from("/abs/out"));
    }

    #[test]
    fn echo_drops_paths_and_workers() {
        let v = RunConfig::default().echo();
        assert!(v.get("paths").is_none() && v.get("workers").is_none());
        assert_eq!(v["seed"], 0);
    }

    #[test]
    fn seed_mixing_separates_streams() {
        assert_ne!(mix_seed(1, 0), mix_seed(1, 1));
        assert_ne!(mix_seed(0, 1), mix_seed(1, 0));
        assert_eq!(mix_seed(5, 9), mix_seed(5, 9));
    }
}
