//! Plain key=value configuration files.
//!
//! One `key = value` (or `key=value`) pair per line, `#` comments, blank
//! lines ignored. Unknown keys are rejected. Command-line flags override
//! file values, which override the built-in defaults.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rege::TrainConfig;

pub const KNOWN_KEYS: [&str; 16] = [
    "epochs_per_view",
    "patience_views",
    "hidden",
    "dropout",
    "lr",
    "weight_decay",
    "alpha",
    "q_min",
    "step",
    "seed",
    "baseline_epochs",
    "nct_stages",
    "teacher_epochs",
    "student_epochs",
    "student_lr",
    "student_hidden",
];

#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut values = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!(
                    "{}:{}: expected key=value, got `{line}`",
                    path.display(),
                    lineno + 1
                );
            };
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                bail!("{}:{}: unknown key `{key}`", path.display(), lineno + 1);
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(FileConfig { values })
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => match raw.parse::<T>() {
                Ok(v) => Ok(Some(v)),
                Err(e) => bail!("config key `{key}`: {e}"),
            },
        }
    }
}

/// Flag values (already parsed by clap) that override the config file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub q_min: Option<usize>,
    pub step: Option<usize>,
    pub alpha: Option<f64>,
    pub epochs_per_view: Option<usize>,
    pub patience_views: Option<usize>,
}

/// defaults < config file < flags.
pub fn resolve(file: &FileConfig, flags: &Overrides) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    if let Some(v) = file.get("epochs_per_view")? {
        cfg.epochs_per_view = v;
    }
    if let Some(v) = file.get("patience_views")? {
        cfg.patience_views = v;
    }
    if let Some(v) = file.get("hidden")? {
        cfg.hidden = v;
    }
    if let Some(v) = file.get("dropout")? {
        cfg.dropout = v;
    }
    if let Some(v) = file.get("lr")? {
        cfg.lr = v;
    }
    if let Some(v) = file.get("weight_decay")? {
        cfg.weight_decay = v;
    }
    if let Some(v) = file.get("alpha")? {
        cfg.alpha = v;
    }
    if let Some(v) = file.get("q_min")? {
        cfg.q_min = v;
    }
    if let Some(v) = file.get("step")? {
        cfg.component_step = v;
    }
    if let Some(v) = file.get("seed")? {
        cfg.seed = v;
    }
    if let Some(v) = file.get("baseline_epochs")? {
        cfg.baseline_epochs = v;
    }
    if let Some(v) = file.get("nct_stages")? {
        cfg.nct_stages = Some(v);
    }
    if let Some(v) = file.get("teacher_epochs")? {
        cfg.teacher_epochs = v;
    }
    if let Some(v) = file.get("student_epochs")? {
        cfg.student_epochs = v;
    }
    if let Some(v) = file.get("student_lr")? {
        cfg.student_lr = v;
    }
    if let Some(v) = file.get("student_hidden")? {
        cfg.student_hidden = v;
    }

    if let Some(v) = flags.seed {
        cfg.seed = v;
    }
    if let Some(v) = flags.q_min {
        cfg.q_min = v;
    }
    if let Some(v) = flags.step {
        cfg.component_step = v;
    }
    if let Some(v) = flags.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = flags.epochs_per_view {
        cfg.epochs_per_view = v;
    }
    if let Some(v) = flags.patience_views {
        cfg.patience_views = v;
    }
    cfg.validate()?;
    Ok(cfg)
}
