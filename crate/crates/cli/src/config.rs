//! Run configuration: built-in defaults for (seed, profile), a TOML file
//! deep-merged over them, then command-line flags.

use std::path::Path;

use aogplan::action_planner::CurriculumSchedule;
use aogplan::evalbench::{ExperimentConfig, Profile};
use serde_json::Value;

use crate::error::CliError;

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub profile: Option<Profile>,
    pub tau_init: Option<f64>,
    pub tau_step: Option<f64>,
    pub no_curriculum: bool,
    pub no_augment: bool,
    pub noise_ratios: Vec<f64>,
}

/// Recursively overlays `patch` on `base`. Keys absent from `base` are
/// rejected unless the base value is null (an unset optional section).
fn merge(base: &mut Value, patch: Value, path: &str) -> Result<(), CliError> {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                let here = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v, &here)?,
                    None => return Err(CliError::config(format!("unknown config key `{here}`"))),
                }
            }
            Ok(())
        }
        (slot, p) => {
            *slot = p;
            Ok(())
        }
    }
}

fn parse_profile(v: &Value) -> Result<Profile, CliError> {
    serde_json::from_value(v.clone()).map_err(|e| CliError::config(format!("profile: {e}")))
}

pub fn load(file: Option<&Path>, flags: &Overrides) -> Result<ExperimentConfig, CliError> {
    let patch = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let t: toml::Value = toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            serde_json::to_value(t).map_err(|e| CliError::config(e.to_string()))?
        }
        None => Value::Object(Default::default()),
    };
    let seed = match flags.seed {
        Some(s) => s,
        None => match patch.get("seed") {
            Some(v) => v.as_u64().ok_or_else(|| CliError::config("seed must be a non-negative integer"))?,
            None => 0,
        },
    };
    let profile = match flags.profile {
        Some(p) => p,
        None => patch.get("profile").map(parse_profile).transpose()?.unwrap_or_default(),
    };
    let mut value = serde_json::to_value(ExperimentConfig::new(seed, profile)).expect("config serializes");
    merge(&mut value, patch, "")?;
    let mut cfg: ExperimentConfig = serde_json::from_value(value).map_err(|e| CliError::config(e.to_string()))?;

    if let Some(s) = flags.seed {
        cfg.seed = s;
        cfg.dataset.seed = s;
    }
    if let Some(p) = flags.profile {
        cfg.profile = p;
    }
    if flags.tau_init.is_some() || flags.tau_step.is_some() {
        let c = cfg.curriculum.get_or_insert_with(CurriculumSchedule::default);
        if let Some(v) = flags.tau_init {
            c.tau_init = v;
        }
        if let Some(v) = flags.tau_step {
            c.tau_step = v;
        }
    }
    if flags.no_curriculum {
        cfg.curriculum = None;
    }
    if flags.no_augment {
        cfg.augment = false;
    }
    if !flags.noise_ratios.is_empty() {
        cfg.noise_ratios = flags.noise_ratios.clone();
    }
    cfg.validate().map_err(|e| CliError::config(e.to_string()))?;
    Ok(cfg)
}
