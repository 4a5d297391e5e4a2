//! Training config file: strict `key value` lines, any subset of the
//! tunables; unknown keys are an error.

use std::path::Path;

use anyhow::{bail, Context, Result};
use warden_core::learn::{TrainConfig, Variant};

pub fn apply_config_file(path: &Path, config: &mut TrainConfig) -> Result<()> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("read config {}", path.display()))?;
    apply_config_text(&text, config).with_context(|| format!("parse config {}", path.display()))
}

pub fn apply_config_text(text: &str, config: &mut TrainConfig) -> Result<()> {
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| anyhow::anyhow!("line {line_no}: expected 'key value'"))?;
        let value = value.trim();
        let bad = || anyhow::anyhow!("line {line_no}: bad value '{value}' for '{key}'");
        match key {
            "variant" => {
                config.variant =
                    Variant::parse(value).ok_or_else(|| anyhow::anyhow!("line {line_no}: unknown variant '{value}'"))?
            }
            "episodes" => config.episodes = value.parse().map_err(|_| bad())?,
            "seed" => config.seed = value.parse().map_err(|_| bad())?,
            "gamma" => config.gamma = value.parse().map_err(|_| bad())?,
            "actor_lr" => config.actor_lr = value.parse().map_err(|_| bad())?,
            "critic_lr" => config.critic_lr = value.parse().map_err(|_| bad())?,
            "batch" => config.batch = value.parse().map_err(|_| bad())?,
            "buffer" => config.buffer = value.parse().map_err(|_| bad())?,
            "tau" => config.tau = value.parse().map_err(|_| bad())?,
            "context" => config.context = value.parse().map_err(|_| bad())?,
            "rnd_dim" => config.rnd_dim = value.parse().map_err(|_| bad())?,
            "eta" => config.eta = value.parse().map_err(|_| bad())?,
            "hidden" => config.hidden = value.parse().map_err(|_| bad())?,
            "noise_sigma" => config.noise_sigma = value.parse().map_err(|_| bad())?,
            "noise_floor" => config.noise_floor = value.parse().map_err(|_| bad())?,
            "noise_anneal" => config.noise_anneal = value.parse().map_err(|_| bad())?,
            "eps_start" => config.eps_start = value.parse().map_err(|_| bad())?,
            "eps_floor" => config.eps_floor = value.parse().map_err(|_| bad())?,
            "update_every" => config.update_every = value.parse().map_err(|_| bad())?,
            "warmup" => config.warmup = value.parse().map_err(|_| bad())?,
            "rtg_target" => config.rtg_target = value.parse().map_err(|_| bad())?,
            "extractor_frames" => config.extractor_frames = value.parse().map_err(|_| bad())?,
            "logit_reg" => config.logit_reg = value.parse().map_err(|_| bad())?,
            "policy_temp" => config.policy_temp = value.parse().map_err(|_| bad())?,
            other => bail!("line {line_no}: unknown config key '{other}'"),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_apply() {
        let mut c = TrainConfig::new(Variant::Base, 10, 1);
        apply_config_text("variant ei\nbatch 16\nnoise_sigma 0.5\n", &mut c).unwrap();
        assert_eq!(c.variant, Variant::Ei);
        assert_eq!(c.batch, 16);
        assert_eq!(c.noise_sigma, 0.5);
        assert_eq!(c.episodes, 10);
    }

    #[test]
    fn unknown_key_rejected() {
        let mut c = TrainConfig::new(Variant::Base, 10, 1);
        let err = apply_config_text("lr 0.5\n", &mut c).unwrap_err().to_string();
        assert!(err.contains("unknown config key 'lr'"), "{err}");
    }
}
