//! Run settings: plaintext key=value files plus command-line overrides.
//! Every run echoes its resolved settings next to its outputs, and the
//! echoed file reloads to the identical configuration.

use crate::error::HgnError;
use crate::model::{Pooling, Variant};
use crate::train::TrainConfig;
use std::path::Path;

#[derive(Clone, Debug, PartialEq)]
pub struct RunSettings {
    pub train: TrainConfig,
    pub workers: usize,
    pub ks: Vec<usize>,
    /// Save a checkpoint every n epochs; 0 disables periodic saves.
    pub checkpoint_every: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            train: TrainConfig::default(),
            workers: 1,
            ks: vec![5, 10, 15, 20],
            checkpoint_every: 0,
        }
    }
}

impl RunSettings {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, HgnError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HgnError::io(path, e))?;
        let mut settings = RunSettings::default();
        settings.apply_text(&text)?;
        Ok(settings)
    }

    /// Apply `key=value` lines; `#` starts a comment. Unknown keys are
    /// rejected.
    pub fn apply_text(&mut self, text: &str) -> Result<(), HgnError> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| HgnError::Config(format!(
                "config line {}: expected key=value, got `{line}`",
                idx + 1
            )))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| HgnError::Config(format!("config line {}: {e}", idx + 1)))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HgnError> {
        let bad = |what: &str| HgnError::Config(format!("bad value `{value}` for {what}"));
        match key {
            "d" => self.train.dim = value.parse().map_err(|_| bad("d"))?,
            "L" => self.train.context_len = value.parse().map_err(|_| bad("L"))?,
            "T" => self.train.horizon = value.parse().map_err(|_| bad("T"))?,
            "lr" => self.train.learning_rate = value.parse().map_err(|_| bad("lr"))?,
            "lambda" => self.train.lambda = value.parse().map_err(|_| bad("lambda"))?,
            "batch" => self.train.batch_size = value.parse().map_err(|_| bad("batch"))?,
            "epochs" => self.train.epochs = value.parse().map_err(|_| bad("epochs"))?,
            "pooling" => self.train.pooling = value.parse::<Pooling>()?,
            "variant" => self.train.variant = value.parse::<Variant>()?,
            "seed" => self.train.seed = value.parse().map_err(|_| bad("seed"))?,
            "workers" => self.workers = value.parse().map_err(|_| bad("workers"))?,
            "checkpoint_every" => {
                self.checkpoint_every = value.parse().map_err(|_| bad("checkpoint_every"))?
            }
            "ks" => {
                self.ks = value
                    .split(',')
                    .map(|s| s.trim().parse::<usize>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| bad("ks"))?;
                if self.ks.is_empty() || self.ks.contains(&0) {
                    return Err(bad("ks"));
                }
            }
            other => {
                return Err(HgnError::Config(format!("unknown config key `{other}`")));
            }
        }
        Ok(())
    }

    /// Resolved settings in reloadable form.
    pub fn to_key_values(&self) -> String {
        let ks: Vec<String> = self.ks.iter().map(|k| k.to_string()).collect();
        format!(
            "d={}\nL={}\nT={}\nlr={}\nlambda={}\nbatch={}\nepochs={}\npooling={}\nvariant={}\nseed={}\nworkers={}\nks={}\ncheckpoint_every={}\n",
            self.train.dim,
            self.train.context_len,
            self.train.horizon,
            self.train.learning_rate,
            self.train.lambda,
            self.train.batch_size,
            self.train.epochs,
            self.train.pooling,
            self.train.variant,
            self.train.seed,
            self.workers,
            ks.join(","),
            self.checkpoint_every,
        )
    }

    pub fn validate(&self) -> Result<(), HgnError> {
        self.train.validate()?;
        if self.workers == 0 {
            return Err(HgnError::Config("workers must be at least 1".into()));
        }
        if self.ks.is_empty() {
            return Err(HgnError::Config("ks must not be empty".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_echo_reference_settings() {
        let s = RunSettings::default();
        assert_eq!(s.train.dim, 50);
        assert_eq!(s.train.learning_rate, 0.001);
        assert_eq!(s.train.lambda, 0.001);
        assert_eq!(s.train.batch_size, 4096);
        assert_eq!(s.ks, vec![5, 10, 15, 20]);
    }

    #[test]
    fn key_values_round_trip() {
        let mut s = RunSettings::default();
        s.set("d", "32").unwrap();
        s.set("variant", "BPR+F+I+max").unwrap();
        s.set("ks", "10,20").unwrap();
        s.set("lr", "0.01").unwrap();
        let text = s.to_key_values();
        let mut back = RunSettings::default();
        back.apply_text(&text).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn unknown_keys_are_rejected_with_line() {
        let mut s = RunSettings::default();
        let err = s.apply_text("d=10\nbogus=1\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2") && msg.contains("bogus"), "{msg}");
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let mut s = RunSettings::default();
        s.apply_text("# comment\n\nd=12 # trailing\n").unwrap();
        assert_eq!(s.train.dim, 12);
    }

    #[test]
    fn bad_values_name_the_key() {
        let mut s = RunSettings::default();
        let err = s.set("batch", "many").unwrap_err();
        assert!(err.to_string().contains("batch"));
        assert!(s.set("pooling", "median").is_err());
        assert!(s.set("ks", "5,0").is_err());
    }
}
