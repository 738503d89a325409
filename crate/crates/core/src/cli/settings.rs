//! Resolution of a config file plus `--set` overrides into typed settings.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::config::{self, Entry};
use crate::error::{GcaError, Result};
use crate::model::{matched_baseline, InteractionMode, ModelSpec, TrainConfig};

/// Everything a subcommand can be configured with. Every key has a default;
/// unknown keys are errors.
#[derive(Clone, Debug, PartialEq)]
#[derive(Default)]
pub struct Settings {
    pub spec: ModelSpec,
    pub train: TrainConfig,
    /// For `interaction=none`: widen the head so the interaction-scope
    /// parameter count matches the GCA model with the same encoder.
    pub match_params: bool,
    /// Head whose rank shifts `mutate` summarizes.
    pub rank_head: usize,
    /// Architecture entries given explicitly, kept for checkpoint
    /// consistency checks.
    spec_entries: Vec<Entry>,
}


impl Settings {
    pub fn from_entries(entries: &[Entry]) -> Result<Self> {
        let mut s = Settings::default();
        for e in entries {
            s.apply(e)?;
        }
        s.train.validate()?;
        s.spec.validate()?;
        if s.match_params {
            if s.spec.interaction != InteractionMode::None {
                return Err(GcaError::Config(
                    "match_params=true only applies to interaction=none".into(),
                ));
            }
            let gca = ModelSpec {
                interaction: InteractionMode::Gca,
                ..s.spec.clone()
            };
            gca.validate()?;
            s.spec = matched_baseline(&gca);
        }
        Ok(s)
    }

    /// Reads `config` (if any), then applies `overrides` in order.
    pub fn resolve(config: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut entries = match config {
            Some(p) => config::read_pairs(p)?,
            None => Vec::new(),
        };
        for o in overrides {
            entries.push(config::parse_override(o)?);
        }
        Settings::from_entries(&entries)
    }

    fn apply(&mut self, e: &Entry) -> Result<()> {
        match e.key.as_str() {
            "match_params" => self.match_params = config::bool_value(e)?,
            "rank_head" => self.rank_head = config::usize_value(e)?,
            _ if self.train.apply(e)? => {}
            _ if self.spec.apply(e)? => self.spec_entries.push(e.clone()),
            _ => return Err(config::unknown_key(e)),
        }
        Ok(())
    }

    /// Adopts the architecture stored in a checkpoint. Architecture keys set
    /// explicitly must agree with it.
    pub fn adopt_checkpoint_spec(&mut self, stored: &ModelSpec) -> Result<()> {
        let mut merged = stored.clone();
        for e in &self.spec_entries {
            merged.apply(e)?;
        }
        if &merged != stored {
            let ours = merged.to_pairs();
            let diffs: Vec<String> = stored
                .to_pairs()
                .into_iter()
                .zip(ours)
                .filter(|(a, b)| a.1 != b.1)
                .map(|((k, theirs), (_, ours))| format!("{k}: config {ours}, checkpoint {theirs}"))
                .collect();
            return Err(GcaError::Config(format!(
                "config disagrees with the checkpoint architecture ({})",
                diffs.join("; ")
            )));
        }
        self.spec = stored.clone();
        Ok(())
    }

    /// Canonical text of the resolved settings, one `key=value` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.spec.to_pairs().into_iter().chain(self.train.to_pairs()) {
            out.push_str(&format!("{k}={v}\n"));
        }
        out.push_str(&format!("match_params={}\nrank_head={}\n", self.match_params, self.rank_head));
        out
    }

    /// First 16 hex digits of the SHA-256 of [`Settings::to_text`].
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_text().as_bytes())
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
