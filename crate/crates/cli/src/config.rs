//! Run configuration: one JSON document with a section per stage.

use std::path::Path;

use eatsense::eval::{EvalConfig, FeaturePreset, Protocol};
use eatsense::learn::{ModelKind, ModelParams, SfsConfig};
use eatsense::synth::CohortSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const SEED_ENV: &str = "EATSENSE_SEED";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub synth: CohortSpec,
    pub ingest: IngestSection,
    pub events: EventsSection,
    pub stats: StatsSection,
    pub evaluate: EvaluateSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestSection {
    /// Gaps longer than this are listed in the coverage report.
    pub gap_threshold_min: i64,
}

impl Default for IngestSection {
    fn default() -> Self {
        IngestSection {
            gap_threshold_min: 30,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EventsSection {
    pub x_half: u32,
}

impl Default for EventsSection {
    fn default() -> Self {
        EventsSection { x_half: 30 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StatsSection {
    pub top_k: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluateSection {
    pub protocols: Vec<Protocol>,
    pub models: Vec<ModelKind>,
    pub features: Vec<FeaturePreset>,
    pub split_ratio: f64,
    pub params: ModelParams,
    pub inner_params: Option<ModelParams>,
    pub smote_k: usize,
    pub sfs: SfsConfig,
    pub pca_components: Vec<usize>,
    pub pca_folds: usize,
    pub pers1_reuse_base_selection: bool,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        let e = EvalConfig::default();
        EvaluateSection {
            protocols: Protocol::ALL.to_vec(),
            models: vec![ModelKind::RandomForest],
            features: vec![e.features],
            split_ratio: e.split_ratio,
            params: e.params,
            inner_params: e.inner_params,
            smote_k: e.smote_k,
            sfs: e.sfs,
            pca_components: e.pca_components,
            pca_folds: e.pca_folds,
            pers1_reuse_base_selection: e.pers1_reuse_base_selection,
        }
    }
}

impl EvaluateSection {
    pub fn eval_config(&self, seed: u64) -> EvalConfig {
        EvalConfig {
            model: self
                .models
                .first()
                .copied()
                .unwrap_or(ModelKind::RandomForest),
            features: self
                .features
                .first()
                .copied()
                .unwrap_or(FeaturePreset::AllFs),
            split_ratio: self.split_ratio,
            seed,
            params: self.params,
            inner_params: self.inner_params,
            smote_k: self.smote_k,
            sfs: self.sfs,
            pca_components: self.pca_components.clone(),
            pca_folds: self.pca_folds,
            pers1_reuse_base_selection: self.pers1_reuse_base_selection,
        }
    }
}

/// Parse a config document, rejecting unknown keys (all of them are listed).
pub fn parse(text: &str) -> Result<Config, CliError> {
    let mut unknown = Vec::new();
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: Config = serde_ignored::deserialize(de, |path| unknown.push(path.to_string()))
        .map_err(|e| CliError::Validation(format!("invalid config: {e}")))?;
    if !unknown.is_empty() {
        return Err(CliError::Validation(format!(
            "unknown config keys: {}",
            unknown.join(", ")
        )));
    }
    Ok(cfg)
}

pub fn load(path: Option<&Path>) -> Result<Config, CliError> {
    match path {
        None => Ok(Config::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| {
                CliError::Validation(format!("cannot read config {}: {e}", p.display()))
            })?;
            parse(&text)
        }
    }
}

impl Config {
    /// Seed from the config, else from `EATSENSE_SEED`, else 0.
    pub fn resolve_seed(&mut self) -> Result<u64, CliError> {
        if let Some(s) = self.seed {
            return Ok(s);
        }
        let seed = match std::env::var(SEED_ENV) {
            Ok(v) => v.trim().parse().map_err(|_| {
                CliError::Validation(format!("{SEED_ENV}={v:?} is not an unsigned integer"))
            })?,
            Err(_) => 0,
        };
        self.seed = Some(seed);
        Ok(seed)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let v = |m: String| Err(CliError::Validation(m));
        if self.workers == Some(0) {
            return v("workers must be at least 1".into());
        }
        if self.events.x_half == 0 || self.events.x_half > 240 {
            return v(format!(
                "events.x_half must be in 1..=240 minutes, got {}",
                self.events.x_half
            ));
        }
        let e = &self.evaluate;
        if e.protocols.is_empty() || e.models.is_empty() || e.features.is_empty() {
            return v("evaluate.protocols, models and features must be non-empty".into());
        }
        for f in &e.features {
            let mut c = e.eval_config(0);
            c.features = *f;
            c.validate()
                .map_err(|err| CliError::Validation(err.to_string()))?;
        }
        self.synth
            .validate()
            .map_err(|err| CliError::Validation(err.to_string()))
    }

    /// SHA-256 of the canonical JSON form of the effective config.
    pub fn sha256(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_all_listed() {
        let err = parse(
            r#"{"seed": 1, "bogus": 2, "evaluate": {"modles": ["RF"]}, "synth": {"n_user": 3}}"#,
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("bogus")
                && msg.contains("evaluate.modles")
                && msg.contains("synth.n_user"),
            "{msg}"
        );
    }

    #[test]
    fn defaults_round_trip() {
        let cfg = parse("{}").unwrap();
        assert_eq!(cfg, Config::default());
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(parse(&text).unwrap(), cfg);
        assert_eq!(cfg.sha256().len(), 64);
    }

    #[test]
    fn presets_parse_by_name() {
        let cfg =
            parse(r#"{"evaluate": {"features": ["ALL_PCA", "app", "F7"], "models": ["GB"]}}"#)
                .unwrap();
        assert_eq!(cfg.evaluate.features.len(), 3);
        assert_eq!(cfg.evaluate.models, vec![ModelKind::GradientBoosting]);
        assert!(parse(r#"{"evaluate": {"features": ["NOPE"]}}"#).is_err());
    }
}
