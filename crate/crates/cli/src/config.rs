//! Run configuration: defaults, an optional JSON file, `--set` overrides.

use std::path::{Path, PathBuf};

use absa_core::classify::PipelineOptions;
use absa_core::lda::{Granularity, LdaParams};
use absa_core::testkit::TemplateMode;
use absa_core::vectorize::{EmbeddingParams, DEFAULT_MAX_FEATURES};
use absa_core::Aspect;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub ingest: IngestConfig,
    pub textprep: TextprepConfig,
    pub embedding: EmbeddingParams,
    pub tfidf: TfidfConfig,
    pub classifier: PipelineOptions,
    pub lda: LdaConfig,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            ingest: IngestConfig::default(),
            textprep: TextprepConfig::default(),
            embedding: EmbeddingParams::default(),
            tfidf: TfidfConfig::default(),
            classifier: PipelineOptions::default(),
            lda: LdaConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    /// Largest tolerated share of malformed input lines.
    pub tolerance: f64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            tolerance: absa_core::ingest::DEFAULT_MALFORMED_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextprepConfig {
    pub stopwords: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TfidfConfig {
    pub max_features: usize,
}

impl Default for TfidfConfig {
    fn default() -> Self {
        TfidfConfig {
            max_features: DEFAULT_MAX_FEATURES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdaConfig {
    pub topics: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub top_words: usize,
    pub granularity: Granularity,
}

impl Default for LdaConfig {
    fn default() -> Self {
        let p = LdaParams::default();
        LdaConfig {
            topics: p.topics,
            alpha: p.alpha,
            beta: p.beta,
            iterations: p.iterations,
            top_words: 10,
            granularity: Granularity::PerRestaurant,
        }
    }
}

impl LdaConfig {
    pub fn params(&self) -> LdaParams {
        LdaParams {
            topics: self.topics,
            alpha: self.alpha,
            beta: self.beta,
            iterations: self.iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AspectWeights {
    pub service: f64,
    pub food_quality: f64,
    pub ambiance: f64,
    pub wait_time: f64,
    pub price: f64,
    pub menu_variety: f64,
}

impl Default for AspectWeights {
    fn default() -> Self {
        AspectWeights {
            service: 0.7,
            food_quality: 1.5,
            ambiance: 0.0,
            wait_time: 0.0,
            price: 0.0,
            menu_variety: 0.0,
        }
    }
}

impl AspectWeights {
    pub fn to_array(&self) -> [f64; 6] {
        let mut w = [0.0; 6];
        for a in Aspect::ALL {
            w[a.index()] = match a {
                Aspect::Service => self.service,
                Aspect::FoodQuality => self.food_quality,
                Aspect::Ambiance => self.ambiance,
                Aspect::WaitTime => self.wait_time,
                Aspect::Price => self.price,
                Aspect::MenuVariety => self.menu_variety,
            };
        }
        w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub sigma: f64,
    pub relevance: f64,
    pub neutral_share: f64,
    pub weights: AspectWeights,
    pub mode: TemplateMode,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            sigma: 0.1,
            relevance: 0.6,
            neutral_share: 0.15,
            weights: AspectWeights::default(),
            mode: TemplateMode::Disjoint,
        }
    }
}

/// Replaces the value at a dotted path, creating objects along the way.
fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), String> {
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(format!("invalid config key {path:?}"));
    }
    for part in &parts[..parts.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| format!("config key {path:?} descends into a non-object value"))?;
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    node.as_object_mut()
        .ok_or_else(|| format!("config key {path:?} descends into a non-object value"))?
        .insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Recursively overlays `patch` onto `base`.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Builds the effective configuration. Errors are usage errors.
pub fn resolve(file: Option<&Path>, sets: &[String], seed: Option<u64>) -> Result<RunConfig, String> {
    let mut tree = serde_json::to_value(RunConfig::default()).expect("default config serializes");
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let patch: Value = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        if !patch.is_object() {
            return Err(format!("{}: config must be a JSON object", path.display()));
        }
        merge(&mut tree, patch);
    }
    for s in sets {
        let (key, raw) = s
            .split_once('=')
            .ok_or_else(|| format!("--set expects KEY=VALUE, got {s:?}"))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        set_path(&mut tree, key.trim(), value)?;
    }
    if let Some(seed) = seed {
        tree["seed"] = Value::from(seed);
    }
    serde_json::from_value(tree).map_err(|e| format!("invalid configuration: {e}"))
}

/// SHA-256 of the canonical JSON form, hex encoded.
pub fn digest(config: &RunConfig) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        assert_eq!(resolve(None, &[], None).unwrap(), RunConfig::default());
    }

    #[test]
    fn overrides_apply_in_order() {
        let c = resolve(
            None,
            &["embedding.dim=16".into(), "classifier.classifier=mnb".into(), "lda.granularity=pooled".into()],
            Some(9),
        )
        .unwrap();
        assert_eq!(c.embedding.dim, 16);
        assert_eq!(c.classifier.classifier, absa_core::classify::ClassifierKind::Mnb);
        assert_eq!(c.lda.granularity, Granularity::Pooled);
        assert_eq!(c.seed, 9);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = resolve(None, &["embedding.dims=16".into()], None).unwrap_err();
        assert!(err.contains("dims"), "{err}");
        assert!(resolve(None, &["colour=red".into()], None).is_err());
    }

    #[test]
    fn digest_tracks_values() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.seed += 1;
        assert_eq!(digest(&a), digest(&a.clone()));
        assert_ne!(digest(&a), digest(&b));
    }
}
