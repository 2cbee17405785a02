//! Scenario configuration: the model description plus batch parameters.
//!
//! Unknown fields are rejected so typos never silently fall back to
//! defaults, and optional fields are omitted on re-serialization so a
//! parse/serialize round trip is the identity on the JSON value.

use serde::{Deserialize, Serialize};

use jumpvol::coeffs::ModelSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_inner: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svg: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Candidate martingale shifts the entropy command compares against the
    /// minimizing one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alternatives: Option<Vec<AlternativeShift>>,
    /// Strategy distortions the hedge command measures against the optimum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbations: Option<Vec<PerturbationConfig>>,
}

/// Constant-component martingale shift: the first component is re-solved
/// from the drift condition, the rest are taken as given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlternativeShift {
    pub beta3: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta4: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    pub scale: f64,
    pub offset: f64,
}
