//! Engine tunables, loadable from a JSON file. Missing sections take defaults.

use serde::{Deserialize, Serialize};

use crate::inference::{InferenceConfig, IssueConfig};
use crate::preference::AdaptConfig;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub inference: InferenceConfig,
    pub issues: IssueConfig,
    pub adapt: AdaptConfig,
}

impl EngineConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
