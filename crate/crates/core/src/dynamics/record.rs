use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use super::{RunResult, StageReport};
use crate::lattice::{Configuration, ModelParams};
use crate::{Error, Result, RNG_NAME, VERSION};

/// JSON form of a run: parameters, seed, per-stage reports, termination flag,
/// and optionally the final configuration (one bit per node, alpha = 1,
/// least significant bit first, base64).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub version: String,
    pub rng: String,
    pub params: ModelParams,
    pub seed: u64,
    pub terminated: bool,
    pub stages: u64,
    pub total_flips: u64,
    pub unchanged_fraction: f64,
    pub final_alpha_fraction: f64,
    pub reports: Vec<StageReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_cells: Option<String>,
}

impl RunRecord {
    pub fn from_result(result: &RunResult, embed_final: bool) -> Self {
        RunRecord {
            version: VERSION.to_string(),
            rng: RNG_NAME.to_string(),
            params: result.params,
            seed: result.seed,
            terminated: result.terminated,
            stages: result.stages(),
            total_flips: result.total_flips(),
            unchanged_fraction: result.unchanged_fraction(),
            final_alpha_fraction: result.final_config.alpha_fraction(),
            reports: result.reports.clone(),
            final_cells: embed_final.then(|| STANDARD.encode(result.final_config.to_bits())),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidParams(e.to_string()))
    }

    /// Decodes the embedded final configuration, if present.
    pub fn final_config(&self) -> Result<Option<Configuration>> {
        let Some(encoded) = &self.final_cells else {
            return Ok(None);
        };
        let bits = STANDARD.decode(encoded).map_err(|e| Error::InvalidParams(format!("bad final_cells: {e}")))?;
        let mut cfg = Configuration::from_bits(self.params, &bits)?;
        cfg.stage = self.stages;
        Ok(Some(cfg))
    }
}
