//! Engine configuration shared by the CLI, the service, and the pipeline.

use serde::{Deserialize, Serialize};

use crate::verify::{TrustConfig, VerifierMode};

/// Retrieval depth defaults: k=100 per index before rerank, then top-3
/// tuples, top-3 text chunks, and top-5 tables survive to verification.
pub const DEFAULT_K: usize = 100;
pub const DEFAULT_K_PRIME_TUPLE: usize = 3;
pub const DEFAULT_K_PRIME_TEXT: usize = 3;
pub const DEFAULT_K_PRIME_TABLE: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalLlmConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_timeout_secs() -> u64 {
    30
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub k: usize,
    pub k_prime_tuple: usize,
    pub k_prime_text: usize,
    pub k_prime_table: usize,
    pub verifier_mode: VerifierMode,
    #[serde(default)]
    pub trust: TrustConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_llm: Option<ExternalLlmConfig>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            k: DEFAULT_K,
            k_prime_tuple: DEFAULT_K_PRIME_TUPLE,
            k_prime_text: DEFAULT_K_PRIME_TEXT,
            k_prime_table: DEFAULT_K_PRIME_TABLE,
            verifier_mode: VerifierMode::Local,
            trust: TrustConfig::default(),
            external_llm: None,
        }
    }
}

impl EngineConfig {
    /// k must dominate every per-modality rerank depth.
    pub fn validate(&self) -> Result<(), String> {
        let max_kp = self
            .k_prime_tuple
            .max(self.k_prime_text)
            .max(self.k_prime_table);
        if self.k < max_kp {
            return Err(format!(
                "k ({}) must be >= every k_prime (max {})",
                self.k, max_kp
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_mirror_retrieval_setting() {
        let c = EngineConfig::default();
        assert_eq!(c.k, 100);
        assert_eq!(c.k_prime_tuple, 3);
        assert_eq!(c.k_prime_text, 3);
        assert_eq!(c.k_prime_table, 5);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn k_smaller_than_k_prime_rejected() {
        let c = EngineConfig {
            k: 2,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
