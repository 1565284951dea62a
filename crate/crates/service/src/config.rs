use std::net::SocketAddr;
use std::path::PathBuf;

use bertscore_viz_core::ProviderConfig;

pub const ENV_BIND: &str = "BERTSCORE_BIND";
pub const ENV_PROVIDER: &str = "BERTSCORE_PROVIDER";
pub const ENV_MODEL: &str = "BERTSCORE_MODEL";
pub const ENV_LAYER: &str = "BERTSCORE_LAYER";
pub const ENV_VOCAB: &str = "BERTSCORE_VOCAB";
pub const ENV_CORS_ORIGIN: &str = "BERTSCORE_CORS_ORIGIN";
pub const ENV_SEED: &str = "BERTSCORE_SEED";
pub const ENV_DIM: &str = "BERTSCORE_DIM";
pub const ENV_CONTEXTUAL: &str = "BERTSCORE_CONTEXTUAL";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid value {value:?} for {var}")]
    Invalid { var: &'static str, value: String },
    #[error("{ENV_PROVIDER}=model requires {ENV_MODEL}")]
    MissingModel,
}

/// Process-level service settings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    pub provider: ProviderConfig,
    /// Defaults to the model's companion `vocab.txt`, or the bundled demo
    /// vocabulary for the test provider.
    pub vocab_path: Option<PathBuf>,
    pub cors_origin: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            provider: ProviderConfig::default(),
            vocab_path: None,
            cors_origin: None,
        }
    }
}

impl ServiceConfig {
    /// Reads `BERTSCORE_*` variables from the process environment.
    pub fn from_env() -> Result<Self, ConfigError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        fn parse<T: std::str::FromStr>(
            var: &'static str,
            value: Option<String>,
            default: T,
        ) -> Result<T, ConfigError> {
            match value {
                None => Ok(default),
                Some(v) => v.trim().parse().map_err(|_| ConfigError::Invalid { var, value: v }),
            }
        }

        let defaults = ServiceConfig::default();
        let bind = parse(ENV_BIND, lookup(ENV_BIND), defaults.bind)?;
        let provider = match lookup(ENV_PROVIDER).as_deref().map(str::trim) {
            None | Some("test") => ProviderConfig::DeterministicTest {
                dim: parse(ENV_DIM, lookup(ENV_DIM), 8)?,
                seed: parse(ENV_SEED, lookup(ENV_SEED), 0)?,
                contextual: parse(ENV_CONTEXTUAL, lookup(ENV_CONTEXTUAL), false)?,
            },
            Some("model") => ProviderConfig::ModelFile {
                model_path: lookup(ENV_MODEL).map(PathBuf::from).ok_or(ConfigError::MissingModel)?,
                layer: parse(ENV_LAYER, lookup(ENV_LAYER), -1)?,
            },
            Some(other) => {
                return Err(ConfigError::Invalid {
                    var: ENV_PROVIDER,
                    value: other.to_string(),
                })
            }
        };
        Ok(ServiceConfig {
            bind,
            provider,
            vocab_path: lookup(ENV_VOCAB).map(PathBuf::from),
            cors_origin: lookup(ENV_CORS_ORIGIN),
        })
    }
}
