//! Flat key-value configuration files.
//!
//! Every key is optional; omitted keys keep the default numerical parameters.
//!
//! ```toml
//! environment = "dense-urban"   # suburban | urban | dense-urban | highrise | custom
//! delta = 0.4
//! theta_up = 14
//! h_bs = 30
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{EnvironmentParams, ModelError, SystemConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

impl From<ModelError> for ConfigError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::InvalidParameter { field, reason } => ConfigError::Invalid {
                field: field.to_string(),
                reason,
            },
            other => ConfigError::Invalid {
                field: "config".into(),
                reason: other.to_string(),
            },
        }
    }
}

/// The four built-in building environments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvironmentPreset {
    Suburban,
    Urban,
    DenseUrban,
    Highrise,
}

impl EnvironmentPreset {
    pub const ALL: [EnvironmentPreset; 4] = [
        EnvironmentPreset::Suburban,
        EnvironmentPreset::Urban,
        EnvironmentPreset::DenseUrban,
        EnvironmentPreset::Highrise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EnvironmentPreset::Suburban => "suburban",
            EnvironmentPreset::Urban => "urban",
            EnvironmentPreset::DenseUrban => "dense-urban",
            EnvironmentPreset::Highrise => "highrise",
        }
    }

    pub fn params(self) -> EnvironmentParams {
        match self {
            EnvironmentPreset::Suburban => EnvironmentParams::SUBURBAN,
            EnvironmentPreset::Urban => EnvironmentParams::URBAN,
            EnvironmentPreset::DenseUrban => EnvironmentParams::DENSE_URBAN,
            EnvironmentPreset::Highrise => EnvironmentParams::HIGHRISE_URBAN,
        }
    }

    pub fn named(self) -> NamedEnvironment {
        NamedEnvironment {
            name: self.name().to_string(),
            params: self.params(),
        }
    }
}

impl fmt::Display for EnvironmentPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvironmentPreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "suburban" => Ok(EnvironmentPreset::Suburban),
            "urban" => Ok(EnvironmentPreset::Urban),
            "dense-urban" | "dense" => Ok(EnvironmentPreset::DenseUrban),
            "highrise" | "highrise-urban" => Ok(EnvironmentPreset::Highrise),
            other => Err(format!(
                "unknown environment `{other}` (expected suburban, urban, dense-urban or highrise)"
            )),
        }
    }
}

/// Environment selection: a preset, or the `env_*` keys of a config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvChoice {
    Preset(EnvironmentPreset),
    Custom,
}

impl FromStr for EnvChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim().eq_ignore_ascii_case("custom") {
            Ok(EnvChoice::Custom)
        } else {
            s.parse().map(EnvChoice::Preset)
        }
    }
}

/// An environment with the name used in output rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedEnvironment {
    pub name: String,
    pub params: EnvironmentParams,
}

/// Raw contents of a config file. Key names follow the model fields.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub environment: Option<String>,
    pub env_alpha: Option<f64>,
    pub env_beta: Option<f64>,
    pub env_gamma: Option<f64>,
    pub lambda_t: Option<f64>,
    pub delta: Option<f64>,
    pub h_bs: Option<f64>,
    pub h_aerial: Option<f64>,
    pub h_ground: Option<f64>,
    pub p_tx_db: Option<f64>,
    pub tau_db: Option<f64>,
    pub theta_up: Option<f64>,
    pub theta_down: Option<f64>,
    pub phi_up: Option<f64>,
    pub phi_down: Option<f64>,
    pub g_main_db: Option<f64>,
    pub g_side_db: Option<f64>,
    pub alpha_los: Option<f64>,
    pub alpha_nlos: Option<f64>,
    pub eta_los_db: Option<f64>,
    pub eta_nlos_db: Option<f64>,
    pub m_los: Option<u32>,
    pub m_nlos: Option<u32>,
}

impl ConfigFile {
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            origin: origin.to_string(),
            message: e.to_string().trim_end().to_string(),
        })
    }

    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Environment named in the file, if any.
    pub fn environment_choice(&self) -> Result<Option<EnvChoice>, ConfigError> {
        self.environment
            .as_deref()
            .map(|s| {
                s.parse().map_err(|reason| ConfigError::Invalid {
                    field: "environment".into(),
                    reason,
                })
            })
            .transpose()
    }

    /// Builds and validates the configuration. `env` overrides the file's
    /// `environment` key; with neither, the urban preset is used. Explicit
    /// `env_*` keys always override the preset values.
    pub fn resolve(&self, env: Option<EnvChoice>) -> Result<ResolvedConfig, ConfigError> {
        let choice = match env {
            Some(c) => c,
            None => self
                .environment_choice()?
                .unwrap_or(EnvChoice::Preset(EnvironmentPreset::Urban)),
        };
        let (name, base_env) = match choice {
            EnvChoice::Preset(p) => (p.name().to_string(), p.params()),
            EnvChoice::Custom => {
                for (field, v) in [
                    ("env_alpha", self.env_alpha),
                    ("env_beta", self.env_beta),
                    ("env_gamma", self.env_gamma),
                ] {
                    if v.is_none() {
                        return Err(ConfigError::Invalid {
                            field: field.into(),
                            reason: "required for a custom environment".into(),
                        });
                    }
                }
                ("custom".to_string(), EnvironmentParams::URBAN)
            }
        };
        let mut cfg = SystemConfig::defaults_in(base_env);
        let e = &mut cfg.environment;
        set(&mut e.alpha, self.env_alpha);
        set(&mut e.beta, self.env_beta);
        set(&mut e.gamma, self.env_gamma);
        let d = &mut cfg.deployment;
        set(&mut d.lambda_total, self.lambda_t);
        set(&mut d.delta, self.delta);
        set(&mut d.h_bs, self.h_bs);
        set(&mut d.h_aerial, self.h_aerial);
        set(&mut d.h_ground, self.h_ground);
        set(&mut d.p_tx_db, self.p_tx_db);
        set(&mut d.tau_db, self.tau_db);
        let a = &mut cfg.antenna;
        set(&mut a.theta_up, self.theta_up);
        set(&mut a.theta_down, self.theta_down);
        set(&mut a.phi_up, self.phi_up);
        set(&mut a.phi_down, self.phi_down);
        set(&mut a.g_main_db, self.g_main_db);
        set(&mut a.g_side_db, self.g_side_db);
        let c = &mut cfg.channel;
        set(&mut c.alpha_los, self.alpha_los);
        set(&mut c.alpha_nlos, self.alpha_nlos);
        set(&mut c.eta_los_db, self.eta_los_db);
        set(&mut c.eta_nlos_db, self.eta_nlos_db);
        set(&mut c.m_los, self.m_los);
        set(&mut c.m_nlos, self.m_nlos);
        cfg.validate()?;
        Ok(ResolvedConfig {
            environment: NamedEnvironment {
                name,
                params: cfg.environment,
            },
            config: cfg,
        })
    }
}

fn set<T: Copy>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// A validated configuration together with the name of its environment.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub config: SystemConfig,
    pub environment: NamedEnvironment,
}

/// Reads, resolves and validates a config file.
pub fn load_config(path: &Path) -> Result<SystemConfig, ConfigError> {
    Ok(ConfigFile::read(path)?.resolve(None)?.config)
}

/// Same as [`load_config`] for in-memory text.
pub fn parse_config(text: &str) -> Result<SystemConfig, ConfigError> {
    Ok(ConfigFile::parse(text, "<config>")?.resolve(None)?.config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(
            parse_config("").unwrap(),
            SystemConfig::defaults_in(EnvironmentParams::URBAN)
        );
    }

    #[test]
    fn preset_names_round_trip() {
        for p in EnvironmentPreset::ALL {
            assert_eq!(p.name().parse::<EnvironmentPreset>().unwrap(), p);
        }
        assert_eq!("custom".parse::<EnvChoice>().unwrap(), EnvChoice::Custom);
    }

    #[test]
    fn unknown_key_is_a_parse_error() {
        let err = parse_config("delta = 0.3\nthetaup = 10\n").unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, ConfigError::Parse { .. }));
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn custom_environment_needs_all_three_keys() {
        let err = parse_config("environment = \"custom\"\nenv_alpha = 0.2\n").unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { ref field, .. } if field == "env_beta"));
        let cfg = parse_config(
            "environment = \"custom\"\nenv_alpha = 0.2\nenv_beta = 400\nenv_gamma = 12\n",
        )
        .unwrap();
        assert_eq!(cfg.environment, EnvironmentParams::new(0.2, 400.0, 12.0));
    }

    #[test]
    fn flag_overrides_file_environment() {
        let file = ConfigFile::parse("environment = \"suburban\"", "t").unwrap();
        let r = file
            .resolve(Some(EnvChoice::Preset(EnvironmentPreset::Highrise)))
            .unwrap();
        assert_eq!(r.environment.name, "highrise");
        assert_eq!(r.config.environment, EnvironmentParams::HIGHRISE_URBAN);
    }
}
