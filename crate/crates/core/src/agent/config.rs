use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::UserId;
use crate::sumve::MachinePowerProfile;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad config file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("user_id is required")]
    MissingUserId,
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Settings as read from a file or flags; every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSettings {
    pub user_id: Option<UserId>,
    pub ingestion_url: Option<String>,
    pub sample_interval_s: Option<u32>,
    pub report_interval_s: Option<u32>,
    pub buffer_capacity: Option<usize>,
    pub seed: Option<u64>,
    pub monitor_attached: Option<bool>,
    pub profile: Option<MachinePowerProfile>,
}

impl AgentSettings {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Values set in `self` win over `base`.
    pub fn over(self, base: AgentSettings) -> AgentSettings {
        AgentSettings {
            user_id: self.user_id.or(base.user_id),
            ingestion_url: self.ingestion_url.or(base.ingestion_url),
            sample_interval_s: self.sample_interval_s.or(base.sample_interval_s),
            report_interval_s: self.report_interval_s.or(base.report_interval_s),
            buffer_capacity: self.buffer_capacity.or(base.buffer_capacity),
            seed: self.seed.or(base.seed),
            monitor_attached: self.monitor_attached.or(base.monitor_attached),
            profile: self.profile.or(base.profile),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub user_id: UserId,
    pub ingestion_url: String,
    pub sample_interval_s: u32,
    pub report_interval_s: u32,
    pub buffer_capacity: usize,
    pub seed: u64,
    /// Fetched from the server when absent.
    pub profile: Option<MachinePowerProfile>,
    pub monitor_attached: bool,
}

impl AgentConfig {
    pub const DEFAULT_URL: &'static str = "http://127.0.0.1:8080";

    pub fn new(user_id: UserId) -> Self {
        AgentConfig {
            user_id,
            ingestion_url: Self::DEFAULT_URL.to_string(),
            sample_interval_s: 5,
            report_interval_s: 30,
            buffer_capacity: 1000,
            seed: 0,
            profile: None,
            monitor_attached: false,
        }
    }

    pub fn from_settings(s: AgentSettings) -> Result<Self, ConfigError> {
        let mut c = AgentConfig::new(s.user_id.ok_or(ConfigError::MissingUserId)?);
        if let Some(url) = s.ingestion_url {
            c.ingestion_url = url.trim_end_matches('/').to_string();
        }
        c.sample_interval_s = s.sample_interval_s.unwrap_or(c.sample_interval_s);
        c.report_interval_s = s.report_interval_s.unwrap_or(c.report_interval_s);
        c.buffer_capacity = s.buffer_capacity.unwrap_or(c.buffer_capacity);
        c.seed = s.seed.unwrap_or(c.seed);
        c.monitor_attached = s.monitor_attached.unwrap_or(c.monitor_attached);
        c.profile = s.profile;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.sample_interval_s < 1 || self.report_interval_s < self.sample_interval_s {
            return Err(ConfigError::Invalid("need report_interval_s >= sample_interval_s >= 1".into()));
        }
        if self.buffer_capacity < 1 {
            return Err(ConfigError::Invalid("buffer_capacity must be at least 1".into()));
        }
        if let Some(p) = &self.profile {
            p.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let file = AgentSettings::from_toml(
            r#"
user_id = "u1"
ingestion_url = "http://poem.local:9000/"
report_interval_s = 60

[profile]
pOff = 1.0
pSleep = 2.0
pIdle = 10.0
pSidle = 30.0
"#,
        )
        .unwrap();
        let flags = AgentSettings { report_interval_s: Some(10), ..Default::default() };
        let c = AgentConfig::from_settings(flags.over(file)).unwrap();
        assert_eq!(c.user_id.as_str(), "u1");
        assert_eq!(c.ingestion_url, "http://poem.local:9000");
        assert_eq!(c.report_interval_s, 10);
        assert_eq!(c.sample_interval_s, 5);
        assert_eq!(c.buffer_capacity, 1000);
        assert_eq!(c.profile.unwrap().p_sidle, 30.0);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(matches!(AgentConfig::from_settings(AgentSettings::default()), Err(ConfigError::MissingUserId)));
        let uid = Some(UserId::new("u1").unwrap());
        let s = AgentSettings { user_id: uid.clone(), sample_interval_s: Some(10), report_interval_s: Some(5), ..Default::default() };
        assert!(matches!(AgentConfig::from_settings(s), Err(ConfigError::Invalid(_))));
        let s = AgentSettings { user_id: uid, buffer_capacity: Some(0), ..Default::default() };
        assert!(matches!(AgentConfig::from_settings(s), Err(ConfigError::Invalid(_))));
        assert!(AgentSettings::from_toml("colour = 3").is_err());
    }
}
