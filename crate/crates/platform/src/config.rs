use std::path::Path;

use serde::{Deserialize, Serialize};
use soo_core::aggregator::AggregationPolicy;
use soo_core::participants::{IntroTest, TestQuestion};
use soo_core::stream::StreamConfig;

/// Deployment settings read from a JSON file. Missing sections take their
/// defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct PlatformConfig {
    pub policy: AggregationPolicy,
    pub intro_test: IntroTest,
    pub stream: StreamConfig,
}

impl Default for PlatformConfig {
    fn default() -> Self {
        PlatformConfig {
            policy: AggregationPolicy::default(),
            intro_test: default_intro_test(),
            stream: StreamConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
}

impl PlatformConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let config: PlatformConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.policy
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.intro_test
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.stream.page_default == 0 || self.stream.page_default > self.stream.page_max {
            return Err(ConfigError::Invalid(
                "pageDefault must be between 1 and pageMax".into(),
            ));
        }
        Ok(())
    }
}

fn question(question: &str, options: &[&str], keyed: usize) -> TestQuestion {
    TestQuestion {
        question: question.into(),
        options: options.iter().map(|s| s.to_string()).collect(),
        keyed,
    }
}

/// Generic placeholder; real deployments ship their own domain questions.
pub fn default_intro_test() -> IntroTest {
    IntroTest {
        questions: vec![
            question(
                "What does an indicator measure?",
                &["A criterion", "The goal directly", "A participant"],
                0,
            ),
            question(
                "Weights of sibling criteria add up to",
                &["0", "1", "The number of criteria"],
                1,
            ),
            question(
                "Which is an objective rather than a criterion?",
                &["Cost per year", "Economic efficiency", "Euro"],
                1,
            ),
        ],
    }
}
