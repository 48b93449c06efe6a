use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use streetsim::episode::EpisodeConfig;
use streetsim::traffic::TrafficConfig;

pub const DEFAULT_PORT: u16 = 7311;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    /// The buffer polls on a wall-clock timer.
    RealTime,
    /// The buffer polls only when every controlled robot has committed.
    #[default]
    Fast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerConfig {
    pub host: String,
    pub port: u16,
    /// Websocket listener; disabled when absent.
    pub ws_port: Option<u16>,
    pub mode: ClockMode,
    /// Episode logs and transcripts land here when set.
    pub log_dir: Option<PathBuf>,
    /// Goal tolerance overrides applied to loaded navigation tasks.
    pub position_tolerance: Option<f64>,
    pub heading_tolerance: Option<f64>,
    pub episode: EpisodeConfig,
    pub traffic: TrafficConfig,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: DEFAULT_PORT,
            ws_port: None,
            mode: ClockMode::Fast,
            log_dir: None,
            position_tolerance: None,
            heading_tolerance: None,
            episode: EpisodeConfig::default(),
            traffic: TrafficConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl ServerConfig {
    /// Missing keys fall back to defaults.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        serde_json::from_str(&text).map_err(|source| ConfigError::Parse { path: path.into(), source })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let pi = self.episode.env.poll_interval;
        if !(pi > 0.0 && pi.is_finite()) {
            return Err(ConfigError::Invalid("poll_interval must be positive".into()));
        }
        let dt = self.traffic.dt;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(ConfigError::Invalid("traffic dt must be positive".into()));
        }
        for t in [self.position_tolerance, self.heading_tolerance].into_iter().flatten() {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(ConfigError::Invalid("tolerances must be non-negative".into()));
            }
        }
        Ok(())
    }
}
