//! Wire messages. Each request and each response is one JSON object on one
//! line (TCP) or in one text frame (websocket).

use serde::{Deserialize, Serialize};
use serde_json::Value;
use streetsim::city::CityMap;
use streetsim::env::{EnvError, Observation, RobotAction};
use streetsim::geometry::Pose;
use streetsim::episode::{EpisodeError, EpisodeStatus, LogRecord};
use streetsim::mrs::LandmarkMemory;
use streetsim::traffic::{TrafficLight, TrajectoryRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    Reset,
    Observe,
    Step,
    SendMessage,
    Evaluate,
    CheckTaskComplete,
    Info,
    /// Static map geometry, for viewers.
    Map,
    /// Read-only world state: robots, traffic agents and signals.
    Snapshot,
}

impl Op {
    pub fn parse(s: &str) -> Option<Op> {
        serde_json::from_value(Value::String(s.to_string())).ok()
    }
}

/// An action given either by bare name or as a full tagged object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ActionSpec {
    Name(String),
    Full(RobotAction),
}

impl ActionSpec {
    pub fn resolve(&self) -> Option<RobotAction> {
        match self {
            ActionSpec::Name(n) => RobotAction::from_name(n),
            ActionSpec::Full(a) => Some(a.clone()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Request {
    /// Echoed back verbatim.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<Value>,
    pub op: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<ActionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl Request {
    pub fn new(op: &str) -> Self {
        Self { op: op.to_string(), ..Default::default() }
    }

    pub fn agent(mut self, agent: u32) -> Self {
        self.agent = Some(agent);
        self
    }

    pub fn action(mut self, action: RobotAction) -> Self {
        self.action = Some(ActionSpec::Full(action));
        self
    }

    pub fn text(mut self, text: &str) -> Self {
        self.text = Some(text.to_string());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Error,
    EpisodeSucceeded,
    EpisodeFailed,
    BudgetExhausted,
}

impl From<EpisodeStatus> for Status {
    fn from(s: EpisodeStatus) -> Self {
        match s {
            EpisodeStatus::Running => Status::Ok,
            EpisodeStatus::Succeeded => Status::EpisodeSucceeded,
            EpisodeStatus::Failed => Status::EpisodeFailed,
            EpisodeStatus::BudgetExhausted => Status::BudgetExhausted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorCode {
    Malformed,
    UnknownOp,
    MissingField,
    InvalidAction,
    UnknownAgent,
    AgentBusy,
    MessageTooLong,
    EpisodeOver,
    EpisodeReset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: ErrorCode,
    pub message: String,
}

impl ErrorBody {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl From<EnvError> for ErrorBody {
    fn from(e: EnvError) -> Self {
        let code = match e {
            EnvError::UnknownAgent(_) => ErrorCode::UnknownAgent,
            EnvError::AgentBusy(_) => ErrorCode::AgentBusy,
            EnvError::MessageTooLong(_) => ErrorCode::MessageTooLong,
        };
        ErrorBody::new(code, e.to_string())
    }
}

impl From<EpisodeError> for ErrorBody {
    fn from(e: EpisodeError) -> Self {
        match e {
            EpisodeError::Env(env) => env.into(),
            EpisodeError::Finished(_) => ErrorBody::new(ErrorCode::EpisodeOver, e.to_string()),
            other => ErrorBody::new(ErrorCode::Malformed, other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeInfo {
    pub index: u32,
    pub status: EpisodeStatus,
    pub subtask: usize,
    pub steps: u32,
    pub budget: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub id: u32,
    pub pose: Pose,
    /// Executing or queued an action.
    pub busy: bool,
    pub action: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSnapshot {
    pub tick: u64,
    pub polls: u64,
    pub time: f64,
    pub robots: Vec<RobotState>,
    /// Vehicles then pedestrians, each by ascending id.
    pub traffic: Vec<TrajectoryRecord>,
    /// Indexed by signal id.
    pub lights: Vec<TrafficLight>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<Value>,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<Observation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<LogRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory: Option<LandmarkMemory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episode: Option<EpisodeInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub info: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<Box<CityMap>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<WorldSnapshot>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

impl Response {
    pub fn status(status: Status) -> Self {
        Self {
            id: None,
            status,
            observation: None,
            outcome: None,
            memory: None,
            episode: None,
            info: None,
            map: None,
            snapshot: None,
            error: None,
        }
    }

    pub fn error(err: ErrorBody) -> Self {
        Self { error: Some(err), ..Self::status(Status::Error) }
    }

    pub fn is_error(&self) -> bool {
        self.status == Status::Error
    }

    pub fn code(&self) -> Option<ErrorCode> {
        self.error.as_ref().map(|e| e.code)
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("response serializes")
    }
}
