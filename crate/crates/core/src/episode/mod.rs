//! Benchmark episodes: an environment bound to one task, with judging of
//! evaluate and check actions, step budgets, the per-action log and
//! transcript replay.

use crate::city::CityMap;
use crate::env::{
    ActionOutcome, Env, EnvConfig, EnvError, EventCounts, InstructionPayload, Observation, RobotAction, SafetyEvent,
};
use crate::geometry::Pose;
use crate::metrics::{Benchmark, EpisodeResult};
use crate::mmnav::{subtask_satisfied, MMNavTask};
use crate::mrs::{LandmarkMemory, MrsTask};
use crate::traffic::TrafficConfig;
use crate::waypoint::WaypointGraph;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;
use std::sync::Arc;

mod logfile;
pub use logfile::{
    header_for, read_episodes, result_from_log, to_logged, write_episode, EpisodeEnd, EpisodeHeader, LogFileError, LogLine,
    LoggedEpisode,
};

pub const TRANSCRIPT_SCHEMA: &str = "streetsim.transcript";
pub const TRANSCRIPT_SCHEMA_VERSION: u32 = 1;
pub const MRS_INSTRUCTION: &str =
    "Find the other robot. Use check_task_complete once you can see it in your view.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "benchmark", rename_all = "snake_case")]
pub enum TaskSpec {
    /// Robots placed at the given poses with nothing to judge.
    Free { spawns: Vec<Pose> },
    Mmnav(MMNavTask),
    Mrs(MrsTask),
}

impl TaskSpec {
    pub fn map_hash(&self) -> Option<&str> {
        match self {
            TaskSpec::Free { .. } => None,
            TaskSpec::Mmnav(t) => Some(&t.map_hash),
            TaskSpec::Mrs(t) => Some(&t.map_hash),
        }
    }

    pub fn id(&self) -> u32 {
        match self {
            TaskSpec::Free { .. } => 0,
            TaskSpec::Mmnav(t) => t.id,
            TaskSpec::Mrs(t) => t.id,
        }
    }

    pub fn spawns(&self) -> Vec<Pose> {
        match self {
            TaskSpec::Free { spawns } => spawns.clone(),
            TaskSpec::Mmnav(t) => vec![t.start],
            TaskSpec::Mrs(t) => vec![t.spawn_main, t.spawn_follower],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeStatus {
    Running,
    Succeeded,
    Failed,
    BudgetExhausted,
}

impl EpisodeStatus {
    pub fn is_terminal(self) -> bool {
        self != EpisodeStatus::Running
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Judgement {
    SubtaskPassed { index: usize },
    SubtaskFailed { index: usize },
    Met,
    NotMet,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EpisodeError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("episode already ended: {0:?}")]
    Finished(EpisodeStatus),
    #[error("task was generated for map {task}, loaded map is {map}")]
    MapMismatch { task: String, map: String },
    #[error("transcript: {0}")]
    Transcript(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub env: EnvConfig,
    /// Step budget for navigation episodes; search tasks carry their own.
    pub mmnav_budget: u32,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self { env: EnvConfig::default(), mmnav_budget: 500 }
    }
}

/// One executed action as written to the episode log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub tick: u64,
    pub agent: u32,
    pub action: RobotAction,
    pub outcome: LoggedOutcome,
    pub events: Vec<SafetyEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedOutcome {
    pub start: Pose,
    pub pose: Pose,
    pub started_tick: u64,
    pub duration: f64,
    pub blocked: bool,
    pub judgement: Option<Judgement>,
    pub status: EpisodeStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    /// Buffer polls completed when the action was submitted.
    pub poll: u64,
    pub agent: u32,
    pub action: RobotAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub schema: String,
    pub version: u32,
    pub map_hash: String,
    pub task: TaskSpec,
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self, EpisodeError> {
        let text = std::fs::read_to_string(path).map_err(|e| EpisodeError::Transcript(e.to_string()))?;
        let t: Transcript = serde_json::from_str(&text).map_err(|e| EpisodeError::Transcript(e.to_string()))?;
        if t.schema != TRANSCRIPT_SCHEMA || t.version != TRANSCRIPT_SCHEMA_VERSION {
            return Err(EpisodeError::Transcript(format!("unsupported schema {} v{}", t.schema, t.version)));
        }
        Ok(t)
    }
}

/// What a poll produced, from the episode's point of view.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodePoll {
    pub started: Vec<(u32, RobotAction)>,
    pub completed: Vec<LogRecord>,
    pub events: Vec<SafetyEvent>,
}

pub struct Episode {
    pub env: Env,
    pub task: TaskSpec,
    pub status: EpisodeStatus,
    /// Index of the active subtask.
    pub subtask: usize,
    pub completed_subtasks: u32,
    pub steps: u32,
    pub budget: Option<u32>,
    pub log: Vec<LogRecord>,
    pub transcript: Vec<TranscriptEntry>,
    judged: Vec<Option<Judgement>>,
    met: bool,
}

impl Episode {
    pub fn new(
        map: Arc<CityMap>,
        graph: Arc<WaypointGraph>,
        task: TaskSpec,
        config: EpisodeConfig,
        traffic: TrafficConfig,
    ) -> Result<Self, EpisodeError> {
        if let Some(h) = task.map_hash() {
            let actual = map.hash();
            if h != actual {
                return Err(EpisodeError::MapMismatch { task: h.to_string(), map: actual });
            }
        }
        let mut env = Env::new(map, graph, config.env, traffic);
        for pose in task.spawns() {
            env.add_robot(pose);
        }
        let budget = match &task {
            TaskSpec::Free { .. } => None,
            TaskSpec::Mmnav(_) => Some(config.mmnav_budget),
            TaskSpec::Mrs(t) => Some(t.step_budget as u32),
        };
        let n = env.robots.len();
        Ok(Self {
            env,
            task,
            status: EpisodeStatus::Running,
            subtask: 0,
            completed_subtasks: 0,
            steps: 0,
            budget,
            log: Vec::new(),
            transcript: Vec::new(),
            judged: vec![None; n],
            met: false,
        })
    }

    pub fn agents(&self) -> Vec<u32> {
        self.env.robots.iter().map(|r| r.id).collect()
    }

    /// Instruction currently shown to `agent`.
    pub fn instruction(&self, agent: u32) -> Option<InstructionPayload> {
        match &self.task {
            TaskSpec::Free { .. } => None,
            TaskSpec::Mmnav(t) => {
                let i = self.subtask.min(t.subtasks.len() - 1);
                let s = &t.subtasks[i];
                Some(InstructionPayload { index: i, text: s.instruction.clone(), hint: Some(s.hint.clone()) })
            }
            TaskSpec::Mrs(_) => {
                self.env.robot(agent).ok()?;
                Some(InstructionPayload { index: 0, text: MRS_INSTRUCTION.to_string(), hint: None })
            }
        }
    }

    /// Landmark memory, handed to the main search robot only.
    pub fn memory(&self, agent: u32) -> Option<&LandmarkMemory> {
        match &self.task {
            TaskSpec::Mrs(t) if agent == 0 => Some(&t.memory),
            _ => None,
        }
    }

    pub fn observation(&self, agent: u32) -> Result<Observation, EpisodeError> {
        let mut obs = self.env.observe(agent)?;
        obs.instruction = self.instruction(agent);
        Ok(obs)
    }

    /// Observation delivered when the agent's last action finished.
    pub fn latest_observation(&self, agent: u32) -> Result<Option<Observation>, EpisodeError> {
        Ok(self.env.robot(agent)?.latest.clone())
    }

    pub fn submit(&mut self, agent: u32, action: RobotAction) -> Result<(), EpisodeError> {
        if self.status.is_terminal() {
            return Err(EpisodeError::Finished(self.status));
        }
        let poll = self.env.polls();
        self.env.submit(agent, action.clone())?;
        self.transcript.push(TranscriptEntry { poll, agent, action });
        Ok(())
    }

    fn judge(&mut self, agent: u32, action: &RobotAction) -> Option<Judgement> {
        match (&self.task, action) {
            (TaskSpec::Mmnav(t), RobotAction::Evaluate) => {
                let index = self.subtask.min(t.subtasks.len() - 1);
                let sub = &t.subtasks[index];
                let pose = self.env.robot(agent).ok()?.pose;
                let scan = self.env.scan_from(agent, crate::env::View::Level).ok()?;
                if subtask_satisfied(&pose, &scan, sub) {
                    self.completed_subtasks += 1;
                    self.subtask += 1;
                    if self.subtask == t.subtasks.len() {
                        self.status = EpisodeStatus::Succeeded;
                    }
                    Some(Judgement::SubtaskPassed { index })
                } else {
                    self.status = EpisodeStatus::Failed;
                    Some(Judgement::SubtaskFailed { index })
                }
            }
            (TaskSpec::Mrs(_), RobotAction::CheckTaskComplete) => {
                let other = 1 - agent.min(1);
                if self.env.visible(agent, other).unwrap_or(false) {
                    self.met = true;
                    self.status = EpisodeStatus::Succeeded;
                    Some(Judgement::Met)
                } else {
                    Some(Judgement::NotMet)
                }
            }
            _ => None,
        }
    }

    /// One buffer poll. Evaluate and check actions are judged the moment
    /// they start; budgets count started actions.
    pub fn poll(&mut self) -> EpisodePoll {
        let report = self.env.poll();
        for (agent, action) in &report.started {
            if self.status.is_terminal() {
                break;
            }
            self.steps += 1;
            let j = self.judge(*agent, action);
            self.judged[*agent as usize] = j;
            if let Some(b) = self.budget {
                if self.status == EpisodeStatus::Running && self.steps >= b {
                    self.status = EpisodeStatus::BudgetExhausted;
                }
            }
        }
        let mut completed = Vec::with_capacity(report.completed.len());
        for o in report.completed {
            let judgement = self.judged[o.agent as usize].take();
            let record = self.record(o, judgement);
            let instr = self.instruction(record.agent);
            if let Some(obs) = self.env.robots[record.agent as usize].latest.as_mut() {
                obs.instruction = instr;
            }
            self.log.push(record.clone());
            completed.push(record);
        }
        EpisodePoll { started: report.started, completed, events: report.events }
    }

    fn record(&self, o: ActionOutcome, judgement: Option<Judgement>) -> LogRecord {
        LogRecord {
            tick: o.finished_tick,
            agent: o.agent,
            action: o.action,
            outcome: LoggedOutcome {
                start: o.start,
                pose: o.pose,
                started_tick: o.started_tick,
                duration: o.duration,
                blocked: o.blocked,
                judgement,
                status: self.status,
            },
            events: o.events,
        }
    }

    /// Submits and polls until this agent's action completes.
    pub fn step(&mut self, agent: u32, action: RobotAction) -> Result<LogRecord, EpisodeError> {
        self.submit(agent, action)?;
        loop {
            let p = self.poll();
            if let Some(r) = p.completed.into_iter().find(|r| r.agent == agent) {
                return Ok(r);
            }
        }
    }

    /// Polls until no robot is busy or queued.
    pub fn settle(&mut self) {
        while self.env.robots.iter().any(|r| !r.available || r.pending.is_some()) {
            self.poll();
        }
    }

    pub fn log_hash(&self) -> String {
        log_hash(&self.log)
    }

    pub fn transcript(&self) -> Transcript {
        Transcript {
            schema: TRANSCRIPT_SCHEMA.into(),
            version: TRANSCRIPT_SCHEMA_VERSION,
            map_hash: self.env.map().hash(),
            task: self.task.clone(),
            entries: self.transcript.clone(),
        }
    }

    pub fn result(&self) -> Option<EpisodeResult> {
        let events = EventCounts::tally(&self.env.events);
        let pose = |i: usize| self.env.robots[i].pose.position;
        match &self.task {
            TaskSpec::Free { .. } => None,
            TaskSpec::Mmnav(t) => {
                let goal = t.goal().pose.position;
                Some(EpisodeResult {
                    task: t.id,
                    benchmark: Benchmark::Mmnav,
                    success: self.status == EpisodeStatus::Succeeded,
                    subtasks_total: t.subtasks.len() as u32,
                    subtasks_completed: self.completed_subtasks,
                    d0: t.start.position.manhattan(goal),
                    dt: pose(0).manhattan(goal),
                    events,
                    pair_d0: None,
                    pair_dt: None,
                    met: None,
                    steps: self.steps,
                })
            }
            TaskSpec::Mrs(t) => {
                let d0 = t.spawn_main.position.manhattan(t.spawn_follower.position);
                let dt = if self.met { 0.0 } else { pose(0).manhattan(pose(1)) };
                Some(EpisodeResult {
                    task: t.id,
                    benchmark: Benchmark::Mrs,
                    success: self.met,
                    subtasks_total: 0,
                    subtasks_completed: 0,
                    d0,
                    dt,
                    events,
                    pair_d0: Some(d0),
                    pair_dt: Some(dt),
                    met: Some(self.met),
                    steps: self.steps,
                })
            }
        }
    }
}

pub fn log_hash(log: &[LogRecord]) -> String {
    let mut h = Sha256::new();
    for r in log {
        h.update(serde_json::to_vec(r).expect("log record serializes"));
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

/// Re-submits each entry at its recorded poll, then runs to quiescence.
pub fn replay(episode: &mut Episode, entries: &[TranscriptEntry]) -> Result<(), EpisodeError> {
    for e in entries {
        if e.poll < episode.env.polls() {
            return Err(EpisodeError::Transcript(format!("entry at poll {} is out of order", e.poll)));
        }
        while episode.env.polls() < e.poll {
            episode.poll();
        }
        episode.submit(e.agent, e.action.clone())?;
    }
    episode.settle();
    Ok(())
}
