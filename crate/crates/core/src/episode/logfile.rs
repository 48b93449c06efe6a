//! Episode log files: JSON lines, one `episode` header, one `action` line
//! per executed action, one `end` line. Metrics are recomputed from these
//! lines alone.

use super::{Episode, EpisodeStatus, Judgement, LogRecord, TaskSpec};
use crate::env::{EventCounts, SafetyEvent};
use crate::geometry::Pose;
use crate::metrics::{Benchmark, EpisodeResult};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::io::{BufRead, Write};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeHeader {
    pub benchmark: Benchmark,
    pub task: u32,
    pub map_hash: String,
    pub spawns: Vec<Pose>,
    /// Final goal pose of a navigation task.
    pub goal: Option<Pose>,
    pub subtasks_total: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeEnd {
    pub status: EpisodeStatus,
    pub steps: u32,
    /// Events raised while the robot was not executing any action.
    pub idle_events: Vec<SafetyEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogLine {
    Episode(EpisodeHeader),
    Action(LogRecord),
    End(EpisodeEnd),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoggedEpisode {
    pub header: EpisodeHeader,
    pub records: Vec<LogRecord>,
    pub end: EpisodeEnd,
}

#[derive(Debug, thiserror::Error)]
pub enum LogFileError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

/// Free-roaming episodes have nothing to score and yield `None`.
pub fn header_for(ep: &Episode) -> Option<EpisodeHeader> {
    let map_hash = ep.env.map().hash();
    match &ep.task {
        TaskSpec::Free { .. } => None,
        TaskSpec::Mmnav(t) => Some(EpisodeHeader {
            benchmark: Benchmark::Mmnav,
            task: t.id,
            map_hash,
            spawns: vec![t.start],
            goal: Some(t.goal().pose),
            subtasks_total: t.subtasks.len() as u32,
        }),
        TaskSpec::Mrs(t) => Some(EpisodeHeader {
            benchmark: Benchmark::Mrs,
            task: t.id,
            map_hash,
            spawns: vec![t.spawn_main, t.spawn_follower],
            goal: None,
            subtasks_total: 0,
        }),
    }
}

pub fn to_logged(ep: &Episode) -> Option<LoggedEpisode> {
    let header = header_for(ep)?;
    // events of actions still in flight are counted as idle
    let logged: HashSet<&SafetyEvent> = ep.log.iter().flat_map(|r| r.events.iter()).collect();
    let idle_events = ep.env.events.iter().filter(|e| !logged.contains(e)).copied().collect();
    Some(LoggedEpisode {
        header,
        records: ep.log.clone(),
        end: EpisodeEnd { status: ep.status, steps: ep.steps, idle_events },
    })
}

pub fn write_episode<W: Write>(out: &mut W, logged: &LoggedEpisode) -> std::io::Result<()> {
    let mut line = |l: &LogLine| -> std::io::Result<()> {
        serde_json::to_writer(&mut *out, l)?;
        out.write_all(b"\n")
    };
    line(&LogLine::Episode(logged.header.clone()))?;
    for r in &logged.records {
        line(&LogLine::Action(r.clone()))?;
    }
    line(&LogLine::End(logged.end.clone()))
}

/// Reads every episode in a log stream. Blank lines are skipped.
pub fn read_episodes<R: BufRead>(input: R) -> Result<Vec<LoggedEpisode>, LogFileError> {
    let mut out = Vec::new();
    let mut open: Option<(EpisodeHeader, Vec<LogRecord>)> = None;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| LogFileError::Format { line: i + 1, message };
        let parsed: LogLine = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        match parsed {
            LogLine::Episode(h) => {
                if open.is_some() {
                    return Err(err("episode header before the previous episode ended".into()));
                }
                open = Some((h, Vec::new()));
            }
            LogLine::Action(r) => match &mut open {
                Some((_, records)) => records.push(r),
                None => return Err(err("action outside an episode".into())),
            },
            LogLine::End(end) => match open.take() {
                Some((header, records)) => out.push(LoggedEpisode { header, records, end }),
                None => return Err(err("end without an episode header".into())),
            },
        }
    }
    if open.is_some() {
        return Err(LogFileError::Format { line: 0, message: "log ends inside an episode".into() });
    }
    Ok(out)
}

fn final_pose(logged: &LoggedEpisode, agent: u32) -> Pose {
    logged
        .records
        .iter()
        .rev()
        .find(|r| r.agent == agent)
        .map(|r| r.outcome.pose)
        .unwrap_or(logged.header.spawns[agent as usize])
}

/// Rebuilds the per-episode scores from the logged lines.
pub fn result_from_log(logged: &LoggedEpisode) -> Result<EpisodeResult, LogFileError> {
    let h = &logged.header;
    let bad = |m: &str| LogFileError::Format { line: 0, message: format!("task {}: {m}", h.task) };
    let mut events = EventCounts::tally(logged.records.iter().flat_map(|r| r.events.iter()));
    let idle = EventCounts::tally(&logged.end.idle_events);
    events.static_collisions += idle.static_collisions;
    events.dynamic_collisions += idle.dynamic_collisions;
    events.red_light_violations += idle.red_light_violations;
    let judgements = || logged.records.iter().filter_map(|r| r.outcome.judgement);
    match h.benchmark {
        Benchmark::Mmnav => {
            let goal = h.goal.ok_or_else(|| bad("navigation header without a goal"))?.position;
            let start = h.spawns.first().ok_or_else(|| bad("no spawn"))?.position;
            let passed = judgements().filter(|j| matches!(j, Judgement::SubtaskPassed { .. })).count() as u32;
            Ok(EpisodeResult {
                task: h.task,
                benchmark: Benchmark::Mmnav,
                success: logged.end.status == EpisodeStatus::Succeeded,
                subtasks_total: h.subtasks_total,
                subtasks_completed: passed,
                d0: start.manhattan(goal),
                dt: final_pose(logged, 0).position.manhattan(goal),
                events,
                pair_d0: None,
                pair_dt: None,
                met: None,
                steps: logged.end.steps,
            })
        }
        Benchmark::Mrs => {
            if h.spawns.len() != 2 {
                return Err(bad("search header needs two spawns"));
            }
            let met = judgements().any(|j| j == Judgement::Met);
            let d0 = h.spawns[0].position.manhattan(h.spawns[1].position);
            let dt = if met { 0.0 } else { final_pose(logged, 0).position.manhattan(final_pose(logged, 1).position) };
            Ok(EpisodeResult {
                task: h.task,
                benchmark: Benchmark::Mrs,
                success: met,
                subtasks_total: 0,
                subtasks_completed: 0,
                d0,
                dt,
                events,
                pair_d0: Some(d0),
                pair_dt: Some(dt),
                met: Some(met),
                steps: logged.end.steps,
            })
        }
    }
}
