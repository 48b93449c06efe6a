//! Oracle trajectory export: per-step records with supervision signals,
//! a manifest, and a validator that replays every record.

use crate::city::{catalog, generate_city, CatalogSplit, CityError, CityMap, CitySpec, Difficulty};
use crate::env::{Env, EnvConfig, Observation, RobotAction, ScanParams, View};
use crate::episode::{Episode, EpisodeConfig, EpisodeStatus, TaskSpec};
use crate::geometry::{Cardinal, Pose};
use crate::mmnav::{generate_mmnav_task, load_tasks, save_tasks, subtask_satisfied, MMNavConfig, MMNavError, MMNavTask};
use crate::oracle::{oracle_plan, run_mmnav_oracle, OracleConfig, OracleError};
use crate::rng::{derive_seed, indexed_rng, stage};
use crate::traffic::TrafficConfig;
use crate::waypoint::WaypointGraph;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

pub const MANIFEST_SCHEMA: &str = "streetsim.dataset";
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const RECORDS_FILE: &str = "records.jsonl";
pub const TASKS_FILE: &str = "tasks.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("dataset io: {0}")]
    Io(#[from] std::io::Error),
    #[error("dataset format: {0}")]
    Format(#[from] serde_json::Error),
    #[error(transparent)]
    City(#[from] CityError),
    #[error(transparent)]
    Task(#[from] MMNavError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("no tasks to export")]
    Empty,
    #[error("map {0}: no task reached the step minimum")]
    NoLongTask(u64),
    #[error("unsupported manifest {0} v{1}")]
    Schema(String, u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Supervision {
    /// Manhattan distance to the hint capture position.
    pub distance_to_hint: f64,
    pub hint_orientation: Cardinal,
    /// Actions that finish the active subtask, ending with its evaluate.
    #[serde(with = "action_seq")]
    pub remaining_actions: Vec<RobotAction>,
    /// Actions that finish the whole task from here.
    #[serde(with = "action_seq")]
    pub task_remaining_actions: Vec<RobotAction>,
}

/// Action lists as run-length text, e.g. `"turn_right move_forward*12 evaluate"`.
pub mod action_seq {
    use crate::env::RobotAction;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn encode(actions: &[RobotAction]) -> String {
        let mut parts: Vec<String> = Vec::new();
        let mut i = 0;
        while i < actions.len() {
            let mut j = i;
            while j < actions.len() && actions[j] == actions[i] {
                j += 1;
            }
            let name = actions[i].name();
            parts.push(if j - i > 1 { format!("{name}*{}", j - i) } else { name.to_string() });
            i = j;
        }
        parts.join(" ")
    }

    pub fn decode(text: &str) -> Result<Vec<RobotAction>, String> {
        let mut out = Vec::new();
        for part in text.split_whitespace() {
            let (name, count) = match part.split_once('*') {
                Some((n, c)) => (n, c.parse::<usize>().map_err(|_| format!("bad count in {part:?}"))?),
                None => (part, 1),
            };
            let a = RobotAction::from_name(name).ok_or_else(|| format!("unknown action {name:?}"))?;
            out.extend(std::iter::repeat(a).take(count));
        }
        Ok(out)
    }

    pub fn serialize<S: Serializer>(actions: &[RobotAction], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&encode(actions))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<RobotAction>, D::Error> {
        decode(&String::deserialize(d)?).map_err(D::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HintRef {
    pub task: u32,
    pub subtask: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub task: u32,
    pub map_seed: u64,
    pub step: u32,
    pub subtask: usize,
    pub instruction: String,
    pub hint: HintRef,
    pub pose: Pose,
    /// Observation before the action; the hint itself lives in the task file.
    pub observation: Observation,
    pub action: RobotAction,
    pub supervision: Supervision,
}

const AT_GOAL_EPS: f64 = 1e-9;

fn simulate(mut pose: Pose, actions: &[RobotAction], step: f64) -> Pose {
    for a in actions {
        pose = crate::env::nominal_pose(pose, a, step);
    }
    pose
}

/// Supervision for an agent at `pose` working on `task.subtasks[subtask]`.
/// At the hint pose itself the remaining sequence is empty.
pub fn annotate_step(map: &CityMap, pose: Pose, task: &MMNavTask, subtask: usize, step: f64) -> Supervision {
    let target = &task.subtasks[subtask];
    let hint_pose = target.hint.pose;
    let distance_to_hint = pose.position.manhattan(hint_pose.position);
    let at_goal = distance_to_hint < AT_GOAL_EPS && crate::geometry::angle_diff(pose.heading, hint_pose.heading).abs() < AT_GOAL_EPS;
    let mut remaining = Vec::new();
    if !at_goal {
        remaining = oracle_plan(map, pose, target.goal.pose, step);
        remaining.push(RobotAction::Evaluate);
    }
    let mut task_remaining = if at_goal { vec![RobotAction::Evaluate] } else { remaining.clone() };
    let mut cursor = simulate(pose, &task_remaining, step);
    for s in &task.subtasks[subtask + 1..] {
        let plan = oracle_plan(map, cursor, s.goal.pose, step);
        cursor = simulate(cursor, &plan, step);
        task_remaining.extend(plan);
        task_remaining.push(RobotAction::Evaluate);
    }
    Supervision {
        distance_to_hint,
        hint_orientation: hint_pose.cardinal(),
        remaining_actions: remaining,
        task_remaining_actions: task_remaining,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub actions: Vec<RobotAction>,
    pub records: Vec<StepRecord>,
    pub status: EpisodeStatus,
}

/// Runs the closed-loop oracle on `task` and records every step.
pub fn rollout_oracle(
    map: Arc<CityMap>,
    graph: Arc<WaypointGraph>,
    task: &MMNavTask,
    config: &OracleConfig,
) -> Result<Rollout, DatasetError> {
    let episode_cfg = EpisodeConfig { mmnav_budget: u32::MAX, ..Default::default() };
    let mut ep = Episode::new(map, graph, TaskSpec::Mmnav(task.clone()), episode_cfg, TrafficConfig::default())
        .map_err(OracleError::from)?;
    let step_len = ep.env.config.step_length;
    let mut records = Vec::new();
    let mut observer = |ep: &Episode, agent: u32, action: &RobotAction, _goal: Pose| {
        let pose = ep.env.robots[agent as usize].pose;
        let mut observation = ep.observation(agent).expect("agent exists");
        if let Some(i) = observation.instruction.as_mut() {
            i.hint = None;
        }
        let subtask = ep.subtask;
        records.push(StepRecord {
            task: task.id,
            map_seed: task.map_seed,
            step: records.len() as u32,
            subtask,
            instruction: task.subtasks[subtask].instruction.clone(),
            hint: HintRef { task: task.id, subtask },
            pose,
            observation,
            action: action.clone(),
            supervision: annotate_step(ep.env.map(), pose, task, subtask, step_len),
        });
    };
    run_mmnav_oracle(&mut ep, config, &mut observer)?;
    let actions = records.iter().map(|r| r.action.clone()).collect();
    Ok(Rollout { actions, records, status: ep.status })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub seed: u64,
    pub maps: usize,
    pub tasks_per_map: usize,
    pub min_steps: usize,
    /// Task draws per map before giving up on the step minimum.
    pub max_draws: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self { seed: 0, maps: 100, tasks_per_map: 2, min_steps: 100, max_draws: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapEntry {
    pub seed: u64,
    pub hash: String,
    pub catalog: CatalogSplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub version: u32,
    pub maps: usize,
    pub trajectories: usize,
    pub steps: usize,
    pub map_list: Vec<MapEntry>,
    pub config: Option<DatasetConfig>,
}

/// Training maps draw only from the training part of the asset catalog.
pub fn training_spec(seed: u64) -> CitySpec {
    CitySpec { catalog: CatalogSplit::TrainOnly, ..CitySpec::preset(seed, Difficulty::Easy) }
}

pub fn map_seed(config: &DatasetConfig, index: usize) -> u64 {
    derive_seed(derive_seed(config.seed, stage::DATASET), index as u64)
}

/// Oracle rollouts for one training map, drawing tasks until enough of
/// them reach the step minimum.
pub fn map_rollouts(config: &DatasetConfig, index: usize) -> Result<(MapEntry, Vec<(MMNavTask, Rollout)>), DatasetError> {
    let seed = map_seed(config, index);
    let map = Arc::new(generate_city(&training_spec(seed))?);
    let graph = Arc::new(WaypointGraph::build(&map));
    let entry = MapEntry { seed, hash: map.hash(), catalog: CatalogSplit::TrainOnly };
    let mut out = Vec::new();
    for draw in 0..config.max_draws {
        if out.len() == config.tasks_per_map {
            break;
        }
        let mut rng = indexed_rng(seed, stage::MMNAV, draw as u64);
        let id = (index * config.tasks_per_map + out.len()) as u32;
        let task = generate_mmnav_task(&map, &graph, &mut rng, id, &MMNavConfig::default(), &ScanParams::default())?;
        let rollout = rollout_oracle(map.clone(), graph.clone(), &task, &OracleConfig::default())?;
        if rollout.status == EpisodeStatus::Succeeded && rollout.records.len() >= config.min_steps {
            out.push((task, rollout));
        }
    }
    if out.len() < config.tasks_per_map {
        return Err(DatasetError::NoLongTask(seed));
    }
    Ok((entry, out))
}

/// Generates the default corpus into `dir`. Maps are rolled out on worker
/// threads; output order is by map index regardless.
pub fn export_dataset(config: &DatasetConfig, dir: &Path) -> Result<Manifest, DatasetError> {
    if config.maps == 0 || config.tasks_per_map == 0 {
        return Err(DatasetError::Empty);
    }
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(config.maps);
    let mut slots: Vec<Option<Result<_, DatasetError>>> = (0..config.maps).map(|_| None).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                s.spawn(move || {
                    (w..config.maps).step_by(workers).map(|i| (i, map_rollouts(config, i))).collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    let mut maps = Vec::new();
    let mut tasks = Vec::new();
    let mut rollouts = Vec::new();
    for slot in slots {
        let (entry, pairs) = slot.expect("every map index assigned")?;
        maps.push(entry);
        for (t, r) in pairs {
            tasks.push(t);
            rollouts.push(r);
        }
    }
    write_dataset(dir, maps, &tasks, &rollouts, Some(*config))
}

pub fn write_dataset(
    dir: &Path,
    maps: Vec<MapEntry>,
    tasks: &[MMNavTask],
    rollouts: &[Rollout],
    config: Option<DatasetConfig>,
) -> Result<Manifest, DatasetError> {
    if tasks.is_empty() {
        return Err(DatasetError::Empty);
    }
    std::fs::create_dir_all(dir)?;
    save_tasks(tasks, &dir.join(TASKS_FILE))?;
    let mut w = BufWriter::new(std::fs::File::create(dir.join(RECORDS_FILE))?);
    let mut steps = 0;
    for r in rollouts {
        for rec in &r.records {
            serde_json::to_writer(&mut w, rec)?;
            w.write_all(b"\n")?;
            steps += 1;
        }
    }
    w.flush()?;
    let manifest = Manifest {
        schema: MANIFEST_SCHEMA.into(),
        version: MANIFEST_SCHEMA_VERSION,
        maps: maps.len(),
        trajectories: rollouts.len(),
        steps,
        map_list: maps,
        config,
    };
    std::fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub records: usize,
    pub trajectories: usize,
    pub maps: usize,
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Executes actions against the static map, judging each evaluate against
/// the subtask in turn. Returns the index of the next unfinished subtask,
/// or None if an evaluate fails.
fn replay_actions(env: &mut Env, task: &MMNavTask, from: usize, actions: &[RobotAction]) -> Option<usize> {
    let mut k = from;
    for a in actions {
        if *a == RobotAction::Evaluate {
            let sub = task.subtasks.get(k)?;
            let scan = env.scan_from(0, View::Level).ok()?;
            if !subtask_satisfied(&env.robots[0].pose, &scan, sub) {
                return None;
            }
            k += 1;
        } else {
            let (end, _) = env.preview(0, a).ok()?;
            env.robots[0].pose = end;
        }
    }
    Some(k)
}

fn check_record(env: &mut Env, task: &MMNavTask, rec: &StepRecord, out: &mut Vec<String>) {
    let at = |what: &str| format!("task {} step {}: {what}", rec.task, rec.step);
    let Some(sub) = task.subtasks.get(rec.subtask) else {
        out.push(at("subtask index out of range"));
        return;
    };
    let hint = sub.hint.pose;
    let sup = &rec.supervision;
    if (rec.pose.position.manhattan(hint.position) - sup.distance_to_hint).abs() > 1e-9 {
        out.push(at("distance to hint does not match the state"));
    }
    if sup.hint_orientation != hint.cardinal() {
        out.push(at("hint orientation does not match"));
    }
    if rec.instruction != sub.instruction || rec.hint != (HintRef { task: task.id, subtask: rec.subtask }) {
        out.push(at("instruction or hint reference mismatch"));
    }
    if rec.observation.scan.pose != rec.pose {
        out.push(at("observation pose differs from the record pose"));
    }
    env.robots[0].pose = rec.pose;
    let done = if sup.remaining_actions.is_empty() {
        let scan = env.scan_from(0, View::Level).expect("robot exists");
        subtask_satisfied(&rec.pose, &scan, sub)
    } else {
        replay_actions(env, task, rec.subtask, &sup.remaining_actions) == Some(rec.subtask + 1)
    };
    if !done {
        out.push(at("remaining actions do not reach the subtask goal"));
    }
    env.robots[0].pose = rec.pose;
    if replay_actions(env, task, rec.subtask, &sup.task_remaining_actions) != Some(task.subtasks.len()) {
        out.push(at("task suffix does not finish the task"));
    }
}

/// Full pass over an exported dataset: counts, replay soundness of every
/// record and catalog split hygiene of every map.
pub fn validate_dataset(dir: &Path) -> Result<ValidationReport, DatasetError> {
    let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
    if manifest.schema != MANIFEST_SCHEMA || manifest.version != MANIFEST_SCHEMA_VERSION {
        return Err(DatasetError::Schema(manifest.schema, manifest.version));
    }
    let tasks = load_tasks(&dir.join(TASKS_FILE))?;
    let mut report = ValidationReport { maps: manifest.map_list.len(), ..Default::default() };
    let mut envs: std::collections::BTreeMap<u64, Env> = std::collections::BTreeMap::new();
    for entry in &manifest.map_list {
        let spec = CitySpec { catalog: entry.catalog, ..CitySpec::preset(entry.seed, Difficulty::Easy) };
        let map = generate_city(&spec)?;
        if map.hash() != entry.hash {
            report.violations.push(format!("map {} does not regenerate to its recorded hash", entry.seed));
        }
        if entry.catalog != CatalogSplit::TrainOnly {
            report.violations.push(format!("map {} is not a training-split map", entry.seed));
        }
        for b in map.buildings.iter().filter(|b| catalog::is_test_only(&b.asset)) {
            report.violations.push(format!("map {} uses held-out asset {} on building {}", entry.seed, b.asset, b.id));
        }
        let graph = Arc::new(WaypointGraph::build(&map));
        let mut env = Env::new(Arc::new(map), graph, EnvConfig::default(), TrafficConfig::default());
        env.add_robot(Pose::default());
        envs.insert(entry.seed, env);
    }
    let by_id: std::collections::BTreeMap<u32, &MMNavTask> = tasks.iter().map(|t| (t.id, t)).collect();
    let mut seen_tasks = std::collections::BTreeSet::new();
    let file = std::io::BufReader::new(std::fs::File::open(dir.join(RECORDS_FILE))?);
    for line in file.lines() {
        let rec: StepRecord = serde_json::from_str(&line?)?;
        report.records += 1;
        seen_tasks.insert(rec.task);
        let Some(task) = by_id.get(&rec.task) else {
            report.violations.push(format!("record for unknown task {}", rec.task));
            continue;
        };
        let Some(env) = envs.get_mut(&task.map_seed) else {
            report.violations.push(format!("task {} refers to a map outside the manifest", task.id));
            continue;
        };
        check_record(env, task, &rec, &mut report.violations);
    }
    report.trajectories = seen_tasks.len();
    if report.records != manifest.steps {
        report.violations.push(format!("manifest lists {} steps, found {}", manifest.steps, report.records));
    }
    if report.trajectories != manifest.trajectories {
        report
            .violations
            .push(format!("manifest lists {} trajectories, found {}", manifest.trajectories, report.trajectories));
    }
    if manifest.maps != manifest.map_list.len() {
        report.violations.push("manifest map count disagrees with its map list".into());
    }
    Ok(report)
}
