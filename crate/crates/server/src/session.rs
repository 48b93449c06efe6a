//! One loaded map and task shared by every connection. All world mutation
//! happens under the session lock, one buffer poll at a time.

use crate::config::{ClockMode, ServerConfig};
use crate::protocol::{ErrorBody, ErrorCode, EpisodeInfo, Op, Request, Response, RobotState, Status, WorldSnapshot};
use serde_json::json;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};
use streetsim::city::CityMap;
use streetsim::env::{Observation, RobotAction};
use streetsim::episode::{to_logged, write_episode, Episode, EpisodeError, LogRecord, TaskSpec};
use streetsim::waypoint::WaypointGraph;

pub type ConnId = u64;

const RECENT: usize = 16;

struct Completion {
    seq: u64,
    record: LogRecord,
    observation: Observation,
}

struct State {
    episode: Episode,
    index: u32,
    generation: u64,
    claims: BTreeMap<u32, ConnId>,
    blocked: BTreeSet<ConnId>,
    completions: Vec<u64>,
    recent: Vec<VecDeque<Completion>>,
    flushed: bool,
    shutdown: bool,
}

pub struct Session {
    map: Arc<CityMap>,
    graph: Arc<WaypointGraph>,
    map_hash: String,
    task: TaskSpec,
    config: ServerConfig,
    state: Mutex<State>,
    cv: Condvar,
    next_conn: AtomicU64,
}

impl Session {
    pub fn new(map: Arc<CityMap>, task: TaskSpec, config: ServerConfig) -> Result<Arc<Self>, EpisodeError> {
        let graph = Arc::new(WaypointGraph::build(&map));
        let episode = Episode::new(map.clone(), graph.clone(), task.clone(), config.episode, config.traffic.clone())?;
        let n = episode.env.robots.len();
        let state = State {
            episode,
            index: 0,
            generation: 0,
            claims: BTreeMap::new(),
            blocked: BTreeSet::new(),
            completions: vec![0; n],
            recent: (0..n).map(|_| VecDeque::new()).collect(),
            flushed: false,
            shutdown: false,
        };
        Ok(Arc::new(Self {
            map_hash: map.hash(),
            map,
            graph,
            task,
            config,
            state: Mutex::new(state),
            cv: Condvar::new(),
            next_conn: AtomicU64::new(1),
        }))
    }

    pub fn config(&self) -> &ServerConfig {
        &self.config
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn connect(&self) -> ConnId {
        self.next_conn.fetch_add(1, Ordering::Relaxed)
    }

    /// Releases the connection's robots so they no longer hold the world.
    pub fn disconnect(&self, conn: ConnId) {
        let mut st = self.lock();
        st.claims.retain(|_, c| *c != conn);
        st.blocked.remove(&conn);
        self.cv.notify_all();
    }

    /// Starts the wall-clock poller. Only meaningful in real-time mode.
    pub fn start_clock(self: &Arc<Self>) -> Option<JoinHandle<()>> {
        if self.config.mode != ClockMode::RealTime {
            return None;
        }
        let me = self.clone();
        let period = Duration::from_secs_f64(self.config.episode.env.poll_interval);
        Some(std::thread::spawn(move || {
            let mut next = Instant::now() + period;
            loop {
                let now = Instant::now();
                if next > now {
                    std::thread::sleep(next - now);
                }
                next += period;
                let mut st = me.lock();
                if st.shutdown {
                    break;
                }
                me.poll(&mut st);
                me.cv.notify_all();
            }
        }))
    }

    pub fn shutdown(&self) {
        let mut st = self.lock();
        st.shutdown = true;
        if !st.flushed && !st.episode.log.is_empty() {
            let _ = self.flush(&mut st);
        }
        self.cv.notify_all();
    }

    fn poll(&self, st: &mut State) {
        let p = st.episode.poll();
        for record in p.completed {
            let a = record.agent as usize;
            st.completions[a] += 1;
            let observation = st
                .episode
                .latest_observation(record.agent)
                .ok()
                .flatten()
                .expect("completed action leaves an observation");
            let seq = st.completions[a];
            let q = &mut st.recent[a];
            q.push_back(Completion { seq, record, observation });
            if q.len() > RECENT {
                q.pop_front();
            }
        }
        let idle = st.episode.env.robots.iter().all(|r| r.available && r.pending.is_none());
        if st.episode.status.is_terminal() && idle && !st.flushed {
            if let Err(e) = self.flush(st) {
                eprintln!("episode log: {e}");
            }
        }
    }

    fn flush(&self, st: &mut State) -> std::io::Result<()> {
        st.flushed = true;
        let Some(dir) = &self.config.log_dir else { return Ok(()) };
        std::fs::create_dir_all(dir)?;
        let stem = dir.join(format!("episode-{:04}", st.index));
        if let Some(logged) = to_logged(&st.episode) {
            let mut out = BufWriter::new(File::create(stem.with_extension("log.jsonl"))?);
            write_episode(&mut out, &logged)?;
            out.flush()?;
        }
        st.episode.transcript().save(&stem.with_extension("transcript.json"))
    }

    /// Log files written so far, in episode order.
    pub fn log_path(&self, index: u32) -> Option<PathBuf> {
        self.config.log_dir.as_ref().map(|d| d.join(format!("episode-{index:04}.log.jsonl")))
    }

    /// Fast-mode lockstep: every robot is busy, unclaimed, or controlled
    /// by a connection that is itself waiting on a response.
    fn can_advance(st: &State) -> bool {
        let robots = &st.episode.env.robots;
        let busy = |r: &streetsim::env::Robot| !r.available || r.pending.is_some();
        if !robots.iter().any(busy) {
            return false;
        }
        if st.episode.status.is_terminal() {
            return true;
        }
        robots.iter().all(|r| {
            busy(r)
                || match st.claims.get(&r.id) {
                    None => true,
                    Some(c) => st.blocked.contains(c),
                }
        })
    }

    fn info(&self, st: &State) -> EpisodeInfo {
        EpisodeInfo {
            index: st.index,
            status: st.episode.status,
            subtask: st.episode.subtask,
            steps: st.episode.steps,
            budget: st.episode.budget,
        }
    }

    fn check_agent(st: &State, agent: Option<u32>) -> Result<u32, ErrorBody> {
        let a = agent.ok_or_else(|| ErrorBody::new(ErrorCode::MissingField, "request needs an agent"))?;
        st.episode.env.robot(a).map_err(ErrorBody::from)?;
        Ok(a)
    }

    /// Parses one request line and produces exactly one response.
    pub fn handle_line(&self, conn: ConnId, line: &str) -> Response {
        match serde_json::from_str::<Request>(line) {
            Ok(req) => self.handle(conn, &req),
            Err(e) => Response::error(ErrorBody::new(ErrorCode::Malformed, e.to_string())),
        }
    }

    pub fn handle(&self, conn: ConnId, req: &Request) -> Response {
        let mut resp = match Op::parse(&req.op) {
            None => Response::error(ErrorBody::new(ErrorCode::UnknownOp, format!("unknown op {:?}", req.op))),
            Some(op) => self.dispatch(conn, op, req).unwrap_or_else(Response::error),
        };
        resp.id = req.id.clone();
        resp
    }

    fn dispatch(&self, conn: ConnId, op: Op, req: &Request) -> Result<Response, ErrorBody> {
        match op {
            Op::Info => Ok(self.info_response()),
            Op::Map => {
                let mut resp = Response::status(Status::Ok);
                resp.map = Some(Box::new((*self.map).clone()));
                Ok(resp)
            }
            Op::Snapshot => Ok(self.snapshot()),
            Op::Reset => self.reset(conn, req.agent),
            Op::Observe => self.observe(conn, req.agent),
            Op::Step => {
                let spec = req
                    .action
                    .as_ref()
                    .ok_or_else(|| ErrorBody::new(ErrorCode::MissingField, "step needs an action"))?;
                let action = spec
                    .resolve()
                    .ok_or_else(|| ErrorBody::new(ErrorCode::InvalidAction, format!("unknown action {spec:?}")))?;
                self.step(conn, req.agent, action)
            }
            Op::SendMessage => {
                let text = req
                    .text
                    .clone()
                    .ok_or_else(|| ErrorBody::new(ErrorCode::MissingField, "send_message needs text"))?;
                self.step(conn, req.agent, RobotAction::SendMessage { text })
            }
            Op::Evaluate => self.step(conn, req.agent, RobotAction::Evaluate),
            Op::CheckTaskComplete => self.step(conn, req.agent, RobotAction::CheckTaskComplete),
        }
    }

    fn info_response(&self) -> Response {
        let st = self.lock();
        let (benchmark, task) = match &self.task {
            TaskSpec::Free { .. } => ("free", 0),
            TaskSpec::Mmnav(t) => ("mmnav", t.id),
            TaskSpec::Mrs(t) => ("mrs", t.id),
        };
        let mut resp = Response::status(Status::Ok);
        resp.info = Some(json!({
            "map_hash": self.map_hash,
            "map_seed": self.map.spec.seed,
            "waypoints": self.graph.len(),
            "benchmark": benchmark,
            "task": task,
            "agents": st.episode.agents(),
            "polls": st.episode.env.polls(),
            "tick": st.episode.env.tick(),
            "config": self.config,
        }));
        resp.episode = Some(self.info(&st));
        resp
    }

    fn snapshot(&self) -> Response {
        let st = self.lock();
        let env = &st.episode.env;
        let robots = env
            .robots
            .iter()
            .map(|r| RobotState {
                id: r.id,
                pose: r.pose,
                busy: !r.available || r.pending.is_some(),
                action: r.current.as_ref().map(|x| x.action.name().to_string()),
            })
            .collect();
        let mut resp = Response::status(st.episode.status.into());
        resp.snapshot = Some(WorldSnapshot {
            tick: env.tick(),
            polls: env.polls(),
            time: env.time(),
            robots,
            traffic: env.world.trajectory_records(),
            lights: env.world.lights.clone(),
        });
        resp.episode = Some(self.info(&st));
        resp
    }

    /// Returns the first instruction. A fresh episode replaces the current
    /// one unless nothing has been submitted to it yet.
    fn reset(&self, conn: ConnId, agent: Option<u32>) -> Result<Response, ErrorBody> {
        let mut st = self.lock();
        let a = Self::check_agent(&st, agent)?;
        let touched = !st.episode.transcript.is_empty() || st.episode.status.is_terminal();
        if touched {
            if !st.flushed {
                if let Err(e) = self.flush(&mut st) {
                    eprintln!("episode log: {e}");
                }
            }
            let episode = Episode::new(
                self.map.clone(),
                self.graph.clone(),
                self.task.clone(),
                self.config.episode,
                self.config.traffic.clone(),
            )
            .map_err(ErrorBody::from)?;
            let n = episode.env.robots.len();
            st.episode = episode;
            st.index += 1;
            st.generation += 1;
            st.completions = vec![0; n];
            st.recent = (0..n).map(|_| VecDeque::new()).collect();
            st.flushed = false;
            self.cv.notify_all();
        }
        st.claims.insert(a, conn);
        let mut resp = Response::status(Status::Ok);
        resp.observation = Some(st.episode.observation(a).map_err(ErrorBody::from)?);
        resp.memory = st.episode.memory(a).cloned();
        resp.episode = Some(self.info(&st));
        Ok(resp)
    }

    fn observe(&self, conn: ConnId, agent: Option<u32>) -> Result<Response, ErrorBody> {
        let mut st = self.lock();
        let a = Self::check_agent(&st, agent)?;
        st.claims.insert(a, conn);
        let mut resp = Response::status(st.episode.status.into());
        resp.observation = Some(st.episode.observation(a).map_err(ErrorBody::from)?);
        resp.episode = Some(self.info(&st));
        Ok(resp)
    }

    /// Submits and blocks until the action completes.
    fn step(&self, conn: ConnId, agent: Option<u32>, action: RobotAction) -> Result<Response, ErrorBody> {
        let mut st = self.lock();
        let a = Self::check_agent(&st, agent)?;
        st.episode.submit(a, action).map_err(ErrorBody::from)?;
        st.claims.insert(a, conn);
        let generation = st.generation;
        let target = st.completions[a as usize] + 1;
        st.blocked.insert(conn);
        self.cv.notify_all();
        let done = loop {
            if st.generation != generation {
                break None;
            }
            if st.completions[a as usize] >= target {
                break st.recent[a as usize].iter().find(|c| c.seq == target).map(|c| (c.record.clone(), c.observation.clone()));
            }
            if st.shutdown {
                break None;
            }
            if self.config.mode == ClockMode::Fast && Self::can_advance(&st) {
                self.poll(&mut st);
                self.cv.notify_all();
                continue;
            }
            st = self.cv.wait(st).unwrap_or_else(|p| p.into_inner());
        };
        st.blocked.remove(&conn);
        self.cv.notify_all();
        let Some((record, observation)) = done else {
            return Err(ErrorBody::new(ErrorCode::EpisodeReset, "episode was reset before the action completed"));
        };
        let mut resp = Response::status(record.outcome.status.into());
        resp.outcome = Some(record);
        resp.observation = Some(observation);
        resp.episode = Some(self.info(&st));
        Ok(resp)
    }

    /// Runs `f` against the live episode under the session lock.
    pub fn with_episode<T>(&self, f: impl FnOnce(&Episode) -> T) -> T {
        f(&self.lock().episode)
    }
}
