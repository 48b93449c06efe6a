//! Operator command line.

use crate::config::{ClockMode, ServerConfig};
use crate::session::Session;
use crate::tasks::{apply_tolerances, load_task_file, select_task};
use crate::transport::Server;
use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use streetsim::city::{generate_city, CatalogSplit, CityMap, CitySpec, Difficulty};
use streetsim::dataset::{export_dataset, validate_dataset, DatasetConfig};
use streetsim::env::EnvConfig;
use streetsim::episode::{
    read_episodes, replay, result_from_log, to_logged, write_episode, Episode, EpisodeConfig, TaskSpec, Transcript,
};
use streetsim::metrics::aggregate_report;
use streetsim::mmnav::{generate_mmnav_task, MMNavConfig};
use streetsim::mrs::{generate_mrs_task, MrsConfig};
use streetsim::oracle::{run_oracle, OracleConfig};
use streetsim::rng::{indexed_rng, stage};
use streetsim::traffic::{GateVerdict, TrafficConfig, TrafficWorld};
use streetsim::waypoint::WaypointGraph;

#[derive(Debug, Parser)]
#[command(name = "streetsim", version, about = "Headless urban simulation for embodied navigation benchmarks")]
pub struct Cli {
    /// Base seed for every generated artifact.
    #[arg(long, global = true, default_value_t = 0, env = "STREETSIM_SEED")]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a city map.
    Generate(GenerateArgs),
    /// Generate benchmark tasks for a map.
    GenTasks(GenTasksArgs),
    /// Run background traffic without robots.
    Simulate(SimulateArgs),
    /// Host episodes over the wire protocol.
    Serve(ServeArgs),
    /// Run the oracle agent on tasks and write episode logs.
    RolloutOracle(RolloutArgs),
    /// Export the oracle trajectory dataset.
    ExportDataset(ExportArgs),
    /// Aggregate episode logs into a metrics report.
    Eval(EvalArgs),
    /// Check map, task or dataset files.
    Validate(ValidateArgs),
    /// Replay an action transcript in fast mode.
    Replay(ReplayArgs),
    /// Print default configuration.
    Info,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchmarkArg {
    Mmnav,
    Mrs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DifficultyArg {
    Easy,
    Hard,
}

impl From<DifficultyArg> for Difficulty {
    fn from(d: DifficultyArg) -> Self {
        match d {
            DifficultyArg::Easy => Difficulty::Easy,
            DifficultyArg::Hard => Difficulty::Hard,
        }
    }
}

#[derive(Debug, Args)]
pub struct MapSource {
    /// Existing map file; otherwise one is generated from --seed.
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// Target area in km² for generated maps.
    #[arg(long, default_value_t = 2.0)]
    pub area: f64,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 2.0)]
    pub area: f64,
    #[arg(long, value_enum, default_value_t = DifficultyArg::Easy)]
    pub difficulty: DifficultyArg,
    /// Use only the training part of the building catalog.
    #[arg(long)]
    pub train_only: bool,
    /// Full city spec as JSON; overrides --area and --difficulty.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenTasksArgs {
    #[command(flatten)]
    pub source: MapSource,
    #[arg(long, value_enum)]
    pub benchmark: BenchmarkArg,
    #[arg(long, value_enum, default_value_t = DifficultyArg::Easy)]
    pub difficulty: DifficultyArg,
    #[arg(long, default_value_t = 20)]
    pub count: u32,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Where to write a generated map; defaults to map.json next to --out.
    #[arg(long)]
    pub map_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: MapSource,
    #[arg(long, default_value_t = 1000)]
    pub ticks: u64,
    /// Override vehicle count of a generated map.
    #[arg(long)]
    pub vehicles: Option<u32>,
    #[arg(long)]
    pub pedestrians: Option<u32>,
    /// Write agent states as JSON lines.
    #[arg(long)]
    pub dump: Option<PathBuf>,
    #[arg(long, default_value_t = 60)]
    pub dump_every: u64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long)]
    pub tasks: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub task: usize,
    /// JSON server config; flags and environment override it.
    #[arg(long, env = "STREETSIM_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, env = "STREETSIM_HOST")]
    pub host: Option<String>,
    #[arg(long, env = "STREETSIM_PORT")]
    pub port: Option<u16>,
    #[arg(long, env = "STREETSIM_WS_PORT")]
    pub ws_port: Option<u16>,
    #[arg(long, value_enum, env = "STREETSIM_MODE")]
    pub mode: Option<ClockMode>,
    /// Buffer poll interval in seconds.
    #[arg(long, env = "STREETSIM_POLL_INTERVAL")]
    pub poll_interval: Option<f64>,
    #[arg(long, env = "STREETSIM_POSITION_TOLERANCE")]
    pub position_tolerance: Option<f64>,
    #[arg(long, env = "STREETSIM_HEADING_TOLERANCE")]
    pub heading_tolerance: Option<f64>,
    #[arg(long, env = "STREETSIM_LOG_DIR")]
    pub log_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RolloutArgs {
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long)]
    pub tasks: PathBuf,
    /// Single task index; all tasks when absent.
    #[arg(long)]
    pub task: Option<usize>,
    /// Episode log output (JSON lines).
    #[arg(long)]
    pub log: PathBuf,
    /// Directory for per-episode transcripts.
    #[arg(long)]
    pub transcripts: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub maps: usize,
    #[arg(long, default_value_t = 2)]
    pub tasks_per_map: usize,
    #[arg(long, default_value_t = 100)]
    pub min_steps: usize,
    /// Run the validator on the written corpus.
    #[arg(long)]
    pub validate: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(required = true)]
    pub logs: Vec<PathBuf>,
    #[arg(long, default_value = "eval")]
    pub label: String,
    /// Print the report as JSON instead of a table.
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub map: Option<PathBuf>,
    #[arg(long)]
    pub tasks: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long)]
    pub transcript: PathBuf,
    /// Write the replayed episode log here.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Generate(a) => generate(seed, a),
        Command::GenTasks(a) => gen_tasks(seed, a),
        Command::Simulate(a) => simulate(seed, a),
        Command::Serve(a) => serve(a),
        Command::RolloutOracle(a) => rollout(a),
        Command::ExportDataset(a) => export(seed, a),
        Command::Eval(a) => eval(a),
        Command::Validate(a) => validate(a),
        Command::Replay(a) => replay_cmd(a),
        Command::Info => info(),
    }
}

fn make_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
        }
        _ => Ok(()),
    }
}

fn load_map(path: &Path) -> Result<CityMap> {
    CityMap::load(path).with_context(|| format!("loading map {}", path.display()))
}

fn generated_spec(seed: u64, area: f64, difficulty: Difficulty) -> CitySpec {
    let mut spec = CitySpec::preset(seed, difficulty);
    spec.target_area_km2 = area;
    spec
}

fn generate(seed: u64, a: GenerateArgs) -> Result<()> {
    let spec = match &a.spec {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => {
            let mut s = generated_spec(seed, a.area, a.difficulty.into());
            if a.train_only {
                s.catalog = CatalogSplit::TrainOnly;
            }
            s
        }
    };
    let map = generate_city(&spec)?;
    make_parent(&a.out)?;
    map.save(&a.out)?;
    println!(
        "{} seed={} area={:.3}km2 roads={} intersections={} buildings={} elements={} hash={}",
        a.out.display(),
        map.spec.seed,
        map.area_km2(),
        map.roads.len(),
        map.intersections.len(),
        map.buildings.len(),
        map.elements.len(),
        map.hash()
    );
    Ok(())
}

fn gen_tasks(seed: u64, a: GenTasksArgs) -> Result<()> {
    let difficulty: Difficulty = a.difficulty.into();
    let map = match &a.source.map {
        Some(p) => {
            let m = load_map(p)?;
            ensure!(
                m.spec.difficulty() == difficulty,
                "map {} is {:?} but --difficulty asks for {:?}",
                p.display(),
                m.spec.difficulty(),
                difficulty
            );
            m
        }
        None => {
            let m = generate_city(&generated_spec(seed, a.source.area, difficulty))?;
            let out = a.map_out.clone().unwrap_or_else(|| a.out.with_file_name("map.json"));
            make_parent(&out)?;
            m.save(&out)?;
            println!("map {} hash={}", out.display(), m.hash());
            m
        }
    };
    make_parent(&a.out)?;
    let graph = WaypointGraph::build(&map);
    let params = EnvConfig::default().scan;
    match a.benchmark {
        BenchmarkArg::Mmnav => {
            let cfg = MMNavConfig::default();
            let tasks = (0..a.count)
                .map(|i| generate_mmnav_task(&map, &graph, &mut indexed_rng(seed, stage::MMNAV, i as u64), i, &cfg, &params))
                .collect::<Result<Vec<_>, _>>()?;
            streetsim::mmnav::save_tasks(&tasks, &a.out)?;
            let mean = tasks.iter().map(|t| t.path_length).sum::<f64>() / tasks.len().max(1) as f64;
            println!("{} tasks={} mean_path={mean:.1}m", a.out.display(), tasks.len());
        }
        BenchmarkArg::Mrs => {
            let cfg = MrsConfig::default();
            let tasks = (0..a.count)
                .map(|i| generate_mrs_task(&map, &graph, &mut indexed_rng(seed, stage::MRS, i as u64), i, &cfg, &params))
                .collect::<Result<Vec<_>, _>>()?;
            streetsim::mrs::save_tasks(&tasks, &a.out)?;
            let mean = tasks.iter().map(|t| t.initial_distance).sum::<f64>() / tasks.len().max(1) as f64;
            println!("{} tasks={} mean_spawn_distance={mean:.1}m", a.out.display(), tasks.len());
        }
    }
    Ok(())
}

fn simulate(seed: u64, a: SimulateArgs) -> Result<()> {
    let map = match &a.source.map {
        Some(p) => load_map(p)?,
        None => {
            let mut spec = generated_spec(seed, a.source.area, Difficulty::Hard);
            if let Some(v) = a.vehicles {
                spec.traffic.vehicles = v;
            }
            if let Some(p) = a.pedestrians {
                spec.traffic.pedestrians = p;
            }
            generate_city(&spec)?
        }
    };
    ensure!(a.dump_every > 0, "--dump-every must be positive");
    let map = Arc::new(map);
    let graph = Arc::new(WaypointGraph::build(&map));
    let mut world = TrafficWorld::new(map, graph, TrafficConfig::default());
    let mut dump = match &a.dump {
        Some(p) => {
            make_parent(p)?;
            Some(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?))
        }
        None => None,
    };
    let (mut entries, mut unsafe_entries, mut arrivals) = (0usize, 0usize, 0usize);
    let started = std::time::Instant::now();
    for _ in 0..a.ticks {
        let ev = world.tick();
        entries += ev.entries.len();
        unsafe_entries += ev.entries.iter().filter(|e| e.verdict == GateVerdict::Wait).count();
        arrivals += ev.arrivals.len();
        if let Some(out) = dump.as_mut() {
            if world.clock.tick % a.dump_every == 0 {
                world.dump(out)?;
            }
        }
    }
    if let Some(mut out) = dump {
        out.flush()?;
    }
    let secs = started.elapsed().as_secs_f64();
    println!(
        "ticks={} vehicles={} pedestrians={} crosswalk_entries={entries} entries_on_wait={unsafe_entries} arrivals={arrivals} ticks_per_s={:.0} state_hash={}",
        a.ticks,
        world.vehicles.len(),
        world.pedestrians.len(),
        a.ticks as f64 / secs.max(1e-9),
        world.state_hash()
    );
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => ServerConfig::load(p)?,
        None => ServerConfig::default(),
    };
    if let Some(h) = a.host {
        cfg.host = h;
    }
    if let Some(p) = a.port {
        cfg.port = p;
    }
    if a.ws_port.is_some() {
        cfg.ws_port = a.ws_port;
    }
    if let Some(m) = a.mode {
        cfg.mode = m;
    }
    if let Some(pi) = a.poll_interval {
        cfg.episode.env.poll_interval = pi;
    }
    if a.position_tolerance.is_some() {
        cfg.position_tolerance = a.position_tolerance;
    }
    if a.heading_tolerance.is_some() {
        cfg.heading_tolerance = a.heading_tolerance;
    }
    if a.log_dir.is_some() {
        cfg.log_dir = a.log_dir;
    }
    cfg.validate()?;
    let map = Arc::new(load_map(&a.map)?);
    let mut task = select_task(load_task_file(&a.tasks)?, a.task)?;
    apply_tolerances(&mut task, cfg.position_tolerance, cfg.heading_tolerance);
    let session = Session::new(map, task, cfg)?;
    let server = Server::bind(session)?;
    println!("listening tcp={}", server.tcp_addr);
    if let Some(ws) = server.ws_addr {
        println!("listening ws={ws}");
    }
    std::io::stdout().flush()?;
    server.run();
    Ok(())
}

fn rollout(a: RolloutArgs) -> Result<()> {
    let map = Arc::new(load_map(&a.map)?);
    let graph = Arc::new(WaypointGraph::build(&map));
    let tasks = load_task_file(&a.tasks)?;
    let chosen: Vec<TaskSpec> = match a.task {
        Some(i) => vec![select_task(tasks, i)?],
        None => tasks,
    };
    make_parent(&a.log)?;
    let mut out = BufWriter::new(File::create(&a.log).with_context(|| format!("creating {}", a.log.display()))?);
    if let Some(dir) = &a.transcripts {
        std::fs::create_dir_all(dir)?;
    }
    let mut results = Vec::new();
    for task in chosen {
        let id = task.id();
        let mut ep = Episode::new(map.clone(), graph.clone(), task, EpisodeConfig::default(), TrafficConfig::default())?;
        if let Err(e) = run_oracle(&mut ep, &OracleConfig::default()) {
            eprintln!("task {id}: oracle stopped: {e}");
        }
        ep.settle();
        let logged = to_logged(&ep).context("task has nothing to score")?;
        write_episode(&mut out, &logged)?;
        if let Some(dir) = &a.transcripts {
            ep.transcript().save(&dir.join(format!("task-{id:04}.transcript.json")))?;
        }
        println!("task {id}: {:?} steps={}", ep.status, ep.steps);
        results.push(ep.result().expect("scored task"));
    }
    out.flush()?;
    print!("{}", aggregate_report("oracle", &results)?.to_table());
    Ok(())
}

fn export(seed: u64, a: ExportArgs) -> Result<()> {
    let cfg = DatasetConfig { seed, maps: a.maps, tasks_per_map: a.tasks_per_map, min_steps: a.min_steps, ..Default::default() };
    let started = std::time::Instant::now();
    let m = export_dataset(&cfg, &a.out)?;
    println!(
        "{} maps={} trajectories={} steps={} in {:.1}s",
        a.out.display(),
        m.maps,
        m.trajectories,
        m.steps,
        started.elapsed().as_secs_f64()
    );
    if a.validate {
        let report = validate_dataset(&a.out)?;
        for v in report.violations.iter().take(20) {
            eprintln!("violation: {v}");
        }
        ensure!(report.ok(), "{} violations", report.violations.len());
        println!("validated {} records", report.records);
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let mut results = Vec::new();
    for p in &a.logs {
        let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
        for logged in read_episodes(BufReader::new(f)).with_context(|| format!("reading {}", p.display()))? {
            results.push(result_from_log(&logged)?);
        }
    }
    let report = aggregate_report(&a.label, &results)?;
    let text = if a.json { serde_json::to_string_pretty(&report)? + "\n" } else { report.to_table() };
    match &a.out {
        Some(p) => {
            make_parent(p)?;
            std::fs::write(p, &text)?
        }
        None => print!("{text}"),
    }
    Ok(())
}

/// Brute-force soundness checks on a map and its regeneration.
pub fn map_problems(map: &CityMap) -> Result<Vec<String>> {
    let mut problems = Vec::new();
    let regenerated = generate_city(&map.spec)?;
    if regenerated.hash() != map.hash() {
        problems.push("map does not match a regeneration from its spec".to_string());
    }
    let half = map.spec.corridor_half();
    for (i, a) in map.buildings.iter().enumerate() {
        for b in &map.buildings[i + 1..] {
            if a.footprint.overlaps(&b.footprint) {
                problems.push(format!("buildings {} and {} overlap", a.id, b.id));
            }
        }
        for r in &map.roads {
            if a.footprint.overlaps(&r.corridor(half)) {
                problems.push(format!("building {} overlaps road {}", a.id, r.id));
            }
        }
    }
    let graph = WaypointGraph::build(map);
    if graph.component_count() != 1 {
        problems.push(format!("waypoint graph has {} components", graph.component_count()));
    }
    Ok(problems)
}

fn validate(a: ValidateArgs) -> Result<()> {
    if a.map.is_none() && a.tasks.is_none() && a.dataset.is_none() {
        bail!("nothing to validate: pass --map, --tasks or --dataset");
    }
    let map = match &a.map {
        Some(p) => {
            let map = load_map(p)?;
            let problems = map_problems(&map)?;
            for pr in &problems {
                eprintln!("{}: {pr}", p.display());
            }
            ensure!(problems.is_empty(), "{}: {} problems", p.display(), problems.len());
            println!("{}: ok hash={}", p.display(), map.hash());
            Some(map)
        }
        None => None,
    };
    if let Some(p) = &a.tasks {
        let tasks = load_task_file(p)?;
        ensure!(!tasks.is_empty(), "{}: no tasks", p.display());
        let cfg = MMNavConfig::default();
        for t in &tasks {
            if let TaskSpec::Mmnav(m) = t {
                let n = m.subtasks.len();
                ensure!(
                    (cfg.min_instructions..=cfg.max_instructions).contains(&n),
                    "task {}: {n} instructions",
                    m.id
                );
            }
            if let Some(map) = &map {
                let h = map.hash();
                ensure!(t.map_hash() == Some(h.as_str()), "task {} was generated for a different map", t.id());
            }
        }
        println!("{}: ok tasks={}", p.display(), tasks.len());
    }
    if let Some(dir) = &a.dataset {
        let report = validate_dataset(dir)?;
        for v in report.violations.iter().take(20) {
            eprintln!("violation: {v}");
        }
        ensure!(report.ok(), "{}: {} violations", dir.display(), report.violations.len());
        println!(
            "{}: ok maps={} trajectories={} records={}",
            dir.display(),
            report.maps,
            report.trajectories,
            report.records
        );
    }
    Ok(())
}

fn replay_cmd(a: ReplayArgs) -> Result<()> {
    let map = Arc::new(load_map(&a.map)?);
    let transcript = Transcript::load(&a.transcript)?;
    ensure!(transcript.map_hash == map.hash(), "transcript was recorded on a different map");
    let graph = Arc::new(WaypointGraph::build(&map));
    let mut ep = Episode::new(map, graph, transcript.task.clone(), EpisodeConfig::default(), TrafficConfig::default())?;
    replay(&mut ep, &transcript.entries)?;
    if let Some(p) = &a.log {
        make_parent(p)?;
        let mut out = BufWriter::new(File::create(p)?);
        if let Some(logged) = to_logged(&ep) {
            write_episode(&mut out, &logged)?;
        }
        out.flush()?;
    }
    let poses: Vec<_> = ep.env.robots.iter().map(|r| r.pose).collect();
    println!(
        "{}",
        json!({
            "status": ep.status,
            "actions": ep.log.len(),
            "log_hash": ep.log_hash(),
            "state_hash": ep.env.state_hash(),
            "poses": poses,
        })
    );
    Ok(())
}

fn info() -> Result<()> {
    let doc = json!({
        "server": ServerConfig::default(),
        "mmnav": MMNavConfig::default(),
        "mrs": MrsConfig::default(),
        "dataset": DatasetConfig::default(),
        "oracle": OracleConfig::default(),
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(())
}
