use crate::oracles::{content_area_km2, corridor, dijkstra, overlap, reachable, wilson_roots, Z_95};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::sync::Arc;
use std::time::Instant;
use streetsim::city::catalog::{assets, CatalogSplit};
use streetsim::city::{generate_city, CityMap, CitySpec, Difficulty, Side, TrafficParams};
use streetsim::dataset::{export_dataset, validate_dataset, DatasetConfig, RECORDS_FILE};
use streetsim::env::{Env, EnvConfig, RobotAction, ScanParams};
use streetsim::episode::{Episode, EpisodeConfig, TaskSpec};
use streetsim::geometry::{Aabb, Axis, Pose, Vec2};
use streetsim::metrics::{
    aggregate_report, distance_progress, subtask_success_rate, task_progress, wilson_interval, Benchmark,
    EpisodeResult,
};
use streetsim::mmnav::{generate_mmnav_task, MMNavConfig, MMNavTask};
use streetsim::mrs::{generate_mrs_task, MrsConfig, MrsTask};
use streetsim::oracle::{run_oracle, run_random_agent};
use streetsim::rng::{indexed_rng, stage};
use streetsim::traffic::{RoutePointKind, TrafficConfig, TrafficWorld};
use streetsim::waypoint::{astar_path, dijkstra_costs, Edge, EdgeKind, PathError, Waypoint, WaypointGraph, WaypointKind};

type Outcome = Result<String, String>;

macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn city(spec: &CitySpec) -> Result<CityMap, String> {
    generate_city(spec).map_err(|e| format!("seed {}: {e}", spec.seed))
}

fn preset(seed: u64, difficulty: Difficulty) -> Result<(Arc<CityMap>, Arc<WaypointGraph>), String> {
    let map = Arc::new(city(&CitySpec::preset(seed, difficulty))?);
    let graph = Arc::new(WaypointGraph::build(&map));
    Ok((map, graph))
}

fn random_spec(rng: &mut ChaCha8Rng) -> CitySpec {
    let difficulty = if rng.gen_bool(0.5) { Difficulty::Hard } else { Difficulty::Easy };
    let mut spec = CitySpec::preset(rng.gen(), difficulty);
    spec.target_area_km2 = rng.gen_range(0.5..2.5);
    spec.roads.branch_probability = rng.gen_range(0.2..0.9);
    if difficulty == Difficulty::Hard {
        spec.traffic = TrafficParams { vehicles: rng.gen_range(10..80), pedestrians: rng.gen_range(10..150) };
    }
    if rng.gen_bool(0.3) {
        spec.catalog = CatalogSplit::TrainOnly;
    }
    spec
}

fn traffic_hashes(map: CityMap, ticks: u64) -> Vec<String> {
    let map = Arc::new(map);
    let graph = Arc::new(WaypointGraph::build(&map));
    let mut world = TrafficWorld::new(map, graph, TrafficConfig::default());
    let mut out = Vec::new();
    for t in 1..=ticks {
        world.tick();
        if t % 250 == 0 {
            out.push(world.state_hash());
        }
    }
    out
}

pub fn determinism() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let mut agents = 0;
    for i in 0..20 {
        let spec = random_spec(&mut rng);
        let a = city(&spec)?;
        let b = city(&spec)?;
        let (ja, jb) = (a.to_json(), b.to_json());
        check!(ja == jb, "spec {i} (seed {}): serializations differ", spec.seed);
        let back = CityMap::from_json(&ja).map_err(|e| e.to_string())?;
        check!(back.to_json() == ja, "spec {i}: serialization does not round-trip");
        agents += a.population.vehicles.len() + a.population.pedestrians.len();
        let first = traffic_hashes(a, 1000);
        let second = traffic_hashes(back, 1000);
        check!(first == second, "spec {i} (seed {}): traffic state hashes diverge", spec.seed);
    }
    let secs = t0.elapsed().as_secs_f64();
    check!(secs < 120.0, "took {secs:.1}s, budget is 120s");
    Ok(format!("20 specs byte-identical, 1000-tick replays identical ({agents} traffic agents)"))
}

pub fn waypoint_geometry() -> Outcome {
    const SPACING: f64 = 17.0;
    let (mut edges, mut chains, mut four_way) = (0, 0, 0);
    for i in 0..20u64 {
        let difficulty = if i % 2 == 0 { Difficulty::Easy } else { Difficulty::Hard };
        let (map, g) = preset(200 + i, difficulty)?;
        let mut short: BTreeMap<(u32, Side), u32> = BTreeMap::new();
        for e in &g.edges {
            let EdgeKind::Chain { road, side } = e.kind else { continue };
            let len = g.nodes[e.a as usize].position.distance(g.nodes[e.b as usize].position);
            check!(len > 0.0 && len <= SPACING + 1e-9, "map {i}: chain edge {}-{} is {len} m", e.a, e.b);
            edges += 1;
            let n = short.entry((road, side)).or_insert(0);
            if len < SPACING - 1e-6 {
                *n += 1;
            }
        }
        check!(short.len() == 2 * map.roads.len(), "map {i}: {} chains for {} roads", short.len(), map.roads.len());
        if let Some(((road, side), n)) = short.iter().find(|(_, &n)| n > 1) {
            return Err(format!("map {i}: road {road} {side:?} has {n} short edges"));
        }
        chains += short.len();
        for inter in map.intersections.iter().filter(|x| x.arms.len() == 4) {
            four_way += 1;
            let corners: Vec<&Waypoint> =
                g.nodes.iter().filter(|n| n.kind == WaypointKind::Intersection && n.parent == inter.id).collect();
            check!(corners.len() == 4, "map {i}: intersection {} has {} corners", inter.id, corners.len());
            let quadrants: BTreeSet<(bool, bool)> = corners
                .iter()
                .map(|c| (c.position.x > inter.center.x, c.position.y > inter.center.y))
                .collect();
            check!(quadrants.len() == 4, "map {i}: intersection {} corners share a quadrant", inter.id);
        }
    }
    check!(four_way > 0, "no 4-way intersections generated");
    Ok(format!("{edges} chain edges on {chains} chains, {four_way} 4-way intersections with 4 corners"))
}

/// Grid-like graph with axis-aligned edges, integer coordinates and
/// integer lengths no shorter than the straight-line distance.
fn random_graph(rng: &mut ChaCha8Rng) -> WaypointGraph {
    let w = rng.gen_range(2..=14usize);
    let h = rng.gen_range(2..=(200 / w).min(14));
    let mut coords = |k: usize| {
        let mut v = vec![0i64];
        for _ in 1..k {
            let last = *v.last().unwrap();
            v.push(last + rng.gen_range(1..40));
        }
        v
    };
    let xs = coords(w);
    let ys = coords(h);
    let id = |r: usize, c: usize| (r * w + c) as u32;
    let mut nodes = Vec::new();
    for (r, &y) in ys.iter().enumerate() {
        for (c, &x) in xs.iter().enumerate() {
            nodes.push(Waypoint {
                id: id(r, c),
                kind: WaypointKind::Road,
                position: Vec2::new(x as f64, y as f64),
                parent: 0,
                corner: None,
                side: None,
            });
        }
    }
    let mut edges = Vec::new();
    let mut link = |rng: &mut ChaCha8Rng, a: u32, b: u32, straight: i64| {
        let factor = [1, 1, 1, 2, 3][rng.gen_range(0..5)];
        edges.push(Edge { a, b, length: (straight * factor) as f64, kind: EdgeKind::Wrap { intersection: 0 } });
    };
    for r in 0..h {
        for c in 0..w {
            if c + 1 < w && rng.gen_bool(0.75) {
                link(rng, id(r, c), id(r, c + 1), xs[c + 1] - xs[c]);
            }
            if r + 1 < h && rng.gen_bool(0.75) {
                link(rng, id(r, c), id(r + 1, c), ys[r + 1] - ys[r]);
            }
            let k = rng.gen_range(2..5);
            if c + k < w && rng.gen_bool(0.1) {
                link(rng, id(r, c), id(r, c + k), xs[c + k] - xs[c]);
            }
        }
    }
    WaypointGraph::from_parts(nodes, edges)
}

pub fn astar_equivalence() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    let (mut found, mut unreachable, mut largest) = (0, 0, 0);
    for gi in 0..50 {
        let g = random_graph(&mut rng);
        let n = g.nodes.len();
        largest = largest.max(n);
        check!(n <= 200, "graph {gi} has {n} nodes");
        for _ in 0..20 {
            let (s, t) = (rng.gen_range(0..n) as u32, rng.gen_range(0..n) as u32);
            let reference = dijkstra(&g, s)[t as usize];
            let library = dijkstra_costs(&g, s)[t as usize];
            check!(
                library == reference || (library.is_infinite() && reference.is_infinite()),
                "graph {gi} {s}->{t}: dijkstra_costs {library} vs reference {reference}"
            );
            match astar_path(&g, s, t) {
                Ok(p) => {
                    check!(p.cost == reference, "graph {gi} {s}->{t}: astar {} vs dijkstra {reference}", p.cost);
                    check!(p.nodes.first() == Some(&s) && p.nodes.last() == Some(&t), "graph {gi}: path endpoints");
                    let mut sum = 0.0;
                    for w in p.nodes.windows(2) {
                        let e = g.edges.iter().find(|e| (e.a, e.b) == (w[0], w[1]) || (e.b, e.a) == (w[0], w[1]));
                        let Some(e) = e else { return Err(format!("graph {gi}: path uses missing edge {w:?}")) };
                        sum += e.length;
                    }
                    check!(sum == p.cost, "graph {gi}: path sums to {sum}, reported {}", p.cost);
                    found += 1;
                }
                Err(PathError::NoPath(..)) => {
                    check!(reference.is_infinite(), "graph {gi} {s}->{t}: astar found no path, dijkstra {reference}");
                    unreachable += 1;
                }
                Err(e) => return Err(format!("graph {gi}: {e}")),
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    check!(secs < 10.0, "took {secs:.1}s, budget is 10s");
    Ok(format!("1000 queries on 50 graphs (max {largest} nodes): {found} equal costs, {unreachable} agreed unreachable"))
}

pub fn signal_compliance() -> Outcome {
    let (map, g) = preset(404, Difficulty::Hard)?;
    let pop = &map.population;
    check!(pop.vehicles.len() == 50 && pop.pedestrians.len() == 100, "population {} + {}", pop.vehicles.len(), pop.pedestrians.len());
    let mut world = TrafficWorld::new(map.clone(), g.clone(), TrafficConfig::default());
    // green for the crossing axis with more than 15 s left
    let allowed = |w: &TrafficWorld, inter: u32, axis: Axis| {
        let signal = map.intersections[inter as usize].signal.expect("gated crossings are signalized");
        let light = &w.lights[signal as usize];
        light.phase.green_axis() == axis && light.remaining > 15.0
    };
    let (mut reported_veh, mut reported_ped, mut seen_veh, mut seen_ped, mut bad) = (0, 0, 0, 0, 0);
    for _ in 0..10_000 {
        let peds: Vec<(usize, u32, bool)> = world.pedestrians.iter().map(|p| (p.progress, p.routes_issued, p.waiting)).collect();
        let cars: Vec<(usize, u32, Option<(u32, Axis)>)> = world
            .vehicles
            .iter()
            .map(|v| {
                let line = match v.route.get(v.progress).map(|r| r.kind) {
                    Some(RoutePointKind::StopLine { intersection, axis, signal: Some(_) }) => Some((intersection, axis)),
                    _ => None,
                };
                (v.progress, v.routes_issued, line)
            })
            .collect();
        let ev = world.tick();
        for e in &ev.entries {
            match e.kind {
                streetsim::traffic::AgentKind::Vehicle => reported_veh += 1,
                _ => reported_ped += 1,
            }
            if !allowed(&world, e.intersection, e.axis) {
                bad += 1;
            }
        }
        // independent detection: a pedestrian that starts walking a signalized crosswalk edge
        for (p, &(progress, issued, waiting)) in world.pedestrians.iter().zip(&peds) {
            let moved = p.progress != progress || p.routes_issued != issued || waiting;
            if p.waiting || !moved || p.progress == 0 || p.progress >= p.route.len() {
                continue;
            }
            let Some(edge) = g.edge_between(p.route[p.progress - 1], p.route[p.progress]) else { continue };
            if let EdgeKind::Crosswalk { intersection, axis, .. } = edge.kind {
                if map.intersections[intersection as usize].signal.is_some() {
                    seen_ped += 1;
                    if !allowed(&world, intersection, axis) {
                        bad += 1;
                    }
                }
            }
        }
        // and a vehicle that moves past a signalized stop line
        for (v, &(progress, issued, line)) in world.vehicles.iter().zip(&cars) {
            if let Some((inter, axis)) = line {
                if v.progress != progress || v.routes_issued != issued {
                    seen_veh += 1;
                    if !allowed(&world, inter, axis) {
                        bad += 1;
                    }
                }
            }
        }
    }
    check!(bad == 0, "{bad} crosswalk entries while the gate said wait");
    check!(
        seen_veh == reported_veh && seen_ped == reported_ped,
        "detected {seen_veh}/{seen_ped} entries, simulator reported {reported_veh}/{reported_ped}"
    );
    check!(seen_veh > 0 && seen_ped > 0, "no crossings happened");
    Ok(format!("0 violations over 10000 ticks ({seen_veh} vehicle and {seen_ped} pedestrian entries)"))
}

pub fn geometric_soundness() -> Outcome {
    let (mut buildings, mut pairs, mut nodes) = (0usize, 0usize, 0usize);
    for i in 0..100u64 {
        let difficulty = if i % 2 == 0 { Difficulty::Easy } else { Difficulty::Hard };
        let (map, g) = preset(500 + i, difficulty)?;
        let fp: Vec<&Aabb> = map.buildings.iter().map(|b| &b.footprint).collect();
        for a in 0..fp.len() {
            for b in a + 1..fp.len() {
                check!(!overlap(fp[a], fp[b]), "map {i}: buildings {a} and {b} overlap");
            }
        }
        pairs += fp.len() * fp.len().saturating_sub(1) / 2;
        let corridors: Vec<Aabb> = (0..map.roads.len()).map(|r| corridor(&map, r)).collect();
        for (bi, b) in fp.iter().enumerate() {
            for (ri, c) in corridors.iter().enumerate() {
                check!(!overlap(b, c), "map {i}: building {bi} overlaps road {ri}");
            }
        }
        buildings += fp.len();
        let n = g.nodes.len();
        let reached = reachable(n, g.edges.iter().map(|e| (e.a as usize, e.b as usize)));
        check!(reached == n, "map {i}: waypoint graph reaches {reached} of {n} nodes");
        let k = map.intersections.len();
        let reached = reachable(k, map.roads.iter().map(|r| (r.endpoints[0] as usize, r.endpoints[1] as usize)));
        check!(reached == k, "map {i}: road network reaches {reached} of {k} intersections");
        nodes += n;
    }
    Ok(format!("100 maps: {buildings} buildings, {pairs} pairs, 0 overlaps, {nodes} waypoints all connected"))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

pub fn metric_formulas() -> Outcome {
    let ssr = |c, t| subtask_success_rate(c, t).ok();
    check!(ssr(2, 3).is_some_and(|v| close(v, 2.0 / 3.0)), "ssr 2/3");
    check!(ssr(0, 4) == Some(0.0) && ssr(4, 4) == Some(1.0), "ssr bounds");
    check!(ssr(5, 4).is_none() && ssr(0, 0).is_none(), "ssr accepts invalid counts");
    for f in [distance_progress, task_progress] {
        check!(f(100.0, 25.0).is_ok_and(|v| close(v, 0.75)), "progress 100 -> 25");
        check!(f(100.0, 0.0) == Ok(1.0), "progress to zero");
        check!(f(100.0, 150.0) == Ok(0.0), "moving away is not clamped to zero");
        check!(f(100.0, 100.0) == Ok(0.0), "no progress");
        check!(f(0.0, 10.0).is_err() && f(10.0, -1.0).is_err() && f(f64::NAN, 1.0).is_err(), "progress domain");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0006);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let n = rng.gen_range(1..2000u32);
        let s = match k {
            0 => 0,
            1 => n,
            _ => rng.gen_range(0..=n),
        };
        let (lo, hi) = wilson_interval(s, n, 0.95).map_err(|e| e.to_string())?;
        let (rlo, rhi) = wilson_roots(s, n, Z_95);
        let err = (lo - rlo).abs().max((hi - rhi).abs());
        worst = worst.max(err);
        check!(err <= 1e-9, "wilson({s}, {n}) = [{lo}, {hi}], reference [{rlo}, {rhi}]");
    }
    check!(wilson_interval(3, 0, 0.95).is_err() && wilson_interval(4, 3, 0.95).is_err(), "wilson domain");

    let nav = |success, done, d0, dt| EpisodeResult {
        task: 0,
        benchmark: Benchmark::Mmnav,
        success,
        subtasks_total: 4,
        subtasks_completed: done,
        d0,
        dt,
        events: Default::default(),
        pair_d0: None,
        pair_dt: None,
        met: None,
        steps: 10,
    };
    let report = aggregate_report("t", &[nav(true, 4, 200.0, 0.0), nav(false, 1, 100.0, 300.0)]).map_err(|e| e.to_string())?;
    check!(report.ssr_pct.is_some_and(|v| close(v, 62.5)), "aggregate ssr {:?}", report.ssr_pct);
    check!(report.dp_pct.is_some_and(|v| close(v, 50.0)), "aggregate dp {:?}", report.dp_pct);
    check!(report.sr.is_some_and(|p| p.successes == 1 && p.n == 2), "aggregate sr");
    Ok(format!("ssr/dp/tp cases incl. clamps, 100 wilson pairs within {worst:.1e}"))
}

fn manhattan(a: Vec2, b: Vec2) -> f64 {
    (a.x - b.x).abs() + (a.y - b.y).abs()
}

fn mmnav_tasks(seeds: std::ops::Range<u64>, per_map: u64) -> Result<Vec<(Arc<CityMap>, Arc<WaypointGraph>, MMNavTask)>, String> {
    let mut out = Vec::new();
    for seed in seeds {
        let (map, g) = preset(seed, Difficulty::Easy)?;
        for k in 0..per_map {
            let mut rng = indexed_rng(seed, stage::MMNAV, k);
            let t = generate_mmnav_task(&map, &g, &mut rng, k as u32, &MMNavConfig::default(), &ScanParams::default())
                .map_err(|e| format!("map {seed} task {k}: {e}"))?;
            out.push((map.clone(), g.clone(), t));
        }
    }
    Ok(out)
}

fn mrs_tasks(seeds: std::ops::Range<u64>, per_map: u64) -> Result<Vec<(Arc<CityMap>, Arc<WaypointGraph>, MrsTask)>, String> {
    let mut out = Vec::new();
    for seed in seeds {
        let (map, g) = preset(seed, Difficulty::Easy)?;
        for k in 0..per_map {
            let mut rng = indexed_rng(seed, stage::MRS, k);
            let t = generate_mrs_task(&map, &g, &mut rng, k as u32, &MrsConfig::default(), &ScanParams::default())
                .map_err(|e| format!("map {seed} task {k}: {e}"))?;
            out.push((map.clone(), g.clone(), t));
        }
    }
    Ok(out)
}

fn episode(map: &Arc<CityMap>, g: &Arc<WaypointGraph>, task: TaskSpec) -> Result<Episode, String> {
    Episode::new(map.clone(), g.clone(), task, EpisodeConfig::default(), TrafficConfig::default()).map_err(|e| e.to_string())
}

pub fn closed_loop() -> Outcome {
    let nav = mmnav_tasks(700..704, 5)?;
    let mrs = mrs_tasks(700..704, 5)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0007);
    let (mut sr, mut subtasks, mut random_sr, mut worst_dt) = (0, 0, 0, 0.0f64);
    for (i, (map, g, task)) in nav.iter().enumerate() {
        let mut ep = episode(map, g, TaskSpec::Mmnav(task.clone()))?;
        run_oracle(&mut ep, &Default::default()).map_err(|e| format!("task {i}: {e}"))?;
        let r = ep.result().ok_or("no result")?;
        let goal = task.goal();
        check!(close(r.d0, manhattan(task.start.position, goal.pose.position)), "task {i}: d0 is not the Manhattan distance");
        check!(r.dt <= goal.position_tolerance, "task {i}: final distance {} beyond tolerance", r.dt);
        worst_dt = worst_dt.max(r.dt);
        sr += r.success as u32;
        subtasks += (r.subtasks_completed == r.subtasks_total) as u32;

        let mut ep = episode(map, g, TaskSpec::Mmnav(task.clone()))?;
        let mut agent_rng = indexed_rng(rng.gen(), stage::AGENT, i as u64);
        run_random_agent(&mut ep, &mut agent_rng, 100_000).map_err(|e| e.to_string())?;
        random_sr += ep.result().ok_or("no result")?.success as u32;
    }
    let (mut csr, mut random_csr) = (0, 0);
    for (i, (map, g, task)) in mrs.iter().enumerate() {
        let mut ep = episode(map, g, TaskSpec::Mrs(task.clone()))?;
        run_oracle(&mut ep, &Default::default()).map_err(|e| format!("search task {i}: {e}"))?;
        csr += ep.result().ok_or("no result")?.met.unwrap_or(false) as u32;

        let mut ep = episode(map, g, TaskSpec::Mrs(task.clone()))?;
        let mut agent_rng = indexed_rng(rng.gen(), stage::AGENT, i as u64);
        run_random_agent(&mut ep, &mut agent_rng, 100_000).map_err(|e| e.to_string())?;
        random_csr += ep.result().ok_or("no result")?.met.unwrap_or(false) as u32;
    }
    let summary = format!(
        "oracle SR {sr}/20 SSR {subtasks}/20 max dt {worst_dt:.2} m CSR {csr}/20; random SR {random_sr}/20 CSR {random_csr}/20"
    );
    check!(sr == 20 && subtasks == 20 && csr == 20, "{summary}");
    check!(random_sr == 0 && random_csr <= 1, "{summary}");
    Ok(summary)
}

/// Node whose position is exactly `p`.
fn node_at(g: &WaypointGraph, p: Vec2) -> Option<usize> {
    g.nodes.iter().position(|n| n.position == p)
}

pub fn calibration() -> Outcome {
    let nav = mmnav_tasks(800..810, 10)?;
    let mrs = mrs_tasks(800..810, 10)?;
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    let mut path = 0.0;
    for (_, _, t) in &nav {
        *counts.entry(t.subtasks.len()).or_insert(0) += 1;
        let len: f64 = t.route.windows(2).map(|w| w[0].distance(w[1])).sum();
        check!((len - t.path_length).abs() < 1e-6, "task {}: path length {} vs route {len}", t.id, t.path_length);
        path += len;
    }
    let mean_path = path / nav.len() as f64;
    let mut areas = Vec::new();
    for (map, _, _) in nav.iter().step_by(10) {
        areas.push(content_area_km2(map));
    }
    let (amin, amax) = areas.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
    let (mut graph_d, mut manhattan_d) = (0.0, 0.0);
    let mut cache: BTreeMap<(u64, usize), Vec<f64>> = BTreeMap::new();
    for (map, g, t) in &mrs {
        let a = node_at(g, t.spawn_main.position).ok_or("main spawn is not a waypoint")?;
        let b = node_at(g, t.spawn_follower.position).ok_or("follower spawn is not a waypoint")?;
        let d = cache.entry((map.spec.seed, a)).or_insert_with(|| dijkstra(g, a as u32))[b];
        check!((d - t.initial_distance).abs() < 1e-6, "search task {}: distance {} vs reference {d}", t.id, t.initial_distance);
        graph_d += d;
        manhattan_d += manhattan(t.spawn_main.position, t.spawn_follower.position);
    }
    let mean_spawn = graph_d / mrs.len() as f64;
    let summary = format!(
        "instructions {counts:?}, mean path {mean_path:.0} m, area {amin:.2}-{amax:.2} km², mean spawn distance {mean_spawn:.0} m (Manhattan {:.0} m)",
        manhattan_d / mrs.len() as f64
    );
    check!(counts.keys().all(|k| (2..=4).contains(k)), "{summary}");
    check!((250.0..=750.0).contains(&mean_path), "{summary}");
    check!(amin >= 1.6 && amax <= 2.4, "{summary}");
    check!((300.0..=900.0).contains(&mean_spawn), "{summary}");
    Ok(summary)
}

#[derive(serde::Deserialize)]
struct RecordSeed {
    map_seed: u64,
}

pub fn dataset_scale() -> Outcome {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = export_dataset(&DatasetConfig::default(), dir.path()).map_err(|e| e.to_string())?;
    let seeds: BTreeSet<u64> = manifest.map_list.iter().map(|m| m.seed).collect();
    let file = std::fs::File::open(dir.path().join(RECORDS_FILE)).map_err(|e| e.to_string())?;
    let mut lines = 0;
    for line in std::io::BufReader::new(file).lines() {
        let line = line.map_err(|e| e.to_string())?;
        let r: RecordSeed = serde_json::from_str(&line).map_err(|e| format!("record {lines}: {e}"))?;
        check!(seeds.contains(&r.map_seed), "record {lines} names unlisted map {}", r.map_seed);
        lines += 1;
    }
    check!(lines == manifest.steps, "manifest counts {} steps, file has {lines}", manifest.steps);
    check!(lines >= 20_000, "only {lines} step records");
    let report = validate_dataset(dir.path()).map_err(|e| e.to_string())?;
    check!(report.ok(), "{} violations, first: {}", report.violations.len(), report.violations[0]);
    check!(report.records == lines, "validator saw {} of {lines} records", report.records);

    let train: BTreeSet<String> = assets(CatalogSplit::TrainOnly).into_iter().map(|a| a.tag).collect();
    let held_out: BTreeSet<String> =
        assets(CatalogSplit::Full).into_iter().map(|a| a.tag).filter(|t| !train.contains(t)).collect();
    check!(!held_out.is_empty(), "catalog has no held-out assets");
    let mut buildings = 0;
    for entry in &manifest.map_list {
        let spec = CitySpec { catalog: CatalogSplit::TrainOnly, ..CitySpec::preset(entry.seed, Difficulty::Easy) };
        let map = city(&spec)?;
        check!(map.hash() == entry.hash, "map {} does not regenerate to its listed hash", entry.seed);
        let leaked = map.buildings.iter().filter(|b| held_out.contains(&b.asset)).count();
        check!(leaked == 0, "map {} uses {leaked} held-out buildings", entry.seed);
        buildings += map.buildings.len();
    }
    let secs = t0.elapsed().as_secs_f64();
    check!(secs <= 1800.0, "took {secs:.0}s, budget is 30 min");
    Ok(format!(
        "{} maps, {} trajectories, {lines} records, 0 violations, 0 of {buildings} buildings from the {} held-out assets",
        manifest.maps,
        manifest.trajectories,
        held_out.len()
    ))
}

pub fn throughput() -> Outcome {
    let mut spec = CitySpec::preset(1010, Difficulty::Hard);
    spec.traffic = TrafficParams { vehicles: 100, pedestrians: 200 };
    let map = Arc::new(city(&spec)?);
    let g = Arc::new(WaypointGraph::build(&map));
    let area = content_area_km2(&map);
    let mut env = Env::new(map.clone(), g.clone(), EnvConfig::default(), TrafficConfig::default());
    check!(env.world.vehicles.len() == 100 && env.world.pedestrians.len() == 200, "population mismatch");
    let sidewalk: Vec<Vec2> = g.nodes.iter().filter(|n| n.kind == WaypointKind::Road).map(|n| n.position).collect();
    for p in [sidewalk[0], sidewalk[sidewalk.len() / 2]] {
        env.add_robot(Pose::new(p, 0.0));
    }
    let plan = [RobotAction::MoveForward, RobotAction::TurnLeft, RobotAction::MoveForward, RobotAction::TurnRight];
    let (start, mut submitted) = (env.tick(), 0usize);
    let t0 = Instant::now();
    while env.tick() - start < 3600 {
        for id in 0..2u32 {
            let r = &env.robots[id as usize];
            if r.available && r.pending.is_none() {
                env.submit(id, plan[submitted % plan.len()].clone()).map_err(|e| e.to_string())?;
                submitted += 1;
            }
        }
        env.poll();
    }
    let secs = t0.elapsed().as_secs_f64();
    let rate = (env.tick() - start) as f64 / secs;
    check!(submitted > 10, "robots barely acted ({submitted} actions)");
    check!(rate >= 60.0, "{rate:.0} ticks/s");
    Ok(format!("{rate:.0} ticks/s on {area:.2} km² with 100 vehicles, 200 pedestrians, 2 robots ({submitted} actions)"))
}
