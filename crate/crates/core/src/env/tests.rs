use super::*;
use crate::city::{generate_city, Building, CitySpec, Difficulty};
use crate::geometry::ray_aabb;
use crate::traffic::Phase;

fn template() -> CityMap {
    generate_city(&CitySpec::preset(5, Difficulty::Easy)).unwrap()
}

/// A map with no content except the given building footprints.
fn blank_with(boxes: &[Aabb]) -> CityMap {
    let mut m = template();
    let proto: Building = m.buildings[0].clone();
    m.roads.clear();
    m.intersections.clear();
    m.elements.clear();
    m.population = Default::default();
    m.buildings = boxes
        .iter()
        .enumerate()
        .map(|(i, b)| Building { id: i as u32, footprint: *b, ..proto.clone() })
        .collect();
    m.bounds = Aabb::from_center(Vec2::ZERO, 500.0, 500.0);
    m.rebuild_index();
    m
}

fn env_on(map: CityMap) -> Env {
    let graph = Arc::new(WaypointGraph::build(&map));
    Env::new(Arc::new(map), graph, EnvConfig::default(), TrafficConfig::default())
}

#[test]
fn forward_on_clear_path_moves_five_meters() {
    let mut env = env_on(blank_with(&[]));
    let id = env.add_robot(Pose::new(Vec2::ZERO, 0.0));
    let out = env.run_action(id, RobotAction::MoveForward).unwrap();
    assert_eq!(out.pose.position, Vec2::new(0.0, 5.0));
    assert_eq!(out.pose.heading, 0.0);
    assert!(!out.blocked);
    assert!(out.events.is_empty());
    assert!((env.time() - 2.0 - env.config.poll_interval).abs() < 1e-9);
}

#[test]
fn turns_are_inverse() {
    let mut env = env_on(blank_with(&[]));
    let id = env.add_robot(Pose::new(Vec2::ZERO, 0.0));
    env.run_action(id, RobotAction::TurnRight).unwrap();
    assert_eq!(env.robot(id).unwrap().pose.heading, 90.0);
    env.run_action(id, RobotAction::TurnLeft).unwrap();
    assert_eq!(env.robot(id).unwrap().pose, Pose::new(Vec2::ZERO, 0.0));
}

#[test]
fn wall_truncates_and_counts_once_per_bump() {
    let wall = Aabb::new(Vec2::new(-20.0, 3.0), Vec2::new(20.0, 10.0));
    let mut env = env_on(blank_with(&[wall]));
    let id = env.add_robot(Pose::new(Vec2::ZERO, 0.0));
    let out = env.run_action(id, RobotAction::MoveForward).unwrap();
    assert!(out.blocked);
    assert!((out.pose.position.y - (3.0 - ROBOT_RADIUS)).abs() < 1e-9);
    // the contact lands on the final tick of the action or the first after
    env.run_action(id, RobotAction::Stay).unwrap();
    env.run_action(id, RobotAction::MoveForward).unwrap();
    assert_eq!(EventCounts::tally(&env.events).static_collisions, 1);
    env.run_action(id, RobotAction::MoveBackward).unwrap();
    env.run_action(id, RobotAction::MoveForward).unwrap();
    env.run_action(id, RobotAction::Stay).unwrap();
    let c = EventCounts::tally(&env.events);
    assert_eq!((c.static_collisions, c.dynamic_collisions, c.red_light_violations), (2, 0, 0));
}

#[test]
fn scripted_bumps_and_red_entry() {
    let map = template();
    let inter = map.intersections.iter().find(|i| i.signal.is_some()).unwrap().clone();
    let mut env = env_on(map);
    let b = env.map().buildings[0].clone();
    let id = env.add_robot(Pose::new(b.door, b.facing.heading()));
    env.run_action(id, RobotAction::MoveForward).unwrap();
    env.run_action(id, RobotAction::MoveBackward).unwrap();
    env.run_action(id, RobotAction::MoveForward).unwrap();
    env.run_action(id, RobotAction::MoveBackward).unwrap();

    // walk north into a band whose walking axis is held red
    let band = env.bands.iter().position(|bd| bd.intersection == inter.id && bd.walk_axis == crate::geometry::Axis::NS);
    let band = band.expect("signalized intersection has an east or west arm");
    let area = env.bands[band].area;
    let signal = env.bands[band].signal as usize;
    env.robots[id as usize].pose = Pose::new(Vec2::new(area.center().x, area.min.y - 2.0), 0.0);
    env.run_action(id, RobotAction::Stay).unwrap();
    env.world.lights[signal].phase = Phase::EwGreen;
    env.world.lights[signal].remaining = 30.0;
    env.run_action(id, RobotAction::MoveForward).unwrap();
    env.run_action(id, RobotAction::Stay).unwrap();
    let c = EventCounts::tally(&env.events);
    assert_eq!((c.static_collisions, c.dynamic_collisions, c.red_light_violations), (2, 0, 1));
}

#[test]
fn green_crossing_is_clean() {
    let map = template();
    let mut env = env_on(map);
    let (band, area) = env.bands.iter().enumerate().find(|(_, b)| b.walk_axis == crate::geometry::Axis::NS).map(|(i, b)| (i, b.area)).unwrap();
    let signal = env.bands[band].signal as usize;
    let id = env.add_robot(Pose::new(Vec2::new(area.center().x, area.min.y - 2.0), 0.0));
    env.world.lights[signal].phase = Phase::NsGreen;
    env.world.lights[signal].remaining = 30.0;
    for _ in 0..3 {
        env.run_action(id, RobotAction::MoveForward).unwrap();
    }
    assert_eq!(EventCounts::tally(&env.events).red_light_violations, 0);
}

#[test]
fn pedestrian_through_stationary_robot_is_one_episode() {
    let map = generate_city(&CitySpec::preset(8, Difficulty::Hard)).unwrap();
    let mut env = env_on(map);
    // find a pedestrian with a long straight leg ahead
    let (pid, spot) = env
        .world
        .pedestrians
        .iter()
        .find_map(|p| {
            let target = env.world.graph.position(p.route[p.progress]);
            let d = p.pose.position.distance(target);
            (d > 6.0 && !p.waiting).then(|| (p.id, p.pose.position + (target - p.pose.position).normalized() * 3.0))
        })
        .unwrap();
    let id = env.add_robot(Pose::new(spot, 0.0));
    for _ in 0..8 {
        env.run_action(id, RobotAction::Stay).unwrap();
    }
    let hits = env
        .events
        .iter()
        .filter(|e| e.kind == SafetyKind::DynamicCollision && e.other == EntityRef { class: SemanticClass::Pedestrian, id: pid })
        .count();
    assert_eq!(hits, 1);
}

#[test]
fn buffer_starts_concurrently_and_rejects_busy() {
    let mut env = env_on(blank_with(&[]));
    let a = env.add_robot(Pose::new(Vec2::ZERO, 0.0));
    let b = env.add_robot(Pose::new(Vec2::new(50.0, 0.0), 0.0));
    env.submit(a, RobotAction::MoveForward).unwrap();
    env.submit(b, RobotAction::TurnRight).unwrap();
    assert_eq!(env.submit(a, RobotAction::Stay), Err(EnvError::AgentBusy(a)));
    let r = env.poll();
    assert_eq!(r.started.len(), 2);
    assert_eq!(env.submit(a, RobotAction::TurnLeft), Err(EnvError::AgentBusy(a)));
    let start = env.time();
    let mut done_a = None;
    let mut done_b = None;
    while done_a.is_none() || done_b.is_none() {
        let r = env.poll();
        for o in r.completed {
            let slot = if o.agent == a { &mut done_a } else { &mut done_b };
            *slot = Some(env.time() - start);
        }
    }
    let (ta, tb) = (done_a.unwrap(), done_b.unwrap());
    assert!(ta >= 2.0 - 1e-9 && ta < 2.0 + env.config.poll_interval);
    assert!(tb >= 1.0 - 1e-9 && tb < 1.0 + env.config.poll_interval);
    assert_eq!(env.robot(a).unwrap().pose.position, Vec2::new(0.0, 5.0));
    assert_eq!(env.submit(a, RobotAction::Stay), Ok(()));
    assert_eq!(env.submit(9, RobotAction::Stay), Err(EnvError::UnknownAgent(9)));
}

#[test]
fn long_message_rejected() {
    let mut env = env_on(blank_with(&[]));
    let a = env.add_robot(Pose::new(Vec2::ZERO, 0.0));
    let b = env.add_robot(Pose::new(Vec2::new(3.0, 0.0), 0.0));
    let text = "x".repeat(129);
    assert_eq!(env.submit(a, RobotAction::SendMessage { text }), Err(EnvError::MessageTooLong(129)));
    env.run_action(a, RobotAction::SendMessage { text: "meet at the bank".into() }).unwrap();
    env.run_action(b, RobotAction::Stay).unwrap();
    let obs = env.robot(b).unwrap().latest.clone().unwrap();
    assert_eq!(obs.messages.len(), 1);
    assert_eq!(obs.messages[0].text, "meet at the bank");
    env.run_action(b, RobotAction::Stay).unwrap();
    assert!(env.robot(b).unwrap().latest.as_ref().unwrap().messages.is_empty());
}

#[test]
fn wide_face_ahead_reads_twenty_meters() {
    let wall = Aabb::new(Vec2::new(-200.0, 20.0), Vec2::new(200.0, 30.0));
    let mut env = env_on(blank_with(&[wall]));
    let id = env.add_robot(Pose::new(Vec2::ZERO, 0.0));
    let o = env.observe(id).unwrap();
    // rays 31 and 32 straddle the heading
    let center = o.scan.depth[31].min(o.scan.depth[32]);
    assert!((center - 20.0 / (0.5 * env.config.scan.ray_width()).to_radians().cos()).abs() < 1e-9);
    assert!(o.scan.semantic.iter().all(|l| l.class == SemanticClass::Building));
    assert_eq!(o.scan.landmarks.len(), 1);
    assert_eq!(o.cardinal, Cardinal::N);
}

#[test]
fn landmarks_match_brute_force() {
    let map = generate_city(&CitySpec::preset(11, Difficulty::Hard)).unwrap();
    let mut env = env_on(map);
    let params = env.config.scan;
    for k in 0..6 {
        let b = env.map().buildings[k * 7].clone();
        let id = env.add_robot(Pose::new(b.door - b.facing.unit() * 4.0, (b.facing.heading() + 30.0 * k as f64) % 360.0));
        let scan = env.scan_from(id, View::Level).unwrap();
        let bodies = env.dynamic_bodies(Some(id));
        let pose = env.robot(id).unwrap().pose;
        let mut expected = BTreeSet::new();
        for i in 0..params.rays {
            let dir = Vec2::from_heading(params.ray_heading(pose.heading, i));
            let mut best = (f64::INFINITY, None);
            for bd in &env.map().buildings {
                if let Some(t) = ray_aabb(pose.position, dir, &bd.footprint) {
                    if t <= params.max_range && t < best.0 {
                        best = (t, Some(bd.id));
                    }
                }
            }
            for el in &env.map().elements {
                if let Some(t) = ray_aabb(pose.position, dir, &el.footprint) {
                    if t <= params.max_range && t < best.0 {
                        best = (t, None);
                    }
                }
            }
            for body in &bodies {
                let t = match body.shape {
                    Shape::Disc { center, radius } => crate::geometry::ray_circle(pose.position, dir, center, radius),
                    Shape::Box(bx) => ray_aabb(pose.position, dir, &bx),
                };
                if let Some(t) = t {
                    if t <= params.max_range && t < best.0 {
                        best = (t, None);
                    }
                }
            }
            if let Some(bid) = best.1 {
                expected.insert(bid);
            }
        }
        let got: BTreeSet<u32> = scan.landmarks.iter().map(|l| l.building).collect();
        assert_eq!(got, expected);
        assert_eq!(scan.depth.len(), scan.semantic.len());
    }
}

#[test]
fn visibility_respects_occlusion_and_fan() {
    let wall = Aabb::new(Vec2::new(-5.0, 40.0), Vec2::new(5.0, 45.0));
    let mut env = env_on(blank_with(&[wall]));
    let a = env.add_robot(Pose::new(Vec2::ZERO, 0.0));
    let b = env.add_robot(Pose::new(Vec2::new(0.0, 10.0), 0.0));
    assert!(env.visible(a, b).unwrap());
    env.robots[b as usize].pose.position = Vec2::new(0.0, 60.0);
    assert!(!env.visible(a, b).unwrap());

    // sweep the target around a 30 m circle and find where it drops out
    let w = env.config.scan.ray_width();
    let mut last_seen = None;
    let mut bearing = 0.0;
    while bearing < 90.0 {
        env.robots[b as usize].pose.position = Vec2::from_heading(bearing) * 30.0;
        if env.visible(a, b).unwrap() {
            last_seen = Some(bearing);
        }
        bearing += 0.05;
    }
    let edge = last_seen.unwrap();
    assert!((edge - 45.0).abs() <= w, "edge at {edge}");
    assert_eq!(env.visible(a, 5), Err(EnvError::UnknownAgent(5)));
}

#[test]
fn replay_is_deterministic() {
    let run = || {
        let map = generate_city(&CitySpec::preset(2, Difficulty::Hard)).unwrap();
        let mut env = env_on(map);
        let b = env.map().buildings[3].clone();
        let id = env.add_robot(Pose::new(b.door - b.facing.unit() * 2.0, 0.0));
        for a in [RobotAction::MoveForward, RobotAction::TurnRight, RobotAction::MoveForward, RobotAction::Stay] {
            env.run_action(id, a).unwrap();
        }
        env.state_hash()
    };
    assert_eq!(run(), run());
}
