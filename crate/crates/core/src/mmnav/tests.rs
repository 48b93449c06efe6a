use super::*;
use crate::city::{generate_city, CitySpec};
use crate::env::{EnvConfig, ScanParams};
use crate::rng::{indexed_rng, stage};
use crate::traffic::TrafficConfig;
use std::sync::Arc;

fn tasks_for(seed: u64, difficulty: Difficulty, n: u32) -> (CityMap, WaypointGraph, Vec<MMNavTask>) {
    let map = generate_city(&CitySpec::preset(seed, difficulty)).unwrap();
    let g = WaypointGraph::build(&map);
    let tasks = (0..n)
        .map(|i| {
            let mut rng = indexed_rng(seed, stage::MMNAV, i as u64);
            generate_mmnav_task(&map, &g, &mut rng, i, &MMNavConfig::default(), &ScanParams::default()).unwrap()
        })
        .collect();
    (map, g, tasks)
}

fn grammar_ok(c: &[SubtaskCategory]) -> bool {
    use SubtaskCategory::*;
    if c.first() != Some(&OrientationAlignment) || c.last() != Some(&ReachDestination) {
        return false;
    }
    let mid = &c[1..c.len() - 1];
    let mut i = 0;
    while i + 1 < mid.len() && mid[i] == MoveAlongRoad && mid[i + 1] == TurnAtIntersection {
        i += 2;
    }
    mid[i..].is_empty() || mid[i..] == [MoveAlongRoad]
}

#[test]
fn grammar_and_counts() {
    for seed in [1, 2] {
        let (_, _, tasks) = tasks_for(seed, Difficulty::Easy, 10);
        for t in &tasks {
            let c = t.categories();
            assert!(grammar_ok(&c), "{c:?}");
            assert!((2..=4).contains(&c.len()));
            for (k, s) in t.subtasks.iter().enumerate() {
                if s.category == SubtaskCategory::TurnAtIntersection {
                    assert_eq!(t.subtasks[k - 1].category, SubtaskCategory::MoveAlongRoad);
                }
                assert_eq!(s.instruction, render_instruction(s));
            }
        }
    }
}

#[test]
fn zero_and_one_turn_shapes() {
    use SubtaskCategory::*;
    let (_, _, tasks) = tasks_for(3, Difficulty::Easy, 20);
    let mut seen = (false, false);
    for t in &tasks {
        match legs(&t.route).len() {
            1 => {
                assert_eq!(t.categories(), vec![OrientationAlignment, MoveAlongRoad, ReachDestination]);
                seen.0 = true;
            }
            2 => {
                assert_eq!(t.categories(), vec![OrientationAlignment, MoveAlongRoad, TurnAtIntersection, ReachDestination]);
                let turn = &t.subtasks[2];
                let legs = legs(&t.route);
                assert_eq!(turn.goal.pose.heading, legs[1].heading.heading());
                assert_eq!(turn.hint.pose, turn.goal.pose);
                seen.1 = true;
            }
            n => panic!("unexpected {n} legs"),
        }
    }
    assert!(seen.0 && seen.1, "{seen:?}");
}

#[test]
fn hints_match_observation_on_easy_maps() {
    let (map, g, tasks) = tasks_for(4, Difficulty::Easy, 3);
    let mut env = Env::new(Arc::new(map), Arc::new(g), EnvConfig::default(), TrafficConfig::default());
    let id = env.add_robot(tasks[0].start);
    for t in &tasks {
        for s in &t.subtasks {
            env.robots[id as usize].pose = s.goal.pose;
            assert_eq!(env.observe(id).unwrap().scan, s.hint);
            assert!(check_subtask_success(&env, id, s).unwrap());
            let mut flipped = s.goal.pose;
            flipped.heading = (flipped.heading + 180.0) % 360.0;
            env.robots[id as usize].pose = flipped;
            assert!(!check_subtask_success(&env, id, s).unwrap());
        }
    }
}

#[test]
fn route_is_connected_and_rectilinear() {
    let (_, g, tasks) = tasks_for(5, Difficulty::Hard, 5);
    for t in &tasks {
        for w in t.oracle_path.windows(2) {
            assert!(g.edge_between(w[0], w[1]).is_some());
        }
        for w in t.route.windows(2) {
            let d = w[1] - w[0];
            assert!(d.x.abs() < 1e-6 || d.y.abs() < 1e-6);
        }
        assert!((t.path_length - legs(&t.route).iter().map(|l| l.length()).sum::<f64>()).abs() < 1e-6);
    }
}

#[test]
fn generation_is_deterministic_and_round_trips() {
    let (_, _, a) = tasks_for(6, Difficulty::Hard, 2);
    let (_, _, b) = tasks_for(6, Difficulty::Hard, 2);
    assert_eq!(a, b);
    let dir = std::env::temp_dir().join(format!("mmnav-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("tasks.json");
    save_tasks(&a, &path).unwrap();
    assert_eq!(load_tasks(&path).unwrap(), a);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn impossible_window_reports_no_pair() {
    let map = generate_city(&CitySpec::preset(7, Difficulty::Easy)).unwrap();
    let g = WaypointGraph::build(&map);
    let config = MMNavConfig { min_goal_distance: 1e6, max_goal_distance: 2e6, max_attempts: 50, ..Default::default() };
    let err = generate_mmnav_task(&map, &g, &mut indexed_rng(7, stage::MMNAV, 0), 0, &config, &ScanParams::default());
    assert!(matches!(err, Err(MMNavError::NoValidPair(50))));
}
