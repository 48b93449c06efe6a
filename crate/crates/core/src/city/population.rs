use super::{CitySpec, PedestrianSpawn, RoadSegment, Side, TrafficPopulation, VehicleSpawn};
use crate::rng::SimRng;
use rand::Rng;

/// Draws spawn records for background vehicles and pedestrians. The traffic
/// simulator turns these into agents with sampled routes.
pub fn populate_traffic(roads: &[RoadSegment], spec: &CitySpec, rng: &mut SimRng) -> TrafficPopulation {
    let mut pop = TrafficPopulation::default();
    if roads.is_empty() {
        return pop;
    }
    for id in 0..spec.traffic.vehicles {
        let road = &roads[rng.gen_range(0..roads.len())];
        let flip = rng.gen_bool(0.5);
        let (from, to) = if flip {
            (road.endpoints[1], road.endpoints[0])
        } else {
            (road.endpoints[0], road.endpoints[1])
        };
        pop.vehicles.push(VehicleSpawn { id, from, to });
    }
    for id in 0..spec.traffic.pedestrians {
        let road = &roads[rng.gen_range(0..roads.len())];
        let side = if rng.gen_bool(0.5) { Side::Right } else { Side::Left };
        pop.pedestrians.push(PedestrianSpawn {
            id,
            road: road.id,
            side,
            along: rng.gen_range(0.0..1.0),
            walk_speed: rng.gen_range(1.0..1.6),
        });
    }
    pop
}
