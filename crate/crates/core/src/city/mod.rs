//! Seeded procedural city generation.
//!
//! The pipeline runs four stages in order: road growth on a Manhattan
//! lattice, building placement along each road side, street element
//! placement, and traffic population. Every stage draws from its own
//! seeded stream so the whole map is a pure function of [`CitySpec`].

pub mod catalog;
mod buildings;
mod elements;
mod population;
mod roads;

pub use buildings::place_buildings;
pub use catalog::{BuildingAttributes, CatalogSplit, HeightClass};
pub use elements::{place_street_elements, sidewalk_passage};
pub use population::populate_traffic;
pub use roads::{generate_roads, segments_cross, RoadNetwork};

use crate::geometry::{Aabb, Axis, Cardinal, QuadTree, Vec2};
use crate::rng::{stage, stage_rng};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;
use thiserror::Error;

pub const MAP_SCHEMA: &str = "streetsim.map";
pub const MAP_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CityError {
    #[error("spec infeasible: {0}")]
    SpecInfeasible(String),
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("map file i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("map file format: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadParams {
    pub initial_roads: u32,
    pub max_depth: u32,
    pub branch_probability: f64,
    pub block_size: f64,
    pub road_width: f64,
    pub sidewalk_width: f64,
    pub snap_tolerance: f64,
    pub min_intersection_spacing: f64,
}

impl Default for RoadParams {
    fn default() -> Self {
        Self {
            initial_roads: 4,
            max_depth: 16,
            branch_probability: 0.45,
            block_size: 120.0,
            road_width: 12.0,
            sidewalk_width: 4.0,
            snap_tolerance: 3.0,
            min_intersection_spacing: 40.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingParams {
    pub setback: f64,
    pub min_footprint: f64,
    pub max_footprint: f64,
    /// Largest random spacing between neighbouring buildings.
    pub max_gap: f64,
    pub fill_gap_threshold: f64,
}

impl Default for BuildingParams {
    fn default() -> Self {
        Self {
            setback: 2.0,
            min_footprint: 15.0,
            max_footprint: 35.0,
            max_gap: 4.0,
            fill_gap_threshold: 12.0,
        }
    }
}

/// Items per 100 m of sidewalk band, per class.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ElementDensity {
    pub tree: f64,
    pub cone: f64,
    pub bench: f64,
    pub parked_vehicle: f64,
    pub barrier: f64,
}

impl ElementDensity {
    pub fn street_default() -> Self {
        Self {
            tree: 2.0,
            cone: 0.5,
            bench: 1.0,
            parked_vehicle: 1.0,
            barrier: 0.5,
        }
    }

    pub fn get(&self, class: ElementClass) -> f64 {
        match class {
            ElementClass::Tree => self.tree,
            ElementClass::Cone => self.cone,
            ElementClass::Bench => self.bench,
            ElementClass::ParkedVehicle => self.parked_vehicle,
            ElementClass::Barrier => self.barrier,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrafficParams {
    pub vehicles: u32,
    pub pedestrians: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Easy,
    Hard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitySpec {
    pub seed: u64,
    pub target_area_km2: f64,
    pub roads: RoadParams,
    pub buildings: BuildingParams,
    pub elements: ElementDensity,
    pub traffic: TrafficParams,
    #[serde(default)]
    pub catalog: CatalogSplit,
}

impl CitySpec {
    /// Default 2 km² city for a benchmark difficulty. Easy maps carry no
    /// street elements and no traffic.
    pub fn preset(seed: u64, difficulty: Difficulty) -> Self {
        let (elements, traffic) = match difficulty {
            Difficulty::Easy => (ElementDensity::default(), TrafficParams::default()),
            Difficulty::Hard => (
                ElementDensity::street_default(),
                TrafficParams {
                    vehicles: 50,
                    pedestrians: 100,
                },
            ),
        };
        Self {
            seed,
            target_area_km2: 2.0,
            roads: RoadParams::default(),
            buildings: BuildingParams::default(),
            elements,
            traffic,
            catalog: CatalogSplit::Full,
        }
    }

    /// Hard when the spec asks for any obstacles or traffic.
    pub fn difficulty(&self) -> Difficulty {
        let t = &self.traffic;
        let any_elements = ElementClass::ALL.iter().any(|c| self.elements.get(*c) > 0.0);
        if any_elements || t.vehicles > 0 || t.pedestrians > 0 {
            Difficulty::Hard
        } else {
            Difficulty::Easy
        }
    }

    pub fn validate(&self) -> Result<(), CityError> {
        let bad = |m: &str| Err(CityError::InvalidSpec(m.to_string()));
        let r = &self.roads;
        let b = &self.buildings;
        let e = &self.elements;
        if !(self.target_area_km2 > 0.0 && self.target_area_km2.is_finite()) {
            return bad("target_area_km2 must be positive");
        }
        if !(0.0..=1.0).contains(&r.branch_probability) {
            return bad("branch_probability must lie in [0, 1]");
        }
        if !(r.block_size > 0.0 && r.road_width > 0.0 && r.sidewalk_width > 0.0) {
            return bad("road dimensions must be positive");
        }
        if r.snap_tolerance < 0.0 || r.min_intersection_spacing < 0.0 {
            return bad("tolerances must be non-negative");
        }
        if !(b.min_footprint > 0.0 && b.min_footprint <= b.max_footprint) {
            return bad("footprint range must satisfy 0 < min <= max");
        }
        if b.setback < 0.0 || b.max_gap < 0.0 || b.fill_gap_threshold < 0.0 {
            return bad("building spacing values must be non-negative");
        }
        for d in [e.tree, e.cone, e.bench, e.parked_vehicle, e.barrier] {
            if !(d >= 0.0 && d.is_finite()) {
                return bad("element densities must be non-negative");
            }
        }
        Ok(())
    }

    pub fn half_road(&self) -> f64 {
        self.roads.road_width * 0.5
    }

    /// Lateral offset of the sidewalk centerline from the road centerline.
    pub fn sidewalk_offset(&self) -> f64 {
        self.half_road() + self.roads.sidewalk_width * 0.5
    }

    /// Half width of the road corridor including both sidewalks.
    pub fn corridor_half(&self) -> f64 {
        self.half_road() + self.roads.sidewalk_width
    }

    /// Lateral offset of building fronts from the road centerline.
    pub fn frontage_offset(&self) -> f64 {
        self.corridor_half() + self.buildings.setback
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadSegment {
    pub id: u32,
    /// Intersection ids, lower id first.
    pub endpoints: [u32; 2],
    pub axis: Axis,
    /// Centerline from the lower-id endpoint to the higher-id endpoint.
    pub centerline: [Vec2; 2],
    pub width: f64,
    pub sidewalk_offset: f64,
}

impl RoadSegment {
    pub fn length(&self) -> f64 {
        self.centerline[0].distance(self.centerline[1])
    }

    /// Unit direction from the first endpoint to the second.
    pub fn direction(&self) -> Vec2 {
        (self.centerline[1] - self.centerline[0]).normalized()
    }

    /// Point at `along` meters from the first endpoint, shifted `lateral`
    /// meters to the right of the direction of travel.
    pub fn point_at(&self, along: f64, lateral: f64) -> Vec2 {
        let u = self.direction();
        self.centerline[0] + u * along + u.right_normal() * lateral
    }

    /// Box spanning the carriageway and both sidewalks, intersections included.
    pub fn corridor(&self, corridor_half: f64) -> Aabb {
        Aabb::from_corners(self.centerline[0], self.centerline[1]).expanded(corridor_half)
    }

    pub fn other_end(&self, intersection: u32) -> u32 {
        if self.endpoints[0] == intersection {
            self.endpoints[1]
        } else {
            self.endpoints[0]
        }
    }
}

/// Road side relative to the segment direction (lower id towards higher id).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Right, Side::Left];

    pub fn sign(self) -> f64 {
        match self {
            Side::Right => 1.0,
            Side::Left => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intersection {
    pub id: u32,
    pub center: Vec2,
    /// Incident segment ids, ascending.
    pub arms: Vec<u32>,
    /// Corner points in order NE, SE, SW, NW.
    pub corners: Vec<Vec2>,
    pub signal: Option<u32>,
}

/// Corner sign vectors in corner-index order NE, SE, SW, NW.
pub const CORNER_SIGNS: [(f64, f64); 4] = [(1.0, 1.0), (1.0, -1.0), (-1.0, -1.0), (-1.0, 1.0)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Building {
    pub id: u32,
    pub asset: String,
    pub footprint: Aabb,
    pub door: Vec2,
    pub facing_road: u32,
    pub side: Side,
    /// Direction from the door towards the building.
    pub facing: Cardinal,
    pub attributes: BuildingAttributes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementClass {
    Tree,
    Cone,
    Bench,
    ParkedVehicle,
    Barrier,
}

impl ElementClass {
    pub const ALL: [ElementClass; 5] = [
        ElementClass::Tree,
        ElementClass::Cone,
        ElementClass::Bench,
        ElementClass::ParkedVehicle,
        ElementClass::Barrier,
    ];

    /// (along-road length, across-road depth) in meters.
    pub fn size(self) -> (f64, f64) {
        match self {
            ElementClass::Tree => (1.2, 1.2),
            ElementClass::Cone => (0.5, 0.5),
            ElementClass::Bench => (2.0, 0.8),
            ElementClass::ParkedVehicle => (4.5, 2.0),
            ElementClass::Barrier => (2.5, 0.5),
        }
    }

    pub fn zone(self) -> Zone {
        match self {
            ElementClass::Bench | ElementClass::Barrier => Zone::BuildingAdjacent,
            _ => Zone::Sidewalk,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Zone {
    BuildingAdjacent,
    Sidewalk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreetElement {
    pub id: u32,
    pub class: ElementClass,
    pub footprint: Aabb,
    pub zone: Zone,
    pub road: u32,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleSpawn {
    pub id: u32,
    pub from: u32,
    pub to: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PedestrianSpawn {
    pub id: u32,
    pub road: u32,
    pub side: Side,
    /// Fraction of the sidewalk chain, in [0, 1].
    pub along: f64,
    pub walk_speed: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrafficPopulation {
    pub vehicles: Vec<VehicleSpawn>,
    pub pedestrians: Vec<PedestrianSpawn>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MapEntity {
    Road(u32),
    Building(u32),
    Element(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityMap {
    pub spec: CitySpec,
    pub bounds: Aabb,
    pub roads: Vec<RoadSegment>,
    pub intersections: Vec<Intersection>,
    pub buildings: Vec<Building>,
    pub elements: Vec<StreetElement>,
    pub population: TrafficPopulation,
    #[serde(skip, default = "empty_index")]
    pub index: QuadTree<MapEntity>,
}

fn empty_index() -> QuadTree<MapEntity> {
    QuadTree::new(Aabb::new(Vec2::ZERO, Vec2::ZERO))
}

#[derive(Serialize, Deserialize)]
struct MapDocument {
    schema: String,
    version: u32,
    map: CityMap,
}

/// Runs the full four-stage pipeline.
pub fn generate_city(spec: &CitySpec) -> Result<CityMap, CityError> {
    spec.validate()?;
    let network = generate_roads(spec, &mut stage_rng(spec.seed, stage::ROADS))?;
    let buildings = place_buildings(
        &network.roads,
        &network.intersections,
        spec,
        &mut stage_rng(spec.seed, stage::BUILDINGS),
    );
    let elements = place_street_elements(
        &network.roads,
        &buildings,
        spec,
        &mut stage_rng(spec.seed, stage::ELEMENTS),
    );
    let population = populate_traffic(
        &network.roads,
        spec,
        &mut stage_rng(spec.seed, stage::TRAFFIC),
    );
    let mut map = CityMap {
        spec: spec.clone(),
        bounds: Aabb::new(Vec2::ZERO, Vec2::ZERO),
        roads: network.roads,
        intersections: network.intersections,
        buildings,
        elements,
        population,
        index: empty_index(),
    };
    map.bounds = map.content_bounds();
    map.rebuild_index();
    Ok(map)
}

impl CityMap {
    /// Bounding box of every road corridor, building and element.
    pub fn content_bounds(&self) -> Aabb {
        let half = self.spec.corridor_half();
        self.roads
            .iter()
            .map(|r| r.corridor(half))
            .chain(self.buildings.iter().map(|b| b.footprint))
            .chain(self.elements.iter().map(|e| e.footprint))
            .reduce(|a, b| a.union(&b))
            .unwrap_or(Aabb::new(Vec2::ZERO, Vec2::ZERO))
    }

    pub fn area_km2(&self) -> f64 {
        self.bounds.area() / 1.0e6
    }

    pub fn rebuild_index(&mut self) {
        let half = self.spec.corridor_half();
        let mut index = QuadTree::new(self.bounds.expanded(1.0));
        for r in &self.roads {
            index.insert(MapEntity::Road(r.id), r.corridor(half));
        }
        for b in &self.buildings {
            index.insert(MapEntity::Building(b.id), b.footprint);
        }
        for e in &self.elements {
            index.insert(MapEntity::Element(e.id), e.footprint);
        }
        self.index = index;
    }

    pub fn road(&self, id: u32) -> &RoadSegment {
        &self.roads[id as usize]
    }

    pub fn intersection(&self, id: u32) -> &Intersection {
        &self.intersections[id as usize]
    }

    pub fn building(&self, id: u32) -> &Building {
        &self.buildings[id as usize]
    }

    pub fn signal_count(&self) -> usize {
        self.intersections.iter().filter(|i| i.signal.is_some()).count()
    }

    /// Direction of an arm as seen from its intersection.
    pub fn arm_direction(&self, intersection: u32, road: u32) -> Cardinal {
        let seg = self.road(road);
        let from = self.intersection(intersection).center;
        let to = self.intersection(seg.other_end(intersection)).center;
        Cardinal::from_heading(from.bearing_to(to))
    }

    pub fn to_json(&self) -> String {
        let doc = MapDocument {
            schema: MAP_SCHEMA.to_string(),
            version: MAP_SCHEMA_VERSION,
            map: self.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("map serializes")
    }

    pub fn from_json(text: &str) -> Result<CityMap, CityError> {
        let doc: MapDocument =
            serde_json::from_str(text).map_err(|e| CityError::Format(e.to_string()))?;
        if doc.schema != MAP_SCHEMA {
            return Err(CityError::Format(format!("unexpected schema {:?}", doc.schema)));
        }
        if doc.version != MAP_SCHEMA_VERSION {
            return Err(CityError::Format(format!("unsupported version {}", doc.version)));
        }
        let mut map = doc.map;
        map.rebuild_index();
        Ok(map)
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    pub fn save(&self, path: &Path) -> Result<(), CityError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<CityMap, CityError> {
        CityMap::from_json(&std::fs::read_to_string(path)?)
    }

    /// Copy with street elements and traffic stripped; used for hints,
    /// which must never show transient or hard-mode content.
    pub fn static_base(&self) -> CityMap {
        let mut base = self.clone();
        base.elements.clear();
        base.population = TrafficPopulation::default();
        base.rebuild_index();
        base
    }
}
