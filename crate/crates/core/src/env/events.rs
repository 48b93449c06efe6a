use super::scan::{element_class, SemanticClass};
use crate::city::{CityMap, MapEntity};
use crate::geometry::{disc_touches_aabb, Aabb, Axis, Vec2};
use serde::{Deserialize, Serialize};

pub const CONTACT_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SafetyKind {
    StaticCollision,
    DynamicCollision,
    RedLightViolation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityRef {
    pub class: SemanticClass,
    pub id: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SafetyEvent {
    pub kind: SafetyKind,
    pub tick: u64,
    pub agent: u32,
    /// The entity touched, or the intersection for a violation.
    pub other: EntityRef,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub static_collisions: u32,
    pub dynamic_collisions: u32,
    pub red_light_violations: u32,
}

impl EventCounts {
    pub fn tally<'a>(events: impl IntoIterator<Item = &'a SafetyEvent>) -> Self {
        let mut c = EventCounts::default();
        for e in events {
            match e.kind {
                SafetyKind::StaticCollision => c.static_collisions += 1,
                SafetyKind::DynamicCollision => c.dynamic_collisions += 1,
                SafetyKind::RedLightViolation => c.red_light_violations += 1,
            }
        }
        c
    }

    pub fn total(&self) -> u32 {
        self.static_collisions + self.dynamic_collisions + self.red_light_violations
    }
}

/// Strip where a signalized arm meets its intersection. Entering it is
/// legal only while `walk_axis` is green.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrosswalkBand {
    pub intersection: u32,
    pub signal: u32,
    pub road: u32,
    pub walk_axis: Axis,
    pub area: Aabb,
}

/// One band per arm of every signalized intersection. The band spans the
/// carriageway and reaches from the box edge out to the building line.
pub fn crosswalk_bands(map: &CityMap) -> Vec<CrosswalkBand> {
    let half = map.spec.half_road();
    let outer = map.spec.frontage_offset();
    let mut out = Vec::new();
    for inter in &map.intersections {
        let Some(signal) = inter.signal else { continue };
        for &road in &inter.arms {
            let dir = map.arm_direction(inter.id, road);
            let u = dir.unit();
            let n = u.right_normal();
            let area = Aabb::from_corners(
                inter.center + u * half + n * half,
                inter.center + u * outer - n * half,
            );
            out.push(CrosswalkBand {
                intersection: inter.id,
                signal,
                road,
                walk_axis: dir.axis().other(),
                area,
            });
        }
    }
    out
}

/// Static footprints the disc touches.
pub fn static_contacts(map: &CityMap, center: Vec2, radius: f64) -> Vec<EntityRef> {
    let window = Aabb::from_center(center, radius + CONTACT_EPS, radius + CONTACT_EPS);
    let mut out = Vec::new();
    map.index.visit(&window, |entity, bbox| {
        if !disc_touches_aabb(center, radius, bbox, CONTACT_EPS) {
            return;
        }
        match entity {
            MapEntity::Building(id) => out.push(EntityRef { class: SemanticClass::Building, id }),
            MapEntity::Element(id) => out.push(EntityRef {
                class: element_class(map.elements[id as usize].class),
                id,
            }),
            MapEntity::Road(_) => {}
        }
    });
    out.sort();
    out
}
