//! Headless urban simulation: procedural cities, background traffic,
//! controllable robots, and the two navigation benchmarks built on them.

pub mod city;
pub mod geometry;
pub mod rng;
pub mod waypoint;
pub mod traffic;
pub mod env;
pub mod mmnav;
pub mod mrs;
pub mod metrics;
pub mod episode;
pub mod oracle;
pub mod dataset;
