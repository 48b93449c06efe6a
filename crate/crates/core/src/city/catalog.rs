//! Bundled building asset catalog.
//!
//! Each asset is a tag plus the attributes used to template landmark
//! descriptions. The last third of the catalog is held out of training maps.

use serde::{Deserialize, Serialize};

pub const CATALOG_SIZE: usize = 50;
/// Assets with index at or above this are only used on evaluation maps.
pub const TRAIN_ASSET_COUNT: usize = 33;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeightClass {
    Low,
    Medium,
    Tall,
}

impl HeightClass {
    fn word(self) -> &'static str {
        match self {
            HeightClass::Low => "low",
            HeightClass::Medium => "mid-rise",
            HeightClass::Tall => "tall",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildingAttributes {
    pub color: String,
    pub height: HeightClass,
    pub material: String,
    pub style: String,
    pub signage: Option<String>,
}

impl BuildingAttributes {
    /// Short noun phrase, e.g. "a tall light blue glass tower with a CAFE sign".
    pub fn describe(&self) -> String {
        let noun = match self.height {
            HeightClass::Tall => "tower",
            HeightClass::Medium => "building",
            HeightClass::Low => "house",
        };
        let mut s = format!(
            "a {} {} {} {} {}",
            self.height.word(),
            self.style,
            self.color,
            self.material,
            noun
        );
        match &self.signage {
            Some(sign) => s.push_str(&format!(" with a {sign} sign")),
            None => s.push_str(" with no signage"),
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetEntry {
    pub tag: String,
    pub attributes: BuildingAttributes,
}

/// Which part of the catalog a map may draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CatalogSplit {
    #[default]
    Full,
    TrainOnly,
}

const COLORS: [&str; 10] = [
    "light blue",
    "red",
    "white",
    "beige",
    "dark gray",
    "yellow",
    "green",
    "terracotta",
    "black",
    "silver",
];
const MATERIALS: [&str; 7] = ["glass", "brick", "concrete", "stone", "steel", "wood", "stucco"];
const STYLES: [&str; 5] = ["modern", "classic", "industrial", "art deco", "minimalist"];
const SIGNS: [&str; 9] = [
    "CAFE", "BANK", "PHARMACY", "HOTEL", "BOOKS", "MARKET", "GYM", "BAKERY", "CINEMA",
];
const HEIGHTS: [HeightClass; 3] = [HeightClass::Low, HeightClass::Medium, HeightClass::Tall];

pub fn asset(index: usize) -> AssetEntry {
    assert!(index < CATALOG_SIZE, "asset index out of range");
    let signage = if index % 4 == 3 {
        None
    } else {
        Some(SIGNS[(index * 5 + index / 9) % SIGNS.len()].to_string())
    };
    AssetEntry {
        tag: format!("bldg_{index:02}"),
        attributes: BuildingAttributes {
            color: COLORS[index % COLORS.len()].to_string(),
            height: HEIGHTS[(index / 2 + index) % HEIGHTS.len()],
            material: MATERIALS[(index + index / COLORS.len()) % MATERIALS.len()].to_string(),
            style: STYLES[(index / 3) % STYLES.len()].to_string(),
            signage,
        },
    }
}

pub fn assets(split: CatalogSplit) -> Vec<AssetEntry> {
    let n = match split {
        CatalogSplit::Full => CATALOG_SIZE,
        CatalogSplit::TrainOnly => TRAIN_ASSET_COUNT,
    };
    (0..n).map(asset).collect()
}

pub fn is_test_only(tag: &str) -> bool {
    (TRAIN_ASSET_COUNT..CATALOG_SIZE).any(|i| asset(i).tag == tag)
}
