//! The closed set of module categories, their definitions, and parsing of
//! ranked answers.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CategoryError {
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
    #[error("no category name found in answer")]
    UnparseableRanking,
    #[error("k must be between 1 and 5, got {0}")]
    BadK(usize),
    #[error("missing definition for category {0}")]
    MissingDefinition(Category),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    DataTransfer,
    Navigation,
    Controller,
    SafetyCheck,
    Other,
}

impl Category {
    /// Canonical order, also used to complete partial rankings.
    pub const ALL: [Category; 5] =
        [Category::Controller, Category::DataTransfer, Category::Navigation, Category::SafetyCheck, Category::Other];

    pub fn id(self) -> &'static str {
        match self {
            Category::DataTransfer => "data_transfer",
            Category::Navigation => "navigation",
            Category::Controller => "controller",
            Category::SafetyCheck => "safety_check",
            Category::Other => "other",
        }
    }

    /// Human-readable label used in prompts and tables.
    pub fn title(self) -> &'static str {
        match self {
            Category::DataTransfer => "Data Transfer",
            Category::Navigation => "Navigation",
            Category::Controller => "Controller",
            Category::SafetyCheck => "Safety Check",
            Category::Other => "Other",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Category {
    type Err = CategoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL.into_iter().find(|c| c.id() == s).ok_or_else(|| CategoryError::UnknownCategory(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryDefinition {
    pub category: Category,
    pub definition_text: String,
}

/// Built-in expert definitions, one per category.
pub fn default_definitions() -> Vec<CategoryDefinition> {
    let text = |c: Category| match c {
        Category::DataTransfer => {
            "Modules that move data between the vehicle and the outside world or between \
             components: communication protocols such as MAVLink, telemetry links, serial, CAN, \
             I2C and SPI drivers, message packing, parsing and logging transport."
        }
        Category::Navigation => {
            "Modules that determine or plan where the vehicle is and where it goes: position and \
             attitude estimation, GPS and inertial sensor fusion, waypoint handling, path \
             planning and geofence-independent route following."
        }
        Category::Controller => {
            "Modules that govern vehicle behavior and dynamics: flight modes, PID and attitude \
             rate loops, motor and servo mixing, thrust and actuator output."
        }
        Category::SafetyCheck => {
            "Modules that monitor integrity and react to faults: arming and pre-flight checks, \
             failsafes, watchdogs, battery and sensor health monitoring, geofence breach \
             handling."
        }
        Category::Other => {
            "Modules that fit none of the above: generic utilities, math and container \
             libraries, scheduling, memory management and runtime support."
        }
    };
    Category::ALL
        .into_iter()
        .map(|c| CategoryDefinition { category: c, definition_text: text(c).to_string() })
        .collect()
}

/// Parses a `{category: definition_text}` document.
pub fn parse_definitions(json: &str) -> Result<Vec<CategoryDefinition>, DefinitionsError> {
    let raw: BTreeMap<String, String> = serde_json::from_str(json)?;
    let mut out = Vec::with_capacity(raw.len());
    for (k, v) in raw {
        out.push(CategoryDefinition { category: k.parse()?, definition_text: v });
    }
    out.sort_by_key(|d| Category::ALL.iter().position(|c| *c == d.category));
    Ok(out)
}

#[derive(Debug, thiserror::Error)]
pub enum DefinitionsError {
    #[error("malformed definitions file: {0}")]
    MalformedJson(#[from] serde_json::Error),
    #[error(transparent)]
    Category(#[from] CategoryError),
}

/// Checks that every category has exactly one definition and returns them
/// in canonical order.
pub fn complete_definitions(defs: &[CategoryDefinition]) -> Result<Vec<&CategoryDefinition>, CategoryError> {
    Category::ALL
        .iter()
        .map(|c| defs.iter().find(|d| d.category == *c).ok_or(CategoryError::MissingDefinition(*c)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryRanking {
    pub module: usize,
    pub ordered: Vec<Category>,
    pub raw_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModulePrediction {
    pub module: usize,
    pub selected: Vec<Category>,
    pub k: usize,
}

/// Phrases recognised in answers, longest first so "safety check" wins over
/// "safety" at the same position.
const SYNONYMS: &[(&str, Category)] = &[
    ("data_transfer", Category::DataTransfer),
    ("data transfer", Category::DataTransfer),
    ("data-transfer", Category::DataTransfer),
    ("safety_check", Category::SafetyCheck),
    ("safety check", Category::SafetyCheck),
    ("safety-check", Category::SafetyCheck),
    ("navigation", Category::Navigation),
    ("controller", Category::Controller),
    ("control", Category::Controller),
    ("safety", Category::SafetyCheck),
    ("others", Category::Other),
    ("other", Category::Other),
];

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric()
}

/// Category mentions in order of first occurrence. Matches must start at a
/// word boundary; "controls" and "controlled" still count as control.
pub fn mentioned_categories(raw: &str) -> Vec<Category> {
    let lower = raw.to_ascii_lowercase();
    let bytes = lower.as_bytes();
    let mut seen = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let at_boundary = i == 0 || !is_word_byte(bytes[i - 1]);
        if at_boundary {
            if let Some((phrase, cat)) = SYNONYMS.iter().find(|(p, _)| bytes[i..].starts_with(p.as_bytes())) {
                if !seen.contains(cat) {
                    seen.push(*cat);
                }
                i += phrase.len();
                continue;
            }
        }
        i += 1;
    }
    seen
}

/// Ranks categories by first mention; unmentioned ones follow in canonical
/// order.
pub fn parse_ranking(module: usize, raw: &str) -> Result<CategoryRanking, CategoryError> {
    let mut ordered = mentioned_categories(raw);
    if ordered.is_empty() {
        return Err(CategoryError::UnparseableRanking);
    }
    for c in Category::ALL {
        if !ordered.contains(&c) {
            ordered.push(c);
        }
    }
    Ok(CategoryRanking { module, ordered, raw_text: raw.to_string() })
}

pub fn select_top_k(ranking: &CategoryRanking, k: usize) -> Result<ModulePrediction, CategoryError> {
    if !(1..=Category::ALL.len()).contains(&k) {
        return Err(CategoryError::BadK(k));
    }
    Ok(ModulePrediction { module: ranking.module, selected: ranking.ordered[..k].to_vec(), k })
}
