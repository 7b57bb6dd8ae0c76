//! Procedural asset catalog and identifier-based weight resolution.
//!
//! Identifiers follow a two-level hierarchy below the category:
//! `tree` (whole category), `tree/birch` (sub-group) and `tree/birch_01`
//! (single instance).

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::rng::CategoricalWeights;

/// Object and actor categories that can be populated on a tile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Building,
    Tree,
    Lamp,
    Human,
    Vehicle,
}

impl Category {
    /// Order used by existence and count vectors: (B, Tr, Lp, H, V).
    pub const ALL: [Category; 5] = [
        Category::Building,
        Category::Tree,
        Category::Lamp,
        Category::Human,
        Category::Vehicle,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Building => "building",
            Category::Tree => "tree",
            Category::Lamp => "lamp",
            Category::Human => "human",
            Category::Vehicle => "vehicle",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }

    /// Semantic label written by the renderer. Buildings share the background label.
    pub fn label(self) -> u8 {
        match self {
            Category::Building => crate::LABEL_BACKGROUND,
            Category::Tree => crate::LABEL_TREE,
            Category::Lamp => crate::LABEL_LAMP,
            Category::Human => crate::LABEL_HUMAN,
            Category::Vehicle => crate::LABEL_VEHICLE,
        }
    }

    /// Footprint radius in meters used by the same-category overlap check.
    pub fn footprint(self) -> f64 {
        match self {
            Category::Building => 6.0,
            Category::Tree => 1.5,
            Category::Lamp => 0.3,
            Category::Human => 0.4,
            Category::Vehicle => 2.2,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Pedestrian animation choices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gait {
    Walk,
    StandIdle,
}

impl Gait {
    pub const ALL: [Gait; 2] = [Gait::Walk, Gait::StandIdle];

    pub fn name(self) -> &'static str {
        match self {
            Gait::Walk => "walk",
            Gait::StandIdle => "stand_idle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssetEntry {
    pub subgroup: &'static str,
    pub name: String,
}

/// All asset instances per category, in model-id order.
#[derive(Debug, Clone)]
pub struct AssetCatalog {
    entries: BTreeMap<Category, Vec<AssetEntry>>,
}

impl Default for AssetCatalog {
    fn default() -> Self {
        Self::builtin()
    }
}

impl AssetCatalog {
    /// The shipped procedural catalog: 10 buildings, 7 trees, 1 lamp,
    /// 19 pedestrians, and 2 car models in 3 and 4 colorings.
    pub fn builtin() -> Self {
        fn group(sub: &'static str, names: &[&str]) -> Vec<AssetEntry> {
            names
                .iter()
                .map(|n| AssetEntry {
                    subgroup: sub,
                    name: (*n).to_string(),
                })
                .collect()
        }
        fn numbered(sub: &'static str, n: usize) -> Vec<AssetEntry> {
            (1..=n)
                .map(|i| AssetEntry {
                    subgroup: sub,
                    name: format!("{sub}_{i:02}"),
                })
                .collect()
        }
        let mut entries = BTreeMap::new();
        entries.insert(
            Category::Building,
            [numbered("residential", 5), numbered("office", 5)].concat(),
        );
        entries.insert(
            Category::Tree,
            [numbered("birch", 3), numbered("maple", 2), numbered("pine", 2)].concat(),
        );
        entries.insert(Category::Lamp, numbered("street", 1));
        entries.insert(
            Category::Human,
            [numbered("adult", 11), numbered("child", 4), numbered("elderly", 4)].concat(),
        );
        entries.insert(
            Category::Vehicle,
            [
                group("sedan", &["sedan_red", "sedan_blue", "sedan_silver"]),
                group(
                    "hatchback",
                    &["hatchback_white", "hatchback_black", "hatchback_green", "hatchback_yellow"],
                ),
            ]
            .concat(),
        );
        Self { entries }
    }

    pub fn instances(&self, category: Category) -> &[AssetEntry] {
        &self.entries[&category]
    }

    pub fn len(&self, category: Category) -> usize {
        self.instances(category).len()
    }

    pub fn entry(&self, category: Category, model_id: usize) -> &AssetEntry {
        &self.instances(category)[model_id]
    }

    /// Checks that `id` names the category, one of its sub-groups, or one instance.
    pub fn knows(&self, category: Category, id: &str) -> bool {
        self.lookup(category, id).is_some()
    }

    fn lookup(&self, category: Category, id: &str) -> Option<Level> {
        let mut parts = id.splitn(2, '/');
        if parts.next()? != category.name() {
            return None;
        }
        let Some(rest) = parts.next() else {
            return Some(Level::Category);
        };
        let list = self.instances(category);
        if list.iter().any(|e| e.subgroup == rest) {
            return Some(Level::Subgroup);
        }
        list.iter()
            .position(|e| e.name == rest)
            .map(Level::Instance)
    }
}

#[derive(Debug, Clone, Copy)]
enum Level {
    Category,
    Subgroup,
    Instance(usize),
}

/// Turns an identifier-to-weight mapping into per-instance weights.
///
/// A category or sub-group weight is split equally over its members, more
/// specific entries override broader ones, and unmentioned instances get 0.
/// All-zero results are legal; the sampler then falls back to instance 0.
pub fn resolve_asset_weights(
    raw: &BTreeMap<String, f64>,
    category: Category,
    registry: &AssetCatalog,
) -> Result<CategoricalWeights, ConfigError> {
    let list = registry.instances(category);
    let mut weights = vec![0.0; list.len()];
    let mut levels: Vec<(u8, &str, f64, Level)> = Vec::with_capacity(raw.len());
    for (id, &w) in raw {
        let key = format!("weights.{category}");
        let level = registry
            .lookup(category, id)
            .ok_or_else(|| ConfigError::UnknownIdentifier {
                key: key.clone(),
                id: id.clone(),
            })?;
        if !w.is_finite() || w < 0.0 {
            return Err(ConfigError::Invalid {
                key: format!("{key}.{id}"),
                reason: format!("weight {w} must be finite and non-negative"),
            });
        }
        let rank = match level {
            Level::Category => 0,
            Level::Subgroup => 1,
            Level::Instance(_) => 2,
        };
        levels.push((rank, id, w, level));
    }
    levels.sort_by_key(|(rank, id, _, _)| (*rank, *id));
    for (_, id, w, level) in levels {
        match level {
            Level::Category => {
                let share = w / list.len() as f64;
                weights.iter_mut().for_each(|x| *x = share);
            }
            Level::Subgroup => {
                let sub = id.split_once('/').map(|(_, s)| s).unwrap_or_default();
                let members: Vec<usize> = (0..list.len()).filter(|&i| list[i].subgroup == sub).collect();
                let share = w / members.len() as f64;
                for i in members {
                    weights[i] = share;
                }
            }
            Level::Instance(i) => weights[i] = w,
        }
    }
    Ok(CategoricalWeights::new(weights).expect("validated above"))
}

/// Weights over [`Gait::ALL`] from a `walk`/`stand_idle` mapping.
pub fn resolve_gait_weights(raw: &BTreeMap<String, f64>) -> Result<CategoricalWeights, ConfigError> {
    let mut w = vec![0.0; Gait::ALL.len()];
    for (id, &v) in raw {
        let idx = Gait::ALL
            .iter()
            .position(|g| g.name() == id)
            .ok_or_else(|| ConfigError::UnknownIdentifier {
                key: "weights.animation".into(),
                id: id.clone(),
            })?;
        if !v.is_finite() || v < 0.0 {
            return Err(ConfigError::Invalid {
                key: format!("weights.animation.{id}"),
                reason: format!("weight {v} must be finite and non-negative"),
            });
        }
        w[idx] = v;
    }
    Ok(CategoricalWeights::new(w).expect("validated above"))
}
