//! The three built-in continual-learning scenarios.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{ConfigDocument, PerCategory, StreamConfig, SubSequenceBlock};
use crate::error::ConfigError;
use crate::model::{sample_world_state, WeatherKind, WorldState};
use crate::rng::{derive_source, SeedPath};

pub const PRESET_TILES: u64 = 150;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    IncrementalClass,
    IncrementalLighting,
    IncrementalWeather,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::IncrementalClass, Preset::IncrementalLighting, Preset::IncrementalWeather];

    pub fn name(self) -> &'static str {
        match self {
            Preset::IncrementalClass => "incremental_class",
            Preset::IncrementalLighting => "incremental_lighting",
            Preset::IncrementalWeather => "incremental_weather",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| ConfigError::UnknownPreset(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl FromStr for Split {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(ConfigError::Invalid { key: "split".into(), reason: format!("`{other}` is neither train nor test") }),
        }
    }
}

/// Root seed of the test split belonging to train seed `seed`. Never equal to it.
pub fn test_seed(seed: u64) -> u64 {
    let s = derive_source(seed, &SeedPath::root("test_split", 0)).next_u64();
    if s == seed {
        !s
    } else {
        s
    }
}

pub const LIGHTING_SCHEDULE: [f64; 5] = [76.8, 19.2, 9.6, 2.4, 1.2];

/// Existence vector of class-incremental sub-sequence `t` (zero-based).
///
/// Training sub-sequences show one foreground class each; the test split
/// accumulates every class introduced so far.
pub fn class_existence(t: usize, split: Split) -> [f64; 5] {
    let mut e = [0.0; 5];
    e[0] = 1.0;
    match split {
        Split::Train => e[t + 1] = 1.0,
        Split::Test => e[1..=t + 1].iter_mut().for_each(|x| *x = 1.0),
    }
    e
}

/// Collapses the weather and lighting distributions of `block` onto `state`.
fn pin_weather(block: &mut SubSequenceBlock, state: &WorldState) {
    let env = &mut block.environment;
    let w = &state.weather;
    env.weather = one_hot_weather(w.kind);
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    env.fog_with_precipitation = flag(w.fog_active);
    env.clouds_with_precipitation = flag(w.clouds_active);
    env.density = [w.density; 2];
    env.ground_density = [w.ground_density; 2];
    env.lens_effect = [w.lens_effect; 2];
}

fn pin_lighting(block: &mut SubSequenceBlock, state: &WorldState) {
    block.environment.intensity_lux = [state.lighting.intensity_lux; 2];
    block.environment.daytime_hours = [state.lighting.daytime_hours; 2];
}

fn one_hot_weather(kind: WeatherKind) -> std::collections::BTreeMap<String, f64> {
    WeatherKind::ALL
        .iter()
        .map(|k| (k.name().to_string(), if *k == kind { 1.0 } else { 0.0 }))
        .collect()
}

/// World state the first sub-sequence draws from the default distributions.
fn initial_state(doc: &ConfigDocument) -> WorldState {
    let first = StreamConfig::from_document(doc.clone()).expect("preset documents are valid");
    sample_world_state(&first.schedule.subsequences[0], doc.seed, 0)
}

/// Builds one of the scenario configurations.
pub fn build_preset(preset: Preset, seed: u64, split: Split) -> StreamConfig {
    let seed = match split {
        Split::Train => seed,
        Split::Test => test_seed(seed),
    };
    let base = SubSequenceBlock { tiles: PRESET_TILES, ..SubSequenceBlock::default() };
    let mut doc = ConfigDocument { seed, subsequences: vec![base.clone()], ..ConfigDocument::default() };
    match preset {
        Preset::IncrementalClass => {
            let pinned = initial_state(&doc);
            doc.subsequences = (0..4)
                .map(|t| {
                    let mut b = base.clone();
                    b.presence = PerCategory::from_array(class_existence(t, split));
                    if t > 0 {
                        pin_weather(&mut b, &pinned);
                        pin_lighting(&mut b, &pinned);
                    }
                    b
                })
                .collect();
        }
        Preset::IncrementalLighting => {
            doc.subsequences = LIGHTING_SCHEDULE
                .iter()
                .map(|&lux| {
                    let mut b = base.clone();
                    b.environment.weather = one_hot_weather(WeatherKind::Clear);
                    b.environment.intensity_lux = [lux; 2];
                    b.environment.daytime_hours = [12.0; 2];
                    b
                })
                .collect();
        }
        Preset::IncrementalWeather => {
            let pinned = initial_state(&doc);
            doc.subsequences = WeatherKind::ALL
                .iter()
                .map(|&kind| {
                    let mut b = base.clone();
                    b.environment.weather = one_hot_weather(kind);
                    pin_lighting(&mut b, &pinned);
                    b
                })
                .collect();
        }
    }
    StreamConfig::from_document(doc).expect("preset documents are valid")
}
