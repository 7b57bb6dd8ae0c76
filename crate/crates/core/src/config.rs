//! JSON configuration documents and their validation into a [`StreamSchedule`].
//!
//! Every key is optional except `subsequences`; omitted keys take the defaults
//! below. Unknown keys are rejected. The document is organised like the editor
//! of a scene generator: global camera and stream settings, then one block per
//! sub-sequence with street sampling, environment, material, presence, weight
//! and count sections.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assets::{resolve_asset_weights, resolve_gait_weights, AssetCatalog, Category};
use crate::error::ConfigError;
use crate::model::{
    Bounds, LightingParams, RenderParams, StreamSchedule, StreetParams, SubSequenceParams,
    WeatherKind, WeatherParams,
};
use crate::render::{CameraIntrinsics, RenderModes};
use crate::rng::CategoricalWeights;
use crate::tiles::LayoutKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigDocument {
    pub seed: u64,
    pub camera: CameraBlock,
    /// Camera vehicle cruise speed in m/s.
    pub cruise_speed: f64,
    /// Number of simultaneously active tiles.
    pub window_size: usize,
    pub modes: Vec<String>,
    /// Patches are cut from every n-th rendered frame.
    pub capture_stride: u32,
    pub subsequences: Vec<SubSequenceBlock>,
}

impl Default for ConfigDocument {
    fn default() -> Self {
        Self {
            seed: 0,
            camera: CameraBlock::default(),
            cruise_speed: 8.0,
            window_size: 7,
            modes: ["color", "semantic", "depth", "normal"].map(String::from).to_vec(),
            capture_stride: 1,
            subsequences: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraBlock {
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    pub fov_horizontal_deg: f64,
    pub shutter_seconds: f64,
    pub iso: f64,
    pub aperture: f64,
    pub near: f64,
    pub far: f64,
    pub mount_height: f64,
}

impl Default for CameraBlock {
    fn default() -> Self {
        let c = CameraIntrinsics::default();
        Self {
            width: c.width,
            height: c.height,
            fps: c.fps,
            fov_horizontal_deg: c.fov_horizontal.to_degrees().round(),
            shutter_seconds: c.shutter_seconds,
            iso: c.iso,
            aperture: c.aperture,
            near: c.near,
            far: c.far,
            mount_height: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SubSequenceBlock {
    pub tiles: u64,
    pub street: StreetBlock,
    pub environment: EnvironmentBlock,
    pub material: MaterialBlock,
    pub presence: PerCategory<f64>,
    pub weights: WeightsBlock,
    pub counts: PerCategory<u32>,
    /// Speed range of auxiliary vehicles in m/s.
    pub vehicle_speed: [f64; 2],
}

impl Default for SubSequenceBlock {
    fn default() -> Self {
        Self {
            tiles: 150,
            street: StreetBlock::default(),
            environment: EnvironmentBlock::default(),
            material: MaterialBlock::default(),
            presence: PerCategory::splat(1.0),
            weights: WeightsBlock::default(),
            counts: PerCategory { building: 4, tree: 6, lamp: 4, human: 8, vehicle: 2 },
            vehicle_speed: [2.0, 14.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerCategory<T> {
    pub building: T,
    pub tree: T,
    pub lamp: T,
    pub human: T,
    pub vehicle: T,
}

impl<T: Copy> PerCategory<T> {
    pub fn splat(v: T) -> Self {
        Self { building: v, tree: v, lamp: v, human: v, vehicle: v }
    }

    /// Values in [`Category::ALL`] order.
    pub fn to_array(&self) -> [T; 5] {
        [self.building, self.tree, self.lamp, self.human, self.vehicle]
    }

    pub fn from_array(a: [T; 5]) -> Self {
        Self { building: a[0], tree: a[1], lamp: a[2], human: a[3], vehicle: a[4] }
    }
}

impl<T: Copy + Default> Default for PerCategory<T> {
    fn default() -> Self {
        Self::splat(T::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StreetBlock {
    /// Layout name to weight, one map per family. Unlisted layouts get 0.
    pub straight: BTreeMap<String, f64>,
    pub curves: BTreeMap<String, f64>,
    pub crossings: BTreeMap<String, f64>,
    pub run_mean: f64,
    pub run_sd: f64,
}

fn unit_map(names: impl IntoIterator<Item = &'static str>) -> BTreeMap<String, f64> {
    names.into_iter().map(|n| (n.to_string(), 1.0)).collect()
}

impl Default for StreetBlock {
    fn default() -> Self {
        Self {
            straight: unit_map(LayoutKind::STRAIGHTS.map(LayoutKind::name)),
            curves: unit_map(LayoutKind::CURVES.map(LayoutKind::name)),
            crossings: unit_map(LayoutKind::CROSSINGS.map(LayoutKind::name)),
            run_mean: 4.0,
            run_sd: 0.45,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvironmentBlock {
    /// Probability per weather kind; must sum to 1.
    pub weather: BTreeMap<String, f64>,
    pub fog_with_precipitation: f64,
    pub clouds_with_precipitation: f64,
    pub density: [f64; 2],
    pub ground_density: [f64; 2],
    pub lens_effect: [f64; 2],
    pub intensity_lux: [f64; 2],
    pub daytime_hours: [f64; 2],
}

impl Default for EnvironmentBlock {
    fn default() -> Self {
        let w = WeatherParams::default();
        let l = LightingParams::default();
        Self {
            weather: WeatherKind::ALL.iter().zip(w.probabilities).map(|(k, p)| (k.name().to_string(), p)).collect(),
            fog_with_precipitation: w.fog_with_precipitation,
            clouds_with_precipitation: w.clouds_with_precipitation,
            density: [w.density.lo, w.density.hi],
            ground_density: [w.ground_density.lo, w.ground_density.hi],
            lens_effect: [w.lens_effect.lo, w.lens_effect.hi],
            intensity_lux: [l.intensity_lux.lo, l.intensity_lux.hi],
            daytime_hours: [l.daytime_hours.lo, l.daytime_hours.hi],
        }
    }
}

/// Activation probabilities of the material aspects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialBlock {
    pub metallicity: f64,
    pub roughness: f64,
    pub normals: f64,
    pub color: f64,
}

impl Default for MaterialBlock {
    fn default() -> Self {
        Self { metallicity: 1.0, roughness: 1.0, normals: 1.0, color: 1.0 }
    }
}

/// Identifier-to-weight maps. Keys may name a category, a sub-group
/// (`tree/birch`) or an instance (`tree/birch_01`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightsBlock {
    pub building: BTreeMap<String, f64>,
    pub tree: BTreeMap<String, f64>,
    pub lamp: BTreeMap<String, f64>,
    pub human: BTreeMap<String, f64>,
    pub vehicle: BTreeMap<String, f64>,
    pub animation: BTreeMap<String, f64>,
}

impl WeightsBlock {
    pub fn category(&self, c: Category) -> &BTreeMap<String, f64> {
        match c {
            Category::Building => &self.building,
            Category::Tree => &self.tree,
            Category::Lamp => &self.lamp,
            Category::Human => &self.human,
            Category::Vehicle => &self.vehicle,
        }
    }
}

impl Default for WeightsBlock {
    fn default() -> Self {
        let one = |c: Category| unit_map([c.name()]);
        Self {
            building: one(Category::Building),
            tree: one(Category::Tree),
            lamp: one(Category::Lamp),
            human: one(Category::Human),
            vehicle: one(Category::Vehicle),
            animation: unit_map(["walk", "stand_idle"]),
        }
    }
}

/// A validated configuration: the document with defaults filled in, its
/// resolved schedule and a content hash.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamConfig {
    pub document: ConfigDocument,
    pub schedule: StreamSchedule,
    /// SHA-256 over the canonical JSON of `document`.
    pub hash: String,
}

impl StreamConfig {
    pub fn from_document(document: ConfigDocument) -> Result<Self, ConfigError> {
        let schedule = validate(&document)?;
        let canonical = serde_json::to_vec(&document).expect("documents always serialize");
        let hash = hex::encode(Sha256::digest(&canonical));
        Ok(Self { document, schedule, hash })
    }

    /// Same configuration under a different root seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut d = self.document.clone();
        d.seed = seed;
        Self::from_document(d).expect("only the seed changed")
    }

    /// Canonical JSON with every default spelled out.
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.document).expect("documents always serialize")
    }
}

/// Parses and validates a JSON configuration document.
pub fn parse_config(text: &str) -> Result<StreamConfig, ConfigError> {
    let document: ConfigDocument = serde_json::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    StreamConfig::from_document(document)
}

fn probability(key: &str, v: f64) -> Result<f64, ConfigError> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(ConfigError::Probability { key: key.into(), value: v })
    }
}

fn bounds(key: &str, b: [f64; 2]) -> Result<Bounds, ConfigError> {
    let [lo, hi] = b;
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(ConfigError::Invalid { key: key.into(), reason: "bounds must be finite".into() });
    }
    if lo > hi {
        return Err(ConfigError::Bounds { key: key.into(), lo, hi });
    }
    Ok(Bounds::new(lo, hi))
}

fn unit_bounds(key: &str, b: [f64; 2]) -> Result<Bounds, ConfigError> {
    let r = bounds(key, b)?;
    probability(key, r.lo)?;
    probability(key, r.hi)?;
    Ok(r)
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::Invalid { key: key.into(), reason: format!("{v} must be positive") })
    }
}

fn layout_weights(key: &str, raw: &BTreeMap<String, f64>, family: &[LayoutKind]) -> Result<CategoricalWeights, ConfigError> {
    let mut w = vec![0.0; family.len()];
    for (name, &v) in raw {
        let i = family
            .iter()
            .position(|k| k.name() == name)
            .ok_or_else(|| ConfigError::UnknownIdentifier { key: key.into(), id: name.clone() })?;
        if !v.is_finite() || v < 0.0 {
            return Err(ConfigError::Invalid { key: format!("{key}.{name}"), reason: format!("weight {v} must be finite and non-negative") });
        }
        w[i] = v;
    }
    Ok(CategoricalWeights::new(w).expect("validated above"))
}

fn validate(doc: &ConfigDocument) -> Result<StreamSchedule, ConfigError> {
    let c = &doc.camera;
    if c.width == 0 || c.height == 0 {
        return Err(ConfigError::Invalid { key: "camera.width".into(), reason: "resolution must be non-zero".into() });
    }
    positive("camera.fps", c.fps)?;
    if !(c.fov_horizontal_deg > 0.0 && c.fov_horizontal_deg < 180.0) {
        return Err(ConfigError::Invalid { key: "camera.fov_horizontal_deg".into(), reason: "must lie in (0, 180)".into() });
    }
    positive("camera.shutter_seconds", c.shutter_seconds)?;
    positive("camera.iso", c.iso)?;
    positive("camera.aperture", c.aperture)?;
    positive("camera.near", c.near)?;
    positive("camera.mount_height", c.mount_height)?;
    if c.far <= c.near || c.far / crate::render::DEPTH_SCALE >= f64::from(u16::MAX) {
        return Err(ConfigError::Invalid { key: "camera.far".into(), reason: "must exceed near and stay below the 16-bit depth range".into() });
    }
    positive("cruise_speed", doc.cruise_speed)?;
    if doc.window_size < 3 {
        return Err(ConfigError::Invalid { key: "window_size".into(), reason: "at least 3 tiles are needed".into() });
    }
    if doc.capture_stride == 0 {
        return Err(ConfigError::Invalid { key: "capture_stride".into(), reason: "must be at least 1".into() });
    }
    let mut modes = RenderModes { color: false, semantic: false, depth: false, normal: false };
    for m in &doc.modes {
        match m.as_str() {
            "color" => modes.color = true,
            "semantic" => modes.semantic = true,
            "depth" => modes.depth = true,
            "normal" => modes.normal = true,
            other => return Err(ConfigError::UnknownIdentifier { key: "modes".into(), id: other.into() }),
        }
    }
    if doc.subsequences.is_empty() {
        return Err(ConfigError::Invalid { key: "subsequences".into(), reason: "at least one sub-sequence is required".into() });
    }
    let catalog = AssetCatalog::builtin();
    let subsequences = doc
        .subsequences
        .iter()
        .enumerate()
        .map(|(i, s)| validate_subsequence(&format!("subsequences[{i}]"), s, &catalog))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(StreamSchedule {
        seed: doc.seed,
        camera: CameraIntrinsics {
            width: c.width,
            height: c.height,
            fps: c.fps,
            fov_horizontal: c.fov_horizontal_deg.to_radians(),
            shutter_seconds: c.shutter_seconds,
            iso: c.iso,
            aperture: c.aperture,
            near: c.near,
            far: c.far,
        },
        camera_height: c.mount_height,
        cruise_speed: doc.cruise_speed,
        window_size: doc.window_size,
        modes,
        capture_stride: doc.capture_stride,
        subsequences,
    })
}

fn validate_subsequence(key: &str, s: &SubSequenceBlock, catalog: &AssetCatalog) -> Result<SubSequenceParams, ConfigError> {
    if s.tiles == 0 {
        return Err(ConfigError::Invalid { key: format!("{key}.tiles"), reason: "must be at least 1".into() });
    }
    let st = &s.street;
    let street = StreetParams {
        straight: layout_weights(&format!("{key}.street.straight"), &st.straight, &LayoutKind::STRAIGHTS)?,
        curves: layout_weights(&format!("{key}.street.curves"), &st.curves, &LayoutKind::CURVES)?,
        crossings: layout_weights(&format!("{key}.street.crossings"), &st.crossings, &LayoutKind::CROSSINGS)?,
        run_mean: positive(&format!("{key}.street.run_mean"), st.run_mean)?,
        run_sd: {
            let k = format!("{key}.street.run_sd");
            if !(st.run_sd.is_finite() && st.run_sd >= 0.0) {
                return Err(ConfigError::Invalid { key: k, reason: "must be non-negative".into() });
            }
            st.run_sd
        },
    };

    let e = &s.environment;
    let wkey = format!("{key}.environment.weather");
    let mut probabilities = [0.0; 5];
    for (name, &p) in &e.weather {
        let i = WeatherKind::ALL
            .iter()
            .position(|k| k.name() == name)
            .ok_or_else(|| ConfigError::UnknownIdentifier { key: wkey.clone(), id: name.clone() })?;
        probabilities[i] = probability(&format!("{wkey}.{name}"), p)?;
    }
    let sum: f64 = probabilities.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(ConfigError::ProbabilitySum { key: wkey, sum });
    }
    let ek = |n: &str| format!("{key}.environment.{n}");
    let weather = WeatherParams {
        probabilities,
        fog_with_precipitation: probability(&ek("fog_with_precipitation"), e.fog_with_precipitation)?,
        clouds_with_precipitation: probability(&ek("clouds_with_precipitation"), e.clouds_with_precipitation)?,
        density: unit_bounds(&ek("density"), e.density)?,
        ground_density: unit_bounds(&ek("ground_density"), e.ground_density)?,
        lens_effect: unit_bounds(&ek("lens_effect"), e.lens_effect)?,
    };
    let intensity_lux = bounds(&ek("intensity_lux"), e.intensity_lux)?;
    if intensity_lux.lo <= 0.0 {
        return Err(ConfigError::Invalid { key: ek("intensity_lux"), reason: "intensity must be positive".into() });
    }
    let daytime_hours = bounds(&ek("daytime_hours"), e.daytime_hours)?;
    if daytime_hours.lo < 0.0 || daytime_hours.hi > 24.0 {
        return Err(ConfigError::Invalid { key: ek("daytime_hours"), reason: "hours must lie in [0, 24]".into() });
    }

    let m = &s.material;
    let mk = |n: &str| format!("{key}.material.{n}");
    let render = RenderParams {
        metallicity: probability(&mk("metallicity"), m.metallicity)?,
        roughness: probability(&mk("roughness"), m.roughness)?,
        normals: probability(&mk("normals"), m.normals)?,
        color: probability(&mk("color"), m.color)?,
    };

    let mut existence = [0.0; 5];
    for (c, p) in Category::ALL.iter().zip(s.presence.to_array()) {
        existence[c.index()] = probability(&format!("{key}.presence.{c}"), p)?;
    }
    let assets = Category::ALL
        .map(|c| resolve_asset_weights(s.weights.category(c), c, catalog).map_err(|err| prefix(key, err)));
    let [b, tr, lp, h, v] = assets;
    let assets = [b?, tr?, lp?, h?, v?];
    let animation = resolve_gait_weights(&s.weights.animation).map_err(|err| prefix(key, err))?;
    let vehicle_speed = bounds(&format!("{key}.vehicle_speed"), s.vehicle_speed)?;
    if vehicle_speed.lo <= 0.0 {
        return Err(ConfigError::Invalid { key: format!("{key}.vehicle_speed"), reason: "speeds must be positive".into() });
    }

    Ok(SubSequenceParams {
        street,
        assets,
        existence,
        max_counts: s.counts.to_array(),
        weather,
        lighting: LightingParams { intensity_lux, daytime_hours },
        render,
        animation,
        vehicle_speed,
        n_tiles: s.tiles,
    })
}

fn prefix(key: &str, err: ConfigError) -> ConfigError {
    match err {
        ConfigError::UnknownIdentifier { key: k, id } => ConfigError::UnknownIdentifier { key: format!("{key}.{k}"), id },
        ConfigError::Invalid { key: k, reason } => ConfigError::Invalid { key: format!("{key}.{k}"), reason },
        other => other,
    }
}
