//! Parameters and per-sub-sequence random variables of the scene model.
//!
//! A stream is a chain of sub-sequences. Each one carries a full parameter set
//! ([`SubSequenceParams`]) from which the sub-sequence-level variables are drawn
//! once ([`WorldState`]: existence gates, weather, lighting, render toggles).
//! Per-tile variables (layouts, counts, asset choices, placement) are drawn by
//! the tile engine; vehicle motion and the camera by the dynamics module.

use serde::{Deserialize, Serialize};

use crate::assets::Category;
use crate::render::{CameraIntrinsics, RenderModes};
use crate::rng::{
    derive_source, sample_bernoulli, sample_categorical, sample_uniform, CategoricalWeights,
    RandomSource, SeedPath,
};

/// Closed interval `[lo, hi]`; `lo == hi` is a delta distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub const fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn sample(&self, src: &mut RandomSource) -> f64 {
        sample_uniform(src, self.lo, self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        (self.lo..=self.hi).contains(&v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeatherKind {
    Clear,
    Rain,
    Snow,
    Fog,
    Overcast,
}

impl WeatherKind {
    /// Order of the weather probability vector.
    pub const ALL: [WeatherKind; 5] = [
        WeatherKind::Clear,
        WeatherKind::Rain,
        WeatherKind::Snow,
        WeatherKind::Fog,
        WeatherKind::Overcast,
    ];

    pub fn is_precipitation(self) -> bool {
        matches!(self, WeatherKind::Rain | WeatherKind::Snow)
    }

    pub fn name(self) -> &'static str {
        match self {
            WeatherKind::Clear => "clear",
            WeatherKind::Rain => "rain",
            WeatherKind::Snow => "snow",
            WeatherKind::Fog => "fog",
            WeatherKind::Overcast => "overcast",
        }
    }
}

/// Street layout weights per family plus the straight-run length distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct StreetParams {
    pub straight: CategoricalWeights,
    pub curves: CategoricalWeights,
    pub crossings: CategoricalWeights,
    pub run_mean: f64,
    pub run_sd: f64,
}

impl Default for StreetParams {
    fn default() -> Self {
        Self {
            straight: CategoricalWeights::uniform(1),
            curves: CategoricalWeights::uniform(2),
            crossings: CategoricalWeights::uniform(3),
            run_mean: 4.0,
            run_sd: 0.45,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeatherParams {
    /// Over (clear, rain, snow, fog, overcast); sums to 1.
    pub probabilities: [f64; 5],
    pub fog_with_precipitation: f64,
    pub clouds_with_precipitation: f64,
    pub density: Bounds,
    pub ground_density: Bounds,
    pub lens_effect: Bounds,
}

impl Default for WeatherParams {
    fn default() -> Self {
        Self {
            probabilities: [0.2; 5],
            fog_with_precipitation: 0.5,
            clouds_with_precipitation: 0.5,
            density: Bounds::new(0.0, 1.0),
            ground_density: Bounds::new(0.0, 1.0),
            lens_effect: Bounds::new(0.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LightingParams {
    pub intensity_lux: Bounds,
    pub daytime_hours: Bounds,
}

impl Default for LightingParams {
    fn default() -> Self {
        Self {
            intensity_lux: Bounds::new(19.2, 38.4),
            daytime_hours: Bounds::new(8.0, 18.0),
        }
    }
}

/// Activation probabilities of the four material aspects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderParams {
    pub metallicity: f64,
    pub roughness: f64,
    pub normals: f64,
    pub color: f64,
}

impl Default for RenderParams {
    fn default() -> Self {
        Self {
            metallicity: 1.0,
            roughness: 1.0,
            normals: 1.0,
            color: 1.0,
        }
    }
}

/// Everything that parametrizes one sub-sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SubSequenceParams {
    pub street: StreetParams,
    /// Resolved per-instance weights, indexed by [`Category::index`].
    pub assets: [CategoricalWeights; 5],
    /// Existence probabilities over (B, Tr, Lp, H, V).
    pub existence: [f64; 5],
    /// Per-tile maxima over (B, Tr, Lp, H, V); counts are uniform on `0..=max`.
    pub max_counts: [u32; 5],
    pub weather: WeatherParams,
    pub lighting: LightingParams,
    pub render: RenderParams,
    pub animation: CategoricalWeights,
    pub vehicle_speed: Bounds,
    pub n_tiles: u64,
}

impl SubSequenceParams {
    pub fn max_count(&self, c: Category) -> u32 {
        self.max_counts[c.index()]
    }
}

/// Stream-wide settings plus the ordered sub-sequence parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamSchedule {
    pub seed: u64,
    pub camera: CameraIntrinsics,
    pub camera_height: f64,
    pub cruise_speed: f64,
    pub window_size: usize,
    pub modes: RenderModes,
    /// Patch extraction runs on every `capture_stride`-th captured frame.
    pub capture_stride: u32,
    pub subsequences: Vec<SubSequenceParams>,
}

impl StreamSchedule {
    pub fn total_tiles(&self) -> u64 {
        self.subsequences.iter().map(|s| s.n_tiles).sum()
    }

    /// Zero-based sub-sequence index active for newly spawned tile `tile_index`.
    /// Tiles past the end of the schedule keep the last parameter set.
    pub fn subsequence_of_tile(&self, tile_index: u64) -> usize {
        let mut end = 0;
        for (i, s) in self.subsequences.iter().enumerate() {
            end += s.n_tiles;
            if tile_index < end {
                return i;
            }
        }
        self.subsequences.len() - 1
    }

    /// First tile index of zero-based sub-sequence `t`.
    pub fn first_tile(&self, t: usize) -> u64 {
        self.subsequences[..t].iter().map(|s| s.n_tiles).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherState {
    pub kind: WeatherKind,
    pub fog_active: bool,
    pub clouds_active: bool,
    pub density: f64,
    pub ground_density: f64,
    pub lens_effect: f64,
}

impl WeatherState {
    pub fn clear() -> Self {
        Self {
            kind: WeatherKind::Clear,
            fog_active: false,
            clouds_active: false,
            density: 0.0,
            ground_density: 0.0,
            lens_effect: 0.0,
        }
    }

    pub fn is_overcast(&self) -> bool {
        self.kind == WeatherKind::Overcast || self.clouds_active
    }

    pub fn is_foggy(&self) -> bool {
        self.kind == WeatherKind::Fog || self.fog_active
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightingState {
    pub intensity_lux: f64,
    pub daytime_hours: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderState {
    pub metallicity: bool,
    pub roughness: bool,
    pub normals: bool,
    pub color: bool,
}

impl RenderState {
    pub const ALL_ON: RenderState = RenderState {
        metallicity: true,
        roughness: true,
        normals: true,
        color: true,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub existence: [bool; 5],
    pub weather: WeatherState,
    pub lighting: LightingState,
    pub render: RenderState,
}

impl WorldState {
    pub fn exists(&self, c: Category) -> bool {
        self.existence[c.index()]
    }
}

pub fn sample_existence(params: &SubSequenceParams, src: &mut RandomSource) -> [bool; 5] {
    params.existence.map(|p| sample_bernoulli(src, p))
}

/// Draws the weather kind, co-occurrence flags and effect strengths.
///
/// All six draws are consumed regardless of outcome so the schema stays uniform.
pub fn sample_weather(params: &SubSequenceParams, src: &mut RandomSource) -> WeatherState {
    let w = &params.weather;
    let kind_weights = CategoricalWeights::new(w.probabilities.to_vec()).expect("validated probabilities");
    let kind = WeatherKind::ALL[sample_categorical(src, &kind_weights)];
    let fog_draw = sample_bernoulli(src, w.fog_with_precipitation);
    let cloud_draw = sample_bernoulli(src, w.clouds_with_precipitation);
    let density = w.density.sample(src);
    let ground_density = w.ground_density.sample(src);
    let lens_effect = w.lens_effect.sample(src);
    WeatherState {
        kind,
        fog_active: kind == WeatherKind::Fog || (kind.is_precipitation() && fog_draw),
        clouds_active: kind == WeatherKind::Overcast || (kind.is_precipitation() && cloud_draw),
        density,
        ground_density,
        lens_effect,
    }
}

pub fn sample_lighting(params: &SubSequenceParams, src: &mut RandomSource) -> LightingState {
    LightingState {
        intensity_lux: params.lighting.intensity_lux.sample(src),
        daytime_hours: params.lighting.daytime_hours.sample(src),
    }
}

pub fn sample_render_toggles(params: &SubSequenceParams, src: &mut RandomSource) -> RenderState {
    let r = &params.render;
    RenderState {
        metallicity: sample_bernoulli(src, r.metallicity),
        roughness: sample_bernoulli(src, r.roughness),
        normals: sample_bernoulli(src, r.normals),
        color: sample_bernoulli(src, r.color),
    }
}

/// Per-tile counts over (B, Tr, Lp, H, V). Gated categories get 0 whatever their maximum.
pub fn sample_object_counts(
    params: &SubSequenceParams,
    existence: &[bool; 5],
    src: &mut RandomSource,
) -> [u32; 5] {
    let mut counts = [0; 5];
    for c in Category::ALL {
        let i = c.index();
        let draw = src.below(u64::from(params.max_counts[i]) + 1) as u32;
        if existence[i] {
            counts[i] = draw;
        }
    }
    counts
}

/// Seed path of sub-sequence `t` (zero-based).
pub fn subsequence_path(t: usize) -> SeedPath {
    SeedPath::root("subseq", t as u64)
}

/// Samples all sub-sequence-level variables of sub-sequence `t`.
pub fn sample_world_state(params: &SubSequenceParams, seed: u64, t: usize) -> WorldState {
    let base = subsequence_path(t);
    let src = |label: &'static str| derive_source(seed, &base.child(label, 0));
    WorldState {
        existence: sample_existence(params, &mut src("existence")),
        weather: sample_weather(params, &mut src("weather")),
        lighting: sample_lighting(params, &mut src("lighting")),
        render: sample_render_toggles(params, &mut src("render")),
    }
}

/// Camera vehicle model, drawn once for the stream and carried across sub-sequences.
pub fn sample_camera_model(params: &SubSequenceParams, seed: u64) -> usize {
    let mut src = derive_source(seed, &SeedPath::root("camera_model", 0));
    sample_categorical(&mut src, &params.assets[Category::Vehicle.index()])
}
