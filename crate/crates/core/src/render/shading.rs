//! Material shading, sun model and exposure.

use std::f64::consts::PI;

use crate::geometry::{floor_i64, Vec3};
use crate::model::{LightingState, RenderState, WeatherState};

/// Fraction of the sun term that reaches every surface as ambient light.
pub const AMBIENT: f64 = 0.02;
/// Specular weight of non-metals, or of everything when metallicity is off.
pub const DIELECTRIC_SPECULAR: f64 = 0.04;
/// Display value of emissive surfaces, independent of scene light.
pub const EMISSIVE_DISPLAY: f64 = 0.6;
const SKY_GAIN: f64 = 1.3;
const WARM: Vec3 = Vec3::new(1.0, 0.8, 0.6);
const SUN_AZIMUTH: f64 = 2.4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    pub base_color: Vec3,
    pub metallicity: f64,
    pub roughness: f64,
    pub has_normal_detail: bool,
    pub emissive: bool,
}

/// Everything about illumination that is constant over a frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Light {
    /// Unit vector toward the sun.
    pub direction: Vec3,
    pub color: Vec3,
    pub intensity_lux: f64,
    pub sun_scale: f64,
    pub ambient_scale: f64,
}

impl Light {
    pub fn new(lighting: &LightingState, weather: &WeatherState) -> Self {
        let (direction, color) = sun(lighting.daytime_hours);
        let overcast = weather.is_overcast();
        Self {
            direction,
            color,
            intensity_lux: lighting.intensity_lux,
            sun_scale: if overcast { 0.4 } else { 1.0 },
            ambient_scale: if overcast { 2.0 } else { 1.0 },
        }
    }
}

/// Sun direction and color for a time of day in hours.
///
/// Elevation runs from the horizon at 06:00 through zenith at 12:00; below 15°
/// of altitude the light warms linearly toward `WARM`.
pub fn sun(daytime_hours: f64) -> (Vec3, Vec3) {
    let elevation = (PI * (daytime_hours - 6.0) / 12.0).clamp(0.02, PI - 0.02);
    let (se, ce) = elevation.sin_cos();
    let direction = Vec3::new(ce * SUN_AZIMUTH.cos(), ce * SUN_AZIMUTH.sin(), se);
    let altitude = elevation.min(PI - elevation);
    let limit = 15f64.to_radians();
    let color = if altitude < limit {
        let w = 1.0 - altitude / limit;
        Vec3::new(1.0, 1.0, 1.0) * (1.0 - w) + WARM * w
    } else {
        Vec3::new(1.0, 1.0, 1.0)
    };
    (direction, color)
}

pub fn luminance(c: Vec3) -> f64 {
    0.299 * c.x + 0.587 * c.y + 0.114 * c.z
}

pub fn gray(c: Vec3) -> Vec3 {
    let l = luminance(c);
    Vec3::new(l, l, l)
}

/// Blinn-Phong exponent for a roughness in (0, 1].
pub fn specular_exponent(roughness: f64) -> i32 {
    let r = roughness.max(1e-3);
    (2.0 / (r * r) - 2.0).round().clamp(1.0, 256.0) as i32
}

/// Cheap integer hash to [0, 1).
pub fn hash01(a: i64, b: i64, c: i64) -> f64 {
    let mut h = (a as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (b as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ (c as u64).wrapping_mul(0x1656_67B1_9E37_79F9);
    h ^= h >> 31;
    h = h.wrapping_mul(0xD6E8_FEB8_6659_FD93);
    h ^= h >> 32;
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Procedural normal detail: a blocky jitter keyed on the surface position.
pub fn perturb_normal(n: Vec3, p: Vec3) -> Vec3 {
    let (i, j, k) = (floor_i64(p.x * 4.0), floor_i64(p.y * 4.0), floor_i64(p.z * 4.0));
    let j3 = Vec3::new(hash01(i, j, k) - 0.5, hash01(j, k, i) - 0.5, hash01(k, i, j) - 0.5);
    (n + j3 * 0.35).normalized()
}

/// Linear radiance of a surface point.
///
/// `normal` is the geometric unit normal and `view` the unit vector toward the
/// camera; `position` only feeds the normal-detail noise.
pub fn shade_pixel(
    material: &MaterialParams,
    normal: Vec3,
    view: Vec3,
    position: Vec3,
    light: &Light,
    toggles: &RenderState,
) -> Vec3 {
    let albedo = if toggles.color { material.base_color } else { gray(material.base_color) };
    let n = if toggles.normals && material.has_normal_detail {
        perturb_normal(normal, position)
    } else {
        normal
    };
    let l = light.direction;
    let ndl = n.dot(l).max(0.0);
    let mut spec = 0.0;
    if toggles.roughness && ndl > 0.0 {
        let h = (l + view).normalized();
        let ks = if toggles.metallicity { material.metallicity } else { DIELECTRIC_SPECULAR };
        spec = ks * n.dot(h).max(0.0).powi(specular_exponent(material.roughness));
    }
    let light_color = if toggles.color { light.color } else { gray(light.color) };
    let direct = (albedo * ndl + Vec3::new(spec, spec, spec)).mul_elem(light_color);
    direct * (light.intensity_lux * light.sun_scale)
        + albedo * (AMBIENT * light.intensity_lux * light.ambient_scale)
}

/// Sky radiance along a world direction.
pub fn sky_radiance(dir: Vec3, light: &Light, overcast: bool, color: bool) -> Vec3 {
    let up = (dir.z / dir.length()).clamp(0.0, 1.0).sqrt();
    let c = if overcast {
        Vec3::new(0.62, 0.63, 0.66) * (1.0 - up) + Vec3::new(0.52, 0.53, 0.56) * up
    } else {
        Vec3::new(0.72, 0.82, 0.95) * (1.0 - up) + Vec3::new(0.28, 0.46, 0.88) * up
    };
    let c = c.mul_elem(light.color) * (SKY_GAIN * light.intensity_lux);
    if color {
        c
    } else {
        gray(c)
    }
}

/// Scales linear radiance by the exposure gain and quantizes to bytes.
pub fn apply_exposure(linear: Vec3, gain: f64) -> [u8; 3] {
    [to_byte(linear.x * gain), to_byte(linear.y * gain), to_byte(linear.z * gain)]
}

pub fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5) as u8
}
