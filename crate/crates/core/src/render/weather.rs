//! Display-space weather effects: fog, precipitation particles, lens drops.
//!
//! These run after exposure and touch only the color buffer, so labels,
//! depth and normals are weather-invariant by construction.

use crate::model::{WeatherKind, WeatherState};
use crate::rng::{sample_uniform, RandomSource};

/// Fog extinction per meter at density 1.
pub const FOG_EXTINCTION: f64 = 0.05;
const RAIN_STREAKS: f64 = 1200.0;
const SNOW_FLAKES: f64 = 900.0;
const LENS_DROPS: f64 = 10.0;

/// Fraction of the fog color mixed into a pixel at `range` meters.
pub fn fog_factor(density: f64, range: f64) -> f64 {
    1.0 - (-density * FOG_EXTINCTION * range).exp()
}

/// Applies the weather of `state` to an RGB display buffer in place.
///
/// `range` holds per-pixel distances in meters (sky pixels carry the far clip);
/// `fog_color` is the display value fog converges to.
pub fn apply_weather(
    color: &mut [u8],
    range: &[f32],
    width: usize,
    height: usize,
    state: &WeatherState,
    fog_color: [f64; 3],
    src: &mut RandomSource,
) {
    if state.is_foggy() && state.density > 0.0 {
        // runs of equal range (all of the sky) share one exponential
        let mut last = (f32::NAN, 0.0);
        for (px, &r) in color.chunks_exact_mut(3).zip(range) {
            if r != last.0 {
                last = (r, fog_factor(state.density, f64::from(r)));
            }
            let f = last.1;
            for c in 0..3 {
                let v = f64::from(px[c]) * (1.0 - f) + fog_color[c] * 255.0 * f;
                px[c] = (v + 0.5).clamp(0.0, 255.0) as u8;
            }
        }
    }
    match state.kind {
        WeatherKind::Rain => {
            let n = (state.density * RAIN_STREAKS).round() as usize;
            for _ in 0..n {
                let x = sample_uniform(src, 0.0, width as f64);
                let y = sample_uniform(src, -20.0, height as f64);
                let len = sample_uniform(src, 8.0, 22.0);
                let steps = len.ceil() as usize;
                for s in 0..steps {
                    let t = s as f64;
                    blend(color, width, height, x + 0.15 * t, y + t, [205.0, 208.0, 215.0], 0.35);
                }
            }
        }
        WeatherKind::Snow => {
            let n = (state.density * SNOW_FLAKES).round() as usize;
            for _ in 0..n {
                let x = sample_uniform(src, 0.0, width as f64);
                let y = sample_uniform(src, 0.0, height as f64);
                let r = sample_uniform(src, 0.8, 2.2);
                let ri = r.ceil() as i64;
                for dy in -ri..=ri {
                    for dx in -ri..=ri {
                        let d2 = (dx * dx + dy * dy) as f64;
                        if d2 <= r * r {
                            blend(color, width, height, x + dx as f64, y + dy as f64, [245.0, 246.0, 250.0], 0.85);
                        }
                    }
                }
            }
        }
        _ => {}
    }
    if state.kind.is_precipitation() && state.lens_effect > 0.0 {
        lens_drops(color, width, height, state.lens_effect, src);
    }
}

fn blend(color: &mut [u8], width: usize, height: usize, x: f64, y: f64, c: [f64; 3], alpha: f64) {
    if x < 0.0 || y < 0.0 {
        return;
    }
    let (i, j) = (x as usize, y as usize);
    if i >= width || j >= height {
        return;
    }
    let p = &mut color[(j * width + i) * 3..][..3];
    for k in 0..3 {
        p[k] = (f64::from(p[k]) * (1.0 - alpha) + c[k] * alpha + 0.5) as u8;
    }
}

/// Water drops on the lens: each disc shows a flipped, slightly brightened view
/// of its surroundings.
fn lens_drops(color: &mut [u8], width: usize, height: usize, strength: f64, src: &mut RandomSource) {
    let n = (strength * LENS_DROPS).round() as usize;
    for _ in 0..n {
        let cx = sample_uniform(src, 0.0, width as f64);
        let cy = sample_uniform(src, 0.0, height as f64);
        let r = sample_uniform(src, 12.0, 45.0);
        let (x0, x1) = ((cx - r).floor().max(0.0) as usize, ((cx + r).ceil() as usize).min(width));
        let (y0, y1) = ((cy - r).floor().max(0.0) as usize, ((cy + r).ceil() as usize).min(height));
        if x0 >= x1 || y0 >= y1 {
            continue;
        }
        let patch: Vec<u8> = (y0..y1)
            .flat_map(|j| color[(j * width + x0) * 3..(j * width + x1) * 3].to_vec())
            .collect();
        let pw = x1 - x0;
        for j in y0..y1 {
            for i in x0..x1 {
                let (dx, dy) = (i as f64 + 0.5 - cx, j as f64 + 0.5 - cy);
                let d2 = (dx * dx + dy * dy) / (r * r);
                if d2 > 1.0 {
                    continue;
                }
                let sx = (cx - dx * 0.6).clamp(x0 as f64, (x1 - 1) as f64) as usize - x0;
                let sy = (cy - dy * 0.6).clamp(y0 as f64, (y1 - 1) as f64) as usize - y0;
                let s = &patch[(sy * pw + sx) * 3..][..3];
                let edge = d2 * d2;
                let p = &mut color[(j * width + i) * 3..][..3];
                for k in 0..3 {
                    let refr = (f64::from(s[k]) * 1.08 + 6.0).min(255.0);
                    let v = refr * (1.0 - edge * 0.5) + f64::from(p[k]) * edge * 0.5;
                    p[k] = (v + 0.5).min(255.0) as u8;
                }
            }
        }
    }
}
