//! Headless software renderer producing color, semantic, depth and normal buffers.

mod camera;
pub mod mesh;
pub mod raster;
pub mod shading;
pub mod weather;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use camera::{CameraIntrinsics, View};
pub use shading::{apply_exposure, shade_pixel, Light, MaterialParams};
pub use weather::apply_weather;

use crate::assets::Category;
use crate::dynamics::SceneEntity;
use crate::geometry::{floor_i64, Pose2, Vec3};
use crate::model::{RenderState, WeatherKind, WeatherState, WorldState};
use crate::rng::RandomSource;
use crate::tiles::{Ground, GroundMap};
use raster::{setup_triangle, Triangle, Vertex, VisBuffer, GROUND, SKY};
use shading::{gray, hash01, sky_radiance, to_byte, EMISSIVE_DISPLAY};

/// Meters per unit of the 16-bit depth buffer.
pub const DEPTH_SCALE: f64 = 0.01;
pub const DEPTH_SKY: u16 = u16::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderModes {
    pub color: bool,
    pub semantic: bool,
    pub depth: bool,
    pub normal: bool,
}

impl RenderModes {
    pub const ALL: RenderModes = RenderModes { color: true, semantic: true, depth: true, normal: true };

    pub fn names(&self) -> Vec<&'static str> {
        [(self.color, "color"), (self.semantic, "semantic"), (self.depth, "depth"), (self.normal, "normal")]
            .into_iter()
            .filter_map(|(on, n)| on.then_some(n))
            .collect()
    }
}

impl Default for RenderModes {
    fn default() -> Self {
        Self::ALL
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMeta {
    pub time: f64,
    pub frame_index: u64,
    pub subsequence_index: usize,
    pub tile_index: u64,
    pub world: WorldState,
}

/// Per-frame instance table entry; the instance buffer stores `index + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstanceInfo {
    pub uid: u64,
    pub label: u8,
}

/// One time step's synchronized buffers.
///
/// Color and semantic are always filled since patch extraction needs them;
/// depth and normal are empty unless their mode is enabled.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSet {
    pub width: usize,
    pub height: usize,
    pub color: Vec<u8>,
    pub semantic: Vec<u8>,
    /// 0 for pixels without an entity, else an index into `instances` plus one.
    pub instance: Vec<u32>,
    pub depth: Vec<u16>,
    pub normal: Vec<u8>,
    pub instances: Vec<InstanceInfo>,
    pub meta: FrameMeta,
}

/// What the renderer sees of the world.
pub struct Scene<'a> {
    pub entities: &'a [SceneEntity],
    pub ground: &'a GroundMap,
}

struct Object {
    label: u8,
    material_base: u32,
}

fn ground_material(g: Ground, p: Vec3, weather: &WeatherState) -> MaterialParams {
    let (base, roughness, detail) = match g {
        Ground::Street => (Vec3::new(0.2, 0.2, 0.22), 0.85, true),
        Ground::Marking => (Vec3::new(0.88, 0.88, 0.82), 0.7, false),
        Ground::Sidewalk => {
            // 1.5 m paving slabs with slightly varying tone
            let v = hash01(floor_i64(p.x / 1.5), floor_i64(p.y / 1.5), 7);
            (Vec3::new(0.5, 0.49, 0.46) * (0.9 + 0.15 * v), 0.8, true)
        }
        Ground::Terrain => (Vec3::new(0.24, 0.42, 0.17), 0.95, true),
    };
    let mut m = MaterialParams { base_color: base, metallicity: 0.0, roughness, has_normal_detail: detail, emissive: false };
    let gd = weather.ground_density;
    match weather.kind {
        WeatherKind::Snow if gd > 0.0 => {
            m.base_color = m.base_color * (1.0 - gd) + Vec3::new(0.9, 0.91, 0.93) * gd;
        }
        WeatherKind::Rain if gd > 0.0 => {
            m.base_color = m.base_color * (1.0 - 0.45 * gd);
            let puddle = hash01(floor_i64(p.x / 2.0), floor_i64(p.y / 2.0), 11) < 0.4 * gd;
            if puddle && g != Ground::Terrain {
                m.metallicity = 0.6;
                m.roughness = 0.1;
                m.has_normal_detail = false;
            }
        }
        _ => {}
    }
    m
}

/// Camera-space normal (x right, y up, z toward the viewer) as bytes.
fn encode_normal(view: &View, n: Vec3) -> [u8; 3] {
    let c = Vec3::new(n.dot(view.right), -n.dot(view.down), -n.dot(view.forward));
    [to_byte((c.x + 1.0) * 0.5), to_byte((c.y + 1.0) * 0.5), to_byte((c.z + 1.0) * 0.5)]
}

fn sphere_visible(view: &View, c: Vec3, r: f64) -> bool {
    if c.z + r < view.near || c.z - r > view.far {
        return false;
    }
    let tx = view.cx / view.f;
    let ty = view.cy / view.f;
    let nx = (1.0 + tx * tx).sqrt();
    let ny = (1.0 + ty * ty).sqrt();
    (c.x - c.z * tx) / nx <= r && (-c.x - c.z * tx) / nx <= r && (c.y - c.z * ty) / ny <= r && (-c.y - c.z * ty) / ny <= r
}

/// Renders one frame from a camera pose at `camera_height`.
#[allow(clippy::too_many_arguments)]
pub fn render_frame(
    scene: &Scene<'_>,
    camera_pose: Pose2,
    camera_height: f64,
    intrinsics: &CameraIntrinsics,
    state: &WorldState,
    modes: &RenderModes,
    weather_src: &mut RandomSource,
    meta: FrameMeta,
) -> FrameSet {
    let view = View::new(camera_pose, camera_height, intrinsics);
    let (w, h) = (view.width, view.height);

    let mut objects: Vec<Object> = Vec::new();
    let mut instances = Vec::new();
    let mut materials: Vec<MaterialParams> = Vec::new();
    let mut tris: Vec<Triangle> = Vec::new();
    for e in scene.entities {
        let mesh = mesh::mesh_for(e.category, e.model_id);
        let (s, c) = e.pose.heading.sin_cos();
        let bob = if e.category == Category::Human { 0.03 * e.phase.sin().abs() } else { 0.0 };
        let center = Vec3::new(
            e.pose.x + c * mesh.center.x - s * mesh.center.y,
            e.pose.y + s * mesh.center.x + c * mesh.center.y,
            mesh.center.z + bob,
        );
        if !sphere_visible(&view, view.to_camera(center), mesh.radius) {
            continue;
        }
        let object = objects.len() as u32;
        let material_base = materials.len() as u32;
        objects.push(Object { label: e.category.label(), material_base });
        instances.push(InstanceInfo { uid: e.uid, label: e.category.label() });
        materials.extend_from_slice(&mesh.materials);
        let swing = e.phase.sin();
        let verts: Vec<Vertex> = mesh
            .positions
            .iter()
            .zip(&mesh.normals)
            .zip(&mesh.swing)
            .map(|((p, n), sw)| {
                let x = p.x + sw * swing;
                let world = Vec3::new(e.pose.x + c * x - s * p.y, e.pose.y + s * x + c * p.y, p.z + bob);
                let normal = Vec3::new(c * n.x - s * n.y, s * n.x + c * n.y, n.z);
                Vertex { world, normal, camera: view.to_camera(world) }
            })
            .collect();
        for (t, &m) in mesh.triangles.iter().zip(&mesh.triangle_material) {
            let v = t.map(|i| verts[i as usize]);
            setup_triangle(&view, v, object, material_base + u32::from(m), &mut tris);
        }
    }

    let mut vis = VisBuffer::new(w, h);
    vis.fill_ground(&view);
    vis.rasterize(&tris, view.far);

    let light = Light::new(&state.lighting, &state.weather);
    let gain = intrinsics.exposure_gain();
    let toggles = state.render;
    let overcast = state.weather.is_overcast();

    let mut color = vec![0u8; w * h * 3];
    let mut semantic = vec![0u8; w * h];
    let mut instance = vec![0u32; w * h];
    let mut range = vec![0f32; w * h];
    let mut depth = if modes.depth { vec![0u16; w * h] } else { Vec::new() };
    let mut normal = if modes.normal { vec![0u8; w * h * 3] } else { Vec::new() };
    let depth_rows: Vec<&mut [u16]> = if modes.depth { depth.chunks_mut(w).collect() } else { (0..h).map(|_| &mut [][..]).collect() };
    let normal_rows: Vec<&mut [u8]> = if modes.normal { normal.chunks_mut(w * 3).collect() } else { (0..h).map(|_| &mut [][..]).collect() };

    let ctx = ResolveContext {
        view: &view,
        vis: &vis,
        tris: &tris,
        objects: &objects,
        materials: &materials,
        ground: scene.ground,
        light: &light,
        gain,
        toggles: &toggles,
        weather: &state.weather,
        overcast,
    };
    color
        .par_chunks_mut(w * 3)
        .zip(semantic.par_chunks_mut(w))
        .zip(instance.par_chunks_mut(w))
        .zip(range.par_chunks_mut(w))
        .zip(depth_rows.into_par_iter().zip(normal_rows.into_par_iter()))
        .enumerate()
        .for_each(|(j, ((((c, s), inst), r), (d, n)))| ctx.resolve_row(j, c, s, inst, r, d, n));

    let fog_level = (intrinsics.exposure_gain() * state.lighting.intensity_lux * if overcast { 0.85 } else { 1.0 }).min(0.95);
    apply_weather(&mut color, &range, w, h, &state.weather, [fog_level; 3], weather_src);

    FrameSet {
        width: w,
        height: h,
        color,
        semantic,
        instance,
        depth,
        normal,
        instances,
        meta,
    }
}

struct ResolveContext<'a> {
    view: &'a View,
    vis: &'a VisBuffer,
    tris: &'a [Triangle],
    objects: &'a [Object],
    materials: &'a [MaterialParams],
    ground: &'a GroundMap,
    light: &'a Light,
    gain: f64,
    toggles: &'a RenderState,
    weather: &'a WeatherState,
    overcast: bool,
}

impl ResolveContext<'_> {
    #[allow(clippy::too_many_arguments)]
    fn resolve_row(&self, j: usize, color: &mut [u8], semantic: &mut [u8], instance: &mut [u32], range: &mut [f32], depth: &mut [u16], normal: &mut [u8]) {
        let view = self.view;
        let w = view.width;
        let py = j as f64 + 0.5;
        let ground_z = (py > view.cy).then(|| view.origin.z * view.f / (py - view.cy));
        for i in 0..w {
            let px = i as f64 + 0.5;
            let id = self.vis.id[j * w + i];
            let (rgb, label, inst, dist, n) = match id {
                SKY => {
                    let ray = view.ray(px, py);
                    let lin = sky_radiance(ray, self.light, self.overcast, self.toggles.color);
                    (apply_exposure(lin, self.gain), crate::LABEL_SKY, 0, view.far, None)
                }
                GROUND => {
                    let ray = view.ray(px, py);
                    let z = ground_z.expect("ground pixels lie below the horizon");
                    let p = view.origin + ray * z;
                    let p = Vec3::new(p.x, p.y, 0.0);
                    let mat = ground_material(self.ground.ground(p.x, p.y), p, self.weather);
                    let dist = z * ray.length();
                    let v = (view.origin - p) * (1.0 / dist);
                    let lin = shade_pixel(&mat, Vec3::UP, v, p, self.light, self.toggles);
                    (apply_exposure(lin, self.gain), crate::LABEL_BACKGROUND, 0, dist, Some(Vec3::UP))
                }
                k => {
                    let t = &self.tris[k as usize];
                    let (p, nrm) = t.interpolate(px, py);
                    let mat = &self.materials[t.material as usize];
                    let obj = &self.objects[t.object as usize];
                    debug_assert!(obj.material_base <= t.material);
                    let dist = (p - view.origin).length();
                    let rgb = if mat.emissive {
                        let c = if self.toggles.color { mat.base_color } else { gray(mat.base_color) };
                        let d = c * EMISSIVE_DISPLAY;
                        [to_byte(d.x), to_byte(d.y), to_byte(d.z)]
                    } else {
                        let v = (view.origin - p) * (1.0 / dist);
                        // interpolated normals may face away at silhouettes; shade the visible side
                        let ns = if nrm.dot(v) < 0.0 { -nrm } else { nrm };
                        apply_exposure(shade_pixel(mat, ns, v, p, self.light, self.toggles), self.gain)
                    };
                    (rgb, obj.label, t.object + 1, dist, Some(nrm))
                }
            };
            color[i * 3..i * 3 + 3].copy_from_slice(&rgb);
            semantic[i] = label;
            instance[i] = inst;
            range[i] = dist as f32;
            if !depth.is_empty() {
                depth[i] = if id == SKY { DEPTH_SKY } else { (dist / DEPTH_SCALE).round().min(f64::from(DEPTH_SKY - 1)) as u16 };
            }
            if !normal.is_empty() {
                let b = n.map_or([0, 0, 0], |n| encode_normal(view, n));
                normal[i * 3..i * 3 + 3].copy_from_slice(&b);
            }
        }
    }
}

#[cfg(test)]
mod tests;
