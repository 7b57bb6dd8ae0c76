//! Parametric stand-in meshes for every asset instance.
//!
//! Local frame: x forward, y left, z up, origin on the ground at the entity's
//! pose. Variation between instances of a category is drawn from a fixed
//! seed so it is stable across streams.

use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

use crate::assets::{AssetCatalog, Category};
use crate::geometry::Vec3;
use crate::rng::{derive_source, sample_uniform, RandomSource, SeedPath};

use super::shading::MaterialParams;

const ASSET_SEED: u64 = 0x5EED_A55E_7000_0001;

#[derive(Debug, Clone, Default)]
pub struct Mesh {
    pub positions: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    /// Horizontal swing amplitude per vertex, used for walking limbs.
    pub swing: Vec<f64>,
    pub triangles: Vec<[u32; 3]>,
    pub triangle_material: Vec<u8>,
    pub materials: Vec<MaterialParams>,
    /// Radius of a bounding sphere around `center`.
    pub radius: f64,
    pub center: Vec3,
}

impl Mesh {
    fn material(&mut self, m: MaterialParams) -> u8 {
        self.materials.push(m);
        (self.materials.len() - 1) as u8
    }

    fn vertex(&mut self, p: Vec3, n: Vec3, swing: f64) -> u32 {
        self.positions.push(p);
        self.normals.push(n);
        self.swing.push(swing);
        (self.positions.len() - 1) as u32
    }

    fn tri(&mut self, a: u32, b: u32, c: u32, mat: u8) {
        self.triangles.push([a, b, c]);
        self.triangle_material.push(mat);
    }

    /// Flat quad with corners in counter-clockwise order seen from outside.
    fn quad(&mut self, c: [Vec3; 4], mat: u8, swing: f64) {
        let n = (c[1] - c[0]).cross(c[2] - c[0]).normalized();
        let i: Vec<u32> = c.iter().map(|&p| self.vertex(p, n, swing)).collect();
        self.tri(i[0], i[1], i[2], mat);
        self.tri(i[0], i[2], i[3], mat);
    }

    fn flat_tri(&mut self, a: Vec3, b: Vec3, c: Vec3, mat: u8) {
        let n = (b - a).cross(c - a).normalized();
        let (i, j, k) = (self.vertex(a, n, 0.0), self.vertex(b, n, 0.0), self.vertex(c, n, 0.0));
        self.tri(i, j, k, mat);
    }

    /// Axis-aligned box without a bottom face.
    fn add_box(&mut self, lo: Vec3, hi: Vec3, mat: u8, swing: f64) {
        let p = |x: bool, y: bool, z: bool| {
            Vec3::new(if x { hi.x } else { lo.x }, if y { hi.y } else { lo.y }, if z { hi.z } else { lo.z })
        };
        let (f, t) = (false, true);
        self.quad([p(t, f, f), p(t, t, f), p(t, t, t), p(t, f, t)], mat, swing); // +x
        self.quad([p(f, t, f), p(f, f, f), p(f, f, t), p(f, t, t)], mat, swing); // -x
        self.quad([p(t, t, f), p(f, t, f), p(f, t, t), p(t, t, t)], mat, swing); // +y
        self.quad([p(f, f, f), p(t, f, f), p(t, f, t), p(f, f, t)], mat, swing); // -y
        self.quad([p(f, f, t), p(t, f, t), p(t, t, t), p(f, t, t)], mat, swing); // +z
    }

    /// Vertical cylinder with a top cap.
    fn add_cylinder(&mut self, base: Vec3, radius: f64, height: f64, segments: usize, mat: u8) {
        let top = base + Vec3::UP * height;
        let ring = |k: usize| {
            let a = TAU * k as f64 / segments as f64;
            Vec3::new(a.cos(), a.sin(), 0.0)
        };
        let cap = self.vertex(top, Vec3::UP, 0.0);
        for k in 0..segments {
            let (d0, d1) = (ring(k), ring(k + 1));
            let a = self.vertex(base + d0 * radius, d0, 0.0);
            let b = self.vertex(base + d1 * radius, d1, 0.0);
            let c = self.vertex(top + d1 * radius, d1, 0.0);
            let d = self.vertex(top + d0 * radius, d0, 0.0);
            self.tri(a, b, c, mat);
            self.tri(a, c, d, mat);
            let e = self.vertex(top + d0 * radius, Vec3::UP, 0.0);
            let g = self.vertex(top + d1 * radius, Vec3::UP, 0.0);
            self.tri(cap, e, g, mat);
        }
    }

    fn add_cone(&mut self, base: Vec3, radius: f64, height: f64, segments: usize, mat: u8) {
        let apex = base + Vec3::UP * height;
        let slope = radius / height;
        let center = self.vertex(base, -Vec3::UP, 0.0);
        for k in 0..segments {
            let a0 = TAU * k as f64 / segments as f64;
            let a1 = TAU * (k + 1) as f64 / segments as f64;
            let d0 = Vec3::new(a0.cos(), a0.sin(), 0.0);
            let d1 = Vec3::new(a1.cos(), a1.sin(), 0.0);
            let n0 = (d0 + Vec3::UP * slope).normalized();
            let n1 = (d1 + Vec3::UP * slope).normalized();
            let nm = (n0 + n1).normalized();
            let a = self.vertex(base + d0 * radius, n0, 0.0);
            let b = self.vertex(base + d1 * radius, n1, 0.0);
            let c = self.vertex(apex, nm, 0.0);
            self.tri(a, b, c, mat);
            // underside, visible from below on raised crowns
            let e = self.vertex(base + d0 * radius, -Vec3::UP, 0.0);
            let g = self.vertex(base + d1 * radius, -Vec3::UP, 0.0);
            self.tri(center, g, e, mat);
        }
    }

    fn add_ellipsoid(&mut self, center: Vec3, radii: Vec3, seg_u: usize, seg_v: usize, mat: u8) {
        let point = |i: usize, j: usize| {
            let theta = PI * j as f64 / seg_v as f64;
            let phi = TAU * i as f64 / seg_u as f64;
            let unit = Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
            let p = center + unit.mul_elem(radii);
            let n = Vec3::new(unit.x / radii.x, unit.y / radii.y, unit.z / radii.z).normalized();
            (p, n)
        };
        let mut idx = vec![vec![0u32; seg_v + 1]; seg_u + 1];
        for (i, col) in idx.iter_mut().enumerate() {
            for (j, slot) in col.iter_mut().enumerate() {
                let (p, n) = point(i, j);
                *slot = self.vertex(p, n, 0.0);
            }
        }
        for i in 0..seg_u {
            for j in 0..seg_v {
                let (a, b, c, d) = (idx[i][j], idx[i][j + 1], idx[i + 1][j + 1], idx[i + 1][j]);
                if j != 0 {
                    self.tri(a, b, d, mat);
                }
                if j + 1 != seg_v {
                    self.tri(b, c, d, mat);
                }
            }
        }
    }

    fn finish(mut self) -> Self {
        let (mut lo, mut hi) = (Vec3::new(f64::MAX, f64::MAX, f64::MAX), Vec3::new(f64::MIN, f64::MIN, f64::MIN));
        for p in &self.positions {
            lo = Vec3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
            hi = Vec3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
        }
        self.center = (lo + hi) * 0.5;
        // swinging limbs move at most 0.35 m
        self.radius = (hi - lo).length() * 0.5 + 0.35;
        self
    }
}

fn variation(category: Category, model_id: usize) -> RandomSource {
    derive_source(ASSET_SEED, &SeedPath::root(category.name(), model_id as u64))
}

fn rgb(r: f64, g: f64, b: f64) -> Vec3 {
    Vec3::new(r, g, b)
}

fn matte(c: Vec3, detail: bool) -> MaterialParams {
    MaterialParams { base_color: c, metallicity: 0.0, roughness: 0.8, has_normal_detail: detail, emissive: false }
}

fn building(model_id: usize, name: &str) -> Mesh {
    let mut src = variation(Category::Building, model_id);
    let mut m = Mesh::default();
    let office = name.starts_with("office");
    let depth = sample_uniform(&mut src, 6.0, 7.0);
    let width = sample_uniform(&mut src, 8.5, 11.5);
    let height = if office { sample_uniform(&mut src, 14.0, 20.0) } else { sample_uniform(&mut src, 8.0, 12.0) };
    let palette: &[Vec3] = if office {
        &[rgb(0.55, 0.6, 0.66), rgb(0.7, 0.7, 0.68), rgb(0.45, 0.5, 0.58), rgb(0.62, 0.58, 0.52), rgb(0.5, 0.55, 0.5)]
    } else {
        &[rgb(0.72, 0.46, 0.38), rgb(0.86, 0.8, 0.66), rgb(0.62, 0.66, 0.7), rgb(0.8, 0.7, 0.52), rgb(0.6, 0.42, 0.38)]
    };
    let color = palette[model_id % palette.len()];
    let wall = m.material(if office {
        MaterialParams { base_color: color, metallicity: 0.6, roughness: 0.3, has_normal_detail: false, emissive: false }
    } else {
        matte(color, true)
    });
    let (hx, hy) = (depth / 2.0, width / 2.0);
    m.add_box(Vec3::new(-hx, -hy, 0.0), Vec3::new(hx, hy, height), wall, 0.0);
    if office {
        let roof = m.material(matte(rgb(0.35, 0.35, 0.36), false));
        m.add_box(Vec3::new(-hx * 0.5, -hy * 0.4, height), Vec3::new(hx * 0.3, hy * 0.4, height + 1.8), roof, 0.0);
    } else {
        // gable roof running along y
        let roof = m.material(matte(rgb(0.38, 0.2, 0.17), true));
        let ridge = height + sample_uniform(&mut src, 2.0, 3.2);
        let (a, b) = (Vec3::new(hx, -hy, height), Vec3::new(hx, hy, height));
        let (c, d) = (Vec3::new(0.0, hy, ridge), Vec3::new(0.0, -hy, ridge));
        m.quad([a, b, c, d], roof, 0.0);
        let (e, f) = (Vec3::new(-hx, hy, height), Vec3::new(-hx, -hy, height));
        m.quad([e, f, d, c], roof, 0.0);
        m.flat_tri(f, a, d, wall);
        m.flat_tri(b, e, c, wall);
    }
    m.finish()
}

fn tree(model_id: usize, name: &str) -> Mesh {
    let mut src = variation(Category::Tree, model_id);
    let mut m = Mesh::default();
    let scale = sample_uniform(&mut src, 0.85, 1.15);
    let trunk_h = sample_uniform(&mut src, 2.4, 3.2) * scale;
    if name.starts_with("birch") {
        let bark = m.material(matte(rgb(0.85, 0.84, 0.78), true));
        let leaves = m.material(matte(rgb(0.45, 0.62, 0.25), true));
        m.add_cylinder(Vec3::ZERO, 0.14, trunk_h + 1.0, 8, bark);
        m.add_ellipsoid(Vec3::new(0.0, 0.0, trunk_h + 1.6 * scale), Vec3::new(1.3, 1.3, 2.1) * scale, 10, 7, leaves);
    } else if name.starts_with("maple") {
        let bark = m.material(matte(rgb(0.36, 0.25, 0.16), true));
        let tint = if model_id.is_multiple_of(2) { rgb(0.3, 0.5, 0.18) } else { rgb(0.62, 0.38, 0.14) };
        let leaves = m.material(matte(tint, true));
        m.add_cylinder(Vec3::ZERO, 0.2, trunk_h + 0.6, 8, bark);
        m.add_ellipsoid(Vec3::new(0.0, 0.0, trunk_h + 1.4 * scale), Vec3::new(1.8, 1.8, 1.6) * scale, 10, 7, leaves);
    } else {
        let bark = m.material(matte(rgb(0.3, 0.22, 0.15), true));
        let needles = m.material(matte(rgb(0.15, 0.34, 0.2), true));
        m.add_cylinder(Vec3::ZERO, 0.18, 1.6 * scale, 8, bark);
        m.add_cone(Vec3::new(0.0, 0.0, 1.2 * scale), 1.5 * scale, 3.6 * scale, 10, needles);
        m.add_cone(Vec3::new(0.0, 0.0, 3.2 * scale), 1.1 * scale, 3.0 * scale, 10, needles);
    }
    m.finish()
}

fn lamp() -> Mesh {
    let mut m = Mesh::default();
    let steel = m.material(MaterialParams {
        base_color: rgb(0.5, 0.52, 0.55),
        metallicity: 0.8,
        roughness: 0.4,
        has_normal_detail: false,
        emissive: false,
    });
    let glow = m.material(MaterialParams {
        base_color: rgb(1.0, 0.95, 0.8),
        metallicity: 0.0,
        roughness: 1.0,
        has_normal_detail: false,
        emissive: true,
    });
    m.add_cylinder(Vec3::ZERO, 0.1, 4.8, 8, steel);
    m.add_box(Vec3::new(0.0, -0.06, 4.65), Vec3::new(1.3, 0.06, 4.8), steel, 0.0);
    m.add_box(Vec3::new(0.75, -0.2, 4.5), Vec3::new(1.4, 0.2, 4.65), glow, 0.0);
    m.finish()
}

fn human(model_id: usize, name: &str) -> Mesh {
    let mut src = variation(Category::Human, model_id);
    let mut m = Mesh::default();
    let h = if name.starts_with("child") {
        sample_uniform(&mut src, 1.15, 1.35)
    } else if name.starts_with("elderly") {
        sample_uniform(&mut src, 1.6, 1.72)
    } else {
        sample_uniform(&mut src, 1.68, 1.88)
    };
    let shirts = [
        rgb(0.7, 0.15, 0.15), rgb(0.15, 0.3, 0.65), rgb(0.2, 0.55, 0.3), rgb(0.85, 0.75, 0.2),
        rgb(0.9, 0.9, 0.88), rgb(0.25, 0.25, 0.28), rgb(0.55, 0.3, 0.6),
    ];
    let shirt = m.material(matte(shirts[model_id % shirts.len()], false));
    let pants = m.material(matte(if model_id.is_multiple_of(3) { rgb(0.2, 0.22, 0.35) } else { rgb(0.3, 0.27, 0.24) }, false));
    let skins = [rgb(0.93, 0.76, 0.62), rgb(0.72, 0.52, 0.38), rgb(0.45, 0.31, 0.22), rgb(0.85, 0.66, 0.5)];
    let skin = m.material(matte(skins[model_id % skins.len()], false));
    let hair = m.material(matte(
        if name.starts_with("elderly") { rgb(0.8, 0.8, 0.8) } else { rgb(0.15, 0.1, 0.07) },
        false,
    ));
    let hip = 0.48 * h;
    let shoulder = 0.8 * h;
    let stride = 0.25 * h / 1.75;
    // legs swing in antiphase; amplitude is applied at the feet
    for (side, sign) in [(0.11, 1.0), (-0.11, -1.0)] {
        let base = m.positions.len();
        m.add_box(Vec3::new(-0.09, side - 0.075, 0.0), Vec3::new(0.09, side + 0.075, hip), pants, 0.0);
        for v in base..m.positions.len() {
            m.swing[v] = sign * stride * (1.0 - m.positions[v].z / hip);
        }
    }
    m.add_box(Vec3::new(-0.13, -0.25, hip), Vec3::new(0.13, 0.25, shoulder), shirt, 0.0);
    for (side, sign) in [(0.315, -1.0), (-0.315, 1.0)] {
        let base = m.positions.len();
        m.add_box(Vec3::new(-0.065, side - 0.065, hip - 0.04 * h), Vec3::new(0.065, side + 0.065, shoulder), shirt, 0.0);
        for v in base..m.positions.len() {
            m.swing[v] = sign * 0.6 * stride * ((shoulder - m.positions[v].z) / (shoulder - hip));
        }
    }
    let head_r = 0.065 * h;
    m.add_ellipsoid(Vec3::new(0.0, 0.0, shoulder + 0.02 * h + head_r), Vec3::new(head_r, head_r * 0.9, head_r * 1.15), 8, 6, skin);
    m.add_ellipsoid(Vec3::new(-0.015, 0.0, shoulder + 0.05 * h + head_r), Vec3::new(head_r * 1.02, head_r * 0.94, head_r * 0.9), 8, 3, hair);
    m.finish()
}

fn vehicle(model_id: usize, name: &str) -> Mesh {
    let mut m = Mesh::default();
    let color = match name.rsplit('_').next().unwrap_or_default() {
        "red" => rgb(0.7, 0.08, 0.08),
        "blue" => rgb(0.1, 0.2, 0.6),
        "silver" => rgb(0.72, 0.73, 0.75),
        "white" => rgb(0.92, 0.92, 0.9),
        "black" => rgb(0.06, 0.06, 0.07),
        "green" => rgb(0.12, 0.42, 0.2),
        "yellow" => rgb(0.9, 0.75, 0.1),
        _ => rgb(0.5, 0.5, 0.5),
    };
    let paint = m.material(MaterialParams {
        base_color: color,
        metallicity: 0.7,
        roughness: 0.3,
        has_normal_detail: false,
        emissive: false,
    });
    let glass = m.material(MaterialParams {
        base_color: rgb(0.08, 0.1, 0.13),
        metallicity: 0.9,
        roughness: 0.15,
        has_normal_detail: false,
        emissive: false,
    });
    let tire = m.material(matte(rgb(0.05, 0.05, 0.05), false));
    let hatch = name.starts_with("hatchback");
    let half_len = if hatch { 2.0 } else { 2.2 };
    m.add_box(Vec3::new(-half_len, -0.88, 0.32), Vec3::new(half_len, 0.88, 0.95), paint, 0.0);
    let (c0, c1) = if hatch { (-1.95, 0.6) } else { (-1.2, 0.9) };
    m.add_box(Vec3::new(c0, -0.78, 0.95), Vec3::new(c1, 0.78, 1.48), glass, 0.0);
    let roof_h = if model_id.is_multiple_of(2) { 1.5 } else { 1.52 };
    m.add_box(Vec3::new(c0 + 0.1, -0.72, 1.48), Vec3::new(c1 - 0.1, 0.72, roof_h), paint, 0.0);
    let wx = half_len - 0.75;
    for x in [-wx, wx] {
        for y in [-0.8, 0.8] {
            m.add_box(Vec3::new(x - 0.34, y - 0.13, 0.0), Vec3::new(x + 0.34, y + 0.13, 0.66), tire, 0.0);
        }
    }
    m.finish()
}

/// Mesh of asset `model_id` in `category`, built once per process.
pub fn mesh_for(category: Category, model_id: usize) -> &'static Mesh {
    static MESHES: OnceLock<Vec<Vec<Mesh>>> = OnceLock::new();
    let all = MESHES.get_or_init(|| {
        let catalog = AssetCatalog::builtin();
        Category::ALL
            .iter()
            .map(|&c| {
                catalog
                    .instances(c)
                    .iter()
                    .enumerate()
                    .map(|(i, e)| match c {
                        Category::Building => building(i, &e.name),
                        Category::Tree => tree(i, &e.name),
                        Category::Lamp => lamp(),
                        Category::Human => human(i, &e.name),
                        Category::Vehicle => vehicle(i, &e.name),
                    })
                    .collect()
            })
            .collect()
    });
    &all[category.index()][model_id]
}
