//! Triangle setup, near-plane clipping and the visibility buffer.
//!
//! Rasterization only records, per pixel, the closest inverse depth and the
//! id of the primitive that produced it. Attributes are reconstructed in a
//! separate resolve pass, so every buffer mode reads from the same fragment.

use rayon::prelude::*;

use crate::geometry::Vec3;

use super::camera::View;

pub const SKY: u32 = u32::MAX;
pub const GROUND: u32 = u32::MAX - 1;
/// Rows per raster band. Fixed so the band split never depends on thread count.
pub const BAND: usize = 8;

#[derive(Debug, Clone, Copy)]
pub struct Vertex {
    pub world: Vec3,
    pub normal: Vec3,
    pub camera: Vec3,
}

/// A screen-space triangle ready for rasterization.
#[derive(Debug, Clone, Copy)]
pub struct Triangle {
    pub sx: [f64; 3],
    pub sy: [f64; 3],
    /// Inverse camera depth per vertex.
    pub iz: [f64; 3],
    pub world: [Vec3; 3],
    pub normal: [Vec3; 3],
    pub object: u32,
    pub material: u32,
    inv_area: f64,
}

impl Triangle {
    fn edge(ax: f64, ay: f64, bx: f64, by: f64, px: f64, py: f64) -> f64 {
        (px - ax) * (by - ay) - (py - ay) * (bx - ax)
    }

    /// Screen-space barycentric weights at `(px, py)`.
    pub fn screen_weights(&self, px: f64, py: f64) -> [f64; 3] {
        let (x, y) = (&self.sx, &self.sy);
        let w0 = Self::edge(x[1], y[1], x[2], y[2], px, py) * self.inv_area;
        let w1 = Self::edge(x[2], y[2], x[0], y[0], px, py) * self.inv_area;
        [w0, w1, 1.0 - w0 - w1]
    }

    /// Perspective-correct weights for attribute interpolation.
    pub fn weights(&self, px: f64, py: f64) -> [f64; 3] {
        let l = self.screen_weights(px, py);
        let a = [l[0] * self.iz[0], l[1] * self.iz[1], l[2] * self.iz[2]];
        let s = a[0] + a[1] + a[2];
        [a[0] / s, a[1] / s, a[2] / s]
    }

    pub fn interpolate(&self, px: f64, py: f64) -> (Vec3, Vec3) {
        let w = self.weights(px, py);
        let p = self.world[0] * w[0] + self.world[1] * w[1] + self.world[2] * w[2];
        let n = (self.normal[0] * w[0] + self.normal[1] * w[1] + self.normal[2] * w[2]).normalized();
        (p, n)
    }

    fn row_span(&self, height: usize) -> Option<(usize, usize)> {
        let lo = self.sy.iter().copied().fold(f64::MAX, f64::min);
        let hi = self.sy.iter().copied().fold(f64::MIN, f64::max);
        // pixel centers at j + 0.5
        let j0 = (lo - 0.5).ceil().max(0.0);
        let j1 = (hi - 0.5).floor().min(height as f64 - 1.0);
        (j0 <= j1).then_some((j0 as usize, j1 as usize))
    }
}

fn lerp_vertex(a: &Vertex, b: &Vertex, t: f64) -> Vertex {
    Vertex {
        world: a.world + (b.world - a.world) * t,
        normal: a.normal + (b.normal - a.normal) * t,
        camera: a.camera + (b.camera - a.camera) * t,
    }
}

/// Clips against the near plane, projects and appends the resulting triangles.
/// Back faces (by winding) are dropped.
pub fn setup_triangle(view: &View, v: [Vertex; 3], object: u32, material: u32, out: &mut Vec<Triangle>) {
    let face = (v[1].world - v[0].world).cross(v[2].world - v[0].world);
    if face.dot(v[0].world - view.origin) >= 0.0 {
        return;
    }
    let near = view.near;
    if v.iter().all(|p| p.camera.z > view.far) {
        return;
    }
    let inside = v.iter().filter(|p| p.camera.z >= near).count();
    let mut poly: Vec<Vertex> = Vec::with_capacity(4);
    match inside {
        0 => return,
        3 => poly.extend_from_slice(&v),
        _ => {
            for i in 0..3 {
                let (a, b) = (&v[i], &v[(i + 1) % 3]);
                let (ina, inb) = (a.camera.z >= near, b.camera.z >= near);
                if ina {
                    poly.push(*a);
                }
                if ina != inb {
                    let t = (near - a.camera.z) / (b.camera.z - a.camera.z);
                    poly.push(lerp_vertex(a, b, t));
                }
            }
        }
    }
    for k in 1..poly.len() - 1 {
        let tri = [poly[0], poly[k], poly[k + 1]];
        let mut sx = [0.0; 3];
        let mut sy = [0.0; 3];
        let mut iz = [0.0; 3];
        for (i, p) in tri.iter().enumerate() {
            let (x, y) = view.project(p.camera);
            sx[i] = x;
            sy[i] = y;
            iz[i] = 1.0 / p.camera.z;
        }
        let area = Triangle::edge(sx[0], sy[0], sx[1], sy[1], sx[2], sy[2]);
        if area.abs() < 1e-9 {
            continue;
        }
        let (xmin, xmax) = (sx.iter().copied().fold(f64::MAX, f64::min), sx.iter().copied().fold(f64::MIN, f64::max));
        if xmax < 0.0 || xmin > view.width as f64 {
            continue;
        }
        out.push(Triangle {
            sx,
            sy,
            iz,
            world: tri.map(|p| p.world),
            normal: tri.map(|p| p.normal),
            object,
            material,
            inv_area: 1.0 / area,
        });
    }
}

/// Closest inverse depth and primitive id per pixel.
#[derive(Debug, Clone)]
pub struct VisBuffer {
    pub width: usize,
    pub height: usize,
    pub invz: Vec<f32>,
    pub id: Vec<u32>,
}

impl VisBuffer {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            invz: vec![0.0; width * height],
            id: vec![SKY; width * height],
        }
    }

    /// Marks every pixel whose ray meets the ground within the far clip.
    pub fn fill_ground(&mut self, view: &View) {
        let h = view.origin.z;
        for j in 0..self.height {
            let dy = j as f64 + 0.5 - view.cy;
            if dy <= 0.0 {
                continue;
            }
            let z = h * view.f / dy;
            let row = j * self.width;
            for i in 0..self.width {
                let dx = (i as f64 + 0.5 - view.cx) / view.f;
                let range = z * (1.0 + dx * dx + (dy / view.f) * (dy / view.f)).sqrt();
                if range <= view.far {
                    self.invz[row + i] = (1.0 / z) as f32;
                    self.id[row + i] = GROUND;
                }
            }
        }
    }

    /// Z-buffered rasterization. Ties keep the earlier triangle.
    pub fn rasterize(&mut self, tris: &[Triangle], far: f64) {
        let (w, h) = (self.width, self.height);
        let nbands = h.div_ceil(BAND);
        let mut bins: Vec<Vec<u32>> = vec![Vec::new(); nbands];
        let mut spans = Vec::with_capacity(tris.len());
        for (k, t) in tris.iter().enumerate() {
            let span = t.row_span(h);
            if let Some((j0, j1)) = span {
                for bin in &mut bins[j0 / BAND..=j1 / BAND] {
                    bin.push(k as u32);
                }
            }
            spans.push(span);
        }
        let min_iz = (1.0 / far) as f32;
        self.invz
            .par_chunks_mut(BAND * w)
            .zip(self.id.par_chunks_mut(BAND * w))
            .enumerate()
            .for_each(|(b, (invz, id))| {
                let row0 = b * BAND;
                for &k in &bins[b] {
                    let t = &tris[k as usize];
                    let (j0, j1) = spans[k as usize].expect("binned triangles have a span");
                    for j in j0.max(row0)..=j1.min(row0 + BAND - 1) {
                        raster_row(t, k, j, w, &mut invz[(j - row0) * w..(j - row0 + 1) * w], &mut id[(j - row0) * w..(j - row0 + 1) * w], min_iz);
                    }
                }
            });
    }
}

fn raster_row(t: &Triangle, k: u32, j: usize, w: usize, invz: &mut [f32], id: &mut [u32], min_iz: f32) {
    let py = j as f64 + 0.5;
    // horizontal extent of the triangle on this scanline, from its three edges
    let (mut xl, mut xr) = (f64::MAX, f64::MIN);
    for e in 0..3 {
        let (ax, ay, bx, by) = (t.sx[e], t.sy[e], t.sx[(e + 1) % 3], t.sy[(e + 1) % 3]);
        if (ay <= py && by >= py) || (by <= py && ay >= py) {
            if (by - ay).abs() < 1e-12 {
                xl = xl.min(ax.min(bx));
                xr = xr.max(ax.max(bx));
            } else {
                let x = ax + (py - ay) * (bx - ax) / (by - ay);
                xl = xl.min(x);
                xr = xr.max(x);
            }
        }
    }
    if xl > xr {
        return;
    }
    let i0 = (xl - 0.5).ceil().max(0.0) as usize;
    let i1f = (xr - 0.5).floor().min(w as f64 - 1.0);
    if i1f < 0.0 || (i0 as f64) > i1f {
        return;
    }
    for i in i0..=i1f as usize {
        let l = t.screen_weights(i as f64 + 0.5, py);
        if l[0] < -1e-9 || l[1] < -1e-9 || l[2] < -1e-9 {
            continue;
        }
        let z = (l[0] * t.iz[0] + l[1] * t.iz[1] + l[2] * t.iz[2]) as f32;
        if z > invz[i] && z >= min_iz {
            invz[i] = z;
            id[i] = k;
        }
    }
}
