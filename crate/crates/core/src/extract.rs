//! Cutting rendered frames into single-object classification patches.

use image::{imageops, RgbImage};
use serde::{Deserialize, Serialize};

use crate::render::FrameSet;
use crate::rng::RandomSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
    pub label: u8,
    /// Renderer instance id; 0 for sampled background boxes.
    pub instance_id: u32,
}

impl BoundingBox {
    pub fn area(&self) -> u64 {
        u64::from(self.w) * u64::from(self.h)
    }

    pub fn intersection(&self, other: &BoundingBox) -> u64 {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = (self.x + self.w).min(other.x + other.w);
        let y1 = (self.y + self.h).min(other.y + other.h);
        if x1 <= x0 || y1 <= y0 {
            0
        } else {
            u64::from(x1 - x0) * u64::from(y1 - y0)
        }
    }

    /// Square window of side `max(w, h)` centered on the box and shifted
    /// inward to lie in a `width` by `height` frame, as `(x, y, side)`.
    /// `None` if the side exceeds a frame dimension.
    pub fn square_crop(&self, width: u32, height: u32) -> Option<(u32, u32, u32)> {
        let side = self.w.max(self.h);
        if side > width || side > height {
            return None;
        }
        let place = |start: u32, len: u32, limit: u32| -> u32 {
            // center of the box, rounded down, minus half the side
            let c = 2 * i64::from(start) + i64::from(len);
            let s = (c - i64::from(side)).div_euclid(2);
            s.clamp(0, i64::from(limit - side)) as u32
        };
        Some((place(self.x, self.w, width), place(self.y, self.h, height), side))
    }

    fn as_square(&self, width: u32, height: u32) -> Option<BoundingBox> {
        self.square_crop(width, height).map(|(x, y, s)| BoundingBox { x, y, w: s, h: s, ..*self })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractionRules {
    pub min_side: u32,
    pub overlap_max: f64,
    pub bg_boxes_per_frame: usize,
    pub bg_size_range: (u32, u32),
    pub bg_reject_attempts: usize,
    pub resize_to: u32,
}

impl Default for ExtractionRules {
    fn default() -> Self {
        Self {
            min_side: 32,
            overlap_max: 0.2,
            bg_boxes_per_frame: 4,
            bg_size_range: (64, 200),
            bg_reject_attempts: 16,
            resize_to: 64,
        }
    }
}

/// One extracted patch with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchRecord {
    /// `resize_to` squared RGB pixels.
    pub image: Vec<u8>,
    pub label: u8,
    pub frame_index: u64,
    pub subsequence_index: usize,
    pub bbox: BoundingBox,
    /// `(x, y, side)` of the square crop before resizing.
    pub crop: (u32, u32, u32),
}

/// Why boxes did not become patches, per frame.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropCounters {
    pub too_small: u32,
    pub overlapping: u32,
    pub oversize: u32,
    /// Background slots left empty after every attempt collided.
    pub background_rejected: u32,
}

impl DropCounters {
    pub fn add(&mut self, o: &DropCounters) {
        self.too_small += o.too_small;
        self.overlapping += o.overlapping;
        self.oversize += o.oversize;
        self.background_rejected += o.background_rejected;
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Extraction {
    pub patches: Vec<PatchRecord>,
    /// Every tight foreground box, kept or not.
    pub foreground: Vec<BoundingBox>,
    pub background: Vec<BoundingBox>,
    pub drops: DropCounters,
}

fn is_foreground(label: u8) -> bool {
    (crate::LABEL_TREE..=crate::LABEL_VEHICLE).contains(&label)
}

/// One tight box per instance id whose pixels carry a foreground label,
/// ordered by instance id.
pub fn boxes_from_mask(semantic: &[u8], instance: &[u32], width: usize, height: usize) -> Vec<BoundingBox> {
    assert_eq!(semantic.len(), width * height);
    assert_eq!(instance.len(), width * height);
    // (min x, min y, max x, max y, label) per id
    let mut ext: Vec<Option<(usize, usize, usize, usize, u8)>> = Vec::new();
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            let id = instance[i] as usize;
            if id == 0 || !is_foreground(semantic[i]) {
                continue;
            }
            if ext.len() <= id {
                ext.resize(id + 1, None);
            }
            let e = ext[id].get_or_insert((x, y, x, y, semantic[i]));
            e.0 = e.0.min(x);
            e.1 = e.1.min(y);
            e.2 = e.2.max(x);
            e.3 = e.3.max(y);
        }
    }
    ext.iter()
        .enumerate()
        .filter_map(|(id, e)| {
            e.map(|(x0, y0, x1, y1, label)| BoundingBox {
                x: x0 as u32,
                y: y0 as u32,
                w: (x1 - x0 + 1) as u32,
                h: (y1 - y0 + 1) as u32,
                label,
                instance_id: id as u32,
            })
        })
        .collect()
}

/// Samples up to `bg_boxes_per_frame` background boxes that touch no
/// foreground box, neither with the box itself nor with its square crop.
/// Returns the boxes and the number of slots given up.
pub fn sample_background_boxes(
    width: u32,
    height: u32,
    existing: &[BoundingBox],
    rules: &ExtractionRules,
    src: &mut RandomSource,
) -> (Vec<BoundingBox>, u32) {
    let (lo, hi) = rules.bg_size_range;
    let mut out = Vec::new();
    let mut rejected = 0;
    for _ in 0..rules.bg_boxes_per_frame {
        let mut accepted = None;
        for _ in 0..rules.bg_reject_attempts {
            let w = lo + src.below(u64::from(hi - lo + 1)) as u32;
            let h = lo + src.below(u64::from(hi - lo + 1)) as u32;
            if w > width || h > height {
                continue;
            }
            let x = src.below(u64::from(width - w + 1)) as u32;
            let y = src.below(u64::from(height - h + 1)) as u32;
            let b = BoundingBox { x, y, w, h, label: crate::LABEL_BACKGROUND, instance_id: 0 };
            let Some(sq) = b.as_square(width, height) else { continue };
            if existing.iter().all(|f| f.intersection(&b) == 0 && f.intersection(&sq) == 0) {
                accepted = Some(b);
                break;
            }
        }
        match accepted {
            Some(b) => out.push(b),
            None => rejected += 1,
        }
    }
    (out, rejected)
}

/// Foreground boxes that pass the size and overlap rules, with the drop counts.
pub fn filter_foreground(boxes: &[BoundingBox], width: u32, height: u32, rules: &ExtractionRules) -> (Vec<BoundingBox>, DropCounters) {
    let mut kept = Vec::new();
    let mut drops = DropCounters::default();
    for (i, b) in boxes.iter().enumerate() {
        if b.w.min(b.h) < rules.min_side {
            drops.too_small += 1;
            continue;
        }
        let crowded = boxes
            .iter()
            .enumerate()
            .any(|(j, o)| j != i && b.intersection(o) as f64 > rules.overlap_max * b.area() as f64);
        if crowded {
            drops.overlapping += 1;
            continue;
        }
        if b.square_crop(width, height).is_none() {
            drops.oversize += 1;
            continue;
        }
        kept.push(*b);
    }
    (kept, drops)
}

/// Square crop of an RGB frame resized to `size` squared with a triangle filter.
pub fn crop_and_resize(color: &[u8], width: u32, height: u32, crop: (u32, u32, u32), size: u32) -> Vec<u8> {
    let (x, y, side) = crop;
    let mut buf = Vec::with_capacity((side * side * 3) as usize);
    for j in y..y + side {
        let start = ((j * width + x) * 3) as usize;
        buf.extend_from_slice(&color[start..start + (side * 3) as usize]);
    }
    debug_assert!(y + side <= height);
    let img = RgbImage::from_raw(side, side, buf).expect("crop buffer has the right size");
    if side == size {
        return img.into_raw();
    }
    imageops::resize(&img, size, size, imageops::FilterType::Triangle).into_raw()
}

/// Runs the full extraction on one frame.
pub fn extract_patches(frame: &FrameSet, rules: &ExtractionRules, src: &mut RandomSource) -> Extraction {
    let (w, h) = (frame.width as u32, frame.height as u32);
    let foreground = boxes_from_mask(&frame.semantic, &frame.instance, frame.width, frame.height);
    let (kept, mut drops) = filter_foreground(&foreground, w, h, rules);
    let (background, rejected) = sample_background_boxes(w, h, &foreground, rules, src);
    drops.background_rejected = rejected;
    let patches = kept
        .iter()
        .chain(&background)
        .map(|b| {
            let crop = b.square_crop(w, h).expect("filtered above");
            PatchRecord {
                image: crop_and_resize(&frame.color, w, h, crop, rules.resize_to),
                label: b.label,
                frame_index: frame.meta.frame_index,
                subsequence_index: frame.meta.subsequence_index,
                bbox: *b,
                crop,
            }
        })
        .collect();
    Extraction { patches, foreground, background, drops }
}

/// Consecutive frames with byte-identical color buffers carry no new content.
pub fn is_duplicate_frame(current: &FrameSet, previous: &FrameSet) -> bool {
    current.color == previous.color
}
