//! On-disk encoding: PNG buffers, the JSON-lines manifest and run telemetry.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use image::{ExtendedColorType, ImageEncoder};
use serde::{Deserialize, Serialize};

use crate::error::StreamError;
use crate::extract::{BoundingBox, DropCounters};
use crate::model::WorldState;
use crate::render::FrameSet;

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const TELEMETRY_FILE: &str = "telemetry.json";

/// Label names indexed by label value for foreground classes and background.
pub const CLASS_NAMES: [&str; 5] = ["background", "tree", "lamp", "human", "vehicle"];

pub fn class_name(label: u8) -> &'static str {
    CLASS_NAMES.get(usize::from(label)).copied().unwrap_or("sky")
}

fn encode(path: &Path, data: &[u8], w: u32, h: u32, kind: ExtendedColorType) -> Result<(), StreamError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| StreamError::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| StreamError::io(path, e))?;
    let mut out = BufWriter::new(file);
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(data, w, h, kind)
        .map_err(|source| StreamError::Image { path: path.to_path_buf(), source })?;
    out.flush().map_err(|e| StreamError::io(path, e))
}

pub fn write_png_rgb(path: &Path, w: u32, h: u32, data: &[u8]) -> Result<(), StreamError> {
    encode(path, data, w, h, ExtendedColorType::Rgb8)
}

pub fn write_png_gray(path: &Path, w: u32, h: u32, data: &[u8]) -> Result<(), StreamError> {
    encode(path, data, w, h, ExtendedColorType::L8)
}

/// 16-bit grayscale. The encoder takes native-endian samples and swaps them
/// to the big-endian order PNG stores.
pub fn write_png_gray16(path: &Path, w: u32, h: u32, data: &[u16]) -> Result<(), StreamError> {
    let bytes: Vec<u8> = data.iter().flat_map(|v| v.to_ne_bytes()).collect();
    encode(path, &bytes, w, h, ExtendedColorType::L16)
}

pub fn read_png_gray16(path: &Path) -> Result<Vec<u16>, StreamError> {
    let img = image::open(path).map_err(|source| StreamError::Image { path: path.to_path_buf(), source })?;
    Ok(img.into_luma16().into_raw())
}

/// Relative path of one buffer of one frame; `t` is one-based.
pub fn frame_file(mode: &str, t: usize, frame: u64) -> String {
    format!("{mode}/{t:02}_{frame:06}.png")
}

/// Writes the enabled buffers of `frames` below `root` and returns
/// `(mode, relative path)` pairs.
pub fn write_frame_set(frames: &FrameSet, root: &Path, t: usize, modes: &crate::render::RenderModes) -> Result<Vec<(String, String)>, StreamError> {
    let (w, h) = (frames.width as u32, frames.height as u32);
    let f = frames.meta.frame_index;
    let mut out = Vec::new();
    let mut emit = |mode: &str| {
        let rel = frame_file(mode, t, f);
        out.push((mode.to_string(), rel.clone()));
        root.join(rel)
    };
    if modes.color {
        write_png_rgb(&emit("color"), w, h, &frames.color)?;
    }
    if modes.semantic {
        write_png_gray(&emit("semantic"), w, h, &frames.semantic)?;
    }
    if modes.depth {
        write_png_gray16(&emit("depth"), w, h, &frames.depth)?;
    }
    if modes.normal {
        write_png_rgb(&emit("normal"), w, h, &frames.normal)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamEntry {
    pub config_hash: String,
    pub seed: u64,
    pub subsequences: usize,
    pub total_tiles: u64,
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    /// Meters per unit in depth images; sky is stored as 65535.
    pub depth_scale: f64,
    pub modes: Vec<String>,
    pub transform: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub frame: u64,
    /// One-based sub-sequence of the tile under the camera.
    pub t: usize,
    pub tile: u64,
    pub time: f64,
    pub world: WorldState,
    pub files: BTreeMap<String, String>,
    /// Semantic labels present anywhere in the frame.
    pub labels: Vec<u8>,
    /// Distinct (label, one-based sub-sequence of the spawning tile) pairs of
    /// visible entities.
    pub label_origins: Vec<(u8, usize)>,
    pub captured: bool,
    pub duplicate: bool,
    pub boxes: Vec<BoundingBox>,
    pub background: Vec<BoundingBox>,
    pub drops: DropCounters,
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchEntry {
    pub path: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transformed: Vec<String>,
    pub label: u8,
    pub class: String,
    pub frame: u64,
    pub t: usize,
    pub bbox: BoundingBox,
    /// `[x, y, side]` of the square crop before resizing.
    pub crop: [u32; 3],
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsequenceEntry {
    pub t: usize,
    pub first_tile: u64,
    pub tiles: u64,
    pub world: WorldState,
    /// Objects drawn per category (B, Tr, Lp, H, V) over the sub-sequence's tiles.
    pub drawn: [u64; 5],
    /// Objects given up for lack of free space, per category.
    pub placement_drops: [u64; 5],
    /// Vehicles not released into traffic because the lane was occupied.
    pub vehicle_spawn_drops: u64,
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ManifestRecord {
    Stream(StreamEntry),
    Frame(FrameEntry),
    Patch(PatchEntry),
    Subsequence(SubsequenceEntry),
}

pub struct ManifestWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl ManifestWriter {
    pub fn create(root: &Path) -> Result<Self, StreamError> {
        fs::create_dir_all(root).map_err(|e| StreamError::io(root, e))?;
        let path = root.join(MANIFEST_FILE);
        let file = File::create(&path).map_err(|e| StreamError::io(&path, e))?;
        Ok(Self { out: BufWriter::new(file), path })
    }

    pub fn write(&mut self, record: &ManifestRecord) -> Result<(), StreamError> {
        let line = serde_json::to_string(record).expect("records always serialize");
        writeln!(self.out, "{line}").map_err(|e| StreamError::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<(), StreamError> {
        self.out.flush().map_err(|e| StreamError::io(&self.path, e))
    }
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRecord>, StreamError> {
    let file = File::open(path).map_err(|e| StreamError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| StreamError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| StreamError::Manifest {
            path: path.to_path_buf(),
            message: format!("line {}: {e}", i + 1),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Wall-clock measurements. Kept out of the manifest so the manifest stays
/// reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Telemetry {
    pub frames: u64,
    pub threads: usize,
    pub modes: Vec<String>,
    pub elapsed_seconds: f64,
    /// Time spent simulating, rendering and extracting, without file output.
    pub generation_seconds: f64,
    pub render_seconds: f64,
    pub fps_generation: f64,
    pub fps_wall: f64,
}

pub fn write_telemetry(root: &Path, t: &Telemetry) -> Result<(), StreamError> {
    let path = root.join(TELEMETRY_FILE);
    let text = serde_json::to_string_pretty(t).expect("telemetry always serializes");
    fs::write(&path, text).map_err(|e| StreamError::io(&path, e))
}

pub fn read_telemetry(root: &Path) -> Result<Option<Telemetry>, StreamError> {
    let path = root.join(TELEMETRY_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|e| StreamError::io(&path, e))?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| StreamError::Manifest { path, message: e.to_string() })
}

/// Aggregates over a manifest, as printed by `stats`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ManifestStats {
    pub frames: u64,
    pub captured: u64,
    pub duplicates: u64,
    /// Patch counts per label (background, tree, lamp, human, vehicle).
    pub patches: [u64; 5],
    /// Patch counts per one-based sub-sequence and label.
    pub patches_by_t: BTreeMap<usize, [u64; 5]>,
    pub drops: DropCounters,
    pub placement_drops: [u64; 5],
    pub vehicle_spawn_drops: u64,
}

impl ManifestStats {
    pub fn from_records(records: &[ManifestRecord]) -> Self {
        let mut s = ManifestStats::default();
        for r in records {
            match r {
                ManifestRecord::Frame(f) => {
                    s.frames += 1;
                    s.captured += u64::from(f.captured);
                    s.duplicates += u64::from(f.duplicate);
                    s.drops.add(&f.drops);
                }
                ManifestRecord::Patch(p) => {
                    let l = usize::from(p.label);
                    s.patches[l] += 1;
                    s.patches_by_t.entry(p.t).or_default()[l] += 1;
                }
                ManifestRecord::Subsequence(q) => {
                    for (a, b) in s.placement_drops.iter_mut().zip(q.placement_drops) {
                        *a += b;
                    }
                    s.vehicle_spawn_drops += q.vehicle_spawn_drops;
                }
                ManifestRecord::Stream(_) => {}
            }
        }
        s
    }

    pub fn total_patches(&self) -> u64 {
        self.patches.iter().sum()
    }

    /// Class-balance table, one row per class plus a total.
    pub fn balance_table(&self) -> String {
        let total = self.total_patches().max(1) as f64;
        let mut out = format!("{:<12}{:>10}{:>9}\n", "class", "patches", "share");
        for (name, n) in CLASS_NAMES.iter().zip(self.patches) {
            out += &format!("{name:<12}{n:>10}{:>8.1}%\n", 100.0 * n as f64 / total);
        }
        out += &format!("{:<12}{:>10}\n", "total", self.total_patches());
        out
    }
}
