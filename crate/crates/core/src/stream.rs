//! End-to-end stream orchestration: simulate, render, extract, write.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use crate::config::StreamConfig;
use crate::dynamics::{Simulation, TICKS_PER_FRAME};
use crate::error::{ConfigError, StreamError};
use crate::extract::{extract_patches, Extraction, ExtractionRules};
use crate::output::{
    class_name, write_frame_set, write_png_gray, write_png_rgb, write_telemetry, FrameEntry, ManifestRecord,
    ManifestStats, ManifestWriter, PatchEntry, StreamEntry, SubsequenceEntry, Telemetry,
};
use crate::render::{render_frame, FrameMeta, FrameSet, Scene, DEPTH_SCALE};
use crate::rng::{derive_source, SeedPath};
use crate::tiles::GeneratorContext;
use crate::transforms::{color_ratios, lbp_pack_rgb, lbp_rgb, lbp_visualization};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TransformKind {
    #[default]
    None,
    ColorRatio,
    Lbp,
}

impl TransformKind {
    pub fn name(self) -> &'static str {
        match self {
            TransformKind::None => "none",
            TransformKind::ColorRatio => "colorratio",
            TransformKind::Lbp => "lbp",
        }
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TransformKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [TransformKind::None, TransformKind::ColorRatio, TransformKind::Lbp]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ConfigError::UnknownIdentifier { key: "transform".into(), id: s.into() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub emit_frames: bool,
    pub emit_patches: bool,
    pub transform: TransformKind,
    /// Stop after this many rendered frames even if tiles remain.
    pub max_frames: Option<u64>,
    pub rules: ExtractionRules,
    /// Print a progress line to stderr every this many frames.
    pub progress_every: Option<u64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            emit_frames: false,
            emit_patches: true,
            transform: TransformKind::None,
            max_frames: None,
            rules: ExtractionRules::default(),
            progress_every: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub manifest: PathBuf,
    pub stats: ManifestStats,
    pub telemetry: Telemetry,
}

/// Renders the simulation's current state as frame `frame_index`.
pub fn render_simulation_frame(sim: &Simulation, frame_index: u64) -> FrameSet {
    let schedule = &sim.ctx.schedule;
    let tile = sim.camera_tile();
    let t = tile.subsequence_index;
    let world = sim.ctx.world_states[t];
    let entities = sim.scene_entities();
    let ground = sim.window.ground_map();
    let meta = FrameMeta {
        time: sim.time(),
        frame_index,
        subsequence_index: t,
        tile_index: tile.tile_index,
        world,
    };
    let mut fx = derive_source(schedule.seed, &SeedPath::root("weather_fx", frame_index));
    render_frame(
        &Scene { entities: &entities, ground: &ground },
        sim.camera_pose(),
        sim.camera.height,
        &schedule.camera,
        &world,
        &schedule.modes,
        &mut fx,
        meta,
    )
}

/// Labels present in the frame and the (label, one-based sub-sequence of
/// origin) pairs of visible entities.
fn label_summary(frame: &FrameSet, ctx: &GeneratorContext) -> (Vec<u8>, Vec<(u8, usize)>) {
    let mut present = [false; 256];
    for &l in &frame.semantic {
        present[usize::from(l)] = true;
    }
    let labels = (0..=255u8).filter(|&l| present[usize::from(l)]).collect();
    let mut seen = vec![false; frame.instances.len() + 1];
    for &id in &frame.instance {
        seen[id as usize] = true;
    }
    let origins: BTreeSet<(u8, usize)> = frame
        .instances
        .iter()
        .enumerate()
        .filter(|(i, _)| seen[i + 1])
        .map(|(_, info)| (info.label, ctx.schedule.subsequence_of_tile(info.uid >> 8) + 1))
        .collect();
    (labels, origins.into_iter().collect())
}

struct TileTally {
    drawn: Vec<[u64; 5]>,
    drops: Vec<[u64; 5]>,
    next: u64,
}

impl TileTally {
    fn observe(&mut self, sim: &Simulation) {
        let from = self.next;
        for tile in sim.window.tiles.iter().filter(|t| t.tile_index >= from) {
            let t = tile.subsequence_index;
            for i in 0..5 {
                self.drawn[t][i] += u64::from(tile.drawn[i]);
                self.drops[t][i] += u64::from(tile.drops[i]);
            }
            self.next = tile.tile_index + 1;
        }
    }
}

fn write_patch_files(
    root: &Path,
    ex: &Extraction,
    t: usize,
    frame: u64,
    transform: TransformKind,
    size: u32,
) -> Result<Vec<(String, Vec<String>)>, StreamError> {
    let mut out = Vec::with_capacity(ex.patches.len());
    for (k, p) in ex.patches.iter().enumerate() {
        let rel = format!("{t:02}/{}/{frame:06}_{k:02}.png", class_name(p.label));
        let main = format!("patches/{rel}");
        write_png_rgb(&root.join(&main), size, size, &p.image)?;
        let (w, h) = (size as usize, size as usize);
        let mut extra = Vec::new();
        match transform {
            TransformKind::None => {}
            TransformKind::ColorRatio => {
                let path = format!("patches_colorratio/{rel}");
                write_png_rgb(&root.join(&path), size, size, &color_ratios(&p.image, w, h).to_bytes())?;
                extra.push(path);
            }
            TransformKind::Lbp => {
                let codes = lbp_rgb(&p.image, w, h);
                let path = format!("patches_lbp/{rel}");
                write_png_rgb(&root.join(&path), size, size, &lbp_pack_rgb(&codes))?;
                let vis = format!("patches_lbp_vis/{rel}");
                write_png_gray(&root.join(&vis), size, size, &lbp_visualization(&codes))?;
                extra.push(path);
                extra.push(vis);
            }
        }
        out.push((main, extra));
    }
    Ok(out)
}

/// Generates the stream described by `config` below `root`.
///
/// Output is a pure function of the configuration and options; only
/// `telemetry.json` carries timings.
pub fn run_stream(config: &StreamConfig, root: &Path, options: &RunOptions) -> Result<RunSummary, StreamError> {
    let start = Instant::now();
    let schedule = &config.schedule;
    let hash = config.hash.clone();
    let seed = schedule.seed;
    let mut manifest = ManifestWriter::create(root)?;
    manifest.write(&ManifestRecord::Stream(StreamEntry {
        config_hash: hash.clone(),
        seed,
        subsequences: schedule.subsequences.len(),
        total_tiles: schedule.total_tiles(),
        width: schedule.camera.width,
        height: schedule.camera.height,
        fps: schedule.camera.fps,
        depth_scale: DEPTH_SCALE,
        modes: schedule.modes.names().iter().map(|s| s.to_string()).collect(),
        transform: options.transform.name().into(),
    }))?;

    let ctx = GeneratorContext::new(schedule.clone());
    let n_sub = schedule.subsequences.len();
    let mut sim = Simulation::new(ctx);
    let mut tally = TileTally { drawn: vec![[0; 5]; n_sub], drops: vec![[0; 5]; n_sub], next: 0 };
    let mut records: Vec<ManifestRecord> = Vec::new();
    let mut previous_captured: Option<Vec<u8>> = None;
    let mut generation = 0.0;
    let mut render_time = 0.0;
    let mut frame_index = 0u64;

    while !sim.finished() && options.max_frames.is_none_or(|m| frame_index < m) {
        let gen_start = Instant::now();
        tally.observe(&sim);
        let frame = render_simulation_frame(&sim, frame_index);
        render_time += gen_start.elapsed().as_secs_f64();
        let t = frame.meta.subsequence_index + 1;
        let captured = frame_index.is_multiple_of(u64::from(schedule.capture_stride));
        let duplicate = captured && previous_captured.as_deref() == Some(&frame.color[..]);
        let extraction = (captured && !duplicate && options.emit_patches).then(|| {
            let mut src = derive_source(seed, &SeedPath::root("extract", frame_index));
            extract_patches(&frame, &options.rules, &mut src)
        });
        let (labels, label_origins) = label_summary(&frame, &sim.ctx);
        generation += gen_start.elapsed().as_secs_f64();

        let files = if options.emit_frames {
            write_frame_set(&frame, root, t, &schedule.modes)?.into_iter().collect()
        } else {
            Default::default()
        };
        let ex = extraction.unwrap_or_default();
        let paths = write_patch_files(root, &ex, t, frame_index, options.transform, options.rules.resize_to)?;
        let entry = FrameEntry {
            frame: frame_index,
            t,
            tile: frame.meta.tile_index,
            time: frame.meta.time,
            world: frame.meta.world,
            files,
            labels,
            label_origins,
            captured,
            duplicate,
            boxes: ex.foreground.clone(),
            background: ex.background.clone(),
            drops: ex.drops,
            config_hash: hash.clone(),
            seed,
        };
        let rec = ManifestRecord::Frame(entry);
        manifest.write(&rec)?;
        records.push(rec);
        for (p, (path, transformed)) in ex.patches.iter().zip(paths) {
            let rec = ManifestRecord::Patch(PatchEntry {
                path,
                transformed,
                label: p.label,
                class: class_name(p.label).into(),
                frame: frame_index,
                t,
                bbox: p.bbox,
                crop: [p.crop.0, p.crop.1, p.crop.2],
                config_hash: hash.clone(),
                seed,
            });
            manifest.write(&rec)?;
            records.push(rec);
        }
        if captured {
            previous_captured = Some(frame.color);
        }

        let step_start = Instant::now();
        for _ in 0..TICKS_PER_FRAME {
            sim.step();
        }
        generation += step_start.elapsed().as_secs_f64();
        frame_index += 1;
        if let Some(every) = options.progress_every {
            if frame_index.is_multiple_of(every) {
                eprintln!(
                    "frame {frame_index} tile {}/{} ({:.1} fps)",
                    sim.camera_tile().tile_index,
                    schedule.total_tiles(),
                    frame_index as f64 / generation
                );
            }
        }
    }
    tally.observe(&sim);

    for t in 0..n_sub {
        let rec = ManifestRecord::Subsequence(SubsequenceEntry {
            t: t + 1,
            first_tile: schedule.first_tile(t),
            tiles: schedule.subsequences[t].n_tiles,
            world: sim.ctx.world_states[t],
            drawn: tally.drawn[t],
            placement_drops: tally.drops[t],
            vehicle_spawn_drops: u64::from(sim.spawn_drops[t]),
            config_hash: hash.clone(),
            seed,
        });
        manifest.write(&rec)?;
        records.push(rec);
    }
    manifest.finish()?;

    let elapsed = start.elapsed().as_secs_f64();
    let telemetry = Telemetry {
        frames: frame_index,
        threads: rayon::current_num_threads(),
        modes: schedule.modes.names().iter().map(|s| s.to_string()).collect(),
        elapsed_seconds: elapsed,
        generation_seconds: generation,
        render_seconds: render_time,
        fps_generation: frame_index as f64 / generation.max(1e-9),
        fps_wall: frame_index as f64 / elapsed.max(1e-9),
    };
    write_telemetry(root, &telemetry)?;
    Ok(RunSummary {
        manifest: root.join(crate::output::MANIFEST_FILE),
        stats: ManifestStats::from_records(&records),
        telemetry,
    })
}
