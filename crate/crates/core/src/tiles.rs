//! Street tiles: layouts, anchor chaining, population and the sliding window.
//!
//! Every tile is a 30 m square whose entry anchor sits at the local origin,
//! heading +x. The camera track runs along the tile centerline; positions on a
//! tile are expressed either in local meters or in track coordinates
//! `(s, d)`, with `s` the arc length along the centerline and `d` the lateral
//! offset, positive to the left.

use std::collections::VecDeque;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::assets::{Category, Gait};
use crate::geometry::{floor_i64, snap_right_angle, Pose2};
use crate::model::{sample_object_counts, StreamSchedule, SubSequenceParams, WorldState};
use crate::rng::{
    derive_source, sample_bernoulli, sample_categorical, sample_normal, sample_uniform,
    RandomSource, SeedPath,
};

pub const TILE_SIZE: f64 = 30.0;
pub const STREET_HALF_WIDTH: f64 = 5.0;
pub const SIDEWALK_OUTER: f64 = 8.0;
pub const CURVE_RADIUS: f64 = 15.0;
/// Centerline coordinate of the branch street on crossing tiles.
pub const BRANCH_S: f64 = 15.0;
/// Lateral offset of the forward driving lane.
pub const LANE_OFFSET: f64 = -2.5;
pub const PLACEMENT_ATTEMPTS: usize = 16;
pub const PEDESTRIAN_SPEED: f64 = 1.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutKind {
    Straight,
    CurveLeft,
    CurveRight,
    CrossingTLeft,
    CrossingTRight,
    CrossingX,
}

impl LayoutKind {
    pub const ALL: [LayoutKind; 6] = [
        LayoutKind::Straight,
        LayoutKind::CurveLeft,
        LayoutKind::CurveRight,
        LayoutKind::CrossingTLeft,
        LayoutKind::CrossingTRight,
        LayoutKind::CrossingX,
    ];
    pub const STRAIGHTS: [LayoutKind; 1] = [LayoutKind::Straight];
    pub const CURVES: [LayoutKind; 2] = [LayoutKind::CurveLeft, LayoutKind::CurveRight];
    pub const CROSSINGS: [LayoutKind; 3] = [
        LayoutKind::CrossingTLeft,
        LayoutKind::CrossingTRight,
        LayoutKind::CrossingX,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LayoutKind::Straight => "straight",
            LayoutKind::CurveLeft => "curve_left",
            LayoutKind::CurveRight => "curve_right",
            LayoutKind::CrossingTLeft => "crossing_t_left",
            LayoutKind::CrossingTRight => "crossing_t_right",
            LayoutKind::CrossingX => "crossing_x",
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    pub fn is_curve(self) -> bool {
        matches!(self, LayoutKind::CurveLeft | LayoutKind::CurveRight)
    }

    pub fn is_crossing(self) -> bool {
        matches!(
            self,
            LayoutKind::CrossingTLeft | LayoutKind::CrossingTRight | LayoutKind::CrossingX
        )
    }

    /// Does a branch street leave the tile on the left (`d > 0`) side?
    pub fn branch_left(self) -> bool {
        matches!(self, LayoutKind::CrossingTLeft | LayoutKind::CrossingX)
    }

    pub fn branch_right(self) -> bool {
        matches!(self, LayoutKind::CrossingTRight | LayoutKind::CrossingX)
    }

    /// +1 for a left turn, -1 for a right turn, 0 otherwise.
    fn turn(self) -> f64 {
        match self {
            LayoutKind::CurveLeft => 1.0,
            LayoutKind::CurveRight => -1.0,
            _ => 0.0,
        }
    }

    pub fn layout(self) -> &'static TileLayout {
        static LAYOUTS: OnceLock<Vec<TileLayout>> = OnceLock::new();
        &LAYOUTS.get_or_init(|| LayoutKind::ALL.iter().map(|&k| TileLayout::build(k)).collect())
            [self.index()]
    }
}

/// Ground surface classes of the tile band layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ground {
    Street,
    Marking,
    Sidewalk,
    Terrain,
}

/// Rectangle in track coordinates. Positions are drawn uniformly over `s` and `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpawnVolume {
    pub s: (f64, f64),
    pub d: (f64, f64),
    /// Entity heading relative to the local track heading.
    pub facing: f64,
}

impl SpawnVolume {
    fn area_weight(&self) -> f64 {
        // degenerate (line) volumes still need a non-zero share
        (self.s.1 - self.s.0) * (self.d.1 - self.d.0).max(0.1)
    }

    pub fn contains(&self, s: f64, d: f64) -> bool {
        (self.s.0..=self.s.1).contains(&s) && (self.d.0..=self.d.1).contains(&d)
    }

    fn sample(&self, src: &mut RandomSource) -> (f64, f64) {
        (
            sample_uniform(src, self.s.0, self.s.1),
            sample_uniform(src, self.d.0, self.d.1),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TileLayout {
    pub kind: LayoutKind,
    pub entry: Pose2,
    pub exit: Pose2,
    /// Centerline arc length.
    pub length: f64,
    /// Indexed by [`Category::index`].
    pub spawn_volumes: [Vec<SpawnVolume>; 5],
}

impl TileLayout {
    fn build(kind: LayoutKind) -> Self {
        let r = CURVE_RADIUS;
        let (exit, length) = match kind {
            LayoutKind::CurveLeft => (Pose2::new(r, r, FRAC_PI_2), FRAC_PI_2 * r),
            LayoutKind::CurveRight => (Pose2::new(r, -r, -FRAC_PI_2), FRAC_PI_2 * r),
            _ => (Pose2::new(TILE_SIZE, 0.0, 0.0), TILE_SIZE),
        };
        let l = length;
        let k = l / TILE_SIZE;
        let sides: &[f64] = &[1.0, -1.0];
        let mut vols: [Vec<SpawnVolume>; 5] = Default::default();
        for &side in sides {
            let branch = (side > 0.0 && kind.branch_left()) || (side < 0.0 && kind.branch_right());
            // buildings stay off the inner side of curves and off branch sides
            let inner = kind.turn() == side;
            let band = |lo: f64, hi: f64| if side > 0.0 { (lo, hi) } else { (-hi, -lo) };
            let facing = if side > 0.0 { -FRAC_PI_2 } else { FRAC_PI_2 };
            if !branch && !inner {
                vols[Category::Building.index()].push(SpawnVolume { s: (6.0 * k, 24.0 * k), d: band(11.5, 13.0), facing });
            }
            let s_ranges: Vec<(f64, f64)> = if branch {
                vec![(0.5, 6.5), (23.5, 29.5)]
            } else {
                vec![(1.0, l - 1.0)]
            };
            // lamps line the left sidewalk and trees the right one, so that
            // canopies do not crowd the lamps in the image
            for s in s_ranges {
                if side > 0.0 {
                    vols[Category::Lamp.index()].push(SpawnVolume { s, d: band(5.2, 5.5), facing });
                    vols[Category::Human.index()].push(SpawnVolume { s, d: band(5.9, 7.8), facing: 0.0 });
                } else {
                    vols[Category::Tree.index()].push(SpawnVolume { s, d: band(5.9, 6.6), facing: 0.0 });
                    vols[Category::Human.index()].push(SpawnVolume { s, d: band(6.9, 7.8), facing: 0.0 });
                }
            }
        }
        vols[Category::Vehicle.index()].push(SpawnVolume {
            s: (3.0, l - 3.0),
            d: (LANE_OFFSET, LANE_OFFSET),
            facing: 0.0,
        });
        Self {
            kind,
            entry: Pose2::IDENTITY,
            exit,
            length,
            spawn_volumes: vols,
        }
    }

    /// Local pose at track coordinates `(s, d)`; heading is the track heading.
    pub fn local_pose(&self, s: f64, d: f64) -> Pose2 {
        let r = CURVE_RADIUS;
        match self.kind {
            LayoutKind::CurveLeft => {
                let phi = s / r;
                let (sn, cs) = phi.sin_cos();
                Pose2::new((r - d) * sn, r - (r - d) * cs, phi)
            }
            LayoutKind::CurveRight => {
                let phi = s / r;
                let (sn, cs) = phi.sin_cos();
                Pose2::new((r + d) * sn, -r + (r + d) * cs, -phi)
            }
            _ => Pose2::new(s, d, 0.0),
        }
    }

    /// Inverse of [`TileLayout::local_pose`] for points on the tile.
    pub fn track_coords(&self, x: f64, y: f64) -> (f64, f64) {
        let r = CURVE_RADIUS;
        match self.kind {
            LayoutKind::CurveLeft => {
                let phi = x.atan2(r - y);
                (phi * r, r - x.hypot(r - y))
            }
            LayoutKind::CurveRight => {
                let phi = x.atan2(y + r);
                (phi * r, x.hypot(y + r) - r)
            }
            _ => (x, y),
        }
    }

    /// Surface class at local point `(x, y)` inside the tile square.
    pub fn ground(&self, x: f64, y: f64) -> Ground {
        let (s, d) = self.track_coords(x, y);
        let ad = d.abs();
        let mut dist = ad;
        if self.kind.is_crossing() {
            let on_branch = (d > 0.0 && self.kind.branch_left()) || (d < 0.0 && self.kind.branch_right());
            if on_branch {
                dist = dist.min((s - BRANCH_S).abs());
            }
        }
        if dist < STREET_HALF_WIDTH {
            // dashed center line along the main street only
            if ad < 0.08 && (s.rem_euclid(6.0)) < 3.0 && !(self.kind.is_crossing() && (s - BRANCH_S).abs() < STREET_HALF_WIDTH) {
                Ground::Marking
            } else {
                Ground::Street
            }
        } else if dist < SIDEWALK_OUTER {
            Ground::Sidewalk
        } else {
            Ground::Terrain
        }
    }

    /// Uniform draw over the union of `volumes`, weighted by rectangle area.
    fn sample_in(volumes: &[SpawnVolume], src: &mut RandomSource) -> (usize, f64, f64) {
        let total: f64 = volumes.iter().map(SpawnVolume::area_weight).sum();
        let mut u = src.next_f64() * total;
        let mut pick = volumes.len() - 1;
        for (i, v) in volumes.iter().enumerate() {
            u -= v.area_weight();
            if u < 0.0 {
                pick = i;
                break;
            }
        }
        let (s, d) = volumes[pick].sample(src);
        (pick, s, d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HumanState {
    pub gait: Gait,
    pub target_s: f64,
    pub target_d: f64,
    pub speed: f64,
    /// Gait phase in radians; advances while walking.
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DynamicState {
    Human(HumanState),
    Vehicle { speed: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedEntity {
    pub category: Category,
    pub model_id: usize,
    /// Track coordinates on the owning tile.
    pub s: f64,
    pub d: f64,
    /// Local pose on the owning tile.
    pub pose: Pose2,
    pub footprint: f64,
    /// Index into the owning layout's spawn volume list for this category.
    pub volume: usize,
    pub dynamic: Option<DynamicState>,
    /// Stable per-stream identity, used for instance ids in the renderer.
    pub uid: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TileInstance {
    pub kind: LayoutKind,
    pub world_pose: Pose2,
    pub tile_index: u64,
    pub subsequence_index: usize,
    /// Arc length of the whole track at this tile's entry anchor.
    pub arc_start: f64,
    pub entities: Vec<PlacedEntity>,
    /// Entities dropped after exhausting placement attempts, per category.
    pub drops: [u32; 5],
    /// Counts drawn before placement, per category.
    pub drawn: [u32; 5],
}

impl TileInstance {
    pub fn layout(&self) -> &'static TileLayout {
        self.kind.layout()
    }

    pub fn arc_end(&self) -> f64 {
        self.arc_start + self.layout().length
    }

    pub fn world_exit(&self) -> Pose2 {
        let p = self.world_pose.compose(&self.layout().exit);
        Pose2::new(p.x, p.y, snap_right_angle(p.heading))
    }

    /// World pose at track coordinates `(s, d)` of this tile.
    pub fn world_at(&self, s: f64, d: f64) -> Pose2 {
        self.world_pose.compose(&self.layout().local_pose(s, d))
    }

    pub fn count(&self, c: Category) -> usize {
        self.entities.iter().filter(|e| e.category == c).count()
    }
}

/// Seed path of all draws that belong to tile `index`.
pub fn tile_path(index: u64) -> SeedPath {
    SeedPath::root("tile", index)
}

/// Picks the next layout, advancing the straight-run counter.
pub fn next_layout(run_remaining: &mut u32, params: &SubSequenceParams, src: &mut RandomSource) -> LayoutKind {
    let street = &params.street;
    if *run_remaining > 0 {
        *run_remaining -= 1;
        return LayoutKind::STRAIGHTS[sample_categorical(src, &street.straight)];
    }
    let kind = if sample_bernoulli(src, 0.5) {
        LayoutKind::CURVES[sample_categorical(src, &street.curves)]
    } else {
        LayoutKind::CROSSINGS[sample_categorical(src, &street.crossings)]
    };
    *run_remaining = straight_run_length(params, src);
    kind
}

pub fn straight_run_length(params: &SubSequenceParams, src: &mut RandomSource) -> u32 {
    let n = sample_normal(src, params.street.run_mean, params.street.run_sd).round();
    n.max(1.0) as u32
}

/// Places the tile after `prev` (or at the origin) with its entry on the predecessor's exit.
pub fn attach_tile(prev: Option<&TileInstance>, kind: LayoutKind, tile_index: u64, subsequence_index: usize) -> TileInstance {
    let (world_pose, arc_start) = match prev {
        Some(p) => (p.world_exit().compose(&kind.layout().entry.inverse()), p.arc_end()),
        None => (Pose2::IDENTITY, 0.0),
    };
    TileInstance {
        kind,
        world_pose,
        tile_index,
        subsequence_index,
        arc_start,
        entities: Vec::new(),
        drops: [0; 5],
        drawn: [0; 5],
    }
}

/// Draws assets and positions for `counts` entities per category.
pub fn populate_tile(
    tile: &mut TileInstance,
    state: &WorldState,
    counts: &[u32; 5],
    params: &SubSequenceParams,
    src: &mut RandomSource,
) {
    let layout = tile.layout();
    tile.drawn = *counts;
    for c in Category::ALL {
        let n = if state.exists(c) { counts[c.index()] } else { 0 };
        let volumes = &layout.spawn_volumes[c.index()];
        if volumes.is_empty() {
            tile.drops[c.index()] += n;
            continue;
        }
        let first = tile.entities.len();
        for _ in 0..n {
            let model_id = sample_categorical(src, &params.assets[c.index()]);
            let mut placed = None;
            for _ in 0..PLACEMENT_ATTEMPTS {
                let (vi, s, d) = TileLayout::sample_in(volumes, src);
                let pose = layout.local_pose(s, d);
                let clear = tile.entities[first..]
                    .iter()
                    .all(|e| e.pose.distance(&pose) >= 2.0 * c.footprint());
                if clear {
                    placed = Some((vi, s, d, pose));
                    break;
                }
            }
            let Some((vi, s, d, pose)) = placed else {
                tile.drops[c.index()] += 1;
                continue;
            };
            let vol = &volumes[vi];
            let dynamic = match c {
                Category::Human => {
                    let gait = Gait::ALL[sample_categorical(src, &params.animation)];
                    let (ts, td) = match gait {
                        Gait::Walk => vol.sample(src),
                        Gait::StandIdle => (s, d),
                    };
                    Some(DynamicState::Human(HumanState {
                        gait,
                        target_s: ts,
                        target_d: td,
                        speed: PEDESTRIAN_SPEED,
                        phase: src.next_f64() * 2.0 * PI,
                    }))
                }
                Category::Vehicle => Some(DynamicState::Vehicle {
                    speed: params.vehicle_speed.sample(src),
                }),
                _ => None,
            };
            let facing = match dynamic {
                Some(DynamicState::Human(h)) if h.gait == Gait::Walk => {
                    if h.target_s >= s { 0.0 } else { PI }
                }
                _ => vol.facing,
            };
            let uid = (tile.tile_index << 8) | (tile.entities.len() as u64);
            tile.entities.push(PlacedEntity {
                category: c,
                model_id,
                s,
                d,
                pose: Pose2::new(pose.x, pose.y, pose.heading + facing),
                footprint: c.footprint(),
                volume: vi,
                dynamic,
                uid,
            });
        }
    }
}

/// Everything tile generation needs besides the window itself.
#[derive(Debug, Clone)]
pub struct GeneratorContext {
    pub schedule: StreamSchedule,
    /// Sub-sequence-level variables, one per sub-sequence.
    pub world_states: Vec<WorldState>,
}

impl GeneratorContext {
    pub fn new(schedule: StreamSchedule) -> Self {
        let world_states = schedule
            .subsequences
            .iter()
            .enumerate()
            .map(|(t, p)| crate::model::sample_world_state(p, schedule.seed, t))
            .collect();
        Self { schedule, world_states }
    }

    pub fn seed(&self) -> u64 {
        self.schedule.seed
    }

    /// Builds tile `index` after `prev`, drawing layout, counts and placement.
    pub fn spawn_tile(&self, prev: Option<&TileInstance>, index: u64, run_remaining: &mut u32) -> TileInstance {
        let t = self.schedule.subsequence_of_tile(index);
        let params = &self.schedule.subsequences[t];
        let state = &self.world_states[t];
        let base = tile_path(index);
        let kind = if index == 0 {
            LayoutKind::Straight
        } else {
            next_layout(run_remaining, params, &mut derive_source(self.seed(), &base.child("layout", 0)))
        };
        let mut tile = attach_tile(prev, kind, index, t);
        let counts = sample_object_counts(
            params,
            &state.existence,
            &mut derive_source(self.seed(), &base.child("counts", 0)),
        );
        populate_tile(
            &mut tile,
            state,
            &counts,
            params,
            &mut derive_source(self.seed(), &base.child("place", 0)),
        );
        tile
    }
}

/// The active tiles around the camera.
#[derive(Debug, Clone)]
pub struct WorldWindow {
    pub tiles: VecDeque<TileInstance>,
    pub straight_run_remaining: u32,
    pub size: usize,
    pub rear_margin: u64,
}

impl WorldWindow {
    pub const REAR_MARGIN: u64 = 1;

    pub fn new(ctx: &GeneratorContext) -> Self {
        let params = &ctx.schedule.subsequences[0];
        let mut src = derive_source(ctx.seed(), &SeedPath::root("window", 0));
        let mut w = Self {
            tiles: VecDeque::new(),
            straight_run_remaining: straight_run_length(params, &mut src),
            size: ctx.schedule.window_size,
            rear_margin: Self::REAR_MARGIN,
        };
        w.advance(0, ctx);
        w
    }

    /// Retires tiles behind `camera_tile - rear_margin` and fills the front up
    /// to the window size. Returns the retired tiles.
    pub fn advance(&mut self, camera_tile: u64, ctx: &GeneratorContext) -> Vec<TileInstance> {
        let first_keep = camera_tile.saturating_sub(self.rear_margin);
        let mut retired = Vec::new();
        while self.tiles.front().is_some_and(|t| t.tile_index < first_keep) {
            retired.extend(self.tiles.pop_front());
        }
        let last = first_keep + self.size as u64 - 1;
        loop {
            let next = self.tiles.back().map_or(0, |t| t.tile_index + 1);
            if next > last {
                break;
            }
            let tile = ctx.spawn_tile(self.tiles.back(), next, &mut self.straight_run_remaining);
            self.tiles.push_back(tile);
        }
        retired
    }

    pub fn get(&self, index: u64) -> Option<&TileInstance> {
        let first = self.tiles.front()?.tile_index;
        self.tiles.get(index.checked_sub(first)? as usize)
    }

    pub fn get_mut(&mut self, index: u64) -> Option<&mut TileInstance> {
        let first = self.tiles.front()?.tile_index;
        self.tiles.get_mut(index.checked_sub(first)? as usize)
    }

    /// Tile containing global arc position `arc`, if active.
    pub fn tile_at_arc(&self, arc: f64) -> Option<&TileInstance> {
        self.tiles.iter().find(|t| arc >= t.arc_start && arc < t.arc_end())
    }

    pub fn front_arc(&self) -> f64 {
        self.tiles.back().map_or(0.0, TileInstance::arc_end)
    }

    pub fn rear_arc(&self) -> f64 {
        self.tiles.front().map_or(0.0, |t| t.arc_start)
    }

    /// Centerline pose at global arc position `arc` with lateral offset `d`.
    pub fn pose_at_arc(&self, arc: f64, d: f64) -> Option<Pose2> {
        let t = self.tile_at_arc(arc)?;
        Some(t.world_at(arc - t.arc_start, d))
    }

    /// Grid lookup of the ground class under world point `(x, y)`.
    pub fn ground_map(&self) -> GroundMap {
        GroundMap::new(self.tiles.iter())
    }
}

/// Dense cell grid over the active tiles. Tiles always sit on the 30 m grid,
/// so each world cell holds at most one tile.
#[derive(Debug, Clone)]
pub struct GroundMap {
    i0: i64,
    j0: i64,
    ni: i64,
    nj: i64,
    cells: Vec<Option<CellTile>>,
}

#[derive(Debug, Clone, Copy)]
struct CellTile {
    kind: LayoutKind,
    x: f64,
    y: f64,
    cos: f64,
    sin: f64,
}

impl GroundMap {
    pub fn new<'a>(tiles: impl Iterator<Item = &'a TileInstance>) -> Self {
        let mut entries = Vec::new();
        for t in tiles {
            let (cx, cy) = t.world_pose.apply(TILE_SIZE / 2.0, 0.0);
            let (sin, cos) = t.world_pose.heading.sin_cos();
            let cell = CellTile { kind: t.kind, x: t.world_pose.x, y: t.world_pose.y, cos, sin };
            entries.push((Self::cell(cx, cy), cell));
        }
        let i0 = entries.iter().map(|e| e.0 .0).min().unwrap_or(0);
        let j0 = entries.iter().map(|e| e.0 .1).min().unwrap_or(0);
        let ni = entries.iter().map(|e| e.0 .0).max().unwrap_or(0) - i0 + 1;
        let nj = entries.iter().map(|e| e.0 .1).max().unwrap_or(0) - j0 + 1;
        let mut cells = vec![None; (ni * nj) as usize];
        for ((i, j), v) in entries {
            cells[((j - j0) * ni + (i - i0)) as usize] = Some(v);
        }
        Self { i0, j0, ni, nj, cells }
    }

    fn cell(x: f64, y: f64) -> (i64, i64) {
        // the first tile spans x in [0, 30) and y in [-15, 15); every later
        // tile lands on the same lattice
        (
            floor_i64(x / TILE_SIZE),
            floor_i64((y + TILE_SIZE / 2.0) / TILE_SIZE),
        )
    }

    pub fn ground(&self, x: f64, y: f64) -> Ground {
        let (i, j) = Self::cell(x, y);
        let (di, dj) = (i - self.i0, j - self.j0);
        if di < 0 || dj < 0 || di >= self.ni || dj >= self.nj {
            return Ground::Terrain;
        }
        match self.cells[(dj * self.ni + di) as usize] {
            Some(t) => {
                let (dx, dy) = (x - t.x, y - t.y);
                t.kind.layout().ground(t.cos * dx + t.sin * dy, -t.sin * dx + t.cos * dy)
            }
            None => Ground::Terrain,
        }
    }
}
