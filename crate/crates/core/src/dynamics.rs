//! Time stepping: the camera vehicle on the track, auxiliary traffic in the
//! forward lane, and pedestrians walking to their targets.
//!
//! All vehicles on the track share one longitudinal coordinate, the global arc
//! length of the centerline. Following is resolved front to back so every
//! vehicle sees its leader's already updated speed.

use serde::{Deserialize, Serialize};

use crate::assets::{Category, Gait};
use crate::geometry::Pose2;
use crate::model::sample_camera_model;
use crate::rng::{derive_source, sample_bernoulli, SeedPath};
use crate::tiles::{
    DynamicState, GeneratorContext, PlacedEntity, TileInstance, TileLayout, WorldWindow, BRANCH_S, LANE_OFFSET,
};

pub const VEHICLE_LENGTH: f64 = 4.4;
pub const FOLLOW_DISTANCE: f64 = 8.0;
pub const ACCELERATION: f64 = 2.0;
/// Minimum bumper gap for a newly spawned vehicle.
pub const SPAWN_GAP: f64 = 0.5;
/// Chance that a vehicle takes a right-hand branch when passing one.
pub const TURN_PROBABILITY: f64 = 1.0 / 3.0;
/// Vehicles are dropped this far before the end of the front tile.
const FRONT_MARGIN: f64 = 3.0;
/// Ticks per captured frame.
pub const TICKS_PER_FRAME: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraVehicle {
    pub arc: f64,
    pub speed: f64,
    pub cruise_speed: f64,
    pub height: f64,
    pub model_id: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Lane {
    /// On the track's forward lane at a global arc position.
    Track { arc: f64 },
    /// Leaving along the right-hand branch of a crossing tile.
    Branch { tile_index: u64, dist: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxVehicle {
    pub uid: u64,
    pub model_id: usize,
    pub lane: Lane,
    pub speed: f64,
    /// Desired speed, drawn once at spawn.
    pub spawn_speed: f64,
    pub alive: bool,
}

impl AuxVehicle {
    pub fn arc(&self) -> Option<f64> {
        match self.lane {
            Lane::Track { arc } => Some(arc),
            Lane::Branch { .. } => None,
        }
    }
}

/// New speed under the follow rule. `lead` is `(bumper gap, lead speed)`.
pub fn follow_speed(speed: f64, desired: f64, lead: Option<(f64, f64)>, dt: f64) -> f64 {
    match lead {
        Some((gap, lead_speed)) if gap < FOLLOW_DISTANCE => desired.min(lead_speed).max(0.0),
        _ => (speed + ACCELERATION * dt).min(desired).max(0.0),
    }
}

pub fn control_camera_speed(camera: &CameraVehicle, lead: Option<&AuxVehicle>, dt: f64) -> f64 {
    let lead = lead.and_then(|v| Some((v.arc()? - camera.arc - VEHICLE_LENGTH, v.speed)));
    follow_speed(camera.speed, camera.cruise_speed, lead, dt)
}

/// Keeps the vehicles that are still on active tiles.
pub fn carry_over_vehicles(vehicles: Vec<AuxVehicle>, window: &WorldWindow) -> Vec<AuxVehicle> {
    let front = window.front_arc() - FRONT_MARGIN;
    let rear = window.rear_arc();
    vehicles
        .into_iter()
        .filter(|v| {
            v.alive
                && match v.lane {
                    Lane::Track { arc } => arc >= rear && arc < front,
                    Lane::Branch { tile_index, .. } => window.get(tile_index).is_some(),
                }
        })
        .collect()
}

/// Moves a pedestrian toward its target in track coordinates; idles on arrival.
pub fn step_pedestrian(e: &mut PlacedEntity, layout: &TileLayout, dt: f64) {
    let Some(DynamicState::Human(h)) = &mut e.dynamic else {
        return;
    };
    if h.gait != Gait::Walk {
        return;
    }
    let (ds, dd) = (h.target_s - e.s, h.target_d - e.d);
    let dist = ds.hypot(dd);
    let step = h.speed * dt;
    if dist <= step {
        e.s = h.target_s;
        e.d = h.target_d;
        h.gait = Gait::StandIdle;
    } else {
        e.s += ds / dist * step;
        e.d += dd / dist * step;
        h.phase = (h.phase + step * 2.0).rem_euclid(std::f64::consts::TAU);
    }
    let walking_forward = ds >= 0.0;
    let p = layout.local_pose(e.s, e.d);
    let facing = if walking_forward { 0.0 } else { std::f64::consts::PI };
    e.pose = Pose2::new(p.x, p.y, p.heading + facing);
}

/// Entities of all categories in world coordinates for one render snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneEntity {
    pub category: Category,
    pub model_id: usize,
    pub pose: Pose2,
    pub uid: u64,
    /// Gait phase for pedestrians (0 when idle), 0 otherwise.
    pub phase: f64,
}

/// The full simulated state: window, camera and traffic.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub ctx: GeneratorContext,
    pub window: WorldWindow,
    pub camera: CameraVehicle,
    pub vehicles: Vec<AuxVehicle>,
    pub ticks: u64,
    pub dt: f64,
    /// Vehicles rejected at spawn for lack of space, per sub-sequence.
    pub spawn_drops: Vec<u32>,
    last_spawned: u64,
}

impl Simulation {
    pub fn new(ctx: GeneratorContext) -> Self {
        let window = WorldWindow::new(&ctx);
        let s = &ctx.schedule;
        let camera = CameraVehicle {
            arc: 0.0,
            speed: s.cruise_speed,
            cruise_speed: s.cruise_speed,
            height: s.camera_height,
            model_id: sample_camera_model(&s.subsequences[0], s.seed),
        };
        let dt = 1.0 / (TICKS_PER_FRAME as f64 * s.camera.fps);
        let spawn_drops = vec![0; s.subsequences.len()];
        let mut sim = Self {
            ctx,
            window,
            camera,
            vehicles: Vec::new(),
            ticks: 0,
            dt,
            spawn_drops,
            last_spawned: 0,
        };
        sim.ingest_vehicles(0);
        sim
    }

    pub fn time(&self) -> f64 {
        self.ticks as f64 * self.dt
    }

    pub fn camera_tile(&self) -> &TileInstance {
        self.window
            .tile_at_arc(self.camera.arc)
            .expect("camera is always on an active tile")
    }

    /// Camera pose on the centerline.
    pub fn camera_pose(&self) -> Pose2 {
        self.window
            .pose_at_arc(self.camera.arc, 0.0)
            .expect("camera is always on an active tile")
    }

    /// True once the camera has entered the first tile past the schedule.
    pub fn finished(&self) -> bool {
        self.camera_tile().tile_index >= self.ctx.schedule.total_tiles()
    }

    /// Moves spawned vehicle entities from new tiles into the traffic list.
    fn ingest_vehicles(&mut self, from_index: u64) {
        let mut fresh = Vec::new();
        for tile in self.window.tiles.iter_mut().filter(|t| t.tile_index >= from_index) {
            let arc0 = tile.arc_start;
            let t = tile.subsequence_index;
            let mut keep = Vec::with_capacity(tile.entities.len());
            for e in tile.entities.drain(..) {
                match e.dynamic {
                    Some(DynamicState::Vehicle { speed }) => fresh.push((t, AuxVehicle {
                        uid: e.uid,
                        model_id: e.model_id,
                        lane: Lane::Track { arc: arc0 + e.s },
                        speed,
                        spawn_speed: speed,
                        alive: true,
                    })),
                    _ => keep.push(e),
                }
            }
            tile.entities = keep;
        }
        for (t, v) in fresh {
            let arc = v.arc().unwrap_or_default();
            let blocked = std::iter::once(self.camera.arc)
                .chain(self.vehicles.iter().filter_map(AuxVehicle::arc))
                .any(|other| (other - arc).abs() - VEHICLE_LENGTH < SPAWN_GAP);
            if blocked {
                self.spawn_drops[t] += 1;
            } else {
                self.vehicles.push(v);
            }
        }
        self.last_spawned = self.window.tiles.back().map_or(0, |t| t.tile_index);
    }

    /// Advances the world by one tick.
    pub fn step(&mut self) {
        let dt = self.dt;
        self.step_vehicles(dt);
        for tile in self.window.tiles.iter_mut() {
            let layout = tile.layout();
            for e in tile.entities.iter_mut().filter(|e| e.category == Category::Human) {
                step_pedestrian(e, layout, dt);
            }
        }
        let cam_tile = self.camera_tile().tile_index;
        self.window.advance(cam_tile, &self.ctx);
        let from = self.last_spawned + 1;
        if self.window.tiles.back().is_some_and(|t| t.tile_index >= from) {
            self.ingest_vehicles(from);
        }
        self.vehicles = carry_over_vehicles(std::mem::take(&mut self.vehicles), &self.window);
        self.ticks += 1;
    }

    fn step_vehicles(&mut self, dt: f64) {
        // front-to-back over everything on the track, the camera included
        const CAMERA: usize = usize::MAX;
        let mut order: Vec<(f64, usize)> = self
            .vehicles
            .iter()
            .enumerate()
            .filter_map(|(i, v)| Some((v.arc()?, i)))
            .collect();
        order.push((self.camera.arc, CAMERA));
        order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut lead: Option<(f64, f64)> = None;
        for &(arc, i) in &order {
            let gap = lead.map(|(la, ls)| (la - arc - VEHICLE_LENGTH, ls));
            let speed = if i == CAMERA {
                let s = follow_speed(self.camera.speed, self.camera.cruise_speed, gap, dt);
                self.camera.speed = s;
                s
            } else {
                let v = &mut self.vehicles[i];
                v.speed = follow_speed(v.speed, v.spawn_speed, gap, dt);
                v.speed
            };
            lead = Some((arc, speed));
        }
        self.camera.arc += self.camera.speed * dt;
        let seed = self.ctx.seed();
        for v in &mut self.vehicles {
            match &mut v.lane {
                Lane::Track { arc } => {
                    let before = *arc;
                    *arc += v.speed * dt;
                    let Some(tile) = self.window.tile_at_arc(*arc) else { continue };
                    let turn_at = tile.arc_start + BRANCH_S + LANE_OFFSET;
                    if tile.kind.branch_right() && before < turn_at && *arc >= turn_at {
                        let mut src = derive_source(
                            seed,
                            &SeedPath::root("turn", v.uid).child("tile", tile.tile_index),
                        );
                        if sample_bernoulli(&mut src, TURN_PROBABILITY) {
                            v.lane = Lane::Branch { tile_index: tile.tile_index, dist: *arc - turn_at };
                        }
                    }
                }
                Lane::Branch { dist, .. } => {
                    *dist += v.speed * dt;
                    // off the tile edge
                    if *dist > crate::tiles::TILE_SIZE / 2.0 + LANE_OFFSET {
                        v.alive = false;
                    }
                }
            }
        }
    }

    /// World pose of a vehicle, if it is on an active tile.
    pub fn vehicle_pose(&self, v: &AuxVehicle) -> Option<Pose2> {
        match v.lane {
            Lane::Track { arc } => self.window.pose_at_arc(arc, LANE_OFFSET),
            Lane::Branch { tile_index, dist } => {
                let tile = self.window.get(tile_index)?;
                let x = BRANCH_S + LANE_OFFSET;
                let local = Pose2::new(x, LANE_OFFSET - dist, -std::f64::consts::FRAC_PI_2);
                Some(tile.world_pose.compose(&local))
            }
        }
    }

    /// World-space snapshot of every entity for rendering.
    pub fn scene_entities(&self) -> Vec<SceneEntity> {
        let mut out = Vec::new();
        for tile in &self.window.tiles {
            for e in &tile.entities {
                let phase = match e.dynamic {
                    Some(DynamicState::Human(h)) if h.gait == Gait::Walk => h.phase,
                    _ => 0.0,
                };
                out.push(SceneEntity {
                    category: e.category,
                    model_id: e.model_id,
                    pose: tile.world_pose.compose(&e.pose),
                    uid: e.uid,
                    phase,
                });
            }
        }
        for v in &self.vehicles {
            if let Some(pose) = self.vehicle_pose(v) {
                out.push(SceneEntity {
                    category: Category::Vehicle,
                    model_id: v.model_id,
                    pose,
                    uid: v.uid,
                    phase: 0.0,
                });
            }
        }
        out
    }
}
