use super::*;
use crate::model::{LightingState, WeatherKind};
use crate::rng::{derive_source, SeedPath};

fn world(kind: WeatherKind, lux: f64) -> WorldState {
    WorldState {
        existence: [true; 5],
        weather: WeatherState {
            kind,
            fog_active: kind == WeatherKind::Fog,
            clouds_active: kind == WeatherKind::Overcast,
            density: 0.8,
            ground_density: 0.8,
            lens_effect: 0.8,
        },
        lighting: LightingState { intensity_lux: lux, daytime_hours: 12.0 },
        render: RenderState::ALL_ON,
    }
}

fn meta(w: WorldState) -> FrameMeta {
    FrameMeta { time: 0.0, frame_index: 0, subsequence_index: 0, tile_index: 0, world: w }
}

fn small() -> CameraIntrinsics {
    CameraIntrinsics { width: 160, height: 90, ..CameraIntrinsics::default() }
}

fn entity(category: Category, x: f64, y: f64, uid: u64) -> SceneEntity {
    SceneEntity { category, model_id: 0, pose: Pose2::new(x, y, 0.3), uid, phase: 0.7 }
}

fn render(entities: &[SceneEntity], w: WorldState, intr: &CameraIntrinsics) -> FrameSet {
    let ground = GroundMap::new(std::iter::empty());
    let mut src = derive_source(1, &SeedPath::root("render-test", 0));
    render_frame(
        &Scene { entities, ground: &ground },
        Pose2::IDENTITY,
        1.5,
        intr,
        &w,
        &RenderModes::ALL,
        &mut src,
        meta(w),
    )
}

#[test]
fn empty_scene_depth_matches_ray_ground_intersection() {
    let intr = small();
    let f = render(&[], world(WeatherKind::Clear, 20.0), &intr);
    let focal = intr.focal_px();
    let (cx, cy) = (80.0, 45.0);
    for j in 0..90 {
        for i in 0..160 {
            let d = f.depth[j * 160 + i];
            let py = j as f64 + 0.5;
            if py <= cy {
                assert_eq!(d, DEPTH_SKY);
                assert_eq!(f.semantic[j * 160 + i], crate::LABEL_SKY);
                continue;
            }
            let (x, y) = ((i as f64 + 0.5 - cx) / focal, (py - cy) / focal);
            let range = 1.5 / y * (1.0 + x * x + y * y).sqrt();
            if range > intr.far {
                continue;
            }
            let got = f64::from(d) * DEPTH_SCALE;
            assert!((got - range).abs() <= 0.005 * range + DEPTH_SCALE / 2.0, "({i},{j}) {got} vs {range}");
        }
    }
}

#[test]
fn labels_and_instances_are_consistent() {
    let es = [
        entity(Category::Tree, 12.0, 4.0, 1 << 8),
        entity(Category::Vehicle, 15.0, -2.5, 2 << 8),
        entity(Category::Human, 9.0, -3.0, 3 << 8),
        entity(Category::Building, 30.0, 14.0, 4 << 8),
    ];
    let f = render(&es, world(WeatherKind::Clear, 20.0), &small());
    let mut seen = [false; 6];
    for (l, id) in f.semantic.iter().zip(&f.instance) {
        assert!([0, 1, 2, 3, 4, 255].contains(l));
        if *id > 0 {
            assert_eq!(f.instances[*id as usize - 1].label, *l);
        } else {
            assert!(*l == 0 || *l == 255);
        }
        seen[usize::from(*l).min(5)] = true;
    }
    assert!(seen[1] && seen[3] && seen[4]);
}

#[test]
fn weather_only_touches_color() {
    let es = [entity(Category::Tree, 12.0, 4.0, 1 << 8), entity(Category::Vehicle, 15.0, -2.5, 2 << 8)];
    let base = render(&es, world(WeatherKind::Clear, 20.0), &small());
    for kind in WeatherKind::ALL {
        let f = render(&es, world(kind, 20.0), &small());
        assert_eq!(f.semantic, base.semantic);
        assert_eq!(f.depth, base.depth);
        assert_eq!(f.normal, base.normal);
        assert_eq!(f.instance, base.instance);
        if kind != WeatherKind::Clear {
            assert_ne!(f.color, base.color, "{kind:?}");
        }
    }
}

#[test]
fn brighter_light_is_brighter() {
    let es = [entity(Category::Building, 25.0, 12.0, 1 << 8)];
    let mean = |lux: f64| {
        let f = render(&es, world(WeatherKind::Clear, lux), &small());
        f.color.iter().map(|&v| f64::from(v)).sum::<f64>() / f.color.len() as f64
    };
    let m: Vec<f64> = [76.8, 19.2, 9.6, 2.4, 1.2].into_iter().map(mean).collect();
    assert!(m.windows(2).all(|w| w[0] > w[1]), "{m:?}");
}

#[test]
fn normals_face_the_camera() {
    let f = render(&[], world(WeatherKind::Clear, 20.0), &small());
    // ground normal is world up, which is camera +y (up) when looking level
    let j = 80;
    let p = &f.normal[(j * 160 + 80) * 3..][..3];
    assert_eq!(p, &[128, 255, 128]);
    assert_eq!(&f.normal[..3], &[0, 0, 0]);
}

#[test]
fn culled_entities_leave_no_trace() {
    let behind = [entity(Category::Vehicle, -20.0, 0.0, 9 << 8)];
    let f = render(&behind, world(WeatherKind::Clear, 20.0), &small());
    assert!(f.instances.is_empty());
    assert!(f.instance.iter().all(|&i| i == 0));
}
