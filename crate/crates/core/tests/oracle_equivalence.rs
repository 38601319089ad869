mod common;

use aurastage_core::analytics::{coverage, CoverageTracker};
use aurastage_core::scene::save_scene;
use aurastage_core::{compute_mix, sessions, ListenerPose, Scene, SessionTrace, Vec2};
use common::oracle::{self, OScene};
use proptest::prelude::*;

fn shifted_scene() -> Scene {
    let mut scene = Scene::listening_session();
    scene.anchor.position = Vec2::new(1.0, -0.5);
    scene.anchor.rotation_deg = 30.0;
    scene.emission_offset = Vec2::new(0.1, 0.2);
    scene.validate().unwrap();
    scene
}

fn check_pose(scene: &Scene, oscene: &OScene, x: f64, y: f64, heading: f64, t: f64) {
    let pose = ListenerPose::new(Vec2::new(x, y), heading, t);
    let mix = compute_mix(scene, &pose, t);
    let o = oracle::evaluate(oscene, x, y, t);
    for (s, os) in mix.sources.iter().zip(&o.sources) {
        assert_eq!(s.source_id, os.id);
        assert!(
            (s.effective_gain - os.gain).abs() < 1e-9,
            "{} at ({x}, {y}): {} vs {}",
            s.source_id,
            s.effective_gain,
            os.gain
        );
        assert_eq!(s.audible, os.audible, "{} at ({x}, {y})", s.source_id);
        assert!((s.playhead_s - os.playhead).abs() < 1e-9);
    }
    assert!(
        (mix.static_bed.gain - o.static_gain).abs() < 1e-9,
        "static at ({x}, {y})"
    );
    assert_eq!(
        mix.static_bed.gain >= scene.audible_threshold && mix.static_bed.gain > 0.0,
        o.static_audible
    );
}

#[test]
fn coarse_grid_matches_oracle() {
    let scene = Scene::listening_session();
    let oscene = OScene::from_json(&save_scene(&scene).unwrap());
    for i in -175..=175 {
        for j in -175..=175 {
            check_pose(&scene, &oscene, i as f64 * 0.02, j as f64 * 0.02, 0.0, 12.5);
        }
    }
}

proptest! {
    #[test]
    fn random_poses_match_oracle(
        x in -4.0..4.0f64,
        y in -4.0..4.0f64,
        heading in -180.0..180.0f64,
        t in 0.0..1000.0f64,
        shifted in any::<bool>(),
    ) {
        let scene = if shifted { shifted_scene() } else { Scene::listening_session() };
        let oscene = OScene::from_json(&save_scene(&scene).unwrap());
        check_pose(&scene, &oscene, x, y, heading, t);
    }
}

fn triples(trace: &SessionTrace) -> Vec<(f64, f64, f64)> {
    trace.samples().iter().map(|s| (s.t, s.x, s.y)).collect()
}

#[test]
fn coverage_matches_per_second_oracle() {
    let scene = Scene::listening_session();
    let oscene = OScene::from_json(&save_scene(&scene).unwrap());
    let traces = [
        sessions::stationary(&scene, 90.0, 0.5, 60.0),
        sessions::source_tour(&scene),
        sessions::phase_walkthrough(&scene),
        sessions::interrupted_dwell(&scene),
        sessions::motionless(&scene, 30.0),
    ];
    for trace in &traces {
        let got = coverage(&scene, trace);
        let (per_clip, fraction) = oracle::coverage(&oscene, &triples(trace));
        assert_eq!(got.unique_heard_s, per_clip);
        assert_eq!(got.coverage_fraction, fraction);
    }
}

#[test]
fn source_tour_coverage() {
    let scene = Scene::listening_session();
    let c = coverage(&scene, &sessions::source_tour(&scene));
    assert_eq!(c.unique_heard_s["paul-temple"], 125.0);
    assert_eq!(c.unique_heard_s["chapel-in-the-valley"], 42.0);
    assert_eq!(c.unique_heard_s["variety-bandbox"], 116.0);
    assert_eq!(c.unique_heard_s["red-planet"], 130.0);
    assert!((c.coverage_fraction - 413.0 / 420.0).abs() < 1e-12);
}

#[test]
fn incremental_coverage_is_monotone_and_bounded() {
    let scene = Scene::listening_session();
    let trace = sessions::source_tour(&scene);
    let mut tracker = CoverageTracker::new(&scene);
    let mut last = 0.0;
    for pose in trace.poses() {
        tracker.observe(&compute_mix(&scene, &pose, pose.t));
        let f = tracker.fraction();
        assert!(f >= last && f <= 1.0);
        last = f;
    }
}
