//! Scripted reference sessions against a scene, sampled at 10 Hz. Used for
//! fixtures, demos and benchmarks.

use crate::scene::Scene;
use crate::trace::{SessionEvent, SessionTrace, TraceBuilder};

pub const RATE_HZ: f64 = 10.0;

fn start(scene: &Scene, bearing_deg: f64, distance_m: f64) -> TraceBuilder {
    TraceBuilder::around(
        RATE_HZ,
        scene.anchor.position,
        bearing_deg + scene.anchor.rotation_deg,
        distance_m,
    )
}

fn world(scene: &Scene, bearing_deg: f64) -> f64 {
    bearing_deg + scene.anchor.rotation_deg
}

/// Stands still at one spot for `seconds`, with session start and end
/// events.
pub fn stationary(scene: &Scene, bearing_deg: f64, distance_m: f64, seconds: f64) -> SessionTrace {
    start(scene, bearing_deg, distance_m)
        .stand(seconds)
        .mark(SessionEvent::SessionEnd)
        .build()
}

/// Never moves from a spot outside every broadcast zone.
pub fn motionless(scene: &Scene, seconds: f64) -> SessionTrace {
    stationary(scene, 45.0, 1.0, seconds)
}

/// A complete visit: hesitant swaying, a full lap pausing at each source,
/// a return to the first source, then a long listen that ends crouched
/// close to the object.
///
/// Assumes sources sit at bearings 0, 90, 180 and -90.
pub fn phase_walkthrough(scene: &Scene) -> SessionTrace {
    start(scene, 45.0, 1.0)
        .event(SessionEvent::HeadphonesOn)
        .stand(3.0)
        .sway(0.2, 4, 8.0)
        .orbit(45.0, 3.0)
        .stand(5.0)
        .orbit(90.0, 6.0)
        .stand(5.0)
        .orbit(90.0, 6.0)
        .stand(5.0)
        .orbit(90.0, 6.0)
        .stand(5.0)
        .orbit(45.0, 3.0)
        .orbit(-45.0, 3.0)
        .walk_to_polar(world(scene, 0.0), 0.9, 0.5)
        .stand(20.0)
        .walk_to_polar(world(scene, 0.0), 0.4, 2.0)
        .stand(20.0)
        .mark(SessionEvent::SessionEnd)
        .stand(3.0)
        .build()
}

/// Walks into B's zone and listens until interrupted at t = 30 s; the
/// session ends at t = 60 s.
pub fn interrupted_dwell(scene: &Scene) -> SessionTrace {
    start(scene, 45.0, 1.0)
        .stand(2.0)
        .walk_to_polar(world(scene, 90.0), 1.0, 4.0)
        .stand(24.0)
        .mark(SessionEvent::ExternalInterruption)
        .stand(30.0)
        .mark(SessionEvent::SessionEnd)
        .stand(3.0)
        .build()
}

/// Tours the four sources, standing 1 m in front of each (A for 130 s, B
/// for 42 s, C for 116 s, D for 130 s) and stepping out of range between
/// them. Arrivals fall on whole seconds so each stay spans an exact number
/// of clip-seconds.
pub fn source_tour(scene: &Scene) -> SessionTrace {
    let mut b = start(scene, 0.0, 1.0).stand(129.9);
    for (bearing, stay) in [(90.0, 41.9), (180.0, 115.9), (270.0, 129.9)] {
        b = b
            .walk_to_polar(world(scene, bearing - 90.0), 2.5, 0.1)
            .orbit(90.0, 9.9)
            .walk_to_polar(world(scene, bearing), 1.0, 0.1)
            .stand(stay);
    }
    b.mark(SessionEvent::SessionEnd).build()
}

/// Every reference session with the file name it is stored under in
/// `fixtures/traces`.
pub fn reference_traces(scene: &Scene) -> Vec<(&'static str, SessionTrace)> {
    vec![
        ("stationary-b.jsonl", stationary(scene, 90.0, 0.5, 60.0)),
        ("phase-walkthrough.jsonl", phase_walkthrough(scene)),
        ("motionless.jsonl", motionless(scene, 30.0)),
        ("interrupted.jsonl", interrupted_dwell(scene)),
        ("source-tour.jsonl", source_tour(scene)),
        ("duration-180.jsonl", motionless(scene, 180.0)),
        ("duration-214.jsonl", motionless(scene, 214.0)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tour_arrivals_are_on_whole_seconds() {
        let scene = Scene::listening_session();
        let trace = source_tour(&scene);
        let arrivals: Vec<f64> = trace
            .samples()
            .windows(2)
            .filter(|w| {
                let d0 = (w[0].x.powi(2) + w[0].y.powi(2)).sqrt();
                let d1 = (w[1].x.powi(2) + w[1].y.powi(2)).sqrt();
                d0 > 2.0 && d1 < 1.5
            })
            .map(|w| w[1].t)
            .collect();
        assert_eq!(arrivals, vec![140.0, 192.0, 318.0]);
    }

    #[test]
    fn interruption_lands_on_thirty_seconds() {
        let scene = Scene::listening_session();
        let trace = interrupted_dwell(&scene);
        assert_eq!(
            trace.event_time(SessionEvent::ExternalInterruption),
            Some(30.0)
        );
        assert_eq!(trace.event_time(SessionEvent::SessionEnd), Some(60.0));
    }
}
