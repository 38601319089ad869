//! Simulated sensing layer standing in for camera-based image tracking.
//!
//! While the anchor is inside the camera frustum the estimate is the true
//! pose plus small Gaussian jitter. Once it leaves view the simulator keeps
//! dead-reckoning from the last estimate and accumulates a random-direction
//! drift, mirroring extended tracking. With no estimate yet it is lost.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{azimuth_relative, ListenerPose, Vec2};
use crate::trace::SessionTrace;

#[derive(Debug, Error, PartialEq)]
pub enum TrackingError {
    #[error("invalid tracker config: {0}")]
    Config(&'static str),
    #[error("playback rate must be positive, got {0}")]
    Rate(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrackingMode {
    Tracked,
    Extended,
    Lost,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingState {
    pub mode: TrackingMode,
    pub error_estimate_m: f64,
    pub seconds_since_target: f64,
}

impl Default for TrackingState {
    fn default() -> Self {
        Self {
            mode: TrackingMode::Lost,
            error_estimate_m: 0.0,
            seconds_since_target: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub sigma_tracked_m: f64,
    pub drift_rate_mps: f64,
    pub fov_deg: f64,
    pub max_view_m: f64,
    pub seed: u64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            sigma_tracked_m: 0.02,
            drift_rate_mps: 0.03,
            fov_deg: 60.0,
            max_view_m: 5.0,
            seed: 0,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), TrackingError> {
        let non_neg = |v: f64| v.is_finite() && v >= 0.0;
        if !non_neg(self.sigma_tracked_m) {
            return Err(TrackingError::Config(
                "sigma_tracked_m must be non-negative",
            ));
        }
        if !non_neg(self.drift_rate_mps) {
            return Err(TrackingError::Config("drift_rate_mps must be non-negative"));
        }
        if !non_neg(self.max_view_m) {
            return Err(TrackingError::Config("max_view_m must be non-negative"));
        }
        if !(self.fov_deg > 0.0 && self.fov_deg <= 360.0) {
            return Err(TrackingError::Config("fov_deg must be in (0, 360]"));
        }
        Ok(())
    }
}

/// One simulated device. Not shareable across threads concurrently, but
/// cheap to move.
#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: TrackerConfig,
    target: Vec2,
    rng: ChaCha8Rng,
    noise: Normal<f64>,
    state: TrackingState,
    estimate: Option<ListenerPose>,
    last_truth: Option<ListenerPose>,
}

impl Tracker {
    /// `target` is the world position of the tracked image.
    pub fn new(cfg: TrackerConfig, target: Vec2) -> Result<Self, TrackingError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            target,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            noise: Normal::new(0.0, cfg.sigma_tracked_m).expect("sigma validated"),
            state: TrackingState::default(),
            estimate: None,
            last_truth: None,
        })
    }

    pub fn state(&self) -> TrackingState {
        self.state
    }

    pub fn estimate(&self) -> Option<ListenerPose> {
        self.estimate
    }

    /// True when the target is inside the camera frustum of `pose`.
    pub fn target_visible(&self, pose: &ListenerPose) -> bool {
        let d = pose.position.distance(self.target);
        let az = azimuth_relative(pose, self.target).unwrap_or(0.0);
        az.abs() <= self.cfg.fov_deg / 2.0 && d <= self.cfg.max_view_m
    }

    /// Advances by `dt` seconds given the true pose; returns the estimate
    /// (`None` while lost) and the new state.
    pub fn step(&mut self, truth: &ListenerPose, dt: f64) -> (Option<ListenerPose>, TrackingState) {
        debug_assert!(dt > 0.0);
        if self.target_visible(truth) {
            let jitter = Vec2::new(
                self.noise.sample(&mut self.rng),
                self.noise.sample(&mut self.rng),
            );
            self.estimate = Some(ListenerPose {
                position: truth.position + jitter,
                ..*truth
            });
            self.state = TrackingState {
                mode: TrackingMode::Tracked,
                error_estimate_m: self.cfg.sigma_tracked_m,
                seconds_since_target: 0.0,
            };
        } else if let (Some(prev), Some(last)) = (self.estimate, self.last_truth) {
            let direction = self.rng.random_range(-180.0..180.0);
            let drift = Vec2::from_angle_deg(direction) * (self.cfg.drift_rate_mps * dt);
            self.estimate = Some(ListenerPose {
                position: prev.position + (truth.position - last.position) + drift,
                ..*truth
            });
            self.state = TrackingState {
                mode: TrackingMode::Extended,
                error_estimate_m: self.state.error_estimate_m + self.cfg.drift_rate_mps * dt,
                seconds_since_target: self.state.seconds_since_target + dt,
            };
        } else {
            self.state = TrackingState {
                mode: TrackingMode::Lost,
                error_estimate_m: 0.0,
                seconds_since_target: self.state.seconds_since_target + dt,
            };
        }
        self.last_truth = Some(*truth);
        (self.estimate, self.state)
    }
}

/// Resamples a trace at a fixed rate. The stream is unbounded and holds the
/// last sample after the trace ends; bound it with `take` or
/// [`Playback::until_end`].
#[derive(Debug, Clone)]
pub struct Playback<'a> {
    trace: &'a SessionTrace,
    rate_hz: f64,
    index: u64,
}

pub fn playback(trace: &SessionTrace, rate_hz: f64) -> Result<Playback<'_>, TrackingError> {
    if !(rate_hz.is_finite() && rate_hz > 0.0) {
        return Err(TrackingError::Rate(rate_hz));
    }
    Ok(Playback {
        trace,
        rate_hz,
        index: 0,
    })
}

impl<'a> Playback<'a> {
    /// Stops after the tick at or just before the final sample time.
    pub fn until_end(self) -> impl Iterator<Item = ListenerPose> + 'a {
        let end = self.trace.end_t();
        self.take_while(move |p| p.t <= end + 1e-9)
    }
}

impl Iterator for Playback<'_> {
    type Item = ListenerPose;

    fn next(&mut self) -> Option<ListenerPose> {
        let t = self.trace.start_t() + self.index as f64 / self.rate_hz;
        self.index += 1;
        Some(self.trace.pose_at(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::TraceSample;

    fn sample(t: f64, x: f64, heading: f64) -> TraceSample {
        TraceSample {
            t,
            x,
            y: 0.0,
            heading_deg: heading,
            event: None,
        }
    }

    #[test]
    fn zero_noise_tracked_equals_truth() {
        let cfg = TrackerConfig {
            sigma_tracked_m: 0.0,
            ..Default::default()
        };
        let mut tr = Tracker::new(cfg, Vec2::ZERO).unwrap();
        let truth = ListenerPose::facing(Vec2::new(1.0, 0.5), Vec2::ZERO, 0.1);
        let (est, st) = tr.step(&truth, 0.1);
        assert_eq!(est, Some(truth));
        assert_eq!(st.mode, TrackingMode::Tracked);
    }

    #[test]
    fn never_visible_stays_lost() {
        let mut tr = Tracker::new(TrackerConfig::default(), Vec2::ZERO).unwrap();
        for i in 0..50 {
            let away = ListenerPose::new(Vec2::new(1.0, 0.0), 0.0, i as f64 * 0.1);
            let (est, st) = tr.step(&away, 0.1);
            assert_eq!(est, None);
            assert_eq!(st.mode, TrackingMode::Lost);
        }
    }

    #[test]
    fn out_of_view_distance_is_not_visible() {
        let tr = Tracker::new(TrackerConfig::default(), Vec2::ZERO).unwrap();
        assert!(!tr.target_visible(&ListenerPose::facing(Vec2::new(6.0, 0.0), Vec2::ZERO, 0.0)));
        assert!(tr.target_visible(&ListenerPose::facing(Vec2::new(4.0, 0.0), Vec2::ZERO, 0.0)));
        let oblique = ListenerPose::new(Vec2::new(1.0, 0.0), 180.0 + 31.0, 0.0);
        assert!(!tr.target_visible(&oblique));
    }

    #[test]
    fn extended_follows_motion_and_accumulates_error() {
        let cfg = TrackerConfig {
            sigma_tracked_m: 0.0,
            drift_rate_mps: 0.0,
            ..Default::default()
        };
        let mut tr = Tracker::new(cfg, Vec2::ZERO).unwrap();
        tr.step(
            &ListenerPose::facing(Vec2::new(1.0, 0.0), Vec2::ZERO, 0.0),
            0.1,
        );
        let moved = ListenerPose::new(Vec2::new(1.5, 0.2), 0.0, 0.1);
        let (est, st) = tr.step(&moved, 0.1);
        assert_eq!(st.mode, TrackingMode::Extended);
        let est = est.unwrap();
        assert!(est.position.distance(moved.position) < 1e-12);

        let cfg = TrackerConfig {
            drift_rate_mps: 0.05,
            ..cfg
        };
        let mut tr = Tracker::new(cfg, Vec2::ZERO).unwrap();
        tr.step(
            &ListenerPose::facing(Vec2::new(1.0, 0.0), Vec2::ZERO, 0.0),
            0.1,
        );
        let mut st = tr.state();
        for i in 1..=20 {
            st = tr
                .step(
                    &ListenerPose::new(Vec2::new(1.0, 0.0), 0.0, i as f64 * 0.1),
                    0.1,
                )
                .1;
        }
        assert!((st.error_estimate_m - 0.1).abs() < 1e-12);
        assert!((st.seconds_since_target - 2.0).abs() < 1e-9);
    }

    #[test]
    fn playback_interpolates_and_holds() {
        let tr =
            SessionTrace::new(vec![sample(0.0, 0.0, 170.0), sample(1.0, 1.0, -170.0)]).unwrap();
        let poses: Vec<_> = playback(&tr, 10.0).unwrap().until_end().collect();
        assert_eq!(poses.len(), 11);
        assert!((poses[5].position.x - 0.5).abs() < 1e-12);
        assert!((poses[5].heading_deg - 180.0).abs() < 1e-9);
        for p in &poses {
            assert!(p.heading_deg > -180.0 && p.heading_deg <= 180.0);
        }
        let held: Vec<_> = playback(&tr, 10.0).unwrap().skip(20).take(3).collect();
        assert!(held.iter().all(|p| p.position.x == 1.0));

        let single = SessionTrace::new(vec![sample(2.0, 0.3, 45.0)]).unwrap();
        let stream: Vec<_> = playback(&single, 5.0).unwrap().take(4).collect();
        assert!(stream
            .iter()
            .all(|p| p.position.x == 0.3 && p.heading_deg == 45.0));
        assert_eq!(stream[3].t, 2.6);
    }

    #[test]
    fn playback_rejects_bad_rate() {
        let single = SessionTrace::new(vec![sample(0.0, 0.0, 0.0)]).unwrap();
        assert!(playback(&single, 0.0).is_err());
    }

    #[test]
    fn bad_config_is_rejected() {
        let cfg = TrackerConfig {
            fov_deg: 0.0,
            ..Default::default()
        };
        assert!(Tracker::new(cfg, Vec2::ZERO).is_err());
    }
}
