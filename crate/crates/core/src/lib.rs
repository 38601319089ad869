//! Headless engine for object-anchored audio augmented reality soundscapes.
//!
//! Virtual broadcasts are arranged around a tracked artefact. A listener's
//! position (bearing around the anchor), proximity (distance to the emission
//! point) and focus (device heading relative to the object) select, attenuate
//! and pan the content they hear.

pub mod analytics;
pub mod geometry;
pub mod mix;
pub mod render;
pub mod scene;
pub mod sessions;
pub mod trace;
pub mod tracking;

pub use analytics::{
    AnalyticsReport, ClassifierThresholds, PhaseLabel, PhaseSegment, SessionStats,
};
pub use geometry::{ListenerPose, Vec2};
pub use mix::{compute_mix, Focus, MixState, SourceMix, StaticMix, Zone, ZoneEvent, ZoneEventKind};
pub use render::{PcmBuffer, RenderConfig};
pub use scene::Scene;
pub use trace::{SessionEvent, SessionTrace, TraceSample};
pub use tracking::{Tracker, TrackerConfig, TrackingMode, TrackingState};
