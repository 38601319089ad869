//! Rules and conditions: per-tick gains, crossfade weights, panning, focus
//! and zone membership for one listener.
//!
//! Broadcast content is *selected* by the listener's bearing around the
//! anchor but *emitted* from the scene's single emission point, so every
//! channel shares the same distance and azimuth.

use std::collections::BTreeSet;
use std::f64::consts::FRAC_PI_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::{angle_diff, azimuth_relative, bearing_of, ListenerPose};
use crate::scene::{AttenuationParams, BroadcastSource, Scene};

/// Largest |azimuth| at which the listener counts as attending to the object.
pub const DEFAULT_FOCUS_THRESHOLD_DEG: f64 = 30.0;

/// Distance attenuation: unity inside `d_ref`, inverse-power rolloff beyond,
/// and a linear taper over the last `taper_m` so the gain reaches zero at
/// `range_m` without a step.
pub fn distance_gain(d: f64, range_m: f64, p: &AttenuationParams) -> f64 {
    if d.is_nan() || d >= range_m {
        return 0.0;
    }
    let base = if d <= p.d_ref_m {
        1.0
    } else {
        (p.d_ref_m / d).powf(p.rolloff)
    };
    let taper = if p.taper_m > 0.0 {
        ((range_m - d) / p.taper_m).min(1.0)
    } else {
        1.0
    };
    (base * taper).clamp(0.0, 1.0)
}

/// Equal-power pair for one source's angular window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossfadeWeights {
    pub content: f64,
    pub static_complement: f64,
}

pub fn content_weight(delta_deg: f64, src: &BroadcastSource) -> CrossfadeWeights {
    let a = delta_deg.abs();
    if a <= src.full_halfwidth_deg {
        CrossfadeWeights {
            content: 1.0,
            static_complement: 0.0,
        }
    } else if a < src.full_halfwidth_deg + src.transition_deg {
        let theta = (a - src.full_halfwidth_deg) / src.transition_deg * FRAC_PI_2;
        let (s, c) = theta.sin_cos();
        CrossfadeWeights {
            content: c,
            static_complement: s,
        }
    } else {
        CrossfadeWeights {
            content: 0.0,
            static_complement: 1.0,
        }
    }
}

/// Constant-power stereo gains `(left, right)` for a relative azimuth.
/// Sources on the right (negative azimuth) favour the right channel; front
/// and back are not distinguished.
pub fn pan_gains(azimuth_deg: f64) -> (f64, f64) {
    let x = -azimuth_deg.to_radians().sin();
    let left = ((1.0 - x) * 0.5).max(0.0).sqrt();
    let right = ((1.0 + x) * 0.5).max(0.0).sqrt();
    (left, right)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Focus {
    /// The device points at the object from within static range.
    Anchor,
    /// Focused on the object while a broadcast is tuned in and audible.
    Source(String),
}

/// Distance, anchor-frame bearing and relative azimuth of a pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ListenerGeometry {
    pub distance_m: f64,
    pub bearing_deg: f64,
    pub azimuth_deg: f64,
}

impl ListenerGeometry {
    pub fn of(scene: &Scene, pose: &ListenerPose) -> Self {
        let emission = scene.emission_point();
        let distance_m = pose.position.distance(emission);
        // Standing on the anchor or emission point leaves the direction
        // undefined; treat it as bearing 0 / straight ahead.
        let bearing_deg = bearing_of(pose.position, scene.anchor.position)
            .map(|b| angle_diff(b, scene.anchor.rotation_deg))
            .unwrap_or(0.0);
        let azimuth_deg = azimuth_relative(pose, emission).unwrap_or(0.0);
        Self {
            distance_m,
            bearing_deg,
            azimuth_deg,
        }
    }

    fn focused(&self, scene: &Scene, threshold_deg: f64) -> bool {
        self.azimuth_deg.abs() <= threshold_deg && self.distance_m <= scene.static_bed.range_m
    }

    fn in_broadcast(&self, src: &BroadcastSource) -> bool {
        self.distance_m < src.effective_range_m()
            && angle_diff(self.bearing_deg, src.bearing_deg).abs() < src.window_halfwidth_deg()
    }

    fn in_static(&self, scene: &Scene) -> bool {
        self.distance_m < scene.static_bed.range_m
    }

    fn in_inner(&self, scene: &Scene, src: &BroadcastSource) -> bool {
        match &src.inner_zone {
            Some(zone) => {
                self.focused(scene, DEFAULT_FOCUS_THRESHOLD_DEG)
                    && self.in_broadcast(src)
                    && self.distance_m < zone.radius_m
                    && self.azimuth_deg.abs() <= zone.focus_halfwidth_deg
            }
            None => false,
        }
    }
}

/// Returns [`Focus::Anchor`] when the listener points the device at the
/// emission point (within `threshold_deg`) from inside static range.
pub fn focus_target(scene: &Scene, pose: &ListenerPose, threshold_deg: f64) -> Option<Focus> {
    ListenerGeometry::of(scene, pose)
        .focused(scene, threshold_deg)
        .then_some(Focus::Anchor)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceMix {
    pub source_id: String,
    /// Clip currently routed to this source; differs from the authored clip
    /// while its inner zone is active.
    pub clip_id: String,
    pub content_weight: f64,
    pub static_complement: f64,
    pub distance_gain: f64,
    pub effective_gain: f64,
    pub azimuth_deg: f64,
    pub playhead_s: f64,
    pub audible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticMix {
    /// Crossfade weight left to static by the active window, 1 outside all.
    pub weight: f64,
    pub distance_gain: f64,
    pub gain: f64,
    pub playhead_s: f64,
    pub azimuth_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixState {
    pub t: f64,
    pub distance_m: f64,
    pub bearing_deg: f64,
    pub sources: Vec<SourceMix>,
    #[serde(rename = "static")]
    pub static_bed: StaticMix,
    pub focused: Option<Focus>,
    pub active_inner_zone: Option<String>,
}

impl MixState {
    pub fn source(&self, id: &str) -> Option<&SourceMix> {
        self.sources.iter().find(|s| s.source_id == id)
    }
}

/// Computes everything the listener at `pose` hears at world time `t`.
pub fn compute_mix(scene: &Scene, pose: &ListenerPose, t: f64) -> MixState {
    let geo = ListenerGeometry::of(scene, pose);
    let d = geo.distance_m;
    let anchor_focused = geo.focused(scene, DEFAULT_FOCUS_THRESHOLD_DEG);

    let mut static_weight = 1.0;
    let mut active_inner_zone = None;
    let mut focused = anchor_focused.then_some(Focus::Anchor);

    let sources = scene
        .sources
        .iter()
        .map(|src| {
            let delta = angle_diff(geo.bearing_deg, src.bearing_deg);
            let w = content_weight(delta, src);
            let g = distance_gain(d, src.effective_range_m(), &scene.attenuation);
            if geo.in_broadcast(src) {
                static_weight = w.static_complement;
            }
            let clip = match &src.inner_zone {
                Some(zone) if geo.in_inner(scene, src) => {
                    active_inner_zone = Some(src.id.clone());
                    &zone.clip
                }
                _ => &src.clip,
            };
            let effective_gain = w.content * g;
            if anchor_focused && effective_gain > 0.0 {
                focused = Some(Focus::Source(src.id.clone()));
            }
            SourceMix {
                source_id: src.id.clone(),
                clip_id: clip.id.clone(),
                content_weight: w.content,
                static_complement: w.static_complement,
                distance_gain: g,
                effective_gain,
                azimuth_deg: geo.azimuth_deg,
                playhead_s: t.rem_euclid(clip.loop_s),
                audible: is_audible(effective_gain, scene.audible_threshold),
            }
        })
        .collect();

    let static_distance = distance_gain(d, scene.static_bed.range_m, &scene.attenuation);
    MixState {
        t,
        distance_m: d,
        bearing_deg: geo.bearing_deg,
        sources,
        static_bed: StaticMix {
            weight: static_weight,
            distance_gain: static_distance,
            gain: static_distance * static_weight,
            playhead_s: t.rem_euclid(scene.static_bed.clip.loop_s),
            azimuth_deg: geo.azimuth_deg,
        },
        focused,
        active_inner_zone,
    }
}

/// Silent channels never count as audible, even with a zero threshold.
pub fn is_audible(gain: f64, threshold: f64) -> bool {
    gain > 0.0 && gain >= threshold
}

/// A trigger region the listener can be inside of. Serialized as
/// `static_bed`, `broadcast:<id>` or `inner:<id>`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Zone {
    StaticBed,
    Broadcast(String),
    Inner(String),
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Zone::StaticBed => f.write_str("static_bed"),
            Zone::Broadcast(id) => write!(f, "broadcast:{id}"),
            Zone::Inner(id) => write!(f, "inner:{id}"),
        }
    }
}

impl From<Zone> for String {
    fn from(z: Zone) -> String {
        z.to_string()
    }
}

impl TryFrom<String> for Zone {
    type Error = String;

    fn try_from(s: String) -> Result<Zone, String> {
        if s == "static_bed" {
            return Ok(Zone::StaticBed);
        }
        match s.split_once(':') {
            Some(("broadcast", id)) if !id.is_empty() => Ok(Zone::Broadcast(id.to_string())),
            Some(("inner", id)) if !id.is_empty() => Ok(Zone::Inner(id.to_string())),
            _ => Err(format!("unknown zone `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoneEventKind {
    Enter,
    Exit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneEvent {
    pub kind: ZoneEventKind,
    pub zone: Zone,
    pub t: f64,
}

/// Every zone whose membership predicate holds at `pose`, in event order
/// (static bed, then broadcasts, then inner zones).
pub fn membership(scene: &Scene, pose: &ListenerPose) -> BTreeSet<Zone> {
    let geo = ListenerGeometry::of(scene, pose);
    let mut zones = BTreeSet::new();
    if geo.in_static(scene) {
        zones.insert(Zone::StaticBed);
    }
    for src in &scene.sources {
        if geo.in_broadcast(src) {
            zones.insert(Zone::Broadcast(src.id.clone()));
        }
        if geo.in_inner(scene, src) {
            zones.insert(Zone::Inner(src.id.clone()));
        }
    }
    zones
}

/// Enter/exit events for the difference between two membership sets.
pub fn membership_events(prev: &BTreeSet<Zone>, next: &BTreeSet<Zone>, t: f64) -> Vec<ZoneEvent> {
    let mut changed: Vec<(&Zone, ZoneEventKind)> = next
        .difference(prev)
        .map(|z| (z, ZoneEventKind::Enter))
        .chain(prev.difference(next).map(|z| (z, ZoneEventKind::Exit)))
        .collect();
    changed.sort_by(|a, b| a.0.cmp(b.0));
    changed
        .into_iter()
        .map(|(zone, kind)| ZoneEvent {
            kind,
            zone: zone.clone(),
            t,
        })
        .collect()
}

/// Zone transitions between two consecutive poses, stamped with `next.t`.
pub fn zone_events(scene: &Scene, prev: &ListenerPose, next: &ListenerPose) -> Vec<ZoneEvent> {
    membership_events(&membership(scene, prev), &membership(scene, next), next.t)
}
