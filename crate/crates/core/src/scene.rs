//! Authored soundscape description and its JSON document format.

use std::collections::HashSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{angle_diff, Vec2};

const LISTENING_SESSION: &str = include_str!("../../../fixtures/scenes/listening-session.json");

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("malformed scene document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("angular windows of sources `{first}` and `{second}` overlap")]
    Overlap { first: String, second: String },
    #[error("duplicate {what} id `{id}`")]
    DuplicateId { what: &'static str, id: String },
    #[error("{field} must be {expected}, got {value}")]
    OutOfRange {
        field: String,
        expected: &'static str,
        value: f64,
    },
    #[error("unknown source `{0}`")]
    UnknownSource(String),
}

impl SceneError {
    /// True for errors produced by validation rather than parsing.
    pub fn is_validation(&self) -> bool {
        !matches!(self, SceneError::Json(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClipKind {
    Spoken,
    Music,
    Mixed,
    Effect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContentClip {
    pub id: String,
    pub loop_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media_path: Option<PathBuf>,
    pub kind: ClipKind,
}

/// Close-range content that replaces a source's clip while the listener is
/// near the object and pointing the device at it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InnerZone {
    pub radius_m: f64,
    pub focus_halfwidth_deg: f64,
    pub clip: ContentClip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BroadcastSource {
    pub id: String,
    /// Window center, degrees around the anchor in the anchor frame.
    pub bearing_deg: f64,
    #[serde(default = "defaults::full_halfwidth")]
    pub full_halfwidth_deg: f64,
    #[serde(default = "defaults::transition")]
    pub transition_deg: f64,
    #[serde(default = "defaults::source_range")]
    pub range_m: f64,
    /// Multiplier on `range_m`; values above 1 let a source advertise itself
    /// from further away.
    #[serde(default = "defaults::nimbus_scale")]
    pub nimbus_scale: f64,
    pub clip: ContentClip,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_zone: Option<InnerZone>,
}

impl BroadcastSource {
    pub fn new(id: impl Into<String>, bearing_deg: f64, clip: ContentClip) -> Self {
        Self {
            id: id.into(),
            bearing_deg,
            full_halfwidth_deg: defaults::full_halfwidth(),
            transition_deg: defaults::transition(),
            range_m: defaults::source_range(),
            nimbus_scale: defaults::nimbus_scale(),
            clip,
            inner_zone: None,
        }
    }

    /// Half-width of the whole window: full band plus transition band.
    pub fn window_halfwidth_deg(&self) -> f64 {
        self.full_halfwidth_deg + self.transition_deg
    }

    pub fn effective_range_m(&self) -> f64 {
        self.range_m * self.nimbus_scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticBed {
    pub clip: ContentClip,
    #[serde(default = "defaults::static_range")]
    pub range_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttenuationParams {
    /// Distance at which gain is 1.
    #[serde(default = "defaults::d_ref")]
    pub d_ref_m: f64,
    #[serde(default = "defaults::rolloff")]
    pub rolloff: f64,
    /// Width of the linear fade to zero just inside a range boundary.
    #[serde(default = "defaults::taper")]
    pub taper_m: f64,
}

impl Default for AttenuationParams {
    fn default() -> Self {
        Self {
            d_ref_m: defaults::d_ref(),
            rolloff: defaults::rolloff(),
            taper_m: defaults::taper(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorPose {
    pub position: Vec2,
    #[serde(default)]
    pub rotation_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    #[serde(default)]
    pub anchor: AnchorPose,
    /// Offset of the emission point from the anchor, in the anchor frame.
    #[serde(default)]
    pub emission_offset: Vec2,
    #[serde(default)]
    pub attenuation: AttenuationParams,
    #[serde(rename = "static")]
    pub static_bed: StaticBed,
    pub sources: Vec<BroadcastSource>,
    #[serde(default = "defaults::audible_threshold")]
    pub audible_threshold: f64,
}

mod defaults {
    pub fn full_halfwidth() -> f64 {
        10.0
    }
    pub fn transition() -> f64 {
        10.0
    }
    pub fn source_range() -> f64 {
        2.0
    }
    pub fn nimbus_scale() -> f64 {
        1.0
    }
    pub fn static_range() -> f64 {
        3.0
    }
    pub fn d_ref() -> f64 {
        0.2
    }
    pub fn rolloff() -> f64 {
        1.0
    }
    pub fn taper() -> f64 {
        0.1
    }
    pub fn audible_threshold() -> f64 {
        0.05
    }
}

/// Partial update of one source's placement parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceEdit {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bearing_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_halfwidth_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nimbus_scale: Option<f64>,
}

/// Parses and validates a scene document.
pub fn load_scene(document: &str) -> Result<Scene, SceneError> {
    let scene: Scene = serde_json::from_str(document)?;
    scene.validate()?;
    Ok(scene)
}

/// Serializes a scene with every default written out.
pub fn save_scene(scene: &Scene) -> Result<String, SceneError> {
    Ok(serde_json::to_string_pretty(scene)?)
}

impl Scene {
    /// The bundled four-broadcast radio installation.
    pub fn listening_session() -> Scene {
        load_scene(LISTENING_SESSION).expect("bundled scene is valid")
    }

    /// World position all content is emitted from.
    pub fn emission_point(&self) -> Vec2 {
        self.anchor.position + self.emission_offset.rotated_deg(self.anchor.rotation_deg)
    }

    pub fn source(&self, id: &str) -> Option<&BroadcastSource> {
        self.sources.iter().find(|s| s.id == id)
    }

    /// Sum of loop lengths of all broadcast content (excludes the static bed).
    pub fn broadcast_content_s(&self) -> f64 {
        self.sources
            .iter()
            .map(|s| s.clip.loop_s + s.inner_zone.as_ref().map_or(0.0, |z| z.clip.loop_s))
            .sum()
    }

    /// Returns a copy with `edit` applied, validated as a whole.
    pub fn with_edit(&self, edit: &SourceEdit) -> Result<Scene, SceneError> {
        let mut next = self.clone();
        let src = next
            .sources
            .iter_mut()
            .find(|s| s.id == edit.id)
            .ok_or_else(|| SceneError::UnknownSource(edit.id.clone()))?;
        if let Some(v) = edit.bearing_deg {
            src.bearing_deg = v;
        }
        if let Some(v) = edit.range_m {
            src.range_m = v;
        }
        if let Some(v) = edit.full_halfwidth_deg {
            src.full_halfwidth_deg = v;
        }
        if let Some(v) = edit.transition_deg {
            src.transition_deg = v;
        }
        if let Some(v) = edit.nimbus_scale {
            src.nimbus_scale = v;
        }
        next.validate()?;
        Ok(next)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        finite("anchor.position.x", self.anchor.position.x)?;
        finite("anchor.position.y", self.anchor.position.y)?;
        finite("anchor.rotation_deg", self.anchor.rotation_deg)?;
        finite("emission_offset.x", self.emission_offset.x)?;
        finite("emission_offset.y", self.emission_offset.y)?;

        let att = &self.attenuation;
        positive("attenuation.d_ref_m", att.d_ref_m)?;
        non_negative("attenuation.rolloff", att.rolloff)?;
        non_negative("attenuation.taper_m", att.taper_m)?;
        if !(0.0..=1.0).contains(&self.audible_threshold) {
            return Err(SceneError::OutOfRange {
                field: "audible_threshold".into(),
                expected: "in [0, 1]",
                value: self.audible_threshold,
            });
        }

        let mut clip_ids = HashSet::new();
        let mut check_clip = |field: &str, clip: &ContentClip| -> Result<(), SceneError> {
            positive(&format!("{field}.loop_s"), clip.loop_s)?;
            if !clip_ids.insert(clip.id.clone()) {
                return Err(SceneError::DuplicateId {
                    what: "clip",
                    id: clip.id.clone(),
                });
            }
            Ok(())
        };

        check_clip("static.clip", &self.static_bed.clip)?;
        positive("static.range_m", self.static_bed.range_m)?;
        taper_fits(att.taper_m, "static.range_m", self.static_bed.range_m)?;

        let mut source_ids = HashSet::new();
        for src in &self.sources {
            let f = |name: &str| format!("sources[{}].{}", src.id, name);
            if !source_ids.insert(src.id.as_str()) {
                return Err(SceneError::DuplicateId {
                    what: "source",
                    id: src.id.clone(),
                });
            }
            finite(&f("bearing_deg"), src.bearing_deg)?;
            non_negative(&f("full_halfwidth_deg"), src.full_halfwidth_deg)?;
            positive(&f("transition_deg"), src.transition_deg)?;
            positive(&f("range_m"), src.range_m)?;
            taper_fits(att.taper_m, &f("range_m"), src.range_m)?;
            non_negative(&f("nimbus_scale"), src.nimbus_scale)?;
            check_clip(&f("clip"), &src.clip)?;
            if let Some(zone) = &src.inner_zone {
                positive(&f("inner_zone.radius_m"), zone.radius_m)?;
                if zone.radius_m >= src.range_m {
                    return Err(SceneError::OutOfRange {
                        field: f("inner_zone.radius_m"),
                        expected: "less than the source range",
                        value: zone.radius_m,
                    });
                }
                non_negative(
                    &f("inner_zone.focus_halfwidth_deg"),
                    zone.focus_halfwidth_deg,
                )?;
                check_clip(&f("inner_zone.clip"), &zone.clip)?;
            }
        }

        for (i, a) in self.sources.iter().enumerate() {
            for b in &self.sources[i + 1..] {
                if windows_overlap(a, b) {
                    return Err(SceneError::Overlap {
                        first: a.id.clone(),
                        second: b.id.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Windows that merely touch at their outer edges do not overlap: both
/// weights are zero on the shared boundary.
pub fn windows_overlap(a: &BroadcastSource, b: &BroadcastSource) -> bool {
    let separation = angle_diff(a.bearing_deg, b.bearing_deg).abs();
    separation < a.window_halfwidth_deg() + b.window_halfwidth_deg()
}

fn finite(field: &str, v: f64) -> Result<(), SceneError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(SceneError::OutOfRange {
            field: field.into(),
            expected: "finite",
            value: v,
        })
    }
}

fn positive(field: &str, v: f64) -> Result<(), SceneError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(SceneError::OutOfRange {
            field: field.into(),
            expected: "positive",
            value: v,
        })
    }
}

fn non_negative(field: &str, v: f64) -> Result<(), SceneError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(SceneError::OutOfRange {
            field: field.into(),
            expected: "non-negative",
            value: v,
        })
    }
}

fn taper_fits(taper: f64, field: &str, range: f64) -> Result<(), SceneError> {
    if taper < range {
        Ok(())
    } else {
        Err(SceneError::OutOfRange {
            field: field.into(),
            expected: "greater than attenuation.taper_m",
            value: range,
        })
    }
}
