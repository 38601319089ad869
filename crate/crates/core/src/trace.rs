//! Session traces: time-ordered pose samples plus discrete session events,
//! stored as JSON Lines.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{wrap_deg, ListenerPose, Vec2};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("trace is empty")]
    Empty,
    #[error("first sample must carry the session_start event")]
    MissingSessionStart,
    #[error("timestamps must strictly increase: sample {index} has t = {t} after {prev}")]
    NonMonotonic { index: usize, t: f64, prev: f64 },
    #[error("sample {index} has a non-finite or negative field")]
    InvalidSample { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionEvent {
    SessionStart,
    HeadphonesOn,
    SessionEnd,
    ExternalInterruption,
}

/// One line of a trace file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub heading_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<SessionEvent>,
}

impl TraceSample {
    pub fn pose(&self) -> ListenerPose {
        ListenerPose::new(Vec2::new(self.x, self.y), self.heading_deg, self.t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionTrace {
    samples: Vec<TraceSample>,
}

impl SessionTrace {
    /// Checks that the trace is non-empty, finite and strictly increasing in
    /// time. Does not require a `session_start` event.
    pub fn new(samples: Vec<TraceSample>) -> Result<Self, TraceError> {
        if samples.is_empty() {
            return Err(TraceError::Empty);
        }
        for (index, s) in samples.iter().enumerate() {
            if !(s.t.is_finite() && s.t >= 0.0 && s.x.is_finite() && s.y.is_finite())
                || !s.heading_deg.is_finite()
            {
                return Err(TraceError::InvalidSample { index });
            }
        }
        for (i, w) in samples.windows(2).enumerate() {
            if w[1].t <= w[0].t {
                return Err(TraceError::NonMonotonic {
                    index: i + 1,
                    t: w[1].t,
                    prev: w[0].t,
                });
            }
        }
        Ok(Self { samples })
    }

    /// Parses a trace file. The first line must carry `session_start`.
    pub fn from_jsonl(text: &str) -> Result<Self, TraceError> {
        let mut samples = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let sample: TraceSample =
                serde_json::from_str(line).map_err(|source| TraceError::Json {
                    line: i + 1,
                    source,
                })?;
            samples.push(sample);
        }
        let trace = Self::new(samples)?;
        if !trace.starts_session() {
            return Err(TraceError::MissingSessionStart);
        }
        Ok(trace)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.samples {
            out.push_str(&serde_json::to_string(s).expect("samples serialize"));
            out.push('\n');
        }
        out
    }

    pub fn samples(&self) -> &[TraceSample] {
        &self.samples
    }

    pub fn poses(&self) -> impl Iterator<Item = ListenerPose> + '_ {
        self.samples.iter().map(TraceSample::pose)
    }

    pub fn starts_session(&self) -> bool {
        self.samples[0].event == Some(SessionEvent::SessionStart)
    }

    pub fn start_t(&self) -> f64 {
        self.samples[0].t
    }

    pub fn end_t(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    /// Time of the first sample carrying `event`.
    pub fn event_time(&self, event: SessionEvent) -> Option<f64> {
        self.samples
            .iter()
            .find(|s| s.event == Some(event))
            .map(|s| s.t)
    }

    /// `session_start` to `session_end`, falling back to the trace bounds.
    pub fn session_duration_s(&self) -> f64 {
        let start = self
            .event_time(SessionEvent::SessionStart)
            .unwrap_or(self.start_t());
        let end = self
            .event_time(SessionEvent::SessionEnd)
            .unwrap_or(self.end_t());
        end - start
    }

    /// Pose at time `t`: linear in position, shorter-arc in heading, held
    /// constant outside the sampled interval.
    pub fn pose_at(&self, t: f64) -> ListenerPose {
        let s = &self.samples;
        let idx = s.partition_point(|p| p.t <= t);
        if idx == 0 {
            return ListenerPose { t, ..s[0].pose() };
        }
        if idx == s.len() {
            return ListenerPose {
                t,
                ..s[s.len() - 1].pose()
            };
        }
        let (a, b) = (&s[idx - 1], &s[idx]);
        let f = (t - a.t) / (b.t - a.t);
        let pos = Vec2::new(a.x, a.y).lerp(Vec2::new(b.x, b.y), f);
        let turn = wrap_deg(b.heading_deg - a.heading_deg);
        ListenerPose::new(pos, a.heading_deg + turn * f, t)
    }
}

/// Scripts listener movement for fixtures and simulations.
///
/// Every motion is sampled at a fixed rate; times are computed from integer
/// sample counts so long scripts stay on an exact grid.
#[derive(Debug, Clone)]
pub struct TraceBuilder {
    rate_hz: f64,
    tick: u64,
    anchor: Vec2,
    pos: Vec2,
    heading_deg: f64,
    samples: Vec<TraceSample>,
    pending_event: Option<SessionEvent>,
}

impl TraceBuilder {
    /// Starts a session at `pos`, facing `anchor`. The first sample carries
    /// `session_start`.
    pub fn new(rate_hz: f64, anchor: Vec2, pos: Vec2) -> Self {
        let mut b = Self {
            rate_hz,
            tick: 0,
            anchor,
            pos,
            heading_deg: (anchor - pos).angle_deg().unwrap_or(0.0),
            samples: Vec::new(),
            pending_event: Some(SessionEvent::SessionStart),
        };
        b.emit();
        b
    }

    /// Starts at `distance_m` from the anchor at the given bearing.
    pub fn around(rate_hz: f64, anchor: Vec2, bearing_deg: f64, distance_m: f64) -> Self {
        Self::new(
            rate_hz,
            anchor,
            anchor + Vec2::from_angle_deg(bearing_deg) * distance_m,
        )
    }

    pub fn now(&self) -> f64 {
        self.tick as f64 / self.rate_hz
    }

    pub fn position(&self) -> Vec2 {
        self.pos
    }

    fn emit(&mut self) {
        self.samples.push(TraceSample {
            t: self.tick as f64 / self.rate_hz,
            x: self.pos.x,
            y: self.pos.y,
            heading_deg: wrap_deg(self.heading_deg),
            event: self.pending_event.take(),
        });
    }

    fn steps(&self, seconds: f64) -> u64 {
        (seconds * self.rate_hz).round() as u64
    }

    fn face_anchor(&mut self) {
        if let Some(h) = (self.anchor - self.pos).angle_deg() {
            self.heading_deg = h;
        }
    }

    /// Attaches `event` to the next emitted sample.
    pub fn event(mut self, event: SessionEvent) -> Self {
        self.pending_event = Some(event);
        self
    }

    /// Marks the most recent sample with `event`.
    pub fn mark(mut self, event: SessionEvent) -> Self {
        if let Some(last) = self.samples.last_mut() {
            last.event = Some(event);
        }
        self
    }

    /// Holds position and heading.
    pub fn stand(mut self, seconds: f64) -> Self {
        for _ in 0..self.steps(seconds) {
            self.tick += 1;
            self.emit();
        }
        self
    }

    /// Walks in a straight line to `target`, facing the anchor throughout.
    pub fn walk_to(mut self, target: Vec2, seconds: f64) -> Self {
        let n = self.steps(seconds).max(1);
        let start = self.pos;
        for i in 1..=n {
            self.tick += 1;
            self.pos = start.lerp(target, i as f64 / n as f64);
            self.face_anchor();
            self.emit();
        }
        self
    }

    /// Walks to `distance_m` from the anchor at `bearing_deg`.
    pub fn walk_to_polar(self, bearing_deg: f64, distance_m: f64, seconds: f64) -> Self {
        let target = self.anchor + Vec2::from_angle_deg(bearing_deg) * distance_m;
        self.walk_to(target, seconds)
    }

    /// Circles the anchor by `sweep_deg` (positive is counter-clockwise) at
    /// constant radius, facing it throughout.
    pub fn orbit(mut self, sweep_deg: f64, seconds: f64) -> Self {
        let n = self.steps(seconds).max(1);
        let rel = self.pos - self.anchor;
        let radius = rel.length();
        let start = rel.angle_deg().unwrap_or(0.0);
        for i in 1..=n {
            self.tick += 1;
            let angle = start + sweep_deg * i as f64 / n as f64;
            self.pos = self.anchor + Vec2::from_angle_deg(angle) * radius;
            self.face_anchor();
            self.emit();
        }
        self
    }

    /// Side-to-side steps tangential to the anchor: `swings` half-periods of
    /// amplitude `amplitude_m` around the current position, ending where it
    /// started.
    pub fn sway(mut self, amplitude_m: f64, swings: u32, seconds: f64) -> Self {
        let n = self.steps(seconds).max(1);
        let centre = self.pos;
        let radial = (centre - self.anchor).angle_deg().unwrap_or(0.0);
        let tangent = Vec2::from_angle_deg(radial + 90.0);
        for i in 1..=n {
            self.tick += 1;
            let phase = i as f64 / n as f64 * swings as f64 * std::f64::consts::PI;
            self.pos = centre + tangent * (amplitude_m * phase.sin());
            self.face_anchor();
            self.emit();
        }
        self.pos = centre;
        self
    }

    /// Turns in place to an absolute heading.
    pub fn turn_to(mut self, heading_deg: f64) -> Self {
        self.heading_deg = heading_deg;
        self
    }

    pub fn build(self) -> SessionTrace {
        SessionTrace::new(self.samples).expect("builder emits monotone samples")
    }
}
