//! Behavioural analytics over listener traces: interaction-phase
//! segmentation, zone dwell, broadcast content coverage and session
//! statistics.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{angle_diff, Vec2};
use crate::mix::{compute_mix, membership, MixState, Zone};
use crate::scene::Scene;
use crate::trace::{SessionEvent, SessionTrace};

/// Unique broadcast content total published for the original installation
/// (6'20"). It disagrees with the sum of the clip loop lengths (7'00"), so
/// reports carry both.
pub const PUBLISHED_CONTENT_TOTAL_S: f64 = 380.0;

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("trace does not begin with a session_start event")]
    MissingSessionStart,
    #[error("threshold `{0}` must be positive")]
    Threshold(&'static str),
    #[error("no traces given")]
    NoTraces,
}

/// Interaction phases, in the order a visit typically moves through them.
/// When several phase predicates match at once the later one wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PhaseLabel {
    Preparation,
    Familiarisation,
    Exploration,
    Investigation,
    FocussedListening,
    SecondLevelFocussedListening,
    Interruption,
    Finishing,
}

impl PhaseLabel {
    pub const ALL: [PhaseLabel; 8] = [
        PhaseLabel::Preparation,
        PhaseLabel::Familiarisation,
        PhaseLabel::Exploration,
        PhaseLabel::Investigation,
        PhaseLabel::FocussedListening,
        PhaseLabel::SecondLevelFocussedListening,
        PhaseLabel::Interruption,
        PhaseLabel::Finishing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PhaseLabel::Preparation => "Preparation",
            PhaseLabel::Familiarisation => "Familiarisation",
            PhaseLabel::Exploration => "Exploration",
            PhaseLabel::Investigation => "Investigation",
            PhaseLabel::FocussedListening => "FocussedListening",
            PhaseLabel::SecondLevelFocussedListening => "SecondLevelFocussedListening",
            PhaseLabel::Interruption => "Interruption",
            PhaseLabel::Finishing => "Finishing",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSegment {
    pub phase: PhaseLabel,
    pub t_start: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierThresholds {
    /// Tangential direction reversals needed to call it swaying.
    pub sway_reversals: u32,
    pub sway_window_s: f64,
    /// Swaying must stay within this net displacement over the window.
    pub sway_net_disp_m: f64,
    /// Tangential speeds below this are treated as standing still when
    /// looking for reversals.
    pub sway_min_speed_mps: f64,
    /// Monotone bearing sweep that counts as an orbit of the object.
    pub orbit_sweep_deg: f64,
    /// Backtracking tolerated before an orbit counts as reversed.
    pub orbit_backtrack_deg: f64,
    pub dwell_speed_mps: f64,
    pub dwell_min_s: f64,
    /// Proximity standing in for crouching down close to the object.
    pub close_m: f64,
    /// Path length after which preparation is over.
    pub prep_disp_m: f64,
}

impl Default for ClassifierThresholds {
    fn default() -> Self {
        Self {
            sway_reversals: 3,
            sway_window_s: 10.0,
            sway_net_disp_m: 0.5,
            sway_min_speed_mps: 0.05,
            orbit_sweep_deg: 300.0,
            orbit_backtrack_deg: 10.0,
            dwell_speed_mps: 0.1,
            dwell_min_s: 15.0,
            close_m: 0.6,
            prep_disp_m: 0.3,
        }
    }
}

impl ClassifierThresholds {
    pub fn validate(&self) -> Result<(), AnalyticsError> {
        let checks: [(&'static str, f64); 10] = [
            ("sway_reversals", self.sway_reversals as f64),
            ("sway_window_s", self.sway_window_s),
            ("sway_net_disp_m", self.sway_net_disp_m),
            ("sway_min_speed_mps", self.sway_min_speed_mps),
            ("orbit_sweep_deg", self.orbit_sweep_deg),
            ("orbit_backtrack_deg", self.orbit_backtrack_deg),
            ("dwell_speed_mps", self.dwell_speed_mps),
            ("dwell_min_s", self.dwell_min_s),
            ("close_m", self.close_m),
            ("prep_disp_m", self.prep_disp_m),
        ];
        for (name, v) in checks {
            if !(v.is_finite() && v > 0.0) {
                return Err(AnalyticsError::Threshold(name));
            }
        }
        Ok(())
    }
}

/// Per-sample kinematics shared by the phase predicates.
struct Kinematics {
    t: Vec<f64>,
    pos: Vec<Vec2>,
    /// Distance to the emission point.
    dist: Vec<f64>,
    /// Anchor-frame bearing, unwrapped.
    unwrapped: Vec<f64>,
    speed: Vec<f64>,
    /// Sign of tangential velocity around the anchor (0 when slow).
    tangential: Vec<i8>,
    /// Broadcast zone the sample is in, if any.
    zone: Vec<Option<String>>,
}

impl Kinematics {
    fn new(scene: &Scene, trace: &SessionTrace, th: &ClassifierThresholds) -> Self {
        let anchor = scene.anchor.position;
        let emission = scene.emission_point();
        let samples = trace.samples();
        let n = samples.len();
        let mut k = Kinematics {
            t: Vec::with_capacity(n),
            pos: Vec::with_capacity(n),
            dist: Vec::with_capacity(n),
            unwrapped: Vec::with_capacity(n),
            speed: Vec::with_capacity(n),
            tangential: Vec::with_capacity(n),
            zone: Vec::with_capacity(n),
        };
        let mut prev_bearing = None;
        let mut acc = 0.0;
        for (i, s) in samples.iter().enumerate() {
            let pose = s.pose();
            let p = pose.position;
            let rel = p - anchor;
            if let Some(b) = rel.angle_deg() {
                let b = b - scene.anchor.rotation_deg;
                acc += prev_bearing.map_or(0.0, |pb| angle_diff(b, pb));
                prev_bearing = Some(b);
            }
            let (speed, tangential) = if i == 0 {
                (0.0, 0)
            } else {
                let dt = s.t - k.t[i - 1];
                let step = p - k.pos[i - 1];
                let radial = k.pos[i - 1] - anchor;
                let vt = radial
                    .angle_deg()
                    .map_or(0.0, |a| step.dot(Vec2::from_angle_deg(a + 90.0)) / dt);
                let sign = if vt.abs() < th.sway_min_speed_mps {
                    0
                } else if vt > 0.0 {
                    1
                } else {
                    -1
                };
                (step.length() / dt, sign)
            };
            let zone = membership(scene, &pose).into_iter().find_map(|z| match z {
                Zone::Broadcast(id) => Some(id),
                _ => None,
            });
            k.t.push(s.t);
            k.pos.push(p);
            k.dist.push(p.distance(emission));
            k.unwrapped.push(acc);
            k.speed.push(speed);
            k.tangential.push(tangential);
            k.zone.push(zone);
        }
        k
    }

    fn len(&self) -> usize {
        self.t.len()
    }
}

/// A maximal stretch of (nearly) monotone bearing change.
#[derive(Debug, Clone, Copy, PartialEq)]
struct SweepRun {
    start: usize,
    end: usize,
    sweep_deg: f64,
}

fn sweep_runs(u: &[f64], tolerance: f64) -> Vec<SweepRun> {
    let mut runs = Vec::new();
    if u.is_empty() {
        return runs;
    }
    let mut start = 0;
    let mut extreme = 0;
    let mut dir = 0.0f64;
    for i in 1..u.len() {
        if dir == 0.0 {
            let d = u[i] - u[start];
            if d.abs() > tolerance {
                dir = d.signum();
                extreme = i;
            }
        } else if dir * (u[i] - u[extreme]) >= 0.0 {
            extreme = i;
        } else if dir * (u[extreme] - u[i]) > tolerance {
            runs.push(SweepRun {
                start,
                end: extreme,
                sweep_deg: (u[extreme] - u[start]).abs(),
            });
            start = extreme;
            dir = -dir;
            extreme = (start..=i)
                .max_by(|&a, &b| (dir * u[a]).total_cmp(&(dir * u[b])))
                .unwrap_or(i);
        }
    }
    if dir != 0.0 {
        runs.push(SweepRun {
            start,
            end: extreme,
            sweep_deg: (u[extreme] - u[start]).abs(),
        });
    }
    runs
}

/// Candidate labels, keeping the latest phase where predicates overlap.
struct Painter(Vec<Option<PhaseLabel>>);

impl Painter {
    fn paint(&mut self, from: usize, to_inclusive: usize, label: PhaseLabel) {
        for slot in &mut self.0[from..=to_inclusive] {
            if slot.is_none_or(|cur| label > cur) {
                *slot = Some(label);
            }
        }
    }
}

/// Segments a session into interaction phases.
pub fn classify_phases(
    scene: &Scene,
    trace: &SessionTrace,
    th: &ClassifierThresholds,
) -> Result<Vec<PhaseSegment>, AnalyticsError> {
    th.validate()?;
    if !trace.starts_session() {
        return Err(AnalyticsError::MissingSessionStart);
    }
    let k = Kinematics::new(scene, trace, th);
    let n = k.len();
    let samples = trace.samples();
    let mut painter = Painter(vec![None; n]);

    // Preparation: until the listener has moved prep_disp_m in total.
    let mut path = 0.0;
    let mut prep_end = 0;
    for i in 0..n {
        if i > 0 {
            path += k.pos[i].distance(k.pos[i - 1]);
        }
        if path > th.prep_disp_m {
            break;
        }
        prep_end = i;
    }
    painter.paint(0, prep_end, PhaseLabel::Preparation);

    // Familiarisation: repeated side-to-side reversals without going anywhere.
    let mut reversals = Vec::new();
    let mut last_sign = 0i8;
    for i in 0..n {
        let s = k.tangential[i];
        if s != 0 {
            if last_sign != 0 && s != last_sign {
                reversals.push(i);
            }
            last_sign = s;
        }
    }
    let mut window_start = 0;
    for i in 0..n {
        let from_t = k.t[i] - th.sway_window_s;
        while k.t[window_start] < from_t {
            window_start += 1;
        }
        let in_window: Vec<usize> = reversals
            .iter()
            .copied()
            .filter(|&r| r >= window_start && r <= i)
            .collect();
        if in_window.len() >= th.sway_reversals as usize
            && k.pos[i].distance(k.pos[window_start]) < th.sway_net_disp_m
        {
            painter.paint(in_window[0], i, PhaseLabel::Familiarisation);
        }
    }

    // Exploration: a long monotone sweep around the object.
    for run in sweep_runs(&k.unwrapped, th.orbit_backtrack_deg) {
        if run.sweep_deg >= th.orbit_sweep_deg {
            painter.paint(run.start, run.end, PhaseLabel::Exploration);
        }
    }

    // Investigation: coming back into a broadcast zone already left once.
    let mut exited = BTreeSet::new();
    for i in 1..n {
        if let Some(prev) = &k.zone[i - 1] {
            if k.zone[i].as_ref() != Some(prev) {
                exited.insert(prev.clone());
            }
        }
        if let Some(cur) = &k.zone[i] {
            if k.zone[i - 1].as_ref() != Some(cur) && exited.contains(cur) {
                painter.paint(i, i, PhaseLabel::Investigation);
            }
        }
    }

    // Focussed listening: standing still inside a broadcast zone; second
    // level when also very close to the object.
    let slow_in_zone = |i: usize| k.speed[i] < th.dwell_speed_mps && k.zone[i].is_some();
    for (label, close_only) in [
        (PhaseLabel::FocussedListening, false),
        (PhaseLabel::SecondLevelFocussedListening, true),
    ] {
        let qualifies = |i: usize| slow_in_zone(i) && (!close_only || k.dist[i] < th.close_m);
        let mut i = 0;
        while i < n {
            if !qualifies(i) {
                i += 1;
                continue;
            }
            let start = i;
            while i + 1 < n && qualifies(i + 1) && k.zone[i + 1] == k.zone[start] {
                i += 1;
            }
            if k.t[i] - k.t[start] >= th.dwell_min_s {
                painter.paint(start, i, label);
            }
            i += 1;
        }
    }

    // Interruption: from an explicit event until the listener resumes or
    // the session ends.
    for (i, s) in samples.iter().enumerate() {
        if s.event == Some(SessionEvent::ExternalInterruption) {
            let end = samples[i + 1..]
                .iter()
                .position(|x| {
                    matches!(
                        x.event,
                        Some(SessionEvent::HeadphonesOn) | Some(SessionEvent::SessionEnd)
                    )
                })
                .map_or(n - 1, |off| i + off);
            painter.paint(i, end, PhaseLabel::Interruption);
        }
    }

    // Finishing: from session_end, or the final sample.
    let finish = samples
        .iter()
        .position(|s| s.event == Some(SessionEvent::SessionEnd))
        .unwrap_or(n - 1);
    painter.paint(finish, n - 1, PhaseLabel::Finishing);

    let mut labels = Vec::with_capacity(n);
    for (i, cand) in painter.0.iter().enumerate() {
        let inherited = if i == 0 {
            PhaseLabel::Preparation
        } else {
            labels[i - 1]
        };
        labels.push(cand.unwrap_or(inherited));
    }
    Ok(segments_from_labels(&k.t, &labels))
}

fn segments_from_labels(t: &[f64], labels: &[PhaseLabel]) -> Vec<PhaseSegment> {
    let n = labels.len();
    if n < 2 {
        return Vec::new();
    }
    let mut runs: Vec<(PhaseLabel, usize)> = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        if runs.last().is_none_or(|&(prev, _)| prev != l) {
            runs.push((l, i));
        }
    }
    // A phase starting on the very last sample would have no duration; it
    // takes over the final interval instead.
    if let Some(last) = runs.last_mut() {
        if last.1 == n - 1 {
            last.1 = n - 2;
        }
    }
    let mut segs = Vec::with_capacity(runs.len());
    for (j, &(phase, start)) in runs.iter().enumerate() {
        let end = runs.get(j + 1).map_or(n - 1, |r| r.1);
        if t[end] > t[start] {
            segs.push(PhaseSegment {
                phase,
                t_start: t[start],
                t_end: t[end],
            });
        }
    }
    // merge neighbours made adjacent by a dropped empty run
    segs.dedup_by(|b, a| {
        if a.phase == b.phase {
            a.t_end = b.t_end;
            true
        } else {
            false
        }
    });
    segs
}

/// Unique-content bookkeeping fed one mix at a time.
#[derive(Debug, Clone)]
pub struct CoverageTracker {
    loops: BTreeMap<String, f64>,
    heard: BTreeMap<String, BTreeSet<u64>>,
}

impl CoverageTracker {
    pub fn new(scene: &Scene) -> Self {
        let mut loops = BTreeMap::new();
        for src in &scene.sources {
            loops.insert(src.clip.id.clone(), src.clip.loop_s);
            if let Some(z) = &src.inner_zone {
                loops.insert(z.clip.id.clone(), z.clip.loop_s);
            }
        }
        let heard = loops.keys().map(|k| (k.clone(), BTreeSet::new())).collect();
        Self { loops, heard }
    }

    /// A clip-second counts once its channel is audible and the listener
    /// is at least half tuned in.
    pub fn observe(&mut self, mix: &MixState) {
        for s in &mix.sources {
            if s.audible && s.content_weight >= 0.5 {
                if let Some(set) = self.heard.get_mut(&s.clip_id) {
                    set.insert(s.playhead_s.floor() as u64);
                }
            }
        }
    }

    pub fn unique_heard_s(&self) -> BTreeMap<String, f64> {
        self.heard
            .iter()
            .map(|(id, set)| (id.clone(), (set.len() as f64).min(self.loops[id])))
            .collect()
    }

    pub fn content_total_s(&self) -> f64 {
        self.loops.values().sum()
    }

    pub fn fraction(&self) -> f64 {
        let total = self.content_total_s();
        if total <= 0.0 {
            return 0.0;
        }
        (self.unique_heard_s().values().sum::<f64>() / total).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub coverage_fraction: f64,
    pub unique_heard_s: BTreeMap<String, f64>,
    pub content_total_s: f64,
}

/// Fraction of unique broadcast seconds heard over the trace's samples.
pub fn coverage(scene: &Scene, trace: &SessionTrace) -> Coverage {
    let mut tracker = CoverageTracker::new(scene);
    for pose in trace.poses() {
        tracker.observe(&compute_mix(scene, &pose, pose.t));
    }
    Coverage {
        coverage_fraction: tracker.fraction(),
        unique_heard_s: tracker.unique_heard_s(),
        content_total_s: tracker.content_total_s(),
    }
}

/// Time spent inside each zone, judging each inter-sample interval by the
/// interpolated pose at its midpoint. Every zone of the scene is listed.
pub fn dwell(scene: &Scene, trace: &SessionTrace) -> BTreeMap<Zone, f64> {
    let mut out = BTreeMap::new();
    out.insert(Zone::StaticBed, 0.0);
    for src in &scene.sources {
        out.insert(Zone::Broadcast(src.id.clone()), 0.0);
        if src.inner_zone.is_some() {
            out.insert(Zone::Inner(src.id.clone()), 0.0);
        }
    }
    for w in trace.samples().windows(2) {
        let dt = w[1].t - w[0].t;
        let mid = trace.pose_at(0.5 * (w[0].t + w[1].t));
        for zone in membership(scene, &mid) {
            *out.entry(zone).or_insert(0.0) += dt;
        }
    }
    out
}

/// Sum of monotone bearing sweeps, i.e. how far the listener travelled
/// around the object.
pub fn orbit_degrees_swept(scene: &Scene, trace: &SessionTrace, th: &ClassifierThresholds) -> f64 {
    let k = Kinematics::new(scene, trace, th);
    sweep_runs(&k.unwrapped, th.orbit_backtrack_deg)
        .iter()
        .map(|r| r.sweep_deg)
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticsReport {
    pub segments: Vec<PhaseSegment>,
    pub dwell_per_zone: BTreeMap<String, f64>,
    pub coverage_fraction: f64,
    pub unique_heard_s: BTreeMap<String, f64>,
    pub session_duration_s: f64,
    pub orbit_degrees_swept: f64,
    /// Denominator of `coverage_fraction`: sum of broadcast loop lengths.
    pub content_total_s: f64,
    pub published_content_total_s: f64,
}

pub fn analyze(
    scene: &Scene,
    trace: &SessionTrace,
    th: &ClassifierThresholds,
) -> Result<AnalyticsReport, AnalyticsError> {
    let segments = classify_phases(scene, trace, th)?;
    let cov = coverage(scene, trace);
    Ok(AnalyticsReport {
        segments,
        dwell_per_zone: dwell(scene, trace)
            .into_iter()
            .map(|(z, s)| (z.to_string(), s))
            .collect(),
        coverage_fraction: cov.coverage_fraction,
        unique_heard_s: cov.unique_heard_s,
        session_duration_s: trace.session_duration_s(),
        orbit_degrees_swept: orbit_degrees_swept(scene, trace, th),
        content_total_s: cov.content_total_s,
        published_content_total_s: PUBLISHED_CONTENT_TOTAL_S,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStats {
    pub durations_s: Vec<f64>,
    pub mean_duration_s: f64,
    pub coverages: Vec<f64>,
    pub mean_coverage: f64,
    pub content_total_s: f64,
    pub published_content_total_s: f64,
}

pub fn session_stats(
    scene: &Scene,
    traces: &[SessionTrace],
) -> Result<SessionStats, AnalyticsError> {
    if traces.is_empty() {
        return Err(AnalyticsError::NoTraces);
    }
    let durations_s: Vec<f64> = traces
        .iter()
        .map(SessionTrace::session_duration_s)
        .collect();
    let coverages: Vec<f64> = traces
        .iter()
        .map(|t| coverage(scene, t).coverage_fraction)
        .collect();
    let n = traces.len() as f64;
    Ok(SessionStats {
        mean_duration_s: durations_s.iter().sum::<f64>() / n,
        mean_coverage: coverages.iter().sum::<f64>() / n,
        durations_s,
        coverages,
        content_total_s: CoverageTracker::new(scene).content_total_s(),
        published_content_total_s: PUBLISHED_CONTENT_TOTAL_S,
    })
}

/// CSV view of a report: one row per phase segment, then one per zone.
pub fn report_csv(report: &AnalyticsReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["record", "label", "t_start", "t_end", "seconds"])
        .expect("in-memory write");
    for s in &report.segments {
        w.write_record([
            "segment",
            s.phase.name(),
            &format!("{:.3}", s.t_start),
            &format!("{:.3}", s.t_end),
            &format!("{:.3}", s.t_end - s.t_start),
        ])
        .expect("in-memory write");
    }
    for (zone, secs) in &report.dwell_per_zone {
        w.write_record(["dwell", zone, "", "", &format!("{secs:.3}")])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}
