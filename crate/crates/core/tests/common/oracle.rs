// Reference evaluator for the mixing rules, written from the formulas alone.
// It reads the scene as raw JSON and shares no code with the engine.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use serde_json::Value;

pub struct OSource {
    pub id: String,
    pub clip: String,
    pub loop_s: f64,
    pub bearing: f64,
    pub full: f64,
    pub trans: f64,
    pub range: f64,
}

pub struct OScene {
    pub ax: f64,
    pub ay: f64,
    pub rot: f64,
    pub ex: f64,
    pub ey: f64,
    pub d_ref: f64,
    pub rolloff: f64,
    pub taper: f64,
    pub static_range: f64,
    pub threshold: f64,
    pub sources: Vec<OSource>,
}

fn num(v: &Value, key: &str, default: f64) -> f64 {
    v.get(key).and_then(Value::as_f64).unwrap_or(default)
}

impl OScene {
    pub fn from_json(text: &str) -> OScene {
        let v: Value = serde_json::from_str(text).unwrap();
        let anchor = &v["anchor"];
        let off = &v["emission_offset"];
        let rot = num(anchor, "rotation_deg", 0.0);
        let (ox, oy) = (num(off, "x", 0.0), num(off, "y", 0.0));
        let r = rot * std::f64::consts::PI / 180.0;
        let ax = num(&anchor["position"], "x", 0.0);
        let ay = num(&anchor["position"], "y", 0.0);
        let sources = v["sources"]
            .as_array()
            .unwrap()
            .iter()
            .map(|s| OSource {
                id: s["id"].as_str().unwrap().to_string(),
                clip: s["clip"]["id"].as_str().unwrap().to_string(),
                loop_s: s["clip"]["loop_s"].as_f64().unwrap(),
                bearing: s["bearing_deg"].as_f64().unwrap(),
                full: num(s, "full_halfwidth_deg", 10.0),
                trans: num(s, "transition_deg", 10.0),
                range: num(s, "range_m", 2.0) * num(s, "nimbus_scale", 1.0),
            })
            .collect();
        let att = &v["attenuation"];
        OScene {
            ax,
            ay,
            rot,
            ex: ax + ox * r.cos() - oy * r.sin(),
            ey: ay + ox * r.sin() + oy * r.cos(),
            d_ref: num(att, "d_ref_m", 0.2),
            rolloff: num(att, "rolloff", 1.0),
            taper: num(att, "taper_m", 0.1),
            static_range: num(&v["static"], "range_m", 3.0),
            threshold: num(&v, "audible_threshold", 0.05),
            sources,
        }
    }
}

/// Signed difference folded into (-180, 180].
pub fn fold(mut a: f64) -> f64 {
    while a > 180.0 {
        a -= 360.0;
    }
    while a <= -180.0 {
        a += 360.0;
    }
    a
}

pub fn gain(sc: &OScene, d: f64, range: f64) -> f64 {
    if d >= range {
        return 0.0;
    }
    let mut g = if d > sc.d_ref {
        (sc.d_ref / d).powf(sc.rolloff)
    } else {
        1.0
    };
    if range - d < sc.taper {
        g *= (range - d) / sc.taper;
    }
    g
}

/// (content, static complement)
pub fn window(s: &OSource, delta: f64) -> (f64, f64) {
    let a = delta.abs();
    if a >= s.full + s.trans {
        (0.0, 1.0)
    } else if a > s.full {
        let th = (a - s.full) / s.trans * std::f64::consts::FRAC_PI_2;
        (th.cos(), th.sin())
    } else {
        (1.0, 0.0)
    }
}

pub struct OSourceMix {
    pub id: String,
    pub clip: String,
    pub w: f64,
    pub gain: f64,
    pub audible: bool,
    pub playhead: f64,
}

pub struct OMix {
    pub sources: Vec<OSourceMix>,
    pub static_gain: f64,
    pub static_audible: bool,
}

fn audible(sc: &OScene, g: f64) -> bool {
    g > 0.0 && g >= sc.threshold
}

/// Canonical-scene evaluation for a listener at (x, y); inner zones are not
/// modelled.
pub fn evaluate(sc: &OScene, x: f64, y: f64, t: f64) -> OMix {
    let d = ((x - sc.ex).powi(2) + (y - sc.ey).powi(2)).sqrt();
    let bearing = if x == sc.ax && y == sc.ay {
        0.0
    } else {
        fold((y - sc.ay).atan2(x - sc.ax).to_degrees() - sc.rot)
    };
    let mut static_w = 1.0;
    let mut sources = Vec::new();
    for s in &sc.sources {
        let delta = fold(bearing - s.bearing);
        let (w, ws) = window(s, delta);
        let g = gain(sc, d, s.range);
        if d < s.range && delta.abs() < s.full + s.trans {
            static_w = ws;
        }
        let eff = w * g;
        sources.push(OSourceMix {
            id: s.id.clone(),
            clip: s.clip.clone(),
            w,
            gain: eff,
            audible: audible(sc, eff),
            playhead: t % s.loop_s,
        });
    }
    let static_gain = gain(sc, d, sc.static_range) * static_w;
    OMix {
        sources,
        static_audible: audible(sc, static_gain),
        static_gain,
    }
}

/// Per-second brute force: every sample at which a clip is audible and at
/// least half tuned in marks the whole second of the clip it falls in.
pub fn coverage(sc: &OScene, samples: &[(f64, f64, f64)]) -> (BTreeMap<String, f64>, f64) {
    let mut heard: BTreeMap<String, BTreeSet<i64>> = BTreeMap::new();
    for s in &sc.sources {
        heard.insert(s.clip.clone(), BTreeSet::new());
    }
    for &(t, x, y) in samples {
        for m in evaluate(sc, x, y, t).sources {
            if m.audible && m.w >= 0.5 {
                heard.get_mut(&m.clip).unwrap().insert(m.playhead as i64);
            }
        }
    }
    let mut per_clip = BTreeMap::new();
    let mut total = 0.0;
    let mut heard_sum = 0.0;
    for s in &sc.sources {
        let n = (heard[&s.clip].len() as f64).min(s.loop_s);
        per_clip.insert(s.clip.clone(), n);
        heard_sum += n;
        total += s.loop_s;
    }
    (per_clip, heard_sum / total)
}
