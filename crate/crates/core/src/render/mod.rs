//! Offline stereo rendering of what a listener hears along a trace.
//!
//! Rendering runs in two passes. A sequential pass evaluates the mix at the
//! midpoint of every block to produce a gain schedule; the sample pass then
//! ramps each channel's stereo gains linearly from the previous block's
//! targets to the current ones.

pub mod wav;

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mix::{compute_mix, pan_gains, MixState};
use crate::scene::{ContentClip, Scene};
use crate::trace::SessionTrace;

pub use wav::{read_wav, read_wav_from, write_wav, write_wav_to};

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("wav: {0}")]
    Wav(hound::Error),
    #[error("unsupported wav format: {0}")]
    UnsupportedFormat(String),
    #[error("media file for clip `{clip}` not found: {}", path.display())]
    MissingMedia { clip: String, path: PathBuf },
    #[error("clip `{clip}` has no media_path and synth fallback is disabled")]
    NoMedia { clip: String },
    #[error("media for clip `{clip}` is {found} Hz, render is {expected} Hz")]
    SampleRateMismatch {
        clip: String,
        expected: u32,
        found: u32,
    },
    #[error("media for clip `{clip}` must be mono, found {channels} channels")]
    NotMono { clip: String, channels: u16 },
    #[error("invalid pcm buffer: {0}")]
    Buffer(&'static str),
    #[error("invalid render config: {0}")]
    Config(&'static str),
}

impl From<hound::Error> for RenderError {
    fn from(e: hound::Error) -> Self {
        match e {
            hound::Error::Unsupported => {
                RenderError::UnsupportedFormat("compressed or non-PCM encoding".into())
            }
            other => RenderError::Wav(other),
        }
    }
}

/// Interleaved signed 16-bit samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PcmBuffer {
    pub sample_rate_hz: u32,
    pub channels: u16,
    pub samples: Vec<i16>,
}

impl PcmBuffer {
    pub fn new(sample_rate_hz: u32, channels: u16, samples: Vec<i16>) -> Result<Self, RenderError> {
        if !(1..=2).contains(&channels) {
            return Err(RenderError::Buffer("channels must be 1 or 2"));
        }
        if !samples.len().is_multiple_of(channels as usize) {
            return Err(RenderError::Buffer(
                "sample count not divisible by channels",
            ));
        }
        Ok(Self {
            sample_rate_hz,
            channels,
            samples,
        })
    }

    pub fn frames(&self) -> usize {
        self.samples.len() / self.channels as usize
    }

    /// Samples of one channel, de-interleaved.
    pub fn channel(&self, ch: usize) -> impl Iterator<Item = i16> + '_ {
        self.samples
            .iter()
            .skip(ch)
            .step_by(self.channels as usize)
            .copied()
    }

    /// RMS of one channel over a frame range, relative to full scale.
    pub fn rms(&self, ch: usize, frames: std::ops::Range<usize>) -> f64 {
        let n = frames.len();
        if n == 0 {
            return 0.0;
        }
        let sum: f64 = self
            .channel(ch)
            .skip(frames.start)
            .take(n)
            .map(|s| {
                let v = s as f64 / FULL_SCALE;
                v * v
            })
            .sum();
        (sum / n as f64).sqrt()
    }
}

const FULL_SCALE: f64 = i16::MAX as f64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    pub block_s: f64,
    pub sample_rate_hz: u32,
    /// Render clips without media as test tones (source `k` at
    /// `220 * (k + 1)` Hz, static as 100 Hz band-limited noise).
    pub synth_fallback: bool,
    /// Seeds the synthetic static.
    pub seed: u64,
    /// Base directory for relative `media_path`s.
    pub media_root: Option<PathBuf>,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            block_s: 0.01,
            sample_rate_hz: 44_100,
            synth_fallback: true,
            seed: 0,
            media_root: None,
        }
    }
}

impl RenderConfig {
    fn block_frames(&self) -> Result<usize, RenderError> {
        if !(self.block_s.is_finite() && self.block_s > 0.0) {
            return Err(RenderError::Config("block_s must be positive"));
        }
        if self.sample_rate_hz == 0 {
            return Err(RenderError::Config("sample_rate_hz must be positive"));
        }
        Ok(((self.block_s * self.sample_rate_hz as f64).round() as usize).max(1))
    }
}

/// Mix targets for one block, evaluated at the block's midpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTarget {
    pub start_frame: usize,
    pub frames: usize,
    pub t_mid: f64,
    pub mix: MixState,
}

impl BlockTarget {
    /// `(left, right)` gains for each source in scene order, then static.
    pub fn channel_gains(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = self
            .mix
            .sources
            .iter()
            .map(|s| {
                let (l, r) = pan_gains(s.azimuth_deg);
                (s.effective_gain * l, s.effective_gain * r)
            })
            .collect();
        let (l, r) = pan_gains(self.mix.static_bed.azimuth_deg);
        out.push((self.mix.static_bed.gain * l, self.mix.static_bed.gain * r));
        out
    }
}

/// Sequential gain-schedule pass.
pub fn gain_schedule(
    scene: &Scene,
    trace: &SessionTrace,
    cfg: &RenderConfig,
) -> Result<Vec<BlockTarget>, RenderError> {
    let block = cfg.block_frames()?;
    let sr = cfg.sample_rate_hz as f64;
    let t0 = trace.start_t();
    let total = ((trace.end_t() - t0) * sr).round() as usize;
    let mut out = Vec::with_capacity(total / block + 1);
    let mut start = 0;
    while start < total {
        let frames = block.min(total - start);
        let t_mid = t0 + (start as f64 + frames as f64 / 2.0) / sr;
        let pose = trace.pose_at(t_mid);
        out.push(BlockTarget {
            start_frame: start,
            frames,
            t_mid,
            mix: compute_mix(scene, &pose, t_mid),
        });
        start += frames;
    }
    Ok(out)
}

/// A looping mono signal indexed by absolute sample number.
enum Signal {
    Tone { step: f64, period: u64 },
    Table(Vec<f32>),
}

impl Signal {
    #[inline]
    fn at(&self, index: u64) -> f64 {
        match self {
            Signal::Tone { step, period } => ((index % period) as f64 * step).sin(),
            Signal::Table(t) => t[(index % t.len() as u64) as usize] as f64,
        }
    }
}

fn loop_frames(clip: &ContentClip, sr: u32) -> u64 {
    ((clip.loop_s * sr as f64).round() as u64).max(1)
}

fn load_signal(
    clip: &ContentClip,
    fallback_hz: Option<f64>,
    cfg: &RenderConfig,
) -> Result<Signal, RenderError> {
    let frames = loop_frames(clip, cfg.sample_rate_hz);
    let Some(rel) = &clip.media_path else {
        if !cfg.synth_fallback {
            return Err(RenderError::NoMedia {
                clip: clip.id.clone(),
            });
        }
        return Ok(match fallback_hz {
            Some(hz) => Signal::Tone {
                step: TAU * hz / cfg.sample_rate_hz as f64,
                period: frames,
            },
            None => Signal::Table(band_limited_noise(frames as usize, cfg)),
        });
    };
    let path = match &cfg.media_root {
        Some(root) if rel.is_relative() => root.join(rel),
        _ => rel.clone(),
    };
    if !Path::new(&path).exists() {
        return Err(RenderError::MissingMedia {
            clip: clip.id.clone(),
            path,
        });
    }
    let pcm = read_wav(&path)?;
    if pcm.sample_rate_hz != cfg.sample_rate_hz {
        return Err(RenderError::SampleRateMismatch {
            clip: clip.id.clone(),
            expected: cfg.sample_rate_hz,
            found: pcm.sample_rate_hz,
        });
    }
    if pcm.channels != 1 {
        return Err(RenderError::NotMono {
            clip: clip.id.clone(),
            channels: pcm.channels,
        });
    }
    // pad or trim to the authored loop length
    let mut table: Vec<f32> = pcm
        .samples
        .iter()
        .take(frames as usize)
        .map(|&s| s as f32 / FULL_SCALE as f32)
        .collect();
    table.resize(frames as usize, 0.0);
    Ok(Signal::Table(table))
}

/// Seeded white noise through two cascaded one-pole low-passes at 100 Hz,
/// normalised to unit peak.
fn band_limited_noise(frames: usize, cfg: &RenderConfig) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let a = (-TAU * 100.0 / cfg.sample_rate_hz as f64).exp();
    let (mut y1, mut y2) = (0.0f64, 0.0f64);
    let mut out: Vec<f64> = (0..frames)
        .map(|_| {
            let x: f64 = rng.random_range(-1.0..1.0);
            y1 = (1.0 - a) * x + a * y1;
            y2 = (1.0 - a) * y1 + a * y2;
            y2
        })
        .collect();
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        out.iter_mut().for_each(|v| *v /= peak);
    }
    out.into_iter().map(|v| v as f32).collect()
}

/// Per-source main and inner-zone signals plus the static bed.
struct Bank {
    main: Vec<Signal>,
    inner: Vec<Option<(String, Signal)>>,
    bed: Signal,
}

impl Bank {
    fn load(scene: &Scene, cfg: &RenderConfig) -> Result<Self, RenderError> {
        let mut main = Vec::new();
        let mut inner = Vec::new();
        for (k, src) in scene.sources.iter().enumerate() {
            let hz = 220.0 * (k as f64 + 1.0);
            main.push(load_signal(&src.clip, Some(hz), cfg)?);
            inner.push(match &src.inner_zone {
                Some(zone) => Some((
                    zone.clip.id.clone(),
                    load_signal(&zone.clip, Some(hz * 1.5), cfg)?,
                )),
                None => None,
            });
        }
        let bed = load_signal(&scene.static_bed.clip, None, cfg)?;
        Ok(Self { main, inner, bed })
    }

    fn signal_for(&self, k: usize, clip_id: &str) -> &Signal {
        match &self.inner[k] {
            Some((id, sig)) if id == clip_id => sig,
            _ => &self.main[k],
        }
    }
}

/// Renders the stereo mix heard along `trace`.
pub fn render(
    scene: &Scene,
    trace: &SessionTrace,
    cfg: &RenderConfig,
) -> Result<PcmBuffer, RenderError> {
    let schedule = gain_schedule(scene, trace, cfg)?;
    render_schedule(scene, trace, &schedule, cfg)
}

/// Sample pass over a precomputed schedule.
pub fn render_schedule(
    scene: &Scene,
    trace: &SessionTrace,
    schedule: &[BlockTarget],
    cfg: &RenderConfig,
) -> Result<PcmBuffer, RenderError> {
    let bank = Bank::load(scene, cfg)?;
    let total: usize = schedule.iter().map(|b| b.frames).sum();
    let origin = (trace.start_t() * cfg.sample_rate_hz as f64).round() as u64;
    let n_sources = scene.sources.len();

    let mut samples = vec![0i16; total * 2];
    let mut acc = vec![0.0f64; cfg.block_frames()? * 2];
    let mut prev: Option<Vec<(f64, f64)>> = None;

    for block in schedule {
        let cur = block.channel_gains();
        let from = prev.as_ref().unwrap_or(&cur);
        let acc = &mut acc[..block.frames * 2];
        acc.fill(0.0);

        for (ch, (&(l1, r1), &(l0, r0))) in cur.iter().zip(from.iter()).enumerate() {
            if l0 == 0.0 && r0 == 0.0 && l1 == 0.0 && r1 == 0.0 {
                continue;
            }
            let signal = if ch < n_sources {
                bank.signal_for(ch, &block.mix.sources[ch].clip_id)
            } else {
                &bank.bed
            };
            let (dl, dr) = (l1 - l0, r1 - r0);
            let n = block.frames as f64;
            let base = origin + block.start_frame as u64;
            for i in 0..block.frames {
                let f = (i + 1) as f64 / n;
                let v = signal.at(base + i as u64);
                acc[2 * i] += v * (l0 + dl * f);
                acc[2 * i + 1] += v * (r0 + dr * f);
            }
        }

        let out = &mut samples[block.start_frame * 2..(block.start_frame + block.frames) * 2];
        for (o, &v) in out.iter_mut().zip(acc.iter()) {
            *o = (v.clamp(-1.0, 1.0) * FULL_SCALE).round() as i16;
        }
        prev = Some(cur);
    }

    PcmBuffer::new(cfg.sample_rate_hz, 2, samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;
    use crate::trace::TraceBuilder;

    fn stationary(bearing: f64, d: f64, seconds: f64) -> SessionTrace {
        TraceBuilder::around(10.0, Vec2::ZERO, bearing, d)
            .stand(seconds)
            .build()
    }

    #[test]
    fn tone_rms_matches_gain_product() {
        let scene = Scene::listening_session();
        let pcm = render(
            &scene,
            &stationary(90.0, 0.5, 1.0),
            &RenderConfig::default(),
        )
        .unwrap();
        assert_eq!(pcm.frames(), 44_100);
        // 440 Hz: 44100 frames hold exactly 440 periods
        for ch in 0..2 {
            let rms = pcm.rms(ch, 0..44_100);
            assert!((rms - 0.2).abs() / 0.2 < 0.01, "channel {ch}: {rms}");
        }
    }

    #[test]
    fn out_of_range_is_digital_silence() {
        let scene = Scene::listening_session();
        let pcm = render(
            &scene,
            &stationary(30.0, 3.2, 2.0),
            &RenderConfig::default(),
        )
        .unwrap();
        assert!(pcm.samples.iter().all(|&s| s == 0));
    }

    #[test]
    fn stationary_render_repeats_with_the_clip_loop() {
        let scene = Scene::listening_session();
        let cfg = RenderConfig {
            sample_rate_hz: 8000,
            ..Default::default()
        };
        let pcm = render(&scene, &stationary(90.0, 0.5, 84.0), &cfg).unwrap();
        let half = 42 * 8000 * 2;
        assert_eq!(pcm.samples.len(), 2 * half);
        assert!(pcm.samples[..half] == pcm.samples[half..]);
        assert!(pcm.samples.iter().any(|&s| s != 0));
    }

    #[test]
    fn static_only_region_is_not_silent() {
        let scene = Scene::listening_session();
        let pcm = render(
            &scene,
            &stationary(45.0, 1.0, 1.0),
            &RenderConfig::default(),
        )
        .unwrap();
        assert!(pcm.rms(0, 0..pcm.frames()) > 0.01);
    }

    #[test]
    fn schedule_targets_follow_block_midpoints() {
        let scene = Scene::listening_session();
        let trace = TraceBuilder::around(10.0, Vec2::ZERO, 45.0, 1.0)
            .orbit(120.0, 4.0)
            .walk_to_polar(165.0, 2.5, 2.0)
            .build();
        for block_s in [0.01, 0.02] {
            let cfg = RenderConfig {
                block_s,
                ..Default::default()
            };
            for b in gain_schedule(&scene, &trace, &cfg).unwrap() {
                let expect = compute_mix(&scene, &trace.pose_at(b.t_mid), b.t_mid);
                assert_eq!(b.mix, expect);
            }
        }
        let trace = stationary(90.0, 0.5, 1.0);
        let fine = gain_schedule(&scene, &trace, &RenderConfig::default()).unwrap();
        let coarse = gain_schedule(
            &scene,
            &trace,
            &RenderConfig {
                block_s: 0.02,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(fine.len(), 100);
        assert_eq!(coarse.len(), 50);
        assert_eq!(fine[0].channel_gains(), coarse[0].channel_gains());
        assert_eq!(fine[99].channel_gains(), coarse[49].channel_gains());
    }

    #[test]
    fn ramps_are_linear_between_blocks() {
        let scene = Scene::listening_session();
        let trace = TraceBuilder::around(10.0, Vec2::ZERO, 90.0, 0.5)
            .walk_to_polar(90.0, 1.0, 1.0)
            .build();
        let cfg = RenderConfig::default();
        let pcm = render(&scene, &trace, &cfg).unwrap();
        assert!(pcm.samples.iter().all(|&s| s > i16::MIN));
        let again = render(&scene, &trace, &cfg).unwrap();
        assert_eq!(pcm, again);
    }

    #[test]
    fn missing_media_without_fallback_fails() {
        let scene = Scene::listening_session();
        let cfg = RenderConfig {
            synth_fallback: false,
            ..Default::default()
        };
        assert!(matches!(
            render(&scene, &stationary(0.0, 1.0, 0.1), &cfg),
            Err(RenderError::NoMedia { .. })
        ));
        let mut scene = scene;
        scene.sources[0].clip.media_path = Some("does/not/exist.wav".into());
        assert!(matches!(
            render(&scene, &stationary(0.0, 1.0, 0.1), &RenderConfig::default()),
            Err(RenderError::MissingMedia { .. })
        ));
    }

    #[test]
    fn media_sample_rate_must_match() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("slow.wav");
        write_wav(&PcmBuffer::new(22_050, 1, vec![100; 2205]).unwrap(), &path).unwrap();
        let mut scene = Scene::listening_session();
        scene.sources[1].clip.media_path = Some("slow.wav".into());
        let cfg = RenderConfig {
            media_root: Some(dir.path().to_path_buf()),
            ..Default::default()
        };
        assert!(matches!(
            render(&scene, &stationary(90.0, 0.5, 0.1), &cfg),
            Err(RenderError::SampleRateMismatch {
                expected: 44_100,
                found: 22_050,
                ..
            })
        ));
    }

    #[test]
    fn media_clip_is_looped_at_authored_length() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dc.wav");
        write_wav(&PcmBuffer::new(8_000, 1, vec![16_384; 800]).unwrap(), &path).unwrap();
        let mut scene = Scene::listening_session();
        scene.sources[1].clip.media_path = Some(path.clone());
        scene.sources[1].clip.loop_s = 0.2;
        let cfg = RenderConfig {
            sample_rate_hz: 8_000,
            ..Default::default()
        };
        let pcm = render(&scene, &stationary(90.0, 0.2, 0.4), &cfg).unwrap();
        // full gain, centred: 0.5 * 0.7071 on both channels for 0.1 s, then
        // silence padding for the rest of each 0.2 s loop
        let first = pcm.samples[0] as f64 / FULL_SCALE;
        assert!((first - 0.5 * std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-3);
        let quiet = pcm.samples[2 * 1200];
        assert_eq!(quiet, 0);
        assert_eq!(pcm.samples[2 * 1600], pcm.samples[0]);
    }

    #[test]
    fn bad_config_is_rejected() {
        let scene = Scene::listening_session();
        let cfg = RenderConfig {
            block_s: 0.0,
            ..Default::default()
        };
        assert!(render(&scene, &stationary(0.0, 1.0, 0.1), &cfg).is_err());
    }
}
