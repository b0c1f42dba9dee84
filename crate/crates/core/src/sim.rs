//! Synthetic labeled event streams: moving edge patterns plus Poisson
//! background-activity noise.
//!
//! Scene geometry is a set of line segments defined at time 0. A pixel fires
//! at time `t` when warping it back to time 0 with the ground-truth motion
//! lands within half a pixel of a segment. Each pixel draws homogeneous
//! Poisson proposals and keeps the ones that pass this test.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{CameraModel, CoreError, Event, EventSlice, Label};
use crate::warp::{warp_point, MotionParams, WarpError};

/// Half-width of the band around each segment that counts as "on the edge".
pub const EDGE_HALF_WIDTH: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scene: {0}")]
    InvalidSpec(String),
    #[error("no edge pixels intersect the sensor")]
    EmptyScene,
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Warp(#[from] WarpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Pattern {
    /// Rectangle outline near the image center.
    Bar,
    /// Radial segments around the principal point.
    Star { arms: u32 },
    /// Small four-arm star (near, rate multiplier `near_density`) inside a
    /// large square outline (far, rate multiplier `far_density`).
    TwoDepth { near_density: f64, far_density: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub pattern: Pattern,
    /// Ground-truth motion.
    pub motion: MotionParams,
    /// Seconds.
    pub duration: f64,
    /// Event rate of a pixel lying on an edge, in Hz.
    pub events_per_edge_pixel: f64,
    pub sensor: CameraModel,
    pub seed: u64,
}

impl SceneSpec {
    /// Rotating eight-arm star on a 200x200 sensor, about 50k events.
    pub fn standard(seed: u64) -> Self {
        Self {
            pattern: Pattern::Star { arms: 8 },
            motion: MotionParams::angular(0.0, 0.0, 2.0),
            duration: 0.2,
            events_per_edge_pixel: 400.0,
            sensor: CameraModel::centered(200, 200, 200.0).expect("valid camera"),
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.sensor.validate()?;
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(SimError::InvalidSpec("duration must be positive".into()));
        }
        if !(self.events_per_edge_pixel >= 0.0 && self.events_per_edge_pixel.is_finite()) {
            return Err(SimError::InvalidSpec("edge rate must be non-negative".into()));
        }
        match self.pattern {
            Pattern::Star { arms: 0 } => return Err(SimError::InvalidSpec("star needs at least one arm".into())),
            Pattern::TwoDepth { near_density, far_density }
                if !(near_density >= 0.0 && far_density >= 0.0 && near_density.is_finite() && far_density.is_finite()) =>
            {
                return Err(SimError::InvalidSpec("densities must be non-negative".into()))
            }
            _ => {}
        }
        if !self.motion.is_finite() {
            return Err(SimError::InvalidSpec("motion must be finite".into()));
        }
        Ok(())
    }
}

/// A straight edge at time 0, in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: [f64; 2],
    pub b: [f64; 2],
    /// Edge group: 0 for the primary (near) edges, 1 for far edges.
    pub group: u8,
    /// Multiplier on the per-edge-pixel rate.
    pub density: f64,
}

impl Segment {
    pub fn distance(&self, p: [f64; 2]) -> f64 {
        let d = [self.b[0] - self.a[0], self.b[1] - self.a[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        let rel = [p[0] - self.a[0], p[1] - self.a[1]];
        let s = if len2 > 0.0 { ((rel[0] * d[0] + rel[1] * d[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
        let q = [rel[0] - s * d[0], rel[1] - s * d[1]];
        q[0].hypot(q[1])
    }
}

fn polygon(points: &[[f64; 2]], group: u8, density: f64) -> Vec<Segment> {
    (0..points.len())
        .map(|i| Segment { a: points[i], b: points[(i + 1) % points.len()], group, density })
        .collect()
}

fn star(c: [f64; 2], r_in: f64, r_out: f64, arms: u32, offset: f64, group: u8, density: f64) -> Vec<Segment> {
    (0..arms)
        .map(|i| {
            let a = offset + TAU * i as f64 / arms as f64;
            let (s, co) = a.sin_cos();
            Segment {
                a: [c[0] + r_in * co, c[1] + r_in * s],
                b: [c[0] + r_out * co, c[1] + r_out * s],
                group,
                density,
            }
        })
        .collect()
}

fn rectangle(c: [f64; 2], hw: f64, hh: f64, group: u8, density: f64) -> Vec<Segment> {
    polygon(
        &[[c[0] - hw, c[1] - hh], [c[0] + hw, c[1] - hh], [c[0] + hw, c[1] + hh], [c[0] - hw, c[1] + hh]],
        group,
        density,
    )
}

/// Edge segments of a pattern at time 0.
pub fn scene_segments(pattern: &Pattern, sensor: &CameraModel) -> Vec<Segment> {
    let w = sensor.width as f64;
    let h = sensor.height as f64;
    let m = w.min(h);
    let c = [sensor.cx, sensor.cy];
    match *pattern {
        Pattern::Bar => rectangle([c[0] + 0.3, c[1] + 0.2], 0.08 * w, 0.3 * h, 0, 1.0),
        Pattern::Star { arms } => star(c, 0.08 * m, 0.45 * m, arms, 0.1, 0, 1.0),
        Pattern::TwoDepth { near_density, far_density } => {
            let mut segs = star(c, 0.04 * m, 0.18 * m, 4, 0.3, 0, near_density);
            segs.extend(rectangle([c[0] + 0.3, c[1] + 0.2], 0.38 * m, 0.38 * m, 1, far_density));
            segs
        }
    }
}

/// Closest segment within the edge band around `p`, if any.
pub fn edge_at(segments: &[Segment], p: [f64; 2]) -> Option<&Segment> {
    segments
        .iter()
        .filter(|s| s.distance(p) <= EDGE_HALF_WIDTH)
        .min_by(|a, b| a.distance(p).total_cmp(&b.distance(p)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSlice {
    pub slice: EventSlice,
    pub gt_labels: Vec<Label>,
    pub gt_motion: MotionParams,
    /// Hz per pixel.
    pub injected_noise_rate: f64,
    /// Generation time span `[0, duration]`.
    pub duration: f64,
    /// Edge group of each signal event, `None` for noise.
    pub edge_group: Vec<Option<u8>>,
}

impl LabeledSlice {
    pub fn noise_count(&self) -> usize {
        self.gt_labels.iter().filter(|l| !l.is_signal()).count()
    }

    pub fn signal_count(&self) -> usize {
        self.gt_labels.len() - self.noise_count()
    }

    pub fn signal_mask(&self) -> Vec<bool> {
        self.gt_labels.iter().map(|l| l.is_signal()).collect()
    }
}

struct Tagged {
    event: Event,
    label: Label,
    group: Option<u8>,
}

fn assemble(
    mut items: Vec<Tagged>,
    sensor: CameraModel,
    gt_motion: MotionParams,
    rate: f64,
    duration: f64,
) -> Result<LabeledSlice, SimError> {
    // Stable sort keeps generation order among equal timestamps.
    items.sort_by(|a, b| a.event.t.total_cmp(&b.event.t));
    let slice = EventSlice::new(items.iter().map(|i| i.event).collect(), sensor)?;
    Ok(LabeledSlice {
        slice,
        gt_labels: items.iter().map(|i| i.label).collect(),
        gt_motion,
        injected_noise_rate: rate,
        duration,
        edge_group: items.iter().map(|i| i.group).collect(),
    })
}

fn poisson_count(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
}

/// Generates the noise-free labeled stream for `spec`.
pub fn generate_scene(spec: &SceneSpec) -> Result<LabeledSlice, SimError> {
    spec.validate()?;
    let sensor = spec.sensor;
    let segments = scene_segments(&spec.pattern, &sensor);
    let max_density = segments.iter().map(|s| s.density).fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut items = Vec::new();
    let mut edge_seen = false;
    let mean = spec.events_per_edge_pixel * max_density * spec.duration;
    for y in 0..sensor.height {
        for x in 0..sensor.width {
            let p = [x as f64, y as f64];
            if !edge_seen && edge_at(&segments, p).is_some() {
                edge_seen = true;
            }
            for _ in 0..poisson_count(&mut rng, mean) {
                let t = rng.random::<f64>() * spec.duration;
                let accept = rng.random::<f64>();
                let polarity = if rng.random::<bool>() { 1 } else { -1 };
                let Some(q) = warp_point(&spec.motion, &sensor, p, t) else { continue };
                if let Some(seg) = edge_at(&segments, q) {
                    if accept * max_density < seg.density {
                        items.push(Tagged { event: Event::new(x, y, t, polarity), label: Label::Signal, group: Some(seg.group) });
                    }
                }
            }
        }
    }
    if !edge_seen && items.is_empty() {
        return Err(SimError::EmptyScene);
    }
    assemble(items, sensor, spec.motion.clone(), 0.0, spec.duration)
}

/// Adds homogeneous Poisson noise at `rate` Hz per pixel over the generation
/// time span, labeled noise, and re-sorts the stream.
pub fn inject_ba_noise(labeled: &LabeledSlice, rate: f64, seed: u64) -> Result<LabeledSlice, SimError> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(SimError::InvalidSpec("noise rate must be non-negative".into()));
    }
    if rate == 0.0 {
        return Ok(labeled.clone());
    }
    let sensor = labeled.slice.sensor;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut items: Vec<Tagged> = labeled
        .slice
        .events
        .iter()
        .zip(&labeled.gt_labels)
        .zip(&labeled.edge_group)
        .map(|((&event, &label), &group)| Tagged { event, label, group })
        .collect();
    let mean = rate * labeled.duration;
    for y in 0..sensor.height {
        for x in 0..sensor.width {
            for _ in 0..poisson_count(&mut rng, mean) {
                let t = rng.random::<f64>() * labeled.duration;
                let polarity = if rng.random::<bool>() { 1 } else { -1 };
                items.push(Tagged { event: Event::new(x, y, t, polarity), label: Label::Noise, group: None });
            }
        }
    }
    assemble(items, sensor, labeled.gt_motion.clone(), labeled.injected_noise_rate + rate, labeled.duration)
}

/// Noise rate (Hz per pixel) whose expected share of the merged stream is `eta`.
pub fn noise_rate_for_fraction(eta: f64, signal_events: usize, duration: f64, sensor: &CameraModel) -> f64 {
    assert!((0.0..1.0).contains(&eta), "noise fraction must lie in [0, 1)");
    eta / (1.0 - eta) * signal_events as f64 / (duration * sensor.pixel_count() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bar(motion: MotionParams, seed: u64) -> SceneSpec {
        SceneSpec {
            pattern: Pattern::Bar,
            motion,
            duration: 0.05,
            events_per_edge_pixel: 200.0,
            sensor: CameraModel::centered(60, 40, 50.0).unwrap(),
            seed,
        }
    }

    #[test]
    fn segment_distance() {
        let s = Segment { a: [0.0, 0.0], b: [10.0, 0.0], group: 0, density: 1.0 };
        assert_eq!(s.distance([5.0, 2.0]), 2.0);
        assert_eq!(s.distance([13.0, 4.0]), 5.0);
        assert_eq!(s.distance([-3.0, 0.0]), 3.0);
    }

    #[test]
    fn rejects_bad_specs() {
        let mut spec = bar(MotionParams::Identity, 0);
        spec.duration = 0.0;
        assert!(matches!(generate_scene(&spec), Err(SimError::InvalidSpec(_))));
        spec.duration = 0.1;
        spec.pattern = Pattern::Star { arms: 0 };
        assert!(generate_scene(&spec).is_err());
    }

    #[test]
    fn labels_align_and_sorted() {
        let ls = generate_scene(&bar(MotionParams::angular(0.0, 0.0, 1.0), 4)).unwrap();
        assert!(ls.slice.len() > 100);
        assert_eq!(ls.gt_labels.len(), ls.slice.len());
        assert_eq!(ls.noise_count(), 0);
        let noisy = inject_ba_noise(&ls, 20.0, 1).unwrap();
        assert!(noisy.noise_count() > 0);
        assert_eq!(noisy.signal_count(), ls.signal_count());
        assert_eq!(crate::event::validate_slice(&noisy.slice), Ok(()));
    }

    #[test]
    fn zero_rate_noise_is_noop() {
        let ls = generate_scene(&bar(MotionParams::Identity, 2)).unwrap();
        assert_eq!(inject_ba_noise(&ls, 0.0, 5).unwrap(), ls);
    }

    #[test]
    fn off_sensor_scene_is_empty() {
        let mut spec = bar(MotionParams::Identity, 0);
        spec.sensor.cx = 1e4;
        spec.sensor.cy = 1e4;
        assert_eq!(generate_scene(&spec), Err(SimError::EmptyScene));
    }
}
