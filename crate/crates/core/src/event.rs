//! Events, slices, sensor geometry and signal/noise label sets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("timestamps not sorted at event {index}")]
    UnsortedTimestamps { index: usize },
    #[error("event {index} lies outside the sensor")]
    OutOfBoundsPixel { index: usize },
    #[error("event {index} has polarity {polarity}, expected +1 or -1")]
    BadPolarity { index: usize, polarity: i8 },
    #[error("event {index} has a non-finite timestamp")]
    NonFiniteTimestamp { index: usize },
    #[error("reference time {t_ref} outside event time range [{t_min}, {t_max}]")]
    ReferenceTimeOutOfRange { t_ref: f64, t_min: f64, t_max: f64 },
    #[error("invalid camera model: {0}")]
    InvalidCamera(String),
}

/// A single pixel activation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    /// Pixel column, 0-based.
    pub x: u32,
    /// Pixel row, 0-based.
    pub y: u32,
    /// Timestamp in seconds.
    pub t: f64,
    /// Polarity, +1 or -1.
    pub p: i8,
}

impl Event {
    pub fn new(x: u32, y: u32, t: f64, p: i8) -> Self {
        Self { x, y, t, p }
    }
}

/// Pinhole sensor geometry. Focal lengths and principal point are in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraModel {
    pub fn new(width: u32, height: u32, fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self, CoreError> {
        let cam = Self { width, height, fx, fy, cx, cy };
        cam.validate()?;
        Ok(cam)
    }

    /// Camera with the principal point at the image center and equal focal lengths.
    pub fn centered(width: u32, height: u32, focal: f64) -> Result<Self, CoreError> {
        Self::new(
            width,
            height,
            focal,
            focal,
            (width as f64 - 1.0) / 2.0,
            (height as f64 - 1.0) / 2.0,
        )
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if self.width == 0 || self.height == 0 {
            return Err(CoreError::InvalidCamera("width and height must be positive".into()));
        }
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.fx.is_finite() || !self.fy.is_finite() {
            return Err(CoreError::InvalidCamera("focal lengths must be positive and finite".into()));
        }
        if !self.cx.is_finite() || !self.cy.is_finite() {
            return Err(CoreError::InvalidCamera("principal point must be finite".into()));
        }
        Ok(())
    }

    /// Number of pixels in the image plane.
    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x < self.width && y < self.height
    }
}

/// A time-ordered batch of events sharing one sensor and one reference time.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSlice {
    pub events: Vec<Event>,
    pub t_ref: f64,
    pub sensor: CameraModel,
}

impl EventSlice {
    /// Builds a validated slice whose reference time is the earliest timestamp.
    pub fn new(events: Vec<Event>, sensor: CameraModel) -> Result<Self, CoreError> {
        let t_ref = events.first().map_or(0.0, |e| e.t);
        Self::with_t_ref(events, sensor, t_ref)
    }

    pub fn with_t_ref(events: Vec<Event>, sensor: CameraModel, t_ref: f64) -> Result<Self, CoreError> {
        sensor.validate()?;
        let slice = Self { events, t_ref, sensor };
        validate_slice(&slice)?;
        Ok(slice)
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Time span `(t_min, t_max)` of the slice, `None` when empty.
    pub fn time_range(&self) -> Option<(f64, f64)> {
        Some((self.events.first()?.t, self.events.last()?.t))
    }

    /// Copy of the slice restricted to the events selected by `mask`, keeping `t_ref`.
    pub fn select(&self, mask: &[bool]) -> Vec<Event> {
        self.events
            .iter()
            .zip(mask)
            .filter_map(|(e, &keep)| keep.then_some(*e))
            .collect()
    }
}

/// Checks every event invariant plus time ordering. Errors name the first offending event.
pub fn validate_slice(slice: &EventSlice) -> Result<(), CoreError> {
    let mut prev = f64::NEG_INFINITY;
    for (index, e) in slice.events.iter().enumerate() {
        if !e.t.is_finite() {
            return Err(CoreError::NonFiniteTimestamp { index });
        }
        if e.t < prev {
            return Err(CoreError::UnsortedTimestamps { index });
        }
        if !slice.sensor.contains(e.x, e.y) {
            return Err(CoreError::OutOfBoundsPixel { index });
        }
        if e.p != 1 && e.p != -1 {
            return Err(CoreError::BadPolarity { index, polarity: e.p });
        }
        prev = e.t;
    }
    if let Some((t_min, t_max)) = slice.time_range() {
        if !(t_min <= slice.t_ref && slice.t_ref <= t_max) {
            return Err(CoreError::ReferenceTimeOutOfRange {
                t_ref: slice.t_ref,
                t_min,
                t_max,
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Signal,
    Noise,
}

impl Label {
    pub fn is_signal(self) -> bool {
        self == Label::Signal
    }

    pub fn as_char(self) -> char {
        match self {
            Label::Signal => 'S',
            Label::Noise => 'N',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'S' => Some(Label::Signal),
            'N' => Some(Label::Noise),
            _ => None,
        }
    }
}

/// Per-event scores and signal/noise labels produced by a denoiser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSet {
    pub scores: Vec<f64>,
    pub labels: Vec<Label>,
    /// Score of the last admitted signal event.
    pub threshold: f64,
    /// Target (or achieved) signal ratio.
    pub tau: f64,
}

impl LabelSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn signal_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_signal()).count()
    }

    pub fn signal_mask(&self) -> Vec<bool> {
        self.labels.iter().map(|l| l.is_signal()).collect()
    }
}

/// Number of events admitted as signal at ratio `tau`: `ceil(tau * n)`.
///
/// A relative guard of 1e-9 absorbs rounding in `tau * n`, so `k / n` maps back to `k`.
pub fn signal_quota(tau: f64, n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    let prod = tau * n as f64;
    let k = (prod - 1e-9 * prod.max(1.0)).ceil();
    (k.max(0.0) as usize).min(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam() -> CameraModel {
        CameraModel::centered(10, 8, 10.0).unwrap()
    }

    fn slice_of(events: Vec<Event>) -> EventSlice {
        EventSlice { t_ref: events.first().map_or(0.0, |e| e.t), events, sensor: cam() }
    }

    #[test]
    fn empty_slice_is_valid() {
        assert_eq!(validate_slice(&slice_of(vec![])), Ok(()));
    }

    #[test]
    fn unsorted_reports_first_offender() {
        let s = slice_of(vec![
            Event::new(0, 0, 0.0, 1),
            Event::new(1, 0, 1.0, 1),
            Event::new(2, 0, 0.5, -1),
        ]);
        assert_eq!(validate_slice(&s), Err(CoreError::UnsortedTimestamps { index: 2 }));
    }

    #[test]
    fn out_of_bounds_at_width() {
        let s = slice_of(vec![Event::new(0, 0, 0.0, 1), Event::new(10, 3, 0.1, 1)]);
        assert_eq!(validate_slice(&s), Err(CoreError::OutOfBoundsPixel { index: 1 }));
        let s = slice_of(vec![Event::new(9, 8, 0.0, 1)]);
        assert_eq!(validate_slice(&s), Err(CoreError::OutOfBoundsPixel { index: 0 }));
    }

    #[test]
    fn bad_polarity() {
        let s = slice_of(vec![Event::new(0, 0, 0.0, 1), Event::new(0, 0, 0.0, 0)]);
        assert_eq!(validate_slice(&s), Err(CoreError::BadPolarity { index: 1, polarity: 0 }));
    }

    #[test]
    fn ties_allowed_and_t_ref_defaults_to_min() {
        let s = EventSlice::new(
            vec![Event::new(0, 0, 0.25, 1), Event::new(1, 1, 0.25, -1), Event::new(2, 2, 0.5, 1)],
            cam(),
        )
        .unwrap();
        assert_eq!(s.t_ref, 0.25);
    }

    #[test]
    fn t_ref_outside_range_rejected() {
        let err = EventSlice::with_t_ref(vec![Event::new(0, 0, 1.0, 1)], cam(), 2.0).unwrap_err();
        assert!(matches!(err, CoreError::ReferenceTimeOutOfRange { .. }));
    }

    #[test]
    fn camera_rejects_zero_focal() {
        assert!(CameraModel::new(4, 4, 0.0, 1.0, 2.0, 2.0).is_err());
        assert!(CameraModel::new(0, 4, 1.0, 1.0, 2.0, 2.0).is_err());
    }

    #[test]
    fn quota_is_ceiling() {
        assert_eq!(signal_quota(0.7, 10), 7);
        assert_eq!(signal_quota(0.85, 7), 6);
        assert_eq!(signal_quota(1.0, 13), 13);
        assert_eq!(signal_quota(0.01, 13), 1);
        for n in 1..200usize {
            for k in 1..=n {
                assert_eq!(signal_quota(k as f64 / n as f64, n), k, "k={k} n={n}");
            }
        }
    }
}
