//! Classical comparison filters: background-activity filter and random downsampling.

use serde::{Deserialize, Serialize};

use crate::denoise::random_split;
use crate::event::{EventSlice, Label, LabelSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BafConfig {
    /// Support window in seconds.
    pub time_window: f64,
    /// Chebyshev neighborhood radius in pixels.
    pub neighborhood_radius: u32,
}

impl Default for BafConfig {
    fn default() -> Self {
        Self { time_window: 5e-3, neighborhood_radius: 1 }
    }
}

impl BafConfig {
    pub fn is_valid(&self) -> bool {
        self.time_window > 0.0 && self.neighborhood_radius >= 1
    }
}

fn binary_labels(mask: &[bool], tau: f64) -> LabelSet {
    LabelSet {
        scores: mask.iter().map(|&s| if s { 1.0 } else { 0.0 }).collect(),
        labels: mask.iter().map(|&s| if s { Label::Signal } else { Label::Noise }).collect(),
        threshold: 1.0,
        tau,
    }
}

/// Background-activity filter.
///
/// An event is signal when some earlier event (any polarity, own pixel
/// included) fired within the Chebyshev neighborhood less than `time_window`
/// seconds before it. Scores are 1 for signal and 0 for noise, and `tau`
/// holds the achieved signal fraction.
pub fn baf_filter(slice: &EventSlice, cfg: &BafConfig) -> LabelSet {
    let w = slice.sensor.width as usize;
    let h = slice.sensor.height as usize;
    let r = cfg.neighborhood_radius as usize;
    let mut last = vec![f64::NEG_INFINITY; w * h];
    let mut mask = Vec::with_capacity(slice.len());
    for e in &slice.events {
        let (x, y) = (e.x as usize, e.y as usize);
        let mut supported = false;
        'search: for ny in y.saturating_sub(r)..=(y + r).min(h - 1) {
            for nx in x.saturating_sub(r)..=(x + r).min(w - 1) {
                if e.t - last[ny * w + nx] < cfg.time_window {
                    supported = true;
                    break 'search;
                }
            }
        }
        last[y * w + x] = e.t;
        mask.push(supported);
    }
    let achieved = if mask.is_empty() {
        0.0
    } else {
        mask.iter().filter(|&&s| s).count() as f64 / mask.len() as f64
    };
    binary_labels(&mask, achieved)
}

/// Seeded uniform choice of `ceil(tau * N)` events as signal.
///
/// # Panics
/// If `tau` is outside `(0, 1]`.
pub fn random_downsample(slice: &EventSlice, tau: f64, seed: u64) -> LabelSet {
    assert!(tau > 0.0 && tau <= 1.0, "tau must lie in (0, 1], got {tau}");
    binary_labels(&random_split(slice.len(), tau, seed), tau)
}
