//! Image of warped events and contrast objectives.
//!
//! Each in-bounds warped event deposits a unit of mass as a truncated discrete
//! Gaussian centered on its real-valued position. The window spans
//! `ceil(3 * epsilon)` pixels around the nearest pixel; taps that fall outside
//! the image are dropped and the remaining ones renormalized, so every
//! contributing event adds exactly one count.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::CameraModel;
use crate::warp::WarpedEvents;

pub const DEFAULT_EPSILON: f64 = 1.0;

const MAX_RADIUS: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IweError {
    #[error("kernel width must be positive and at most {max} px, got {0}", max = MAX_RADIUS as f64 / 3.0)]
    InvalidEpsilon(f64),
    #[error("image must be at least 3x3 for gradient objectives, got {width}x{height}")]
    ImageTooSmall { width: usize, height: usize },
    #[error("malformed raw image: {0}")]
    MalformedRaw(String),
}

/// Contrast objective maximized by the motion optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    #[default]
    GradientMagnitude,
    Variance,
}

impl Objective {
    pub fn evaluate(self, iwe: &Iwe) -> Result<f64, IweError> {
        match self {
            Objective::GradientMagnitude => gradient_magnitude_objective(iwe),
            Objective::Variance => Ok(variance_objective(iwe)),
        }
    }
}

/// Truncated Gaussian splatting kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    pub epsilon: f64,
    pub radius: usize,
    inv_two_var: f64,
}

/// Separable splat weights for one event, already clipped to the image.
#[derive(Debug, Clone, Copy)]
pub struct Splat {
    pub x0: usize,
    pub y0: usize,
    pub nx: usize,
    pub ny: usize,
    pub wx: [f64; 2 * MAX_RADIUS + 1],
    pub wy: [f64; 2 * MAX_RADIUS + 1],
}

impl Kernel {
    pub fn new(epsilon: f64) -> Result<Self, IweError> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(IweError::InvalidEpsilon(epsilon));
        }
        let radius = (3.0 * epsilon).ceil() as usize;
        if radius > MAX_RADIUS {
            return Err(IweError::InvalidEpsilon(epsilon));
        }
        Ok(Self { epsilon, radius, inv_two_var: 1.0 / (2.0 * epsilon * epsilon) })
    }

    fn axis(&self, u: f64, extent: usize, out: &mut [f64; 2 * MAX_RADIUS + 1]) -> (usize, usize) {
        let r = self.radius as i64;
        let c = u.round() as i64;
        let lo = (c - r).max(0);
        let hi = (c + r).min(extent as i64 - 1);
        let n = (hi - lo + 1) as usize;
        let mut sum = 0.0;
        for (i, w) in out.iter_mut().take(n).enumerate() {
            let d = (lo + i as i64) as f64 - u;
            *w = (-d * d * self.inv_two_var).exp();
            sum += *w;
        }
        let inv = 1.0 / sum;
        for w in out.iter_mut().take(n) {
            *w *= inv;
        }
        (lo as usize, n)
    }

    /// Splat weights for a point inside `[0, width-1] x [0, height-1]`.
    pub fn splat(&self, p: [f64; 2], width: usize, height: usize) -> Splat {
        let mut s = Splat {
            x0: 0,
            y0: 0,
            nx: 0,
            ny: 0,
            wx: [0.0; 2 * MAX_RADIUS + 1],
            wy: [0.0; 2 * MAX_RADIUS + 1],
        };
        (s.x0, s.nx) = self.axis(p[0], width, &mut s.wx);
        (s.y0, s.ny) = self.axis(p[1], height, &mut s.wy);
        s
    }
}

impl Splat {
    /// Adds `scale` times the splat into a row-major image of the given width.
    pub fn add_to(&self, pixels: &mut [f64], width: usize, scale: f64) {
        for j in 0..self.ny {
            let wy = self.wy[j] * scale;
            let row = (self.y0 + j) * width + self.x0;
            for (px, wx) in pixels[row..row + self.nx].iter_mut().zip(&self.wx[..self.nx]) {
                *px += wy * wx;
            }
        }
    }
}

/// Image of warped events.
#[derive(Debug, Clone, PartialEq)]
pub struct Iwe {
    pub width: usize,
    pub height: usize,
    /// Row-major pixel values.
    pub pixels: Vec<f64>,
    pub epsilon: f64,
    pub truncation_radius: usize,
    pub total_mass: f64,
}

impl Iwe {
    pub fn zeros(width: usize, height: usize, kernel: &Kernel) -> Self {
        Self {
            width,
            height,
            pixels: vec![0.0; width * height],
            epsilon: kernel.epsilon,
            truncation_radius: kernel.radius,
            total_mass: 0.0,
        }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<f64>) -> Self {
        assert_eq!(pixels.len(), width * height);
        let total_mass = pixels.iter().sum();
        Self { width, height, pixels, epsilon: 0.0, truncation_radius: 0, total_mass }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Bilinear sample at a point inside the image.
    pub fn sample_bilinear(&self, p: [f64; 2]) -> f64 {
        let x = p[0].clamp(0.0, (self.width - 1) as f64);
        let y = p[1].clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    pub fn add_point(&mut self, kernel: &Kernel, p: [f64; 2]) {
        kernel.splat(p, self.width, self.height).add_to(&mut self.pixels, self.width, 1.0);
        self.total_mass += 1.0;
    }

    /// 8-bit binary PGM, min-max normalized.
    pub fn to_pgm(&self) -> Vec<u8> {
        let (lo, hi) = self
            .pixels
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let span = hi - lo;
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.pixels.iter().map(|&v| {
            if span > 0.0 {
                ((v - lo) / span * 255.0).round() as u8
            } else {
                0
            }
        }));
        out
    }

    /// Raw float image: little-endian `u32` width and height, then row-major `f64` values.
    pub fn to_raw(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 8 * self.pixels.len());
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        for v in &self.pixels {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_raw(bytes: &[u8]) -> Result<Self, IweError> {
        if bytes.len() < 8 {
            return Err(IweError::MalformedRaw("missing header".into()));
        }
        let width = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
        let height = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let body = &bytes[8..];
        if body.len() != 8 * width * height {
            return Err(IweError::MalformedRaw(format!(
                "expected {} value bytes, found {}",
                8 * width * height,
                body.len()
            )));
        }
        let pixels = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self::from_pixels(width, height, pixels))
    }
}

/// Accumulates in-bounds warped events. Out-of-bounds events contribute nothing.
pub fn accumulate(warped: &WarpedEvents, sensor: &CameraModel, epsilon: f64) -> Result<Iwe, IweError> {
    accumulate_masked(warped, None, sensor, epsilon)
}

/// As [`accumulate`], restricted to events with `mask[k] == true`.
pub fn accumulate_masked(
    warped: &WarpedEvents,
    mask: Option<&[bool]>,
    sensor: &CameraModel,
    epsilon: f64,
) -> Result<Iwe, IweError> {
    let kernel = Kernel::new(epsilon)?;
    let mut iwe = Iwe::zeros(sensor.width as usize, sensor.height as usize, &kernel);
    for (k, (p, &inside)) in warped.coords.iter().zip(&warped.in_bounds).enumerate() {
        if inside && mask.is_none_or(|m| m[k]) {
            iwe.add_point(&kernel, *p);
        }
    }
    Ok(iwe)
}

/// Population variance over all pixels.
pub fn variance_objective(iwe: &Iwe) -> f64 {
    let n = iwe.pixels.len() as f64;
    if n == 0.0 {
        return 0.0;
    }
    let mean = iwe.pixels.iter().sum::<f64>() / n;
    iwe.pixels.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Squared central-difference gradient magnitude at interior pixel `(x, y)`.
#[inline]
pub fn gradient_energy_at(pixels: &[f64], width: usize, x: usize, y: usize) -> f64 {
    let i = y * width + x;
    let gx = 0.5 * (pixels[i + 1] - pixels[i - 1]);
    let gy = 0.5 * (pixels[i + width] - pixels[i - width]);
    gx * gx + gy * gy
}

/// Mean over interior pixels of the squared central-difference gradient magnitude.
pub fn gradient_magnitude_objective(iwe: &Iwe) -> Result<f64, IweError> {
    let (w, h) = (iwe.width, iwe.height);
    if w < 3 || h < 3 {
        return Err(IweError::ImageTooSmall { width: w, height: h });
    }
    let mut sum = 0.0;
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            sum += gradient_energy_at(&iwe.pixels, w, x, y);
        }
    }
    Ok(sum / ((w - 2) * (h - 2)) as f64)
}
