//! Motion models and the event warp to the reference time.
//!
//! Rotational warps act on calibrated homogeneous coordinates:
//! `x'^h ~ R(omega * (t_ref - t_k)) x^h`, re-projected to pixels.
//! Flow warps use a coarse grid of tile velocities, bilinearly interpolated
//! at each event's pixel, and displace events by `(t_k - t_ref) * v(x_k)`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{CameraModel, Event, EventSlice};

pub const DEFAULT_TILE_SIZE: u32 = 16;

/// Below this rotation angle the exponential map switches to its series expansion.
const SMALL_ANGLE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WarpError {
    #[error("warp of event {index} is not finite (point pushed behind the camera?)")]
    NonFiniteResult { index: usize },
    #[error("motion parameters contain non-finite values")]
    NonFiniteParams,
    #[error("tile flow grid {cols}x{rows} does not match sensor {width}x{height} with tile {tile}")]
    GridMismatch { cols: usize, rows: usize, width: u32, height: u32, tile: u32 },
    #[error("tile size must be positive")]
    ZeroTileSize,
}

/// Velocity field parametrized on a coarse tile grid, in px/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileFlow {
    pub tile_size: u32,
    pub width: u32,
    pub height: u32,
    pub cols: usize,
    pub rows: usize,
    /// Row-major `rows x cols` tile vectors.
    pub flow: Vec<[f64; 2]>,
}

impl TileFlow {
    pub fn zeros(width: u32, height: u32, tile_size: u32) -> Result<Self, WarpError> {
        Self::uniform(width, height, tile_size, [0.0, 0.0])
    }

    pub fn uniform(width: u32, height: u32, tile_size: u32, v: [f64; 2]) -> Result<Self, WarpError> {
        if tile_size == 0 {
            return Err(WarpError::ZeroTileSize);
        }
        let cols = width.div_ceil(tile_size) as usize;
        let rows = height.div_ceil(tile_size) as usize;
        Ok(Self { tile_size, width, height, cols, rows, flow: vec![v; cols * rows] })
    }

    pub fn for_sensor(sensor: &CameraModel, tile_size: u32) -> Result<Self, WarpError> {
        Self::zeros(sensor.width, sensor.height, tile_size)
    }

    pub fn tile_count(&self) -> usize {
        self.cols * self.rows
    }

    pub fn get(&self, col: usize, row: usize) -> [f64; 2] {
        self.flow[row * self.cols + col]
    }

    pub fn set(&mut self, col: usize, row: usize, v: [f64; 2]) {
        self.flow[row * self.cols + col] = v;
    }

    /// Tile containing pixel `(x, y)`.
    pub fn tile_of(&self, x: u32, y: u32) -> usize {
        let col = ((x / self.tile_size) as usize).min(self.cols - 1);
        let row = ((y / self.tile_size) as usize).min(self.rows - 1);
        row * self.cols + col
    }

    fn check(&self) -> Result<(), WarpError> {
        let ok = self.tile_size > 0
            && self.cols == self.width.div_ceil(self.tile_size) as usize
            && self.rows == self.height.div_ceil(self.tile_size) as usize
            && self.flow.len() == self.cols * self.rows;
        if ok {
            Ok(())
        } else {
            Err(WarpError::GridMismatch {
                cols: self.cols,
                rows: self.rows,
                width: self.width,
                height: self.height,
                tile: self.tile_size,
            })
        }
    }

    fn center(&self, index: usize, extent: u32) -> f64 {
        let start = index as u32 * self.tile_size;
        let end = ((index as u32 + 1) * self.tile_size).min(extent);
        (start as f64 + end as f64 - 1.0) / 2.0
    }

    /// Pixel coordinate of the center of tile `(col, row)`.
    pub fn tile_center(&self, col: usize, row: usize) -> [f64; 2] {
        [self.center(col, self.width), self.center(row, self.height)]
    }

    // (lower index, upper index, weight of upper) along one axis, clamped at the borders.
    fn axis_weights(&self, u: f64, n: usize, extent: u32) -> (usize, usize, f64) {
        let first = self.center(0, extent);
        let last = self.center(n - 1, extent);
        if n == 1 || u <= first {
            return (0, 0, 0.0);
        }
        if u >= last {
            return (n - 1, n - 1, 0.0);
        }
        let mut j = (((u - first) / self.tile_size as f64).floor() as usize).min(n - 2);
        while j + 1 < n - 1 && u >= self.center(j + 1, extent) {
            j += 1;
        }
        let c0 = self.center(j, extent);
        let c1 = self.center(j + 1, extent);
        (j, j + 1, (u - c0) / (c1 - c0))
    }

    /// Bilinear weights of the (up to four) tiles that define the flow at `x`.
    ///
    /// Entries with zero weight may repeat a tile index; weights always sum to one.
    pub fn interp_weights(&self, x: [f64; 2]) -> [(usize, f64); 4] {
        let (c0, c1, wx) = self.axis_weights(x[0], self.cols, self.width);
        let (r0, r1, wy) = self.axis_weights(x[1], self.rows, self.height);
        [
            (r0 * self.cols + c0, (1.0 - wx) * (1.0 - wy)),
            (r0 * self.cols + c1, wx * (1.0 - wy)),
            (r1 * self.cols + c0, (1.0 - wx) * wy),
            (r1 * self.cols + c1, wx * wy),
        ]
    }
}

/// Bilinear interpolation of tile-center vectors with constant extrapolation past the outer centers.
pub fn flow_at(params: &TileFlow, x: [f64; 2]) -> [f64; 2] {
    let mut v = [0.0, 0.0];
    for (tile, w) in params.interp_weights(x) {
        if w != 0.0 {
            let f = params.flow[tile];
            v[0] += w * f[0];
            v[1] += w * f[1];
        }
    }
    v
}

/// Motion hypothesis `theta` being optimized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum MotionParams {
    Identity,
    /// Angular velocity in rad/s.
    AngularVelocity { omega: [f64; 3] },
    TileFlow(TileFlow),
}

impl MotionParams {
    pub fn angular(wx: f64, wy: f64, wz: f64) -> Self {
        MotionParams::AngularVelocity { omega: [wx, wy, wz] }
    }

    /// Number of free parameters.
    pub fn dof(&self) -> usize {
        match self {
            MotionParams::Identity => 0,
            MotionParams::AngularVelocity { .. } => 3,
            MotionParams::TileFlow(tf) => 2 * tf.tile_count(),
        }
    }

    /// Flattened parameter vector (tile flows are interleaved `vx, vy`).
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            MotionParams::Identity => Vec::new(),
            MotionParams::AngularVelocity { omega } => omega.to_vec(),
            MotionParams::TileFlow(tf) => tf.flow.iter().flat_map(|v| [v[0], v[1]]).collect(),
        }
    }

    /// Same model with parameters replaced by `values` (length must equal `dof()`).
    pub fn with_values(&self, values: &[f64]) -> Self {
        assert_eq!(values.len(), self.dof(), "parameter vector length");
        match self {
            MotionParams::Identity => MotionParams::Identity,
            MotionParams::AngularVelocity { .. } => {
                MotionParams::AngularVelocity { omega: [values[0], values[1], values[2]] }
            }
            MotionParams::TileFlow(tf) => {
                let mut out = tf.clone();
                for (v, pair) in out.flow.iter_mut().zip(values.chunks_exact(2)) {
                    *v = [pair[0], pair[1]];
                }
                MotionParams::TileFlow(out)
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|v| v.is_finite())
    }

    pub fn angular_velocity(&self) -> Option<[f64; 3]> {
        match self {
            MotionParams::AngularVelocity { omega } => Some(*omega),
            _ => None,
        }
    }
}

/// Event positions transported to the reference time.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpedEvents {
    pub coords: Vec<[f64; 2]>,
    pub in_bounds: Vec<bool>,
}

impl WarpedEvents {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn in_bounds_count(&self) -> usize {
        self.in_bounds.iter().filter(|&&b| b).count()
    }
}

/// `true` iff a warped coordinate can be splatted into the image.
pub fn inside_image(p: [f64; 2], sensor: &CameraModel) -> bool {
    p[0] >= 0.0
        && p[1] >= 0.0
        && p[0] <= (sensor.width - 1) as f64
        && p[1] <= (sensor.height - 1) as f64
}

pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Exponential map `exp(phi^)` via Rodrigues' formula.
pub fn so3_exp(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta = phi.norm();
    let k = hat(phi);
    if theta < SMALL_ANGLE {
        Matrix3::identity() + k + 0.5 * k * k
    } else {
        let a = theta.sin() / theta;
        let b = (1.0 - theta.cos()) / (theta * theta);
        Matrix3::identity() + a * k + b * k * k
    }
}

/// Rotates `v` by `exp(phi^)` without forming the matrix.
fn rotate(phi: Vector3<f64>, v: Vector3<f64>) -> Vector3<f64> {
    let theta = phi.norm();
    let cross = phi.cross(&v);
    if theta < SMALL_ANGLE {
        v + cross + 0.5 * phi.cross(&cross)
    } else {
        let a = theta.sin() / theta;
        let b = (1.0 - theta.cos()) / (theta * theta);
        v + a * cross + b * phi.cross(&cross)
    }
}

/// Warps a single pixel observed at `dt = t_k - t_ref` seconds from the reference time.
pub fn warp_point(
    params: &MotionParams,
    sensor: &CameraModel,
    x: [f64; 2],
    dt: f64,
) -> Option<[f64; 2]> {
    let out = match params {
        MotionParams::Identity => x,
        MotionParams::AngularVelocity { omega } => {
            let w = Vector3::new(omega[0], omega[1], omega[2]);
            if dt == 0.0 || w == Vector3::zeros() {
                return Some(x);
            }
            let bearing = Vector3::new((x[0] - sensor.cx) / sensor.fx, (x[1] - sensor.cy) / sensor.fy, 1.0);
            let r = rotate(-dt * w, bearing);
            if !(r.z > 1e-12) {
                return None;
            }
            [sensor.fx * r.x / r.z + sensor.cx, sensor.fy * r.y / r.z + sensor.cy]
        }
        MotionParams::TileFlow(tf) => {
            let v = flow_at(tf, x);
            [x[0] + dt * v[0], x[1] + dt * v[1]]
        }
    };
    (out[0].is_finite() && out[1].is_finite()).then_some(out)
}

fn check_params(params: &MotionParams, sensor: &CameraModel) -> Result<(), WarpError> {
    if !params.is_finite() {
        return Err(WarpError::NonFiniteParams);
    }
    if let MotionParams::TileFlow(tf) = params {
        tf.check()?;
        if tf.width != sensor.width || tf.height != sensor.height {
            return Err(WarpError::GridMismatch {
                cols: tf.cols,
                rows: tf.rows,
                width: sensor.width,
                height: sensor.height,
                tile: tf.tile_size,
            });
        }
    }
    Ok(())
}

/// Warps an arbitrary event list to `t_ref`. Error indices refer to positions in `events`.
pub fn warp_event_list(
    events: &[Event],
    t_ref: f64,
    sensor: &CameraModel,
    params: &MotionParams,
) -> Result<WarpedEvents, WarpError> {
    check_params(params, sensor)?;
    let mut coords = Vec::with_capacity(events.len());
    let mut in_bounds = Vec::with_capacity(events.len());
    for (index, e) in events.iter().enumerate() {
        let p = warp_point(params, sensor, [e.x as f64, e.y as f64], e.t - t_ref)
            .ok_or(WarpError::NonFiniteResult { index })?;
        in_bounds.push(inside_image(p, sensor));
        coords.push(p);
    }
    Ok(WarpedEvents { coords, in_bounds })
}

pub fn warp_events(slice: &EventSlice, params: &MotionParams) -> Result<WarpedEvents, WarpError> {
    warp_event_list(&slice.events, slice.t_ref, &slice.sensor, params)
}
