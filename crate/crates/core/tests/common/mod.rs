//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use cmax_denoise::event::{CameraModel, Event, Label};
use nalgebra::{Matrix3, Vector3};

/// AUC as the probability that a random signal outscores a random noise event, ties counted half.
pub fn pair_auc(scores: &[f64], gt: &[Label]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, gi) in gt.iter().enumerate() {
        if !gi.is_signal() {
            continue;
        }
        for (j, gj) in gt.iter().enumerate() {
            if gj.is_signal() {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// All-pairs background-activity check.
pub fn baf_all_pairs(events: &[Event], window: f64, radius: i64) -> Vec<bool> {
    (0..events.len())
        .map(|k| {
            let e = events[k];
            events[..k].iter().any(|o| {
                (o.x as i64 - e.x as i64).abs() <= radius && (o.y as i64 - e.y as i64).abs() <= radius && e.t - o.t < window
            })
        })
        .collect()
}

/// Rotation matrix from `R = I + sin(a) K + (1 - cos(a)) K^2` with unit axis `K`.
pub fn rodrigues(phi: [f64; 3]) -> Matrix3<f64> {
    let v = Vector3::from(phi);
    let angle = v.norm();
    if angle == 0.0 {
        return Matrix3::identity();
    }
    let k = v / angle;
    let kx = Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
    Matrix3::identity() + angle.sin() * kx + (1.0 - angle.cos()) * kx * kx
}

/// Pixel at time `t_ref` of a pixel observed `dt = t_k - t_ref` seconds away, under rotation `omega`.
pub fn rotate_pixel(cam: &CameraModel, omega: [f64; 3], p: [f64; 2], dt: f64) -> [f64; 2] {
    let r = rodrigues([-omega[0] * dt, -omega[1] * dt, -omega[2] * dt]);
    let b = r * Vector3::new((p[0] - cam.cx) / cam.fx, (p[1] - cam.cy) / cam.fy, 1.0);
    [cam.fx * b.x / b.z + cam.cx, cam.fy * b.y / b.z + cam.cy]
}

/// Image of one splat at `p` built tap by tap: Gaussian weights over the
/// `(2r+1)^2` window centered at the rounded location, in-image taps only,
/// normalized per axis.
pub fn splat_taps(p: [f64; 2], width: usize, height: usize, eps: f64) -> Vec<f64> {
    let r = (3.0 * eps).ceil() as i64;
    let (cx, cy) = (p[0].round() as i64, p[1].round() as i64);
    let axis = |c: i64, v: f64, n: usize| -> Vec<(usize, f64)> {
        let taps: Vec<(usize, f64)> = (c - r..=c + r)
            .filter(|&i| i >= 0 && (i as usize) < n)
            .map(|i| (i as usize, (-(i as f64 - v).powi(2) / (2.0 * eps * eps)).exp()))
            .collect();
        let s: f64 = taps.iter().map(|t| t.1).sum();
        taps.into_iter().map(|(i, w)| (i, w / s)).collect()
    };
    let mut img = vec![0.0; width * height];
    for (y, wy) in axis(cy, p[1], height) {
        for (x, wx) in axis(cx, p[0], width) {
            img[y * width + x] += wx * wy;
        }
    }
    img
}
