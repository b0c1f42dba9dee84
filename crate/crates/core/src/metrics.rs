//! Evaluation: ROC/AUC, precision/recall, sharpness ratio, angular velocity RMS and flow endpoint error.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{EventSlice, Label, LabelSet};
use crate::iwe::{accumulate_masked, variance_objective, IweError};
use crate::warp::{flow_at, warp_events, MotionParams, TileFlow, WarpError};

/// Endpoint errors above this many pixels count as outliers.
pub const OUTLIER_PX: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("ground truth must contain both signal and noise labels")]
    DegenerateLabels,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("mask selects no events")]
    NoEventsSelected,
    #[error("identity-warp image has zero variance")]
    ZeroIdentityVariance,
    #[error("flow geometry mismatch: {0}")]
    GeometryMismatch(String),
    #[error(transparent)]
    Warp(#[from] WarpError),
    #[error(transparent)]
    Iwe(#[from] IweError),
}

fn same_len(left: usize, right: usize) -> Result<(), MetricsError> {
    if left == right {
        Ok(())
    } else {
        Err(MetricsError::LengthMismatch { left, right })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(fpr, tpr)` pairs from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// ROC over all distinct score thresholds, signal as the positive class.
///
/// Equal scores form one sweep point, so the area matches pair counting with
/// ties credited one half.
pub fn roc_auc(scores: &[f64], gt: &[Label]) -> Result<RocCurve, MetricsError> {
    same_len(scores.len(), gt.len())?;
    let positives = gt.iter().filter(|l| l.is_signal()).count();
    let negatives = gt.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricsError::DegenerateLabels);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]].total_cmp(&s).is_eq() {
            if gt[order[i]].is_signal() {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let (x0, y0) = *points.last().unwrap();
        let p = (fp as f64 / negatives as f64, tp as f64 / positives as f64);
        auc += (p.0 - x0) * (p.1 + y0) / 2.0;
        points.push(p);
    }
    Ok(RocCurve { points, auc })
}

/// Precision and recall of the predicted signal set. Precision is 0 when nothing is predicted signal.
pub fn precision_recall(labels: &LabelSet, gt: &[Label]) -> Result<(f64, f64), MetricsError> {
    same_len(labels.len(), gt.len())?;
    let positives = gt.iter().filter(|l| l.is_signal()).count();
    if positives == 0 || positives == gt.len() {
        return Err(MetricsError::DegenerateLabels);
    }
    let predicted = labels.signal_count();
    let hits = labels.labels.iter().zip(gt).filter(|(p, g)| p.is_signal() && g.is_signal()).count();
    let precision = if predicted == 0 { 0.0 } else { hits as f64 / predicted as f64 };
    Ok((precision, hits as f64 / positives as f64))
}

/// Variance of the IWE under `params` relative to the identity-warp IWE, over the masked events.
pub fn fwl(slice: &EventSlice, params: &MotionParams, mask: &[bool], epsilon: f64) -> Result<f64, MetricsError> {
    same_len(mask.len(), slice.len())?;
    if !mask.iter().any(|&m| m) {
        return Err(MetricsError::NoEventsSelected);
    }
    let variance = |p: &MotionParams| -> Result<f64, MetricsError> {
        let warped = warp_events(slice, p)?;
        Ok(variance_objective(&accumulate_masked(&warped, Some(mask), &slice.sensor, epsilon)?))
    };
    let identity = variance(&MotionParams::Identity)?;
    if identity <= 0.0 {
        return Err(MetricsError::ZeroIdentityVariance);
    }
    if matches!(params, MotionParams::Identity) {
        return Ok(1.0);
    }
    Ok(variance(params)? / identity)
}

/// RMS of `|w_est - w_gt|` over the sequence, in degrees per second.
pub fn angvel_rms(estimates: &[[f64; 3]], gts: &[[f64; 3]]) -> Result<f64, MetricsError> {
    same_len(estimates.len(), gts.len())?;
    if estimates.is_empty() {
        return Err(MetricsError::LengthMismatch { left: 0, right: 0 });
    }
    let sum: f64 = estimates
        .iter()
        .zip(gts)
        .map(|(e, g)| (0..3).map(|i| (e[i] - g[i]).powi(2)).sum::<f64>())
        .sum();
    Ok((sum / estimates.len() as f64).sqrt().to_degrees())
}

/// Ground-truth optical flow, in px/s.
#[derive(Debug, Clone, PartialEq)]
pub enum FlowField {
    Tile(TileFlow),
    /// Row-major per-pixel flow.
    Dense { width: u32, height: u32, flow: Vec<[f64; 2]> },
}

impl FlowField {
    fn dims(&self) -> (u32, u32) {
        match self {
            FlowField::Tile(tf) => (tf.width, tf.height),
            FlowField::Dense { width, height, .. } => (*width, *height),
        }
    }

    fn at(&self, x: u32, y: u32) -> [f64; 2] {
        match self {
            FlowField::Tile(tf) => flow_at(tf, [x as f64, y as f64]),
            FlowField::Dense { width, flow, .. } => flow[(y * width + x) as usize],
        }
    }
}

/// Mean endpoint error (px) of the displacement over `duration` seconds, and
/// the percentage of masked pixels whose error exceeds [`OUTLIER_PX`].
pub fn flow_epe(estimate: &TileFlow, gt: &FlowField, mask: &[bool], duration: f64) -> Result<(f64, f64), MetricsError> {
    let (w, h) = gt.dims();
    if (estimate.width, estimate.height) != (w, h) {
        return Err(MetricsError::GeometryMismatch(format!(
            "estimate is {}x{}, ground truth {w}x{h}",
            estimate.width, estimate.height
        )));
    }
    if let FlowField::Dense { flow, .. } = gt {
        if flow.len() != (w * h) as usize {
            return Err(MetricsError::GeometryMismatch("dense flow length".into()));
        }
    }
    if mask.len() != (w * h) as usize {
        return Err(MetricsError::GeometryMismatch("mask length".into()));
    }
    let (mut total, mut outliers, mut count) = (0.0, 0usize, 0usize);
    for y in 0..h {
        for x in 0..w {
            if !mask[(y * w + x) as usize] {
                continue;
            }
            let e = flow_at(estimate, [x as f64, y as f64]);
            let g = gt.at(x, y);
            let err = ((e[0] - g[0]) * duration).hypot((e[1] - g[1]) * duration);
            total += err;
            outliers += usize::from(err > OUTLIER_PX);
            count += 1;
        }
    }
    if count == 0 {
        return Err(MetricsError::NoEventsSelected);
    }
    Ok((total / count as f64, 100.0 * outliers as f64 / count as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Noise as N, Signal as S};

    #[test]
    fn auc_extremes() {
        let gt = [S, S, N, N];
        assert_eq!(roc_auc(&[4.0, 3.0, 2.0, 1.0], &gt).unwrap().auc, 1.0);
        assert_eq!(roc_auc(&[1.0, 2.0, 3.0, 4.0], &gt).unwrap().auc, 0.0);
        assert_eq!(roc_auc(&[1.0; 4], &gt).unwrap().auc, 0.5);
        assert_eq!(roc_auc(&[1.0; 2], &[S, S]), Err(MetricsError::DegenerateLabels));
    }

    #[test]
    fn auc_hand_case() {
        let roc = roc_auc(&[0.9, 0.8, 0.7, 0.6, 0.5, 0.4], &[S, S, N, S, N, N]).unwrap();
        assert!((roc.auc - 8.0 / 9.0).abs() < 1e-12);
        assert_eq!(roc.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(roc.points.last(), Some(&(1.0, 1.0)));
    }

    #[test]
    fn rms_conversion() {
        assert_eq!(angvel_rms(&[[1.0, 2.0, 3.0]], &[[1.0, 2.0, 3.0]]).unwrap(), 0.0);
        let r = angvel_rms(&[[0.1, 0.0, 0.0]], &[[0.0; 3]]).unwrap();
        assert!((r - 5.7296).abs() < 1e-4);
        assert!(angvel_rms(&[[0.0; 3]], &[]).is_err());
    }

    #[test]
    fn epe_cases() {
        let gt = TileFlow::uniform(8, 4, 4, [0.0, 0.0]).unwrap();
        let mask = vec![true; 32];
        assert_eq!(flow_epe(&gt, &FlowField::Tile(gt.clone()), &mask, 0.1).unwrap(), (0.0, 0.0));
        let biased = TileFlow::uniform(8, 4, 4, [10.0, 0.0]).unwrap();
        let (epe, out) = flow_epe(&biased, &FlowField::Tile(gt.clone()), &mask, 0.1).unwrap();
        assert!((epe - 1.0).abs() < 1e-12 && out == 0.0);
        let dense = FlowField::Dense {
            width: 8,
            height: 4,
            flow: (0..32).map(|i| if i % 2 == 0 { [0.0, 40.0] } else { [0.0, 0.0] }).collect(),
        };
        let (epe, out) = flow_epe(&gt, &dense, &mask, 0.1).unwrap();
        assert!((epe - 2.0).abs() < 1e-12);
        assert_eq!(out, 50.0);
        let small = TileFlow::uniform(4, 4, 4, [0.0, 0.0]).unwrap();
        assert!(matches!(flow_epe(&small, &FlowField::Tile(gt), &mask, 0.1), Err(MetricsError::GeometryMismatch(_))));
    }

    #[test]
    fn precision_recall_cases() {
        let gt = [S, N, S, N];
        let exact = LabelSet { scores: vec![0.0; 4], labels: gt.to_vec(), threshold: 0.0, tau: 0.5 };
        assert_eq!(precision_recall(&exact, &gt).unwrap(), (1.0, 1.0));
        let all = LabelSet { labels: vec![S; 4], ..exact };
        assert_eq!(precision_recall(&all, &gt).unwrap(), (0.5, 1.0));
    }
}
