//! Per-event scoring, rank-threshold classification, and the alternating
//! motion/denoising loop.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cmax::{param_change, CmaxError, Evaluator, MotionEstimate, MotionEstimator, OneStepEstimator, OptimizerConfig};
use crate::event::{signal_quota, EventSlice, Label, LabelSet};
use crate::iwe::{accumulate_masked, Iwe, IweError};
use crate::warp::{warp_events, MotionParams, WarpError, WarpedEvents};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DenoiseError {
    #[error("signal ratio must lie in (0, 1], got {0}")]
    InvalidTau(f64),
    #[error("signal-ratio scoring needs labels from a previous split")]
    MissingPreviousLabels,
    #[error("previous labels cover {labels} events, slice has {events}")]
    LabelLength { labels: usize, events: usize },
    #[error(transparent)]
    Cmax(#[from] CmaxError),
    #[error(transparent)]
    Warp(#[from] WarpError),
    #[error(transparent)]
    Iwe(#[from] IweError),
}

/// Which IWE quantity ranks the events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    /// IWE value at the warped event location.
    #[default]
    LocalContrast,
    /// Share of that IWE value contributed by previously-labeled signal events.
    SignalRatio,
}

/// IWE samples at each warped event: all events, previous signal set, previous noise set.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreComponents {
    pub total: Vec<f64>,
    pub signal: Vec<f64>,
    pub noise: Vec<f64>,
}

fn sample_all(iwe: &Iwe, warped: &WarpedEvents) -> Vec<f64> {
    warped
        .coords
        .iter()
        .zip(&warped.in_bounds)
        .map(|(p, &inside)| if inside { iwe.sample_bilinear(*p) } else { 0.0 })
        .collect()
}

fn check_labels(slice: &EventSlice, labels: &LabelSet) -> Result<(), DenoiseError> {
    if labels.len() != slice.len() {
        return Err(DenoiseError::LabelLength { labels: labels.len(), events: slice.len() });
    }
    Ok(())
}

// Scores plus the all-events IWE they were sampled from.
fn score_with_iwe(
    slice: &EventSlice,
    params: &MotionParams,
    labels_prev: Option<&LabelSet>,
    kind: ScoreKind,
    epsilon: f64,
) -> Result<(Vec<f64>, Iwe), DenoiseError> {
    if kind == ScoreKind::SignalRatio {
        check_labels(slice, labels_prev.ok_or(DenoiseError::MissingPreviousLabels)?)?;
    }
    let warped = warp_events(slice, params)?;
    let iwe = accumulate_masked(&warped, None, &slice.sensor, epsilon)?;
    let total = sample_all(&iwe, &warped);
    let scores = match (kind, labels_prev) {
        (ScoreKind::LocalContrast, _) => total,
        (ScoreKind::SignalRatio, Some(prev)) => {
            let mask = prev.signal_mask();
            let signal_iwe = accumulate_masked(&warped, Some(&mask), &slice.sensor, epsilon)?;
            sample_all(&signal_iwe, &warped)
                .into_iter()
                .zip(total)
                .map(|(s, i)| if i > 0.0 { s / i } else { 0.0 })
                .collect()
        }
        (ScoreKind::SignalRatio, None) => unreachable!("checked above"),
    };
    Ok((scores, iwe))
}

/// Warps all events with `params` and scores each one by sampling the IWE
/// bilinearly at its warped position. Out-of-bounds events score 0.
pub fn score_events(
    slice: &EventSlice,
    params: &MotionParams,
    labels_prev: Option<&LabelSet>,
    kind: ScoreKind,
    epsilon: f64,
) -> Result<Vec<f64>, DenoiseError> {
    Ok(score_with_iwe(slice, params, labels_prev, kind, epsilon)?.0)
}

/// Samples of the all-events, signal and noise IWEs for a given split.
pub fn score_components(
    slice: &EventSlice,
    params: &MotionParams,
    labels: &LabelSet,
    epsilon: f64,
) -> Result<ScoreComponents, DenoiseError> {
    check_labels(slice, labels)?;
    let warped = warp_events(slice, params)?;
    let signal_mask = labels.signal_mask();
    let noise_mask: Vec<bool> = signal_mask.iter().map(|s| !s).collect();
    let all = accumulate_masked(&warped, None, &slice.sensor, epsilon)?;
    let signal = accumulate_masked(&warped, Some(&signal_mask), &slice.sensor, epsilon)?;
    let noise = accumulate_masked(&warped, Some(&noise_mask), &slice.sensor, epsilon)?;
    Ok(ScoreComponents {
        total: sample_all(&all, &warped),
        signal: sample_all(&signal, &warped),
        noise: sample_all(&noise, &warped),
    })
}

fn check_tau(tau: f64) -> Result<(), DenoiseError> {
    if tau > 0.0 && tau <= 1.0 {
        Ok(())
    } else {
        Err(DenoiseError::InvalidTau(tau))
    }
}

/// Labels the `ceil(tau * N)` highest-scoring events as signal.
///
/// Ties are broken by lower event index, which for a time-sorted slice is the
/// earlier timestamp. The recorded threshold is the score of the last
/// admitted event.
///
/// # Panics
/// If `tau` is outside `(0, 1]`.
pub fn classify(scores: &[f64], tau: f64) -> LabelSet {
    assert!(tau > 0.0 && tau <= 1.0, "tau must lie in (0, 1], got {tau}");
    let n = scores.len();
    let quota = signal_quota(tau, n);
    let mut labels = vec![Label::Noise; n];
    let mut threshold = f64::INFINITY;
    if quota > 0 {
        let mut order: Vec<usize> = (0..n).collect();
        let rank = |a: &usize, b: &usize| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b));
        let (_, last, _) = order.select_nth_unstable_by(quota - 1, rank);
        threshold = scores[*last];
        for &k in &order[..quota] {
            labels[k] = Label::Signal;
        }
    }
    LabelSet { scores: scores.to_vec(), labels, threshold, tau }
}

/// Seeded uniform split with exactly `ceil(tau * n)` signal entries.
pub fn random_split(n: usize, tau: f64, seed: u64) -> Vec<bool> {
    let quota = signal_quota(tau, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask = vec![false; n];
    for k in rand::seq::index::sample(&mut rng, n, quota) {
        mask[k] = true;
    }
    mask
}

/// Checks that thresholding local contrast at `t1` and thresholding the
/// signal ratio at the induced per-event level `1 - I_n / t1` select the same events.
///
/// `scores` are the all-events IWE samples and `noise_samples` the noise-IWE
/// samples at the same warped positions. When an event has no noise support
/// (`I_n = 0`) both the ratio and its threshold equal 1, and the rule is
/// decided by the limit `I_n -> 0+`, which reduces to `I > t1`.
pub fn equivalence_check(scores: &[f64], noise_samples: &[f64], t1: f64) -> bool {
    assert_eq!(scores.len(), noise_samples.len(), "sample vectors must align");
    scores.iter().zip(noise_samples).all(|(&total, &noise)| {
        let by_contrast = total > t1;
        let by_ratio = if noise > 0.0 {
            let ratio = if total > 0.0 { (total - noise) / total } else { 0.0 };
            ratio > 1.0 - noise / t1
        } else {
            total > t1
        };
        by_contrast == by_ratio
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Objective of the all-events IWE under the updated motion.
    pub objective: f64,
    pub threshold: f64,
    pub signal_count: usize,
    pub param_change: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointResult {
    pub labels: LabelSet,
    pub motion: MotionEstimate,
    pub iterations: usize,
    pub history: Vec<IterationRecord>,
}

/// Alternates one motion update on the current signal set with re-scoring and
/// re-classification of all events, starting from a seeded random split.
pub fn joint_estimate(
    slice: &EventSlice,
    tau: f64,
    kind: ScoreKind,
    cfg: &OptimizerConfig,
    seed: u64,
) -> Result<JointResult, DenoiseError> {
    let mut estimator = OneStepEstimator::new(cfg.clone());
    joint_estimate_with(slice, tau, kind, cfg, seed, &mut estimator)
}

/// [`joint_estimate`] with a caller-supplied motion estimator.
pub fn joint_estimate_with<E: MotionEstimator + ?Sized>(
    slice: &EventSlice,
    tau: f64,
    kind: ScoreKind,
    cfg: &OptimizerConfig,
    seed: u64,
    estimator: &mut E,
) -> Result<JointResult, DenoiseError> {
    check_tau(tau)?;
    crate::cmax::check_initial(slice, cfg)?;
    let n = slice.len();
    let split = random_split(n, tau, seed);
    let mut labels = LabelSet {
        scores: split.iter().map(|&s| if s { 1.0 } else { 0.0 }).collect(),
        labels: split.iter().map(|&s| if s { Label::Signal } else { Label::Noise }).collect(),
        threshold: 1.0,
        tau,
    };
    let mut params = cfg.initial_params.clone();
    let mut fit_mask = split;
    let mut history = Vec::new();
    let mut converged = false;
    for iteration in 1..=cfg.max_iters {
        fit_mask = labels.signal_mask();
        let next = estimator.refine(slice, &fit_mask, &params)?;
        let change = param_change(&params, &next);
        params = next;
        let (scores, iwe) = score_with_iwe(slice, &params, Some(&labels), kind, cfg.epsilon)?;
        labels = classify(&scores, tau);
        history.push(IterationRecord {
            iteration,
            objective: cfg.objective.evaluate(&iwe)?,
            threshold: labels.threshold,
            signal_count: labels.signal_count(),
            param_change: change,
        });
        if change < cfg.param_tolerance {
            converged = true;
            break;
        }
    }
    let objective_value = Evaluator::new(slice, &fit_mask, cfg)?.value(&params)?;
    let iterations = history.len();
    Ok(JointResult {
        labels,
        motion: MotionEstimate { params, objective_value, iterations_used: iterations, converged },
        iterations,
        history,
    })
}
