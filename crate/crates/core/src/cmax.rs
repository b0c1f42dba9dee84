//! Contrast maximization: gradient ascent on an IWE sharpness objective.
//!
//! Gradients are central finite differences. Rotational models re-evaluate the
//! full objective per stencil point. Tile-flow models perturb one tile component
//! at a time and only re-splat the events that tile influences, patching the
//! objective sums locally.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{Event, EventSlice};
use crate::iwe::{gradient_energy_at, Iwe, IweError, Kernel, Objective, DEFAULT_EPSILON};
use crate::warp::{inside_image, warp_event_list, MotionParams, TileFlow, WarpError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CmaxError {
    #[error("the event mask selects no events")]
    NoEventsSelected,
    #[error("objective is constant across the finite-difference stencil")]
    DegenerateObjective,
    #[error("mask has {mask} entries for {events} events")]
    MaskLength { mask: usize, events: usize },
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Warp(#[from] WarpError),
    #[error(transparent)]
    Iwe(#[from] IweError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    /// Convergence threshold on the infinity norm of the parameter update.
    pub param_tolerance: f64,
    /// Finite-difference step for angular velocity, rad/s.
    pub fd_step_angular: f64,
    /// Finite-difference step for tile flow, px/s.
    pub fd_step_flow: f64,
    /// First line-search trial length along the max-normalized ascent direction, rad/s.
    pub initial_step_angular: f64,
    /// Same, px/s.
    pub initial_step_flow: f64,
    pub line_search_shrink: f64,
    pub max_backtracks: usize,
    /// Sufficient-increase constant of the backtracking line search.
    pub armijo: f64,
    pub objective: Objective,
    /// Gaussian kernel width of the IWE, px.
    pub epsilon: f64,
    pub initial_params: MotionParams,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            param_tolerance: 1e-4,
            fd_step_angular: 1e-3,
            fd_step_flow: 1e-1,
            initial_step_angular: 0.5,
            initial_step_flow: 20.0,
            line_search_shrink: 0.5,
            max_backtracks: 20,
            armijo: 1e-4,
            objective: Objective::GradientMagnitude,
            epsilon: DEFAULT_EPSILON,
            initial_params: MotionParams::angular(0.0, 0.0, 0.0),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), CmaxError> {
        let bad = |msg: &str| Err(CmaxError::InvalidConfig(msg.to_string()));
        if self.max_iters < 1 {
            return bad("max_iters must be at least 1");
        }
        let positive = [
            self.param_tolerance,
            self.fd_step_angular,
            self.fd_step_flow,
            self.initial_step_angular,
            self.initial_step_flow,
            self.epsilon,
        ];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return bad("tolerances, steps and epsilon must be positive and finite");
        }
        if !(self.line_search_shrink > 0.0 && self.line_search_shrink < 1.0) {
            return bad("line_search_shrink must lie in (0, 1)");
        }
        if !(0.0..1.0).contains(&self.armijo) {
            return bad("armijo constant must lie in [0, 1)");
        }
        if !self.initial_params.is_finite() {
            return bad("initial parameters must be finite");
        }
        Ok(())
    }

    fn fd_step(&self, params: &MotionParams) -> f64 {
        match params {
            MotionParams::TileFlow(_) => self.fd_step_flow,
            _ => self.fd_step_angular,
        }
    }

    fn initial_step(&self, params: &MotionParams) -> f64 {
        match params {
            MotionParams::TileFlow(_) => self.initial_step_flow,
            _ => self.initial_step_angular,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionEstimate {
    pub params: MotionParams,
    /// Objective at `params` over the events used for fitting.
    pub objective_value: f64,
    pub iterations_used: usize,
    pub converged: bool,
}

/// Objective of the masked events as a function of the motion parameters.
pub struct Evaluator<'a> {
    events: Vec<Event>,
    t_ref: f64,
    sensor: &'a crate::event::CameraModel,
    kernel: Kernel,
    objective: Objective,
}

impl<'a> Evaluator<'a> {
    pub fn new(slice: &'a EventSlice, mask: &[bool], cfg: &OptimizerConfig) -> Result<Self, CmaxError> {
        if mask.len() != slice.len() {
            return Err(CmaxError::MaskLength { mask: mask.len(), events: slice.len() });
        }
        let events = slice.select(mask);
        if events.is_empty() {
            return Err(CmaxError::NoEventsSelected);
        }
        Ok(Self {
            events,
            t_ref: slice.t_ref,
            sensor: &slice.sensor,
            kernel: Kernel::new(cfg.epsilon)?,
            objective: cfg.objective,
        })
    }

    pub fn event_count(&self) -> usize {
        self.events.len()
    }

    pub fn iwe(&self, params: &MotionParams) -> Result<Iwe, CmaxError> {
        let warped = warp_event_list(&self.events, self.t_ref, self.sensor, params)?;
        let mut iwe = Iwe::zeros(self.sensor.width as usize, self.sensor.height as usize, &self.kernel);
        for (p, &inside) in warped.coords.iter().zip(&warped.in_bounds) {
            if inside {
                iwe.add_point(&self.kernel, *p);
            }
        }
        Ok(iwe)
    }

    pub fn value(&self, params: &MotionParams) -> Result<f64, CmaxError> {
        Ok(self.objective.evaluate(&self.iwe(params)?)?)
    }

    /// Central finite-difference gradient and the objective at `params`.
    pub fn gradient(&self, params: &MotionParams, h: f64) -> Result<(Vec<f64>, f64), CmaxError> {
        match params {
            MotionParams::TileFlow(tf) => self.tile_gradient(tf, h),
            _ => self.full_gradient(params, h),
        }
    }

    fn full_gradient(&self, params: &MotionParams, h: f64) -> Result<(Vec<f64>, f64), CmaxError> {
        let base = self.value(params)?;
        let theta = params.to_vec();
        let mut grad = vec![0.0; theta.len()];
        let mut flat = true;
        for i in 0..theta.len() {
            let mut plus = theta.clone();
            plus[i] += h;
            let mut minus = theta.clone();
            minus[i] -= h;
            let fp = self.value(&params.with_values(&plus))?;
            let fm = self.value(&params.with_values(&minus))?;
            flat &= same_value(fp, base) && same_value(fm, base);
            grad[i] = (fp - fm) / (2.0 * h);
        }
        if flat && !theta.is_empty() {
            return Err(CmaxError::DegenerateObjective);
        }
        Ok((grad, base))
    }

    fn tile_gradient(&self, tf: &TileFlow, h: f64) -> Result<(Vec<f64>, f64), CmaxError> {
        let params = MotionParams::TileFlow(tf.clone());
        let (w, hgt) = (self.sensor.width as usize, self.sensor.height as usize);
        let warped = warp_event_list(&self.events, self.t_ref, self.sensor, &params)?;
        let mut iwe = Iwe::zeros(w, hgt, &self.kernel);
        for (p, &inside) in warped.coords.iter().zip(&warped.in_bounds) {
            if inside {
                iwe.add_point(&self.kernel, *p);
            }
        }
        let sums = ObjectiveSums::of(&iwe, self.objective)?;
        let base = sums.value(self.objective, w, hgt);

        // Events influenced by each tile, with their aggregated bilinear weight.
        let mut per_tile: Vec<Vec<(usize, f64)>> = vec![Vec::new(); tf.tile_count()];
        let mut populated = vec![false; tf.tile_count()];
        for (k, e) in self.events.iter().enumerate() {
            populated[tf.tile_of(e.x, e.y)] = true;
            let mut weights = tf.interp_weights([e.x as f64, e.y as f64]);
            for i in 0..4 {
                for j in 0..i {
                    if weights[j].0 == weights[i].0 {
                        weights[j].1 += weights[i].1;
                        weights[i].1 = 0.0;
                    }
                }
            }
            for (tile, wgt) in weights {
                if wgt != 0.0 {
                    per_tile[tile].push((k, wgt));
                }
            }
        }

        let mut grad = vec![0.0; 2 * tf.tile_count()];
        let mut flat = true;
        let mut any_free = false;
        for tile in 0..tf.tile_count() {
            if !populated[tile] || per_tile[tile].is_empty() {
                continue;
            }
            any_free = true;
            for comp in 0..2 {
                let mut f = [0.0; 2];
                for (slot, sign) in [1.0, -1.0].into_iter().enumerate() {
                    let moves: Vec<([f64; 2], bool, [f64; 2], bool)> = per_tile[tile]
                        .iter()
                        .map(|&(k, wgt)| {
                            let old = warped.coords[k];
                            let mut new = old;
                            new[comp] += sign * h * wgt * (self.events[k].t - self.t_ref);
                            (old, warped.in_bounds[k], new, inside_image(new, self.sensor))
                        })
                        .collect();
                    f[slot] = self.patched_value(&iwe, &sums, &moves);
                }
                flat &= same_value(f[0], base) && same_value(f[1], base);
                grad[2 * tile + comp] = (f[0] - f[1]) / (2.0 * h);
            }
        }
        if flat && any_free {
            return Err(CmaxError::DegenerateObjective);
        }
        Ok((grad, base))
    }

    // Objective after moving a few events, computed from the base image and its sums.
    fn patched_value(&self, iwe: &Iwe, sums: &ObjectiveSums, moves: &[([f64; 2], bool, [f64; 2], bool)]) -> f64 {
        let (w, h) = (iwe.width, iwe.height);
        let r = self.kernel.radius as i64;
        let (mut x0, mut y0, mut x1, mut y1) = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
        for &(old, old_in, new, new_in) in moves {
            for (p, inside) in [(old, old_in), (new, new_in)] {
                if inside {
                    x0 = x0.min(p[0].round() as i64 - r);
                    x1 = x1.max(p[0].round() as i64 + r);
                    y0 = y0.min(p[1].round() as i64 - r);
                    y1 = y1.max(p[1].round() as i64 + r);
                }
            }
        }
        if x0 > x1 {
            return sums.value(self.objective, w, h);
        }
        // Changed pixels plus two rings: gradient energy reads one neighbor away.
        let px0 = (x0 - 2).max(0) as usize;
        let py0 = (y0 - 2).max(0) as usize;
        let px1 = ((x1 + 2).min(w as i64 - 1)) as usize;
        let py1 = ((y1 + 2).min(h as i64 - 1)) as usize;
        let pw = px1 - px0 + 1;
        let ph = py1 - py0 + 1;
        let mut patch = vec![0.0; pw * ph];
        for y in 0..ph {
            let src = (py0 + y) * w + px0;
            patch[y * pw..(y + 1) * pw].copy_from_slice(&iwe.pixels[src..src + pw]);
        }
        let original = patch.clone();
        for &(old, old_in, new, new_in) in moves {
            for (p, inside, scale) in [(old, old_in, -1.0), (new, new_in, 1.0)] {
                if !inside {
                    continue;
                }
                let s = self.kernel.splat(p, w, h);
                for j in 0..s.ny {
                    let row = (s.y0 + j - py0) * pw + (s.x0 - px0);
                    let wy = s.wy[j] * scale;
                    for (v, wx) in patch[row..row + s.nx].iter_mut().zip(&s.wx[..s.nx]) {
                        *v += wy * wx;
                    }
                }
            }
        }
        match self.objective {
            Objective::Variance => {
                let mut s1 = sums.s1;
                let mut s2 = sums.s2;
                for (a, b) in patch.iter().zip(&original) {
                    s1 += a - b;
                    s2 += a * a - b * b;
                }
                variance_from_sums(s1, s2, w * h)
            }
            Objective::GradientMagnitude => {
                let mut g = sums.s1;
                let gx0 = px0.max(1);
                let gy0 = py0.max(1);
                let gx1 = px1.min(w - 2);
                let gy1 = py1.min(h - 2);
                for y in gy0..=gy1 {
                    for x in gx0..=gx1 {
                        // Neighbors outside the patch are unchanged; the patch covers them
                        // except on its outermost ring, where values are identical anyway.
                        if x == px0 || x == px1 || y == py0 || y == py1 {
                            continue;
                        }
                        let (lx, ly) = (x - px0, y - py0);
                        g += gradient_energy_at(&patch, pw, lx, ly) - gradient_energy_at(&original, pw, lx, ly);
                    }
                }
                g / ((w - 2) * (h - 2)) as f64
            }
        }
    }

    /// One backtracking line-search step along the max-normalized gradient.
    pub fn ascent_step(&self, params: &MotionParams, cfg: &OptimizerConfig, initial_step: f64) -> Result<StepOutcome, CmaxError> {
        if params.dof() == 0 {
            let value = self.value(params)?;
            return Ok(StepOutcome { params: params.clone(), value, start_value: value, step: 0.0, accepted: false });
        }
        let (grad, f0) = self.gradient(params, cfg.fd_step(params))?;
        let norm_inf = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if !(norm_inf > 0.0) || !norm_inf.is_finite() {
            return Ok(StepOutcome { params: params.clone(), value: f0, start_value: f0, step: 0.0, accepted: false });
        }
        let dir: Vec<f64> = grad.iter().map(|g| g / norm_inf).collect();
        let slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        let theta = params.to_vec();
        let mut alpha = initial_step;
        for _ in 0..=cfg.max_backtracks {
            let trial: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + alpha * d).collect();
            let candidate = params.with_values(&trial);
            match self.value(&candidate) {
                Ok(f) if f > f0 && f >= f0 + cfg.armijo * alpha * slope => {
                    return Ok(StepOutcome { params: candidate, value: f, start_value: f0, step: alpha, accepted: true });
                }
                Ok(_) | Err(CmaxError::Warp(WarpError::NonFiniteResult { .. })) => {}
                Err(e) => return Err(e),
            }
            alpha *= cfg.line_search_shrink;
        }
        Ok(StepOutcome { params: params.clone(), value: f0, start_value: f0, step: 0.0, accepted: false })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub params: MotionParams,
    /// Objective at the returned parameters.
    pub value: f64,
    /// Objective at the starting parameters.
    pub start_value: f64,
    /// Accepted step length (0 when no ascent was found).
    pub step: f64,
    pub accepted: bool,
}

fn same_value(a: f64, b: f64) -> bool {
    (a - b).abs() <= 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn variance_from_sums(s1: f64, s2: f64, n: usize) -> f64 {
    let n = n as f64;
    let mean = s1 / n;
    (s2 / n - mean * mean).max(0.0)
}

/// Additive pixel sums from which an objective can be recomputed after a local patch.
struct ObjectiveSums {
    /// Sum of pixels (variance) or of interior gradient energy (gradient magnitude).
    s1: f64,
    /// Sum of squared pixels (variance only).
    s2: f64,
}

impl ObjectiveSums {
    fn of(iwe: &Iwe, objective: Objective) -> Result<Self, CmaxError> {
        match objective {
            Objective::Variance => Ok(Self {
                s1: iwe.pixels.iter().sum(),
                s2: iwe.pixels.iter().map(|v| v * v).sum(),
            }),
            Objective::GradientMagnitude => {
                let (w, h) = (iwe.width, iwe.height);
                if w < 3 || h < 3 {
                    return Err(IweError::ImageTooSmall { width: w, height: h }.into());
                }
                let mut g = 0.0;
                for y in 1..h - 1 {
                    for x in 1..w - 1 {
                        g += gradient_energy_at(&iwe.pixels, w, x, y);
                    }
                }
                Ok(Self { s1: g, s2: 0.0 })
            }
        }
    }

    fn value(&self, objective: Objective, w: usize, h: usize) -> f64 {
        match objective {
            Objective::Variance => variance_from_sums(self.s1, self.s2, w * h),
            Objective::GradientMagnitude => self.s1 / ((w - 2) * (h - 2)) as f64,
        }
    }
}

/// Pluggable motion estimator used inside the joint denoising loop.
///
/// Each call refines `current` using only the events selected by `mask`.
pub trait MotionEstimator {
    fn refine(&mut self, slice: &EventSlice, mask: &[bool], current: &MotionParams) -> Result<MotionParams, CmaxError>;
}

impl<F> MotionEstimator for F
where
    F: FnMut(&EventSlice, &[bool], &MotionParams) -> Result<MotionParams, CmaxError>,
{
    fn refine(&mut self, slice: &EventSlice, mask: &[bool], current: &MotionParams) -> Result<MotionParams, CmaxError> {
        self(slice, mask, current)
    }
}

/// The built-in estimator: one line-search ascent step per call.
///
/// The trial step length adapts across calls (twice the last accepted step,
/// capped at the configured initial step).
#[derive(Debug, Clone)]
pub struct OneStepEstimator {
    pub cfg: OptimizerConfig,
    next_step: Option<f64>,
}

impl OneStepEstimator {
    pub fn new(cfg: OptimizerConfig) -> Self {
        Self { cfg, next_step: None }
    }
}

impl MotionEstimator for OneStepEstimator {
    fn refine(&mut self, slice: &EventSlice, mask: &[bool], current: &MotionParams) -> Result<MotionParams, CmaxError> {
        let evaluator = Evaluator::new(slice, mask, &self.cfg)?;
        let cap = self.cfg.initial_step(current);
        let step = self.next_step.unwrap_or(cap);
        let outcome = evaluator.ascent_step(current, &self.cfg, step)?;
        if outcome.accepted {
            self.next_step = Some((2.0 * outcome.step).min(cap));
        }
        Ok(outcome.params)
    }
}

/// Infinity norm of the parameter change between two hypotheses of the same model.
pub fn param_change(a: &MotionParams, b: &MotionParams) -> f64 {
    a.to_vec().iter().zip(b.to_vec()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

pub(crate) fn check_initial(slice: &EventSlice, cfg: &OptimizerConfig) -> Result<(), CmaxError> {
    cfg.validate()?;
    if let MotionParams::TileFlow(tf) = &cfg.initial_params {
        if tf.width != slice.sensor.width || tf.height != slice.sensor.height {
            return Err(WarpError::GridMismatch {
                cols: tf.cols,
                rows: tf.rows,
                width: slice.sensor.width,
                height: slice.sensor.height,
                tile: tf.tile_size,
            }
            .into());
        }
    }
    Ok(())
}

/// Fits motion to the masked events by iterating single ascent steps until the
/// parameter update falls below `param_tolerance` or `max_iters` is reached.
pub fn estimate_motion(slice: &EventSlice, subset: &[bool], cfg: &OptimizerConfig) -> Result<MotionEstimate, CmaxError> {
    check_initial(slice, cfg)?;
    let evaluator = Evaluator::new(slice, subset, cfg)?;
    let mut estimator = OneStepEstimator::new(cfg.clone());
    let mut params = cfg.initial_params.clone();
    let mut converged = false;
    let mut iterations_used = 0;
    for _ in 0..cfg.max_iters {
        iterations_used += 1;
        let next = estimator.refine(slice, subset, &params)?;
        let change = param_change(&params, &next);
        params = next;
        if change < cfg.param_tolerance {
            converged = true;
            break;
        }
    }
    let objective_value = evaluator.value(&params)?;
    Ok(MotionEstimate { params, objective_value, iterations_used, converged })
}

/// A single accepted line-search update starting from `params` (unchanged when no ascent is found).
pub fn one_step(
    slice: &EventSlice,
    subset: &[bool],
    params: &MotionParams,
    cfg: &OptimizerConfig,
) -> Result<MotionParams, CmaxError> {
    cfg.validate()?;
    let evaluator = Evaluator::new(slice, subset, cfg)?;
    let outcome = evaluator.ascent_step(params, cfg, cfg.initial_step(params))?;
    Ok(outcome.params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{CameraModel, Event};

    fn cam() -> CameraModel {
        CameraModel::centered(48, 40, 60.0).unwrap()
    }

    /// Vertical line translating at `vx` px/s: events at x = x0 + vx t.
    fn moving_line(vx: f64) -> EventSlice {
        let mut events = Vec::new();
        for i in 0..400 {
            let t = i as f64 * 0.0005;
            let x = (14.0 + vx * t).round() as u32;
            events.push(Event::new(x, 6 + (i * 7 % 28) as u32, t, 1));
        }
        EventSlice::new(events, cam()).unwrap()
    }

    #[test]
    fn empty_mask_is_rejected() {
        let s = moving_line(40.0);
        let mask = vec![false; s.len()];
        let err = estimate_motion(&s, &mask, &OptimizerConfig::default()).unwrap_err();
        assert_eq!(err, CmaxError::NoEventsSelected);
        assert_eq!(one_step(&s, &mask, &MotionParams::Identity, &OptimizerConfig::default()).unwrap_err(), CmaxError::NoEventsSelected);
        assert!(matches!(
            estimate_motion(&s, &[true], &OptimizerConfig::default()),
            Err(CmaxError::MaskLength { .. })
        ));
    }

    #[test]
    fn simultaneous_events_are_degenerate() {
        let events: Vec<Event> = (0..30).map(|i| Event::new(5 + i, 10 + i % 7, 0.25, 1)).collect();
        let s = EventSlice::new(events, cam()).unwrap();
        let mask = vec![true; s.len()];
        let err = estimate_motion(&s, &mask, &OptimizerConfig::default()).unwrap_err();
        assert_eq!(err, CmaxError::DegenerateObjective);
    }

    #[test]
    fn config_validation() {
        let mut cfg = OptimizerConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.max_iters = 0;
        assert!(cfg.validate().is_err());
        let cfg = OptimizerConfig { line_search_shrink: 1.0, ..OptimizerConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = OptimizerConfig { param_tolerance: 0.0, ..OptimizerConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn tile_gradient_matches_full_recomputation() {
        let s = moving_line(40.0);
        let mask = vec![true; s.len()];
        for objective in [Objective::Variance, Objective::GradientMagnitude] {
            let cfg = OptimizerConfig { objective, ..OptimizerConfig::default() };
            let ev = Evaluator::new(&s, &mask, &cfg).unwrap();
            let mut tf = TileFlow::uniform(48, 40, 16, [10.0, 1.0]).unwrap();
            tf.set(0, 1, [25.0, -2.0]);
            let params = MotionParams::TileFlow(tf);
            let h = 0.5;
            let (grad, base) = ev.gradient(&params, h).unwrap();
            assert!((base - ev.value(&params).unwrap()).abs() < 1e-12 * base.abs().max(1e-30));
            let theta = params.to_vec();
            for i in 0..theta.len() {
                let mut p = theta.clone();
                p[i] += h;
                let mut m = theta.clone();
                m[i] -= h;
                let naive = (ev.value(&params.with_values(&p)).unwrap() - ev.value(&params.with_values(&m)).unwrap()) / (2.0 * h);
                let tol = 1e-9 * grad.iter().fold(0.0f64, |a, g| a.max(g.abs())).max(1e-12);
                let tile = i / 2;
                let populated = s.events.iter().any(|e| tf_tile(&params, e) == tile);
                if populated {
                    assert!((grad[i] - naive).abs() <= tol, "{objective:?} param {i}: {} vs {naive}", grad[i]);
                } else {
                    assert_eq!(grad[i], 0.0);
                }
            }
        }
    }

    fn tf_tile(params: &MotionParams, e: &Event) -> usize {
        match params {
            MotionParams::TileFlow(tf) => tf.tile_of(e.x, e.y),
            _ => unreachable!(),
        }
    }

    #[test]
    fn uniform_flow_recovered_on_moving_line() {
        let s = moving_line(40.0);
        let mask = vec![true; s.len()];
        let cfg = OptimizerConfig {
            initial_params: MotionParams::TileFlow(TileFlow::zeros(48, 40, 64).unwrap()),
            ..OptimizerConfig::default()
        };
        let est = estimate_motion(&s, &mask, &cfg).unwrap();
        let v = match &est.params {
            MotionParams::TileFlow(tf) => tf.flow[0],
            _ => unreachable!(),
        };
        // Warp displaces by +dt * v, so a line moving at +40 px/s is compensated by v = -40.
        assert!((v[0] + 40.0).abs() < 2.0, "{v:?}");
        assert!((est.objective_value - Evaluator::new(&s, &mask, &cfg).unwrap().value(&est.params).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn closure_estimator_plugs_in() {
        let s = moving_line(40.0);
        let mask = vec![true; s.len()];
        let mut fixed = |_: &EventSlice, _: &[bool], _: &MotionParams| Ok(MotionParams::Identity);
        assert_eq!(fixed.refine(&s, &mask, &MotionParams::angular(1.0, 0.0, 0.0)).unwrap(), MotionParams::Identity);
    }
}
