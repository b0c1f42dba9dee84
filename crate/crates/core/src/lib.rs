//! Joint event-camera denoising and motion estimation.
//!
//! Motion is fitted by contrast maximization on an image of warped events
//! (IWE) while events are ranked by their local contrast in that image and
//! split into signal and noise at a fixed target ratio. The two steps
//! alternate until the motion parameters converge.

pub mod baselines;
pub mod cli;
pub mod cmax;
pub mod denoise;
pub mod event;
pub mod io;
pub mod iwe;
pub mod metrics;
pub mod sim;
pub mod warp;

pub use cmax::{estimate_motion, one_step, MotionEstimate, MotionEstimator, OneStepEstimator, OptimizerConfig};
pub use denoise::{classify, equivalence_check, joint_estimate, joint_estimate_with, score_events, JointResult, ScoreKind};
pub use event::{validate_slice, CameraModel, Event, EventSlice, Label, LabelSet};
pub use iwe::{accumulate, gradient_magnitude_objective, variance_objective, Iwe, Objective};
pub use warp::{flow_at, warp_events, MotionParams, TileFlow, WarpedEvents};
