//! Hand-pose stream to gesture events and state deltas.

mod engine;
mod frame;
mod pinch;
mod placement;

use serde::{Deserialize, Serialize};

pub use engine::{GestureEngine, GestureError, GestureEvent, GestureOutput, Mode};
pub use frame::{Hand, HandFrame, HandPose};
pub use pinch::{pinch_detect, HandPinch};
pub use placement::{
    data_to_world, one_hand_translate, two_hand_transform, world_to_data, yaw_between, OneHandGrab,
    TwoHandGrab, YAW_DEGENERATE_M,
};

/// Gesture thresholds, meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase")]
pub struct GestureConfig {
    /// Index-thumb distance below which a pinch engages.
    pub pinch_engage_m: f64,
    /// Index-thumb distance above which a pinch releases.
    pub pinch_release_m: f64,
    /// Index-tip separation below which a measurement starts.
    pub measure_start_m: f64,
    /// Two-hand grabs with the hands closer than this are refused.
    pub degenerate_grab_m: f64,
    /// Prepended to the per-engine measurement counter to form ids.
    pub measurement_prefix: String,
}

impl Default for GestureConfig {
    fn default() -> Self {
        GestureConfig {
            pinch_engage_m: 0.02,
            pinch_release_m: 0.03,
            measure_start_m: 0.015,
            degenerate_grab_m: 1e-4,
            measurement_prefix: "m".to_string(),
        }
    }
}
