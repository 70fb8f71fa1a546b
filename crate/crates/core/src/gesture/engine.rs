//! Frame-by-frame gesture state machine.
//!
//! Each frame is resolved in priority order:
//!
//! 1. an active measurement consumes the frame (lock, finalize, or abort
//!    when a hand is lost);
//! 2. a pinch that engages while an entity is hovered toggles its selection;
//! 3. any other pinch engaging in empty space grabs the volume: one hand
//!    translates, two hands translate, yaw and zoom;
//! 4. from idle with no pinches, bringing both index tips together starts a
//!    measurement;
//! 5. hover follows the smallest entity containing a non-pinching index tip
//!    whenever no measurement is active.
//!
//! Grabs, toggles and locks trigger on the frame a pinch engages, never on
//! a pinch that is merely held.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::frame::{Hand, HandFrame};
use super::pinch::{pinch_detect, HandPinch};
use super::placement::{one_hand_translate, two_hand_transform, world_to_data, OneHandGrab, TwoHandGrab};
use super::GestureConfig;
use crate::protocol::{Measurement, SessionState, StateDelta, Update, VolumeTransform};
use crate::scene::Scene;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum GestureEvent {
    HoverChanged {
        entity: Option<String>,
    },
    SelectionToggled {
        entity: String,
        selected: bool,
    },
    TransformUpdated {
        transform: VolumeTransform,
    },
    MeasureStarted {
        #[serde(rename = "measurementId")]
        measurement_id: String,
    },
    MeasureEndpointLocked {
        #[serde(rename = "measurementId")]
        measurement_id: String,
        hand: Hand,
        #[serde(rename = "endpointUm")]
        endpoint_um: [f64; 3],
    },
    MeasureFinalized {
        measurement: Measurement,
    },
    MeasureAborted {
        #[serde(rename = "measurementId")]
        measurement_id: String,
    },
}

impl GestureEvent {
    pub fn kind(&self) -> &'static str {
        match self {
            GestureEvent::HoverChanged { .. } => "HoverChanged",
            GestureEvent::SelectionToggled { .. } => "SelectionToggled",
            GestureEvent::TransformUpdated { .. } => "TransformUpdated",
            GestureEvent::MeasureStarted { .. } => "MeasureStarted",
            GestureEvent::MeasureEndpointLocked { .. } => "MeasureEndpointLocked",
            GestureEvent::MeasureFinalized { .. } => "MeasureFinalized",
            GestureEvent::MeasureAborted { .. } => "MeasureAborted",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    Idle,
    GrabOne { hand: Hand, grab: OneHandGrab },
    GrabTwo(TwoHandGrab),
    MeasurePlacing { draft: Measurement },
    MeasureLockedOne { locked: Hand, draft: Measurement },
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GestureError {
    #[error("frame time {t} does not advance past {previous}")]
    StaleFrame { t: f64, previous: f64 },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GestureOutput {
    pub events: Vec<GestureEvent>,
    pub delta: StateDelta,
}

/// One hand-tracking stream's reducer. Run one instance per headset.
#[derive(Debug, Clone)]
pub struct GestureEngine {
    config: GestureConfig,
    pinch: [HandPinch; 2],
    mode: Mode,
    hover: Option<String>,
    last_t: Option<f64>,
    /// Transform last produced by a grab, so consecutive frames of one grab
    /// don't depend on how quickly the host folds deltas back into state.
    grab_transform: Option<VolumeTransform>,
    measurements_started: u64,
}

/// Per-frame working set.
struct Step<'a> {
    frame: &'a HandFrame,
    scene: &'a Scene,
    state: &'a SessionState,
    engaged: [bool; 2],
    released: [bool; 2],
    out: GestureOutput,
}

impl Step<'_> {
    fn emit(&mut self, event: GestureEvent, update: Update) {
        self.out.events.push(event);
        self.out.delta.push(update);
    }

    fn to_data(&self, p: [f64; 3], transform: &VolumeTransform) -> [f64; 3] {
        world_to_data(p, transform, self.scene.metadata.meters_per_micrometer)
    }
}

impl GestureEngine {
    pub fn new(config: GestureConfig) -> Self {
        GestureEngine {
            config,
            pinch: [HandPinch::RELEASED; 2],
            mode: Mode::Idle,
            hover: None,
            last_t: None,
            grab_transform: None,
            measurements_started: 0,
        }
    }

    pub fn config(&self) -> &GestureConfig {
        &self.config
    }

    pub fn mode(&self) -> &Mode {
        &self.mode
    }

    pub fn hover(&self) -> Option<&str> {
        self.hover.as_deref()
    }

    pub fn pinch(&self, hand: Hand) -> HandPinch {
        self.pinch[hand.slot()]
    }

    /// Advances the machine by one frame.
    ///
    /// `state` is the host's current view of the session; selection toggles
    /// and non-grab placement are read from it. The returned delta holds at
    /// most one update each for transform, selection, hover and a
    /// measurement.
    pub fn update(
        &mut self,
        frame: &HandFrame,
        scene: &Scene,
        state: &SessionState,
    ) -> Result<GestureOutput, GestureError> {
        if let Some(previous) = self.last_t {
            if frame.t.partial_cmp(&previous) != Some(std::cmp::Ordering::Greater) {
                return Err(GestureError::StaleFrame { t: frame.t, previous });
            }
        }
        self.last_t = Some(frame.t);

        let mut engaged = [false; 2];
        let mut released = [false; 2];
        for hand in Hand::BOTH {
            let i = hand.slot();
            let prev = self.pinch[i];
            let next = match frame.hand(hand) {
                Some(pose) => pinch_detect(pose.index, pose.thumb, prev, frame.t, &self.config),
                None => HandPinch::RELEASED,
            };
            engaged[i] = !prev.pinching && next.pinching;
            released[i] = prev.pinching && !next.pinching;
            self.pinch[i] = next;
        }

        let mut step = Step { frame, scene, state, engaged, released, out: GestureOutput::default() };

        match self.mode {
            Mode::MeasurePlacing { .. } | Mode::MeasureLockedOne { .. } => self.step_measurement(&mut step),
            _ => {
                let consumed = self.step_selection(&mut step);
                self.step_grab(&mut step, consumed);
                if self.mode == Mode::Idle {
                    self.step_measure_start(&mut step);
                }
            }
        }

        if !matches!(self.mode, Mode::MeasurePlacing { .. } | Mode::MeasureLockedOne { .. }) {
            self.step_hover(&mut step);
        }
        Ok(step.out)
    }

    fn current_transform(&self, state: &SessionState) -> VolumeTransform {
        self.grab_transform.unwrap_or(state.transform)
    }

    fn pinching(&self, hand: Hand) -> bool {
        self.pinch[hand.slot()].pinching
    }

    fn set_hover(&mut self, step: &mut Step<'_>, hover: Option<String>) {
        if self.hover != hover {
            self.hover = hover.clone();
            step.emit(GestureEvent::HoverChanged { entity: hover.clone() }, Update::Hover(hover));
        }
    }

    fn step_measurement(&mut self, step: &mut Step<'_>) {
        let (Some(left), Some(right)) = (step.frame.left, step.frame.right) else {
            let draft = match &self.mode {
                Mode::MeasurePlacing { draft } | Mode::MeasureLockedOne { draft, .. } => draft.clone(),
                _ => unreachable!("only called while measuring"),
            };
            self.mode = Mode::Idle;
            step.emit(
                GestureEvent::MeasureAborted { measurement_id: draft.measurement_id.clone() },
                Update::Measurement { id: draft.measurement_id, value: None },
            );
            return;
        };
        let transform = step.state.transform;
        let tips = [step.to_data(left.index, &transform), step.to_data(right.index, &transform)];
        let engaged = step.engaged;

        let mode = std::mem::replace(&mut self.mode, Mode::Idle);
        let (locked, mut draft) = match mode {
            Mode::MeasurePlacing { draft } => (None, draft),
            Mode::MeasureLockedOne { locked, draft } => (Some(locked), draft),
            _ => unreachable!("only called while measuring"),
        };
        let previous = draft.clone();
        let id = draft.measurement_id.clone();

        let set_endpoint = |draft: &mut Measurement, hand: Hand, p: [f64; 3]| match hand {
            Hand::Left => draft.endpoint_a = p,
            Hand::Right => draft.endpoint_b = p,
        };

        let mut locked_now = locked;
        let mut finalize = false;
        for hand in Hand::BOTH {
            if Some(hand) == locked_now {
                continue;
            }
            let p = tips[hand.slot()];
            set_endpoint(&mut draft, hand, p);
            if engaged[hand.slot()] {
                if locked_now.is_some() {
                    finalize = true;
                } else {
                    locked_now = Some(hand);
                    step.out.events.push(GestureEvent::MeasureEndpointLocked {
                        measurement_id: id.clone(),
                        hand,
                        endpoint_um: p,
                    });
                }
            }
        }
        draft = Measurement::new(id.clone(), draft.endpoint_a, draft.endpoint_b, finalize);

        if finalize {
            step.emit(
                GestureEvent::MeasureFinalized { measurement: draft.clone() },
                Update::Measurement { id, value: Some(draft) },
            );
            return;
        }
        if draft != previous {
            step.out.delta.push(Update::Measurement { id, value: Some(draft.clone()) });
        }
        self.mode = match locked_now {
            Some(locked) => Mode::MeasureLockedOne { locked, draft },
            None => Mode::MeasurePlacing { draft },
        };
    }

    /// Toggles the hovered entity when a pinch engages over it. Returns the
    /// hands whose engagement was used up.
    fn step_selection(&mut self, step: &mut Step<'_>) -> [bool; 2] {
        let mut consumed = [false; 2];
        let Some(entity) = self.hover.clone() else {
            return consumed;
        };
        let eligible = |hand: Hand| match &self.mode {
            Mode::Idle => true,
            Mode::GrabOne { hand: grabbing, .. } => hand != *grabbing,
            _ => false,
        };
        let hands: Vec<Hand> =
            Hand::BOTH.into_iter().filter(|h| step.engaged[h.slot()] && eligible(*h)).collect();
        if hands.is_empty() {
            return consumed;
        }
        for h in hands {
            consumed[h.slot()] = true;
        }
        let mut selection: BTreeSet<String> = step.state.selection.clone();
        let selected = if selection.remove(&entity) {
            false
        } else {
            selection.insert(entity.clone());
            true
        };
        step.emit(GestureEvent::SelectionToggled { entity, selected }, Update::Selection(selection));
        consumed
    }

    fn start_one(&mut self, step: &Step<'_>, hand: Hand, start: VolumeTransform) {
        let pose = step.frame.hand(hand).expect("pinching hand is present");
        self.mode = Mode::GrabOne { hand, grab: OneHandGrab { anchor: pose.pinch_point(), start } };
        self.grab_transform = Some(start);
    }

    /// Enters a two-hand grab, or returns false when the hands are too close.
    fn start_two(&mut self, step: &Step<'_>, start: VolumeTransform) -> bool {
        let (Some(l), Some(r)) = (step.frame.left, step.frame.right) else {
            return false;
        };
        match TwoHandGrab::new(l.pinch_point(), r.pinch_point(), start, self.config.degenerate_grab_m) {
            Some(grab) => {
                self.mode = Mode::GrabTwo(grab);
                self.grab_transform = Some(start);
                true
            }
            None => false,
        }
    }

    fn end_grab(&mut self) {
        self.mode = Mode::Idle;
        self.grab_transform = None;
    }

    fn step_grab(&mut self, step: &mut Step<'_>, consumed: [bool; 2]) {
        let fresh = |hand: Hand| step.engaged[hand.slot()] && !consumed[hand.slot()];
        let current = self.current_transform(step.state);

        match self.mode.clone() {
            Mode::Idle => {
                let (l, r) = (fresh(Hand::Left), fresh(Hand::Right));
                if !(l || r) {
                    return;
                }
                let both = (l || self.pinching(Hand::Left)) && (r || self.pinching(Hand::Right));
                if both && self.start_two(step, current) {
                    return;
                }
                // Degenerate two-hand entry falls back to the hand that just
                // engaged; when both engaged together the grab is refused.
                if l != r {
                    self.start_one(step, if l { Hand::Left } else { Hand::Right }, current);
                }
            }
            Mode::GrabOne { hand, grab } => {
                let other = hand.other();
                if step.released[hand.slot()] {
                    self.end_grab();
                    if self.pinching(other) && step.frame.hand(other).is_some() {
                        self.start_one(step, other, current);
                    }
                    return;
                }
                if fresh(other) && self.start_two(step, current) {
                    return;
                }
                let pose = step.frame.hand(hand).expect("pinching hand is present");
                self.emit_transform(step, one_hand_translate(&grab, pose.pinch_point()));
            }
            Mode::GrabTwo(grab) => {
                let (rl, rr) = (step.released[0], step.released[1]);
                match (rl, rr) {
                    (true, true) => self.end_grab(),
                    (true, false) => self.start_one(step, Hand::Right, current),
                    (false, true) => self.start_one(step, Hand::Left, current),
                    (false, false) => {
                        let (l, r) = (step.frame.left.unwrap(), step.frame.right.unwrap());
                        self.emit_transform(
                            step,
                            two_hand_transform(&grab, l.pinch_point(), r.pinch_point()),
                        );
                    }
                }
            }
            Mode::MeasurePlacing { .. } | Mode::MeasureLockedOne { .. } => {}
        }
    }

    fn emit_transform(&mut self, step: &mut Step<'_>, transform: VolumeTransform) {
        if self.grab_transform != Some(transform) {
            self.grab_transform = Some(transform);
            step.emit(GestureEvent::TransformUpdated { transform }, Update::Transform(transform));
        }
    }

    fn step_measure_start(&mut self, step: &mut Step<'_>) {
        let (Some(left), Some(right)) = (step.frame.left, step.frame.right) else {
            return;
        };
        if self.pinching(Hand::Left) || self.pinching(Hand::Right) || step.released.iter().any(|r| *r) {
            return;
        }
        if crate::scene::measure_distance(left.index, right.index) >= self.config.measure_start_m {
            return;
        }
        self.measurements_started += 1;
        let id = format!("{}{}", self.config.measurement_prefix, self.measurements_started);
        let transform = step.state.transform;
        let draft = Measurement::new(
            id.clone(),
            step.to_data(left.index, &transform),
            step.to_data(right.index, &transform),
            false,
        );
        self.set_hover(step, None);
        step.emit(
            GestureEvent::MeasureStarted { measurement_id: id.clone() },
            Update::Measurement { id, value: Some(draft.clone()) },
        );
        self.mode = Mode::MeasurePlacing { draft };
    }

    fn step_hover(&mut self, step: &mut Step<'_>) {
        let transform = self.current_transform(step.state);
        let index = &step.scene.index;
        let hit = Hand::BOTH
            .into_iter()
            .filter(|h| !self.pinching(*h))
            .filter_map(|h| step.frame.hand(h))
            .filter_map(|pose| index.query_point(step.to_data(pose.index, &transform)))
            .filter_map(|id| index.get(id))
            .min_by(|a, b| {
                a.signed_volume_um3
                    .total_cmp(&b.signed_volume_um3)
                    .then_with(|| a.entity_id.cmp(&b.entity_id))
            })
            .map(|e| e.entity_id.clone());
        self.set_hover(step, hit);
    }
}
