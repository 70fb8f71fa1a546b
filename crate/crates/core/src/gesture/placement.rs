//! Volume placement math: world/scene mapping and hand-driven transforms.

use nalgebra::{Quaternion, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::protocol::VolumeTransform;

type Vec3 = Vector3<f64>;

fn rotation(t: &VolumeTransform) -> UnitQuaternion<f64> {
    let [w, x, y, z] = t.rotation;
    UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z))
}

fn quat_array(q: &UnitQuaternion<f64>) -> [f64; 4] {
    [q.w, q.i, q.j, q.k]
}

/// Scene micrometers to world meters:
/// `translation + rotation * (scale * meters_per_micrometer * x)`.
pub fn data_to_world(x: [f64; 3], transform: &VolumeTransform, meters_per_micrometer: f64) -> [f64; 3] {
    let scaled = Vec3::from(x) * (transform.scale * meters_per_micrometer);
    (Vec3::from(transform.translation) + rotation(transform) * scaled).into()
}

/// Exact inverse of [`data_to_world`].
pub fn world_to_data(p: [f64; 3], transform: &VolumeTransform, meters_per_micrometer: f64) -> [f64; 3] {
    let local =
        rotation(transform).inverse_transform_vector(&(Vec3::from(p) - Vec3::from(transform.translation)));
    (local / (transform.scale * meters_per_micrometer)).into()
}

/// State captured when a one-hand grab begins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneHandGrab {
    pub anchor: [f64; 3],
    pub start: VolumeTransform,
}

/// State captured when a two-hand grab begins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoHandGrab {
    pub left: [f64; 3],
    pub right: [f64; 3],
    pub start: VolumeTransform,
}

impl TwoHandGrab {
    /// `None` when the hands are closer than `min_separation_m`, where the
    /// scale ratio is ill-conditioned.
    pub fn new(
        left: [f64; 3],
        right: [f64; 3],
        start: VolumeTransform,
        min_separation_m: f64,
    ) -> Option<Self> {
        let separation = (Vec3::from(right) - Vec3::from(left)).norm();
        (separation >= min_separation_m).then_some(TwoHandGrab { left, right, start })
    }
}

/// Moves the volume rigidly with one hand; rotation and scale are kept.
pub fn one_hand_translate(grab: &OneHandGrab, hand: [f64; 3]) -> VolumeTransform {
    let mut out = grab.start;
    for (k, h) in hand.into_iter().enumerate() {
        out.translation[k] = grab.start.translation[k] + (h - grab.anchor[k]);
    }
    out
}

/// Projections onto the XZ plane shorter than this give no yaw.
pub const YAW_DEGENERATE_M: f64 = 1e-6;

/// Signed rotation about world +Y taking the XZ projection of `from` onto
/// that of `to`; zero when either projection is degenerate.
pub fn yaw_between(from: [f64; 3], to: [f64; 3]) -> f64 {
    let u = Vec3::new(from[0], 0.0, from[2]);
    let v = Vec3::new(to[0], 0.0, to[2]);
    if u.norm() < YAW_DEGENERATE_M || v.norm() < YAW_DEGENERATE_M {
        return 0.0;
    }
    let u = u.normalize();
    let v = v.normalize();
    u.cross(&v).y.atan2(u.dot(&v))
}

/// Two-hand translate, yaw and zoom about the grab midpoint.
///
/// With `g`/`m` the grab-time and current hand midpoints, the new placement
/// is `Translate(m) ∘ RotY(yaw) ∘ Scale(s) ∘ Translate(-g)` applied on top of
/// the grab-time placement, so the grabbed midpoint stays under the hands.
/// `s` is the ratio of hand separations, limited so the resulting scale stays
/// within the transform's bounds.
pub fn two_hand_transform(grab: &TwoHandGrab, left: [f64; 3], right: [f64; 3]) -> VolumeTransform {
    let (gl, gr) = (Vec3::from(grab.left), Vec3::from(grab.right));
    let (l, r) = (Vec3::from(left), Vec3::from(right));
    let start = &grab.start;

    let ratio = (r - l).norm() / (gr - gl).norm();
    let target = start.scale * ratio;
    let (factor, scale) = if (VolumeTransform::MIN_SCALE..=VolumeTransform::MAX_SCALE).contains(&target) {
        (ratio, target)
    } else {
        let clamped = target.clamp(VolumeTransform::MIN_SCALE, VolumeTransform::MAX_SCALE);
        (clamped / start.scale, clamped)
    };

    let yaw = yaw_between((gr - gl).into(), (r - l).into());
    let spin = (yaw != 0.0).then(|| UnitQuaternion::from_axis_angle(&Unit::new_unchecked(Vec3::y()), yaw));

    let g = (gl + gr) * 0.5;
    let m = (l + r) * 0.5;
    // new_t = m + R(s (t0 - g)), written as t0 + (m - g) + (R(s d) - d) so
    // unmoved hands reproduce t0 bit-for-bit.
    let d = Vec3::from(start.translation) - g;
    let scaled = d * factor;
    let moved = match &spin {
        Some(q) => q * scaled,
        None => scaled,
    };
    let translation = Vec3::from(start.translation) + (m - g) + (moved - d);

    let rotation = match &spin {
        Some(q) => quat_array(&(q * rotation(start))),
        None => start.rotation,
    };

    VolumeTransform { translation: translation.into(), rotation, scale }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn identity_mapping_is_unchanged() {
        let p = [0.3, -1.2, 7.0];
        assert_eq!(world_to_data(p, &VolumeTransform::IDENTITY, 1.0), p);
    }

    #[test]
    fn pure_scale_divides() {
        let t = VolumeTransform { scale: 2.0, ..VolumeTransform::IDENTITY };
        assert_eq!(world_to_data([2.0, 0.0, 0.0], &t, 1.0), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn unmoved_hands_give_start_exactly() {
        let start = VolumeTransform {
            translation: [0.1, 1.3, -0.7],
            rotation: [0.9238795325112867, 0.0, 0.3826834323650898, 0.0],
            scale: 0.37,
        };
        let grab = TwoHandGrab::new([-0.13, 1.1, -0.4], [0.21, 1.15, -0.33], start, 1e-4).unwrap();
        assert_eq!(two_hand_transform(&grab, grab.left, grab.right), start);
    }

    #[test]
    fn spreading_doubles_scale_about_fixed_midpoint() {
        let grab =
            TwoHandGrab::new([-0.1, 0.0, 0.0], [0.1, 0.0, 0.0], VolumeTransform::IDENTITY, 1e-4).unwrap();
        let out = two_hand_transform(&grab, [-0.2, 0.0, 0.0], [0.2, 0.0, 0.0]);
        assert_eq!(out.scale, 2.0);
        assert_eq!(out.rotation, [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(out.translation, [0.0, 0.0, 0.0]);
    }

    #[test]
    fn yaw_convention() {
        assert!((yaw_between([1.0, 0.0, 0.0], [0.0, 0.0, 1.0]) - (-FRAC_PI_2)).abs() < 1e-15);
        assert_eq!(yaw_between([1.0, 0.0, 0.0], [1.0, 5.0, 0.0]), 0.0);
        assert_eq!(yaw_between([0.0, 1.0, 0.0], [1.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn scale_is_clamped() {
        let start = VolumeTransform { scale: 5_000.0, ..VolumeTransform::IDENTITY };
        let grab = TwoHandGrab::new([-0.1, 0.0, 0.0], [0.1, 0.0, 0.0], start, 1e-4).unwrap();
        let out = two_hand_transform(&grab, [-0.5, 0.0, 0.0], [0.5, 0.0, 0.0]);
        assert_eq!(out.scale, VolumeTransform::MAX_SCALE);
    }

    #[test]
    fn degenerate_grab_is_refused() {
        assert!(TwoHandGrab::new([0.0; 3], [5e-5, 0.0, 0.0], VolumeTransform::IDENTITY, 1e-4).is_none());
    }

    #[test]
    fn one_hand_telescopes() {
        let grab = OneHandGrab { anchor: [0.2, 1.0, -0.3], start: VolumeTransform::IDENTITY };
        assert_eq!(one_hand_translate(&grab, grab.anchor), VolumeTransform::IDENTITY);
        let out = one_hand_translate(&grab, [0.2, 1.3, -0.3]);
        assert!((out.translation[1] - 0.3).abs() < 1e-15);
        assert_eq!(out.rotation, VolumeTransform::IDENTITY.rotation);
    }
}
