use serde::{Deserialize, Serialize};

use super::GestureConfig;

/// Pinch state of one hand.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HandPinch {
    pub pinching: bool,
    pub engaged_at: Option<f64>,
}

impl HandPinch {
    pub const RELEASED: HandPinch = HandPinch { pinching: false, engaged_at: None };
}

/// Hysteresis pinch detector: engages strictly below `pinch_engage_m`,
/// releases strictly above `pinch_release_m`, holds in between.
pub fn pinch_detect(
    index: [f64; 3],
    thumb: [f64; 3],
    prev: HandPinch,
    t: f64,
    config: &GestureConfig,
) -> HandPinch {
    let distance = crate::scene::measure_distance(index, thumb);
    if distance < config.pinch_engage_m {
        HandPinch { pinching: true, engaged_at: if prev.pinching { prev.engaged_at } else { Some(t) } }
    } else if distance > config.pinch_release_m {
        HandPinch::RELEASED
    } else {
        prev
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(distances: &[f64]) -> Vec<bool> {
        let config = GestureConfig::default();
        let mut state = HandPinch::RELEASED;
        distances
            .iter()
            .enumerate()
            .map(|(i, d)| {
                state = pinch_detect([0.0; 3], [*d, 0.0, 0.0], state, i as f64, &config);
                state.pinching
            })
            .collect()
    }

    #[test]
    fn hysteresis_sequence() {
        assert_eq!(run(&[0.05, 0.019, 0.025, 0.031]), vec![false, true, true, false]);
    }

    #[test]
    fn band_never_engages() {
        assert!(run(&[0.025; 50]).iter().all(|p| !p));
    }

    #[test]
    fn close_tips_pinch_from_first_frame() {
        assert!(run(&[0.010; 5]).iter().all(|p| *p));
    }

    #[test]
    fn engaged_at_is_kept_while_held() {
        let config = GestureConfig::default();
        let a = pinch_detect([0.0; 3], [0.01, 0.0, 0.0], HandPinch::RELEASED, 2.0, &config);
        let b = pinch_detect([0.0; 3], [0.025, 0.0, 0.0], a, 3.0, &config);
        assert_eq!(b.engaged_at, Some(2.0));
    }
}
