use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hand {
    Left,
    Right,
}

impl Hand {
    pub const BOTH: [Hand; 2] = [Hand::Left, Hand::Right];

    pub fn other(self) -> Hand {
        match self {
            Hand::Left => Hand::Right,
            Hand::Right => Hand::Left,
        }
    }

    pub(crate) fn slot(self) -> usize {
        match self {
            Hand::Left => 0,
            Hand::Right => 1,
        }
    }
}

/// Tracked joints of one hand, world meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandPose {
    pub index: [f64; 3],
    pub thumb: [f64; 3],
    pub wrist: [f64; 3],
}

impl HandPose {
    pub fn pinch_distance(&self) -> f64 {
        crate::scene::measure_distance(self.index, self.thumb)
    }

    /// Grab anchor: midway between the index and thumb tips.
    pub fn pinch_point(&self) -> [f64; 3] {
        [0, 1, 2].map(|k| 0.5 * (self.index[k] + self.thumb[k]))
    }
}

/// One timestamped two-hand sample. An absent hand is `null` on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandFrame {
    pub t: f64,
    pub left: Option<HandPose>,
    pub right: Option<HandPose>,
}

impl HandFrame {
    pub fn hand(&self, hand: Hand) -> Option<&HandPose> {
        match hand {
            Hand::Left => self.left.as_ref(),
            Hand::Right => self.right.as_ref(),
        }
    }
}
