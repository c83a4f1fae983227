use std::fmt;

use serde::{Deserialize, Serialize};

/// Identifier of a node in the cluster network.
///
/// Senders are numbered `0..n_senders`; the sink uses the reserved value
/// [`NodeId::SINK`], which never collides with a sender index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u16);

impl NodeId {
    pub const SINK: NodeId = NodeId(u16::MAX);

    pub fn sender(index: usize) -> Self {
        assert!(index < u16::MAX as usize, "sender index {index} out of range");
        NodeId(index as u16)
    }

    pub fn is_sink(self) -> bool {
        self == Self::SINK
    }

    /// Row/column of this node in per-link matrices, where the sink sits
    /// after the last sender.
    pub fn matrix_index(self, n_senders: usize) -> usize {
        if self.is_sink() {
            n_senders
        } else {
            self.0 as usize
        }
    }

    pub fn from_matrix_index(index: usize, n_senders: usize) -> Self {
        if index == n_senders {
            Self::SINK
        } else {
            Self::sender(index)
        }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_sink() {
            f.write_str("sink")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// Cartesian coordinates in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "Vec<f64>", into = "Vec<f64>")]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

// Positions are written as `[x, y]` or `[x, y, z]` in config files.
impl From<Vec<f64>> for Position {
    fn from(v: Vec<f64>) -> Self {
        let get = |i: usize| v.get(i).copied().unwrap_or(0.0);
        Position::new(get(0), get(1), get(2))
    }
}

impl From<Position> for Vec<f64> {
    fn from(p: Position) -> Self {
        vec![p.x, p.y, p.z]
    }
}

/// Time of flight of an acoustic signal between two points.
pub fn propagation_delay(a: &Position, b: &Position, sound_speed: f64) -> f64 {
    a.distance(b) / sound_speed
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn delay_examples() {
        let sink = Position::default();
        let far = Position::new(5000.0, 0.0, 0.0);
        assert!((propagation_delay(&sink, &far, 1500.0) - 10.0 / 3.0).abs() < 1e-12);
        assert_eq!(propagation_delay(&sink, &sink, 1500.0), 0.0);
        let unit = Position::new(0.0, 1500.0, 0.0);
        assert_eq!(propagation_delay(&sink, &unit, 1500.0), 1.0);
    }

    #[test]
    fn sink_index_is_last_row() {
        assert_eq!(NodeId::SINK.matrix_index(4), 4);
        assert_eq!(NodeId::from_matrix_index(4, 4), NodeId::SINK);
        assert_eq!(NodeId::from_matrix_index(2, 4), NodeId(2));
        assert_ne!(NodeId::sender(3), NodeId::SINK);
    }

    proptest! {
        #[test]
        fn delay_symmetric_and_linear(
            ax in -1e4f64..1e4, ay in -1e4f64..1e4, az in -500f64..0.0,
            bx in -1e4f64..1e4, by in -1e4f64..1e4, bz in -500f64..0.0,
            k in 0.1f64..10.0,
        ) {
            let a = Position::new(ax, ay, az);
            let b = Position::new(bx, by, bz);
            let d = propagation_delay(&a, &b, 1500.0);
            prop_assert_eq!(d, propagation_delay(&b, &a, 1500.0));
            let scaled = Position::new(ax + k * (bx - ax), ay + k * (by - ay), az + k * (bz - az));
            let ds = propagation_delay(&a, &scaled, 1500.0);
            prop_assert!((ds - k * d).abs() <= 1e-9 * (1.0 + k * d));
        }
    }
}
