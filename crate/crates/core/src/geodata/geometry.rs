use serde::{Deserialize, Serialize};

use super::GeoError;
use crate::Scalar;

/// Planar coordinate in meters.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Point<S> {
    pub x: S,
    pub y: S,
}

impl<S: Scalar> Point<S> {
    pub fn new(x: S, y: S) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Self) -> S {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Point at fraction `t` of the way from `self` to `other`.
    pub fn lerp(self, other: Self, t: S) -> Self {
        Self {
            x: self.x + (other.x - self.x) * t,
            y: self.y + (other.y - self.y) * t,
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

pub fn polyline_length<S: Scalar>(points: &[Point<S>]) -> S {
    points
        .windows(2)
        .fold(S::zero(), |acc, w| acc + w[0].distance(w[1]))
}

/// Unsigned angle in degrees at vertex `at` between the rays towards
/// `final_target` and towards `candidate`.
///
/// A candidate standing exactly at `at` has no direction and yields 0°.
pub fn bearing_angle<S: Scalar>(
    at: Point<S>,
    final_target: Point<S>,
    candidate: Point<S>,
) -> Result<S, GeoError> {
    let (ux, uy) = (final_target.x - at.x, final_target.y - at.y);
    if ux == S::zero() && uy == S::zero() {
        return Err(GeoError::UndefinedBearing);
    }
    let (vx, vy) = (candidate.x - at.x, candidate.y - at.y);
    if vx == S::zero() && vy == S::zero() {
        return Ok(S::zero());
    }
    let cross = ux * vy - uy * vx;
    let dot = ux * vx + uy * vy;
    Ok(cross.abs().atan2(dot).to_degrees())
}
