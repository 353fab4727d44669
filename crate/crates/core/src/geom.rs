//! Planar geometry in a local east/north frame, meters.
//!
//! Headings are compass degrees: 0 is north (+y), 90 is east (+x).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance_sq(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    /// Compass bearing from `self` to `to`, in [0, 360).
    pub fn bearing_to(&self, to: &Point) -> f64 {
        wrap_degrees((to.x - self.x).atan2(to.y - self.y).to_degrees())
    }

    /// Point reached after traveling `dist` meters along compass `heading_deg`.
    pub fn advanced(&self, heading_deg: f64, dist: f64) -> Point {
        let h = heading_deg.to_radians();
        Point::new(self.x + dist * h.sin(), self.y + dist * h.cos())
    }

    pub fn centroid(points: &[Point]) -> Option<Point> {
        if points.is_empty() {
            return None;
        }
        let n = points.len() as f64;
        let (sx, sy) = points
            .iter()
            .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
        Some(Point::new(sx / n, sy / n))
    }
}

/// Wraps an angle in degrees into [0, 360).
pub fn wrap_degrees(deg: f64) -> f64 {
    let w = deg.rem_euclid(360.0);
    // rem_euclid can return exactly 360.0 for tiny negative inputs
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

/// Smallest absolute angular difference between two headings, in [0, 180].
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Signed shortest turn from `from` to `to`, in (-180, 180].
pub fn signed_turn(from: f64, to: f64) -> f64 {
    let d = (to - from).rem_euclid(360.0);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}
