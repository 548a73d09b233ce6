//! Planar geometry shared by the snapshot, beam and LoS modules.

use core::f64::consts::{PI, TAU};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        libm::hypot(self.x - other.x, self.y - other.y)
    }

    pub fn norm(self) -> f64 {
        libm::hypot(self.x, self.y)
    }

    pub fn to_polar(self) -> PolarPoint {
        PolarPoint::new(self.norm(), normalize_angle(libm::atan2(self.y, self.x)))
    }

    /// Rotation about the origin.
    pub fn rotated(self, angle: f64) -> Point {
        let (s, c) = (libm::sin(angle), libm::cos(angle));
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

/// Position in polar form, `theta` in `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PolarPoint {
    pub r: f64,
    pub theta: f64,
}

impl PolarPoint {
    pub fn new(r: f64, theta: f64) -> Self {
        Self { r, theta }
    }

    pub fn to_cartesian(self) -> Point {
        Point::new(self.r * libm::cos(self.theta), self.r * libm::sin(self.theta))
    }
}

/// Maps any angle to `[0, 2π)`.
pub fn normalize_angle(a: f64) -> f64 {
    let mut t = a % TAU;
    if t < 0.0 {
        t += TAU;
    }
    if t >= TAU {
        t -= TAU;
    }
    t
}

/// Maps any angle to `[-π, π]`.
pub fn wrap_pi(a: f64) -> f64 {
    let t = normalize_angle(a + PI) - PI;
    t.clamp(-PI, PI)
}

/// True when `p` lies strictly within `radius` of the open segment `a`–`b`:
/// its projection must fall strictly between the endpoints.
pub fn within_open_corridor(p: Point, a: Point, b: Point, radius: f64) -> bool {
    if radius <= 0.0 {
        return false;
    }
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return false;
    }
    let t = ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2;
    if t <= 0.0 || t >= 1.0 {
        return false;
    }
    // perpendicular distance via the cross product
    let cross = (p.x - a.x) * dy - (p.y - a.y) * dx;
    (cross * cross) / len2 < radius * radius
}

/// Axis-aligned rectangle `[min.x, max.x] × [min.y, max.y]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn new(min: Point, max: Point) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    /// Liang–Barsky clipping of the closed segment `a`–`b` against the closed
    /// rectangle.
    pub fn intersects_segment(&self, a: Point, b: Point) -> bool {
        let d = Point::new(b.x - a.x, b.y - a.y);
        let mut t0 = 0.0_f64;
        let mut t1 = 1.0_f64;
        let edges = [(-d.x, a.x - self.min.x), (d.x, self.max.x - a.x), (-d.y, a.y - self.min.y), (d.y, self.max.y - a.y)];
        for (p, q) in edges {
            if p == 0.0 {
                if q < 0.0 {
                    return false;
                }
            } else {
                let r = q / p;
                if p < 0.0 {
                    if r > t1 {
                        return false;
                    }
                    t0 = t0.max(r);
                } else {
                    if r < t0 {
                        return false;
                    }
                    t1 = t1.min(r);
                }
            }
        }
        t0 <= t1
    }
}
