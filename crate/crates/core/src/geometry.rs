//! Planar primitives shared by the kinematics and the device simulation.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A point (or vector) in a station base frame, millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector at `angle` radians from +x.
    #[inline]
    pub fn from_angle(angle: f64) -> Self {
        Self::new(angle.cos(), angle.sin())
    }

    #[inline]
    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    #[inline]
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    /// Counter-clockwise perpendicular.
    #[inline]
    pub fn perp(self) -> Point2 {
        Point2::new(-self.y, self.x)
    }

    /// Rotates counter-clockwise by `angle` radians.
    #[inline]
    pub fn rotated(self, angle: f64) -> Point2 {
        let (s, c) = angle.sin_cos();
        Point2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    #[inline]
    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    #[inline]
    pub fn lerp(self, other: Point2, s: f64) -> Point2 {
        self + (other - self) * s
    }
}

impl Add for Point2 {
    type Output = Point2;
    #[inline]
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    #[inline]
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    #[inline]
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    #[inline]
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into (-π, π].
pub fn normalize_angle(angle: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut a = angle.rem_euclid(TAU);
    if a > PI {
        a -= TAU;
    }
    a
}

/// Closed line segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Point2,
    pub b: Point2,
}

impl Segment {
    pub const fn new(a: Point2, b: Point2) -> Self {
        Self { a, b }
    }

    /// Distance from `p` to the closest point of the segment.
    pub fn distance_to_point(&self, p: Point2) -> f64 {
        let ab = self.b - self.a;
        let len2 = ab.dot(ab);
        if len2 == 0.0 {
            return p.distance(self.a);
        }
        let s = ((p - self.a).dot(ab) / len2).clamp(0.0, 1.0);
        p.distance(self.a + ab * s)
    }

    /// Minimum distance between two segments; zero when they intersect.
    pub fn distance_to_segment(&self, other: &Segment) -> f64 {
        if self.intersects(other) {
            return 0.0;
        }
        self.distance_to_point(other.a)
            .min(self.distance_to_point(other.b))
            .min(other.distance_to_point(self.a))
            .min(other.distance_to_point(self.b))
    }

    fn intersects(&self, other: &Segment) -> bool {
        let d1 = (self.b - self.a).cross(other.a - self.a);
        let d2 = (self.b - self.a).cross(other.b - self.a);
        let d3 = (other.b - other.a).cross(self.a - other.a);
        let d4 = (other.b - other.a).cross(self.b - other.a);
        ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    }
}

/// Axis-aligned ellipse, millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: Point2,
    /// Semi-axis along x.
    pub semi_x: f64,
    /// Semi-axis along y.
    pub semi_y: f64,
}

impl Ellipse {
    /// Builds an ellipse from its full width and height.
    pub fn from_extent(center: Point2, width: f64, height: f64) -> Self {
        Self {
            center,
            semi_x: width / 2.0,
            semi_y: height / 2.0,
        }
    }

    /// Normalised radius: `<= 1` inside or on the boundary.
    pub fn level(&self, p: Point2) -> f64 {
        let d = p - self.center;
        ((d.x / self.semi_x).powi(2) + (d.y / self.semi_y).powi(2)).sqrt()
    }

    pub fn contains(&self, p: Point2) -> bool {
        self.level(p) <= 1.0
    }

    pub fn minor_semi_axis(&self) -> f64 {
        self.semi_x.min(self.semi_y)
    }

    /// Point on the boundary at parameter `t` radians.
    pub fn boundary_point(&self, t: f64) -> Point2 {
        self.center + Point2::new(self.semi_x * t.cos(), self.semi_y * t.sin())
    }

    /// Scales `p` radially about the centre onto the boundary when it lies outside.
    /// Returns the (possibly moved) point and whether it was clamped.
    pub fn clamp(&self, p: Point2) -> (Point2, bool) {
        let level = self.level(p);
        if level <= 1.0 {
            (p, false)
        } else {
            (self.center + (p - self.center) * (1.0 / level), true)
        }
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.semi_x * self.semi_y
    }
}
