//! Independent oracles shared by the integration tests. None of these call
//! into the crate's own geometry beyond plain point arithmetic.
#![allow(dead_code)]

use cutaneous_core::{JointAngles, LinkageGeometry, Point2};

/// Elbow joints computed straight from the definition.
pub fn elbows(g: &LinkageGeometry, q: JointAngles) -> (Point2, Point2) {
    (
        Point2::new(g.o1.x + g.l1 * q.theta1.cos(), g.o1.y + g.l1 * q.theta1.sin()),
        Point2::new(g.o2.x + g.l2 * q.theta2.cos(), g.o2.y + g.l2 * q.theta2.sin()),
    )
}

/// Both intersections of C(c1, r1) and C(c2, r2), via the radical line.
pub fn circle_intersections(c1: Point2, r1: f64, c2: Point2, r2: f64) -> Option<(Point2, Point2)> {
    let dx = c2.x - c1.x;
    let dy = c2.y - c1.y;
    let d2 = dx * dx + dy * dy;
    let d = d2.sqrt();
    if d > r1 + r2 || d < (r1 - r2).abs() || d == 0.0 {
        return None;
    }
    let a = (r1 * r1 - r2 * r2 + d2) / (2.0 * d);
    let h = (r1 * r1 - a * a).max(0.0).sqrt();
    let mx = c1.x + a * dx / d;
    let my = c1.y + a * dy / d;
    Some((
        Point2::new(mx - h * dy / d, my + h * dx / d),
        Point2::new(mx + h * dy / d, my - h * dx / d),
    ))
}

/// Reachability as the intersection of the two annuli around the bases.
pub fn annulus(g: &LinkageGeometry, p: Point2) -> bool {
    let ok = |o: Point2, a: f64, b: f64| {
        let d = ((p.x - o.x).powi(2) + (p.y - o.y).powi(2)).sqrt();
        (a - b).abs() <= d && d <= a + b
    };
    ok(g.o1, g.l1, g.l3) && ok(g.o2, g.l2, g.l4)
}

pub type Seg = (Point2, Point2);

fn point_segment(p: Point2, (a, b): Seg) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    let s = if len2 == 0.0 {
        0.0
    } else {
        ((p - a).dot(ab) / len2).clamp(0.0, 1.0)
    };
    p.distance(a + ab * s)
}

fn segments_cross(s: Seg, t: Seg) -> bool {
    let side = |a: Point2, b: Point2, p: Point2| (b - a).cross(p - a);
    let d1 = side(t.0, t.1, s.0);
    let d2 = side(t.0, t.1, s.1);
    let d3 = side(s.0, s.1, t.0);
    let d4 = side(s.0, s.1, t.1);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

pub fn segment_distance(s: Seg, t: Seg) -> f64 {
    if segments_cross(s, t) {
        return 0.0;
    }
    point_segment(s.0, t)
        .min(point_segment(s.1, t))
        .min(point_segment(t.0, s))
        .min(point_segment(t.1, s))
}

/// The four links of a mechanism rebuilt from its joint angles and tip.
pub fn links(g: &LinkageGeometry, q: JointAngles, tip: Point2) -> [Seg; 4] {
    let (a1, a2) = elbows(g, q);
    [(g.o1, a1), (g.o2, a2), (a1, tip), (a2, tip)]
}

pub fn clearance(upper: &[Seg; 4], lower: &[Seg; 4]) -> f64 {
    upper
        .iter()
        .flat_map(|u| lower.iter().map(move |l| segment_distance(*u, *l)))
        .fold(f64::INFINITY, f64::min)
}

/// Time for θ̈ = k cos θ to go from rest at 0 to π/2, by fine fixed-step RK4.
pub fn rk4_time_to_quarter(k: f64) -> f64 {
    let f = |theta: f64, omega: f64| (omega, k * theta.cos());
    let h = 1e-6;
    let (mut theta, mut omega, mut t) = (0.0f64, 0.0f64, 0.0f64);
    let target = std::f64::consts::FRAC_PI_2;
    loop {
        let (k1t, k1w) = f(theta, omega);
        let (k2t, k2w) = f(theta + 0.5 * h * k1t, omega + 0.5 * h * k1w);
        let (k3t, k3w) = f(theta + 0.5 * h * k2t, omega + 0.5 * h * k2w);
        let (k4t, k4w) = f(theta + h * k3t, omega + h * k3w);
        let next = theta + h / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t);
        omega += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
        if next >= target {
            return t + h * (target - theta) / (next - theta);
        }
        theta = next;
        t += h;
    }
}

/// Holding threshold from the static balance m·g·d = 2·μs·Fn·r.
pub fn static_threshold(mass: f64, g: f64, offset: f64, mu_s: f64, patch_radius: f64) -> f64 {
    mass * g * offset / (2.0 * mu_s * patch_radius)
}
