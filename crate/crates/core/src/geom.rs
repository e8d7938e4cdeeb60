//! Points in R^2 or R^3 and the segment predicates used by the graph and
//! field builders. Two-dimensional points carry `z = 0`.

use std::ops::{Add, Mul, Sub};

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Point(pub [f64; 3]);

impl Point {
    pub const ORIGIN: Point = Point([0.0; 3]);

    pub fn new2(x: f64, y: f64) -> Self {
        Point([x, y, 0.0])
    }

    pub fn new3(x: f64, y: f64, z: f64) -> Self {
        Point([x, y, z])
    }

    pub fn from_slice(c: &[f64]) -> Self {
        let mut p = [0.0; 3];
        p[..c.len()].copy_from_slice(c);
        Point(p)
    }

    pub fn dot(self, o: Point) -> f64 {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dist(self, o: Point) -> f64 {
        (self - o).norm()
    }

    pub fn lerp(self, o: Point, t: f64) -> Point {
        self + (o - self) * t
    }

    pub fn cross(self, o: Point) -> Point {
        let [a, b, c] = self.0;
        let [x, y, z] = o.0;
        Point([b * z - c * y, c * x - a * z, a * y - b * x])
    }

    pub fn max_abs(self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

/// Parameter of the projection of `p` onto segment `ab`, clamped to [0, 1].
pub fn project_param(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return 0.0;
    }
    ((p - a).dot(ab) / len2).clamp(0.0, 1.0)
}

pub fn point_segment_dist(p: Point, a: Point, b: Point) -> f64 {
    let t = project_param(p, a, b);
    p.dist(a.lerp(b, t))
}

/// Minimum distance between segments `ab` and `cd` in R^3.
pub fn segment_segment_dist(a: Point, b: Point, c: Point, d: Point) -> f64 {
    let u = b - a;
    let v = d - c;
    let w = a - c;
    let (uu, uv, vv) = (u.dot(u), u.dot(v), v.dot(v));
    let (uw, vw) = (u.dot(w), v.dot(w));
    let den = uu * vv - uv * uv;
    let mut best = point_segment_dist(a, c, d)
        .min(point_segment_dist(b, c, d))
        .min(point_segment_dist(c, a, b))
        .min(point_segment_dist(d, a, b));
    // Interior-interior candidate; boundary cases are covered above.
    if den > 1e-300 * uu.max(1.0) * vv.max(1.0) {
        let s = (uv * vw - vv * uw) / den;
        let t = (uu * vw - uv * uw) / den;
        if (0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&t) {
            best = best.min((a + u * s).dist(c + v * t));
        }
    }
    best
}

/// Whether the open segments `ab` and `cd` share a point, up to `guard`.
/// Segments that share an endpoint are tested for overlap beyond it.
pub fn segments_touch(a: Point, b: Point, c: Point, d: Point, guard: f64) -> bool {
    let shared = [(a, c), (a, d), (b, c), (b, d)]
        .iter()
        .find(|(p, q)| p.dist(*q) <= guard)
        .copied();
    match shared {
        None => segment_segment_dist(a, b, c, d) <= guard,
        Some((p, _)) => {
            // Common endpoint: the segments touch elsewhere only if they are
            // collinear and point the same way from the shared vertex.
            let (pa, pb) = if p.dist(a) <= guard { (a, b) } else { (b, a) };
            let (_, qb) = if p.dist(c) <= guard { (c, d) } else { (d, c) };
            let u = pb - pa;
            let v = qb - pa;
            let (lu, lv) = (u.norm(), v.norm());
            if lu <= guard || lv <= guard {
                return false;
            }
            let sin = u.cross(v).norm() / (lu * lv);
            let cos = u.dot(v) / (lu * lv);
            cos > 0.0 && sin * lu.min(lv) <= guard
        }
    }
}

/// Integer orientation of `c` relative to the directed line `ab` (2D).
pub fn orient2(a: [i64; 2], b: [i64; 2], c: [i64; 2]) -> i128 {
    let (ax, ay) = (a[0] as i128, a[1] as i128);
    let (bx, by) = (b[0] as i128, b[1] as i128);
    let (cx, cy) = (c[0] as i128, c[1] as i128);
    (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
}

/// Proper crossing of integer segments `ab` and `cd`: they meet in a single
/// point interior to both. Collinear overlaps are not crossings.
pub fn proper_cross_i(a: [i64; 3], b: [i64; 3], c: [i64; 3], d: [i64; 3]) -> bool {
    let sub = |p: [i64; 3], q: [i64; 3]| [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
    let cross = |u: [i64; 3], v: [i64; 3]| {
        [
            u[1] as i128 * v[2] as i128 - u[2] as i128 * v[1] as i128,
            u[2] as i128 * v[0] as i128 - u[0] as i128 * v[2] as i128,
            u[0] as i128 * v[1] as i128 - u[1] as i128 * v[0] as i128,
        ]
    };
    let dot = |u: [i128; 3], v: [i64; 3]| u[0] * v[0] as i128 + u[1] * v[1] as i128 + u[2] * v[2] as i128;
    let u = sub(b, a);
    let v = sub(d, c);
    let n = cross(u, v);
    if n == [0, 0, 0] {
        return false;
    }
    // Coplanarity.
    if dot(n, sub(c, a)) != 0 {
        return false;
    }
    // Side tests within the common plane: c and d straddle ab, a and b straddle cd.
    let s1 = cross(u, sub(c, a));
    let s2 = cross(u, sub(d, a));
    let t1 = cross(v, sub(a, c));
    let t2 = cross(v, sub(b, c));
    let sgn = |x: [i128; 3]| {
        let k = x[0] * n[0] + x[1] * n[1] + x[2] * n[2];
        k.signum()
    };
    let (a1, a2, b1, b2) = (sgn(s1), sgn(s2), sgn(t1), sgn(t2));
    a1 * a2 < 0 && b1 * b2 < 0
}

/// Intersection point of two segments known to cross properly.
pub fn crossing_point(a: Point, b: Point, c: Point, d: Point) -> Point {
    let u = b - a;
    let v = d - c;
    let n = u.cross(v);
    let t = (c - a).cross(v).dot(n) / n.dot(n);
    a + u * t
}
