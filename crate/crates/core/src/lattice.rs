//! Regular node grids and neighbour stencils.

use crate::error::{Error, Result};
use crate::geom::Point;

/// Axis-aligned regular grid. Nodes are indexed with x varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub d: usize,
    pub dims: [usize; 3],
    pub h: f64,
    pub origin: Point,
}

impl Grid {
    /// Grid over [-r, r]^d with `n_half` intervals per half axis.
    pub fn cube(d: usize, r: f64, n_half: usize) -> Grid {
        let n = 2 * n_half + 1;
        let mut dims = [1; 3];
        for v in dims.iter_mut().take(d) {
            *v = n;
        }
        let mut origin = [0.0; 3];
        for v in origin.iter_mut().take(d) {
            *v = -r;
        }
        Grid {
            d,
            dims,
            h: r / n_half as f64,
            origin: Point(origin),
        }
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let x = idx % self.dims[0];
        let r = idx / self.dims[0];
        [x, r % self.dims[1], r / self.dims[1]]
    }

    pub fn index(&self, c: [usize; 3]) -> usize {
        c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])
    }

    pub fn point(&self, idx: usize) -> Point {
        self.point_of(self.coords(idx))
    }

    pub fn point_of(&self, c: [usize; 3]) -> Point {
        let mut p = self.origin;
        for a in 0..self.d {
            p.0[a] += c[a] as f64 * self.h;
        }
        p
    }

    pub fn upper(&self) -> Point {
        let mut p = self.origin;
        for a in 0..self.d {
            p.0[a] += (self.dims[a] - 1) as f64 * self.h;
        }
        p
    }

    pub fn contains(&self, p: Point) -> bool {
        let slack = 1e-9 * self.h;
        let hi = self.upper();
        (0..self.d).all(|a| p.0[a] >= self.origin.0[a] - slack && p.0[a] <= hi.0[a] + slack)
    }

    /// Nearest node to `p`; ties round half away from the origin corner.
    pub fn snap(&self, p: Point) -> Result<usize> {
        if !self.contains(p) || p.0.iter().any(|v| !v.is_finite()) {
            return Err(Error::OutsideBox {
                point: p.0,
                r: -self.origin.0[0],
            });
        }
        let mut c = [0usize; 3];
        for a in 0..self.d {
            let t = ((p.0[a] - self.origin.0[a]) / self.h).round();
            c[a] = (t.max(0.0) as usize).min(self.dims[a] - 1);
        }
        Ok(self.index(c))
    }

    pub fn neighbor(&self, idx: usize, off: [i32; 3]) -> Option<usize> {
        let c = self.coords(idx);
        let mut n = [0usize; 3];
        for a in 0..3 {
            let v = c[a] as i64 + off[a] as i64;
            if v < 0 || v >= self.dims[a] as i64 {
                return None;
            }
            n[a] = v as usize;
        }
        Some(self.index(n))
    }

    /// Lower cell corner and local coordinates in [0, 1]^d for interpolation.
    pub fn locate(&self, p: Point) -> ([usize; 3], [f64; 3]) {
        let mut c = [0usize; 3];
        let mut t = [0.0; 3];
        for a in 0..self.d {
            let u = ((p.0[a] - self.origin.0[a]) / self.h).max(0.0);
            let top = self.dims[a].saturating_sub(2);
            let i = (u.floor() as usize).min(top);
            c[a] = i;
            t[a] = if self.dims[a] == 1 { 0.0 } else { (u - i as f64).min(1.0) };
        }
        (c, t)
    }

    /// Multilinear interpolation of nodal `values` at `p`.
    pub fn interp(&self, values: &[f64], p: Point) -> f64 {
        let (c, t) = self.locate(p);
        let mut acc = 0.0;
        for corner in 0..(1usize << self.d) {
            let mut w = 1.0;
            let mut cc = c;
            for a in 0..self.d {
                if corner >> a & 1 == 1 {
                    w *= t[a];
                    cc[a] = (cc[a] + 1).min(self.dims[a] - 1);
                } else {
                    w *= 1.0 - t[a];
                }
            }
            if w != 0.0 {
                acc += w * values[self.index(cc)];
            }
        }
        acc
    }
}

/// Neighbour offsets of a lattice stencil.
#[derive(Clone, Debug, PartialEq)]
pub struct Stencil {
    pub d: usize,
    pub order: u32,
    pub offsets: Vec<[i32; 3]>,
    /// Euclidean length of each offset in units of the spacing.
    pub lens: Vec<f64>,
    /// Index of the opposite offset.
    pub opposite: Vec<usize>,
}

fn gcd(a: i32, b: i32) -> i32 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl Stencil {
    /// Order 1: axis steps. Order 2: all of {-1,0,1}^d. Order 3: primitive
    /// offsets with max component 2 (16 neighbours in the plane).
    pub fn new(d: usize, order: u32) -> Result<Stencil> {
        if !(2..=3).contains(&d) {
            return Err(Error::param("d", format!("dimension {d} is not 2 or 3")));
        }
        if !(1..=3).contains(&order) {
            return Err(Error::param("stencil", format!("order {order} is not 1, 2 or 3")));
        }
        let m: i32 = if order == 3 { 2 } else { 1 };
        let zr = if d == 3 { -m..=m } else { 0..=0 };
        let mut offsets = Vec::new();
        for z in zr {
            for y in -m..=m {
                for x in -m..=m {
                    let o = [x, y, z];
                    if o == [0, 0, 0] {
                        continue;
                    }
                    let nz = o.iter().filter(|v| **v != 0).count();
                    if order == 1 && nz != 1 {
                        continue;
                    }
                    if gcd(gcd(x, y), z) != 1 {
                        continue;
                    }
                    offsets.push(o);
                }
            }
        }
        let lens = offsets
            .iter()
            .map(|o| ((o[0] * o[0] + o[1] * o[1] + o[2] * o[2]) as f64).sqrt())
            .collect();
        let opposite = offsets
            .iter()
            .map(|o| {
                offsets
                    .iter()
                    .position(|q| q[0] == -o[0] && q[1] == -o[1] && q[2] == -o[2])
                    .expect("stencils are symmetric")
            })
            .collect();
        Ok(Stencil {
            d,
            order,
            offsets,
            lens,
            opposite,
        })
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Largest Chebyshev extent of an offset.
    pub fn reach(&self) -> usize {
        if self.order == 3 {
            2
        } else {
            1
        }
    }

    /// Worst-case relative overestimate of Euclidean length by stencil paths:
    /// one over the inradius of the convex hull of the unit offsets.
    pub fn tol_lat(&self) -> f64 {
        let u: Vec<Point> = self
            .offsets
            .iter()
            .zip(&self.lens)
            .map(|(o, l)| Point([o[0] as f64 / l, o[1] as f64 / l, o[2] as f64 / l]))
            .collect();
        let mut inradius = f64::INFINITY;
        let facet = |n: Point, base: Point| -> Option<f64> {
            let nn = n.norm();
            if nn < 1e-12 {
                return None;
            }
            let n = n * (1.0 / nn);
            let c = n.dot(base);
            let (n, c) = if c < 0.0 { (n * -1.0, -c) } else { (n, c) };
            if c < 1e-12 {
                return None;
            }
            u.iter().all(|p| n.dot(*p) <= c + 1e-12).then_some(c)
        };
        if self.d == 2 {
            for i in 0..u.len() {
                for j in i + 1..u.len() {
                    let t = u[j] - u[i];
                    if let Some(c) = facet(Point([-t.0[1], t.0[0], 0.0]), u[i]) {
                        inradius = inradius.min(c);
                    }
                }
            }
        } else {
            for i in 0..u.len() {
                for j in i + 1..u.len() {
                    for k in j + 1..u.len() {
                        let n = (u[j] - u[i]).cross(u[k] - u[i]);
                        if let Some(c) = facet(n, u[i]) {
                            inradius = inradius.min(c);
                        }
                    }
                }
            }
        }
        1.0 / inradius - 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stencil_sizes() {
        assert_eq!(Stencil::new(2, 1).unwrap().len(), 4);
        assert_eq!(Stencil::new(2, 2).unwrap().len(), 8);
        assert_eq!(Stencil::new(2, 3).unwrap().len(), 16);
        assert_eq!(Stencil::new(3, 1).unwrap().len(), 6);
        assert_eq!(Stencil::new(3, 2).unwrap().len(), 26);
        assert!(Stencil::new(4, 2).is_err());
    }

    #[test]
    fn anisotropy_bounds() {
        let t1 = Stencil::new(2, 1).unwrap().tol_lat();
        let t2 = Stencil::new(2, 2).unwrap().tol_lat();
        let t3 = Stencil::new(2, 3).unwrap().tol_lat();
        assert!((t1 - (2f64.sqrt() - 1.0)).abs() < 1e-12);
        let half_gap = std::f64::consts::PI / 8.0;
        assert!((t2 - (1.0 / half_gap.cos() - 1.0)).abs() < 1e-12);
        // Widest gap of the 16-neighbour stencil lies between (1,0) and (2,1).
        let half_gap = 0.5f64.atan() / 2.0;
        assert!((t3 - (1.0 / half_gap.cos() - 1.0)).abs() < 1e-12);
        assert!((t3 - 0.0275).abs() < 1e-3);
        let t31 = Stencil::new(3, 1).unwrap().tol_lat();
        assert!((t31 - (3f64.sqrt() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn grid_indexing_round_trip() {
        let g = Grid::cube(3, 1.0, 2);
        assert_eq!(g.len(), 125);
        for i in [0, 7, 63, 124] {
            assert_eq!(g.index(g.coords(i)), i);
        }
        let p = g.point(g.index([4, 0, 2]));
        assert_eq!(p, Point::new3(1.0, -1.0, 0.0));
        assert_eq!(g.snap(Point::new3(0.26, -0.74, 0.1)).unwrap(), g.index([3, 1, 2]));
        assert!(g.snap(Point::new3(1.2, 0.0, 0.0)).is_err());
    }

    #[test]
    fn interpolation_is_exact_on_affine_data() {
        let g = Grid::cube(2, 1.0, 4);
        let v: Vec<f64> = (0..g.len())
            .map(|i| {
                let p = g.point(i);
                2.0 * p.0[0] - p.0[1] + 0.5
            })
            .collect();
        let p = Point::new2(0.13, -0.71);
        assert!((g.interp(&v, p) - (0.26 + 0.71 + 0.5)).abs() < 1e-12);
        assert!((g.interp(&v, Point::new2(1.0, 1.0)) - 1.5).abs() < 1e-12);
    }
}
