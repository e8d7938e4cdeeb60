//! Bucketed candidate search over segment pairs.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use crate::geom::{point_segment_dist, Point};
use crate::graph::weighted::Edge;

/// Evaluates `f(i, j)` with `i < j` once for every pair of edges whose
/// bounding boxes come within `reach` of each other, collecting the `Some`
/// results in a deterministic order.
pub fn near_pairs<T, F>(vertices: &[Point], edges: &[Edge], reach: f64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, usize) -> Option<T> + Sync,
{
    if edges.is_empty() {
        return Vec::new();
    }
    let seg = |e: &Edge| (vertices[e.u as usize], vertices[e.v as usize]);
    let mean = edges.iter().map(|e| seg(e).0.dist(seg(e).1)).sum::<f64>() / edges.len() as f64;
    let cell = (2.0 * mean).max(reach).max(f64::MIN_POSITIVE);
    let half = reach / 2.0;
    let key = |v: [f64; 3]| [(v[0] / cell).floor() as i64, (v[1] / cell).floor() as i64, (v[2] / cell).floor() as i64];
    let mut buckets: BTreeMap<[i64; 3], Vec<u32>> = BTreeMap::new();
    let mut lows = Vec::with_capacity(edges.len());
    for (i, e) in edges.iter().enumerate() {
        let (a, b) = seg(e);
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for k in 0..3 {
            lo[k] = a.0[k].min(b.0[k]) - half;
            hi[k] = a.0[k].max(b.0[k]) + half;
        }
        let (lo, hi) = (key(lo), key(hi));
        lows.push(lo);
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    buckets.entry([x, y, z]).or_default().push(i as u32);
                }
            }
        }
    }
    let lists: Vec<(&[i64; 3], &Vec<u32>)> = buckets.iter().collect();
    let found: Vec<Vec<T>> = lists
        .par_iter()
        .map(|(bk, list)| {
            let mut out = Vec::new();
            for x in 0..list.len() {
                for y in x + 1..list.len() {
                    let (i, j) = (list[x] as usize, list[y] as usize);
                    let (li, lj) = (lows[i], lows[j]);
                    // Each pair is visited only in its first common bucket.
                    if [li[0].max(lj[0]), li[1].max(lj[1]), li[2].max(lj[2])] != **bk {
                        continue;
                    }
                    if let Some(v) = f(i.min(j), i.max(j)) {
                        out.push(v);
                    }
                }
            }
            out
        })
        .collect();
    found.into_iter().flatten().collect()
}

/// Nearest-segment queries over a fixed set of straight edges.
#[derive(Clone, Debug)]
pub struct SegmentIndex {
    cell: f64,
    bins: HashMap<[i64; 3], Vec<u32>>,
    segs: Vec<(Point, Point)>,
    lo: [i64; 3],
    hi: [i64; 3],
}

impl SegmentIndex {
    pub fn new(vertices: &[Point], edges: &[Edge], cell: f64) -> SegmentIndex {
        let key = |v: f64| (v / cell).floor() as i64;
        let mut bins: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
        let mut segs = Vec::with_capacity(edges.len());
        let (mut glo, mut ghi) = ([i64::MAX; 3], [i64::MIN; 3]);
        for (i, e) in edges.iter().enumerate() {
            let (a, b) = (vertices[e.u as usize], vertices[e.v as usize]);
            segs.push((a, b));
            let mut lo = [0i64; 3];
            let mut hi = [0i64; 3];
            for k in 0..3 {
                lo[k] = key(a.0[k].min(b.0[k]));
                hi[k] = key(a.0[k].max(b.0[k]));
                glo[k] = glo[k].min(lo[k]);
                ghi[k] = ghi[k].max(hi[k]);
            }
            for z in lo[2]..=hi[2] {
                for y in lo[1]..=hi[1] {
                    for x in lo[0]..=hi[0] {
                        bins.entry([x, y, z]).or_default().push(i as u32);
                    }
                }
            }
        }
        SegmentIndex { cell, bins, segs, lo: glo, hi: ghi }
    }

    /// Distance to the nearest segment and its lowest id, by rings of
    /// cells around `p`.
    pub fn nearest(&self, p: Point) -> Option<(f64, u32)> {
        if self.segs.is_empty() {
            return None;
        }
        let c = [0, 1, 2].map(|k| (p.0[k] / self.cell).floor() as i64);
        let reach = (0..3)
            .map(|k| (c[k] - self.lo[k]).abs().max((self.hi[k] - c[k]).abs()))
            .max()
            .unwrap();
        let mut best: Option<(f64, u32)> = None;
        for ring in 0..=reach {
            let r = |k: usize| (c[k] - ring).max(self.lo[k])..=(c[k] + ring).min(self.hi[k]);
            for z in r(2) {
                for y in r(1) {
                    for x in r(0) {
                        let edge = [x - c[0], y - c[1], z - c[2]].iter().map(|v| v.abs()).max().unwrap();
                        if edge != ring {
                            continue;
                        }
                        for &i in self.bins.get(&[x, y, z]).map(|v| v.as_slice()).unwrap_or(&[]) {
                            let (a, b) = self.segs[i as usize];
                            let r = point_segment_dist(p, a, b);
                            if best.is_none_or(|(bd, bi)| r < bd || (r == bd && i < bi)) {
                                best = Some((r, i));
                            }
                        }
                    }
                }
            }
            if let Some((bd, _)) = best {
                if bd <= ring as f64 * self.cell {
                    break;
                }
            }
        }
        best
    }
}

/// Fixed points bucketed for radius queries.
#[derive(Clone, Debug)]
pub struct PointIndex {
    cell: f64,
    bins: HashMap<[i64; 3], Vec<u32>>,
    pts: Vec<Point>,
}

impl PointIndex {
    pub fn new(pts: &[Point], cell: f64) -> PointIndex {
        let mut bins: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
        for (i, p) in pts.iter().enumerate() {
            bins.entry(p.0.map(|v| (v / cell).floor() as i64)).or_default().push(i as u32);
        }
        PointIndex { cell, bins, pts: pts.to_vec() }
    }

    /// Ids of the points within `radius` of `p`, ascending.
    pub fn within(&self, p: Point, radius: f64) -> Vec<u32> {
        let lo = p.0.map(|v| ((v - radius) / self.cell).floor() as i64);
        let hi = p.0.map(|v| ((v + radius) / self.cell).floor() as i64);
        let mut out = Vec::new();
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    if let Some(list) = self.bins.get(&[x, y, z]) {
                        out.extend(list.iter().copied().filter(|&i| self.pts[i as usize].dist(p) <= radius));
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::segment_segment_dist;

    #[test]
    fn finds_every_close_pair_once() {
        let mut v = Vec::new();
        let mut e = Vec::new();
        for i in 0..60u32 {
            let t = i as f64;
            v.push(Point::new2((t * 0.77).sin(), (t * 1.31).cos()));
            v.push(Point::new2((t * 0.77).sin() + 0.05 * (t * 2.1).cos(), (t * 1.31).cos() + 0.07 * t.sin()));
            e.push(Edge { u: 2 * i, v: 2 * i + 1, w: 0.0, ell0: 0.0 });
        }
        let reach = 0.1;
        let close = |i: usize, j: usize| {
            let (a, b) = (v[e[i].u as usize], v[e[i].v as usize]);
            let (c, d) = (v[e[j].u as usize], v[e[j].v as usize]);
            segment_segment_dist(a, b, c, d) <= reach
        };
        let mut got = near_pairs(&v, &e, reach, |i, j| close(i, j).then_some((i, j)));
        got.sort_unstable();
        let mut want = Vec::new();
        for i in 0..e.len() {
            for j in i + 1..e.len() {
                if close(i, j) {
                    want.push((i, j));
                }
            }
        }
        assert!(!want.is_empty());
        assert_eq!(got, want);
    }

    #[test]
    fn radius_queries_match_brute_force() {
        let pts: Vec<Point> = (0..300).map(|i| Point::new2((i as f64 * 0.37).sin(), (i as f64 * 0.91).cos())).collect();
        let idx = PointIndex::new(&pts, 0.05);
        let q = Point::new2(0.1, -0.2);
        let want: Vec<u32> = (0..300).filter(|&i| pts[i as usize].dist(q) <= 0.3).collect();
        assert!(!want.is_empty());
        assert_eq!(idx.within(q, 0.3), want);
    }

    #[test]
    fn nearest_segment_matches_brute_force() {
        let v: Vec<Point> = (0..40).map(|i| Point::new2((i as f64 * 0.77).sin(), (i as f64 * 1.31).cos())).collect();
        let e: Vec<Edge> = (0..20u32).map(|i| Edge { u: 2 * i, v: 2 * i + 1, w: 0.0, ell0: 0.0 }).collect();
        for cell in [0.01, 0.1, 1.0] {
            let idx = SegmentIndex::new(&v, &e, cell);
            for j in 0..200 {
                let p = Point::new2((j as f64 * 0.123).sin() * 1.5, (j as f64 * 0.456).cos() * 1.5);
                let mut want = (f64::INFINITY, 0u32);
                for (i, s) in e.iter().enumerate() {
                    let r = point_segment_dist(p, v[s.u as usize], v[s.v as usize]);
                    if r < want.0 {
                        want = (r, i as u32);
                    }
                }
                assert_eq!(idx.nearest(p), Some(want));
            }
        }
    }
}
