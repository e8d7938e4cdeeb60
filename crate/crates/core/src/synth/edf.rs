//! Euclidean distance from every node of the field lattice to the edge set,
//! the nearest edge, and the blended edge bump value.

use rayon::prelude::*;

use crate::geom::{point_segment_dist, Point};
use crate::graph::WeightedGraph;
use crate::lattice::Grid;
use crate::synth::field::smoothstep;

pub const NO_EDGE: u32 = u32::MAX;

/// Slab thickness (in nodes along the last axis) for parallel rasterization.
const SLAB: usize = 16;

/// Bump profile: 1 within `eta / 2` of the edge, smoothstep down to 0 at `eta`.
pub fn bump_weight(r: f64, eta: f64) -> f64 {
    if r <= eta / 2.0 {
        1.0
    } else if r >= eta {
        0.0
    } else {
        1.0 - smoothstep((r - eta / 2.0) / (eta / 2.0))
    }
}

/// Per-edge bump cores `log(w_e / ell0(e))` and the tube radius.
#[derive(Clone, Copy, Debug)]
pub struct BumpSpec<'a> {
    pub eta: f64,
    pub cores: &'a [f64],
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeDistanceField {
    pub grid: Grid,
    /// Distances are clamped to this value.
    pub cap: f64,
    pub dist: Vec<f64>,
    /// Lowest-id edge at `dist`, or `NO_EDGE` when none is closer than `cap`.
    pub nearest: Vec<u32>,
    /// `sum_e b_e c_e / max(1, sum_e b_e)` with `b_e` the bump profile at
    /// this node's distance to `e` and `c_e` its core; zero without cores.
    pub bump: Vec<f64>,
    /// Largest number of tubes of radius `eta` meeting at one node.
    pub max_tubes: usize,
}

/// Parameter interval where `a + t (b - a)` stays within `cap` of `y`.
fn coord_window(a: f64, b: f64, y: f64, cap: f64) -> (f64, f64) {
    let d = b - a;
    if d == 0.0 {
        return if (a - y).abs() <= cap { (0.0, 1.0) } else { (1.0, 0.0) };
    }
    let (t0, t1) = ((y - cap - a) / d, (y + cap - a) / d);
    (t0.min(t1).max(0.0), t0.max(t1).min(1.0))
}

impl EdgeDistanceField {
    pub fn build(g: &WeightedGraph, grid: Grid, cap: f64, bumps: Option<BumpSpec<'_>>) -> EdgeDistanceField {
        let d = grid.d;
        let last = d - 1;
        let h = grid.h;
        let o = grid.origin.0;
        let dims = grid.dims;
        let n_slabs = dims[last].div_ceil(SLAB);
        // Node index range of each edge's bounding box inflated by `cap`.
        let boxes: Vec<([usize; 3], [usize; 3])> = g
            .edges
            .iter()
            .map(|e| {
                let (a, b) = (g.vertices[e.u as usize], g.vertices[e.v as usize]);
                let mut lo = [0usize; 3];
                let mut hi = [0usize; 3];
                for k in 0..d {
                    let l = ((a.0[k].min(b.0[k]) - cap - o[k]) / h).ceil().max(0.0);
                    let u = ((a.0[k].max(b.0[k]) + cap - o[k]) / h).floor().min((dims[k] - 1) as f64);
                    if u < l {
                        (lo[k], hi[k]) = (1, 0);
                    } else {
                        (lo[k], hi[k]) = (l as usize, u as usize);
                    }
                }
                (lo, hi)
            })
            .collect();
        let mut bins: Vec<Vec<u32>> = vec![Vec::new(); n_slabs];
        for (i, (lo, hi)) in boxes.iter().enumerate() {
            if (0..d).any(|k| lo[k] > hi[k]) {
                continue;
            }
            for s in lo[last] / SLAB..=hi[last] / SLAB {
                bins[s].push(i as u32);
            }
        }
        let per_slab: usize = (0..last).map(|k| dims[k]).product::<usize>() * SLAB;
        let n = grid.len();
        let mut dist = vec![cap; n];
        let mut nearest = vec![NO_EDGE; n];
        let mut bump = vec![0.0; n];
        let max_tubes = dist
            .par_chunks_mut(per_slab)
            .zip(nearest.par_chunks_mut(per_slab))
            .zip(bump.par_chunks_mut(per_slab))
            .enumerate()
            .map(|(s, ((dist, near), num))| {
                let local_len = if bumps.is_some() { dist.len() } else { 0 };
                let mut den = vec![0.0; local_len];
                let mut count = vec![0u32; local_len];
                let base = s * SLAB;
                for &ei in &bins[s] {
                    let e = g.edges[ei as usize];
                    let (a, b) = (g.vertices[e.u as usize], g.vertices[e.v as usize]);
                    let (lo, hi) = boxes[ei as usize];
                    let (l_lo, l_hi) = (lo[last].max(base), hi[last].min(base + SLAB - 1));
                    // Rows: all coordinates except x fixed.
                    let (m_lo, m_hi) = if d == 3 { (lo[1], hi[1]) } else { (0, 0) };
                    for ll in l_lo..=l_hi {
                        for mid in m_lo..=m_hi {
                            let mut c = [0usize; 3];
                            c[last] = ll;
                            if d == 3 {
                                c[1] = mid;
                            }
                            let mut t = (0.0f64, 1.0f64);
                            for k in 1..d {
                                let y = o[k] + c[k] as f64 * h;
                                let w = coord_window(a.0[k], b.0[k], y, cap);
                                t = (t.0.max(w.0), t.1.min(w.1));
                            }
                            if t.0 > t.1 {
                                continue;
                            }
                            let (x0, x1) = (a.0[0] + t.0 * (b.0[0] - a.0[0]), a.0[0] + t.1 * (b.0[0] - a.0[0]));
                            let xa = ((x0.min(x1) - cap - o[0]) / h).ceil().max(lo[0] as f64) as usize;
                            let xb = ((x0.max(x1) + cap - o[0]) / h).floor().min(hi[0] as f64);
                            if xb < xa as f64 {
                                continue;
                            }
                            for x in xa..=xb as usize {
                                c[0] = x;
                                let p = Point([o[0] + x as f64 * h, o[1] + c[1] as f64 * h, o[2] + c[2] as f64 * h]);
                                let p = if d == 2 { Point([p.0[0], p.0[1], 0.0]) } else { p };
                                let r = point_segment_dist(p, a, b);
                                if r > cap {
                                    continue;
                                }
                                let local = grid.index(c) - s * per_slab;
                                if r < dist[local] {
                                    dist[local] = r;
                                    near[local] = ei;
                                }
                                if let Some(bs) = bumps {
                                    let wgt = bump_weight(r, bs.eta);
                                    if r < bs.eta {
                                        count[local] += 1;
                                    }
                                    if wgt > 0.0 {
                                        num[local] += wgt * bs.cores[ei as usize];
                                        den[local] += wgt;
                                    }
                                }
                            }
                        }
                    }
                }
                if bumps.is_some() {
                    for (v, w) in num.iter_mut().zip(&den) {
                        *v /= w.max(1.0);
                    }
                }
                count.into_iter().max().unwrap_or(0) as usize
            })
            .max()
            .unwrap_or(0);
        EdgeDistanceField { grid, cap, dist, nearest, bump, max_tubes }
    }

    /// Distance from node `i` to the nearer endpoint of its nearest edge.
    pub fn endpoint_dist(&self, g: &WeightedGraph, i: usize) -> Option<f64> {
        let e = *g.edges.get(self.nearest[i] as usize)?;
        let p = self.grid.point(i);
        Some(p.dist(g.vertices[e.u as usize]).min(p.dist(g.vertices[e.v as usize])))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, VertexKind};

    fn graph(segs: &[((f64, f64), (f64, f64))]) -> WeightedGraph {
        let mut v = Vec::new();
        let mut e = Vec::new();
        for (i, (a, b)) in segs.iter().enumerate() {
            v.push(Point::new2(a.0, a.1));
            v.push(Point::new2(b.0, b.1));
            let ell = v[2 * i].dist(v[2 * i + 1]);
            e.push(Edge { u: 2 * i as u32, v: 2 * i as u32 + 1, w: ell, ell0: ell });
        }
        let kinds = vec![VertexKind::Net; v.len()];
        WeightedGraph::new(2, 1.0, 1, 1, 0.0, 1, v, kinds, e)
    }

    #[test]
    fn distances_above_and_beyond_a_segment() {
        let g = graph(&[((-0.5, 0.0), (0.5, 0.0))]);
        let grid = Grid::cube(2, 1.0, 40);
        let f = EdgeDistanceField::build(&g, grid.clone(), 0.5, None);
        let above = grid.snap(Point::new2(0.1, 0.3)).unwrap();
        assert!((f.dist[above] - 0.3).abs() < 1e-12);
        assert_eq!(f.nearest[above], 0);
        let beyond = grid.snap(Point::new2(0.8, 0.4)).unwrap();
        assert!((f.dist[beyond] - 0.5).abs() < 1e-12);
        let far = grid.snap(Point::new2(0.0, 0.9)).unwrap();
        assert_eq!((f.dist[far], f.nearest[far]), (0.5, NO_EDGE));
        assert!((f.endpoint_dist(&g, above).unwrap() - 0.3f64.hypot(0.4)).abs() < 1e-12);
    }

    #[test]
    fn matches_brute_force_and_dense_sampling() {
        let g = graph(&[((-0.7, -0.2), (0.4, 0.63)), ((0.1, -0.9), (0.35, 0.2)), ((-0.3, 0.5), (0.9, 0.45))]);
        let grid = Grid::cube(2, 1.0, 50);
        let cap = 0.3;
        let f = EdgeDistanceField::build(&g, grid.clone(), cap, None);
        let pitch = 1e-3;
        for i in 0..grid.len() {
            let p = grid.point(i);
            let mut best = (cap, NO_EDGE);
            let mut sampled = f64::INFINITY;
            for (k, e) in g.edges.iter().enumerate() {
                let (a, b) = (g.vertices[e.u as usize], g.vertices[e.v as usize]);
                let r = point_segment_dist(p, a, b);
                if r < best.0 {
                    best = (r, k as u32);
                }
                let n = (a.dist(b) / pitch).ceil() as usize;
                for j in 0..=n {
                    sampled = sampled.min(p.dist(a.lerp(b, j as f64 / n as f64)));
                }
            }
            assert_eq!((f.dist[i], f.nearest[i]), best, "node {i}");
            if sampled < cap {
                assert!(f.dist[i] <= sampled && sampled - f.dist[i] <= 2.0 * pitch);
            }
        }
    }

    #[test]
    fn distance_is_lipschitz_across_neighbours() {
        let g = graph(&[((-0.7, -0.2), (0.4, 0.63)), ((0.1, -0.9), (0.35, 0.2))]);
        let grid = Grid::cube(2, 1.0, 64);
        let f = EdgeDistanceField::build(&g, grid.clone(), 0.4, None);
        for i in 0..grid.len() {
            for off in [[1, 0, 0], [0, 1, 0], [1, 1, 0]] {
                if let Some(j) = grid.neighbor(i, off) {
                    assert!((f.dist[i] - f.dist[j]).abs() <= grid.h * 2f64.sqrt() + 1e-12);
                }
            }
        }
    }

    #[test]
    fn bumps_blend_without_double_counting() {
        let g = graph(&[((-0.5, 0.0), (0.0, 0.0)), ((0.0, 0.0), (0.5, 0.0)), ((-0.5, 0.5), (0.5, 0.5))]);
        let grid = Grid::cube(2, 1.0, 40);
        let cores = [1.0, 3.0, -0.5];
        let f = EdgeDistanceField::build(&g, grid.clone(), 0.2, Some(BumpSpec { eta: 0.1, cores: &cores }));
        let at = |x: f64, y: f64| f.bump[grid.snap(Point::new2(x, y)).unwrap()];
        assert_eq!(at(-0.25, 0.0), 1.0);
        assert_eq!(at(0.25, 0.025), 3.0);
        // Both tubes at full weight at the shared vertex: the average.
        assert_eq!(at(0.0, 0.0), 2.0);
        assert_eq!(f.max_tubes, 2);
        assert_eq!(at(0.25, 0.5), -0.5);
        assert_eq!(at(0.25, 0.25), 0.0);
        // Halfway through the transition band.
        let v = at(-0.25, 0.075);
        assert!((v - 0.5).abs() < 1e-12, "{v}");
    }
}
