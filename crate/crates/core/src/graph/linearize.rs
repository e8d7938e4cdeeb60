//! Stage G4: replace every curved edge by a chain of straight segments cut
//! at metric arclength marks, with a short collar at each end.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{segments_touch, Point};
use crate::graph::partition::GridPartition;
use crate::graph::planar::{CurveGraph, VertexKind};
use crate::graph::spatial::near_pairs;
use crate::graph::weighted::{Edge, WeightedGraph};
use crate::metric::LengthDensity;

/// Quadrature panels per polyline segment.
const PANELS: usize = 16;

/// Cumulative metric arclength along each curved edge, sampled per panel.
#[derive(Clone, Debug)]
pub struct EdgeArcs {
    cum: Vec<Vec<f64>>,
}

impl EdgeArcs {
    pub fn new<M: LengthDensity + Sync + ?Sized>(m: &M, g3: &CurveGraph) -> EdgeArcs {
        let cum = g3
            .edges
            .par_iter()
            .map(|e| {
                let mut c = Vec::with_capacity(PANELS * (e.pts.len() - 1) + 1);
                let mut acc = 0.0;
                c.push(0.0);
                for w in e.pts.windows(2) {
                    let v = (w[1] - w[0]) * (1.0 / PANELS as f64);
                    for i in 0..PANELS {
                        let mid = w[0].lerp(w[1], (i as f64 + 0.5) / PANELS as f64);
                        acc += m.vector_len(mid, v);
                        c.push(acc);
                    }
                }
                c
            })
            .collect();
        EdgeArcs { cum }
    }

    pub fn len(&self, e: usize) -> f64 {
        *self.cum[e].last().unwrap()
    }

    pub fn max_len(&self) -> f64 {
        (0..self.cum.len()).map(|e| self.len(e)).fold(0.0, f64::max)
    }

    /// Point at arclength `t` along edge `e` of `g3`.
    pub fn point_at(&self, g3: &CurveGraph, e: usize, t: f64) -> Point {
        let c = &self.cum[e];
        let pts = &g3.edges[e].pts;
        let i = c.partition_point(|x| *x < t).clamp(1, c.len() - 1);
        let (lo, hi) = (c[i - 1], c[i]);
        let frac = if hi > lo { ((t - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 };
        let panel = i - 1;
        let (seg, sub) = (panel / PANELS, panel % PANELS);
        pts[seg].lerp(pts[seg + 1], (sub as f64 + frac) / PANELS as f64)
    }
}

/// Smallest Euclidean distance between two distinct points of `pts`.
pub fn min_separation(pts: &[Point], start_cell: f64) -> f64 {
    if pts.len() < 2 {
        return f64::INFINITY;
    }
    let mut cell = start_cell;
    loop {
        let mut map: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        let key = |p: Point| {
            [(p.0[0] / cell).floor() as i64, (p.0[1] / cell).floor() as i64, (p.0[2] / cell).floor() as i64]
        };
        for (i, p) in pts.iter().enumerate() {
            map.entry(key(*p)).or_default().push(i);
        }
        let mut best = f64::INFINITY;
        for (i, p) in pts.iter().enumerate() {
            let k = key(*p);
            for dz in -1..=1 {
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        if let Some(list) = map.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                            for &j in list {
                                if j > i {
                                    best = best.min(p.dist(pts[j]));
                                }
                            }
                        }
                    }
                }
            }
        }
        if best <= cell {
            return best;
        }
        cell *= 2.0;
    }
}

/// Default collar and subdivision count: `tau` is a twentieth of a lower
/// bound on the metric separation of distinct vertices, and `K` is the
/// smallest power of two keeping middle pieces at or below `eps / 128`.
pub fn choose_tau_k(g3: &CurveGraph, arcs: &EdgeArcs, density_min: f64, eps: f64, cell: f64) -> (f64, usize) {
    let sep = min_separation(&g3.vertices, cell);
    let tau = density_min * sep / 20.0;
    let need = ((arcs.max_len() - 2.0 * tau).max(0.0) * 128.0 / eps).ceil().max(1.0) as usize;
    (tau, need.next_power_of_two())
}

/// Builds the straight-edge graph with marks at `tau`, `tau + (l-2tau)/K`,
/// ..., `l - tau` along each edge. Weights are left at zero.
pub fn piecewise_linearize(
    g3: &CurveGraph,
    arcs: &EdgeArcs,
    part: &GridPartition,
    tau: f64,
    k: usize,
) -> Result<WeightedGraph> {
    if tau <= 0.0 || k == 0 {
        return Err(Error::param("tau/K", format!("need tau > 0 and K >= 1, got {tau} and {k}")));
    }
    let mut vertices = g3.vertices.clone();
    let mut kinds = g3.kinds.clone();
    let mut edges = Vec::with_capacity(g3.edges.len() * (k + 2));
    for (i, e) in g3.edges.iter().enumerate() {
        let l = arcs.len(i);
        if l <= 2.0 * tau {
            return Err(Error::Unsatisfiable {
                constraint: "collar",
                detail: format!("edge {i} has length {l:e} <= 2 tau = {:e}", 2.0 * tau),
            });
        }
        let mut prev = e.u;
        for j in 0..=k {
            let t = tau + (l - 2.0 * tau) * j as f64 / k as f64;
            let id = vertices.len() as u32;
            vertices.push(arcs.point_at(g3, i, t));
            kinds.push(VertexKind::Subdivision);
            edges.push(Edge { u: prev, v: id, w: 0.0, ell0: 0.0 });
            prev = id;
        }
        edges.push(Edge { u: prev, v: e.v, w: 0.0, ell0: 0.0 });
    }
    for e in edges.iter_mut() {
        e.ell0 = vertices[e.u as usize].dist(vertices[e.v as usize]);
    }
    Ok(WeightedGraph::new(g3.d, part.r, part.n_bar, part.m_bar, tau, k, vertices, kinds, edges))
}

/// Pairs of edges whose segments meet away from a shared endpoint, in
/// lexicographic order, plus the total count.
pub fn intersecting_pairs(vertices: &[Point], edges: &[Edge], guard: f64, limit: usize) -> (Vec<(usize, usize)>, usize) {
    let mut all = near_pairs(vertices, edges, guard, |i, j| {
        let (a, b) = (vertices[edges[i].u as usize], vertices[edges[i].v as usize]);
        let (c, d) = (vertices[edges[j].u as usize], vertices[edges[j].v as usize]);
        segments_touch(a, b, c, d, guard).then_some((i, j))
    });
    all.sort_unstable();
    let n = all.len();
    all.truncate(limit);
    (all, n)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearizeReport {
    pub tau: f64,
    pub k: usize,
    pub attempts: usize,
    pub max_arc: f64,
}

/// Linearizes with doubling retries: on any intersection `K` doubles and
/// `tau` halves, up to `max_attempts` tries.
pub fn linearize(
    g3: &CurveGraph,
    arcs: &EdgeArcs,
    part: &GridPartition,
    tau0: f64,
    k0: usize,
    max_attempts: usize,
) -> Result<(WeightedGraph, LinearizeReport)> {
    let guard = 1e-12 * part.r;
    let (mut tau, mut k) = (tau0, k0);
    let mut last = (0, 0);
    for attempt in 1..=max_attempts.max(1) {
        let g = piecewise_linearize(g3, arcs, part, tau, k)?;
        let (bad, _) = intersecting_pairs(&g.vertices, &g.edges, guard, 1);
        match bad.first() {
            None => {
                let rep = LinearizeReport { tau, k, attempts: attempt, max_arc: arcs.max_len() };
                return Ok((g, rep));
            }
            Some(&p) => last = p,
        }
        k *= 2;
        tau /= 2.0;
    }
    Err(Error::SegmentsIntersect { first: last.0, second: last.1, attempts: max_attempts })
}
