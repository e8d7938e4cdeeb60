//! Lattice stand-in for the input metric: shortest paths over a regular
//! grid whose edge weights are midpoint metric lengths.

use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::cost::{Cost, Scale};
use crate::dijkstra::{EdgeCosts, Limits, Tree, Workspace};
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::lattice::{Grid, Stencil};
use crate::metric::path::{segment_length, Path};
use crate::metric::spec::{MetricKind, MetricSpec};

/// Full trees kept for repeated `dist` calls from the same source.
const TREE_CACHE: usize = 4;
/// Relative tolerance for the straight-segment pieces of `dist_ext`.
const EXT_RTOL: f64 = 1e-7;

/// Offsets whose first nonzero component is positive, and the map from
/// every offset to its position among them.
pub(crate) fn half_offsets(st: &Stencil) -> (Vec<usize>, Vec<usize>) {
    let positive = |o: &[i32; 3]| o.iter().find(|v| **v != 0).map(|v| *v > 0).unwrap_or(false);
    let half: Vec<usize> = (0..st.len()).filter(|&k| positive(&st.offsets[k])).collect();
    let pos = (0..st.len())
        .map(|k| {
            let j = if positive(&st.offsets[k]) { k } else { st.opposite[k] };
            half.iter().position(|&x| x == j).unwrap()
        })
        .collect();
    (half, pos)
}

/// Integer scale for lattice costs. Shortest paths are at most `1 + tol`
/// times the Euclidean diameter in density-weighted length; a factor four
/// covers midpoint samples above the validated density bound.
pub(crate) fn scale_for(max_density: f64, r: f64, d: usize, tol: f64) -> Scale {
    Scale::for_bound(max_density * 2.0 * r * d as f64 * 4.0 * (1.0 + tol))
}

pub struct LatticeOracle {
    pub spec: MetricSpec,
    pub grid: Grid,
    pub stencil: Stencil,
    pub tol_lat: f64,
    pub scale: Scale,
    /// Intervals per half axis, `R / h`.
    pub n_half: usize,
    /// Bounds of the length density per unit Euclidean length.
    pub density_bounds: (f64, f64),
    positive: Vec<bool>,
    half_pos: Vec<usize>,
    n_half_offsets: usize,
    costs: Vec<u64>,
    cache: Mutex<Vec<(usize, Arc<Tree>)>>,
}

impl std::fmt::Debug for LatticeOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LatticeOracle")
            .field("nodes", &self.grid.len())
            .field("h", &self.grid.h)
            .field("order", &self.stencil.order)
            .finish()
    }
}

impl EdgeCosts for LatticeOracle {
    fn grid(&self) -> &Grid {
        &self.grid
    }
    fn stencil(&self) -> &Stencil {
        &self.stencil
    }
    #[inline]
    fn cost(&self, node: usize, k: usize, nbr: usize) -> u64 {
        let base = if self.positive[k] { node } else { nbr };
        self.costs[base * self.n_half_offsets + self.half_pos[k]]
    }
}

/// Checks that `r / h` is an integer and returns it.
pub fn intervals(r: f64, h: f64) -> Result<usize> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::param("h", format!("spacing {h} must be positive")));
    }
    let n = (r / h).round();
    if n < 1.0 || ((n * h - r) / r).abs() > 1e-9 {
        return Err(Error::param("h", format!("spacing {h} does not divide R = {r}")));
    }
    Ok(n as usize)
}

impl LatticeOracle {
    pub fn build(spec: MetricSpec, h: f64, order: u32, node_budget: u64) -> Result<LatticeOracle> {
        let density_bounds = spec.validate()?;
        let n_half = intervals(spec.r, h)?;
        let stencil = Stencil::new(spec.d, order)?;
        let per_axis = 2 * n_half as u64 + 1;
        let nodes = per_axis.saturating_pow(spec.d as u32);
        if nodes > node_budget {
            return Err(Error::OverBudget {
                what: "metric lattice",
                required: nodes,
                budget: node_budget,
            });
        }
        let grid = Grid::cube(spec.d, spec.r, n_half);
        let (half, half_pos) = half_offsets(&stencil);
        let positive = (0..stencil.len()).map(|k| half.contains(&k)).collect();
        let scale = scale_for(density_bounds.1, spec.r, spec.d, stencil.tol_lat());
        let nh = half.len();
        let mut costs = vec![u64::MAX; grid.len() * nh];
        let err: Mutex<Option<Error>> = Mutex::new(None);
        costs.par_chunks_mut(nh).enumerate().for_each(|(i, row)| {
            let a = grid.point(i);
            for (j, &k) in half.iter().enumerate() {
                if grid.neighbor(i, stencil.offsets[k]).is_none() {
                    continue;
                }
                let o = stencil.offsets[k];
                let v = Point([o[0] as f64 * grid.h, o[1] as f64 * grid.h, o[2] as f64 * grid.h]);
                let mid = a + v * 0.5;
                let len = spec.vector_len(mid, v);
                if !(len > 0.0 && len.is_finite()) {
                    let e = match spec.kind {
                        MetricKind::Riemannian(_) => Error::NotPositiveDefinite {
                            point: mid.0,
                            min_eigenvalue: len * len / v.dot(v),
                        },
                        _ => Error::NonFiniteField { point: mid.0 },
                    };
                    err.lock().unwrap().get_or_insert(e);
                    continue;
                }
                row[j] = scale.to_cost(len).0;
            }
        });
        if let Some(e) = err.into_inner().unwrap() {
            return Err(e);
        }
        let tol_lat = stencil.tol_lat();
        Ok(LatticeOracle {
            spec,
            grid,
            stencil,
            tol_lat,
            scale,
            n_half,
            density_bounds,
            positive,
            half_pos,
            n_half_offsets: nh,
            costs,
            cache: Mutex::new(Vec::new()),
        })
    }

    pub fn h(&self) -> f64 {
        self.grid.h
    }

    pub fn snap(&self, p: Point) -> Result<usize> {
        self.grid.snap(p)
    }

    pub fn len_of(&self, c: u64) -> f64 {
        self.scale.to_len(Cost(c))
    }

    /// Weight of the lattice edge `a -> b` as a length.
    pub fn edge_weight(&self, a: usize, b: usize) -> Option<f64> {
        let ca = self.grid.coords(a);
        let cb = self.grid.coords(b);
        let off = [
            cb[0] as i32 - ca[0] as i32,
            cb[1] as i32 - ca[1] as i32,
            cb[2] as i32 - ca[2] as i32,
        ];
        let k = self.stencil.offsets.iter().position(|o| *o == off)?;
        Some(self.len_of(self.cost(a, k, b)))
    }

    /// Sum of integer edge costs along a node path.
    pub fn node_path_cost(&self, nodes: &[u32]) -> Option<u64> {
        let mut total = 0u64;
        for w in nodes.windows(2) {
            let (a, b) = (w[0] as usize, w[1] as usize);
            let ca = self.grid.coords(a);
            let cb = self.grid.coords(b);
            let off = [
                cb[0] as i32 - ca[0] as i32,
                cb[1] as i32 - ca[1] as i32,
                cb[2] as i32 - ca[2] as i32,
            ];
            let k = self.stencil.offsets.iter().position(|o| *o == off)?;
            total += self.cost(a, k, b);
        }
        Some(total)
    }

    /// Full shortest-path tree from node `s`, cached.
    pub fn tree(&self, s: usize) -> Arc<Tree> {
        if let Some((_, t)) = self.cache.lock().unwrap().iter().find(|(k, _)| *k == s) {
            return t.clone();
        }
        let mut ws = Workspace::new(self.grid.len());
        ws.run(self, &[(s, 0)], Limits::default());
        let t = Arc::new(ws.to_tree());
        let mut c = self.cache.lock().unwrap();
        if c.len() >= TREE_CACHE {
            c.remove(0);
        }
        c.push((s, t.clone()));
        t
    }

    /// Oracle distance between the nodes nearest to `x` and `y`.
    pub fn dist(&self, x: Point, y: Point) -> Result<f64> {
        let (a, b) = (self.snap(x)?, self.snap(y)?);
        Ok(self.len_of(self.tree(a).dist[b]))
    }

    /// Node-to-node cost with an early-stopping search.
    pub fn dist_nodes(&self, ws: &mut Workspace, a: usize, b: usize) -> u64 {
        ws.run(self, &[(a, 0)], Limits { targets: &[b], ..Default::default() });
        ws.dist(b).unwrap_or(u64::MAX)
    }

    /// Shortest node path between `a` and `b`, deterministic.
    pub fn geodesic_nodes(&self, ws: &mut Workspace, a: usize, b: usize) -> Vec<u32> {
        ws.run(self, &[(a, 0)], Limits { targets: &[b], ..Default::default() });
        ws.path_to(b).unwrap_or_default()
    }

    pub fn geodesic(&self, x: Point, y: Point) -> Result<Path> {
        let (a, b) = (self.snap(x)?, self.snap(y)?);
        let tree = self.tree(a);
        let nodes = tree.path_to(b).ok_or(Error::Disconnected { from: a, to: b })?;
        let pts = nodes.iter().map(|&i| self.grid.point(i as usize)).collect();
        Path::new(pts, self.len_of(tree.dist[b]))
    }

    /// Corners of the grid cell containing `p` (fewer on the boundary).
    pub fn cell_corners(&self, p: Point) -> Vec<usize> {
        let (c, _) = self.grid.locate(p);
        let mut out = Vec::with_capacity(8);
        for corner in 0..(1usize << self.grid.d) {
            let mut cc = c;
            for (a, v) in cc.iter_mut().enumerate().take(self.grid.d) {
                if corner >> a & 1 == 1 {
                    *v = (*v + 1).min(self.grid.dims[a] - 1);
                }
            }
            let i = self.grid.index(cc);
            if !out.contains(&i) {
                out.push(i);
            }
        }
        out
    }

    /// Distance between arbitrary points: the shorter of the straight
    /// segment and the best route `x -> corner -> lattice -> corner -> y`.
    pub fn dist_ext(&self, ws: &mut Workspace, x: Point, y: Point) -> Result<f64> {
        if !self.grid.contains(x) || !self.grid.contains(y) {
            let p = if self.grid.contains(x) { y } else { x };
            return Err(Error::OutsideBox { point: p.0, r: self.spec.r });
        }
        let direct = segment_length(&self.spec, x, y, EXT_RTOL);
        let cx = self.cell_corners(x);
        let cy = self.cell_corners(y);
        let sources: Vec<(usize, u64)> = cx
            .iter()
            .map(|&a| (a, self.scale.to_cost(segment_length(&self.spec, x, self.grid.point(a), EXT_RTOL)).0))
            .collect();
        let tail: Vec<f64> = cy
            .iter()
            .map(|&b| segment_length(&self.spec, self.grid.point(b), y, EXT_RTOL))
            .collect();
        let direct_cost = self.scale.to_cost(direct).0;
        ws.run(self, &sources, Limits { bound: Some(direct_cost), targets: &cy, clip: None });
        let mut best = direct;
        for (b, t) in cy.iter().zip(&tail) {
            if let Some(c) = ws.dist(*b) {
                best = best.min(self.len_of(c) + t);
            }
        }
        Ok(best)
    }

    /// `dist_ext` from `x` to every point of `ys` with one search.
    pub fn dist_ext_many(&self, ws: &mut Workspace, x: Point, ys: &[Point]) -> Result<Vec<f64>> {
        for p in std::iter::once(&x).chain(ys) {
            if !self.grid.contains(*p) {
                return Err(Error::OutsideBox { point: p.0, r: self.spec.r });
            }
        }
        let sources: Vec<(usize, u64)> = self
            .cell_corners(x)
            .iter()
            .map(|&a| (a, self.scale.to_cost(segment_length(&self.spec, x, self.grid.point(a), EXT_RTOL)).0))
            .collect();
        let corners: Vec<Vec<usize>> = ys.iter().map(|y| self.cell_corners(*y)).collect();
        let mut targets: Vec<usize> = corners.iter().flatten().copied().collect();
        targets.sort_unstable();
        targets.dedup();
        ws.run(self, &sources, Limits { bound: None, targets: &targets, clip: None });
        Ok(ys
            .iter()
            .zip(&corners)
            .map(|(y, cy)| {
                let mut best = segment_length(&self.spec, x, *y, EXT_RTOL);
                for &b in cy {
                    if let Some(c) = ws.dist(b) {
                        best = best.min(self.len_of(c) + segment_length(&self.spec, self.grid.point(b), *y, EXT_RTOL));
                    }
                }
                best
            })
            .collect())
    }
}
