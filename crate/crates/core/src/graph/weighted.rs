//! The embedded weighted graph: straight edges with metric weights.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::dijkstra::Workspace;
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::graph::planar::VertexKind;
use crate::metric::LatticeOracle;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub u: u32,
    pub v: u32,
    /// Metric distance between the endpoints.
    pub w: f64,
    /// Euclidean length of the segment.
    pub ell0: f64,
}

/// Compressed adjacency: neighbours of `v` are `nbrs[start[v]..start[v+1]]`.
#[derive(Clone, Debug)]
struct Adjacency {
    start: Vec<u32>,
    nbrs: Vec<(u32, u32)>,
}

#[derive(Clone, Debug, Default)]
pub struct WeightedGraph {
    pub d: usize,
    pub r: f64,
    pub n_bar: usize,
    pub m_bar: usize,
    pub tau: f64,
    pub k: usize,
    pub vertices: Vec<Point>,
    pub kinds: Vec<VertexKind>,
    pub edges: Vec<Edge>,
    adj: OnceLock<Adjacency>,
}

impl PartialEq for WeightedGraph {
    fn eq(&self, o: &Self) -> bool {
        self.d == o.d
            && self.r == o.r
            && self.n_bar == o.n_bar
            && self.m_bar == o.m_bar
            && self.tau == o.tau
            && self.k == o.k
            && self.vertices == o.vertices
            && self.kinds == o.kinds
            && self.edges == o.edges
    }
}

/// f64 key ordered by `total_cmp`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Key {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&o.0)
    }
}

impl WeightedGraph {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        d: usize,
        r: f64,
        n_bar: usize,
        m_bar: usize,
        tau: f64,
        k: usize,
        vertices: Vec<Point>,
        kinds: Vec<VertexKind>,
        edges: Vec<Edge>,
    ) -> WeightedGraph {
        WeightedGraph {
            d,
            r,
            n_bar,
            m_bar,
            tau,
            k,
            vertices,
            kinds,
            edges,
            adj: OnceLock::new(),
        }
    }

    fn adjacency(&self) -> &Adjacency {
        self.adj.get_or_init(|| {
            let n = self.vertices.len();
            let mut count = vec![0u32; n + 1];
            for e in &self.edges {
                count[e.u as usize + 1] += 1;
                count[e.v as usize + 1] += 1;
            }
            for i in 0..n {
                count[i + 1] += count[i];
            }
            let mut fill = count.clone();
            let mut nbrs = vec![(0u32, 0u32); 2 * self.edges.len()];
            for (i, e) in self.edges.iter().enumerate() {
                for (a, b) in [(e.u, e.v), (e.v, e.u)] {
                    nbrs[fill[a as usize] as usize] = (b, i as u32);
                    fill[a as usize] += 1;
                }
            }
            Adjacency { start: count, nbrs }
        })
    }

    pub fn degree(&self, v: usize) -> usize {
        let a = self.adjacency();
        (a.start[v + 1] - a.start[v]) as usize
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = (usize, &Edge)> + '_ {
        let a = self.adjacency();
        a.nbrs[a.start[v] as usize..a.start[v + 1] as usize]
            .iter()
            .map(move |&(b, e)| (b as usize, &self.edges[e as usize]))
    }

    /// Distances from `src`; the search stops once every target is settled.
    /// Unreached vertices are `INFINITY`.
    pub fn sssp(&self, src: usize, targets: &[usize]) -> Vec<f64> {
        let n = self.vertices.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut done = vec![false; n];
        let mut want: Vec<bool> = Vec::new();
        let mut left = 0usize;
        if !targets.is_empty() {
            want = vec![false; n];
            for &t in targets {
                if !want[t] {
                    want[t] = true;
                    left += 1;
                }
            }
        }
        let mut heap = BinaryHeap::new();
        dist[src] = 0.0;
        heap.push(Reverse((Key(0.0), src as u32)));
        while let Some(Reverse((Key(du), u))) = heap.pop() {
            let u = u as usize;
            if done[u] {
                continue;
            }
            done[u] = true;
            if !want.is_empty() && want[u] {
                left -= 1;
                if left == 0 {
                    break;
                }
            }
            for (v, e) in self.neighbors(u) {
                let nd = du + e.w;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Reverse((Key(nd), v as u32)));
                }
            }
        }
        dist
    }

    /// Weighted shortest-path distance between two vertices.
    pub fn graph_dist(&self, u: usize, v: usize) -> Result<f64> {
        let n = self.vertices.len();
        if u >= n || v >= n {
            return Err(Error::param("vertex", format!("id {} out of range ({} vertices)", u.max(v), n)));
        }
        let d = self.sssp(u, &[v])[v];
        if d.is_finite() {
            Ok(d)
        } else {
            Err(Error::Disconnected { from: u, to: v })
        }
    }

    /// Errors with a witness pair when the graph is not connected.
    pub fn check_connected(&self) -> Result<()> {
        let n = self.vertices.len();
        if n == 0 {
            return Err(Error::Empty("graph"));
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for (v, _) in self.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(v) => Err(Error::Disconnected { from: 0, to: v }),
            None => Ok(()),
        }
    }

    pub fn max_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.w).fold(0.0, f64::max)
    }

    /// Largest `w_e / ell0` over the edges.
    pub fn max_ratio(&self) -> f64 {
        self.edges.iter().map(|e| e.w / e.ell0).fold(0.0, f64::max)
    }
}

/// Reusable buffers for repeated bounded searches on one graph.
#[derive(Clone, Debug)]
pub struct GraphWorkspace {
    dist: Vec<f64>,
    done: Vec<bool>,
    touched: Vec<u32>,
    heap: BinaryHeap<Reverse<(Key, u32)>>,
}

impl GraphWorkspace {
    pub fn new(n: usize) -> GraphWorkspace {
        GraphWorkspace { dist: vec![f64::INFINITY; n], done: vec![false; n], touched: Vec::new(), heap: BinaryHeap::new() }
    }

    /// Distance from `src` to `dst`, or `None` when it exceeds `bound`.
    pub fn dist_bounded(&mut self, g: &WeightedGraph, src: usize, dst: usize, bound: f64) -> Option<f64> {
        for &t in &self.touched {
            self.dist[t as usize] = f64::INFINITY;
            self.done[t as usize] = false;
        }
        self.touched.clear();
        self.heap.clear();
        self.dist[src] = 0.0;
        self.touched.push(src as u32);
        self.heap.push(Reverse((Key(0.0), src as u32)));
        while let Some(Reverse((Key(du), u))) = self.heap.pop() {
            let u = u as usize;
            if self.done[u] {
                continue;
            }
            self.done[u] = true;
            if u == dst {
                return Some(du);
            }
            for (v, e) in g.neighbors(u) {
                let nd = du + e.w;
                if nd <= bound && nd < self.dist[v] {
                    if self.dist[v] == f64::INFINITY {
                        self.touched.push(v as u32);
                    }
                    self.dist[v] = nd;
                    self.heap.push(Reverse((Key(nd), v as u32)));
                }
            }
        }
        None
    }
}

/// Sets every edge weight to the oracle distance between its endpoints and
/// `ell0` to the segment length.
pub fn assign_weights(g: &mut WeightedGraph, oracle: &LatticeOracle) -> Result<()> {
    let n = oracle.grid.len();
    let verts = &g.vertices;
    let w: Vec<Result<(f64, f64)>> = g
        .edges
        .par_iter()
        .map_init(
            || Workspace::new(n),
            |ws, e| {
                let (a, b) = (verts[e.u as usize], verts[e.v as usize]);
                Ok((oracle.dist_ext(ws, a, b)?, a.dist(b)))
            },
        )
        .collect();
    for (e, r) in g.edges.iter_mut().zip(w) {
        let (w, l) = r?;
        e.w = w;
        e.ell0 = l;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{MetricSpec, ScalarField};

    fn path_graph(pts: &[(f64, f64)]) -> WeightedGraph {
        let vertices: Vec<Point> = pts.iter().map(|&(x, y)| Point::new2(x, y)).collect();
        let edges = (1..pts.len() as u32)
            .map(|i| Edge { u: i - 1, v: i, w: 0.0, ell0: 0.0 })
            .collect();
        let kinds = vec![VertexKind::Net; pts.len()];
        WeightedGraph::new(2, 1.0, 1, 1, 0.0, 1, vertices, kinds, edges)
    }

    #[test]
    fn euclidean_weights_equal_lengths() {
        let o = LatticeOracle::build(MetricSpec::euclidean(2, 1.0), 0.125, 2, 1 << 20).unwrap();
        let mut g = path_graph(&[(0.0, 0.0), (0.3, 0.1), (0.5, 0.5)]);
        assign_weights(&mut g, &o).unwrap();
        for e in &g.edges {
            assert!((e.w / e.ell0 - 1.0).abs() < 1e-9, "{e:?}");
        }
    }

    #[test]
    fn constant_factor_doubles_weights() {
        let spec = MetricSpec::conformal(2, 1.0, ScalarField::Const(2f64.ln()));
        let o = LatticeOracle::build(spec, 0.125, 2, 1 << 20).unwrap();
        let mut g = path_graph(&[(0.0, 0.0), (0.05, 0.02), (0.07, 0.1)]);
        assign_weights(&mut g, &o).unwrap();
        for e in &g.edges {
            assert!((e.w / e.ell0 - 2.0).abs() <= 2.0 * o.tol_lat + 1e-9, "{e:?}");
        }
    }

    #[test]
    fn distances_on_a_square_with_diagonal() {
        let mut g = path_graph(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]);
        g.edges.push(Edge { u: 3, v: 0, w: 0.0, ell0: 0.0 });
        g.edges.push(Edge { u: 0, v: 2, w: 0.0, ell0: 0.0 });
        for e in g.edges.iter_mut() {
            e.w = if (e.u, e.v) == (0, 2) { 1.5 } else { 1.0 };
        }
        assert_eq!(g.graph_dist(0, 0).unwrap(), 0.0);
        assert_eq!(g.graph_dist(0, 2).unwrap(), 1.5);
        assert_eq!(g.graph_dist(1, 3).unwrap(), 2.0);
        assert_eq!(g.graph_dist(3, 1).unwrap(), 2.0);
        assert_eq!(g.degree(0), 3);
        let mut ws = GraphWorkspace::new(4);
        assert_eq!(ws.dist_bounded(&g, 1, 3, 5.0), Some(2.0));
        assert_eq!(ws.dist_bounded(&g, 1, 3, 1.5), None);
        assert_eq!(ws.dist_bounded(&g, 0, 2, 5.0), Some(1.5));
        g.check_connected().unwrap();
    }

    #[test]
    fn disconnected_pairs_are_errors() {
        let mut g = path_graph(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)]);
        g.edges.truncate(1);
        assert!(matches!(g.graph_dist(0, 2), Err(Error::Disconnected { .. })));
        assert!(matches!(g.check_connected(), Err(Error::Disconnected { from: 0, to: 2 })));
    }
}
