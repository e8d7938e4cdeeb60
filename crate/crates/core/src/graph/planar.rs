//! Stage G3: the union of the untangled geodesics as an embedded curve
//! graph. Vertices are net vertices, lattice nodes where geodesics merge or
//! split (union degree other than two), and points where two lattice edges
//! cross. Edges are the polylines between consecutive vertices.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::geom::{crossing_point, proper_cross_i, Point};
use crate::graph::geodesics::GeodesicSet;
use crate::graph::partition::GridPartition;
use crate::lattice::Grid;
use crate::metric::LatticeOracle;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VertexKind {
    Net,
    Merge,
    Subdivision,
}

impl VertexKind {
    pub fn name(self) -> &'static str {
        match self {
            VertexKind::Net => "net",
            VertexKind::Merge => "merge",
            VertexKind::Subdivision => "subdivision",
        }
    }

    pub fn parse(s: &str) -> Option<VertexKind> {
        match s {
            "net" => Some(VertexKind::Net),
            "merge" => Some(VertexKind::Merge),
            "subdivision" => Some(VertexKind::Subdivision),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurveEdge {
    pub u: u32,
    pub v: u32,
    /// Polyline from vertex `u` to vertex `v`, endpoints included.
    pub pts: Vec<Point>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CurveGraph {
    pub d: usize,
    pub vertices: Vec<Point>,
    pub kinds: Vec<VertexKind>,
    pub edges: Vec<CurveEdge>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlanarReport {
    pub union_edges: usize,
    pub merge_nodes: usize,
    pub crossings: usize,
}

/// Element of the split lattice graph: a lattice node or a crossing point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Elem {
    Node(u32),
    Cross(u32),
}

fn icoords(g: &Grid, n: u32) -> [i64; 3] {
    let c = g.coords(n as usize);
    [c[0] as i64, c[1] as i64, c[2] as i64]
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Exact rational crossing point `(x, y, z) / den` with `den > 0` reduced.
fn exact_crossing(a: [i64; 3], b: [i64; 3], c: [i64; 3], d: [i64; 3]) -> [i128; 4] {
    let v = |p: [i64; 3], q: [i64; 3]| [(p[0] - q[0]) as i128, (p[1] - q[1]) as i128, (p[2] - q[2]) as i128];
    let cross = |x: [i128; 3], y: [i128; 3]| {
        [x[1] * y[2] - x[2] * y[1], x[2] * y[0] - x[0] * y[2], x[0] * y[1] - x[1] * y[0]]
    };
    let dot = |x: [i128; 3], y: [i128; 3]| x[0] * y[0] + x[1] * y[1] + x[2] * y[2];
    let u = v(b, a);
    let w = v(d, c);
    let n = cross(u, w);
    let tn = dot(cross(v(c, a), w), n);
    let mut td = dot(n, n);
    let mut out = [0i128; 4];
    for k in 0..3 {
        out[k] = a[k] as i128 * td + u[k] * tn;
    }
    let mut g = gcd(td, 0);
    for x in &out[..3] {
        g = gcd(g, *x);
    }
    if g > 1 {
        for x in out.iter_mut().take(3) {
            *x /= g;
        }
        td /= g;
    }
    out[3] = td;
    out
}

/// Builds G3 from untangled geodesics on the oracle lattice.
pub fn insert_merge_vertices(oracle: &LatticeOracle, part: &GridPartition, gs: &GeodesicSet) -> (CurveGraph, PlanarReport) {
    let g = &oracle.grid;
    let mut set: HashSet<(u32, u32)> = HashSet::new();
    for p in &gs.paths {
        for w in p.windows(2) {
            set.insert((w[0].min(w[1]), w[0].max(w[1])));
        }
    }
    let mut union: Vec<(u32, u32)> = set.into_iter().collect();
    union.sort_unstable();
    let mut degree: HashMap<u32, u32> = HashMap::new();
    for &(a, b) in &union {
        *degree.entry(a).or_default() += 1;
        *degree.entry(b).or_default() += 1;
    }
    let net: HashSet<u32> = (0..part.vertex_count())
        .map(|i| part.vertex_node(oracle, i) as u32)
        .filter(|n| degree.contains_key(n))
        .collect();

    // Proper crossings between union edges, found through buckets of two
    // lattice steps; a pair is tested only in its first common bucket.
    let bucket_of = |c: [i64; 3]| [c[0].div_euclid(2), c[1].div_euclid(2), c[2].div_euclid(2)];
    let mut buckets: BTreeMap<[i64; 3], Vec<u32>> = BTreeMap::new();
    let mut bbox: Vec<([i64; 3], [i64; 3])> = Vec::with_capacity(union.len());
    for (i, &(a, b)) in union.iter().enumerate() {
        let (ca, cb) = (icoords(g, a), icoords(g, b));
        let lo = [ca[0].min(cb[0]), ca[1].min(cb[1]), ca[2].min(cb[2])];
        let hi = [ca[0].max(cb[0]), ca[1].max(cb[1]), ca[2].max(cb[2])];
        bbox.push((lo, hi));
        let (bl, bh) = (bucket_of(lo), bucket_of(hi));
        for z in bl[2]..=bh[2] {
            for y in bl[1]..=bh[1] {
                for x in bl[0]..=bh[0] {
                    buckets.entry([x, y, z]).or_default().push(i as u32);
                }
            }
        }
    }
    let mut cross_ids: HashMap<[i128; 4], u32> = HashMap::new();
    let mut cross_pts: Vec<Point> = Vec::new();
    let mut on_edge: HashMap<u32, Vec<(f64, u32)>> = HashMap::new();
    for (key, list) in &buckets {
        for x in 0..list.len() {
            for y in x + 1..list.len() {
                let (i, j) = (list[x] as usize, list[y] as usize);
                let (bi, bj) = (bbox[i], bbox[j]);
                let first = bucket_of([bi.0[0].max(bj.0[0]), bi.0[1].max(bj.0[1]), bi.0[2].max(bj.0[2])]);
                if first != *key {
                    continue;
                }
                let (a, b) = union[i];
                let (c, d) = union[j];
                if a == c || a == d || b == c || b == d {
                    continue;
                }
                let (ia, ib, ic, id) = (icoords(g, a), icoords(g, b), icoords(g, c), icoords(g, d));
                if !proper_cross_i(ia, ib, ic, id) {
                    continue;
                }
                let k = exact_crossing(ia, ib, ic, id);
                let next = cross_pts.len() as u32;
                let cid = *cross_ids.entry(k).or_insert_with(|| {
                    let (pa, pb, pc, pd) = (g.point(a as usize), g.point(b as usize), g.point(c as usize), g.point(d as usize));
                    cross_pts.push(crossing_point(pa, pb, pc, pd));
                    next
                });
                for (e, (p, q)) in [(i, (a, b)), (j, (c, d))] {
                    let (pp, pq) = (g.point(p as usize), g.point(q as usize));
                    let t = crate::geom::project_param(cross_pts[cid as usize], pp, pq);
                    let list = on_edge.entry(e as u32).or_default();
                    if !list.iter().any(|(_, c)| *c == cid) {
                        list.push((t, cid));
                    }
                }
            }
        }
    }

    // Split adjacency.
    let mut adj: BTreeMap<Elem, Vec<Elem>> = BTreeMap::new();
    for (i, &(a, b)) in union.iter().enumerate() {
        let mut chain = vec![Elem::Node(a)];
        if let Some(list) = on_edge.get_mut(&(i as u32)) {
            list.sort_by(|x, y| x.0.total_cmp(&y.0));
            chain.extend(list.iter().map(|(_, c)| Elem::Cross(*c)));
        }
        chain.push(Elem::Node(b));
        for w in chain.windows(2) {
            adj.entry(w[0]).or_default().push(w[1]);
            adj.entry(w[1]).or_default().push(w[0]);
        }
    }
    for v in adj.values_mut() {
        v.sort_unstable();
    }
    let is_vertex = |e: &Elem| match e {
        Elem::Node(n) => net.contains(n) || degree[n] != 2,
        Elem::Cross(_) => true,
    };
    let point_of = |e: &Elem| match e {
        Elem::Node(n) => g.point(*n as usize),
        Elem::Cross(c) => cross_pts[*c as usize],
    };
    let mut vid: HashMap<Elem, u32> = HashMap::new();
    let mut out = CurveGraph {
        d: g.d,
        ..Default::default()
    };
    let mut merge_nodes = 0;
    for e in adj.keys() {
        if is_vertex(e) {
            vid.insert(*e, out.vertices.len() as u32);
            out.vertices.push(point_of(e));
            let kind = match e {
                Elem::Node(n) if net.contains(n) => VertexKind::Net,
                Elem::Node(n) => {
                    if degree[n] > 2 {
                        merge_nodes += 1;
                    }
                    VertexKind::Merge
                }
                Elem::Cross(_) => VertexKind::Merge,
            };
            out.kinds.push(kind);
        }
    }
    let mut seen: HashSet<(Elem, Elem)> = HashSet::new();
    for (start, nbrs) in &adj {
        if !is_vertex(start) {
            continue;
        }
        for first in nbrs {
            let key = ((*start).min(*first), (*start).max(*first));
            if seen.contains(&key) {
                continue;
            }
            let mut pts = vec![point_of(start)];
            let (mut prev, mut cur) = (*start, *first);
            seen.insert(key);
            while !is_vertex(&cur) {
                pts.push(point_of(&cur));
                let nx = adj[&cur].iter().copied().find(|x| *x != prev).expect("degree-two node");
                seen.insert((cur.min(nx), cur.max(nx)));
                prev = cur;
                cur = nx;
            }
            pts.push(point_of(&cur));
            out.edges.push(CurveEdge {
                u: vid[start],
                v: vid[&cur],
                pts,
            });
        }
    }
    let rep = PlanarReport {
        union_edges: union.len(),
        merge_nodes,
        crossings: cross_pts.len(),
    };
    (out, rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::geodesics::{build_g1, untangle};
    use crate::metric::MetricSpec;

    fn setup(h: f64, order: u32) -> LatticeOracle {
        LatticeOracle::build(MetricSpec::euclidean(2, 1.0), h, order, 1 << 20).unwrap()
    }

    fn set_of(o: &LatticeOracle, paths: Vec<Vec<(usize, usize)>>) -> GeodesicSet {
        let paths: Vec<Vec<u32>> = paths
            .into_iter()
            .map(|p| p.into_iter().map(|(x, y)| o.grid.index([x, y, 0]) as u32).collect())
            .collect();
        GeodesicSet {
            ends: (0..paths.len() as u32).map(|i| (2 * i, 2 * i + 1)).collect(),
            costs: paths.iter().map(|p| o.node_path_cost(p).unwrap()).collect(),
            paths,
        }
    }

    #[test]
    fn disjoint_geodesics_keep_only_their_endpoints() {
        let o = setup(0.25, 1);
        // A partition whose net is every fourth node: endpoints are net nodes.
        let part = GridPartition { d: 2, r: 1.0, n_bar: 1, m_bar: 1 };
        let gs = set_of(&o, vec![(0..=4).map(|x| (x, 0)).collect(), (0..=4).map(|x| (x, 4)).collect()]);
        let (g3, rep) = insert_merge_vertices(&o, &part, &gs);
        assert_eq!(rep.crossings, 0);
        assert_eq!(g3.vertices.len(), 4);
        assert_eq!(g3.edges.len(), 2);
        assert!(g3.kinds.iter().all(|k| *k == VertexKind::Net));
    }

    #[test]
    fn shared_segment_adds_two_merge_vertices() {
        let o = setup(0.125, 1);
        let part = GridPartition { d: 2, r: 1.0, n_bar: 1, m_bar: 1 };
        // Two paths that share the run (3,4)-(5,4) and split at both ends.
        let a = vec![(3, 1), (3, 2), (3, 3), (3, 4), (4, 4), (5, 4), (5, 5), (5, 6), (5, 7)];
        let b = vec![(1, 4), (2, 4), (3, 4), (4, 4), (5, 4), (6, 4), (7, 4)];
        let gs = set_of(&o, vec![a, b]);
        let (g3, rep) = insert_merge_vertices(&o, &part, &gs);
        assert_eq!(rep.merge_nodes, 2);
        assert_eq!(g3.vertices.len(), 6);
        // Four arms plus the shared run.
        assert_eq!(g3.edges.len(), 5);
    }

    #[test]
    fn diagonals_of_a_cell_meet_at_its_centre_node() {
        let o = setup(0.25, 2);
        let part = GridPartition { d: 2, r: 1.0, n_bar: 2, m_bar: 1 };
        let gs = build_g1(&o, &part, 1).unwrap();
        let (gs, _) = untangle(&o, &gs, 4).unwrap();
        let (g3, rep) = insert_merge_vertices(&o, &part, &gs);
        assert_eq!(rep.crossings, 0);
        assert_eq!(rep.merge_nodes, 16);
        assert_eq!(g3.vertices.len(), 25 + 16);
        // 40 axis edges plus 4 half diagonals per cell.
        assert_eq!(g3.edges.len(), 40 + 64);
    }

    #[test]
    fn crossing_lattice_edges_get_a_new_vertex() {
        let o = setup(0.25, 2);
        let part = GridPartition { d: 2, r: 1.0, n_bar: 1, m_bar: 1 };
        let gs = set_of(&o, vec![vec![(0, 0), (1, 1)], vec![(1, 0), (0, 1)]]);
        let (g3, rep) = insert_merge_vertices(&o, &part, &gs);
        assert_eq!(rep.crossings, 1);
        assert_eq!(g3.vertices.len(), 5);
        assert_eq!(g3.edges.len(), 4);
        let c = g3.vertices[4];
        assert!((c.0[0] + 0.875).abs() < 1e-12 && (c.0[1] + 0.875).abs() < 1e-12);
    }

    #[test]
    fn concurrent_crossings_share_one_point() {
        let a = exact_crossing([0, 0, 0], [2, 1, 0], [0, 1, 0], [2, 0, 0]);
        let b = exact_crossing([0, 0, 0], [2, 1, 0], [1, 0, 0], [1, 1, 0]);
        assert_eq!(a, b);
        assert_eq!(a, [2, 1, 0, 2]);
    }
}
