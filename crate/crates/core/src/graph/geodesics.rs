//! Geodesics between nearby net vertices and the untangling sweep that
//! makes every pair of them meet in one contiguous run or not at all.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::dijkstra::{Limits, Workspace};
use crate::error::{Error, Result};
use crate::graph::partition::GridPartition;
use crate::metric::LatticeOracle;

/// Geodesic node paths on the oracle lattice.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GeodesicSet {
    /// Net vertex ids of the endpoints.
    pub ends: Vec<(u32, u32)>,
    pub paths: Vec<Vec<u32>>,
    /// Integer oracle cost of each path.
    pub costs: Vec<u64>,
}

impl GeodesicSet {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Map from oracle node to the ids of the paths through it.
    pub fn node_index(&self) -> HashMap<u32, Vec<u32>> {
        let mut idx: HashMap<u32, Vec<u32>> = HashMap::new();
        for (p, path) in self.paths.iter().enumerate() {
            for &n in path {
                idx.entry(n).or_default().push(p as u32);
            }
        }
        idx
    }
}

/// Vertex pairs `(u, v)`, `u < v`, within Chebyshev distance `c_pair`.
pub fn pair_rule(part: &GridPartition, c_pair: usize) -> Vec<(u32, u32)> {
    let n = part.per_axis() as i64;
    let c = c_pair as i64;
    let d = part.d;
    let mut out = Vec::new();
    for u in 0..part.vertex_count() {
        let cu = part.vertex_coords(u);
        let zr = if d == 3 { -c..=c } else { 0..=0 };
        for dz in zr {
            for dy in -c..=c {
                for dx in -c..=c {
                    let off = [dx, dy, dz];
                    let mut cv = [0usize; 3];
                    let mut ok = true;
                    for a in 0..d {
                        let v = cu[a] as i64 + off[a];
                        if v < 0 || v >= n {
                            ok = false;
                            break;
                        }
                        cv[a] = v as usize;
                    }
                    if !ok {
                        continue;
                    }
                    let v = part.vertex_index(cv);
                    if v > u {
                        out.push((u as u32, v as u32));
                    }
                }
            }
        }
    }
    out
}

/// One geodesic per selected pair, from one early-stopping search per
/// lower endpoint.
pub fn build_g1(oracle: &LatticeOracle, part: &GridPartition, c_pair: usize) -> Result<GeodesicSet> {
    if oracle.n_half % (part.n_bar * part.m_bar) != 0 {
        return Err(Error::param("partition", "net spacing must be a multiple of the oracle spacing"));
    }
    let pairs = pair_rule(part, c_pair);
    let mut by_src: Vec<(u32, Vec<u32>)> = Vec::new();
    for &(u, v) in &pairs {
        match by_src.last_mut() {
            Some((s, ts)) if *s == u => ts.push(v),
            _ => by_src.push((u, vec![v])),
        }
    }
    let chunks: Vec<Vec<(u32, u32, Vec<u32>, u64)>> = by_src
        .par_iter()
        .map_init(
            || Workspace::new(oracle.grid.len()),
            |ws, (u, ts)| {
                let s = part.vertex_node(oracle, *u as usize);
                let tn: Vec<usize> = ts.iter().map(|&v| part.vertex_node(oracle, v as usize)).collect();
                ws.run(oracle, &[(s, 0)], Limits { targets: &tn, ..Default::default() });
                ts.iter()
                    .zip(&tn)
                    .map(|(&v, &t)| (*u, v, ws.path_to(t).unwrap_or_default(), ws.dist(t).unwrap_or(u64::MAX)))
                    .collect()
            },
        )
        .collect();
    let mut gs = GeodesicSet::default();
    for (u, v, p, c) in chunks.into_iter().flatten() {
        if p.is_empty() {
            return Err(Error::Disconnected { from: u as usize, to: v as usize });
        }
        gs.ends.push((u, v));
        gs.paths.push(p);
        gs.costs.push(c);
    }
    Ok(gs)
}

/// Shared nodes of `a` and `b` as a run: returns `None` if they share
/// nothing, `Some(true)` if the shared nodes are one contiguous run in both
/// paths (in the same or reversed order), `Some(false)` otherwise.
pub fn contiguous(a: &[u32], b: &[u32]) -> Option<bool> {
    let pos_b: HashMap<u32, usize> = b.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let hits: Vec<usize> = a.iter().filter_map(|n| pos_b.get(n).copied()).collect();
    if hits.is_empty() {
        return None;
    }
    let first = a.iter().position(|n| pos_b.contains_key(n)).unwrap();
    let run_len = hits.len();
    // Contiguous in `a`.
    if !a[first..first + run_len].iter().all(|n| pos_b.contains_key(n)) {
        return Some(false);
    }
    // Contiguous and monotone in `b`.
    let inc = hits.windows(2).all(|w| w[1] == w[0] + 1);
    let dec = hits.windows(2).all(|w| w[0] == w[1] + 1);
    Some(inc || dec)
}

/// Result of the untangling sweep.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct UntangleReport {
    pub splices: usize,
    pub sweeps: usize,
    /// Intersecting path pairs checked at the end.
    pub pairs_checked: usize,
    /// Pairs whose intersection is still not a single run.
    pub residual: usize,
}

/// Replaces `path[i..=j]` by the subpath of `other` between the same nodes.
fn splice(path: &[u32], i: usize, j: usize, other: &[u32]) -> Vec<u32> {
    let oi = other.iter().position(|&n| n == path[i]).unwrap();
    let oj = other.iter().position(|&n| n == path[j]).unwrap();
    let mid: Vec<u32> = if oi <= oj {
        other[oi..=oj].to_vec()
    } else {
        other[oj..=oi].iter().rev().copied().collect()
    };
    let mut out = Vec::with_capacity(path.len());
    out.extend_from_slice(&path[..i]);
    out.extend_from_slice(&mid);
    out.extend_from_slice(&path[j + 1..]);
    out
}

/// Processes paths in index order. Path `m` is swept against the already
/// processed paths in increasing id; wherever it meets path `j` at more
/// than one run, its stretch between the first and last common node is
/// replaced by `j`'s. Repeats whole sweeps up to `max_sweeps` times while
/// violations remain. Every splice must keep the integer cost unchanged.
pub fn untangle(oracle: &LatticeOracle, gs: &GeodesicSet, max_sweeps: usize) -> Result<(GeodesicSet, UntangleReport)> {
    let mut out = gs.clone();
    let mut rep = UntangleReport::default();
    for _ in 0..max_sweeps.max(1) {
        rep.sweeps += 1;
        let mut changed = false;
        let mut index: HashMap<u32, Vec<u32>> = HashMap::new();
        for m in 0..out.paths.len() {
            let mut used: Vec<u32> = Vec::new();
            // Revisits after a splice can cycle; cap the work per path.
            let mut budget = 64usize;
            loop {
                if budget == 0 {
                    break;
                }
                budget -= 1;
                let mut cands: Vec<u32> = out.paths[m]
                    .iter()
                    .filter_map(|n| index.get(n))
                    .flatten()
                    .copied()
                    .filter(|j| !used.contains(j))
                    .collect();
                cands.sort_unstable();
                cands.dedup();
                let Some(&j) = cands.first() else { break };
                used.push(j);
                let other = &out.paths[j as usize];
                if contiguous(&out.paths[m], other) == Some(true) {
                    continue;
                }
                let on_other: std::collections::HashSet<u32> = other.iter().copied().collect();
                let path = &out.paths[m];
                let i0 = path.iter().position(|n| on_other.contains(n)).unwrap();
                let i1 = path.iter().rposition(|n| on_other.contains(n)).unwrap();
                let new = splice(path, i0, i1, other);
                let c = oracle.node_path_cost(&new).unwrap_or(u64::MAX);
                if c != out.costs[m] {
                    return Err(Error::LengthIncrease {
                        path: m,
                        before: out.costs[m],
                        after: c,
                    });
                }
                out.paths[m] = new;
                rep.splices += 1;
                changed = true;
                // Earlier splices may need revisiting after this one.
                used.retain(|&k| k == j || contiguous(&out.paths[m], &out.paths[k as usize]) != Some(false));
            }
            for &n in &out.paths[m] {
                index.entry(n).or_default().push(m as u32);
            }
        }
        if !changed {
            break;
        }
    }
    let (checked, residual) = violations(&out);
    rep.pairs_checked = checked;
    rep.residual = residual;
    Ok((out, rep))
}

/// Counts intersecting pairs and those whose intersection is not one run.
pub fn violations(gs: &GeodesicSet) -> (usize, usize) {
    let index = gs.node_index();
    let (mut checked, mut bad) = (0, 0);
    for m in 0..gs.paths.len() {
        let mut cands: Vec<u32> = gs.paths[m]
            .iter()
            .filter_map(|n| index.get(n))
            .flatten()
            .copied()
            .filter(|&j| (j as usize) < m)
            .collect();
        cands.sort_unstable();
        cands.dedup();
        for j in cands {
            checked += 1;
            if contiguous(&gs.paths[m], &gs.paths[j as usize]) == Some(false) {
                bad += 1;
            }
        }
    }
    (checked, bad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::MetricSpec;

    #[test]
    fn pair_counts() {
        let p = GridPartition { d: 2, r: 1.0, n_bar: 1, m_bar: 1 };
        let pairs = pair_rule(&p, 1);
        assert_eq!(pairs.len(), 20);
        let axis = pairs
            .iter()
            .filter(|(u, v)| {
                let (a, b) = (p.vertex_coords(*u as usize), p.vertex_coords(*v as usize));
                a[0] == b[0] || a[1] == b[1]
            })
            .count();
        assert_eq!(axis, 12);
        // Brute-force enumeration for c = 2 on a 5 x 5 net.
        let p = GridPartition { d: 2, r: 1.0, n_bar: 2, m_bar: 1 };
        let mut brute = 0;
        for u in 0..25 {
            for v in u + 1..25 {
                let (a, b) = (p.vertex_coords(u), p.vertex_coords(v));
                if a[0].abs_diff(b[0]).max(a[1].abs_diff(b[1])) <= 2 {
                    brute += 1;
                }
            }
        }
        assert_eq!(pair_rule(&p, 2).len(), brute);
    }

    #[test]
    fn euclidean_geodesics_are_straight() {
        let o = LatticeOracle::build(MetricSpec::euclidean(2, 1.0), 0.25, 3, 1 << 20).unwrap();
        let p = GridPartition { d: 2, r: 1.0, n_bar: 1, m_bar: 1 };
        let gs = build_g1(&o, &p, 1).unwrap();
        assert_eq!(gs.len(), 20);
        for (path, c) in gs.paths.iter().zip(&gs.costs) {
            assert_eq!(o.node_path_cost(path), Some(*c));
            let a = o.grid.point(path[0] as usize);
            let b = o.grid.point(*path.last().unwrap() as usize);
            let len = o.len_of(*c);
            assert!((len - a.dist(b)).abs() < 1e-12);
        }
    }

    #[test]
    fn contiguity_cases() {
        assert_eq!(contiguous(&[1, 2, 3], &[4, 5]), None);
        assert_eq!(contiguous(&[1, 2, 3], &[7, 2, 8]), Some(true));
        assert_eq!(contiguous(&[1, 2, 3, 4], &[9, 4, 3, 2]), Some(true));
        assert_eq!(contiguous(&[1, 2, 3, 4], &[2, 9, 4]), Some(false));
    }

    /// Two geodesics on a 10 x 10 axis lattice that meet twice.
    #[test]
    fn double_crossing_is_rerouted() {
        let o = LatticeOracle::build(MetricSpec::euclidean(2, 1.0), 0.2, 1, 1 << 20).unwrap();
        let g = &o.grid;
        let id = |x: usize, y: usize| g.index([x, y, 0]) as u32;
        // Monotone staircases: B touches A at (3,1), leaves, and rejoins
        // along A's second riser.
        let walk = |pts: &[(usize, usize)]| pts.iter().map(|&(x, y)| id(x, y)).collect::<Vec<u32>>();
        let a = walk(&[(0, 0), (1, 0), (2, 0), (3, 0), (3, 1), (3, 2), (3, 3), (4, 3), (5, 3), (6, 3), (6, 4), (6, 5), (6, 6)]);
        let b = walk(&[(2, 1), (3, 1), (4, 1), (5, 1), (5, 2), (5, 3), (6, 3), (6, 4), (6, 5)]);
        let gs = GeodesicSet {
            ends: vec![(0, 1), (2, 3)],
            costs: vec![o.node_path_cost(&a).unwrap(), o.node_path_cost(&b).unwrap()],
            paths: vec![a.clone(), b],
        };
        assert_eq!(violations(&gs).1, 1);
        let (out, rep) = untangle(&o, &gs, 4).unwrap();
        assert_eq!(rep.residual, 0);
        assert!(rep.splices >= 1);
        assert_eq!(out.paths[0], a);
        assert_eq!(out.costs, gs.costs);
        assert_eq!(o.node_path_cost(&out.paths[1]), Some(gs.costs[1]));
        assert_eq!(contiguous(&out.paths[1], &a), Some(true));
        assert_eq!(out.paths[1].first(), gs.paths[1].first());
        assert_eq!(out.paths[1].last(), gs.paths[1].last());
    }

    #[test]
    fn single_meeting_is_unchanged() {
        let o = LatticeOracle::build(MetricSpec::euclidean(2, 1.0), 0.2, 1, 1 << 20).unwrap();
        let g = &o.grid;
        let id = |x: usize, y: usize| g.index([x, y, 0]) as u32;
        let a: Vec<u32> = (0..5).map(|x| id(x, 2)).collect();
        let b: Vec<u32> = (0..5).map(|y| id(2, y)).collect();
        let gs = GeodesicSet {
            ends: vec![(0, 1), (2, 3)],
            costs: vec![o.node_path_cost(&a).unwrap(), o.node_path_cost(&b).unwrap()],
            paths: vec![a, b],
        };
        let (out, rep) = untangle(&o, &gs, 4).unwrap();
        assert_eq!(out, gs);
        assert_eq!(rep.splices, 0);
        assert_eq!(rep.pairs_checked, 1);
    }
}
