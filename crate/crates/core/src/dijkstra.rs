//! Dijkstra over lattice graphs with integer costs and deterministic
//! predecessor choice (smallest node index among equal-cost parents).

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::lattice::{Grid, Stencil};

pub const NONE: u32 = u32::MAX;

/// Edge costs of a lattice graph.
pub trait EdgeCosts: Sync {
    fn grid(&self) -> &Grid;
    fn stencil(&self) -> &Stencil;
    /// Cost of the edge leaving `node` along stencil offset `k` into `nbr`.
    /// Must equal the cost of the reverse edge.
    fn cost(&self, node: usize, k: usize, nbr: usize) -> u64;
}

/// Stopping rules for a search.
#[derive(Clone, Copy, Debug, Default)]
pub struct Limits<'a> {
    /// Nodes costlier than this are never settled.
    pub bound: Option<u64>,
    /// Stop once all of these are settled.
    pub targets: &'a [usize],
    /// Restrict the search to nodes with coordinates in this inclusive box.
    pub clip: Option<([usize; 3], [usize; 3])>,
}

/// Reusable search state. Only nodes touched by the last run are reset.
#[derive(Debug, Default)]
pub struct Workspace {
    dist: Vec<u64>,
    pred: Vec<u32>,
    done: Vec<bool>,
    touched: Vec<u32>,
    settled: Vec<u32>,
    heap: BinaryHeap<Reverse<(u64, u32)>>,
}

impl Workspace {
    pub fn new(n: usize) -> Self {
        Workspace {
            dist: vec![u64::MAX; n],
            pred: vec![NONE; n],
            done: vec![false; n],
            touched: Vec::new(),
            settled: Vec::new(),
            heap: BinaryHeap::new(),
        }
    }

    fn reset(&mut self, n: usize) {
        if self.dist.len() != n {
            *self = Workspace::new(n);
            return;
        }
        for &i in &self.touched {
            let i = i as usize;
            self.dist[i] = u64::MAX;
            self.pred[i] = NONE;
            self.done[i] = false;
        }
        self.touched.clear();
        self.settled.clear();
        self.heap.clear();
    }

    /// Runs a search from `sources` (node, initial cost). Returns the number
    /// of settled nodes.
    pub fn run<C: EdgeCosts + ?Sized>(&mut self, g: &C, sources: &[(usize, u64)], lim: Limits) -> usize {
        let grid = g.grid();
        let st = g.stencil();
        self.reset(grid.len());
        for &(s, c0) in sources {
            if c0 < self.dist[s] {
                if self.dist[s] == u64::MAX {
                    self.touched.push(s as u32);
                }
                self.dist[s] = c0;
                self.heap.push(Reverse((c0, s as u32)));
            }
        }
        let bound = lim.bound.unwrap_or(u64::MAX);
        let mut targets = lim.targets.to_vec();
        targets.sort_unstable();
        targets.dedup();
        let mut remaining = targets.len();
        let is_target = |i: usize| {
            if targets.len() <= 16 {
                targets.contains(&i)
            } else {
                targets.binary_search(&i).is_ok()
            }
        };
        let dims = grid.dims;
        let (lo, hi) = lim.clip.unwrap_or(([0; 3], [dims[0] - 1, dims[1] - 1, dims[2] - 1]));
        while let Some(Reverse((du, u))) = self.heap.pop() {
            let ui = u as usize;
            if self.done[ui] || du != self.dist[ui] {
                continue;
            }
            self.done[ui] = true;
            self.settled.push(u);
            if remaining > 0 && is_target(ui) {
                remaining -= 1;
                if remaining == 0 {
                    break;
                }
            }
            let c = grid.coords(ui);
            for (k, off) in st.offsets.iter().enumerate() {
                let mut ok = true;
                let mut n = [0usize; 3];
                for a in 0..3 {
                    let v = c[a] as i64 + off[a] as i64;
                    if v < lo[a] as i64 || v > hi[a] as i64 {
                        ok = false;
                        break;
                    }
                    n[a] = v as usize;
                }
                if !ok {
                    continue;
                }
                let vi = n[0] + dims[0] * (n[1] + dims[1] * n[2]);
                if self.done[vi] {
                    continue;
                }
                let nd = du.saturating_add(g.cost(ui, k, vi));
                if nd > bound {
                    continue;
                }
                let cur = self.dist[vi];
                if nd < cur {
                    if cur == u64::MAX {
                        self.touched.push(vi as u32);
                    }
                    self.dist[vi] = nd;
                    self.pred[vi] = u;
                    self.heap.push(Reverse((nd, vi as u32)));
                } else if nd == cur && self.pred[vi] != NONE && u < self.pred[vi] {
                    self.pred[vi] = u;
                }
            }
        }
        self.settled.len()
    }

    /// Final cost of a settled node.
    pub fn dist(&self, i: usize) -> Option<u64> {
        self.done[i].then_some(self.dist[i])
    }

    pub fn pred(&self, i: usize) -> u32 {
        self.pred[i]
    }

    /// Nodes settled by the last run, in settling order.
    pub fn settled(&self) -> &[u32] {
        &self.settled
    }

    /// Node path from the search root to `t`, or `None` if `t` is unsettled.
    pub fn path_to(&self, t: usize) -> Option<Vec<u32>> {
        if !self.done[t] {
            return None;
        }
        let mut out = vec![t as u32];
        let mut cur = self.pred[t];
        while cur != NONE {
            out.push(cur);
            cur = self.pred[cur as usize];
        }
        out.reverse();
        Some(out)
    }

    /// Copies the final costs of the last run into a dense tree.
    pub fn to_tree(&self) -> Tree {
        let mut dist = vec![u64::MAX; self.dist.len()];
        let mut pred = vec![NONE; self.dist.len()];
        for &i in &self.settled {
            dist[i as usize] = self.dist[i as usize];
            pred[i as usize] = self.pred[i as usize];
        }
        Tree { dist, pred }
    }
}

/// A complete shortest-path tree.
#[derive(Clone, Debug)]
pub struct Tree {
    pub dist: Vec<u64>,
    pub pred: Vec<u32>,
}

impl Tree {
    pub fn path_to(&self, t: usize) -> Option<Vec<u32>> {
        if self.dist[t] == u64::MAX {
            return None;
        }
        let mut out = vec![t as u32];
        let mut cur = self.pred[t];
        while cur != NONE {
            out.push(cur);
            cur = self.pred[cur as usize];
        }
        out.reverse();
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Unit {
        grid: Grid,
        st: Stencil,
    }

    impl EdgeCosts for Unit {
        fn grid(&self) -> &Grid {
            &self.grid
        }
        fn stencil(&self) -> &Stencil {
            &self.st
        }
        fn cost(&self, _: usize, k: usize, _: usize) -> u64 {
            (self.st.lens[k] * 1000.0).round() as u64
        }
    }

    fn unit(order: u32) -> Unit {
        Unit {
            grid: Grid::cube(2, 1.0, 4),
            st: Stencil::new(2, order).unwrap(),
        }
    }

    #[test]
    fn axis_distances_and_ties() {
        let u = unit(1);
        let mut ws = Workspace::new(u.grid.len());
        let s = u.grid.index([0, 0, 0]);
        ws.run(&u, &[(s, 0)], Limits::default());
        let t = u.grid.index([2, 2, 0]);
        assert_eq!(ws.dist(t), Some(4000));
        // Among the six equal-cost staircase paths the smallest-index
        // predecessor rule walks the bottom row first.
        let p = ws.path_to(t).unwrap();
        let cs: Vec<_> = p.iter().map(|&i| u.grid.coords(i as usize)).collect();
        assert_eq!(cs[1], [1, 0, 0]);
        assert_eq!(cs[2], [2, 0, 0]);
    }

    #[test]
    fn bounded_and_targeted_runs_agree_with_full() {
        let u = unit(3);
        let mut full = Workspace::new(u.grid.len());
        let s = u.grid.index([4, 4, 0]);
        full.run(&u, &[(s, 0)], Limits::default());
        let mut ws = Workspace::new(u.grid.len());
        let t = u.grid.index([6, 5, 0]);
        ws.run(&u, &[(s, 0)], Limits { targets: &[t], ..Default::default() });
        assert_eq!(ws.dist(t), full.dist(t));
        assert_eq!(ws.path_to(t), full.path_to(t));
        ws.run(&u, &[(s, 0)], Limits { bound: Some(1500), ..Default::default() });
        assert!(ws.settled().iter().all(|&i| full.dist(i as usize).unwrap() <= 1500));
        assert_eq!(ws.dist(u.grid.index([5, 5, 0])), Some(1414));
        assert_eq!(ws.dist(t), None);
    }

    #[test]
    fn repeated_targets_still_stop_the_search() {
        let u = unit(3);
        let mut ws = Workspace::new(u.grid.len());
        let s = u.grid.index([0, 0, 0]);
        let t = u.grid.index([1, 0, 0]);
        let n = ws.run(&u, &[(s, 0)], Limits { targets: &[t, t, s], ..Default::default() });
        assert!(n < 5, "settled {n} nodes");
        assert_eq!(ws.dist(t), Some(1000));
    }
}
