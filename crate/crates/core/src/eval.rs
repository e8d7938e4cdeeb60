//! Shortest paths in the conformal metric `e^f * D_0` on a lattice, and
//! the check that geodesics between tube points stay near the edge set.

use crate::cost::{Cost, Scale};
use crate::dijkstra::{EdgeCosts, Limits, Workspace};
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::graph::spatial::SegmentIndex;
use crate::lattice::{Grid, Stencil};
use crate::metric::oracle::scale_for;
use crate::metric::Path;
use crate::synth::ConformalField;

pub struct ConformalOracle {
    pub grid: Grid,
    pub stencil: Stencil,
    pub tol_lat: f64,
    pub scale: Scale,
    /// `e^f` at every node.
    pub ef: Vec<f64>,
    pub ef_bounds: (f64, f64),
    /// Per offset: index deltas of the nodes around the edge midpoint.
    mids: Vec<Vec<isize>>,
    /// Euclidean length of each offset.
    norms: Vec<f64>,
}

impl std::fmt::Debug for ConformalOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConformalOracle")
            .field("nodes", &self.grid.len())
            .field("h", &self.grid.h)
            .field("order", &self.stencil.order)
            .finish()
    }
}

impl EdgeCosts for ConformalOracle {
    fn grid(&self) -> &Grid {
        &self.grid
    }
    fn stencil(&self) -> &Stencil {
        &self.stencil
    }
    #[inline]
    fn cost(&self, node: usize, k: usize, nbr: usize) -> u64 {
        // Always evaluate from the lower index so both directions agree
        // bit for bit.
        let (base, k) = if node < nbr { (node, k) } else { (nbr, self.stencil.opposite[k]) };
        let m = &self.mids[k];
        let mut acc = 0.0;
        for &dl in m {
            acc += self.ef[(base as isize + dl) as usize];
        }
        self.scale.to_cost(self.norms[k] * (acc / m.len() as f64)).0
    }
}

impl ConformalOracle {
    /// Oracle over `grid` with nodal values `f`.
    pub fn new(grid: Grid, f: &[f64], order: u32) -> Result<ConformalOracle> {
        if f.len() != grid.len() {
            return Err(Error::Mismatch { what: "field samples", expected: grid.len().to_string(), found: f.len().to_string() });
        }
        if let Some(i) = f.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteField { point: grid.point(i).0 });
        }
        let stencil = Stencil::new(grid.d, order)?;
        let ef: Vec<f64> = f.iter().map(|v| v.exp()).collect();
        let ef_bounds = ef.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
        let r = -grid.origin.0[0];
        let tol_lat = stencil.tol_lat();
        let scale = scale_for(ef_bounds.1, r, grid.d, tol_lat);
        let strides = [1isize, grid.dims[0] as isize, (grid.dims[0] * grid.dims[1]) as isize];
        let mut mids = Vec::with_capacity(stencil.len());
        let mut norms = Vec::with_capacity(stencil.len());
        for o in &stencil.offsets {
            // Midpoint o/2: integer per axis when o is even, else the two
            // neighbouring integers.
            let mut deltas = vec![0isize];
            for a in 0..grid.d {
                let lo = o[a].div_euclid(2) as isize;
                let hi = lo + (o[a].rem_euclid(2) as isize);
                let mut next = Vec::new();
                for &dl in &deltas {
                    next.push(dl + lo * strides[a]);
                    if hi != lo {
                        next.push(dl + hi * strides[a]);
                    }
                }
                deltas = next;
            }
            mids.push(deltas);
            let v = Point([o[0] as f64 * grid.h, o[1] as f64 * grid.h, o[2] as f64 * grid.h]);
            norms.push(v.norm());
        }
        Ok(ConformalOracle { grid, stencil, tol_lat, scale, ef, ef_bounds, mids, norms })
    }

    /// Oracle at spacing at most `h_e`: the field lattice itself when
    /// `h_e >= h_f`, otherwise a finer lattice with interpolated samples.
    pub fn from_field(field: &ConformalField, h_e: Option<f64>, order: u32, node_budget: u64) -> Result<ConformalOracle> {
        let fg = &field.grid;
        match h_e {
            None => Self::new(fg.clone(), &field.f, order),
            Some(h) if h >= fg.h * (1.0 - 1e-12) => {
                if h > fg.h * (1.0 + 1e-12) {
                    return Err(Error::param("h_e", format!("{h} is coarser than the field spacing {}", fg.h)));
                }
                Self::new(fg.clone(), &field.f, order)
            }
            Some(h) => {
                let g = crate::synth::field::field_grid(field.params.r, fg.d, h, node_budget)?;
                let f: Vec<f64> = (0..g.len()).map(|i| field.value(g.point(i))).collect();
                Self::new(g, &f, order)
            }
        }
    }

    pub fn h(&self) -> f64 {
        self.grid.h
    }

    pub fn len_of(&self, c: u64) -> f64 {
        self.scale.to_len(Cost(c))
    }

    pub fn snap(&self, p: Point) -> Result<usize> {
        self.grid.snap(p)
    }

    /// `e^f D_0` distance between the nodes nearest to `x` and `y`.
    pub fn ef_dist(&self, ws: &mut Workspace, x: Point, y: Point) -> Result<f64> {
        let (a, b) = (self.snap(x)?, self.snap(y)?);
        ws.run(self, &[(a, 0)], Limits { targets: &[b], ..Default::default() });
        ws.dist(b).map(|c| self.len_of(c)).ok_or(Error::Disconnected { from: a, to: b })
    }

    pub fn ef_geodesic(&self, ws: &mut Workspace, x: Point, y: Point) -> Result<Path> {
        let (a, b) = (self.snap(x)?, self.snap(y)?);
        ws.run(self, &[(a, 0)], Limits { targets: &[b], ..Default::default() });
        let c = ws.dist(b).ok_or(Error::Disconnected { from: a, to: b })?;
        let nodes = ws.path_to(b).ok_or(Error::Disconnected { from: a, to: b })?;
        Path::new(nodes.iter().map(|&i| self.grid.point(i as usize)).collect(), self.len_of(c))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trapped {
    pub inside: bool,
    /// Largest Euclidean distance from a path vertex to the edge set.
    pub max_excursion: f64,
    pub threshold: f64,
}

/// Whether every vertex of `path` lies within `eta + eta_bar/2 + slack` of
/// the edge set; endpoints must lie within `eta`.
pub fn check_trapped(path: &Path, edges: &SegmentIndex, eta: f64, eta_bar: f64, slack: f64) -> Result<Trapped> {
    let dist = |p: Point| edges.nearest(p).map(|(r, _)| r).unwrap_or(f64::INFINITY);
    let (Some(first), Some(last)) = (path.pts.first(), path.pts.last()) else {
        return Err(Error::Empty("path"));
    };
    for p in [first, last] {
        let r = dist(*p);
        if r > eta {
            return Err(Error::param("path", format!("endpoint {:?} is {r:e} from the edge set, beyond eta = {eta:e}", p.0)));
        }
    }
    let max_excursion = path.pts.iter().map(|p| dist(*p)).fold(0.0, f64::max);
    let threshold = eta + eta_bar / 2.0 + slack;
    Ok(Trapped { inside: max_excursion <= threshold, max_excursion, threshold })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, VertexKind, WeightedGraph};
    use crate::metric::{LatticeOracle, MetricSpec};

    #[test]
    fn zero_field_reproduces_the_euclidean_oracle() {
        let e = LatticeOracle::build(MetricSpec::euclidean(2, 1.0), 0.05, 3, 1 << 20).unwrap();
        let zero = vec![0.0; e.grid.len()];
        let c = ConformalOracle::new(e.grid.clone(), &zero, 3).unwrap();
        assert_eq!(c.scale, e.scale);
        for i in (0..e.grid.len()).step_by(7) {
            for k in 0..e.stencil.len() {
                if let Some(j) = e.grid.neighbor(i, e.stencil.offsets[k]) {
                    assert_eq!(c.cost(i, k, j), e.cost(i, k, j));
                }
            }
        }
        let mut ws = Workspace::new(e.grid.len());
        let (x, y) = (Point::new2(-0.8, 0.3), Point::new2(0.65, -0.55));
        assert_eq!(c.ef_dist(&mut ws, x, y).unwrap(), e.dist(x, y).unwrap());
        assert_eq!(c.ef_dist(&mut ws, x, x).unwrap(), 0.0);
    }

    #[test]
    fn constant_field_doubles_costs_and_costs_are_symmetric() {
        let g = Grid::cube(2, 1.0, 10);
        let c0 = ConformalOracle::new(g.clone(), &vec![0.0; g.len()], 2).unwrap();
        let c1 = ConformalOracle::new(g.clone(), &vec![2f64.ln(); g.len()], 2).unwrap();
        let i = g.index([4, 4, 0]);
        for k in 0..c0.stencil.len() {
            let j = g.neighbor(i, c0.stencil.offsets[k]).unwrap();
            let (a, b) = (c0.len_of(c0.cost(i, k, j)), c1.len_of(c1.cost(i, k, j)));
            assert!((b / a - 2.0).abs() < 1e-9);
            let back = c0.stencil.opposite[k];
            assert_eq!(c1.cost(i, k, j), c1.cost(j, back, i));
        }
        // Plateau: an axis step costs h e^{C}.
        let j = g.index([5, 4, 0]);
        let k = c1.stencil.offsets.iter().position(|o| *o == [1, 0, 0]).unwrap();
        assert!((c1.len_of(c1.cost(i, k, j)) - 0.1 * 2.0).abs() < 1e-12);
    }

    #[test]
    fn midpoint_uses_the_surrounding_nodes() {
        let g = Grid::cube(2, 1.0, 4);
        let f: Vec<f64> = (0..g.len()).map(|i| (g.coords(i)[0] as f64).ln_1p()).collect();
        let c = ConformalOracle::new(g.clone(), &f, 3).unwrap();
        let i = g.index([2, 2, 0]);
        // Knight move (2, 1): midpoint x = 3, between rows 2 and 3.
        let k = c.stencil.offsets.iter().position(|o| *o == [2, 1, 0]).unwrap();
        let j = g.neighbor(i, [2, 1, 0]).unwrap();
        let want = 5f64.sqrt() * g.h * 4.0;
        assert!((c.len_of(c.cost(i, k, j)) - want).abs() < 1e-12);
    }

    fn one_edge_index() -> SegmentIndex {
        let v = vec![Point::new2(-0.5, 0.0), Point::new2(0.5, 0.0)];
        let g = WeightedGraph::new(2, 1.0, 1, 1, 0.0, 1, v, vec![VertexKind::Net; 2], vec![Edge { u: 0, v: 1, w: 1.0, ell0: 1.0 }]);
        SegmentIndex::new(&g.vertices, &g.edges, 0.1)
    }

    #[test]
    fn trapping_classification() {
        let idx = one_edge_index();
        let on = Path::new(vec![Point::new2(-0.4, 0.0), Point::new2(0.0, 0.01), Point::new2(0.4, 0.0)], 1.0).unwrap();
        let t = check_trapped(&on, &idx, 0.02, 0.01, 0.0).unwrap();
        assert!(t.inside && (t.max_excursion - 0.01).abs() < 1e-15);
        let off = Path::new(vec![Point::new2(-0.4, 0.0), Point::new2(0.0, 0.2), Point::new2(0.4, 0.0)], 1.0).unwrap();
        let t = check_trapped(&off, &idx, 0.02, 0.01, 0.0).unwrap();
        assert!(!t.inside && (t.max_excursion - 0.2).abs() < 1e-15);
        let bad = Path::new(vec![Point::new2(-0.4, 0.5), Point::new2(0.4, 0.0)], 1.0).unwrap();
        assert!(check_trapped(&bad, &idx, 0.02, 0.01, 0.0).is_err());
    }
}
