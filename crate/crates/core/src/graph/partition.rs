//! Coarse and fine cube partition of the box and the choice of its
//! resolution.
//!
//! Coarse cubes have side `R / n` (so `2n` per axis) and are split into
//! `m` fine cubes per axis; net vertices sit on the lattice of spacing
//! `R / (n m)`, which must be a sublattice of the oracle nodes.

use crate::dijkstra::{Limits, Workspace};
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::metric::{LatticeOracle, ModulusTable};

#[derive(Clone, Debug, PartialEq)]
pub struct GridPartition {
    pub d: usize,
    pub r: f64,
    pub n_bar: usize,
    pub m_bar: usize,
}

impl GridPartition {
    /// Vertex spacing `R / (n m)`.
    pub fn spacing(&self) -> f64 {
        self.r / (self.n_bar * self.m_bar) as f64
    }

    /// Net vertices per axis.
    pub fn per_axis(&self) -> usize {
        2 * self.n_bar * self.m_bar + 1
    }

    pub fn vertex_count(&self) -> usize {
        self.per_axis().pow(self.d as u32)
    }

    pub fn coarse_per_axis(&self) -> usize {
        2 * self.n_bar
    }

    /// Lattice coordinates (in net steps) of vertex `i`.
    pub fn vertex_coords(&self, i: usize) -> [usize; 3] {
        let n = self.per_axis();
        let mut c = [0; 3];
        let mut k = i;
        for v in c.iter_mut().take(self.d) {
            *v = k % n;
            k /= n;
        }
        c
    }

    pub fn vertex_index(&self, c: [usize; 3]) -> usize {
        let n = self.per_axis();
        let mut i = 0;
        for a in (0..self.d).rev() {
            i = i * n + c[a];
        }
        i
    }

    pub fn vertex_point(&self, i: usize) -> Point {
        let c = self.vertex_coords(i);
        let s = self.spacing();
        let mut p = Point::ORIGIN;
        for a in 0..self.d {
            p.0[a] = -self.r + c[a] as f64 * s;
        }
        p
    }

    /// Oracle node of vertex `i`; requires `n m` to divide the oracle's
    /// intervals per half axis.
    pub fn vertex_node(&self, oracle: &LatticeOracle, i: usize) -> usize {
        let step = oracle.n_half / (self.n_bar * self.m_bar);
        let c = self.vertex_coords(i);
        oracle.grid.index([c[0] * step, c[1] * step, c[2] * step])
    }

    /// Lower and upper corners of coarse cube `c` (indices in `0..2n`).
    pub fn coarse_box(&self, c: [usize; 3]) -> (Point, Point) {
        let side = self.r / self.n_bar as f64;
        let mut lo = Point::ORIGIN;
        let mut hi = Point::ORIGIN;
        for a in 0..self.d {
            lo.0[a] = -self.r + c[a] as f64 * side;
            hi.0[a] = lo.0[a] + side;
        }
        (lo, hi)
    }

    /// Fine cubes of coarse cube `c`, as lower corners in net steps.
    pub fn fine_cubes(&self, c: [usize; 3]) -> Vec<[usize; 3]> {
        let m = self.m_bar;
        let mut out = Vec::new();
        for k in 0..m.pow(self.d as u32) {
            let mut f = [0; 3];
            let mut r = k;
            for a in 0..self.d {
                f[a] = c[a] * m + r % m;
                r /= m;
            }
            out.push(f);
        }
        out
    }

    /// Whether the fine cubes of every coarse cube tile it exactly.
    pub fn check_tiling(&self) -> bool {
        let n = self.coarse_per_axis();
        let mut seen = vec![0u32; (n * self.m_bar).pow(self.d as u32)];
        let fine_axis = n * self.m_bar;
        for k in 0..n.pow(self.d as u32) {
            let mut c = [0; 3];
            let mut r = k;
            for v in c.iter_mut().take(self.d) {
                *v = r % n;
                r /= n;
            }
            let (lo, hi) = self.coarse_box(c);
            let s = self.spacing();
            for f in self.fine_cubes(c) {
                let mut idx = 0;
                for a in (0..self.d).rev() {
                    let x0 = -self.r + f[a] as f64 * s;
                    if x0 < lo.0[a] - 1e-12 || x0 + s > hi.0[a] + 1e-12 {
                        return false;
                    }
                    idx = idx * fine_axis + f[a];
                }
                seen[idx] += 1;
            }
        }
        seen.iter().all(|&v| v == 1)
    }
}

/// What `choose_grid` measured.
#[derive(Clone, Debug, PartialEq)]
pub struct GridReport {
    /// Largest measured diameter over inflated coarse cubes.
    pub max_cube_diameter: f64,
    pub cube_diameter_bound: f64,
    /// Required `n m` from the literal modulus condition.
    pub net_resolution_literal: f64,
    /// Required `n m` from the condition the trapping argument uses.
    pub net_resolution_required: f64,
    pub nearest_weight_bound: f64,
    pub n_candidates_measured: usize,
}

/// Measured diameter of the coarse cube `c` inflated by `R / (2n)`:
/// searches restricted to the inflated box from each of its corners. A
/// restricted search over-estimates the true metric, so passing is sound.
fn cube_diameter(
    oracle: &LatticeOracle,
    ws: &mut Workspace,
    n_bar: usize,
    c: [usize; 3],
    limit: u64,
) -> Option<u64> {
    let g = &oracle.grid;
    let nh = oracle.n_half;
    // Coarse side and inflation in oracle steps, rounded outward.
    let side = nh as f64 / n_bar as f64;
    let infl = side / 2.0;
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for a in 0..g.d {
        let l = (c[a] as f64 * side - infl).floor().max(0.0);
        let h = ((c[a] + 1) as f64 * side + infl).ceil().min((g.dims[a] - 1) as f64);
        lo[a] = l as usize;
        hi[a] = h as usize;
    }
    let box_nodes: usize = (0..g.d).map(|a| hi[a] - lo[a] + 1).product();
    let mut worst = 0u64;
    for corner in 0..(1usize << g.d) {
        let mut cc = lo;
        for a in 0..g.d {
            if corner >> a & 1 == 1 {
                cc[a] = hi[a];
            }
        }
        let s = g.index(cc);
        let settled = ws.run(
            oracle,
            &[(s, 0)],
            Limits {
                bound: Some(limit),
                targets: &[],
                clip: Some((lo, hi)),
            },
        );
        if settled < box_nodes {
            return None;
        }
        for &i in ws.settled() {
            worst = worst.max(ws.dist(i as usize).unwrap());
        }
    }
    Some(worst)
}

/// Largest measured inflated-cube diameter, or `None` as soon as a cube
/// exceeds `limit`.
pub fn measure_cube_diameter(oracle: &LatticeOracle, n_bar: usize, limit: f64) -> Option<f64> {
    let n = 2 * n_bar;
    let d = oracle.grid.d;
    let lim = oracle.scale.to_cost(limit).0;
    let mut ws = Workspace::new(oracle.grid.len());
    let mut worst = 0u64;
    for k in 0..n.pow(d as u32) {
        let mut c = [0; 3];
        let mut r = k;
        for v in c.iter_mut().take(d) {
            *v = r % n;
            r /= n;
        }
        worst = worst.max(cube_diameter(oracle, &mut ws, n_bar, c, lim)?);
    }
    Some(oracle.len_of(worst))
}

fn divisors(n: usize) -> Vec<usize> {
    (1..=n).filter(|k| n % k == 0).collect()
}

/// Smallest `n` whose inflated coarse cubes all have measured diameter at
/// most `eps / 64`, then the smallest `m` making nearest-neighbour weights
/// at most `eps / 128` and meeting both modulus conditions on `n m`.
pub fn choose_grid(oracle: &LatticeOracle, moduli: &ModulusTable, eps: f64) -> Result<(GridPartition, GridReport)> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::param("eps", format!("{eps} must be positive")));
    }
    let r = oracle.spec.r;
    let d = oracle.grid.d;
    let nh = oracle.n_half;
    let cands = divisors(nh);
    let target = eps / 64.0;
    // Start from the modulus estimate of the inflated-cube diagonal.
    let diag = |n: usize| 2.0 * r / n as f64 * (d as f64).sqrt();
    let mut i = cands
        .iter()
        .position(|&n| moduli.phi_at(diag(n)) <= target)
        .unwrap_or(cands.len() - 1);
    let mut measured = 0;
    let mut best: Option<(usize, f64)> = None;
    let mut failed_below = false;
    loop {
        let n = cands[i];
        measured += 1;
        match measure_cube_diameter(oracle, n, target) {
            Some(v) => {
                best = Some((n, v));
                if i == 0 || failed_below {
                    break;
                }
                i -= 1;
            }
            None => {
                if best.is_some() {
                    break;
                }
                failed_below = true;
                if i + 1 >= cands.len() {
                    break;
                }
                i += 1;
            }
        }
    }
    let (n_bar, max_cube_diameter) = best.ok_or_else(|| Error::Unsatisfiable {
        constraint: "cube_diameter",
        detail: format!(
            "no coarse subdivision of the oracle lattice (h = {}) gives inflated cube diameters <= {}; refine the oracle",
            oracle.h(),
            target
        ),
    })?;
    let net_resolution_literal = moduli.sup_ratio(moduli.psi(eps), 2.0 * r, 0.0) / (32.0 * eps);
    let nearest_weight_bound = eps / 128.0;
    let mut chosen = None;
    for m in 1..=nh / n_bar {
        let nm = n_bar * m;
        if nh % nm != 0 {
            continue;
        }
        let s = r / nm as f64;
        // The tube shell is below a quarter of the spacing, which bounds
        // the shift in the trapping ratio.
        let shift = s / 4.0;
        let net_resolution = 64.0 * r / eps * moduli.sup_ratio(moduli.psi(eps).max(shift * 2.0), 2.0 * r, shift);
        if moduli.phi_safe(s) <= nearest_weight_bound && nm as f64 >= net_resolution_literal && nm as f64 >= net_resolution {
            chosen = Some((m, net_resolution));
            break;
        }
    }
    let (m_bar, net_resolution_required) = chosen.ok_or_else(|| Error::Unsatisfiable {
        constraint: "nearest_weight/net_resolution",
        detail: format!(
            "n = {n_bar}: no fine subdivision dividing R/h = {nh} makes nearest-neighbour weights <= {nearest_weight_bound}; refine the oracle"
        ),
    })?;
    Ok((
        GridPartition { d, r, n_bar, m_bar },
        GridReport {
            max_cube_diameter,
            cube_diameter_bound: target,
            net_resolution_literal,
            net_resolution_required,
            nearest_weight_bound,
            n_candidates_measured: measured,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{moduli::default_scales, moduli, MetricSpec, ScalarField};

    #[test]
    fn tiling_and_indexing() {
        let p = GridPartition { d: 2, r: 1.0, n_bar: 2, m_bar: 3 };
        assert!(p.check_tiling());
        assert_eq!(p.per_axis(), 13);
        assert_eq!(p.fine_cubes([1, 0, 0]).len(), 9);
        let i = p.vertex_index([4, 7, 0]);
        assert_eq!(p.vertex_coords(i), [4, 7, 0]);
        let q = p.vertex_point(i);
        assert!((q.0[0] - (-1.0 + 4.0 / 6.0)).abs() < 1e-15);
        let p3 = GridPartition { d: 3, r: 2.0, n_bar: 1, m_bar: 2 };
        assert!(p3.check_tiling());
    }

    fn table(o: &LatticeOracle) -> ModulusTable {
        moduli(o, &default_scales(1.0, 2, o.h()), 4, 0).unwrap()
    }

    #[test]
    fn euclidean_choice_meets_the_measured_bound() {
        let o = LatticeOracle::build(MetricSpec::euclidean(2, 1.0), 1.0 / 120.0, 3, 1 << 22).unwrap();
        let t = table(&o);
        let eps = 8.0;
        let (p, rep) = choose_grid(&o, &t, eps).unwrap();
        // Inflated cube side 2R/n with diagonal 2 sqrt(2) R / n <= eps / 64.
        let need = (2.0 * 2f64.sqrt() * 64.0 / eps).ceil() as usize;
        assert!(p.n_bar >= need);
        assert!(rep.max_cube_diameter <= eps / 64.0);
        // The next smaller divisor of 120 fails the measurement.
        let smaller = (1..p.n_bar).rev().find(|k| 120 % k == 0).unwrap();
        assert!(measure_cube_diameter(&o, smaller, eps / 64.0).is_none());
        assert!(p.spacing() * (1.0 + o.tol_lat) * 1.1 <= eps / 128.0);
        // A zero density exponent is the same metric.
        let z = LatticeOracle::build(
            MetricSpec::conformal(2, 1.0, ScalarField::Const(0.0)),
            1.0 / 120.0,
            3,
            1 << 22,
        )
        .unwrap();
        assert_eq!(choose_grid(&z, &table(&z), eps).unwrap().0, p);
    }

    #[test]
    fn coarse_oracle_is_rejected() {
        let o = LatticeOracle::build(MetricSpec::euclidean(2, 1.0), 0.25, 3, 1 << 20).unwrap();
        let e = choose_grid(&o, &table(&o), 0.2).unwrap_err();
        assert!(e.to_string().contains("refine the oracle"), "{e}");
        assert!(choose_grid(&o, &table(&o), 0.0).is_err());
    }
}
