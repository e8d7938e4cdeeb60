//! The conformal factor: far-field plateau `C1`, a wall at level `C0`
//! around the tube boundary, zero inside the tubes, plus edge bumps that
//! make the straight edges cost their weights.

use crate::digest::sha256_hex;
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::graph::io::graph_hash;
use crate::graph::WeightedGraph;
use crate::grid_io::GridData;
use crate::lattice::Grid;
use crate::metric::oracle::intervals;
use crate::synth::edf::{BumpSpec, EdgeDistanceField};
use crate::synth::params::SynthParams;

/// `3t^2 - 2t^3` on `[0, 1]`, clamped outside.
pub fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Band profile in the distance `r` to the edge set.
pub fn f_ext(r: f64, p: &SynthParams) -> f64 {
    let (e, b) = (p.eta, p.eta_bar);
    if r <= e - b {
        0.0
    } else if r < e - b / 2.0 {
        p.c0 * smoothstep((r - (e - b)) / (b / 2.0))
    } else if r <= e + b / 2.0 {
        p.c0
    } else if r < e + b {
        p.c0 + (p.c1 - p.c0) * smoothstep((r - (e + b / 2.0)) / (b / 2.0))
    } else {
        p.c1
    }
}

/// Cube lattice with spacing at most `h`.
pub fn field_grid(r: f64, d: usize, h: f64, node_budget: u64) -> Result<Grid> {
    let n_half = intervals(r, h)?;
    let nodes = (2 * n_half as u64 + 1).saturating_pow(d as u32);
    if nodes > node_budget {
        return Err(Error::OverBudget { what: "field lattice", required: nodes, budget: node_budget });
    }
    Ok(Grid::cube(d, r, n_half))
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldReport {
    pub f_min: f64,
    pub f_max: f64,
    /// Largest difference between adjacent samples (order-2 neighbours).
    pub max_jump: f64,
    /// Lipschitz bound of the transitions times the neighbour distance.
    pub jump_bound: f64,
    pub max_tubes: usize,
    pub max_abs_core: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConformalField {
    pub grid: Grid,
    pub f: Vec<f64>,
    pub params: SynthParams,
    pub graph_hash: String,
}

/// Bump cores `log(w_e / ell0(e))`.
pub fn cores(g: &WeightedGraph) -> Result<Vec<f64>> {
    g.edges
        .iter()
        .map(|e| {
            if e.w > 0.0 && e.ell0 > 0.0 {
                Ok((e.w / e.ell0).ln())
            } else {
                Err(Error::param("edge", format!("weight {} and length {} must be positive", e.w, e.ell0)))
            }
        })
        .collect()
}

/// Samples `f = blended bumps + F_ext` on a lattice of spacing at most `h_f`.
pub fn synthesize(g: &WeightedGraph, p: &SynthParams, h_f: f64, node_budget: u64) -> Result<(ConformalField, FieldReport)> {
    if !(h_f > 0.0 && h_f <= p.eta_bar / 4.0) {
        return Err(Error::param(
            "h_f",
            format!("{h_f:e} is too coarse: the shell needs h_f <= eta_bar / 4 = {:e}", p.eta_bar / 4.0),
        ));
    }
    let grid = field_grid(p.r, p.d, h_f, node_budget)?;
    let cores = cores(g)?;
    let edf = EdgeDistanceField::build(g, grid.clone(), p.eta + p.eta_bar, Some(BumpSpec { eta: p.eta, cores: &cores }));
    let f: Vec<f64> = edf.dist.iter().zip(&edf.bump).map(|(r, b)| b + f_ext(*r, p)).collect();
    let max_abs_core = cores.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let field = ConformalField { grid, f, params: p.clone(), graph_hash: graph_hash(g) };
    let report = field.report(edf.max_tubes, max_abs_core);
    Ok((field, report))
}

impl ConformalField {
    /// Range and continuity measurements; `max_tubes` and `max_abs_core`
    /// come from the edge distance field and the graph.
    pub fn report(&self, max_tubes: usize, max_abs_core: f64) -> FieldReport {
        let p = &self.params;
        let g = &self.grid;
        let step = g.h * (g.d as f64).sqrt();
        let lip_ext = 3.0 * p.c0.abs().max((p.c1 - p.c0).abs()) / p.eta_bar;
        let lip_bump = 6.0 * max_tubes as f64 * max_abs_core / p.eta;
        let mut max_jump = 0.0f64;
        let offs: Vec<[i32; 3]> = crate::lattice::Stencil::new(g.d, 2).map(|s| s.offsets).unwrap_or_default();
        for i in 0..g.len() {
            for o in &offs {
                if o.iter().any(|v| *v < 0) {
                    continue;
                }
                if let Some(j) = g.neighbor(i, *o) {
                    max_jump = max_jump.max((self.f[i] - self.f[j]).abs());
                }
            }
        }
        FieldReport {
            f_min: self.f.iter().copied().fold(f64::INFINITY, f64::min),
            f_max: self.f.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            max_jump,
            jump_bound: (lip_ext + lip_bump) * step,
            max_tubes,
            max_abs_core,
        }
    }

    pub fn value(&self, p: Point) -> f64 {
        self.grid.interp(&self.f, p)
    }

    pub fn to_grid_data(&self) -> GridData {
        GridData { grid: self.grid.clone(), values: self.f.clone() }
    }

    pub fn hash(&self) -> String {
        sha256_hex(&crate::grid_io::to_binary(&self.to_grid_data()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, VertexKind};
    use crate::synth::params::Constraint;

    fn params(eta: f64, eta_bar: f64, c0: f64, c1: f64) -> SynthParams {
        SynthParams {
            eps: 1.0,
            r: 1.0,
            d: 2,
            n_bar: 1,
            m_bar: 1,
            k: 1,
            tau: 0.0,
            eta,
            eta_bar,
            c0,
            c1,
            edges: 1,
            psi: 1.0,
            constraints: Vec::<Constraint>::new(),
        }
    }

    #[test]
    fn band_values() {
        let p = params(0.1, 0.02, 3.0, 1.0);
        assert_eq!(f_ext(0.0, &p), 0.0);
        assert_eq!(f_ext(0.08, &p), 0.0);
        assert_eq!(f_ext(0.1, &p), 3.0);
        assert_eq!(f_ext(0.091, &p), 3.0);
        assert_eq!(f_ext(0.2, &p), 1.0);
        assert_eq!(f_ext(0.12, &p), 1.0);
        assert!((f_ext(0.085, &p) - 1.5).abs() < 1e-12);
        assert!((f_ext(0.115, &p) - 2.0).abs() < 1e-12);
        // Monotone on each band.
        let mut prev = 0.0;
        for i in 0..=1000 {
            let v = f_ext(0.08 + 0.02 * i as f64 / 1000.0, &p);
            assert!(v >= prev);
            prev = v;
        }
        for i in 0..=1000 {
            let v = f_ext(0.1 + 0.02 * i as f64 / 1000.0, &p);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn smoothstep_basics() {
        assert_eq!(smoothstep(0.0), 0.0);
        assert_eq!(smoothstep(1.0), 1.0);
        assert_eq!(smoothstep(0.5), 0.5);
        assert_eq!(smoothstep(-1.0), 0.0);
    }

    fn one_edge(ratio: f64) -> WeightedGraph {
        let v = vec![Point::new2(-0.5, 0.0), Point::new2(0.5, 0.0)];
        let e = vec![Edge { u: 0, v: 1, w: ratio, ell0: 1.0 }];
        WeightedGraph::new(2, 1.0, 1, 1, 0.0, 1, v, vec![VertexKind::Net; 2], e)
    }

    #[test]
    fn ratio_one_edge_gives_pure_band_field() {
        let g = one_edge(1.0);
        let p = params(0.1, 0.04, 3.0, 1.0);
        let (field, rep) = synthesize(&g, &p, 0.01, 1 << 20).unwrap();
        let at = |x: f64, y: f64| field.f[field.grid.snap(Point::new2(x, y)).unwrap()];
        assert_eq!(at(0.0, 0.0), 0.0);
        assert_eq!(at(0.0, 0.1), 3.0);
        assert_eq!(at(0.0, 0.5), 1.0);
        assert_eq!(rep.f_max, 3.0);
        assert_eq!(rep.f_min, 0.0);
        assert!(rep.max_jump <= rep.jump_bound);
        assert_eq!(field.graph_hash, graph_hash(&g));
    }

    #[test]
    fn doubled_edge_has_log2_core() {
        let g = one_edge(2.0);
        let p = params(0.1, 0.04, 3.0, 1.0);
        let (field, rep) = synthesize(&g, &p, 0.01, 1 << 20).unwrap();
        let at = |x: f64, y: f64| field.f[field.grid.snap(Point::new2(x, y)).unwrap()];
        assert_eq!(at(0.2, 0.0), 2f64.ln());
        assert_eq!(at(0.2, 0.04), 2f64.ln());
        // Inside the bump transition the value is the smoothstep fraction
        // of the core on top of the band profile.
        let v = 2f64.ln() * (1.0 - smoothstep((0.07 - 0.05) / 0.05)) + f_ext(0.07, &p);
        assert!((at(0.2, 0.07) - v).abs() < 1e-12);
        let bump_only = v - f_ext(0.07, &p);
        assert!(bump_only > 0.0 && bump_only < 2f64.ln());
        // The wall overlaps the fading bump.
        assert!(rep.f_max > 3.0 && rep.f_max <= 3.0 + 2f64.ln());
        assert!(rep.max_jump <= rep.jump_bound);
    }

    #[test]
    fn coarse_spacing_is_rejected() {
        let g = one_edge(1.0);
        let p = params(0.1, 0.04, 3.0, 1.0);
        assert!(synthesize(&g, &p, 0.011, 1 << 20).is_err());
    }
}
