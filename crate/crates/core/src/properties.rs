use proptest::prelude::*;

use crate::dijkstra::{EdgeCosts, Limits, Workspace};
use crate::eval::ConformalOracle;
use crate::geom::Point;
use crate::graph::io as graph_io;
use crate::graph::{Edge, VertexKind, WeightedGraph};
use crate::grid_io::{self, GridData};
use crate::lattice::Grid;
use crate::metric::{path_length, Euclid, LatticeOracle, MetricSpec, ScalarField};
use crate::synth::{f_ext, SynthParams};

fn gauss(a: f64, s: f64) -> MetricSpec {
    MetricSpec::conformal(2, 1.0, ScalarField::Gauss { a, s })
}

/// Exact integer distances between `nodes`.
fn matrix<C: EdgeCosts>(c: &C, nodes: &[usize]) -> Vec<Vec<u64>> {
    let mut ws = Workspace::new(c.grid().len());
    nodes
        .iter()
        .map(|&s| {
            ws.run(c, &[(s, 0)], Limits { targets: nodes, ..Default::default() });
            nodes.iter().map(|&t| ws.dist(t).unwrap()).collect()
        })
        .collect()
}

fn assert_metric(m: &[Vec<u64>], nodes: &[usize]) -> Result<(), TestCaseError> {
    let n = nodes.len();
    for i in 0..n {
        prop_assert_eq!(m[i][i], 0);
        for j in 0..n {
            prop_assert_eq!(m[i][j], m[j][i]);
            prop_assert_eq!(m[i][j] == 0, nodes[i] == nodes[j]);
            for k in 0..n {
                prop_assert!(m[i][k] <= m[i][j] + m[j][k]);
            }
        }
    }
    Ok(())
}

fn band_params(eta: f64, frac: f64, c0: f64, c1: f64) -> SynthParams {
    SynthParams {
        eps: 1.0,
        r: 1.0,
        d: 2,
        n_bar: 1,
        m_bar: 1,
        k: 1,
        tau: 0.0,
        eta,
        eta_bar: eta * frac,
        c0,
        c1,
        edges: 1,
        psi: 1.0,
        constraints: Vec::new(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn metric_oracle_distances_form_a_metric(
        a in -1.0f64..1.0,
        s in 0.1f64..1.0,
        order in 1u32..=3,
        idx in prop::collection::vec(0usize..33 * 33, 6),
    ) {
        let o = LatticeOracle::build(gauss(a, s), 1.0 / 16.0, order, 1 << 20).unwrap();
        let m = matrix(&o, &idx);
        assert_metric(&m, &idx)?;
    }

    #[test]
    fn conformal_oracle_distances_form_a_metric(
        f in prop::collection::vec(-1.5f64..1.5, 17 * 17),
        order in 1u32..=3,
        idx in prop::collection::vec(0usize..17 * 17, 6),
    ) {
        let g = Grid::cube(2, 1.0, 8);
        let c = ConformalOracle::new(g, &f, order).unwrap();
        let m = matrix(&c, &idx);
        assert_metric(&m, &idx)?;
    }

    #[test]
    fn conformal_costs_agree_in_both_directions(
        f in prop::collection::vec(-2.0f64..2.0, 13 * 13),
        node in 0usize..13 * 13,
    ) {
        let c = ConformalOracle::new(Grid::cube(2, 1.0, 6), &f, 3).unwrap();
        for k in 0..c.stencil.len() {
            if let Some(j) = c.grid.neighbor(node, c.stencil.offsets[k]) {
                prop_assert_eq!(c.cost(node, k, j), c.cost(j, c.stencil.opposite[k], node));
                prop_assert!(c.cost(node, k, j) > 0);
            }
        }
    }

    #[test]
    fn euclidean_refinement_never_lengthens(
        a in (0usize..17, 0usize..17),
        b in (0usize..17, 0usize..17),
        order in 1u32..=3,
    ) {
        let coarse = LatticeOracle::build(MetricSpec::euclidean(2, 1.0), 1.0 / 8.0, order, 1 << 20).unwrap();
        let fine = LatticeOracle::build(MetricSpec::euclidean(2, 1.0), 1.0 / 16.0, order, 1 << 20).unwrap();
        let (x, y) = (coarse.grid.point_of([a.0, a.1, 0]), coarse.grid.point_of([b.0, b.1, 0]));
        let (dc, df) = (coarse.dist(x, y).unwrap(), fine.dist(x, y).unwrap());
        prop_assert!(df <= dc + 1e-12, "fine {df} coarse {dc}");
        prop_assert!(df >= x.dist(y) * (1.0 - 1e-12));
    }

    #[test]
    fn bounded_search_settles_exactly_the_cheap_nodes(
        a in -1.0f64..1.0,
        src in 0usize..25 * 25,
        frac in 0.05f64..0.9,
    ) {
        let o = LatticeOracle::build(gauss(a, 0.4), 1.0 / 12.0, 2, 1 << 20).unwrap();
        let mut ws = Workspace::new(o.grid.len());
        ws.run(&o, &[(src, 0)], Limits::default());
        let full: Vec<Option<u64>> = (0..o.grid.len()).map(|i| ws.dist(i)).collect();
        let bound = (*full.iter().flatten().max().unwrap() as f64 * frac) as u64;
        ws.run(&o, &[(src, 0)], Limits { bound: Some(bound), ..Default::default() });
        for (i, d) in full.iter().enumerate() {
            let d = d.unwrap();
            prop_assert_eq!(ws.dist(i), (d <= bound).then_some(d));
        }
    }

    #[test]
    fn constant_factor_scales_polyline_length(
        c in -3.0f64..3.0,
        pts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2..8),
    ) {
        let pts: Vec<Point> = pts.into_iter().map(|(x, y)| Point::new2(x, y)).collect();
        let spec = MetricSpec::conformal(2, 1.0, ScalarField::Const(c));
        let (l, l0) = (path_length(&spec, &pts).unwrap(), path_length(&Euclid, &pts).unwrap());
        prop_assert!((l - c.exp() * l0).abs() <= 1e-9 * l.max(1e-300));
    }
}

proptest! {
    #[test]
    fn band_profile_is_bounded_and_lipschitz(
        eta in 1e-3f64..0.5,
        frac in 0.05f64..0.95,
        c0 in 0.5f64..8.0,
        c1 in 0.0f64..8.0,
        r in 0.0f64..1.0,
        dr in 0.0f64..1e-3,
    ) {
        let c1 = c1.min(c0 * 0.99);
        let p = band_params(eta, frac, c0, c1);
        let (v, w) = (f_ext(r, &p), f_ext(r + dr, &p));
        prop_assert!((0.0..=c0).contains(&v));
        let lip = 3.0 * c0.max(c0 - c1) / p.eta_bar;
        prop_assert!((v - w).abs() <= lip * dr * (1.0 + 1e-9) + 1e-15);
        if r <= eta - p.eta_bar {
            prop_assert_eq!(v, 0.0);
        }
        if r >= eta + p.eta_bar {
            prop_assert_eq!(v, c1);
        }
    }

    #[test]
    fn grid_files_round_trip_exactly(
        n in 1usize..6,
        vals in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO, 121),
    ) {
        let grid = Grid::cube(2, 1.0, n);
        let values = vals[..grid.len()].to_vec();
        let data = GridData { grid, values };
        let text = grid_io::parse(grid_io::to_text(&data).as_bytes(), "t").unwrap();
        let bin = grid_io::parse(&grid_io::to_binary(&data), "b").unwrap();
        prop_assert_eq!(&text, &data);
        prop_assert_eq!(&bin, &data);
    }

    #[test]
    fn graph_files_round_trip_exactly(
        pts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2..12),
        tau in 1e-6f64..1e-2,
    ) {
        let v: Vec<Point> = pts.into_iter().map(|(x, y)| Point::new2(x, y)).collect();
        let kinds: Vec<VertexKind> =
            (0..v.len()).map(|i| [VertexKind::Net, VertexKind::Merge, VertexKind::Subdivision][i % 3]).collect();
        let edges: Vec<Edge> = (1..v.len())
            .map(|i| {
                let ell0 = v[i - 1].dist(v[i]);
                Edge { u: i as u32 - 1, v: i as u32, w: ell0 * 1.25, ell0 }
            })
            .collect();
        let g = WeightedGraph::new(2, 1.0, 3, 2, tau, 4, v, kinds, edges);
        let back = graph_io::parse(&graph_io::to_text(&g), "g").unwrap().graph;
        prop_assert_eq!(graph_io::graph_hash(&back), graph_io::graph_hash(&g));
        prop_assert_eq!(back, g);
    }
}
