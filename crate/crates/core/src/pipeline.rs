//! End-to-end construction and the artifacts it leaves on disk.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::graph::io::{self as graph_io, graph_hash};
use crate::graph::{
    assign_weights, build_g1, choose_grid, choose_tau_k, insert_merge_vertices, linearize, untangle, EdgeArcs,
    GridReport, LinearizeReport, PlanarReport, UntangleReport, WeightedGraph,
};
use crate::grid_io::{self, fmt_f64};
use crate::metric::{default_scales, moduli, LatticeOracle, ModulusTable};
use crate::synth::{choose_params, synthesize, ConformalField, FieldReport, SynthParams};

pub const GRAPH_FILE: &str = "graph.txt";
pub const FIELD_FILE: &str = "field.grid";
pub const PARAMS_FILE: &str = "params.txt";
pub const REPORT_FILE: &str = "report.txt";

/// Salt mixed into the seed for the modulus sources.
const MODULI_SALT: u64 = 0x6d6f_6475_6c69;
/// Rounds of construction-epsilon adjustment against the field budget.
const PLAN_ROUNDS: usize = 4;

/// Stage measurements; timings never reach the artifacts.
#[derive(Clone, Debug)]
pub struct BuildReport {
    pub eps_construct: f64,
    pub plan_rounds: usize,
    pub grid: GridReport,
    pub geodesics: usize,
    pub untangle: UntangleReport,
    pub planar: PlanarReport,
    pub linearize: LinearizeReport,
    pub field: FieldReport,
    pub h_f: f64,
    pub timings: Vec<(&'static str, Duration)>,
}

/// Graph and parameters at one construction epsilon.
struct GraphStage {
    graph: WeightedGraph,
    params: SynthParams,
    grid: GridReport,
    geodesics: usize,
    untangle: UntangleReport,
    planar: PlanarReport,
    linearize: LinearizeReport,
}

pub struct Instance {
    pub config: RunConfig,
    pub oracle: LatticeOracle,
    pub moduli: ModulusTable,
    pub graph: WeightedGraph,
    pub params: SynthParams,
    pub field: ConformalField,
    pub field_report: FieldReport,
    pub build: Option<BuildReport>,
}

fn timed<T>(timings: &mut Vec<(&'static str, Duration)>, name: &'static str, f: impl FnOnce() -> T) -> T {
    let t = Instant::now();
    let v = f();
    timings.push((name, t.elapsed()));
    v
}

pub fn build_oracle(c: &RunConfig) -> Result<LatticeOracle> {
    LatticeOracle::build(c.metric.clone(), c.h, c.order, c.node_budget)
}

pub fn build_moduli(c: &RunConfig, oracle: &LatticeOracle) -> Result<ModulusTable> {
    let step = c.moduli_step.unwrap_or(c.h);
    moduli(oracle, &default_scales(c.metric.r, c.metric.d, step), c.moduli_sources, c.seed ^ MODULI_SALT)
}

fn build_graph(
    c: &RunConfig,
    oracle: &LatticeOracle,
    table: &ModulusTable,
    eps: f64,
    timings: &mut Vec<(&'static str, Duration)>,
) -> Result<GraphStage> {
    let (part, grid) = timed(timings, "grid", || choose_grid(oracle, table, eps))?;
    let g1 = timed(timings, "geodesics", || build_g1(oracle, &part, c.c_pair))?;
    let (g2, ur) = timed(timings, "untangle", || untangle(oracle, &g1, c.untangle_sweeps))?;
    let (g3, pr) = timed(timings, "planar", || insert_merge_vertices(oracle, &part, &g2));
    let (mut graph, lr) = timed(timings, "linearize", || {
        let arcs = EdgeArcs::new(&oracle.spec, &g3);
        let (tau, k) = choose_tau_k(&g3, &arcs, oracle.density_bounds.0, eps, oracle.h());
        linearize(&g3, &arcs, &part, tau, k, c.linearize_attempts)
    })?;
    timed(timings, "weights", || assign_weights(&mut graph, oracle))?;
    timed(timings, "connected", || graph.check_connected())?;
    let params = timed(timings, "params", || choose_params(&graph, table, eps))?;
    Ok(GraphStage { graph, params, grid, geodesics: g1.len(), untangle: ur, planar: pr, linearize: lr })
}

/// Field spacing for the chosen parameters.
pub fn field_spacing(c: &RunConfig, p: &SynthParams) -> f64 {
    let raw = c.h_f.unwrap_or(p.eta_bar / c.h_f_factor);
    let n = (p.r / raw).ceil().max(1.0);
    p.r / n
}

fn field_nodes(r: f64, d: usize, h_f: f64) -> f64 {
    (2.0 * (r / h_f).round() + 1.0).powi(d as i32)
}

/// Opening guess for the construction epsilon: the bump radius scales as
/// `eps / (1024 rho_max)` and the shell needs `h_f_factor` samples across
/// half of it, so the finest field lattice the budget allows fixes `eps`.
pub fn initial_eps(c: &RunConfig, oracle: &LatticeOracle) -> f64 {
    if let Some(e) = c.eps_construct {
        return e;
    }
    let r = c.metric.r;
    let per_axis = (c.field_budget as f64).powf(1.0 / c.metric.d as f64).floor();
    let n_half = ((per_axis - 1.0) / 2.0).floor().max(1.0);
    let h_f_min = r / n_half;
    let rho = oracle.density_bounds.1 * (1.0 + oracle.tol_lat);
    (2048.0 * rho * c.h_f_factor * h_f_min).max(c.eps)
}

/// Builds the whole instance. `log` receives one line per finished stage.
pub fn build(c: &RunConfig, log: &dyn Fn(&str)) -> Result<Instance> {
    let mut timings = Vec::new();
    let oracle = timed(&mut timings, "oracle", || build_oracle(c))?;
    log(&format!("oracle: {} nodes, tol_lat {:.4}", oracle.grid.len(), oracle.tol_lat));
    let table = timed(&mut timings, "moduli", || build_moduli(c, &oracle))?;
    let mut eps = initial_eps(c, &oracle);
    let mut rounds = 0;
    let stage = loop {
        rounds += 1;
        log(&format!("graph at eps_construct = {eps}"));
        let s = match build_graph(c, &oracle, &table, eps, &mut timings) {
            Ok(s) => s,
            Err(e @ (Error::Unsatisfiable { .. } | Error::SegmentsIntersect { .. }))
                if c.eps_construct.is_none() && rounds < PLAN_ROUNDS =>
            {
                log(&format!("  {e}; doubling"));
                eps *= 2.0;
                continue;
            }
            Err(e) => return Err(e),
        };
        let h_f = field_spacing(c, &s.params);
        let need = field_nodes(c.metric.r, c.metric.d, h_f);
        log(&format!(
            "  {} vertices, {} edges, eta {:e}, eta_bar {:e}, h_f {:e}, {} field nodes",
            s.graph.vertices.len(),
            s.graph.edges.len(),
            s.params.eta,
            s.params.eta_bar,
            h_f,
            need
        ));
        if need <= c.field_budget as f64 || c.eps_construct.is_some() || rounds >= PLAN_ROUNDS {
            break s;
        }
        eps *= (need / c.field_budget as f64).powf(1.0 / c.metric.d as f64) * 1.05;
    };
    let h_f = field_spacing(c, &stage.params);
    let (field, fr) = timed(&mut timings, "field", || synthesize(&stage.graph, &stage.params, h_f, c.field_budget))?;
    log(&format!("field: {} nodes, f in [{:.4}, {:.4}]", field.grid.len(), fr.f_min, fr.f_max));
    let build = BuildReport {
        eps_construct: eps,
        plan_rounds: rounds,
        grid: stage.grid,
        geodesics: stage.geodesics,
        untangle: stage.untangle,
        planar: stage.planar,
        linearize: stage.linearize,
        field: fr,
        h_f,
        timings,
    };
    Ok(Instance {
        config: c.clone(),
        oracle,
        moduli: table,
        graph: stage.graph,
        params: stage.params,
        field,
        field_report: build.field.clone(),
        build: Some(build),
    })
}

pub fn out_dir(c: &RunConfig) -> PathBuf {
    c.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_graph(dir: &Path, c: &RunConfig, g: &WeightedGraph) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(&dir.join(GRAPH_FILE), graph_io::to_text_with_meta(g, &[("config_hash", c.hash())]).as_bytes())
}

pub fn write_field(dir: &Path, c: &RunConfig, f: &ConformalField, fr: &FieldReport) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = [
        ("config_hash", c.hash()),
        ("graph_hash", f.graph_hash.clone()),
        ("max_tubes", fr.max_tubes.to_string()),
        ("max_abs_core", fmt_f64(fr.max_abs_core)),
    ];
    write(&dir.join(FIELD_FILE), &grid_io::to_binary_with_meta(&f.to_grid_data(), &meta))
}

pub fn params_text(c: &RunConfig, p: &SynthParams, graph: &str, field: &str) -> String {
    let mut s = p.to_text();
    writeln!(s, "graph_hash = {graph}").unwrap();
    writeln!(s, "field_hash = {field}").unwrap();
    writeln!(s, "config_hash = {}", c.hash()).unwrap();
    s
}

/// Writes graph, field and parameters.
pub fn write_artifacts(dir: &Path, inst: &Instance) -> Result<()> {
    let c = &inst.config;
    write_graph(dir, c, &inst.graph)?;
    write_field(dir, c, &inst.field, &inst.field_report)?;
    let text = params_text(c, &inst.params, &inst.field.graph_hash, &inst.field.hash());
    write(&dir.join(PARAMS_FILE), text.as_bytes())
}

fn expect(what: &'static str, expected: &str, found: Option<&str>) -> Result<()> {
    match found {
        Some(f) if f == expected => Ok(()),
        f => Err(Error::Mismatch { what, expected: expected.to_string(), found: f.unwrap_or("nothing").to_string() }),
    }
}

/// Reads the artifacts written for `c`, refusing files from another
/// configuration or a field built on another graph.
pub fn read_artifacts(dir: &Path, c: &RunConfig) -> Result<(WeightedGraph, SynthParams, ConformalField, FieldReport)> {
    let cfg = c.hash();
    let gf = graph_io::read(&dir.join(GRAPH_FILE))?;
    expect("graph config hash", &cfg, gf.meta("config_hash"))?;
    let gh = graph_hash(&gf.graph);

    let fpath = dir.join(FIELD_FILE);
    let bytes = std::fs::read(&fpath).map_err(|e| Error::io(&fpath, e))?;
    let (data, meta) = grid_io::parse_with_meta(&bytes, &fpath.display().to_string())?;
    let get = |k: &str| meta.iter().find(|(m, _)| m == k).map(|(_, v)| v.as_str());
    expect("field config hash", &cfg, get("config_hash"))?;
    expect("field graph hash", &gh, get("graph_hash"))?;

    let ppath = dir.join(PARAMS_FILE);
    let text = std::fs::read_to_string(&ppath).map_err(|e| Error::io(&ppath, e))?;
    let src = ppath.display().to_string();
    let params = SynthParams::parse(&text, &src)?;
    let entries = crate::kv::parse(&text, &src)?;
    let pget = |k: &str| entries.iter().find(|e| e.key == k).map(|e| e.value.as_str());
    expect("params config hash", &cfg, pget("config_hash"))?;
    expect("params graph hash", &gh, pget("graph_hash"))?;
    let field = ConformalField { grid: data.grid, f: data.values, params: params.clone(), graph_hash: gh };
    expect("params field hash", &field.hash(), pget("field_hash"))?;
    let num = |k: &str| -> Result<f64> {
        get(k)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::parse(fpath.display().to_string(), 0, format!("missing or invalid `# {k}=`")))
    };
    let report = field.report(num("max_tubes")? as usize, num("max_abs_core")?);
    Ok((gf.graph, params, field, report))
}

/// Instance from artifacts on disk; the metric oracle is rebuilt.
pub fn load(c: &RunConfig, dir: &Path) -> Result<Instance> {
    let (graph, params, field, field_report) = read_artifacts(dir, c)?;
    let oracle = build_oracle(c)?;
    let moduli = build_moduli(c, &oracle)?;
    Ok(Instance { config: c.clone(), oracle, moduli, graph, params, field, field_report, build: None })
}

/// Human-readable construction summary.
pub fn summary(inst: &Instance) -> String {
    let mut s = String::new();
    let p = &inst.params;
    let g = &inst.graph;
    writeln!(s, "eps = {}  eps_construct = {}", fmt_f64(inst.config.eps), fmt_f64(p.eps)).unwrap();
    writeln!(s, "oracle: {} nodes, h = {}, tol_lat = {:.5}", inst.oracle.grid.len(), inst.oracle.h(), inst.oracle.tol_lat)
        .unwrap();
    writeln!(s, "grid: n_bar = {}, m_bar = {}, K = {}, tau = {:e}", p.n_bar, p.m_bar, p.k, p.tau).unwrap();
    writeln!(s, "graph: {} vertices, {} edges, max w = {:e}", g.vertices.len(), g.edges.len(), g.max_weight()).unwrap();
    writeln!(s, "tubes: eta = {:e}, eta_bar = {:e}, C0 = {:.4}, C1 = {:.4}", p.eta, p.eta_bar, p.c0, p.c1).unwrap();
    writeln!(s, "field: {} nodes, h_f = {:e}", inst.field.grid.len(), inst.field.grid.h).unwrap();
    for c in &p.constraints {
        writeln!(
            s,
            "  {:<24} {:>12.5e} {} {:<12.5e} {}{}",
            c.name,
            c.value,
            if c.upper { "<=" } else { ">=" },
            c.bound,
            if c.holds { "holds" } else { "FAILS" },
            if c.enforced { "" } else { " (report only)" }
        )
        .unwrap();
    }
    if let Some(b) = &inst.build {
        writeln!(
            s,
            "stages: {} geodesics, {} splices, {} merge nodes, {} crossings, {} linearize attempts",
            b.geodesics, b.untangle.splices, b.planar.merge_nodes, b.planar.crossings, b.linearize.attempts
        )
        .unwrap();
        let t: Vec<String> = b.timings.iter().map(|(n, d)| format!("{n} {:.2}s", d.as_secs_f64())).collect();
        writeln!(s, "timings: {}", t.join(", ")).unwrap();
    }
    s
}
