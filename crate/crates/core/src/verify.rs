//! Measured checks of a constructed instance. Every check records the
//! sample where the violation exceeds its budget the most, and the budget
//! there split into an accuracy term, a lattice term and a snapping term.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dijkstra::{Limits, Workspace};
use crate::error::Result;
use crate::eval::{check_trapped, ConformalOracle};
use crate::geom::Point;
use crate::graph::io::graph_hash;
use crate::graph::linearize::intersecting_pairs;
use crate::graph::spatial::{PointIndex, SegmentIndex};
use crate::graph::{GraphWorkspace, VertexKind};
use crate::grid_io::fmt_f64;
use crate::metric::{LatticeOracle, MetricSpec, Path};
use crate::pipeline::Instance;

/// Fraction of sampled geodesics that must stay near the edge set.
pub const TRAP_PASS_FRACTION: f64 = 0.95;
/// Targets per trapping source.
const TRAP_TARGETS: usize = 10;
/// Largest Euclidean separation of trapping endpoints, relative to `R`.
const TRAP_REACH: f64 = 0.25;
/// Targets per end-to-end source; a quarter of them are placed adversarially.
const THEOREM_TARGETS: usize = 64;
const PAIR_TARGETS: usize = 128;
/// Candidate vertices examined per highway sample.
const HIGHWAY_CANDIDATES: usize = 8;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Budget {
    pub eps: f64,
    pub tol: f64,
    pub snap: f64,
}

impl Budget {
    pub fn total(&self) -> f64 {
        self.eps + self.tol + self.snap
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub samples: usize,
    /// Violation at the worst sample.
    pub measured: f64,
    pub budget: Budget,
    /// `measured - budget.total()` at the worst sample.
    pub worst_excess: f64,
    pub pass: bool,
    pub offender: String,
    pub notes: Vec<(String, String)>,
}

/// Tracks the sample with the largest excess over its budget; ties keep
/// the earliest sample.
#[derive(Clone, Debug)]
struct Worst {
    samples: usize,
    excess: f64,
    measured: f64,
    budget: Budget,
    offender: String,
    /// Largest excess against an alternative accuracy term.
    alt_excess: f64,
}

impl Worst {
    fn new() -> Worst {
        Worst {
            samples: 0,
            excess: f64::NEG_INFINITY,
            measured: f64::NAN,
            budget: Budget::default(),
            offender: String::new(),
            alt_excess: f64::NEG_INFINITY,
        }
    }

    fn push(&mut self, v: f64, b: Budget, alt_eps: f64, offender: impl FnOnce() -> String) {
        self.samples += 1;
        let e = v - b.total();
        let alt = v - (alt_eps + b.tol + b.snap);
        if alt > self.alt_excess || self.alt_excess.is_nan() {
            self.alt_excess = alt;
        }
        if e > self.excess || (e.is_nan() && !self.excess.is_nan()) {
            self.excess = e;
            self.measured = v;
            self.budget = b;
            self.offender = offender();
        }
    }

    fn finish(self, name: &'static str, min_samples: usize) -> Check {
        let pass = self.samples >= min_samples && self.excess <= 0.0;
        Check {
            name,
            samples: self.samples,
            measured: self.measured,
            budget: self.budget,
            worst_excess: self.excess,
            pass,
            offender: if self.samples < min_samples {
                format!("only {} samples, need {min_samples}", self.samples)
            } else {
                self.offender
            },
            notes: Vec::new(),
        }
    }
}

impl Check {
    pub fn note_value(&self, k: &str) -> Option<&str> {
        self.notes.iter().find(|(key, _)| key == k).map(|(_, v)| v.as_str())
    }

    fn note(mut self, k: impl Into<String>, v: impl ToString) -> Check {
        self.notes.push((k.into(), v.to_string()));
        self
    }

    fn count(name: &'static str, samples: usize, failures: usize, offender: String) -> Check {
        Check {
            name,
            samples,
            measured: failures as f64,
            budget: Budget::default(),
            worst_excess: failures as f64,
            pass: failures == 0 && samples > 0,
            offender,
            notes: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub eps: f64,
    pub eps_construct: f64,
    pub tol_lat_metric: f64,
    pub tol_lat_eval: f64,
    pub h: f64,
    pub h_e: f64,
    pub seed: u64,
    pub config_hash: String,
    pub graph_hash: String,
    pub field_hash: String,
    pub checks: Vec<Check>,
}

fn pt(p: Point, d: usize) -> String {
    let c: Vec<String> = p.0[..d].iter().map(|v| format!("{v:.6}")).collect();
    format!("({})", c.join(","))
}

impl VerificationReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let f = fmt_f64;
        for (k, v) in [
            ("eps", f(self.eps)),
            ("eps_construct", f(self.eps_construct)),
            ("tol_lat_metric", f(self.tol_lat_metric)),
            ("tol_lat_eval", f(self.tol_lat_eval)),
            ("h", f(self.h)),
            ("h_e", f(self.h_e)),
            ("seed", self.seed.to_string()),
            ("config_hash", self.config_hash.clone()),
            ("graph_hash", self.graph_hash.clone()),
            ("field_hash", self.field_hash.clone()),
        ] {
            writeln!(s, "{k} = {v}").unwrap();
        }
        for c in &self.checks {
            let n = c.name;
            writeln!(s, "check.{n}.samples = {}", c.samples).unwrap();
            writeln!(s, "check.{n}.measured = {}", f(c.measured)).unwrap();
            writeln!(s, "check.{n}.budget_eps = {}", f(c.budget.eps)).unwrap();
            writeln!(s, "check.{n}.budget_tol = {}", f(c.budget.tol)).unwrap();
            writeln!(s, "check.{n}.budget_snap = {}", f(c.budget.snap)).unwrap();
            writeln!(s, "check.{n}.worst_excess = {}", f(c.worst_excess)).unwrap();
            writeln!(s, "check.{n}.pass = {}", c.pass).unwrap();
            writeln!(s, "check.{n}.offender = {}", c.offender).unwrap();
            for (k, v) in &c.notes {
                writeln!(s, "check.{n}.note.{k} = {v}").unwrap();
            }
        }
        writeln!(s, "summary = {}", self.summary()).unwrap();
        s
    }

    /// One line: overall verdict, then every check with its worst excess.
    pub fn summary(&self) -> String {
        let ok = self.checks.iter().filter(|c| c.pass).count();
        let mut s = format!("{} {ok}/{} checks", if self.passed() { "PASS" } else { "FAIL" }, self.checks.len());
        for c in &self.checks {
            write!(s, " | {} {} {:+.3e}", c.name, if c.pass { "ok" } else { "FAIL" }, c.worst_excess).unwrap();
            if !c.pass {
                write!(s, " [{}]", c.offender).unwrap();
            }
        }
        s
    }
}

fn rng_for(seed: u64, name: &str) -> ChaCha8Rng {
    // FNV-1a of the check name keeps streams independent across checks.
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in name.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

/// One uniform point in each of `k^d` congruent strata of the box, in
/// stratum order, truncated to `n`.
fn stratified(rng: &mut ChaCha8Rng, d: usize, r: f64, n: usize) -> Vec<Point> {
    let k = ((n as f64).powf(1.0 / d as f64).ceil() as usize).max(1);
    let side = 2.0 * r / k as f64;
    let mut out = Vec::with_capacity(n);
    for s in 0..k.pow(d as u32) {
        let mut p = [0.0; 3];
        let mut rem = s;
        for v in p.iter_mut().take(d) {
            let c = rem % k;
            rem /= k;
            *v = (-r + (c as f64 + rng.gen::<f64>()) * side).clamp(-r, r);
        }
        out.push(Point(p));
    }
    out.truncate(n);
    out
}

fn uniform(rng: &mut ChaCha8Rng, d: usize, lo: Point, hi: Point) -> Point {
    let mut p = [0.0; 3];
    for a in 0..d {
        p[a] = lo.0[a] + rng.gen::<f64>() * (hi.0[a] - lo.0[a]);
    }
    Point(p)
}

/// Unit vector orthogonal to `v`.
fn normal(v: Point, d: usize) -> Point {
    let n = if d == 2 {
        Point::new2(-v.0[1], v.0[0])
    } else {
        let axis = if v.0[0].abs() < 0.9 * v.norm() { Point::new3(1.0, 0.0, 0.0) } else { Point::new3(0.0, 1.0, 0.0) };
        v.cross(axis)
    };
    let l = n.norm();
    if l > 0.0 {
        n * (1.0 / l)
    } else {
        Point::new2(1.0, 0.0)
    }
}

fn clamp_box(p: Point, r: f64) -> Point {
    Point(p.0.map(|v| v.clamp(-r, r)))
}

struct Ctx<'a> {
    inst: &'a Instance,
    co: ConformalOracle,
    eps: f64,
    eps_c: f64,
    d: usize,
    r: f64,
    tol_m: f64,
    tol_e: f64,
    tol: f64,
    /// Euclidean snapping allowance per endpoint.
    snap: f64,
    /// `e^f D_0` snapping allowance per endpoint on the evaluation lattice.
    snap_ef: f64,
    seed: u64,
}

impl Ctx<'_> {
    fn oracle(&self) -> &LatticeOracle {
        &self.inst.oracle
    }

    fn ef_cost(&self, len: f64) -> u64 {
        self.co.scale.to_cost(len).0
    }
}

/// Groups of checks that share their expensive searches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Group {
    Parameters,
    FieldContinuity,
    GraphInvariants,
    VertexPairs,
    Adjacent,
    Highway,
    Trapping,
    EndToEnd,
    Axioms,
    ZeroField,
}

impl Group {
    pub const ALL: [Group; 10] = [
        Group::Parameters,
        Group::FieldContinuity,
        Group::GraphInvariants,
        Group::VertexPairs,
        Group::Adjacent,
        Group::Highway,
        Group::Trapping,
        Group::EndToEnd,
        Group::Axioms,
        Group::ZeroField,
    ];

    fn run(self, x: &Ctx) -> Result<Vec<Check>> {
        Ok(match self {
            Group::Parameters => vec![check_parameters(x)],
            Group::FieldContinuity => vec![check_field_continuity(x)],
            Group::GraphInvariants => vec![check_graph_invariants(x)],
            Group::VertexPairs => check_vertex_pairs(x)?,
            Group::Adjacent => check_adjacent(x)?,
            Group::Highway => vec![check_highway(x)?],
            Group::Trapping => vec![check_trapping(x)?],
            Group::EndToEnd => vec![check_end_to_end(x)?],
            Group::Axioms => check_axioms(x)?,
            Group::ZeroField => vec![check_zero_field(x)?],
        })
    }
}

/// Runs every check. `log` receives one line per finished check.
pub fn verify(inst: &Instance, log: &dyn Fn(&str)) -> Result<VerificationReport> {
    verify_groups(inst, &Group::ALL, log)
}

/// Runs the checks of `groups`, in the order given.
pub fn verify_groups(inst: &Instance, groups: &[Group], log: &dyn Fn(&str)) -> Result<VerificationReport> {
    let c = &inst.config;
    let co = ConformalOracle::from_field(&inst.field, c.h_e, c.eval_order, c.field_budget)?;
    let d = c.metric.d;
    let p = &inst.params;
    let tol_m = inst.oracle.tol_lat;
    let tol_e = co.tol_lat;
    let snap = inst.oracle.h().max(co.h()) * (d as f64).sqrt() / 2.0;
    let ctx = Ctx {
        inst,
        eps: c.eps,
        eps_c: p.eps,
        d,
        r: c.metric.r,
        tol_m,
        tol_e,
        tol: tol_m.max(tol_e),
        snap,
        snap_ef: co.h() * p.c0.exp(),
        seed: c.seed,
        co,
    };
    let mut checks = Vec::new();
    for g in groups {
        let t = std::time::Instant::now();
        let out = g.run(&ctx)?;
        for ch in &out {
            log(&format!(
                "{:<22} {} excess {:+.3e} over {} samples ({:.1}s)",
                ch.name,
                if ch.pass { "ok  " } else { "FAIL" },
                ch.worst_excess,
                ch.samples,
                t.elapsed().as_secs_f64()
            ));
        }
        checks.extend(out);
    }
    Ok(VerificationReport {
        eps: c.eps,
        eps_construct: p.eps,
        tol_lat_metric: tol_m,
        tol_lat_eval: tol_e,
        h: inst.oracle.h(),
        h_e: ctx.co.h(),
        seed: c.seed,
        config_hash: c.hash(),
        graph_hash: graph_hash(&inst.graph),
        field_hash: inst.field.hash(),
        checks,
    })
}

/// Every enforced synthesis constraint, plus the nearest-weight bound.
fn check_parameters(x: &Ctx) -> Check {
    let p = &x.inst.params;
    let mut failing = Vec::new();
    let mut n = 0;
    for c in p.constraints.iter().filter(|c| c.enforced || c.name == "max_edge_weight") {
        n += 1;
        if !c.holds {
            failing.push(c.name.clone());
        }
    }
    let max_w = x.inst.graph.max_weight();
    let mut ch = Check::count("parameters", n, failing.len(), failing.join(","));
    for c in &p.constraints {
        let rel = if c.upper { "<=" } else { ">=" };
        let tag = if c.enforced { "" } else { " report-only" };
        ch = ch.note(
            c.name.clone(),
            format!("{} {rel} {} {}{tag}", fmt_f64(c.value), fmt_f64(c.bound), if c.holds { "holds" } else { "fails" }),
        );
    }
    let at_target = if max_w <= x.eps / 128.0 { "holds" } else { "fails" };
    ch.note(
        "max_weight_vs_target_eps_over_128",
        format!("{} <= {} {at_target} (report only)", fmt_f64(max_w), fmt_f64(x.eps / 128.0)),
    )
}

fn check_field_continuity(x: &Ctx) -> Check {
    let fr = &x.inst.field_report;
    let excess = fr.max_jump - fr.jump_bound;
    Check {
        name: "field_continuity",
        samples: x.inst.field.grid.len(),
        measured: fr.max_jump,
        budget: Budget { eps: 0.0, tol: fr.jump_bound, snap: 0.0 },
        worst_excess: excess,
        pass: excess <= 0.0,
        offender: String::new(),
        notes: Vec::new(),
    }
    .note("f_min", fmt_f64(fr.f_min))
    .note("f_max", fmt_f64(fr.f_max))
    .note("max_tubes", fr.max_tubes)
}

fn check_graph_invariants(x: &Ctx) -> Check {
    let g = &x.inst.graph;
    let mut bad = Vec::new();
    let nonpos = g.edges.iter().filter(|e| !(e.w > 0.0 && e.ell0 > 0.0)).count();
    if nonpos > 0 {
        bad.push(format!("{nonpos} edges without positive weight"));
    }
    let (_, crossings) = intersecting_pairs(&g.vertices, &g.edges, 1e-12 * g.r, 1);
    if crossings > 0 {
        bad.push(format!("{crossings} intersecting edge pairs"));
    }
    if let Err(e) = g.check_connected() {
        bad.push(e.to_string());
    }
    let nm = g.n_bar * g.m_bar;
    let want = (2 * nm + 1).pow(g.d as u32);
    let net = g.kinds.iter().filter(|k| **k == VertexKind::Net).count();
    if net != want {
        bad.push(format!("{net} net vertices, expected {want}"));
    }
    Check::count("graph_invariants", g.edges.len(), bad.len(), bad.join("; "))
        .note("vertices", g.vertices.len())
        .note("edges", g.edges.len())
        .note("intersecting_pairs", crossings)
}

/// Random vertex pairs: graph distance against the metric, and `e^f D_0`
/// against both.
fn check_vertex_pairs(x: &Ctx) -> Result<Vec<Check>> {
    let g = &x.inst.graph;
    let c = &x.inst.config;
    let nv = g.vertices.len();
    let mut rng = rng_for(x.seed, "vertex_pairs");
    let sources = (c.vertex_pairs.div_ceil(PAIR_TARGETS)).max(1);
    let plan: Vec<(usize, Vec<usize>)> = (0..sources)
        .map(|_| (rng.gen_range(0..nv), (0..PAIR_TARGETS).map(|_| rng.gen_range(0..nv)).collect()))
        .collect();
    let o = x.oracle();
    let rows: Vec<Result<Vec<(usize, usize, f64, f64, f64)>>> = plan
        .par_iter()
        .map_init(
            || (Workspace::new(o.grid.len()), Workspace::new(x.co.grid.len())),
            |(wm, we), (s, ts)| {
                let pts: Vec<Point> = ts.iter().map(|&t| g.vertices[t]).collect();
                let dbar = o.dist_ext_many(wm, g.vertices[*s], &pts)?;
                let dg = g.sssp(*s, ts);
                let a = x.co.snap(g.vertices[*s])?;
                let tn: Vec<usize> = pts.iter().map(|p| x.co.snap(*p)).collect::<Result<_>>()?;
                we.run(&x.co, &[(a, 0)], Limits { targets: &tn, ..Default::default() });
                Ok(ts
                    .iter()
                    .zip(&tn)
                    .enumerate()
                    .map(|(i, (&t, &b))| (*s, t, dbar[i], dg[t], we.dist(b).map_or(f64::INFINITY, |c| x.co.len_of(c))))
                    .collect())
            },
        )
        .collect();
    let mut stage = Worst::new();
    let mut lower = Worst::new();
    let mut up = Worst::new();
    let mut low = Worst::new();
    let who = |s: usize, t: usize| format!("v{s}{} v{t}{}", pt(g.vertices[s], x.d), pt(g.vertices[t], x.d));
    for row in rows {
        for (s, t, dbar, dg, ef) in row? {
            let b = Budget { eps: x.eps_c / 4.0, tol: x.tol_m * dbar, snap: 0.0 };
            stage.push((dg - dbar).abs(), b, x.eps / 4.0, || who(s, t));
            lower.push(dbar - dg, Budget { eps: 0.0, ..b }, 0.0, || who(s, t));
            let bu = Budget { eps: 0.0, tol: x.tol_e * dg, snap: 2.0 * x.snap_ef };
            up.push(ef - dg, bu, 0.0, || who(s, t));
            let bl = Budget { eps: x.eps_c / 4.0, tol: x.tol * dbar, snap: 2.0 * x.snap_ef };
            low.push(dbar - ef, bl, x.eps / 4.0, || who(s, t));
        }
    }
    let target = |w: &Worst| fmt_f64(w.alt_excess);
    let (ts, tl) = (target(&stage), target(&low));
    Ok(vec![
        stage.finish("graph_stage", c.vertex_pairs.min(1000)).note("excess_at_target_eps", ts),
        lower.finish("graph_lower", c.vertex_pairs.min(1000)),
        up.finish("pair_upper", c.vertex_pairs.min(1000)),
        low.finish("pair_lower", c.vertex_pairs.min(1000)).note("excess_at_target_eps", tl),
    ])
}

/// Adjacent vertices: `e^f D_0` within the edge weight, and not below the
/// graph distance by more than `eps / (10 |G|)`.
fn check_adjacent(x: &Ctx) -> Result<Vec<Check>> {
    let g = &x.inst.graph;
    let c = &x.inst.config;
    let mut ids: Vec<usize> = (0..g.edges.len()).collect();
    if let Some(n) = c.edge_samples {
        if n < ids.len() {
            let mut rng = rng_for(x.seed, "adjacent");
            ids.shuffle(&mut rng);
            ids.truncate(n);
            ids.sort_unstable();
        }
    }
    let ne = g.edges.len() as f64;
    let rows: Vec<Result<(usize, f64, f64)>> = ids
        .par_iter()
        .map_init(
            || (Workspace::new(x.co.grid.len()), GraphWorkspace::new(g.vertices.len())),
            |(we, gw), &i| {
                let e = g.edges[i];
                let (a, b) = (x.co.snap(g.vertices[e.u as usize])?, x.co.snap(g.vertices[e.v as usize])?);
                let tol = x.tol_e * e.w + 2.0 * x.snap_ef;
                let bound = x.ef_cost(e.w + tol);
                we.run(&x.co, &[(a, 0)], Limits { bound: Some(bound), targets: &[b], clip: None });
                let ef = we.dist(b).map_or(f64::INFINITY, |c| x.co.len_of(c));
                let dg = gw.dist_bounded(g, e.u as usize, e.v as usize, e.w).unwrap_or(e.w);
                Ok((i, ef, dg))
            },
        )
        .collect();
    let mut up = Worst::new();
    let mut low = Worst::new();
    for r in rows {
        let (i, ef, dg) = r?;
        let e = g.edges[i];
        let b = Budget { eps: 0.0, tol: x.tol_e * e.w, snap: 2.0 * x.snap_ef };
        let who = || format!("edge {i} (v{} v{}) w={}", e.u, e.v, fmt_f64(e.w));
        up.push(ef - e.w, b, 0.0, who);
        let bl = Budget { eps: x.eps_c / (10.0 * ne), ..b };
        low.push(dg - ef, bl, x.eps / (10.0 * ne), who);
    }
    let min = ids.len().max(1);
    let tl = fmt_f64(low.alt_excess);
    Ok(vec![
        up.finish("adjacent_upper", min).note("edges_total", g.edges.len()),
        low.finish("adjacent_lower", min).note("excess_at_target_eps", tl),
    ])
}

/// Every sample point has a vertex close in both metrics.
fn check_highway(x: &Ctx) -> Result<Check> {
    let g = &x.inst.graph;
    let c = &x.inst.config;
    let mut rng = rng_for(x.seed, "highway");
    let pts = stratified(&mut rng, x.d, x.r, c.highway_samples);
    let spacing = x.r / (g.n_bar * g.m_bar) as f64;
    let index = PointIndex::new(&g.vertices, spacing);
    let budget_eps = x.eps_c / 16.0;
    let reach = 2.0 * (budget_eps * (1.0 + x.tol) + 2.0 * x.snap);
    let o = x.oracle();
    let rows: Vec<Result<(Point, f64, Option<u32>)>> = pts
        .par_iter()
        .map_init(
            || (Workspace::new(o.grid.len()), Workspace::new(x.co.grid.len())),
            |(wm, we), &p| {
                let mut rad = spacing;
                let mut cand = index.within(p, rad);
                while cand.len() < HIGHWAY_CANDIDATES && rad < 4.0 * x.r {
                    rad *= 2.0;
                    cand = index.within(p, rad);
                }
                cand.sort_by(|a, b| {
                    let (da, db) = (g.vertices[*a as usize].dist(p), g.vertices[*b as usize].dist(p));
                    da.total_cmp(&db).then(a.cmp(b))
                });
                cand.truncate(HIGHWAY_CANDIDATES);
                let vp: Vec<Point> = cand.iter().map(|&v| g.vertices[v as usize]).collect();
                let dbar = o.dist_ext_many(wm, p, &vp)?;
                let a = x.co.snap(p)?;
                let tn: Vec<usize> = vp.iter().map(|q| x.co.snap(*q)).collect::<Result<_>>()?;
                let lim = Limits { bound: Some(x.ef_cost(reach)), targets: &tn, clip: None };
                we.run(&x.co, &[(a, 0)], lim);
                let mut best = (f64::INFINITY, None);
                for (k, &v) in cand.iter().enumerate() {
                    let ef = we.dist(tn[k]).map_or(f64::INFINITY, |c| x.co.len_of(c));
                    let s = dbar[k].max(ef);
                    if s < best.0 {
                        best = (s, Some(v));
                    }
                }
                Ok((p, best.0, best.1))
            },
        )
        .collect();
    let mut w = Worst::new();
    for r in rows {
        let (p, s, v) = r?;
        let b = Budget { eps: budget_eps, tol: x.tol * budget_eps, snap: x.snap + x.snap_ef };
        let who = || match v {
            Some(v) => format!("x{} nearest v{v}", pt(p, x.d)),
            None => format!("x{} no vertex within {}", pt(p, x.d), fmt_f64(reach)),
        };
        w.push(s, b, x.eps / 16.0, who);
    }
    let t = fmt_f64(w.alt_excess);
    Ok(w.finish("highway", c.highway_samples.min(1000)).note("excess_at_target_eps", t))
}

/// Field node near the edge set: a random point of a random edge, pushed
/// sideways by up to `0.8 eta` and snapped, kept only if within `eta`.
fn tube_node(x: &Ctx, rng: &mut ChaCha8Rng, segs: &SegmentIndex, near: Option<(Point, f64)>) -> Option<usize> {
    let g = &x.inst.graph;
    let p = &x.inst.params;
    for _ in 0..200 {
        let q = match near {
            None => {
                let e = g.edges[rng.gen_range(0..g.edges.len())];
                let (a, b) = (g.vertices[e.u as usize], g.vertices[e.v as usize]);
                let t = rng.gen::<f64>();
                a.lerp(b, t) + normal(b - a, x.d) * (p.eta * 0.8 * (2.0 * rng.gen::<f64>() - 1.0))
            }
            Some((c, rad)) => {
                let y = clamp_box(uniform(rng, x.d, c - Point([rad; 3]), c + Point([rad; 3])), x.r);
                if y.dist(c) > rad {
                    continue;
                }
                let (_, id) = segs.nearest(y)?;
                let e = g.edges[id as usize];
                let (a, b) = (g.vertices[e.u as usize], g.vertices[e.v as usize]);
                let t = crate::geom::project_param(y, a, b);
                a.lerp(b, t) + normal(b - a, x.d) * (p.eta * 0.8 * (2.0 * rng.gen::<f64>() - 1.0))
            }
        };
        let q = clamp_box(q, x.r);
        let Ok(n) = x.co.snap(q) else { continue };
        let s = x.co.grid.point(n);
        if segs.nearest(s).is_some_and(|(r, _)| r <= p.eta) {
            return Some(n);
        }
    }
    None
}

/// Geodesics between tube points stay inside the widened tube.
fn check_trapping(x: &Ctx) -> Result<Check> {
    let g = &x.inst.graph;
    let c = &x.inst.config;
    let p = &x.inst.params;
    let mean = g.edges.iter().map(|e| e.ell0).sum::<f64>() / g.edges.len().max(1) as f64;
    let segs = SegmentIndex::new(&g.vertices, &g.edges, (2.0 * mean).max(p.eta));
    let mut rng = rng_for(x.seed, "trapping");
    let sources = c.trap_samples.div_ceil(TRAP_TARGETS);
    let mut plan = Vec::new();
    for _ in 0..sources {
        let Some(s) = tube_node(x, &mut rng, &segs, None) else { continue };
        let sp = x.co.grid.point(s);
        let ts: Vec<usize> =
            (0..TRAP_TARGETS).filter_map(|_| tube_node(x, &mut rng, &segs, Some((sp, TRAP_REACH * x.r)))).collect();
        plan.push((s, ts));
    }
    let slack = x.co.h() * (x.d as f64).sqrt();
    let rows: Vec<Result<Vec<(usize, usize, f64, f64)>>> = plan
        .par_iter()
        .map_init(
            || Workspace::new(x.co.grid.len()),
            |we, (s, ts)| {
                we.run(&x.co, &[(*s, 0)], Limits { targets: ts, ..Default::default() });
                ts.iter()
                    .map(|&t| {
                        let nodes = we.path_to(t).unwrap_or_default();
                        let pts: Vec<Point> = nodes.iter().map(|&n| x.co.grid.point(n as usize)).collect();
                        let len = we.dist(t).map_or(f64::INFINITY, |c| x.co.len_of(c));
                        let path = Path::new(pts, len)?;
                        let tr = check_trapped(&path, &segs, p.eta, p.eta_bar, slack)?;
                        Ok((*s, t, tr.max_excursion, tr.threshold))
                    })
                    .collect()
            },
        )
        .collect();
    let mut total = 0usize;
    let mut outside = Vec::new();
    let mut worst = (f64::NEG_INFINITY, 0.0, String::new());
    for row in rows {
        for (s, t, exc, thr) in row? {
            total += 1;
            let who = format!("{} -> {}", pt(x.co.grid.point(s), x.d), pt(x.co.grid.point(t), x.d));
            if exc > thr {
                outside.push(format!("{who} excursion {}", fmt_f64(exc)));
            }
            if exc - thr > worst.0 {
                worst = (exc - thr, exc, who);
            }
        }
    }
    let frac = if total > 0 { (total - outside.len()) as f64 / total as f64 } else { 0.0 };
    let thr = p.eta + p.eta_bar / 2.0 + slack;
    let mut ch = Check {
        name: "trapping",
        samples: total,
        measured: worst.1,
        budget: Budget { eps: p.eta + p.eta_bar / 2.0, tol: 0.0, snap: slack },
        worst_excess: worst.0,
        pass: total >= c.trap_samples.min(500) && frac >= TRAP_PASS_FRACTION,
        offender: worst.2,
        notes: Vec::new(),
    }
    .note("inside_fraction", fmt_f64(frac))
    .note("threshold", fmt_f64(thr))
    .note("outside", outside.len());
    for (i, o) in outside.iter().enumerate() {
        ch = ch.note(format!("outside_{i}"), o);
    }
    Ok(ch)
}

/// Sources stratified over the box; targets stratified plus adversarial
/// points on net vertices, tube boundaries and shell midlines.
fn end_to_end_points(x: &Ctx, rng: &mut ChaCha8Rng) -> (Vec<Point>, Vec<Vec<Point>>) {
    let g = &x.inst.graph;
    let p = &x.inst.params;
    let pairs = x.inst.config.pairs.max(1);
    let sources = pairs.div_ceil(THEOREM_TARGETS);
    let src = stratified(rng, x.d, x.r, sources);
    let nets: Vec<usize> = (0..g.vertices.len()).filter(|&i| g.kinds[i] == VertexKind::Net).collect();
    let adv = THEOREM_TARGETS / 4;
    let tgts = (0..sources)
        .map(|_| {
            let mut t = stratified(rng, x.d, x.r, THEOREM_TARGETS - adv);
            for k in 0..adv {
                let q = match k % 3 {
                    0 => g.vertices[nets[rng.gen_range(0..nets.len())]],
                    kind => {
                        let e = g.edges[rng.gen_range(0..g.edges.len())];
                        let (a, b) = (g.vertices[e.u as usize], g.vertices[e.v as usize]);
                        let off = if kind == 1 { p.eta } else { p.eta + p.eta_bar / 2.0 };
                        let side = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                        a.lerp(b, rng.gen::<f64>()) + normal(b - a, x.d) * (off * side)
                    }
                };
                t.push(clamp_box(q, x.r));
            }
            t
        })
        .collect();
    (src, tgts)
}

/// Input metric against `e^f D_0` over point pairs of the whole box.
fn check_end_to_end(x: &Ctx) -> Result<Check> {
    let mut rng = rng_for(x.seed, "end_to_end");
    let (src, tgts) = end_to_end_points(x, &mut rng);
    let o = x.oracle();
    let rows: Vec<Result<Vec<(Point, Point, f64, f64)>>> = src
        .par_iter()
        .zip(&tgts)
        .map_init(
            || (Workspace::new(o.grid.len()), Workspace::new(x.co.grid.len())),
            |(wm, we), (s, ts)| {
                let dbar = o.dist_ext_many(wm, *s, ts)?;
                let a = x.co.snap(*s)?;
                let tn: Vec<usize> = ts.iter().map(|q| x.co.snap(*q)).collect::<Result<_>>()?;
                we.run(&x.co, &[(a, 0)], Limits { targets: &tn, ..Default::default() });
                Ok(ts
                    .iter()
                    .zip(&tn)
                    .zip(dbar)
                    .map(|((t, &b), db)| (*s, *t, db, we.dist(b).map_or(f64::INFINITY, |c| x.co.len_of(c))))
                    .collect())
            },
        )
        .collect();
    let mut w = Worst::new();
    let mut half = f64::NEG_INFINITY;
    let mut at_c = f64::NEG_INFINITY;
    for row in rows {
        for (s, t, db, ef) in row? {
            let v = (db - ef).abs();
            let b = Budget { eps: x.eps, tol: x.tol * db, snap: 2.0 * x.snap };
            half = half.max(v - (x.eps / 2.0 + b.tol + b.snap));
            at_c = at_c.max(v - (x.eps_c + b.tol + b.snap));
            w.push(v, b, x.eps_c, || {
                format!("{} {} metric {} conformal {}", pt(s, x.d), pt(t, x.d), fmt_f64(db), fmt_f64(ef))
            });
        }
    }
    let min = x.inst.config.pairs.min(1000);
    Ok(w.finish("end_to_end", min)
        .note("excess_at_half_eps", fmt_f64(half))
        .note("excess_at_construct_eps", fmt_f64(at_c)))
}

/// Exact symmetry, identity and triangle inequality on integer lattice
/// costs between random nodes.
fn axioms<C: crate::dijkstra::EdgeCosts>(name: &'static str, costs: &C, nodes: &[usize]) -> Check {
    let n = nodes.len();
    let mut m = vec![vec![0u64; n]; n];
    let rows: Vec<Vec<u64>> = nodes
        .par_iter()
        .map_init(
            || Workspace::new(costs.grid().len()),
            |ws, &s| {
                ws.run(costs, &[(s, 0)], Limits { targets: nodes, ..Default::default() });
                nodes.iter().map(|&t| ws.dist(t).unwrap_or(u64::MAX)).collect()
            },
        )
        .collect();
    for (i, r) in rows.into_iter().enumerate() {
        m[i] = r;
    }
    let mut bad = 0usize;
    let mut first = String::new();
    let mut fail = |msg: String| {
        if bad == 0 {
            first = msg;
        }
        bad += 1;
    };
    let mut triples = 0usize;
    for i in 0..n {
        if m[i][i] != 0 {
            fail(format!("d(n{i}, n{i}) = {}", m[i][i]));
        }
        for j in 0..n {
            if i != j && nodes[i] != nodes[j] && m[i][j] == 0 {
                fail(format!("d(n{i}, n{j}) = 0"));
            }
            if m[i][j] != m[j][i] {
                fail(format!("d(n{i}, n{j}) = {} but d(n{j}, n{i}) = {}", m[i][j], m[j][i]));
            }
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                triples += 1;
                for (a, b, c) in [(i, j, k), (j, k, i), (k, i, j)] {
                    if m[a][c] > m[a][b].saturating_add(m[b][c]) {
                        fail(format!("d(n{a}, n{c}) > d(n{a}, n{b}) + d(n{b}, n{c})"));
                    }
                }
            }
        }
    }
    Check::count(name, triples, bad, first)
}

/// Fewest points whose unordered triples number at least `triples`.
fn axiom_points(triples: usize) -> usize {
    (3..).find(|&n| n * (n - 1) * (n - 2) / 6 >= triples.max(1)).unwrap_or(3)
}

fn check_axioms(x: &Ctx) -> Result<Vec<Check>> {
    let mut rng = rng_for(x.seed, "axioms");
    let o = x.oracle();
    let n = axiom_points(x.inst.config.triples);
    let pm: Vec<usize> = (0..n)
        .map(|_| o.grid.snap(uniform(&mut rng, x.d, Point([-x.r; 3]), Point([x.r; 3]))))
        .collect::<Result<_>>()?;
    // A sub-box of side R/4 keeps the conformal searches short.
    let side = x.r / 4.0;
    let lo = uniform(&mut rng, x.d, Point([-x.r; 3]), Point([x.r - side; 3]));
    let hi = lo + Point([side; 3]);
    let pe: Vec<usize> =
        (0..n).map(|_| x.co.snap(uniform(&mut rng, x.d, lo, hi))).collect::<Result<_>>()?;
    Ok(vec![axioms("axioms_metric", o, &pm), axioms("axioms_conformal", &x.co, &pe)])
}

/// A zero field on a Euclidean lattice reproduces the Euclidean oracle.
fn check_zero_field(x: &Ctx) -> Result<Check> {
    let c = &x.inst.config;
    let e = LatticeOracle::build(MetricSpec::euclidean(x.d, x.r), c.h, c.eval_order, c.node_budget)?;
    let z = ConformalOracle::new(e.grid.clone(), &vec![0.0; e.grid.len()], c.eval_order)?;
    let mut rng = rng_for(x.seed, "zero_field");
    let mut ws = Workspace::new(e.grid.len());
    let mut bad = 0;
    let mut first = String::new();
    let n = 16;
    for _ in 0..n {
        let a = uniform(&mut rng, x.d, Point([-x.r; 3]), Point([x.r; 3]));
        let b = uniform(&mut rng, x.d, Point([-x.r; 3]), Point([x.r; 3]));
        let (de, dz) = (e.dist(a, b)?, z.ef_dist(&mut ws, a, b)?);
        if de != dz {
            if bad == 0 {
                first = format!("{} {}: {} vs {}", pt(a, x.d), pt(b, x.d), fmt_f64(de), fmt_f64(dz));
            }
            bad += 1;
        }
    }
    Ok(Check::count("zero_field_reduction", n, bad, first))
}
