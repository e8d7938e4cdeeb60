//! End-to-end acceptance run: one pass/fail line per criterion. Runs at
//! full scale in release-level optimization; expect tens of minutes.

use std::path::Path;
use std::time::Instant;

use conflat::config::RunConfig;
use conflat::pipeline::{self, Instance};
use conflat::verify::{self, Check, Group, VerificationReport};

/// Wall-clock limit for the two-dimensional end-to-end run, seconds.
const RUNTIME_2D: f64 = 300.0;
/// Wall-clock limit for the three-dimensional smoke run, seconds.
const RUNTIME_3D: f64 = 1800.0;
/// Minimum sample counts.
const MIN_PAIRS: usize = 1000;
const MIN_TRAP: usize = 500;
const MIN_TRIPLES: usize = 1000;

const EUCLIDEAN: &str = "\
metric = euclidean
R = 1
d = 2
eps = 0.25
h = 0.004166666666666667
order = 3
eval_order = 3
h_f_factor = 4
";

const CONFORMAL: &str = "\
metric = conformal
R = 1
d = 2
density = sinbump(0.5)
eps = 0.25
h = 0.004166666666666667
order = 3
eval_order = 3
h_f_factor = 4
";

const RIEMANNIAN_3D: &str = "\
metric = riemannian
R = 1
d = 3
tensor = diag(1, 1, 4)
eps = 0.5
h = 0.041666666666666664
order = 2
eval_order = 2
h_f_factor = 4
";

const SMALL: &str = "\
metric = euclidean
R = 1
d = 2
eps = 0.25
eps_construct = 16
h = 0.03125
h_f_factor = 4
pairs = 64
vertex_pairs = 64
edge_samples = 4000
trap_samples = 50
highway_samples = 64
";

/// Criteria measured on the Euclidean instance besides the end-to-end bound.
const INSTANCE_CRITERIA: [(u32, &str); 6] = [
    (3, "graph stage"),
    (4, "adjacent vertices"),
    (5, "trapping"),
    (6, "highway"),
    (7, "parameter sanity"),
    (8, "oracle self-consistency"),
];

struct Line {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn config(text: &str, src: &str) -> RunConfig {
    RunConfig::parse(text, src, Path::new(".")).unwrap_or_else(|e| panic!("{src}: {e}"))
}

fn log(tag: &'static str) -> impl Fn(&str) {
    let t = Instant::now();
    move |s: &str| eprintln!("  [{tag} {:7.1}s] {s}", t.elapsed().as_secs_f64())
}

fn get<'a>(r: &'a VerificationReport, name: &str) -> &'a Check {
    r.check(name).unwrap_or_else(|| panic!("check {name} missing"))
}

fn brief(c: &Check) -> String {
    format!("{} {} over {} (excess {:+.3e})", c.name, if c.pass { "ok" } else { "FAIL" }, c.samples, c.worst_excess)
}

fn note(c: &Check, k: &str) -> String {
    c.note_value(k).unwrap_or("?").to_string()
}

/// Builds, then runs the end-to-end check; returns the instance, the report
/// and the seconds both took.
fn end_to_end(text: &str, tag: &'static str) -> Result<(Instance, VerificationReport, f64), String> {
    let c = config(text, tag);
    let t = Instant::now();
    let lg = log(tag);
    let inst = pipeline::build(&c, &lg).map_err(|e| format!("build failed: {e}"))?;
    let rep = verify::verify_groups(&inst, &[Group::EndToEnd], &lg).map_err(|e| format!("end-to-end check failed: {e}"))?;
    Ok((inst, rep, t.elapsed().as_secs_f64()))
}

fn end_to_end_line(id: u32, name: &'static str, r: &Result<(Instance, VerificationReport, f64), String>, limit: f64) -> Line {
    match r {
        Err(e) => Line { id, name, pass: false, detail: e.clone() },
        Ok((inst, rep, secs)) => {
            let th = get(rep, "end_to_end");
            let pass = th.pass && th.samples >= MIN_PAIRS && *secs <= limit;
            Line {
                id,
                name,
                pass,
                detail: format!(
                    "worst |D - e^f D0| = {:.4e} vs budget {:.4e} (eps {} + tol {:.3e} + snap {:.3e}) over {} pairs; \
                     half-eps excess {}; eps_construct {:.4}; {:.0}s{}; worst at {}",
                    th.measured,
                    th.budget.total(),
                    inst.config.eps,
                    th.budget.tol,
                    th.budget.snap,
                    th.samples,
                    note(th, "excess_at_half_eps"),
                    inst.params.eps,
                    secs,
                    if limit.is_finite() { format!(" of {limit:.0}s") } else { String::new() },
                    th.offender
                ),
            }
        }
    }
}

fn instance_lines(inst: &Instance, rep: &VerificationReport) -> Vec<Line> {
    let c = |n: &str| get(rep, n);
    let mut out = Vec::new();

    let (stage, low) = (c("graph_stage"), c("graph_lower"));
    out.push(Line {
        id: 3,
        name: "graph stage",
        pass: stage.pass && low.pass && stage.samples >= MIN_PAIRS,
        detail: format!(
            "{}; {}; checked at eps_construct {:.4}; excess at target eps {}",
            brief(stage),
            brief(low),
            inst.params.eps,
            note(stage, "excess_at_target_eps")
        ),
    });

    let (up, lo) = (c("adjacent_upper"), c("adjacent_lower"));
    let all = up.samples == inst.graph.edges.len() && lo.samples == inst.graph.edges.len();
    out.push(Line {
        id: 4,
        name: "adjacent vertices",
        pass: up.pass && lo.pass && all,
        detail: format!("{}; {}; all {} edges: {all}", brief(up), brief(lo), inst.graph.edges.len()),
    });

    let tr = c("trapping");
    out.push(Line {
        id: 5,
        name: "trapping",
        pass: tr.pass && tr.samples >= MIN_TRAP,
        detail: format!(
            "inside fraction {} over {} geodesics (need {}); {} outside, worst excursion {:.4e} vs {}",
            note(tr, "inside_fraction"),
            tr.samples,
            verify::TRAP_PASS_FRACTION,
            note(tr, "outside"),
            tr.measured,
            note(tr, "threshold")
        ),
    });

    let hw = c("highway");
    out.push(Line {
        id: 6,
        name: "highway",
        pass: hw.pass && hw.samples >= MIN_PAIRS,
        detail: format!(
            "{}; worst {:.4e} vs budget {:.4e}; excess at target eps {}",
            brief(hw),
            hw.measured,
            hw.budget.total(),
            note(hw, "excess_at_target_eps")
        ),
    });

    let pa = c("parameters");
    out.push(Line {
        id: 7,
        name: "parameter sanity",
        pass: pa.pass,
        detail: format!(
            "{} constraints, {} failing{}; max w vs target eps/128: {}",
            pa.samples,
            pa.measured,
            if pa.offender.is_empty() { String::new() } else { format!(" ({})", pa.offender) },
            note(pa, "max_weight_vs_target_eps_over_128")
        ),
    });

    let (am, ac, zf) = (c("axioms_metric"), c("axioms_conformal"), c("zero_field_reduction"));
    out.push(Line {
        id: 8,
        name: "oracle self-consistency",
        pass: am.pass && ac.pass && zf.pass && am.samples >= MIN_TRIPLES && ac.samples >= MIN_TRIPLES,
        detail: format!("{}; {}; {}", brief(am), brief(ac), brief(zf)),
    });
    out
}

/// Two independent runs of the same config into fresh directories.
fn determinism() -> Line {
    let files = [pipeline::GRAPH_FILE, pipeline::FIELD_FILE, pipeline::PARAMS_FILE, pipeline::REPORT_FILE];
    let run = |dir: &Path| -> Result<(), String> {
        let c = config(SMALL, "small");
        let inst = pipeline::build(&c, &|_| {}).map_err(|e| e.to_string())?;
        pipeline::write_artifacts(dir, &inst).map_err(|e| e.to_string())?;
        let rep = verify::verify(&inst, &|_| {}).map_err(|e| e.to_string())?;
        std::fs::write(dir.join(pipeline::REPORT_FILE), rep.to_text()).map_err(|e| e.to_string())
    };
    let tmp = tempfile::tempdir().expect("temp dir");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    if let Err(e) = run(&a).and_then(|_| run(&b)) {
        return Line { id: 9, name: "determinism", pass: false, detail: e };
    }
    let mut differ = Vec::new();
    let mut bytes = 0;
    for f in files {
        let (x, y) = (std::fs::read(a.join(f)).unwrap_or_default(), std::fs::read(b.join(f)).unwrap_or_default());
        bytes += x.len();
        if x != y || x.is_empty() {
            differ.push(f);
        }
    }
    Line {
        id: 9,
        name: "determinism",
        pass: differ.is_empty(),
        detail: if differ.is_empty() {
            format!("{} files, {bytes} bytes identical", files.len())
        } else {
            format!("differing: {}", differ.join(", "))
        },
    }
}

fn main() {
    let mut lines = Vec::new();

    eprintln!("euclidean instance");
    let euc = end_to_end(EUCLIDEAN, "euclidean");
    lines.push(end_to_end_line(1, "euclidean end-to-end", &euc, RUNTIME_2D));
    match &euc {
        Ok((inst, _, _)) => {
            let groups = [
                Group::Parameters,
                Group::VertexPairs,
                Group::Adjacent,
                Group::Highway,
                Group::Trapping,
                Group::Axioms,
                Group::ZeroField,
            ];
            match verify::verify_groups(inst, &groups, &log("euclidean")) {
                Ok(rep) => lines.extend(instance_lines(inst, &rep)),
                Err(e) => {
                    for (id, name) in INSTANCE_CRITERIA {
                        lines.push(Line { id, name, pass: false, detail: format!("verification failed: {e}") });
                    }
                }
            }
        }
        Err(e) => {
            for (id, name) in INSTANCE_CRITERIA {
                lines.push(Line { id, name, pass: false, detail: e.clone() });
            }
        }
    }
    drop(euc);

    eprintln!("conformal instance");
    let conf = end_to_end(CONFORMAL, "conformal");
    lines.push(end_to_end_line(2, "conformal ground truth", &conf, f64::INFINITY));
    drop(conf);

    eprintln!("determinism");
    lines.push(determinism());

    eprintln!("three-dimensional instance");
    let r3 = end_to_end(RIEMANNIAN_3D, "riemannian-3d");
    lines.push(end_to_end_line(10, "d=3 smoke", &r3, RUNTIME_3D));
    drop(r3);

    lines.sort_by_key(|l| l.id);
    let mut failed = 0;
    for l in &lines {
        if !l.pass {
            failed += 1;
        }
        println!("criterion {:>2} {:<24} {}  {}", l.id, l.name, if l.pass { "PASS" } else { "FAIL" }, l.detail);
    }
    println!("acceptance: {}/{} criteria pass", lines.len() - failed, lines.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
