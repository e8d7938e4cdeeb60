//! Parameter selection for the conformal factor: tube radius `eta`, shell
//! width `eta_bar`, wall height `C0` and far-field level `C1`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::segment_segment_dist;
use crate::graph::spatial::near_pairs;
use crate::graph::WeightedGraph;
use crate::grid_io::fmt_f64;
use crate::kv;
use crate::metric::ModulusTable;

/// One checked constraint: `holds` iff `value` is on the right side of
/// `bound`. Report-only constraints never fail parameter selection.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    /// Whether `value` must stay below `bound` (otherwise above).
    pub upper: bool,
    pub holds: bool,
    pub enforced: bool,
}

impl Constraint {
    fn below(name: &str, value: f64, bound: f64, strict: bool) -> Constraint {
        let holds = if strict { value < bound } else { value <= bound };
        Constraint { name: name.into(), value, bound, upper: true, holds, enforced: true }
    }

    fn above(name: &str, value: f64, bound: f64, strict: bool) -> Constraint {
        let holds = if strict { value > bound } else { value >= bound };
        Constraint { name: name.into(), value, bound, upper: false, holds, enforced: true }
    }

    /// Signed margin, positive when the constraint holds.
    pub fn slack(&self) -> f64 {
        if self.upper {
            self.bound - self.value
        } else {
            self.value - self.bound
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthParams {
    pub eps: f64,
    pub r: f64,
    pub d: usize,
    pub n_bar: usize,
    pub m_bar: usize,
    pub k: usize,
    pub tau: f64,
    pub eta: f64,
    pub eta_bar: f64,
    pub c0: f64,
    pub c1: f64,
    pub edges: usize,
    /// Conservative inverse modulus at `eps`.
    pub psi: f64,
    pub constraints: Vec<Constraint>,
}

/// `inf_e eps * ell0(e) / (512 w_e)`.
pub fn tube_radius_bound(g: &WeightedGraph, eps: f64) -> f64 {
    g.edges
        .iter()
        .map(|e| eps * e.ell0 / (512.0 * e.w))
        .fold(f64::INFINITY, f64::min)
}

/// Smallest distance between two edges that share no vertex, or `None`
/// when every such pair is farther apart than `cutoff`. The search radius
/// starts small and doubles, since the minimum is usually far below it.
pub fn nonadjacent_separation(g: &WeightedGraph, cutoff: f64) -> Option<f64> {
    let mut reach = cutoff / 256.0;
    loop {
        reach = reach.min(cutoff);
        if let Some(s) = separation_within(g, reach) {
            return Some(s);
        }
        if reach >= cutoff {
            return None;
        }
        reach *= 2.0;
    }
}

fn separation_within(g: &WeightedGraph, cutoff: f64) -> Option<f64> {
    let v = &g.vertices;
    let e = &g.edges;
    near_pairs(v, e, cutoff, |i, j| {
        let (a, b) = (e[i], e[j]);
        if a.u == b.u || a.u == b.v || a.v == b.u || a.v == b.v {
            return None;
        }
        let (p, q, r, t) = (v[a.u as usize], v[a.v as usize], v[b.u as usize], v[b.v as usize]);
        for k in 0..3 {
            let gap = r.0[k].min(t.0[k]) - p.0[k].max(q.0[k]);
            let gap = gap.max(p.0[k].min(q.0[k]) - r.0[k].max(t.0[k]));
            if gap > cutoff {
                return None;
            }
        }
        let s = segment_segment_dist(p, q, r, t);
        (s <= cutoff).then_some(s)
    })
    .into_iter()
    .reduce(f64::min)
}

/// Chooses `eta` as half the edge-ratio bound and `eta_bar` as half of
/// `min{eta, Psi(eps)/4, R/(4 n m)}`, then checks every constraint.
pub fn choose_params(g: &WeightedGraph, moduli: &ModulusTable, eps: f64) -> Result<SynthParams> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::param("eps", format!("{eps} must be positive")));
    }
    if g.edges.is_empty() {
        return Err(Error::Empty("graph edges"));
    }
    if let Some(e) = g.edges.iter().find(|e| !(e.w > 0.0 && e.ell0 > 0.0)) {
        return Err(Error::param("edge", format!("weight {} and length {} must be positive", e.w, e.ell0)));
    }
    let nm = (g.n_bar * g.m_bar) as f64;
    let spacing = g.r / nm;
    let bound = tube_radius_bound(g, eps);
    let eta = bound / 2.0;
    let psi = moduli.psi(eps);
    let eta_bar = eta.min(psi / 4.0).min(spacing / 4.0) / 2.0;
    let c0 = (eps / (128.0 * eta_bar)).ln();
    let c1 = (eps * nm / (64.0 * g.r)).ln();
    let shift = 2.0 * eta_bar;
    let net_resolution = 64.0 * g.r / eps * moduli.sup_ratio(psi, 2.0 * g.r, shift);
    let max_w = g.max_weight();
    let mut cs = vec![
        Constraint::above("c0_gt_c1", c0, c1, true),
        Constraint::below("eta_bar_lt_half_spacing", eta_bar, spacing / 2.0, true),
        Constraint::below("tube_radius", eta, bound, true),
        Constraint::below("eta_bar_lt_eta", eta_bar, eta, true),
        Constraint::below("eta_bar_lt_psi_quarter", eta_bar, psi / 4.0, true),
        Constraint::above("net_resolution", nm, net_resolution, false),
        Constraint::below("max_edge_weight", max_w, eps / 128.0, false),
    ];
    let reach = 2.0 * (eta + eta_bar);
    let sep = nonadjacent_separation(g, reach).unwrap_or(reach);
    let mut tube = Constraint::below("tube_separation", eta + eta_bar, sep / 2.0, true);
    tube.enforced = false;
    cs.push(tube);
    if let Some(c) = cs.iter().find(|c| c.enforced && !c.holds) {
        return Err(Error::Unsatisfiable {
            constraint: "synthesis parameters",
            detail: format!("{} fails: value {:e} against bound {:e}", c.name, c.value, c.bound),
        });
    }
    Ok(SynthParams {
        eps,
        r: g.r,
        d: g.d,
        n_bar: g.n_bar,
        m_bar: g.m_bar,
        k: g.k,
        tau: g.tau,
        eta,
        eta_bar,
        c0,
        c1,
        edges: g.edges.len(),
        psi,
        constraints: cs,
    })
}

impl SynthParams {
    pub fn constraint(&self, name: &str) -> Option<&Constraint> {
        self.constraints.iter().find(|c| c.name == name)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let f = fmt_f64;
        for (k, v) in [
            ("eps", f(self.eps)),
            ("R", f(self.r)),
            ("d", self.d.to_string()),
            ("n_bar", self.n_bar.to_string()),
            ("m_bar", self.m_bar.to_string()),
            ("K", self.k.to_string()),
            ("tau", f(self.tau)),
            ("eta", f(self.eta)),
            ("eta_bar", f(self.eta_bar)),
            ("C0", f(self.c0)),
            ("C1", f(self.c1)),
            ("edges", self.edges.to_string()),
            ("psi", f(self.psi)),
        ] {
            writeln!(s, "{k} = {v}").unwrap();
        }
        for c in &self.constraints {
            writeln!(
                s,
                "check.{} = {} {} {} {} {}",
                c.name,
                f(c.value),
                if c.upper { "<=" } else { ">=" },
                f(c.bound),
                if c.holds { "holds" } else { "fails" },
                if c.enforced { "enforced" } else { "report" }
            )
            .unwrap();
        }
        s
    }

    pub fn parse(text: &str, src: &str) -> Result<SynthParams> {
        let entries = kv::parse(text, src)?;
        let get = |k: &str| -> Result<&kv::Entry> {
            entries
                .iter()
                .find(|e| e.key == k)
                .ok_or_else(|| Error::parse(src, 0, format!("missing key `{k}`")))
        };
        let num = |k: &str| -> Result<f64> {
            let e = get(k)?;
            e.value.parse().map_err(|x| Error::parse(src, e.line, format!("`{k}`: {x}")))
        };
        let int = |k: &str| -> Result<usize> {
            let e = get(k)?;
            e.value.parse().map_err(|x| Error::parse(src, e.line, format!("`{k}`: {x}")))
        };
        let mut constraints = Vec::new();
        for e in entries.iter().filter(|e| e.key.starts_with("check.")) {
            let t: Vec<&str> = e.value.split_whitespace().collect();
            let bad = || Error::parse(src, e.line, "expected `value <=|>= bound holds|fails enforced|report`");
            if t.len() != 5 || !matches!(t[1], "<=" | ">=") {
                return Err(bad());
            }
            constraints.push(Constraint {
                name: e.key["check.".len()..].to_string(),
                value: t[0].parse().map_err(|_| bad())?,
                upper: t[1] == "<=",
                bound: t[2].parse().map_err(|_| bad())?,
                holds: t[3] == "holds",
                enforced: t[4] == "enforced",
            });
        }
        Ok(SynthParams {
            eps: num("eps")?,
            r: num("R")?,
            d: int("d")?,
            n_bar: int("n_bar")?,
            m_bar: int("m_bar")?,
            k: int("K")?,
            tau: num("tau")?,
            eta: num("eta")?,
            eta_bar: num("eta_bar")?,
            c0: num("C0")?,
            c1: num("C1")?,
            edges: int("edges")?,
            psi: num("psi")?,
            constraints,
        })
    }

    pub fn read(path: &Path) -> Result<SynthParams> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SynthParams::parse(&text, &path.display().to_string())
    }
}
