//! Run configuration: `key = value` text with the metric keys inline or a
//! `metric_file` reference.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::digest::sha256_hex;
use crate::error::{Error, Result};
use crate::grid_io::{fmt_f64, to_binary};
use crate::kv;
use crate::metric::{MetricKind, MetricSpec, ScalarField, TensorField};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Synth,
    Verify,
    ExportField,
    ExportGraph,
    Report,
}

impl Command {
    pub fn parse(s: &str) -> Option<Command> {
        Some(match s {
            "synth" => Command::Synth,
            "verify" => Command::Verify,
            "export-field" => Command::ExportField,
            "export-graph" => Command::ExportGraph,
            "report" => Command::Report,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Verify => "verify",
            Command::ExportField => "export-field",
            Command::ExportGraph => "export-graph",
            Command::Report => "report",
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub metric: MetricSpec,
    /// Accuracy the verification checks are held to.
    pub eps: f64,
    /// Accuracy the construction targets; `None` plans it from the budgets.
    pub eps_construct: Option<f64>,
    /// Spacing of the metric lattice.
    pub h: f64,
    pub order: u32,
    /// Field spacing; `None` uses `eta_bar / h_f_factor`.
    pub h_f: Option<f64>,
    pub h_f_factor: f64,
    /// Evaluation spacing; `None` shares the field lattice.
    pub h_e: Option<f64>,
    pub eval_order: u32,
    pub c_pair: usize,
    pub pairs: usize,
    pub vertex_pairs: usize,
    /// Edges checked for the adjacent bounds; `None` checks all.
    pub edge_samples: Option<usize>,
    pub trap_samples: usize,
    pub highway_samples: usize,
    pub triples: usize,
    pub seed: u64,
    pub node_budget: u64,
    pub field_budget: u64,
    pub moduli_sources: usize,
    pub moduli_step: Option<f64>,
    pub untangle_sweeps: usize,
    pub linearize_attempts: usize,
    pub threads: usize,
    pub out: Option<PathBuf>,
    pub command: Option<Command>,
}

const KEYS: &[&str] = &[
    "metric_file",
    "metric",
    "R",
    "d",
    "density",
    "tensor",
    "eps",
    "eps_construct",
    "h",
    "order",
    "h_f",
    "h_f_factor",
    "h_e",
    "eval_order",
    "c_pair",
    "pairs",
    "vertex_pairs",
    "edge_samples",
    "trap_samples",
    "highway_samples",
    "triples",
    "seed",
    "node_budget",
    "field_budget",
    "moduli_sources",
    "moduli_step",
    "untangle_sweeps",
    "linearize_attempts",
    "threads",
    "out",
    "command",
];

impl RunConfig {
    /// Defaults around a metric; `eps` must still be set to something
    /// positive before use.
    pub fn new(metric: MetricSpec, eps: f64, h: f64) -> RunConfig {
        RunConfig {
            metric,
            eps,
            eps_construct: None,
            h,
            order: 3,
            h_f: None,
            h_f_factor: 8.0,
            h_e: None,
            eval_order: 3,
            c_pair: 2,
            pairs: 1024,
            vertex_pairs: 1024,
            edge_samples: None,
            trap_samples: 500,
            highway_samples: 1024,
            triples: 1000,
            seed: 0,
            node_budget: 1 << 24,
            field_budget: 1 << 24,
            moduli_sources: 8,
            moduli_step: None,
            untangle_sweeps: 4,
            linearize_attempts: 6,
            threads: 0,
            out: None,
            command: None,
        }
    }

    pub fn parse(text: &str, src: &str, base: &Path) -> Result<RunConfig> {
        let entries = kv::parse(text, src)?;
        for e in &entries {
            if !KEYS.contains(&e.key.as_str()) {
                return Err(Error::parse(src, e.line, format!("unknown key `{}`", e.key)));
            }
        }
        let get = |k: &str| entries.iter().find(|e| e.key == k);
        let metric = match get("metric_file") {
            Some(e) => {
                if ["metric", "R", "d", "density", "tensor"].iter().any(|k| get(k).is_some()) {
                    return Err(Error::parse(src, e.line, "use either `metric_file` or inline metric keys"));
                }
                let p = PathBuf::from(&e.value);
                MetricSpec::load(&if p.is_absolute() { p } else { base.join(p) })?
            }
            None => MetricSpec::from_entries(&entries, src, base)?,
        };
        fn num<T: std::str::FromStr>(src: &str, e: &kv::Entry) -> Result<T> {
            e.value
                .parse::<T>()
                .map_err(|_| Error::parse(src, e.line, format!("`{}` has invalid value `{}`", e.key, e.value)))
        }
        let eps_e = get("eps").ok_or_else(|| Error::parse(src, 0, "missing key `eps`"))?;
        let h_e = get("h").ok_or_else(|| Error::parse(src, 0, "missing key `h`"))?;
        let mut c = RunConfig::new(metric, num(src, eps_e)?, num(src, h_e)?);
        let auto = |e: &kv::Entry, word: &str| -> Result<Option<f64>> {
            if e.value == word { Ok(None) } else { num(src, e).map(Some) }
        };
        for e in &entries {
            match e.key.as_str() {
                "eps_construct" => c.eps_construct = auto(e, "auto")?,
                "order" => c.order = num(src, e)?,
                "h_f" => c.h_f = auto(e, "auto")?,
                "h_f_factor" => c.h_f_factor = num(src, e)?,
                "h_e" => c.h_e = auto(e, "same")?,
                "eval_order" => c.eval_order = num(src, e)?,
                "c_pair" => c.c_pair = num(src, e)?,
                "pairs" => c.pairs = num(src, e)?,
                "vertex_pairs" => c.vertex_pairs = num(src, e)?,
                "edge_samples" => c.edge_samples = if e.value == "all" { None } else { Some(num(src, e)?) },
                "trap_samples" => c.trap_samples = num(src, e)?,
                "highway_samples" => c.highway_samples = num(src, e)?,
                "triples" => c.triples = num(src, e)?,
                "seed" => c.seed = num(src, e)?,
                "node_budget" => c.node_budget = num(src, e)?,
                "field_budget" => c.field_budget = num(src, e)?,
                "moduli_sources" => c.moduli_sources = num(src, e)?,
                "moduli_step" => c.moduli_step = auto(e, "auto")?,
                "untangle_sweeps" => c.untangle_sweeps = num(src, e)?,
                "linearize_attempts" => c.linearize_attempts = num(src, e)?,
                "threads" => c.threads = num(src, e)?,
                "out" => {
                    let p = PathBuf::from(&e.value);
                    c.out = Some(if p.is_absolute() { p } else { base.join(p) });
                }
                "command" => {
                    c.command = Some(
                        Command::parse(&e.value)
                            .ok_or_else(|| Error::parse(src, e.line, format!("unknown command `{}`", e.value)))?,
                    )
                }
                _ => {}
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, &path.display().to_string(), base)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("{v} must be positive and finite")))
            }
        };
        pos("eps", self.eps)?;
        pos("h", self.h)?;
        if let Some(v) = self.eps_construct {
            pos("eps_construct", v)?;
            if v < self.eps {
                return Err(Error::param("eps_construct", format!("{v} is below eps = {}", self.eps)));
            }
        }
        if let Some(v) = self.h_f {
            pos("h_f", v)?;
        }
        pos("h_f_factor", self.h_f_factor)?;
        if self.h_f_factor < 4.0 {
            return Err(Error::param("h_f_factor", "the shell needs at least four samples (factor >= 4)"));
        }
        if let Some(v) = self.h_e {
            pos("h_e", v)?;
            if let Some(f) = self.h_f {
                if v > f {
                    return Err(Error::param("h_e", format!("{v} exceeds h_f = {f}")));
                }
            }
        }
        if let Some(v) = self.moduli_step {
            pos("moduli_step", v)?;
        }
        for (name, o) in [("order", self.order), ("eval_order", self.eval_order)] {
            if !(1..=3).contains(&o) {
                return Err(Error::param(name, format!("stencil order {o} is not 1, 2 or 3")));
            }
        }
        if self.c_pair == 0 {
            return Err(Error::param("c_pair", "must be at least 1"));
        }
        if self.moduli_sources == 0 || self.linearize_attempts == 0 {
            return Err(Error::param("moduli_sources/linearize_attempts", "must be at least 1"));
        }
        Ok(())
    }

    /// Canonical text of every setting that affects results.
    pub fn canonical(&self) -> String {
        let mut s = self.metric.to_text();
        let opt = |v: Option<f64>, w: &str| v.map(fmt_f64).unwrap_or_else(|| w.to_string());
        for (k, v) in [
            ("eps", fmt_f64(self.eps)),
            ("eps_construct", opt(self.eps_construct, "auto")),
            ("h", fmt_f64(self.h)),
            ("order", self.order.to_string()),
            ("h_f", opt(self.h_f, "auto")),
            ("h_f_factor", fmt_f64(self.h_f_factor)),
            ("h_e", opt(self.h_e, "same")),
            ("eval_order", self.eval_order.to_string()),
            ("c_pair", self.c_pair.to_string()),
            ("pairs", self.pairs.to_string()),
            ("vertex_pairs", self.vertex_pairs.to_string()),
            ("edge_samples", self.edge_samples.map(|v| v.to_string()).unwrap_or_else(|| "all".into())),
            ("trap_samples", self.trap_samples.to_string()),
            ("highway_samples", self.highway_samples.to_string()),
            ("triples", self.triples.to_string()),
            ("seed", self.seed.to_string()),
            ("node_budget", self.node_budget.to_string()),
            ("field_budget", self.field_budget.to_string()),
            ("moduli_sources", self.moduli_sources.to_string()),
            ("moduli_step", opt(self.moduli_step, "auto")),
            ("untangle_sweeps", self.untangle_sweeps.to_string()),
            ("linearize_attempts", self.linearize_attempts.to_string()),
        ] {
            writeln!(s, "{k} = {v}").unwrap();
        }
        // Sampled metric data enters through its content.
        let grids: Vec<String> = match &self.metric.kind {
            MetricKind::Conformal(ScalarField::Grid { data, .. }) => vec![sha256_hex(&to_binary(data))],
            MetricKind::Riemannian(TensorField::Grid { data, .. }) => data.iter().map(|g| sha256_hex(&to_binary(g))).collect(),
            _ => Vec::new(),
        };
        for (i, g) in grids.iter().enumerate() {
            writeln!(s, "metric_data_{i} = {g}").unwrap();
        }
        s
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.canonical().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "metric = euclidean\nR = 1\nd = 2\neps = 0.25\nh = 0.01\n";

    #[test]
    fn defaults_and_overrides() {
        let c = RunConfig::parse(BASIC, "t", Path::new(".")).unwrap();
        assert_eq!((c.order, c.c_pair, c.seed, c.eps_construct), (3, 2, 0, None));
        let c = RunConfig::parse(&format!("{BASIC}seed = 7\neps_construct = 4\nh_e = same\ncommand = verify\n"), "t", Path::new(".")).unwrap();
        assert_eq!((c.seed, c.eps_construct, c.h_e, c.command), (7, Some(4.0), None, Some(Command::Verify)));
    }

    #[test]
    fn rejects_zero_eps_and_unknown_keys() {
        let e = RunConfig::parse(&BASIC.replace("0.25", "0"), "t", Path::new(".")).unwrap_err();
        assert!(e.to_string().contains("eps"), "{e}");
        let e = RunConfig::parse(&format!("{BASIC}colour = red\n"), "t", Path::new(".")).unwrap_err();
        assert!(e.to_string().contains("t:6"), "{e}");
        assert!(RunConfig::parse(&format!("{BASIC}h_e = 0.1\nh_f = 0.01\n"), "t", Path::new(".")).is_err());
    }

    #[test]
    fn hash_tracks_results_not_plumbing() {
        let a = RunConfig::parse(BASIC, "t", Path::new(".")).unwrap();
        let b = RunConfig::parse(&format!("{BASIC}threads = 3\nout = x\n"), "t", Path::new(".")).unwrap();
        let c = RunConfig::parse(&format!("{BASIC}seed = 1\n"), "t", Path::new(".")).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }
}
