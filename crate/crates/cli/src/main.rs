use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Parser;
use conflat::config::{Command, RunConfig};
use conflat::grid_io::{self, fmt_f64};
use conflat::pipeline::{self, Instance};
use conflat::verify;

/// Builds a conformal factor whose metric approximates a given length
/// metric on a box, and checks the approximation.
#[derive(Debug, Parser)]
#[command(name = "conflat", version)]
struct Args {
    /// Run configuration (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// synth | verify | export-field | export-graph | report. Overrides the
    /// config; defaults to verify.
    #[arg(long)]
    command: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    threads: Option<usize>,
    /// Suppress progress lines on stderr.
    #[arg(long, short)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(args: &Args) -> Result<bool> {
    let mut c = RunConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        c.seed = s;
    }
    if let Some(o) = &args.out {
        c.out = Some(o.clone());
    }
    if let Some(t) = args.threads {
        c.threads = t;
    }
    let cmd = match &args.command {
        Some(s) => Command::parse(s).with_context(|| format!("unknown command `{s}`"))?,
        None => c.command.unwrap_or(Command::Verify),
    };
    if c.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(c.threads).build_global()?;
    }
    let start = Instant::now();
    let quiet = args.quiet;
    let log = move |s: &str| {
        if !quiet {
            eprintln!("[{:7.1}s] {s}", start.elapsed().as_secs_f64());
        }
    };
    let dir = pipeline::out_dir(&c);
    match cmd {
        Command::Synth => {
            let inst = pipeline::build(&c, &log)?;
            pipeline::write_artifacts(&dir, &inst)?;
            print!("{}", pipeline::summary(&inst));
            println!("wrote {}", dir.display());
            Ok(true)
        }
        Command::Verify => {
            let inst = obtain(&c, &dir, &log)?;
            let report = verify::verify(&inst, &log)?;
            let path = dir.join(pipeline::REPORT_FILE);
            std::fs::write(&path, report.to_text()).with_context(|| format!("writing {}", path.display()))?;
            println!("{}", report.summary());
            if !report.passed() {
                let worst = report
                    .checks
                    .iter()
                    .filter(|ch| !ch.pass)
                    .max_by(|a, b| a.worst_excess.total_cmp(&b.worst_excess))
                    .map(|ch| ch.name)
                    .unwrap_or("?");
                eprintln!("verification failed; worst check: {worst}");
            }
            Ok(report.passed())
        }
        Command::ExportField => {
            let inst = obtain(&c, &dir, &log)?;
            let path = dir.join("field.txt");
            grid_io::write_text(&path, &inst.field.to_grid_data())?;
            println!("wrote {}", path.display());
            Ok(true)
        }
        Command::ExportGraph => {
            let inst = obtain(&c, &dir, &log)?;
            pipeline::write_graph(&dir, &c, &inst.graph)?;
            println!("wrote {}", dir.join(pipeline::GRAPH_FILE).display());
            Ok(true)
        }
        Command::Report => {
            let inst = obtain(&c, &dir, &log)?;
            let summary = pipeline::summary(&inst);
            write_file(&dir.join("summary.txt"), &summary)?;
            write_file(&dir.join("edges.csv"), &edges_csv(&inst))?;
            print!("{summary}");
            println!("wrote {} and {}", dir.join("summary.txt").display(), dir.join("edges.csv").display());
            Ok(true)
        }
    }
}

/// Artifacts from `dir` when present, otherwise a fresh build written there.
fn obtain(c: &RunConfig, dir: &Path, log: &dyn Fn(&str)) -> Result<Instance> {
    if dir.join(pipeline::GRAPH_FILE).exists() {
        log(&format!("loading artifacts from {}", dir.display()));
        return pipeline::load(c, dir).with_context(|| format!("artifacts in {} do not match the config", dir.display()));
    }
    let inst = pipeline::build(c, log)?;
    pipeline::write_artifacts(dir, &inst)?;
    Ok(inst)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(p) = path.parent() {
        std::fs::create_dir_all(p)?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// One row per edge: endpoint coordinates, weight, Euclidean length.
fn edges_csv(inst: &Instance) -> String {
    let g = &inst.graph;
    let d = g.d;
    let axes = ["x", "y", "z"];
    let mut s = String::new();
    let cols: Vec<String> = (1..=2).flat_map(|k| axes[..d].iter().map(move |a| format!("{a}{k}"))).collect();
    writeln!(s, "{},w,ell0", cols.join(",")).unwrap();
    for e in &g.edges {
        let (a, b) = (g.vertices[e.u as usize], g.vertices[e.v as usize]);
        for p in [a, b] {
            for v in &p.0[..d] {
                write!(s, "{},", fmt_f64(*v)).unwrap();
            }
        }
        writeln!(s, "{},{}", fmt_f64(e.w), fmt_f64(e.ell0)).unwrap();
    }
    s
}
