//! GRAPH text format: header `GRAPH d R n m tau K`, then `V id x y [z] kind`
//! and `E id u v w ell0` lines. Lines starting with `#` carry metadata such
//! as `# config_hash=<hex>`.

use std::fmt::Write as _;
use std::path::Path;

use crate::digest::sha256_hex;
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::graph::planar::VertexKind;
use crate::graph::weighted::{Edge, WeightedGraph};
use crate::grid_io::fmt_f64;

/// Body of the export without metadata lines.
pub fn to_text(g: &WeightedGraph) -> String {
    let mut s = format!(
        "GRAPH {} {} {} {} {} {}\n",
        g.d,
        fmt_f64(g.r),
        g.n_bar,
        g.m_bar,
        fmt_f64(g.tau),
        g.k
    );
    for (i, (p, k)) in g.vertices.iter().zip(&g.kinds).enumerate() {
        write!(s, "V {i}").unwrap();
        for a in 0..g.d {
            write!(s, " {}", fmt_f64(p.0[a])).unwrap();
        }
        writeln!(s, " {}", k.name()).unwrap();
    }
    for (i, e) in g.edges.iter().enumerate() {
        writeln!(s, "E {i} {} {} {} {}", e.u, e.v, fmt_f64(e.w), fmt_f64(e.ell0)).unwrap();
    }
    s
}

/// Hash of the graph body; metadata lines do not contribute.
pub fn graph_hash(g: &WeightedGraph) -> String {
    sha256_hex(to_text(g).as_bytes())
}

pub fn to_text_with_meta(g: &WeightedGraph, meta: &[(&str, String)]) -> String {
    let mut s = String::new();
    for (k, v) in meta {
        writeln!(s, "# {k}={v}").unwrap();
    }
    s + &to_text(g)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphFile {
    pub graph: WeightedGraph,
    pub meta: Vec<(String, String)>,
}

impl GraphFile {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

pub fn parse(text: &str, src: &str) -> Result<GraphFile> {
    let mut meta = Vec::new();
    let mut header: Option<(usize, f64, usize, usize, f64, usize)> = None;
    let mut vertices = Vec::new();
    let mut kinds = Vec::new();
    let mut edges = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let ln = ln + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.trim().split_once('=') {
                meta.push((k.trim().to_string(), v.trim().to_string()));
            }
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        let num = |i: usize| -> Result<f64> {
            tok.get(i)
                .ok_or_else(|| Error::parse(src, ln, "truncated line"))?
                .parse::<f64>()
                .map_err(|e| Error::parse(src, ln, format!("field {i}: {e}")))
        };
        let int = |i: usize| -> Result<usize> {
            tok.get(i)
                .ok_or_else(|| Error::parse(src, ln, "truncated line"))?
                .parse::<usize>()
                .map_err(|e| Error::parse(src, ln, format!("field {i}: {e}")))
        };
        match tok[0] {
            "GRAPH" => {
                if header.is_some() || tok.len() != 7 {
                    return Err(Error::parse(src, ln, "expected one `GRAPH d R n m tau K` header"));
                }
                let d = int(1)?;
                if !(1..=3).contains(&d) {
                    return Err(Error::parse(src, ln, "dimension must be 1, 2 or 3"));
                }
                header = Some((d, num(2)?, int(3)?, int(4)?, num(5)?, int(6)?));
            }
            "V" => {
                let d = header.ok_or_else(|| Error::parse(src, ln, "vertex before header"))?.0;
                if tok.len() != d + 3 || int(1)? != vertices.len() {
                    return Err(Error::parse(src, ln, format!("expected `V {} <{d} coordinates> kind`", vertices.len())));
                }
                let mut p = [0.0; 3];
                for (a, v) in p.iter_mut().enumerate().take(d) {
                    *v = num(2 + a)?;
                }
                vertices.push(Point(p));
                let k = VertexKind::parse(tok[d + 2]).ok_or_else(|| Error::parse(src, ln, format!("unknown vertex kind `{}`", tok[d + 2])))?;
                kinds.push(k);
            }
            "E" => {
                if tok.len() != 6 || int(1)? != edges.len() {
                    return Err(Error::parse(src, ln, format!("expected `E {} u v w ell0`", edges.len())));
                }
                let (u, v) = (int(2)?, int(3)?);
                if u >= vertices.len() || v >= vertices.len() {
                    return Err(Error::parse(src, ln, "edge endpoint is not a declared vertex"));
                }
                edges.push(Edge { u: u as u32, v: v as u32, w: num(4)?, ell0: num(5)? });
            }
            other => return Err(Error::parse(src, ln, format!("unknown record `{other}`"))),
        }
    }
    let (d, r, n, m, tau, k) = header.ok_or_else(|| Error::parse(src, 1, "missing GRAPH header"))?;
    Ok(GraphFile {
        graph: WeightedGraph::new(d, r, n, m, tau, k, vertices, kinds, edges),
        meta,
    })
}

pub fn read(path: &Path) -> Result<GraphFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> WeightedGraph {
        let v = vec![Point::new2(0.0, 0.0), Point::new2(0.1, 1.0 / 3.0), Point::new2(-0.25, 0.5)];
        let kinds = vec![VertexKind::Net, VertexKind::Subdivision, VertexKind::Merge];
        let e = vec![
            Edge { u: 0, v: 1, w: 0.35, ell0: 0.348 },
            Edge { u: 1, v: 2, w: 1e-3 / 7.0, ell0: 0.3 },
        ];
        WeightedGraph::new(2, 1.0, 4, 8, 1e-4, 16, v, kinds, e)
    }

    #[test]
    fn round_trip_preserves_bits_and_hash() {
        let g = sample();
        let text = to_text_with_meta(&g, &[("config_hash", "abc".into())]);
        let back = parse(&text, "t").unwrap();
        assert_eq!(back.graph, g);
        assert_eq!(back.meta("config_hash"), Some("abc"));
        assert_eq!(graph_hash(&back.graph), graph_hash(&g));
        assert!(text.contains("GRAPH 2 1.0 4 8 0.0001 16\n"));
        assert!(text.contains("V 2 -0.25 0.5 merge\n"));
    }

    #[test]
    fn rejects_malformed_records() {
        assert!(parse("V 0 0 0 net\n", "t").is_err());
        assert!(parse("GRAPH 2 1 1 1 0.1 1\nV 0 0 0 blob\n", "t").is_err());
        assert!(parse("GRAPH 2 1 1 1 0.1 1\nV 0 0 0 net\nE 0 0 1 1 1\n", "t").is_err());
        let e = parse("GRAPH 2 1 1 1 0.1 1\nV 1 0 0 net\n", "t").unwrap_err();
        assert!(e.to_string().contains("t:2"), "{e}");
    }
}
