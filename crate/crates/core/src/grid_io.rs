//! GRID files: a text header `GRID d n1 [n2 [n3]] h x0 y0 [z0]` followed by
//! nodal values with x varying fastest, either as text rows or as a raw
//! little-endian f64 block. Optional `# key=value` lines may precede the
//! header.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::lattice::Grid;

#[derive(Clone, Debug, PartialEq)]
pub struct GridData {
    pub grid: Grid,
    pub values: Vec<f64>,
}

/// Shortest round-trip rendering of a float.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn header(grid: &Grid) -> String {
    let mut s = format!("GRID {}", grid.d);
    for a in 0..grid.d {
        write!(s, " {}", grid.dims[a]).unwrap();
    }
    write!(s, " {}", fmt_f64(grid.h)).unwrap();
    for a in 0..grid.d {
        write!(s, " {}", fmt_f64(grid.origin.0[a])).unwrap();
    }
    s
}

fn parse_header(line: &str, src: &str) -> Result<Grid> {
    let tok: Vec<&str> = line.split_whitespace().collect();
    if tok.first() != Some(&"GRID") {
        return Err(Error::parse(src, 1, "expected `GRID` header"));
    }
    let num = |i: usize| -> Result<f64> {
        tok.get(i)
            .ok_or_else(|| Error::parse(src, 1, "truncated GRID header"))?
            .parse::<f64>()
            .map_err(|e| Error::parse(src, 1, format!("bad header field {}: {e}", i)))
    };
    let d = num(1)? as usize;
    if !(1..=3).contains(&d) || tok.len() != 2 + 2 * d + 1 {
        return Err(Error::parse(src, 1, "GRID header needs d, d sizes, h and d origin coordinates"));
    }
    let mut dims = [1usize; 3];
    for (a, v) in dims.iter_mut().enumerate().take(d) {
        let n = num(2 + a)?;
        if n < 2.0 || n.fract() != 0.0 {
            return Err(Error::parse(src, 1, "grid sizes must be integers >= 2"));
        }
        *v = n as usize;
    }
    let h = num(2 + d)?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::parse(src, 1, "grid spacing must be positive"));
    }
    let mut origin = [0.0; 3];
    for (a, v) in origin.iter_mut().enumerate().take(d) {
        *v = num(3 + d + a)?;
    }
    Ok(Grid {
        d,
        dims,
        h,
        origin: Point(origin),
    })
}

pub fn to_text(data: &GridData) -> String {
    let g = &data.grid;
    let mut s = header(g);
    s.push('\n');
    for row in data.values.chunks(g.dims[0]) {
        let line: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

pub fn to_binary(data: &GridData) -> Vec<u8> {
    let mut out = header(&data.grid).into_bytes();
    out.push(b'\n');
    out.reserve(8 * data.values.len());
    for v in &data.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub type Meta = Vec<(String, String)>;

fn meta_lines(meta: &[(&str, String)]) -> String {
    meta.iter().map(|(k, v)| format!("# {k}={v}\n")).collect()
}

pub fn to_binary_with_meta(data: &GridData, meta: &[(&str, String)]) -> Vec<u8> {
    let mut out = meta_lines(meta).into_bytes();
    out.extend(to_binary(data));
    out
}

/// Parses either encoding; text is tried first.
pub fn parse(bytes: &[u8], src: &str) -> Result<GridData> {
    parse_with_meta(bytes, src).map(|(d, _)| d)
}

pub fn parse_with_meta(mut bytes: &[u8], src: &str) -> Result<(GridData, Meta)> {
    let mut meta = Meta::new();
    while bytes.first() == Some(&b'#') {
        let nl = bytes
            .iter()
            .position(|b| *b == b'\n')
            .ok_or_else(|| Error::parse(src, meta.len() + 1, "unterminated metadata line"))?;
        let line = std::str::from_utf8(&bytes[1..nl]).map_err(|_| Error::parse(src, meta.len() + 1, "metadata is not UTF-8"))?;
        if let Some((k, v)) = line.trim().split_once('=') {
            meta.push((k.trim().to_string(), v.trim().to_string()));
        }
        bytes = &bytes[nl + 1..];
    }
    parse_body(bytes, src).map(|d| (d, meta))
}

fn parse_body(bytes: &[u8], src: &str) -> Result<GridData> {
    let nl = bytes
        .iter()
        .position(|b| *b == b'\n')
        .ok_or_else(|| Error::parse(src, 1, "missing header line"))?;
    let head = std::str::from_utf8(&bytes[..nl]).map_err(|_| Error::parse(src, 1, "header is not UTF-8"))?;
    let grid = parse_header(head.trim(), src)?;
    let n = grid.len();
    let body = &bytes[nl + 1..];
    if let Ok(text) = std::str::from_utf8(body) {
        let mut values = Vec::with_capacity(n);
        let mut ok = true;
        for (ln, line) in text.lines().enumerate() {
            for t in line.split_whitespace() {
                match t.parse::<f64>() {
                    Ok(v) => values.push(v),
                    Err(_) => {
                        ok = false;
                        if body.len() != 8 * n {
                            return Err(Error::parse(src, ln + 2, format!("bad value `{t}`")));
                        }
                        break;
                    }
                }
            }
            if !ok {
                break;
            }
        }
        if ok {
            if values.len() != n {
                return Err(Error::parse(src, 1, format!("expected {n} values, found {}", values.len())));
            }
            return Ok(GridData { grid, values });
        }
    }
    if body.len() != 8 * n {
        return Err(Error::parse(src, 2, format!("binary block must hold {n} f64 values")));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(GridData { grid, values })
}

pub fn read(path: &Path) -> Result<GridData> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse(&bytes, &path.display().to_string())
}

pub fn write_text(path: &Path, data: &GridData) -> Result<()> {
    std::fs::write(path, to_text(data)).map_err(|e| Error::io(path, e))
}
