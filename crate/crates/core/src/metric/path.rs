//! Polyline paths and their lengths under a length density.

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::metric::spec::MetricSpec;

/// Anything that assigns a length to a short vector anchored at a point.
pub trait LengthDensity {
    fn vector_len(&self, p: Point, v: Point) -> f64;
}

/// The Euclidean metric D_0.
#[derive(Clone, Copy, Debug, Default)]
pub struct Euclid;

impl LengthDensity for Euclid {
    fn vector_len(&self, _: Point, v: Point) -> f64 {
        v.norm()
    }
}

impl LengthDensity for MetricSpec {
    fn vector_len(&self, p: Point, v: Point) -> f64 {
        MetricSpec::vector_len(self, p, v)
    }
}

/// Relative tolerance of `segment_length` when none is specified.
pub const QUAD_RTOL: f64 = 1e-9;
const MAX_PANELS: usize = 1 << 20;

/// Composite midpoint rule on `ab`, doubling panels until the relative
/// change drops below `rtol`.
pub fn segment_length<M: LengthDensity + ?Sized>(m: &M, a: Point, b: Point, rtol: f64) -> f64 {
    let v = b - a;
    if v.norm() == 0.0 {
        return 0.0;
    }
    let eval = |n: usize| -> f64 {
        let step = v * (1.0 / n as f64);
        (0..n)
            .map(|i| m.vector_len(a + v * ((i as f64 + 0.5) / n as f64), step))
            .sum()
    };
    let mut n = 1;
    let mut prev = eval(1);
    loop {
        n *= 2;
        let cur = eval(n);
        if (cur - prev).abs() <= rtol * cur.abs() || n >= MAX_PANELS {
            return cur;
        }
        prev = cur;
    }
}

/// Length of a polyline.
pub fn path_length<M: LengthDensity + ?Sized>(m: &M, pts: &[Point]) -> Result<f64> {
    if pts.is_empty() {
        return Err(Error::Empty("path has no vertices"));
    }
    Ok(pts.windows(2).map(|w| segment_length(m, w[0], w[1], QUAD_RTOL)).sum())
}

/// Ordered vertex list with cached lengths.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub pts: Vec<Point>,
    pub len_d0: f64,
    /// Length under the metric that produced the path.
    pub len_metric: f64,
}

impl Path {
    /// Drops repeated consecutive vertices and caches the D_0 length.
    pub fn new(pts: Vec<Point>, len_metric: f64) -> Result<Path> {
        let mut clean: Vec<Point> = Vec::with_capacity(pts.len());
        for p in pts {
            if clean.last() != Some(&p) {
                clean.push(p);
            }
        }
        let len_d0 = path_length(&Euclid, &clean)?;
        Ok(Path {
            pts: clean,
            len_d0,
            len_metric,
        })
    }

    /// Path whose metric length is measured by quadrature under `m`.
    pub fn measured<M: LengthDensity + ?Sized>(m: &M, pts: Vec<Point>) -> Result<Path> {
        let mut p = Path::new(pts, 0.0)?;
        p.len_metric = path_length(m, &p.pts)?;
        Ok(p)
    }

    /// PATH text: header `PATH n metric_length d0_length`, then `P x y [z]`.
    pub fn to_text(&self, d: usize) -> String {
        use crate::grid_io::fmt_f64;
        let mut s = format!("PATH {} {} {}\n", self.pts.len(), fmt_f64(self.len_metric), fmt_f64(self.len_d0));
        for p in &self.pts {
            let c: Vec<String> = p.0[..d].iter().map(|v| fmt_f64(*v)).collect();
            s.push_str(&format!("P {}\n", c.join(" ")));
        }
        s
    }
}
