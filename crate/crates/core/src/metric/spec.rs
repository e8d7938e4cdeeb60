//! Declarative input metrics: Euclidean, conformal `e^{g(x)}|dx|`, and
//! Riemannian `sqrt(dx^T M(x) dx)`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::grid_io::{self, fmt_f64, GridData};
use crate::kv;

/// Scalar field on the box.
#[derive(Clone, Debug)]
pub enum ScalarField {
    Const(f64),
    /// `a * prod_i sin(pi x_i)`.
    SinBump(f64),
    /// `a * exp(-|x|^2 / (2 s^2))`.
    Gauss { a: f64, s: f64 },
    Grid { path: PathBuf, data: Arc<GridData> },
}

impl ScalarField {
    pub fn eval(&self, p: Point, d: usize) -> f64 {
        match self {
            ScalarField::Const(c) => *c,
            ScalarField::SinBump(a) => {
                let mut v = *a;
                for x in &p.0[..d] {
                    v *= (std::f64::consts::PI * x).sin();
                }
                v
            }
            ScalarField::Gauss { a, s } => a * (-p.dot(p) / (2.0 * s * s)).exp(),
            ScalarField::Grid { data, .. } => data.grid.interp(&data.values, p),
        }
    }

    fn describe(&self) -> String {
        match self {
            ScalarField::Const(c) => format!("const({})", fmt_f64(*c)),
            ScalarField::SinBump(a) => format!("sinbump({})", fmt_f64(*a)),
            ScalarField::Gauss { a, s } => format!("gauss({}, {})", fmt_f64(*a), fmt_f64(*s)),
            ScalarField::Grid { path, .. } => format!("grid({})", path.display()),
        }
    }
}

/// Symmetric tensor field. Grid components are stored upper-triangular
/// row by row: (11, 12, 22) in the plane, (11, 12, 13, 22, 23, 33) in space.
#[derive(Clone, Debug)]
pub enum TensorField {
    Diag([f64; 3]),
    Grid { paths: Vec<PathBuf>, data: Vec<Arc<GridData>> },
}

impl TensorField {
    pub fn eval(&self, p: Point, d: usize) -> [[f64; 3]; 3] {
        let mut m = [[0.0; 3]; 3];
        match self {
            TensorField::Diag(v) => {
                for a in 0..d {
                    m[a][a] = v[a];
                }
            }
            TensorField::Grid { data, .. } => {
                let mut k = 0;
                for a in 0..d {
                    for b in a..d {
                        let v = data[k].grid.interp(&data[k].values, p);
                        m[a][b] = v;
                        m[b][a] = v;
                        k += 1;
                    }
                }
            }
        }
        m
    }

    fn describe(&self, d: usize) -> String {
        match self {
            TensorField::Diag(v) => {
                let parts: Vec<String> = v[..d].iter().map(|x| fmt_f64(*x)).collect();
                format!("diag({})", parts.join(", "))
            }
            TensorField::Grid { paths, .. } => {
                let parts: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
                format!("grid({})", parts.join(", "))
            }
        }
    }
}

#[derive(Clone, Debug)]
pub enum MetricKind {
    Euclidean,
    Conformal(ScalarField),
    Riemannian(TensorField),
}

#[derive(Clone, Debug)]
pub struct MetricSpec {
    pub kind: MetricKind,
    pub r: f64,
    pub d: usize,
}

/// Smallest eigenvalue of a symmetric matrix (d = 2 or 3).
pub fn min_eigenvalue(m: &[[f64; 3]; 3], d: usize) -> f64 {
    if d == 2 {
        let tr = m[0][0] + m[1][1];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        return tr / 2.0 - disc;
    }
    let p1 = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
    let q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
    if p1 == 0.0 {
        return m[0][0].min(m[1][1]).min(m[2][2]);
    }
    let p2 = (m[0][0] - q).powi(2) + (m[1][1] - q).powi(2) + (m[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let mut b = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            b[i][j] = (m[i][j] - if i == j { q } else { 0.0 }) / p;
        }
    }
    let det_b = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let r = (det_b / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos()
}

/// Number of samples per axis used by `validate`.
const SAMPLES_PER_AXIS: usize = 33;

impl MetricSpec {
    pub fn euclidean(d: usize, r: f64) -> MetricSpec {
        MetricSpec {
            kind: MetricKind::Euclidean,
            r,
            d,
        }
    }

    pub fn conformal(d: usize, r: f64, g: ScalarField) -> MetricSpec {
        MetricSpec {
            kind: MetricKind::Conformal(g),
            r,
            d,
        }
    }

    pub fn riemannian(d: usize, r: f64, m: TensorField) -> MetricSpec {
        MetricSpec {
            kind: MetricKind::Riemannian(m),
            r,
            d,
        }
    }

    /// Length density at `p` in direction `v` (any length); returns the
    /// metric length of the vector `v` anchored at `p`.
    pub fn vector_len(&self, p: Point, v: Point) -> f64 {
        match &self.kind {
            MetricKind::Euclidean => v.norm(),
            MetricKind::Conformal(g) => g.eval(p, self.d).exp() * v.norm(),
            MetricKind::Riemannian(t) => {
                let m = t.eval(p, self.d);
                let mut q = 0.0;
                for a in 0..self.d {
                    for b in 0..self.d {
                        q += v.0[a] * m[a][b] * v.0[b];
                    }
                }
                q.max(0.0).sqrt()
            }
        }
    }

    /// Metric length of the segment `ab` by a single midpoint evaluation.
    pub fn segment_len_mid(&self, a: Point, b: Point) -> f64 {
        self.vector_len(a.lerp(b, 0.5), b - a)
    }

    /// Checks the invariants on a sample grid and returns bounds
    /// (min, max) of the length density per unit Euclidean length.
    pub fn validate(&self) -> Result<(f64, f64)> {
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::param("R", format!("half width {} must be positive", self.r)));
        }
        if !(2..=3).contains(&self.d) {
            return Err(Error::param("d", format!("dimension {} is not 2 or 3", self.d)));
        }
        let n = SAMPLES_PER_AXIS;
        let total = n.pow(self.d as u32);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..total {
            let mut p = Point::ORIGIN;
            let mut k = i;
            for a in 0..self.d {
                p.0[a] = -self.r + 2.0 * self.r * (k % n) as f64 / (n - 1) as f64;
                k /= n;
            }
            let (a, b) = self.density_range_at(p)?;
            lo = lo.min(a);
            hi = hi.max(b);
        }
        Ok((lo, hi))
    }

    fn density_range_at(&self, p: Point) -> Result<(f64, f64)> {
        match &self.kind {
            MetricKind::Euclidean => Ok((1.0, 1.0)),
            MetricKind::Conformal(g) => {
                let v = g.eval(p, self.d);
                if !v.is_finite() || !v.exp().is_finite() || v.exp() == 0.0 {
                    return Err(Error::NonFiniteField { point: p.0 });
                }
                Ok((v.exp(), v.exp()))
            }
            MetricKind::Riemannian(t) => {
                let m = t.eval(p, self.d);
                if m.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteField { point: p.0 });
                }
                let lmin = min_eigenvalue(&m, self.d);
                if lmin <= 0.0 {
                    return Err(Error::NotPositiveDefinite {
                        point: p.0,
                        min_eigenvalue: lmin,
                    });
                }
                // Largest eigenvalue is bounded by the trace.
                let tr: f64 = (0..self.d).map(|a| m[a][a]).sum();
                let lmax = match t {
                    TensorField::Diag(v) => v[..self.d].iter().cloned().fold(0.0, f64::max),
                    _ => tr,
                };
                Ok((lmin.sqrt(), lmax.sqrt()))
            }
        }
    }

    /// Canonical text form; parses back to an equivalent spec.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let name = match self.kind {
            MetricKind::Euclidean => "euclidean",
            MetricKind::Conformal(_) => "conformal",
            MetricKind::Riemannian(_) => "riemannian",
        };
        writeln!(s, "metric = {name}").unwrap();
        writeln!(s, "R = {}", fmt_f64(self.r)).unwrap();
        writeln!(s, "d = {}", self.d).unwrap();
        match &self.kind {
            MetricKind::Euclidean => {}
            MetricKind::Conformal(g) => writeln!(s, "density = {}", g.describe()).unwrap(),
            MetricKind::Riemannian(t) => writeln!(s, "tensor = {}", t.describe(self.d)).unwrap(),
        }
        s
    }

    /// Builds a spec from parsed entries; unknown keys are left to the caller.
    pub fn from_entries(entries: &[kv::Entry], src: &str, base: &Path) -> Result<MetricSpec> {
        let get = |k: &str| entries.iter().find(|e| e.key == k);
        let need = |k: &'static str| get(k).ok_or_else(|| Error::parse(src, 0, format!("missing key `{k}`")));
        let float = |e: &kv::Entry| -> Result<f64> {
            e.value
                .parse::<f64>()
                .map_err(|_| Error::parse(src, e.line, format!("`{}` is not a number", e.value)))
        };
        let metric = need("metric")?;
        let r_e = need("R")?;
        let r = float(r_e)?;
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::parse(src, r_e.line, "R must be positive"));
        }
        let d_e = need("d")?;
        let d: usize = d_e
            .value
            .parse()
            .map_err(|_| Error::parse(src, d_e.line, "d must be an integer"))?;
        if !(2..=3).contains(&d) {
            return Err(Error::parse(src, d_e.line, "d must be 2 or 3"));
        }
        let load = |e: &kv::Entry, p: &str| -> Result<(PathBuf, Arc<GridData>)> {
            let path = PathBuf::from(p);
            let full = if path.is_absolute() { path.clone() } else { base.join(&path) };
            let data = grid_io::read(&full)?;
            if data.grid.d != d {
                return Err(Error::parse(src, e.line, format!("grid {} has dimension {}", p, data.grid.d)));
            }
            Ok((path, Arc::new(data)))
        };
        let args_f = |e: &kv::Entry, args: &[&str], n: usize| -> Result<Vec<f64>> {
            if args.len() != n {
                return Err(Error::parse(src, e.line, format!("expected {n} arguments")));
            }
            args.iter()
                .map(|a| {
                    a.parse::<f64>()
                        .map_err(|_| Error::parse(src, e.line, format!("`{a}` is not a number")))
                })
                .collect()
        };
        let kind = match metric.value.as_str() {
            "euclidean" => MetricKind::Euclidean,
            "conformal" => {
                let e = need("density")?;
                let (name, args) =
                    kv::call(&e.value).ok_or_else(|| Error::parse(src, e.line, "density must look like name(args)"))?;
                let g = match name {
                    "const" => ScalarField::Const(args_f(e, &args, 1)?[0]),
                    "sinbump" => ScalarField::SinBump(args_f(e, &args, 1)?[0]),
                    "gauss" => {
                        let v = args_f(e, &args, 2)?;
                        if v[1] <= 0.0 {
                            return Err(Error::parse(src, e.line, "gauss width must be positive"));
                        }
                        ScalarField::Gauss { a: v[0], s: v[1] }
                    }
                    "grid" if args.len() == 1 => {
                        let (path, data) = load(e, args[0])?;
                        ScalarField::Grid { path, data }
                    }
                    other => return Err(Error::parse(src, e.line, format!("unknown density `{other}`"))),
                };
                MetricKind::Conformal(g)
            }
            "riemannian" => {
                let e = need("tensor")?;
                let (name, args) =
                    kv::call(&e.value).ok_or_else(|| Error::parse(src, e.line, "tensor must look like name(args)"))?;
                let t = match name {
                    "diag" => {
                        let v = args_f(e, &args, d)?;
                        let mut m = [0.0; 3];
                        m[..d].copy_from_slice(&v);
                        TensorField::Diag(m)
                    }
                    "grid" => {
                        let want = d * (d + 1) / 2;
                        if args.len() != want {
                            return Err(Error::parse(src, e.line, format!("tensor grid needs {want} component files")));
                        }
                        let mut paths = Vec::new();
                        let mut data = Vec::new();
                        for a in &args {
                            let (p, g) = load(e, a)?;
                            paths.push(p);
                            data.push(g);
                        }
                        TensorField::Grid { paths, data }
                    }
                    other => return Err(Error::parse(src, e.line, format!("unknown tensor `{other}`"))),
                };
                MetricKind::Riemannian(t)
            }
            other => return Err(Error::parse(src, metric.line, format!("unknown metric `{other}`"))),
        };
        let spec = MetricSpec { kind, r, d };
        spec.validate()?;
        Ok(spec)
    }

    pub fn parse(text: &str, src: &str, base: &Path) -> Result<MetricSpec> {
        let entries = kv::parse(text, src)?;
        for e in &entries {
            if !["metric", "R", "d", "density", "tensor"].contains(&e.key.as_str()) {
                return Err(Error::parse(src, e.line, format!("unknown key `{}`", e.key)));
            }
        }
        Self::from_entries(&entries, src, base)
    }

    pub fn load(path: &Path) -> Result<MetricSpec> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, &path.display().to_string(), base)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_builtins() {
        let s = MetricSpec::parse("metric=conformal\nR=1\nd=2\ndensity=sinbump(0.5)\n", "t", Path::new(".")).unwrap();
        let v = s.vector_len(Point::new2(0.5, 0.5), Point::new2(1.0, 0.0));
        assert!((v - 0.5f64.exp()).abs() < 1e-15);
        let back = MetricSpec::parse(&s.to_text(), "t", Path::new(".")).unwrap();
        assert_eq!(back.to_text(), s.to_text());
        let r = MetricSpec::parse("metric=riemannian\nR=1\nd=3\ntensor=diag(1,1,4)\n", "t", Path::new(".")).unwrap();
        assert_eq!(r.vector_len(Point::ORIGIN, Point::new3(0.0, 0.0, 0.5)), 1.0);
        assert_eq!(r.validate().unwrap(), (1.0, 2.0));
    }

    #[test]
    fn rejects_bad_input() {
        let bad = |t: &str| MetricSpec::parse(t, "t", Path::new(".")).unwrap_err().to_string();
        assert!(bad("metric=euclidean\nR=0\nd=2\n").contains("R must be positive"));
        assert!(bad("metric=euclidean\nR=1\nd=4\n").contains("d must be 2 or 3"));
        assert!(bad("metric=conformal\nR=1\nd=2\ndensity=wave(1)\n").contains("unknown density"));
        let e = bad("metric=riemannian\nR=1\nd=2\ntensor=diag(1,-1)\n");
        assert!(e.contains("not positive definite"), "{e}");
        assert!(bad("metric=conformal\nR=1\nd=2\ndensity=const(1e6)\n").contains("not finite"));
    }

    #[test]
    fn eigenvalues() {
        let m = [[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 5.0]];
        assert!((min_eigenvalue(&m, 2) - 1.0).abs() < 1e-12);
        assert!((min_eigenvalue(&m, 3) - 1.0).abs() < 1e-12);
        let m = [[4.0, 1.0, 2.0], [1.0, 3.0, 0.5], [2.0, 0.5, 6.0]];
        // Reference value from the characteristic polynomial.
        let l = min_eigenvalue(&m, 3);
        let det = |l: f64| {
            let a = [[m[0][0] - l, m[0][1], m[0][2]], [m[1][0], m[1][1] - l, m[1][2]], [m[2][0], m[2][1], m[2][2] - l]];
            a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
        };
        assert!(det(l).abs() < 1e-9);
        assert!(l > 0.0 && l < 3.0);
    }
}
