//! Moduli of continuity of the lattice metric against D_0.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dijkstra::{Limits, Workspace};
use crate::error::{Error, Result};
use crate::metric::oracle::LatticeOracle;

/// Multiplier applied to sampled phi before it enters parameter choices;
/// sampling can only under-estimate a supremum.
pub const PHI_SAFETY: f64 = 1.1;

#[derive(Clone, Debug, PartialEq)]
pub struct ModulusTable {
    pub scales: Vec<f64>,
    /// `phi[j]`: largest sampled metric distance over pairs with
    /// Euclidean separation at most `scales[j]`.
    pub phi: Vec<f64>,
    pub sources: usize,
    pub pairs: u64,
}

impl ModulusTable {
    /// Tabulated phi at the smallest scale not below `l`.
    pub fn phi_at(&self, l: f64) -> f64 {
        match self.scales.iter().position(|s| *s >= l) {
            Some(j) => self.phi[j],
            None => *self.phi.last().unwrap_or(&0.0),
        }
    }

    pub fn phi_safe(&self, l: f64) -> f64 {
        PHI_SAFETY * self.phi_at(l)
    }

    /// Largest tabulated scale whose phi does not exceed `theta`.
    pub fn psi(&self, theta: f64) -> f64 {
        self.scales
            .iter()
            .zip(&self.phi)
            .filter(|(_, p)| **p <= theta)
            .map(|(s, _)| *s)
            .last()
            .unwrap_or(0.0)
    }

    /// `sup phi_safe(l) / (l - shift)` over tabulated `l` in `[lo, hi]`
    /// with `l > shift`.
    pub fn sup_ratio(&self, lo: f64, hi: f64, shift: f64) -> f64 {
        let mut best = 0.0f64;
        for (j, &l) in self.scales.iter().enumerate() {
            if l < lo || l > hi * (1.0 + 1e-12) || l <= shift {
                continue;
            }
            best = best.max(PHI_SAFETY * self.phi[j] / (l - shift));
        }
        best
    }
}

/// Evenly spaced scales `step, 2 step, ...` up to the box diagonal.
pub fn default_scales(r: f64, d: usize, step: f64) -> Vec<f64> {
    let top = 2.0 * r * (d as f64).sqrt();
    let n = (top / step).ceil() as usize;
    (1..=n).map(|k| (k as f64 * step).min(top)).collect()
}

/// Estimates phi by exhaustive scans of full shortest-path trees from
/// `sources` stratified random nodes (one per stratum).
pub fn moduli(oracle: &LatticeOracle, scales: &[f64], sources: usize, seed: u64) -> Result<ModulusTable> {
    if scales.is_empty() {
        return Err(Error::Empty("moduli scales"));
    }
    if scales.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::param("scales", "must be sorted ascending"));
    }
    let g = &oracle.grid;
    let d = g.d;
    let k = ((sources.max(1) as f64).powf(1.0 / d as f64).ceil() as usize).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = Vec::new();
    for s in 0..k.pow(d as u32) {
        let mut c = [0usize; 3];
        let mut rem = s;
        for a in 0..d {
            let cell = rem % k;
            rem /= k;
            let n = g.dims[a];
            let lo = cell * n / k;
            let hi = ((cell + 1) * n / k).max(lo + 1);
            c[a] = rng.gen_range(lo..hi);
        }
        picks.push(g.index(c));
    }
    let mut bucket = vec![0.0f64; scales.len()];
    let mut ws = Workspace::new(g.len());
    let mut pairs = 0u64;
    for &s in &picks {
        ws.run(oracle, &[(s, 0)], Limits::default());
        let ps = g.point(s);
        for &i in ws.settled() {
            let i = i as usize;
            let l = ps.dist(g.point(i));
            let Some(j) = scales.iter().position(|x| *x >= l - 1e-12 * x.abs().max(1.0)) else {
                continue;
            };
            let v = oracle.len_of(ws.dist(i).unwrap());
            if v > bucket[j] {
                bucket[j] = v;
            }
            pairs += 1;
        }
    }
    let mut phi = Vec::with_capacity(scales.len());
    let mut run = 0.0f64;
    for b in bucket {
        run = run.max(b);
        phi.push(run);
    }
    Ok(ModulusTable {
        scales: scales.to_vec(),
        phi,
        sources: picks.len(),
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::spec::{MetricSpec, ScalarField};

    #[test]
    fn euclidean_moduli_are_identity_within_anisotropy() {
        let o = LatticeOracle::build(MetricSpec::euclidean(2, 1.0), 1.0 / 16.0, 3, 1 << 20).unwrap();
        let scales = default_scales(1.0, 2, 1.0 / 16.0);
        let t = moduli(&o, &scales, 4, 0).unwrap();
        for (l, p) in t.scales.iter().zip(&t.phi) {
            assert!(*p <= l * (1.0 + o.tol_lat) + 1e-12, "phi({l}) = {p}");
            assert!(*p >= l - 1.0 / 16.0 - 1e-12 || *l > 2.0);
        }
        assert!((t.psi(0.5) - 0.5).abs() <= 1.0 / 16.0);
        assert!(t.phi.windows(2).all(|w| w[0] <= w[1]));
        assert!(moduli(&o, &[], 4, 0).is_err());
    }

    #[test]
    fn bounded_density_bounds_phi() {
        let spec = MetricSpec::conformal(2, 1.0, ScalarField::SinBump(2f64.ln()));
        let o = LatticeOracle::build(spec, 1.0 / 16.0, 3, 1 << 20).unwrap();
        let scales = default_scales(1.0, 2, 1.0 / 16.0);
        let t = moduli(&o, &scales, 4, 1).unwrap();
        for (l, p) in t.scales.iter().zip(&t.phi) {
            assert!(*p <= 2.0 * l * (1.0 + o.tol_lat) + 1e-12);
        }
    }
}
