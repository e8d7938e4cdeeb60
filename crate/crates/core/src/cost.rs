//! Fixed-point path costs. Lattice distances are sums of integers, so the
//! metric axioms hold exactly on oracle values.

use std::ops::Add;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Cost(pub u64);

impl Cost {
    pub const ZERO: Cost = Cost(0);
    pub const INF: Cost = Cost(u64::MAX);

    pub fn is_finite(self) -> bool {
        self.0 != u64::MAX
    }
}

impl Add for Cost {
    type Output = Cost;
    fn add(self, o: Cost) -> Cost {
        Cost(self.0.saturating_add(o.0))
    }
}

/// Power-of-two scale between lengths and integer costs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Scale {
    pub shift: u32,
}

impl Scale {
    /// Largest power of two such that any length up to `bound` maps below 2^62.
    pub fn for_bound(bound: f64) -> Scale {
        let bound = bound.max(1e-300);
        let mut shift = 0u32;
        while shift < 1000 && bound * 2f64.powi(shift as i32 + 1) <= (1u64 << 62) as f64 {
            shift += 1;
        }
        Scale { shift }
    }

    pub fn factor(self) -> f64 {
        2f64.powi(self.shift as i32)
    }

    pub fn to_cost(self, len: f64) -> Cost {
        let v = (len * self.factor()).round();
        Cost(v.max(1.0) as u64)
    }

    pub fn to_len(self, c: Cost) -> f64 {
        if !c.is_finite() {
            return f64::INFINITY;
        }
        c.0 as f64 / self.factor()
    }
}
