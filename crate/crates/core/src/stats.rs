//! Small summary statistics for Monte-Carlo reporting.

use serde::Serialize;

/// Wilson score interval for `k` successes in `n` trials at `z` standard deviations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Wilson {
    pub center: f64,
    pub half_width: f64,
}

impl Wilson {
    pub fn new(k: usize, n: usize, z: f64) -> Self {
        assert!(n > 0 && k <= n);
        let n = n as f64;
        let p = k as f64 / n;
        let z2 = z * z;
        let denom = 1.0 + z2 / n;
        let center = (p + z2 / (2.0 * n)) / denom;
        let half_width = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
        Wilson { center, half_width }
    }

    pub fn lower(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.center + self.half_width
    }
}

/// Linear-interpolation quantile (type 7) of an unsorted sample.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty() && (0.0..=1.0).contains(&q));
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}
