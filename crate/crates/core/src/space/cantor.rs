//! Finite-depth fat Cantor sets on an interval.

use crate::error::{invalid, Result};

/// Union of the intervals surviving `depth` rounds of middle removal.
///
/// Round `k` removes the open middle fraction `ratios[k-1]` of every
/// interval. With ratios `(1/4, 1/16, ...)` the limit set has positive length.
#[derive(Debug, Clone, PartialEq)]
pub struct CantorSet {
    intervals: Vec<(f64, f64)>,
    /// `cumulative[i]` is the total length of `intervals[..i]`.
    cumulative: Vec<f64>,
    ratios: Vec<f64>,
    min_gap: f64,
}

pub const MAX_DEPTH: usize = 22;

impl CantorSet {
    pub fn new(lo: f64, hi: f64, ratios: &[f64]) -> Result<Self> {
        if ratios.is_empty() {
            return Err(invalid("fat Cantor construction depth must be at least 1"));
        }
        if ratios.len() > MAX_DEPTH {
            return Err(invalid(format!(
                "fat Cantor depth is capped at {MAX_DEPTH}"
            )));
        }
        if let Some(r) = ratios.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
            return Err(invalid(format!("removal ratio {r} outside (0, 1)")));
        }
        let mut intervals = vec![(lo, hi)];
        let mut min_gap = f64::INFINITY;
        for &r in ratios {
            let mut next = Vec::with_capacity(intervals.len() * 2);
            for &(a, b) in &intervals {
                let len = b - a;
                let keep = 0.5 * len * (1.0 - r);
                next.push((a, a + keep));
                next.push((b - keep, b));
                min_gap = min_gap.min(len * r);
            }
            intervals = next;
        }
        let mut cumulative = Vec::with_capacity(intervals.len() + 1);
        let mut acc = 0.0;
        cumulative.push(0.0);
        for &(a, b) in &intervals {
            acc += b - a;
            cumulative.push(acc);
        }
        if acc <= 0.0 {
            return Err(invalid("fat Cantor set has no surviving length"));
        }
        Ok(CantorSet {
            intervals,
            cumulative,
            ratios: ratios.to_vec(),
            min_gap,
        })
    }

    /// Ratios `base^k` for `k = 1..=depth`.
    pub fn geometric_ratios(base: f64, depth: usize) -> Vec<f64> {
        (1..=depth).map(|k| base.powi(k as i32)).collect()
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }

    pub fn depth(&self) -> usize {
        self.ratios.len()
    }

    pub fn total_length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Smallest gap removed at the final construction round.
    pub fn min_gap(&self) -> f64 {
        self.min_gap
    }

    /// Index of the last interval whose left end is `<= x`.
    fn locate(&self, x: f64) -> Option<usize> {
        let idx = self.intervals.partition_point(|&(a, _)| a <= x);
        idx.checked_sub(1)
    }

    pub fn contains(&self, x: f64) -> bool {
        match self.locate(x) {
            Some(i) => x <= self.intervals[i].1,
            None => false,
        }
    }

    /// Surviving length in `(-inf, x]`.
    pub fn mass_below(&self, x: f64) -> f64 {
        match self.locate(x) {
            None => 0.0,
            Some(i) => {
                let (a, b) = self.intervals[i];
                self.cumulative[i] + (x.min(b) - a)
            }
        }
    }

    /// Surviving length in `[a, b]`.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        (self.mass_below(b) - self.mass_below(a)).max(0.0)
    }

    /// Inverse of `mass_below`: the point below which `m` units of length lie.
    pub fn quantile(&self, m: f64) -> f64 {
        let m = m.clamp(0.0, self.total_length());
        let i = self.cumulative.partition_point(|&c| c <= m);
        let i = i.saturating_sub(1).min(self.intervals.len() - 1);
        let (a, b) = self.intervals[i];
        (a + (m - self.cumulative[i])).min(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_one_removes_middle_quarter() {
        let c = CantorSet::new(0.0, 1.0, &CantorSet::geometric_ratios(0.25, 1)).unwrap();
        assert_eq!(c.intervals(), &[(0.0, 0.375), (0.625, 1.0)]);
        assert!((c.total_length() - 0.75).abs() < 1e-15);
        assert!(c.contains(0.3) && !c.contains(0.5) && c.contains(0.625));
    }

    #[test]
    fn quantile_inverts_mass_below() {
        let c = CantorSet::new(0.0, 1.0, &CantorSet::geometric_ratios(0.25, 6)).unwrap();
        for k in 0..=50 {
            let m = c.total_length() * k as f64 / 50.0;
            let x = c.quantile(m);
            assert!(c.contains(x));
            assert!((c.mass_below(x) - m).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_schedules() {
        assert!(CantorSet::new(0.0, 1.0, &[]).is_err());
        assert!(CantorSet::new(0.0, 1.0, &[1.5]).is_err());
    }
}
