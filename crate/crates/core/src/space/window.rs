use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Axis-aligned box given by per-coordinate bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Window {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        let w = Window { min, max };
        w.validate()?;
        Ok(w)
    }

    pub fn unit(dim: usize) -> Self {
        Window {
            min: vec![0.0; dim],
            max: vec![1.0; dim],
        }
    }

    /// `[-h, h]` in every coordinate.
    pub fn centered(half_widths: &[f64]) -> Self {
        Window {
            min: half_widths.iter().map(|h| -h).collect(),
            max: half_widths.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min.len() != self.max.len() || self.min.is_empty() {
            return Err(invalid(
                "window min/max must be non-empty and of equal length",
            ));
        }
        for (i, (lo, hi)) in self.min.iter().zip(&self.max).enumerate() {
            if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
                return Err(invalid(format!(
                    "window coordinate {i} has non-positive width ({lo}, {hi})"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.max[i] - self.min[i]
    }

    pub fn min_width(&self) -> f64 {
        (0..self.dim())
            .map(|i| self.width(i))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i)).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.min.iter().zip(&self.max))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn contains_box(&self, other: &Window) -> bool {
        (0..self.dim()).all(|i| other.min[i] >= self.min[i] && other.max[i] <= self.max[i])
    }

    pub fn intersect(&self, other: &Window) -> Option<Window> {
        let min: Vec<f64> = self
            .min
            .iter()
            .zip(&other.min)
            .map(|(a, b)| a.max(*b))
            .collect();
        let max: Vec<f64> = self
            .max
            .iter()
            .zip(&other.max)
            .map(|(a, b)| a.min(*b))
            .collect();
        if min.iter().zip(&max).all(|(lo, hi)| hi > lo) {
            Some(Window { min, max })
        } else {
            None
        }
    }

    /// Grow coordinate `i` by `pad[i]` on both sides.
    pub fn expand(&self, pad: &[f64]) -> Window {
        Window {
            min: self.min.iter().zip(pad).map(|(v, p)| v - p).collect(),
            max: self.max.iter().zip(pad).map(|(v, p)| v + p).collect(),
        }
    }

    /// Smallest coordinate gap between `inner` and the boundary of `self`.
    /// Negative when `inner` sticks out.
    pub fn margin_of(&self, inner: &Window) -> f64 {
        (0..self.dim())
            .map(|i| (inner.min[i] - self.min[i]).min(self.max[i] - inner.max[i]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Point of the box at unit-cube coordinates `u`.
    pub fn lerp(&self, u: &[f64], out: &mut [f64]) {
        for i in 0..self.dim() {
            out[i] = self.min[i] + u[i] * self.width(i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_boxes() {
        assert!(Window::new(vec![0.0], vec![0.0]).is_err());
        assert!(Window::new(vec![0.0, 0.0], vec![1.0]).is_err());
        assert!(Window::new(vec![], vec![]).is_err());
        assert!(Window::new(vec![0.0, -1.0], vec![1.0, 1.0]).is_ok());
    }

    #[test]
    fn margin_and_intersection() {
        let w = Window::unit(2);
        let inner = Window::new(vec![0.2, 0.3], vec![0.8, 0.9]).unwrap();
        assert!((w.margin_of(&inner) - 0.1).abs() < 1e-15);
        let out = Window::new(vec![0.5, 0.5], vec![2.0, 2.0]).unwrap();
        let i = w.intersect(&out).unwrap();
        assert_eq!(i.max, vec![1.0, 1.0]);
        assert!(w
            .intersect(&Window::new(vec![2.0, 2.0], vec![3.0, 3.0]).unwrap())
            .is_none());
    }
}
