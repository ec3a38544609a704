//! Empirical doubling constants, density bounds and the volume lower bound
//! of a windowed metric measure space.
//!
//! By default every statistic is taken over balls whose doubled ball lies in
//! the window, the window being the support of the measure. Boundary balls
//! can be switched on through the option structs.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::par;
use crate::rng::{derive_seed, stream, Domain};
use crate::space::{Coords, McBudget, SpaceInstance};

/// Knobs shared by the three diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagOptions {
    /// Keep balls that stick out of the window (masses are then truncated).
    pub include_boundary: bool,
    /// Monte Carlo budget for ball masses without a closed form.
    pub mass_samples: usize,
}

impl Default for DiagOptions {
    fn default() -> Self {
        DiagOptions {
            include_boundary: false,
            mass_samples: 8192,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorstCase {
    pub point: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoublingReport {
    pub beta_hat: f64,
    pub dimension_hat: f64,
    /// Number of `(x, r)` pairs that entered the maximum.
    pub samples: usize,
    pub skipped_zero_mass: usize,
    pub skipped_boundary: usize,
    pub radius_range: (f64, f64),
    pub worst_case: WorstCase,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityTrace {
    pub point_id: usize,
    pub point: Vec<f64>,
    /// `m(B_r(x)) / r^N` along the decreasing ladder.
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityReport {
    #[serde(rename = "N")]
    pub n: f64,
    pub a_hat: f64,
    pub b_hat: f64,
    pub r_ladder: Vec<f64>,
    pub traces: Vec<DensityTrace>,
}

/// One CSV row of a density trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub point_id: usize,
    pub r: f64,
    pub ratio: f64,
}

impl DensityReport {
    pub fn trace_rows(&self) -> Vec<TraceRow> {
        self.traces
            .iter()
            .flat_map(|t| {
                self.r_ladder
                    .iter()
                    .zip(&t.ratios)
                    .map(|(&r, &ratio)| TraceRow {
                        point_id: t.point_id,
                        r,
                        ratio,
                    })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolumeWitness {
    pub x0: Vec<f64>,
    pub r0: f64,
    pub x: Vec<f64>,
    pub r: f64,
    /// `m(B_r(x)) / m(B_r0(x0))`.
    pub lhs: f64,
    /// `beta^-2 (r / r0)^{log2 beta}`.
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolumeLowerReport {
    pub beta: f64,
    pub exponent: f64,
    pub n_trials: usize,
    pub violations: usize,
    /// Smallest `lhs / rhs - 1` over all tuples.
    pub min_slack: f64,
    /// Tuple attaining `min_slack`; a violation whenever `pass` is false.
    pub witness: Option<VolumeWitness>,
    pub radius_range: (f64, f64),
    pub pass: bool,
}

/// Smallest radius at which the finite Cantor construction still looks like
/// its limit; zero for other spaces.
pub fn radius_floor(space: &SpaceInstance) -> f64 {
    space.cantor().map_or(0.0, |c| c.min_gap() / 4.0)
}

/// Six log-spaced radii from an eighth of the narrowest window side down a
/// factor of 100, clipped at [`radius_floor`]. Decreasing.
pub fn default_radii(space: &SpaceInstance) -> Result<Vec<f64>> {
    let hi = space.window().min_width() / 8.0;
    let lo = (hi / 100.0).max(radius_floor(space));
    if lo >= hi {
        return Err(Error::Precondition(
            "Cantor gaps are too coarse for any admissible radius".into(),
        ));
    }
    let mut v = crate::estimator::log_ladder(lo, hi, 6);
    v.reverse();
    Ok(v)
}

fn check_radii(space: &SpaceInstance, radii: &[f64]) -> Result<Vec<f64>> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(invalid("radius ladder must be non-empty and positive"));
    }
    let floor = radius_floor(space);
    let hi = space.window().min_width();
    let kept: Vec<f64> = radii
        .iter()
        .copied()
        .filter(|&r| r >= floor && r <= hi)
        .collect();
    if kept.is_empty() {
        return Err(Error::Precondition(format!(
            "no radius in [{floor:e}, {hi}] left in the ladder"
        )));
    }
    Ok(kept)
}

fn mass(space: &SpaceInstance, x: &Coords, r: f64, seed: u64, opts: &DiagOptions) -> f64 {
    space
        .ball_measure_at(
            x,
            r,
            McBudget {
                samples: opts.mass_samples,
                seed,
            },
        )
        .value
}

fn draw_point(space: &SpaceInstance, rng: &mut crate::rng::StreamRng) -> Coords {
    space.draw_in_region(space.window(), rng)
}

fn vec_of(space: &SpaceInstance, x: &Coords) -> Vec<f64> {
    x[..space.topo_dim()].to_vec()
}

/// Empirical doubling constant: the largest `m(B_2r(x)) / m(B_r(x))` seen.
pub fn estimate_beta(
    space: &SpaceInstance,
    n_points: usize,
    r_ladder: &[f64],
    seed: u64,
) -> Result<DoublingReport> {
    estimate_beta_with(space, n_points, r_ladder, seed, &DiagOptions::default())
}

pub fn estimate_beta_with(
    space: &SpaceInstance,
    n_points: usize,
    r_ladder: &[f64],
    seed: u64,
    opts: &DiagOptions,
) -> Result<DoublingReport> {
    if n_points == 0 {
        return Err(invalid("estimate_beta needs at least one point"));
    }
    let radii = check_radii(space, r_ladder)?;
    // Point i always comes from stream i, so a larger budget only adds
    // candidates and the running maximum can only grow.
    let per_point = par::map_indexed(n_points, |i| {
        let mut rng = stream(seed, Domain::Doubling, i as u64);
        let x = draw_point(space, &mut rng);
        let mut best: Option<(f64, f64)> = None;
        let (mut used, mut zero, mut edge) = (0, 0, 0);
        for (j, &r) in radii.iter().enumerate() {
            if !opts.include_boundary && !space.ball_inside_window(&x, 2.0 * r) {
                edge += 1;
                continue;
            }
            let s = derive_seed(seed, (i * radii.len() + j) as u64);
            let inner = mass(space, &x, r, s, opts);
            if !(inner > 0.0) {
                zero += 1;
                continue;
            }
            let ratio = mass(space, &x, 2.0 * r, s ^ 1, opts) / inner;
            used += 1;
            if best.is_none_or(|(b, _)| ratio > b) {
                best = Some((ratio, r));
            }
        }
        (x, best, used, zero, edge)
    });
    let mut report = DoublingReport {
        beta_hat: f64::NAN,
        dimension_hat: f64::NAN,
        samples: 0,
        skipped_zero_mass: 0,
        skipped_boundary: 0,
        radius_range: (
            radii.iter().copied().fold(f64::INFINITY, f64::min),
            radii.iter().copied().fold(0.0, f64::max),
        ),
        worst_case: WorstCase {
            point: Vec::new(),
            radius: f64::NAN,
        },
    };
    let mut beta = f64::NEG_INFINITY;
    for (x, best, used, zero, edge) in per_point {
        report.samples += used;
        report.skipped_zero_mass += zero;
        report.skipped_boundary += edge;
        if let Some((ratio, r)) = best {
            if ratio > beta {
                beta = ratio;
                report.worst_case = WorstCase {
                    point: vec_of(space, &x),
                    radius: r,
                };
            }
        }
    }
    if report.samples == 0 {
        return Err(Error::Precondition(
            "no ball pair fitted inside the window; shrink the radii".into(),
        ));
    }
    report.beta_hat = beta.max(1.0);
    report.dimension_hat = report.beta_hat.ln() / 2f64.ln();
    Ok(report)
}

/// Density traces `r -> m(B_r(x)) / r^N` and their final-rung extremes.
pub fn estimate_density_bounds(
    space: &SpaceInstance,
    n: f64,
    n_points: usize,
    r_ladder: &[f64],
    seed: u64,
) -> Result<DensityReport> {
    estimate_density_bounds_with(space, n, n_points, r_ladder, seed, &DiagOptions::default())
}

pub fn estimate_density_bounds_with(
    space: &SpaceInstance,
    n: f64,
    n_points: usize,
    r_ladder: &[f64],
    seed: u64,
    opts: &DiagOptions,
) -> Result<DensityReport> {
    if !(n > 0.0) {
        return Err(invalid("density exponent N must be positive"));
    }
    if n_points == 0 {
        return Err(invalid("estimate_density_bounds needs at least one point"));
    }
    let mut radii = check_radii(space, r_ladder)?;
    radii.sort_by(|a, b| b.total_cmp(a));
    radii.dedup();
    let r_max = radii[0];
    let traces = par::map_indexed(n_points, |i| -> Result<DensityTrace> {
        let mut rng = stream(seed, Domain::Density, i as u64);
        let mut x = draw_point(space, &mut rng);
        let mut tries = 0;
        while !opts.include_boundary && !space.ball_inside_window(&x, r_max) {
            tries += 1;
            if tries > 10_000 {
                return Err(Error::Precondition(
                    "largest radius leaves no interior points".into(),
                ));
            }
            x = draw_point(space, &mut rng);
        }
        let ratios = radii
            .iter()
            .enumerate()
            .map(|(j, &r)| {
                mass(
                    space,
                    &x,
                    r,
                    derive_seed(seed, (i * radii.len() + j) as u64),
                    opts,
                ) / r.powf(n)
            })
            .collect();
        Ok(DensityTrace {
            point_id: i,
            point: vec_of(space, &x),
            ratios,
        })
    });
    let traces = traces.into_iter().collect::<Result<Vec<_>>>()?;
    let last = |t: &DensityTrace| *t.ratios.last().expect("ladder is non-empty");
    let a_hat = traces.iter().map(last).fold(f64::INFINITY, f64::min);
    let b_hat = traces.iter().map(last).fold(0.0, f64::max);
    Ok(DensityReport {
        n,
        a_hat,
        b_hat,
        r_ladder: radii,
        traces,
    })
}

/// Test `m(B_r(x)) / m(B_r0(x0)) >= beta^-2 (r / r0)^{log2 beta}` on random
/// tuples with `x in B_r0(x0)` and `r < r0`. Balls may be truncated by the
/// window, which is the support of the measure.
pub fn check_volume_lower(
    space: &SpaceInstance,
    beta: f64,
    n_trials: usize,
    seed: u64,
) -> Result<VolumeLowerReport> {
    check_volume_lower_with(
        space,
        beta,
        n_trials,
        seed,
        volume_radius_range(space),
        &DiagOptions::default(),
    )
}

/// Default `(r_lo, r_hi)` for the volume check: a quarter of the narrowest
/// window side down three decades, clipped at [`radius_floor`].
pub fn volume_radius_range(space: &SpaceInstance) -> (f64, f64) {
    let hi = space.window().min_width() / 4.0;
    ((hi * 1e-3).max(radius_floor(space)), hi)
}

pub fn check_volume_lower_with(
    space: &SpaceInstance,
    beta: f64,
    n_trials: usize,
    seed: u64,
    (r_lo, r_hi): (f64, f64),
    opts: &DiagOptions,
) -> Result<VolumeLowerReport> {
    if !(beta >= 1.0) || n_trials == 0 {
        return Err(invalid(
            "check_volume_lower needs beta >= 1 and n_trials >= 1",
        ));
    }
    if !(r_lo > 0.0 && r_lo < r_hi) {
        return Err(invalid("radius range must satisfy 0 < r_lo < r_hi"));
    }
    let exponent = beta.log2();
    let (l_lo, l_hi) = (r_lo.ln(), r_hi.ln());
    let tuples = par::map_indexed(n_trials, |i| -> Result<VolumeWitness> {
        use rand::Rng;
        let mut rng = stream(seed, Domain::VolumeLower, i as u64);
        let x0 = draw_point(space, &mut rng);
        let r0 = (l_lo + rng.random::<f64>() * (l_hi - l_lo)).exp();
        let x = space
            .draw_local(&x0, r0, &mut rng)
            .ok_or_else(|| Error::Precondition("ball around a support point has no mass".into()))?;
        let r = (l_lo + rng.random::<f64>() * (r0.ln() - l_lo)).exp();
        let s = derive_seed(seed, i as u64);
        let lhs = mass(space, &x, r, s, opts) / mass(space, &x0, r0, s ^ 1, opts);
        let rhs = (r / r0).powf(exponent) / (beta * beta);
        Ok(VolumeWitness {
            x0: vec_of(space, &x0),
            r0,
            x: vec_of(space, &x),
            r,
            lhs,
            rhs,
        })
    });
    let mut violations = 0;
    let mut worst: Option<(f64, VolumeWitness)> = None;
    for t in tuples {
        let t = t?;
        let slack = t.lhs / t.rhs - 1.0;
        if slack < 0.0 {
            violations += 1;
        }
        if worst.as_ref().is_none_or(|(s, _)| slack < *s) {
            worst = Some((slack, t));
        }
    }
    let (min_slack, witness) = worst.expect("n_trials >= 1");
    Ok(VolumeLowerReport {
        beta,
        exponent,
        n_trials,
        violations,
        min_slack,
        witness: Some(witness),
        radius_range: (r_lo, r_hi),
        pass: violations == 0,
    })
}

#[cfg(test)]
mod tests;
