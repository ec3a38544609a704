//! Estimators for `(m x m)(E_{lambda,u})`, the rescaled curve
//! `lambda^p M(lambda)` and the reference quantities it converges to.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lipcalc::{self, Bound, LipConfig, TestFunction};
use crate::par::{self, chunk_layout, CHUNK};
use crate::rng::{stream, Domain};
use crate::space::{Coords, Point, SpaceInstance, Window, MAX_DIM};

/// Outer points per counter-based stream in the two-stage estimators.
const OUTER_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorChoice {
    #[default]
    Auto,
    Direct,
    Localized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Direct,
    Localized,
}

impl EstimatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::Direct => "direct",
            EstimatorKind::Localized => "localized",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BVYConfig {
    pub p: f64,
    /// Exponent in the set; `None` means the space's own dimension.
    #[serde(
        rename = "N_bar",
        alias = "n_bar",
        skip_serializing_if = "Option::is_none"
    )]
    pub n_bar: Option<f64>,
    /// Empty means "pick a ladder for this space and function".
    pub lambda_ladder: Vec<f64>,
    pub n_outer: usize,
    pub n_inner: usize,
    pub n_pairs: usize,
    /// Defaults to 5% of the global Lipschitz constant.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_loc: Option<f64>,
    pub seed: u64,
    pub estimator: EstimatorChoice,
}

impl Default for BVYConfig {
    fn default() -> Self {
        BVYConfig {
            p: 2.0,
            n_bar: None,
            lambda_ladder: Vec::new(),
            n_outer: 20_000,
            n_inner: 64,
            n_pairs: 1_000_000,
            epsilon_loc: None,
            seed: 0,
            estimator: EstimatorChoice::Auto,
        }
    }
}

impl BVYConfig {
    pub fn n_bar_for(&self, space: &SpaceInstance) -> f64 {
        self.n_bar.unwrap_or_else(|| space.hom_dim())
    }

    fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0) || !self.p.is_finite() {
            return Err(invalid(format!("p must be >= 1, got {}", self.p)));
        }
        if let Some(nb) = self.n_bar {
            if !(nb > 0.0) || !nb.is_finite() {
                return Err(invalid("N_bar must be positive"));
            }
        }
        if self
            .lambda_ladder
            .iter()
            .any(|l| !(*l > 0.0) || !l.is_finite())
            || self.lambda_ladder.windows(2).any(|w| !(w[1] > w[0]))
        {
            return Err(invalid(
                "lambda_ladder must be positive and strictly increasing",
            ));
        }
        if self.n_outer == 0 || self.n_inner == 0 || self.n_pairs == 0 {
            return Err(invalid("sample counts must be positive"));
        }
        Ok(())
    }
}

/// A Monte Carlo value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
    pub seed: u64,
}

impl MCEstimate {
    pub fn zero(n: usize, seed: u64) -> Self {
        MCEstimate {
            value: 0.0,
            stderr: 0.0,
            n,
            seed,
        }
    }

    /// Mean and standard error of `scale * g_i` from running sums.
    fn from_sums(scale: f64, sum: f64, sum_sq: f64, n: usize, seed: u64) -> Self {
        let nf = n as f64;
        let mean = sum / nf;
        let var = if n > 1 {
            ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0)
        } else {
            0.0
        };
        MCEstimate {
            value: scale * mean,
            stderr: scale.abs() * (var / nf).sqrt(),
            n,
            seed,
        }
    }
}

/// `d^a` with fast paths for integer and half-integer exponents.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Power {
    Int(i32),
    Half(i32),
    Real(f64),
}

impl Power {
    pub(crate) fn new(a: f64) -> Self {
        let twice = 2.0 * a;
        if a.fract() == 0.0 && a.abs() < 64.0 {
            Power::Int(a as i32)
        } else if twice.fract() == 0.0 && a.abs() < 64.0 {
            Power::Half((a - 0.5) as i32)
        } else {
            Power::Real(a)
        }
    }

    #[inline]
    pub(crate) fn apply(self, d: f64) -> f64 {
        match self {
            Power::Int(k) => d.powi(k),
            Power::Half(k) => d.powi(k) * d.sqrt(),
            Power::Real(a) => d.powf(a),
        }
    }
}

/// Exponent `N_bar / p + 1` of the distance in `E_{lambda,u}`.
pub fn set_exponent(p: f64, n_bar: f64) -> f64 {
    n_bar / p + 1.0
}

/// Membership of `(x, y)` in `E_{lambda,u}`, evaluated on the unscaled core
/// with threshold `lambda / |scale|`.
#[inline]
fn in_e(b: &Bound, lambda_core: f64, pow: Power, x: &Coords, y: &Coords, ux: f64) -> bool {
    let d = b.space().metric(x, y);
    d > 0.0 && (ux - b.core(y)).abs() >= lambda_core * pow.apply(d)
}

/// `|u(x) - u(y)| >= lambda d(x, y)^{N_bar/p + 1}`.
pub fn pair_in_e(
    space: &SpaceInstance,
    u: &TestFunction,
    p: f64,
    n_bar: f64,
    lambda: f64,
    x: &Point,
    y: &Point,
) -> Result<bool> {
    if x.tag() != space.tag() || y.tag() != space.tag() {
        return Err(Error::Domain("point belongs to a different space".into()));
    }
    if x == y {
        return Err(invalid("pair_in_e needs x != y"));
    }
    let b = u.bind(space)?;
    let pow = Power::new(set_exponent(p, n_bar));
    Ok(in_e(
        &b,
        lambda / b.scale().abs(),
        pow,
        x.raw(),
        y.raw(),
        b.core(x.raw()),
    ))
}

/// Direct estimator on every rung at once. The same `n_pairs` window pairs
/// serve every rung, so the estimates are exactly nonincreasing in lambda.
pub fn direct_ladder(
    b: &Bound,
    p: f64,
    n_bar: f64,
    lambdas: &[f64],
    n_pairs: usize,
    seed: u64,
) -> Vec<MCEstimate> {
    let space = b.space();
    let window = space.window().clone();
    let pow = Power::new(set_exponent(p, n_bar));
    let lam: Vec<f64> = lambdas.iter().map(|l| l / b.scale().abs()).collect();
    let layout = chunk_layout(n_pairs, CHUNK);
    let counts = par::map_indexed(layout.len(), |k| {
        let (_, _, len) = layout[k];
        let mut rng = stream(seed, Domain::DirectPairs, k as u64);
        let mut c = vec![0u64; lam.len()];
        for _ in 0..len {
            let x = space.draw_in_region(&window, &mut rng);
            let y = space.draw_in_region(&window, &mut rng);
            let d = space.metric(&x, &y);
            if d == 0.0 {
                continue;
            }
            let du = (b.core(&x) - b.core(&y)).abs();
            if du == 0.0 {
                continue;
            }
            let t = pow.apply(d);
            for (ci, l) in c.iter_mut().zip(&lam) {
                if du >= l * t {
                    *ci += 1;
                }
            }
        }
        c
    });
    let mw = space.window_mass().value;
    let n = n_pairs as f64;
    (0..lam.len())
        .map(|r| {
            let hits: u64 = counts.iter().map(|c| c[r]).sum();
            let frac = hits as f64 / n;
            MCEstimate {
                value: mw * mw * frac,
                stderr: mw * mw * (frac * (1.0 - frac) / n).sqrt(),
                n: n_pairs,
                seed,
            }
        })
        .collect()
}

/// `m(W)^2` times the fraction of i.i.d. window pairs that land in `E_{lambda,u}`.
pub fn pair_measure_direct(
    space: &SpaceInstance,
    u: &TestFunction,
    cfg: &BVYConfig,
    lambda: f64,
) -> Result<MCEstimate> {
    cfg.validate()?;
    let b = u.bind(space)?;
    Ok(direct_ladder(
        &b,
        cfg.p,
        cfg.n_bar_for(space),
        &[lambda],
        cfg.n_pairs,
        cfg.seed,
    )[0])
}

/// Radius beyond which no pair can belong to `E_{lambda,u}`.
pub fn localization_radius(lip: f64, eps: f64, lambda: f64, p: f64, n_bar: f64) -> f64 {
    ((lip + eps) / lambda).powf(p / n_bar)
}

/// Largest admissible localization radius: the gap between the support box
/// and the window boundary, or a quarter of the narrowest window side when
/// the support touches the boundary.
pub fn effective_margin(space: &SpaceInstance, support: &Window) -> f64 {
    let m = space.window().margin_of(support);
    if m > 0.0 {
        m
    } else {
        0.25 * space.window().min_width()
    }
}

struct Localizer<'b, 'a> {
    b: &'b Bound<'a>,
    lip: f64,
    eps: f64,
    p: f64,
    n_bar: f64,
    margin: f64,
}

impl<'b, 'a> Localizer<'b, 'a> {
    fn new(b: &'b Bound<'a>, cfg: &BVYConfig) -> Result<Self> {
        let space = b.space();
        if !space.supports_ball_sampling() {
            return Err(Error::Unsupported {
                operation: "pair_measure_localized",
                kind: space.kind(),
            });
        }
        let lip = lipcalc::global_lip_bound(b, cfg.seed);
        Ok(Localizer {
            b,
            lip,
            eps: cfg.epsilon_loc.unwrap_or(0.05 * lip),
            p: cfg.p,
            n_bar: cfg.n_bar_for(space),
            margin: effective_margin(space, b.support()),
        })
    }

    fn radius(&self, lambda: f64) -> f64 {
        localization_radius(self.lip, self.eps, lambda, self.p, self.n_bar)
    }

    fn check(&self, lambda: f64) -> Result<f64> {
        let r = self.radius(lambda);
        if !(r < self.margin) {
            return Err(Error::Precondition(format!(
                "localization radius {r} at lambda = {lambda} is not below the margin {}",
                self.margin
            )));
        }
        Ok(r)
    }

    fn estimate(
        &self,
        lambda: f64,
        n_outer: usize,
        n_inner: usize,
        seed: u64,
    ) -> Result<MCEstimate> {
        let r = self.check(lambda)?;
        let b = self.b;
        if b.is_zero() || self.lip == 0.0 {
            return Ok(MCEstimate::zero(n_outer, seed));
        }
        let space = b.space();
        let dim = space.topo_dim();
        let window = space.window();
        let region = space.neighbourhood(b.support(), r);
        let region_mass = space.region_mass(&region);
        let vol = space
            .ball_volume(r)
            .expect("ball sampling implies a reference volume");
        let lam = lambda / b.scale().abs();
        let pow = Power::new(set_exponent(self.p, self.n_bar));
        let weighted = space.density_bounds() != (1.0, 1.0);
        let layout = chunk_layout(n_outer, OUTER_CHUNK);
        let sums = par::map_indexed(layout.len(), |k| {
            let (_, _, len) = layout[k];
            let mut rng = stream(seed, Domain::LocalizedOuter, k as u64);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..len {
                let x = space.draw_in_region(&region, &mut rng);
                let ux = b.core(&x);
                let mut acc = 0.0;
                for _ in 0..n_inner {
                    let w = space.draw_unit_ball(&mut rng);
                    let y = space.place_in_ball(&x, r, &w);
                    if !window.contains(&y[..dim]) {
                        continue;
                    }
                    if in_e(b, lam, pow, &x, &y, ux) {
                        acc += if weighted { space.density(&y) } else { 1.0 };
                    }
                }
                let g = vol * acc / n_inner as f64;
                s += g;
                s2 += g * g;
            }
            (s, s2)
        });
        let (s, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
        Ok(MCEstimate::from_sums(region_mass, s, s2, n_outer, seed))
    }
}

/// Two-stage estimator: outer points from the `R`-neighbourhood of the
/// support, inner points uniform in the full ball `B_R(x)` weighted by
/// `vol(B_R) * density * 1_W`.
pub fn pair_measure_localized(
    space: &SpaceInstance,
    u: &TestFunction,
    cfg: &BVYConfig,
    lambda: f64,
) -> Result<MCEstimate> {
    cfg.validate()?;
    let b = u.bind(space)?;
    Localizer::new(&b, cfg)?.estimate(lambda, cfg.n_outer, cfg.n_inner, cfg.seed)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub lambda: f64,
    pub estimate: MCEstimate,
    pub rescaled: f64,
    pub estimator: EstimatorKind,
    pub n_outer: usize,
    pub n_inner: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RescaledCurve {
    pub p: f64,
    pub n_bar: f64,
    pub rows: Vec<CurveRow>,
}

/// Flat CSV record of one curve row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub lambda: f64,
    #[serde(rename = "M_hat")]
    pub m_hat: f64,
    #[serde(rename = "M_stderr")]
    pub m_stderr: f64,
    pub rescaled: f64,
    pub estimator: EstimatorKind,
    pub n_outer: usize,
    pub n_inner: usize,
    pub seed: u64,
}

impl RescaledCurve {
    pub fn records(&self) -> Vec<CurveRecord> {
        self.rows
            .iter()
            .map(|r| CurveRecord {
                lambda: r.lambda,
                m_hat: r.estimate.value,
                m_stderr: r.estimate.stderr,
                rescaled: r.rescaled,
                estimator: r.estimator,
                n_outer: r.n_outer,
                n_inner: r.n_inner,
                seed: r.estimate.seed,
            })
            .collect()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.lambda).collect()
    }

    pub fn rescaled(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.rescaled).collect()
    }
}

/// `k` log-spaced values from `lo` to `hi` inclusive.
pub fn log_ladder(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..k)
        .map(|i| {
            if i == k - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (k - 1) as f64).exp()
            }
        })
        .collect()
}

/// Six rungs starting where the localization radius is half the margin and
/// ending where it has shrunk thirtyfold.
pub fn default_ladder(
    space: &SpaceInstance,
    u: &TestFunction,
    cfg: &BVYConfig,
) -> Result<Vec<f64>> {
    let b = u.bind(space)?;
    let lip = lipcalc::global_lip_bound(&b, cfg.seed).max(f64::MIN_POSITIVE);
    let eps = cfg.epsilon_loc.unwrap_or(0.05 * lip);
    let n_bar = cfg.n_bar_for(space);
    let mu = effective_margin(space, b.support());
    let lo = (lip + eps) / (0.5 * mu).powf(n_bar / cfg.p);
    let hi = lo * 30f64.powf(n_bar / cfg.p);
    Ok(log_ladder(lo, hi, 6))
}

/// One row per rung, using the localized estimator whenever the space can
/// sample balls and the first rung satisfies the margin condition.
pub fn rescaled_curve(
    space: &SpaceInstance,
    u: &TestFunction,
    cfg: &BVYConfig,
) -> Result<RescaledCurve> {
    cfg.validate()?;
    let b = u.bind(space)?;
    let ladder = if cfg.lambda_ladder.is_empty() {
        default_ladder(space, u, cfg)?
    } else {
        cfg.lambda_ladder.clone()
    };
    let n_bar = cfg.n_bar_for(space);
    let kind = match cfg.estimator {
        EstimatorChoice::Direct => EstimatorKind::Direct,
        EstimatorChoice::Localized => EstimatorKind::Localized,
        EstimatorChoice::Auto => match Localizer::new(&b, cfg) {
            Ok(loc) if loc.check(ladder[0]).is_ok() => EstimatorKind::Localized,
            _ => EstimatorKind::Direct,
        },
    };
    let estimates: Vec<MCEstimate> = match kind {
        EstimatorKind::Direct => direct_ladder(&b, cfg.p, n_bar, &ladder, cfg.n_pairs, cfg.seed),
        EstimatorKind::Localized => {
            let loc = Localizer::new(&b, cfg)?;
            ladder
                .iter()
                .map(|l| loc.estimate(*l, cfg.n_outer, cfg.n_inner, cfg.seed))
                .collect::<Result<_>>()?
        }
    };
    let (n_outer, n_inner) = match kind {
        EstimatorKind::Direct => (cfg.n_pairs, 1),
        EstimatorKind::Localized => (cfg.n_outer, cfg.n_inner),
    };
    let rows = ladder
        .iter()
        .zip(estimates)
        .map(|(l, e)| CurveRow {
            lambda: *l,
            rescaled: l.powf(cfg.p) * e.value,
            estimate: e,
            estimator: kind,
            n_outer,
            n_inner,
        })
        .collect();
    Ok(RescaledCurve {
        p: cfg.p,
        n_bar,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    PlateauMedian,
    LoglogLs,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitFit {
    /// Median of the rescaled values on the top third of the ladder.
    pub limit: f64,
    pub limit_method: FitMethod,
    pub plateau_rungs: usize,
    /// Least-squares slope of `log(lambda^p M)` against `log lambda`;
    /// `None` when some rescaled value is not positive.
    pub slope: Option<f64>,
    pub slope_stderr: Option<f64>,
    pub slope_method: FitMethod,
    pub residuals: Vec<f64>,
    pub diverges_to_zero: bool,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn limit_fit(curve: &RescaledCurve) -> Result<LimitFit> {
    let k = curve.rows.len();
    if k < 3 {
        return Err(invalid("limit_fit needs at least three rungs"));
    }
    let top = k.div_ceil(3);
    let mut plateau: Vec<f64> = curve.rows[k - top..].iter().map(|r| r.rescaled).collect();
    let limit = median(&mut plateau);
    let positive = curve.rows.iter().all(|r| r.rescaled > 0.0);
    let (slope, slope_stderr, residuals) = if positive {
        let xs: Vec<f64> = curve.rows.iter().map(|r| r.lambda.ln()).collect();
        let ys: Vec<f64> = curve.rows.iter().map(|r| r.rescaled.ln()).collect();
        let n = k as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let slope = sxy / sxx;
        let icpt = my - slope * mx;
        let res: Vec<f64> = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| y - icpt - slope * x)
            .collect();
        let ssr: f64 = res.iter().map(|r| r * r).sum();
        let se = (ssr / (n - 2.0) / sxx).sqrt();
        (Some(slope), Some(se), res)
    } else {
        (None, None, Vec::new())
    };
    Ok(LimitFit {
        limit,
        limit_method: FitMethod::PlateauMedian,
        plateau_rungs: top,
        slope,
        slope_stderr,
        slope_method: FitMethod::LoglogLs,
        residuals,
        diverges_to_zero: !positive,
    })
}

/// `k_{p,N} = int_{S^{N-1}} |e . w|^p dw = 2 pi^{(N-1)/2} G((p+1)/2) / G((N+p)/2)`.
pub fn k_const(p: f64, n: u32) -> Result<f64> {
    if !(p >= 1.0) || n == 0 {
        return Err(invalid("k_const needs p >= 1 and N >= 1"));
    }
    if n == 1 {
        return Ok(2.0);
    }
    let nf = n as f64;
    Ok(
        2.0 * std::f64::consts::PI.powf((nf - 1.0) / 2.0) * libm::tgamma((p + 1.0) / 2.0)
            / libm::tgamma((nf + p) / 2.0),
    )
}

/// The two gradient integrals of the sandwich bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradNorm {
    /// `int Lip(u)^p dm`.
    pub lip_p: MCEstimate,
    /// `int lip(u)^{N+p} / Lip(u)^N dm`, with `0/0 = 0`.
    pub lower: MCEstimate,
    pub analytic: bool,
}

/// MC average over the support of `Lip(u)^p` and `lip^{N+p}/Lip^N`, times
/// the support mass. Outside the support box both integrands vanish.
pub fn grad_norm(
    space: &SpaceInstance,
    u: &TestFunction,
    p: f64,
    n_outer: usize,
    seed: u64,
) -> Result<GradNorm> {
    let b = u.bind(space)?;
    let Some(region) = space.window().intersect(b.support()) else {
        return Ok(GradNorm {
            lip_p: MCEstimate::zero(n_outer, seed),
            lower: MCEstimate::zero(n_outer, seed),
            analytic: true,
        });
    };
    let mass = space.region_mass(&region);
    let n_dim = space.hom_dim();
    let lip_cfg = LipConfig {
        seed,
        ..LipConfig::default()
    };
    let analytic = b.formula().is_smooth();
    let chunk = if analytic { CHUNK } else { 16 };
    let layout = chunk_layout(n_outer, chunk);
    let sums = par::map_indexed(layout.len(), |k| -> Result<[f64; 4]> {
        let (_, _, len) = layout[k];
        let mut rng = stream(seed, Domain::GradNorm, k as u64);
        let mut acc = [0.0; 4];
        for _ in 0..len {
            let x = space.draw_in_region(&region, &mut rng);
            let (lo, hi) = lipcalc::pointwise_bound(&b, &x, &lip_cfg)?;
            let up = hi.powf(p);
            let low = if hi > 0.0 {
                lo.powf(n_dim + p) / hi.powf(n_dim)
            } else {
                0.0
            };
            acc[0] += up;
            acc[1] += up * up;
            acc[2] += low;
            acc[3] += low * low;
        }
        Ok(acc)
    });
    let mut tot = [0.0; 4];
    for s in sums {
        let s = s?;
        for i in 0..4 {
            tot[i] += s[i];
        }
    }
    Ok(GradNorm {
        lip_p: MCEstimate::from_sums(mass, tot[0], tot[1], n_outer, seed),
        lower: MCEstimate::from_sums(mass, tot[2], tot[3], n_outer, seed),
        analytic,
    })
}

/// Shell widths used by [`shell_integral`]: `eps` and `eps / 2`.
pub const SHELL_EPS: f64 = 0.02;

/// `[m(B_{1+eps}) - m(B_1)] / eps`.
fn shell_factor(space: &SpaceInstance, eps: f64) -> f64 {
    let v = space
        .unit_ball_volume()
        .expect("tangent spaces have a unit-ball volume");
    v * ((1.0 + eps).powf(space.hom_dim()) - 1.0) / eps
}

/// Two-point Richardson value of the shell factor at `eps` and `eps / 2`.
fn richardson_shell_factor(space: &SpaceInstance, eps: f64) -> f64 {
    2.0 * shell_factor(space, 0.5 * eps) - shell_factor(space, eps)
}

/// Radial projections to the unit sphere of points uniform in a shell.
///
/// A uniform point of `B_{1+eps} \ B_1` is `delta_rho(sigma)` with `rho`
/// and `sigma` independent, and its projection is `sigma` itself, so the
/// directions do not depend on `eps` and are drawn once.
pub fn sphere_directions(space: &SpaceInstance, n: usize, seed: u64) -> Result<Vec<Coords>> {
    if !space.has_tangent_structure() {
        return Err(Error::Unsupported {
            operation: "shell_integral",
            kind: space.kind(),
        });
    }
    let layout = chunk_layout(n, CHUNK);
    Ok(par::map_indexed(layout.len(), |k| {
        let (_, _, len) = layout[k];
        let mut rng = stream(seed, Domain::Shell, k as u64);
        (0..len)
            .map(|_| loop {
                let w = space.draw_unit_ball(&mut rng);
                if space.norm(&w) > 1e-9 {
                    break space.to_unit_sphere(&w);
                }
            })
            .collect::<Vec<_>>()
    })
    .concat())
}

/// Minkowski-shell approximation of `int_{S_1} f dm^+` with Richardson
/// extrapolation over shell widths `eps` and `eps / 2`.
pub fn shell_integral<F>(space: &SpaceInstance, f: F, eps: f64, n: usize, seed: u64) -> Result<f64>
where
    F: Fn(&Coords) -> f64 + Sync,
{
    if !(eps > 0.0 && eps <= 0.05) || n == 0 {
        return Err(invalid("shell_integral needs 0 < eps <= 0.05 and n >= 1"));
    }
    let dirs = sphere_directions(space, n, seed)?;
    let mean = dirs.iter().map(&f).sum::<f64>() / n as f64;
    Ok(richardson_shell_factor(space, eps) * mean)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KNormConfig {
    pub n_outer: usize,
    pub n_shell: usize,
    pub eps: f64,
    pub seed: u64,
}

impl Default for KNormConfig {
    fn default() -> Self {
        KNormConfig {
            n_outer: 20_000,
            n_shell: 16_384,
            eps: SHELL_EPS,
            seed: 0,
        }
    }
}

/// `int_X int_{S_1} |u_{0,x}(w)|^p / N dm^+(w) dm(x)`. The stderr covers
/// the outer sampling; every outer point reuses one set of sphere directions.
pub fn k_norm(
    space: &SpaceInstance,
    u: &TestFunction,
    p: f64,
    cfg: &KNormConfig,
) -> Result<MCEstimate> {
    let b = u.bind(space)?;
    if !space.has_tangent_structure() {
        return Err(Error::Unsupported {
            operation: "K_norm",
            kind: space.kind(),
        });
    }
    if cfg.n_outer == 0 || cfg.n_shell == 0 || !(cfg.eps > 0.0 && cfg.eps <= 0.05) {
        return Err(invalid("K_norm needs positive budgets and 0 < eps <= 0.05"));
    }
    let Some(region) = space.window().intersect(b.support()) else {
        return Ok(MCEstimate::zero(cfg.n_outer, cfg.seed));
    };
    let mass = space.region_mass(&region);
    let dirs = sphere_directions(space, cfg.n_shell, cfg.seed)?;
    let factor = richardson_shell_factor(space, cfg.eps) / space.hom_dim();
    let pow = Power::new(p);
    let layout = chunk_layout(cfg.n_outer, OUTER_CHUNK);
    let sums = par::map_indexed(layout.len(), |k| -> Result<(f64, f64)> {
        let (_, _, len) = layout[k];
        let mut rng = stream(cfg.seed, Domain::KNormOuter, k as u64);
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..len {
            let x = space.draw_in_region(&region, &mut rng);
            let bl = lipcalc::blowup_bound(&b, &x)?;
            let g = dirs
                .iter()
                .map(|w| pow.apply(bl.eval(w).abs()))
                .sum::<f64>()
                / dirs.len() as f64;
            s += g;
            s2 += g * g;
        }
        Ok((s, s2))
    });
    let (mut s, mut s2) = (0.0, 0.0);
    for v in sums {
        let (a, b) = v?;
        s += a;
        s2 += b;
    }
    Ok(MCEstimate::from_sums(
        mass * factor,
        s,
        s2,
        cfg.n_outer,
        cfg.seed,
    ))
}

/// One inequality with both sides and its margin `rhs - lhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Inequality {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub holds: bool,
}

impl Inequality {
    pub fn le(lhs: f64, rhs: f64) -> Self {
        Inequality {
            lhs,
            rhs,
            margin: rhs - lhs,
            holds: lhs <= rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    #[serde(rename = "N")]
    pub n: f64,
    pub p: f64,
    pub a_hat: f64,
    pub b_hat: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    pub grad: GradNorm,
    pub lower_bound: f64,
    pub limit: f64,
    pub upper_bound: f64,
    pub lower: Inequality,
    pub upper: Inequality,
    pub pass: bool,
    pub curve: RescaledCurve,
    pub fit: LimitFit,
}

/// `C1 int lip^{N+p}/Lip^N <= limit <= C2 int Lip^p` with
/// `C1 = a / (2^{5N} 8^p)` and `C2 = 2 b`. `N_bar` is forced to `N`.
pub fn bound_check(
    space: &SpaceInstance,
    u: &TestFunction,
    cfg: &BVYConfig,
    a_hat: f64,
    b_hat: f64,
    n_grad: usize,
) -> Result<BoundReport> {
    if !(a_hat > 0.0 && b_hat >= a_hat) {
        return Err(invalid("density bounds must satisfy 0 < a <= b"));
    }
    let n = space.hom_dim();
    let mut cfg = cfg.clone();
    cfg.n_bar = Some(n);
    let curve = rescaled_curve(space, u, &cfg)?;
    let fit = limit_fit(&curve)?;
    let grad = grad_norm(space, u, cfg.p, n_grad, cfg.seed)?;
    let c1 = a_hat / (2f64.powf(5.0 * n) * 8f64.powf(cfg.p));
    let c2 = 2.0 * b_hat;
    let lower_bound = c1 * grad.lower.value;
    let upper_bound = c2 * grad.lip_p.value;
    let lower = Inequality::le(lower_bound, fit.limit);
    let upper = Inequality::le(fit.limit, upper_bound);
    Ok(BoundReport {
        n,
        p: cfg.p,
        a_hat,
        b_hat,
        c1,
        c2,
        grad,
        lower_bound,
        limit: fit.limit,
        upper_bound,
        pass: lower.holds && upper.holds,
        lower,
        upper,
        curve,
        fit,
    })
}

/// Pad a coordinate slice to the fixed-width layout used internally.
pub fn coords(v: &[f64]) -> Coords {
    let mut c = [0.0; MAX_DIM];
    c[..v.len()].copy_from_slice(v);
    c
}
