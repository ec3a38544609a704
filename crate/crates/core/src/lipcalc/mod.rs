//! Catalogued Lipschitz test functions and pointwise Lipschitz estimators.
//!
//! Every function is `scale * core(x)` where `core` vanishes outside the
//! support box. Keeping the scale separate lets the pair predicate treat
//! `(c u, lambda)` and `(u, lambda / c)` as literally the same test.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::par;
use crate::rng::{stream, Domain};
use crate::space::{
    dual_exponent, heisenberg, lq_norm, Coords, Point, SpaceInstance, SpaceKind, Window, MAX_DIM,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulaId {
    Linear,
    SmoothBump,
    Cone,
    ProductSine,
    HeisCoord,
}

impl FormulaId {
    pub const ALL: [FormulaId; 5] = [
        FormulaId::Linear,
        FormulaId::SmoothBump,
        FormulaId::Cone,
        FormulaId::ProductSine,
        FormulaId::HeisCoord,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FormulaId::Linear => "linear",
            FormulaId::SmoothBump => "smooth_bump",
            FormulaId::Cone => "cone",
            FormulaId::ProductSine => "product_sine",
            FormulaId::HeisCoord => "heis_coord",
        }
    }

    pub fn supports(self, kind: SpaceKind) -> bool {
        match self {
            FormulaId::Linear | FormulaId::ProductSine => kind != SpaceKind::Heisenberg1,
            FormulaId::HeisCoord => kind == SpaceKind::Heisenberg1,
            FormulaId::SmoothBump | FormulaId::Cone => true,
        }
    }

    /// Whether the catalogue carries a closed-form gradient.
    pub fn is_smooth(self) -> bool {
        self != FormulaId::Cone
    }
}

/// Optional real parameters; anything left out takes a documented default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionParams {
    /// Origin of `linear` (default 0) or centre of the radial formulas
    /// (default: centre of the support box).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    /// Coefficient vector of `linear` (default `e1`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
    /// Amplitude of `smooth_bump` / `product_sine` (default 1), apex of `cone` (default 0.2).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
    /// Radius of `smooth_bump` (default: half the narrowest support side).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// Integer number of half waves of `product_sine` per side (default 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency: Option<f64>,
    /// Width of the smooth cutoff of `linear`. Defaults to 0 when the
    /// support box covers the window and to a quarter of the narrowest
    /// support side otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taper: Option<f64>,
    /// Plateau and outer radius of `heis_coord` (defaults 0.3, 0.6).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho1: Option<f64>,
}

impl FunctionParams {
    fn is_empty(&self) -> bool {
        *self == FunctionParams::default()
    }
}

fn unit_scale() -> f64 {
    1.0
}

fn is_unit_scale(s: &f64) -> bool {
    *s == 1.0
}

/// JSON form `{"formula_id", "params", "support_box", "scale"?}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunction {
    pub formula_id: FormulaId,
    #[serde(default, skip_serializing_if = "FunctionParams::is_empty")]
    pub params: FunctionParams,
    pub support_box: Window,
    #[serde(default = "unit_scale", skip_serializing_if = "is_unit_scale")]
    pub scale: f64,
}

impl TestFunction {
    pub fn new(formula_id: FormulaId, support_box: Window) -> Self {
        TestFunction {
            formula_id,
            params: FunctionParams::default(),
            support_box,
            scale: 1.0,
        }
    }

    pub fn with_params(mut self, params: FunctionParams) -> Self {
        self.params = params;
        self
    }

    /// `c * u`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut f = self.clone();
        f.scale *= c;
        f
    }

    /// Resolve defaults and check compatibility with `space`.
    pub fn bind<'a>(&self, space: &'a SpaceInstance) -> Result<Bound<'a>> {
        Bound::new(self, space)
    }
}

#[inline]
fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * (3.0 - 2.0 * t)
    }
}

#[inline]
fn smoothstep_deriv(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        6.0 * t * (1.0 - t)
    }
}

const SMOOTHSTEP_SLOPE: f64 = 1.5;
/// `max |d/ds (1 - s^2)^2|` on `[0, 1]`, attained at `s = 1/sqrt(3)`.
const BUMP_SLOPE: f64 = 1.539_600_717_839_002;

#[derive(Debug, Clone, Copy)]
struct Cutoff {
    lo: Coords,
    hi: Coords,
    tau: f64,
}

impl Cutoff {
    fn factor(&self, i: usize, x: f64) -> (f64, f64) {
        let a = (x - self.lo[i]) / self.tau;
        let b = (self.hi[i] - x) / self.tau;
        let (sa, sb) = (smoothstep(a), smoothstep(b));
        let d = (smoothstep_deriv(a) * sb - sa * smoothstep_deriv(b)) / self.tau;
        (sa * sb, d)
    }

    fn value(&self, x: &Coords, n: usize) -> f64 {
        (0..n).map(|i| self.factor(i, x[i]).0).product()
    }

    fn value_and_grad(&self, x: &Coords, n: usize) -> (f64, Coords) {
        let mut vals = [1.0; MAX_DIM];
        let mut ders = [0.0; MAX_DIM];
        for i in 0..n {
            let (v, d) = self.factor(i, x[i]);
            vals[i] = v;
            ders[i] = d;
        }
        let mut g = [0.0; MAX_DIM];
        for i in 0..n {
            g[i] = ders[i] * (0..n).filter(|&j| j != i).map(|j| vals[j]).product::<f64>();
        }
        (vals[..n].iter().product(), g)
    }
}

#[derive(Debug, Clone, Copy)]
enum Form {
    Linear {
        a: Coords,
        x0: Coords,
        cutoff: Option<Cutoff>,
    },
    Bump {
        c: Coords,
        h: f64,
        rho: f64,
    },
    Cone {
        c: Coords,
        h: f64,
    },
    ProductSine {
        lo: Coords,
        k: Coords,
        h: f64,
    },
    HeisCoord {
        c: Coords,
        rho0: f64,
        rho1: f64,
    },
}

/// A test function resolved against a space.
#[derive(Debug, Clone)]
pub struct Bound<'a> {
    space: &'a SpaceInstance,
    form: Form,
    support: Window,
    scale: f64,
    /// Lipschitz bound of the unscaled core, when known in closed form.
    core_lip: Option<f64>,
    formula: FormulaId,
}

fn vec_param(v: &Option<Vec<f64>>, n: usize, default: Coords, what: &str) -> Result<Coords> {
    match v {
        None => Ok(default),
        Some(v) if v.len() == n && v.iter().all(|x| x.is_finite()) => {
            let mut c = [0.0; MAX_DIM];
            c[..n].copy_from_slice(v);
            Ok(c)
        }
        Some(v) => Err(invalid(format!(
            "{what} must have {n} finite entries, got {v:?}"
        ))),
    }
}

/// Box containment up to rounding in the centre +- radius arithmetic.
fn fits(outer: &Window, inner: &Window) -> bool {
    (0..outer.dim()).all(|i| {
        let tol = 1e-12 * (1.0 + outer.width(i));
        inner.min[i] >= outer.min[i] - tol && inner.max[i] <= outer.max[i] + tol
    })
}

fn positive(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(format!("{what} must be positive, got {v}")))
    }
}

impl<'a> Bound<'a> {
    fn new(f: &TestFunction, space: &'a SpaceInstance) -> Result<Self> {
        let n = space.topo_dim();
        let kind = space.kind();
        if !f.formula_id.supports(kind) {
            return Err(Error::Unsupported {
                operation: f.formula_id.name(),
                kind,
            });
        }
        if f.support_box.dim() != n {
            return Err(invalid("support_box dimension differs from the space"));
        }
        f.support_box.validate()?;
        if !f.scale.is_finite() {
            return Err(invalid("scale must be finite"));
        }
        let sb = &f.support_box;
        let p = &f.params;
        let mut mid = [0.0; MAX_DIM];
        for i in 0..n {
            mid[i] = 0.5 * (sb.min[i] + sb.max[i]);
        }
        // gradient bounds are measured in the norm dual to the space metric
        let q_dual = space.norm_exponent().map(dual_exponent).unwrap_or(2.0);
        let (form, core_lip) = match f.formula_id {
            FormulaId::Linear => {
                let mut e1 = [0.0; MAX_DIM];
                e1[0] = 1.0;
                let a = vec_param(&p.direction, n, e1, "direction")?;
                let x0 = vec_param(&p.center, n, [0.0; MAX_DIM], "center")?;
                let covers = sb.contains_box(space.window());
                let tau = match p.taper {
                    Some(t) if t >= 0.0 && t.is_finite() => t,
                    Some(t) => return Err(invalid(format!("taper must be >= 0, got {t}"))),
                    None if covers => 0.0,
                    None => 0.25 * sb.min_width(),
                };
                let grad_norm = lq_norm(&a[..n], q_dual);
                if tau == 0.0 {
                    if !covers {
                        return Err(invalid(
                            "linear without taper needs a support box covering the window",
                        ));
                    }
                    (
                        Form::Linear {
                            a,
                            x0,
                            cutoff: None,
                        },
                        grad_norm,
                    )
                } else {
                    if 2.0 * tau > sb.min_width() {
                        return Err(invalid("taper exceeds half the support width"));
                    }
                    let mut lo = [0.0; MAX_DIM];
                    let mut hi = [0.0; MAX_DIM];
                    lo[..n].copy_from_slice(&sb.min);
                    hi[..n].copy_from_slice(&sb.max);
                    // max |core| over the support box sits at a corner
                    let mut core_max: f64 = 0.0;
                    for mask in 0..(1usize << n) {
                        let v: f64 = (0..n)
                            .map(|i| {
                                let c = if mask >> i & 1 == 1 { hi[i] } else { lo[i] };
                                a[i] * (c - x0[i])
                            })
                            .sum();
                        core_max = core_max.max(v.abs());
                    }
                    let ones = [1.0; MAX_DIM];
                    let cut_lip = SMOOTHSTEP_SLOPE / tau * lq_norm(&ones[..n], q_dual);
                    (
                        Form::Linear {
                            a,
                            x0,
                            cutoff: Some(Cutoff { lo, hi, tau }),
                        },
                        grad_norm + core_max * cut_lip,
                    )
                }
            }
            FormulaId::SmoothBump => {
                let c = vec_param(&p.center, n, mid, "center")?;
                let h = p.height.unwrap_or(1.0);
                let rho = positive(p.radius.unwrap_or(0.5 * sb.min_width()), "radius")?;
                if !fits(sb, &ball_box(space, &c, rho)) {
                    return Err(invalid("smooth_bump ball leaves the support box"));
                }
                // Euclidean radial profile, except on the group where the gauge is used
                let radial_lip = if kind == SpaceKind::Heisenberg1 {
                    1.0
                } else {
                    let e = if q_dual >= 2.0 {
                        0.0
                    } else {
                        1.0 / q_dual - 0.5
                    };
                    (n as f64).powf(e)
                };
                (
                    Form::Bump { c, h, rho },
                    h.abs() * BUMP_SLOPE / rho * radial_lip,
                )
            }
            FormulaId::Cone => {
                let c = vec_param(&p.center, n, mid, "center")?;
                let h = positive(p.height.unwrap_or(0.2), "height")?;
                if !fits(sb, &space.ball_bounding_box(&c, h)) {
                    return Err(invalid("cone support leaves the support box"));
                }
                // slope one, but no closed-form metadata: the global constant
                // is estimated like any black-box function
                (Form::Cone { c, h }, f64::NAN)
            }
            FormulaId::ProductSine => {
                let h = p.height.unwrap_or(1.0);
                let freq = p.frequency.unwrap_or(1.0);
                if !(freq >= 1.0 && freq.fract() == 0.0) {
                    return Err(invalid("product_sine frequency must be a positive integer"));
                }
                let mut lo = [0.0; MAX_DIM];
                let mut k = [0.0; MAX_DIM];
                for i in 0..n {
                    lo[i] = sb.min[i];
                    k[i] = std::f64::consts::PI * freq / sb.width(i);
                }
                let lip = h.abs() * lq_norm(&k[..n], q_dual);
                (Form::ProductSine { lo, k, h }, lip)
            }
            FormulaId::HeisCoord => {
                let c = vec_param(&p.center, n, mid, "center")?;
                let rho0 = positive(p.rho0.unwrap_or(0.3), "rho0")?;
                let rho1 = positive(p.rho1.unwrap_or(0.6), "rho1")?;
                if rho1 <= rho0 {
                    return Err(invalid("heis_coord needs rho0 < rho1"));
                }
                if !fits(sb, &space.ball_bounding_box(&c, rho1)) {
                    return Err(invalid("heis_coord support leaves the support box"));
                }
                (
                    Form::HeisCoord { c, rho0, rho1 },
                    1.0 + rho1 * SMOOTHSTEP_SLOPE / (rho1 - rho0),
                )
            }
        };
        Ok(Bound {
            space,
            form,
            support: sb.clone(),
            scale: f.scale,
            core_lip: if core_lip.is_nan() {
                None
            } else {
                Some(core_lip)
            },
            formula: f.formula_id,
        })
    }

    pub fn space(&self) -> &'a SpaceInstance {
        self.space
    }

    pub fn formula(&self) -> FormulaId {
        self.formula
    }

    pub fn support(&self) -> &Window {
        &self.support
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// True when `u` is identically zero.
    pub fn is_zero(&self) -> bool {
        self.scale == 0.0
            || matches!(self.form, Form::Linear { a, .. } if a.iter().all(|v| *v == 0.0))
            || matches!(self.form, Form::Bump { h, .. } | Form::ProductSine { h, .. } if h == 0.0)
    }

    /// Closed-form global Lipschitz constant of `u` (scale included).
    pub fn lip_bound(&self) -> Option<f64> {
        self.core_lip.map(|l| l * self.scale.abs())
    }

    /// Unscaled core, zero outside the support box.
    #[inline]
    pub fn core(&self, x: &Coords) -> f64 {
        let n = self.space.topo_dim();
        if !self.support.contains(&x[..n]) {
            return 0.0;
        }
        match self.form {
            Form::Linear { a, x0, cutoff } => {
                let lin: f64 = (0..n).map(|i| a[i] * (x[i] - x0[i])).sum();
                match cutoff {
                    None => lin,
                    Some(c) => lin * c.value(x, n),
                }
            }
            Form::Bump { c, h, rho } => {
                let s = self.radial(x, &c) / rho;
                if s >= 1.0 {
                    0.0
                } else {
                    let t = 1.0 - s * s;
                    h * t * t
                }
            }
            Form::Cone { c, h } => (h - self.space.metric(x, &c)).max(0.0),
            Form::ProductSine { lo, k, h } => {
                h * (0..n)
                    .map(|i| (k[i] * (x[i] - lo[i])).sin())
                    .product::<f64>()
            }
            Form::HeisCoord { c, rho0, rho1 } => {
                let s = self.space.metric(x, &c);
                if s >= rho1 {
                    0.0
                } else {
                    (x[0] - c[0]) * (1.0 - smoothstep((s - rho0) / (rho1 - rho0)))
                }
            }
        }
    }

    #[inline]
    fn radial(&self, x: &Coords, c: &Coords) -> f64 {
        if self.space.kind() == SpaceKind::Heisenberg1 {
            self.space.metric(x, c)
        } else {
            (0..self.space.topo_dim())
                .map(|i| (x[i] - c[i]) * (x[i] - c[i]))
                .sum::<f64>()
                .sqrt()
        }
    }

    #[inline]
    pub fn eval_raw(&self, x: &Coords) -> f64 {
        self.scale * self.core(x)
    }

    /// Gradient of the core: coordinate gradient on normed spaces and the
    /// line, horizontal gradient `(X1 u, X2 u)` on the group. `None` when
    /// the catalogue has no closed form.
    pub fn core_gradient(&self, x: &Coords) -> Option<Coords> {
        let n = self.space.topo_dim();
        let mut g = [0.0; MAX_DIM];
        if !self.support.contains(&x[..n]) {
            return match self.form {
                Form::Cone { .. } => None,
                _ => Some(g),
            };
        }
        match self.form {
            Form::Linear { a, x0, cutoff } => match cutoff {
                None => g = a,
                Some(c) => {
                    let lin: f64 = (0..n).map(|i| a[i] * (x[i] - x0[i])).sum();
                    let (chi, dchi) = c.value_and_grad(x, n);
                    for i in 0..n {
                        g[i] = a[i] * chi + lin * dchi[i];
                    }
                }
            },
            Form::Bump { c, h, rho } => {
                if self.space.kind() == SpaceKind::Heisenberg1 {
                    let w = rel(&c, x);
                    let s = heisenberg::gauge(&w) / rho;
                    if s < 1.0 && s > 0.0 {
                        let db = -4.0 * s * (1.0 - s * s);
                        let gg = heisenberg::gauge_horizontal_gradient(&w);
                        g[0] = h * db / rho * gg[0];
                        g[1] = h * db / rho * gg[1];
                    }
                } else {
                    let s2: f64 =
                        (0..n).map(|i| (x[i] - c[i]) * (x[i] - c[i])).sum::<f64>() / (rho * rho);
                    if s2 < 1.0 {
                        for i in 0..n {
                            g[i] = -4.0 * h * (1.0 - s2) * (x[i] - c[i]) / (rho * rho);
                        }
                    }
                }
            }
            Form::Cone { .. } => return None,
            Form::ProductSine { lo, k, h } => {
                let mut s = [0.0; MAX_DIM];
                let mut co = [0.0; MAX_DIM];
                for i in 0..n {
                    let (si, ci) = (k[i] * (x[i] - lo[i])).sin_cos();
                    s[i] = si;
                    co[i] = ci;
                }
                for i in 0..n {
                    g[i] = h
                        * k[i]
                        * co[i]
                        * (0..n).filter(|&j| j != i).map(|j| s[j]).product::<f64>();
                }
            }
            Form::HeisCoord { c, rho0, rho1 } => {
                let w = rel(&c, x);
                let s = heisenberg::gauge(&w);
                if s < rho1 {
                    let width = rho1 - rho0;
                    let t = (s - rho0) / width;
                    let phi = 1.0 - smoothstep(t);
                    let dphi = -smoothstep_deriv(t) / width;
                    let gg = heisenberg::gauge_horizontal_gradient(&w);
                    g[0] = phi + w[0] * dphi * gg[0];
                    g[1] = w[0] * dphi * gg[1];
                }
            }
        }
        Some(g)
    }

    /// Gradient of `u` itself.
    pub fn gradient(&self, x: &Coords) -> Option<Coords> {
        self.core_gradient(x).map(|mut g| {
            for v in g.iter_mut() {
                *v *= self.scale;
            }
            g
        })
    }

    /// Length of a gradient in the norm dual to the space metric.
    pub fn dual_norm(&self, g: &Coords) -> f64 {
        match self.space.kind() {
            SpaceKind::Heisenberg1 => g[0].hypot(g[1]),
            SpaceKind::BanachBox => {
                let q = self.space.norm_exponent().unwrap_or(2.0);
                lq_norm(&g[..self.space.topo_dim()], dual_exponent(q))
            }
            _ => lq_norm(&g[..self.space.topo_dim()], 2.0),
        }
    }

    /// Analytic `Lip(u)(x) = lip(u)(x)` where the gradient is known.
    pub fn analytic_lip(&self, x: &Coords) -> Option<f64> {
        self.gradient(x).map(|g| self.dual_norm(&g))
    }
}

#[inline]
fn rel(c: &Coords, x: &Coords) -> [f64; 3] {
    heisenberg::mul(&heisenberg::inv(&[c[0], c[1], c[2]]), &[x[0], x[1], x[2]])
}

/// Bounding box of the support of a radial bump.
fn ball_box(space: &SpaceInstance, c: &Coords, r: f64) -> Window {
    if space.kind() == SpaceKind::Heisenberg1 {
        space.ball_bounding_box(c, r)
    } else {
        let n = space.topo_dim();
        Window {
            min: (0..n).map(|i| c[i] - r).collect(),
            max: (0..n).map(|i| c[i] + r).collect(),
        }
    }
}

/// `u(x)`; exactly zero outside the support box.
pub fn eval(space: &SpaceInstance, u: &TestFunction, x: &Point) -> Result<f64> {
    check_point(space, x)?;
    Ok(u.bind(space)?.eval_raw(x.raw()))
}

fn check_point(space: &SpaceInstance, x: &Point) -> Result<()> {
    if x.tag() != space.tag() {
        return Err(Error::Domain("point belongs to a different space".into()));
    }
    Ok(())
}

/// Monte Carlo approximants of `l_r u(x)` and `L_r u(x)` on a decreasing
/// radius ladder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipLadder {
    pub radii: Vec<f64>,
    pub l_vals: Vec<f64>,
    #[serde(rename = "L_vals")]
    pub big_l_vals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LipConfig {
    pub radii: Vec<f64>,
    pub sub_rungs: usize,
    pub n_per_radius: usize,
    pub seed: u64,
}

impl Default for LipConfig {
    fn default() -> Self {
        LipConfig {
            radii: vec![1e-1, 1e-2, 1e-3],
            sub_rungs: 8,
            n_per_radius: 512,
            seed: 0,
        }
    }
}

/// Largest sampled slope `|u(y) - u(x)| / s` over `y` in `B_s(x)`.
fn sampled_slope(u: &Bound, x: &Coords, s: f64, n: usize, seed: u64, index: u64) -> f64 {
    let space = u.space();
    let mut rng = stream(seed, Domain::LipLadder, index);
    let ux = u.core(x);
    let dim = space.topo_dim();
    let mut best: f64 = 0.0;
    let mut got = 0;
    let mut tries = 0;
    let cantor = space.kind() == SpaceKind::FatCantor;
    // polytope balls put the sup at a vertex, which uniform draws approach
    // only linearly; test the vertices directly
    for v in polytope_vertices(space) {
        let y = space.place_in_ball(x, s, &v);
        if space.window().contains(&y[..dim]) {
            got += 1;
            best = best.max((u.core(&y) - ux).abs() / s);
        }
    }
    while got < n && tries < 8 * n {
        tries += 1;
        let y = if cantor {
            match space.draw_local(x, s, &mut rng) {
                Some(y) => y,
                None => break,
            }
        } else {
            let w = space.draw_unit_ball(&mut rng);
            // half the draws on the sphere itself, where the sup usually sits
            let w = if tries % 2 == 0 {
                space.to_unit_sphere(&w)
            } else {
                w
            };
            let y = space.place_in_ball(x, s, &w);
            if !space.window().contains(&y[..dim]) {
                continue;
            }
            y
        };
        got += 1;
        best = best.max((u.core(&y) - ux).abs() / s);
    }
    best * u.scale().abs()
}

/// Extreme points of the unit ball of an `l^1` or `l^inf` norm.
fn polytope_vertices(space: &SpaceInstance) -> Vec<Coords> {
    let n = space.topo_dim();
    match space.norm_exponent() {
        Some(q) if space.kind() == SpaceKind::BanachBox && q == 1.0 => (0..2 * n)
            .map(|k| {
                let mut v = [0.0; MAX_DIM];
                v[k / 2] = if k % 2 == 0 { 1.0 } else { -1.0 };
                v
            })
            .collect(),
        Some(q) if space.kind() == SpaceKind::BanachBox && q.is_infinite() => (0..1usize << n)
            .map(|mask| {
                let mut v = [0.0; MAX_DIM];
                for (i, c) in v.iter_mut().enumerate().take(n) {
                    *c = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
                }
                v
            })
            .collect(),
        _ => Vec::new(),
    }
}

pub fn lip_ladder(
    space: &SpaceInstance,
    u: &TestFunction,
    x: &Point,
    cfg: &LipConfig,
) -> Result<LipLadder> {
    check_point(space, x)?;
    let b = u.bind(space)?;
    lip_ladder_bound(&b, x.raw(), cfg)
}

pub(crate) fn lip_ladder_bound(b: &Bound, x: &Coords, cfg: &LipConfig) -> Result<LipLadder> {
    let radii = &cfg.radii;
    if radii.is_empty()
        || radii.windows(2).any(|w| !(w[1] < w[0]))
        || !(radii[radii.len() - 1] > 0.0)
    {
        return Err(invalid("radii must be positive and strictly decreasing"));
    }
    if cfg.n_per_radius < 16 || cfg.sub_rungs == 0 {
        return Err(invalid(
            "lip_ladder needs n_per_radius >= 16 and at least one sub-rung",
        ));
    }
    let k = cfg.sub_rungs;
    let count = radii.len() * k;
    let slopes = par::map_indexed(count, |idx| {
        let (i, j) = (idx / k, idx % k);
        let r = radii[i];
        let next = radii.get(i + 1).copied().unwrap_or(0.5 * r);
        let s = r * (next / r).powf(j as f64 / k as f64);
        sampled_slope(b, x, s, cfg.n_per_radius, cfg.seed, idx as u64)
    });
    // l_r and L_r are inf / sup over every sub-rung s <= r
    let mut l_vals = vec![0.0; radii.len()];
    let mut big_l_vals = vec![0.0; radii.len()];
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in (0..radii.len()).rev() {
        for s in &slopes[i * k..(i + 1) * k] {
            lo = lo.min(*s);
            hi = hi.max(*s);
        }
        l_vals[i] = lo;
        big_l_vals[i] = hi;
    }
    Ok(LipLadder {
        radii: radii.clone(),
        l_vals,
        big_l_vals,
    })
}

/// `(lip(u)(x), Lip(u)(x))`: exact from the gradient when the catalogue
/// has one, otherwise the last rung of [`lip_ladder`].
pub fn pointwise_lipschitz(
    space: &SpaceInstance,
    u: &TestFunction,
    x: &Point,
    cfg: &LipConfig,
) -> Result<(f64, f64)> {
    check_point(space, x)?;
    let b = u.bind(space)?;
    pointwise_bound(&b, x.raw(), cfg)
}

pub(crate) fn pointwise_bound(b: &Bound, x: &Coords, cfg: &LipConfig) -> Result<(f64, f64)> {
    if let Some(g) = b.analytic_lip(x) {
        return Ok((g, g));
    }
    let ladder = lip_ladder_bound(b, x, cfg)?;
    let last = ladder.radii.len() - 1;
    Ok((ladder.l_vals[last], ladder.big_l_vals[last]))
}

pub const GLOBAL_LIP_PAIRS: usize = 100_000;
const GLOBAL_LIP_INFLATION: f64 = 1.1;

/// Global Lipschitz constant: the closed form when catalogued, otherwise
/// the largest sampled difference quotient inflated by 10%.
pub fn global_lip(space: &SpaceInstance, u: &TestFunction, seed: u64) -> Result<f64> {
    let b = u.bind(space)?;
    Ok(global_lip_bound(&b, seed))
}

pub(crate) fn global_lip_bound(b: &Bound, seed: u64) -> f64 {
    if let Some(l) = b.lip_bound() {
        return l;
    }
    if b.is_zero() {
        return 0.0;
    }
    let space = b.space();
    let dim = space.topo_dim();
    let n = GLOBAL_LIP_PAIRS;
    let chunks = par::chunk_layout(n, par::CHUNK);
    // region where either point may see a nonzero value
    let region = space.neighbourhood(b.support(), 0.05 * space.window().min_width());
    let local_r = 0.05 * space.window().min_width();
    let best = par::map_indexed(chunks.len(), |k| {
        let (_, start, len) = chunks[k];
        let mut rng = stream(seed, Domain::GlobalLip, k as u64);
        let mut best: f64 = 0.0;
        for i in start..start + len {
            let x = space.draw_in_region(&region, &mut rng);
            // alternate far pairs and near pairs
            let y = if i % 2 == 0 {
                space.draw_in_region(&region, &mut rng)
            } else {
                match space.draw_local(&x, local_r * rng.random::<f64>().max(1e-3), &mut rng) {
                    Some(y) => y,
                    None => continue,
                }
            };
            if !space.window().contains(&y[..dim]) {
                continue;
            }
            let d = space.metric(&x, &y);
            if d > 0.0 {
                best = best.max((b.core(&x) - b.core(&y)).abs() / d);
            }
        }
        best
    })
    .into_iter()
    .fold(0.0f64, f64::max);
    best * b.scale().abs() * GLOBAL_LIP_INFLATION
}

/// The tangent-space blow-up `w -> u_{0,x}(w)`: `<grad u(x), w>` on normed
/// spaces, `<grad_H u(x), z>` on the group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blowup {
    gradient: Coords,
    dim: usize,
}

impl Blowup {
    #[inline]
    pub fn eval(&self, w: &Coords) -> f64 {
        (0..self.dim).map(|i| self.gradient[i] * w[i]).sum()
    }

    pub fn gradient(&self) -> &[f64] {
        &self.gradient[..self.dim]
    }
}

pub fn blowup(space: &SpaceInstance, u: &TestFunction, x: &Point) -> Result<Blowup> {
    check_point(space, x)?;
    let b = u.bind(space)?;
    blowup_bound(&b, x.raw())
}

pub(crate) fn blowup_bound(b: &Bound, x: &Coords) -> Result<Blowup> {
    let space = b.space();
    if !space.has_tangent_structure() {
        return Err(Error::Unsupported {
            operation: "blowup",
            kind: space.kind(),
        });
    }
    let gradient = b.gradient(x).ok_or(Error::Unsupported {
        operation: "blowup without closed-form gradient",
        kind: space.kind(),
    })?;
    let dim = if space.kind() == SpaceKind::Heisenberg1 {
        2
    } else {
        space.topo_dim()
    };
    Ok(Blowup { gradient, dim })
}

/// `max |u_{delta,x}(y) - u_{0,x}(phi_delta(y))|` over sampled `y` in
/// `B_delta(x)`, with `u_{delta,x}(y) = (u(y) - u(x)) / delta`.
pub fn blowup_defect(
    space: &SpaceInstance,
    u: &TestFunction,
    x: &Point,
    delta: f64,
    n: usize,
    seed: u64,
) -> Result<f64> {
    check_point(space, x)?;
    let b = u.bind(space)?;
    let bl = blowup_bound(&b, x.raw())?;
    if !(delta > 0.0) || n == 0 {
        return Err(invalid("blowup_defect needs delta > 0 and n >= 1"));
    }
    let xr = x.raw();
    let ux = b.eval_raw(xr);
    let dim = space.topo_dim();
    let mut rng = stream(seed, Domain::Blowup, 0);
    let mut worst: f64 = 0.0;
    let mut got = 0;
    for _ in 0..8 * n {
        if got == n {
            break;
        }
        let w = space.draw_unit_ball(&mut rng);
        let y = space.place_in_ball(xr, delta, &w);
        if !space.window().contains(&y[..dim]) {
            continue;
        }
        got += 1;
        let v = space.tangent_chart(xr, &y, delta)?;
        worst = worst.max(((b.eval_raw(&y) - ux) / delta - bl.eval(&v)).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests;
