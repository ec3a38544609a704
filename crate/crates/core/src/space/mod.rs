//! Metric measure spaces restricted to a bounded window.
//!
//! A [`SpaceInstance`] bundles a metric, a reference measure, a window `W`
//! carrying finite mass and the sampling primitives the estimators need.
//! Instances are immutable and cheap to share between workers.

pub mod cantor;
pub mod heisenberg;
pub mod planar;
mod window;

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use cantor::CantorSet;
pub use window::Window;

use crate::error::{invalid, Error, Result};
use crate::par::{self, chunk_layout, CHUNK};
use crate::rng::{stream, Domain, StreamRng};

/// Largest coordinate dimension supported by [`Point`].
pub const MAX_DIM: usize = 4;

/// Coordinates in the fixed-size layout used by the hot loops.
pub type Coords = [f64; MAX_DIM];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpaceKind {
    EuclideanBox,
    WeightedEuclidean,
    BanachBox,
    Heisenberg1,
    FatCantor,
}

impl fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Identity of a space, derived from its canonical descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpaceTag(pub u64);

/// A point of some [`SpaceInstance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    coords: Coords,
    dim: u8,
    tag: SpaceTag,
}

impl Point {
    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim as usize]
    }

    pub fn raw(&self) -> &Coords {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn tag(&self) -> SpaceTag {
        self.tag
    }
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

/// A mass `m(A)` together with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassValue {
    pub value: f64,
    pub exact: bool,
    /// Monte Carlo standard error; zero when `exact`.
    pub stderr: f64,
}

impl MassValue {
    pub fn exact(value: f64) -> Self {
        MassValue {
            value,
            exact: true,
            stderr: 0.0,
        }
    }

    pub fn estimated(value: f64, stderr: f64) -> Self {
        MassValue {
            value,
            exact: false,
            stderr,
        }
    }
}

/// Sample budget for Monte Carlo masses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McBudget {
    pub samples: usize,
    pub seed: u64,
}

impl Default for McBudget {
    fn default() -> Self {
        McBudget {
            samples: 20_000,
            seed: 0,
        }
    }
}

/// Density `1 + A sin(2 pi f x1)` with respect to Lebesgue measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weight {
    pub amplitude: f64,
    pub frequency: f64,
}

impl Weight {
    pub const DEFAULT: Weight = Weight {
        amplitude: 0.5,
        frequency: 1.0,
    };
    pub const UNIT: Weight = Weight {
        amplitude: 0.0,
        frequency: 1.0,
    };

    #[inline]
    pub fn value(&self, x1: f64) -> f64 {
        if self.amplitude == 0.0 {
            1.0
        } else {
            1.0 + self.amplitude * (2.0 * std::f64::consts::PI * self.frequency * x1).sin()
        }
    }

    /// `(a_w, b_w)` with `a_w <= w <= b_w`.
    pub fn bounds(&self) -> (f64, f64) {
        (1.0 - self.amplitude.abs(), 1.0 + self.amplitude.abs())
    }

    /// `int_a^b w(x1) dx1`.
    pub fn integral_1d(&self, a: f64, b: f64) -> f64 {
        if self.amplitude == 0.0 {
            return b - a;
        }
        let k = 2.0 * std::f64::consts::PI * self.frequency;
        (b - a) + self.amplitude * ((k * a).cos() - (k * b).cos()) / k
    }
}

/// Banach exponent `q` in `[1, inf]`; `inf` serializes as the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponent(pub f64);

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Exponent(v)),
            Raw::Text(s) => match s.to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "max" => Ok(Exponent(f64::INFINITY)),
                other => other
                    .parse::<f64>()
                    .map(Exponent)
                    .map_err(|_| serde::de::Error::custom(format!("bad exponent {s:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    Unit,
    Sine,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<WeightKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency: Option<f64>,
    /// Fat Cantor schedule `base^k`; ignored when `ratios` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio_base: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratios: Option<Vec<f64>>,
}

impl SpaceParams {
    fn is_empty(&self) -> bool {
        *self == SpaceParams::default()
    }
}

/// JSON form of a space: `{"kind", "window", "params"?, "depth"?, "q"?}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceDescriptor {
    pub kind: SpaceKind,
    pub window: Window,
    #[serde(default, skip_serializing_if = "SpaceParams::is_empty")]
    pub params: SpaceParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Exponent>,
}

pub const DEFAULT_CANTOR_DEPTH: usize = 12;
pub const DEFAULT_CANTOR_BASE: f64 = 0.25;

#[derive(Debug, Clone)]
enum Geometry {
    Euclidean,
    Weighted(Weight),
    Banach(f64),
    Heisenberg,
    FatCantor(Arc<CantorSet>),
}

#[derive(Debug, Clone)]
pub struct SpaceInstance {
    geometry: Geometry,
    window: Window,
    tag: SpaceTag,
}

impl SpaceInstance {
    pub fn euclidean(window: Window) -> Result<Self> {
        Self::build(Geometry::Euclidean, window)
    }

    pub fn weighted(window: Window, weight: Weight) -> Result<Self> {
        if !(weight.amplitude.abs() < 1.0) || !weight.frequency.is_finite() {
            return Err(invalid(
                "weight must satisfy |amplitude| < 1 to stay positive",
            ));
        }
        Self::build(Geometry::Weighted(weight), window)
    }

    pub fn banach(window: Window, q: f64) -> Result<Self> {
        if !(q >= 1.0) {
            return Err(invalid(format!(
                "Banach exponent must lie in [1, inf], got {q}"
            )));
        }
        Self::build(Geometry::Banach(q), window)
    }

    pub fn heisenberg(window: Window) -> Result<Self> {
        if window.dim() != 3 {
            return Err(invalid("Heisenberg1 needs a 3-coordinate window"));
        }
        Self::build(Geometry::Heisenberg, window)
    }

    pub fn fat_cantor(window: Window, ratios: &[f64]) -> Result<Self> {
        if window.dim() != 1 {
            return Err(invalid("FatCantor needs a 1-coordinate window"));
        }
        window.validate()?;
        let set = CantorSet::new(window.min[0], window.max[0], ratios)?;
        Self::build(Geometry::FatCantor(Arc::new(set)), window)
    }

    fn build(geometry: Geometry, window: Window) -> Result<Self> {
        window.validate()?;
        if window.dim() > MAX_DIM {
            return Err(invalid(format!(
                "at most {MAX_DIM} coordinates are supported"
            )));
        }
        let mut s = SpaceInstance {
            geometry,
            window,
            tag: SpaceTag(0),
        };
        let text = serde_json::to_string(&s.descriptor()).expect("descriptor serializes");
        s.tag = SpaceTag(fnv1a(text.as_bytes()));
        Ok(s)
    }

    pub fn from_descriptor(d: &SpaceDescriptor) -> Result<Self> {
        let window = d.window.clone();
        match d.kind {
            SpaceKind::EuclideanBox => Self::euclidean(window),
            SpaceKind::WeightedEuclidean => {
                let weight = match d.params.weight.unwrap_or(WeightKind::Sine) {
                    WeightKind::Unit => Weight::UNIT,
                    WeightKind::Sine => Weight {
                        amplitude: d.params.amplitude.unwrap_or(Weight::DEFAULT.amplitude),
                        frequency: d.params.frequency.unwrap_or(Weight::DEFAULT.frequency),
                    },
                };
                Self::weighted(window, weight)
            }
            SpaceKind::BanachBox => {
                let q = d.q.ok_or_else(|| invalid("BanachBox requires \"q\""))?;
                Self::banach(window, q.0)
            }
            SpaceKind::Heisenberg1 => Self::heisenberg(window),
            SpaceKind::FatCantor => {
                let ratios = match &d.params.ratios {
                    Some(r) => r.clone(),
                    None => CantorSet::geometric_ratios(
                        d.params.ratio_base.unwrap_or(DEFAULT_CANTOR_BASE),
                        d.depth.unwrap_or(DEFAULT_CANTOR_DEPTH),
                    ),
                };
                Self::fat_cantor(window, &ratios)
            }
        }
    }

    pub fn descriptor(&self) -> SpaceDescriptor {
        let mut d = SpaceDescriptor {
            kind: self.kind(),
            window: self.window.clone(),
            params: SpaceParams::default(),
            depth: None,
            q: None,
        };
        match &self.geometry {
            Geometry::Weighted(w) => {
                if w.amplitude == 0.0 {
                    d.params.weight = Some(WeightKind::Unit);
                } else {
                    d.params.weight = Some(WeightKind::Sine);
                    d.params.amplitude = Some(w.amplitude);
                    d.params.frequency = Some(w.frequency);
                }
            }
            Geometry::Banach(q) => d.q = Some(Exponent(*q)),
            Geometry::FatCantor(c) => {
                d.depth = Some(c.depth());
                d.params.ratios = Some(c.ratios().to_vec());
            }
            _ => {}
        }
        d
    }

    pub fn kind(&self) -> SpaceKind {
        match self.geometry {
            Geometry::Euclidean => SpaceKind::EuclideanBox,
            Geometry::Weighted(_) => SpaceKind::WeightedEuclidean,
            Geometry::Banach(_) => SpaceKind::BanachBox,
            Geometry::Heisenberg => SpaceKind::Heisenberg1,
            Geometry::FatCantor(_) => SpaceKind::FatCantor,
        }
    }

    pub fn tag(&self) -> SpaceTag {
        self.tag
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn topo_dim(&self) -> usize {
        self.window.dim()
    }

    /// Reference dimension `N` entering `E_{lambda,u}` and the densities.
    pub fn hom_dim(&self) -> f64 {
        match self.geometry {
            Geometry::Heisenberg => heisenberg::HOMOGENEOUS_DIM,
            _ => self.topo_dim() as f64,
        }
    }

    /// Exponent `q` of the norm, `2` for Euclidean variants.
    pub fn norm_exponent(&self) -> Option<f64> {
        match self.geometry {
            Geometry::Euclidean | Geometry::Weighted(_) => Some(2.0),
            Geometry::Banach(q) => Some(q),
            _ => None,
        }
    }

    pub fn weight(&self) -> Option<Weight> {
        match self.geometry {
            Geometry::Weighted(w) => Some(w),
            _ => None,
        }
    }

    pub fn cantor(&self) -> Option<&CantorSet> {
        match &self.geometry {
            Geometry::FatCantor(c) => Some(c),
            _ => None,
        }
    }

    /// Bounds `(a_w, b_w)` of the density of `m` against the reference measure.
    pub fn density_bounds(&self) -> (f64, f64) {
        match self.geometry {
            Geometry::Weighted(w) => w.bounds(),
            _ => (1.0, 1.0),
        }
    }

    fn unsupported(&self, operation: &'static str) -> Error {
        Error::Unsupported {
            operation,
            kind: self.kind(),
        }
    }

    // ---- points -----------------------------------------------------------

    /// A point of the space; must lie in `W` (and in the surviving set for FatCantor).
    pub fn point(&self, coords: &[f64]) -> Result<Point> {
        let p = self.point_unchecked(coords)?;
        if !self.contains(p.coords()) {
            return Err(Error::Domain(format!("{coords:?} is outside the window")));
        }
        Ok(p)
    }

    /// A point with the right dimension that may lie outside `W` (tangent
    /// vectors, dilated points).
    pub fn point_unchecked(&self, coords: &[f64]) -> Result<Point> {
        if coords.len() != self.topo_dim() {
            return Err(Error::Domain(format!(
                "expected {} coordinates, got {}",
                self.topo_dim(),
                coords.len()
            )));
        }
        let mut c = [0.0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Ok(self.wrap(c))
    }

    #[inline]
    pub(crate) fn wrap(&self, coords: Coords) -> Point {
        Point {
            coords,
            dim: self.topo_dim() as u8,
            tag: self.tag,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.window.contains(x)
            && match &self.geometry {
                Geometry::FatCantor(c) => c.contains(x[0]),
                _ => true,
            }
    }

    fn check(&self, x: &Point) -> Result<()> {
        if x.tag != self.tag {
            return Err(Error::Domain("point belongs to a different space".into()));
        }
        Ok(())
    }

    // ---- metric -----------------------------------------------------------

    /// `d(x, y)` on raw coordinates.
    #[inline]
    pub fn metric(&self, a: &Coords, b: &Coords) -> f64 {
        match self.geometry {
            Geometry::Heisenberg => heisenberg::distance(&[a[0], a[1], a[2]], &[b[0], b[1], b[2]]),
            _ => {
                let mut d = [0.0; MAX_DIM];
                for i in 0..self.topo_dim() {
                    d[i] = a[i] - b[i];
                }
                self.norm(&d)
            }
        }
    }

    /// Norm of a tangent vector (the gauge on Heisenberg1).
    #[inline]
    pub fn norm(&self, v: &Coords) -> f64 {
        let n = self.topo_dim();
        match self.geometry {
            Geometry::Heisenberg => heisenberg::gauge(&[v[0], v[1], v[2]]),
            Geometry::Banach(q) => lq_norm(&v[..n], q),
            _ => {
                if n == 1 {
                    v[0].abs()
                } else {
                    v[..n].iter().map(|x| x * x).sum::<f64>().sqrt()
                }
            }
        }
    }

    /// Unchecked distance between points of this space.
    #[inline]
    pub fn dist(&self, x: &Point, y: &Point) -> f64 {
        debug_assert!(x.tag == self.tag && y.tag == self.tag);
        self.metric(&x.coords, &y.coords)
    }

    pub fn distance(&self, x: &Point, y: &Point) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.dist(x, y))
    }

    // ---- measure ----------------------------------------------------------

    /// Density of `m` against Lebesgue/Haar measure.
    #[inline]
    pub fn density(&self, x: &Coords) -> f64 {
        match self.geometry {
            Geometry::Weighted(w) => w.value(x[0]),
            _ => 1.0,
        }
    }

    /// Reference (Lebesgue/Haar) volume of the unit ball, when the space is
    /// a normed space or a Carnot group.
    pub fn unit_ball_volume(&self) -> Option<f64> {
        let n = self.topo_dim();
        match self.geometry {
            Geometry::Euclidean | Geometry::Weighted(_) => Some(lq_ball_volume(n, 2.0)),
            Geometry::Banach(q) => Some(lq_ball_volume(n, q)),
            Geometry::Heisenberg => Some(heisenberg::UNIT_BALL_VOLUME),
            Geometry::FatCantor(_) => None,
        }
    }

    /// Reference volume of a full ball of radius `r`, ignoring `W`.
    pub fn ball_volume(&self, r: f64) -> Option<f64> {
        self.unit_ball_volume()
            .map(|v| v * r.powf(self.reference_dim()))
    }

    /// Scaling exponent of the reference measure under dilations.
    fn reference_dim(&self) -> f64 {
        match self.geometry {
            Geometry::Heisenberg => heisenberg::HOMOGENEOUS_DIM,
            _ => self.topo_dim() as f64,
        }
    }

    /// `m(region intersect W)` in closed form.
    pub fn region_mass(&self, region: &Window) -> f64 {
        let Some(b) = self.window.intersect(region) else {
            return 0.0;
        };
        match &self.geometry {
            Geometry::Weighted(w) => {
                let rest: f64 = (1..b.dim()).map(|i| b.width(i)).product();
                rest * w.integral_1d(b.min[0], b.max[0])
            }
            Geometry::FatCantor(c) => c.mass_between(b.min[0], b.max[0]),
            _ => b.volume(),
        }
    }

    /// `m(W)`, always exact.
    pub fn window_mass(&self) -> MassValue {
        MassValue::exact(self.region_mass(&self.window))
    }

    // ---- sampling ---------------------------------------------------------

    /// Draw from `m` restricted to `region` (assumed inside `W`), normalized.
    pub(crate) fn draw_in_region(&self, region: &Window, rng: &mut StreamRng) -> Coords {
        let mut out = [0.0; MAX_DIM];
        match &self.geometry {
            Geometry::FatCantor(c) => {
                let lo = c.mass_below(region.min[0]);
                let hi = c.mass_below(region.max[0]);
                let u: f64 = rng.random();
                out[0] = c.quantile(lo + u * (hi - lo));
            }
            Geometry::Weighted(w) if w.amplitude != 0.0 => {
                let (_, b) = w.bounds();
                loop {
                    for i in 0..region.dim() {
                        out[i] = region.min[i] + rng.random::<f64>() * region.width(i);
                    }
                    if rng.random::<f64>() * b <= w.value(out[0]) {
                        break;
                    }
                }
            }
            _ => {
                for i in 0..region.dim() {
                    out[i] = region.min[i] + rng.random::<f64>() * region.width(i);
                }
            }
        }
        out
    }

    /// `n` i.i.d. draws from `m|region / m(region)`; deterministic in `seed`
    /// and independent of the worker count.
    pub fn sample_region(
        &self,
        region: &Window,
        seed: u64,
        domain: Domain,
        n: usize,
    ) -> Vec<Point> {
        let region = self
            .window
            .intersect(region)
            .unwrap_or_else(|| self.window.clone());
        let layout = chunk_layout(n, CHUNK);
        par::map_indexed(layout.len(), |k| {
            let (_, _, len) = layout[k];
            let mut rng = stream(seed, domain, k as u64);
            (0..len)
                .map(|_| self.wrap(self.draw_in_region(&region, &mut rng)))
                .collect::<Vec<_>>()
        })
        .concat()
    }

    /// `n` i.i.d. points with law `m|W / m(W)`, plus `m(W)`.
    pub fn sample_window(&self, seed: u64, n: usize) -> Result<(Vec<Point>, MassValue)> {
        if n == 0 {
            return Err(invalid("sample_window needs n >= 1"));
        }
        Ok((
            self.sample_region(&self.window, seed, Domain::Window, n),
            self.window_mass(),
        ))
    }

    /// Uniform reference-measure draw from the unit ball centred at the origin.
    pub(crate) fn draw_unit_ball<R: Rng>(&self, rng: &mut R) -> Coords {
        let n = self.topo_dim();
        let mut w = [0.0; MAX_DIM];
        match self.geometry {
            Geometry::Heisenberg => loop {
                w[0] = 2.0 * rng.random::<f64>() - 1.0;
                w[1] = 2.0 * rng.random::<f64>() - 1.0;
                w[2] = 0.5 * rng.random::<f64>() - 0.25;
                if heisenberg::gauge(&[w[0], w[1], w[2]]) < 1.0 {
                    return w;
                }
            },
            Geometry::Banach(q) if q.is_infinite() => {
                for v in w.iter_mut().take(n) {
                    *v = 2.0 * rng.random::<f64>() - 1.0;
                }
                w
            }
            Geometry::Banach(1.0) => {
                // (E_1..E_n) / (E_1 + .. + E_{n+1}) is uniform on the simplex
                let mut total = 0.0;
                for v in w.iter_mut().take(n) {
                    let e: f64 = rng.sample(Exp1);
                    *v = e;
                    total += e;
                }
                total += rng.sample::<f64, _>(Exp1);
                for v in w.iter_mut().take(n) {
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    *v = sign * *v / total;
                }
                w
            }
            Geometry::Banach(q) if q != 2.0 => loop {
                for v in w.iter_mut().take(n) {
                    *v = 2.0 * rng.random::<f64>() - 1.0;
                }
                if lq_norm(&w[..n], q) < 1.0 {
                    return w;
                }
            },
            _ => {
                if n == 1 {
                    w[0] = 2.0 * rng.random::<f64>() - 1.0;
                    return w;
                }
                let mut norm2 = 0.0;
                for v in w.iter_mut().take(n) {
                    let g: f64 = rng.sample(StandardNormal);
                    *v = g;
                    norm2 += g * g;
                }
                let radius = rng.random::<f64>().powf(1.0 / n as f64) / norm2.sqrt();
                for v in w.iter_mut().take(n) {
                    *v *= radius;
                }
                w
            }
        }
    }

    /// Image of a unit-ball vector `w` in the ball `B_r(center)`:
    /// `center + r w`, or `center * delta_r(w)` on the group.
    #[inline]
    pub(crate) fn place_in_ball(&self, center: &Coords, r: f64, w: &Coords) -> Coords {
        let mut y = [0.0; MAX_DIM];
        match self.geometry {
            Geometry::Heisenberg => {
                let d = heisenberg::dilate(r, &[w[0], w[1], w[2]]);
                let p = heisenberg::mul(&[center[0], center[1], center[2]], &d);
                y[..3].copy_from_slice(&p);
            }
            _ => {
                for i in 0..self.topo_dim() {
                    y[i] = center[i] + r * w[i];
                }
            }
        }
        y
    }

    /// Radial projection of a nonzero tangent vector onto the unit sphere.
    pub fn to_unit_sphere(&self, w: &Coords) -> Coords {
        let n = self.norm(w);
        let mut out = *w;
        match self.geometry {
            Geometry::Heisenberg => {
                let d = heisenberg::dilate(1.0 / n, &[w[0], w[1], w[2]]);
                out[..3].copy_from_slice(&d);
            }
            _ => {
                for v in out.iter_mut().take(self.topo_dim()) {
                    *v /= n;
                }
            }
        }
        out
    }

    /// Coordinate box containing `B_r(center)`.
    pub fn ball_bounding_box(&self, center: &Coords, r: f64) -> Window {
        let n = self.topo_dim();
        let half: Vec<f64> = match self.geometry {
            Geometry::Heisenberg => {
                heisenberg::ball_half_widths(&[center[0], center[1], center[2]], r).to_vec()
            }
            _ => vec![r; n],
        };
        Window {
            min: (0..n).map(|i| center[i] - half[i]).collect(),
            max: (0..n).map(|i| center[i] + half[i]).collect(),
        }
    }

    pub fn ball_inside_window(&self, center: &Coords, r: f64) -> bool {
        self.window.contains_box(&self.ball_bounding_box(center, r))
    }

    /// Box containing every point within distance `r` of `region`, clipped to `W`.
    pub fn neighbourhood(&self, region: &Window, r: f64) -> Window {
        let pad: Vec<f64> = match self.geometry {
            Geometry::Heisenberg => {
                let zmax = (0..2)
                    .map(|i| region.min[i].abs().max(region.max[i].abs()))
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt();
                vec![r, r, 0.25 * r * r + 0.5 * zmax * r]
            }
            _ => vec![r; self.topo_dim()],
        };
        let grown = region.expand(&pad);
        self.window
            .intersect(&grown)
            .unwrap_or_else(|| self.window.clone())
    }

    /// Draw `y` from `m` restricted to `B_r(center) intersect W`, normalized.
    /// Works on every variant; FatCantor uses exact inversion of the
    /// surviving-length distribution. Returns `None` after too many
    /// rejections (a ball that barely meets `W`).
    pub(crate) fn draw_local(
        &self,
        center: &Coords,
        r: f64,
        rng: &mut StreamRng,
    ) -> Option<Coords> {
        if let Geometry::FatCantor(c) = &self.geometry {
            let lo = c.mass_below((center[0] - r).max(self.window.min[0]));
            let hi = c.mass_below((center[0] + r).min(self.window.max[0]));
            if hi <= lo {
                return None;
            }
            let u: f64 = rng.random();
            return Some([c.quantile(lo + u * (hi - lo)), 0.0, 0.0, 0.0]);
        }
        let (_, b) = self.density_bounds();
        for _ in 0..100_000 {
            let w = self.draw_unit_ball(rng);
            let y = self.place_in_ball(center, r, &w);
            if !self.window.contains(&y[..self.topo_dim()]) {
                continue;
            }
            if b == 1.0 || rng.random::<f64>() * b <= self.density(&y) {
                return Some(y);
            }
        }
        None
    }

    /// `n` i.i.d. points with law `m|B_r(center) intersect W` normalized, plus its mass.
    pub fn sample_ball(
        &self,
        center: &Point,
        r: f64,
        seed: u64,
        n: usize,
    ) -> Result<(Vec<Point>, MassValue)> {
        self.check(center)?;
        if matches!(self.geometry, Geometry::FatCantor(_)) {
            return Err(self.unsupported("sample_ball"));
        }
        if !(r > 0.0) || n == 0 {
            return Err(invalid("sample_ball needs r > 0 and n >= 1"));
        }
        let c = center.coords;
        let layout = chunk_layout(n, CHUNK);
        let chunks = par::map_indexed(layout.len(), |k| {
            let (_, _, len) = layout[k];
            let mut rng = stream(seed, Domain::Ball, k as u64);
            let mut pts = Vec::with_capacity(len);
            while pts.len() < len {
                match self.draw_local(&c, r, &mut rng) {
                    Some(y) => pts.push(self.wrap(y)),
                    None => {
                        return Err(Error::Precondition("ball does not meet the window".into()))
                    }
                }
            }
            Ok(pts)
        });
        let mut points = Vec::with_capacity(n);
        for chunk in chunks {
            points.extend(chunk?);
        }
        let mass = self.ball_measure(
            center,
            r,
            McBudget {
                samples: n.max(20_000),
                seed,
            },
        );
        Ok((points, mass))
    }

    /// Closed-form `m(B_r(center) intersect W)` where one exists.
    pub fn ball_measure_exact(&self, center: &Coords, r: f64) -> Option<f64> {
        let n = self.topo_dim();
        match &self.geometry {
            Geometry::FatCantor(c) => {
                let a = (center[0] - r).max(self.window.min[0]);
                let b = (center[0] + r).min(self.window.max[0]);
                Some(c.mass_between(a, b))
            }
            _ if n == 1 => {
                let a = (center[0] - r).max(self.window.min[0]);
                let b = (center[0] + r).min(self.window.max[0]);
                if b <= a {
                    return Some(0.0);
                }
                Some(match &self.geometry {
                    Geometry::Weighted(w) => w.integral_1d(a, b),
                    _ => b - a,
                })
            }
            Geometry::Banach(q) if q.is_infinite() => {
                Some(self.region_mass(&self.ball_bounding_box(center, r)))
            }
            Geometry::Euclidean if n == 2 => Some(planar::disk_rect_area(
                center[0],
                center[1],
                r,
                self.window.min[0],
                self.window.max[0],
                self.window.min[1],
                self.window.max[1],
            )),
            Geometry::Banach(q) if *q == 2.0 && n == 2 => Some(planar::disk_rect_area(
                center[0],
                center[1],
                r,
                self.window.min[0],
                self.window.max[0],
                self.window.min[1],
                self.window.max[1],
            )),
            Geometry::Weighted(w) if w.amplitude != 0.0 => {
                if !self.ball_inside_window(center, r) {
                    return None;
                }
                let k = 2.0 * std::f64::consts::PI * w.frequency;
                let vol = self.ball_volume(r)?;
                Some(vol * (1.0 + w.amplitude * (k * center[0]).sin() * ball_cos_mean(n, k * r)))
            }
            _ => {
                if self.ball_inside_window(center, r) {
                    self.ball_volume(r)
                } else {
                    None
                }
            }
        }
    }

    /// `m(B_r(center) intersect W)`: exact where a closed form exists,
    /// otherwise a Monte Carlo average of `1_W * density` over uniform
    /// draws from the full ball.
    pub fn ball_measure(&self, center: &Point, r: f64, budget: McBudget) -> MassValue {
        self.ball_measure_at(&center.coords, r, budget)
    }

    pub(crate) fn ball_measure_at(&self, center: &Coords, r: f64, budget: McBudget) -> MassValue {
        if let Some(v) = self.ball_measure_exact(center, r) {
            return MassValue::exact(v);
        }
        let vol = self
            .ball_volume(r)
            .expect("non-Cantor spaces have a reference ball volume");
        let n = budget.samples.max(2);
        let layout = chunk_layout(n, CHUNK);
        let parts = par::map_indexed(layout.len(), |k| {
            let (_, _, len) = layout[k];
            let mut rng = stream(budget.seed, Domain::BallMass, k as u64);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..len {
                let w = self.draw_unit_ball(&mut rng);
                let y = self.place_in_ball(center, r, &w);
                let f = if self.window.contains(&y[..self.topo_dim()]) {
                    self.density(&y)
                } else {
                    0.0
                };
                s += f;
                s2 += f * f;
            }
            (s, s2)
        });
        let (s, s2) = parts.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
        let nf = n as f64;
        let mean = s / nf;
        let var = ((s2 / nf - mean * mean) * nf / (nf - 1.0)).max(0.0);
        MassValue::estimated(vol * mean, vol * (var / nf).sqrt())
    }

    // ---- dilations --------------------------------------------------------

    /// Dilation about `base` by `s`, scaling distances from `base` by `s`.
    /// The image may leave `W`.
    pub fn dilate(&self, base: &Point, x: &Point, s: f64) -> Result<Point> {
        self.check(base)?;
        self.check(x)?;
        if !(s > 0.0) {
            return Err(invalid("dilation factor must be positive"));
        }
        let (b, v) = (base.coords, x.coords);
        let mut out = [0.0; MAX_DIM];
        match self.geometry {
            Geometry::Euclidean | Geometry::Banach(_) => {
                for i in 0..self.topo_dim() {
                    out[i] = b[i] + s * (v[i] - b[i]);
                }
            }
            Geometry::Heisenberg => {
                let bh = [b[0], b[1], b[2]];
                let rel = heisenberg::mul(&heisenberg::inv(&bh), &[v[0], v[1], v[2]]);
                let p = heisenberg::mul(&bh, &heisenberg::dilate(s, &rel));
                out[..3].copy_from_slice(&p);
            }
            _ => return Err(self.unsupported("dilate")),
        }
        Ok(self.wrap(out))
    }

    /// Tangent chart `phi_delta(y)`: `(y - x) / delta` on normed spaces,
    /// `delta_{1/delta}(x^-1 y)` on the group.
    pub fn tangent_chart(&self, x: &Coords, y: &Coords, delta: f64) -> Result<Coords> {
        let mut out = [0.0; MAX_DIM];
        match self.geometry {
            Geometry::Euclidean | Geometry::Banach(_) => {
                for i in 0..self.topo_dim() {
                    out[i] = (y[i] - x[i]) / delta;
                }
            }
            Geometry::Heisenberg => {
                let rel =
                    heisenberg::mul(&heisenberg::inv(&[x[0], x[1], x[2]]), &[y[0], y[1], y[2]]);
                let d = heisenberg::dilate(1.0 / delta, &rel);
                out[..3].copy_from_slice(&d);
            }
            _ => return Err(self.unsupported("tangent_chart")),
        }
        Ok(out)
    }

    /// True for the variants whose tangent space is the space itself
    /// (normed spaces and the Heisenberg group).
    pub fn has_tangent_structure(&self) -> bool {
        matches!(
            self.geometry,
            Geometry::Euclidean | Geometry::Banach(_) | Geometry::Heisenberg
        )
    }

    pub fn supports_ball_sampling(&self) -> bool {
        !matches!(self.geometry, Geometry::FatCantor(_))
    }
}

/// `l^q` norm, `q = inf` allowed.
#[inline]
pub fn lq_norm(v: &[f64], q: f64) -> f64 {
    if q.is_infinite() {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    } else if q == 1.0 {
        v.iter().map(|x| x.abs()).sum()
    } else if q == 2.0 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    } else {
        v.iter().map(|x| x.abs().powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

/// Hoelder conjugate of `q`.
pub fn dual_exponent(q: f64) -> f64 {
    if q.is_infinite() {
        1.0
    } else if q == 1.0 {
        f64::INFINITY
    } else {
        q / (q - 1.0)
    }
}

/// Lebesgue volume of the unit `l^q` ball in `R^n`: `(2 G(1+1/q))^n / G(1+n/q)`.
pub fn lq_ball_volume(n: usize, q: f64) -> f64 {
    if q.is_infinite() {
        return 2f64.powi(n as i32);
    }
    (2.0 * libm::tgamma(1.0 + 1.0 / q)).powi(n as i32) / libm::tgamma(1.0 + n as f64 / q)
}

/// `E[cos(s t_1)]` for `t` uniform in the Euclidean unit ball of `R^n`.
/// With `t_1 = sin(theta)` the marginal is `cos^n(theta)`, a smooth periodic
/// integrand for which composite Simpson converges very fast.
pub(crate) fn ball_cos_mean(n: usize, s: f64) -> f64 {
    const STEPS: usize = 1024;
    let h = std::f64::consts::PI / STEPS as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..=STEPS {
        let th = -std::f64::consts::FRAC_PI_2 + i as f64 * h;
        let wgt = if i == 0 || i == STEPS {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let c = th.cos().max(0.0).powi(n as i32);
        num += wgt * c * (s * th.sin()).cos();
        den += wgt * c;
    }
    num / den
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
