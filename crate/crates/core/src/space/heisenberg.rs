//! First Heisenberg group in exponential coordinates `(x1, x2, t)` with
//! product `(a, b) -> (a1 + b1, a2 + b2, at + bt + (a1 b2 - a2 b1) / 2)`.
//!
//! The Korányi gauge `(|z|^4 + 16 t^2)^(1/4)` is homogeneous of degree one
//! under `delta_s(z, t) = (s z, s^2 t)` and `d(x, y) = |y^-1 x|` is a
//! left-invariant metric. Lebesgue measure is the Haar measure and scales
//! by `s^4`, so the homogeneous dimension is 4.

pub type H = [f64; 3];

/// Haar volume of the unit gauge ball: `pi * int_0^1 rho sqrt(1 - rho^4) d rho = pi^2 / 8`.
pub const UNIT_BALL_VOLUME: f64 = std::f64::consts::PI * std::f64::consts::PI / 8.0;

pub const HOMOGENEOUS_DIM: f64 = 4.0;

#[inline]
pub fn mul(a: &H, b: &H) -> H {
    [
        a[0] + b[0],
        a[1] + b[1],
        a[2] + b[2] + 0.5 * (a[0] * b[1] - a[1] * b[0]),
    ]
}

#[inline]
pub fn inv(a: &H) -> H {
    [-a[0], -a[1], -a[2]]
}

#[inline]
pub fn dilate(s: f64, w: &H) -> H {
    [s * w[0], s * w[1], s * s * w[2]]
}

#[inline]
pub fn gauge(w: &H) -> f64 {
    let z2 = w[0] * w[0] + w[1] * w[1];
    (z2 * z2 + 16.0 * w[2] * w[2]).sqrt().sqrt()
}

/// `|y^-1 x|`, written out to avoid building the intermediate element.
#[inline]
pub fn distance(x: &H, y: &H) -> f64 {
    let d0 = x[0] - y[0];
    let d1 = x[1] - y[1];
    let dt = x[2] - y[2] - 0.5 * (y[0] * x[1] - y[1] * x[0]);
    gauge(&[d0, d1, dt])
}

/// Horizontal gradient `(X1 f, X2 f)` from the Euclidean partials, with
/// `X1 = d1 - (x2 / 2) dt` and `X2 = d2 + (x1 / 2) dt`.
#[inline]
pub fn horizontal(x: &H, d1: f64, d2: f64, dt: f64) -> [f64; 2] {
    [d1 - 0.5 * x[1] * dt, d2 + 0.5 * x[0] * dt]
}

/// Horizontal gradient of the gauge itself at `w != 0`.
pub fn gauge_horizontal_gradient(w: &H) -> [f64; 2] {
    let n = gauge(w);
    if n == 0.0 {
        return [0.0, 0.0];
    }
    let z2 = w[0] * w[0] + w[1] * w[1];
    let n3 = n * n * n;
    let d1 = z2 * w[0] / n3;
    let d2 = z2 * w[1] / n3;
    let dt = 8.0 * w[2] / n3;
    horizontal(w, d1, d2, dt)
}

/// Coordinate half-widths of a box containing `center * B_r(e)`.
pub fn ball_half_widths(center: &H, r: f64) -> [f64; 3] {
    let cz = (center[0] * center[0] + center[1] * center[1]).sqrt();
    [r, r, 0.25 * r * r + 0.5 * cz * r]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertical_unit_has_gauge_two() {
        assert!((distance(&[0.0, 0.0, 0.0], &[0.0, 0.0, 1.0]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn group_axioms() {
        let a = [0.3, -1.2, 0.7];
        let b = [2.0, 0.5, -0.1];
        let c = [-0.4, 0.9, 1.3];
        let lhs = mul(&mul(&a, &b), &c);
        let rhs = mul(&a, &mul(&b, &c));
        for i in 0..3 {
            assert!((lhs[i] - rhs[i]).abs() < 1e-14);
        }
        assert_eq!(mul(&a, &inv(&a)), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn gauge_gradient_matches_finite_differences() {
        let w = [0.4, -0.3, 0.2];
        let g = gauge_horizontal_gradient(&w);
        let h = 1e-6;
        // X1 is the derivative along s -> w * (s, 0, 0)
        let f = |e: H| gauge(&mul(&w, &e));
        let x1 = (f([h, 0.0, 0.0]) - f([-h, 0.0, 0.0])) / (2.0 * h);
        let x2 = (f([0.0, h, 0.0]) - f([0.0, -h, 0.0])) / (2.0 * h);
        assert!((g[0] - x1).abs() < 1e-8, "{} vs {}", g[0], x1);
        assert!((g[1] - x2).abs() < 1e-8, "{} vs {}", g[1], x2);
    }
}
