//! Exact areas and lengths used by the closed-form ball masses.

/// Antiderivative of `sqrt(r^2 - x^2)` on `[-r, r]`.
fn circ_primitive(x: f64, r: f64) -> f64 {
    let x = x.clamp(-r, r);
    let s = (r * r - x * x).max(0.0).sqrt();
    0.5 * (x * s + r * r * (x / r).clamp(-1.0, 1.0).asin())
}

#[derive(Clone, Copy)]
enum Edge {
    Const(f64),
    Arc(f64),
}

/// Area of the disk of radius `r` centred at `(cx, cy)` intersected with the
/// rectangle `[x0, x1] x [y0, y1]`. Exact up to rounding: the integrand
/// `len(x)` is piecewise either constant or `+-sqrt(r^2 - x^2)` between the
/// breakpoints collected below.
pub fn disk_rect_area(cx: f64, cy: f64, r: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let (x0, x1, y0, y1) = (x0 - cx, x1 - cx, y0 - cy, y1 - cy);
    let lo = x0.max(-r);
    let hi = x1.min(r);
    if hi <= lo || y1 <= -r || y0 >= r {
        return 0.0;
    }
    let mut cuts = vec![lo, hi];
    for y in [y0, y1] {
        if y.abs() < r {
            let c = (r * r - y * y).sqrt();
            for v in [-c, c] {
                if v > lo && v < hi {
                    cuts.push(v);
                }
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    let mut area = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let m = 0.5 * (a + b);
        let s = (r * r - m * m).max(0.0).sqrt();
        let top = if s < y1 {
            Edge::Arc(1.0)
        } else {
            Edge::Const(y1)
        };
        let bot = if -s > y0 {
            Edge::Arc(-1.0)
        } else {
            Edge::Const(y0)
        };
        let top_m = match top {
            Edge::Arc(_) => s,
            Edge::Const(c) => c,
        };
        let bot_m = match bot {
            Edge::Arc(_) => -s,
            Edge::Const(c) => c,
        };
        if top_m <= bot_m {
            continue;
        }
        let integral = |e: Edge| match e {
            Edge::Const(c) => c * (b - a),
            Edge::Arc(sign) => sign * (circ_primitive(b, r) - circ_primitive(a, r)),
        };
        area += integral(top) - integral(bot);
    }
    area.max(0.0)
}
