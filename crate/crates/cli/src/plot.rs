//! Static SVG of a rescaled curve: `log10 M_hat` and `lambda^p M_hat`
//! against `log10 lambda`, with one-stderr bars. The output is a pure
//! function of the CSV bytes.

use std::fmt::Write as _;
use std::path::Path;

use bvylab::estimator::CurveRecord;
use serde::Serialize;

use crate::error::CliError;

/// The plotted series, kept so tests can check values instead of pixels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotData {
    pub log10_lambda: Vec<f64>,
    /// `None` where `M_hat = 0` (no point on a log axis).
    pub log10_m: Vec<Option<f64>>,
    pub log10_m_bars: Vec<Option<(f64, f64)>>,
    pub rescaled: Vec<f64>,
    pub rescaled_bars: Vec<(f64, f64)>,
}

/// Parse a curve CSV. Errors carry the 1-based line of the offending record.
pub fn parse_curve_csv(bytes: &[u8]) -> Result<Vec<CurveRecord>, CliError> {
    let mut rdr = csv::Reader::from_reader(bytes);
    let mut rows = Vec::new();
    for rec in rdr.deserialize::<CurveRecord>() {
        let rec = rec.map_err(|e| CliError::Parse {
            line: e.position().map_or(1, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rows.len() as u64 + 2;
        let ok = rec.lambda > 0.0
            && rec.lambda.is_finite()
            && rec.m_hat >= 0.0
            && rec.m_stderr >= 0.0
            && rec.rescaled.is_finite();
        if !ok {
            return Err(CliError::Parse {
                line,
                message: "lambda must be positive and M_hat, M_stderr non-negative".into(),
            });
        }
        rows.push(rec);
    }
    if rows.is_empty() {
        return Err(CliError::Parse {
            line: 1,
            message: "curve CSV has no data rows".into(),
        });
    }
    Ok(rows)
}

pub fn plot_data(rows: &[CurveRecord]) -> PlotData {
    let mut d = PlotData {
        log10_lambda: Vec::new(),
        log10_m: Vec::new(),
        log10_m_bars: Vec::new(),
        rescaled: Vec::new(),
        rescaled_bars: Vec::new(),
    };
    for r in rows {
        d.log10_lambda.push(r.lambda.log10());
        if r.m_hat > 0.0 {
            d.log10_m.push(Some(r.m_hat.log10()));
            let lo = (r.m_hat - r.m_stderr).max(r.m_hat * 1e-3);
            d.log10_m_bars
                .push(Some((lo.log10(), (r.m_hat + r.m_stderr).log10())));
        } else {
            d.log10_m.push(None);
            d.log10_m_bars.push(None);
        }
        // lambda^p is rescaled / M_hat; without a positive M_hat there is no bar
        let half = if r.m_hat > 0.0 {
            r.rescaled / r.m_hat * r.m_stderr
        } else {
            0.0
        };
        d.rescaled.push(r.rescaled);
        d.rescaled_bars.push((r.rescaled - half, r.rescaled + half));
    }
    d
}

/// Read `curve_csv`, write the SVG to `out_svg`, return what was plotted.
pub fn emit_plot(curve_csv: &Path, out_svg: &Path) -> Result<PlotData, CliError> {
    let bytes = std::fs::read(curve_csv).map_err(|e| CliError::io(curve_csv, e))?;
    let rows = parse_curve_csv(&bytes)?;
    let data = plot_data(&rows);
    std::fs::write(out_svg, render_svg(&data)).map_err(|e| CliError::io(out_svg, e))?;
    Ok(data)
}

const W: f64 = 640.0;
const PANEL_H: f64 = 260.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const GAP: f64 = 60.0;

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in vals.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let pad = lo.abs().max(1.0) * 0.05;
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

struct Panel {
    top: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Panel {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }
    fn py(&self, y: f64) -> f64 {
        self.top + PANEL_H - (y - self.y.0) / (self.y.1 - self.y.0) * PANEL_H
    }
}

fn frame(s: &mut String, p: &Panel, title: &str) {
    let _ = writeln!(
        s,
        r##"<rect x="{LEFT:.1}" y="{:.1}" width="{:.1}" height="{PANEL_H:.1}" fill="none" stroke="#444"/>"##,
        p.top,
        W - LEFT - RIGHT
    );
    let _ = writeln!(
        s,
        r#"<text x="{LEFT:.1}" y="{:.1}" font-size="13">{title}</text>"#,
        p.top - 8.0
    );
    for (val, anchor_y) in [(p.y.0, p.top + PANEL_H), (p.y.1, p.top + 10.0)] {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{anchor_y:.1}" font-size="11" text-anchor="end">{val:.4}</text>"#,
            LEFT - 6.0
        );
    }
    let first = p.x.0.ceil() as i64;
    let last = p.x.1.floor() as i64;
    for k in first..=last {
        let x = p.px(k as f64);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#ccc"/>"##,
            p.top,
            p.top + PANEL_H
        );
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{:.1}" font-size="11" text-anchor="middle">1e{k}</text>"#,
            p.top + PANEL_H + 14.0
        );
    }
}

fn series(s: &mut String, p: &Panel, pts: &[(f64, f64, f64, f64)], colour: &str) {
    let path: Vec<String> = pts
        .iter()
        .map(|(x, y, _, _)| format!("{:.2},{:.2}", p.px(*x), p.py(*y)))
        .collect();
    if path.len() > 1 {
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        );
    }
    for (x, y, lo, hi) in pts {
        let (cx, cy) = (p.px(*x), p.py(*y));
        let _ = writeln!(
            s,
            r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="{colour}"/>"#,
            p.py(*lo),
            p.py(*hi)
        );
        let _ = writeln!(
            s,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="3" fill="{colour}"/>"#
        );
    }
}

pub fn render_svg(d: &PlotData) -> String {
    let x = range(d.log10_lambda.iter().copied());
    let logm: Vec<(f64, f64, f64, f64)> = d
        .log10_lambda
        .iter()
        .zip(d.log10_m.iter().zip(&d.log10_m_bars))
        .filter_map(|(x, (y, b))| {
            let (lo, hi) = (*b)?;
            Some((*x, (*y)?, lo, hi))
        })
        .collect();
    let resc: Vec<(f64, f64, f64, f64)> = d
        .log10_lambda
        .iter()
        .zip(d.rescaled.iter().zip(&d.rescaled_bars))
        .map(|(x, (y, b))| (*x, *y, b.0, b.1))
        .collect();
    let top = Panel {
        top: TOP,
        x,
        y: range(logm.iter().flat_map(|t| [t.2, t.3])),
    };
    let bottom = Panel {
        top: TOP + PANEL_H + GAP,
        x,
        y: range(resc.iter().flat_map(|t| [t.2, t.3])),
    };
    let h = bottom.top + PANEL_H + 40.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W:.0}" height="{h:.0}" viewBox="0 0 {W:.0} {h:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    frame(&mut s, &top, "log10 M_hat vs lambda");
    series(&mut s, &top, &logm, "#1f5fa8");
    frame(&mut s, &bottom, "lambda^p M_hat vs lambda");
    series(&mut s, &bottom, &resc, "#b8442c");
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">lambda (log scale)</text>"#,
        LEFT + (W - LEFT - RIGHT) / 2.0,
        h - 8.0
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "lambda,M_hat,M_stderr,rescaled,estimator,n_outer,n_inner,seed\n";

    #[test]
    fn golden_series_is_flat() {
        let mut csv = HEADER.to_string();
        for l in [10.0f64, 100.0, 1000.0] {
            let m = 2.0 / (l * l) - 1.0 / l.powi(4);
            csv += &format!("{l},{m},{},{},direct,1000000,1,7\n", m * 1e-3, l * l * m);
        }
        let rows = parse_curve_csv(csv.as_bytes()).unwrap();
        let d = plot_data(&rows);
        assert!(d.rescaled.iter().all(|v| (v - 2.0).abs() < 0.011));
        assert_eq!(d.log10_lambda, vec![1.0, 2.0, 3.0]);
        let svg = render_svg(&d);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(
            svg,
            render_svg(&plot_data(&parse_curve_csv(csv.as_bytes()).unwrap()))
        );
    }

    #[test]
    fn empty_and_malformed_inputs() {
        let e = parse_curve_csv(HEADER.as_bytes()).unwrap_err();
        assert!(matches!(e, CliError::Parse { line: 1, .. }));
        assert!(parse_curve_csv(b"").is_err());
        let bad = format!("{HEADER}10,0.01,0.001,1,direct,10,1,0\n20,abc,0.001,1,direct,10,1,0\n");
        match parse_curve_csv(bad.as_bytes()).unwrap_err() {
            CliError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let neg = format!("{HEADER}-1,0.01,0.001,1,direct,10,1,0\n");
        assert!(matches!(
            parse_curve_csv(neg.as_bytes()),
            Err(CliError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn single_row_and_zero_mass() {
        let one = format!("{HEADER}10,0.02,0.001,2,localized,100,8,0\n");
        let d = plot_data(&parse_curve_csv(one.as_bytes()).unwrap());
        assert_eq!(d.rescaled, vec![2.0]);
        assert!(render_svg(&d).contains("<circle"));
        let zero = format!("{HEADER}10,0,0,0,direct,100,1,0\n");
        let d = plot_data(&parse_curve_csv(zero.as_bytes()).unwrap());
        assert_eq!(d.log10_m, vec![None]);
        render_svg(&d);
    }
}
