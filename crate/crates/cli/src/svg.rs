//! Self-contained SVG 1.1 plots.

use qpt_core::analysis::{FssResult, PhaseDiagram};
use std::fmt::Write;

const WIDTH: f64 = 720.0;
const PANEL_H: f64 = 220.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 44.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open(height: f64) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" \
         width=\"{WIDTH}\" height=\"{height}\" viewBox=\"0 0 {WIDTH} {height}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) =
        values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-300 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.04 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

/// Rectangle of data space mapped onto a pixel box.
struct Frame {
    left: f64,
    top: f64,
    w: f64,
    h: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x.0) / (self.x.1 - self.x.0) * self.w
    }

    fn py(&self, y: f64) -> f64 {
        self.top + self.h - (y - self.y.0) / (self.y.1 - self.y.0) * self.h
    }

    fn axes(&self, out: &mut String, x_label: &str, y_label: &str) {
        let _ = writeln!(
            out,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"black\"/>",
            self.left, self.top, self.w, self.h
        );
        for i in 0..=4 {
            let t = i as f64 / 4.0;
            let xv = self.x.0 + t * (self.x.1 - self.x.0);
            let yv = self.y.0 + t * (self.y.1 - self.y.0);
            let (xp, yp) = (self.px(xv), self.py(yv));
            let bottom = self.top + self.h;
            let _ = writeln!(
                out,
                "<line x1=\"{xp:.2}\" y1=\"{bottom:.2}\" x2=\"{xp:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\
                 <text x=\"{xp:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
                bottom + 5.0,
                bottom + 18.0,
                tick(xv)
            );
            let _ = writeln!(
                out,
                "<line x1=\"{:.2}\" y1=\"{yp:.2}\" x2=\"{:.2}\" y2=\"{yp:.2}\" stroke=\"black\"/>\
                 <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
                self.left - 5.0,
                self.left,
                self.left - 8.0,
                yp + 4.0,
                tick(yv)
            );
        }
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
            self.left + self.w / 2.0,
            self.top + self.h + 36.0,
            escape(x_label)
        );
        let (lx, ly) = (self.left - 62.0, self.top + self.h / 2.0);
        let _ = writeln!(
            out,
            "<text x=\"{lx:.2}\" y=\"{ly:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 {lx:.2} {ly:.2})\">{}</text>",
            escape(y_label)
        );
    }

    /// Polyline through the finite points; NaN breaks the line.
    fn polyline(&self, out: &mut String, pts: &[(f64, f64)], color: &str, width: f64) {
        for run in pts.split(|p| !p.0.is_finite() || !p.1.is_finite()) {
            if run.is_empty() {
                continue;
            }
            let coords: Vec<String> =
                run.iter().map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y))).collect();
            let _ = writeln!(
                out,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\"/>",
                coords.join(" ")
            );
        }
    }
}

fn tick(v: f64) -> String {
    if v == 0.0 || (1e-3..1e4).contains(&v.abs()) {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

/// One stacked panel per series, sharing the x axis.
pub fn line_panels(title: &str, x_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let height = MARGIN_T + series.len().max(1) as f64 * (PANEL_H + MARGIN_B);
    let mut out = open(height);
    let _ = writeln!(out, "<text x=\"{:.2}\" y=\"22\" text-anchor=\"middle\">{}</text>", WIDTH / 2.0, escape(title));
    let x = bounds(series.iter().flat_map(|s| s.1.iter().map(|p| p.0)));
    for (i, (name, pts)) in series.iter().enumerate() {
        let frame = Frame {
            left: MARGIN_L,
            top: MARGIN_T + i as f64 * (PANEL_H + MARGIN_B),
            w: WIDTH - MARGIN_L - MARGIN_R,
            h: PANEL_H - 20.0,
            x,
            y: bounds(pts.iter().map(|p| p.1)),
        };
        frame.axes(&mut out, if i + 1 == series.len() { x_label } else { "" }, name);
        frame.polyline(&mut out, pts, COLORS[i % COLORS.len()], 1.5);
    }
    out.push_str("</svg>\n");
    out
}

/// Extremum values against `1 / N^2` with the fitted line.
pub fn scaling_plot(title: &str, fit: &FssResult) -> String {
    let height = MARGIN_T + PANEL_H + MARGIN_B + 20.0;
    let mut out = open(height);
    let _ = writeln!(out, "<text x=\"{:.2}\" y=\"22\" text-anchor=\"middle\">{}</text>", WIDTH / 2.0, escape(title));
    let pts: Vec<(f64, f64)> = fit.points.iter().map(|p| (1.0 / (p.0 as f64).powi(2), p.2)).collect();
    let x_hi = pts.iter().map(|p| p.0).fold(0.0, f64::max) * 1.08;
    let frame = Frame {
        left: MARGIN_L,
        top: MARGIN_T,
        w: WIDTH - MARGIN_L - MARGIN_R,
        h: PANEL_H,
        x: (0.0, if x_hi > 0.0 { x_hi } else { 1.0 }),
        y: bounds(pts.iter().map(|p| p.1).chain([fit.intercept])),
    };
    frame.axes(&mut out, "1/N^2", "extremum value");
    frame.polyline(
        &mut out,
        &[(0.0, fit.intercept), (frame.x.1, fit.intercept + fit.slope * frame.x.1)],
        COLORS[1],
        1.0,
    );
    for (p, (n, _, _)) in pts.iter().zip(&fit.points) {
        let _ = writeln!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"{}\"><title>N = {n}</title></circle>",
            frame.px(p.0),
            frame.py(p.1),
            COLORS[0]
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Diverging colour for `t` in [-1, 1]: blue, white, red.
fn diverging(t: f64) -> String {
    let t = t.clamp(-1.0, 1.0);
    let (r, g, b) = if t >= 0.0 {
        (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
    } else {
        (255.0 * (1.0 + t), 255.0 * (1.0 + t), 255.0)
    };
    format!("#{:02x}{:02x}{:02x}", r as u8, g as u8, b as u8)
}

/// Heat map of the derivative with the ridge lines drawn on top.
pub fn heat_map(title: &str, pd: &PhaseDiagram) -> String {
    let height = MARGIN_T + 2.0 * PANEL_H + MARGIN_B;
    let mut out = open(height);
    let _ = writeln!(out, "<text x=\"{:.2}\" y=\"22\" text-anchor=\"middle\">{}</text>", WIDTH / 2.0, escape(title));
    let half = |v: &[f64]| if v.len() > 1 { 0.5 * (v[1] - v[0]) } else { 0.5 };
    let (hx, hy) = (half(&pd.xs), half(&pd.ys));
    let frame = Frame {
        left: MARGIN_L,
        top: MARGIN_T,
        w: WIDTH - MARGIN_L - MARGIN_R,
        h: 2.0 * PANEL_H,
        x: (pd.xs[0] - hx, pd.xs[pd.xs.len() - 1] + hx),
        y: (pd.ys[0] - hy, pd.ys[pd.ys.len() - 1] + hy),
    };
    // colour scale clipped at the 98th percentile of |value|
    let mut mags: Vec<f64> = pd.values.iter().flatten().map(|v| v.abs()).filter(|v| v.is_finite()).collect();
    mags.sort_by(f64::total_cmp);
    let scale = mags.get((mags.len() as f64 * 0.98) as usize).or(mags.last()).copied().unwrap_or(1.0).max(1e-300);
    let (cw, ch) =
        (frame.px(pd.xs[0] + hx) - frame.px(pd.xs[0] - hx), frame.py(pd.ys[0] - hy) - frame.py(pd.ys[0] + hy));
    for (ix, col) in pd.values.iter().enumerate() {
        for (iy, v) in col.iter().enumerate() {
            let fill = if v.is_finite() { diverging(v / scale) } else { "#808080".into() };
            let _ = writeln!(
                out,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{fill}\"/>",
                frame.px(pd.xs[ix] - hx),
                frame.py(pd.ys[iy] + hy),
                cw + 0.3,
                ch + 0.3
            );
        }
    }
    for line in &pd.ridges {
        if line.len() > 1 {
            frame.polyline(&mut out, line, "black", 1.2);
        }
    }
    frame.axes(&mut out, &pd.x_name, &pd.y_name);
    out.push_str("</svg>\n");
    out
}
