//! Minimal SVG emitters: scatter plots, density heatmaps, ROC polylines.
//! CSV is the canonical output; these are conveniences for eyeballing.

use std::fmt::Write;

const W: f64 = 480.0;
const H: f64 = 480.0;
const PAD: f64 = 40.0;

fn header(out: &mut String) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
    );
    let _ = writeln!(out, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
}

fn frame(out: &mut String) {
    let _ = writeln!(
        out,
        "<rect x=\"{PAD}\" y=\"{PAD}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>",
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
}

fn scale(v: f64, lo: f64, hi: f64) -> f64 {
    PAD + (v - lo) / (hi - lo) * (W - 2.0 * PAD)
}

fn scale_y(v: f64, lo: f64, hi: f64) -> f64 {
    H - PAD - (v - lo) / (hi - lo) * (H - 2.0 * PAD)
}

/// Scatter of 2-D points; anomalous ones in red.
pub fn scatter(points: &[(f64, f64, bool)]) -> String {
    let mut out = String::new();
    header(&mut out);
    let (mut xlo, mut xhi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut ylo, mut yhi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y, _) in points {
        xlo = xlo.min(x);
        xhi = xhi.max(x);
        ylo = ylo.min(y);
        yhi = yhi.max(y);
    }
    let mx = 0.05 * (xhi - xlo).max(1e-12);
    let my = 0.05 * (yhi - ylo).max(1e-12);
    (xlo, xhi, ylo, yhi) = (xlo - mx, xhi + mx, ylo - my, yhi + my);
    for &(x, y, anomalous) in points {
        let _ = writeln!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2\" fill=\"{}\" fill-opacity=\"0.6\"/>",
            scale(x, xlo, xhi),
            scale_y(y, ylo, yhi),
            if anomalous { "#d62728" } else { "#1f77b4" }
        );
    }
    frame(&mut out);
    out.push_str("</svg>\n");
    out
}

/// Heatmap over a regular grid; `values` in row-major order (y fastest)
/// matching `nodes x nodes` cells.
pub fn heatmap(nodes: usize, values: &[f64]) -> String {
    let mut out = String::new();
    header(&mut out);
    let vmax = values.iter().cloned().fold(0.0f64, f64::max).max(1e-300);
    let cell_w = (W - 2.0 * PAD) / nodes as f64;
    let cell_h = (H - 2.0 * PAD) / nodes as f64;
    for i in 0..nodes {
        for j in 0..nodes {
            let v = values[i * nodes + j] / vmax;
            // dark blue -> yellow ramp
            let r = (255.0 * v) as u8;
            let g = (224.0 * v + 16.0) as u8;
            let b = (96.0 * (1.0 - v) + 32.0) as u8;
            let x = PAD + i as f64 * cell_w;
            let y = H - PAD - (j + 1) as f64 * cell_h;
            let _ = writeln!(
                out,
                "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"rgb({r},{g},{b})\"/>",
                cell_w + 0.5,
                cell_h + 0.5
            );
        }
    }
    frame(&mut out);
    out.push_str("</svg>\n");
    out
}

/// ROC polyline with the chance diagonal.
pub fn roc(fpr: &[f64], tpr: &[f64], auc: f64) -> String {
    let mut out = String::new();
    header(&mut out);
    let _ = writeln!(
        out,
        "<line x1=\"{PAD}\" y1=\"{}\" x2=\"{}\" y2=\"{PAD}\" stroke=\"#bbb\" stroke-dasharray=\"4\"/>",
        H - PAD,
        W - PAD
    );
    let mut path = String::new();
    for (k, (&f, &t)) in fpr.iter().zip(tpr).enumerate() {
        let _ = write!(
            path,
            "{}{:.2},{:.2} ",
            if k == 0 { "M" } else { "L" },
            scale(f, 0.0, 1.0),
            scale_y(t, 0.0, 1.0)
        );
    }
    let _ = writeln!(out, "<path d=\"{path}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\"/>");
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"14\">AUC = {auc:.4}</text>",
        PAD + 10.0,
        PAD + 20.0
    );
    frame(&mut out);
    out.push_str("</svg>\n");
    out
}
