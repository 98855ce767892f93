//! Minimal SVG line plots, laid out as a grid of panels.

use std::fmt::Write as _;

use gait_lab::analysis::KinematicCurves;
use gait_lab::crawl::CrawlTrace;
use gait_lab::walk::WalkTrace;

const PANEL_WIDTH: f64 = 320.0;
const PANEL_HEIGHT: f64 = 220.0;
const MARGIN: f64 = 40.0;
const COLUMNS: usize = 3;
/// Longer series are thinned to roughly this many points per panel.
const MAX_POINTS: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
}

impl Panel {
    fn new(title: &str, x_label: &str, y_label: &str, points: Vec<(f64, f64)>) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            points,
        }
    }
}

fn series(t: &[f64], y: &[f64]) -> Vec<(f64, f64)> {
    t.iter().copied().zip(y.iter().copied()).collect()
}

/// The six running curves: x, z, xdot, zdot against time, the x-z path and
/// leg length against time.
pub fn slip_panels(c: &KinematicCurves) -> Vec<Panel> {
    vec![
        Panel::new("horizontal position", "t (s)", "x (m)", series(&c.t, &c.x)),
        Panel::new("vertical position", "t (s)", "z (m)", series(&c.t, &c.z)),
        Panel::new("horizontal velocity", "t (s)", "xdot (m/s)", series(&c.t, &c.xdot)),
        Panel::new("vertical velocity", "t (s)", "zdot (m/s)", series(&c.t, &c.zdot)),
        Panel::new("centre-of-mass path", "x (m)", "z (m)", c.path.clone()),
        Panel::new("leg length", "t (s)", "l (m)", series(&c.t, &c.l)),
    ]
}

pub fn walker_panels(trace: &WalkTrace) -> Vec<Panel> {
    let t: Vec<f64> = trace.samples.iter().map(|s| s.t).collect();
    let x: Vec<f64> = trace.samples.iter().map(|s| s.com_x).collect();
    let v: Vec<f64> = trace.samples.iter().map(|s| s.com_xdot).collect();
    vec![
        Panel::new("centre-of-mass position", "t (s)", "x (m)", series(&t, &x)),
        Panel::new("centre-of-mass velocity", "t (s)", "xdot (m/s)", series(&t, &v)),
    ]
}

pub fn crawler_panels(trace: &CrawlTrace) -> Vec<Panel> {
    let pick = |f: fn(&gait_lab::crawl::CrawlSample) -> f64| -> Vec<(f64, f64)> {
        trace.samples.iter().map(|s| (s.t, f(s))).collect()
    };
    vec![
        Panel::new("centre-of-mass position", "t (s)", "x (m)", pick(|s| s.com_x)),
        Panel::new("centre-of-mass velocity", "t (s)", "xdot (m/s)", pick(|s| s.com_xdot)),
        Panel::new("front right angle", "t (s)", "q11 (rad)", pick(|s| s.angles.q11)),
        Panel::new("front left angle", "t (s)", "q12 (rad)", pick(|s| s.angles.q12)),
        Panel::new("front leg force", "t (s)", "f_FR (N)", pick(|s| s.forces.f_fr)),
        Panel::new("hind leg force", "t (s)", "f_HL (N)", pick(|s| s.forces.f_hl)),
    ]
}

/// Value range padded by 5%; a flat range is widened symmetrically so the
/// data sits in the middle.
fn axis_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    let span = hi - lo;
    let mid = 0.5 * (lo + hi);
    if span <= 1e-9 * mid.abs().max(1.0) {
        let half = 0.5 * mid.abs().max(1.0);
        return (mid - half, mid + half);
    }
    (lo - 0.05 * span, hi + 0.05 * span)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn thin(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if points.len() <= MAX_POINTS {
        return points.to_vec();
    }
    let stride = points.len().div_ceil(MAX_POINTS);
    let mut out: Vec<_> = points.iter().copied().step_by(stride).collect();
    if let Some(&last) = points.last() {
        if out.last() != Some(&last) {
            out.push(last);
        }
    }
    out
}

fn render_panel(svg: &mut String, panel: &Panel, index: usize) {
    let col = index % COLUMNS;
    let row = index / COLUMNS;
    let left = col as f64 * (PANEL_WIDTH + MARGIN) + MARGIN;
    let top = row as f64 * (PANEL_HEIGHT + MARGIN) + MARGIN;
    let (x0, x1) = axis_range(panel.points.iter().map(|p| p.0));
    let (y0, y1) = axis_range(panel.points.iter().map(|p| p.1));
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * PANEL_WIDTH;
    let sy = |y: f64| top + PANEL_HEIGHT - (y - y0) / (y1 - y0) * PANEL_HEIGHT;

    let _ = writeln!(svg, r#"<g class="panel" id="panel-{index}">"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{left:.2}" y="{top:.2}" width="{PANEL_WIDTH}" height="{PANEL_HEIGHT}" fill="none" stroke="gray"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13">{}</text>"#,
        left + PANEL_WIDTH / 2.0,
        top - 8.0,
        escape(&panel.title)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="10">{}</text>"#,
        left + PANEL_WIDTH / 2.0,
        top + PANEL_HEIGHT + 14.0,
        escape(&panel.x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="10" transform="rotate(-90 {:.2} {:.2})" text-anchor="middle">{}</text>"#,
        left - 8.0,
        top + PANEL_HEIGHT / 2.0,
        left - 8.0,
        top + PANEL_HEIGHT / 2.0,
        escape(&panel.y_label)
    );
    let mut coords = String::new();
    for (x, y) in thin(&panel.points) {
        if x.is_finite() && y.is_finite() {
            let _ = write!(coords, "{:.3},{:.3} ", sx(x), sy(y));
        }
    }
    let _ = writeln!(
        svg,
        r#"<polyline fill="none" stroke="steelblue" stroke-width="1.2" points="{}"/>"#,
        coords.trim_end()
    );
    svg.push_str("</g>\n");
}

pub fn render_svg(panels: &[Panel]) -> String {
    let rows = panels.len().div_ceil(COLUMNS).max(1);
    let width = COLUMNS as f64 * (PANEL_WIDTH + MARGIN) + MARGIN;
    let height = rows as f64 * (PANEL_HEIGHT + MARGIN) + MARGIN;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, panel) in panels.iter().enumerate() {
        render_panel(&mut svg, panel, i);
    }
    svg.push_str("</svg>\n");
    svg
}
