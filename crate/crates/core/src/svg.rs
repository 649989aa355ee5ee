//! Self-contained SVG figures: the deployment map and line charts.

use std::fmt::Write;

use crate::planner::MissionPlan;

const W: f64 = 640.0;
const H: f64 = 480.0;
const PAD: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn beta_color(level: u8) -> &'static str {
    match level {
        1 => "#e6a700",
        2 => "#d9480f",
        _ => "#7048e8",
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit(points: impl Iterator<Item = (f64, f64)>, square: bool) -> Frame {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in points {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        let widen = |lo: f64, hi: f64| if hi - lo < 1e-9 { (lo - 0.5, hi + 0.5) } else { (lo, hi) };
        (x0, x1) = widen(x0, x1);
        (y0, y1) = widen(y0, y1);
        if square {
            let span = (x1 - x0).max(y1 - y0) * 1.1;
            let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
            return Frame { x0: cx - span / 2.0, x1: cx + span / 2.0, y0: cy - span / 2.0, y1: cy + span / 2.0 };
        }
        Frame { x0, x1, y0, y1 }
    }

    fn sx(&self, x: f64) -> f64 {
        PAD + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * PAD)
    }

    fn sy(&self, y: f64) -> f64 {
        H - PAD - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * PAD)
    }

    fn scale(&self) -> f64 {
        (W - 2.0 * PAD) / (self.x1 - self.x0)
    }
}

fn open(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">
<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>
<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        W / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let _ = writeln!(
        out,
        r##"<g stroke="#444" fill="none"><line x1="{PAD}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{b}"/></g>"##,
        b = H - PAD,
        r = W - PAD
    );
    for k in 0..=4 {
        let fx = f.x0 + (f.x1 - f.x0) * k as f64 / 4.0;
        let fy = f.y0 + (f.y1 - f.y0) * k as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            f.sx(fx),
            H - PAD + 16.0,
            tick(fx),
            PAD - 6.0,
            f.sy(fy) + 4.0,
            tick(fy)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text><text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
        W / 2.0,
        H - 14.0,
        escape(x_label),
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.round() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

/// Ground-plane map: users as diamonds colored by brightness level, homes
/// as squares, dashed flight paths and one circle per lighting disk.
pub fn map2d(plan: &MissionPlan) -> String {
    let tan = plan.light_angle_deg.to_radians().tan();
    let mut pts: Vec<(f64, f64)> = plan.users.iter().map(|u| (u.x, u.y)).collect();
    for p in &plan.uavs {
        let r = p.service_height * tan;
        pts.push(p.home.ground());
        pts.extend([(p.target.0 - r, p.target.1 - r), (p.target.0 + r, p.target.1 + r)]);
    }
    let f = Frame::fit(pts.into_iter(), true);
    let mut out = String::new();
    open(&mut out, "UAV deployment");
    axes(&mut out, &f, "x (m)", "y (m)");
    for (k, p) in plan.uavs.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let (hx, hy) = (f.sx(p.home.x), f.sy(p.home.y));
        let (tx, ty) = (f.sx(p.target.0), f.sy(p.target.1));
        let _ = writeln!(
            out,
            r#"<circle class="disk" cx="{tx:.2}" cy="{ty:.2}" r="{:.2}" fill="{color}" fill-opacity="0.12" stroke="{color}"/>"#,
            p.service_height * tan * f.scale()
        );
        let _ = writeln!(
            out,
            r#"<line class="path" x1="{hx:.2}" y1="{hy:.2}" x2="{tx:.2}" y2="{ty:.2}" stroke="{color}" stroke-dasharray="6 4"/>"#
        );
        let _ = writeln!(
            out,
            r#"<rect class="home" x="{:.2}" y="{:.2}" width="8" height="8" fill="{color}"/><text x="{:.2}" y="{:.2}">UAV {}</text>"#,
            hx - 4.0,
            hy - 4.0,
            hx + 6.0,
            hy - 6.0,
            k + 1
        );
    }
    for u in &plan.users {
        let (x, y) = (f.sx(u.x), f.sy(u.y));
        let _ = writeln!(
            out,
            r#"<polygon class="user" points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="{}"/>"#,
            x,
            y - 4.0,
            x + 4.0,
            y,
            x,
            y + 4.0,
            x - 4.0,
            y,
            beta_color(u.beta.level())
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Line chart with one polyline per named series.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let f = Frame::fit(series.iter().flat_map(|(_, pts)| pts.iter().copied()), false);
    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, &f, x_label, y_label);
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", f.sx(x), f.sy(y))).collect();
        let _ = writeln!(
            out,
            r#"<polyline class="series" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            coords.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" fill="{color}">{}</text>"#,
            W - PAD - 90.0,
            PAD + 16.0 * k as f64,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}
