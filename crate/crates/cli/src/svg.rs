//! Static SVG plots: self-contained XML, no external resources.
//!
//! Layout follows the operator view of an event: days-to-TCA decreasing
//! left to right, uncertainty on a log axis, observed points as crosses,
//! a vertical cutoff line, the baseline hold, the forecast median, and
//! the shaded 5-95% band.

use std::fmt::Write as _;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 50.0;

pub struct Plot {
    title: String,
    y_min: f64,
    y_max: f64,
    body: String,
    legend: Vec<(String, String)>,
}

fn fmt(v: f64) -> String {
    format!("{:.2}", v)
}

impl Plot {
    /// `y` bounds are in metres; the axis is log10.
    pub fn new(title: &str, y_min_m: f64, y_max_m: f64) -> Self {
        let y_min = y_min_m.max(1.0).log10().floor();
        let y_max = y_max_m.max(10.0).log10().ceil();
        Plot { title: title.to_string(), y_min, y_max, body: String::new(), legend: Vec::new() }
    }

    fn x(&self, tau_days: f64) -> f64 {
        // tau = 7 at the left edge, 0 at the right.
        let f = (7.0 - tau_days) / 7.0;
        MARGIN_LEFT + f * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn y(&self, sigma_m: f64) -> f64 {
        let lg = sigma_m.max(1.0).log10().clamp(self.y_min, self.y_max);
        let f = (lg - self.y_min) / (self.y_max - self.y_min);
        HEIGHT - MARGIN_BOTTOM - f * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }

    pub fn band(&mut self, taus: &[f64], low_m: &[f64], high_m: &[f64], color: &str, label: &str) {
        let mut points = String::new();
        for (tau, v) in taus.iter().zip(high_m) {
            let _ = write!(points, "{},{} ", fmt(self.x(*tau)), fmt(self.y(*v)));
        }
        for (tau, v) in taus.iter().zip(low_m).rev() {
            let _ = write!(points, "{},{} ", fmt(self.x(*tau)), fmt(self.y(*v)));
        }
        let _ = writeln!(
            self.body,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.25" stroke="none"/>"#,
            points.trim_end()
        );
        self.legend.push((label.to_string(), color.to_string()));
    }

    pub fn line(&mut self, taus: &[f64], values_m: &[f64], color: &str, dashed: bool, label: &str) {
        let mut points = String::new();
        for (tau, v) in taus.iter().zip(values_m) {
            let _ = write!(points, "{},{} ", fmt(self.x(*tau)), fmt(self.y(*v)));
        }
        let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#,
            points.trim_end()
        );
        self.legend.push((label.to_string(), color.to_string()));
    }

    pub fn crosses(&mut self, taus: &[f64], values_m: &[f64], color: &str, label: &str) {
        for (tau, v) in taus.iter().zip(values_m) {
            let (cx, cy) = (self.x(*tau), self.y(*v));
            let _ = writeln!(
                self.body,
                r#"<path d="M {} {} L {} {} M {} {} L {} {}" stroke="{color}" stroke-width="2"/>"#,
                fmt(cx - 4.0),
                fmt(cy - 4.0),
                fmt(cx + 4.0),
                fmt(cy + 4.0),
                fmt(cx - 4.0),
                fmt(cy + 4.0),
                fmt(cx + 4.0),
                fmt(cy - 4.0),
            );
        }
        self.legend.push((label.to_string(), color.to_string()));
    }

    pub fn vertical(&mut self, tau_days: f64, color: &str, label: &str) {
        let x = self.x(tau_days);
        let _ = writeln!(
            self.body,
            r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="{color}" stroke-width="1.5" stroke-dasharray="3 3"/>"#,
            x0 = fmt(x),
            y0 = fmt(MARGIN_TOP),
            y1 = fmt(HEIGHT - MARGIN_BOTTOM),
        );
        self.legend.push((label.to_string(), color.to_string()));
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
        );
        let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="20" font-family="sans-serif" font-size="14">{}</text>"#,
            MARGIN_LEFT,
            xml_escape(&self.title)
        );

        // Axes.
        let x0 = MARGIN_LEFT;
        let x1 = WIDTH - MARGIN_RIGHT;
        let y0 = HEIGHT - MARGIN_BOTTOM;
        let _ = writeln!(
            out,
            r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#
        );
        let _ = writeln!(
            out,
            r#"<line x1="{x0}" y1="{}" x2="{x0}" y2="{y0}" stroke="black"/>"#,
            MARGIN_TOP
        );
        for d in 0..=7 {
            let tau = 7.0 - d as f64;
            let x = self.x(tau);
            let _ = writeln!(
                out,
                r#"<line x1="{x}" y1="{y0}" x2="{x}" y2="{}" stroke="black"/>"#,
                y0 + 5.0
            );
            let _ = writeln!(
                out,
                r#"<text x="{x}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{tau}</text>"#,
                y0 + 20.0
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">days to closest approach</text>"#,
            (x0 + x1) / 2.0,
            HEIGHT - 12.0
        );
        let mut decade = self.y_min as i64;
        while decade <= self.y_max as i64 {
            let y = self.y(10f64.powi(decade as i32));
            let _ = writeln!(
                out,
                r#"<line x1="{}" y1="{y}" x2="{x0}" y2="{y}" stroke="black"/>"#,
                x0 - 5.0
            );
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">1e{decade}</text>"#,
                x0 - 8.0,
                y + 4.0
            );
            decade += 1;
        }
        let _ = writeln!(
            out,
            r#"<text x="16" y="{}" font-family="sans-serif" font-size="12" transform="rotate(-90 16 {})" text-anchor="middle">position uncertainty [m]</text>"#,
            (MARGIN_TOP + y0) / 2.0,
            (MARGIN_TOP + y0) / 2.0
        );

        out.push_str(&self.body);

        // Legend.
        let mut ly = MARGIN_TOP + 8.0;
        for (label, color) in &self.legend {
            let _ = writeln!(
                out,
                r#"<rect x="{}" y="{}" width="12" height="12" fill="{color}"/>"#,
                x1 - 170.0,
                ly - 10.0
            );
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
                x1 - 152.0,
                ly,
                xml_escape(label)
            );
            ly += 18.0;
        }
        out.push_str("</svg>\n");
        out
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_well_formed_self_contained_svg() {
        let mut p = Plot::new("event <x>", 100.0, 50_000.0);
        p.band(&[7.0, 5.0, 3.0], &[200.0, 150.0, 120.0], &[900.0, 700.0, 500.0], "#88aacc", "band");
        p.line(&[7.0, 5.0, 3.0], &[500.0, 400.0, 300.0], "#336699", false, "median");
        p.crosses(&[6.0, 4.0], &[450.0, 380.0], "#112233", "observed");
        p.vertical(2.0, "#444444", "cutoff");
        let svg = p.render();
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert!(!svg.contains("href"));
        assert!(!svg.contains("url("));
        assert!(svg.contains("&lt;x&gt;"));
        // Balanced tags for the elements we emit.
        for tag in ["polygon", "polyline", "path", "rect", "text", "line"] {
            let opens = svg.matches(&format!("<{tag} ")).count();
            assert!(opens > 0, "{tag} present");
        }
    }
}
