//! Minimal SVG 1.1 line plots: axes, ticks, one polyline per series and a
//! legend.

use std::fmt::Write;

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

impl LinePlot {
    fn transform(&self, p: (f64, f64)) -> Option<(f64, f64)> {
        let x = if self.log_x { p.0.log10() } else { p.0 };
        let y = if self.log_y { p.1.log10() } else { p.1 };
        (x.is_finite() && y.is_finite()).then_some((x, y))
    }

    pub fn render(&self) -> String {
        let pts: Vec<Vec<(f64, f64)>> = self
            .series
            .iter()
            .map(|s| s.points.iter().filter_map(|&p| self.transform(p)).collect())
            .collect();
        let all = pts.iter().flatten();
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in all {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 == x0 {
            x1 = x0 + 1.0;
        }
        if y1 == y0 {
            y1 = y0 + 1.0;
        }
        let pw = WIDTH - MARGIN_L - MARGIN_R;
        let ph = HEIGHT - MARGIN_T - MARGIN_B;
        let sx = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| MARGIN_T + ph - (y - y0) / (y1 - y0) * ph;

        let mut s = String::new();
        let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
        );
        let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
            MARGIN_L + pw / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<g stroke="black" stroke-width="1"><line x1="{l}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{l}" y1="{t}" x2="{l}" y2="{b}"/></g>"#,
            l = MARGIN_L,
            r = MARGIN_L + pw,
            t = MARGIN_T,
            b = MARGIN_T + ph
        );
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let xv = x0 + f * (x1 - x0);
            let yv = y0 + f * (y1 - y0);
            let xl = if self.log_x { format!("1e{xv:.2}") } else { format!("{xv:.3}") };
            let yl = if self.log_y { format!("1e{yv:.2}") } else { format!("{yv:.3}") };
            let _ = writeln!(
                s,
                r#"<line x1="{x}" y1="{b}" x2="{x}" y2="{b2}" stroke="black"/><text x="{x}" y="{ty}" font-family="sans-serif" font-size="11" text-anchor="middle">{xl}</text>"#,
                x = sx(xv),
                b = MARGIN_T + ph,
                b2 = MARGIN_T + ph + 5.0,
                ty = MARGIN_T + ph + 18.0
            );
            let _ = writeln!(
                s,
                r#"<line x1="{l2}" y1="{y}" x2="{l}" y2="{y}" stroke="black"/><text x="{tx}" y="{y4}" font-family="sans-serif" font-size="11" text-anchor="end">{yl}</text>"#,
                l = MARGIN_L,
                l2 = MARGIN_L - 5.0,
                y = sy(yv),
                tx = MARGIN_L - 8.0,
                y4 = sy(yv) + 4.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
            MARGIN_L + pw / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{y}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {y})">{}</text>"#,
            escape(&self.y_label),
            y = MARGIN_T + ph / 2.0
        );
        for (k, (series, p)) in self.series.iter().zip(&pts).enumerate() {
            let color = COLORS[k % COLORS.len()];
            let coords: Vec<String> = p.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(
                s,
                r#"<polyline class="series" data-name="{}" fill="none" stroke="{color}" stroke-width="1.8" points="{}"/>"#,
                escape(&series.name),
                coords.join(" ")
            );
            let ly = MARGIN_T + 16.0 * k as f64 + 8.0;
            let lx = MARGIN_L + pw + 12.0;
            let _ = writeln!(
                s,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
                lx + 18.0,
                lx + 24.0,
                ly + 4.0,
                escape(&series.name)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_one_polyline_per_series() {
        let plot = LinePlot {
            title: "a < b & c".into(),
            x_label: "h".into(),
            y_label: "S(h)".into(),
            log_x: true,
            log_y: true,
            series: vec![
                Series {
                    name: "first".into(),
                    points: vec![(0.1, 1.0), (0.2, 2.0)],
                },
                Series {
                    name: "second".into(),
                    points: vec![(0.1, 0.5), (0.2, 0.0)],
                },
            ],
        };
        let s = plot.render();
        assert_eq!(s.matches("<polyline").count(), 2);
        assert!(s.contains("a &lt; b &amp; c"));
        assert!(s.trim_end().ends_with("</svg>"));
    }
}
