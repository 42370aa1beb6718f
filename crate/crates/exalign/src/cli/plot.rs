//! Minimal hand-emitted SVG line charts — enough to draw a fidelity curve
//! or a λ sweep without a plotting dependency. Output is deterministic:
//! same series in, same bytes out.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f6feb", "#d1242f", "#1a7f37", "#9a6700", "#8250df", "#57606a"];

#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Optional tick label override for integer x positions (index ->
    /// label); used to annotate log-scale sweeps plotted on an index axis.
    pub x_tick_labels: Vec<(f64, String)>,
    pub series: Vec<Series>,
}

fn fmt(v: f64) -> String {
    // Fixed human-scale tick formatting, stable across runs.
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 100.0 || v.abs() < 0.01 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

impl Chart {
    pub fn render(&self) -> Result<String> {
        if self.series.is_empty() || self.series.iter().any(|s| s.points.is_empty()) {
            return Err(Error::Config("chart needs at least one non-empty series".into()));
        }
        let all = self.series.iter().flat_map(|s| s.points.iter());
        if self
            .series
            .iter()
            .flat_map(|s| s.points.iter())
            .any(|&(x, y)| !x.is_finite() || !y.is_finite())
        {
            return Err(Error::Config("chart points must be finite".into()));
        }
        let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in all {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
        if x_max == x_min {
            x_max = x_min + 1.0;
        }
        if y_max == y_min {
            y_max = y_min + 1.0;
        }
        // Pad the y range a little so curves do not sit on the frame.
        let pad = 0.05 * (y_max - y_min);
        let (y_min, y_max) = (y_min - pad, y_max + pad);

        let px = |x: f64| MARGIN_L + (x - x_min) / (x_max - x_min) * (WIDTH - MARGIN_L - MARGIN_R);
        let py = |y: f64| HEIGHT - MARGIN_B - (y - y_min) / (y_max - y_min) * (HEIGHT - MARGIN_T - MARGIN_B);

        let mut svg = String::new();
        svg.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
             viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n"
        ));
        svg.push_str(&format!(
            "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
            WIDTH / 2.0,
            escape(&self.title)
        ));

        // Frame.
        svg.push_str(&format!(
            "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{:.1}\" height=\"{:.1}\" \
             fill=\"none\" stroke=\"#333\"/>\n",
            WIDTH - MARGIN_L - MARGIN_R,
            HEIGHT - MARGIN_T - MARGIN_B
        ));

        // Ticks: 5 per axis, or the caller-provided x labels.
        let x_ticks: Vec<(f64, String)> = if self.x_tick_labels.is_empty() {
            (0..=4)
                .map(|i| {
                    let x = x_min + (x_max - x_min) * i as f64 / 4.0;
                    (x, fmt(x))
                })
                .collect()
        } else {
            self.x_tick_labels.clone()
        };
        for (x, label) in &x_ticks {
            let xx = px(*x);
            svg.push_str(&format!(
                "<line x1=\"{xx:.1}\" y1=\"{:.1}\" x2=\"{xx:.1}\" y2=\"{:.1}\" stroke=\"#333\"/>\n",
                HEIGHT - MARGIN_B,
                HEIGHT - MARGIN_B + 5.0
            ));
            svg.push_str(&format!(
                "<text x=\"{xx:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
                HEIGHT - MARGIN_B + 20.0,
                escape(label)
            ));
        }
        for i in 0..=4 {
            let y = y_min + (y_max - y_min) * i as f64 / 4.0;
            let yy = py(y);
            svg.push_str(&format!(
                "<line x1=\"{:.1}\" y1=\"{yy:.1}\" x2=\"{MARGIN_L}\" y2=\"{yy:.1}\" stroke=\"#333\"/>\n",
                MARGIN_L - 5.0
            ));
            svg.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n",
                MARGIN_L - 9.0,
                yy + 4.0,
                fmt(y)
            ));
        }

        // Axis labels.
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
            MARGIN_L + (WIDTH - MARGIN_L - MARGIN_R) / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        ));
        svg.push_str(&format!(
            "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{}</text>\n",
            MARGIN_T + (HEIGHT - MARGIN_T - MARGIN_B) / 2.0,
            MARGIN_T + (HEIGHT - MARGIN_T - MARGIN_B) / 2.0,
            escape(&self.y_label)
        ));

        // Series polylines + legend.
        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let pts: Vec<String> = s
                .points
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
                pts.join(" ")
            ));
            for &(x, y) in &s.points {
                svg.push_str(&format!(
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.6\" fill=\"{color}\"/>\n",
                    px(x),
                    py(y)
                ));
            }
            let ly = MARGIN_T + 16.0 + 18.0 * i as f64;
            svg.push_str(&format!(
                "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
                MARGIN_L + 10.0,
                MARGIN_L + 34.0
            ));
            svg.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\">{}</text>\n",
                MARGIN_L + 40.0,
                ly + 4.0,
                escape(&s.label)
            ));
        }
        svg.push_str("</svg>\n");
        Ok(svg)
    }

    pub fn write_svg(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render()?).map_err(|e| Error::io(path, e))
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
