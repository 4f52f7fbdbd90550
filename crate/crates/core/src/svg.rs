//! Minimal hand-written SVG line plots (no plotting dependency). Output is
//! deterministic: identical input produces identical bytes.

const PALETTE: &[&str] = &["#1f6fb2", "#d1495b", "#3a9d5d", "#8d6cab", "#c98a2b", "#4f4f4f"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Draw a small circle at every point in addition to the line.
    pub markers: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Short tick label: trims trailing zeros of a fixed-precision rendering.
fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    let s = if a >= 1e5 || a < 1e-3 {
        format!("{v:.2e}")
    } else {
        let mut s = format!("{v:.4}");
        while s.contains('.') && (s.ends_with('0') || s.ends_with('.')) {
            s.pop();
        }
        s
    };
    s
}

fn range_of(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo > hi {
        return (0.0, 1.0);
    }
    if lo == hi {
        // Degenerate span: pad so the single value sits mid-plot.
        let pad = if lo == 0.0 { 0.5 } else { lo.abs() * 0.1 };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

impl LinePlot {
    pub fn to_svg(&self) -> String {
        let (w, h) = (640.0, 400.0);
        let (ml, mr, mt, mb) = (64.0, 16.0, 34.0, 46.0);
        let (pw, ph) = (w - ml - mr, h - mt - mb);
        let (x0, x1) = range_of(self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
        let (y0, y1) = range_of(self.series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
        let sx = |x: f64| ml + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| mt + ph - (y - y0) / (y1 - y0) * ph;

        let mut out = String::new();
        out.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
        ));
        out.push_str(&format!(
            "<rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"20\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n",
            ml + pw / 2.0,
            esc(&self.title)
        ));

        // Frame and ticks.
        out.push_str(&format!(
            "<rect x=\"{ml}\" y=\"{mt}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"#444\" stroke-width=\"1\"/>\n"
        ));
        let n_ticks = 5;
        for i in 0..=n_ticks {
            let t = i as f64 / n_ticks as f64;
            let xv = x0 + t * (x1 - x0);
            let yv = y0 + t * (y1 - y0);
            let xp = sx(xv);
            let yp = sy(yv);
            out.push_str(&format!(
                "<line x1=\"{xp}\" y1=\"{}\" x2=\"{xp}\" y2=\"{}\" stroke=\"#444\" stroke-width=\"1\"/>\n",
                mt + ph,
                mt + ph + 4.0
            ));
            out.push_str(&format!(
                "<text x=\"{xp}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
                mt + ph + 17.0,
                tick_label(xv)
            ));
            out.push_str(&format!(
                "<line x1=\"{}\" y1=\"{yp}\" x2=\"{ml}\" y2=\"{yp}\" stroke=\"#444\" stroke-width=\"1\"/>\n",
                ml - 4.0
            ));
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
                ml - 7.0,
                yp + 4.0,
                tick_label(yv)
            ));
        }
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
            ml + pw / 2.0,
            h - 8.0,
            esc(&self.x_label)
        ));
        out.push_str(&format!(
            "<text x=\"14\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">{}</text>\n",
            mt + ph / 2.0,
            mt + ph / 2.0,
            esc(&self.y_label)
        ));

        for (si, s) in self.series.iter().enumerate() {
            let color = PALETTE[si % PALETTE.len()];
            let pts: Vec<(f64, f64)> = s
                .points
                .iter()
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .map(|&(x, y)| (sx(x), sy(y)))
                .collect();
            if pts.len() >= 2 {
                let d: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                out.push_str(&format!(
                    "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"/>\n",
                    d.join(" ")
                ));
            }
            if s.markers || pts.len() == 1 {
                for (x, y) in &pts {
                    out.push_str(&format!(
                        "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"2.6\" fill=\"{color}\"/>\n"
                    ));
                }
            }
            // Legend swatch, stacked top-right inside the frame.
            let ly = mt + 14.0 + 16.0 * si as f64;
            out.push_str(&format!(
                "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2.5\"/>\n",
                ml + pw - 120.0,
                ml + pw - 100.0
            ));
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
                ml + pw - 94.0,
                ly + 4.0,
                esc(&s.label)
            ));
        }
        out.push_str("</svg>\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plot() -> LinePlot {
        LinePlot {
            title: "best fitness <per gen>".into(),
            x_label: "generation".into(),
            y_label: "fitness".into(),
            series: vec![
                Series {
                    label: "joint".into(),
                    points: vec![(0.0, 1.0), (1.0, 1.4), (2.0, 1.4), (3.0, 2.2)],
                    markers: true,
                },
                Series { label: "frozen".into(), points: vec![(0.0, 1.0), (3.0, 1.1)], markers: false },
            ],
        }
    }

    #[test]
    fn emits_well_formed_deterministic_svg() {
        let a = plot().to_svg();
        let b = plot().to_svg();
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.trim_end().ends_with("</svg>"));
        assert_eq!(a.matches("<polyline").count(), 2);
        assert_eq!(a.matches("<circle").count(), 4);
        // Title text is escaped.
        assert!(a.contains("&lt;per gen&gt;"));
        assert!(!a.contains("<per gen>"));
    }

    #[test]
    fn handles_degenerate_and_empty_input() {
        let flat = LinePlot {
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            series: vec![Series { label: "s".into(), points: vec![(1.0, 5.0)], markers: false }],
        };
        let svg = flat.to_svg();
        assert!(svg.contains("<circle"));
        assert!(!svg.contains("NaN"));
        let empty = LinePlot {
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            series: vec![],
        };
        assert!(!empty.to_svg().contains("NaN"));
    }

    #[test]
    fn tick_labels_are_compact() {
        assert_eq!(tick_label(0.0), "0");
        assert_eq!(tick_label(2.5), "2.5");
        assert_eq!(tick_label(10.0), "10");
        assert_eq!(tick_label(0.25), "0.25");
    }
}
