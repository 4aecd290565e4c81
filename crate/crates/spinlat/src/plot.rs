//! Minimal standalone SVG figures: data points, fit lines, labeled axes.
//! Output is deterministic for identical input.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PlotError {
    #[error("nothing to plot: every series is empty")]
    Empty,
    #[error("non-finite coordinate in series {0:?}")]
    NonFinite(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesStyle {
    Points,
    Line,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub style: SeriesStyle,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn points(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            style: SeriesStyle::Points,
            points,
        }
    }

    pub fn line(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            style: SeriesStyle::Line,
            points,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Figure {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 56.0;
const PALETTE: [&str; 6] = [
    "#caa531", "#3b6fb6", "#b5442d", "#4a9d6e", "#7d54a3", "#666666",
];

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn nice_number(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if (1e-3..1e5).contains(&a) {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.').to_string();
        if s.is_empty() || s == "-" {
            "0".to_string()
        } else {
            s
        }
    } else {
        format!("{v:.3e}")
    }
}

/// Render a figure to a standalone SVG document.
pub fn render_svg(figure: &Figure) -> Result<String, PlotError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for s in &figure.series {
        for &(x, y) in &s.points {
            if !x.is_finite() || !y.is_finite() {
                return Err(PlotError::NonFinite(s.label.clone()));
            }
            xs.push(x);
            ys.push(y);
        }
    }
    if xs.is_empty() {
        return Err(PlotError::Empty);
    }

    let bound = |vals: &[f64]| {
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if lo == hi {
            (lo - 0.5, hi + 0.5)
        } else {
            let pad = 0.05 * (hi - lo);
            (lo - pad, hi + pad)
        }
    };
    let (x_lo, x_hi) = bound(&xs);
    let (y_lo, y_hi) = bound(&ys);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let map_x = |x: f64| MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let map_y = |y: f64| MARGIN_TOP + (y_hi - y) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );

    // frame
    let _ = writeln!(
        svg,
        r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black" stroke-width="1"/>"#,
        MARGIN_LEFT, MARGIN_TOP, plot_w, plot_h
    );

    // ticks and grid
    for i in 0..=4 {
        let fx = x_lo + (x_hi - x_lo) * i as f64 / 4.0;
        let px = map_x(fx);
        let _ = writeln!(
            svg,
            r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black" stroke-width="1"/>"#,
            MARGIN_TOP + plot_h,
            MARGIN_TOP + plot_h + 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{px:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#,
            MARGIN_TOP + plot_h + 20.0,
            escape_xml(&nice_number(fx))
        );

        let fy = y_lo + (y_hi - y_lo) * i as f64 / 4.0;
        let py = map_y(fy);
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="black" stroke-width="1"/>"#,
            MARGIN_LEFT - 5.0,
            MARGIN_LEFT
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 8.0,
            py + 4.0,
            escape_xml(&nice_number(fy))
        );
    }

    // axis labels and title
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        escape_xml(&figure.x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" font-size="14" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        escape_xml(&figure.y_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="24" font-size="16" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        escape_xml(&figure.title)
    );

    // series
    for (si, series) in figure.series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        match series.style {
            SeriesStyle::Line => {
                let path: Vec<String> = series
                    .points
                    .iter()
                    .map(|&(x, y)| format!("{:.2},{:.2}", map_x(x), map_y(y)))
                    .collect();
                let _ = writeln!(
                    svg,
                    r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                    path.join(" ")
                );
            }
            SeriesStyle::Points => {
                for &(x, y) in &series.points {
                    let _ = writeln!(
                        svg,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                        map_x(x),
                        map_y(y)
                    );
                }
            }
        }
        // legend entry
        let ly = MARGIN_TOP + 16.0 + 18.0 * si as f64;
        let lx = MARGIN_LEFT + plot_w - 150.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="3"/>"#,
            ly - 4.0,
            lx + 22.0,
            ly - 4.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{ly:.2}" font-size="12">{}</text>"#,
            lx + 28.0,
            escape_xml(&series.label)
        );
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Tiny well-formedness check: every opened tag closes in order and
    /// attribute quoting is balanced, which is all a figure needs to be
    /// loadable by a conforming XML parser.
    pub(crate) fn assert_well_formed_xml(doc: &str) {
        let mut stack: Vec<String> = Vec::new();
        let mut rest = doc;
        while let Some(start) = rest.find('<') {
            let tail = &rest[start + 1..];
            let end = tail.find('>').expect("unterminated tag");
            let tag = &tail[..end];
            assert_eq!(
                tag.matches('"').count() % 2,
                0,
                "unbalanced quotes in {tag}"
            );
            if let Some(name) = tag.strip_prefix('/') {
                let open = stack.pop().unwrap_or_else(|| panic!("stray closer {name}"));
                assert_eq!(open, name, "mismatched close tag");
            } else if !tag.starts_with('?') && !tag.starts_with('!') && !tag.ends_with('/') {
                let name: String = tag.split_whitespace().next().unwrap().to_string();
                stack.push(name);
            }
            rest = &tail[end + 1..];
        }
        assert!(stack.is_empty(), "unclosed tags: {stack:?}");
        let text_only: String = {
            let mut out = String::new();
            let mut depth_in_tag = false;
            for c in doc.chars() {
                match c {
                    '<' => depth_in_tag = true,
                    '>' => depth_in_tag = false,
                    _ if !depth_in_tag => out.push(c),
                    _ => {}
                }
            }
            out
        };
        for (i, c) in text_only.char_indices() {
            if c == '&' {
                let tail = &text_only[i..];
                assert!(
                    tail.starts_with("&amp;")
                        || tail.starts_with("&lt;")
                        || tail.starts_with("&gt;")
                        || tail.starts_with("&quot;"),
                    "unescaped ampersand"
                );
            }
        }
    }

    fn decay_figure() -> Figure {
        let data: Vec<(f64, f64)> = (0..20)
            .map(|i| (i as f64, (-0.1 * i as f64).exp()))
            .collect();
        Figure {
            title: "decay & fit".into(),
            x_label: "tau (us)".into(),
            y_label: "normalized difference".into(),
            series: vec![
                Series::points("data", data.clone()),
                Series::line("fit", data),
            ],
        }
    }

    #[test]
    fn renders_well_formed_svg() {
        let svg = render_svg(&decay_figure()).unwrap();
        assert!(svg.starts_with("<?xml"));
        assert!(svg.contains("<svg"));
        assert_well_formed_xml(&svg);
        assert!(svg.contains("tau (us)"));
        assert!(svg.contains("decay &amp; fit"));
    }

    #[test]
    fn two_series_are_distinguishable() {
        let svg = render_svg(&decay_figure()).unwrap();
        assert!(svg.contains(PALETTE[0]));
        assert!(svg.contains(PALETTE[1]));
        assert!(svg.contains(">data<"));
        assert!(svg.contains(">fit<"));
    }

    #[test]
    fn deterministic_output() {
        let a = render_svg(&decay_figure()).unwrap();
        let b = render_svg(&decay_figure()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_input_is_an_error() {
        let fig = Figure {
            title: String::new(),
            x_label: String::new(),
            y_label: String::new(),
            series: vec![Series::points("empty", vec![])],
        };
        assert_eq!(render_svg(&fig).unwrap_err(), PlotError::Empty);
    }
}
