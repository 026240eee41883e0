//! Minimal line-plot SVG writer: linear axes, polylines, markers.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const TICKS: usize = 5;

pub struct Series {
    pub label: String,
    pub dash: &'static str,
    pub points: Vec<(f64, f64)>,
}

pub struct Marker {
    pub label: String,
    pub x: f64,
    pub y: f64,
}

pub struct HLine {
    pub label: String,
    pub y: f64,
}

pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub markers: Vec<Marker>,
    pub hlines: Vec<HLine>,
}

/// Stroke pattern per curve index.
pub fn dash(i: usize) -> &'static str {
    ["", "8 4", "2 3", "10 3 2 3", "14 4 4 4", "1 6"][i % 6]
}

fn bounds(plot: &Plot) -> Option<(f64, f64, f64, f64)> {
    let xs = plot
        .series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.0))
        .chain(plot.markers.iter().map(|m| m.x));
    let ys = plot
        .series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .chain(plot.markers.iter().map(|m| m.y))
        .chain(plot.hlines.iter().map(|h| h.y));
    let fold = |it: &mut dyn Iterator<Item = f64>| {
        it.filter(|v| v.is_finite())
            .fold(None, |acc: Option<(f64, f64)>, v| match acc {
                None => Some((v, v)),
                Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
            })
    };
    let (x0, x1) = fold(&mut xs.into_iter())?;
    let (y0, y1) = fold(&mut ys.into_iter())?;
    let pad = |lo: f64, hi: f64| {
        if hi > lo {
            let p = 0.05 * (hi - lo);
            (lo - p, hi + p)
        } else {
            (lo - 0.5 * lo.abs().max(1.0), hi + 0.5 * hi.abs().max(1.0))
        }
    };
    let (x0, x1) = pad(x0, x1);
    let (y0, y1) = pad(y0, y1);
    Some((x0, x1, y0, y1))
}

fn px(v: f64) -> String {
    format!("{v:.2}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render(plot: &Plot) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        px(LEFT + (WIDTH - LEFT - RIGHT) / 2.0),
        escape(&plot.title)
    );
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let Some((x0, x1, y0, y1)) = bounds(plot) else {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">no data</text>"#,
            px(LEFT + pw / 2.0),
            px(TOP + ph / 2.0)
        );
        out.push_str("</svg>\n");
        return out;
    };
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    for i in 0..=TICKS {
        let t = i as f64 / TICKS as f64;
        let xv = x0 + t * (x1 - x0);
        let yv = y0 + t * (y1 - y0);
        let _ = writeln!(
            out,
            r#"<line x1="{x}" y1="{b}" x2="{x}" y2="{b2}" stroke="black"/><text x="{x}" y="{tl}" text-anchor="middle">{}</text>"#,
            fmt_tick(xv),
            x = px(sx(xv)),
            b = px(TOP + ph),
            b2 = px(TOP + ph + 5.0),
            tl = px(TOP + ph + 18.0),
        );
        let _ = writeln!(
            out,
            r#"<line x1="{l}" y1="{y}" x2="{l2}" y2="{y}" stroke="black"/><text x="{tl}" y="{y}" text-anchor="end" dominant-baseline="middle">{}</text>"#,
            fmt_tick(yv),
            y = px(sy(yv)),
            l = px(LEFT - 5.0),
            l2 = px(LEFT),
            tl = px(LEFT - 8.0),
        );
    }
    if y0 < 0.0 && y1 > 0.0 {
        let _ = writeln!(
            out,
            r#"<line x1="{LEFT}" y1="{y}" x2="{}" y2="{y}" stroke="gray"/>"#,
            px(LEFT + pw),
            y = px(sy(0.0))
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        px(LEFT + pw / 2.0),
        px(HEIGHT - 15.0),
        escape(&plot.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="20" y="{y}" text-anchor="middle" transform="rotate(-90 20 {y})">{}</text>"#,
        escape(&plot.y_label),
        y = px(TOP + ph / 2.0)
    );

    let mut legend_y = TOP + 10.0;
    let legend_x = LEFT + pw + 15.0;
    for h in &plot.hlines {
        let y = px(sy(h.y));
        let _ = writeln!(
            out,
            r#"<line x1="{LEFT}" y1="{y}" x2="{}" y2="{y}" stroke="black" stroke-dasharray="3 3"/>"#,
            px(LEFT + pw)
        );
        legend(&mut out, legend_x, legend_y, "3 3", &h.label);
        legend_y += 18.0;
    }
    for s in &plot.series {
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{},{}", px(sx(x)), px(sy(y))))
            .collect();
        if pts.is_empty() {
            continue;
        }
        let dash_attr = if s.dash.is_empty() {
            String::new()
        } else {
            format!(r#" stroke-dasharray="{}""#, s.dash)
        };
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="black" stroke-width="1.5"{dash_attr} points="{}"/>"#,
            pts.join(" ")
        );
        legend(&mut out, legend_x, legend_y, s.dash, &s.label);
        legend_y += 18.0;
    }
    for m in &plot.markers {
        if !(m.x.is_finite() && m.y.is_finite()) {
            continue;
        }
        let (x, y) = (sx(m.x), sy(m.y));
        let _ = writeln!(
            out,
            r#"<circle cx="{}" cy="{}" r="4" fill="white" stroke="black"/><text x="{}" y="{}">{}</text>"#,
            px(x),
            px(y),
            px(x + 6.0),
            px(y - 6.0),
            escape(&m.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn legend(out: &mut String, x: f64, y: f64, dash: &str, label: &str) {
    let dash_attr = if dash.is_empty() {
        String::new()
    } else {
        format!(r#" stroke-dasharray="{dash}""#)
    };
    let _ = writeln!(
        out,
        r#"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="black" stroke-width="1.5"{dash_attr}/><text x="{}" y="{}">{}</text>"#,
        px(x),
        px(x + 30.0),
        px(x + 36.0),
        px(y + 4.0),
        escape(label),
        y = px(y)
    );
}

fn fmt_tick(v: f64) -> String {
    let r = format!("{v:.4}");
    let r = r.trim_end_matches('0').trim_end_matches('.');
    if r == "-0" {
        "0".into()
    } else {
        r.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_plot_says_no_data() {
        let p = Plot {
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            series: vec![],
            markers: vec![],
            hlines: vec![],
        };
        assert!(render(&p).contains("no data"));
    }

    #[test]
    fn flat_series_renders() {
        let p = Plot {
            title: "flat".into(),
            x_label: "sigma".into(),
            y_label: "q".into(),
            series: vec![Series {
                label: "c".into(),
                dash: dash(1),
                points: vec![(1.0, 0.5), (2.0, 0.5)],
            }],
            markers: vec![],
            hlines: vec![],
        };
        let s = render(&p);
        assert!(s.contains("<polyline"));
        assert!(s.contains(r#"stroke-dasharray="8 4""#));
    }

    #[test]
    fn ticks_are_short() {
        assert_eq!(fmt_tick(0.5), "0.5");
        assert_eq!(fmt_tick(-0.00001), "0");
        assert_eq!(fmt_tick(2.0), "2");
    }
}
