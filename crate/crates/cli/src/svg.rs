//! Standalone SVG charts.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 70.0;
const TOP: f64 = 74.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bar {
    Value(f64),
    Infinite,
    Missing,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    s
}

fn plot_width() -> f64 {
    WIDTH - LEFT - RIGHT
}

fn plot_height() -> f64 {
    HEIGHT - TOP - BOTTOM
}

fn axes(s: &mut String, x_label: &str, y_label: &str) {
    let x0 = LEFT;
    let y0 = HEIGHT - BOTTOM;
    let _ = writeln!(
        s,
        r#"<path d="M{x0} {TOP} L{x0} {y0} L{} {y0}" stroke="black" fill="none"/>"#,
        WIDTH - RIGHT
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + plot_width() / 2.0,
        HEIGHT - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        TOP + plot_height() / 2.0,
        TOP + plot_height() / 2.0,
        escape(y_label)
    );
}

fn legend(s: &mut String, entries: &[(String, &str, bool)]) {
    for (i, (name, colour, line)) in entries.iter().enumerate() {
        let x = LEFT + 125.0 * (i % 5) as f64;
        let y = 44.0 + 16.0 * (i / 5) as f64;
        if *line {
            let _ = writeln!(
                s,
                r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{colour}" stroke-width="2"/>"#,
                x + 14.0
            );
        } else {
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{}" width="14" height="10" fill="{colour}"/>"#,
                y - 5.0
            );
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, x + 18.0, y + 4.0, escape(name));
    }
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn linear_ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

/// Grouped bars on a log scale with optional lines on a right-hand [0, 1]
/// axis. Infinite bars reach the top and are labelled; missing ones are
/// labelled `NA`.
pub fn grouped_bar_chart(
    title: &str,
    x_label: &str,
    groups: &[String],
    bars: &[(String, Vec<Bar>)],
    overlay: &[(String, Vec<Option<f64>>)],
) -> String {
    let finite: Vec<f64> = bars
        .iter()
        .flat_map(|(_, v)| v.iter())
        .filter_map(|b| match b {
            Bar::Value(x) if *x > 0.0 && x.is_finite() => Some(*x),
            _ => None,
        })
        .collect();
    let lo_exp = finite.iter().cloned().fold(f64::INFINITY, f64::min).log10().floor();
    let hi_exp = finite.iter().cloned().fold(f64::NEG_INFINITY, f64::max).log10().ceil();
    let (lo_exp, hi_exp) = if finite.is_empty() {
        (0.0, 1.0)
    } else if hi_exp <= lo_exp {
        (lo_exp, lo_exp + 1.0)
    } else {
        (lo_exp, hi_exp)
    };
    // Room above the largest finite bar for infinite ones.
    let top_exp = hi_exp + 0.25;
    let y_of = |v: f64| {
        let e = v.log10().clamp(lo_exp, top_exp);
        HEIGHT - BOTTOM - (e - lo_exp) / (top_exp - lo_exp) * plot_height()
    };

    let mut s = header(title);
    axes(&mut s, x_label, "upper bound (log scale)");
    let mut e = lo_exp;
    while e <= hi_exp + 1e-9 {
        let y = y_of(10f64.powf(e));
        let _ = writeln!(
            s,
            r##"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="#dddddd"/><text x="{}" y="{}" text-anchor="end">{}</text>"##,
            LEFT,
            WIDTH - RIGHT,
            LEFT - 5.0,
            y + 4.0,
            fmt_tick(10f64.powf(e))
        );
        e += 1.0;
    }

    let n_groups = groups.len().max(1);
    let group_w = plot_width() / n_groups as f64;
    let bar_w = group_w * 0.7 / bars.len().max(1) as f64;
    let base = HEIGHT - BOTTOM;
    for (g, name) in groups.iter().enumerate() {
        let gx = LEFT + g as f64 * group_w;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            gx + group_w / 2.0,
            base + 18.0,
            escape(name)
        );
        for (j, (_, values)) in bars.iter().enumerate() {
            let colour = PALETTE[j % PALETTE.len()];
            let x = gx + group_w * 0.15 + j as f64 * bar_w;
            let cx = x + bar_w / 2.0;
            match values.get(g).copied().unwrap_or(Bar::Missing) {
                Bar::Value(v) if v > 0.0 && v.is_finite() => {
                    let y = y_of(v);
                    let _ = writeln!(
                        s,
                        r#"<rect x="{x}" y="{y}" width="{bar_w}" height="{}" fill="{colour}"><title>{v}</title></rect>"#,
                        base - y
                    );
                }
                Bar::Infinite => {
                    let y = TOP;
                    let _ = writeln!(
                        s,
                        r#"<rect x="{x}" y="{y}" width="{bar_w}" height="{}" fill="{colour}" fill-opacity="0.35" stroke="{colour}" stroke-dasharray="4 3"/><text x="{cx}" y="{}" text-anchor="middle">inf</text>"#,
                        base - y,
                        y - 4.0
                    );
                }
                _ => {
                    let _ = writeln!(
                        s,
                        r#"<text x="{cx}" y="{}" text-anchor="middle">NA</text>"#,
                        base - 4.0
                    );
                }
            }
        }
    }

    if !overlay.is_empty() {
        let rx = WIDTH - RIGHT;
        let _ = writeln!(s, r#"<line x1="{rx}" y1="{TOP}" x2="{rx}" y2="{base}" stroke="black"/>"#);
        for t in linear_ticks(0.0, 1.0, 5) {
            let y = base - t * plot_height();
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}">{}</text>"#,
                rx + 5.0,
                y + 4.0,
                fmt_tick(t)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{y}" text-anchor="middle" transform="rotate(90 {x} {y})">accuracy</text>"#,
            x = WIDTH - 18.0,
            y = TOP + plot_height() / 2.0
        );
        for (j, (_, values)) in overlay.iter().enumerate() {
            let colour = PALETTE[(bars.len() + j) % PALETTE.len()];
            let points: Vec<(f64, f64)> = values
                .iter()
                .enumerate()
                .filter_map(|(g, v)| {
                    v.map(|a| (LEFT + (g as f64 + 0.5) * group_w, base - a.clamp(0.0, 1.0) * plot_height()))
                })
                .collect();
            polyline(&mut s, &points, colour);
        }
    }

    let mut entries: Vec<(String, &str, bool)> = bars
        .iter()
        .enumerate()
        .map(|(j, (n, _))| (n.clone(), PALETTE[j % PALETTE.len()], false))
        .collect();
    entries.extend(
        overlay
            .iter()
            .enumerate()
            .map(|(j, (n, _))| (n.clone(), PALETTE[(bars.len() + j) % PALETTE.len()], true)),
    );
    legend(&mut s, &entries);
    s.push_str("</svg>\n");
    s
}

fn polyline(s: &mut String, points: &[(f64, f64)], colour: &str) {
    if points.is_empty() {
        return;
    }
    let pts: Vec<String> = points.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let _ = writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#,
        pts.join(" ")
    );
    for (x, y) in points {
        let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{colour}"/>"#);
    }
}

/// Lines over shared x positions on a linear scale.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    x: &[f64],
    series: &[(String, Vec<Option<f64>>)],
) -> String {
    let ys: Vec<f64> = series
        .iter()
        .flat_map(|(_, v)| v.iter().flatten().copied())
        .filter(|v| v.is_finite())
        .collect();
    let mut y_lo = ys.iter().cloned().fold(f64::INFINITY, f64::min).min(0.0);
    let mut y_hi = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !y_hi.is_finite() || y_hi <= y_lo {
        y_hi = y_lo + 1.0;
    }
    if !y_lo.is_finite() {
        y_lo = 0.0;
    }
    let x_lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut x_hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if x_hi <= x_lo {
        x_hi = x_lo + 1.0;
    }
    let px = |v: f64| LEFT + (v - x_lo) / (x_hi - x_lo) * plot_width();
    let py = |v: f64| HEIGHT - BOTTOM - (v - y_lo) / (y_hi - y_lo) * plot_height();

    let mut s = header(title);
    axes(&mut s, x_label, y_label);
    for t in linear_ticks(y_lo, y_hi, 5) {
        let y = py(t);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y}" x2="{}" y2="{y}" stroke="#dddddd"/><text x="{}" y="{}" text-anchor="end">{}</text>"##,
            WIDTH - RIGHT,
            LEFT - 5.0,
            y + 4.0,
            fmt_tick(t)
        );
    }
    for &v in x {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            px(v),
            HEIGHT - BOTTOM + 18.0,
            fmt_tick(v)
        );
    }
    for (j, (_, values)) in series.iter().enumerate() {
        let colour = PALETTE[j % PALETTE.len()];
        let points: Vec<(f64, f64)> = x
            .iter()
            .zip(values)
            .filter_map(|(&xv, v)| v.filter(|y| y.is_finite()).map(|y| (px(xv), py(y))))
            .collect();
        polyline(&mut s, &points, colour);
    }
    let entries: Vec<(String, &str, bool)> = series
        .iter()
        .enumerate()
        .map(|(j, (n, _))| (n.clone(), PALETTE[j % PALETTE.len()], true))
        .collect();
    legend(&mut s, &entries);
    s.push_str("</svg>\n");
    s
}

/// Step outlines of several histograms sharing bin edges.
pub fn histogram_chart(title: &str, x_label: &str, edges: &[f64], series: &[(String, Vec<f64>)]) -> String {
    let y_hi = series
        .iter()
        .flat_map(|(_, v)| v.iter().copied())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let x_lo = edges.first().copied().unwrap_or(0.0);
    let x_hi = edges.last().copied().unwrap_or(1.0).max(x_lo + 1e-12);
    let px = |v: f64| LEFT + (v - x_lo) / (x_hi - x_lo) * plot_width();
    let py = |v: f64| HEIGHT - BOTTOM - v / y_hi * plot_height();

    let mut s = header(title);
    axes(&mut s, x_label, "fraction");
    for t in linear_ticks(0.0, y_hi, 4) {
        let y = py(t);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            y + 4.0,
            fmt_tick(t)
        );
    }
    for t in linear_ticks(x_lo, x_hi, 5) {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            px(t),
            HEIGHT - BOTTOM + 18.0,
            fmt_tick(t)
        );
    }
    for (j, (_, values)) in series.iter().enumerate() {
        let colour = PALETTE[j % PALETTE.len()];
        let mut d = format!("M{:.2} {:.2}", px(x_lo), py(0.0));
        for (i, &v) in values.iter().enumerate() {
            let _ = write!(d, " L{:.2} {:.2} L{:.2} {:.2}", px(edges[i]), py(v), px(edges[i + 1]), py(v));
        }
        let _ = write!(d, " L{:.2} {:.2}", px(x_hi), py(0.0));
        let _ = writeln!(s, r#"<path d="{d}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#);
    }
    let entries: Vec<(String, &str, bool)> = series
        .iter()
        .enumerate()
        .map(|(j, (n, _))| (n.clone(), PALETTE[j % PALETTE.len()], true))
        .collect();
    legend(&mut s, &entries);
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_group_chart_is_well_formed() {
        let s = grouped_bar_chart(
            "t",
            "K+1",
            &["8".into()],
            &[("a".into(), vec![Bar::Value(5.0)]), ("b".into(), vec![Bar::Infinite])],
            &[("acc".into(), vec![Some(0.9)])],
        );
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<rect x=").count(), 2 + 2);
        assert!(s.contains(">inf<"));
    }

    #[test]
    fn labels_are_escaped() {
        let s = line_chart("a<b", "x", "y", &[1.0, 2.0], &[("s&t".into(), vec![Some(0.0), None])]);
        assert!(s.contains("a&lt;b") && s.contains("s&amp;t"));
    }
}
