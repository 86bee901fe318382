//! Deterministic SVG line and scatter charts.

use std::collections::BTreeMap;
use std::fmt::Write;

use entroute::io::{AverageRow, RateRow};
use entroute::Strategy;

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 460.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 560.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 390.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Datum {
    pub x: f64,
    pub y: f64,
    pub err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<Datum>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub log_y: bool,
    /// Join points with lines; otherwise draw markers only.
    pub lines: bool,
}

/// Which column of an average-rate CSV goes on the x axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AverageX {
    Nodes,
    Q,
}

fn strategy_rank(name: &str) -> usize {
    name.parse::<Strategy>()
        .ok()
        .and_then(|s| Strategy::ALL.iter().position(|&t| t == s))
        .unwrap_or(Strategy::ALL.len())
}

fn q_key(q: f64) -> i64 {
    (q * 1e9).round() as i64
}

fn distinct<T: Ord>(items: impl Iterator<Item = T>) -> usize {
    items.collect::<std::collections::BTreeSet<_>>().len()
}

/// One series per strategy, split by q when the file holds several.
pub fn distance_chart(rows: &[RateRow], log_y: bool) -> Chart {
    let many_q = distinct(rows.iter().map(|r| q_key(r.q))) > 1;
    let mut groups: BTreeMap<(usize, String, i64), Series> = BTreeMap::new();
    for r in rows {
        let key = (strategy_rank(&r.strategy), r.strategy.clone(), if many_q { q_key(r.q) } else { 0 });
        let label = if many_q { format!("{} q={}", r.strategy, r.q) } else { r.strategy.clone() };
        groups
            .entry(key)
            .or_insert_with(|| Series { label, points: Vec::new() })
            .points
            .push(Datum { x: r.distance_km, y: r.rate, err: r.stderr });
    }
    Chart {
        title: "Entanglement rate vs distance".into(),
        x_label: "distance (km)".into(),
        y_label: "rate (pairs per cycle)".into(),
        series: groups.into_values().collect(),
        log_y,
        lines: false,
    }
}

/// Picks the x column automatically: network size when several sizes are
/// present, q otherwise.
pub fn average_x_auto(rows: &[AverageRow]) -> AverageX {
    if distinct(rows.iter().map(|r| r.n_nodes)) > 1 {
        AverageX::Nodes
    } else {
        AverageX::Q
    }
}

/// One series per strategy, split by topology and by the column not on the
/// x axis when those vary.
pub fn average_chart(rows: &[AverageRow], x: AverageX, log_y: bool) -> Chart {
    let many_topo = distinct(rows.iter().map(|r| r.topology.as_str())) > 1;
    let split = match x {
        AverageX::Nodes => distinct(rows.iter().map(|r| q_key(r.q))) > 1,
        AverageX::Q => distinct(rows.iter().map(|r| r.n_nodes)) > 1,
    };
    let mut groups: BTreeMap<(String, usize, String, i64), Series> = BTreeMap::new();
    for r in rows {
        let (x_val, other_key, other_label) = match x {
            AverageX::Nodes => (r.n_nodes as f64, q_key(r.q), format!("q={}", r.q)),
            AverageX::Q => (r.q, r.n_nodes as i64, format!("n={}", r.n_nodes)),
        };
        let mut label = r.strategy.clone();
        if split {
            label = format!("{label} {other_label}");
        }
        if many_topo {
            label = format!("{} {label}", r.topology);
        }
        let key = (
            if many_topo { r.topology.clone() } else { String::new() },
            strategy_rank(&r.strategy),
            r.strategy.clone(),
            if split { other_key } else { 0 },
        );
        groups
            .entry(key)
            .or_insert_with(|| Series { label, points: Vec::new() })
            .points
            .push(Datum { x: x_val, y: r.avg_rate, err: r.stderr });
    }
    let mut series: Vec<Series> = groups.into_values().collect();
    for s in &mut series {
        s.points.sort_by(|a, b| a.x.total_cmp(&b.x));
    }
    let (title, x_label) = match x {
        AverageX::Nodes => ("Average rate vs network size", "nodes"),
        AverageX::Q => ("Average rate vs operation success probability", "q"),
    };
    Chart {
        title: title.into(),
        x_label: x_label.into(),
        y_label: "average rate (pairs per cycle)".into(),
        series,
        log_y,
        lines: true,
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn nice_step(span: f64, target: usize) -> f64 {
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let nice = if f <= 1.0 {
        1.0
    } else if f <= 2.0 {
        2.0
    } else if f <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

/// Axis range snapped outwards to a tick step, and the ticks within it.
fn linear_axis(lo: f64, hi: f64) -> (f64, f64, Vec<f64>, usize) {
    let (lo, hi) = if hi > lo {
        (lo, hi)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        (lo - pad, hi + pad)
    };
    let step = nice_step(hi - lo, 5);
    // tolerate rounding so exact multiples do not gain an extra tick
    let start = (lo / step + 1e-9).floor();
    let end = (hi / step - 1e-9).ceil();
    let ticks = (start as i64..=end as i64).map(|k| k as f64 * step).collect();
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    (start * step, end * step, ticks, decimals)
}

fn format_tick(v: f64, decimals: usize) -> String {
    let s = format!("{:.*}", decimals, v);
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        format!("{:.*}", decimals, 0.0)
    } else {
        s
    }
}

/// Renders the chart. Returns the SVG text and any warnings (dropped points,
/// no data).
pub fn render(chart: &Chart) -> (String, Vec<String>) {
    let mut warnings = Vec::new();
    let mut series: Vec<Series> = chart.series.clone();
    if chart.log_y {
        let mut dropped = 0;
        for s in &mut series {
            let before = s.points.len();
            s.points.retain(|p| p.y > 0.0);
            dropped += before - s.points.len();
        }
        if dropped > 0 {
            warnings.push(format!("{dropped} non-positive values left off the log-scale axis"));
        }
    }
    let all: Vec<Datum> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    if all.is_empty() {
        warnings.push("no data to plot; drawing empty axes".into());
    }

    let (x_lo, x_hi, x_ticks, x_dec) = if all.is_empty() {
        linear_axis(0.0, 1.0)
    } else {
        let lo = all.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
        let hi = all.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
        linear_axis(lo, hi)
    };

    // y axis in display units: log10(y) for log charts
    let (y_lo, y_hi, y_ticks, y_labels): (f64, f64, Vec<f64>, Vec<String>) = if chart.log_y {
        let (lo, hi) = if all.is_empty() {
            (-2.0, 0.0)
        } else {
            let lo = all.iter().map(|p| p.y.log10()).fold(f64::INFINITY, f64::min).floor();
            let hi = all.iter().map(|p| p.y.log10()).fold(f64::NEG_INFINITY, f64::max).ceil();
            (lo, if hi > lo { hi } else { lo + 1.0 })
        };
        let ticks: Vec<f64> = (lo as i64..=hi as i64).map(|k| k as f64).collect();
        let labels = ticks.iter().map(|k| format!("1e{}", *k as i64)).collect();
        (lo, hi, ticks, labels)
    } else {
        let (lo, hi) = if all.is_empty() {
            (0.0, 1.0)
        } else {
            let lo = all.iter().map(|p| p.y).fold(0.0, f64::min);
            let hi = all.iter().map(|p| p.y + p.err).fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        };
        let (lo, hi, ticks, dec) = linear_axis(lo, hi);
        let labels = ticks.iter().map(|&t| format_tick(t, dec)).collect();
        (lo, hi, ticks, labels)
    };

    let sx = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * (RIGHT - LEFT);
    let to_axis = |y: f64| if chart.log_y { y.max(1e-300).log10() } else { y };
    let sy = |y: f64| BOTTOM - (to_axis(y).clamp(y_lo, y_hi) - y_lo) / (y_hi - y_lo) * (BOTTOM - TOP);
    let sy_axis = |v: f64| BOTTOM - (v - y_lo) / (y_hi - y_lo) * (BOTTOM - TOP);

    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(w, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="28" text-anchor="middle" font-size="15">{}</text>"#,
        (LEFT + RIGHT) / 2.0,
        escape(&chart.title)
    );

    let _ = writeln!(w, r##"<g stroke="#dddddd" stroke-width="1">"##);
    for &t in &x_ticks {
        let _ = writeln!(w, r#"<line x1="{0:.2}" y1="{TOP:.2}" x2="{0:.2}" y2="{BOTTOM:.2}"/>"#, sx(t));
    }
    for &t in &y_ticks {
        let _ = writeln!(w, r#"<line x1="{LEFT:.2}" y1="{0:.2}" x2="{RIGHT:.2}" y2="{0:.2}"/>"#, sy_axis(t));
    }
    let _ = writeln!(w, "</g>");
    let _ = writeln!(
        w,
        r##"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#000000"/>"##,
        RIGHT - LEFT,
        BOTTOM - TOP
    );
    for &t in &x_ticks {
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            sx(t),
            BOTTOM + 18.0,
            format_tick(t, x_dec)
        );
    }
    for (&t, label) in y_ticks.iter().zip(&y_labels) {
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            sy_axis(t) + 4.0,
            label
        );
    }
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (LEFT + RIGHT) / 2.0,
        BOTTOM + 40.0,
        escape(&chart.x_label)
    );
    let _ = writeln!(
        w,
        r#"<text x="20" y="{0:.2}" text-anchor="middle" transform="rotate(-90 20 {0:.2})">{1}</text>"#,
        (TOP + BOTTOM) / 2.0,
        escape(&chart.y_label)
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(w, r#"<g stroke="{color}" fill="{color}">"#);
        if chart.lines && s.points.len() > 1 {
            let pts: Vec<String> =
                s.points.iter().map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.y))).collect();
            let _ = writeln!(w, r#"<polyline fill="none" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        }
        for p in &s.points {
            if p.err > 0.0 {
                let lo = if chart.log_y && p.y - p.err <= 0.0 { p.y } else { p.y - p.err };
                let _ = writeln!(
                    w,
                    r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}"/>"#,
                    sx(p.x),
                    sy(lo),
                    sy(p.y + p.err)
                );
            }
            let _ = writeln!(w, r#"<circle cx="{:.2}" cy="{:.2}" r="3"/>"#, sx(p.x), sy(p.y));
        }
        let _ = writeln!(w, "</g>");
    }

    let _ = writeln!(w, r#"<g class="legend">"#);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let y = TOP + 10.0 + 20.0 * i as f64;
        let _ = writeln!(
            w,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="3"/>"#,
            RIGHT + 20.0,
            RIGHT + 44.0
        );
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            RIGHT + 50.0,
            y + 4.0,
            escape(&s.label)
        );
    }
    let _ = writeln!(w, "</g>");
    let _ = writeln!(w, "</svg>");
    (out, warnings)
}
