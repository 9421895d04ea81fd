//! Static SVG figures: a scatter of per-system means under both qrels, and
//! discrimination metrics against the sampled fraction.
//!
//! The markup is assembled by hand with fixed number formatting so the same
//! input always produces the same bytes.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::report::{read_csv, UNDEFINED};
use crate::sweep::Aggregate;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

/// Metrics drawn on the sweep plot, with their legend labels and colours.
pub const SWEEP_METRICS: [(&str, &str, &str); 6] = [
    ("p1", "①P", "#1f77b4"),
    ("r1", "①R", "#ff7f0e"),
    ("p2", "②P", "#2ca02c"),
    ("r2", "②R", "#d62728"),
    ("bac", "BAC", "#9467bd"),
    ("mcc", "MCC", "#8c564b"),
];

const PAIRS_REQUIRED: [&str; 7] = [
    "system_a",
    "system_b",
    "mean_a_gt",
    "mean_b_gt",
    "mean_a_cand",
    "mean_b_cand",
    "class",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Scatter,
    Sweep,
}

struct Frame {
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        LEFT + v.clamp(0.0, 1.0) * (WIDTH - LEFT - RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        let t = (v.clamp(self.y_min, self.y_max) - self.y_min) / (self.y_max - self.y_min);
        HEIGHT - BOTTOM - t * (HEIGHT - TOP - BOTTOM)
    }
}

fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn open_svg(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        out,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        num((LEFT + WIDTH - RIGHT) / 2.0),
        escape(title)
    );
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let (x0, x1, y0, y1) = (f.x(0.0), f.x(1.0), f.y(f.y_min), f.y(f.y_max));
    let _ = writeln!(
        out,
        r#"<rect class="frame" x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        num(x0),
        num(y1),
        num(x1 - x0),
        num(y0 - y1)
    );
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            num(f.x(v)),
            num(y0 + 18.0),
            num(v)
        );
        let yv = f.y_min + v * (f.y_max - f.y_min);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            num(x0 - 6.0),
            num(f.y(yv) + 4.0),
            num(yv)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        num((x0 + x1) / 2.0),
        num(HEIGHT - 16.0),
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        num((y0 + y1) / 2.0),
        num((y0 + y1) / 2.0),
        escape(y_label)
    );
}

fn legend(out: &mut String, entries: &[(&str, &str)]) {
    let x = WIDTH - RIGHT + 20.0;
    for (i, (label, colour)) in entries.iter().enumerate() {
        let y = TOP + 10.0 + i as f64 * 20.0;
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="12" height="12" fill="{colour}"/>"#,
            num(x),
            num(y)
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}">{}</text>"#,
            num(x + 18.0),
            num(y + 10.0),
            escape(label)
        );
    }
}

fn missing(header: &[String], required: &[&str]) -> Vec<String> {
    required
        .iter()
        .filter(|c| !header.iter().any(|h| h == *c))
        .map(|c| c.to_string())
        .collect()
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).expect("column checked")
}

fn parse_real(path: &Path, s: &str) -> Result<Option<f64>> {
    if s == UNDEFINED || s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>().map(Some).map_err(|_| Error::Csv {
        path: path.to_path_buf(),
        message: format!("expected a number, found {s:?}"),
    })
}

fn sweep_required() -> Vec<String> {
    let mut cols = vec!["fraction".to_string()];
    cols.extend(SWEEP_METRICS.iter().map(|m| m.0.to_string()));
    cols
}

fn summary_required() -> Vec<String> {
    let mut cols = vec!["fraction".to_string()];
    for (m, _, _) in SWEEP_METRICS {
        cols.push(format!("{m}_mean"));
        cols.push(format!("{m}_var"));
    }
    cols
}

/// Determines which figure a CSV header supports. An unknown header yields
/// an error naming the columns missing from the closest known layout.
pub fn detect(path: &Path, header: &[String]) -> Result<PlotKind> {
    let pairs = missing(header, &PAIRS_REQUIRED);
    let sweep_req = sweep_required();
    let summary_req = summary_required();
    let sweep = missing(header, &sweep_req.iter().map(String::as_str).collect::<Vec<_>>());
    let summary = missing(header, &summary_req.iter().map(String::as_str).collect::<Vec<_>>());
    if pairs.is_empty() {
        return Ok(PlotKind::Scatter);
    }
    if sweep.is_empty() || summary.is_empty() {
        return Ok(PlotKind::Sweep);
    }
    let closest = [pairs, sweep, summary]
        .into_iter()
        .min_by_key(Vec::len)
        .expect("non-empty");
    Err(Error::Csv {
        path: path.to_path_buf(),
        message: format!("unrecognised CSV layout; missing columns: {}", closest.join(", ")),
    })
}

/// Renders whichever figure matches the CSV at `path`.
pub fn plot_file(path: &Path) -> Result<(PlotKind, String)> {
    let (header, rows) = read_csv(path)?;
    match detect(path, &header)? {
        PlotKind::Scatter => Ok((PlotKind::Scatter, scatter_from_rows(path, &header, &rows)?)),
        PlotKind::Sweep => Ok((PlotKind::Sweep, sweep_from_rows(path, &header, &rows)?)),
    }
}

struct PairLine {
    a: String,
    b: String,
    class: String,
}

fn scatter_from_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let idx: Vec<usize> = PAIRS_REQUIRED.iter().map(|c| column(header, c)).collect();
    let mut points: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    let mut lines = Vec::new();
    for row in rows {
        let get = |k: usize| row.get(idx[k]).map(String::as_str).unwrap_or("");
        let real = |k: usize| -> Result<f64> {
            parse_real(path, get(k))?.ok_or_else(|| Error::Csv {
                path: path.to_path_buf(),
                message: format!("column {} has no value", PAIRS_REQUIRED[k]),
            })
        };
        points.insert(get(0).to_string(), (real(2)?, real(4)?));
        points.insert(get(1).to_string(), (real(3)?, real(5)?));
        if matches!(get(6), "FP" | "FN") {
            lines.push(PairLine {
                a: get(0).to_string(),
                b: get(1).to_string(),
                class: get(6).to_string(),
            });
        }
    }
    Ok(scatter_svg(&points, &lines))
}

fn scatter_svg(points: &BTreeMap<String, (f64, f64)>, lines: &[PairLine]) -> String {
    let f = Frame { y_min: 0.0, y_max: 1.0 };
    let mut out = String::new();
    open_svg(&mut out, "Per-system mean score: ground truth vs candidate");
    axes(&mut out, &f, "ground-truth mean", "candidate mean");
    let _ = writeln!(
        out,
        r##"<line class="diagonal" x1="{}" y1="{}" x2="{}" y2="{}" stroke="#888888" stroke-dasharray="4 4"/>"##,
        num(f.x(0.0)),
        num(f.y(0.0)),
        num(f.x(1.0)),
        num(f.y(1.0))
    );
    for l in lines {
        let (pa, pb) = (points[&l.a], points[&l.b]);
        let colour = if l.class == "FP" { "#d62728" } else { "#1f77b4" };
        let _ = writeln!(
            out,
            r#"<line class="pair-{}" x1="{}" y1="{}" x2="{}" y2="{}" stroke="{colour}" stroke-opacity="0.6"><title>{} / {}: {}</title></line>"#,
            l.class.to_lowercase(),
            num(f.x(pa.0)),
            num(f.y(pa.1)),
            num(f.x(pb.0)),
            num(f.y(pb.1)),
            escape(&l.a),
            escape(&l.b),
            l.class
        );
    }
    for (name, (x, y)) in points {
        let _ = writeln!(
            out,
            r#"<circle class="system" cx="{}" cy="{}" r="4" fill="black"><title>{}</title></circle>"#,
            num(f.x(*x)),
            num(f.y(*y)),
            escape(name)
        );
    }
    legend(&mut out, &[("FP pair", "#d62728"), ("FN pair", "#1f77b4")]);
    out.push_str("</svg>\n");
    out
}

/// Per-fraction mean and variance of one plotted metric.
pub type Series = Vec<(f64, Option<Aggregate>)>;

fn sweep_from_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let summary = missing(
        header,
        &summary_required().iter().map(String::as_str).collect::<Vec<_>>(),
    )
    .is_empty();
    let frac_col = column(header, "fraction");
    let mut fractions: Vec<f64> = Vec::new();
    for row in rows {
        let f = parse_real(path, &row[frac_col])?.ok_or_else(|| Error::Csv {
            path: path.to_path_buf(),
            message: "fraction has no value".into(),
        })?;
        if !fractions.contains(&f) {
            fractions.push(f);
        }
    }
    let mut series = Vec::new();
    for (metric, _, _) in SWEEP_METRICS {
        let mut s: Series = Vec::new();
        for &f in &fractions {
            let in_f = rows.iter().filter(|r| r[frac_col].parse::<f64>().ok() == Some(f));
            let agg = if summary {
                let row = in_f.into_iter().next().expect("fraction came from rows");
                let mean = parse_real(path, &row[column(header, &format!("{metric}_mean"))])?;
                let var = parse_real(path, &row[column(header, &format!("{metric}_var"))])?;
                mean.map(|m| Aggregate {
                    mean: Some(m),
                    variance: Some(var.unwrap_or(0.0)),
                    defined: 1,
                })
            } else {
                let c = column(header, metric);
                let values = in_f.map(|r| parse_real(path, &r[c])).collect::<Result<Vec<_>>>()?;
                Some(Aggregate::of(values)).filter(|a| a.mean.is_some())
            };
            s.push((f, agg));
        }
        series.push(s);
    }
    Ok(sweep_svg(&series))
}

/// One polyline per metric through the defined means, with vertical error
/// bars spanning mean ± variance.
pub fn sweep_svg(series: &[Series]) -> String {
    let negative = series
        .iter()
        .flatten()
        .filter_map(|(_, a)| *a)
        .any(|a| a.mean.unwrap_or(0.0) - a.variance.unwrap_or(0.0) < 0.0);
    let f = Frame {
        y_min: if negative { -1.0 } else { 0.0 },
        y_max: 1.0,
    };
    let mut out = String::new();
    open_svg(
        &mut out,
        "Classification metrics vs fraction of relevant documents sampled",
    );
    axes(&mut out, &f, "fraction of relevant documents sampled", "metric value");
    for ((metric, _, colour), s) in SWEEP_METRICS.iter().zip(series) {
        let defined: Vec<(f64, Aggregate)> = s.iter().filter_map(|(x, a)| a.map(|a| (*x, a))).collect();
        for (x, a) in &defined {
            let (m, v) = (a.mean.unwrap_or(0.0), a.variance.unwrap_or(0.0));
            let _ = writeln!(
                out,
                r#"<line class="errorbar-{metric}" x1="{}" y1="{}" x2="{}" y2="{}" stroke="{colour}"/>"#,
                num(f.x(*x)),
                num(f.y(m - v)),
                num(f.x(*x)),
                num(f.y(m + v))
            );
        }
        let pts: Vec<String> = defined
            .iter()
            .map(|(x, a)| format!("{},{}", num(f.x(*x)), num(f.y(a.mean.unwrap_or(0.0)))))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline class="metric-{metric}" points="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#,
            pts.join(" ")
        );
    }
    let entries: Vec<(&str, &str)> = SWEEP_METRICS.iter().map(|(_, label, c)| (*label, *c)).collect();
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    out
}
