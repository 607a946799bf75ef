//! Static SVG charts: per-axis line charts with min-max bands across seeds
//! and a Pareto scatter of archive points. Output is byte-deterministic.
//!
//! Every chart declares its linear mapping on the root element
//! (`data-plot`, `data-x-range`, `data-y-range`) so values can be read back.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cco_core::moppo::pareto_front;

use crate::table::ResultTable;
use crate::HarnessError;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Pixel box and data ranges of a plot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mapping {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Mapping {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        Mapping { left: 70.0, top: 40.0, width: 420.0, height: 300.0, x: widen(x), y: widen(y) }
    }

    pub fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x.0) / (self.x.1 - self.x.0) * self.width
    }

    pub fn py(&self, y: f64) -> f64 {
        self.top + self.height - (y - self.y.0) / (self.y.1 - self.y.0) * self.height
    }

    pub fn inv_x(&self, px: f64) -> f64 {
        self.x.0 + (px - self.left) / self.width * (self.x.1 - self.x.0)
    }

    pub fn inv_y(&self, py: f64) -> f64 {
        self.y.0 + (self.top + self.height - py) / self.height * (self.y.1 - self.y.0)
    }
}

/// Pads a range by 5% on each side; a degenerate range becomes +-0.5
/// (or +-5% of its magnitude).
fn widen((lo, hi): (f64, f64)) -> (f64, f64) {
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let pad = if lo == 0.0 { 0.5 } else { 0.05 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(svg: &mut String, title: &str, m: &Mapping, x_label: &str, y_label: &str) {
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" data-plot="{} {} {} {}" data-x-range="{} {}" data-y-range="{} {}">"#,
        m.left, m.top, m.width, m.height, m.x.0, m.x.1, m.y.0, m.y.1
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15" font-family="sans-serif">{}</text>"#,
        m.left + m.width / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        m.left, m.top, m.width, m.height
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = m.x.0 + f * (m.x.1 - m.x.0);
        let yv = m.y.0 + f * (m.y.1 - m.y.0);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="11" font-family="sans-serif">{}</text>"#,
            m.px(xv),
            m.top + m.height + 16.0,
            tick(xv)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="11" font-family="sans-serif">{}</text>"#,
            m.left - 6.0,
            m.py(yv) + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12" font-family="sans-serif">{}</text>"#,
        m.left + m.width / 2.0,
        m.top + m.height + 36.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.1}" text-anchor="middle" font-size="12" font-family="sans-serif" transform="rotate(-90 16 {:.1})">{}</text>"#,
        m.top + m.height / 2.0,
        m.top + m.height / 2.0,
        escape(y_label)
    );
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn legend(svg: &mut String, m: &Mapping, names: &[String]) {
    for (i, name) in names.iter().enumerate() {
        let y = m.top + 10.0 + 18.0 * i as f64;
        let x = m.left + m.width + 14.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{x}" y="{:.1}" width="12" height="12" fill="{}"/><text x="{}" y="{:.1}" font-size="12" font-family="sans-serif">{}</text>"#,
            y - 10.0,
            PALETTE[i % PALETTE.len()],
            x + 18.0,
            y,
            escape(name)
        );
    }
}

fn marker(svg: &mut String, m: &Mapping, series: &str, color: &str, x: f64, y: f64) {
    let _ = writeln!(
        svg,
        r#"<circle class="marker" data-series="{}" cx="{:.4}" cy="{:.4}" r="4" fill="{color}"/>"#,
        escape(series),
        m.px(x),
        m.py(y)
    );
}

/// One line: (x, mean, min, max) per axis value, sorted by x.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64, f64, f64)>,
}

pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut xr, mut yr) = ((f64::INFINITY, f64::NEG_INFINITY), (f64::INFINITY, f64::NEG_INFINITY));
    for &(x, _, lo, hi) in all {
        xr = (xr.0.min(x), xr.1.max(x));
        yr = (yr.0.min(lo), yr.1.max(hi));
    }
    if !xr.0.is_finite() {
        xr = (0.0, 1.0);
        yr = (0.0, 1.0);
    }
    let m = Mapping::new(xr, yr);
    let mut svg = String::new();
    header(&mut svg, title, &m, x_label, y_label);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if s.points.len() > 1 {
            let mut band = String::new();
            for &(x, _, _, hi) in &s.points {
                let _ = write!(band, "{:.4},{:.4} ", m.px(x), m.py(hi));
            }
            for &(x, _, lo, _) in s.points.iter().rev() {
                let _ = write!(band, "{:.4},{:.4} ", m.px(x), m.py(lo));
            }
            let _ = writeln!(
                svg,
                r#"<polygon class="band" points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#,
                band.trim_end()
            );
            let line: Vec<String> =
                s.points.iter().map(|&(x, y, _, _)| format!("{:.4},{:.4}", m.px(x), m.py(y))).collect();
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                line.join(" ")
            );
        } else if let Some(&(x, _, lo, hi)) = s.points.first() {
            let _ = writeln!(
                svg,
                r#"<line class="band" x1="{0:.4}" y1="{1:.4}" x2="{0:.4}" y2="{2:.4}" stroke="{color}" stroke-opacity="0.4" stroke-width="6"/>"#,
                m.px(x),
                m.py(hi),
                m.py(lo)
            );
        }
        for &(x, y, _, _) in &s.points {
            marker(&mut svg, &m, &s.name, color, x, y);
        }
    }
    legend(&mut svg, &m, &series.iter().map(|s| s.name.clone()).collect::<Vec<_>>());
    svg.push_str("</svg>\n");
    svg
}

/// Scatter of (coverage, capacity) points per group with the pooled
/// non-dominated front drawn as a step line.
pub fn pareto_chart(title: &str, groups: &[(String, Vec<[f64; 2]>)]) -> String {
    let pts: Vec<[f64; 2]> = groups.iter().flat_map(|g| g.1.iter().copied()).collect();
    let range = |k: usize| {
        pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |r, p| (r.0.min(p[k]), r.1.max(p[k])))
    };
    let (xr, yr) = if pts.is_empty() { ((0.0, 1.0), (0.0, 1.0)) } else { (range(0), range(1)) };
    let m = Mapping::new(xr, yr);
    let mut svg = String::new();
    header(&mut svg, title, &m, "coverage", "capacity");
    let mut front = pareto_front(&pts);
    front.sort_by(|a, b| a[0].total_cmp(&b[0]).then(b[1].total_cmp(&a[1])));
    front.dedup();
    if front.len() > 1 {
        let line: Vec<String> = front.iter().map(|p| format!("{:.4},{:.4}", m.px(p[0]), m.py(p[1]))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="front" points="{}" fill="none" stroke="gray" stroke-dasharray="4 3"/>"#,
            line.join(" ")
        );
    }
    for (i, (name, g)) in groups.iter().enumerate() {
        for p in g {
            marker(&mut svg, &m, name, PALETTE[i % PALETTE.len()], p[0], p[1]);
        }
    }
    legend(&mut svg, &m, &groups.iter().map(|g| g.0.clone()).collect::<Vec<_>>());
    svg.push_str("</svg>\n");
    svg
}

fn attr(tag: &str, name: &str) -> Option<String> {
    let key = format!(" {name}=\"");
    let start = tag.find(&key)? + key.len();
    let end = tag[start..].find('"')? + start;
    Some(tag[start..end].to_string())
}

fn floats(s: &str) -> Option<Vec<f64>> {
    s.split_whitespace().map(|t| t.parse().ok()).collect()
}

/// Reads the declared mapping back from a chart.
pub fn parse_mapping(svg: &str) -> Option<Mapping> {
    let root = &svg[svg.find("<svg")?..];
    let root = &root[..root.find('>')?];
    let plot = floats(&attr(root, "data-plot")?)?;
    let x = floats(&attr(root, "data-x-range")?)?;
    let y = floats(&attr(root, "data-y-range")?)?;
    if plot.len() != 4 || x.len() != 2 || y.len() != 2 {
        return None;
    }
    Some(Mapping { left: plot[0], top: plot[1], width: plot[2], height: plot[3], x: (x[0], x[1]), y: (y[0], y[1]) })
}

/// Data-space `(series, x, y)` of every marker.
pub fn parse_markers(svg: &str) -> Option<Vec<(String, f64, f64)>> {
    let m = parse_mapping(svg)?;
    svg.lines()
        .filter(|l| l.contains(r#"class="marker""#))
        .map(|l| {
            let cx: f64 = attr(l, "cx")?.parse().ok()?;
            let cy: f64 = attr(l, "cy")?.parse().ok()?;
            Some((attr(l, "data-series")?, m.inv_x(cx), m.inv_y(cy)))
        })
        .collect()
}

/// Mean, min and max of `f` per (strategy, axis value) over successful rows.
pub fn aggregate(table: &ResultTable, f: impl Fn(&crate::ResultRow) -> f64) -> Vec<Series> {
    let mut order: Vec<String> = Vec::new();
    let mut acc: BTreeMap<(String, u64), Vec<f64>> = BTreeMap::new();
    for r in table.rows.iter().filter(|r| r.ok()) {
        if !order.contains(&r.strategy) {
            order.push(r.strategy.clone());
        }
        acc.entry((r.strategy.clone(), r.axis_value.to_bits())).or_default().push(f(r));
    }
    order
        .into_iter()
        .map(|name| {
            let mut points: Vec<(f64, f64, f64, f64)> = acc
                .iter()
                .filter(|((s, _), _)| *s == name)
                .map(|((_, x), v)| {
                    let mean = v.iter().sum::<f64>() / v.len() as f64;
                    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    (f64::from_bits(*x), mean, lo, hi)
                })
                .collect();
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            Series { name, points }
        })
        .collect()
}

#[derive(Debug, Default)]
pub struct ChartReport {
    pub written: Vec<PathBuf>,
    pub failed: Vec<(PathBuf, String)>,
}

fn write_chart(report: &mut ChartReport, path: PathBuf, body: Result<String, HarnessError>) {
    let r = body.and_then(|s| std::fs::write(&path, s).map_err(|e| HarnessError::io(&path, e)));
    match r {
        Ok(()) => report.written.push(path),
        Err(e) => report.failed.push((path, e.to_string())),
    }
}

/// Writes `<axis>_coverage.svg`, `<axis>_capacity.svg` and `pareto.svg`.
pub fn emit_charts(table: &ResultTable, out_dir: &Path) -> Result<ChartReport, HarnessError> {
    let ok: Vec<_> = table.rows.iter().filter(|r| r.ok()).collect();
    let Some(first) = ok.first() else {
        return Err(HarnessError::Format("no successful rows to chart".into()));
    };
    std::fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let axis = first.axis.clone();
    let mut report = ChartReport::default();
    for (metric, f) in [
        ("coverage", (|r: &crate::ResultRow| r.final_coverage) as fn(&crate::ResultRow) -> f64),
        ("capacity", |r: &crate::ResultRow| r.final_capacity),
    ] {
        let series = aggregate(table, f);
        let svg = line_chart(&format!("final {metric} vs {axis}"), &axis, metric, &series);
        write_chart(&mut report, out_dir.join(format!("{axis}_{metric}.svg")), Ok(svg));
    }
    let mut groups: Vec<(String, Vec<[f64; 2]>)> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    let pareto = (|| {
        for r in &ok {
            if !seen.insert(r.archive_file.clone()) {
                continue;
            }
            let pts: Vec<[f64; 2]> = table.archive(r)?.iter().map(|e| e.point()).collect();
            match groups.iter_mut().find(|g| g.0 == r.strategy) {
                Some(g) => g.1.extend(pts),
                None => groups.push((r.strategy.clone(), pts)),
            }
        }
        Ok(pareto_chart("archive points", &groups))
    })();
    write_chart(&mut report, out_dir.join("pareto.svg"), pareto);
    Ok(report)
}
