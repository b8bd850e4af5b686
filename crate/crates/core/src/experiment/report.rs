use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One metric value: columns `subject_id, method, sparsity, metric, value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub subject_id: usize,
    pub method: String,
    pub sparsity: usize,
    pub metric: String,
    pub value: f64,
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::container(path, format!("CSV: {e}"))
}

pub fn write_metrics_csv(path: impl AsRef<Path>, rows: &[MetricRow]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_metrics_csv(path: impl AsRef<Path>) -> Result<Vec<MetricRow>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<MetricRow>, _>>()
        .map_err(|e| csv_err(path, e))?;
    if rows.is_empty() {
        return Err(Error::container(path, "no metric rows"));
    }
    Ok(rows)
}

/// Quantile of sorted data by linear interpolation between order
/// statistics: position `h = (n − 1)·p`, value
/// `x[⌊h⌋] + (h − ⌊h⌋)·(x[⌊h⌋+1] − x[⌊h⌋])`.
///
/// ```
/// use sparsehrtf::experiment::quantile;
/// let x = [1.0, 2.0, 4.0, 8.0];
/// assert_eq!(quantile(&x, 0.25), 1.75);
/// assert_eq!(quantile(&x, 0.5), 3.0);
/// ```
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Box-plot geometry: quartiles and Tukey whiskers at the most extreme
/// values within 1.5 IQR of the box.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxGeometry {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

pub fn box_geometry(values: &[f64]) -> Result<BoxGeometry> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("box plot of no values".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("box plot values".into()));
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let (q1, median, q3) = (quantile(&s, 0.25), quantile(&s, 0.5), quantile(&s, 0.75));
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = s.iter().copied().filter(|&v| v >= lo && v <= hi).collect();
    Ok(BoxGeometry {
        q1,
        median,
        q3,
        whisker_low: inside.first().copied().unwrap_or(q1),
        whisker_high: inside.last().copied().unwrap_or(q3),
        outliers: s.iter().copied().filter(|&v| v < lo || v > hi).collect(),
    })
}

/// Statistics of one method × sparsity × metric group. `sd` is the sample
/// standard deviation (zero for a single value).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub sparsity: usize,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
}

type GroupKey = (String, String, usize);

fn groups(rows: &[MetricRow]) -> BTreeMap<GroupKey, Vec<f64>> {
    let mut g: BTreeMap<GroupKey, Vec<f64>> = BTreeMap::new();
    for r in rows {
        g.entry((r.metric.clone(), r.method.clone(), r.sparsity))
            .or_default()
            .push(r.value);
    }
    g
}

/// Per-group statistics, ordered by metric, method, then sparsity.
pub fn summarize(rows: &[MetricRow]) -> Result<Vec<SummaryRow>> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no metric rows to summarize".into()));
    }
    groups(rows)
        .into_iter()
        .map(|((metric, method, sparsity), values)| {
            let n = values.len();
            let mean = values.iter().sum::<f64>() / n as f64;
            let sd = if n > 1 {
                (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            let b = box_geometry(&values)?;
            Ok(SummaryRow {
                method,
                sparsity,
                metric,
                n,
                mean,
                sd,
                q1: b.q1,
                median: b.median,
                q3: b.q3,
                whisker_low: b.whisker_low,
                whisker_high: b.whisker_high,
            })
        })
        .collect()
}

pub fn write_summary_csv(path: impl AsRef<Path>, summary: &[SummaryRow]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in summary {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Methods as rows, sparsity levels as columns, cells `mean (sd)`.
pub fn table_csv(summary: &[SummaryRow], metric: &str) -> String {
    let rows: Vec<&SummaryRow> = summary.iter().filter(|r| r.metric == metric).collect();
    let mut levels: Vec<usize> = rows.iter().map(|r| r.sparsity).collect();
    levels.sort_unstable_by(|a, b| b.cmp(a));
    levels.dedup();
    let mut methods: Vec<&str> = Vec::new();
    for r in &rows {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let mut out = String::from("method");
    for l in &levels {
        let _ = write!(out, ",{l}");
    }
    out.push('\n');
    for m in methods {
        out.push_str(m);
        for l in &levels {
            out.push(',');
            if let Some(r) = rows.iter().find(|r| r.method == m && r.sparsity == *l) {
                let _ = write!(out, "{:.4} ({:.4})", r.mean, r.sd);
            }
        }
        out.push('\n');
    }
    out
}

const PALETTE: [&str; 11] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#393b79",
];

/// Box plot of one metric: sparsity groups along x, one box per method.
pub fn box_plot_svg(rows: &[MetricRow], metric: &str, label: &str) -> Result<String> {
    let g = groups(rows);
    let mut levels: Vec<usize> = Vec::new();
    let mut methods: Vec<String> = Vec::new();
    let mut boxes = Vec::new();
    for ((m, method, sparsity), values) in &g {
        if m != metric {
            continue;
        }
        if !levels.contains(sparsity) {
            levels.push(*sparsity);
        }
        if !methods.contains(method) {
            methods.push(method.clone());
        }
        boxes.push((method.clone(), *sparsity, box_geometry(values)?));
    }
    if boxes.is_empty() {
        return Err(Error::InvalidArgument(format!("no rows for metric {metric}")));
    }
    levels.sort_unstable_by(|a, b| b.cmp(a));
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, _, b) in &boxes {
        for v in b.outliers.iter().chain([&b.whisker_low, &b.whisker_high]) {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let (left, top, plot_h) = (80.0, 40.0, 360.0);
    let slot = 18.0;
    let group_w = slot * methods.len() as f64 + 20.0;
    let plot_w = group_w * levels.len() as f64;
    let width = left + plot_w + 190.0;
    let height = top + plot_h + 70.0;
    let y = |v: f64| top + plot_h * (hi - v) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{:.2}" stroke="black"/>"#,
        top + plot_h
    );
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#,
        top + plot_h,
        left + plot_w,
        top + plot_h
    );
    for i in 0..=5 {
        let v = lo + (hi - lo) * i as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{left}" y2="{:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            left - 5.0,
            y(v),
            y(v),
            left - 8.0,
            y(v) + 4.0,
            tick_label(v, hi - lo)
        );
    }
    for (gi, level) in levels.iter().enumerate() {
        let gx = left + gi as f64 * group_w;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{level}</text>"#,
            gx + group_w / 2.0,
            top + plot_h + 18.0
        );
        for (mi, method) in methods.iter().enumerate() {
            let Some((_, _, b)) = boxes.iter().find(|(m, l, _)| m == method && l == level) else {
                continue;
            };
            let color = PALETTE[mi % PALETTE.len()];
            let cx = gx + 10.0 + slot * (mi as f64 + 0.5);
            let half = slot * 0.35;
            let _ = writeln!(
                s,
                r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="{color}"/>"#,
                y(b.whisker_low),
                y(b.whisker_high)
            );
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="white" stroke="{color}"/>"#,
                cx - half,
                y(b.q3),
                2.0 * half,
                (y(b.q1) - y(b.q3)).max(0.5)
            );
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"/>"#,
                cx - half,
                y(b.median),
                cx + half,
                y(b.median)
            );
            for o in &b.outliers {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{cx:.2}" cy="{:.2}" r="2" fill="none" stroke="{color}"/>"#,
                    y(*o)
                );
            }
        }
    }
    for (mi, method) in methods.iter().enumerate() {
        let ly = top + 14.0 * mi as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="10" height="10" fill="{}"/><text x="{:.2}" y="{:.2}">{method}</text>"#,
            left + plot_w + 20.0,
            ly,
            PALETTE[mi % PALETTE.len()],
            left + plot_w + 36.0,
            ly + 9.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Measured positions</text>"#,
        left + plot_w / 2.0,
        top + plot_h + 45.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{label}</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0
    );
    s.push_str("</svg>\n");
    Ok(s)
}

pub(crate) fn tick_label(v: f64, span: f64) -> String {
    if span >= 10.0 {
        format!("{v:.0}")
    } else if span >= 0.1 {
        format!("{v:.2}")
    } else {
        format!("{v:.2e}")
    }
}

/// Writes `summary.csv`, `table_<metric>.csv` and `boxplot_<metric>.svg`
/// for every metric present, returning the paths written.
pub fn write_report(rows: &[MetricRow], dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let summary = summarize(rows)?;
    let mut written = Vec::new();
    let path = dir.join("summary.csv");
    write_summary_csv(&path, &summary)?;
    written.push(path);
    let mut metrics: Vec<&str> = rows.iter().map(|r| r.metric.as_str()).collect();
    metrics.sort_unstable();
    metrics.dedup();
    for metric in metrics {
        let label = metric
            .parse::<super::MetricKind>()
            .map(|k| k.label())
            .unwrap_or(metric);
        let path = dir.join(format!("table_{metric}.csv"));
        fs::write(&path, table_csv(&summary, metric)).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        let path = dir.join(format!("boxplot_{metric}.svg"));
        fs::write(&path, box_plot_svg(rows, metric, label)?).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
