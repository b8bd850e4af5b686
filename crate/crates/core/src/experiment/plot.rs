use std::fmt::Write as _;

use super::report::tick_label;

/// One labelled curve of dB values over frequency.
pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub values: &'a [f64],
}

const TICKS_HZ: [f64; 10] = [50.0, 100.0, 200.0, 500.0, 1e3, 2e3, 5e3, 1e4, 2e4, 5e4];

fn hz_label(f: f64) -> String {
    if f >= 1e3 {
        format!("{}k", f / 1e3)
    } else {
        format!("{f}")
    }
}

/// Magnitude response plot: log-frequency x axis in Hz, magnitude in dB.
/// The DC bin is skipped.
pub fn magnitude_plot_svg(title: &str, frequencies: &[f64], series: &[Series<'_>]) -> String {
    let idx: Vec<usize> = (0..frequencies.len()).filter(|&b| frequencies[b] > 0.0).collect();
    let (f_lo, f_hi) = (
        idx.first().map_or(1.0, |&b| frequencies[b]),
        idx.last().map_or(10.0, |&b| frequencies[b]),
    );
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for &b in &idx {
            lo = lo.min(s.values[b]);
            hi = hi.max(s.values[b]);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        (lo, hi) = (-1.0, 1.0);
    }
    let lo = (lo / 10.0).floor() * 10.0;
    let hi = ((hi / 10.0).ceil() * 10.0).max(lo + 10.0);
    let (left, top, w, h) = (70.0, 40.0, 560.0, 320.0);
    let x = |f: f64| left + w * (f / f_lo).ln() / (f_hi / f_lo).ln().max(1e-12);
    let y = |v: f64| top + h * (hi - v) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" font-family="sans-serif" font-size="12">"#,
        left + w + 150.0,
        top + h + 60.0
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.2}" y="20" text-anchor="middle">{title}</text>"#, left + w / 2.0);
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{w}" height="{h}" fill="none" stroke="black"/>"#
    );
    for f in TICKS_HZ.into_iter().filter(|&f| f >= f_lo && f <= f_hi) {
        let _ = writeln!(
            s,
            r##"<line x1="{0:.2}" y1="{top}" x2="{0:.2}" y2="{1:.2}" stroke="#ddd"/><text x="{0:.2}" y="{2:.2}" text-anchor="middle">{3}</text>"##,
            x(f),
            top + h,
            top + h + 16.0,
            hz_label(f)
        );
    }
    let steps = ((hi - lo) / 10.0).round() as usize;
    for i in 0..=steps {
        let v = lo + 10.0 * i as f64;
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}" stroke="#ddd"/><text x="{2:.2}" y="{3:.2}" text-anchor="end">{4}</text>"##,
            y(v),
            left + w,
            left - 6.0,
            y(v) + 4.0,
            tick_label(v, hi - lo)
        );
    }
    for (i, ser) in series.iter().enumerate() {
        let mut d = String::new();
        for (k, &b) in idx.iter().enumerate() {
            let _ = write!(
                d,
                "{}{:.2},{:.2}",
                if k == 0 { "M" } else { " L" },
                x(frequencies[b]),
                y(ser.values[b])
            );
        }
        let _ = writeln!(
            s,
            r#"<path d="{d}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            ser.color
        );
        let ly = top + 14.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{ly:.2}" width="10" height="10" fill="{}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            left + w + 15.0,
            ser.color,
            left + w + 30.0,
            ly + 9.0,
            ser.label
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Frequency (Hz)</text>"#,
        left + w / 2.0,
        top + h + 40.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0:.2}" text-anchor="middle" transform="rotate(-90 18 {0:.2})">Magnitude (dB)</text>"#,
        top + h / 2.0
    );
    s.push_str("</svg>\n");
    s
}
