//! Miss-rate / FPPI curve files: canonical CSV and a standalone SVG plot.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thermsal_core::detmetrics::OperatingPoint;
use thermsal_core::{Error, Result, Scalar};

pub const CURVE_HEADER: &str = "threshold,fppi,miss_rate";

/// CSV text of a curve: header plus one `{:.6}` row per point.
pub fn format_curve_csv<T: Scalar>(curve: &[OperatingPoint<T>]) -> String {
    let mut out = String::with_capacity(32 * (curve.len() + 1));
    out.push_str(CURVE_HEADER);
    out.push('\n');
    for p in curve {
        let _ = writeln!(out, "{:.6},{:.6},{:.6}", p.threshold, p.fppi, p.miss_rate);
    }
    out
}

pub fn write_curve_csv<T: Scalar>(curve: &[OperatingPoint<T>], path: &Path) -> Result<()> {
    write_file(path, format_curve_csv(curve).as_bytes())
}

pub fn parse_curve_csv(text: &str, context: &str) -> Result<Vec<OperatingPoint<f64>>> {
    let mut lines = text.lines().enumerate();
    let parse_err = |line: usize, message: String| Error::Parse {
        context: context.into(),
        line,
        message,
    };
    match lines.next() {
        Some((_, h)) if h.trim() == CURVE_HEADER => {}
        _ => return Err(parse_err(1, format!("expected header {CURVE_HEADER:?}"))),
    }
    let mut curve = Vec::new();
    for (n, raw) in lines {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(n + 1, e.to_string()))?;
        let [threshold, fppi, miss_rate] = vals[..] else {
            return Err(parse_err(n + 1, format!("expected 3 fields, found {}", vals.len())));
        };
        curve.push(OperatingPoint {
            threshold,
            fppi,
            miss_rate,
        });
    }
    Ok(curve)
}

pub fn read_curve_csv(path: &Path) -> Result<Vec<OperatingPoint<f64>>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.into(),
        source,
    })?;
    parse_curve_csv(&text, &path.display().to_string())
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const PLOT_LEFT: f64 = 70.0;
const PLOT_RIGHT: f64 = 470.0;
const PLOT_TOP: f64 = 20.0;
const PLOT_BOTTOM: f64 = 430.0;
const FPPI_RANGE: (f64, f64) = (-3.0, 1.0);
const MISS_MIN: f64 = 0.01;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn px(fppi: f64) -> f64 {
    let l = fppi.max(1e-300).log10().clamp(FPPI_RANGE.0, FPPI_RANGE.1);
    PLOT_LEFT + (l - FPPI_RANGE.0) / (FPPI_RANGE.1 - FPPI_RANGE.0) * (PLOT_RIGHT - PLOT_LEFT)
}

fn py(miss: f64) -> f64 {
    let l = miss.clamp(MISS_MIN, 1.0).log10();
    PLOT_TOP + l / MISS_MIN.log10() * (PLOT_BOTTOM - PLOT_TOP)
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Log-log miss rate vs FPPI plot, one polyline per named curve.
pub fn format_curve_svg<T: Scalar>(curves: &[(String, Vec<OperatingPoint<T>>)]) -> Result<String> {
    if let Some((name, _)) = curves.iter().find(|(_, c)| c.is_empty()) {
        return Err(Error::EmptyCurve(name.clone()));
    }
    let mut s = String::new();
    let _ = writeln!(
        s,
        r##"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>
<g class="grid" stroke="#dddddd" stroke-width="1">"##
    );
    for e in -3..=1 {
        let x = px(10f64.powi(e));
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{PLOT_TOP:.2}" x2="{x:.2}" y2="{PLOT_BOTTOM:.2}"/>"#
        );
    }
    let miss_ticks = [0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.64, 0.8, 1.0];
    for m in miss_ticks {
        let y = py(m);
        let _ = writeln!(
            s,
            r#"<line x1="{PLOT_LEFT:.2}" y1="{y:.2}" x2="{PLOT_RIGHT:.2}" y2="{y:.2}"/>"#
        );
    }
    s.push_str("</g>\n");
    let _ = writeln!(
        s,
        r#"<rect x="{PLOT_LEFT:.2}" y="{PLOT_TOP:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        PLOT_RIGHT - PLOT_LEFT,
        PLOT_BOTTOM - PLOT_TOP
    );
    s.push_str("<g class=\"ticks\">\n");
    for e in -3..=1 {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">1e{e}</text>"#,
            px(10f64.powi(e)),
            PLOT_BOTTOM + 16.0
        );
    }
    for m in miss_ticks {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{m}</text>"#,
            PLOT_LEFT - 6.0,
            py(m) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">false positives per image</text>
<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">miss rate</text>
</g>"#,
        (PLOT_LEFT + PLOT_RIGHT) / 2.0,
        HEIGHT - 12.0,
        (PLOT_TOP + PLOT_BOTTOM) / 2.0,
        (PLOT_TOP + PLOT_BOTTOM) / 2.0
    );

    s.push_str("<g class=\"curves\" fill=\"none\" stroke-width=\"2\">\n");
    for (i, (_, curve)) in curves.iter().enumerate() {
        let points: Vec<String> = curve
            .iter()
            .map(|p| format!("{:.2},{:.2}", px(p.fppi.to_f64_lossy()), py(p.miss_rate.to_f64_lossy())))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline stroke="{}" points="{}"/>"#,
            PALETTE[i % PALETTE.len()],
            points.join(" ")
        );
    }
    s.push_str("</g>\n<g class=\"legend\">\n");
    for (i, (name, _)) in curves.iter().enumerate() {
        let y = PLOT_TOP + 12.0 + 20.0 * i as f64;
        let x = PLOT_RIGHT + 16.0;
        let _ = writeln!(
            s,
            r#"<g class="legend-entry"><line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text></g>"#,
            x + 24.0,
            PALETTE[i % PALETTE.len()],
            x + 30.0,
            y + 4.0,
            escape(name)
        );
    }
    s.push_str("</g>\n</svg>\n");
    Ok(s)
}

pub fn write_curve_svg<T: Scalar>(curves: &[(String, Vec<OperatingPoint<T>>)], path: &Path) -> Result<()> {
    let svg = format_curve_svg(curves)?;
    write_file(path, svg.as_bytes())
}

/// Writes `bytes`, creating parent directories as needed.
pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| Error::Io {
            path: parent.into(),
            source,
        })?;
    }
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.into(),
        source,
    })
}
