//! CSV tables and SVG line plots. Plots are built from CSV text only.

use crate::error::{LabError, Result};
use serde::Serialize;
use std::fmt::Write as _;

/// A named CSV document.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub csv: String,
}

impl Table {
    pub fn from_rows<T: Serialize>(name: &str, rows: &[T]) -> Result<Self> {
        Ok(Self {
            name: name.to_string(),
            csv: to_csv(rows)?,
        })
    }
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| LabError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| LabError::Io(e.to_string()))
}

/// Numeric columns of a CSV document; non-numeric cells become NaN.
pub fn read_columns(csv_text: &str, names: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_reader(csv_text.as_bytes());
    let headers = r.headers()?.clone();
    let idx: Vec<usize> = names
        .iter()
        .map(|n| {
            headers
                .iter()
                .position(|h| h == *n)
                .ok_or_else(|| LabError::InvalidParameter(format!("no column {n:?}")))
        })
        .collect::<Result<_>>()?;
    let mut cols = vec![Vec::new(); names.len()];
    for rec in r.records() {
        let rec = rec?;
        for (c, &i) in idx.iter().enumerate() {
            cols[c].push(rec.get(i).and_then(|s| s.parse().ok()).unwrap_or(f64::NAN));
        }
    }
    Ok(cols)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Axes {
    pub log_x: bool,
    pub log_y: bool,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Line plot of `y_cols` against `x_col`, one polyline per y column.
pub fn line_plot(csv_text: &str, x_col: &str, y_cols: &[&str], title: &str, axes: Axes) -> Result<String> {
    let mut names = vec![x_col];
    names.extend_from_slice(y_cols);
    let cols = read_columns(csv_text, &names)?;
    let tx = |v: f64| if axes.log_x { v.log10() } else { v };
    let ty = |v: f64| if axes.log_y { v.log10() } else { v };
    let series: Vec<Vec<(f64, f64)>> = cols[1..]
        .iter()
        .map(|ys| {
            cols[0]
                .iter()
                .zip(ys)
                .map(|(&x, &y)| (tx(x), ty(y)))
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .collect()
        })
        .collect();
    let pts = series.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<polyline points="{PAD},{PAD} {PAD},{} {},{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD,
        H - PAD
    );
    let lx = if axes.log_x { format!("log10 {x_col}") } else { x_col.to_string() };
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 15.0, escape(&lx));
    for (v, anchor, x, y) in [
        (x0, "start", PAD, H - PAD + 16.0),
        (x1, "end", W - PAD, H - PAD + 16.0),
    ] {
        let _ = writeln!(s, r#"<text x="{x}" y="{y}" text-anchor="{anchor}">{}</text>"#, tick(v));
    }
    for (v, y) in [(y0, H - PAD), (y1, PAD + 4.0)] {
        let _ = writeln!(s, r#"<text x="{}" y="{y}" text-anchor="end">{}</text>"#, PAD - 4.0, tick(v));
    }
    for (k, (pts, name)) in series.iter().zip(y_cols).enumerate() {
        let color = COLORS[k % COLORS.len()];
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            coords.join(" ")
        );
        for &(x, y) in pts {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(x), sy(y));
        }
        let label = if axes.log_y { format!("log10 {name}") } else { name.to_string() };
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            W - PAD - 150.0,
            PAD + 16.0 * k as f64,
            escape(&label)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        t: f64,
        v: f64,
        m: Option<u32>,
    }

    #[test]
    fn csv_round_trip_through_columns() {
        let rows = vec![
            Row { t: 0.1, v: 1.0 / 3.0, m: None },
            Row { t: 0.2, v: 2.5e-17, m: Some(4) },
        ];
        let text = to_csv(&rows).unwrap();
        assert!(text.starts_with("t,v,m\n"), "{text}");
        let cols = read_columns(&text, &["v", "t", "m"]).unwrap();
        assert_eq!(cols[0], vec![1.0 / 3.0, 2.5e-17]);
        assert_eq!(cols[1], vec![0.1, 0.2]);
        assert!(cols[2][0].is_nan() && cols[2][1] == 4.0);
        assert!(read_columns(&text, &["nope"]).is_err());
    }

    #[test]
    fn plot_contains_one_polyline_per_series() {
        let text = "m,a,b\n4,1,2\n8,0.5,1\n16,0.25,0.5\n";
        let svg = line_plot(text, "m", &["a", "b"], "gaps & more", Axes { log_x: true, log_y: true }).unwrap();
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("stroke-width=\"2\"").count(), 2);
        assert!(svg.contains("gaps &amp; more"));
        assert_eq!(svg, line_plot(text, "m", &["a", "b"], "gaps & more", Axes { log_x: true, log_y: true }).unwrap());
    }
}
