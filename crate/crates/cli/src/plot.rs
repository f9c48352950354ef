//! Minimal SVG figures rebuilt from the emitted CSV bytes.

use std::fmt::Write;

use anyhow::{Context, Result};

use crate::config::Command;

const W: f64 = 640.0;
const H: f64 = 440.0;
const PAD: f64 = 60.0;
const COLORS: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
    markers: bool,
}

struct Figure {
    title: String,
    x_label: String,
    y_label: String,
    log: bool,
    series: Vec<Series>,
}

fn columns(bytes: &[u8], names: &[&str], filter: Option<(&str, &str)>) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::Reader::from_reader(bytes);
    let headers = rdr.headers()?.clone();
    let idx = |n: &str| headers.iter().position(|h| h == n).with_context(|| format!("csv has no column {n}"));
    let cols: Vec<usize> = names.iter().map(|n| idx(n)).collect::<Result<_>>()?;
    let filt = filter.map(|(k, v)| idx(k).map(|i| (i, v.to_string()))).transpose()?;
    let mut out = vec![Vec::new(); names.len()];
    for rec in rdr.records() {
        let rec = rec?;
        if let Some((i, v)) = &filt {
            if &rec[*i] != v {
                continue;
            }
        }
        for (o, &c) in out.iter_mut().zip(&cols) {
            o.push(rec[c].parse::<f64>().with_context(|| format!("parsing {}", &rec[c]))?);
        }
    }
    Ok(out)
}

/// Figure for a CSV table, if the command has one.
pub fn from_csv(cmd: Command, file: &str, bytes: &[u8]) -> Result<Option<(String, String)>> {
    let fig = match cmd {
        Command::Sweep => {
            let c = columns(bytes, &["h", "norm"], Some(("kind", "sup")))?;
            Figure {
                title: "sup of the weighted resolvent norm".into(),
                x_label: "1/h".into(),
                y_label: "norm".into(),
                log: true,
                series: vec![Series { label: "sup norm".into(), points: c[0].iter().zip(&c[1]).map(|(h, n)| (1.0 / h, *n)).collect(), markers: true }],
            }
        }
        Command::Egorov => {
            let c = columns(bytes, &["h", "error", "mixed_error"], None)?;
            Figure {
                title: "Egorov error".into(),
                x_label: "h".into(),
                y_label: "error".into(),
                log: true,
                series: vec![
                    Series { label: "E(h)".into(), points: c[0].iter().copied().zip(c[1].iter().copied()).collect(), markers: true },
                    Series { label: "mixed".into(), points: c[0].iter().copied().zip(c[2].iter().copied()).collect(), markers: true },
                ],
            }
        }
        Command::Flow => {
            let c = columns(bytes, &["x", "xi"], None)?;
            Figure {
                title: "orbit".into(),
                x_label: "x".into(),
                y_label: "xi".into(),
                log: false,
                series: vec![Series { label: "orbit".into(), points: c[0].iter().copied().zip(c[1].iter().copied()).collect(), markers: false }],
            }
        }
        _ => return Ok(None),
    };
    let name = file.trim_end_matches(".csv").to_string() + ".svg";
    Ok(Some((name, render(&fig))))
}

fn render(fig: &Figure) -> String {
    let tx = |v: f64| if fig.log { v.log10() } else { v };
    let pts: Vec<(f64, f64)> = fig
        .series
        .iter()
        .flat_map(|s| s.points.iter().map(|&(x, y)| (tx(x), tx(y))))
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = pts.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
    );
    if !(x1 > x0) {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if !(y1 > y0) {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let (mx, my) = (0.05 * (x1 - x0), 0.05 * (y1 - y0));
    let (x0, x1, y0, y1) = (x0 - mx, x1 + mx, y0 - my, y1 + my);
    let px = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let py = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let tick = |v: f64| if fig.log { format!("{:.3e}", 10f64.powf(v)) } else { format!("{v:.3}") };

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, fig.title);
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, px(xv), H - PAD + 16.0, tick(xv));
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, PAD - 4.0, py(yv) + 4.0, tick(yv));
    }
    let scale = if fig.log { " (log)" } else { "" };
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}{scale}</text>"#, W / 2.0, H - 12.0, fig.x_label);
    let _ = writeln!(s, r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}{scale}</text>"#, H / 2.0, H / 2.0, fig.y_label);
    for (i, ser) in fig.series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = ser
            .points
            .iter()
            .map(|&(x, y)| (tx(x), tx(y)))
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
        if ser.markers {
            for p in &path {
                let (cx, cy) = p.split_once(',').unwrap();
                let _ = writeln!(s, r#"<circle cx="{cx}" cy="{cy}" r="3" fill="{color}"/>"#);
            }
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" fill="{color}">{}</text>"#, W - PAD - 80.0, PAD + 16.0 + 16.0 * i as f64, ser.label);
    }
    s.push_str("</svg>\n");
    s
}
