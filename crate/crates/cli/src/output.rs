//! Artifact emission: CSV, JSON (schema-versioned), simple SVG plots, and a
//! run manifest carrying digests of everything written.

use std::fs;
use std::io;
use std::path::PathBuf;
use std::time::Instant;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const SCHEMA: u64 = 1;

pub struct RunWriter {
    dir: PathBuf,
    digests: Vec<(String, String)>,
    started: Instant,
}

impl RunWriter {
    pub fn new(dir: PathBuf) -> io::Result<RunWriter> {
        fs::create_dir_all(&dir)?;
        Ok(RunWriter {
            dir,
            digests: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        let mut h = Sha256::new();
        h.update(bytes);
        self.digests.push((name.to_string(), format!("{:x}", h.finalize())));
        Ok(())
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
        let mut s = String::new();
        s.push_str(&header.join(","));
        s.push('\n');
        for row in rows {
            s.push_str(&row.join(","));
            s.push('\n');
        }
        self.write(name, s.as_bytes())
    }

    pub fn json(&mut self, name: &str, mut value: Value) -> io::Result<()> {
        if let Value::Object(map) = &mut value {
            map.insert("schema".into(), json!(SCHEMA));
        }
        let mut bytes = serde_json::to_vec_pretty(&value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// Write `manifest.json` last: tool version, the random-field placement
    /// (when the run used one), the full resolved parameter echo plus its
    /// content hash, wall clock, and digests of every artifact written
    /// before it. The subcommand, parameters, and seed suffice to replay
    /// the run bit-identically.
    pub fn manifest(self, subcommand: &str, params: Value, field: Value) -> io::Result<()> {
        let outputs: Value = self
            .digests
            .iter()
            .map(|(name, digest)| (name.clone(), json!(digest)))
            .collect::<serde_json::Map<String, Value>>()
            .into();
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&params)?);
        let config_digest = format!("{:x}", h.finalize());
        let manifest = json!({
            "schema": SCHEMA,
            "tool": "froglab",
            "version": env!("CARGO_PKG_VERSION"),
            "subcommand": subcommand,
            "field": field,
            "params": params,
            "config_digest": config_digest,
            "wall_clock_seconds": self.started.elapsed().as_secs_f64(),
            "outputs": outputs,
        });
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        fs::write(self.dir.join("manifest.json"), bytes)
    }
}

/// Exact rational as a JSON object with decimal-string numerator and
/// denominator, plus a float approximation for convenience.
pub fn rational_json(r: &froglab_core::oracle::Rat) -> Value {
    let (num, den) = froglab_core::oracle::rat_parts(r);
    json!({
        "num": num,
        "den": den,
        "approx": froglab_core::oracle::rat_to_f64(r),
    })
}

const PLOT_W: f64 = 640.0;
const PLOT_H: f64 = 480.0;
const MARGIN: f64 = 50.0;

fn scale(points: &[(f64, f64)]) -> impl Fn(f64, f64) -> (f64, f64) {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let (dx, dy) = ((x1 - x0).max(1e-12), (y1 - y0).max(1e-12));
    move |x, y| {
        (
            MARGIN + (x - x0) / dx * (PLOT_W - 2.0 * MARGIN),
            PLOT_H - MARGIN - (y - y0) / dy * (PLOT_H - 2.0 * MARGIN),
        )
    }
}

/// Minimal static line plot with point markers.
pub fn svg_line_plot(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64)]) -> String {
    let to = scale(points);
    let path: Vec<String> = points
        .iter()
        .map(|&(x, y)| {
            let (px, py) = to(x, y);
            format!("{px:.1},{py:.1}")
        })
        .collect();
    let markers: String = points
        .iter()
        .map(|&(x, y)| {
            let (px, py) = to(x, y);
            format!(r##"<circle cx="{px:.1}" cy="{py:.1}" r="3" fill="#1f77b4"/>"##)
        })
        .collect();
    format!(
        concat!(
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
            r#"<rect width="{w}" height="{h}" fill="white"/>"#,
            r#"<text x="{tx}" y="20" text-anchor="middle" font-size="14">{title}</text>"#,
            r#"<text x="{tx}" y="{bl}" text-anchor="middle" font-size="12">{xl}</text>"#,
            r#"<text x="15" y="{ty}" text-anchor="middle" font-size="12" transform="rotate(-90 15 {ty})">{yl}</text>"#,
            r#"<line x1="{m}" y1="{ym}" x2="{xm}" y2="{ym}" stroke="black"/>"#,
            r#"<line x1="{m}" y1="{m}" x2="{m}" y2="{ym}" stroke="black"/>"#,
            r##"<polyline points="{path}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>"##,
            "{markers}</svg>\n"
        ),
        w = PLOT_W,
        h = PLOT_H,
        tx = PLOT_W / 2.0,
        ty = PLOT_H / 2.0,
        bl = PLOT_H - 10.0,
        m = MARGIN,
        xm = PLOT_W - MARGIN,
        ym = PLOT_H - MARGIN,
        title = title,
        xl = x_label,
        yl = y_label,
        path = path.join(" "),
        markers = markers,
    )
}

/// Overlay of two scaled point clouds (2-d only): e.g. `B(t)/t` at two
/// densities.
pub fn svg_cloud_overlay(
    title: &str,
    label_a: &str,
    a: &[Vec<f64>],
    label_b: &str,
    b: &[Vec<f64>],
) -> String {
    let all: Vec<(f64, f64)> = a
        .iter()
        .chain(b)
        .map(|p| (p[0], p[1]))
        .collect();
    let to = scale(&all);
    let dots = |cloud: &[Vec<f64>], color: &str, r: f64| -> String {
        cloud
            .iter()
            .map(|p| {
                let (px, py) = to(p[0], p[1]);
                format!(r#"<circle cx="{px:.1}" cy="{py:.1}" r="{r}" fill="{color}" fill-opacity="0.6"/>"#)
            })
            .collect()
    };
    format!(
        concat!(
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
            r#"<rect width="{w}" height="{h}" fill="white"/>"#,
            r#"<text x="{tx}" y="20" text-anchor="middle" font-size="14">{title}</text>"#,
            r##"<text x="{m}" y="36" font-size="12" fill="#ff7f0e">{la}</text>"##,
            r##"<text x="{m}" y="52" font-size="12" fill="#1f77b4">{lb}</text>"##,
            "{db}{da}</svg>\n"
        ),
        w = PLOT_W,
        h = PLOT_H,
        tx = PLOT_W / 2.0,
        m = MARGIN,
        title = title,
        la = label_a,
        lb = label_b,
        db = dots(b, "#1f77b4", 2.5),
        da = dots(a, "#ff7f0e", 2.0),
    )
}
