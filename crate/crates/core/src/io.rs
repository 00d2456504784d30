//! CSV, SVG and JSON artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::SimConfig;
use crate::lemma::FrontTrack;
use crate::model::{FluxSpec, ModelValidationReport};
use crate::regions::{classify, InterfaceTrack, RateReport, ShrinkReport};
use crate::solver::{gradient, RunStats, Trajectory};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: malformed value `{value}`")]
    Parse { path: PathBuf, value: String },
    #[error("nothing to plot")]
    EmptyChart,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> IoError + '_ {
    move |source| IoError::Csv { path: path.to_path_buf(), source }
}

/// Shortest representation that parses back to the same value.
fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn write_rows(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub const INTERFACES_HEADER: [&str; 6] = ["t", "left_pos", "right_pos", "sub_measure", "super_measure", "degen_measure"];
pub const STATES_HEADER: [&str; 5] = ["t", "x", "u", "ux", "label"];
pub const FRONTS_HEADER: [&str; 3] = ["t", "left_front", "right_front"];

pub fn write_interfaces_csv(track: &InterfaceTrack, path: &Path) -> Result<(), IoError> {
    let rows = (0..track.len()).map(|i| {
        vec![
            num(track.times[i]),
            opt(track.left_pos[i]),
            opt(track.right_pos[i]),
            num(track.sub_measure[i]),
            num(track.super_measure[i]),
            num(track.degen_measure[i]),
        ]
    });
    write_rows(path, &INTERFACES_HEADER, rows)
}

/// One row per node and sample; `every` thins the samples.
pub fn write_states_csv(traj: &Trajectory, flux: &FluxSpec, delta: f64, every: usize, path: &Path) -> Result<(), IoError> {
    let grid = traj.grid;
    let mut rows = Vec::new();
    for s in traj.samples.iter().step_by(every.max(1)) {
        let ux = gradient(s, &grid);
        let labels = classify(&ux, flux, delta).labels;
        for i in 0..grid.n() {
            rows.push(vec![num(s.t), num(grid.x(i)), num(s.u[i]), num(ux[i]), labels[i].as_str().to_string()]);
        }
    }
    write_rows(path, &STATES_HEADER, rows.into_iter())
}

pub fn write_fronts_csv(track: &FrontTrack, path: &Path) -> Result<(), IoError> {
    let rows = (0..track.times.len())
        .map(|i| vec![num(track.times[i]), opt(track.left_front[i]), opt(track.right_front[i])]);
    write_rows(path, &FRONTS_HEADER, rows)
}

/// Reads a CSV written by this module; empty fields become `None`.
/// Header and columns of a numeric CSV file; empty fields read as `None`.
pub type Columns = (Vec<String>, Vec<Vec<Option<f64>>>);

pub fn read_csv_columns(path: &Path) -> Result<Columns, IoError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header: Vec<String> = r.headers().map_err(csv_err(path))?.iter().map(str::to_string).collect();
    let mut cols = vec![Vec::new(); header.len()];
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        for (c, field) in rec.iter().enumerate() {
            let v = if field.is_empty() {
                None
            } else {
                Some(field.parse::<f64>().map_err(|_| IoError::Parse { path: path.to_path_buf(), value: field.to_string() })?)
            };
            cols[c].push(v);
        }
    }
    Ok((header, cols))
}

pub fn read_interfaces_csv(path: &Path) -> Result<InterfaceTrack, IoError> {
    let (_, cols) = read_csv_columns(path)?;
    let req = |c: &Vec<Option<f64>>| -> Result<Vec<f64>, IoError> {
        c.iter()
            .map(|v| v.ok_or_else(|| IoError::Parse { path: path.to_path_buf(), value: String::new() }))
            .collect()
    };
    let times = req(&cols[0])?;
    let n = times.len();
    Ok(InterfaceTrack {
        domain: (f64::NAN, f64::NAN),
        h: f64::NAN,
        times,
        left_pos: cols[1].clone(),
        right_pos: cols[2].clone(),
        sub_measure: req(&cols[3])?,
        super_measure: req(&cols[4])?,
        degen_measure: req(&cols[5])?,
        collapsed: vec![false; n],
    })
}

/// Line chart drawn with polyline and line primitives only.
#[derive(Debug, Clone)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub references: Vec<Reference>,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub color: &'static str,
    pub points: Vec<(f64, Option<f64>)>,
}

/// Straight line `y = y0 + slope·x` across the plotted x range.
#[derive(Debug, Clone)]
pub struct Reference {
    pub name: String,
    pub color: &'static str,
    pub y0: f64,
    pub slope: f64,
}

const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

/// Maps data coordinates to pixels.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    x_range: (f64, f64),
    y_range: (f64, f64),
    width: f64,
    height: f64,
}

impl Frame {
    pub fn px(&self, x: f64, y: f64) -> (f64, f64) {
        let (x0, x1) = self.x_range;
        let (y0, y1) = self.y_range;
        let pw = self.width - MARGIN_LEFT - MARGIN_RIGHT;
        let ph = self.height - MARGIN_TOP - MARGIN_BOTTOM;
        (MARGIN_LEFT + (x - x0) / (x1 - x0) * pw, MARGIN_TOP + (y1 - y) / (y1 - y0) * ph)
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl LineChart {
    pub fn frame(&self) -> Option<Frame> {
        let xs: Vec<f64> = self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).collect();
        let (xmin, xmax) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        if !xmin.is_finite() {
            return None;
        }
        let mut ys: Vec<f64> = self.series.iter().flat_map(|s| s.points.iter().filter_map(|p| p.1)).collect();
        for r in &self.references {
            ys.push(r.y0 + r.slope * xmin);
            ys.push(r.y0 + r.slope * xmax);
        }
        let (ymin, ymax) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
        let y_range = if ymin.is_finite() { padded(ymin, ymax) } else { (-1.0, 1.0) };
        let x_range = if xmax > xmin { (xmin, xmax) } else { (xmin - 0.5, xmax + 0.5) };
        Some(Frame { x_range, y_range, width: self.width, height: self.height })
    }

    pub fn to_svg(&self) -> Result<String, IoError> {
        let f = self.frame().ok_or(IoError::EmptyChart)?;
        let (w, h) = (self.width, self.height);
        let mut s = String::new();
        let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#, w / 2.0, escape(&self.title));

        // axes with five ticks each
        let (left, bottom) = f.px(f.x_range.0, f.y_range.0);
        let (right, top) = f.px(f.x_range.1, f.y_range.1);
        let _ = writeln!(s, r#"<line x1="{left:.3}" y1="{bottom:.3}" x2="{right:.3}" y2="{bottom:.3}" stroke="black"/>"#);
        let _ = writeln!(s, r#"<line x1="{left:.3}" y1="{bottom:.3}" x2="{left:.3}" y2="{top:.3}" stroke="black"/>"#);
        for k in 0..=4 {
            let tx = f.x_range.0 + (f.x_range.1 - f.x_range.0) * k as f64 / 4.0;
            let (px, _) = f.px(tx, f.y_range.0);
            let _ = writeln!(s, r#"<line x1="{px:.3}" y1="{bottom:.3}" x2="{px:.3}" y2="{:.3}" stroke="black"/>"#, bottom + 5.0);
            let _ = writeln!(s, r#"<text x="{px:.3}" y="{:.3}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#, bottom + 18.0, tick(tx));
            let ty = f.y_range.0 + (f.y_range.1 - f.y_range.0) * k as f64 / 4.0;
            let (_, py) = f.px(f.x_range.0, ty);
            let _ = writeln!(s, r#"<line x1="{:.3}" y1="{py:.3}" x2="{left:.3}" y2="{py:.3}" stroke="black"/>"#, left - 5.0);
            let _ = writeln!(s, r#"<text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#, left - 8.0, py + 4.0, tick(ty));
        }
        let _ = writeln!(s, r#"<text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#, 0.5 * (left + right), h - 10.0, escape(&self.x_label));
        let _ = writeln!(s, r#"<text x="16" y="{:.3}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 16 {:.3})">{}</text>"#, 0.5 * (top + bottom), 0.5 * (top + bottom), escape(&self.y_label));

        for r in &self.references {
            let (x1, y1) = f.px(f.x_range.0, r.y0 + r.slope * f.x_range.0);
            let (x2, y2) = f.px(f.x_range.1, r.y0 + r.slope * f.x_range.1);
            let _ = writeln!(s, r#"<line class="reference" x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}" stroke="{}" stroke-dasharray="6 4"><title>{}</title></line>"#, r.color, escape(&r.name));
        }
        for series in &self.series {
            for run in series.points.split(|p| p.1.is_none()).filter(|r| !r.is_empty()) {
                let pts: Vec<String> = run
                    .iter()
                    .map(|&(x, y)| {
                        let (px, py) = f.px(x, y.expect("split on None"));
                        format!("{px:.3},{py:.3}")
                    })
                    .collect();
                let _ = writeln!(s, r#"<polyline class="series" points="{}" fill="none" stroke="{}" stroke-width="2"><title>{}</title></polyline>"#, pts.join(" "), series.color, escape(&series.name));
            }
        }
        // legend
        let entries = self.series.iter().map(|x| (&x.name, x.color)).chain(self.references.iter().map(|r| (&r.name, r.color)));
        for (k, (name, color)) in entries.enumerate() {
            let y = MARGIN_TOP + 12.0 + 16.0 * k as f64;
            let x = left + 12.0;
            let _ = writeln!(s, r#"<line x1="{x:.3}" y1="{y:.3}" x2="{:.3}" y2="{y:.3}" stroke="{color}" stroke-width="2"/>"#, x + 20.0);
            let _ = writeln!(s, r#"<text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="11">{}</text>"#, x + 26.0, y + 4.0, escape(name));
        }
        s.push_str("</svg>\n");
        Ok(s)
    }
}

fn tick(v: f64) -> String {
    let r = (v * 1000.0).round() / 1000.0;
    format!("{}", if r == 0.0 { 0.0 } else { r })
}

/// Interface positions against time with the cone `a1 − k0·t`, `b1 + k1·t`.
pub fn interface_chart(track: &InterfaceTrack, rates: (f64, f64), anchors: (f64, f64)) -> LineChart {
    let pts = |pos: &Vec<Option<f64>>| track.times.iter().copied().zip(pos.iter().copied()).collect();
    LineChart {
        title: "Interfaces of the forward region".into(),
        x_label: "t".into(),
        y_label: "x".into(),
        series: vec![
            Series { name: "left interface".into(), color: "#1f77b4", points: pts(&track.left_pos) },
            Series { name: "right interface".into(), color: "#d62728", points: pts(&track.right_pos) },
        ],
        references: vec![
            Reference { name: format!("a1 - {}t", rates.0), color: "#7f7f7f", y0: anchors.0, slope: -rates.0 },
            Reference { name: format!("b1 + {}t", rates.1), color: "#2ca02c", y0: anchors.1, slope: rates.1 },
        ],
        width: 720.0,
        height: 480.0,
    }
}

/// Fronts of `{v > 0}` against time with the lines `x2 − k0·t`, `x3 + k0·t`.
pub fn front_chart(track: &FrontTrack, k0: f64, x2: f64, x3: f64) -> LineChart {
    let pts = |pos: &Vec<Option<f64>>| track.times.iter().copied().zip(pos.iter().copied()).collect();
    LineChart {
        title: "Fronts of the comparison solution".into(),
        x_label: "t".into(),
        y_label: "x".into(),
        series: vec![
            Series { name: "left front".into(), color: "#1f77b4", points: pts(&track.left_front) },
            Series { name: "right front".into(), color: "#d62728", points: pts(&track.right_front) },
        ],
        references: vec![
            Reference { name: format!("x2 - {k0}t"), color: "#7f7f7f", y0: x2, slope: -k0 },
            Reference { name: format!("x3 + {k0}t"), color: "#2ca02c", y0: x3, slope: k0 },
        ],
        width: 720.0,
        height: 480.0,
    }
}

pub fn write_svg(chart: &LineChart, path: &Path) -> Result<(), IoError> {
    fs::write(path, chart.to_svg()?).map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stiffness {
    pub steps: usize,
    pub stiff_steps: usize,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeInfo {
    pub method: String,
    pub h: f64,
    pub n: usize,
    pub min_dt: Option<f64>,
    pub max_dt: Option<f64>,
    pub samples: usize,
}

impl SchemeInfo {
    pub fn explicit(h: f64, n: usize, stats: &RunStats, samples: usize) -> Self {
        Self {
            method: "forward Euler, conservative face fluxes".into(),
            h,
            n,
            min_dt: stats.min_dt,
            max_dt: stats.max_dt,
            samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub status: String,
    pub config: SimConfig,
    pub validation: ModelValidationReport,
    #[serde(default)]
    pub rates: Option<RateReport>,
    #[serde(default)]
    pub rate_error: Option<String>,
    /// Present for a backward-interval datum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shrink: Option<ShrinkReport>,
    pub stiffness: Stiffness,
    pub scheme: SchemeInfo,
    pub wall_time_s: f64,
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    fs::write(path, text + "\n").map_err(io_err(path))
}

pub fn ensure_dir(path: &Path) -> Result<(), IoError> {
    fs::create_dir_all(path).map_err(io_err(path))?;
    // a directory we cannot write into is as bad as a missing one
    let probe = path.join(".fbdiff-write-probe");
    fs::write(&probe, b"").map_err(io_err(path))?;
    fs::remove_file(&probe).map_err(io_err(path))
}
