//! Run logs (CSV), summaries (JSON) and line charts (SVG).

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::control::ControllerKind;
use crate::sim::{MonteCarloSummary, RunRecord, Sample};

pub const CSV_COLUMNS: [&str; 21] = [
    "t", "rN", "rU", "rE", "vN", "vU", "vE", "m", "q0", "q1", "q2", "q3", "wx", "wy", "wz", "T", "tauX",
    "tauY", "tauZ", "phiB", "phase",
];

/// Writes one row per logged sample. Floats carry 17 significant digits so
/// the text round-trips to the same `f64`.
pub fn write_run_csv(rec: &RunRecord, path: impl AsRef<Path>) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", CSV_COLUMNS.join(","))?;
    let mut line = String::with_capacity(512);
    for s in &rec.samples {
        line.clear();
        let q = s.q.to_array();
        let values = [
            s.t, s.r.x, s.r.y, s.r.z, s.v.x, s.v.y, s.v.z, s.m, q[0], q[1], q[2], q[3], s.w.x, s.w.y, s.w.z,
            s.thrust, s.tau.x, s.tau.y, s.tau.z, s.phi_b,
        ];
        for v in values {
            write!(line, "{v:.16e},").unwrap();
        }
        writeln!(line, "{}", s.phase).unwrap();
        w.write_all(line.as_bytes())?;
    }
    w.flush()
}

pub fn write_summary_json<T: Serialize + ?Sized>(value: &T, path: impl AsRef<Path>) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()
}

#[derive(Debug, Clone)]
struct Series {
    name: String,
    color: &'static str,
    dashed: bool,
    points: Vec<(f64, f64)>,
}

struct Chart {
    title: &'static str,
    x_label: &'static str,
    y_label: &'static str,
    series: Vec<Series>,
    markers: bool,
}

const CHART_W: f64 = 720.0;
const CHART_H: f64 = 260.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 45.0;

fn controller_color(c: ControllerKind, alt: bool) -> &'static str {
    match (c, alt) {
        (ControllerKind::Coupled, false) => "#d62728",
        (ControllerKind::Coupled, true) => "#ff9896",
        (ControllerKind::Decoupled, false) => "#1f77b4",
        (ControllerKind::Decoupled, true) => "#9ecae1",
    }
}

const AXIS_COLORS: [&str; 3] = ["#1f77b4", "#2ca02c", "#d62728"];

/// Round-number tick positions covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|f| f * mag)
        .find(|s| span / s <= target as f64)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn bounds(series: &[Series]) -> Option<((f64, f64), (f64, f64))> {
    let pts = series.iter().flat_map(|s| s.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let mut b: Option<((f64, f64), (f64, f64))> = None;
    for &(x, y) in pts {
        b = Some(match b {
            None => ((x, x), (y, y)),
            Some(((x0, x1), (y0, y1))) => ((x0.min(x), x1.max(x)), (y0.min(y), y1.max(y))),
        });
    }
    b.map(|((x0, x1), (y0, y1))| {
        let pad = |a: f64, b: f64| {
            if b - a > 1e-12 * (a.abs() + b.abs()).max(1e-300) {
                (a, b)
            } else {
                let d = a.abs().max(1.0) * 0.05;
                (a - d, b + d)
            }
        };
        let (x0, x1) = pad(x0, x1);
        let (y0, y1) = pad(y0, y1);
        let m = 0.05 * (y1 - y0);
        ((x0, x1), (y0 - m, y1 + m))
    })
}

fn render_chart(out: &mut String, chart: &Chart, top: f64) {
    let pw = CHART_W - MARGIN_L - MARGIN_R;
    let ph = CHART_H - MARGIN_T - MARGIN_B;
    let x0 = MARGIN_L;
    let y0 = top + MARGIN_T;
    writeln!(out, "<g class=\"chart\">").unwrap();
    writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"14\" text-anchor=\"middle\">{}</text>",
        x0 + pw / 2.0,
        top + 18.0,
        chart.title
    )
    .unwrap();
    writeln!(
        out,
        "<rect x=\"{x0:.1}\" y=\"{y0:.1}\" width=\"{pw:.1}\" height=\"{ph:.1}\" fill=\"none\" stroke=\"#444\"/>"
    )
    .unwrap();
    let Some(((xa, xb), (ya, yb))) = bounds(&chart.series) else {
        writeln!(out, "</g>").unwrap();
        return;
    };
    let sx = |x: f64| x0 + (x - xa) / (xb - xa) * pw;
    let sy = |y: f64| y0 + ph - (y - ya) / (yb - ya) * ph;

    for t in ticks(xa, xb, 8) {
        let x = sx(t);
        writeln!(out, "<line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"#444\"/>", y0 + ph, y0 + ph + 4.0).unwrap();
        writeln!(
            out,
            "<text x=\"{x:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"middle\">{}</text>",
            y0 + ph + 16.0,
            fmt_tick(t)
        )
        .unwrap();
    }
    for t in ticks(ya, yb, 5) {
        let y = sy(t);
        writeln!(out, "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>", x0, x0 + pw).unwrap();
        writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"end\">{}</text>",
            x0 - 6.0,
            y + 3.0,
            fmt_tick(t)
        )
        .unwrap();
    }
    writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">{}</text>",
        x0 + pw / 2.0,
        y0 + ph + 34.0,
        chart.x_label
    )
    .unwrap();
    writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\" transform=\"rotate(-90 {:.1} {:.1})\">{}</text>",
        x0 - 58.0,
        y0 + ph / 2.0,
        x0 - 58.0,
        y0 + ph / 2.0,
        chart.y_label
    )
    .unwrap();

    for (i, s) in chart.series.iter().enumerate() {
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let dash = if s.dashed { " stroke-dasharray=\"5,3\"" } else { "" };
        writeln!(
            out,
            "<polyline class=\"series\" data-name=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"{dash} points=\"{}\"/>",
            s.name,
            s.color,
            pts.join(" ")
        )
        .unwrap();
        if chart.markers {
            for p in &pts {
                let (cx, cy) = p.split_once(',').unwrap();
                writeln!(out, "<circle cx=\"{cx}\" cy=\"{cy}\" r=\"3\" fill=\"{}\"/>", s.color).unwrap();
            }
        }
        let ly = y0 + 12.0 + 16.0 * i as f64;
        let lx = x0 + pw + 12.0;
        writeln!(
            out,
            "<line x1=\"{lx:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"{}\" stroke-width=\"3\"{dash}/>",
            ly - 3.0,
            lx + 14.0,
            ly - 3.0,
            s.color
        )
        .unwrap();
        writeln!(out, "<text x=\"{:.1}\" y=\"{ly:.1}\" font-size=\"11\">{}</text>", lx + 20.0, s.name).unwrap();
    }
    writeln!(out, "</g>").unwrap();
}

fn render_document(charts: &[Chart]) -> String {
    let height = CHART_H * charts.len() as f64;
    let mut out = String::new();
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{CHART_W:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {CHART_W:.0} {height:.0}\" font-family=\"sans-serif\">"
    )
    .unwrap();
    writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>").unwrap();
    for (i, c) in charts.iter().enumerate() {
        render_chart(&mut out, c, CHART_H * i as f64);
    }
    writeln!(out, "</svg>").unwrap();
    out
}

fn time_series(r: &RunRecord, name: String, color: &'static str, f: impl Fn(&Sample) -> f64) -> Series {
    Series {
        name,
        color,
        dashed: false,
        points: r.samples.iter().map(|s| (s.t, f(s))).collect(),
    }
}

/// Altitude, North/East position and body rates against time, one set of
/// series per record.
pub fn run_plots_svg(records: &[&RunRecord]) -> String {
    let label = |r: &RunRecord, what: &str| {
        if records.len() > 1 {
            format!("{} {what}", r.controller)
        } else {
            what.to_string()
        }
    };
    let mut altitude = Vec::new();
    let mut ground = Vec::new();
    let mut rates = Vec::new();
    for r in records {
        let c = r.controller;
        altitude.push(time_series(r, label(r, "altitude"), controller_color(c, false), |s| s.r.y));
        ground.push(time_series(r, label(r, "North"), controller_color(c, false), |s| s.r.x));
        ground.push(time_series(r, label(r, "East"), controller_color(c, true), |s| s.r.z));
        for (k, axis) in ["wx", "wy", "wz"].iter().enumerate() {
            let color = if records.len() > 1 {
                controller_color(c, k == 1)
            } else {
                AXIS_COLORS[k]
            };
            let mut w = time_series(r, label(r, axis), color, |s| s.w[k]);
            w.dashed = records.len() > 1 && k == 2;
            rates.push(w);
        }
    }
    render_document(&[
        Chart {
            title: "Altitude",
            x_label: "t [s]",
            y_label: "altitude [m]",
            series: altitude,
            markers: false,
        },
        Chart {
            title: "Horizontal position",
            x_label: "t [s]",
            y_label: "position [m]",
            series: ground,
            markers: false,
        },
        Chart {
            title: "Body rates",
            x_label: "t [s]",
            y_label: "rate [rad/s]",
            series: rates,
            markers: false,
        },
    ])
}

/// Mean terminal lateral error against φ_cmd, one polyline per controller.
pub fn sweep_plot_svg(summary: &MonteCarloSummary) -> String {
    let mut controllers: Vec<ControllerKind> = Vec::new();
    for a in &summary.aggregates {
        if !controllers.contains(&a.controller) {
            controllers.push(a.controller);
        }
    }
    let series = controllers
        .iter()
        .map(|&c| Series {
            name: c.to_string(),
            color: controller_color(c, false),
            dashed: false,
            points: summary
                .aggregates
                .iter()
                .filter(|a| a.controller == c)
                .map(|a| (a.phi_cmd_deg, a.mean_terminal_lateral_error))
                .collect(),
        })
        .collect();
    render_document(&[Chart {
        title: "Terminal lateral error",
        x_label: "phi_cmd [deg]",
        y_label: "terminal lateral error [m]",
        series,
        markers: true,
    }])
}

pub fn write_plots_svg(svg: &str, path: impl AsRef<Path>) -> io::Result<()> {
    std::fs::write(path, svg)
}
