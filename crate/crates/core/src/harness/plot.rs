//! Minimal SVG line/scatter charts and the figure set built from a results
//! directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{
    read_csv, ExperimentKind, ExperimentPlan, SummaryRow, TraceRow, TrajectoryRow, UeRow,
    ALGORITHMS, PLAN_FILE, SUMMARY_FILE, TRACE_FILE, TRAJECTORY_FILE, UES_FILE,
};
use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#7f7f7f", "#9467bd", "#ff7f0e",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Marker {
    None,
    Circle,
    Square,
    Triangle,
    Cross,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub line: bool,
    pub dashed: bool,
    pub marker: Marker,
}

impl Series {
    pub fn line(name: &str, points: Vec<(f64, f64)>, marker: Marker) -> Self {
        Self {
            name: name.into(),
            points,
            line: true,
            dashed: false,
            marker,
        }
    }

    pub fn scatter(name: &str, points: Vec<(f64, f64)>, marker: Marker) -> Self {
        Self {
            name: name.into(),
            points,
            line: false,
            dashed: false,
            marker,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Same scale on both axes (for maps).
    pub equal_aspect: bool,
}

/// Axis range and tick positions.
struct Axis {
    lo: f64,
    hi: f64,
    ticks: Vec<f64>,
    decimals: usize,
}

impl Axis {
    fn new(lo: f64, hi: f64) -> Self {
        let (lo, hi) = if hi - lo > 1e-12 * hi.abs().max(1.0) {
            (lo, hi)
        } else {
            let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
            (lo - pad, hi + pad)
        };
        let raw = (hi - lo) / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| *s >= raw)
            .unwrap_or(10.0 * mag);
        let lo = (lo / step).floor() * step;
        let hi = (hi / step).ceil() * step;
        let n = ((hi - lo) / step).round() as usize;
        let ticks = (0..=n).map(|i| lo + i as f64 * step).collect();
        let decimals = (-step.log10().floor()).max(0.0) as usize;
        Self {
            lo,
            hi,
            ticks,
            decimals,
        }
    }

    fn widen_to(&mut self, span: f64) {
        let mid = 0.5 * (self.lo + self.hi);
        let mut a = Axis::new(mid - 0.5 * span, mid + 0.5 * span);
        a.decimals = a.decimals.max(self.decimals);
        *self = a;
    }

    fn span(&self) -> f64 {
        self.hi - self.lo
    }

    fn label(&self, v: f64) -> String {
        let s = format!("{v:.*}", self.decimals);
        if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
            s[1..].to_string()
        } else {
            s
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn marker_svg(out: &mut String, m: Marker, x: f64, y: f64, color: &str) {
    let r = 3.5;
    let _ = match m {
        Marker::None => Ok(()),
        Marker::Circle => writeln!(
            out,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r}" fill="{color}"/>"#
        ),
        Marker::Square => writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{}" height="{}" fill="{color}"/>"#,
            x - r,
            y - r,
            2.0 * r,
            2.0 * r
        ),
        Marker::Triangle => writeln!(
            out,
            r#"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="{color}"/>"#,
            x,
            y - r,
            x - r,
            y + r,
            x + r,
            y + r
        ),
        Marker::Cross => writeln!(
            out,
            r#"<path d="M{:.2},{:.2}L{:.2},{:.2}M{:.2},{:.2}L{:.2},{:.2}" stroke="{color}" stroke-width="1.5"/>"#,
            x - r,
            y - r,
            x + r,
            y + r,
            x - r,
            y + r,
            x + r,
            y - r
        ),
    };
}

impl Chart {
    /// Renders the chart. Refuses charts with no finite point.
    pub fn to_svg(&self) -> Result<String> {
        let pts: Vec<(f64, f64)> = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().copied())
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .collect();
        if pts.is_empty() {
            return Err(Error::Plot(format!("chart '{}' has no data", self.title)));
        }
        let fold = |f: fn(&(f64, f64)) -> f64| {
            pts.iter()
                .map(f)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                })
        };
        let (x0, x1) = fold(|p| p.0);
        let (y0, y1) = fold(|p| p.1);
        let mut xa = Axis::new(x0, x1);
        let mut ya = Axis::new(y0, y1);
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        if self.equal_aspect {
            // Metres per pixel must match on both axes.
            let scale = (xa.span() / pw).max(ya.span() / ph);
            if xa.span() < scale * pw {
                xa.widen_to(scale * pw);
            }
            if ya.span() < scale * ph {
                ya.widen_to(scale * ph);
            }
        }
        let sx = |x: f64| LEFT + (x - xa.lo) / xa.span() * pw;
        let sy = |y: f64| TOP + ph - (y - ya.lo) / ya.span() * ph;

        let mut o = String::new();
        let _ = writeln!(
            o,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(
            o,
            r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
        );
        let _ = writeln!(
            o,
            r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&self.title)
        );
        for &t in &xa.ticks {
            let x = sx(t);
            let _ = writeln!(
                o,
                r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#e5e5e5"/>"##,
                TOP + ph
            );
            let _ = writeln!(
                o,
                r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                TOP + ph + 16.0,
                xa.label(t)
            );
        }
        for &t in &ya.ticks {
            let y = sy(t);
            let _ = writeln!(
                o,
                r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e5e5e5"/>"##,
                LEFT + pw
            );
            let _ = writeln!(
                o,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                y + 4.0,
                ya.label(t)
            );
        }
        let _ = writeln!(
            o,
            r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            o,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 14.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            o,
            r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let finite: Vec<(f64, f64)> = s
                .points
                .iter()
                .copied()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .collect();
            let dash = if s.dashed {
                r#" stroke-dasharray="6 4""#
            } else {
                ""
            };
            if s.line && finite.len() > 1 {
                let path: Vec<String> = finite
                    .iter()
                    .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                    .collect();
                let _ = writeln!(
                    o,
                    r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"{dash}/>"#,
                    path.join(" ")
                );
            }
            for &(x, y) in &finite {
                marker_svg(&mut o, s.marker, sx(x), sy(y), color);
            }
            let ly = TOP + 12.0 + 20.0 * i as f64;
            let lx = LEFT + pw + 14.0;
            if s.line {
                let _ = writeln!(
                    o,
                    r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="1.8"{dash}/>"#,
                    lx + 24.0
                );
            }
            marker_svg(&mut o, s.marker, lx + 12.0, ly, color);
            let _ = writeln!(
                o,
                r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
                lx + 30.0,
                ly + 4.0,
                escape(&s.name)
            );
        }
        o.push_str("</svg>\n");
        Ok(o)
    }
}

/// Energy against round for the first cell of the trace.
pub fn convergence_chart(trace: &[TraceRow]) -> Result<Chart> {
    let first = trace
        .first()
        .ok_or_else(|| Error::Plot("empty convergence trace".into()))?;
    let points = trace
        .iter()
        .filter(|r| r.seed == first.seed && r.sweep_value == first.sweep_value)
        .map(|r| (r.round as f64, r.energy_j))
        .collect();
    Ok(Chart {
        title: format!("Convergence (seed {})", first.seed),
        x_label: "round".into(),
        y_label: "total UE energy (J)".into(),
        series: vec![Series::line("proposed", points, Marker::Circle)],
        equal_aspect: false,
    })
}

/// Optimised and straight-line flight of the first cell, with UE markers.
pub fn trajectory_chart(traj: &[TrajectoryRow], ues: &[UeRow]) -> Result<Chart> {
    let first = traj
        .first()
        .ok_or_else(|| Error::Plot("empty trajectory table".into()))?;
    let same = |v: f64, s: u64| v == first.sweep_value && s == first.seed;
    let rows: Vec<&TrajectoryRow> = traj
        .iter()
        .filter(|r| same(r.sweep_value, r.seed))
        .collect();
    let cell_ues: Vec<&UeRow> = ues.iter().filter(|u| same(u.sweep_value, u.seed)).collect();
    let mut straight = Series::line(
        "straight line",
        rows.iter().map(|r| (r.straight_x, r.straight_y)).collect(),
        Marker::None,
    );
    straight.dashed = true;
    Ok(Chart {
        title: format!("UAV trajectory (seed {})", first.seed),
        x_label: "x (m)".into(),
        y_label: "y (m)".into(),
        series: vec![
            Series::line(
                "optimised",
                rows.iter().map(|r| (r.x, r.y)).collect(),
                Marker::None,
            ),
            straight,
            Series::scatter(
                "UE (UAV-served)",
                cell_ues
                    .iter()
                    .filter(|u| u.uav_slots > 0)
                    .map(|u| (u.x, u.y))
                    .collect(),
                Marker::Triangle,
            ),
            Series::scatter(
                "UE (other)",
                cell_ues
                    .iter()
                    .filter(|u| u.uav_slots == 0)
                    .map(|u| (u.x, u.y))
                    .collect(),
                Marker::Cross,
            ),
        ],
        equal_aspect: true,
    })
}

/// Mean energy of each algorithm against the swept value.
pub fn sweep_chart(summary: &[SummaryRow], kind: ExperimentKind) -> Result<Chart> {
    let markers = [
        Marker::Circle,
        Marker::Square,
        Marker::Triangle,
        Marker::Cross,
    ];
    let series: Vec<Series> = ALGORITHMS
        .iter()
        .zip(markers)
        .map(|(alg, m)| {
            let pts = summary
                .iter()
                .filter(|r| r.algorithm == *alg)
                .map(|r| (r.sweep_value, r.mean_energy_j))
                .collect();
            Series::line(alg, pts, m)
        })
        .collect();
    let title = match kind {
        ExperimentKind::WorkloadSweep => "Energy vs workload",
        _ => "Energy vs UAV storage",
    };
    Ok(Chart {
        title: title.into(),
        x_label: kind.sweep_label().into(),
        y_label: "mean total UE energy (J)".into(),
        series,
        equal_aspect: false,
    })
}

/// Renders the figures a results directory supports: convergence and
/// trajectory always, plus the sweep chart for sweep plans.
pub fn emit_plots(dir: &Path) -> Result<Vec<PathBuf>> {
    let plan = ExperimentPlan::load(&dir.join(PLAN_FILE))?;
    let mut charts = vec![
        (
            "convergence.svg",
            convergence_chart(&read_csv(&dir.join(TRACE_FILE))?)?,
        ),
        (
            "trajectory.svg",
            trajectory_chart(
                &read_csv(&dir.join(TRAJECTORY_FILE))?,
                &read_csv(&dir.join(UES_FILE))?,
            )?,
        ),
    ];
    if plan.kind.is_sweep() {
        let name = match plan.kind {
            ExperimentKind::WorkloadSweep => "workload_sweep.svg",
            _ => "storage_sweep.svg",
        };
        charts.push((
            name,
            sweep_chart(&read_csv(&dir.join(SUMMARY_FILE))?, plan.kind)?,
        ));
    }
    let mut out = Vec::new();
    for (name, chart) in charts {
        let path = dir.join(name);
        fs::write(&path, chart.to_svg()?)?;
        out.push(path);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round_numbers() {
        let a = Axis::new(0.3, 9.7);
        assert_eq!(a.ticks, vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        assert_eq!(a.decimals, 0);
        let b = Axis::new(0.12, 0.19);
        assert_eq!(b.decimals, 2);
    }

    #[test]
    fn single_point_still_renders() {
        let c = Chart {
            title: "one".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            series: vec![Series::line("s", vec![(2.0, 5.0)], Marker::Circle)],
            equal_aspect: false,
        };
        let svg = c.to_svg().unwrap();
        assert!(svg.contains("<circle"));
        assert!(!svg.contains("<polyline"));
    }

    #[test]
    fn empty_chart_is_refused() {
        let c = Chart {
            title: "none".into(),
            x_label: String::new(),
            y_label: String::new(),
            series: vec![Series::line("s", vec![(f64::NAN, 1.0)], Marker::None)],
            equal_aspect: false,
        };
        assert!(matches!(c.to_svg(), Err(Error::Plot(_))));
    }
}
