//! Static SVG figures rendered from traces.

use anyhow::{anyhow, Result};
use plotters::prelude::*;
use turbine_lq::common::Interval;
use turbine_lq::sim::{SimTrace, TraceRow};

/// Points per line; traces are decimated to about this many.
const MAX_POINTS: usize = 2000;
const WIDTH: u32 = 1100;
const PANEL_HEIGHT: u32 = 260;

struct Line {
    label: String,
    color: RGBColor,
    points: Vec<(f64, f64)>,
}

impl Line {
    fn from_trace(label: impl Into<String>, color: RGBColor, trace: &SimTrace, f: impl Fn(&TraceRow) -> f64) -> Self {
        let stride = (trace.rows.len() / MAX_POINTS).max(1);
        let points = trace.rows.iter().step_by(stride).map(|r| (r.t_s, f(r))).collect();
        Self { label: label.into(), color, points }
    }
}

struct Panel {
    y_label: &'static str,
    lines: Vec<Line>,
}

const PALETTE: [RGBColor; 4] = [RGBColor(0, 0, 0), RGBColor(31, 119, 180), RGBColor(214, 39, 40), RGBColor(44, 160, 44)];

fn span(lines: &[Line], pick: impl Fn(&(f64, f64)) -> f64) -> (f64, f64) {
    let (lo, hi) =
        lines.iter().flat_map(|l| l.points.iter().map(&pick)).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { lo.abs().max(1.0) * 0.05 };
    (lo - pad, hi + pad)
}

fn render(title: &str, panels: Vec<Panel>) -> Result<Vec<u8>> {
    let err = |e: &dyn std::fmt::Display| anyhow!("plot {title}: {e}");
    let mut svg = String::new();
    {
        let height = PANEL_HEIGHT * panels.len() as u32 + 40;
        let root = SVGBackend::with_string(&mut svg, (WIDTH, height)).into_drawing_area();
        root.fill(&WHITE).map_err(|e| err(&e))?;
        let root = root.titled(title, ("sans-serif", 22)).map_err(|e| err(&e))?;
        for (area, panel) in root.split_evenly((panels.len(), 1)).iter().zip(&panels) {
            let (x0, x1) = span(&panel.lines, |p| p.0);
            let (y0, y1) = span(&panel.lines, |p| p.1);
            let mut chart = ChartBuilder::on(area)
                .margin(10)
                .x_label_area_size(35)
                .y_label_area_size(70)
                .build_cartesian_2d(x0..x1, y0..y1)
                .map_err(|e| err(&e))?;
            chart.configure_mesh().x_desc("time (s)").y_desc(panel.y_label).draw().map_err(|e| err(&e))?;
            for line in &panel.lines {
                let color = line.color;
                chart
                    .draw_series(LineSeries::new(line.points.iter().copied(), color.stroke_width(1)))
                    .map_err(|e| err(&e))?
                    .label(line.label.as_str())
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
            }
            chart
                .configure_series_labels()
                .position(SeriesLabelPosition::UpperRight)
                .background_style(WHITE.mix(0.8))
                .border_style(BLACK)
                .draw()
                .map_err(|e| err(&e))?;
        }
        root.present().map_err(|e| err(&e))?;
    }
    Ok(svg.into_bytes())
}

/// Demand and electrical power of one or more runs.
pub fn power_tracking(runs: &[(&str, &SimTrace)]) -> Result<Vec<u8>> {
    let Some((_, first)) = runs.first() else { return Err(anyhow!("no runs to plot")) };
    let mut lines = vec![Line::from_trace("demand", PALETTE[0], first, |r| r.p_demand_w / 1e6)];
    for (i, (name, trace)) in runs.iter().enumerate() {
        lines.push(Line::from_trace(format!("{name} P_e"), PALETTE[1 + i % 3], trace, |r| r.p_e_w / 1e6));
    }
    render("Power tracking", vec![Panel { y_label: "power (MW)", lines }])
}

/// Speed, pitch and torque against their references.
pub fn reference_tracking(trace: &SimTrace) -> Result<Vec<u8>> {
    let pair = |y_label, name: &str, meas: fn(&TraceRow) -> f64, reference: fn(&TraceRow) -> f64| Panel {
        y_label,
        lines: vec![
            Line::from_trace(format!("{name} reference"), PALETTE[0], trace, reference),
            Line::from_trace(name, PALETTE[1], trace, meas),
        ],
    };
    render(
        "Reference tracking",
        vec![
            pair("speed (rad/s)", "omega", |r| r.omega_radps, |r| r.omega_ref_radps),
            pair("pitch (deg)", "pitch", |r| r.pitch_deg, |r| r.pitch_ref_deg),
            pair("torque (kN m)", "torque", |r| r.torque_nm / 1e3, |r| r.torque_ref_nm / 1e3),
        ],
    )
}

/// Wind with the hysteresis thresholds, and the active gain set.
pub fn switching(trace: &SimTrace, thresholds: &Interval) -> Result<Vec<u8>> {
    let flat = |label: &str, v: f64, color| {
        let mut l = Line::from_trace(label, color, trace, |_| 0.0);
        l.points.iter_mut().for_each(|p| p.1 = v);
        l
    };
    render(
        "Gain switching",
        vec![
            Panel {
                y_label: "wind (m/s)",
                lines: vec![
                    Line::from_trace("wind", PALETTE[1], trace, |r| r.wind_mps),
                    flat("lower threshold", thresholds.lower(), PALETTE[3]),
                    flat("upper threshold", thresholds.upper(), PALETTE[2]),
                ],
            },
            Panel { y_label: "gain set", lines: vec![Line::from_trace("active", PALETTE[0], trace, |r| f64::from(r.gain_idx))] },
        ],
    )
}

/// Pitch and torque of both controllers.
pub fn actuators(baseline: &SimTrace, lq: &SimTrace) -> Result<Vec<u8>> {
    let panel = |y_label, f: fn(&TraceRow) -> f64| Panel {
        y_label,
        lines: vec![Line::from_trace("baseline", PALETTE[1], baseline, f), Line::from_trace("lq", PALETTE[2], lq, f)],
    };
    render("Actuator commands", vec![panel("pitch (deg)", |r| r.pitch_deg), panel("torque (kN m)", |r| r.torque_nm / 1e3)])
}
