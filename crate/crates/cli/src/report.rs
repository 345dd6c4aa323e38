//! Text reports: run summaries, controller comparisons and the LQ design sheet.

use std::fmt::Write;

use anyhow::Result;
use serde::Serialize;
use turbine_lq::config::{Comparison, DelProxies, RunResult};
use turbine_lq::lq::LqDesign;
use turbine_lq::nalgebra::SMatrix;
use turbine_lq::sim::{Metrics, SwitchEvent};
use turbine_lq::{Scenario, ScenarioConfig};

#[derive(Serialize)]
struct RunFile<'a> {
    controller: &'a str,
    metrics: Metrics,
    del: DelProxies,
    switch_events: &'a [SwitchEvent],
}

pub fn metrics_toml(run: &RunResult) -> Result<Vec<u8>> {
    let events = run.trace.switch_events();
    let file = RunFile { controller: run.kind.name(), metrics: run.metrics, del: run.del, switch_events: &events };
    Ok(toml::to_string(&file)?.into_bytes())
}

pub fn run_summary(run: &RunResult, trim: f64) -> String {
    let m = &run.metrics;
    format!(
        "{} controller, {} samples after {trim} s\n  RMS tracking error {:.2} kW (mean |e| {:.2} kW)\n  \
         pitch travel {:.2} deg, torque travel {:.1} kN m\n  DEL torque {:.1} N m, DEL pitch {:.4} deg\n  gain switches {}",
        run.kind.name(),
        m.samples,
        m.rms_tracking_error / 1e3,
        m.mean_abs_error / 1e3,
        m.pitch_travel,
        m.torque_travel / 1e3,
        run.del.torque_nm,
        run.del.pitch_deg,
        m.switch_count
    )
}

fn events_block(out: &mut String, title: &str, events: &[SwitchEvent]) {
    let _ = writeln!(out, "\n### LQ switch events, {title}\n");
    if events.is_empty() {
        let _ = writeln!(out, "none");
        return;
    }
    let _ = writeln!(out, "| time (s) | from | to | wind (m/s) |\n|---:|---:|---:|---:|");
    for e in events {
        let _ = writeln!(out, "| {:.3} | {} | {} | {:.3} |", e.t_s, e.from, e.to, e.wind_mps);
    }
}

pub fn comparison(cfg: &ScenarioConfig, variable: &Comparison, rated: &Comparison) -> String {
    let runs = [&variable.baseline, &variable.lq, &rated.baseline, &rated.lq];
    let row = |name: &str, f: &dyn Fn(&RunResult) -> String| {
        format!("| {name} | {} |", runs.iter().map(|r| f(r)).collect::<Vec<_>>().join(" | "))
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# Controller comparison\n\nseed {}, mean wind {} m/s, turbulence intensity {}, {} s simulated, first {} s trimmed\n",
        cfg.seed, cfg.wind.mean, cfg.wind.turbulence_intensity, cfg.sim.duration, cfg.sim.trim
    );
    let _ = writeln!(
        out,
        "| metric | baseline, configured demand | LQ, configured demand | baseline, rated demand | LQ, rated demand |\n\
         |---|---:|---:|---:|---:|"
    );
    let lines = [
        row("RMS tracking error (kW)", &|r| format!("{:.2}", r.metrics.rms_tracking_error / 1e3)),
        row("mean abs error (kW)", &|r| format!("{:.2}", r.metrics.mean_abs_error / 1e3)),
        row("pitch travel (deg)", &|r| format!("{:.2}", r.metrics.pitch_travel)),
        row("torque travel (kN m)", &|r| format!("{:.1}", r.metrics.torque_travel / 1e3)),
        row("DEL torque, m = 4 (N m)", &|r| format!("{:.1}", r.del.torque_nm)),
        row("DEL pitch, m = 10 (deg)", &|r| format!("{:.4}", r.del.pitch_deg)),
        row("gain switches", &|r| r.metrics.switch_count.to_string()),
    ];
    for l in lines {
        let _ = writeln!(out, "{l}");
    }
    events_block(&mut out, "configured demand", &variable.switch_events);
    events_block(&mut out, "rated demand", &rated.switch_events);
    out
}

fn matrix_rows<const R: usize, const C: usize>(out: &mut String, name: &str, m: &SMatrix<f64, R, C>) {
    let _ = writeln!(out, "  {name} =");
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>14.6e}")).collect();
        let _ = writeln!(out, "    [{}]", cells.join(" "));
    }
}

fn design_block(out: &mut String, index: usize, label: &str, d: &LqDesign) {
    let lin = &d.model.source;
    let eq = &d.equilibrium;
    let _ = writeln!(out, "\n[design {index}: {label}]");
    let _ = writeln!(
        out,
        "  equilibrium: omega_s {:.6} rad/s, pitch_s {} deg, torque_s {} N m, wind {} m/s",
        eq.omega, eq.pitch_deg, eq.torque_nm, eq.wind_mps
    );
    let _ = writeln!(
        out,
        "  continuous: A_c {:.9e}, B_c [{:.9e} per deg, {:.9e} per N m], F_c {:.9e}",
        lin.a_c, lin.b_c[0], lin.b_c[1], lin.f_c
    );
    let _ = writeln!(out, "  discrete:   A_d {:.12}, B_d [{:.9e}, {:.9e}], F_d {:.9e}", lin.a_d, lin.b_d[0], lin.b_d[1], lin.f_d);
    let identity = 1.0 + lin.ts * lin.a_c;
    let _ = writeln!(
        out,
        "  check: A_d = 1 + Ts*A_c = {identity:.12} ({})",
        if lin.a_d == identity { "exact".to_string() } else { format!("off by {:.3e}", lin.a_d - identity) }
    );
    let q: Vec<String> = (0..4).map(|i| format!("{:e}", d.q[(i, i)])).collect();
    let _ = writeln!(out, "  Q = diag[{}], R = diag[{:e}, {:e}]", q.join(", "), d.r[(0, 0)], d.r[(1, 1)]);
    matrix_rows(out, "augmented A", &d.model.a);
    matrix_rows(out, "augmented B", &d.model.b);
    matrix_rows(out, "Riccati S", &d.s);
    let _ = writeln!(out, "  Riccati residual {:.3e} (scaled {:.3e})", d.residual, d.residual / (1.0 + d.s.norm()));
    matrix_rows(out, "K, design units", &d.k_design);
    matrix_rows(out, "K, [rad/s, rad s, deg, N m] -> [deg/s, N m/s]", &d.k);
    let eig: Vec<String> = d.closed_loop_eigenvalues().iter().map(|(re, im)| format!("{re:.9}{im:+.3e}i")).collect();
    let _ = writeln!(out, "  closed-loop eigenvalues: {}", eig.join(", "));
    let _ = writeln!(out, "  spectral radius {:.9}", d.spectral_radius);
}

pub fn design(scenario: &Scenario) -> String {
    let cfg = &scenario.config;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "LQ design report\nsampling time {} s; design units: {} per deg pitch, {} per N m torque\n\
         state [xi (rad/s), z (rad), mu_pitch, mu_torque], input [pitch rate, torque rate]",
        cfg.sim.ts, cfg.lq.units.pitch, cfg.lq.units.torque
    );
    let _ = writeln!(
        out,
        "switching: high-wind gains above {} m/s, low-wind gains below {} m/s",
        cfg.lq.switching_mps.upper(),
        cfg.lq.switching_mps.lower()
    );
    design_block(&mut out, 1, "low wind", &scenario.low);
    design_block(&mut out, 2, "high wind", &scenario.high);
    out
}
