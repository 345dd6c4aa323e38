//! Fixed-step closed-loop simulation, traces and tracking metrics.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::aero::CpModel;
use crate::baseline::BaselineController;
use crate::dynamics::{electrical_power, integrate_step, PlantState, TurbineParameters};
use crate::error::{ensure_positive, Error, Result};
use crate::lq::LqController;
use crate::refgen::ReferenceGenerator;
use crate::wind::{generate_demand, sample_count, DemandSpec, WindSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Shared controller and plant step (s).
    pub ts: f64,
    pub duration: f64,
    /// Initial transient excluded from metrics (s).
    pub trim: f64,
    /// Standard deviation of additive noise on the measured speed (rad/s).
    pub measurement_noise: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { ts: 0.004, duration: 600.0, trim: 90.0, measurement_noise: 0.0 }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("sampling time", self.ts)?;
        ensure_positive("duration", self.duration)?;
        if !(self.trim >= 0.0 && self.trim < self.duration) {
            return Err(Error::InvalidParameter { name: "trim", reason: format!("{} not in [0, duration)", self.trim) });
        }
        if !(self.measurement_noise >= 0.0 && self.measurement_noise.is_finite()) {
            return Err(Error::InvalidParameter { name: "measurement_noise", reason: "must be non-negative".into() });
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        sample_count(self.duration, self.ts)
    }
}

/// One trace row; field names are the CSV header.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t_s: f64,
    pub wind_mps: f64,
    pub p_demand_w: f64,
    pub omega_radps: f64,
    pub pitch_deg: f64,
    pub torque_nm: f64,
    pub p_e_w: f64,
    pub omega_ref_radps: f64,
    pub pitch_ref_deg: f64,
    pub torque_ref_nm: f64,
    /// Active LQ design (1 or 2); 0 for the baseline controller.
    pub gain_idx: u8,
}

pub const TRACE_HEADER: &str =
    "t_s,wind_mps,p_demand_w,omega_radps,pitch_deg,torque_nm,p_e_w,omega_ref_radps,pitch_ref_deg,torque_ref_nm,gain_idx";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimTrace {
    pub rows: Vec<TraceRow>,
}

impl SimTrace {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv_bytes()?)?;
        Ok(())
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        if self.rows.is_empty() {
            w.write_record(TRACE_HEADER.split(','))?;
        }
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.into_inner().map_err(|e| Error::Csv(e.to_string()))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let rows = r.deserialize().collect::<std::result::Result<Vec<TraceRow>, _>>()?;
        Ok(Self { rows })
    }

    /// Rows with `t >= trim`.
    pub fn window(&self, trim: f64) -> &[TraceRow] {
        let start = self.rows.partition_point(|r| r.t_s < trim);
        &self.rows[start..]
    }

    pub fn switch_events(&self) -> Vec<SwitchEvent> {
        self.rows
            .windows(2)
            .filter(|w| w[0].gain_idx != w[1].gain_idx)
            .map(|w| SwitchEvent { t_s: w[1].t_s, from: w[0].gain_idx, to: w[1].gain_idx, wind_mps: w[1].wind_mps })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwitchEvent {
    pub t_s: f64,
    pub from: u8,
    pub to: u8,
    pub wind_mps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rms_tracking_error: f64,
    pub mean_abs_error: f64,
    /// Accumulated absolute pitch movement (deg).
    pub pitch_travel: f64,
    /// Accumulated absolute torque movement (N m).
    pub torque_travel: f64,
    pub switch_count: usize,
    pub samples: usize,
}

/// Root-mean-square of `P_e - P_demand` over rows with `t >= trim`.
pub fn rms_error(trace: &SimTrace, trim: f64) -> Result<f64> {
    let w = trace.window(trim);
    if w.is_empty() {
        return Err(Error::EmptyWindow(format!("no samples after {trim} s")));
    }
    Ok((w.iter().map(|r| (r.p_e_w - r.p_demand_w).powi(2)).sum::<f64>() / w.len() as f64).sqrt())
}

pub fn compute_metrics(trace: &SimTrace, trim: f64) -> Result<Metrics> {
    let rms = rms_error(trace, trim)?;
    let w = trace.window(trim);
    let travel = |f: fn(&TraceRow) -> f64| w.windows(2).map(|p| (f(&p[1]) - f(&p[0])).abs()).sum::<f64>();
    Ok(Metrics {
        rms_tracking_error: rms,
        mean_abs_error: w.iter().map(|r| (r.p_e_w - r.p_demand_w).abs()).sum::<f64>() / w.len() as f64,
        pitch_travel: travel(|r| r.pitch_deg),
        torque_travel: travel(|r| r.torque_nm),
        switch_count: w.windows(2).filter(|p| p[0].gain_idx != p[1].gain_idx).count(),
        samples: w.len(),
    })
}

/// Commands and references produced by one controller step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlAction {
    pub pitch_deg: f64,
    pub torque_nm: f64,
    pub omega_ref: f64,
    pub pitch_ref: f64,
    pub torque_ref: f64,
    pub gain_idx: u8,
}

// one instance per run, so the size gap between variants is harmless
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone)]
pub enum Controller {
    Baseline(BaselineController),
    Lq { controller: LqController, references: ReferenceGenerator },
}

impl Controller {
    /// `pitch_now` is the pitch applied during the previous step.
    pub fn step(&mut self, omega: f64, v: f64, p_demand: f64, pitch_now: f64) -> Result<ControlAction> {
        match self {
            Controller::Baseline(c) => {
                let out = c.step(omega, p_demand)?;
                Ok(ControlAction {
                    pitch_deg: out.pitch_deg,
                    torque_nm: out.torque_nm,
                    omega_ref: out.omega_desired,
                    pitch_ref: out.pitch_desired,
                    torque_ref: out.torque_desired,
                    gain_idx: 0,
                })
            }
            Controller::Lq { controller, references } => {
                let r = references.step(p_demand, v, pitch_now)?;
                let out = controller.step(omega, v, &r);
                Ok(ControlAction {
                    pitch_deg: out.pitch_deg,
                    torque_nm: out.torque_nm,
                    omega_ref: r.omega,
                    pitch_ref: r.pitch_deg,
                    torque_ref: r.torque_nm,
                    gain_idx: out.active as u8 + 1,
                })
            }
        }
    }
}

/// Plant and controller stepped together at `sim.ts` for `sim.duration`.
///
/// Row `k` holds the state at `t = k * ts`, the commands applied over the
/// following step and the resulting electrical power. The measured speed is
/// the plant state plus optional Gaussian noise seeded by `noise_seed`.
#[allow(clippy::too_many_arguments)]
pub fn run_closed_loop(
    params: &TurbineParameters,
    cp: &CpModel,
    controller: &mut Controller,
    initial_omega: f64,
    initial_pitch: f64,
    wind: &WindSeries,
    demand: &DemandSpec,
    sim: &SimConfig,
    noise_seed: u64,
) -> Result<(SimTrace, Metrics)> {
    sim.validate()?;
    ensure_positive("initial speed", initial_omega)?;
    let n = sim.steps();
    let last_t = (n.saturating_sub(1)) as f64 * sim.ts;
    if wind.end_time() < last_t - 1e-9 * (1.0 + last_t) {
        return Err(Error::TimeOutOfRange { t: last_t, duration: wind.end_time() });
    }
    let noise = if sim.measurement_noise > 0.0 {
        Some(Normal::new(0.0, sim.measurement_noise).map_err(|e| Error::Config(e.to_string()))?)
    } else {
        None
    };
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let mut state = PlantState { omega: initial_omega };
    let mut pitch_now = initial_pitch;
    let mut rows = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 * sim.ts;
        let v = wind.at(t)?;
        let p = generate_demand(demand, t, sim.duration)?;
        let measured = match &noise {
            Some(d) => state.omega + d.sample(&mut rng),
            None => state.omega,
        };
        let a = controller.step(measured, v, p, pitch_now)?;
        rows.push(TraceRow {
            t_s: t,
            wind_mps: v,
            p_demand_w: p,
            omega_radps: state.omega,
            pitch_deg: a.pitch_deg,
            torque_nm: a.torque_nm,
            p_e_w: electrical_power(params, state.omega, a.torque_nm),
            omega_ref_radps: a.omega_ref,
            pitch_ref_deg: a.pitch_ref,
            torque_ref_nm: a.torque_ref,
            gain_idx: a.gain_idx,
        });
        state = integrate_step(params, cp, state, a.pitch_deg, a.torque_nm, v, sim.ts).map_err(|e| match e {
            Error::Divergence { omega, .. } => Error::Divergence { step: k, omega },
            other => other,
        })?;
        pitch_now = a.pitch_deg;
    }
    let trace = SimTrace { rows };
    let metrics = compute_metrics(&trace, sim.trim)?;
    Ok((trace, metrics))
}
