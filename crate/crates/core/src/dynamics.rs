//! One-state drive-train plant: rigid rotor and gearbox driven by the
//! aerodynamic torque and braked by the generator.
//!
//! The state is the generator-side shaft speed `omega` (rad/s); inputs are
//! pitch (degrees), generator torque (N m) and wind speed (m/s).

use serde::{Deserialize, Serialize};

use crate::aero::{CpModel, RotorGeometry};
use crate::common::Interval;
use crate::error::{ensure_positive, Error, Result};

const DEG_PER_RAD: f64 = 180.0 / std::f64::consts::PI;

/// Physical constants and actuator limits of the turbine.
///
/// Slew limits are per controller step. The pitch slew limit is stored in
/// radians per step (the published value) and converted on use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TurbineParameters {
    /// Rotor-side moment of inertia (kg m^2).
    pub inertia: f64,
    pub gearbox_ratio: f64,
    /// Combined drive train, generator and converter efficiency.
    pub efficiency: f64,
    pub rotor: RotorGeometry,
    pub pitch_bounds_deg: Interval,
    /// Per-step pitch change limit (rad).
    pub pitch_step_rad: Interval,
    pub torque_bounds_nm: Interval,
    /// Per-step generator torque change limit (N m).
    pub torque_step_nm: Interval,
    /// Rated generator-side speed (rad/s).
    pub omega_rated: f64,
    pub torque_rated_nm: f64,
    pub power_rated_w: f64,
}

impl Default for TurbineParameters {
    fn default() -> Self {
        Self {
            inertia: 39_825_631.0,
            gearbox_ratio: 97.0,
            efficiency: 0.936,
            rotor: RotorGeometry::default(),
            pitch_bounds_deg: Interval::new(1.09, 22.0).expect("static interval"),
            pitch_step_rad: Interval::new(-0.000488, 0.000488).expect("static interval"),
            torque_bounds_nm: Interval::new(0.0, 33_170.0).expect("static interval"),
            torque_step_nm: Interval::new(-6_000.0, 6_000.0).expect("static interval"),
            omega_rated: 119.31,
            torque_rated_nm: 30_150.0,
            power_rated_w: 3.35e6,
        }
    }
}

impl TurbineParameters {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("inertia", self.inertia)?;
        ensure_positive("gearbox ratio", self.gearbox_ratio)?;
        ensure_positive("efficiency", self.efficiency)?;
        if self.efficiency > 1.0 {
            return Err(Error::InvalidParameter { name: "efficiency", reason: format!("{} exceeds 1", self.efficiency) });
        }
        RotorGeometry::new(self.rotor.radius, self.rotor.air_density)?;
        ensure_positive("rated speed", self.omega_rated)?;
        ensure_positive("rated torque", self.torque_rated_nm)?;
        ensure_positive("rated power", self.power_rated_w)?;
        for (name, step) in [("pitch_step_rad", self.pitch_step_rad), ("torque_step_nm", self.torque_step_nm)] {
            if !step.contains(0.0) {
                return Err(Error::InvalidParameter { name, reason: "slew interval must contain zero".into() });
            }
        }
        Ok(())
    }

    /// Per-step pitch change limit in degrees.
    pub fn pitch_step_deg(&self) -> Interval {
        self.pitch_step_rad.scaled(DEG_PER_RAD).expect("scaling a valid interval by a positive factor")
    }

    /// `rho pi r^2 N^2 / (2 J)`.
    fn aero_gain(&self) -> f64 {
        let n = self.gearbox_ratio;
        self.rotor.air_density * self.rotor.swept_area() * n * n / (2.0 * self.inertia)
    }

    /// `N^2 / J`.
    fn torque_gain(&self) -> f64 {
        self.gearbox_ratio * self.gearbox_ratio / self.inertia
    }

    fn lambda(&self, omega: f64, v: f64) -> f64 {
        self.rotor.radius * omega / (self.gearbox_ratio * v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    /// Generator-side speed (rad/s).
    pub omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub omega: f64,
    pub pitch_deg: f64,
    pub torque_nm: f64,
    pub wind_mps: f64,
}

/// Continuous and forward-Euler discretized linearization about an equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearPlantModel {
    pub a_c: f64,
    /// `[d/dpitch (per degree), d/dtorque (per N m)]`.
    pub b_c: [f64; 2],
    pub f_c: f64,
    pub a_d: f64,
    pub b_d: [f64; 2],
    pub f_d: f64,
    pub ts: f64,
    pub equilibrium: Equilibrium,
}

impl LinearPlantModel {
    pub fn from_continuous(a_c: f64, b_c: [f64; 2], f_c: f64, ts: f64, equilibrium: Equilibrium) -> Result<Self> {
        ensure_positive("sampling time", ts)?;
        Ok(Self { a_c, b_c, f_c, a_d: 1.0 + ts * a_c, b_d: [ts * b_c[0], ts * b_c[1]], f_d: ts * f_c, ts, equilibrium })
    }
}

fn rhs_unchecked(params: &TurbineParameters, cp: &CpModel, omega: f64, pitch_deg: f64, torque: f64, v: f64) -> f64 {
    let aero = if v > 0.0 { params.aero_gain() * v * v * v / omega * cp.eval(params.lambda(omega, v), pitch_deg) } else { 0.0 };
    aero - params.torque_gain() * torque
}

/// Generator-side acceleration `d omega / dt` (rad/s^2).
///
/// Wind speeds `v <= 0` contribute no aerodynamic torque.
pub fn plant_rhs(params: &TurbineParameters, cp: &CpModel, omega: f64, pitch_deg: f64, torque: f64, v: f64) -> Result<f64> {
    ensure_positive("generator speed", omega)?;
    Ok(rhs_unchecked(params, cp, omega, pitch_deg, torque, v))
}

/// Electrical output power `eta * omega * torque` (W).
#[inline]
pub fn electrical_power(params: &TurbineParameters, omega: f64, torque: f64) -> f64 {
    params.efficiency * omega * torque
}

const EQUILIBRIUM_SCAN: usize = 4000;

/// Equilibrium speed for fixed pitch, torque and wind.
///
/// Scans `[0.05, 2] * omega_rated` for sign changes of the plant right-hand
/// side and returns the largest root at which the right-hand side is
/// decreasing (a stable equilibrium), refined by bisection.
pub fn find_equilibrium(params: &TurbineParameters, cp: &CpModel, pitch_deg: f64, torque: f64, v: f64) -> Result<Equilibrium> {
    ensure_positive("wind speed", v)?;
    let lo = 0.05 * params.omega_rated;
    let hi = 2.0 * params.omega_rated;
    let f = |w: f64| rhs_unchecked(params, cp, w, pitch_deg, torque, v);
    let h = (hi - lo) / EQUILIBRIUM_SCAN as f64;
    let mut bracket = None;
    let mut prev_w = lo;
    let mut prev_f = f(lo);
    for i in 1..=EQUILIBRIUM_SCAN {
        let w = lo + h * i as f64;
        let fw = f(w);
        // strict: a plateau where Cp clips to zero with no torque is not an equilibrium
        if prev_f > 0.0 && fw < 0.0 {
            bracket = Some((prev_w, w));
        }
        prev_w = w;
        prev_f = fw;
    }
    let (mut a, mut b) = bracket.ok_or(Error::NoEquilibrium { pitch_deg, torque_nm: torque, wind_mps: v, lo, hi })?;
    // invariant: f(a) > 0 > f(b)
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(Equilibrium { omega: m, pitch_deg, torque_nm: torque, wind_mps: v });
        }
        if fm > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    let omega = if f(a).abs() < f(b).abs() { a } else { b };
    Ok(Equilibrium { omega, pitch_deg, torque_nm: torque, wind_mps: v })
}

/// Analytic linearization of the plant about `eq`, discretized with forward
/// Euler at `ts`.
pub fn linearize(params: &TurbineParameters, cp: &CpModel, eq: &Equilibrium, ts: f64) -> Result<LinearPlantModel> {
    ensure_positive("generator speed", eq.omega)?;
    ensure_positive("wind speed", eq.wind_mps)?;
    let (w, v, t) = (eq.omega, eq.wind_mps, eq.pitch_deg);
    let lambda = params.lambda(w, v);
    let raw = cp.raw(lambda, t);
    if raw <= 0.0 {
        return Err(Error::OnClippingBoundary { raw });
    }
    let (cp_l, cp_t) = cp.raw_gradient(lambda, t);
    let k = params.aero_gain();
    let r_over_n = params.rotor.radius / params.gearbox_ratio;
    let v3 = v * v * v;
    let a_c = k * v3 * (-raw / (w * w) + cp_l * r_over_n / (w * v));
    let b_pitch = k * v3 / w * cp_t;
    let b_torque = -params.torque_gain();
    let f_c = k * (3.0 * v * v * raw / w - v * cp_l * r_over_n);
    LinearPlantModel::from_continuous(a_c, [b_pitch, b_torque], f_c, ts, *eq)
}

/// Advances the plant by `ts` with one classical fourth-order Runge-Kutta
/// step, inputs held constant over the step.
///
/// Fails with [`Error::Divergence`] (step index 0) when the speed leaves
/// `(0, 3 * omega_rated]`.
pub fn integrate_step(
    params: &TurbineParameters,
    cp: &CpModel,
    state: PlantState,
    pitch_deg: f64,
    torque: f64,
    v: f64,
    ts: f64,
) -> Result<PlantState> {
    ensure_positive("sampling time", ts)?;
    let limit = 3.0 * params.omega_rated;
    let diverged = |omega: f64| Error::Divergence { step: 0, omega };
    let f = |w: f64| -> Result<f64> {
        if !(w > 0.0 && w <= limit) {
            return Err(diverged(w));
        }
        Ok(rhs_unchecked(params, cp, w, pitch_deg, torque, v))
    };
    let w = state.omega;
    let k1 = f(w)?;
    let k2 = f(w + 0.5 * ts * k1)?;
    let k3 = f(w + 0.5 * ts * k2)?;
    let k4 = f(w + ts * k3)?;
    let next = w + ts / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if !(next > 0.0 && next <= limit) {
        return Err(diverged(next));
    }
    Ok(PlantState { omega: next })
}
