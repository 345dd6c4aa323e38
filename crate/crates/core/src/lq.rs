//! Gain-scheduled LQ tracking controller on an integrator-augmented model.
//!
//! The augmented state is `x = [xi, z, mu_pitch, mu_torque]`: speed deviation,
//! integral of the speed tracking error and the actuator deviations, which
//! become states because the controller commands their rates.

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Matrix4x2, SMatrix, Vector4};
use serde::{Deserialize, Serialize};

use crate::aero::CpModel;
use crate::common::{rate_limited_update, Interval};
use crate::dynamics::{find_equilibrium, linearize, Equilibrium, LinearPlantModel, TurbineParameters};
use crate::error::{ensure_positive, Error, Result};

/// Units the weights are expressed in.
///
/// The plant model works in degrees and N m. Scaling factors convert those to
/// the units of the weighting matrices: by default radians and kN m, which
/// gives the published weights a sensible balance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignUnits {
    /// Design-unit pitch per degree.
    pub pitch: f64,
    /// Design-unit torque per N m.
    pub torque: f64,
}

impl Default for DesignUnits {
    fn default() -> Self {
        Self { pitch: std::f64::consts::PI / 180.0, torque: 1e-3 }
    }
}

impl DesignUnits {
    /// Weights applied directly to degrees and N m.
    pub fn engineering() -> Self {
        Self { pitch: 1.0, torque: 1.0 }
    }

    fn state(&self) -> Matrix4<f64> {
        Matrix4::from_diagonal(&Vector4::new(1.0, 1.0, self.pitch, self.torque))
    }

    fn input(&self) -> Matrix2<f64> {
        Matrix2::new(self.pitch, 0.0, 0.0, self.torque)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedModel {
    pub a: Matrix4<f64>,
    pub b: Matrix4x2<f64>,
    /// Disturbance map for `[nu, xi_desired]`.
    pub f: Matrix4x2<f64>,
    pub ts: f64,
    pub source: LinearPlantModel,
}

impl AugmentedModel {
    /// Augmented model in the plant's own units.
    pub fn new(lin: &LinearPlantModel) -> Result<Self> {
        Self::with_units(lin, DesignUnits::engineering())
    }

    /// Augmented model with the actuator states and inputs rescaled.
    pub fn with_units(lin: &LinearPlantModel, units: DesignUnits) -> Result<Self> {
        ensure_positive("pitch unit scale", units.pitch)?;
        ensure_positive("torque unit scale", units.torque)?;
        let ts = lin.ts;
        #[rustfmt::skip]
        let a = Matrix4::new(
            lin.a_d, 0.0, lin.b_d[0] / units.pitch, lin.b_d[1] / units.torque,
            -ts,     1.0, 0.0,                      0.0,
            0.0,     0.0, 1.0,                      0.0,
            0.0,     0.0, 0.0,                      1.0,
        );
        #[rustfmt::skip]
        let b = Matrix4x2::new(
            0.0, 0.0,
            0.0, 0.0,
            ts,  0.0,
            0.0, ts,
        );
        #[rustfmt::skip]
        let f = Matrix4x2::new(
            lin.f_d, 0.0,
            0.0,     ts,
            0.0,     0.0,
            0.0,     0.0,
        );
        let model = Self { a, b, f, ts, source: *lin };
        let rank = model.controllability_rank();
        if rank < 4 {
            return Err(Error::Uncontrollable { rank });
        }
        Ok(model)
    }

    /// Numerical rank of `[B, AB, A^2 B, A^3 B]` after row and column
    /// equilibration.
    pub fn controllability_rank(&self) -> usize {
        let mut c = SMatrix::<f64, 4, 8>::zeros();
        let mut blk = self.b;
        for i in 0..4 {
            c.fixed_view_mut::<4, 2>(0, 2 * i).copy_from(&blk);
            blk = self.a * blk;
        }
        for mut row in c.row_iter_mut() {
            let m = row.amax();
            if m > 0.0 {
                row /= m;
            }
        }
        for mut col in c.column_iter_mut() {
            let m = col.amax();
            if m > 0.0 {
                col /= m;
            }
        }
        let svd = c.svd(false, false);
        let smax = svd.singular_values.max();
        svd.singular_values.iter().filter(|&&s| s > 1e-10 * smax.max(f64::MIN_POSITIVE)).count()
    }
}

pub const DARE_TOLERANCE: f64 = 1e-12;
pub const DARE_MAX_ITERATIONS: usize = 1_000_000;

/// `||A'SA - S - A'SB (B'SB + R)^-1 B'SA + Q||_F`.
pub fn dare_residual(a: &Matrix4<f64>, b: &Matrix4x2<f64>, q: &Matrix4<f64>, r: &Matrix2<f64>, s: &Matrix4<f64>) -> f64 {
    let bts = b.transpose() * s;
    let g = bts * b + r;
    let Some(g_inv) = g.try_inverse() else { return f64::INFINITY };
    let res = a.transpose() * s * a - s - a.transpose() * bts.transpose() * g_inv * bts * a + q;
    res.norm()
}

fn check_weights(q: &Matrix4<f64>, r: &Matrix2<f64>) -> Result<()> {
    let sym_tol = |m: f64| 1e-12 * m.max(1.0);
    if (q - q.transpose()).amax() > sym_tol(q.amax()) {
        return Err(Error::InvalidWeight { name: "Q", requirement: "symmetric" });
    }
    if (r - r.transpose()).amax() > sym_tol(r.amax()) {
        return Err(Error::InvalidWeight { name: "R", requirement: "symmetric" });
    }
    if q.symmetric_eigenvalues().min() < -1e-12 * q.amax() || !q.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidWeight { name: "Q", requirement: "positive semidefinite" });
    }
    if !(r.symmetric_eigenvalues().min() > 0.0) {
        return Err(Error::InvalidWeight { name: "R", requirement: "positive definite" });
    }
    Ok(())
}

/// Stabilizing solution of the discrete algebraic Riccati equation.
///
/// Fixed-point iteration of the Riccati map from `S = Q`, stopped when the
/// Frobenius norm of the update falls below `DARE_TOLERANCE` relative to `S`.
pub fn solve_dare(a: &Matrix4<f64>, b: &Matrix4x2<f64>, q: &Matrix4<f64>, r: &Matrix2<f64>) -> Result<Matrix4<f64>> {
    solve_dare_generic(a, b, q, r)
}

fn solve_dare_generic<const N: usize, const M: usize>(
    a: &SMatrix<f64, N, N>,
    b: &SMatrix<f64, N, M>,
    q: &SMatrix<f64, N, N>,
    r: &SMatrix<f64, M, M>,
) -> Result<SMatrix<f64, N, N>> {
    let at = a.transpose();
    let mut s = *q;
    let mut change = f64::INFINITY;
    for _ in 0..DARE_MAX_ITERATIONS {
        let bts = b.transpose() * s;
        let g = bts * b + r;
        let g_inv = g.try_inverse().ok_or(Error::Singular("B'SB + R"))?;
        let sa = s * a;
        let mut next = at * sa - at * bts.transpose() * g_inv * (bts * a) + q;
        next = 0.5 * (next + next.transpose());
        change = (next - s).norm();
        s = next;
        if change <= DARE_TOLERANCE * s.norm() {
            return Ok(s);
        }
        if !change.is_finite() {
            break;
        }
    }
    Err(Error::RiccatiNonConvergence { iterations: DARE_MAX_ITERATIONS, residual: change })
}

/// Scalar Riccati solution, exposed for checks against the closed form.
pub fn solve_dare_scalar(a: f64, b: f64, q: f64, r: f64) -> Result<f64> {
    let s = solve_dare_generic(
        &SMatrix::<f64, 1, 1>::new(a),
        &SMatrix::<f64, 1, 1>::new(b),
        &SMatrix::<f64, 1, 1>::new(q),
        &SMatrix::<f64, 1, 1>::new(r),
    )?;
    Ok(s[(0, 0)])
}

/// `K = (B'SB + R)^-1 B'SA`.
pub fn compute_gain(a: &Matrix4<f64>, b: &Matrix4x2<f64>, r: &Matrix2<f64>, s: &Matrix4<f64>) -> Result<Matrix2x4<f64>> {
    let bts = b.transpose() * s;
    let g = (bts * b + r).try_inverse().ok_or(Error::Singular("B'SB + R"))?;
    Ok(g * bts * a)
}

pub fn spectral_radius(m: &Matrix4<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Operating point and weights of one LQ design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignPoint {
    pub pitch_deg: f64,
    pub torque_nm: f64,
    pub wind_mps: f64,
    /// Diagonal of Q for `[xi, z, mu_pitch, mu_torque]`.
    pub q: [f64; 4],
    /// Diagonal of R for the pitch and torque rates.
    pub r: [f64; 2],
}

impl DesignPoint {
    pub fn low_wind() -> Self {
        Self { pitch_deg: 2.65, torque_nm: 16_850.0, wind_mps: 8.0, q: [1e-2, 1e3, 1e3, 1e-2], r: [5e4, 5e4] }
    }

    pub fn high_wind() -> Self {
        Self { pitch_deg: 6.98, torque_nm: 25_720.0, wind_mps: 10.5, q: [1e-4, 10.0, 1e4, 1e6], r: [1e6, 1e4] }
    }

    pub fn q_matrix(&self) -> Matrix4<f64> {
        Matrix4::from_diagonal(&Vector4::from(self.q))
    }

    pub fn r_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.r[0], 0.0, 0.0, self.r[1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LqDesign {
    pub equilibrium: Equilibrium,
    pub model: AugmentedModel,
    pub units: DesignUnits,
    pub q: Matrix4<f64>,
    pub r: Matrix2<f64>,
    pub s: Matrix4<f64>,
    /// Gain in design units.
    pub k_design: Matrix2x4<f64>,
    /// Gain mapping `[rad/s, rad s, deg, N m]` deviations to
    /// `[deg/s, N m/s]` rates.
    pub k: Matrix2x4<f64>,
    pub residual: f64,
    pub spectral_radius: f64,
}

impl LqDesign {
    /// Designs a gain about the stable equilibrium for the given actuator
    /// positions and wind speed.
    pub fn new(params: &TurbineParameters, cp: &CpModel, point: &DesignPoint, ts: f64, units: DesignUnits) -> Result<Self> {
        let eq = find_equilibrium(params, cp, point.pitch_deg, point.torque_nm, point.wind_mps)?;
        let lin = linearize(params, cp, &eq, ts)?;
        Self::from_linear(&lin, point.q_matrix(), point.r_matrix(), units)
    }

    pub fn from_linear(lin: &LinearPlantModel, q: Matrix4<f64>, r: Matrix2<f64>, units: DesignUnits) -> Result<Self> {
        check_weights(&q, &r)?;
        let model = AugmentedModel::with_units(lin, units)?;
        let s = solve_dare(&model.a, &model.b, &q, &r)?;
        let residual = dare_residual(&model.a, &model.b, &q, &r, &s);
        if !(residual <= 1e-8 * (1.0 + s.norm())) {
            return Err(Error::RiccatiNonConvergence { iterations: DARE_MAX_ITERATIONS, residual });
        }
        let k_design = compute_gain(&model.a, &model.b, &r, &s)?;
        let radius = spectral_radius(&(model.a - model.b * k_design));
        if !(radius < 1.0) {
            return Err(Error::Unstable { radius });
        }
        let u_inv = units.input().try_inverse().ok_or(Error::Singular("input scaling"))?;
        let k = u_inv * k_design * units.state();
        Ok(Self { equilibrium: lin.equilibrium, model, units, q, r, s, k_design, k, residual, spectral_radius: radius })
    }

    /// Eigenvalues of `A - B K` in design units, as `(re, im)` pairs.
    pub fn closed_loop_eigenvalues(&self) -> Vec<(f64, f64)> {
        (self.model.a - self.model.b * self.k_design).complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect()
    }

    /// Equilibrium actuator positions `[pitch, torque]`.
    pub fn input_anchor(&self) -> [f64; 2] {
        [self.equilibrium.pitch_deg, self.equilibrium.torque_nm]
    }
}

/// Two designs with hysteresis switching on wind speed.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSchedule {
    pub designs: [LqDesign; 2],
    pub switching: Interval,
    active: usize,
}

impl GainSchedule {
    /// Initial selection: the high-wind design only above the upper threshold.
    pub fn new(low: LqDesign, high: LqDesign, switching: Interval, initial_wind: f64) -> Self {
        let active = usize::from(initial_wind > switching.upper());
        Self { designs: [low, high], switching, active }
    }

    /// Index (0 or 1) of the active design.
    pub fn active(&self) -> usize {
        self.active
    }

    pub fn active_design(&self) -> &LqDesign {
        &self.designs[self.active]
    }

    /// Updates the selection for wind speed `v`; returns the active index.
    pub fn select(&mut self, v: f64) -> usize {
        if v < self.switching.lower() {
            self.active = 0;
        } else if v > self.switching.upper() {
            self.active = 1;
        }
        self.active
    }
}

/// Reference values the controller tracks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqReference {
    pub omega: f64,
    pub pitch_deg: f64,
    pub torque_nm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqOutput {
    pub pitch_deg: f64,
    pub torque_nm: f64,
    pub active: usize,
    pub switched: bool,
    /// Commanded actuator rates before limiting.
    pub rates: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct LqController {
    schedule: GainSchedule,
    params: TurbineParameters,
    ts: f64,
    /// Integral of the speed tracking error (rad).
    z: f64,
    u_prev: [f64; 2],
}

impl LqController {
    pub fn new(schedule: GainSchedule, params: TurbineParameters, ts: f64, pitch0: f64, torque0: f64) -> Result<Self> {
        ensure_positive("sampling time", ts)?;
        Ok(Self { schedule, params, ts, z: 0.0, u_prev: [pitch0, torque0] })
    }

    pub fn schedule(&self) -> &GainSchedule {
        &self.schedule
    }

    pub fn integral(&self) -> f64 {
        self.z
    }

    /// Augmented state and desired state relative to the active equilibrium.
    pub fn deviations(&self, omega: f64, reference: &LqReference) -> (Vector4<f64>, Vector4<f64>) {
        let d = self.schedule.active_design();
        let eq = &d.equilibrium;
        let x = Vector4::new(omega - eq.omega, self.z, self.u_prev[0] - eq.pitch_deg, self.u_prev[1] - eq.torque_nm);
        let xd = Vector4::new(reference.omega - eq.omega, 0.0, reference.pitch_deg - eq.pitch_deg, reference.torque_nm - eq.torque_nm);
        (x, xd)
    }

    /// One sampling period. `v` is the wind speed used for gain selection.
    pub fn step(&mut self, omega: f64, v: f64, reference: &LqReference) -> LqOutput {
        let before = self.schedule.active();
        let active = self.schedule.select(v);
        if active != before {
            log::debug!("gain switch {} -> {} at V = {v:.3} m/s", before + 1, active + 1);
        }
        let (x, xd) = self.deviations(omega, reference);
        let mu_dot = self.schedule.active_design().k * (xd - x);
        // mu(k-1) + u_s is the previous command itself, whichever anchor is active
        let pitch_t = self.u_prev[0] + self.ts * mu_dot[0];
        let torque_t = self.u_prev[1] + self.ts * mu_dot[1];
        let p = &self.params;
        let pitch = rate_limited_update(self.u_prev[0], pitch_t, p.pitch_bounds_deg, p.pitch_step_deg());
        let torque = rate_limited_update(self.u_prev[1], torque_t, p.torque_bounds_nm, p.torque_step_nm);
        self.z += self.ts * (reference.omega - omega);
        self.u_prev = [pitch, torque];
        LqOutput { pitch_deg: pitch, torque_nm: torque, active, switched: active != before, rates: [mu_dot[0], mu_dot[1]] }
    }
}
