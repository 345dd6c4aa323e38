//! Conventional baseline controller: desired speed from the power demand,
//! switched generator torque law and a gain-scheduled PI pitch loop, coupled
//! through a slow gain-boost correction term.

use serde::{Deserialize, Serialize};

use crate::common::{rate_limited_update, sat, AlphaConvention, Interval, LowpassState};
use crate::dynamics::TurbineParameters;
use crate::error::{ensure_positive, Error, Result};

const DEG_PER_RAD: f64 = 180.0 / std::f64::consts::PI;

/// Tuning of the baseline controller.
///
/// Pitch quantities are in degrees and speeds in rad/s, so `k_p` is in
/// degrees per rad/s and `k_k` in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    /// Optimal-tracking torque coefficient (N m s^2).
    pub c_m_star: f64,
    /// Slope of the start-up torque ramp (N m s).
    pub c_12: f64,
    pub omega_ci: f64,
    pub omega_r2: f64,
    /// Correction gain on pitch above fine pitch ((rad/s)/deg).
    pub c_theta_gb: f64,
    /// Correction gain on torque deficit ((rad/s)/(N m)).
    pub c_m_gb: f64,
    pub t_m: f64,
    pub t_theta: f64,
    pub t_gb: f64,
    pub k_p: f64,
    pub k_i: f64,
    pub k_k: f64,
    /// Divide the first torque case by the efficiency so the electrical
    /// (not mechanical) power matches the demand.
    pub compensate_efficiency: bool,
}

impl Default for BaselineConfig {
    /// Published gains read as radian-based and converted to degrees; the
    /// pitch correction gain is disabled (see [`BaselineConfig::literal`]).
    fn default() -> Self {
        Self {
            c_theta_gb: 0.0,
            k_p: 0.133 * DEG_PER_RAD,
            k_i: 0.004 * DEG_PER_RAD,
            k_k: 0.174 * DEG_PER_RAD,
            compensate_efficiency: true,
            ..Self::literal()
        }
    }
}

impl BaselineConfig {
    /// The published parameter set taken at face value.
    pub fn literal() -> Self {
        Self {
            c_m_star: 1.75,
            c_12: 82.47,
            omega_ci: 10.47,
            omega_r2: 15.71,
            c_theta_gb: 30.0,
            c_m_gb: 1e-4,
            t_m: 1.0,
            t_theta: 0.133,
            t_gb: 10.0,
            k_p: 0.133,
            k_i: 0.004,
            k_k: 0.174,
            compensate_efficiency: false,
        }
    }

    pub fn validate(&self, ts: f64) -> Result<()> {
        ensure_positive("c_m_star", self.c_m_star)?;
        ensure_positive("c_12", self.c_12)?;
        ensure_positive("omega_ci", self.omega_ci)?;
        ensure_positive("omega_r2", self.omega_r2)?;
        ensure_positive("k_p", self.k_p)?;
        ensure_positive("k_i", self.k_i)?;
        ensure_positive("k_k", self.k_k)?;
        for (name, v) in [("c_theta_gb", self.c_theta_gb), ("c_m_gb", self.c_m_gb)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter { name, reason: format!("must be non-negative, got {v}") });
            }
        }
        for t in [self.t_m, self.t_theta, self.t_gb] {
            crate::common::make_alpha(ts, t, AlphaConvention::Minus)?;
        }
        Ok(())
    }
}

/// `min(cbrt(P / (eta c_M*)), omega_rated)`.
pub fn desired_speed(config: &BaselineConfig, params: &TurbineParameters, p_demand: f64) -> f64 {
    (p_demand.max(0.0) / (params.efficiency * config.c_m_star)).cbrt().min(params.omega_rated)
}

/// Unfiltered correction `c_theta (theta - theta_min) + c_M (M - M_rated)`.
pub fn raw_correction(config: &BaselineConfig, params: &TurbineParameters, pitch_prev: f64, torque_prev: f64) -> f64 {
    config.c_theta_gb * (pitch_prev - params.pitch_bounds_deg.lower()) + config.c_m_gb * (torque_prev - params.torque_rated_nm)
}

/// Which branch of the switched torque law produced the demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TorqueCase {
    /// Speed at or above the desired speed: deliver the demanded power.
    PowerTracking,
    /// Below cut-in: no torque.
    CutIn,
    /// Linear start-up ramp.
    Ramp,
    /// Optimal-tracking `c_M* omega^2`.
    Quadratic,
}

/// Torque demand before limits; cases are tested in order.
pub fn torque_law(
    config: &BaselineConfig,
    params: &TurbineParameters,
    omega_m: f64,
    omega_m_corrected: f64,
    omega_desired: f64,
    p_demand: f64,
) -> Result<(f64, TorqueCase)> {
    if omega_m >= omega_desired {
        if omega_desired <= 0.0 {
            if p_demand == 0.0 {
                return Ok((0.0, TorqueCase::PowerTracking));
            }
            return Err(Error::InvalidParameter { name: "omega_desired", reason: format!("zero desired speed with demand {p_demand} W") });
        }
        let eta = if config.compensate_efficiency { params.efficiency } else { 1.0 };
        Ok((p_demand / (eta * omega_desired), TorqueCase::PowerTracking))
    } else if omega_m <= config.omega_ci {
        Ok((0.0, TorqueCase::CutIn))
    } else if omega_m_corrected < config.omega_r2 {
        Ok((config.c_12 * (omega_m - config.omega_ci), TorqueCase::Ramp))
    } else {
        Ok((config.c_m_star * omega_m * omega_m, TorqueCase::Quadratic))
    }
}

/// Pitch scheduling factor `1 / (1 + theta / K_K)`.
pub fn pitch_gain_schedule(config: &BaselineConfig, pitch_prev: f64) -> f64 {
    1.0 / (1.0 + pitch_prev / config.k_k)
}

/// Internal state carried between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineState {
    pub correction: LowpassState,
    pub omega_torque: LowpassState,
    pub omega_pitch: LowpassState,
    /// Integrated speed error (rad).
    pub integral: f64,
    pub pitch_prev: f64,
    pub torque_prev: f64,
}

/// Everything computed in one controller step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineOutput {
    pub pitch_deg: f64,
    pub torque_nm: f64,
    pub omega_desired: f64,
    pub pitch_desired: f64,
    pub torque_desired: f64,
    pub case: TorqueCase,
    pub correction: f64,
    pub integral_bounds: Interval,
}

#[derive(Debug, Clone)]
pub struct BaselineController {
    config: BaselineConfig,
    params: TurbineParameters,
    ts: f64,
    state: BaselineState,
}

impl BaselineController {
    /// Starts from the given actuator positions, with the integrator set so
    /// that a zero speed error holds the initial pitch.
    pub fn new(config: BaselineConfig, params: TurbineParameters, ts: f64, pitch0: f64, torque0: f64) -> Result<Self> {
        config.validate(ts)?;
        params.validate()?;
        let filter = |t| LowpassState::from_time_constant(ts, t, AlphaConvention::Minus);
        let pitch0 = sat(pitch0, params.pitch_bounds_deg);
        let torque0 = sat(torque0, params.torque_bounds_nm);
        let g0 = pitch_gain_schedule(&config, pitch0);
        let state = BaselineState {
            correction: filter(config.t_gb)?,
            omega_torque: filter(config.t_m)?,
            omega_pitch: filter(config.t_theta)?,
            integral: pitch0 / (config.k_i * g0),
            pitch_prev: pitch0,
            torque_prev: torque0,
        };
        Ok(Self { config, params, ts, state })
    }

    pub fn config(&self) -> &BaselineConfig {
        &self.config
    }

    pub fn state(&self) -> &BaselineState {
        &self.state
    }

    /// One sampling period: measured generator speed and power demand in,
    /// limited pitch and torque commands out.
    pub fn step(&mut self, omega: f64, p_demand: f64) -> Result<BaselineOutput> {
        let (cfg, par, st) = (&self.config, &self.params, &mut self.state);
        let omega_d = desired_speed(cfg, par, p_demand);

        let dw = st.correction.step(raw_correction(cfg, par, st.pitch_prev, st.torque_prev));
        let boost = dw.max(0.0);

        let omega_m = st.omega_torque.step(omega);
        let (torque_d, case) = torque_law(cfg, par, omega_m, omega_m + boost, omega_d, p_demand)?;
        let torque = rate_limited_update(st.torque_prev, torque_d, par.torque_bounds_nm, par.torque_step_nm);

        let omega_th = st.omega_pitch.step(omega);
        let error = omega_th + boost - omega_d;
        let g = pitch_gain_schedule(cfg, st.pitch_prev);
        let scale = g * cfg.k_i;
        let bounds = Interval::new(par.pitch_bounds_deg.lower() / scale, par.pitch_bounds_deg.upper() / scale)?;
        st.integral = sat(st.integral + self.ts * error, bounds);
        let pitch_d = g * (cfg.k_p * error + cfg.k_i * st.integral);
        let pitch = rate_limited_update(st.pitch_prev, pitch_d, par.pitch_bounds_deg, par.pitch_step_deg());

        st.pitch_prev = pitch;
        st.torque_prev = torque;
        Ok(BaselineOutput {
            pitch_deg: pitch,
            torque_nm: torque,
            omega_desired: omega_d,
            pitch_desired: pitch_d,
            torque_desired: torque_d,
            case,
            correction: dw,
            integral_bounds: bounds,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params() -> TurbineParameters {
        TurbineParameters::default()
    }

    #[test]
    fn desired_speed_examples() {
        let c = BaselineConfig::default();
        let w = desired_speed(&c, &params(), 2e6);
        // oracle: cbrt(2e6 / (0.936 * 1.75)) evaluated offline
        assert_relative_eq!(w, 106.882_195_47, max_relative = 1e-9);
        assert_relative_eq!(w.powi(3), 2e6 / (0.936 * 1.75), max_relative = 1e-12);
        assert_eq!(desired_speed(&c, &params(), 3.35e6), 119.31);
        assert_eq!(desired_speed(&c, &params(), 0.0), 0.0);
    }

    #[test]
    fn correction_examples() {
        let c = BaselineConfig::literal();
        let p = params();
        assert_eq!(raw_correction(&c, &p, 1.09, 30_150.0), 0.0);
        assert_relative_eq!(raw_correction(&c, &p, 2.09, 30_150.0), 30.0, max_relative = 1e-12);
    }

    #[test]
    fn torque_law_cases() {
        let lit = BaselineConfig::literal();
        let p = params();
        let wd = desired_speed(&lit, &p, 2e6);
        let (m, case) = torque_law(&lit, &p, wd, wd, wd, 2e6).unwrap();
        assert_eq!(case, TorqueCase::PowerTracking);
        assert_relative_eq!(m, 18_712.190_47, max_relative = 1e-9);
        let comp = BaselineConfig::default();
        let (m2, _) = torque_law(&comp, &p, wd, wd, wd, 2e6).unwrap();
        assert_relative_eq!(m2 * 0.936, m, max_relative = 1e-12);

        assert_eq!(torque_law(&lit, &p, 10.0, 10.0, wd, 2e6).unwrap(), (0.0, TorqueCase::CutIn));
        let (m, case) = torque_law(&lit, &p, 12.0, 12.0, wd, 2e6).unwrap();
        assert_eq!(case, TorqueCase::Ramp);
        assert_relative_eq!(m, 82.47 * (12.0 - 10.47), max_relative = 1e-12);
        let (m, case) = torque_law(&lit, &p, 100.0, 100.0, wd, 2e6).unwrap();
        assert_eq!(case, TorqueCase::Quadratic);
        assert_relative_eq!(m, 17_500.0, max_relative = 1e-12);

        assert_eq!(torque_law(&lit, &p, 5.0, 5.0, 0.0, 0.0).unwrap().0, 0.0);
        assert!(torque_law(&lit, &p, 5.0, 5.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn gain_schedule_examples() {
        let c = BaselineConfig::literal();
        assert_eq!(pitch_gain_schedule(&c, 0.0), 1.0);
        assert_eq!(pitch_gain_schedule(&c, 0.174), 0.5);
    }

    #[test]
    fn pi_fixed_point_holds_pitch() {
        // rated torque and a pitch where the correction term vanishes
        for (cfg, pitch) in [(BaselineConfig::default(), 5.0), (BaselineConfig::literal(), 1.09)] {
            let p = params();
            let wd = desired_speed(&cfg, &p, 3.35e6);
            let mut c = BaselineController::new(cfg.clone(), p.clone(), 0.004, pitch, 30_150.0).unwrap();
            let out = c.step(wd, 3.35e6).unwrap();
            assert!((out.pitch_deg - pitch).abs() < 1e-9, "{}", out.pitch_deg);
        }
    }

    #[test]
    fn correction_inactive_at_seam() {
        let p = params();
        let mut c = BaselineController::new(BaselineConfig::literal(), p.clone(), 0.004, 1.09, 30_150.0).unwrap();
        let out = c.step(119.31, 3.35e6).unwrap();
        assert_eq!(out.correction, 0.0);
    }

    #[test]
    fn rejects_short_time_constants() {
        let cfg = BaselineConfig { t_theta: 0.006, ..BaselineConfig::default() };
        assert!(BaselineController::new(cfg, params(), 0.004, 2.0, 0.0).is_err());
    }

    #[test]
    fn fuzz_commands_respect_limits() {
        use rand::{Rng, SeedableRng};
        let p = params();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for cfg in [BaselineConfig::default(), BaselineConfig::literal()] {
            let mut c = BaselineController::new(cfg, p.clone(), 0.004, 3.0, 20_000.0).unwrap();
            let (mut th, mut m) = (3.0, 20_000.0);
            let tol = 1e-9;
            for k in 0..100_000 {
                let omega = rng.random_range(1.0..200.0);
                let demand = if k % 1000 == 0 { 0.0 } else { rng.random_range(0.0..3.35e6) };
                let out = c.step(omega, demand).unwrap();
                assert!(p.pitch_bounds_deg.contains(out.pitch_deg));
                assert!(p.torque_bounds_nm.contains(out.torque_nm));
                let dth = p.pitch_step_deg();
                assert!(out.pitch_deg - th <= dth.upper() + tol && out.pitch_deg - th >= dth.lower() - tol);
                assert!(out.torque_nm - m <= 6000.0 + tol && out.torque_nm - m >= -6000.0 - tol);
                assert!(out.integral_bounds.contains(c.state().integral));
                th = out.pitch_deg;
                m = out.torque_nm;
            }
        }
    }

    proptest! {
        #[test]
        fn exactly_one_case(wm in 0.0..200.0f64, boost in 0.0..50.0f64, p in 0.0..3.35e6f64) {
            let cfg = BaselineConfig::literal();
            let par = params();
            let wd = desired_speed(&cfg, &par, p);
            let (m, case) = torque_law(&cfg, &par, wm, wm + boost, wd, p).unwrap();
            let expected = if wm >= wd { TorqueCase::PowerTracking }
                else if wm <= cfg.omega_ci { TorqueCase::CutIn }
                else if wm + boost < cfg.omega_r2 { TorqueCase::Ramp }
                else { TorqueCase::Quadratic };
            prop_assert_eq!(case, expected);
            prop_assert!(m >= 0.0);
        }
    }
}
