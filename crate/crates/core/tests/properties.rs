//! Randomized invariants across the public API.

use std::sync::OnceLock;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use turbine_lq::aero::{cp_argmax_speed, rotor_torque, wind_power, CpModel, BETZ_LIMIT};
use turbine_lq::baseline::{raw_correction, BaselineConfig, BaselineController};
use turbine_lq::config::AeroConfig;
use turbine_lq::dynamics::{electrical_power, plant_rhs, TurbineParameters};
use turbine_lq::loads::{del, rainflow, Cycle, DelConfig};
use turbine_lq::lq::GainSchedule;
use turbine_lq::refgen::reference_torque;
use turbine_lq::sim::SimTrace;
use turbine_lq::wind::{generate_demand, generate_wind, DemandSpec, WindSpec};
use turbine_lq::{ControllerKind, Scenario, ScenarioConfig};

fn cp() -> &'static CpModel {
    static CP: OnceLock<CpModel> = OnceLock::new();
    CP.get_or_init(|| AeroConfig::default().model().unwrap())
}

fn scenario() -> &'static Scenario {
    static S: OnceLock<Scenario> = OnceLock::new();
    S.get_or_init(|| {
        let mut cfg = ScenarioConfig::default();
        cfg.sim.duration = 200.0;
        cfg.sim.trim = 0.0;
        cfg.wind.mean = 11.0;
        cfg.wind.turbulence_intensity = 0.15;
        Scenario::build(cfg).unwrap()
    })
}

/// Floating-point slack when comparing a difference of two commands with a bound.
fn slack(x: f64) -> f64 {
    2.0 * f64::EPSILON * x.abs()
}

#[test]
fn cp_is_bounded_on_the_domain() {
    let model = cp();
    let d = *model.domain();
    for i in 0..200 {
        for j in 0..200 {
            let l = d.lambda.lower() + (d.lambda.upper() - d.lambda.lower()) * i as f64 / 199.0;
            let t = d.pitch_deg.lower() + (d.pitch_deg.upper() - d.pitch_deg.lower()) * j as f64 / 199.0;
            let c = model.eval(l, t);
            assert!((0.0..BETZ_LIMIT).contains(&c), "Cp({l}, {t}) = {c}");
        }
    }
}

proptest! {
    #[test]
    fn rotor_power_respects_betz(lambda in 1.0..16.0f64, pitch in 1.09..22.0f64, v in 3.0..25.0f64) {
        let p = TurbineParameters::default();
        let omega_r = lambda * v / p.rotor.radius;
        let power = rotor_torque(&p.rotor, cp(), omega_r, v, pitch).unwrap() * omega_r;
        prop_assert!(power <= wind_power(&p.rotor, v).unwrap() * BETZ_LIMIT * (1.0 + 1e-12));
    }

    #[test]
    fn optimal_speed_scales_with_wind(v in 2.0..15.0f64, pitch in 1.09..22.0f64) {
        let p = TurbineParameters::default();
        let w1 = cp_argmax_speed(cp(), &p.rotor, p.gearbox_ratio, v, pitch).unwrap();
        let w2 = cp_argmax_speed(cp(), &p.rotor, p.gearbox_ratio, 2.0 * v, pitch).unwrap();
        prop_assert!((w2 - 2.0 * w1).abs() <= 1e-12 * w2);
    }

    #[test]
    fn acceleration_sign_follows_torque_balance(
        omega in 20.0..140.0f64, pitch in 1.09..22.0f64, torque in 0.0..33_170.0f64, v in 3.0..25.0f64
    ) {
        let p = TurbineParameters::default();
        let m_r = rotor_torque(&p.rotor, cp(), omega / p.gearbox_ratio, v, pitch).unwrap();
        let balance = m_r - p.gearbox_ratio * torque;
        let rhs = plant_rhs(&p, cp(), omega, pitch, torque, v).unwrap();
        prop_assert!(balance.abs() < 1e-9 * m_r.abs().max(1.0) || rhs.signum() == balance.signum());
    }

    #[test]
    fn electrical_power_is_the_product(omega in 0.0..140.0f64, torque in 0.0..33_170.0f64) {
        let p = TurbineParameters::default();
        prop_assert_eq!(electrical_power(&p, omega, torque), p.efficiency * omega * torque);
    }

    #[test]
    fn correction_vanishes_at_the_seam(c_theta in 0.0..100.0f64, c_m in 0.0..1.0f64) {
        let p = TurbineParameters::default();
        let cfg = BaselineConfig { c_theta_gb: c_theta, c_m_gb: c_m, ..BaselineConfig::default() };
        prop_assert_eq!(raw_correction(&cfg, &p, p.pitch_bounds_deg.lower(), p.torque_rated_nm), 0.0);
    }

    #[test]
    fn torque_reference_delivers_demand(p_d in 0.0..3.35e6f64, omega in 1.0..140.0f64) {
        let p = TurbineParameters::default();
        let m = reference_torque(&p, p_d, omega).unwrap();
        prop_assert!((m * p.efficiency * omega - p_d).abs() <= 4.0 * f64::EPSILON * p_d);
    }

    #[test]
    fn switches_never_exceed_threshold_crossings(steps in prop::collection::vec(-0.8..0.8f64, 1..400), v0 in 6.0..16.0f64) {
        let s = scenario();
        let band = s.config.lq.switching_mps;
        let mut sched = GainSchedule::new(s.low.clone(), s.high.clone(), band, v0);
        let (mut v, mut prev_v, mut prev_active) = (v0, v0, sched.active());
        let (mut switches, mut crossings) = (0, 0);
        for dv in steps {
            v = (v + dv).max(0.1);
            let active = sched.select(v);
            prop_assert!(active <= 1);
            switches += usize::from(active != prev_active);
            for th in [band.lower(), band.upper()] {
                crossings += usize::from((prev_v - th).signum() != (v - th).signum());
            }
            (prev_v, prev_active) = (v, active);
        }
        prop_assert!(switches <= crossings, "{switches} switches, {crossings} crossings");
    }

    #[test]
    fn demand_stays_within_rating(levels in prop::collection::vec(0.0..3.35e6f64, 1..8), hold in 1.0..200.0f64, t in 0.0..600.0f64) {
        let staircase = DemandSpec::Staircase { levels_w: levels, hold_s: hold };
        staircase.validate(3.35e6).unwrap();
        let p = generate_demand(&staircase, t, 600.0).unwrap();
        prop_assert!((0.0..=3.35e6).contains(&p));
    }

    #[test]
    fn rainflow_cycles_are_well_formed(series in prop::collection::vec(-100.0..100.0f64, 0..300)) {
        let c = rainflow(&series);
        for cycle in c.iter() {
            prop_assert!(cycle.range >= 0.0);
            prop_assert!(cycle.count == 1.0 || cycle.count == 0.5);
        }
    }

    #[test]
    fn rainflow_ignores_repeated_end_samples(series in prop::collection::vec(-100.0..100.0f64, 1..300)) {
        let base = rainflow(&series);
        let mut padded = vec![series[0]];
        padded.extend(&series);
        padded.push(*series.last().unwrap());
        prop_assert_eq!(rainflow(&padded), base);
    }

    #[test]
    fn adding_a_cycle_never_lowers_del(
        series in prop::collection::vec(-100.0..100.0f64, 0..200), range in 0.0..50.0f64, m in 1.0..12.0f64
    ) {
        let cfg = DelConfig::new(m, 10.0).unwrap();
        let mut c = rainflow(&series);
        let before = del(&c, &cfg);
        c.full.push(Cycle { range, mean: 0.0, count: 1.0 });
        prop_assert!(del(&c, &cfg) >= before);
    }
}

#[test]
fn baseline_commands_respect_limits_under_fuzzed_inputs() {
    let p = TurbineParameters::default();
    let mut c = BaselineController::new(BaselineConfig::default(), p.clone(), 0.004, 5.0, 20_000.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let (mut pitch, mut torque) = (5.0, 20_000.0);
    let mut demand = 2e6;
    let step_deg = p.pitch_step_deg();
    for k in 0..100_000 {
        if k % 500 == 0 {
            demand = rng.random_range(0.0..=p.power_rated_w);
        }
        let omega = rng.random_range(5.0..140.0);
        let out = c.step(omega, demand).unwrap();
        assert!(p.pitch_bounds_deg.contains(out.pitch_deg) && p.torque_bounds_nm.contains(out.torque_nm), "step {k}");
        let (dp, dm) = (out.pitch_deg - pitch, out.torque_nm - torque);
        assert!(dp >= step_deg.lower() - slack(pitch) && dp <= step_deg.upper() + slack(pitch), "step {k}: dpitch {dp}");
        assert!(dm >= p.torque_step_nm.lower() - slack(torque) && dm <= p.torque_step_nm.upper() + slack(torque), "step {k}: dtorque {dm}");
        assert!(out.integral_bounds.contains(c.state().integral), "step {k}: anti-windup");
        (pitch, torque) = (out.pitch_deg, out.torque_nm);
    }
}

#[test]
fn traces_keep_power_bookkeeping_and_actuator_limits() {
    let s = scenario();
    let p = &s.config.turbine;
    let step_deg = p.pitch_step_deg();
    for kind in [ControllerKind::Baseline, ControllerKind::Lq] {
        let run = s.run(kind).unwrap();
        let rows = &run.trace.rows;
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.p_e_w, electrical_power(p, r.omega_radps, r.torque_nm), "{} row {i}", kind.name());
            assert!(p.pitch_bounds_deg.contains(r.pitch_deg) && p.torque_bounds_nm.contains(r.torque_nm));
            assert!(r.omega_radps > 0.0);
            if let Some(prev) = i.checked_sub(1).map(|j| rows[j]) {
                let (dp, dm) = (r.pitch_deg - prev.pitch_deg, r.torque_nm - prev.torque_nm);
                assert!(dp.abs() <= step_deg.upper() + slack(r.pitch_deg), "{} row {i}: dpitch {dp}", kind.name());
                assert!(dm.abs() <= p.torque_step_nm.upper() + slack(r.torque_nm), "{} row {i}: dtorque {dm}", kind.name());
            }
        }
        let file = tempfile::NamedTempFile::new().unwrap();
        run.trace.write_csv(file.path()).unwrap();
        let back = SimTrace::read_csv(file.path()).unwrap();
        assert_eq!(back, run.trace, "{} trace round trip", kind.name());
    }
}

#[test]
fn wind_records_are_stationary() {
    for seed in 1..=5 {
        let w = generate_wind(&WindSpec { mean: 15.0, turbulence_intensity: 0.09, duration: 600.0, ts: 0.004, seed, time_constant: 10.0 })
            .unwrap();
        let v = w.values();
        let half = v.len() / 2;
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        let gap = (mean(&v[..half]) - mean(&v[half..])).abs();
        assert!(gap < 0.05 * 15.0, "seed {seed}: halves differ by {gap} m/s");
    }
}
