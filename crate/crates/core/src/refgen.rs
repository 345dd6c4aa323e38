//! Steady-state setpoint tables and the filtered references tracked by the
//! LQ controller.

use std::path::Path;

use nalgebra::Vector4;
use serde::{Deserialize, Serialize};

use crate::aero::{cp_argmax_speed, CpModel};
use crate::common::{lut1, lut2, AlphaConvention, LowpassState, Table1D, Table2D};
use crate::dynamics::{electrical_power, TurbineParameters};
use crate::error::{ensure_positive, Error, Result};
use crate::lq::{LqDesign, LqReference};

/// Grid over which the steady-state tables are solved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TableGrid {
    /// Power demand nodes as fractions of rated power.
    pub power_fractions: Vec<f64>,
    pub wind_mps: Vec<f64>,
}

impl Default for TableGrid {
    fn default() -> Self {
        Self { power_fractions: (1..=10).map(|i| i as f64 / 10.0).collect(), wind_mps: (3..=25).map(f64::from).collect() }
    }
}

/// Relative power tolerance of the steady-state pitch search.
pub const POWER_TOLERANCE: f64 = 1e-6;
const PITCH_SCAN: usize = 400;

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateTables {
    /// Power demand (W) to generator speed setpoint (rad/s).
    pub speed: Table1D,
    /// (power demand, wind speed) to pitch (deg).
    pub pitch: Table2D,
    /// Steady generator torque per cell, same layout as `pitch`.
    pub torque: Table2D,
    /// Cells where the demand cannot be met and the maximum-power state is stored.
    pub infeasible: Vec<bool>,
}

/// Wind speed at which the rotor at its best tip-speed ratio and fine pitch
/// delivers electrical power `p`.
fn wind_for_power(params: &TurbineParameters, cp_max: f64, p: f64) -> f64 {
    let k = params.efficiency * 0.5 * params.rotor.air_density * params.rotor.swept_area() * cp_max;
    (p / k).cbrt()
}

/// Speed setpoint for a power demand: optimal tip-speed ratio at the wind
/// that just supplies the demand, capped at rated speed.
pub fn speed_setpoint(params: &TurbineParameters, cp: &CpModel, p: f64) -> Result<f64> {
    let fine = params.pitch_bounds_deg.lower();
    let lambda = cp.optimal_lambda(fine)?;
    let v = wind_for_power(params, cp.eval(lambda, fine), p.max(0.0));
    Ok((lambda * params.gearbox_ratio * v / params.rotor.radius).min(params.omega_rated))
}

/// Smallest pitch at which the rotor at speed `omega` extracts exactly the
/// power needed for demand `p`, on a branch where more pitch sheds power.
/// Saturates at full pitch when even that extracts too much; `None` if no
/// pitch supplies the demand.
fn steady_pitch(params: &TurbineParameters, cp: &CpModel, omega: f64, p: f64, v: f64) -> Option<f64> {
    let lambda = params.rotor.radius * omega / (params.gearbox_ratio * v);
    let available = 0.5 * params.rotor.air_density * params.rotor.swept_area() * v.powi(3);
    let target = p / (params.efficiency * available);
    let excess = |t: f64| cp.eval(lambda, t) - target;
    let bounds = params.pitch_bounds_deg;
    if excess(bounds.lower()).abs() <= POWER_TOLERANCE * target {
        return Some(bounds.lower());
    }
    // at low tip-speed ratios Cp can rise with pitch first, so look for the
    // first crossing from surplus to deficit rather than assume monotonicity
    let h = (bounds.upper() - bounds.lower()) / PITCH_SCAN as f64;
    let (mut a, mut b) = (bounds.lower(), bounds.upper());
    let mut surplus = excess(bounds.lower()) > 0.0;
    let mut found = false;
    for i in 1..=PITCH_SCAN {
        let t = bounds.lower() + h * i as f64;
        if excess(t) > 0.0 {
            surplus = true;
        } else if surplus {
            (a, b) = (t - h, t);
            found = true;
            break;
        }
    }
    if !found {
        return surplus.then_some(bounds.upper());
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if excess(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
        if (excess(b)).abs() <= POWER_TOLERANCE * target * 1e-3 || b - a < 1e-13 {
            break;
        }
    }
    Some(b)
}

/// Steady operating point for a demand and wind speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub omega: f64,
    pub pitch_deg: f64,
    pub torque_nm: f64,
    /// False when the wind cannot supply the demand; the point is then the
    /// maximum-power state at fine pitch.
    pub feasible: bool,
}

/// Speed from [`speed_setpoint`], with the smallest pitch that balances the
/// demanded power; falls back to the maximum-power state when the wind is
/// too weak.
pub fn steady_state(params: &TurbineParameters, cp: &CpModel, p: f64, v: f64) -> Result<OperatingPoint> {
    ensure_positive("wind speed", v)?;
    let w = speed_setpoint(params, cp, p)?;
    if w > 0.0 {
        if let Some(t) = steady_pitch(params, cp, w, p, v) {
            return Ok(OperatingPoint { omega: w, pitch_deg: t, torque_nm: p / (params.efficiency * w), feasible: true });
        }
    }
    max_power_state(params, cp, v)
}

/// Highest-power steady state at `v`: fine pitch, Cp-optimal speed capped at rated.
pub fn max_power_state(params: &TurbineParameters, cp: &CpModel, v: f64) -> Result<OperatingPoint> {
    ensure_positive("wind speed", v)?;
    let fine = params.pitch_bounds_deg.lower();
    let lambda_opt = cp.optimal_lambda(fine)?;
    let w_max = (lambda_opt * params.gearbox_ratio * v / params.rotor.radius).min(params.omega_rated);
    let lambda = params.rotor.radius * w_max / (params.gearbox_ratio * v);
    let p_aero = 0.5 * params.rotor.air_density * params.rotor.swept_area() * v.powi(3) * cp.eval(lambda, fine);
    let torque_nm = (p_aero / w_max).min(params.torque_bounds_nm.upper());
    Ok(OperatingPoint { omega: w_max, pitch_deg: fine, torque_nm, feasible: false })
}

/// Electrical power the rotor can deliver in steady state at `v`.
pub fn available_power(params: &TurbineParameters, cp: &CpModel, v: f64) -> Result<f64> {
    let op = max_power_state(params, cp, v)?;
    Ok(electrical_power(params, op.omega, op.torque_nm))
}

/// Solves the steady-state operating points over `grid`.
pub fn build_tables(params: &TurbineParameters, cp: &CpModel, grid: &TableGrid) -> Result<SteadyStateTables> {
    if grid.power_fractions.is_empty() || grid.wind_mps.is_empty() {
        return Err(Error::InvalidTable("empty steady-state grid".into()));
    }
    for &v in &grid.wind_mps {
        ensure_positive("table wind speed", v)?;
    }
    let powers: Vec<f64> = grid.power_fractions.iter().map(|f| f * params.power_rated_w).collect();
    let speeds = powers.iter().map(|&p| speed_setpoint(params, cp, p)).collect::<Result<Vec<_>>>()?;
    let n = powers.len() * grid.wind_mps.len();
    let (mut pitch, mut torque, mut infeasible) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for &p in &powers {
        for &v in &grid.wind_mps {
            let op = steady_state(params, cp, p, v)?;
            pitch.push(op.pitch_deg);
            torque.push(op.torque_nm);
            infeasible.push(!op.feasible);
        }
    }
    Ok(SteadyStateTables {
        speed: Table1D::new(powers.clone(), speeds)?,
        pitch: Table2D::new(powers.clone(), grid.wind_mps.clone(), pitch)?,
        torque: Table2D::new(powers, grid.wind_mps.clone(), torque)?,
        infeasible,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct TableRow {
    power_w: f64,
    wind_mps: f64,
    omega_sp: f64,
    pitch_deg: f64,
    torque_nm: f64,
}

impl SteadyStateTables {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        self.write_rows(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        self.write_rows(&mut w)?;
        let bytes = w.into_inner().map_err(|e| Error::Csv(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Csv(e.to_string()))
    }

    fn write_rows<W: std::io::Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        for (ix, (&p, &omega)) in self.speed.nodes().iter().zip(self.speed.values()).enumerate() {
            for (iy, &v) in self.pitch.y_nodes().iter().enumerate() {
                w.serialize(TableRow {
                    power_w: p,
                    wind_mps: v,
                    omega_sp: omega,
                    pitch_deg: self.pitch.at(ix, iy),
                    torque_nm: self.torque.at(ix, iy),
                })?;
            }
        }
        Ok(())
    }

    /// Reads tables written by [`SteadyStateTables::write_csv`]. Rows must
    /// form a full grid, power-major.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let rows = r.deserialize::<TableRow>().collect::<std::result::Result<Vec<_>, _>>()?;
        let mut powers: Vec<f64> = Vec::new();
        let mut winds: Vec<f64> = Vec::new();
        for row in &rows {
            if powers.last() != Some(&row.power_w) {
                powers.push(row.power_w);
            }
            if powers.len() == 1 {
                winds.push(row.wind_mps);
            }
        }
        let (nx, ny) = (powers.len(), winds.len());
        if nx * ny != rows.len() || nx == 0 {
            return Err(Error::InvalidTable(format!("{} rows do not form a {nx} x {ny} grid", rows.len())));
        }
        let mut speeds = Vec::with_capacity(nx);
        for (ix, chunk) in rows.chunks(ny).enumerate() {
            for (iy, row) in chunk.iter().enumerate() {
                if row.power_w != powers[ix] || row.wind_mps != winds[iy] || row.omega_sp != chunk[0].omega_sp {
                    return Err(Error::InvalidTable(format!("inconsistent row for power {} W", row.power_w)));
                }
            }
            speeds.push(chunk[0].omega_sp);
        }
        let pitch = rows.iter().map(|r| r.pitch_deg).collect();
        let torque = rows.iter().map(|r| r.torque_nm).collect();
        Ok(Self {
            speed: Table1D::new(powers.clone(), speeds)?,
            pitch: Table2D::new(powers.clone(), winds.clone(), pitch)?,
            torque: Table2D::new(powers, winds, torque)?,
            infeasible: vec![false; nx * ny],
        })
    }
}

/// Pitch at which the Cp-optimal speed is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OptimalSpeedPitch {
    /// Fine pitch bound; the reference stays on the optimal-power curve.
    #[default]
    Fine,
    /// Currently applied pitch.
    Measured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReferenceConfig {
    /// Speed reference filter time constant (s).
    pub t_speed: f64,
    /// Pitch reference filter time constant (s).
    pub t_pitch: f64,
    pub optimal_speed_pitch: OptimalSpeedPitch,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self { t_speed: 20.0, t_pitch: 40.0, optimal_speed_pitch: OptimalSpeedPitch::Fine }
    }
}

/// `P / (eta omega)`.
pub fn reference_torque(params: &TurbineParameters, p_demand: f64, omega_d: f64) -> Result<f64> {
    ensure_positive("reference speed", omega_d)?;
    Ok(p_demand / (params.efficiency * omega_d))
}

/// Reference deviation from the design's equilibrium; no integral error is wanted.
pub fn desired_augmented_state(omega_d: f64, pitch_d: f64, torque_d: f64, design: &LqDesign) -> Vector4<f64> {
    let eq = &design.equilibrium;
    Vector4::new(omega_d - eq.omega, 0.0, pitch_d - eq.pitch_deg, torque_d - eq.torque_nm)
}

#[derive(Debug, Clone)]
pub struct ReferenceGenerator {
    tables: SteadyStateTables,
    params: TurbineParameters,
    cp: CpModel,
    config: ReferenceConfig,
    fine_lambda: f64,
    speed_filter: LowpassState,
    pitch_filter: LowpassState,
}

impl ReferenceGenerator {
    pub fn new(tables: SteadyStateTables, params: TurbineParameters, cp: CpModel, config: ReferenceConfig, ts: f64) -> Result<Self> {
        let speed_filter = LowpassState::from_time_constant(ts, config.t_speed, AlphaConvention::Plus)?;
        let pitch_filter = LowpassState::from_time_constant(ts, config.t_pitch, AlphaConvention::Plus)?;
        let fine_lambda = cp.optimal_lambda(params.pitch_bounds_deg.lower())?;
        Ok(Self { tables, params, cp, config, fine_lambda, speed_filter, pitch_filter })
    }

    pub fn tables(&self) -> &SteadyStateTables {
        &self.tables
    }

    /// Unfiltered speed reference `min(omega*, omega_sp(P))`.
    ///
    /// In still air there is no optimal speed and the reference is zero.
    pub fn raw_speed(&self, p_demand: f64, v: f64, pitch_now: f64) -> Result<f64> {
        if v <= 0.0 {
            return Ok(0.0);
        }
        let p = &self.params;
        let optimal = match self.config.optimal_speed_pitch {
            OptimalSpeedPitch::Fine => self.fine_lambda * p.gearbox_ratio * v / p.rotor.radius,
            OptimalSpeedPitch::Measured => {
                let pitch = crate::common::sat(pitch_now, self.cp.domain().pitch_deg);
                cp_argmax_speed(&self.cp, &p.rotor, p.gearbox_ratio, v, pitch)?
            }
        };
        Ok(optimal.min(lut1(&self.tables.speed, p_demand)))
    }

    pub fn reference_speed(&mut self, p_demand: f64, v: f64, pitch_now: f64) -> Result<f64> {
        let raw = self.raw_speed(p_demand, v, pitch_now)?;
        Ok(self.speed_filter.step(raw))
    }

    pub fn reference_pitch(&mut self, p_demand: f64, v: f64) -> f64 {
        self.pitch_filter.step(lut2(&self.tables.pitch, p_demand, v))
    }

    /// All three references for one step.
    pub fn step(&mut self, p_demand: f64, v: f64, pitch_now: f64) -> Result<LqReference> {
        let omega = self.reference_speed(p_demand, v, pitch_now)?;
        let pitch_deg = self.reference_pitch(p_demand, v);
        let torque_nm = if omega > 0.0 && v > 0.0 {
            // demand beyond what the wind supplies has no equilibrium; track the attainable share
            let p = p_demand.min(available_power(&self.params, &self.cp, v)?);
            reference_torque(&self.params, p, omega)?.min(self.params.torque_bounds_nm.upper())
        } else {
            0.0
        };
        Ok(LqReference { omega, pitch_deg, torque_nm })
    }
}

/// Electrical power of a stored steady-state cell, for consistency checks.
pub fn cell_power(params: &TurbineParameters, tables: &SteadyStateTables, ix: usize, iy: usize) -> f64 {
    electrical_power(params, tables.speed.values()[ix], tables.torque.at(ix, iy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::plant_rhs;
    use approx::assert_relative_eq;

    fn setup() -> (TurbineParameters, CpModel, SteadyStateTables) {
        let p = TurbineParameters::default();
        let cp = CpModel::default();
        let t = build_tables(&p, &cp, &TableGrid::default()).unwrap();
        (p, cp, t)
    }

    #[test]
    fn rated_cells_above_rated_wind() {
        let (p, cp, t) = setup();
        let ix = t.speed.nodes().len() - 1;
        assert_eq!(t.speed.values()[ix], p.omega_rated);
        let iy = t.pitch.y_nodes().iter().position(|&v| v == 15.0).unwrap();
        let m = t.torque.at(ix, iy);
        assert_relative_eq!(m, 3.35e6 / (0.936 * 119.31), max_relative = 1e-12);
        assert!((m - 30_150.0).abs() < 0.01 * 30_150.0);
        assert!(t.pitch.at(ix, iy) > p.pitch_bounds_deg.lower());
        // torque balance at the solved pitch
        let rhs = plant_rhs(&p, &cp, p.omega_rated, t.pitch.at(ix, iy), m, 15.0).unwrap();
        assert!(rhs.abs() <= 1e-6 * p.torque_rated_nm * 97.0 * 97.0 / p.inertia, "{rhs}");
    }

    #[test]
    fn low_power_on_optimal_branch() {
        let (p, cp, t) = setup();
        let w = t.speed.values()[0];
        assert!(w < p.omega_rated);
        let lambda = cp.optimal_lambda(1.09).unwrap();
        let v = wind_for_power(&p, cp.eval(lambda, 1.09), 0.335e6);
        assert_relative_eq!(w, lambda * 97.0 * v / 65.0, max_relative = 1e-12);
        // below the wind that just supplies the demand: fine pitch
        assert!(v > 4.0);
        let iy = t.pitch.y_nodes().iter().position(|&v| v == 4.0).unwrap();
        assert_eq!(t.pitch.at(0, iy), 1.09);
        let iy = t.pitch.y_nodes().iter().position(|&v| v == 6.0).unwrap();
        assert!(t.pitch.at(0, iy) > 1.09);
        assert!(t.speed.values().windows(2).all(|s| s[0] <= s[1]));
        assert!(t.pitch.values().iter().all(|&x| (1.09..=22.0).contains(&x)));
    }

    #[test]
    fn region_two_cell_is_fine_pitch() {
        let (_, _, t) = setup();
        let ix = t.speed.nodes().len() - 1;
        let iy = t.pitch.y_nodes().iter().position(|&v| v == 8.0).unwrap();
        assert!(t.infeasible[ix * t.pitch.y_nodes().len() + iy]);
        assert_eq!(lut2(&t.pitch, 3.35e6, 8.0), 1.09);
    }

    #[test]
    fn feasible_cells_meet_the_demand() {
        let (p, _, t) = setup();
        let ny = t.pitch.y_nodes().len();
        for ix in 0..t.speed.nodes().len() {
            for iy in 0..ny {
                if !t.infeasible[ix * ny + iy] {
                    assert_relative_eq!(cell_power(&p, &t, ix, iy), t.speed.nodes()[ix], max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn csv_round_trip_reproduces_nodes() {
        let (_, _, t) = setup();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tables.csv");
        t.write_csv(&path).unwrap();
        let back = SteadyStateTables::read_csv(&path).unwrap();
        assert_eq!(back.speed, t.speed);
        assert_eq!(back.pitch, t.pitch);
        assert_eq!(back.torque, t.torque);
        let header = std::fs::read_to_string(&path).unwrap();
        assert!(header.starts_with("power_w,wind_mps,omega_sp,pitch_deg,torque_nm\n"));
    }

    #[test]
    fn reference_torque_identity() {
        let p = TurbineParameters::default();
        let m = reference_torque(&p, 3.35e6, 119.31).unwrap();
        assert_relative_eq!(m, 29_997.987, max_relative = 1e-7);
        assert_eq!(reference_torque(&p, 0.0, 100.0).unwrap(), 0.0);
        assert_eq!(reference_torque(&p, 1e6, 50.0).unwrap(), 2.0 * reference_torque(&p, 1e6, 100.0).unwrap());
        assert!(reference_torque(&p, 1e6, 0.0).is_err());
    }

    #[test]
    fn speed_reference_min_selection_and_filter() {
        let (p, cp, t) = setup();
        let mut g = ReferenceGenerator::new(t, p.clone(), cp.clone(), ReferenceConfig::default(), 0.004).unwrap();
        let optimal = g.raw_speed(3.35e6, 6.0, 1.09).unwrap();
        assert_relative_eq!(optimal, cp.optimal_lambda(1.09).unwrap() * 97.0 * 6.0 / 65.0, max_relative = 1e-12);
        let limited = g.raw_speed(0.5e6, 20.0, 1.09).unwrap();
        assert_eq!(limited, lut1(&g.tables().speed, 0.5e6));
        let alpha = 0.004 / 20.004;
        let first = g.reference_speed(0.5e6, 20.0, 1.09).unwrap();
        assert_eq!(first, limited);
        let target = g.raw_speed(1.0e6, 20.0, 1.09).unwrap();
        let mut prev_err = (first - target).abs();
        for _ in 0..100 {
            let y = g.reference_speed(1.0e6, 20.0, 1.09).unwrap();
            let err = (y - target).abs();
            assert_relative_eq!(err, (1.0 - alpha) * prev_err, max_relative = 1e-9);
            prev_err = err;
        }
    }

    #[test]
    fn measured_pitch_option() {
        let (p, cp, t) = setup();
        let cfg = ReferenceConfig { optimal_speed_pitch: OptimalSpeedPitch::Measured, ..Default::default() };
        let g = ReferenceGenerator::new(t, p, cp.clone(), cfg, 0.004).unwrap();
        let w = g.raw_speed(3.35e6, 4.0, 5.0).unwrap();
        assert_relative_eq!(w, cp.optimal_lambda(5.0).unwrap() * 97.0 * 4.0 / 65.0, max_relative = 1e-12);
    }

    #[test]
    fn torque_reference_tracks_attainable_power() {
        let (p, cp, t) = setup();
        let weak = available_power(&p, &cp, 6.3).unwrap();
        assert!(weak > 0.0 && weak < 3.35e6);
        assert!(available_power(&p, &cp, 15.0).unwrap() > 3.35e6);

        let mut g = ReferenceGenerator::new(t.clone(), p.clone(), cp.clone(), ReferenceConfig::default(), 0.004).unwrap();
        let r = g.step(3.35e6, 6.3, 1.09).unwrap();
        assert_relative_eq!(electrical_power(&p, r.omega, r.torque_nm), weak, max_relative = 1e-12);

        let mut g = ReferenceGenerator::new(t, p.clone(), cp, ReferenceConfig::default(), 0.004).unwrap();
        let r = g.step(2.0e6, 15.0, 1.09).unwrap();
        assert_relative_eq!(electrical_power(&p, r.omega, r.torque_nm), 2.0e6, max_relative = 1e-12);
    }

    #[test]
    fn pitch_reference_converges_to_table() {
        let (p, cp, t) = setup();
        let target = lut2(&t.pitch, 3.35e6, 15.0);
        let mut g = ReferenceGenerator::new(t, p, cp, ReferenceConfig::default(), 0.004).unwrap();
        g.reference_pitch(1.0e6, 15.0);
        let mut y = 0.0;
        for _ in 0..200_000 {
            y = g.reference_pitch(3.35e6, 15.0);
        }
        assert!((y - target).abs() < 1e-6 * target);
    }

    #[test]
    fn augmented_reference_at_anchor_is_zero() {
        use crate::lq::{DesignPoint, DesignUnits};
        let p = TurbineParameters::default();
        let cp = CpModel::default();
        let d = LqDesign::new(&p, &cp, &DesignPoint::low_wind(), 0.004, DesignUnits::default()).unwrap();
        let eq = d.equilibrium;
        assert_eq!(desired_augmented_state(eq.omega, eq.pitch_deg, eq.torque_nm, &d), Vector4::zeros());
        assert_eq!(desired_augmented_state(120.0, 5.0, 1e4, &d)[1], 0.0);
    }
}
