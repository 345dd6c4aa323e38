//! Scenario configuration and the assembled scenario that runs it.
//!
//! Every field has a default, so an empty file describes the reference
//! 3.35 MW turbine at 15 m/s mean wind with a staircase power demand.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aero::{CpDomain, CpModel, IEA_3_35_COEFFICIENTS};
use crate::baseline::{BaselineConfig, BaselineController};
use crate::common::Interval;
use crate::dynamics::TurbineParameters;
use crate::error::{Error, Result};
use crate::loads::{del, rainflow, DelConfig};
use crate::lq::{DesignPoint, DesignUnits, GainSchedule, LqController, LqDesign};
use crate::refgen::{build_tables, steady_state, OperatingPoint, ReferenceConfig, ReferenceGenerator, SteadyStateTables, TableGrid};
use crate::sim::{run_closed_loop, Controller, Metrics, SimConfig, SimTrace, SwitchEvent};
use crate::wind::{generate_wind, DemandSpec, WindSeries, WindSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AeroConfig {
    /// Quartic Cp coefficients in graded lexicographic order.
    pub coefficients: Vec<f64>,
    pub lambda_range: Interval,
    pub pitch_range_deg: Interval,
}

impl Default for AeroConfig {
    fn default() -> Self {
        let d = CpDomain::default();
        Self { coefficients: IEA_3_35_COEFFICIENTS.to_vec(), lambda_range: d.lambda, pitch_range_deg: d.pitch_deg }
    }
}

impl AeroConfig {
    pub fn model(&self) -> Result<CpModel> {
        let coefficients: [f64; 15] = self.coefficients.as_slice().try_into().map_err(|_| Error::InvalidParameter {
            name: "aero.coefficients",
            reason: format!("expected 15 values, got {}", self.coefficients.len()),
        })?;
        CpModel::new(coefficients, CpDomain { lambda: self.lambda_range, pitch_deg: self.pitch_range_deg })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LqConfig {
    pub low: DesignPoint,
    pub high: DesignPoint,
    /// Hysteresis band: below the lower bound the low-wind design is
    /// selected, above the upper bound the high-wind design.
    pub switching_mps: Interval,
    pub units: DesignUnits,
    pub reference: ReferenceConfig,
}

impl Default for LqConfig {
    fn default() -> Self {
        Self {
            low: DesignPoint::low_wind(),
            high: DesignPoint::high_wind(),
            switching_mps: Interval::new(10.0, 12.0).expect("static interval"),
            units: DesignUnits::default(),
            reference: ReferenceConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindConfig {
    pub mean: f64,
    pub turbulence_intensity: f64,
    pub time_constant: f64,
    /// Replay a recorded series (columns `time_s`, `wind_mps`) instead.
    pub csv: Option<PathBuf>,
}

impl Default for WindConfig {
    fn default() -> Self {
        Self { mean: 15.0, turbulence_intensity: 0.09, time_constant: 10.0, csv: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub turbine: TurbineParameters,
    pub aero: AeroConfig,
    pub baseline: BaselineConfig,
    pub lq: LqConfig,
    pub tables: TableGrid,
    pub wind: WindConfig,
    pub demand: DemandSpec,
    pub sim: SimConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            output_dir: None,
            turbine: TurbineParameters::default(),
            aero: AeroConfig::default(),
            baseline: BaselineConfig::default(),
            lq: LqConfig::default(),
            tables: TableGrid::default(),
            wind: WindConfig::default(),
            demand: DemandSpec::default(),
            sim: SimConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; relative wind CSV paths resolve against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let (Some(csv), Some(dir)) = (cfg.wind.csv.as_mut(), path.parent()) {
            if csv.is_relative() {
                *csv = dir.join(&*csv);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn wind_spec(&self) -> WindSpec {
        WindSpec {
            mean: self.wind.mean,
            turbulence_intensity: self.wind.turbulence_intensity,
            duration: self.sim.duration,
            ts: self.sim.ts,
            seed: self.seed,
            time_constant: self.wind.time_constant,
        }
    }

    /// Checks every component before anything is run or written.
    pub fn validate(&self) -> Result<()> {
        self.turbine.validate()?;
        self.aero.model()?;
        self.sim.validate()?;
        self.baseline.validate(self.sim.ts)?;
        self.demand.validate(self.turbine.power_rated_w)?;
        match &self.wind.csv {
            Some(p) if !p.is_file() => {
                return Err(Error::Config(format!("wind csv {} does not exist", p.display())));
            }
            Some(_) => {}
            None => self.wind_spec().validate()?,
        }
        for (q_name, r_name, point) in [("Q1", "R1", &self.lq.low), ("Q2", "R2", &self.lq.high)] {
            if !point.q.iter().all(|&q| q >= 0.0 && q.is_finite()) {
                return Err(Error::InvalidWeight { name: q_name, requirement: "positive semidefinite" });
            }
            if !point.r.iter().all(|&r| r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidWeight { name: r_name, requirement: "positive definite" });
            }
        }
        crate::common::make_alpha(self.sim.ts, self.lq.reference.t_speed, crate::common::AlphaConvention::Plus)?;
        crate::common::make_alpha(self.sim.ts, self.lq.reference.t_pitch, crate::common::AlphaConvention::Plus)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Baseline,
    Lq,
}

impl ControllerKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Baseline => "baseline",
            Self::Lq => "lq",
        }
    }
}

/// Rainflow damage-equivalent amplitudes of the actuator channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DelProxies {
    pub torque_nm: f64,
    pub pitch_deg: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub kind: ControllerKind,
    pub trace: SimTrace,
    pub metrics: Metrics,
    pub del: DelProxies,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub baseline: RunResult,
    pub lq: RunResult,
    pub switch_events: Vec<SwitchEvent>,
}

/// A validated configuration with its tables, wind record and designs built.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub cp: CpModel,
    pub tables: SteadyStateTables,
    pub wind: WindSeries,
    pub low: LqDesign,
    pub high: LqDesign,
}

impl Scenario {
    pub fn build(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let cp = config.aero.model()?;
        let p = &config.turbine;
        let ts = config.sim.ts;
        let tables = build_tables(p, &cp, &config.tables)?;
        let wind = match &config.wind.csv {
            Some(path) => WindSeries::read_csv(path)?,
            None => generate_wind(&config.wind_spec())?,
        };
        let low = LqDesign::new(p, &cp, &config.lq.low, ts, config.lq.units)?;
        let high = LqDesign::new(p, &cp, &config.lq.high, ts, config.lq.units)?;
        log::debug!(
            "LQ designs: omega_s {:.3}/{:.3} rad/s, spectral radius {:.6}/{:.6}",
            low.equilibrium.omega,
            high.equilibrium.omega,
            low.spectral_radius,
            high.spectral_radius
        );
        Ok(Self { config, cp, tables, wind, low, high })
    }

    /// Same scenario with a different demand or wind record.
    pub fn with_demand(&self, demand: DemandSpec) -> Result<Self> {
        demand.validate(self.config.turbine.power_rated_w)?;
        let mut s = self.clone();
        s.config.demand = demand;
        Ok(s)
    }

    pub fn with_wind(&self, wind: WindSeries) -> Self {
        let mut s = self.clone();
        s.wind = wind;
        s
    }

    /// Steady state for the demand and wind at `t = 0`.
    pub fn initial_state(&self) -> Result<OperatingPoint> {
        let p0 = crate::wind::generate_demand(&self.config.demand, 0.0, self.config.sim.duration)?;
        let v0 = self.wind.at(0.0)?;
        if v0 <= 0.0 {
            let fine = self.config.turbine.pitch_bounds_deg.lower();
            return Ok(OperatingPoint { omega: 0.5 * self.config.turbine.omega_rated, pitch_deg: fine, torque_nm: 0.0, feasible: false });
        }
        steady_state(&self.config.turbine, &self.cp, p0, v0)
    }

    pub fn controller(&self, kind: ControllerKind, init: &OperatingPoint) -> Result<Controller> {
        let cfg = &self.config;
        let ts = cfg.sim.ts;
        Ok(match kind {
            ControllerKind::Baseline => Controller::Baseline(BaselineController::new(
                cfg.baseline.clone(),
                cfg.turbine.clone(),
                ts,
                init.pitch_deg,
                init.torque_nm,
            )?),
            ControllerKind::Lq => {
                let schedule = GainSchedule::new(self.low.clone(), self.high.clone(), cfg.lq.switching_mps, self.wind.at(0.0)?);
                Controller::Lq {
                    controller: LqController::new(schedule, cfg.turbine.clone(), ts, init.pitch_deg, init.torque_nm)?,
                    references: ReferenceGenerator::new(
                        self.tables.clone(),
                        cfg.turbine.clone(),
                        self.cp.clone(),
                        cfg.lq.reference.clone(),
                        ts,
                    )?,
                }
            }
        })
    }

    pub fn run(&self, kind: ControllerKind) -> Result<RunResult> {
        let init = self.initial_state()?;
        let mut controller = self.controller(kind, &init)?;
        let cfg = &self.config;
        let (trace, metrics) = run_closed_loop(
            &cfg.turbine,
            &self.cp,
            &mut controller,
            init.omega,
            init.pitch_deg,
            &self.wind,
            &cfg.demand,
            &cfg.sim,
            cfg.seed,
        )?;
        let del = del_proxies(&trace, cfg.sim.trim)?;
        Ok(RunResult { kind, trace, metrics, del })
    }

    /// Both controllers on the same wind and demand, run concurrently.
    pub fn compare(&self) -> Result<Comparison> {
        let (baseline, lq) = std::thread::scope(|s| {
            let b = s.spawn(|| self.run(ControllerKind::Baseline));
            let l = self.run(ControllerKind::Lq);
            (b.join().expect("baseline run panicked"), l)
        });
        let lq = lq?;
        let switch_events = lq.trace.switch_events();
        Ok(Comparison { baseline: baseline?, lq, switch_events })
    }
}

/// Damage-equivalent amplitudes of torque (exponent 4) and pitch (exponent
/// 10) over the post-trim window, one reference cycle per second.
pub fn del_proxies(trace: &SimTrace, trim: f64) -> Result<DelProxies> {
    let w = trace.window(trim);
    let seconds = match (w.first(), w.last()) {
        (Some(a), Some(b)) if b.t_s > a.t_s => b.t_s - a.t_s,
        _ => return Err(Error::EmptyWindow("too few samples for load analysis".into())),
    };
    let torque: Vec<f64> = w.iter().map(|r| r.torque_nm).collect();
    let pitch: Vec<f64> = w.iter().map(|r| r.pitch_deg).collect();
    Ok(DelProxies {
        torque_nm: del(&rainflow(&torque), &DelConfig::torque(seconds)?),
        pitch_deg: del(&rainflow(&pitch), &DelConfig::pitch(seconds)?),
    })
}
