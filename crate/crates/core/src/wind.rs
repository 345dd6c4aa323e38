//! Turbulent wind records and power demand schedules.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindSpec {
    pub mean: f64,
    /// Standard deviation over mean.
    pub turbulence_intensity: f64,
    pub duration: f64,
    pub ts: f64,
    pub seed: u64,
    /// Correlation time of the colored noise (s).
    pub time_constant: f64,
}

impl WindSpec {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("mean wind speed", self.mean)?;
        ensure_positive("duration", self.duration)?;
        ensure_positive("sampling time", self.ts)?;
        ensure_positive("turbulence time constant", self.time_constant)?;
        if !(0.0..=0.5).contains(&self.turbulence_intensity) {
            return Err(Error::InvalidParameter {
                name: "turbulence_intensity",
                reason: format!("{} outside [0, 0.5]", self.turbulence_intensity),
            });
        }
        Ok(())
    }

    pub fn samples(&self) -> usize {
        sample_count(self.duration, self.ts)
    }
}

/// Number of simulation steps covering `duration` at `ts`.
pub fn sample_count(duration: f64, ts: f64) -> usize {
    (duration / ts).round() as usize
}

/// Uniformly sampled wind speed record.
#[derive(Debug, Clone, PartialEq)]
pub struct WindSeries {
    times: Vec<f64>,
    values: Vec<f64>,
    /// Samples moved onto the guard band.
    pub clipped: usize,
}

impl WindSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::InvalidParameter { name: "wind series", reason: "empty or mismatched columns".into() });
        }
        if !times.windows(2).all(|w| w[0] < w[1]) || !values.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "wind series",
                reason: "times must be strictly increasing and values finite".into(),
            });
        }
        Ok(Self { times, values, clipped: 0 })
    }

    /// Constant series covering `[0, duration]`.
    pub fn constant(v: f64, duration: f64, ts: f64) -> Self {
        let n = sample_count(duration, ts).max(1);
        Self { times: (0..n).map(|k| k as f64 * ts).collect(), values: vec![v; n], clipped: 0 }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("non-empty series")
    }

    /// Sample-and-hold value at time `t`.
    pub fn at(&self, t: f64) -> Result<f64> {
        if t < self.times[0] {
            return Err(Error::TimeOutOfRange { t, duration: self.end_time() });
        }
        // tolerate round-off in t = k * ts
        let slack = 1e-9 * (1.0 + t.abs());
        let i = self.times.partition_point(|&x| x <= t + slack);
        Ok(self.values[i - 1])
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            time_s: f64,
            wind_mps: f64,
        }
        let mut r = csv::Reader::from_path(path)?;
        let (mut times, mut values) = (Vec::new(), Vec::new());
        for row in r.deserialize::<Row>() {
            let row = row?;
            times.push(row.time_s);
            values.push(row.wind_mps);
        }
        Self::new(times, values)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["time_s", "wind_mps"])?;
        for (t, v) in self.times.iter().zip(&self.values) {
            w.write_record([t.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Seeded Ornstein-Uhlenbeck wind record.
///
/// The process is sampled exactly at `ts` from its stationary distribution,
/// then the realized record is shifted and scaled to the requested mean and
/// standard deviation, so a short record still carries the requested
/// statistics. Samples outside `[0.5, 1.5] * mean` are clipped and counted.
pub fn generate_wind(spec: &WindSpec) -> Result<WindSeries> {
    spec.validate()?;
    let n = spec.samples().max(1);
    let times: Vec<f64> = (0..n).map(|k| k as f64 * spec.ts).collect();
    let sigma = spec.turbulence_intensity * spec.mean;
    if sigma == 0.0 || n < 2 {
        return Ok(WindSeries { times, values: vec![spec.mean; n], clipped: 0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let a = (-spec.ts / spec.time_constant).exp();
    let b = (1.0 - a * a).sqrt();
    let mut x: f64 = StandardNormal.sample(&mut rng);
    let mut raw = Vec::with_capacity(n);
    for _ in 0..n {
        raw.push(x);
        let e: f64 = StandardNormal.sample(&mut rng);
        x = a * x + b * e;
    }
    let m = raw.iter().sum::<f64>() / n as f64;
    let sd = (raw.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt();
    let (lo, hi) = (0.5 * spec.mean, 1.5 * spec.mean);
    let mut clipped = 0;
    let values = raw
        .iter()
        .map(|r| {
            let v = spec.mean + sigma * (r - m) / sd;
            if v < lo || v > hi {
                clipped += 1;
            }
            v.clamp(lo, hi)
        })
        .collect();
    Ok(WindSeries { times, values, clipped })
}

/// Electrical power demand over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DemandSpec {
    Constant {
        power_w: f64,
    },
    /// Level `i` holds on `[i * hold_s, (i + 1) * hold_s)`; the last level
    /// holds to the end.
    Staircase {
        levels_w: Vec<f64>,
        hold_s: f64,
    },
    /// Linear between `(start_s, from_w)` and `(end_s, to_w)`, constant outside.
    Ramp {
        from_w: f64,
        to_w: f64,
        start_s: f64,
        end_s: f64,
    },
}

impl Default for DemandSpec {
    fn default() -> Self {
        Self::Staircase { levels_w: vec![2.2e6, 2.5e6, 2.0e6, 2.6e6, 2.3e6, 2.8e6], hold_s: 100.0 }
    }
}

impl DemandSpec {
    /// Demand fixed at rated power.
    pub fn rated(power_rated: f64) -> Self {
        Self::Constant { power_w: power_rated }
    }

    fn levels(&self) -> Vec<f64> {
        match self {
            Self::Constant { power_w } => vec![*power_w],
            Self::Staircase { levels_w, .. } => levels_w.clone(),
            Self::Ramp { from_w, to_w, .. } => vec![*from_w, *to_w],
        }
    }

    pub fn validate(&self, power_rated: f64) -> Result<()> {
        let levels = self.levels();
        if levels.is_empty() {
            return Err(Error::InvalidParameter { name: "demand", reason: "no levels".into() });
        }
        for p in levels {
            if !(0.0..=power_rated).contains(&p) {
                return Err(Error::InvalidParameter { name: "demand", reason: format!("{p} W outside [0, {power_rated}] W") });
            }
        }
        match self {
            Self::Staircase { hold_s, .. } => ensure_positive("staircase hold time", *hold_s),
            Self::Ramp { start_s, end_s, .. } if !(end_s > start_s) => {
                Err(Error::InvalidParameter { name: "demand", reason: "ramp must end after it starts".into() })
            }
            _ => Ok(()),
        }
    }

    pub fn max_power(&self) -> f64 {
        self.levels().into_iter().fold(0.0, f64::max)
    }
}

/// Demand at `t` within `[0, duration]`.
pub fn generate_demand(spec: &DemandSpec, t: f64, duration: f64) -> Result<f64> {
    if !(t >= 0.0 && t <= duration * (1.0 + 1e-12)) {
        return Err(Error::TimeOutOfRange { t, duration });
    }
    Ok(match spec {
        DemandSpec::Constant { power_w } => *power_w,
        DemandSpec::Staircase { levels_w, hold_s } => {
            // slack so that k * ts landing a hair below a breakpoint still switches
            let i = ((t + 1e-9 * hold_s) / hold_s).floor() as usize;
            levels_w[i.min(levels_w.len() - 1)]
        }
        DemandSpec::Ramp { from_w, to_w, start_s, end_s } => {
            let s = ((t - start_s) / (end_s - start_s)).clamp(0.0, 1.0);
            from_w + s * (to_w - from_w)
        }
    })
}
