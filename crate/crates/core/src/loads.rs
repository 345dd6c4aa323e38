//! Rainflow cycle counting and damage-equivalent amplitudes, used as
//! actuator wear proxies.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cycle {
    pub range: f64,
    pub mean: f64,
    /// 1 for a closed cycle, 0.5 for a residual half cycle.
    pub count: f64,
}

impl Cycle {
    fn between(a: f64, b: f64, count: f64) -> Self {
        Self { range: (a - b).abs(), mean: 0.5 * (a + b), count }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CycleSet {
    pub full: Vec<Cycle>,
    pub residual: Vec<Cycle>,
}

impl CycleSet {
    pub fn iter(&self) -> impl Iterator<Item = &Cycle> {
        self.full.iter().chain(&self.residual)
    }

    pub fn is_empty(&self) -> bool {
        self.full.is_empty() && self.residual.is_empty()
    }

    pub fn total_count(&self) -> f64 {
        self.iter().map(|c| c.count).sum()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for c in self.iter() {
            w.serialize(c)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads cycles back; counts of 0.5 become residual half cycles.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut set = Self::default();
        for c in r.deserialize::<Cycle>() {
            let c = c?;
            match c.count {
                1.0 => set.full.push(c),
                0.5 => set.residual.push(c),
                x => return Err(Error::Csv(format!("cycle count {x} is neither 1 nor 0.5"))),
            }
        }
        Ok(set)
    }
}

/// Local extrema of `series`, endpoints included, plateaus collapsed.
pub fn turning_points(series: &[f64]) -> Vec<f64> {
    let mut dedup: Vec<f64> = Vec::with_capacity(series.len());
    for &x in series {
        if dedup.last() != Some(&x) {
            dedup.push(x);
        }
    }
    if dedup.len() <= 2 {
        return dedup;
    }
    let mut out = vec![dedup[0]];
    for w in dedup.windows(3) {
        if (w[1] - w[0]) * (w[2] - w[1]) < 0.0 {
            out.push(w[1]);
        }
    }
    out.push(*dedup.last().expect("non-empty"));
    out
}

/// Four-point rainflow count. Points left on the stack at the end are
/// reported as residual half cycles.
pub fn rainflow(series: &[f64]) -> CycleSet {
    let mut set = CycleSet::default();
    let mut stack: Vec<f64> = Vec::new();
    for p in turning_points(series) {
        stack.push(p);
        while stack.len() >= 4 {
            let n = stack.len();
            let (a, b, c, d) = (stack[n - 4], stack[n - 3], stack[n - 2], stack[n - 1]);
            let inner = (b - c).abs();
            if inner <= (a - b).abs() && inner <= (c - d).abs() {
                set.full.push(Cycle::between(b, c, 1.0));
                stack.truncate(n - 3);
                stack.push(d);
            } else {
                break;
            }
        }
    }
    set.residual = stack.windows(2).map(|w| Cycle::between(w[0], w[1], 0.5)).collect();
    set
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelConfig {
    pub woehler_exponent: f64,
    pub reference_cycles: f64,
}

impl DelConfig {
    pub fn new(woehler_exponent: f64, reference_cycles: f64) -> Result<Self> {
        if !(woehler_exponent >= 1.0 && woehler_exponent.is_finite()) {
            return Err(Error::InvalidParameter { name: "woehler_exponent", reason: format!("{woehler_exponent} < 1") });
        }
        ensure_positive("reference cycle count", reference_cycles)?;
        Ok(Self { woehler_exponent, reference_cycles })
    }

    /// Torque-path default: exponent 4, one reference cycle per second of record.
    pub fn torque(record_seconds: f64) -> Result<Self> {
        Self::new(4.0, record_seconds)
    }

    /// Pitch-path default: exponent 10, one reference cycle per second of record.
    pub fn pitch(record_seconds: f64) -> Result<Self> {
        Self::new(10.0, record_seconds)
    }
}

/// `(sum count * range^m / N_ref)^(1/m)`; zero for an empty set.
pub fn del(cycles: &CycleSet, cfg: &DelConfig) -> f64 {
    let m = cfg.woehler_exponent;
    let damage: f64 = cycles.iter().map(|c| c.count * c.range.powf(m)).sum();
    (damage / cfg.reference_cycles).powf(1.0 / m)
}
