//! Rotor aerodynamics: available wind power, tip-speed ratio, the fitted
//! power-coefficient surface and its maximization.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::common::Interval;
use crate::error::{ensure_positive, Error, Result};

/// Betz limit, the theoretical maximum power coefficient.
pub const BETZ_LIMIT: f64 = 16.0 / 27.0;

/// `(lambda exponent, pitch exponent)` of each quartic basis term, in
/// coefficient order `c1..c15`.
pub const QUARTIC_EXPONENTS: [(i32, i32); 15] =
    [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3), (4, 0), (3, 1), (2, 2), (1, 3), (0, 4)];

/// Coefficients fitted for the IEA 3.35 MW reference turbine (pitch in degrees).
pub const IEA_3_35_COEFFICIENTS: [f64; 15] = [
    0.098,
    -0.150,
    -0.011,
    0.061,
    0.0125,
    0.000053,
    -0.00615,
    -0.00184,
    -0.000338,
    0.0000407,
    0.000184,
    0.000106,
    -0.0000515,
    0.0000143,
    -0.00000197,
];

const BETZ_GRID: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotorGeometry {
    /// Rotor radius (m).
    pub radius: f64,
    /// Air density (kg/m^3).
    pub air_density: f64,
}

impl RotorGeometry {
    pub fn new(radius: f64, air_density: f64) -> Result<Self> {
        ensure_positive("rotor radius", radius)?;
        ensure_positive("air density", air_density)?;
        Ok(Self { radius, air_density })
    }

    pub fn swept_area(&self) -> f64 {
        PI * self.radius * self.radius
    }
}

impl Default for RotorGeometry {
    fn default() -> Self {
        Self { radius: 65.0, air_density: 1.225 }
    }
}

/// Power carried by wind of speed `v` through the rotor disc (W).
pub fn wind_power(geom: &RotorGeometry, v: f64) -> Result<f64> {
    ensure_positive("wind speed", v)?;
    Ok(0.5 * geom.air_density * geom.swept_area() * v * v * v)
}

/// Tip-speed ratio from the generator-side speed `omega` and gearbox ratio.
pub fn tip_speed_ratio(geom: &RotorGeometry, omega: f64, gearbox_ratio: f64, v: f64) -> Result<f64> {
    ensure_positive("wind speed", v)?;
    Ok(geom.radius * omega / (gearbox_ratio * v))
}

/// Rectangle `lambda x pitch` on which the surface was fitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpDomain {
    pub lambda: Interval,
    pub pitch_deg: Interval,
}

impl Default for CpDomain {
    fn default() -> Self {
        Self { lambda: Interval::new(1.0, 16.0).expect("static interval"), pitch_deg: Interval::new(1.09, 22.0).expect("static interval") }
    }
}

impl CpDomain {
    pub fn contains(&self, lambda: f64, pitch_deg: f64) -> bool {
        self.lambda.contains(lambda) && self.pitch_deg.contains(pitch_deg)
    }
}

/// Quartic bivariate power-coefficient surface clipped below at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpModel {
    coefficients: [f64; 15],
    domain: CpDomain,
}

impl Default for CpModel {
    fn default() -> Self {
        Self::new(IEA_3_35_COEFFICIENTS, CpDomain::default()).expect("reference coefficients respect the Betz limit")
    }
}

impl CpModel {
    /// Builds the model and rejects surfaces that reach the Betz limit on a
    /// 200x200 grid over the domain.
    pub fn new(coefficients: [f64; 15], domain: CpDomain) -> Result<Self> {
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter { name: "cp coefficients", reason: "non-finite value".into() });
        }
        let model = Self { coefficients, domain };
        model.check_betz()?;
        Ok(model)
    }

    fn check_betz(&self) -> Result<()> {
        let (l0, l1) = (self.domain.lambda.lower(), self.domain.lambda.upper());
        let (t0, t1) = (self.domain.pitch_deg.lower(), self.domain.pitch_deg.upper());
        for i in 0..BETZ_GRID {
            let lambda = l0 + (l1 - l0) * i as f64 / (BETZ_GRID - 1) as f64;
            for j in 0..BETZ_GRID {
                let pitch_deg = t0 + (t1 - t0) * j as f64 / (BETZ_GRID - 1) as f64;
                let value = self.eval(lambda, pitch_deg);
                if value >= BETZ_LIMIT {
                    return Err(Error::BetzViolation { value, lambda, pitch_deg });
                }
            }
        }
        Ok(())
    }

    pub fn coefficients(&self) -> &[f64; 15] {
        &self.coefficients
    }

    pub fn domain(&self) -> &CpDomain {
        &self.domain
    }

    /// Unclipped polynomial value.
    pub fn raw(&self, lambda: f64, pitch_deg: f64) -> f64 {
        let l = lambda;
        let t = pitch_deg;
        let c = &self.coefficients;
        // grouped by total degree
        let d0 = c[0];
        let d1 = c[1] * l + c[2] * t;
        let d2 = c[3] * l * l + c[4] * l * t + c[5] * t * t;
        let d3 = c[6] * l * l * l + c[7] * l * l * t + c[8] * l * t * t + c[9] * t * t * t;
        let d4 = c[10] * l * l * l * l + c[11] * l * l * l * t + c[12] * l * l * t * t + c[13] * l * t * t * t + c[14] * t * t * t * t;
        d0 + d1 + d2 + d3 + d4
    }

    pub fn eval(&self, lambda: f64, pitch_deg: f64) -> f64 {
        self.raw(lambda, pitch_deg).max(0.0)
    }

    /// Partial derivatives `(d/dlambda, d/dpitch)` of the unclipped polynomial.
    pub fn raw_gradient(&self, lambda: f64, pitch_deg: f64) -> (f64, f64) {
        let mut dl = 0.0;
        let mut dt = 0.0;
        for (c, &(i, j)) in self.coefficients.iter().zip(QUARTIC_EXPONENTS.iter()) {
            if i > 0 {
                dl += c * i as f64 * lambda.powi(i - 1) * pitch_deg.powi(j);
            }
            if j > 0 {
                dt += c * j as f64 * lambda.powi(i) * pitch_deg.powi(j - 1);
            }
        }
        (dl, dt)
    }

    /// Ordinary least squares fit of the quartic basis to `(lambda, pitch, cp)`
    /// samples, followed by the Betz check of [`CpModel::new`].
    pub fn fit(samples: &[CpSample], domain: CpDomain) -> Result<Self> {
        if samples.len() < QUARTIC_EXPONENTS.len() {
            return Err(Error::Fit(format!("{} samples cannot determine {} coefficients", samples.len(), QUARTIC_EXPONENTS.len())));
        }
        let design = DMatrix::from_fn(samples.len(), QUARTIC_EXPONENTS.len(), |r, c| {
            let (i, j) = QUARTIC_EXPONENTS[c];
            samples[r].lambda.powi(i) * samples[r].pitch_deg.powi(j)
        });
        let rhs = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.cp));
        let svd = design.svd(true, true);
        let rank = svd.rank(1e-12 * svd.singular_values.max());
        if rank < QUARTIC_EXPONENTS.len() {
            return Err(Error::Fit(format!("sample design matrix has rank {rank}")));
        }
        let solution = svd.solve(&rhs, 1e-12).map_err(|e| Error::Fit(e.to_string()))?;
        let mut coefficients = [0.0; 15];
        coefficients.copy_from_slice(solution.as_slice());
        Self::new(coefficients, domain)
    }

    /// Tip-speed ratio maximizing the surface at `pitch_deg` within the domain.
    ///
    /// A coarse scan locates the best grid cell (the quartic may have several
    /// local maxima), then golden-section search refines inside the
    /// neighbouring cells.
    pub fn optimal_lambda(&self, pitch_deg: f64) -> Result<f64> {
        let pr = self.domain.pitch_deg;
        if !pr.contains(pitch_deg) {
            return Err(Error::PitchOutsideDomain { pitch_deg, min: pr.lower(), max: pr.upper() });
        }
        const SCAN: usize = 400;
        let (lo, hi) = (self.domain.lambda.lower(), self.domain.lambda.upper());
        let h = (hi - lo) / SCAN as f64;
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for i in 0..=SCAN {
            let v = self.eval(lo + h * i as f64, pitch_deg);
            if v > best_val {
                best_val = v;
                best = i;
            }
        }
        let a = (lo + h * best.saturating_sub(1) as f64).max(lo);
        let b = (lo + h * (best + 1) as f64).min(hi);
        let refined = golden_section_max(|l| self.eval(l, pitch_deg), a, b, 1e-10);
        let grid_best = lo + h * best as f64;
        // golden section is local; keep the scan point if it is better
        if self.eval(refined, pitch_deg) >= best_val {
            Ok(refined)
        } else {
            Ok(grid_best)
        }
    }
}

fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// One `(lambda, pitch, cp)` data point for refitting the surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpSample {
    pub lambda: f64,
    pub pitch_deg: f64,
    pub cp: f64,
}

/// Reads samples from a CSV file with header `lambda,pitch_deg,cp`.
pub fn read_cp_samples(path: impl AsRef<Path>) -> Result<Vec<CpSample>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Exponential power-coefficient form
/// `(a1/li + a2*pitch + a3) * exp(a4/li)` with
/// `1/li = 1/(lambda + a5) + a6/(pitch^3 + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialCp {
    pub a: [f64; 6],
}

impl ExponentialCp {
    pub fn eval(&self, lambda: f64, pitch_deg: f64) -> Result<f64> {
        let [a1, a2, a3, a4, a5, a6] = self.a;
        let denom_pitch = pitch_deg.powi(3) + 1.0;
        let denom_lambda = lambda + a5;
        if denom_pitch == 0.0 || denom_lambda == 0.0 {
            return Err(Error::SingularCp { lambda, pitch_deg });
        }
        let inv_li = 1.0 / denom_lambda + a6 / denom_pitch;
        if !inv_li.is_finite() || inv_li == 0.0 {
            return Err(Error::SingularCp { lambda, pitch_deg });
        }
        Ok((a1 * inv_li + a2 * pitch_deg + a3) * (a4 * inv_li).exp())
    }
}

/// Aerodynamic rotor torque (N m) at rotor speed `omega_rotor` (rad/s).
pub fn rotor_torque(geom: &RotorGeometry, model: &CpModel, omega_rotor: f64, v: f64, pitch_deg: f64) -> Result<f64> {
    ensure_positive("rotor speed", omega_rotor)?;
    ensure_positive("wind speed", v)?;
    let lambda = geom.radius * omega_rotor / v;
    Ok(wind_power(geom, v)? * model.eval(lambda, pitch_deg) / omega_rotor)
}

/// Generator-side speed that maximizes the power coefficient at wind `v` and
/// pitch `pitch_deg`, constrained to the model's validity domain.
pub fn cp_argmax_speed(model: &CpModel, geom: &RotorGeometry, gearbox_ratio: f64, v: f64, pitch_deg: f64) -> Result<f64> {
    ensure_positive("wind speed", v)?;
    let lambda = model.optimal_lambda(pitch_deg)?;
    Ok(lambda * gearbox_ratio * v / geom.radius)
}
