//! Scalar operators shared by both controllers: saturation, rate-limited
//! integration, first-order lowpass filters and lookup-table interpolation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed interval `[lower, upper]` with `lower < upper`.
///
/// `upper` may be `f64::INFINITY` (and `lower` negative infinity) for one-sided
/// saturations such as clamping a correction term to be nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    lower: f64,
    upper: f64,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || lower >= upper {
            return Err(Error::InvalidInterval { lower, upper });
        }
        Ok(Self { lower, upper })
    }

    /// `[0, +inf)`.
    pub fn nonnegative() -> Self {
        Self { lower: 0.0, upper: f64::INFINITY }
    }

    /// Symmetric interval `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64) -> Result<Self> {
        Self::new(-half_width, half_width)
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.lower * factor, self.upper * factor)
    }
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = Error;

    fn try_from(v: [f64; 2]) -> Result<Self> {
        Self::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lower, i.upper]
    }
}

/// Saturation of `x` to `bounds`.
#[inline]
pub fn sat(x: f64, bounds: Interval) -> f64 {
    if x <= bounds.lower {
        bounds.lower
    } else if x >= bounds.upper {
        bounds.upper
    } else {
        x
    }
}

/// One step of a saturated, slew-limited integrator:
/// `prev + sat(sat(desired, value_bounds) - prev, step_bounds)`.
///
/// With `prev` inside `value_bounds` and a step interval containing zero, the
/// result stays inside `value_bounds`.
#[inline]
pub fn rate_limited_update(prev: f64, desired: f64, value_bounds: Interval, step_bounds: Interval) -> f64 {
    let target = sat(desired, value_bounds);
    let delta = target - prev;
    if step_bounds.contains(delta) {
        // exact landing on the target; avoids `prev + (target - prev) != target` rounding
        target
    } else {
        sat(prev + sat(delta, step_bounds), value_bounds)
    }
}

/// Which of the two discretizations of a first-order lag is meant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaConvention {
    /// `alpha = Ts / (T - Ts)`, requires `T > 2 Ts`.
    Minus,
    /// `alpha = Ts / (T + Ts)`.
    Plus,
}

/// Smoothing factor of a discrete first-order lowpass with sample time `ts`
/// and time constant `time_constant`.
pub fn make_alpha(ts: f64, time_constant: f64, convention: AlphaConvention) -> Result<f64> {
    crate::error::ensure_positive("sampling time", ts)?;
    match convention {
        AlphaConvention::Minus => {
            if !(time_constant > 2.0 * ts) {
                return Err(Error::InvalidParameter {
                    name: "time_constant",
                    reason: format!("{time_constant} s must exceed twice the sampling time ({ts} s)"),
                });
            }
            Ok(ts / (time_constant - ts))
        }
        AlphaConvention::Plus => {
            if !(time_constant >= 0.0) {
                return Err(Error::InvalidParameter { name: "time_constant", reason: format!("{time_constant} s must be nonnegative") });
            }
            Ok(ts / (time_constant + ts))
        }
    }
}

/// State of `y(k) = (1 - alpha) y(k-1) + alpha u(k)`.
///
/// The first update initializes the output to the input.
#[derive(Debug, Clone, PartialEq)]
pub struct LowpassState {
    alpha: f64,
    last_output: f64,
    initialized: bool,
}

impl LowpassState {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParameter { name: "alpha", reason: format!("{alpha} is outside [0, 1]") });
        }
        Ok(Self { alpha, last_output: 0.0, initialized: false })
    }

    pub fn from_time_constant(ts: f64, time_constant: f64, convention: AlphaConvention) -> Result<Self> {
        Self::new(make_alpha(ts, time_constant, convention)?)
    }

    /// Filter already holding `output` (counts as initialized).
    pub fn with_output(alpha: f64, output: f64) -> Result<Self> {
        let mut s = Self::new(alpha)?;
        s.last_output = output;
        s.initialized = true;
        Ok(s)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn output(&self) -> f64 {
        self.last_output
    }

    pub fn is_initialized(&self) -> bool {
        self.initialized
    }

    pub fn step(&mut self, input: f64) -> f64 {
        if self.initialized {
            self.last_output = (1.0 - self.alpha) * self.last_output + self.alpha * input;
        } else {
            self.last_output = input;
            self.initialized = true;
        }
        self.last_output
    }

    pub fn reset(&mut self) {
        self.initialized = false;
        self.last_output = 0.0;
    }
}

fn check_axis(name: &str, nodes: &[f64]) -> Result<()> {
    if nodes.is_empty() {
        return Err(Error::InvalidTable(format!("{name} axis is empty")));
    }
    if nodes.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidTable(format!("{name} axis has non-finite nodes")));
    }
    if nodes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidTable(format!("{name} axis is not strictly increasing")));
    }
    Ok(())
}

/// Bracketing index and weight of `x` on `nodes`; clamps outside the grid.
fn locate(nodes: &[f64], x: f64) -> (usize, f64) {
    let n = nodes.len();
    if n == 1 || x <= nodes[0] {
        return (0, 0.0);
    }
    if x >= nodes[n - 1] {
        return (n - 2, 1.0);
    }
    // first node strictly greater than x, always in 1..n
    let hi = nodes.partition_point(|&v| v <= x);
    let lo = hi - 1;
    (lo, (x - nodes[lo]) / (nodes[hi] - nodes[lo]))
}

/// Piecewise-linear 1-D table; queries outside the grid clamp to the edge value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1D {
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl Table1D {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_axis("x", &nodes)?;
        if values.len() != nodes.len() {
            return Err(Error::InvalidTable(format!("{} values for {} nodes", values.len(), nodes.len())));
        }
        Ok(Self { nodes, values })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, x: f64) -> f64 {
        if self.nodes.len() == 1 {
            return self.values[0];
        }
        let (i, w) = locate(&self.nodes, x);
        if w == 0.0 {
            self.values[i]
        } else if w == 1.0 {
            self.values[i + 1]
        } else {
            self.values[i] + w * (self.values[i + 1] - self.values[i])
        }
    }
}

/// Bilinear 2-D table over a rectangular grid; `values[ix * ny + iy]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2D {
    x_nodes: Vec<f64>,
    y_nodes: Vec<f64>,
    values: Vec<f64>,
}

impl Table2D {
    pub fn new(x_nodes: Vec<f64>, y_nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_axis("x", &x_nodes)?;
        check_axis("y", &y_nodes)?;
        if values.len() != x_nodes.len() * y_nodes.len() {
            return Err(Error::InvalidTable(format!("{} values for a {}x{} grid", values.len(), x_nodes.len(), y_nodes.len())));
        }
        Ok(Self { x_nodes, y_nodes, values })
    }

    pub fn x_nodes(&self) -> &[f64] {
        &self.x_nodes
    }

    pub fn y_nodes(&self) -> &[f64] {
        &self.y_nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[ix * self.y_nodes.len() + iy]
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let (ix, wx) = locate(&self.x_nodes, x);
        let (iy, wy) = locate(&self.y_nodes, y);
        let ix1 = (ix + 1).min(self.x_nodes.len() - 1);
        let iy1 = (iy + 1).min(self.y_nodes.len() - 1);
        let lerp = |a: f64, b: f64, w: f64| {
            if w == 0.0 {
                a
            } else if w == 1.0 {
                b
            } else {
                a + w * (b - a)
            }
        };
        let lo = lerp(self.at(ix, iy), self.at(ix, iy1), wy);
        let hi = lerp(self.at(ix1, iy), self.at(ix1, iy1), wy);
        lerp(lo, hi, wx)
    }
}

pub fn lut1(table: &Table1D, x: f64) -> f64 {
    table.eval(x)
}

pub fn lut2(table: &Table2D, x: f64, y: f64) -> f64 {
    table.eval(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn iv(a: f64, b: f64) -> Interval {
        Interval::new(a, b).unwrap()
    }

    #[test]
    fn sat_examples() {
        assert_eq!(sat(5.0, iv(0.0, 10.0)), 5.0);
        assert_eq!(sat(-3.0, iv(0.0, 10.0)), 0.0);
        assert_eq!(sat(22.5, iv(1.09, 22.0)), 22.0);
        assert_eq!(sat(-4.0, Interval::nonnegative()), 0.0);
        assert_eq!(sat(1e300, Interval::nonnegative()), 1e300);
    }

    #[test]
    fn interval_rejects_inverted_or_empty() {
        assert!(Interval::new(1.0, 1.0).is_err());
        assert!(Interval::new(2.0, 1.0).is_err());
        assert!(Interval::new(f64::NAN, 1.0).is_err());
        assert!(Interval::try_from([3.0, 1.0]).is_err());
    }

    #[test]
    fn rate_limited_update_examples() {
        assert_eq!(rate_limited_update(0.0, 100.0, iv(0.0, 100.0), iv(-1.0, 1.0)), 1.0);
        assert_eq!(rate_limited_update(50.0, 50.0, iv(0.0, 100.0), iv(-1.0, 1.0)), 50.0);
        // value bound dominates: 30.15 kN m towards 40 kN m with the 33.17 kN m cap and a 6 kN m step
        let out = rate_limited_update(30_150.0, 40_000.0, iv(0.0, 33_170.0), iv(-6_000.0, 6_000.0));
        assert_relative_eq!(out, 33_170.0, max_relative = 1e-15);
    }

    #[test]
    fn alpha_conventions() {
        let a1 = make_alpha(0.004, 20.0, AlphaConvention::Plus).unwrap();
        assert_relative_eq!(a1, 0.004 / 20.004, max_relative = 1e-15);
        assert_relative_eq!(a1, 1.9996e-4, max_relative = 1e-4);
        let agb = make_alpha(0.004, 10.0, AlphaConvention::Minus).unwrap();
        assert_relative_eq!(agb, 0.004 / 9.996, max_relative = 1e-15);
        assert_relative_eq!(agb, 4.0016e-4, max_relative = 1e-4);
        assert!(make_alpha(0.004, 0.008, AlphaConvention::Minus).is_err());
        assert!(make_alpha(0.004, 0.0081, AlphaConvention::Minus).is_ok());
        assert!(make_alpha(0.0, 1.0, AlphaConvention::Plus).is_err());
    }

    #[test]
    fn lowpass_passthrough_frozen_and_init() {
        let mut f = LowpassState::new(1.0).unwrap();
        f.step(3.0);
        assert_eq!(f.step(7.0), 7.0);

        let mut g = LowpassState::with_output(0.0, 3.0).unwrap();
        assert_eq!(g.step(7.0), 3.0);

        let mut h = LowpassState::new(0.25).unwrap();
        assert!(!h.is_initialized());
        assert_eq!(h.step(-2.0), -2.0);
        assert!(h.is_initialized());
        assert!(LowpassState::new(1.5).is_err());
    }

    #[test]
    fn lut_examples() {
        let t = Table1D::new(vec![0.0, 1.0], vec![0.0, 2.0]).unwrap();
        assert_eq!(lut1(&t, 0.5), 1.0);
        assert_eq!(lut1(&t, 1.0), 2.0);
        assert_eq!(lut1(&t, -1.0), 0.0);
        assert_eq!(lut1(&t, 9.0), 2.0);

        let t2 = Table2D::new(vec![0.0, 1.0], vec![0.0, 2.0], vec![0.0, 2.0, 10.0, 12.0]).unwrap();
        assert_eq!(lut2(&t2, 0.5, 1.0), 6.0);
        assert_eq!(lut2(&t2, 1.0, 2.0), 12.0);
        assert_eq!(lut2(&t2, -5.0, -5.0), 0.0);
        assert_eq!(lut2(&t2, 5.0, 1.0), 11.0);
    }

    #[test]
    fn table_validation() {
        assert!(Table1D::new(vec![], vec![]).is_err());
        assert!(Table1D::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(Table1D::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(Table2D::new(vec![0.0, 1.0], vec![0.0], vec![1.0]).is_err());
        let single = Table1D::new(vec![3.0], vec![4.0]).unwrap();
        assert_eq!(single.eval(-10.0), 4.0);
    }

    proptest! {
        #[test]
        fn sat_idempotent(x in -1e6..1e6f64, a in -1e3..1e3f64, w in 1e-6..1e3f64) {
            let b = iv(a, a + w);
            let once = sat(x, b);
            prop_assert_eq!(sat(once, b), once);
            prop_assert!(b.contains(once));
        }

        #[test]
        fn lowpass_contracts(alpha in 0.0..=1.0f64, y0 in -100.0..100.0f64, c in -100.0..100.0f64, k in 1usize..200) {
            let mut f = LowpassState::with_output(alpha, y0).unwrap();
            let mut y = y0;
            for _ in 0..k { y = f.step(c); }
            let bound = (1.0 - alpha).powi(k as i32) * (y0 - c).abs();
            prop_assert!((y - c).abs() <= bound * (1.0 + 1e-12) + 1e-12);
        }
    }
}
