use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid interval [{lower}, {upper}]: lower bound must be below upper bound")]
    InvalidInterval { lower: f64, upper: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid lookup table: {0}")]
    InvalidTable(String),

    #[error("{quantity} must be positive, got {value}")]
    NonPositive { quantity: &'static str, value: f64 },

    #[error("pitch {pitch_deg} deg lies outside the Cp validity range [{min}, {max}] deg")]
    PitchOutsideDomain { pitch_deg: f64, min: f64, max: f64 },

    #[error("Cp model exceeds the Betz limit: {value} at lambda={lambda}, pitch={pitch_deg} deg")]
    BetzViolation { value: f64, lambda: f64, pitch_deg: f64 },

    #[error("singular point in exponential Cp form at lambda={lambda}, pitch={pitch_deg} deg")]
    SingularCp { lambda: f64, pitch_deg: f64 },

    #[error("no equilibrium for pitch={pitch_deg} deg, torque={torque_nm} N m, wind={wind_mps} m/s in speed bracket [{lo}, {hi}] rad/s")]
    NoEquilibrium { pitch_deg: f64, torque_nm: f64, wind_mps: f64, lo: f64, hi: f64 },

    #[error("linearization undefined: raw Cp polynomial is {raw} at the operating point (clipping boundary)")]
    OnClippingBoundary { raw: f64 },

    #[error("plant diverged at step {step}: omega = {omega} rad/s")]
    Divergence { step: usize, omega: f64 },

    #[error("augmented model is not controllable (rank {rank} < 4)")]
    Uncontrollable { rank: usize },

    #[error("closed loop is not stable: spectral radius {radius}")]
    Unstable { radius: f64 },

    #[error("Riccati iteration did not converge after {iterations} iterations (residual {residual:e})")]
    RiccatiNonConvergence { iterations: usize, residual: f64 },

    #[error("weight matrix {name} is not {requirement}")]
    InvalidWeight { name: &'static str, requirement: &'static str },

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("time {t} s is outside the schedule range [0, {duration}] s")]
    TimeOutOfRange { t: f64, duration: f64 },

    #[error("empty evaluation window: {0}")]
    EmptyWindow(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("csv: {0}")]
    Csv(String),

    #[error("io: {0}")]
    Io(String),

    #[error("config: {0}")]
    Config(String),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn ensure_positive(quantity: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositive { quantity, value })
    }
}
