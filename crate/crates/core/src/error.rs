use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("minimizer not bracketed by window [{lo}, {hi}]")]
    MinimizerNotBracketed { lo: f64, hi: f64 },

    #[error("root search did not converge: {0}")]
    RootNotConverged(String),

    #[error("more than two shocks merge within the minimum step near t = {t}")]
    MergeAmbiguous { t: f64 },

    #[error("quadrature missed tolerance: estimate {estimate:e}, error {error:e}")]
    QuadratureFail { estimate: f64, error: f64 },

    #[error("t = {t} coincides with a shock event at {event}")]
    ShockEventAtT { t: f64, event: f64 },

    #[error("reference time {t_ref} is after shock formation at {t_form}")]
    T0TooLate { t_ref: f64, t_form: f64 },

    #[error("time {t} outside [{lo}, {hi}]")]
    OutOfSupport { t: f64, lo: f64, hi: f64 },

    #[error("all log-weights underflowed at x = {x}")]
    UnderflowAllWeights { x: f64 },

    #[error("atom windows overlap: separation {separation:e} below minimum window {min_window:e}")]
    AtomWindowOverlap { separation: f64, min_window: f64 },

    #[error("time step {dt:e} exceeds bound {bound:e}")]
    StepTooCoarse { dt: f64, bound: f64 },

    #[error("sample variance of exp(W) is {variance:e}, above cap {cap:e}")]
    VarianceBlowup { variance: f64, cap: f64 },

    #[error("unknown shock segment {0}")]
    UnknownShock(usize),

    #[error("config: {0}")]
    ConfigInvalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
