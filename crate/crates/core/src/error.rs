use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent or out-of-range configuration (drives, grid, integrator, pulses).
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid pulse sequence: {0}")]
    Sequence(String),

    /// A scenario file failed to parse or validate. `key` names the offending entry.
    #[error("scenario error at `{key}`: {message}")]
    Scenario { key: String, message: String },

    /// An integration step broke one of the state invariants.
    #[error("numerical failure at t = {t_us} us{}: {detail}", fmt_delta(*.delta_khz))]
    Numerical {
        t_us: f64,
        delta_khz: Option<f64>,
        detail: String,
    },

    #[error("no echo found in window [{lo}, {hi}] us")]
    NoEcho { lo: f64, hi: f64 },

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn fmt_delta(delta: Option<f64>) -> String {
    match delta {
        Some(d) => format!(" (group delta = {d} kHz)"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn scenario(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Scenario {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Tags a numerical failure with the detuning group it came from.
    pub(crate) fn with_delta(self, delta_khz: f64) -> Self {
        match self {
            Error::Numerical { t_us, detail, .. } => Error::Numerical {
                t_us,
                delta_khz: Some(delta_khz),
                detail,
            },
            other => other,
        }
    }

    /// Process exit code used by the command-line tool.
    ///
    /// 2 for anything wrong with the input, 3 for failures during integration
    /// or analysis, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Sequence(_) | Error::Scenario { .. } => 2,
            Error::Numerical { .. } | Error::NoEcho { .. } | Error::Analysis(_) => 3,
            Error::Io(_) | Error::Csv(_) => 1,
        }
    }
}
