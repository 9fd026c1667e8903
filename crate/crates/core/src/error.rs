use std::fmt;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument violated an operation's precondition.
    #[error("{0}")]
    Domain(String),

    /// `|b(x, t)|` fell below the plant's guard, so `u` cannot be computed.
    #[error(
        "controllability fault at t = {t}: |b| = {b} is below b_min = {b_min} (x = {})",
        Fmt(x)
    )]
    Controllability {
        x: Vec<f64>,
        t: f64,
        b: f64,
        b_min: f64,
    },

    /// A state or intermediate quantity became non-finite or exceeded the divergence limit.
    #[error("simulation diverged at t = {t}: {reason}")]
    Divergence { t: f64, reason: String },

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Faults terminate a simulation; domain and configuration errors are caller mistakes.
    pub fn is_fault(&self) -> bool {
        matches!(
            self,
            Error::Controllability { .. } | Error::Divergence { .. }
        )
    }
}

struct Fmt<'a>(&'a [f64]);

impl fmt::Display for Fmt<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "]")
    }
}
