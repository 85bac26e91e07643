use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("total register dimension overflows usize")]
    DimensionOverflow,

    #[error("mode cutoff {0} is below the minimum of 2")]
    CutoffTooSmall(usize),

    #[error("wire {wire} out of range for a {wires}-wire register")]
    InvalidWire { wire: usize, wires: usize },

    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("state has vanishing norm ({0:.3e}) and cannot be normalized")]
    NotNormalizable(f64),

    #[error("projection branch has vanishing probability ({0:.3e})")]
    DegenerateProjection(f64),

    #[error("truncation leak {leaked:.3e} exceeds the budget {budget:.3e}")]
    LeakBudget { leaked: f64, budget: f64 },

    #[error("position {x:.3} outside the reliable range +-{max:.3} at cutoff {cutoff}")]
    RangeViolation { x: f64, max: f64, cutoff: usize },

    #[error("{n} qubits cannot be split into {m} equal blocks")]
    UnevenPartition { n: usize, m: usize },

    #[error("Fourier degree must be at least 1")]
    DegreeTooSmall,

    #[error("discarded register is entangled with the rest (dominant branch weight {weight:.4}, required {required:.4})")]
    ImpureDiscard { weight: f64, required: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("circuit line {line}: {reason}")]
    CircuitParse { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
