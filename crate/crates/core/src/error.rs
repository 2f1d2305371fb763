use thiserror::Error;

use crate::spin_ops::Operator;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("spin quantum number {0} is not a positive half-integer")]
    NonHalfIntegerSpin(f64),

    #[error("operator is not Hermitian (max |A - A^dagger| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("deviation matrix is not traceless (|tr| = {trace:e})")]
    NotTraceless { trace: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("zero-norm input")]
    ZeroNorm,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("target level {target} requires triple-quantum excitation")]
    TripleQuantumRequired { target: usize },

    #[error("harmonic on transition {levels:?} is off resonance by {mismatch:e} rad/s")]
    OffResonant {
        levels: (usize, usize),
        mismatch: f64,
    },

    #[error("double-quantum amplitude {amplitude:e} rad/s exceeds the perturbative limit {limit:e} rad/s")]
    PerturbativeRegime { amplitude: f64, limit: f64 },

    #[error(
        "time-dependent propagation did not converge: fidelity change {} > {} on halving dt",
        .0.change, .0.tolerance
    )]
    NotConverged(Box<ConvergenceFailure>),

    #[error("selective pulse of {duration:e} s is too short to separate lines {separation:e} rad/s apart")]
    BandwidthViolation { duration: f64, separation: f64 },

    #[error("phase cycle leaves double-quantum coherence of magnitude {residual:e}")]
    PhaseCycleIncomplete { residual: f64 },

    #[error("calibration failed: {0}")]
    CalibrationFailed(String),

    #[error("no maximum above {threshold} within the horizon (best {best})")]
    NoMaximum { threshold: f64, best: f64 },

    #[error("scaling fit needs at least two distinct dimensions")]
    UnderdeterminedFit,

    #[error("scaling fit residual {residual:e} exceeds threshold {threshold:e}")]
    FitResidual { residual: f64, threshold: f64 },

    #[error("peak windows of lines {a} and {b} overlap")]
    OverlappingPeaks { a: &'static str, b: &'static str },

    #[error("sampling interval {dt:e} s cannot resolve offsets of +/-{max_offset_hz} Hz")]
    UndersampledFid { dt: f64, max_offset_hz: f64 },

    #[error("step {step} fidelity {fidelity:.6} is below the floor {floor}")]
    FidelityBelowFloor {
        step: String,
        fidelity: f64,
        floor: f64,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Both propagators from a failed dt-halving check.
#[derive(Debug, Clone)]
pub struct ConvergenceFailure {
    pub change: f64,
    pub tolerance: f64,
    pub coarse: Operator,
    pub fine: Operator,
}
