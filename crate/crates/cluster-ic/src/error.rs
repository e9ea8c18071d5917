use thiserror::Error;

/// Crate-wide error type.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("operator size mismatch: {0} vs {1} qubits")]
    SizeMismatch(usize, usize),
    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    IndexOutOfRange { index: usize, n_qubits: usize },
    #[error("operator is not Hermitian (phase i^{phase_pow})")]
    NonHermitian { phase_pow: u8 },
    #[error("duplicate target qubit {0}")]
    DuplicateTarget(usize),
    #[error("state size {n_qubits} exceeds the {kind} cap of {cap} qubits")]
    SizeCap {
        n_qubits: usize,
        cap: usize,
        kind: &'static str,
    },
    #[error("Kraus set violates completeness by {deviation:.3e} (tolerance {tol:.1e})")]
    CptpViolation { deviation: f64, tol: f64 },
    #[error("requested branch has probability {0:.3e} (treated as zero)")]
    ZeroProbabilityBranch(f64),
    #[error("parameter {name} = {value} out of range")]
    ParamOutOfRange { name: &'static str, value: f64 },
    #[error("{0}")]
    InvalidLattice(String),
    #[error("channel kind {0} has no sampled Pauli-error form")]
    NotPauli(&'static str),
    #[error("estimator {estimator} does not support this channel/lattice: {reason}")]
    EstimatorMismatch {
        estimator: &'static str,
        reason: String,
    },
    #[error("syndrome has odd defect parity ({0} defects); boundary handling bug")]
    OddDefectParity(usize),
    #[error("scan grid does not bracket a crossing: {0}")]
    NoBracketing(String),
    #[error("configuration error at {path}: {message}")]
    Config { path: String, message: String },
    #[error("internal consistency check failed: {0}")]
    Consistency(String),
}
