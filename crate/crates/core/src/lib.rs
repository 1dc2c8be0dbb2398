//! Simulation of single-qubit teleportation through amplitude-damping noise,
//! with and without two protective techniques: environment-assisted measurement
//! (EAM) applied while the entangled resource is distributed, and a conditioned
//! weak measurement (WM) applied by the receiver afterwards.
//!
//! The crate deliberately computes every quantity along three independent
//! routes so they can be checked against each other:
//!
//! * [`protocols`] evolves density matrices and kets step by step (Kraus
//!   branches, projective measurements, weak-measurement filtering) and reports
//!   per-branch probabilities and fidelities with no algebraic shortcuts.
//! * [`analytics`] evaluates the closed-form expressions for the same
//!   quantities and averages fidelity over the input Bloch sphere by
//!   Gauss-Legendre quadrature.
//! * [`mc`] estimates the same quantities by seeded Monte Carlo trajectory
//!   sampling with binomial/sample-variance error bars.
//!
//! Agreement of the three routes, at tolerances recorded in [`tol`], is the
//! correctness argument. The [`linalg`], [`states`] and [`channels`] modules
//! supply the small dense complex kernel (dimension 16 at most), the state
//! constructors and the Kraus-channel machinery the constructive route is
//! built from.

pub mod analytics;
pub mod channels;
pub mod linalg;
pub mod mc;
pub mod protocols;
pub mod states;

pub use analytics::{
    average_fidelity, average_fidelity_with_nodes, closed_form, decomposition_sweep, sweep,
    ClosedFormParams, GaussLegendre, SweepGrid, SweepResult,
};
pub use channels::{KrausChannel, WeakMeasurement, WmVariant};
pub use linalg::ComplexMatrix;
pub use mc::{phase_independence_probe, run_trajectories, McEstimate, SplitMix64, TrajectoryConfig};
pub use protocols::{
    run_ctp_bell, run_ctp_w, run_original_controlled, run_original_w, run_protocol, run_tp_ew_bell,
    run_tp_ew_w, BranchOutcome, Entanglement, ProtocolId, ProtocolReport,
};
pub use states::{bell_basis, bell_state, eta_basis, fidelity, input_state, w_state, DensityMatrix, Ket};

pub use num_complex::Complex64;

/// Numerical tolerances used across the crate.
///
/// Everything here is an absolute threshold on f64 arithmetic. The values fall
/// into three tiers: `1e-12` for identities that hold exactly in real
/// arithmetic and only accumulate rounding (completeness sums, trace and
/// hermiticity checks), `1e-10` where an eigensolve sits in between and eats
/// two extra digits, and `1e-15` for probabilities that are structurally zero
/// and must not be selected on.
pub mod tol {
    /// Max entrywise deviation allowed in `sum K_i^dag K_i = I`.
    pub const COMPLETENESS: f64 = 1e-12;

    /// Max entrywise deviation from `A = A^dag` before a matrix is rejected as
    /// non-Hermitian.
    pub const HERMITICITY: f64 = 1e-12;

    /// Allowed deviation of a density-matrix trace from one.
    pub const TRACE: f64 = 1e-12;

    /// Allowed deviation of a ket norm from one before rejection. Violations
    /// up to [`NORM_REPAIR`] are silently renormalized instead.
    pub const NORM: f64 = 1e-12;

    /// Largest norm defect that is repaired by renormalization rather than
    /// rejected. Caller-supplied amplitudes often carry a few ulps more error
    /// than freshly computed ones.
    pub const NORM_REPAIR: f64 = 1e-6;

    /// Eigenvalue floor for positive semidefiniteness checks. Looser than the
    /// trace tier because it sits downstream of an iterative eigensolve.
    pub const PSD_EIGENVALUE: f64 = -1e-10;

    /// Below this absolute determinant a 2x2 matrix is treated as singular.
    pub const SINGULARITY: f64 = 1e-12;

    /// Kraus branches with selection probability below this are structural
    /// zeros; post-selecting on one is an error, not a renormalization.
    pub const ZERO_BRANCH: f64 = 1e-15;

    /// Max deviation tolerated when a weak-measurement operator is checked for
    /// `M^dag M <= I`.
    pub const WM_CONTRACTION: f64 = 1e-12;

    /// Agreement demanded between constructive pipeline output and the
    /// closed-form expressions for the same quantity.
    pub const CLOSED_FORM_MATCH: f64 = 1e-12;

    /// Agreement demanded between quadrature averages and closed-form
    /// averages, and between quadrature at n and 2n nodes.
    pub const QUADRATURE_MATCH: f64 = 1e-9;
}

/// Crate-wide error type.
///
/// Validation failures carry enough context to state what was violated and by
/// how much; callers that only care about the class can match on the variant.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// Operand shapes are incompatible or outside the supported envelope.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An entry was NaN or infinite where finite data is required.
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    /// A matrix required to be Hermitian was not, by `deviation` at worst.
    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    /// A 2x2 inverse was requested for a singular matrix.
    #[error("matrix is singular (|det| = {determinant:.3e})")]
    NotInvertible { determinant: f64 },

    /// A matrix required to be unitary was not, by `deviation` at worst.
    #[error("matrix is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    /// A state failed normalization or positivity checks.
    #[error("invalid quantum state: {0}")]
    InvalidState(String),

    /// Kraus completeness failed by `deviation` at worst.
    #[error("Kraus operators do not resolve the identity (max deviation {deviation:.3e})")]
    IncompleteChannel { deviation: f64 },

    /// Post-selection was requested on a branch of structurally zero weight.
    #[error("branch {label:?} has probability {probability:.3e}, below the selectable floor")]
    ZeroProbabilityBranch { label: String, probability: f64 },

    /// No Kraus branch carries the requested label.
    #[error("unknown branch label {0:?}")]
    UnknownBranch(String),

    /// A scalar parameter was outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A closed-form or estimate identifier was not recognized.
    #[error("unknown quantity {0:?}")]
    UnknownQuantity(String),

    /// The operation is not defined for the requested protocol.
    #[error("protocol {0} does not support this operation")]
    UnsupportedProtocol(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Serde adapter for `Complex64`, serialized as a `[re, im]` pair.
pub(crate) mod complex_serde {
    use num_complex::Complex64;
    use serde::ser::SerializeTuple;
    use serde::Serializer;

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut t = s.serialize_tuple(2)?;
        t.serialize_element(&z.re)?;
        t.serialize_element(&z.im)?;
        t.end()
    }
}
