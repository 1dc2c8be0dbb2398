//! State constructors and comparisons for one-to-four qubit registers.
//!
//! Kets are stored as dense amplitude vectors in the computational basis, and
//! mixed states as validated density matrices. Basis kets are indexed with the
//! leftmost qubit label on the most significant bit, so `|100>` on three
//! qubits is amplitude index 4. This matches [`crate::linalg::ComplexMatrix::kron`];
//! tensoring kets and tensoring their density matrices commute.

use num_complex::Complex64;
use serde::Serialize;

use crate::linalg::ComplexMatrix;
use crate::{tol, Error, Result};

/// Pure state on 1..=4 qubits, held exactly normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    amplitudes: Vec<Complex64>,
}

impl Ket {
    /// Builds a ket from amplitudes, requiring unit norm within
    /// [`tol::NORM`]. The stored vector is renormalized so downstream products
    /// do not accumulate the residual defect.
    ///
    /// # Errors
    ///
    /// [`Error::DimensionMismatch`] unless the length is a power of two in
    /// 2..=16, [`Error::NonFinite`] for NaN or infinite amplitudes, and
    /// [`Error::InvalidState`] when the norm is off by more than [`tol::NORM`].
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm = validate_amplitudes(&amplitudes)?;
        if (norm - 1.0).abs() > tol::NORM {
            return Err(Error::InvalidState(format!(
                "ket norm is {norm:.17}, more than {:.0e} from one",
                tol::NORM
            )));
        }
        Ok(Self::renormalized(amplitudes, norm))
    }

    /// Builds a normalized ket from an unnormalized amplitude vector,
    /// returning the squared norm that was divided out. Used wherever a
    /// projection or filter produces a conditional state together with its
    /// probability.
    ///
    /// # Errors
    ///
    /// [`Error::InvalidState`] when the squared norm falls below
    /// [`tol::ZERO_BRANCH`]; a structurally zero branch has no conditional
    /// state.
    pub fn from_unnormalized(amplitudes: Vec<Complex64>) -> Result<(Self, f64)> {
        let norm = validate_amplitudes(&amplitudes)?;
        let norm_sqr = norm * norm;
        if norm_sqr < tol::ZERO_BRANCH {
            return Err(Error::InvalidState(format!(
                "cannot normalize a vector of squared norm {norm_sqr:.3e}"
            )));
        }
        Ok((Self::renormalized(amplitudes, norm), norm_sqr))
    }

    fn renormalized(mut amplitudes: Vec<Complex64>, norm: f64) -> Self {
        for a in &mut amplitudes {
            *a /= norm;
        }
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn n_qubits(&self) -> usize {
        self.amplitudes.len().trailing_zeros() as usize
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// Inner product `<self|other>`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(format!(
                "inner product between dimensions {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Tensor product with `self` on the high-order bits.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let dim = self.dim() * other.dim();
        if dim > crate::linalg::MAX_DIM {
            return Err(Error::DimensionMismatch(format!(
                "tensor product dimension {dim} exceeds {}",
                crate::linalg::MAX_DIM
            )));
        }
        let mut amplitudes = Vec::with_capacity(dim);
        for a in &self.amplitudes {
            for b in &other.amplitudes {
                amplitudes.push(a * b);
            }
        }
        // Both factors are unit norm, so the product already is.
        Ok(Self { amplitudes })
    }

    /// Rank-one density matrix `|self><self|`.
    pub fn density(&self) -> DensityMatrix {
        let n = self.dim();
        let m = ComplexMatrix::from_fn(n, n, |r, c| self.amplitudes[r] * self.amplitudes[c].conj())
            .expect("ket dimension already validated");
        DensityMatrix::new(m).expect("a pure projector is a valid density matrix")
    }
}

fn validate_amplitudes(amplitudes: &[Complex64]) -> Result<f64> {
    let dim = amplitudes.len();
    if !(2..=crate::linalg::MAX_DIM).contains(&dim) || !dim.is_power_of_two() {
        return Err(Error::DimensionMismatch(format!(
            "ket dimension {dim} is not a power of two in 2..=16"
        )));
    }
    if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("ket amplitudes"));
    }
    Ok(amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
}

/// Mixed state: Hermitian, unit trace, positive semidefinite within the
/// tolerances in [`crate::tol`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates and stores a density matrix. The Hermitian part is taken and
    /// the trace rescaled to exactly one, so accepted matrices are stored in
    /// canonical form; rejection thresholds are [`tol::HERMITICITY`],
    /// [`tol::TRACE`] and [`tol::PSD_EIGENVALUE`].
    ///
    /// # Errors
    ///
    /// [`Error::DimensionMismatch`] unless square with power-of-two dimension
    /// in 2..=16, [`Error::NotHermitian`] and [`Error::InvalidState`] for the
    /// property violations above.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let n = matrix.rows();
        if !matrix.is_square() || !n.is_power_of_two() || !(2..=crate::linalg::MAX_DIM).contains(&n) {
            return Err(Error::DimensionMismatch(format!(
                "density matrix must be square with power-of-two dimension in 2..=16, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let defect = matrix.hermiticity_defect()?;
        if defect > tol::HERMITICITY {
            return Err(Error::NotHermitian { deviation: defect });
        }
        let trace = matrix.trace()?;
        if (trace.re - 1.0).abs() > tol::TRACE || trace.im.abs() > tol::TRACE {
            return Err(Error::InvalidState(format!(
                "density matrix trace is {trace}, more than {:.0e} from one",
                tol::TRACE
            )));
        }

        // Canonicalize: exact Hermitian part, trace exactly one.
        let mut m = matrix;
        for r in 0..n {
            m.set(r, r, Complex64::new(m.at(r, r).re, 0.0));
            for c in (r + 1)..n {
                let avg = 0.5 * (m.at(r, c) + m.at(c, r).conj());
                m.set(r, c, avg);
                m.set(c, r, avg.conj());
            }
        }
        let m = m.scale(Complex64::new(1.0 / trace.re, 0.0));

        let min_eig = m
            .eig_hermitian()?
            .first()
            .copied()
            .expect("dimension is at least two");
        if min_eig < tol::PSD_EIGENVALUE {
            return Err(Error::InvalidState(format!(
                "density matrix has eigenvalue {min_eig:.3e}, below the {:.0e} floor",
                tol::PSD_EIGENVALUE
            )));
        }
        Ok(Self { matrix: m })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn n_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    /// Tensor product with `self` on the high-order bits.
    pub fn kron(&self, other: &Self) -> Result<Self> {
        Self::new(self.matrix.kron(other.matrix())?)
    }

    /// Traces out every qubit not listed in `keep` (positions as in the ket
    /// label, leftmost is 0) and revalidates the result.
    pub fn reduce(&self, keep: &[usize]) -> Result<Self> {
        let dims = vec![2usize; self.n_qubits()];
        Self::new(self.matrix.partial_trace(&dims, keep)?)
    }

    /// Expectation value `<psi|rho|psi>`, guaranteed real for stored states.
    pub fn expectation(&self, psi: &Ket) -> Result<f64> {
        if psi.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "expectation of a dimension-{} state in a dimension-{} ket",
                self.dim(),
                psi.dim()
            )));
        }
        let rho_psi = self.matrix.apply(psi.amplitudes())?;
        let val: Complex64 = psi
            .amplitudes()
            .iter()
            .zip(&rho_psi)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(val.re)
    }
}

/// Teleportation input `alpha|0> + beta|1>`.
///
/// Norm defects up to [`tol::NORM_REPAIR`] are repaired by renormalization;
/// larger ones are rejected, as is the zero vector.
///
/// # Errors
///
/// [`Error::InvalidParameter`] when both amplitudes vanish,
/// [`Error::InvalidState`] when the norm is off by more than the repair
/// threshold.
pub fn input_state(alpha: Complex64, beta: Complex64) -> Result<Ket> {
    if alpha.norm_sqr() == 0.0 && beta.norm_sqr() == 0.0 {
        return Err(Error::InvalidParameter(
            "input amplitudes cannot both be zero".into(),
        ));
    }
    let norm = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
    if (norm - 1.0).abs() > tol::NORM_REPAIR {
        return Err(Error::InvalidState(format!(
            "input state norm {norm:.9} is more than {:.0e} from one",
            tol::NORM_REPAIR
        )));
    }
    Ok(Ket::renormalized(vec![alpha, beta], norm))
}

/// Three-qubit W-class resource
/// `(|100> + sqrt(n) e^{i gamma}|010> + sqrt(n+1) e^{i delta}|001>) / sqrt(2 + 2n)`.
///
/// The weight `n` must be positive; `n = 1` with zero phases is the symmetric
/// point used by the protocols unless a caller asks otherwise.
///
/// # Errors
///
/// [`Error::InvalidParameter`] for `n <= 0` or non-finite arguments.
pub fn w_state(n: f64, gamma: f64, delta: f64) -> Result<Ket> {
    if !n.is_finite() || n <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "W-state weight n must be positive and finite, got {n}"
        )));
    }
    if !gamma.is_finite() || !delta.is_finite() {
        return Err(Error::InvalidParameter("W-state phases must be finite".into()));
    }
    let scale = 1.0 / (2.0 + 2.0 * n).sqrt();
    let mut amps = vec![Complex64::new(0.0, 0.0); 8];
    amps[0b100] = Complex64::new(scale, 0.0);
    amps[0b010] = Complex64::from_polar(n.sqrt() * scale, gamma);
    amps[0b001] = Complex64::from_polar((n + 1.0).sqrt() * scale, delta);
    Ket::new(amps)
}

/// The symmetric W-class resource, `w_state(1, 0, 0)`.
pub fn w_state_symmetric() -> Ket {
    w_state(1.0, 0.0, 0.0).expect("n = 1 is in range")
}

/// Two-qubit Bell resource `(|00> + |11>) / sqrt(2)`.
pub fn bell_state() -> Ket {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    Ket::new(vec![
        Complex64::new(h, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(h, 0.0),
    ])
    .expect("amplitudes are exactly normalized")
}

/// Alice's three-qubit measurement basis for the W-resource protocols.
///
/// The four kets span the subspace every pipeline state lives in; outcomes
/// are reported in this fixed order.
pub fn eta_basis() -> [Ket; 4] {
    let h = 0.5;
    let s = std::f64::consts::FRAC_1_SQRT_2; // sqrt(2)/2
    let build = |plus: bool, excited: bool| {
        let mut amps = vec![Complex64::new(0.0, 0.0); 8];
        let sign = if plus { s } else { -s };
        if excited {
            amps[0b110] = Complex64::new(h, 0.0);
            amps[0b101] = Complex64::new(h, 0.0);
            amps[0b000] = Complex64::new(sign, 0.0);
        } else {
            amps[0b010] = Complex64::new(h, 0.0);
            amps[0b001] = Complex64::new(h, 0.0);
            amps[0b100] = Complex64::new(sign, 0.0);
        }
        Ket::new(amps).expect("basis kets are exactly normalized")
    };
    [build(true, false), build(false, false), build(true, true), build(false, true)]
}

/// The two-qubit Bell measurement basis, in reporting order
/// `(|00>+|11>, |00>-|11>, |01>+|10>, |01>-|10>) / sqrt(2)`.
pub fn bell_basis() -> [Ket; 4] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let build = |i: usize, j: usize, sign: f64| {
        let mut amps = vec![Complex64::new(0.0, 0.0); 4];
        amps[i] = Complex64::new(h, 0.0);
        amps[j] = Complex64::new(sign * h, 0.0);
        Ket::new(amps).expect("basis kets are exactly normalized")
    };
    [build(0, 3, 1.0), build(0, 3, -1.0), build(1, 2, 1.0), build(1, 2, -1.0)]
}

/// Fidelity `<psi|rho|psi>` between a pure reference and a mixed state,
/// clamped to `[0, 1]`. Rounding can push the raw value a few ulps outside;
/// anything further indicates an invalid state, which construction prevents.
pub fn fidelity(psi: &Ket, rho: &DensityMatrix) -> Result<f64> {
    let raw = rho.expectation(psi)?;
    debug_assert!(
        (-tol::NORM..=1.0 + tol::NORM).contains(&raw),
        "fidelity {raw} outside the physical interval"
    );
    Ok(raw.clamp(0.0, 1.0))
}
