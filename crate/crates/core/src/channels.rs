//! Kraus channels, environment-assisted selection and weak-measurement
//! operators.
//!
//! A channel is a complete set of Kraus operators with string labels. Labels
//! matter operationally: environment-assisted measurement (EAM) is modeled as
//! keeping exactly one labeled branch of the dilation and recording its
//! probability, so callers select branches by label rather than index. Lifted
//! channels (single-qubit noise acting on chosen qubits of a register) build
//! their labels from the per-target operator names, joined with `*` in qubit
//! order.
//!
//! Weak measurements are represented as filter operators `U_i D(q)`, a
//! conditioning unitary fixed by the measurement outcome times a strength-`q`
//! contraction. Both the square-root and linear strength profiles used by the
//! protocols are provided.

use num_complex::Complex64;

use crate::linalg::ComplexMatrix;
use crate::states::{DensityMatrix, Ket};
use crate::{tol, Error, Result};

/// Completely positive trace-preserving map in labeled Kraus form.
#[derive(Debug, Clone)]
pub struct KrausChannel {
    dim: usize,
    operators: Vec<ComplexMatrix>,
    labels: Vec<String>,
}

impl KrausChannel {
    /// Builds a channel after checking the completeness relation
    /// `sum K_i^dag K_i = I` to [`tol::COMPLETENESS`].
    ///
    /// # Errors
    ///
    /// [`Error::IncompleteChannel`] when completeness fails,
    /// [`Error::DimensionMismatch`] for empty or ragged operator lists or a
    /// label count that differs from the operator count.
    pub fn new(operators: Vec<ComplexMatrix>, labels: Vec<String>) -> Result<Self> {
        let dim = match operators.first() {
            Some(op) if op.is_square() => op.rows(),
            Some(op) => {
                return Err(Error::DimensionMismatch(format!(
                    "Kraus operators must be square, got {}x{}",
                    op.rows(),
                    op.cols()
                )))
            }
            None => {
                return Err(Error::DimensionMismatch(
                    "a channel needs at least one Kraus operator".into(),
                ))
            }
        };
        if operators.iter().any(|op| op.rows() != dim || op.cols() != dim) {
            return Err(Error::DimensionMismatch(
                "all Kraus operators must share one dimension".into(),
            ));
        }
        if labels.len() != operators.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} operators but {} labels",
                operators.len(),
                labels.len()
            )));
        }

        let mut sum = ComplexMatrix::zeros(dim, dim)?;
        for op in &operators {
            sum = sum.add(&op.dagger().matmul(op)?)?;
        }
        let deviation = sum.max_abs_diff(&ComplexMatrix::identity(dim)?)?;
        if deviation > tol::COMPLETENESS {
            return Err(Error::IncompleteChannel { deviation });
        }
        Ok(Self { dim, operators, labels })
    }

    /// Single-qubit amplitude damping with decay probability `r`.
    ///
    /// Branch `e0` keeps coherence (and is invertible for `r < 1`); branch
    /// `e1` dumps the excitation into the environment.
    ///
    /// # Errors
    ///
    /// [`Error::InvalidParameter`] unless `r` lies in `[0, 1]`.
    pub fn adc(r: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::InvalidParameter(format!(
                "damping probability r must lie in [0, 1], got {r}"
            )));
        }
        let z = Complex64::new(0.0, 0.0);
        let e0 = ComplexMatrix::new(
            2,
            2,
            vec![Complex64::new(1.0, 0.0), z, z, Complex64::new((1.0 - r).sqrt(), 0.0)],
        )?;
        let e1 = ComplexMatrix::new(
            2,
            2,
            vec![z, Complex64::new(r.sqrt(), 0.0), z, z],
        )?;
        Self::new(vec![e0, e1], vec!["e0".into(), "e1".into()])
    }

    /// Amplitude damping parameterized by decay rate and exposure time,
    /// `r = 1 - exp(-gamma t)`.
    ///
    /// # Errors
    ///
    /// [`Error::InvalidParameter`] for negative or non-finite arguments.
    pub fn adc_from_rate(gamma: f64, t: f64) -> Result<Self> {
        if !gamma.is_finite() || !t.is_finite() || gamma < 0.0 || t < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "decay rate and time must be finite and nonnegative, got gamma = {gamma}, t = {t}"
            )));
        }
        Self::adc(-(-gamma * t).exp_m1())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.operators
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Operator carrying `label`.
    ///
    /// # Errors
    ///
    /// [`Error::UnknownBranch`] when no branch has that label.
    pub fn operator(&self, label: &str) -> Result<&ComplexMatrix> {
        let idx = self.index_of(label)?;
        Ok(&self.operators[idx])
    }

    fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownBranch(label.to_string()))
    }

    /// Lifts this single-system channel to act on `targets` of an `n_qubits`
    /// register, identity elsewhere.
    ///
    /// The lifted channel has one operator per combination of base branches,
    /// labeled by the per-target branch names joined with `*` in target
    /// order; the first listed target varies slowest. Applying independent
    /// noise to each of k targets therefore yields `m^k` labeled branches.
    ///
    /// # Errors
    ///
    /// [`Error::DimensionMismatch`] when the base channel is not single-qubit,
    /// targets repeat or decrease, a target is out of range, or the lifted
    /// register exceeds four qubits.
    pub fn lift(&self, targets: &[usize], n_qubits: usize) -> Result<Self> {
        if self.dim != 2 {
            return Err(Error::DimensionMismatch(format!(
                "lift requires a single-qubit channel, got dimension {}",
                self.dim
            )));
        }
        if n_qubits == 0 || n_qubits > 4 {
            return Err(Error::DimensionMismatch(format!(
                "lift supports registers of 1..=4 qubits, got {n_qubits}"
            )));
        }
        if targets.is_empty()
            || targets.windows(2).any(|w| w[0] >= w[1])
            || targets.iter().any(|&t| t >= n_qubits)
        {
            return Err(Error::DimensionMismatch(format!(
                "targets {targets:?} must be strictly increasing within 0..{n_qubits}"
            )));
        }

        let m = self.operators.len();
        let k = targets.len();
        let combos = m.pow(k as u32);
        let eye = ComplexMatrix::identity(2)?;

        let mut operators = Vec::with_capacity(combos);
        let mut labels = Vec::with_capacity(combos);
        for combo in 0..combos {
            // Decode the branch choice per target, first target on the most
            // significant digit.
            let mut digits = vec![0usize; k];
            let mut rest = combo;
            for d in (0..k).rev() {
                digits[d] = rest % m;
                rest /= m;
            }

            let mut op: Option<ComplexMatrix> = None;
            for qubit in 0..n_qubits {
                let factor = match targets.iter().position(|&t| t == qubit) {
                    Some(slot) => &self.operators[digits[slot]],
                    None => &eye,
                };
                op = Some(match op {
                    Some(acc) => acc.kron(factor)?,
                    None => factor.clone(),
                });
            }
            operators.push(op.expect("register has at least one qubit"));
            labels.push(
                digits
                    .iter()
                    .map(|&d| self.labels[d].as_str())
                    .collect::<Vec<_>>()
                    .join("*"),
            );
        }
        Self::new(operators, labels)
    }

    /// Applies the channel, `rho -> sum K rho K^dag`.
    ///
    /// # Errors
    ///
    /// [`Error::DimensionMismatch`] when the state dimension differs from the
    /// channel dimension.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "channel of dimension {} applied to state of dimension {}",
                self.dim,
                rho.dim()
            )));
        }
        let mut out = ComplexMatrix::zeros(self.dim, self.dim)?;
        for op in &self.operators {
            out = out.add(&op.matmul(rho.matrix())?.matmul(&op.dagger())?)?;
        }
        DensityMatrix::new(out)
    }

    /// Probability of each labeled branch when the channel acts on a pure
    /// state. Sums to one by completeness.
    pub fn branch_probabilities(&self, psi: &Ket) -> Result<Vec<f64>> {
        self.operators
            .iter()
            .map(|op| {
                let image = op.apply(psi.amplitudes())?;
                Ok(image.iter().map(|z| z.norm_sqr()).sum())
            })
            .collect()
    }

    /// Decomposes the channel's action on a pure state into its labeled
    /// branch ensemble: `(label, probability, conditional state)`. Branches of
    /// structurally zero probability carry no state.
    pub fn branch_states(&self, psi: &Ket) -> Result<Vec<(String, f64, Option<Ket>)>> {
        let mut out = Vec::with_capacity(self.operators.len());
        for (op, label) in self.operators.iter().zip(&self.labels) {
            let image = op.apply(psi.amplitudes())?;
            let p: f64 = image.iter().map(|z| z.norm_sqr()).sum();
            let state = if p < tol::ZERO_BRANCH {
                None
            } else {
                Some(Ket::from_unnormalized(image)?.0)
            };
            out.push((label.clone(), p, state));
        }
        Ok(out)
    }

    /// Environment-assisted post-selection on one labeled branch of a mixed
    /// state: returns the conditional state and the branch probability.
    ///
    /// # Errors
    ///
    /// [`Error::UnknownBranch`] for a label the channel does not carry, and
    /// [`Error::ZeroProbabilityBranch`] when the branch weight falls below
    /// [`tol::ZERO_BRANCH`]; a zero branch cannot be conditioned on.
    pub fn eam_select(&self, rho: &DensityMatrix, label: &str) -> Result<(DensityMatrix, f64)> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "channel of dimension {} selecting on state of dimension {}",
                self.dim,
                rho.dim()
            )));
        }
        let op = self.operator(label)?;
        let unnormalized = op.matmul(rho.matrix())?.matmul(&op.dagger())?;
        let p = unnormalized.trace()?.re;
        if p < tol::ZERO_BRANCH {
            return Err(Error::ZeroProbabilityBranch {
                label: label.to_string(),
                probability: p,
            });
        }
        let conditional = DensityMatrix::new(unnormalized.scale(Complex64::new(1.0 / p, 0.0)))?;
        Ok((conditional, p))
    }

    /// Pure-state version of [`KrausChannel::eam_select`].
    pub fn eam_select_pure(&self, psi: &Ket, label: &str) -> Result<(Ket, f64)> {
        let op = self.operator(label)?;
        let image = op.apply(psi.amplitudes())?;
        let p: f64 = image.iter().map(|z| z.norm_sqr()).sum();
        if p < tol::ZERO_BRANCH {
            return Err(Error::ZeroProbabilityBranch {
                label: label.to_string(),
                probability: p,
            });
        }
        let (ket, _) = Ket::from_unnormalized(image)?;
        Ok((ket, p))
    }

    /// Re-expresses the channel in a rotated Kraus decomposition,
    /// `F_i = sum_j v[i][j] K_j`, the same map written with different
    /// branches. `v` must be unitary with dimension equal to the branch
    /// count. New branches are labeled `f0, f1, ..`.
    ///
    /// # Errors
    ///
    /// [`Error::NotUnitary`] when `v` deviates from unitarity by more than
    /// [`tol::COMPLETENESS`], [`Error::DimensionMismatch`] for a wrong-sized
    /// `v`.
    pub fn transform(&self, v: &ComplexMatrix) -> Result<Self> {
        let m = self.operators.len();
        if v.rows() != m || v.cols() != m {
            return Err(Error::DimensionMismatch(format!(
                "mixing matrix must be {m}x{m} for a {m}-branch channel, got {}x{}",
                v.rows(),
                v.cols()
            )));
        }
        let deviation = v.unitarity_defect()?;
        if deviation > tol::COMPLETENESS {
            return Err(Error::NotUnitary { deviation });
        }

        let mut operators = Vec::with_capacity(m);
        for i in 0..m {
            let mut f = ComplexMatrix::zeros(self.dim, self.dim)?;
            for (j, op) in self.operators.iter().enumerate() {
                f = f.add(&op.scale(v.at(i, j)))?;
            }
            operators.push(f);
        }
        let labels = (0..m).map(|i| format!("f{i}")).collect();
        Self::new(operators, labels)
    }

    /// Total probability recoverable by exact reversal across the channel's
    /// invertible branches: `sum_i N_i^2` where `N_i^2` is the smallest
    /// eigenvalue of `K_i K_i^dag`. Branches with `|det K|` below the
    /// singularity threshold contribute zero; no reversal exists for them.
    pub fn recoverable_probability(&self) -> Result<f64> {
        let mut total = 0.0;
        for op in &self.operators {
            let gram = op.matmul(&op.dagger())?;
            let eigs = gram.eig_hermitian()?;
            let abs_det: f64 = eigs.iter().map(|&l| l.max(0.0)).product::<f64>().sqrt();
            if abs_det >= tol::SINGULARITY {
                total += eigs[0].max(0.0);
            }
        }
        Ok(total)
    }
}

/// Real rotation `[[cos d, -sin d], [sin d, cos d]]`, the one-parameter
/// mixing family swept when searching Kraus decompositions for invertible
/// branches.
pub fn rotation_family(delta: f64) -> ComplexMatrix {
    let (s, c) = delta.sin_cos();
    ComplexMatrix::new(
        2,
        2,
        vec![
            Complex64::new(c, 0.0),
            Complex64::new(-s, 0.0),
            Complex64::new(s, 0.0),
            Complex64::new(c, 0.0),
        ],
    )
    .expect("entries are finite")
}

/// General 2x2 unitary: a global phase, two relative phases and a mixing
/// angle. Reduces to [`rotation_family`] when all three phases vanish.
pub fn rotation_family_phased(global: f64, relative: f64, skew: f64, delta: f64) -> ComplexMatrix {
    let (s, c) = delta.sin_cos();
    let g = Complex64::from_polar(1.0, global);
    ComplexMatrix::new(
        2,
        2,
        vec![
            g * Complex64::from_polar(c, relative),
            -g * Complex64::from_polar(s, skew),
            g * Complex64::from_polar(s, -skew),
            g * Complex64::from_polar(c, -relative),
        ],
    )
    .expect("entries are finite")
}

/// Strength profile of a weak-measurement filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WmVariant {
    /// Filter `U_i diag(sqrt(1-q), 1)`; reverses one square-root damping
    /// factor per protected amplitude.
    Sqrt,
    /// Filter `U_i diag(1-q, 1)`; the stronger profile used when both shared
    /// qubits were damped.
    Linear,
}

/// Weak-measurement filter: conditioning unitary times strength contraction.
#[derive(Debug, Clone)]
pub struct WeakMeasurement {
    strength: f64,
    outcome: usize,
    variant: WmVariant,
    conditioning: ComplexMatrix,
    operator: ComplexMatrix,
}

impl WeakMeasurement {
    /// Builds the filter for measurement `outcome` (1-based, one per Alice
    /// branch) at strength `q`.
    ///
    /// The conditioning unitaries are fixed by the branch:
    /// identity, sigma_z, sigma_x and sigma_x sigma_z in branch order. The
    /// assembled operator is checked to be a contraction
    /// (`max eig(M^dag M) <= 1`) within [`tol::WM_CONTRACTION`].
    ///
    /// # Errors
    ///
    /// [`Error::InvalidParameter`] for `q` outside `[0, 1]` or an outcome
    /// outside `1..=4`.
    pub fn new(strength: f64, outcome: usize, variant: WmVariant) -> Result<Self> {
        if !(0.0..=1.0).contains(&strength) {
            return Err(Error::InvalidParameter(format!(
                "weak-measurement strength must lie in [0, 1], got {strength}"
            )));
        }
        if !(1..=4).contains(&outcome) {
            return Err(Error::InvalidParameter(format!(
                "weak-measurement outcome must lie in 1..=4, got {outcome}"
            )));
        }
        let z = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let conditioning = conditioning_unitary(outcome)?;
        let damp = match variant {
            WmVariant::Sqrt => (1.0 - strength).sqrt(),
            WmVariant::Linear => 1.0 - strength,
        };
        let contraction = ComplexMatrix::new(2, 2, vec![Complex64::new(damp, 0.0), z, z, one])?;
        let operator = conditioning.matmul(&contraction)?;

        let gram = operator.dagger().matmul(&operator)?;
        let max_eig = gram.eig_hermitian()?.last().copied().unwrap_or(0.0);
        if max_eig > 1.0 + tol::WM_CONTRACTION {
            return Err(Error::InvalidParameter(format!(
                "weak-measurement operator is not a contraction (max eigenvalue {max_eig})"
            )));
        }
        Ok(Self {
            strength,
            outcome,
            variant,
            conditioning,
            operator,
        })
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn outcome(&self) -> usize {
        self.outcome
    }

    pub fn variant(&self) -> WmVariant {
        self.variant
    }

    pub fn conditioning(&self) -> &ComplexMatrix {
        &self.conditioning
    }

    pub fn operator(&self) -> &ComplexMatrix {
        &self.operator
    }

    /// Filters a pure state: returns the kept-outcome conditional state and
    /// the click probability. `None` when the click probability is a
    /// structural zero.
    pub fn filter(&self, psi: &Ket) -> Result<(Option<Ket>, f64)> {
        let image = self.operator.apply(psi.amplitudes())?;
        let p: f64 = image.iter().map(|z| z.norm_sqr()).sum();
        if p < tol::ZERO_BRANCH {
            return Ok((None, p));
        }
        let (ket, _) = Ket::from_unnormalized(image)?;
        Ok((Some(ket), p))
    }
}

/// Weak-measurement filter built for `outcome` at strength `q`; free-function
/// spelling of [`WeakMeasurement::new`].
pub fn wm_operator(q: f64, outcome: usize, variant: WmVariant) -> Result<WeakMeasurement> {
    WeakMeasurement::new(q, outcome, variant)
}

/// Receiver-side correction unitary fixed by Alice's outcome (1-based):
/// identity, sigma_z, sigma_x, then sigma_x sigma_z. These are the same
/// unitaries the weak-measurement filters condition on.
///
/// # Errors
///
/// [`Error::InvalidParameter`] for outcomes outside `1..=4`.
pub fn conditioning_unitary(outcome: usize) -> Result<ComplexMatrix> {
    let z = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    match outcome {
        1 => ComplexMatrix::identity(2),
        2 => ComplexMatrix::new(2, 2, vec![one, z, z, -one]),
        3 => ComplexMatrix::new(2, 2, vec![z, one, one, z]),
        4 => ComplexMatrix::new(2, 2, vec![z, -one, one, z]),
        _ => Err(Error::InvalidParameter(format!(
            "correction outcome must lie in 1..=4, got {outcome}"
        ))),
    }
}

/// Optimal reversal filter for an invertible Kraus branch: `N k^{-1}` with
/// `N^2` the smallest eigenvalue of `k k^dag`, the largest scale at which the
/// reversal stays a contraction. Applied after branch `k`, it restores the
/// pre-channel state with success probability `N^2` regardless of input.
///
/// # Errors
///
/// [`Error::NotInvertible`] for singular `k`, [`Error::DimensionMismatch`]
/// for non-2x2 input.
pub fn wm_reversal(k: &ComplexMatrix) -> Result<ComplexMatrix> {
    let inv = k.inverse_2x2()?;
    let gram = k.matmul(&k.dagger())?;
    let min_eig = gram.eig_hermitian()?[0].max(0.0);
    Ok(inv.scale(Complex64::new(min_eig.sqrt(), 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{bell_state, w_state_symmetric};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn adc_is_complete_and_labeled() {
        let ch = KrausChannel::adc(0.3).unwrap();
        assert_eq!(ch.labels(), &["e0".to_string(), "e1".to_string()]);
        assert!(KrausChannel::adc(-0.1).is_err());
        assert!(KrausChannel::adc(1.1).is_err());
    }

    #[test]
    fn adc_from_rate_matches_direct_parameterization() {
        let ch = KrausChannel::adc_from_rate(2.0_f64.ln(), 1.0).unwrap();
        let direct = KrausChannel::adc(0.5).unwrap();
        for (a, b) in ch.operators().iter().zip(direct.operators()) {
            assert!(a.max_abs_diff(b).unwrap() < 1e-15);
        }
        assert!(KrausChannel::adc_from_rate(-1.0, 1.0).is_err());
    }

    #[test]
    fn apply_damps_the_excited_state() {
        let r = 0.3;
        let one = Ket::new(vec![c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let out = KrausChannel::adc(r).unwrap().apply(&one.density()).unwrap();
        assert!((out.matrix().at(0, 0).re - r).abs() < 1e-15);
        assert!((out.matrix().at(1, 1).re - (1.0 - r)).abs() < 1e-15);
    }

    #[test]
    fn lift_places_operators_on_targets() {
        let ch = KrausChannel::adc(0.4).unwrap();
        let lifted = ch.lift(&[2], 3).unwrap();
        assert_eq!(lifted.labels(), &["e0".to_string(), "e1".to_string()]);

        let eye = ComplexMatrix::identity(4).unwrap();
        let expect = eye.kron(&ch.operators()[0]).unwrap();
        assert!(lifted.operators()[0].max_abs_diff(&expect).unwrap() < 1e-15);
    }

    #[test]
    fn lift_enumerates_branch_combinations_in_order() {
        let ch = KrausChannel::adc(0.4).unwrap();
        let lifted = ch.lift(&[0, 1, 2], 3).unwrap();
        assert_eq!(lifted.operators().len(), 8);
        assert_eq!(lifted.labels()[0], "e0*e0*e0");
        assert_eq!(lifted.labels()[1], "e0*e0*e1");
        assert_eq!(lifted.labels()[7], "e1*e1*e1");
    }

    #[test]
    fn lift_rejects_bad_targets() {
        let ch = KrausChannel::adc(0.4).unwrap();
        assert!(ch.lift(&[], 3).is_err());
        assert!(ch.lift(&[1, 1], 3).is_err());
        assert!(ch.lift(&[3], 3).is_err());
    }

    #[test]
    fn eam_on_damped_w_state_keeps_the_coherent_branch() {
        let r = 0.6;
        let ch = KrausChannel::adc(r).unwrap().lift(&[2], 3).unwrap();
        let (kept, p) = ch.eam_select_pure(&w_state_symmetric(), "e0").unwrap();
        assert!((p - (1.0 - r / 2.0)).abs() < 1e-15);

        // Only the |001> amplitude picks up the damping factor.
        let a = kept.amplitudes();
        let ratio = a[0b001] / a[0b010];
        assert!((ratio.re - (2.0 * (1.0 - r)).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn eam_rejects_zero_probability_branches() {
        let ch = KrausChannel::adc(0.0).unwrap();
        let zero = Ket::new(vec![c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let err = ch.eam_select_pure(&zero, "e1");
        assert!(matches!(err, Err(Error::ZeroProbabilityBranch { .. })));
        assert!(matches!(
            ch.eam_select_pure(&zero, "nope"),
            Err(Error::UnknownBranch(_))
        ));
    }

    #[test]
    fn eam_on_doubly_damped_bell_state() {
        let r = 0.6;
        let ch = KrausChannel::adc(r).unwrap().lift(&[0, 1], 2).unwrap();
        let rho = ch.apply(&bell_state().density()).unwrap();
        assert!((rho.matrix().trace().unwrap().re - 1.0).abs() < 1e-14);

        let (kept, p) = ch.eam_select(&bell_state().density(), "e0*e0").unwrap();
        let expect_p = (1.0 + (1.0 - r) * (1.0 - r)) / 2.0;
        assert!((p - expect_p).abs() < 1e-15);
        let m = kept.matrix();
        assert!((m.at(0, 3).re - (1.0 - r) / (2.0 * expect_p)).abs() < 1e-15);
        assert!((m.at(3, 3).re - (1.0 - r) * (1.0 - r) / (2.0 * expect_p)).abs() < 1e-15);
    }

    #[test]
    fn branch_probabilities_sum_to_one() {
        let ch = KrausChannel::adc(0.35).unwrap().lift(&[0, 1, 2], 3).unwrap();
        let probs = ch.branch_probabilities(&w_state_symmetric()).unwrap();
        let total: f64 = probs.iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn redecomposition_preserves_the_map_and_rejects_non_unitaries() {
        let ch = KrausChannel::adc(0.5).unwrap();
        let rot = ch.transform(&rotation_family(0.7)).unwrap();
        assert_eq!(rot.labels(), &["f0".to_string(), "f1".to_string()]);

        let plus = Ket::new(vec![c(0.5_f64.sqrt(), 0.0), c(0.5_f64.sqrt(), 0.0)]).unwrap();
        let a = ch.apply(&plus.density()).unwrap();
        let b = rot.apply(&plus.density()).unwrap();
        assert!(a.matrix().max_abs_diff(b.matrix()).unwrap() < 1e-14);

        let shear = ComplexMatrix::new(2, 2, vec![c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!(matches!(ch.transform(&shear), Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn transform_round_trips_through_the_inverse_rotation() {
        let ch = KrausChannel::adc(0.5).unwrap();
        let v = rotation_family(1.1);
        let back = ch.transform(&v).unwrap().transform(&v.dagger()).unwrap();
        for (a, b) in back.operators().iter().zip(ch.operators()) {
            assert!(a.max_abs_diff(b).unwrap() < 1e-14);
        }
    }

    #[test]
    fn recoverable_probability_of_plain_damping() {
        for r in [0.0, 0.25, 0.8] {
            let got = KrausChannel::adc(r).unwrap().recoverable_probability().unwrap();
            assert!((got - (1.0 - r)).abs() < 1e-13, "r = {r}: got {got}");
        }
    }

    #[test]
    fn rotated_decomposition_recovers_less() {
        // At a quarter turn both branches are invertible but shallow; the
        // recoverable total drops to 1 - sqrt(1/2) at r = 1/2.
        let ch = KrausChannel::adc(0.5).unwrap();
        let rot = ch.transform(&rotation_family(std::f64::consts::FRAC_PI_4)).unwrap();
        let got = rot.recoverable_probability().unwrap();
        assert!((got - (1.0 - 0.5_f64.sqrt())).abs() < 1e-13, "got {got}");
    }

    #[test]
    fn wm_operators_match_their_definitions() {
        let q = 0.36;
        let m2 = wm_operator(q, 2, WmVariant::Sqrt).unwrap();
        let expect = ComplexMatrix::new(
            2,
            2,
            vec![c((1.0 - q).sqrt(), 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)],
        )
        .unwrap();
        assert!(m2.operator().max_abs_diff(&expect).unwrap() < 1e-15);

        let m4 = wm_operator(q, 4, WmVariant::Linear).unwrap();
        let expect = ComplexMatrix::new(
            2,
            2,
            vec![c(0.0, 0.0), c(-1.0, 0.0), c(1.0 - q, 0.0), c(0.0, 0.0)],
        )
        .unwrap();
        assert!(m4.operator().max_abs_diff(&expect).unwrap() < 1e-15);

        assert!(wm_operator(1.5, 1, WmVariant::Sqrt).is_err());
        assert!(wm_operator(0.5, 0, WmVariant::Sqrt).is_err());
        assert!(wm_operator(0.5, 5, WmVariant::Sqrt).is_err());
    }

    #[test]
    fn wm_reversal_of_the_coherent_damping_branch() {
        let r = 0.36;
        let ch = KrausChannel::adc(r).unwrap();
        let rev = wm_reversal(&ch.operators()[0]).unwrap();
        // N = sqrt(1-r), so the reversal is diag(sqrt(1-r), 1).
        assert!((rev.at(0, 0).re - (1.0 - r).sqrt()).abs() < 1e-15);
        assert!((rev.at(1, 1).re - 1.0).abs() < 1e-15);

        let product = rev.matmul(&ch.operators()[0]).unwrap();
        let scaled_eye = ComplexMatrix::identity(2).unwrap().scale(c((1.0 - r).sqrt(), 0.0));
        assert!(product.max_abs_diff(&scaled_eye).unwrap() < 1e-15);

        assert!(matches!(
            wm_reversal(&KrausChannel::adc(1.0).unwrap().operators()[0]),
            Err(Error::NotInvertible { .. })
        ));
    }

    #[test]
    fn wm_filter_reports_click_probability() {
        let q = 0.5;
        let psi = crate::states::input_state(c(0.6, 0.0), c(0.8, 0.0)).unwrap();
        let (kept, p) = wm_operator(q, 1, WmVariant::Sqrt).unwrap().filter(&psi).unwrap();
        // |0> amplitude is damped by sqrt(1-q): p = 0.36 (1-q) + 0.64.
        assert!((p - (0.36 * (1.0 - q) + 0.64)).abs() < 1e-15);
        assert!(kept.is_some());
    }
}
