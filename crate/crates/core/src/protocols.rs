//! End-to-end teleportation pipelines.
//!
//! Every runner here evolves states constructively: build the resource, push
//! it through the damping channel (keeping one labeled branch when the scheme
//! post-selects on the environment), compose with the input, project Alice's
//! measurement, and apply the receiver-side correction or weak-measurement
//! filter. Probabilities and fidelities are read off the evolved states, not
//! from formulas; the closed forms live in [`crate::analytics`] so the two
//! routes stay independent checks of each other.
//!
//! Branch bookkeeping is conditional on the entanglement-distribution stage
//! having succeeded: `conditional_probability` values sum to one given the
//! kept EAM branch, `wm_success` is the joint probability that Alice sees
//! branch `i` and the receiver's filter clicks, `conditional_success` is the
//! sum of the four `wm_success` values, and multiplying by `eam_probability`
//! gives the unconditional success. Filter no-click events are discarded
//! losses; nothing is ever renormalized back in.
//!
//! Branch order is fixed by the measurement basis order ([`eta_basis`] or
//! [`bell_basis`]), so reports are comparable field by field across runs and
//! protocols.

use num_complex::Complex64;
use serde::Serialize;

use crate::channels::{conditioning_unitary, wm_operator, KrausChannel, WmVariant};
use crate::linalg::ComplexMatrix;
use crate::states::{
    bell_basis, bell_state, eta_basis, fidelity, input_state, w_state_symmetric, DensityMatrix, Ket,
};
use crate::{complex_serde, tol, Error, Result};

/// The simulated protocols. `Mr` (reversal-only protection) has closed forms
/// and quadrature but no constructive pipeline; everything else runs end to
/// end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolId {
    /// EAM-protected teleportation over a W-class resource with a
    /// square-root weak measurement at the receiver.
    TpEwW,
    /// Same protection applied to a Bell resource.
    TpEwBell,
    /// Controlled teleportation over a W resource, all three shared qubits
    /// damped, EAM keeping the coherent branch.
    CtpW,
    /// Controlled teleportation over a Bell resource, both qubits damped,
    /// EAM plus a linear-strength weak measurement.
    CtpBell,
    /// Unprotected teleportation over a W resource, receiver qubit damped.
    OriginalW,
    /// Unprotected controlled teleportation, all W qubits damped.
    OriginalCtpW,
    /// Unprotected controlled teleportation, both Bell qubits damped.
    OriginalCtpBell,
    /// Measurement-reversal protection. Closed forms only.
    Mr,
}

impl ProtocolId {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::TpEwW => "tp-ew-w",
            Self::TpEwBell => "tp-ew-bell",
            Self::CtpW => "ctp-w",
            Self::CtpBell => "ctp-bell",
            Self::OriginalW => "original-w",
            Self::OriginalCtpW => "original-ctp-w",
            Self::OriginalCtpBell => "original-ctp-bell",
            Self::Mr => "mr",
        }
    }

    /// All identifiers, in reporting order.
    pub fn all() -> [Self; 8] {
        [
            Self::TpEwW,
            Self::TpEwBell,
            Self::CtpW,
            Self::CtpBell,
            Self::OriginalW,
            Self::OriginalCtpW,
            Self::OriginalCtpBell,
            Self::Mr,
        ]
    }

    /// The protocols with a constructive pipeline (everything but `Mr`).
    pub fn constructive() -> [Self; 7] {
        [
            Self::TpEwW,
            Self::TpEwBell,
            Self::CtpW,
            Self::CtpBell,
            Self::OriginalW,
            Self::OriginalCtpW,
            Self::OriginalCtpBell,
        ]
    }

    /// Whether the receiver applies a strength-`q` weak measurement.
    pub fn uses_wm(self) -> bool {
        matches!(self, Self::TpEwW | Self::TpEwBell | Self::CtpBell)
    }

    pub fn entanglement(self) -> Entanglement {
        match self {
            Self::TpEwBell | Self::CtpBell | Self::OriginalCtpBell => Entanglement::Bell,
            _ => Entanglement::W,
        }
    }
}

impl std::str::FromStr for ProtocolId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::all()
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::UnknownQuantity(s.to_string()))
    }
}

impl std::fmt::Display for ProtocolId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Entanglement resource class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Entanglement {
    W,
    Bell,
}

impl Entanglement {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::W => "w",
            Self::Bell => "bell",
        }
    }
}

/// One Alice measurement outcome and everything conditioned on it.
#[derive(Debug, Clone, Serialize)]
pub struct BranchOutcome {
    /// Basis-ket label (`eta1..eta4` or `b1..b4`).
    pub alice_outcome: String,
    /// Probability of this outcome given the resource survived distribution.
    pub conditional_probability: f64,
    /// Joint probability that this outcome occurs and the receiver keeps the
    /// state (filter click, when the protocol filters; equal to
    /// `conditional_probability` otherwise).
    pub wm_success: f64,
    /// Teleportation fidelity of the kept state against the input. NaN when
    /// no state is ever kept on this branch.
    pub fidelity: f64,
    /// Receiver's normalized conditional state; absent for structurally dead
    /// branches.
    pub output_state: Option<DensityMatrix>,
}

/// Full account of one protocol run at fixed input and noise parameters.
#[derive(Debug, Clone, Serialize)]
pub struct ProtocolReport {
    pub protocol: ProtocolId,
    pub entanglement: Entanglement,
    #[serde(with = "complex_serde")]
    pub alpha: Complex64,
    #[serde(with = "complex_serde")]
    pub beta: Complex64,
    pub r: f64,
    /// Weak-measurement strength; absent for protocols without a filter.
    pub q: Option<f64>,
    /// Probability that entanglement distribution succeeds (the kept EAM
    /// branch, or one when nothing is post-selected). Its reciprocal is the
    /// expected number of distribution attempts per accepted resource.
    pub eam_probability: f64,
    /// The four Alice outcomes in basis order. Empty only for degenerate
    /// parameter points where no resource survives distribution.
    pub branches: Vec<BranchOutcome>,
    /// Probability the protocol completes given a distributed resource:
    /// sum of `wm_success` over branches.
    pub conditional_success: f64,
    /// `eam_probability * conditional_success`.
    pub unconditional_success: f64,
    /// Fidelity averaged over Alice outcomes at this fixed input,
    /// `sum P_i * fidelity_i`. NaN when a live branch has no kept state.
    pub mean_fidelity_for_input: f64,
    /// True when the parameter point admits no run at all (distribution
    /// cannot succeed, e.g. full damping in the all-qubit EAM scheme).
    pub degenerate: bool,
    /// Human-readable notes, e.g. filtering strength exceeding the damping.
    pub warnings: Vec<String>,
}

impl ProtocolReport {
    /// Checks the bookkeeping identities every non-degenerate report must
    /// satisfy: branch probabilities sum to one, success sums match, and all
    /// probabilities sit in `[0, 1]` up to [`tol::CLOSED_FORM_MATCH`].
    ///
    /// # Errors
    ///
    /// [`Error::InvalidState`] naming the violated identity.
    pub fn check_invariants(&self) -> Result<()> {
        if self.degenerate {
            return Ok(());
        }
        let tol = tol::CLOSED_FORM_MATCH;
        let p_sum: f64 = self.branches.iter().map(|b| b.conditional_probability).sum();
        if (p_sum - 1.0).abs() > tol {
            return Err(Error::InvalidState(format!(
                "branch probabilities sum to {p_sum}, not one"
            )));
        }
        let g_sum: f64 = self.branches.iter().map(|b| b.wm_success).sum();
        if (g_sum - self.conditional_success).abs() > tol {
            return Err(Error::InvalidState(format!(
                "conditional success {} differs from branch sum {g_sum}",
                self.conditional_success
            )));
        }
        let expect_uncond = self.eam_probability * self.conditional_success;
        if (self.unconditional_success - expect_uncond).abs() > tol {
            return Err(Error::InvalidState(
                "unconditional success is not eam_probability * conditional_success".into(),
            ));
        }
        for b in &self.branches {
            let range = -tol..=1.0 + tol;
            if !range.contains(&b.conditional_probability) || !range.contains(&b.wm_success) {
                return Err(Error::InvalidState(format!(
                    "branch {} probabilities outside [0, 1]",
                    b.alice_outcome
                )));
            }
            if b.wm_success > b.conditional_probability + tol {
                return Err(Error::InvalidState(format!(
                    "branch {} keeps more than it receives",
                    b.alice_outcome
                )));
            }
        }
        Ok(())
    }
}

/// Runs any constructive protocol at the symmetric resource point.
///
/// `q` is the filter strength for the protocols that filter and is ignored by
/// the rest.
///
/// # Errors
///
/// [`Error::UnsupportedProtocol`] for [`ProtocolId::Mr`], which has no
/// pipeline, plus any parameter-validation error from the specific runner.
pub fn run_protocol(
    id: ProtocolId,
    alpha: Complex64,
    beta: Complex64,
    r: f64,
    q: f64,
) -> Result<ProtocolReport> {
    match id {
        ProtocolId::TpEwW => run_tp_ew_w(alpha, beta, r, q),
        ProtocolId::TpEwBell => run_tp_ew_bell(alpha, beta, r, q),
        ProtocolId::CtpW => run_ctp_w(alpha, beta, r),
        ProtocolId::CtpBell => run_ctp_bell(alpha, beta, r, q),
        ProtocolId::OriginalW => run_original_w(alpha, beta, r),
        ProtocolId::OriginalCtpW => run_original_controlled(Entanglement::W, alpha, beta, r),
        ProtocolId::OriginalCtpBell => run_original_controlled(Entanglement::Bell, alpha, beta, r),
        ProtocolId::Mr => Err(Error::UnsupportedProtocol(ProtocolId::Mr.as_str().into())),
    }
}

/// EAM + square-root weak measurement over the W resource.
pub fn run_tp_ew_w(alpha: Complex64, beta: Complex64, r: f64, q: f64) -> Result<ProtocolReport> {
    run_tp_ew(Entanglement::W, alpha, beta, r, q)
}

/// EAM + square-root weak measurement over the Bell resource.
pub fn run_tp_ew_bell(alpha: Complex64, beta: Complex64, r: f64, q: f64) -> Result<ProtocolReport> {
    run_tp_ew(Entanglement::Bell, alpha, beta, r, q)
}

fn run_tp_ew(
    ent: Entanglement,
    alpha: Complex64,
    beta: Complex64,
    r: f64,
    q: f64,
) -> Result<ProtocolReport> {
    let psi_in = input_state(alpha, beta)?;
    // The measurement bases are tied to these exact resource amplitudes; a
    // reweighted W state would leak outside their span.
    let (shared, basis, outcome_prefix, damped, n_shared) = match ent {
        Entanglement::W => (w_state_symmetric(), eta_basis(), "eta", vec![2usize], 3usize),
        Entanglement::Bell => (bell_state(), bell_basis(), "b", vec![1usize], 2usize),
    };
    let protocol = match ent {
        Entanglement::W => ProtocolId::TpEwW,
        Entanglement::Bell => ProtocolId::TpEwBell,
    };
    // Validate q eagerly so bad strengths fail before any evolution.
    let filters: Vec<_> = (1..=4)
        .map(|i| wm_operator(q, i, WmVariant::Sqrt))
        .collect::<Result<_>>()?;

    let channel = KrausChannel::adc(r)?.lift(&damped, n_shared)?;
    let keep_label = vec!["e0"; damped.len()].join("*");
    let (kept, eam_probability) = match channel.eam_select_pure(&shared, &keep_label) {
        Ok(ok) => ok,
        Err(Error::ZeroProbabilityBranch { .. }) => {
            return Ok(degenerate_report(protocol, ent, alpha, beta, r, Some(q)));
        }
        Err(e) => return Err(e),
    };

    let total = psi_in.tensor(&kept)?;
    let mut branches = Vec::with_capacity(4);
    for (i, outcome) in basis.iter().enumerate() {
        let projected = alice_projection(&total, outcome);
        let filtered = filters[i].operator().apply(&projected)?;
        branches.push(branch_outcome(
            format!("{outcome_prefix}{}", i + 1),
            &projected,
            &filtered,
            &psi_in,
        )?);
    }

    let mut warnings = Vec::new();
    if q > r {
        warnings.push(format!(
            "filter strength q = {q} exceeds the damping r = {r}; both success and fidelity degrade past the matched point"
        ));
    }
    Ok(assemble(
        protocol,
        ent,
        alpha,
        beta,
        r,
        Some(q),
        eam_probability,
        branches,
        warnings,
    ))
}

/// Controlled teleportation over a W resource with every shared qubit damped
/// and EAM keeping the fully coherent branch. The kept resource is exactly
/// the undamped one, so no receiver-side filtering is needed; the price is
/// paid entirely in the distribution probability.
pub fn run_ctp_w(alpha: Complex64, beta: Complex64, r: f64) -> Result<ProtocolReport> {
    let psi_in = input_state(alpha, beta)?;
    let shared = w_state_symmetric();
    let channel = KrausChannel::adc(r)?.lift(&[0, 1, 2], 3)?;
    let (kept, eam_probability) = match channel.eam_select_pure(&shared, "e0*e0*e0") {
        Ok(ok) => ok,
        Err(Error::ZeroProbabilityBranch { .. }) => {
            return Ok(degenerate_report(
                ProtocolId::CtpW,
                Entanglement::W,
                alpha,
                beta,
                r,
                None,
            ));
        }
        Err(e) => return Err(e),
    };

    let total = psi_in.tensor(&kept)?;
    let mut branches = Vec::with_capacity(4);
    for (i, outcome) in eta_basis().iter().enumerate() {
        let projected = alice_projection(&total, outcome);
        let corrected = conditioning_unitary(i + 1)?.apply(&projected)?;
        branches.push(branch_outcome(format!("eta{}", i + 1), &projected, &corrected, &psi_in)?);
    }
    Ok(assemble(
        ProtocolId::CtpW,
        Entanglement::W,
        alpha,
        beta,
        r,
        None,
        eam_probability,
        branches,
        Vec::new(),
    ))
}

/// Controlled teleportation over a Bell resource with both qubits damped:
/// EAM keeps the doubly coherent branch and the receiver applies the
/// linear-strength filter `U_i diag(1 - q, 1)`.
pub fn run_ctp_bell(alpha: Complex64, beta: Complex64, r: f64, q: f64) -> Result<ProtocolReport> {
    let psi_in = input_state(alpha, beta)?;
    let filters: Vec<_> = (1..=4)
        .map(|i| wm_operator(q, i, WmVariant::Linear))
        .collect::<Result<_>>()?;

    let channel = KrausChannel::adc(r)?.lift(&[0, 1], 2)?;
    let (kept, eam_probability) = match channel.eam_select_pure(&bell_state(), "e0*e0") {
        Ok(ok) => ok,
        Err(Error::ZeroProbabilityBranch { .. }) => {
            return Ok(degenerate_report(
                ProtocolId::CtpBell,
                Entanglement::Bell,
                alpha,
                beta,
                r,
                Some(q),
            ));
        }
        Err(e) => return Err(e),
    };

    let total = psi_in.tensor(&kept)?;
    let mut branches = Vec::with_capacity(4);
    for (i, outcome) in bell_basis().iter().enumerate() {
        let projected = alice_projection(&total, outcome);
        let filtered = filters[i].operator().apply(&projected)?;
        branches.push(branch_outcome(format!("b{}", i + 1), &projected, &filtered, &psi_in)?);
    }

    let mut warnings = Vec::new();
    if q > r {
        warnings.push(format!(
            "filter strength q = {q} exceeds the damping r = {r}; both success and fidelity degrade past the matched point"
        ));
    }
    Ok(assemble(
        ProtocolId::CtpBell,
        Entanglement::Bell,
        alpha,
        beta,
        r,
        Some(q),
        eam_probability,
        branches,
        warnings,
    ))
}

/// Unprotected teleportation over the W resource with the receiver's qubit
/// damped. The resource arrives mixed, so this pipeline evolves density
/// matrices throughout.
pub fn run_original_w(alpha: Complex64, beta: Complex64, r: f64) -> Result<ProtocolReport> {
    run_original(ProtocolId::OriginalW, alpha, beta, r)
}

/// Unprotected controlled teleportation: every shared qubit of the chosen
/// resource is damped and nothing is post-selected or filtered.
pub fn run_original_controlled(
    ent: Entanglement,
    alpha: Complex64,
    beta: Complex64,
    r: f64,
) -> Result<ProtocolReport> {
    let id = match ent {
        Entanglement::W => ProtocolId::OriginalCtpW,
        Entanglement::Bell => ProtocolId::OriginalCtpBell,
    };
    run_original(id, alpha, beta, r)
}

fn run_original(id: ProtocolId, alpha: Complex64, beta: Complex64, r: f64) -> Result<ProtocolReport> {
    let psi_in = input_state(alpha, beta)?;
    let ent = id.entanglement();
    let (shared, damped, n_shared): (Ket, Vec<usize>, usize) = match id {
        ProtocolId::OriginalW => (w_state_symmetric(), vec![2], 3),
        ProtocolId::OriginalCtpW => (w_state_symmetric(), vec![0, 1, 2], 3),
        ProtocolId::OriginalCtpBell => (bell_state(), vec![0, 1], 2),
        _ => {
            return Err(Error::UnsupportedProtocol(format!(
                "{id} is not an unprotected pipeline"
            )))
        }
    };

    let channel = KrausChannel::adc(r)?.lift(&damped, n_shared)?;
    let rho_shared = channel.apply(&shared.density())?;
    let rho_total = psi_in.density().kron(&rho_shared)?;

    let n_total = n_shared + 1;
    let dims = vec![2usize; n_total];
    let bob = n_total - 1;
    let eye = ComplexMatrix::identity(2)?;

    let (basis, outcome_prefix): (Vec<Ket>, &str) = match ent {
        Entanglement::W => (eta_basis().to_vec(), "eta"),
        Entanglement::Bell => (bell_basis().to_vec(), "b"),
    };

    let mut branches = Vec::with_capacity(4);
    for (i, outcome) in basis.iter().enumerate() {
        let projector = outcome.density().matrix().kron(&eye)?;
        let sandwiched = projector
            .matmul(rho_total.matrix())?
            .matmul(&projector)?;
        let p = sandwiched.trace()?.re.max(0.0);
        let label = format!("{outcome_prefix}{}", i + 1);
        if p < tol::ZERO_BRANCH {
            branches.push(BranchOutcome {
                alice_outcome: label,
                conditional_probability: p,
                wm_success: p,
                fidelity: f64::NAN,
                output_state: None,
            });
            continue;
        }
        let bob_unnormalized = sandwiched.partial_trace(&dims, &[bob])?;
        let u = conditioning_unitary(i + 1)?;
        let corrected = u.matmul(&bob_unnormalized)?.matmul(&u.dagger())?;
        let state = DensityMatrix::new(corrected.scale(Complex64::new(1.0 / p, 0.0)))?;
        let fid = fidelity(&psi_in, &state)?;
        branches.push(BranchOutcome {
            alice_outcome: label,
            conditional_probability: p,
            wm_success: p,
            fidelity: fid,
            output_state: Some(state),
        });
    }

    Ok(assemble(id, ent, alpha, beta, r, None, 1.0, branches, Vec::new()))
}

/// Inner product of Alice's outcome ket against the leading qubits of the
/// register, leaving an unnormalized state on the trailing (receiver) part.
fn alice_projection(total: &Ket, outcome: &Ket) -> Vec<Complex64> {
    let d_alice = outcome.dim();
    let d_bob = total.dim() / d_alice;
    let t = total.amplitudes();
    let a = outcome.amplitudes();
    (0..d_bob)
        .map(|b| (0..d_alice).map(|i| a[i].conj() * t[i * d_bob + b]).sum())
        .collect()
}

/// Builds one branch record from the projected (pre-filter) and kept
/// (post-filter or post-correction) unnormalized receiver amplitudes.
fn branch_outcome(
    label: String,
    projected: &[Complex64],
    kept: &[Complex64],
    psi_in: &Ket,
) -> Result<BranchOutcome> {
    let p: f64 = projected.iter().map(|z| z.norm_sqr()).sum();
    let g: f64 = kept.iter().map(|z| z.norm_sqr()).sum();
    if g < tol::ZERO_BRANCH {
        return Ok(BranchOutcome {
            alice_outcome: label,
            conditional_probability: p,
            wm_success: g,
            fidelity: f64::NAN,
            output_state: None,
        });
    }
    let (ket, _) = Ket::from_unnormalized(kept.to_vec())?;
    let state = ket.density();
    let fid = fidelity(psi_in, &state)?;
    Ok(BranchOutcome {
        alice_outcome: label,
        conditional_probability: p,
        wm_success: g,
        fidelity: fid,
        output_state: Some(state),
    })
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    protocol: ProtocolId,
    entanglement: Entanglement,
    alpha: Complex64,
    beta: Complex64,
    r: f64,
    q: Option<f64>,
    eam_probability: f64,
    branches: Vec<BranchOutcome>,
    warnings: Vec<String>,
) -> ProtocolReport {
    let conditional_success: f64 = branches.iter().map(|b| b.wm_success).sum();
    let mut mean_fidelity_for_input = 0.0;
    for b in &branches {
        if b.conditional_probability < tol::ZERO_BRANCH {
            continue;
        }
        if b.fidelity.is_nan() {
            mean_fidelity_for_input = f64::NAN;
            break;
        }
        mean_fidelity_for_input += b.conditional_probability * b.fidelity;
    }
    let report = ProtocolReport {
        protocol,
        entanglement,
        alpha,
        beta,
        r,
        q,
        eam_probability,
        conditional_success,
        unconditional_success: eam_probability * conditional_success,
        mean_fidelity_for_input,
        branches,
        degenerate: false,
        warnings,
    };
    debug_assert!(report.check_invariants().is_ok(), "{:?}", report.check_invariants());
    report
}

fn degenerate_report(
    protocol: ProtocolId,
    entanglement: Entanglement,
    alpha: Complex64,
    beta: Complex64,
    r: f64,
    q: Option<f64>,
) -> ProtocolReport {
    ProtocolReport {
        protocol,
        entanglement,
        alpha,
        beta,
        r,
        q,
        eam_probability: 0.0,
        branches: Vec::new(),
        conditional_success: 0.0,
        unconditional_success: 0.0,
        mean_fidelity_for_input: f64::NAN,
        degenerate: true,
        warnings: vec![
            "entanglement distribution cannot succeed at this parameter point".into(),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn xab(x: f64) -> (Complex64, Complex64) {
        (c(x.sqrt()), c((1.0 - x).sqrt()))
    }

    const SPOT_X: f64 = 0.37;
    const SPOT_R: f64 = 0.6;
    const SPOT_Q: f64 = 0.25;

    #[test]
    fn tp_ew_w_matches_frozen_spot_values() {
        let (a, b) = xab(SPOT_X);
        let rep = run_tp_ew_w(a, b, SPOT_R, SPOT_Q).unwrap();
        rep.check_invariants().unwrap();

        assert!((rep.eam_probability - 0.7).abs() < 1e-15);
        let p: Vec<f64> = rep.branches.iter().map(|b| b.conditional_probability).collect();
        assert!((p[0] - 0.22214285714285714).abs() < 1e-12);
        assert!((p[1] - p[0]).abs() < 1e-15);
        assert!((p[2] - 0.27785714285714286).abs() < 1e-12);

        let g: Vec<f64> = rep.branches.iter().map(|b| b.wm_success).collect();
        assert!((g[0] - 0.18910714285714286).abs() < 1e-12);
        assert!((g[2] - 0.22160714285714287).abs() < 1e-12);
        assert!((rep.conditional_success - 0.8214285714285714).abs() < 1e-12);

        let f: Vec<f64> = rep.branches.iter().map(|b| b.fidelity).collect();
        assert!((f[0] - 0.975983486891234).abs() < 1e-12);
        assert!((f[1] - f[0]).abs() < 1e-14);
        assert!((f[2] - 0.9795056507798686).abs() < 1e-12);

        assert_eq!(rep.branches[0].alice_outcome, "eta1");
        assert!(rep.q == Some(SPOT_Q));
        assert!(rep.warnings.is_empty());
    }

    #[test]
    fn tp_ew_matched_strength_teleports_exactly() {
        let (a, b) = xab(0.3);
        let r = 0.35;
        let rep = run_tp_ew_w(a, b, r, r).unwrap();
        let psi = input_state(a, b).unwrap();
        for branch in &rep.branches {
            assert!((branch.fidelity - 1.0).abs() < 1e-12);
            let out = branch.output_state.as_ref().unwrap();
            assert!(out.matrix().max_abs_diff(psi.density().matrix()).unwrap() < 1e-12);
        }
        assert!((rep.mean_fidelity_for_input - 1.0).abs() < 1e-12);
        // Matched filtering costs success probability: g_tot = 1 - r/(2-r).
        assert!((rep.conditional_success - (1.0 - r / (2.0 - r))).abs() < 1e-12);
    }

    #[test]
    fn bell_resource_reproduces_w_resource_numbers() {
        let (a, b) = xab(SPOT_X);
        let w = run_tp_ew_w(a, b, SPOT_R, SPOT_Q).unwrap();
        let bell = run_tp_ew_bell(a, b, SPOT_R, SPOT_Q).unwrap();
        assert!((w.eam_probability - bell.eam_probability).abs() < 1e-12);
        for (bw, bb) in w.branches.iter().zip(&bell.branches) {
            assert!((bw.conditional_probability - bb.conditional_probability).abs() < 1e-12);
            assert!((bw.wm_success - bb.wm_success).abs() < 1e-12);
            assert!((bw.fidelity - bb.fidelity).abs() < 1e-12);
        }
        assert_eq!(bell.branches[3].alice_outcome, "b4");
    }

    #[test]
    fn tp_ew_warns_when_filter_exceeds_damping() {
        let (a, b) = xab(0.5);
        let rep = run_tp_ew_w(a, b, 0.2, 0.5).unwrap();
        assert_eq!(rep.warnings.len(), 1);
        rep.check_invariants().unwrap();
    }

    #[test]
    fn ctp_w_recovers_the_exact_resource() {
        let (a, b) = xab(SPOT_X);
        let r = 0.7;
        let rep = run_ctp_w(a, b, r).unwrap();
        rep.check_invariants().unwrap();
        assert!((rep.eam_probability - (1.0 - r)).abs() < 1e-15);
        assert_eq!(rep.q, None);
        let psi = input_state(a, b).unwrap();
        for branch in &rep.branches {
            assert!((branch.conditional_probability - 0.25).abs() < 1e-12);
            assert!((branch.fidelity - 1.0).abs() < 1e-15);
            let out = branch.output_state.as_ref().unwrap();
            assert!(out.matrix().max_abs_diff(psi.density().matrix()).unwrap() < 1e-15);
        }
        assert!((rep.conditional_success - 1.0).abs() < 1e-12);
        assert!((rep.unconditional_success - (1.0 - r)).abs() < 1e-12);
    }

    #[test]
    fn ctp_w_at_full_damping_is_degenerate() {
        let (a, b) = xab(0.4);
        let rep = run_ctp_w(a, b, 1.0).unwrap();
        assert!(rep.degenerate);
        assert_eq!(rep.eam_probability, 0.0);
        assert!(rep.branches.is_empty());
        assert!(rep.mean_fidelity_for_input.is_nan());
    }

    #[test]
    fn ctp_bell_matches_frozen_spot_values() {
        let (a, b) = xab(SPOT_X);
        let rep = run_ctp_bell(a, b, SPOT_R, SPOT_Q).unwrap();
        rep.check_invariants().unwrap();

        assert!((rep.eam_probability - 0.58).abs() < 1e-15);
        let p: Vec<f64> = rep.branches.iter().map(|b| b.conditional_probability).collect();
        assert!((p[0] - 0.2029310344827586).abs() < 1e-12);
        assert!((p[2] - 0.2970689655172414).abs() < 1e-12);

        let g: Vec<f64> = rep.branches.iter().map(|b| b.wm_success).collect();
        assert!((g[0] - 0.13315732758620688).abs() < 1e-12);
        assert!((g[2] - 0.17826508620689654).abs() < 1e-12);
        assert!((rep.conditional_success - 0.622844827586207).abs() < 1e-12);

        let f: Vec<f64> = rep.branches.iter().map(|b| b.fidelity).collect();
        assert!((f[0] - 0.9075673707210488).abs() < 1e-12);
        assert!((f[2] - 0.9309562957141995).abs() < 1e-12);
    }

    #[test]
    fn ctp_bell_matched_strength_teleports_exactly() {
        let (a, b) = xab(0.62);
        let r = 0.45;
        let rep = run_ctp_bell(a, b, r, r).unwrap();
        for branch in &rep.branches {
            assert!((branch.fidelity - 1.0).abs() < 1e-12);
        }
        assert!((rep.mean_fidelity_for_input - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ctp_bell_success_at_the_half_point() {
        let (a, b) = xab(0.5);
        let rep = run_ctp_bell(a, b, 0.5, 0.5).unwrap();
        assert!((rep.conditional_success - 0.4).abs() < 1e-12);
    }

    #[test]
    fn ctp_bell_survives_full_damping() {
        // Unlike the three-qubit scheme, the doubly damped Bell resource
        // keeps a coherent branch at r = 1 (the |00> component).
        let (a, b) = xab(0.37);
        let rep = run_ctp_bell(a, b, 1.0, 0.2).unwrap();
        assert!(!rep.degenerate);
        assert!((rep.eam_probability - 0.5).abs() < 1e-15);
        rep.check_invariants().unwrap();
    }

    #[test]
    fn original_w_has_flat_branch_probabilities() {
        let (a, b) = xab(SPOT_X);
        let rep = run_original_w(a, b, SPOT_R).unwrap();
        rep.check_invariants().unwrap();
        assert_eq!(rep.eam_probability, 1.0);
        for branch in &rep.branches {
            assert!((branch.conditional_probability - 0.25).abs() < 1e-14);
        }
        let f: Vec<f64> = rep.branches.iter().map(|b| b.fidelity).collect();
        assert!((f[0] - 0.7303707690340997).abs() < 1e-12);
        assert!((f[1] - f[0]).abs() < 1e-13);
        assert!((f[2] - 0.8863707690340996).abs() < 1e-12);
        assert!((rep.conditional_success - 1.0).abs() < 1e-12);
    }

    #[test]
    fn original_pipelines_keep_probability_normalization_under_full_damping() {
        let (a, b) = xab(0.37);
        for id in [ProtocolId::OriginalW, ProtocolId::OriginalCtpW, ProtocolId::OriginalCtpBell] {
            let rep = run_protocol(id, a, b, 1.0, 0.0).unwrap();
            rep.check_invariants().unwrap();
            assert!(!rep.degenerate);
        }
    }

    #[test]
    fn protocol_ids_round_trip_through_strings() {
        for id in ProtocolId::all() {
            let back: ProtocolId = id.as_str().parse().unwrap();
            assert_eq!(back, id);
        }
        assert!("nope".parse::<ProtocolId>().is_err());
        assert!(matches!(
            run_protocol(ProtocolId::Mr, c(1.0), c(0.0), 0.5, 0.0),
            Err(Error::UnsupportedProtocol(_))
        ));
    }

    #[test]
    fn eam_restores_weighted_w_resources_exactly() {
        // Every component of a W-class state carries exactly one excitation,
        // so the coherent branch of three independent dampers shrinks the
        // whole ket uniformly: the kept state is the resource itself for any
        // weight and phases, at probability 1 - r. The teleportation stage is
        // tied to the symmetric point, which is why the runners do not take a
        // resource parameter; this pins down the part that is weight-free.
        let shared = crate::states::w_state(2.5, 0.4, -0.9).unwrap();
        let channel = KrausChannel::adc(0.6).unwrap().lift(&[0, 1, 2], 3).unwrap();
        let (kept, p) = channel.eam_select_pure(&shared, "e0*e0*e0").unwrap();
        assert!((p - 0.4).abs() < 1e-14);
        let overlap = kept.inner(&shared).unwrap().norm();
        assert!((overlap - 1.0).abs() < 1e-14);
    }

    #[test]
    fn phases_of_the_input_do_not_move_probabilities() {
        let x: f64 = 0.37;
        let a = Complex64::from_polar(x.sqrt(), 1.1);
        let b = Complex64::from_polar((1.0 - x).sqrt(), -2.3);
        let flat = run_tp_ew_w(c(x.sqrt()), c((1.0 - x).sqrt()), 0.6, 0.25).unwrap();
        let phased = run_tp_ew_w(a, b, 0.6, 0.25).unwrap();
        for (u, v) in flat.branches.iter().zip(&phased.branches) {
            assert!((u.conditional_probability - v.conditional_probability).abs() < 1e-14);
            assert!((u.wm_success - v.wm_success).abs() < 1e-14);
            assert!((u.fidelity - v.fidelity).abs() < 1e-14);
        }
    }
}
