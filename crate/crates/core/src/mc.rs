//! Seeded Monte Carlo trajectory oracle.
//!
//! Each trajectory samples the discrete events of one protocol run: the
//! environment's Kraus branch during distribution (rejecting the trajectory
//! when the scheme post-selects and a discarded branch comes up), Alice's
//! measurement outcome, and the receiver's filter click where one exists.
//! Branch probabilities are computed constructively from the evolving states,
//! never from closed forms, so the estimates are an independent statistical
//! check on both other routes.
//!
//! Reproducibility contract: a config fully determines the estimate bits.
//! Trajectories are generated in fixed-size chunks, each chunk on its own
//! counter-offset substream of one SplitMix64 stream, and chunk accumulators
//! are merged in chunk order. Worker count therefore changes wall time and
//! nothing else.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::channels::{conditioning_unitary, wm_operator, KrausChannel, WmVariant};
use crate::protocols::{run_protocol, ProtocolId};
use crate::states::{bell_basis, bell_state, eta_basis, input_state, w_state_symmetric, Ket};
use crate::{tol, Error, Result};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Trajectories per work unit. Chunking fixes the float accumulation order,
/// so this value participates in the reproducibility contract and must not
/// change casually.
const CHUNK: u64 = 65_536;

/// Reserved RNG draws per trajectory. The widest path (average mode with a
/// filter) consumes six; the margin keeps substreams disjoint if a draw is
/// ever added.
const DRAWS_PER_TRAJECTORY: u64 = 8;

/// SplitMix64: a counter under a 64-bit finalizer. Jump-ahead is constant
/// time because the state advances by a fixed increment per draw.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Stream positioned `draws` outputs past `seed`.
    pub fn at_offset(seed: u64, draws: u64) -> Self {
        Self {
            state: seed.wrapping_add(draws.wrapping_mul(GOLDEN_GAMMA)),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 significant bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// One Monte Carlo run: protocol, physics parameters, sampling resolution.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TrajectoryConfig {
    pub seed: u64,
    pub n_trajectories: u64,
    pub protocol: ProtocolId,
    /// Fixed input `x = |alpha|^2`, or `None` to average over inputs (alpha
    /// uniform in `[0, 1)`, phases uniform, fresh per trajectory).
    pub x: Option<f64>,
    pub r: f64,
    /// Filter strength; ignored by protocols without one.
    pub q: f64,
}

/// Sample statistics for one estimated quantity.
///
/// `n_accepted` counts the samples the mean is taken over (or the successes,
/// for the probability estimates); `n_total` the trials. Binomial quantities
/// carry the binomial standard error, means the sample standard error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub standard_error: f64,
    pub n_accepted: u64,
    pub n_total: u64,
}

impl McEstimate {
    /// Whether `truth` lies within `n_se` standard errors plus an absolute
    /// slack (which covers exact quantities whose standard error is zero).
    /// Two NaNs agree: both sides saying "undefined" is agreement.
    pub fn agrees_with(&self, truth: f64, n_se: f64, slack: f64) -> bool {
        if self.mean.is_nan() && truth.is_nan() {
            return true;
        }
        (self.mean - truth).abs() <= n_se * self.standard_error + slack
    }

    fn binomial(successes: u64, trials: u64) -> Self {
        let p = if trials == 0 { f64::NAN } else { successes as f64 / trials as f64 };
        let se = if trials == 0 {
            f64::NAN
        } else {
            (p * (1.0 - p) / trials as f64).sqrt()
        };
        Self {
            mean: p,
            standard_error: se,
            n_accepted: successes,
            n_total: trials,
        }
    }

    fn sample_mean(sum: f64, sum_sq: f64, n: u64, n_total: u64) -> Self {
        if n == 0 {
            return Self {
                mean: f64::NAN,
                standard_error: f64::NAN,
                n_accepted: 0,
                n_total,
            };
        }
        let nf = n as f64;
        let mean = sum / nf;
        let se = if n < 2 {
            0.0
        } else {
            let var = ((sum_sq / nf - mean * mean) * nf / (nf - 1.0)).max(0.0);
            (var / nf).sqrt()
        };
        Self {
            mean,
            standard_error: se,
            n_accepted: n,
            n_total,
        }
    }
}

/// Per-environment-branch measurement table: Alice outcome probabilities,
/// filter click probabilities and kept-state fidelities.
struct AliceTable {
    p: [f64; 4],
    keep: [f64; 4],
    fid: [f64; 4],
}

/// Everything a trajectory needs, precomputed from the current input state.
struct Tables {
    env_probs: Vec<f64>,
    /// `Some(k)`: distribution post-selects on environment branch `k`,
    /// everything else is a rejected trajectory. `None`: all branches play.
    keep_env: Option<usize>,
    alice: Vec<Option<AliceTable>>,
    draws_click: bool,
}

fn build_tables(protocol: ProtocolId, alpha: Complex64, beta: Complex64, r: f64, q: f64) -> Result<Tables> {
    let psi_in = input_state(alpha, beta)?;
    let in_amps: [Complex64; 2] = [psi_in.amplitudes()[0], psi_in.amplitudes()[1]];

    let (shared, targets, n_shared): (Ket, Vec<usize>, usize) = match protocol {
        ProtocolId::TpEwW | ProtocolId::OriginalW => (w_state_symmetric(), vec![2], 3),
        ProtocolId::CtpW | ProtocolId::OriginalCtpW => (w_state_symmetric(), vec![0, 1, 2], 3),
        ProtocolId::TpEwBell => (bell_state(), vec![1], 2),
        ProtocolId::CtpBell | ProtocolId::OriginalCtpBell => (bell_state(), vec![0, 1], 2),
        ProtocolId::Mr => {
            return Err(Error::UnsupportedProtocol(
                "mr has no trajectory pipeline".into(),
            ))
        }
    };
    let basis: Vec<Ket> = match protocol.entanglement() {
        crate::protocols::Entanglement::W => eta_basis().to_vec(),
        crate::protocols::Entanglement::Bell => bell_basis().to_vec(),
    };
    let channel = KrausChannel::adc(r)?.lift(&targets, n_shared)?;
    let env_probs = channel.branch_probabilities(&shared)?;

    let wm: Option<Vec<crate::channels::WeakMeasurement>> = match protocol {
        ProtocolId::TpEwW | ProtocolId::TpEwBell => Some(
            (1..=4)
                .map(|i| wm_operator(q, i, WmVariant::Sqrt))
                .collect::<Result<_>>()?,
        ),
        ProtocolId::CtpBell => Some(
            (1..=4)
                .map(|i| wm_operator(q, i, WmVariant::Linear))
                .collect::<Result<_>>()?,
        ),
        _ => None,
    };

    let post_selected = matches!(
        protocol,
        ProtocolId::TpEwW | ProtocolId::TpEwBell | ProtocolId::CtpW | ProtocolId::CtpBell
    );

    // Alice-stage table for one surviving shared state.
    let table_for = |kept: &Ket| -> Result<AliceTable> {
        let total = psi_in.tensor(kept)?;
        let mut p = [0.0; 4];
        let mut keep = [0.0; 4];
        let mut fid = [f64::NAN; 4];
        for i in 0..4 {
            let projected = project_onto(&basis[i], &total);
            let pi: f64 = projected.iter().map(|z| z.norm_sqr()).sum();
            p[i] = pi;
            let out = match &wm {
                Some(filters) => filters[i].operator().apply(&projected)?,
                None => conditioning_unitary(i + 1)?.apply(&projected)?,
            };
            let g: f64 = out.iter().map(|z| z.norm_sqr()).sum();
            if pi >= tol::ZERO_BRANCH {
                keep[i] = (g / pi).min(1.0);
            }
            if g >= tol::ZERO_BRANCH {
                let overlap = in_amps[0].conj() * out[0] + in_amps[1].conj() * out[1];
                fid[i] = (overlap.norm_sqr() / g).clamp(0.0, 1.0);
            }
        }
        Ok(AliceTable { p, keep, fid })
    };

    let mut alice: Vec<Option<AliceTable>> = Vec::with_capacity(env_probs.len());
    let keep_env = if post_selected {
        // The coherent branch is the all-`e0` combination, enumerated first.
        let (kept, p0) = match channel.eam_select_pure(&shared, &channel.labels()[0].clone()) {
            Ok(ok) => ok,
            Err(Error::ZeroProbabilityBranch { .. }) => {
                return Err(Error::InvalidParameter(format!(
                    "{protocol} cannot distribute entanglement at r = {r}; nothing to sample"
                )))
            }
            Err(e) => return Err(e),
        };
        debug_assert!((p0 - env_probs[0]).abs() < 1e-12);
        alice.push(Some(table_for(&kept)?));
        alice.extend((1..env_probs.len()).map(|_| None));
        Some(0)
    } else {
        for (_, p, state) in channel.branch_states(&shared)? {
            alice.push(match state {
                Some(ket) if p >= tol::ZERO_BRANCH => Some(table_for(&ket)?),
                _ => None,
            });
        }
        None
    };

    Ok(Tables {
        env_probs,
        keep_env,
        alice,
        draws_click: wm.is_some(),
    })
}

/// Unnormalized receiver amplitudes after Alice's outcome, on the last qubit.
fn project_onto(outcome: &Ket, total: &Ket) -> [Complex64; 2] {
    let d_alice = outcome.dim();
    let t = total.amplitudes();
    let a = outcome.amplitudes();
    let mut out = [Complex64::new(0.0, 0.0); 2];
    for (i, amp) in a.iter().enumerate() {
        out[0] += amp.conj() * t[2 * i];
        out[1] += amp.conj() * t[2 * i + 1];
    }
    debug_assert_eq!(d_alice * 2, t.len());
    out
}

/// Walks the inverse CDF; never selects a zero-width branch.
fn pick(probs: &[f64], u: f64) -> usize {
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        cum += p;
        last_positive = i;
        if u < cum {
            return i;
        }
    }
    // Rounding can leave cum marginally below one; the tail belongs to the
    // last real branch.
    last_positive
}

#[derive(Default, Clone, Copy)]
struct ChunkStats {
    n_total: u64,
    n_accepted: u64,
    branch: [u64; 4],
    clicks: u64,
    fid_sum: f64,
    fid_sq: f64,
    branch_fid_sum: [f64; 4],
    branch_fid_sq: [f64; 4],
}

impl ChunkStats {
    fn absorb(&mut self, other: &ChunkStats) {
        self.n_total += other.n_total;
        self.n_accepted += other.n_accepted;
        self.clicks += other.clicks;
        self.fid_sum += other.fid_sum;
        self.fid_sq += other.fid_sq;
        for i in 0..4 {
            self.branch[i] += other.branch[i];
            self.branch_fid_sum[i] += other.branch_fid_sum[i];
            self.branch_fid_sq[i] += other.branch_fid_sq[i];
        }
    }

    fn record(&mut self, tables: &Tables, rng: &mut SplitMix64) {
        self.n_total += 1;
        let env = pick(&tables.env_probs, rng.next_f64());
        if let Some(keep) = tables.keep_env {
            if env != keep {
                return;
            }
        }
        let table = match &tables.alice[env] {
            Some(t) => t,
            // Unreachable by construction: kept branches carry tables and
            // pick() avoids zero-width ones. Counted as a rejection if a
            // rounding edge ever gets here.
            None => return,
        };
        self.n_accepted += 1;

        let i = pick(&table.p, rng.next_f64());
        self.branch[i] += 1;
        let clicked = if tables.draws_click {
            rng.next_f64() < table.keep[i]
        } else {
            true
        };
        if clicked {
            self.clicks += 1;
        }

        let f = table.fid[i];
        self.fid_sum += f;
        self.fid_sq += f * f;
        self.branch_fid_sum[i] += f;
        self.branch_fid_sq[i] += f * f;
    }
}

/// Runs the configured trajectories and returns estimates keyed by quantity:
///
/// * `eam_probability`: distribution acceptances over all trajectories
/// * `branch_prob/1..4`: Alice outcome frequencies among accepted ones
/// * `conditional_success`: filter clicks over accepted trajectories
/// * `unconditional_success`: filter clicks over all trajectories
/// * `branch_fidelity/1..4`: mean kept-state fidelity per outcome
/// * `mean_fidelity` (fixed input) or `average_fidelity` (averaged inputs):
///   outcome-weighted fidelity, one sample per accepted trajectory
///
/// Identical configs produce bit-identical maps, independent of the rayon
/// worker count.
///
/// # Errors
///
/// [`Error::InvalidParameter`] for an empty run, an out-of-range fixed input
/// or a degenerate configuration; [`Error::UnsupportedProtocol`] for
/// [`ProtocolId::Mr`].
pub fn run_trajectories(config: &TrajectoryConfig) -> Result<BTreeMap<String, McEstimate>> {
    if config.n_trajectories == 0 {
        return Err(Error::InvalidParameter(
            "n_trajectories must be positive".into(),
        ));
    }
    if let Some(x) = config.x {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::InvalidParameter(format!(
                "fixed input x must lie in [0, 1], got {x}"
            )));
        }
    }

    // Fixed-input tables are shared by every chunk; averaged mode rebuilds
    // from freshly sampled inputs inside the trajectory loop.
    let fixed: Option<Tables> = match config.x {
        Some(x) => Some(build_tables(
            config.protocol,
            Complex64::new(x.sqrt(), 0.0),
            Complex64::new((1.0 - x).sqrt(), 0.0),
            config.r,
            config.q,
        )?),
        None => {
            // Validate parameters once up front so per-trajectory builds
            // cannot fail later.
            build_tables(
                config.protocol,
                Complex64::new(0.6, 0.0),
                Complex64::new(0.8, 0.0),
                config.r,
                config.q,
            )?;
            None
        }
    };

    let n_chunks = config.n_trajectories.div_ceil(CHUNK);
    let chunk_stats: Vec<Result<ChunkStats>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let len = CHUNK.min(config.n_trajectories - start);
            let mut rng = SplitMix64::at_offset(config.seed, start * DRAWS_PER_TRAJECTORY);
            let mut stats = ChunkStats::default();
            match &fixed {
                Some(tables) => {
                    for _ in 0..len {
                        stats.record(tables, &mut rng);
                    }
                }
                None => {
                    for _ in 0..len {
                        let a = rng.next_f64();
                        let pa = 2.0 * std::f64::consts::PI * rng.next_f64();
                        let pb = 2.0 * std::f64::consts::PI * rng.next_f64();
                        let alpha = Complex64::from_polar(a, pa);
                        let beta = Complex64::from_polar((1.0 - a * a).max(0.0).sqrt(), pb);
                        let tables = build_tables(config.protocol, alpha, beta, config.r, config.q)?;
                        stats.record(&tables, &mut rng);
                    }
                }
            }
            Ok(stats)
        })
        .collect();

    let mut total = ChunkStats::default();
    for s in chunk_stats {
        total.absorb(&s?);
    }

    let mut out = BTreeMap::new();
    out.insert(
        "eam_probability".to_string(),
        McEstimate::binomial(total.n_accepted, total.n_total),
    );
    for i in 0..4 {
        out.insert(
            format!("branch_prob/{}", i + 1),
            McEstimate::binomial(total.branch[i], total.n_accepted),
        );
        out.insert(
            format!("branch_fidelity/{}", i + 1),
            McEstimate::sample_mean(
                total.branch_fid_sum[i],
                total.branch_fid_sq[i],
                total.branch[i],
                total.n_accepted,
            ),
        );
    }
    out.insert(
        "conditional_success".to_string(),
        McEstimate::binomial(total.clicks, total.n_accepted),
    );
    out.insert(
        "unconditional_success".to_string(),
        McEstimate::binomial(total.clicks, total.n_total),
    );
    let fid_key = if config.x.is_some() { "mean_fidelity" } else { "average_fidelity" };
    out.insert(
        fid_key.to_string(),
        McEstimate::sample_mean(total.fid_sum, total.fid_sq, total.n_accepted, total.n_total),
    );
    Ok(out)
}

/// Fixed seed for the phase probe; the result is a worst case over sampled
/// phases, not a statistic, so it only needs to be reproducible.
const PROBE_SEED: u64 = 0x7068_6173_6573;

/// Reruns a protocol with random input phases against the phase-free input
/// of the same magnitudes and returns the largest deviation across every
/// reported probability and fidelity. The protocols' indicators depend on
/// the input only through `|alpha|^2`, so this should sit at rounding level;
/// the property suite pins it below 1e-10.
///
/// # Errors
///
/// [`Error::UnsupportedProtocol`] for [`ProtocolId::Mr`], parameter errors
/// from the pipeline.
pub fn phase_independence_probe(
    protocol: ProtocolId,
    r: f64,
    q: f64,
    n_phases: usize,
) -> Result<f64> {
    let mut rng = SplitMix64::new(PROBE_SEED);
    let mut worst: f64 = 0.0;
    for _ in 0..n_phases {
        let x = rng.next_f64();
        let pa = 2.0 * std::f64::consts::PI * rng.next_f64();
        let pb = 2.0 * std::f64::consts::PI * rng.next_f64();
        let a = x.sqrt();
        let b = (1.0 - x).sqrt();

        let flat = run_protocol(protocol, Complex64::new(a, 0.0), Complex64::new(b, 0.0), r, q)?;
        let phased = run_protocol(
            protocol,
            Complex64::from_polar(a, pa),
            Complex64::from_polar(b, pb),
            r,
            q,
        )?;

        let mut track = |u: f64, v: f64| {
            if u.is_nan() && v.is_nan() {
                return;
            }
            worst = worst.max((u - v).abs());
        };
        track(flat.eam_probability, phased.eam_probability);
        track(flat.conditional_success, phased.conditional_success);
        track(flat.mean_fidelity_for_input, phased.mean_fidelity_for_input);
        for (bf, bp) in flat.branches.iter().zip(&phased.branches) {
            track(bf.conditional_probability, bp.conditional_probability);
            track(bf.wm_success, bp.wm_success);
            track(bf.fidelity, bp.fidelity);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::run_tp_ew_w;

    #[test]
    fn splitmix_matches_the_reference_vector() {
        let mut rng = SplitMix64::new(0);
        assert_eq!(rng.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(rng.next_u64(), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(rng.next_u64(), 0x06C4_5D18_8009_454F);
    }

    #[test]
    fn offset_streams_continue_the_base_stream() {
        let mut base = SplitMix64::new(42);
        for _ in 0..10 {
            base.next_u64();
        }
        let mut jumped = SplitMix64::at_offset(42, 10);
        assert_eq!(base.next_u64(), jumped.next_u64());
    }

    fn spot_config(n: u64) -> TrajectoryConfig {
        TrajectoryConfig {
            seed: 7,
            n_trajectories: n,
            protocol: ProtocolId::TpEwW,
            x: Some(0.3),
            r: 0.5,
            q: 0.2,
        }
    }

    #[test]
    fn estimates_agree_with_the_constructive_report() {
        let est = run_trajectories(&spot_config(200_000)).unwrap();
        let x: f64 = 0.3;
        let rep = run_tp_ew_w(
            Complex64::new(x.sqrt(), 0.0),
            Complex64::new((1.0 - x).sqrt(), 0.0),
            0.5,
            0.2,
        )
        .unwrap();

        assert!(est["eam_probability"].agrees_with(rep.eam_probability, 5.0, 1e-12));
        assert!(est["conditional_success"].agrees_with(rep.conditional_success, 5.0, 1e-12));
        assert!(est["unconditional_success"].agrees_with(rep.unconditional_success, 5.0, 1e-12));
        assert!(est["mean_fidelity"].agrees_with(rep.mean_fidelity_for_input, 5.0, 1e-12));
        for (i, b) in rep.branches.iter().enumerate() {
            assert!(est[&format!("branch_prob/{}", i + 1)].agrees_with(b.conditional_probability, 5.0, 1e-12));
            assert!(est[&format!("branch_fidelity/{}", i + 1)].agrees_with(b.fidelity, 5.0, 1e-12));
        }

        // Bookkeeping: acceptance counts divide out exactly.
        let eam = &est["eam_probability"];
        assert_eq!(eam.mean, eam.n_accepted as f64 / eam.n_total as f64);
    }

    #[test]
    fn identical_configs_are_bit_identical() {
        let a = run_trajectories(&spot_config(100_000)).unwrap();
        let b = run_trajectories(&spot_config(100_000)).unwrap();
        for (k, ea) in &a {
            let eb = &b[k];
            assert_eq!(ea.mean.to_bits(), eb.mean.to_bits(), "{k}");
            assert_eq!(ea.standard_error.to_bits(), eb.standard_error.to_bits(), "{k}");
            assert_eq!(ea.n_accepted, eb.n_accepted, "{k}");
        }
    }

    #[test]
    fn worker_count_does_not_move_a_bit() {
        let wide = run_trajectories(&spot_config(200_000)).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let narrow = pool.install(|| run_trajectories(&spot_config(200_000))).unwrap();
        for (k, ew) in &wide {
            assert_eq!(ew.mean.to_bits(), narrow[k].mean.to_bits(), "{k}");
        }
    }

    #[test]
    fn mixed_state_protocol_statistics_are_honest() {
        let cfg = TrajectoryConfig {
            seed: 11,
            n_trajectories: 200_000,
            protocol: ProtocolId::OriginalW,
            x: Some(0.37),
            r: 0.6,
            q: 0.0,
        };
        let est = run_trajectories(&cfg).unwrap();
        let rep = run_protocol(
            ProtocolId::OriginalW,
            Complex64::new(0.37_f64.sqrt(), 0.0),
            Complex64::new(0.63_f64.sqrt(), 0.0),
            0.6,
            0.0,
        )
        .unwrap();
        assert_eq!(est["eam_probability"].mean, 1.0);
        assert_eq!(est["conditional_success"].mean, 1.0);
        assert!(est["mean_fidelity"].agrees_with(rep.mean_fidelity_for_input, 5.0, 1e-12));
        // Branch fidelity fluctuates across environment branches here, so the
        // error bar must be real.
        assert!(est["branch_fidelity/1"].standard_error > 0.0);
    }

    #[test]
    fn averaged_mode_estimates_the_quadrature_average() {
        let cfg = TrajectoryConfig {
            seed: 3,
            n_trajectories: 150_000,
            protocol: ProtocolId::TpEwW,
            x: None,
            r: 0.5,
            q: 0.0,
        };
        let est = run_trajectories(&cfg).unwrap();
        let truth = crate::analytics::average_fidelity(ProtocolId::TpEwW, 0.5, 0.0).unwrap();
        assert!(est["average_fidelity"].agrees_with(truth, 5.0, 1e-12));
    }

    #[test]
    fn degenerate_and_empty_configs_are_rejected() {
        let mut cfg = spot_config(0);
        assert!(run_trajectories(&cfg).is_err());
        cfg = spot_config(10);
        cfg.protocol = ProtocolId::CtpW;
        cfg.r = 1.0;
        assert!(run_trajectories(&cfg).is_err());
        cfg = spot_config(10);
        cfg.protocol = ProtocolId::Mr;
        assert!(matches!(run_trajectories(&cfg), Err(Error::UnsupportedProtocol(_))));
    }

    #[test]
    fn phases_never_reach_the_indicators() {
        for (protocol, q) in [
            (ProtocolId::TpEwW, 0.25),
            (ProtocolId::CtpBell, 0.4),
            (ProtocolId::OriginalCtpW, 0.0),
        ] {
            let dev = phase_independence_probe(protocol, 0.6, q, 25).unwrap();
            assert!(dev < 1e-10, "{protocol}: {dev}");
        }
    }
}
