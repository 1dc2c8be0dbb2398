//! The `validate` suites: every closed-form, ordering, and statistical claim
//! the library makes, evaluated end to end with measured deviations.

use num_complex::Complex64;
use serde::Serialize;
use tpsim_core::analytics::{
    average_fidelity_with_nodes, closed_form, decomposition_sweep, ClosedFormParams,
};
use tpsim_core::channels::KrausChannel;
use tpsim_core::mc::{run_trajectories, McEstimate, TrajectoryConfig};
use tpsim_core::protocols::{
    run_ctp_bell, run_ctp_w, run_tp_ew_bell, run_tp_ew_w, ProtocolId, ProtocolReport,
};
use tpsim_core::states::w_state_symmetric;

use crate::Failure;

/// One validated claim with its worst observed deviation.
#[derive(Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Largest absolute deviation observed (standard-error multiples for the
    /// statistical checks). NaN marks a defined-vs-undefined mismatch.
    pub max_deviation: f64,
    pub tolerance: f64,
    pub cases: u64,
}

struct Tracker {
    name: String,
    tolerance: f64,
    max_deviation: f64,
    cases: u64,
}

impl Tracker {
    fn new(name: &str, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            tolerance,
            max_deviation: 0.0,
            cases: 0,
        }
    }

    fn dev(&mut self, d: f64) {
        self.cases += 1;
        if d.is_nan() {
            self.max_deviation = f64::NAN;
        } else if !self.max_deviation.is_nan() && d > self.max_deviation {
            self.max_deviation = d;
        }
    }

    /// NaN-aware difference: both-NaN agrees, one-sided NaN fails the check.
    fn diff(&mut self, a: f64, b: f64) {
        if a.is_nan() && b.is_nan() {
            self.cases += 1;
            return;
        }
        self.dev((a - b).abs());
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            passed: !self.max_deviation.is_nan() && self.max_deviation <= self.tolerance,
            name: self.name,
            max_deviation: self.max_deviation,
            tolerance: self.tolerance,
            cases: self.cases,
        }
    }
}

fn grid11() -> Vec<f64> {
    (0..=10).map(|i| i as f64 * 0.1).collect()
}

fn xab(x: f64) -> (Complex64, Complex64) {
    (
        Complex64::new(x.sqrt(), 0.0),
        Complex64::new((1.0 - x).sqrt(), 0.0),
    )
}

/// Constructive pipelines against closed forms, equivalences, orderings, and
/// quadrature convergence. `perturb` offsets one baseline by 1e-6 as a
/// negative-control fixture proving the gate trips.
pub fn analytic(nodes: usize, perturb: bool) -> Result<Vec<CheckResult>, Failure> {
    let mut checks = Vec::new();
    let grid = grid11();
    let offset = if perturb { 1e-6 } else { 0.0 };

    let mut success = Tracker::new("tp-ew-success-vs-closed", 1e-12);
    let mut branches = Tracker::new("tp-ew-branches-vs-closed", 1e-12);
    let mut equivalence = Tracker::new("w-bell-equivalence", 1e-12);
    let mut ctp_bell = Tracker::new("ctp-bell-vs-closed", 1e-12);
    for &x in &[0.3, 0.7] {
        let (a, b) = xab(x);
        for &r in &grid {
            for &q in &grid {
                let params = ClosedFormParams::new(x, r, q);
                let rep = run_tp_ew_w(a, b, r, q)?;
                success.diff(
                    rep.conditional_success,
                    closed_form("tp-ew/total-success", params)? + offset,
                );
                for (i, branch) in rep.branches.iter().enumerate() {
                    let tag = |what: &str| format!("tp-ew/{what}/{}", i + 1);
                    branches.diff(
                        branch.conditional_probability,
                        closed_form(&tag("branch-prob"), params)?,
                    );
                    branches.diff(branch.wm_success, closed_form(&tag("branch-keep"), params)?);
                    branches.diff(branch.fidelity, closed_form(&tag("branch-fidelity"), params)?);
                }

                let bell = run_tp_ew_bell(a, b, r, q)?;
                diff_reports(&mut equivalence, &rep, &bell);

                let crep = run_ctp_bell(a, b, r, q)?;
                if !crep.degenerate {
                    for (i, branch) in crep.branches.iter().enumerate() {
                        let tag = |what: &str| format!("ctp-bell/{what}/{}", i + 1);
                        ctp_bell.diff(
                            branch.conditional_probability,
                            closed_form(&tag("branch-prob"), params)?,
                        );
                        ctp_bell.diff(branch.wm_success, closed_form(&tag("branch-keep"), params)?);
                        ctp_bell.diff(branch.fidelity, closed_form(&tag("branch-fidelity"), params)?);
                    }
                    ctp_bell.diff(
                        crep.conditional_success,
                        closed_form("ctp-bell/total-success", params)?,
                    );
                }
            }
        }
    }
    checks.push(success.finish());
    checks.push(branches.finish());
    checks.push(equivalence.finish());
    checks.push(ctp_bell.finish());

    let mut restoration = Tracker::new("ctp-w-restoration", 1e-15);
    let mut indicators = Tracker::new("ctp-w-indicators", 1e-12);
    let w = w_state_symmetric();
    for i in 0..=19 {
        let r = i as f64 * 0.05;
        let channel = KrausChannel::adc(r)?.lift(&[0, 1, 2], 3)?;
        let (kept, _) = channel.eam_select_pure(&w, "e0*e0*e0")?;
        for (k, expected) in kept.amplitudes().iter().zip(w.amplitudes()) {
            restoration.dev((k - expected).norm());
        }
        for &x in &[0.37, 0.8] {
            let (a, b) = xab(x);
            let rep = run_ctp_w(a, b, r)?;
            indicators.diff(rep.eam_probability, 1.0 - r);
            indicators.diff(rep.conditional_success, 1.0);
            for branch in &rep.branches {
                indicators.diff(branch.fidelity, 1.0);
            }
        }
    }
    checks.push(restoration.finish());
    checks.push(indicators.finish());

    let mut baselines = Tracker::new("baseline-quadratures-vs-closed", 1e-9);
    for &r in &grid {
        let params = ClosedFormParams::new(0.5, r, 0.0);
        baselines.diff(
            average_fidelity_with_nodes(ProtocolId::OriginalW, r, 0.0, nodes)?,
            closed_form("original/average-fidelity", params)?,
        );
        baselines.diff(
            average_fidelity_with_nodes(ProtocolId::OriginalCtpW, r, 0.0, nodes)?,
            closed_form("ctp-w-original/average-fidelity", params)?,
        );
        baselines.diff(
            average_fidelity_with_nodes(ProtocolId::OriginalCtpBell, r, 0.0, nodes)?,
            closed_form("ctp-bell-original/average-fidelity", params)?,
        );
    }
    checks.push(baselines.finish());

    let mut ridge = Tracker::new("matched-strength-unit-fidelity", 1e-9);
    for i in 0..10 {
        let r = i as f64 * 0.1;
        ridge.diff(average_fidelity_with_nodes(ProtocolId::TpEwW, r, r, nodes)?, 1.0);
        ridge.diff(average_fidelity_with_nodes(ProtocolId::TpEwBell, r, r, nodes)?, 1.0);
    }
    checks.push(ridge.finish());

    let mut mr = Tracker::new("mr-baseline", 1e-12);
    let mut previous = f64::INFINITY;
    for &r in &grid {
        let params = ClosedFormParams::new(0.5, r, 0.0);
        mr.diff(
            closed_form("mr/total-success", params)?,
            (2.0 - r - r * r) / 2.0,
        );
        let avg = average_fidelity_with_nodes(ProtocolId::Mr, r, 0.0, nodes)?;
        mr.dev((avg - previous).max(0.0));
        previous = avg;
    }
    mr.diff(average_fidelity_with_nodes(ProtocolId::Mr, 0.0, 0.0, nodes)?, 1.0);
    checks.push(mr.finish());

    let mut ordering = Tracker::new("ordering-claims", 1e-12);
    for i in 1..=19 {
        let r = i as f64 * 0.05;
        let params = ClosedFormParams::new(0.5, r, 0.0);
        let matched = average_fidelity_with_nodes(ProtocolId::TpEwW, r, r, nodes)?;
        let free = average_fidelity_with_nodes(ProtocolId::TpEwW, r, 0.0, nodes)?;
        let mr_avg = average_fidelity_with_nodes(ProtocolId::Mr, r, 0.0, nodes)?;
        let unprotected = closed_form("original/average-fidelity", params)?;
        let ctp_w_avg = closed_form("ctp-w-original/average-fidelity", params)?;
        let ctp_bell_avg = closed_form("ctp-bell-original/average-fidelity", params)?;
        for margin in [
            matched - mr_avg,
            free - mr_avg,
            free - unprotected,
            ctp_bell_avg - ctp_w_avg,
        ] {
            ordering.dev((-margin).max(0.0));
        }
    }
    checks.push(ordering.finish());

    let mut argmax = Tracker::new("decomposition-argmax", 1e-9);
    let r_rows: Vec<f64> = (1..=9).map(|i| i as f64 * 0.1).collect();
    let deltas: Vec<f64> = (0..400).map(|j| j as f64 * std::f64::consts::PI / 200.0).collect();
    let landscape = decomposition_sweep(&r_rows, &deltas)?;
    let maxima = landscape.row_maxima();
    for (i, &r) in r_rows.iter().enumerate() {
        argmax.diff(maxima[i], 1.0 - r);
        for (j, &value) in landscape.recoverable[i].iter().enumerate() {
            if (value - maxima[i]).abs() <= 1e-12 && j % 100 != 0 {
                // Off-axis argmax would falsify the optimality claim outright.
                argmax.dev(1.0);
            }
        }
    }
    checks.push(argmax.finish());

    let mut identity = Tracker::new("success-identity", 1e-12);
    for &r in &grid {
        identity.diff((1.0 - r / 2.0) * (1.0 - r / (2.0 - r)), 1.0 - r);
    }
    checks.push(identity.finish());

    let mut convergence = Tracker::new("quadrature-convergence", 1e-10);
    let doubled = (nodes * 2).min(512);
    for (id, q) in [
        (ProtocolId::TpEwW, 0.3),
        (ProtocolId::CtpBell, 0.3),
        (ProtocolId::OriginalW, 0.0),
        (ProtocolId::OriginalCtpBell, 0.0),
        (ProtocolId::Mr, 0.0),
    ] {
        for &r in &[0.3, 0.7] {
            convergence.diff(
                average_fidelity_with_nodes(id, r, q, nodes)?,
                average_fidelity_with_nodes(id, r, q, doubled)?,
            );
        }
    }
    checks.push(convergence.finish());

    Ok(checks)
}

fn diff_reports(tracker: &mut Tracker, a: &ProtocolReport, b: &ProtocolReport) {
    tracker.diff(a.eam_probability, b.eam_probability);
    tracker.diff(a.conditional_success, b.conditional_success);
    tracker.diff(a.unconditional_success, b.unconditional_success);
    tracker.diff(a.mean_fidelity_for_input, b.mean_fidelity_for_input);
    for (ba, bb) in a.branches.iter().zip(&b.branches) {
        tracker.diff(ba.conditional_probability, bb.conditional_probability);
        tracker.diff(ba.wm_success, bb.wm_success);
        tracker.diff(ba.fidelity, bb.fidelity);
        match (&ba.output_state, &bb.output_state) {
            (Some(sa), Some(sb)) => {
                let dev = sa
                    .matrix()
                    .max_abs_diff(sb.matrix())
                    .unwrap_or(f64::NAN);
                tracker.dev(dev);
            }
            (None, None) => {}
            _ => tracker.dev(f64::NAN),
        }
    }
}

/// Deviation in standard-error multiples, with an absolute floor covering
/// exact (zero-variance) quantities.
fn sigma(est: &McEstimate, truth: f64) -> f64 {
    if est.mean.is_nan() && truth.is_nan() {
        return 0.0;
    }
    let dev = (est.mean - truth).abs();
    if dev <= 1e-12 {
        return 0.0;
    }
    if est.standard_error > 0.0 {
        dev / est.standard_error
    } else {
        f64::INFINITY
    }
}

/// Seeded trajectory estimates against the constructive route at fixed
/// inputs, averaged inputs against the quadrature, and bit-level replay.
pub fn mc(seed: u64, trajectories: u64, nodes: usize) -> Result<Vec<CheckResult>, Failure> {
    let mut checks = Vec::new();
    let x = 0.3;
    let (a, b) = xab(x);
    let mut replay: Vec<TrajectoryConfig> = Vec::new();

    for id in ProtocolId::constructive() {
        let mut tracker = Tracker::new(&format!("mc-{id}"), 5.0);
        for &r in &[0.2, 0.5, 0.8] {
            for &q in &[0.0, 0.25, 0.5] {
                let config = TrajectoryConfig {
                    seed,
                    n_trajectories: trajectories,
                    protocol: id,
                    x: Some(x),
                    r,
                    q,
                };
                let est = run_trajectories(&config)?;
                let truth = tpsim_core::protocols::run_protocol(id, a, b, r, q)?;
                tracker.dev(sigma(&est["eam_probability"], truth.eam_probability));
                tracker.dev(sigma(&est["conditional_success"], truth.conditional_success));
                tracker.dev(sigma(&est["unconditional_success"], truth.unconditional_success));
                tracker.dev(sigma(&est["mean_fidelity"], truth.mean_fidelity_for_input));
                for (i, branch) in truth.branches.iter().enumerate() {
                    tracker.dev(sigma(
                        &est[&format!("branch_prob/{}", i + 1)],
                        branch.conditional_probability,
                    ));
                    tracker.dev(sigma(
                        &est[&format!("branch_fidelity/{}", i + 1)],
                        branch.fidelity,
                    ));
                }
                if r == 0.5 && q == 0.25 && replay.len() < 2 {
                    replay.push(config);
                }
            }
        }
        checks.push(tracker.finish());
    }

    // Averaged-input mode integrates the same curve the quadrature does; a
    // tenth of the trajectory budget keeps the default run affordable since
    // these rebuild the pipeline tables per trajectory.
    let mut averaged = Tracker::new("mc-average-mode", 5.0);
    for id in ProtocolId::constructive() {
        let config = TrajectoryConfig {
            seed,
            n_trajectories: (trajectories / 10).max(1_000),
            protocol: id,
            x: None,
            r: 0.5,
            q: 0.25,
        };
        let est = run_trajectories(&config)?;
        let truth = average_fidelity_with_nodes(id, 0.5, 0.25, nodes)?;
        averaged.dev(sigma(&est["average_fidelity"], truth));
    }
    checks.push(averaged.finish());

    let mut determinism = Tracker::new("mc-determinism", 0.0);
    for config in &replay {
        let first = run_trajectories(config)?;
        let second = run_trajectories(config)?;
        for (key, est) in &first {
            let again = &second[key];
            let identical = est.mean.to_bits() == again.mean.to_bits()
                && est.standard_error.to_bits() == again.standard_error.to_bits()
                && est.n_accepted == again.n_accepted
                && est.n_total == again.n_total;
            determinism.dev(if identical { 0.0 } else { 1.0 });
        }
    }
    checks.push(determinism.finish());

    Ok(checks)
}
