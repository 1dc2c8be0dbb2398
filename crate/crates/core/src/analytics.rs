//! Closed-form expressions, Bloch-average quadrature and parameter sweeps.
//!
//! This module is the algebraic mirror of [`crate::protocols`]: every formula
//! here was derived independently of the constructive pipelines, and the test
//! suites hold the two routes to each other at tight tolerances.
//!
//! Input averaging convention: fidelities are averaged over the input family
//! `alpha|0> + sqrt(1 - alpha^2)|1>` with `alpha` drawn uniformly from
//! `[0, 1]` (equivalently `x = |alpha|^2` carries density `1/(2 sqrt(x))`).
//! All averaged closed forms below are stated in that measure, and the
//! Gauss-Legendre rule integrates over `alpha` directly. Input phases do not
//! enter any reported quantity; the Monte Carlo probe in [`crate::mc`]
//! verifies that.

use rayon::prelude::*;
use serde::Serialize;

use crate::protocols::{run_protocol, ProtocolId};
use crate::{Complex64, Error, Result};

/// Highest node count the quadrature constructor accepts. Doubling past this
/// adds nothing at f64 precision for the integrands in this crate.
pub const MAX_QUADRATURE_NODES: usize = 512;

/// Node count used when callers do not choose one. Convergence tests show
/// node-doubling residuals far below 1e-10 at this size.
pub const DEFAULT_QUADRATURE_NODES: usize = 64;

/// Gauss-Legendre rule on `[0, 1]`.
///
/// Nodes are roots of the Legendre polynomial found by Newton iteration from
/// the Chebyshev initial guess; weights follow from the derivative. Both are
/// mapped affinely from `[-1, 1]`.
#[derive(Debug, Clone, Serialize)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds an `n`-node rule.
    ///
    /// # Errors
    ///
    /// [`Error::InvalidParameter`] for `n = 0` or `n >` [`MAX_QUADRATURE_NODES`].
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_QUADRATURE_NODES {
            return Err(Error::InvalidParameter(format!(
                "quadrature needs 1..={MAX_QUADRATURE_NODES} nodes, got {n}"
            )));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            // Chebyshev guess for the i-th root (descending), then Newton.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let step = p / d;
                x -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // Map from [-1, 1] to [0, 1]; store ascending.
            nodes[n - 1 - i] = 0.5 * (x + 1.0);
            weights[n - 1 - i] = 0.5 * w;
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Ascending nodes in `(0, 1)`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integrates `f` over `[0, 1]`.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Legendre polynomial `P_n` and its derivative at `x`, by the three-term
/// recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = (n as f64) * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Point at which a closed form is evaluated: `x = |alpha|^2` for the input,
/// `r` the damping probability, `q` the filter strength (ignored by forms
/// that have none).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormParams {
    pub x: f64,
    pub r: f64,
    pub q: f64,
}

impl ClosedFormParams {
    pub fn new(x: f64, r: f64, q: f64) -> Self {
        Self { x, r, q }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("x", self.x), ("r", self.r), ("q", self.q)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Evaluates a named closed-form quantity.
///
/// Identifiers are `family/quantity` with an optional `/i` branch index
/// (1-based, in measurement-basis order):
///
/// | family | quantities |
/// |---|---|
/// | `tp-ew` | `eam`, `branch-prob/i`, `branch-keep/i`, `branch-fidelity/i`, `total-success` |
/// | `ctp-bell` | same five |
/// | `ctp-w` | `eam` |
/// | `original` | `branch-fidelity/i`, `average-fidelity` |
/// | `ctp-w-original` | `average-fidelity` |
/// | `ctp-bell-original` | `average-fidelity` |
/// | `mr` | `total-success` |
///
/// `branch-keep` is the joint probability that the branch occurs and the
/// receiver's filter clicks; `total-success` sums it over branches. The W and
/// Bell variants of the protected protocol share one family (`tp-ew`) because
/// every indicator coincides. Averaged forms integrate over the input measure
/// described at module level. Branch fidelities at points where the branch is
/// structurally dead evaluate to NaN.
///
/// # Errors
///
/// [`Error::UnknownQuantity`] for an unrecognized identifier,
/// [`Error::InvalidParameter`] for parameters outside `[0, 1]`.
pub fn closed_form(id: &str, params: ClosedFormParams) -> Result<f64> {
    params.validate()?;
    let ClosedFormParams { x, r, q } = params;
    let y = 1.0 - x;
    let parts: Vec<&str> = id.split('/').collect();

    let value = match parts.as_slice() {
        ["tp-ew", "eam"] => 1.0 - r / 2.0,
        ["tp-ew", "branch-prob", i] => {
            // Outcomes 1, 2 leave Bob holding the damped component weighted
            // by beta; 3, 4 the alpha-weighted one.
            if low_pair(i)? {
                (1.0 - y * r) / (4.0 - 2.0 * r)
            } else {
                (1.0 - x * r) / (4.0 - 2.0 * r)
            }
        }
        ["tp-ew", "branch-keep", i] => {
            if low_pair(i)? {
                (x * (1.0 - q) + y * (1.0 - r)) / (4.0 - 2.0 * r)
            } else {
                (y * (1.0 - q) + x * (1.0 - r)) / (4.0 - 2.0 * r)
            }
        }
        ["tp-ew", "total-success"] => 1.0 - q / (2.0 - r),
        ["tp-ew", "branch-fidelity", i] => {
            let root = ((1.0 - q) * (1.0 - r)).sqrt();
            let (num, den) = if low_pair(i)? {
                (
                    y * y * (1.0 - r) + x * x * (1.0 - q) + 2.0 * x * y * root,
                    x * (1.0 - q) + y * (1.0 - r),
                )
            } else {
                (
                    x * x * (1.0 - r) + y * y * (1.0 - q) + 2.0 * x * y * root,
                    y * (1.0 - q) + x * (1.0 - r),
                )
            };
            num / den
        }

        ["original", "branch-fidelity", i] => {
            let cross = x * y * (r + 2.0 * (1.0 - r).sqrt());
            if low_pair(i)? {
                x * x + y * y * (1.0 - r) + cross
            } else {
                y * y + x * x * (1.0 - r) + cross
            }
        }
        ["original", "average-fidelity"] => (8.0 * (1.0 - r).sqrt() + 22.0 - 7.0 * r) / 30.0,

        ["mr", "total-success"] => (2.0 - r - r * r) / 2.0,

        ["ctp-w", "eam"] => 1.0 - r,
        ["ctp-w-original", "average-fidelity"] => 1.0 - 11.0 * r / 15.0,

        ["ctp-bell", "eam"] => (1.0 + (1.0 - r) * (1.0 - r)) / 2.0,
        ["ctp-bell", "branch-prob", i] => {
            let den = 2.0 * (r * r - 2.0 * r + 2.0);
            if low_pair(i)? {
                (y * r * r - 2.0 * y * r + 1.0) / den
            } else {
                (x * r * r - 2.0 * x * r + 1.0) / den
            }
        }
        ["ctp-bell", "branch-keep", i] => {
            let den = 2.0 * (r * r - 2.0 * r + 2.0);
            let (kq, kr) = ((1.0 - q) * (1.0 - q), (1.0 - r) * (1.0 - r));
            if low_pair(i)? {
                (x * kq + y * kr) / den
            } else {
                (y * kq + x * kr) / den
            }
        }
        ["ctp-bell", "total-success"] => 1.0 - (2.0 * q - q * q) / (r * r - 2.0 * r + 2.0),
        ["ctp-bell", "branch-fidelity", i] => {
            let (num, den) = if low_pair(i)? {
                (
                    (x * q + y * r - 1.0) * (x * q + y * r - 1.0),
                    x * (q * q - 2.0 * q) + y * (r * r - 2.0 * r) + 1.0,
                )
            } else {
                (
                    (y * q + x * r - 1.0) * (y * q + x * r - 1.0),
                    y * (q * q - 2.0 * q) + x * (r * r - 2.0 * r) + 1.0,
                )
            };
            num / den
        }
        ["ctp-bell-original", "average-fidelity"] => {
            1.0 - 11.0 * r / 15.0 + 7.0 * r * r / 15.0
        }

        _ => return Err(Error::UnknownQuantity(id.to_string())),
    };
    Ok(value)
}

/// True for branches 1 and 2, false for 3 and 4.
fn low_pair(index: &str) -> Result<bool> {
    match index {
        "1" | "2" => Ok(true),
        "3" | "4" => Ok(false),
        other => Err(Error::UnknownQuantity(format!("branch index {other}"))),
    }
}

/// Fidelity of reversal-protected unprotected teleportation at fixed input,
/// averaged over Alice outcomes. The reversal strength is tied to `r` by
/// optimality, so there is no free filter parameter.
fn mr_fidelity_at(x: f64, r: f64) -> f64 {
    let cross = 1.0 + r * x * (1.0 - x);
    cross / (2.0 * (1.0 + r * (1.0 - x))) + cross / (2.0 * (1.0 + r * x))
}

/// Bloch-averaged fidelity at the default node count.
///
/// See [`average_fidelity_with_nodes`].
pub fn average_fidelity(protocol: ProtocolId, r: f64, q: f64) -> Result<f64> {
    average_fidelity_with_nodes(protocol, r, q, DEFAULT_QUADRATURE_NODES)
}

/// Bloch-averaged teleportation fidelity, `int_0^1 sum_i P_i Fid_i d alpha`.
///
/// Constructive protocols are averaged by running the full pipeline at every
/// quadrature node; `Mr` integrates its closed-form fixed-input fidelity.
/// Returns NaN when the protocol is degenerate at these parameters (no
/// resource ever survives distribution), mirroring the constructive reports.
///
/// # Errors
///
/// Parameter-validation errors from the underlying pipeline or quadrature
/// constructor.
pub fn average_fidelity_with_nodes(
    protocol: ProtocolId,
    r: f64,
    q: f64,
    nodes: usize,
) -> Result<f64> {
    let quad = GaussLegendre::new(nodes)?;
    if protocol == ProtocolId::Mr {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::InvalidParameter(format!(
                "r must lie in [0, 1], got {r}"
            )));
        }
        return Ok(quad.integrate(|a| mr_fidelity_at(a * a, r)));
    }
    let mut acc = 0.0;
    for (&a, &w) in quad.nodes().iter().zip(quad.weights()) {
        let report = run_at_alpha(protocol, a, r, q)?;
        if report.degenerate {
            return Ok(f64::NAN);
        }
        acc += w * report.mean_fidelity_for_input;
    }
    Ok(acc)
}

fn run_at_alpha(protocol: ProtocolId, a: f64, r: f64, q: f64) -> Result<crate::ProtocolReport> {
    let alpha = Complex64::new(a, 0.0);
    let beta = Complex64::new((1.0 - a * a).max(0.0).sqrt(), 0.0);
    run_protocol(protocol, alpha, beta, r, q)
}

/// Rectangular parameter grid for [`sweep`].
#[derive(Debug, Clone, Serialize)]
pub struct SweepGrid {
    pub protocol: ProtocolId,
    pub r_values: Vec<f64>,
    pub q_values: Vec<f64>,
    /// Input-average sampling points as `x = alpha^2`, fixed by the
    /// quadrature rule; recorded so datasets carry their own convention.
    pub x_values: Vec<f64>,
    nodes: usize,
}

impl SweepGrid {
    /// Validates grid axes (each inside `[0, 1]`, strictly increasing,
    /// nonempty) and fixes the quadrature resolution.
    ///
    /// # Errors
    ///
    /// [`Error::InvalidParameter`] for malformed axes or node counts.
    pub fn new(
        protocol: ProtocolId,
        r_values: Vec<f64>,
        q_values: Vec<f64>,
        nodes: usize,
    ) -> Result<Self> {
        validate_axis("r", &r_values)?;
        validate_axis("q", &q_values)?;
        let quad = GaussLegendre::new(nodes)?;
        let x_values = quad.nodes().iter().map(|&a| a * a).collect();
        Ok(Self {
            protocol,
            r_values,
            q_values,
            x_values,
            nodes,
        })
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }
}

fn validate_axis(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidParameter(format!("{name} axis is empty")));
    }
    if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidParameter(format!(
            "{name} axis must lie inside [0, 1]"
        )));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(format!(
            "{name} axis must be strictly increasing"
        )));
    }
    Ok(())
}

/// How a sweep was produced; serialized with every dataset.
#[derive(Debug, Clone, Serialize)]
pub struct SweepMetadata {
    pub quadrature: &'static str,
    pub nodes: usize,
    /// Averaging measure over inputs: uniform in the real amplitude alpha.
    pub input_measure: &'static str,
    pub package_version: &'static str,
}

impl SweepMetadata {
    pub fn new(nodes: usize) -> Self {
        Self {
            quadrature: "gauss-legendre",
            nodes,
            input_measure: "uniform-alpha",
            package_version: env!("CARGO_PKG_VERSION"),
        }
    }
}

/// Dense sweep output, row-major over `(r, q)`.
#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub grid: SweepGrid,
    /// Bloch-averaged fidelity per cell; NaN on degenerate cells.
    pub avg_fidelity: Vec<Vec<f64>>,
    /// Filter success summed over branches, conditional on distribution.
    pub conditional_success: Vec<Vec<f64>>,
    /// `eam_probability * conditional_success`.
    pub unconditional_success: Vec<Vec<f64>>,
    /// True where the protocol cannot run (e.g. full damping with all-qubit
    /// post-selection) or the average is undefined.
    pub degenerate: Vec<Vec<bool>>,
    pub metadata: SweepMetadata,
}

/// One sweep cell in long form, as written to tabular output.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepRow {
    pub protocol: ProtocolId,
    pub r: f64,
    pub q: f64,
    pub avg_fidelity: f64,
    pub conditional_success: f64,
    pub unconditional_success: f64,
    pub degenerate: bool,
}

impl SweepResult {
    /// Flattens to long form, r-major then q, matching the fixed column
    /// order of the tabular writers.
    pub fn rows(&self) -> Vec<SweepRow> {
        let mut rows = Vec::with_capacity(self.grid.r_values.len() * self.grid.q_values.len());
        for (i, &r) in self.grid.r_values.iter().enumerate() {
            for (j, &q) in self.grid.q_values.iter().enumerate() {
                rows.push(SweepRow {
                    protocol: self.grid.protocol,
                    r,
                    q,
                    avg_fidelity: self.avg_fidelity[i][j],
                    conditional_success: self.conditional_success[i][j],
                    unconditional_success: self.unconditional_success[i][j],
                    degenerate: self.degenerate[i][j],
                });
            }
        }
        rows
    }
}

/// Evaluates averaged fidelity and success over the whole grid.
///
/// Cells are independent and are computed in parallel; results are assembled
/// in grid order, so output is identical for any worker count.
pub fn sweep(grid: &SweepGrid) -> Result<SweepResult> {
    let quad = GaussLegendre::new(grid.nodes())?;
    let cells: Vec<Result<Vec<Cell>>> = grid
        .r_values
        .par_iter()
        .map(|&r| {
            grid.q_values
                .iter()
                .map(|&q| cell(grid.protocol, r, q, &quad))
                .collect()
        })
        .collect();

    let mut avg_fidelity = Vec::with_capacity(cells.len());
    let mut conditional = Vec::with_capacity(cells.len());
    let mut unconditional = Vec::with_capacity(cells.len());
    let mut degenerate = Vec::with_capacity(cells.len());
    for row in cells {
        let row = row?;
        avg_fidelity.push(row.iter().map(|c| c.avg_fidelity).collect());
        conditional.push(row.iter().map(|c| c.conditional).collect());
        unconditional.push(row.iter().map(|c| c.unconditional).collect());
        degenerate.push(row.iter().map(|c| c.degenerate).collect());
    }
    Ok(SweepResult {
        grid: grid.clone(),
        avg_fidelity,
        conditional_success: conditional,
        unconditional_success: unconditional,
        degenerate,
        metadata: SweepMetadata::new(grid.nodes()),
    })
}

/// Sweeps the matched-strength ridge `q = r`, where the protected protocols
/// teleport exactly.
pub fn diagonal_sweep(
    protocol: ProtocolId,
    r_values: &[f64],
    nodes: usize,
) -> Result<Vec<SweepRow>> {
    validate_axis("r", r_values)?;
    let quad = GaussLegendre::new(nodes)?;
    r_values
        .par_iter()
        .map(|&r| {
            let c = cell(protocol, r, r, &quad)?;
            Ok(SweepRow {
                protocol,
                r,
                q: r,
                avg_fidelity: c.avg_fidelity,
                conditional_success: c.conditional,
                unconditional_success: c.unconditional,
                degenerate: c.degenerate,
            })
        })
        .collect()
}

struct Cell {
    avg_fidelity: f64,
    conditional: f64,
    unconditional: f64,
    degenerate: bool,
}

fn cell(protocol: ProtocolId, r: f64, q: f64, quad: &GaussLegendre) -> Result<Cell> {
    if protocol == ProtocolId::Mr {
        let fid = quad.integrate(|a| mr_fidelity_at(a * a, r));
        let success = closed_form("mr/total-success", ClosedFormParams::new(0.0, r, 0.0))?;
        return Ok(Cell {
            avg_fidelity: fid,
            conditional: success,
            unconditional: success,
            degenerate: false,
        });
    }

    let mut fid = 0.0;
    let mut conditional = 0.0;
    let mut unconditional = 0.0;
    for (&a, &w) in quad.nodes().iter().zip(quad.weights()) {
        let report = run_at_alpha(protocol, a, r, q)?;
        if report.degenerate {
            return Ok(Cell {
                avg_fidelity: f64::NAN,
                conditional: 0.0,
                unconditional: 0.0,
                degenerate: true,
            });
        }
        fid += w * report.mean_fidelity_for_input;
        conditional += w * report.conditional_success;
        unconditional += w * report.unconditional_success;
    }
    Ok(Cell {
        avg_fidelity: fid,
        conditional,
        unconditional,
        degenerate: fid.is_nan(),
    })
}

/// Recoverable-probability landscape of the damping channel across its
/// one-parameter family of Kraus decompositions.
#[derive(Debug, Clone, Serialize)]
pub struct DecompositionSweep {
    pub r_values: Vec<f64>,
    pub delta_values: Vec<f64>,
    /// `recoverable[i][j]` for `r_values[i]`, `delta_values[j]`.
    pub recoverable: Vec<Vec<f64>>,
}

impl DecompositionSweep {
    /// Largest recoverable probability in each `r` row.
    pub fn row_maxima(&self) -> Vec<f64> {
        self.recoverable
            .iter()
            .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }
}

/// Computes `sum_i N_i^2` over the rotated decomposition
/// `F = rotation(delta) . (e0, e1)` of amplitude damping, for every grid
/// point. The physical content: only the angles where one branch reduces to
/// plain `e0` leave the full `1 - r` recoverable.
///
/// # Errors
///
/// [`Error::InvalidParameter`] for `r` outside `[0, 1]` or empty axes;
/// `delta` is unrestricted.
pub fn decomposition_sweep(r_values: &[f64], delta_values: &[f64]) -> Result<DecompositionSweep> {
    if r_values.is_empty() || delta_values.is_empty() {
        return Err(Error::InvalidParameter("decomposition grid axes must be nonempty".into()));
    }
    if r_values.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(Error::InvalidParameter("r axis must lie inside [0, 1]".into()));
    }
    if delta_values.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidParameter("delta axis must be finite".into()));
    }

    let recoverable = r_values
        .par_iter()
        .map(|&r| {
            let base = crate::channels::KrausChannel::adc(r)?;
            delta_values
                .iter()
                .map(|&d| {
                    base.transform(&crate::channels::rotation_family(d))?
                        .recoverable_probability()
                })
                .collect()
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;

    Ok(DecompositionSweep {
        r_values: r_values.to_vec(),
        delta_values: delta_values.to_vec(),
        recoverable,
    })
}
