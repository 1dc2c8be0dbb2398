//! `tpsim`: protocol reports, parameter-sweep datasets, decomposition
//! landscapes, and validation gates from the command line.
//!
//! Every file output is deterministic for a fixed command line and ships with
//! a checksummed manifest sidecar. Exit codes: 0 success, 1 invalid input,
//! 2 validation failure, 3 I/O trouble.

mod grids;
mod output;
mod validate;

use std::f64::consts::{PI, TAU};
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use output::{emit, fmt_float, to_csv, to_json, Manifest, OutputFormat, SCHEMA_VERSION};
use tpsim_core::analytics::{
    decomposition_sweep, diagonal_sweep, sweep, SweepGrid, SweepMetadata,
};
use tpsim_core::channels::{rotation_family_phased, KrausChannel};
use tpsim_core::mc::SplitMix64;
use tpsim_core::protocols::{run_protocol, ProtocolId};

/// Failure classes, one per nonzero exit code.
#[derive(Debug)]
pub enum Failure {
    /// Rejected parameters, grids, or config: exit 1.
    Input(String),
    /// A validation suite found a violated claim: exit 2.
    Validation(String),
    /// Filesystem or pipe trouble: exit 3.
    Io(String),
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Self::Input(_) => 1,
            Self::Validation(_) => 2,
            Self::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Input(m) | Self::Validation(m) | Self::Io(m) => m,
        }
    }
}

impl From<tpsim_core::Error> for Failure {
    fn from(e: tpsim_core::Error) -> Self {
        Self::Input(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "tpsim",
    version,
    about = "Teleportation-through-damping simulator: reports, sweeps, validation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: GlobalOpts,
}

#[derive(Debug, Args)]
struct GlobalOpts {
    /// Write the dataset here (a `.manifest.json` sidecar is added) instead
    /// of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Dataset format.
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    /// Base seed for every stochastic component.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps and trajectory batches (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Gauss-Legendre node count for input averaging.
    #[arg(long, global = true)]
    nodes: Option<usize>,
    /// JSON config file supplying defaults; explicit flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one protocol at a fixed input and emit the full branch report.
    Protocol(ProtocolArgs),
    /// Average fidelity and success probabilities over a parameter grid.
    Sweep(SweepArgs),
    /// Recoverable probability across the damping channel's decompositions.
    Decomposition(DecompositionArgs),
    /// Machine-checkable claim suites; exits 2 if any check fails.
    #[command(subcommand)]
    Validate(ValidateSuite),
}

#[derive(Debug, Args)]
struct ProtocolArgs {
    /// One of: tp-ew-w, tp-ew-bell, ctp-w, ctp-bell, original-w,
    /// original-ctp-w, original-ctp-bell.
    protocol: String,
    /// Damping probability, `1 - exp(-Gamma t)`.
    #[arg(long)]
    r: f64,
    /// Weak-measurement strength.
    #[arg(long, default_value_t = 0.0)]
    q: f64,
    /// Input population `|alpha|^2`; shorthand for a real amplitude pair.
    #[arg(long, conflicts_with_all = ["alpha", "beta"])]
    x: Option<f64>,
    /// Input amplitude alpha as `re,im`.
    #[arg(long, requires = "beta")]
    alpha: Option<String>,
    /// Input amplitude beta as `re,im`.
    #[arg(long, requires = "alpha")]
    beta: Option<String>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Any protocol id, including `mr`.
    protocol: String,
    /// Damping grid, `start:step:end` (inclusive) or a single value.
    #[arg(long)]
    r_grid: Option<String>,
    /// Weak-measurement grid, same syntax.
    #[arg(long, conflicts_with = "diagonal")]
    q_grid: Option<String>,
    /// Sweep the matched line q = r instead of a rectangle.
    #[arg(long)]
    diagonal: bool,
}

#[derive(Debug, Args)]
struct DecompositionArgs {
    /// Damping grid, `start:step:end` (inclusive) or a single value.
    #[arg(long)]
    r_grid: Option<String>,
    /// Decomposition-angle grid in radians (default covers a full turn in
    /// pi/200 steps).
    #[arg(long)]
    delta_grid: Option<String>,
    /// Per r row, also try this many randomly phased rotations and report the
    /// best on stderr. A falsification probe; the dataset is unchanged.
    #[arg(long)]
    probe: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum ValidateSuite {
    /// Closed forms, equivalences, orderings, quadrature convergence.
    Analytic(AnalyticArgs),
    /// Seeded trajectory estimates against the constructive route.
    Mc(McArgs),
}

#[derive(Debug, Args)]
struct AnalyticArgs {
    /// Offset one baseline by 1e-6 (negative control; the run must exit 2).
    #[arg(long, hide = true)]
    perturb: bool,
}

#[derive(Debug, Args)]
struct McArgs {
    /// Trajectories per parameter point.
    #[arg(long, default_value_t = 1_000_000)]
    n: u64,
}

/// Defaults supplied by `--config`; any explicit flag overrides its field.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    format: Option<OutputFormat>,
    seed: Option<u64>,
    workers: Option<usize>,
    nodes: Option<usize>,
    r_grid: Option<String>,
    q_grid: Option<String>,
    delta_grid: Option<String>,
}

struct Settings {
    out: Option<PathBuf>,
    format: OutputFormat,
    seed: u64,
    workers: Option<usize>,
    nodes: usize,
    r_grid: String,
    q_grid: String,
    delta_grid: Option<String>,
}

const DEFAULT_GRID: &str = "0:0.05:0.95";
const DEFAULT_NODES: usize = 64;

/// Ties to the row maximum within this margin count as argmax; the
/// landscape's quarter-turn peaks are exactly degenerate with each other.
const ARGMAX_TIE: f64 = 1e-12;

fn resolve(global: &GlobalOpts) -> Result<Settings, Failure> {
    let file: ConfigFile = match &global.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Failure::Input(format!("bad config {}: {e}", path.display())))?
        }
        None => ConfigFile::default(),
    };
    Ok(Settings {
        out: global.out.clone(),
        format: global.format.or(file.format).unwrap_or(OutputFormat::Csv),
        seed: global.seed.or(file.seed).unwrap_or(0),
        workers: global.workers.or(file.workers),
        nodes: global.nodes.or(file.nodes).unwrap_or(DEFAULT_NODES),
        r_grid: file.r_grid.unwrap_or_else(|| DEFAULT_GRID.to_string()),
        q_grid: file.q_grid.unwrap_or_else(|| DEFAULT_GRID.to_string()),
        delta_grid: file.delta_grid,
    })
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(failure) = run(&cli) {
        eprintln!("error: {}", failure.message());
        std::process::exit(failure.exit_code());
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let settings = resolve(&cli.global)?;
    if let Some(workers) = settings.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| Failure::Input(format!("cannot size worker pool: {e}")))?;
    }
    match &cli.command {
        Command::Protocol(args) => cmd_protocol(args, &settings),
        Command::Sweep(args) => cmd_sweep(args, &settings),
        Command::Decomposition(args) => cmd_decomposition(args, &settings),
        Command::Validate(suite) => cmd_validate(suite, &settings),
    }
}

fn manifest(settings: &Settings, parameters: serde_json::Value) -> Manifest {
    Manifest {
        schema_version: SCHEMA_VERSION,
        command_line: std::env::args().collect(),
        parameters,
        seed: settings.seed,
        nodes: settings.nodes,
        workers: settings.workers,
        package_version: env!("CARGO_PKG_VERSION"),
        outputs: Vec::new(),
    }
}

fn parse_protocol(text: &str) -> Result<ProtocolId, Failure> {
    text.parse().map_err(|_| {
        Failure::Input(format!(
            "unknown protocol `{text}`; valid ids: {}",
            ProtocolId::all().map(|p| p.as_str()).join(", ")
        ))
    })
}

fn parse_complex(flag: &str, text: &str) -> Result<Complex64, Failure> {
    let parts: Vec<&str> = text.split(',').collect();
    let err = || Failure::Input(format!("{flag} expects `re,im`, got `{text}`"));
    if parts.len() != 2 {
        return Err(err());
    }
    let re: f64 = parts[0].trim().parse().map_err(|_| err())?;
    let im: f64 = parts[1].trim().parse().map_err(|_| err())?;
    Ok(Complex64::new(re, im))
}

fn input_amplitudes(args: &ProtocolArgs) -> Result<(Complex64, Complex64), Failure> {
    match (args.x, &args.alpha, &args.beta) {
        (Some(x), None, None) => {
            if !(0.0..=1.0).contains(&x) {
                return Err(Failure::Input(format!("--x must lie in [0, 1], got {x}")));
            }
            Ok((
                Complex64::new(x.sqrt(), 0.0),
                Complex64::new((1.0 - x).sqrt(), 0.0),
            ))
        }
        (None, Some(a), Some(b)) => {
            Ok((parse_complex("--alpha", a)?, parse_complex("--beta", b)?))
        }
        _ => Err(Failure::Input(
            "provide --x, or both --alpha and --beta".into(),
        )),
    }
}

fn cmd_protocol(args: &ProtocolArgs, settings: &Settings) -> Result<(), Failure> {
    let id = parse_protocol(&args.protocol)?;
    if id == ProtocolId::Mr {
        return Err(Failure::Input(
            "mr has closed forms only, no constructive pipeline; use `sweep mr`".into(),
        ));
    }
    let (alpha, beta) = input_amplitudes(args)?;
    if args.q != 0.0 && !id.uses_wm() {
        eprintln!("note: {id} applies no weak measurement; --q is ignored");
    }
    let report = run_protocol(id, alpha, beta, args.r, args.q)?;
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    if settings.format == OutputFormat::Csv {
        eprintln!("note: protocol reports are hierarchical; emitting json");
    }
    let payload = json!({
        "schema_version": SCHEMA_VERSION,
        "kind": "protocol-report",
        "report": report,
    });
    let bytes = to_json(&payload)?;
    let parameters = json!({
        "protocol": id,
        "alpha": [alpha.re, alpha.im],
        "beta": [beta.re, beta.im],
        "r": args.r,
        "q": args.q,
    });
    emit(settings.out.as_ref(), &bytes, manifest(settings, parameters))?;
    eprintln!(
        "{id}: eam {:.6} conditional {:.6} unconditional {:.6} mean fidelity {:.6}{}",
        report.eam_probability,
        report.conditional_success,
        report.unconditional_success,
        report.mean_fidelity_for_input,
        if report.degenerate { " (degenerate)" } else { "" },
    );
    Ok(())
}

fn parse_axis(flag: Option<&str>, fallback: &str) -> Result<Vec<f64>, Failure> {
    grids::parse_grid(flag.unwrap_or(fallback)).map_err(Failure::Input)
}

fn cmd_sweep(args: &SweepArgs, settings: &Settings) -> Result<(), Failure> {
    let id = parse_protocol(&args.protocol)?;
    let r_axis = parse_axis(args.r_grid.as_deref(), &settings.r_grid)?;
    let mut parameters = json!({
        "protocol": id,
        "r_values": r_axis,
        "nodes": settings.nodes,
    });
    let rows = if args.diagonal {
        parameters["q_values"] = json!("matched: q = r");
        diagonal_sweep(id, &r_axis, settings.nodes)?
    } else {
        let q_axis = parse_axis(args.q_grid.as_deref(), &settings.q_grid)?;
        parameters["q_values"] = json!(q_axis);
        let grid = SweepGrid::new(id, r_axis, q_axis, settings.nodes)?;
        sweep(&grid)?.rows()
    };

    let bytes = match settings.format {
        OutputFormat::Csv => {
            let header = [
                "protocol",
                "r",
                "q",
                "avg_fidelity",
                "conditional_success",
                "unconditional_success",
            ];
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|row| {
                    vec![
                        row.protocol.as_str().to_string(),
                        fmt_float(row.r),
                        fmt_float(row.q),
                        fmt_float(row.avg_fidelity),
                        fmt_float(row.conditional_success),
                        fmt_float(row.unconditional_success),
                    ]
                })
                .collect();
            to_csv(&header, &table)?
        }
        OutputFormat::Json => to_json(&json!({
            "schema_version": SCHEMA_VERSION,
            "kind": "sweep",
            "metadata": SweepMetadata::new(settings.nodes),
            "rows": rows,
        }))?,
    };
    emit(settings.out.as_ref(), &bytes, manifest(settings, parameters))?;
    eprintln!("sweep {id}: {} rows", rows.len());
    Ok(())
}

#[derive(Debug, Serialize)]
struct DecompositionRow {
    r: f64,
    delta: f64,
    recoverable_probability: f64,
    is_row_argmax: bool,
}

fn cmd_decomposition(args: &DecompositionArgs, settings: &Settings) -> Result<(), Failure> {
    let r_axis = parse_axis(args.r_grid.as_deref(), &settings.r_grid)?;
    let deltas = match args.delta_grid.as_deref().or(settings.delta_grid.as_deref()) {
        Some(spec) => grids::parse_grid(spec).map_err(Failure::Input)?,
        None => (0..=400).map(|j| j as f64 * PI / 200.0).collect(),
    };
    let landscape = decomposition_sweep(&r_axis, &deltas)?;
    let maxima = landscape.row_maxima();
    let mut rows = Vec::with_capacity(r_axis.len() * deltas.len());
    for (i, &r) in landscape.r_values.iter().enumerate() {
        for (j, &delta) in landscape.delta_values.iter().enumerate() {
            let value = landscape.recoverable[i][j];
            rows.push(DecompositionRow {
                r,
                delta,
                recoverable_probability: value,
                is_row_argmax: (value - maxima[i]).abs() <= ARGMAX_TIE,
            });
        }
    }

    let bytes = match settings.format {
        OutputFormat::Csv => {
            let header = ["r", "delta", "recoverable_probability", "is_row_argmax"];
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|row| {
                    vec![
                        fmt_float(row.r),
                        fmt_float(row.delta),
                        fmt_float(row.recoverable_probability),
                        row.is_row_argmax.to_string(),
                    ]
                })
                .collect();
            to_csv(&header, &table)?
        }
        OutputFormat::Json => to_json(&json!({
            "schema_version": SCHEMA_VERSION,
            "kind": "decomposition",
            "rows": rows,
            "row_maxima": maxima,
        }))?,
    };
    let parameters = json!({
        "r_values": landscape.r_values,
        "delta_count": landscape.delta_values.len(),
    });
    emit(settings.out.as_ref(), &bytes, manifest(settings, parameters))?;

    if let Some(count) = args.probe {
        let mut rng = SplitMix64::new(settings.seed);
        for (i, &r) in landscape.r_values.iter().enumerate() {
            let base = KrausChannel::adc(r)?;
            let mut best = f64::NEG_INFINITY;
            for _ in 0..count {
                let v = rotation_family_phased(
                    rng.next_f64() * TAU,
                    rng.next_f64() * TAU,
                    rng.next_f64() * TAU,
                    rng.next_f64() * TAU,
                );
                best = best.max(base.transform(&v)?.recoverable_probability()?);
            }
            eprintln!(
                "probe r={r:.6}: best of {count} random decompositions {best:.6}, grid maximum {:.6}",
                maxima[i]
            );
        }
    }
    eprintln!("decomposition: {} rows", rows.len());
    Ok(())
}

fn cmd_validate(suite: &ValidateSuite, settings: &Settings) -> Result<(), Failure> {
    let (name, trajectories, checks) = match suite {
        ValidateSuite::Analytic(args) => (
            "analytic",
            None,
            validate::analytic(settings.nodes, args.perturb)?,
        ),
        ValidateSuite::Mc(args) => (
            "mc",
            Some(args.n),
            validate::mc(settings.seed, args.n, settings.nodes)?,
        ),
    };
    for check in &checks {
        eprintln!(
            "{} {:<34} max dev {:>10} (tol {:.0e}, {} cases)",
            if check.passed { "   ok" } else { " FAIL" },
            check.name,
            format!("{:.3e}", check.max_deviation),
            check.tolerance,
            check.cases,
        );
    }
    if settings.format == OutputFormat::Csv {
        eprintln!("note: validation reports are hierarchical; emitting json");
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    let payload = json!({
        "schema_version": SCHEMA_VERSION,
        "kind": "validation",
        "suite": name,
        "seed": settings.seed,
        "nodes": settings.nodes,
        "trajectories": trajectories,
        "passed": failed == 0,
        "checks": &checks,
    });
    let bytes = to_json(&payload)?;
    let parameters = json!({ "suite": name, "trajectories": trajectories });
    emit(settings.out.as_ref(), &bytes, manifest(settings, parameters))?;
    if failed > 0 {
        return Err(Failure::Validation(format!(
            "{failed} of {} checks failed",
            checks.len()
        )));
    }
    eprintln!("validate {name}: all {} checks passed", checks.len());
    Ok(())
}
