//! `oqsim`: batch front door for the open-system dynamics toolkit.
//!
//! Subcommands: `simulate` (trajectory CSVs + summary JSON), `criterion`
//! (weak-coupling report JSON + visualization CSVs), `compare`
//! (trace-distance CSV between two trajectory files), and `fit-bath`
//! (exponential-sum fit of a model's bath response).
//!
//! Exit codes: 0 success, 2 usage/config error, 3 data mismatch,
//! 4 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use oqsim_core::bath::fit_bath;
use oqsim_core::criterion::{evaluate_criterion, export_visualization};
use oqsim_core::error::Error;
use oqsim_core::generators::{
    physicality_check, propagate_pmat, propagate_tcl, Method, PropagationConfig, Trajectory,
};
use oqsim_core::heom::{build_hierarchy, converge_heom, propagate_heom, HeomConfig};
use oqsim_core::models::{
    fmo_configured, fmo_default, model_from_file, spin_boson_bundled, ModelSpec,
};
use oqsim_core::op::trace_distance;

const EXIT_USAGE: u8 = 2;
const EXIT_MISMATCH: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Parser)]
#[command(name = "oqsim", version, about = "Open quantum system dynamics and weak-coupling diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate the reduced state with one or more methods, writing one
    /// trajectory CSV per method plus a run summary JSON.
    Simulate(SimulateArgs),
    /// Evaluate the weak-coupling criteria and export the report and
    /// visualization data.
    Criterion(CriterionArgs),
    /// Trace distance between two trajectory CSVs on the same grid.
    Compare(CompareArgs),
    /// Fit a model's bath response to sums of decaying exponentials.
    FitBath(FitBathArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Model: a JSON file path, or a preset: `spin_boson[:eta]`,
    /// `fmo[:temperature_K:gamma]`.
    #[arg(long)]
    model: Option<String>,
    /// Optional run-config JSON; explicit flags win over config entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated subset of tcl2,tcl4,pmat,heom.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    /// End of the time grid, ps.
    #[arg(long)]
    t_end: Option<f64>,
    /// Number of grid points (≥ 2), including t = 0.
    #[arg(long)]
    points: Option<usize>,
    /// Hierarchy cut-off tier: an integer or `auto`.
    #[arg(long)]
    heom_nc: Option<String>,
    /// Successive-tier trace-distance tolerance for `--heom-nc auto`.
    #[arg(long)]
    heom_tol: Option<f64>,
    /// Also evaluate the weak-coupling criterion at `--horizon`.
    #[arg(long)]
    criterion: bool,
    /// Criterion horizon, ps.
    #[arg(long)]
    horizon: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CriterionArgs {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Criterion horizon, ps.
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// First trajectory CSV.
    a: PathBuf,
    /// Second trajectory CSV.
    b: PathBuf,
    /// Output CSV path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitBathArgs {
    /// Model whose spectral density and temperature define the response.
    #[arg(long)]
    model: String,
    /// Sampling horizon for the fit, ps.
    #[arg(long, default_value_t = 5.0)]
    t_max: f64,
    /// Number of uniform samples.
    #[arg(long, default_value_t = 240)]
    points: usize,
    /// Exponential terms for the real part.
    #[arg(long, default_value_t = 4)]
    nr: usize,
    /// Exponential terms for the imaginary part.
    #[arg(long, default_value_t = 4)]
    ni: usize,
    /// Output JSON path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Run-config file schema; every field optional, flags take precedence.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    model: Option<String>,
    methods: Option<Vec<String>>,
    grid: Option<GridConfig>,
    heom: Option<HeomFileConfig>,
    horizon: Option<f64>,
    out: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridConfig {
    t_end: Option<f64>,
    points: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeomFileConfig {
    /// Integer tier or "auto".
    n_c: Option<serde_json::Value>,
    tolerance: Option<f64>,
}

/// A CLI failure carrying its process exit code.
struct Failure {
    code: u8,
    message: String,
}

type CliResult<T> = std::result::Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: msg.into(),
    }
}

fn mismatch(msg: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_MISMATCH,
        message: msg.into(),
    }
}

fn from_core(e: Error) -> Failure {
    let code = match &e {
        Error::InvalidParameter(_) | Error::ModelFile(_) | Error::Io(_) | Error::Json(_) => {
            EXIT_USAGE
        }
        Error::DimensionMismatch { .. } | Error::NonSquare { .. } => EXIT_MISMATCH,
        _ => EXIT_NUMERICAL,
    };
    Failure {
        code,
        message: e.to_string(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Criterion(args) => cmd_criterion(args),
        Command::Compare(args) => cmd_compare(args),
        Command::FitBath(args) => cmd_fit_bath(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

// ---------------------------------------------------------------------------
// shared plumbing

fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| usage(format!("config {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| usage(format!("config {}: {e}", p.display())))
        }
    }
}

/// Resolves `--model`: preset names first, otherwise a model JSON path.
fn resolve_model(name: &str) -> CliResult<ModelSpec<f64>> {
    let parts: Vec<&str> = name.split(':').collect();
    match parts[0] {
        "spin_boson" => {
            let eta = match parts.len() {
                1 => 1.0,
                2 => parts[1]
                    .parse::<f64>()
                    .map_err(|_| usage(format!("bad spin_boson preset `{name}`")))?,
                _ => return Err(usage(format!("bad spin_boson preset `{name}`"))),
            };
            spin_boson_bundled(eta).map_err(from_core)
        }
        "fmo" => match parts.len() {
            1 => fmo_default().map_err(from_core),
            3 => {
                let t = parts[1]
                    .parse::<f64>()
                    .map_err(|_| usage(format!("bad fmo preset `{name}`")))?;
                let g = parts[2]
                    .parse::<f64>()
                    .map_err(|_| usage(format!("bad fmo preset `{name}`")))?;
                fmo_configured(t, g).map_err(from_core)
            }
            _ => Err(usage(format!(
                "fmo preset takes no arguments or `fmo:temperature_K:gamma`"
            ))),
        },
        _ => model_from_file(Path::new(name)).map_err(from_core),
    }
}

/// Locale-independent float formatting: shortest round-trip representation,
/// capped at 12 significant digits.
fn fmt_float(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let shortest = format!("{x}");
    let digits = shortest
        .chars()
        .filter(|c| c.is_ascii_digit())
        .count()
        .saturating_sub(shortest.find('e').map(|_| 2).unwrap_or(0));
    if digits <= 12 {
        shortest
    } else {
        format!("{x:.11e}")
    }
}

/// Tracks written artifacts so a failing command leaves no partial output.
struct OutputSet {
    written: Vec<PathBuf>,
}

impl OutputSet {
    fn new() -> Self {
        Self {
            written: Vec::new(),
        }
    }

    fn write(&mut self, path: &Path, contents: &str) -> CliResult<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)
                    .map_err(|e| usage(format!("{}: {e}", dir.display())))?;
            }
        }
        std::fs::write(path, contents).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        self.written.push(path.to_path_buf());
        Ok(())
    }

    fn discard(self) {
        for p in self.written {
            let _ = std::fs::remove_file(p);
        }
    }
}

fn make_grid(t_end: f64, points: usize) -> CliResult<Vec<f64>> {
    if t_end <= 0.0 {
        return Err(usage("t_end must be positive"));
    }
    if points < 2 {
        return Err(usage("points must be at least 2"));
    }
    Ok((0..points)
        .map(|k| t_end * k as f64 / (points - 1) as f64)
        .collect())
}

fn trajectory_csv(traj: &Trajectory<f64>) -> String {
    let d = traj.states[0].matrix().nrows();
    let mut out = String::from("t_ps");
    for i in 0..d {
        for j in 0..d {
            out.push_str(&format!(",rho_{i}_{j}_re,rho_{i}_{j}_im"));
        }
    }
    out.push('\n');
    for (t, state) in traj.times.iter().zip(traj.states.iter()) {
        out.push_str(&fmt_float(*t));
        let m = state.matrix();
        for i in 0..d {
            for j in 0..d {
                out.push(',');
                out.push_str(&fmt_float(m[(i, j)].re));
                out.push(',');
                out.push_str(&fmt_float(m[(i, j)].im));
            }
        }
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Serialize)]
struct MethodSummary {
    method: String,
    generator_unphysical: Option<bool>,
    state_positivity_flagged: bool,
    heom_n_c_used: Option<usize>,
    heom_auxiliary_count: Option<usize>,
    heom_memory_estimate_mb: Option<usize>,
}

#[derive(Serialize)]
struct RunSummary {
    model: String,
    t_end_ps: f64,
    points: usize,
    methods: Vec<MethodSummary>,
    criterion: Option<serde_json::Value>,
}

fn parse_methods(raw: &[String]) -> CliResult<Vec<Method>> {
    let mut out = Vec::new();
    for m in raw {
        let m = m.trim();
        if m.is_empty() {
            continue;
        }
        let parsed = match m {
            "tcl2" => Method::Tcl2,
            "tcl4" => Method::Tcl4,
            "pmat" => Method::Pmat,
            "heom" => Method::Heom,
            other => return Err(usage(format!("unknown method `{other}`"))),
        };
        if !out.contains(&parsed) {
            out.push(parsed);
        }
    }
    Ok(out)
}

fn cmd_simulate(args: SimulateArgs) -> CliResult<()> {
    let cfg = load_config(args.config.as_deref())?;
    let model_name = args
        .model
        .or(cfg.model)
        .ok_or_else(|| usage("no model given (flag --model or config `model`)"))?;
    let method_names: Vec<String> = if args.methods.is_empty() {
        cfg.methods.unwrap_or_default()
    } else {
        args.methods
    };
    let methods = parse_methods(&method_names)?;
    let want_criterion = args.criterion || cfg.horizon.is_some() && methods.is_empty();
    if methods.is_empty() && !want_criterion {
        return Err(usage("nothing to do: give --methods and/or --criterion"));
    }
    let grid_cfg = cfg.grid.unwrap_or(GridConfig {
        t_end: None,
        points: None,
    });
    let t_end = args.t_end.or(grid_cfg.t_end).unwrap_or(5.0);
    let points = args.points.or(grid_cfg.points).unwrap_or(201);
    let grid = make_grid(t_end, points)?;
    let heom_cfg_file = cfg.heom;
    let heom_nc_raw = args.heom_nc.or_else(|| {
        heom_cfg_file
            .as_ref()
            .and_then(|h| h.n_c.as_ref())
            .map(|v| match v {
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            })
    });
    let heom_tol = args
        .heom_tol
        .or(heom_cfg_file.as_ref().and_then(|h| h.tolerance))
        .unwrap_or(1e-3);
    let horizon = args.horizon.or(cfg.horizon).unwrap_or(t_end);
    let out_dir = args
        .out
        .or(cfg.out.map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));

    let spec = resolve_model(&model_name)?;
    let rho0 = spec.initial_state();

    let mut outputs = OutputSet::new();
    let mut run = || -> CliResult<RunSummary> {
        let mut summaries = Vec::new();
        let mut artifacts: Vec<(PathBuf, String)> = Vec::new();
        for method in &methods {
            let prop_cfg = PropagationConfig::default();
            let (traj, heom_used, heom_count, heom_mem) = match method {
                Method::Tcl2 => (
                    propagate_tcl(&spec.system, 2, &rho0, &grid, &prop_cfg)
                        .map_err(from_core)?,
                    None,
                    None,
                    None,
                ),
                Method::Tcl4 => (
                    propagate_tcl(&spec.system, 4, &rho0, &grid, &prop_cfg)
                        .map_err(from_core)?,
                    None,
                    None,
                    None,
                ),
                Method::Pmat => (
                    propagate_pmat(&spec.system, &rho0, &grid).map_err(from_core)?,
                    None,
                    None,
                    None,
                ),
                Method::Heom => {
                    let mut hcfg = HeomConfig::<f64>::default();
                    hcfg.convergence_tolerance = heom_tol;
                    let (traj, used) = match heom_nc_raw.as_deref() {
                        None | Some("auto") => {
                            converge_heom(&spec.system, &rho0, &grid, &hcfg, 12)
                                .map_err(from_core)?
                        }
                        Some(s) => {
                            let n_c = s
                                .parse::<usize>()
                                .map_err(|_| usage(format!("bad --heom-nc `{s}`")))?;
                            hcfg.n_c = n_c;
                            (
                                propagate_heom(&spec.system, &rho0, &grid, &hcfg)
                                    .map_err(from_core)?,
                                n_c,
                            )
                        }
                    };
                    hcfg.n_c = used;
                    let hier = build_hierarchy(&spec.system, &hcfg).map_err(from_core)?;
                    (
                        traj,
                        Some(used),
                        Some(hier.len()),
                        Some(hier.memory_estimate_mb()),
                    )
                }
            };
            // Generator spectrum diagnostics only exist for the TCL orders.
            let unphysical = match method {
                Method::Tcl2 => Some(
                    physicality_check(&spec.system, 2, t_end)
                        .map_err(from_core)?
                        .unphysical,
                ),
                Method::Tcl4 => Some(
                    physicality_check(&spec.system, 4, t_end)
                        .map_err(from_core)?
                        .unphysical,
                ),
                _ => None,
            };
            let flagged = traj.states.iter().any(|s| s.positivity_flagged());
            summaries.push(MethodSummary {
                method: method.label().to_string(),
                generator_unphysical: unphysical,
                state_positivity_flagged: flagged,
                heom_n_c_used: heom_used,
                heom_auxiliary_count: heom_count,
                heom_memory_estimate_mb: heom_mem,
            });
            artifacts.push((
                out_dir.join(format!("{}.csv", method.label())),
                trajectory_csv(&traj),
            ));
        }
        let criterion_json = if want_criterion {
            Some(criterion_json_value(&spec, horizon)?)
        } else {
            None
        };
        for (path, contents) in &artifacts {
            outputs.write(path, contents)?;
        }
        Ok(RunSummary {
            model: model_name.clone(),
            t_end_ps: t_end,
            points,
            methods: summaries,
            criterion: criterion_json,
        })
    };
    let result = run();
    drop(run);
    match result {
        Ok(summary) => {
            let text = serde_json::to_string_pretty(&summary)
                .map_err(|e| usage(e.to_string()))?;
            outputs.write(&out_dir.join("summary.json"), &(text + "\n"))?;
            Ok(())
        }
        Err(f) => {
            outputs.discard();
            Err(f)
        }
    }
}

// ---------------------------------------------------------------------------
// criterion

fn criterion_json_value(spec: &ModelSpec<f64>, horizon: f64) -> CliResult<serde_json::Value> {
    let report = evaluate_criterion(spec, horizon).map_err(from_core)?;
    let per: Vec<serde_json::Value> = (0..report.simplified_sum.len())
        .map(|i| {
            serde_json::json!({
                "i": i,
                "full_ratio": report.full_ratio[i],
                "simplified_sum": report.simplified_sum[i],
            })
        })
        .collect();
    Ok(serde_json::json!({
        "horizon_ps": report.horizon,
        "per_eigenstate": per,
        "upsilon": report.upsilon,
        "delta": report.delta,
        "max_simplified": report.max_simplified,
        "max_full": report.max_full,
        "verdict": if report.weak { "weak" } else { "strong" },
    }))
}

fn cmd_criterion(args: CriterionArgs) -> CliResult<()> {
    let cfg = load_config(args.config.as_deref())?;
    let model_name = args
        .model
        .or(cfg.model)
        .ok_or_else(|| usage("no model given (flag --model or config `model`)"))?;
    let horizon = args.horizon.or(cfg.horizon).unwrap_or(2.0);
    let out_dir = args
        .out
        .or(cfg.out.map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let spec = resolve_model(&model_name)?;

    let mut outputs = OutputSet::new();
    let run = |outputs: &mut OutputSet| -> CliResult<()> {
        let report = criterion_json_value(&spec, horizon)?;
        let viz = export_visualization(&spec, horizon).map_err(from_core)?;
        let mut pairs = String::from("delta_ij,upsilon_ij\n");
        for (d, u) in &viz.pairs {
            pairs.push_str(&format!("{},{}\n", fmt_float(*d), fmt_float(*u)));
        }
        let mut curve = String::from("omega,pi_J_over_omega\n");
        for (w, y) in &viz.curve {
            curve.push_str(&format!("{},{}\n", fmt_float(*w), fmt_float(*y)));
        }
        let text = serde_json::to_string_pretty(&report).map_err(|e| usage(e.to_string()))?;
        outputs.write(&out_dir.join("criterion.json"), &(text + "\n"))?;
        outputs.write(&out_dir.join("criterion_pairs.csv"), &pairs)?;
        outputs.write(&out_dir.join("criterion_curve.csv"), &curve)?;
        Ok(())
    };
    match run(&mut outputs) {
        Ok(()) => Ok(()),
        Err(f) => {
            outputs.discard();
            Err(f)
        }
    }
}

// ---------------------------------------------------------------------------
// compare

struct ParsedTrajectory {
    times: Vec<f64>,
    /// Row-major d×d complex entries per time.
    states: Vec<Vec<num_complex::Complex<f64>>>,
    dim: usize,
}

fn parse_trajectory_csv(path: &Path) -> CliResult<ParsedTrajectory> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| mismatch(format!("{}: empty file", path.display())))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"t_ps") || (cols.len() - 1) % 2 != 0 {
        return Err(mismatch(format!(
            "{}: not a trajectory CSV (header `{header}`)",
            path.display()
        )));
    }
    let d2 = (cols.len() - 1) / 2;
    let dim = (d2 as f64).sqrt().round() as usize;
    if dim * dim != d2 {
        return Err(mismatch(format!(
            "{}: {d2} matrix entries is not a square dimension",
            path.display()
        )));
    }
    let mut times = Vec::new();
    let mut states = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(mismatch(format!(
                "{}:{}: expected {} fields, found {}",
                path.display(),
                lineno + 2,
                cols.len(),
                fields.len()
            )));
        }
        let parse = |s: &str| {
            s.trim().parse::<f64>().map_err(|_| {
                mismatch(format!("{}:{}: bad number `{s}`", path.display(), lineno + 2))
            })
        };
        times.push(parse(fields[0])?);
        let mut state = Vec::with_capacity(d2);
        for k in 0..d2 {
            state.push(num_complex::Complex::new(
                parse(fields[1 + 2 * k])?,
                parse(fields[2 + 2 * k])?,
            ));
        }
        states.push(state);
    }
    if times.is_empty() {
        return Err(mismatch(format!("{}: no data rows", path.display())));
    }
    Ok(ParsedTrajectory { times, states, dim })
}

fn cmd_compare(args: CompareArgs) -> CliResult<()> {
    let a = parse_trajectory_csv(&args.a)?;
    let b = parse_trajectory_csv(&args.b)?;
    if a.dim != b.dim {
        return Err(mismatch(format!(
            "dimension mismatch: {} vs {}",
            a.dim, b.dim
        )));
    }
    if a.times.len() != b.times.len() {
        return Err(mismatch(format!(
            "grid length mismatch: {} vs {} points",
            a.times.len(),
            b.times.len()
        )));
    }
    for (ta, tb) in a.times.iter().zip(b.times.iter()) {
        if (ta - tb).abs() > 1e-9 * ta.abs().max(1.0) {
            return Err(mismatch(format!("grid mismatch at t = {ta} vs {tb}")));
        }
    }
    let d = a.dim;
    let mut out = String::from("t_ps,trace_distance\n");
    for ((t, sa), sb) in a.times.iter().zip(a.states.iter()).zip(b.states.iter()) {
        let ma = oqsim_core::CMatrix64::from_fn(d, d, |i, j| sa[i * d + j]);
        let mb = oqsim_core::CMatrix64::from_fn(d, d, |i, j| sb[i * d + j]);
        let dist = trace_distance(&ma, &mb).map_err(from_core)?;
        out.push_str(&format!("{},{}\n", fmt_float(*t), fmt_float(dist)));
    }
    match &args.out {
        Some(p) => {
            let mut outputs = OutputSet::new();
            outputs.write(p, &out)
        }
        None => {
            print!("{out}");
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// fit-bath

fn cmd_fit_bath(args: FitBathArgs) -> CliResult<()> {
    let spec = resolve_model(&args.model)?;
    let fitted = fit_bath(
        &spec.spectral_density,
        &spec.thermal,
        args.t_max,
        args.points,
        args.nr,
        args.ni,
    )
    .map_err(from_core)?;
    let text =
        serde_json::to_string_pretty(&fitted).map_err(|e| usage(e.to_string()))? + "\n";
    match &args.out {
        Some(p) => {
            let mut outputs = OutputSet::new();
            outputs.write(p, &text)
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
