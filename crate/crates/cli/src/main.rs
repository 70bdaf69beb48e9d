use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;

use qmor::analysis::{self, FrequencyGrid};
use qmor::io::{self, PointsJson};
use qmor::model::annihilation_to_quadrature;
use qmor::reduction::{self, pr_scale, InterpolationData, Method, ReductionResult, Side};
use qmor::reproduce::{self, SummaryRow};
use qmor::selection::{self, Cost, Selection, SelectionProblem, Template};
use qmor::{LinearSystem, StateSpace, System, Vector};

#[derive(Parser)]
#[command(name = "qmor", version, about = "Structure-preserving interpolatory reduction of linear quantum stochastic systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the physical realizability constraints of a system.
    CheckPr {
        input: PathBuf,
        /// Tolerance relative to 1 + ‖A‖ + ‖B‖² + ‖C‖ + ‖D‖².
        #[arg(long, default_value_t = reduction::PR_REL_TOL)]
        tol: f64,
    },
    /// Reduce a system by tangential interpolation.
    Reduce {
        input: PathBuf,
        #[arg(long)]
        method: Method,
        /// Points as a file or inline JSON: `[[re, im], ...]`, or an object
        /// with `points` and `directions`.
        #[arg(long)]
        points: String,
        /// Directions as a file or inline JSON: `[[x, [re, im], ...], ...]`.
        #[arg(long)]
        dirs: Option<String>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Error curve, H∞ error estimate and bounds of a reduction.
    Analyze {
        original: PathBuf,
        /// Reduction file written by `reduce`.
        reduction: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Search for interpolation frequencies minimizing an error cost.
    SelectPoints {
        input: PathBuf,
        #[arg(long)]
        method: Method,
        /// Number of frequencies; directions then default to the indicator
        /// heuristic (quadrature) or the first output (passive).
        #[arg(long)]
        r: Option<usize>,
        #[arg(long)]
        dirs: Option<String>,
        #[arg(long, default_value = "hinf")]
        cost: Cost,
        #[arg(long, default_value = "conjugate_pairs")]
        template: Template,
        /// Use one common frequency for all points.
        #[arg(long)]
        tie_omega: bool,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Frequency response of a system as CSV.
    Freqresp {
        input: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        /// Output directory; without it the CSV goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one of the built-in reference examples end to end.
    Example {
        #[arg(value_parser = ["ex1", "ex2", "ex3"])]
        name: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

/// Frequency range overrides; unset values come from the pole magnitudes.
#[derive(Args, Clone, Copy)]
struct GridArgs {
    #[arg(long)]
    wmin: Option<f64>,
    #[arg(long)]
    wmax: Option<f64>,
    #[arg(long)]
    wpts: Option<usize>,
}

impl GridArgs {
    fn is_set(&self) -> bool {
        self.wmin.is_some() || self.wmax.is_some() || self.wpts.is_some()
    }

    fn grid(&self, systems: &[&StateSpace]) -> CliResult<FrequencyGrid> {
        let g = FrequencyGrid::standard(systems).domain("frequency grid")?;
        let (lo, hi, n) = (self.wmin.unwrap_or(g.omega_min), self.wmax.unwrap_or(g.omega_max), self.wpts.unwrap_or(g.count));
        g.with_range(lo, hi, n).usage("frequency grid")
    }
}

/// Exit status 2 for unusable input, 1 for a failed computation or check.
enum Failure {
    Usage(String),
    Domain(String),
}

type CliResult<T> = Result<T, Failure>;

trait Context<T> {
    fn usage(self, what: &str) -> CliResult<T>;
    fn domain(self, what: &str) -> CliResult<T>;
}

impl<T, E: std::fmt::Display> Context<T> for Result<T, E> {
    fn usage(self, what: &str) -> CliResult<T> {
        self.map_err(|e| Failure::Usage(format!("{what}: {e}")))
    }
    fn domain(self, what: &str) -> CliResult<T> {
        self.map_err(|e| Failure::Domain(format!("{what}: {e}")))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::CheckPr { input, tol } => check_pr(&input, tol),
        Command::Reduce { input, method, points, dirs, out } => reduce(&input, method, &points, dirs.as_deref(), &out),
        Command::Analyze { original, reduction, grid, out } => analyze(&original, &reduction, grid, &out),
        Command::SelectPoints { input, method, r, dirs, cost, template, tie_omega, grid, out } => {
            select_points(&input, method, r, dirs.as_deref(), cost, template, tie_omega, grid, &out)
        }
        Command::Freqresp { input, grid, out } => freqresp(&input, grid, out.as_deref()),
        Command::Example { name, out } => example(&name, &out),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn load_system(path: &Path) -> CliResult<System> {
    io::read_system(path).usage(&format!("cannot read system from {}", path.display()))
}

/// The argument itself, or the contents of the file it names.
fn inline_or_file(arg: &str) -> CliResult<String> {
    let path = Path::new(arg);
    if path.is_file() {
        fs::read_to_string(path).usage(&format!("cannot read {arg}"))
    } else {
        Ok(arg.to_string())
    }
}

fn parse_points_arg(arg: &str) -> CliResult<(Vec<Complex64>, Option<Vec<Vector>>)> {
    let text = inline_or_file(arg)?;
    if text.trim_start().starts_with('{') {
        let p: PointsJson = serde_json::from_str(&text).usage("invalid points")?;
        Ok((p.points(), Some(p.directions())))
    } else {
        Ok((io::parse_points(&text).usage("invalid points")?, None))
    }
}

fn parse_dirs_arg(arg: &str) -> CliResult<Vec<Vector>> {
    let text = inline_or_file(arg)?;
    if text.trim_start().starts_with('{') {
        let p: PointsJson = serde_json::from_str(&text).usage("invalid directions")?;
        Ok(p.directions())
    } else {
        io::parse_directions(&text).usage("invalid directions")
    }
}

/// System in the form a method needs: quadrature for left/right (converted
/// from annihilation form if necessary), annihilation for passive.
fn system_for(sys: System, method: Method) -> CliResult<System> {
    match (sys, method) {
        (System::Annihilation(a), Method::Left | Method::Right) => {
            Ok(System::Quadrature(annihilation_to_quadrature(&a).usage("conversion to quadrature form")?))
        }
        (System::Quadrature(_), Method::Passive) => Err(Failure::Usage(
            "the passive method requires a system in annihilation form".into(),
        )),
        (s, _) => Ok(s),
    }
}

fn side_of(method: Method) -> Side {
    match method {
        Method::Right => Side::Right,
        Method::Left | Method::Passive => Side::Left,
    }
}

fn direction_len(sys: &System, method: Method) -> usize {
    match (sys, method) {
        (System::Quadrature(q), Method::Left) => 2 * q.ell(),
        (System::Quadrature(q), _) => 2 * q.m(),
        (System::Annihilation(a), _) => a.ell(),
    }
}

/// Indicator directions `e_1, e_1, e_2, e_2, ...` for `pairs` conjugate
/// pairs, or `e_1` at every point of a passive reduction.
fn default_directions(sys: &System, method: Method, points: usize) -> CliResult<Vec<Vector>> {
    let len = direction_len(sys, method);
    if method == Method::Passive {
        let mut e = Vector::zeros(len);
        e[0] = Complex64::new(1.0, 0.0);
        return Ok(vec![e; points]);
    }
    if !points.is_multiple_of(2) {
        return Err(Failure::Usage(format!(
            "{points} points cannot use default directions; pass --dirs"
        )));
    }
    let perm: Vec<usize> = (0..len).collect();
    selection::tangent_directions_heuristic(&perm, points / 2, len / 2).usage("default directions")
}

fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult<()> {
    fs::create_dir_all(dir).domain(&format!("cannot create {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).domain(&format!("cannot write {}", path.display()))
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value).domain("serialization")
}

fn fmt_poles(poles: &[Complex64]) -> String {
    poles
        .iter()
        .map(|p| format!("{:.6e}{:+.6e}i", p.re, p.im))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Serialize)]
struct PrOutput {
    form: &'static str,
    residual_1: f64,
    residual_2: f64,
    residual_3: f64,
    scale: f64,
    tol: f64,
    passes: bool,
}

fn check_pr(input: &Path, rel_tol: f64) -> CliResult<bool> {
    let sys = load_system(input)?;
    let scale = pr_scale(&sys.state_space());
    let report = sys.check_pr(rel_tol * scale);
    let out = PrOutput {
        form: sys.form(),
        residual_1: report.residual_1,
        residual_2: report.residual_2,
        residual_3: report.residual_3,
        scale,
        tol: report.tol,
        passes: report.passes,
    };
    println!("{}", to_json(&out)?);
    Ok(report.passes)
}

fn run_reduction(sys: &System, method: Method, data: &InterpolationData) -> CliResult<ReductionResult> {
    match (sys, method) {
        (System::Quadrature(q), Method::Left) => reduction::reduce_left(q, data),
        (System::Quadrature(q), Method::Right) => reduction::reduce_right(q, data),
        (System::Annihilation(a), Method::Passive) => reduction::reduce_passive(a, data),
        _ => unreachable!("system_for matches form and method"),
    }
    .domain("reduction failed")
}

fn print_reduction(res: &ReductionResult) {
    let d = &res.diagnostics;
    println!("method: {}", res.method);
    println!("order: {}", res.order());
    println!("poles: {}", fmt_poles(&d.poles));
    println!("stable: {}", d.stable);
    println!("realizability residual: {:.3e} (tol {:.3e}, passes {})", d.pr.max_residual(), d.pr.tol, d.pr.passes);
    println!("max relative interpolation residual: {:.3e}", res.max_interpolation_residual());
    println!("biorthogonality residual: {:.3e}", d.biorthogonality);
    if let Some(c) = d.right_convention {
        println!("right projection convention: {c:?}");
    }
}

fn reduce(input: &Path, method: Method, points: &str, dirs: Option<&str>, out: &Path) -> CliResult<bool> {
    let sys = system_for(load_system(input)?, method)?;
    let (points, file_dirs) = parse_points_arg(points)?;
    let directions = match (dirs, file_dirs) {
        (Some(d), _) => parse_dirs_arg(d)?,
        (None, Some(d)) => d,
        (None, None) => default_directions(&sys, method, points.len())?,
    };
    let data = InterpolationData::new(side_of(method), points, directions).usage("interpolation data")?;
    let res = run_reduction(&sys, method, &data)?;
    write_file(out, "reduced.json", &io::system_to_string(&res.reduced).domain("serialization")?)?;
    write_file(out, "reduction.json", &io::reduction_to_string(&res).domain("serialization")?)?;
    write_file(out, "diagnostics.json", &to_json(&res.diagnostics)?)?;
    print_reduction(&res);
    Ok(res.diagnostics.pr.passes)
}

fn print_report(report: &analysis::ErrorReport) {
    let show = |x: Option<f64>| x.map(analysis::fmt_f64).unwrap_or_else(|| "unavailable".into());
    println!("H∞ error estimate: {}", show(report.hinf_error_estimate));
    if let Some(w) = report.peak_frequency {
        println!("peak frequency: {w:e}");
    }
    println!("left bound: {}", show(report.hinf_bound_left));
    println!("right bound: {}", show(report.hinf_bound_right));
    if let Some(r) = &report.unavailable_reason {
        println!("unavailable: {r}");
    }
}

fn write_analysis(out: &Path, report: &analysis::ErrorReport) -> CliResult<()> {
    write_file(out, "analysis.json", &to_json(report)?)?;
    let mut csv = Vec::new();
    analysis::write_error_csv(&report.pointwise, &mut csv).domain("error curve")?;
    write_file(out, "error.csv", &String::from_utf8(csv).expect("CSV is ASCII"))
}

fn analyze(original: &Path, reduction: &Path, grid: GridArgs, out: &Path) -> CliResult<bool> {
    let sys = load_system(original)?;
    let text = fs::read_to_string(reduction).usage(&format!("cannot read {}", reduction.display()))?;
    let json = io::reduction_from_str(&text).usage("invalid reduction")?;
    let full = system_for(sys, json.method)?.state_space();
    let (w, v) = json.projections(full.order()).usage("invalid reduction")?;
    let grid = if grid.is_set() {
        let red = analysis::project(&full, &w, &v).domain("projection")?;
        Some(grid.grid(&[&full, &red])?)
    } else {
        None
    };
    let report = analysis::error_report(&full, &w, &v, grid.as_ref()).domain("analysis failed")?;
    write_analysis(out, &report)?;
    print_report(&report);
    Ok(report.unavailable_reason.is_none())
}

#[derive(Serialize)]
struct SelectionOutput<'a> {
    method: Method,
    cost_kind: Cost,
    template: Template,
    tie_omega: bool,
    omega_bounds: (f64, f64),
    omegas: &'a [f64],
    cost: f64,
    lattice: usize,
    evaluations: usize,
    points: PointsJson,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn trace_csv(sel: &Selection) -> String {
    let k = sel.trace.first().map_or(0, |t| t.omegas.len());
    let mut s = String::from("phase,value,feasible");
    for i in 1..=k {
        write!(s, ",omega_{i}").unwrap();
    }
    s.push_str(",reason\n");
    for t in &sel.trace {
        write!(s, "{:?},{},{}", t.phase, analysis::fmt_f64(t.value), t.feasible).unwrap();
        for w in &t.omegas {
            write!(s, ",{}", analysis::fmt_f64(*w)).unwrap();
        }
        writeln!(s, ",{}", csv_field(t.reason.as_deref().unwrap_or(""))).unwrap();
    }
    s
}

fn write_selection(out: &Path, problem: &SelectionProblem, sel: &Selection) -> CliResult<()> {
    let data = problem.data(&sel.omegas).domain("selected points")?;
    let points = PointsJson::from_data(&data);
    let output = SelectionOutput {
        method: problem.method,
        cost_kind: problem.cost,
        template: problem.template,
        tie_omega: problem.tie_omega,
        omega_bounds: problem.omega_bounds,
        omegas: &sel.omegas,
        cost: sel.cost,
        lattice: sel.lattice,
        evaluations: sel.trace.len(),
        points: points.clone(),
    };
    write_file(out, "selection.json", &to_json(&output)?)?;
    write_file(out, "selected_points.json", &to_json(&points)?)?;
    write_file(out, "trace.csv", &trace_csv(sel))
}

#[allow(clippy::too_many_arguments)]
fn select_points(
    input: &Path,
    method: Method,
    r: Option<usize>,
    dirs: Option<&str>,
    cost: Cost,
    template: Template,
    tie_omega: bool,
    grid: GridArgs,
    out: &Path,
) -> CliResult<bool> {
    let sys = system_for(load_system(input)?, method)?;
    let directions = match (dirs, r) {
        (Some(d), _) => parse_dirs_arg(d)?,
        (None, Some(r)) => default_directions(&sys, method, template.point_count(r))?,
        (None, None) => return Err(Failure::Usage("pass --r or --dirs".into())),
    };
    let mut problem = SelectionProblem::new(sys, method, directions, template, cost).usage("selection problem")?;
    let (lo, hi) = problem.omega_bounds;
    problem = problem
        .with_bounds(grid.wmin.unwrap_or(lo), grid.wmax.unwrap_or(hi))
        .usage("frequency bounds")?
        .tied(tie_omega);
    let sel = selection::optimize_points(&problem).domain("point selection failed")?;
    write_selection(out, &problem, &sel)?;
    println!("frequencies: {}", sel.omegas.iter().map(|w| format!("{w:e}")).collect::<Vec<_>>().join(", "));
    println!("cost: {}", analysis::fmt_f64(sel.cost));
    println!("evaluations: {}", sel.trace.len());
    Ok(true)
}

fn freqresp(input: &Path, grid: GridArgs, out: Option<&Path>) -> CliResult<bool> {
    let ss = load_system(input)?.state_space();
    let omegas = grid.grid(&[&ss])?.points();
    let rows = analysis::frequency_response(&ss, &omegas);
    let mut csv = Vec::new();
    analysis::write_response_csv(&rows, ss.c.nrows(), ss.b.ncols(), &mut csv).domain("frequency response")?;
    match out {
        Some(dir) => write_file(dir, "response.csv", &String::from_utf8(csv).expect("CSV is ASCII"))?,
        None => std::io::stdout().write_all(&csv).domain("stdout")?,
    }
    Ok(true)
}

fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from("key,quantity,computed,expected,tolerance,pass\n");
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{}",
            csv_field(&r.key),
            csv_field(&r.quantity),
            csv_field(&r.computed),
            csv_field(&r.expected),
            csv_field(&r.tolerance),
            r.pass
        )
        .unwrap();
    }
    s
}

fn example(name: &str, out: &Path) -> CliResult<bool> {
    let run = reproduce::run_example(name).domain(name)?;
    write_file(out, "system.json", &io::system_to_string(&run.system).domain("serialization")?)?;
    write_file(out, "points.json", &to_json(&PointsJson::from_data(&run.data))?)?;
    write_file(out, "reduction.json", &io::reduction_to_string(&run.reduction).domain("serialization")?)?;
    write_analysis(out, &run.report)?;
    write_file(out, "trace.csv", &trace_csv(&run.selection))?;
    write_file(
        out,
        "selection.json",
        &to_json(&serde_json::json!({
            "omegas": run.selection.omegas,
            "cost": run.selection.cost,
            "lattice": run.selection.lattice,
            "evaluations": run.selection.trace.len(),
        }))?,
    )?;
    write_file(out, "summary.csv", &summary_csv(&run.summary))?;

    println!("{name}: reduced order {}", run.reduction.order());
    for r in &run.summary {
        println!("[{}] {}: {}", if r.pass { "PASS" } else { "FAIL" }, r.quantity, r.computed);
        println!("       expected {} ({})", r.expected, r.tolerance);
    }
    Ok(run.passes())
}
