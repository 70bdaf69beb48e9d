//! End-to-end runs on the three reference systems, each ending in a table
//! that compares computed quantities with published values.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, ErrorReport};
use crate::error::{Error, Result};
use crate::fixtures;
use crate::linalg::{self, Vector};
use crate::model::{closed_loop_state_matrix, LinearSystem, System};
use crate::reduction::{self, InterpolationData, Method, ReducedModel, ReductionResult, Side};
use crate::selection::{self, Cost, Selection, SelectionProblem, Template};

/// One published quantity against its computed counterpart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    /// Stable identifier, e.g. `poles` or `bound_left`.
    pub key: String,
    pub quantity: String,
    pub computed: String,
    pub expected: String,
    pub tolerance: String,
    pub pass: bool,
}

impl SummaryRow {
    fn new(key: &str, quantity: &str, computed: String, expected: &str, tolerance: &str, pass: bool) -> Self {
        Self {
            key: key.into(),
            quantity: quantity.into(),
            computed,
            expected: expected.into(),
            tolerance: tolerance.into(),
            pass,
        }
    }
}

/// Everything produced by one example run.
#[derive(Debug, Clone)]
pub struct ExampleRun {
    pub name: String,
    pub system: System,
    /// Interpolation data at the published frequency.
    pub data: InterpolationData,
    pub reduction: ReductionResult,
    pub selection: Selection,
    pub report: ErrorReport,
    pub summary: Vec<SummaryRow>,
}

impl ExampleRun {
    pub fn passes(&self) -> bool {
        self.summary.iter().all(|r| r.pass)
    }

    pub fn row(&self, key: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.key == key)
    }
}

pub const EXAMPLES: [&str; 3] = ["ex1", "ex2", "ex3"];

pub fn run_example(name: &str) -> Result<ExampleRun> {
    match name {
        "ex1" => run_ex1(),
        "ex2" => run_ex2(),
        "ex3" => run_ex3(),
        other => Err(Error::Invalid(format!(
            "unknown example '{other}' (expected one of {})",
            EXAMPLES.join(", ")
        ))),
    }
}

fn unit(k: usize, len: usize) -> Vector {
    let mut v = Vector::zeros(len);
    v[k] = Complex64::new(1.0, 0.0);
    v
}

/// Greedy nearest matching of targets to computed values; returns the
/// largest distance, each divided by `scale(target)`.
pub fn match_poles(computed: &[Complex64], targets: &[Complex64], scale: impl Fn(Complex64) -> f64) -> f64 {
    if computed.len() != targets.len() {
        return f64::INFINITY;
    }
    let mut left: Vec<Complex64> = computed.to_vec();
    let mut worst = 0.0_f64;
    for &t in targets {
        let (i, d) = left
            .iter()
            .enumerate()
            .map(|(i, p)| (i, (p - t).norm()))
            .fold((usize::MAX, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        worst = worst.max(d / scale(t));
        left.remove(i);
    }
    worst
}

fn fmt_poles(p: &[Complex64]) -> String {
    let mut p = p.to_vec();
    p.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    p.iter()
        .map(|z| format!("{:.4e}{:+.4e}i", z.re, z.im))
        .collect::<Vec<_>>()
        .join(" ")
}

fn rel_row(key: &str, quantity: &str, value: f64, expected: f64, rel: f64) -> SummaryRow {
    SummaryRow::new(
        key,
        quantity,
        format!("{value:.6e}"),
        &format!("{expected:e}"),
        &format!("{}% relative", rel * 100.0),
        (value - expected).abs() <= rel * expected.abs(),
    )
}

/// `ω^c` within 10% of the published value, or a cost no worse than the
/// cost there by more than a factor `1 + 1e-3`.
fn selection_row(problem: &SelectionProblem, sel: &Selection, published: f64) -> Result<SummaryRow> {
    let reference = selection::cost(problem, &problem.expand(&[published]))?;
    let w = sel.omegas[0];
    let pass = (w - published).abs() <= 0.1 * published || sel.cost <= reference * (1.0 + 1e-3);
    Ok(SummaryRow::new(
        "omega_c",
        "selected frequency",
        format!("{w:.6e} (cost {:.6e}, cost at published {reference:.6e})", sel.cost),
        &format!("{published:e}"),
        "10% or cost <= published cost * (1 + 1e-3)",
        pass,
    ))
}

fn pair_points(w: f64, pairs: usize) -> Vec<Complex64> {
    (0..pairs)
        .flat_map(|_| [Complex64::new(0.0, w), Complex64::new(0.0, -w)])
        .collect()
}

fn run_ex1() -> Result<ExampleRun> {
    let sys = fixtures::ex1_system();
    let wc = 1.05e4;
    let dirs = vec![unit(4, 6), unit(4, 6), unit(5, 6), unit(5, 6)];
    let data = InterpolationData::new(Side::Right, pair_points(wc, 2), dirs.clone())?;
    let res = reduction::reduce_right(&sys, &data)?;
    let full = sys.state_space();
    let report = analysis::error_report(&full, &res.w, &res.v, None)?;

    let problem = SelectionProblem::new(sys.clone().into(), Method::Right, dirs, Template::ConjugatePairs, Cost::Hinf)?
        .with_bounds(1e3, 1e6)?
        .tied(true);
    let sel = selection::optimize_points(&problem)?;

    let targets = [
        Complex64::new(-50.0, 1e4),
        Complex64::new(-50.0, 1e4),
        Complex64::new(-50.0, -1e4),
        Complex64::new(-50.0, -1e4),
    ];
    let poles = &res.diagnostics.poles;
    let pole_err = match_poles(poles, &targets, |t| t.norm());
    let summary = vec![
        selection_row(&problem, &sel, wc)?,
        SummaryRow::new(
            "poles",
            "reduced poles",
            fmt_poles(poles),
            "-50±1e4i (double)",
            "1% relative",
            pole_err <= 1e-2,
        ),
        rel_row("hinf", "H∞ error", report.hinf_error_estimate.unwrap_or(f64::NAN), 2.00, 0.02),
        rel_row("bound_left", "left H∞ bound", report.hinf_bound_left.unwrap_or(f64::NAN), 2.45, 0.05),
        rel_row("bound_right", "right H∞ bound", report.hinf_bound_right.unwrap_or(f64::NAN), 3.96e3, 0.10),
    ];
    Ok(ExampleRun {
        name: "ex1".into(),
        system: sys.into(),
        data,
        reduction: res,
        selection: sel,
        report,
        summary,
    })
}

/// Closed-loop poles published for the reduced controller.
pub fn ex2_closed_loop_targets() -> Vec<Complex64> {
    let c = Complex64::new;
    vec![
        c(-0.1265, 0.1404),
        c(-0.1265, -0.1404),
        c(-0.3272, 0.0),
        c(-0.3654, 1.5331),
        c(-0.3654, -1.5331),
        c(-0.5821, 0.0),
        c(-0.6220, 0.0),
        c(-0.7143, 0.0),
        c(-1.7610, 0.1907),
        c(-1.7610, -0.1907),
    ]
}

fn run_ex2() -> Result<ExampleRun> {
    let sys = fixtures::ex2_controller();
    let wc = 0.29;
    let dirs = vec![unit(14, 16), unit(14, 16), unit(15, 16), unit(15, 16)];
    let data = InterpolationData::new(Side::Right, pair_points(wc, 2), dirs.clone())?;
    let res = reduction::reduce_right(&sys, &data)?;
    let full = sys.state_space();
    let report = analysis::error_report(&full, &res.w, &res.v, None)?;

    let problem = SelectionProblem::new(sys.clone().into(), Method::Right, dirs, Template::ConjugatePairs, Cost::Hinf)?
        .with_bounds(1e-2, 1e2)?
        .tied(true);
    let sel = selection::optimize_points(&problem)?;

    let c = Complex64::new;
    let targets = [c(-0.2576, 1.4795), c(-0.2576, -1.4795), c(-0.5391, 0.0), c(-1.4958, 0.0)];
    let poles = &res.diagnostics.poles;
    let pole_err = match_poles(poles, &targets, |_| 1.0);

    let red = match &res.reduced {
        ReducedModel::Quadrature(q) => q.clone(),
        ReducedModel::Annihilation(_) => unreachable!("right reductions are quadrature"),
    };
    let plant = fixtures::ex2_plant();
    let b_c = red.b().columns(14, 2).into_owned();
    let cl = closed_loop_state_matrix((&plant.a, &plant.b_u, &plant.c), (red.a(), &b_c, red.c()))?;
    let cl_poles = linalg::eigenvalues(&linalg::to_complex(&cl))?;
    let abscissa = cl_poles.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let cl_err = match_poles(&cl_poles, &ex2_closed_loop_targets(), |_| 1.0);
    let summary = vec![
        selection_row(&problem, &sel, wc)?,
        SummaryRow::new(
            "poles",
            "reduced controller poles",
            fmt_poles(poles),
            "-0.2576±1.4795i, -0.5391, -1.4958",
            "2e-2 absolute",
            pole_err <= 2e-2,
        ),
        SummaryRow::new(
            "closed_loop_stable",
            "closed-loop spectral abscissa",
            format!("{abscissa:.6e}"),
            "< 0",
            "strict",
            abscissa < 0.0,
        ),
        SummaryRow::new(
            "closed_loop_poles",
            "closed-loop poles",
            fmt_poles(&cl_poles),
            "ten published poles",
            "2e-2 absolute",
            cl_err <= 2e-2,
        ),
    ];
    Ok(ExampleRun {
        name: "ex2".into(),
        system: sys.into(),
        data,
        reduction: res,
        selection: sel,
        report,
        summary,
    })
}

fn run_ex3() -> Result<ExampleRun> {
    let sys = fixtures::ex3_system();
    let wc = 1.48e7;
    let mu = unit(0, 2);
    let dirs = vec![mu.clone(), mu.clone(), mu];
    let points = vec![Complex64::new(0.0, wc), Complex64::new(0.0, 0.0), Complex64::new(0.0, -wc)];
    let data = InterpolationData::new(Side::Left, points, dirs.clone())?;
    let res = reduction::reduce_passive(&sys, &data)?;
    let full = sys.state_space();
    let report = analysis::error_report(&full, &res.v, &res.v, None)?;

    let problem = SelectionProblem::new(sys.clone().into(), Method::Passive, dirs.clone(), Template::SymmetricWithDc, Cost::H2)?
        .with_bounds(1e5, 1e9)?
        .tied(true);
    let sel = selection::optimize_points(&problem)?;

    let hinf_problem = SelectionProblem {
        cost: Cost::Hinf,
        ..problem.clone()
    };
    let flat = (0..9)
        .map(|k| wc * 10f64.powf(-0.5 + k as f64 / 8.0))
        .map(|w| selection::cost_hinf(&hinf_problem, &[w]))
        .collect::<Result<Vec<f64>>>()?;
    let flat_dev = flat.iter().map(|v| (v - 2.0).abs() / 2.0).fold(0.0, f64::max);

    let c = Complex64::new;
    let targets = [c(-5.1541e5, 0.0), c(-1.0780e7, 0.8142e7), c(-1.0780e7, -0.8142e7)];
    let poles = &res.diagnostics.poles;
    let pole_err = match_poles(poles, &targets, |t| t.norm());
    let hinf = report.hinf_error_estimate.unwrap_or(f64::NAN);
    let mut hinf_row = rel_row("hinf", "H∞ error", hinf, 2.00, 0.02);
    hinf_row.pass &= hinf <= 2.0 + 1e-6;
    hinf_row.tolerance.push_str(", at most 2 + 1e-6");
    let summary = vec![
        selection_row(&problem, &sel, wc)?,
        SummaryRow::new(
            "poles",
            "reduced poles",
            fmt_poles(poles),
            "-5.1541e5, (-1.0780±0.8142i)e7",
            "1% relative",
            pole_err <= 1e-2,
        ),
        hinf_row,
        rel_row("bound_left", "left H∞ bound", report.hinf_bound_left.unwrap_or(f64::NAN), 2.92, 0.05),
        rel_row("bound_right", "right H∞ bound", report.hinf_bound_right.unwrap_or(f64::NAN), 2.92, 0.05),
        SummaryRow::new(
            "hinf_flat",
            "H∞ cost across a decade around the published frequency",
            format!("max deviation {:.3}%", 100.0 * flat_dev),
            "2.00",
            "2% relative",
            flat_dev <= 0.02,
        ),
    ];
    Ok(ExampleRun {
        name: "ex3".into(),
        system: sys.into(),
        data,
        reduction: res,
        selection: sel,
        report,
        summary,
    })
}
