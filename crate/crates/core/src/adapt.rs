//! Maximum marking and the solve / estimate / mark / refine loop.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::estimator::{compute_indicators, IndicatorReport, TermTotals};
use crate::format::sci;
use crate::mesh::{refine, MarkSet, PolyMesh};
use crate::problem::ProblemData;
use crate::solve::{dof_count, error_norms, solve};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefinementMode {
    Uniform,
    Adaptive,
}

impl FromStr for RefinementMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(RefinementMode::Uniform),
            "adaptive" => Ok(RefinementMode::Adaptive),
            _ => Err(Error::InvalidConfig(format!(
                "unknown mode {s:?} (expected uniform or adaptive)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptConfig {
    pub beta: f64,
    pub max_iterations: usize,
    pub max_dofs: usize,
    pub mode: RefinementMode,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        AdaptConfig {
            beta: 0.5,
            max_iterations: 5,
            max_dofs: usize::MAX,
            mode: RefinementMode::Adaptive,
        }
    }
}

impl AdaptConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidConfig(format!(
                "beta must lie in [0, 1], got {}",
                self.beta
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "at least one iteration is required".into(),
            ));
        }
        Ok(())
    }
}

/// One line of a convergence table. Rates are `None` on the first row and
/// when an error is too small to define one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyRow {
    pub iteration: usize,
    pub n: usize,
    pub e_sigma: f64,
    pub e_u: f64,
    pub e_total: f64,
    pub r_sigma: Option<f64>,
    pub r_u: Option<f64>,
    pub r_total: Option<f64>,
    pub theta: f64,
    pub r_theta: Option<f64>,
    pub effectivity: f64,
}

/// Everything produced by one pass of the loop.
#[derive(Debug, Clone)]
pub struct Iteration {
    pub mesh: PolyMesh,
    pub report: IndicatorReport,
    pub totals: TermTotals,
    /// Cells selected for refinement; empty on the last iteration.
    pub marked: MarkSet,
}

#[derive(Debug, Clone)]
pub struct Study {
    pub rows: Vec<StudyRow>,
    pub iterations: Vec<Iteration>,
}

fn rate_cell(r: Option<f64>) -> String {
    r.map(sci).unwrap_or_default()
}

impl Study {
    pub const HEADER: &'static str =
        "iter,N,e_sigma,r_sigma,e_u,r_u,e_total,r_total,theta,r_theta,eff";

    /// Convergence table; the rate cells of the first row are empty.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::HEADER);
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.iteration,
                r.n,
                sci(r.e_sigma),
                rate_cell(r.r_sigma),
                sci(r.e_u),
                rate_cell(r.r_u),
                sci(r.e_total),
                rate_cell(r.r_total),
                sci(r.theta),
                rate_cell(r.r_theta),
                sci(r.effectivity)
            )
            .unwrap();
        }
        out
    }

    /// Global `Φ, η, θ, Ψ, Λ` per iteration with their rates.
    pub fn term_rates_csv(&self) -> String {
        let mut out = String::from("iter,N");
        for name in ["Phi", "eta", "theta", "Psi", "Lambda"] {
            write!(out, ",{name},r_{name}").unwrap();
        }
        out.push('\n');
        for (i, (row, it)) in self.rows.iter().zip(&self.iterations).enumerate() {
            write!(out, "{},{}", row.iteration, row.n).unwrap();
            let now = it.totals.values();
            for (t, &value) in now.iter().enumerate().take(5) {
                let r = (i > 0).then(|| {
                    let prev = &self.rows[i - 1];
                    optional_rate(
                        value,
                        self.iterations[i - 1].totals.values()[t],
                        row.n,
                        prev.n,
                    )
                });
                write!(out, ",{},{}", sci(value), rate_cell(r.flatten())).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Cells with `Θ_K ≥ β max Θ_K`.
pub fn mark(report: &IndicatorReport, beta: f64) -> MarkSet {
    mark_values(&report.theta_k(), beta)
}

pub fn mark_values(theta_k: &[f64], beta: f64) -> MarkSet {
    let max = theta_k.iter().copied().fold(0.0, f64::max);
    let threshold = beta * max;
    MarkSet::new(
        (0..theta_k.len())
            .filter(|&c| theta_k[c] >= threshold)
            .collect(),
    )
}

/// `−2 log(e/e′) / log(N/N′)` with `e` current and `e′` previous.
pub fn rate(e: f64, e_prev: f64, n: usize, n_prev: usize) -> Result<f64> {
    for x in [e, e_prev] {
        if x < 1e-14 {
            return Err(Error::DegenerateRate(x));
        }
    }
    if n == n_prev {
        return Err(Error::InvalidConfig(
            "rate needs two different DOF counts".into(),
        ));
    }
    Ok(-2.0 * (e / e_prev).ln() / (n as f64 / n_prev as f64).ln())
}

fn optional_rate(e: f64, e_prev: f64, n: usize, n_prev: usize) -> Option<f64> {
    rate(e, e_prev, n, n_prev).ok()
}

/// Solves on one mesh and fills a row, with rates against `prev`.
fn evaluate(
    mesh: &PolyMesh,
    k: usize,
    data: &ProblemData,
    iteration: usize,
    prev: Option<&StudyRow>,
) -> Result<(StudyRow, IndicatorReport)> {
    let exact = data
        .exact
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("a study needs an exact solution".into()))?;
    let n = dof_count(mesh, k);
    let sol = solve(mesh, k, data)?;
    let errors = error_norms(&sol, exact)?;
    let report = compute_indicators(mesh, &sol, data)?;
    let mut row = StudyRow {
        iteration,
        n,
        e_sigma: errors.e_sigma,
        e_u: errors.e_u,
        e_total: errors.e_total,
        r_sigma: None,
        r_u: None,
        r_total: None,
        theta: report.theta,
        r_theta: None,
        effectivity: errors.e_total / report.theta,
    };
    if let Some(p) = prev {
        row.r_sigma = optional_rate(row.e_sigma, p.e_sigma, n, p.n);
        row.r_u = optional_rate(row.e_u, p.e_u, n, p.n);
        row.r_total = optional_rate(row.e_total, p.e_total, n, p.n);
        row.r_theta = optional_rate(row.theta, p.theta, n, p.n);
    }
    Ok((row, report))
}

fn with_context(iteration: usize) -> impl Fn(Error) -> Error {
    move |e| Error::Study {
        iteration,
        source: Box::new(e),
    }
}

pub fn run_study(
    mesh0: &PolyMesh,
    k: usize,
    data: &ProblemData,
    config: &AdaptConfig,
) -> Result<Study> {
    config.validate()?;
    let mut mesh = mesh0.clone();
    let mut rows: Vec<StudyRow> = Vec::new();
    let mut iterations: Vec<Iteration> = Vec::new();
    for iteration in 0..config.max_iterations {
        let ctx = with_context(iteration);
        let (row, report) = evaluate(&mesh, k, data, iteration, rows.last()).map_err(&ctx)?;
        let n = row.n;
        rows.push(row);
        let last = iteration + 1 == config.max_iterations || n >= config.max_dofs;
        let marked = match (last, config.mode) {
            (true, _) => MarkSet::new(Vec::new()),
            (false, RefinementMode::Uniform) => MarkSet::all(mesh.n_cells()),
            (false, RefinementMode::Adaptive) => mark(&report, config.beta),
        };
        let next = if last {
            None
        } else {
            Some(refine(&mesh, &marked).map_err(&ctx)?)
        };
        iterations.push(Iteration {
            mesh,
            totals: report.totals(),
            report,
            marked,
        });
        match next {
            Some(m) if dof_count(&m, k) <= config.max_dofs => mesh = m,
            _ => break,
        }
    }
    Ok(Study { rows, iterations })
}

/// Same table on a prescribed mesh sequence, e.g. independently generated
/// meshes of increasing resolution. No cells are marked.
pub fn run_on_meshes(meshes: &[PolyMesh], k: usize, data: &ProblemData) -> Result<Study> {
    let mut rows: Vec<StudyRow> = Vec::new();
    let mut iterations = Vec::new();
    for (iteration, mesh) in meshes.iter().enumerate() {
        let (row, report) =
            evaluate(mesh, k, data, iteration, rows.last()).map_err(with_context(iteration))?;
        rows.push(row);
        iterations.push(Iteration {
            mesh: mesh.clone(),
            totals: report.totals(),
            report,
            marked: MarkSet::new(Vec::new()),
        });
    }
    Ok(Study { rows, iterations })
}
