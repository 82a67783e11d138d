use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use mvem_core::adapt::{run_study, AdaptConfig, RefinementMode, Study};
use mvem_core::cases::{CaseId, MeshKind, TestCase};
use mvem_core::format::sci;
use mvem_core::mesh::write_mesh;

const PATCH_TOLERANCE: f64 = 1e-8;

/// Solve -div(κ∇u) = f with mixed virtual elements and write convergence
/// tables, per-cell indicators and meshes.
#[derive(Debug, Parser)]
#[command(name = "mvem", version)]
struct Args {
    /// test1, test2, test3, patch-0, patch-1 or patch-2
    #[arg(long, default_value = "test1")]
    case: String,
    /// Polynomial order; defaults to 1, or to the degree of a patch case
    #[arg(long)]
    k: Option<usize>,
    /// uniform or adaptive
    #[arg(long, default_value = "uniform")]
    mode: String,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    /// Number of solve/estimate/refine passes (default 4, 1 for patch cases)
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    max_dofs: Option<usize>,
    /// hex, dquad or lshape; defaults to the case's domain
    #[arg(long)]
    mesh: Option<String>,
    /// Initial resolution of the mesh generator
    #[arg(long)]
    n0: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Random perturbation of the quadrilateral generator
    #[arg(long)]
    seed: Option<u64>,
    /// Also write term_rates.csv
    #[arg(long)]
    emit_term_rates: bool,
}

struct Run {
    case: TestCase,
    k: usize,
    mesh: MeshKind,
    n0: usize,
    seed: Option<u64>,
    config: AdaptConfig,
}

enum Failure {
    Usage(String),
    Solver(String),
    Io(String),
}

impl Failure {
    fn report(self) -> ExitCode {
        let (msg, code) = match self {
            Failure::Usage(m) => (m, 2),
            Failure::Solver(m) => (m, 3),
            Failure::Io(m) => (m, 1),
        };
        eprintln!("error: {msg}");
        ExitCode::from(code)
    }
}

fn default_n0(mesh: MeshKind) -> usize {
    match mesh {
        MeshKind::Hex => 10,
        MeshKind::DistortedQuad => 14,
        MeshKind::LShape => 20,
    }
}

fn configure(args: &Args) -> Result<Run, Failure> {
    let case = TestCase::parse(&args.case).map_err(|e| Failure::Usage(e.to_string()))?;
    let patch = match case.id {
        CaseId::Patch(p) => Some(p),
        _ => None,
    };
    let k = args.k.or(patch).unwrap_or(1);
    if k > 2 {
        return Err(Failure::Usage("k must be 0, 1, or 2".into()));
    }
    let mode: RefinementMode = args
        .mode
        .parse()
        .map_err(|e: mvem_core::Error| Failure::Usage(e.to_string()))?;
    let mesh = match &args.mesh {
        Some(m) => m
            .parse()
            .map_err(|e: mvem_core::Error| Failure::Usage(e.to_string()))?,
        None => case.default_mesh(),
    };
    let config = AdaptConfig {
        beta: args.beta,
        max_iterations: args.iters.unwrap_or(if patch.is_some() { 1 } else { 4 }),
        max_dofs: args.max_dofs.unwrap_or(usize::MAX),
        mode,
    };
    config
        .validate()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let n0 = args.n0.unwrap_or_else(|| default_n0(mesh));
    if n0 < 2 {
        return Err(Failure::Usage("n0 must be at least 2".into()));
    }
    Ok(Run {
        case,
        k,
        mesh,
        n0,
        seed: args.seed,
        config,
    })
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn write_outputs(study: &Study, out: &Path, term_rates: bool) -> Result<(), Failure> {
    fs::create_dir_all(out).map_err(|e| Failure::Io(format!("{}: {e}", out.display())))?;
    write(&out.join("study.csv"), &study.to_csv())?;
    for (i, it) in study.iterations.iter().enumerate() {
        write(
            &out.join(format!("indicators_{i}.csv")),
            &it.report.to_csv(),
        )?;
        write(&out.join(format!("mesh_{i}.txt")), &write_mesh(&it.mesh))?;
    }
    if term_rates {
        write(&out.join("term_rates.csv"), &study.term_rates_csv())?;
    }
    Ok(())
}

fn print_table(study: &Study) {
    let rate = |r: Option<f64>| r.map(|v| format!("{v:.4}")).unwrap_or_else(|| "--".into());
    println!(
        "{:>4} {:>8} {:>12} {:>8} {:>12} {:>8} {:>12} {:>8} {:>12} {:>8} {:>12}",
        "iter", "N", "e(sigma)", "r", "e(u)", "r", "e(total)", "r", "Theta", "r", "eff"
    );
    for r in &study.rows {
        println!(
            "{:>4} {:>8} {:>12} {:>8} {:>12} {:>8} {:>12} {:>8} {:>12} {:>8} {:>12}",
            r.iteration,
            r.n,
            sci(r.e_sigma),
            rate(r.r_sigma),
            sci(r.e_u),
            rate(r.r_u),
            sci(r.e_total),
            rate(r.r_total),
            sci(r.theta),
            rate(r.r_theta),
            sci(r.effectivity)
        );
    }
}

fn execute(args: &Args) -> Result<bool, Failure> {
    let run = configure(args)?;
    let mesh = run
        .case
        .mesh(run.mesh, run.n0, run.seed)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let study = run_study(&mesh, run.k, &run.case.data, &run.config)
        .map_err(|e| Failure::Solver(e.to_string()))?;
    write_outputs(&study, &args.out, args.emit_term_rates)?;
    print_table(&study);
    if study
        .iterations
        .iter()
        .any(|it| it.report.tangential_by_differences)
    {
        println!("note: dg/ds approximated by finite differences");
    }
    if let CaseId::Patch(_) = run.case.id {
        let worst = study.rows.iter().map(|r| r.e_sigma).fold(0.0, f64::max);
        let pass = worst <= PATCH_TOLERANCE;
        println!(
            "{} {} k={} e(sigma)={}",
            if pass { "PASS" } else { "FAIL" },
            run.case.id,
            run.k,
            sci(worst)
        );
        return Ok(pass);
    }
    Ok(true)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(f) => f.report(),
    }
}
