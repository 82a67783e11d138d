//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails.

use std::io::Write;
use std::sync::Arc;
use std::time::{Duration, Instant};

use mvem_core::adapt::{mark, run_on_meshes, run_study, AdaptConfig, RefinementMode};
use mvem_core::basis::poly_dim;
use mvem_core::cases::{CaseId, MeshKind, TestCase};
use mvem_core::estimator::compute_indicators;
use mvem_core::geometry::Polygon;
use mvem_core::mesh::{generate_quad_mesh, refine, unit_square_labels, MarkSet, PolyMesh};
use mvem_core::problem::{Dirichlet, Kappa, ProblemData};
use mvem_core::solve::{assemble, dof_count, error_norms, scalar_projection_error, solve};
use mvem_core::vem_local::{dofs_of_field, LocalElement, Projectors};
use mvem_core::Vec2;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn run(id: usize, name: &str, budget: Duration, check: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let v = check();
    report(id, name, budget, start.elapsed(), v)
}

fn report(id: usize, name: &str, budget: Duration, elapsed: Duration, v: Verdict) -> bool {
    let in_time = elapsed <= budget;
    let pass = v.pass && in_time;
    let timing = if in_time {
        String::new()
    } else {
        format!(" [over budget {budget:?}]")
    };
    // written to the stderr handle directly so the lines survive output capture
    #[allow(clippy::explicit_write)]
    writeln!(
        std::io::stderr(),
        "{} {id:>2} {name} ({:.1}s): {}{timing}",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        v.detail
    )
    .unwrap();
    pass
}

fn poly(v: &[(f64, f64)]) -> Polygon {
    Polygon::new(v.iter().map(|&(x, y)| Vec2::new(x, y)).collect()).unwrap()
}

fn regular(n: usize, r: f64, c: (f64, f64)) -> Polygon {
    let v = (0..n)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64 + 0.1;
            (c.0 + r * t.cos(), c.1 + r * t.sin())
        })
        .collect::<Vec<_>>();
    poly(&v)
}

/// Ten cells of different shapes and sizes, convex and not.
fn element_zoo() -> Vec<Polygon> {
    vec![
        poly(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]),
        poly(&[(0.0, 0.0), (1.0, 0.1), (0.3, 0.8)]),
        poly(&[(0.1, 0.0), (1.2, 0.2), (1.4, 0.9), (0.6, 1.5), (-0.2, 0.8)]),
        regular(6, 0.6, (0.2, -0.3)),
        regular(8, 0.05, (0.5, 0.5)),
        poly(&[
            (0.0, 0.0),
            (1.0, 0.0),
            (1.0, 0.5),
            (0.5, 0.5),
            (0.5, 1.0),
            (0.0, 1.0),
        ]),
        poly(&[(0.0, 0.0), (0.5, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]),
        poly(&[(0.0, 0.0), (2.0, 0.0), (2.0, 0.3), (0.0, 0.3)]),
        poly(&[(0.0, 0.0), (0.02, -0.01), (0.05, 0.03), (0.01, 0.04)]),
        poly(&[
            (0.0, 0.0),
            (1.0, 0.2),
            (0.6, 0.5),
            (1.0, 0.9),
            (0.0, 1.0),
            (0.3, 0.5),
        ]),
    ]
}

fn accurate(p: &Polygon, k: usize) -> LocalElement {
    LocalElement::with_quadrature(p.clone(), k, &vec![false; p.len()], 24, 24).unwrap()
}

/// Random smooth field with its analytic divergence.
#[allow(clippy::type_complexity)]
fn smooth_field(rng: &mut ChaCha8Rng) -> (Box<dyn Fn(Vec2) -> Vec2>, Box<dyn Fn(Vec2) -> f64>) {
    let a: [f64; 8] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
    let tau = move |x: Vec2| {
        Vec2::new(
            (a[0] * x.x + a[1] * x.y).sin() + a[2] * (a[6] * x.y).exp(),
            a[3] * (a[4] * x.x - a[5] * x.y).cos() + a[7] * x.x * x.y,
        )
    };
    let div = move |x: Vec2| {
        a[0] * (a[0] * x.x + a[1] * x.y).cos()
            + a[3] * a[5] * (a[4] * x.x - a[5] * x.y).sin()
            + a[7] * x.x
    };
    (Box::new(tau), Box::new(div))
}

fn criterion_patch() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut detail = Vec::new();
    for k in 0..=2 {
        let case = TestCase::new(CaseId::Patch(k));
        let quads = case.mesh(MeshKind::DistortedQuad, 3, None).unwrap();
        let hanging = refine(&quads, &MarkSet::new(vec![0, 4])).unwrap();
        let meshes = [
            ("hex", case.mesh(MeshKind::Hex, 4, None).unwrap()),
            ("dquad", quads),
            ("hanging", hanging),
        ];
        for (name, m) in meshes {
            let sol = solve(&m, k, &case.data).unwrap();
            let es = error_norms(&sol, case.exact()).unwrap().e_sigma;
            let eu = scalar_projection_error(&sol, |x| (case.exact().u)(x)).unwrap();
            worst = worst.max(es).max(eu);
            if es > 1e-8 || eu > 1e-8 {
                detail.push(format!("k={k} {name}: e_sigma={es:.2e} u-gap={eu:.2e}"));
            }
        }
    }
    verdict(
        detail.is_empty(),
        if detail.is_empty() {
            format!("max error {worst:.2e}")
        } else {
            detail.join("; ")
        },
    )
}

/// Direct `P_k` projection on one element, with the mass matrix factored once.
struct ScalarProjection<'a> {
    el: &'a LocalElement,
    mass: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl<'a> ScalarProjection<'a> {
    fn new(el: &'a LocalElement) -> Self {
        let mass = el.scalar.mass_matrix(&el.quad);
        let chol = mass.clone().cholesky().expect("mass matrix is SPD");
        ScalarProjection { el, mass, chol }
    }

    fn project(&self, f: impl Fn(Vec2) -> f64) -> DVector<f64> {
        let n = self.el.scalar.len();
        let mut rhs = DVector::zeros(n);
        let mut row = vec![0.0; n];
        for (&x, &w) in self.el.quad.points.iter().zip(&self.el.quad.weights) {
            self.el.scalar.eval_into(x, &mut row);
            let fx = w * f(x);
            for (r, v) in rhs.iter_mut().zip(&row) {
                *r += fx * v;
            }
        }
        self.chol.solve(&rhs)
    }

    fn gap(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        let d = a - b;
        (d.transpose() * &self.mass * &d)[0].max(0.0).sqrt()
    }

    /// L² distance between `[P_k]²` coefficients `got` and the direct
    /// projection of `tau`.
    fn vector_gap(&self, got: &DVector<f64>, tau: impl Fn(Vec2) -> Vec2) -> f64 {
        let n = self.el.scalar.len();
        let gx = self.gap(&got.rows(0, n).into_owned(), &self.project(|x| tau(x).x));
        let gy = self.gap(&got.rows(n, n).into_owned(), &self.project(|x| tau(x).y));
        gx.hypot(gy)
    }
}

fn criterion_commuting() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let fields: Vec<_> = (0..200).map(|_| smooth_field(&mut rng)).collect();
    let mut worst: f64 = 0.0;
    for k in 0..=2 {
        for p in element_zoo() {
            let el = accurate(&p, k);
            let pr = Projectors::new(&el).unwrap();
            let direct = ScalarProjection::new(&el);
            for (tau, div) in &fields {
                let lhs = &pr.div * dofs_of_field(&el, tau);
                worst = worst.max(direct.gap(&lhs, &direct.project(div)));
            }
        }
    }
    verdict(
        worst <= 1e-9,
        format!("max ||div_from_dofs - P_k div|| = {worst:.2e} over 6000 cases"),
    )
}

/// `p + curl(b ψ)` with `b` vanishing on the boundary of `poly`: smooth and
/// non-polynomial, with polynomial normal traces and divergence.
#[allow(clippy::type_complexity)]
fn bubble_field(
    poly: &Polygon,
    k: usize,
    el: &LocalElement,
    rng: &mut ChaCha8Rng,
) -> (Box<dyn Fn(Vec2) -> Vec2>, Vec<f64>) {
    let n = poly.len();
    let lines: Vec<(Vec2, Vec2)> = (0..n)
        .map(|i| (poly.edge(i).0, poly.outward_normal(i)))
        .collect();
    let s = poly.diameter();
    let c: [f64; 4] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
    let center = poly.centroid();
    let psi = move |x: Vec2| {
        let y = (x - center) / s;
        let v = (c[0] * y.x + c[1] * y.y).sin() + c[2] * (c[3] * y.x * y.y).cos();
        let g = Vec2::new(
            c[0] * (c[0] * y.x + c[1] * y.y).cos() - c[2] * c[3] * y.y * (c[3] * y.x * y.y).sin(),
            c[1] * (c[0] * y.x + c[1] * y.y).cos() - c[2] * c[3] * y.x * (c[3] * y.x * y.y).sin(),
        ) / s;
        (v, g)
    };
    let nk = poly_dim(k);
    let coeffs: Vec<f64> = (0..2 * nk).map(|_| rng.random_range(-1.0..1.0)).collect();
    let vb = el.vector_basis();
    let p_coeffs = coeffs.clone();
    let tau = move |x: Vec2| {
        let l: Vec<f64> = lines.iter().map(|(a, nu)| (x - a).dot(nu) / s).collect();
        let b: f64 = l.iter().product();
        let mut gb = Vec2::zeros();
        for (i, (_, nu)) in lines.iter().enumerate() {
            let others: f64 = l
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, v)| v)
                .product();
            gb += nu / s * others;
        }
        let (v, gv) = psi(x);
        let g = gb * v + gv * b;
        vb.value(&p_coeffs, x) + Vec2::new(g.y, -g.x)
    };
    (Box::new(tau), coeffs)
}

fn criterion_projector() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut poly_gap, mut smooth_gap): (f64, f64) = (0.0, 0.0);
    for k in 0..=2 {
        for p in element_zoo() {
            let el = accurate(&p, k);
            let pr = Projectors::new(&el).unwrap();
            let vb = el.vector_basis();
            let direct = ScalarProjection::new(&el);
            for _ in 0..5 {
                let c: Vec<f64> = (0..vb.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let got = &pr.pi0 * dofs_of_field(&el, |x| vb.value(&c, x));
                poly_gap = poly_gap.max(direct.vector_gap(&got, |x| vb.value(&c, x)));
            }
            for _ in 0..50 {
                let (tau, _) = bubble_field(&p, k, &el, &mut rng);
                let got = &pr.pi0 * dofs_of_field(&el, &tau);
                smooth_gap = smooth_gap.max(direct.vector_gap(&got, &tau));
            }
        }
    }
    verdict(
        poly_gap <= 1e-10 && smooth_gap <= 1e-9,
        format!("polynomial gap {poly_gap:.2e}, smooth gap {smooth_gap:.2e}"),
    )
}

fn hex_sequence(case: &TestCase) -> Vec<PolyMesh> {
    [10, 20, 30, 40]
        .iter()
        .map(|&n| case.mesh(MeshKind::Hex, n, None).unwrap())
        .collect()
}

fn within(x: Option<f64>, target: f64, tol: f64) -> bool {
    x.is_some_and(|v| (v - target).abs() <= tol)
}

fn criteria_uniform() -> (Verdict, Verdict) {
    let case = TestCase::new(CaseId::Test1);
    let meshes = hex_sequence(&case);
    let (mut ok4, mut ok5) = (true, true);
    let (mut d4, mut d5) = (Vec::new(), Vec::new());
    for k in 0..=2 {
        let target = (k + 1) as f64;
        let study = run_on_meshes(&meshes, k, &case.data).unwrap();
        let last = study.rows.last().unwrap();
        let prev = &study.rows[study.rows.len() - 2];
        let effs: Vec<f64> = study.rows.iter().map(|r| r.effectivity).collect();
        let band = effs.iter().all(|e| (0.45..=1.05).contains(e));
        let drift = (last.effectivity - prev.effectivity).abs() / prev.effectivity;
        let rates = within(last.r_total, target, 0.15) && within(last.r_theta, target, 0.15);
        ok4 &= band && drift < 0.15 && rates;
        d4.push(format!(
            "k={k} r={:.3} r(Theta)={:.3} eff={:.3}..{:.3}",
            last.r_total.unwrap_or(f64::NAN),
            last.r_theta.unwrap_or(f64::NAN),
            effs.iter().copied().fold(f64::INFINITY, f64::min),
            effs.iter().copied().fold(0.0, f64::max)
        ));

        let n = study.iterations.len();
        let (a, b) = (
            study.iterations[n - 2].totals.values(),
            study.iterations[n - 1].totals.values(),
        );
        let names = ["Phi", "eta", "theta", "Psi", "Lambda"];
        let mut parts = Vec::new();
        for (t, name) in names.iter().enumerate() {
            let r = mvem_core::rate(b[t], a[t], last.n, prev.n).ok();
            ok5 &= within(r, target, 0.25);
            parts.push(format!("{name}={:.2}", r.unwrap_or(f64::NAN)));
        }
        d5.push(format!("k={k} {}", parts.join(" ")));
    }
    (verdict(ok4, d4.join("; ")), verdict(ok5, d5.join("; ")))
}

/// Generated hexagonal mesh whose DOF count is within 20% of `n`.
fn matched_uniform(case: &TestCase, k: usize, n: usize) -> Option<PolyMesh> {
    (2..400)
        .map(|r| case.mesh(MeshKind::Hex, r, None).unwrap())
        .find_map(|m| {
            let un = dof_count(&m, k) as f64;
            ((un - n as f64).abs() <= 0.2 * n as f64).then_some(m)
        })
}

fn criterion_adaptive_vs_uniform() -> Verdict {
    let case = TestCase::new(CaseId::Test2);
    let mesh0 = case.mesh(MeshKind::Hex, 10, None).unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    for k in 0..=2 {
        let cfg = AdaptConfig {
            max_iterations: 8,
            mode: RefinementMode::Adaptive,
            ..AdaptConfig::default()
        };
        let study = run_study(&mesh0, k, &case.data, &cfg).unwrap();
        let effs: Vec<f64> = study.rows.iter().map(|r| r.effectivity).collect();
        let band = effs.iter().all(|e| (0.7..=1.1).contains(e));
        let mut wins = 0;
        let mut compared = 0;
        for row in study.rows.iter().skip(3) {
            let Some(um) = matched_uniform(&case, k, row.n) else {
                continue;
            };
            let sol = solve(&um, k, &case.data).unwrap();
            let ue = error_norms(&sol, case.exact()).unwrap().e_total;
            compared += 1;
            if row.e_total < ue {
                wins += 1;
            }
        }
        ok &= band && compared > 0 && wins == compared;
        detail.push(format!(
            "k={k} adaptive better {wins}/{compared}, eff={:.3}..{:.3}",
            effs.iter().copied().fold(f64::INFINITY, f64::min),
            effs.iter().copied().fold(0.0, f64::max)
        ));
    }
    verdict(ok, detail.join("; "))
}

fn criterion_localization() -> Verdict {
    let case = TestCase::new(CaseId::Test3);
    let mesh0 = case.mesh(MeshKind::LShape, 20, None).unwrap();
    let cfg = AdaptConfig {
        max_iterations: 6,
        mode: RefinementMode::Adaptive,
        ..AdaptConfig::default()
    };
    let study = run_study(&mesh0, 1, &case.data, &cfg).unwrap();
    let (mut near, mut total) = (0, 0);
    for it in study.iterations.iter().take(5) {
        for &c in it.marked.cells() {
            total += 1;
            if it.report.barycenters[c].norm() <= 0.25 {
                near += 1;
            }
        }
    }
    let share = near as f64 / total.max(1) as f64;
    let effs: Vec<f64> = study.rows.iter().map(|r| r.effectivity).collect();
    let band = effs.iter().all(|e| (0.6..=1.1).contains(e));
    verdict(
        share >= 0.5 && band,
        format!(
            "{near}/{total} marked cells near origin ({:.0}%), eff={:.3}..{:.3}",
            100.0 * share,
            effs.iter().copied().fold(f64::INFINITY, f64::min),
            effs.iter().copied().fold(0.0, f64::max)
        ),
    )
}

fn criterion_null_terms() -> Verdict {
    let case = TestCase::new(CaseId::Test1);
    let homogeneous = ProblemData {
        kappa: Kappa::identity(),
        f: Arc::new(|x: Vec2| (2.0 * x.x).sin() * (1.0 + x.y)),
        dirichlet: Dirichlet::Homogeneous,
        exact: None,
    };
    let square = generate_quad_mesh(5).relabeled(unit_square_labels);
    let mut ok = true;
    for k in 0..=2 {
        let m = case.mesh(MeshKind::Hex, 5, None).unwrap();
        let sol = solve(&m, k, &case.data).unwrap();
        let r = compute_indicators(&m, &sol, &case.data).unwrap();
        ok &= r.cells.iter().all(|c| c.upsilon == 0.0 && c.psi2 == 0.0);
        let sol = solve(&square, k, &homogeneous).unwrap();
        let r = compute_indicators(&square, &sol, &homogeneous).unwrap();
        ok &= r
            .cells
            .iter()
            .all(|c| c.eta2 == 0.0 && c.upsilon == 0.0 && c.psi2 == 0.0);
    }
    verdict(
        ok,
        "Upsilon = Psi2 = 0 for identity kappa, eta2 = 0 for g = 0",
    )
}

fn criterion_dof_formula() -> Verdict {
    let t1 = TestCase::new(CaseId::Test1);
    let t3 = TestCase::new(CaseId::Test3);
    let hex = t1.mesh(MeshKind::Hex, 6, None).unwrap();
    let mut meshes = vec![
        hex.clone(),
        t1.mesh(MeshKind::DistortedQuad, 5, None).unwrap(),
        t1.mesh(MeshKind::DistortedQuad, 5, Some(3)).unwrap(),
        t3.mesh(MeshKind::LShape, 6, None).unwrap(),
        refine(&hex, &MarkSet::new(vec![0, 5, 9])).unwrap(),
    ];
    meshes.push(refine(&meshes[4], &MarkSet::new(vec![1, 2])).unwrap());
    let mut bad = Vec::new();
    for (i, m) in meshes.iter().enumerate() {
        for k in 0..=2 {
            let data = if i == 3 { &t3.data } else { &t1.data };
            let sys = assemble(m, k, data).unwrap();
            let nk = poly_dim(k);
            // edge moments, gradient moments against B_k minus the constant, G⊥, scalar
            let by_hand = (k + 1) * m.n_edges() + m.n_cells() * ((nk - 1) + k * (k + 1) / 2 + nk);
            let n = dof_count(m, k);
            if n != sys.size + sys.map.n_eliminated() || n != by_hand {
                bad.push(format!(
                    "mesh {i} k={k}: N={n}, system {} + {}",
                    sys.size,
                    sys.map.n_eliminated()
                ));
            }
        }
    }
    verdict(
        bad.is_empty(),
        if bad.is_empty() {
            "18 mesh/order pairs".to_string()
        } else {
            bad.join("; ")
        },
    )
}

fn criterion_scaling() -> Verdict {
    let case = TestCase::new(CaseId::Test1);
    let scaled = case.data.scaled(10.0);
    let m = case.mesh(MeshKind::Hex, 6, None).unwrap();
    let mut worst: f64 = 0.0;
    let mut same_marks = true;
    for k in 0..=2 {
        let a = solve(&m, k, &case.data).unwrap();
        let b = solve(&m, k, &scaled).unwrap();
        let ea = error_norms(&a, case.exact()).unwrap().e_total;
        let eb = error_norms(&b, scaled.exact.as_ref().unwrap())
            .unwrap()
            .e_total;
        let ra = compute_indicators(&m, &a, &case.data).unwrap();
        let rb = compute_indicators(&m, &b, &scaled).unwrap();
        worst = worst
            .max((eb / (10.0 * ea) - 1.0).abs())
            .max((rb.theta / (10.0 * ra.theta) - 1.0).abs());
        same_marks &= mark(&ra, 0.5) == mark(&rb, 0.5);
    }
    verdict(
        worst <= 1e-9 && same_marks,
        format!("max relative deviation {worst:.2e}, marks unchanged: {same_marks}"),
    )
}

#[test]
fn acceptance_criteria() {
    let mut results = Vec::new();
    results.push(run(
        1,
        "patch exactness",
        Duration::from_secs(5),
        criterion_patch,
    ));
    results.push(run(
        2,
        "commuting diagram",
        Duration::from_secs(30),
        criterion_commuting,
    ));
    results.push(run(
        3,
        "projector oracle",
        Duration::from_secs(30),
        criterion_projector,
    ));
    let start = Instant::now();
    let (v4, v5) = criteria_uniform();
    let elapsed = start.elapsed();
    let budget = Duration::from_secs(120);
    results.push(report(4, "test1 uniform rates", budget, elapsed, v4));
    results.push(report(5, "test1 per-term rates", budget, elapsed, v5));
    results.push(run(
        6,
        "test2 adaptive vs uniform",
        Duration::from_secs(300),
        criterion_adaptive_vs_uniform,
    ));
    results.push(run(
        7,
        "test3 localization",
        Duration::from_secs(300),
        criterion_localization,
    ));
    results.push(run(
        8,
        "null terms",
        Duration::from_secs(5),
        criterion_null_terms,
    ));
    results.push(run(
        9,
        "dof formula",
        Duration::from_secs(30),
        criterion_dof_formula,
    ));
    results.push(run(
        10,
        "linearity and scaling",
        Duration::from_secs(30),
        criterion_scaling,
    ));
    let failed: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, &p)| !p)
        .map(|(i, _)| i + 1)
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
