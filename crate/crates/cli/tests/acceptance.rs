//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::time::Instant;

use nodalquad::parallel::RayonExecutor;
use nodalquad::params::{default_brinkman_rows, default_scalar_rows};
use nodalquad_core::analysis::{
    brinkman_errors_local, run_convergence_study, scalar_interpolation_rates, vector_interpolant, BrinkmanCase,
    BrinkmanRow, Orders, ScalarCase, ScalarRow, StudyConfig, StudyReport, StudyRows,
};
use nodalquad_core::assembly::{BrinkmanParams, FourthOrderParams, VectorSpace};
use nodalquad_core::element::{det4, det_oracles, oracle_matrices};
use nodalquad_core::exec::NoClock;
use nodalquad_core::mesh::{make_mesh, MeshFamily, DEFAULT_RANDOM_DELTA, DEFAULT_TRAPEZOID_DELTA};
use nodalquad_core::verify::{random_quad, verify_elements, verify_exact_sequence, QuadFamily};
use nodalquad_core::compute_geometry;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const NS: [usize; 5] = [4, 8, 16, 32, 64];

type Criterion<'a> = (usize, &'static str, Box<dyn Fn() -> Outcome + 'a>);

struct Outcome {
    passed: bool,
    lines: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self { passed: true, lines: Vec::new() }
    }

    fn check(&mut self, ok: bool, line: String) {
        self.passed &= ok;
        self.lines.push(format!("    [{}] {line}", if ok { "ok" } else { "FAIL" }));
    }
}

fn study(rows: StudyRows, family: MeshFamily, quad_order: usize) -> StudyReport {
    let config = StudyConfig {
        rows,
        family,
        ns: NS.to_vec(),
        quad_order,
        error_quad_order: quad_order + 2,
        frequency: 1.0,
    };
    run_convergence_study(&config, &RayonExecutor, &NoClock).expect("study failed")
}

fn scalar_rows(labels: &[&str]) -> StudyRows {
    StudyRows::Scalar(default_scalar_rows().into_iter().filter(|r| labels.contains(&r.label.as_str())).collect())
}

fn brinkman_rows(labels: &[&str]) -> StudyRows {
    StudyRows::Brinkman(default_brinkman_rows().into_iter().filter(|r| labels.contains(&r.label.as_str())).collect())
}

fn orders_of<'a>(report: &'a StudyReport, label: &str, norm: usize) -> &'a Orders {
    &report.rows.iter().find(|r| r.label == label).expect("missing row").orders[norm]
}

fn errors_of(report: &StudyReport, label: &str, norm: usize) -> Vec<f64> {
    report.rows.iter().find(|r| r.label == label).expect("missing row").errors(norm)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn digits(out: &mut Outcome, what: &str, got: &[f64], want: &[f64], tol: f64) {
    let worst = got.iter().zip(want).map(|(g, w)| rel(*g, *w)).fold(0.0, f64::max);
    let shown: Vec<String> = got.iter().map(|v| format!("{v:.3e}")).collect();
    out.check(worst <= tol, format!("{what}: [{}], worst relative gap {:.2}%", shown.join(", "), 100.0 * worst));
}

fn order(out: &mut Outcome, what: &str, got: f64, want: f64, tol: f64) {
    out.check((got - want).abs() <= tol, format!("{what}: order {got:.3} vs {want} +- {tol}"));
}

fn criterion_1() -> Outcome {
    let mut out = Outcome::new();
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let g = compute_geometry(random_quad(QuadFamily::Random, &mut rng)).expect("convex sample");
        let o = det_oracles(g.s).expect("shape in range");
        let [m, n, b] = oracle_matrices(&g);
        worst = worst.max(rel(det4(&m), o.det_m)).max(rel(det4(&n), o.det_n)).max(rel(det4(&b), o.det_b_minus));
    }
    out.check(worst <= 1e-9, format!("1000 random quads: worst relative gap {worst:.2e} (tol 1e-9)"));
    let sq = det_oracles([0.0, 0.0]).expect("square");
    out.check(
        sq.det_m == 4.0 && sq.det_n == 4.0 && rel(sq.det_b_minus, -1.0 / 810.0) < 1e-15,
        format!("s = 0: det M = {}, det N = {}, det B- = {:.6e}", sq.det_m, sq.det_n, sq.det_b_minus),
    );
    let secs = t0.elapsed().as_secs_f64();
    out.check(secs < 10.0, format!("runtime {secs:.2} s (limit 10 s)"));
    out
}

fn criterion_2() -> Outcome {
    let mut out = Outcome::new();
    let t0 = Instant::now();
    let r = study(scalar_rows(&["1"]), MeshFamily::Rectangular, 4);
    let secs = t0.elapsed().as_secs_f64();
    let want = [2.913, 1.315, 5.914e-1, 2.804e-1, 1.368e-1];
    digits(&mut out, "eps = 1 energy errors, 16-node rule", &errors_of(&r, "1", 0), &want, 0.02);
    order(&mut out, "eps = 1 last pair", orders_of(&r, "1", 0).last, 1.04, 0.05);
    out.check(secs < 60.0, format!("runtime n = 4..64: {secs:.1} s (limit 60 s)"));
    let r6 = study(scalar_rows(&["1"]), MeshFamily::Rectangular, 6);
    let e6: Vec<String> = errors_of(&r6, "1", 0).iter().map(|v| format!("{v:.3e}")).collect();
    out.lines.push(format!("    [info] same row with the 36-node rule: [{}]", e6.join(", ")));
    out
}

fn criterion_3() -> Outcome {
    let mut out = Outcome::new();
    let r = study(scalar_rows(&["2^-12", "Poisson"]), MeshFamily::Rectangular, 4);
    order(&mut out, "eps = 2^-12 last pair", orders_of(&r, "2^-12", 0).last, 2.03, 0.1);
    order(&mut out, "Poisson last pair", orders_of(&r, "Poisson", 0).last, 2.04, 0.1);
    out
}

fn rect_brinkman() -> StudyReport {
    study(brinkman_rows(&["Stokes", "Darcy"]), MeshFamily::Rectangular, 4)
}

fn criterion_4(r: &StudyReport) -> Outcome {
    let mut out = Outcome::new();
    let stokes = [3.186, 1.503, 6.926e-1, 3.324e-1, 1.631e-1];
    let darcy = [1.236e-1, 2.354e-2, 5.017e-3, 1.171e-3, 2.847e-4];
    digits(&mut out, "Stokes velocity", &errors_of(r, "Stokes", 0), &stokes, 0.02);
    digits(&mut out, "Darcy velocity", &errors_of(r, "Darcy", 0), &darcy, 0.02);
    order(&mut out, "Stokes velocity last pair", orders_of(r, "Stokes", 0).last, 1.03, 0.05);
    order(&mut out, "Darcy velocity last pair", orders_of(r, "Darcy", 0).last, 2.04, 0.05);
    out
}

fn criterion_5(r: &StudyReport) -> Outcome {
    let mut out = Outcome::new();
    let darcy = [1.586e-1, 7.995e-2, 4.005e-2, 2.003e-2, 1.001e-2];
    digits(&mut out, "Darcy pressure", &errors_of(r, "Darcy", 1), &darcy, 0.02);
    order(&mut out, "Darcy pressure last pair", orders_of(r, "Darcy", 1).last, 1.00, 0.02);
    order(&mut out, "Stokes pressure last pair", orders_of(r, "Stokes", 1).last, 1.11, 0.15);
    out
}

const SCALAR_LABELS: [&str; 5] = ["biharmonic", "1", "2^-6", "2^-12", "Poisson"];
const BRINKMAN_LABELS: [&str; 5] = ["Stokes", "1", "2^-6", "2^-12", "Darcy"];

/// Printed orders: scalar energy, Brinkman velocity, Brinkman pressure.
struct PrintedOrders {
    scalar: [f64; 5],
    velocity: [f64; 5],
    pressure: [f64; 5],
}

fn compare_family(out: &mut Outcome, tag: &str, family: MeshFamily, printed: &PrintedOrders, tol: f64) {
    let s = study(scalar_rows(&SCALAR_LABELS), family, 4);
    let b = study(brinkman_rows(&BRINKMAN_LABELS), family, 4);
    for (i, l) in SCALAR_LABELS.iter().enumerate() {
        order(out, &format!("{tag} scalar {l}"), orders_of(&s, l, 0).last, printed.scalar[i], tol);
    }
    for (i, l) in BRINKMAN_LABELS.iter().enumerate() {
        order(out, &format!("{tag} velocity {l}"), orders_of(&b, l, 0).last, printed.velocity[i], tol);
    }
    for (i, l) in BRINKMAN_LABELS.iter().enumerate() {
        order(out, &format!("{tag} pressure {l}"), orders_of(&b, l, 1).last, printed.pressure[i], tol);
    }
}

fn criterion_6() -> Outcome {
    let mut out = Outcome::new();
    let printed = PrintedOrders {
        scalar: [1.02, 1.02, 1.06, 1.93, 1.94],
        velocity: [1.02, 1.02, 1.05, 1.84, 1.84],
        pressure: [1.03, 1.03, 1.00, 1.00, 1.00],
    };
    let family = MeshFamily::Trapezoidal { delta: DEFAULT_TRAPEZOID_DELTA };
    compare_family(&mut out, &format!("trap delta {DEFAULT_TRAPEZOID_DELTA}"), family, &printed, 0.1);
    out
}

fn criterion_7() -> Outcome {
    let mut out = Outcome::new();
    let printed = PrintedOrders {
        scalar: [1.03, 1.03, 1.05, 1.97, 1.97],
        velocity: [1.01, 0.99, 1.05, 2.02, 1.96],
        pressure: [1.10, 0.97, 1.00, 1.00, 1.00],
    };
    for seed in [1, 2, 3] {
        let family = MeshFamily::Random { delta: DEFAULT_RANDOM_DELTA, seed };
        compare_family(&mut out, &format!("random seed {seed}"), family, &printed, 0.15);
    }
    out
}

fn criterion_8() -> Outcome {
    let mut out = Outcome::new();
    let wanted = [
        "P2 reproduction by I_K",
        "[P1]^2 reproduction by Pi_K",
        "scalar edge-mean identity",
        "vector weighted normal identity",
    ];
    for family in [QuadFamily::Random, QuadFamily::Trap, QuadFamily::Rect] {
        let cert = verify_elements(family, 200, 8).expect("element construction");
        for c in &cert.checks {
            if wanted.contains(&c.name.as_str()) || c.name.starts_with("Adini") {
                out.check(c.passed, format!("{family:?} x200: {} worst {:.2e} (tol {:.0e})", c.name, c.worst, c.tolerance));
            }
        }
        let others = cert.checks.iter().filter(|c| !c.passed).count();
        out.check(others == 0, format!("{family:?} x200: all {} certificate checks pass", cert.checks.len()));
    }
    out
}

fn criterion_9() -> Outcome {
    let mut out = Outcome::new();
    let families = [
        MeshFamily::Rectangular,
        MeshFamily::Trapezoidal { delta: DEFAULT_TRAPEZOID_DELTA },
        MeshFamily::Random { delta: DEFAULT_RANDOM_DELTA, seed: 9 },
    ];
    for family in families {
        for n in [2, 4, 8] {
            let mesh = make_mesh(n, family).expect("mesh");
            let r = verify_exact_sequence(&mesh, &RayonExecutor).expect("sequence");
            let (nw, _, _) = r.dims;
            let ok = r.div_rank.rank == n * n - 1
                && r.div_nullity == 3 * (n - 1) * (n - 1)
                && r.div_nullity == nw
                && r.span_rank.rank == r.div_nullity
                && r.div_rank.gap_decades >= 6.0
                && r.span_rank.gap_decades >= 6.0
                && r.commuting <= 1e-10
                && r.exact;
            out.check(
                ok,
                format!(
                    "{} n = {n}: rank div {} (N_K - 1 = {}), nullity {} (3 N_V^i = {}), span {}, gaps {:.1}/{:.1} decades, commuting {:.1e}",
                    family.name(),
                    r.div_rank.rank,
                    n * n - 1,
                    r.div_nullity,
                    3 * (n - 1) * (n - 1),
                    r.span_rank.rank,
                    r.div_rank.gap_decades,
                    r.span_rank.gap_decades,
                    r.commuting
                ),
            );
        }
    }
    out
}

fn sweep_check(out: &mut Outcome, what: &str, values: &[f64], errors_16: &[f64], errors_32: &[f64]) {
    let first = errors_32[0];
    let increasing = errors_32.windows(2).all(|w| w[1] >= w[0]);
    let decreasing = errors_32.windows(2).all(|w| w[1] <= w[0]);
    let bounded = errors_32.iter().all(|&e| e <= first * (1.0 + 1e-12));
    let orders: Vec<f64> = errors_16.iter().zip(errors_32).map(|(a, b)| (a / b).log2()).collect();
    let min_order = orders.iter().copied().fold(f64::INFINITY, f64::min);
    let table: Vec<String> = values
        .iter()
        .zip(errors_32.iter().zip(&orders))
        .map(|(v, (e, o))| format!("2^{}: {e:.3e} ({o:.2})", v.log2().round() as i32))
        .collect();
    out.lines.push(format!("    [info] {what} at n = 32 (order from n = 16): {}", table.join(", ")));
    out.check(
        increasing || decreasing || bounded,
        format!("{what}: monotone {} / bounded by the value at 1: {bounded}", increasing || decreasing),
    );
    out.check(min_order >= 0.95, format!("{what}: smallest order {min_order:.3} (limit 0.95)"));
}

fn criterion_10() -> Outcome {
    let mut out = Outcome::new();
    let values: Vec<f64> = (0..=12).map(|k| 2f64.powi(-k)).collect();
    let run = |rows: StudyRows| {
        let config = StudyConfig {
            rows,
            family: MeshFamily::Rectangular,
            ns: vec![16, 32],
            quad_order: 4,
            error_quad_order: 6,
            frequency: 1.0,
        };
        run_convergence_study(&config, &RayonExecutor, &NoClock).expect("sweep failed")
    };
    let scalar = run(StudyRows::Scalar(
        values
            .iter()
            .map(|&e| ScalarRow { label: format!("{e}"), params: FourthOrderParams::perturbation(e) })
            .collect(),
    ));
    let e16: Vec<f64> = scalar.rows.iter().map(|r| r.points[0].errors[0]).collect();
    let e32: Vec<f64> = scalar.rows.iter().map(|r| r.points[1].errors[0]).collect();
    sweep_check(&mut out, "eps sweep, energy error", &values, &e16, &e32);
    let brinkman = run(StudyRows::Brinkman(
        values
            .iter()
            .map(|&nu| BrinkmanRow { label: format!("{nu}"), params: BrinkmanParams { nu, alpha: 1.0 } })
            .collect(),
    ));
    let e16: Vec<f64> = brinkman.rows.iter().map(|r| r.points[0].errors[0]).collect();
    let e32: Vec<f64> = brinkman.rows.iter().map(|r| r.points[1].errors[0]).collect();
    sweep_check(&mut out, "nu sweep (alpha = 1), velocity error", &values, &e16, &e32);
    out
}

fn criterion_11() -> Outcome {
    let mut out = Outcome::new();
    let ns = NS;
    let case = ScalarCase::new(2.0);
    let errs = scalar_interpolation_rates(MeshFamily::Rectangular, &ns, &case, 6, &RayonExecutor).expect("rates");
    let h2: Vec<f64> = errs.iter().map(|e| e.h2).collect();
    let h1: Vec<f64> = errs.iter().map(|e| e.h1).collect();
    order(&mut out, "I_h, broken H2, sin^2(2 pi x) sin^2(2 pi y), fit", Orders::from_errors(&ns, &h2).fit, 1.0, 0.1);
    order(&mut out, "I_h, broken H1, fit", Orders::from_errors(&ns, &h1).fit, 2.0, 0.1);
    let case = BrinkmanCase::default();
    let mut vh1 = Vec::new();
    let mut vl2 = Vec::new();
    for &n in &ns {
        let mesh = make_mesh(n, MeshFamily::Rectangular).expect("mesh");
        let space = VectorSpace::new(&mesh, &RayonExecutor).expect("space");
        let local = vector_interpolant(&space, &case);
        let zero = vec![0.0; mesh.num_cells()];
        let params = BrinkmanParams { nu: 1.0, alpha: 1.0 };
        let e = brinkman_errors_local(&space, &local, &zero, &case, params, 6, &RayonExecutor);
        vh1.push(e.velocity_h1);
        vl2.push(e.velocity_l2);
    }
    order(&mut out, "Pi_h, broken H1, curl(sin^2 sin^2), fit", Orders::from_errors(&ns, &vh1).fit, 1.0, 0.1);
    order(&mut out, "Pi_h, L2, fit", Orders::from_errors(&ns, &vl2).fit, 2.0, 0.1);
    out
}

fn main() {
    let t0 = Instant::now();
    let rect_b = rect_brinkman();
    let runs: Vec<Criterion<'_>> = vec![
        (1, "unisolvency determinant oracles", Box::new(criterion_1)),
        (2, "fourth-order errors, rectangular, eps = 1", Box::new(criterion_2)),
        (3, "fourth-order orders, rectangular, eps = 2^-12 and Poisson", Box::new(criterion_3)),
        (4, "Brinkman velocity, rectangular, Stokes and Darcy", Box::new(|| criterion_4(&rect_b))),
        (5, "Brinkman pressure, rectangular", Box::new(|| criterion_5(&rect_b))),
        (6, "trapezoidal orders", Box::new(criterion_6)),
        (7, "random-mesh orders over three seeds", Box::new(criterion_7)),
        (8, "element identities on 200 quads", Box::new(criterion_8)),
        (9, "discrete exact sequence", Box::new(criterion_9)),
        (10, "parameter robustness at n = 32", Box::new(criterion_10)),
        (11, "interpolation rates", Box::new(criterion_11)),
    ];
    let mut summary = Vec::new();
    for (k, title, run) in &runs {
        let t = Instant::now();
        let outcome = run();
        for line in &outcome.lines {
            println!("{line}");
        }
        let status = if outcome.passed { "PASS" } else { "FAIL" };
        let line = format!("criterion {k:>2}: {status}  {title} ({:.1} s)", t.elapsed().as_secs_f64());
        println!("{line}");
        summary.push((outcome.passed, line));
    }
    println!("\nsummary ({:.1} s):", t0.elapsed().as_secs_f64());
    for (_, line) in &summary {
        println!("{line}");
    }
    if summary.iter().any(|(ok, _)| !ok) {
        std::process::exit(1);
    }
}
