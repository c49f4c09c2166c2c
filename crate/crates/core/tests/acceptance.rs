//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::oracle::stage_differences;
use common::{interior_point, jittered, poly_eval};
use plate_hdg::basis::{project_element, LocalBasis};
use plate_hdg::fields::{b_norm_squared, TraceField};
use plate_hdg::quadrature::quad_element;
use plate_hdg::solver::{condense, solve_saddle_trace, solve_spd};
use plate_hdg::verification::{run_convergence, ConvergenceSetup, ERROR_QUAD_DEGREE};
use plate_hdg::{
    assemble_step1, assemble_step2, recover_gamma, solve_plate, AssemblyOptions, DiscreteField,
    Discretization, ExactSolution, MaterialParams, Mesh, MeshKind, PipelineConfig, Rank, RateTable,
    SolverConfig, SpaceConfig, SymTensor,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Thick plate, k = 1, triangles: iterations and the four errors per level.
const REFERENCE_T1: [(usize, usize, [f64; 4]); 4] = [
    (8, 32, [1.8465e-3, 5.3090e-2, 3.4310e-3, 5.7566e-3]),
    (16, 41, [4.9623e-4, 2.7260e-2, 1.7645e-3, 1.5051e-3]),
    (32, 43, [1.2645e-4, 1.3721e-2, 8.8843e-4, 3.8070e-4]),
    (64, 44, [3.1768e-5, 6.8721e-3, 4.4499e-4, 9.5459e-5]),
];
/// Thin plate (t = 1e-10), k = 1, triangles, n = 64.
const REFERENCE_THIN_ITER: usize = 23;
const NAMES: [&str; 4] = ["theta", "t*gamma", "sigma", "omega"];

struct Outcome {
    failures: usize,
}

impl Outcome {
    fn report(&mut self, id: &str, pass: bool, detail: String) {
        println!(
            "{} criterion {id}: {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
        if !pass {
            self.failures += 1;
        }
    }
}

fn table(kind: MeshKind, k: usize, t: f64, levels: &[usize]) -> RateTable {
    let setup = ConvergenceSetup {
        params: MaterialParams::standard(t).unwrap(),
        kind,
        spaces: SpaceConfig::with_degree(k).unwrap(),
        config: PipelineConfig::default(),
        error_degree: ERROR_QUAD_DEGREE,
    };
    let tab = run_convergence(&setup, levels).expect("convergence run");
    for (row, r) in tab.rows.iter().zip(tab.rates()) {
        let rate = |i: usize| r[i].map_or("   -".to_string(), |v| format!("{v:4.2}"));
        println!(
            "    {} k={k} t={t:e} n={:3} iter={:4}  {:.4e} {}  {:.4e} {}  {:.4e} {}  {:.4e} {}",
            kind.label(),
            row.n,
            row.iterations,
            row.err_theta,
            rate(0),
            row.err_tgamma,
            rate(1),
            row.err_sigma,
            rate(2),
            row.err_omega,
            rate(3)
        );
    }
    tab
}

/// Checks the standard k = 1 bands on the final rates of a table.
fn standard_bands(tab: &RateTable) -> (bool, String) {
    let r = tab.final_rates().map(|v| v.unwrap_or(f64::NAN));
    let pass = r[0] >= 1.85
        && r[3] >= 1.85
        && (0.85..=1.15).contains(&r[2])
        && (0.85..=1.15).contains(&r[1]);
    (
        pass,
        format!("final rates theta {:.2} (>= 1.85), omega {:.2} (>= 1.85), sigma {:.2} and t*gamma {:.2} (in [0.85, 1.15])", r[0], r[3], r[2], r[1]),
    )
}

fn criterion_1(out: &mut Outcome) -> RateTable {
    let start = Instant::now();
    let tab = table(MeshKind::Triangle, 1, 1.0, &[8, 16, 32, 64]);
    let (pass, detail) = standard_bands(&tab);
    let secs = start.elapsed().as_secs_f64();
    out.report(
        "1",
        pass && secs < 120.0,
        format!("thick plate, triangles, k=1, 8..64: {detail}; {secs:.1}s"),
    );
    tab
}

fn criterion_2(out: &mut Outcome) -> Vec<RateTable> {
    let start = Instant::now();
    let tri = table(MeshKind::Triangle, 1, 0.01, &[8, 16, 32, 64]);
    let quad = table(MeshKind::Quadrilateral, 1, 0.01, &[8, 16, 32, 64]);
    let k2 = table(MeshKind::Triangle, 2, 0.01, &[8, 16, 32]);
    let (p_tri, d_tri) = standard_bands(&tri);
    let (p_quad, d_quad) = standard_bands(&quad);
    let r2 = k2.final_rates().map(|v| v.unwrap_or(f64::NAN));
    let p_k2 = r2[3] >= 2.7 && r2[2] >= 1.7;
    let secs = start.elapsed().as_secs_f64();
    out.report(
        "2",
        p_tri && p_quad && p_k2 && secs < 600.0,
        format!(
            "t=0.01; triangles k=1 {d_tri}; quads k=1 {d_quad}; triangles k=2 omega {:.2} (>= 2.7), sigma {:.2} (>= 1.7); {secs:.1}s",
            r2[3], r2[2]
        ),
    );
    vec![tri, quad, k2]
}

fn criterion_3(out: &mut Outcome) {
    let start = Instant::now();
    let tab = table(MeshKind::Triangle, 3, 1.0, &[8, 16, 32]);
    let r = tab.final_rates().map(|v| v.unwrap_or(f64::NAN));
    let secs = start.elapsed().as_secs_f64();
    out.report(
        "3",
        r[0] >= 3.7 && r[2] >= 2.8 && secs < 600.0,
        format!("triangles k=3, t=1, 8..32: theta rate {:.2} (>= 3.7), sigma rate {:.2} (>= 2.8); {secs:.1}s", r[0], r[2]),
    );
}

fn criterion_4(out: &mut Outcome, tab: &RateTable) {
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, name) in NAMES.iter().enumerate() {
        let ratios: Vec<f64> = tab
            .rows
            .iter()
            .zip(&REFERENCE_T1)
            .map(|(row, p)| row.errors()[i] / p.2[i])
            .collect();
        let (lo, hi) = ratios
            .iter()
            .fold((f64::MAX, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
        let constant = hi / lo <= 1.10;
        let agree = ratios.iter().all(|r| (r - 1.0).abs() <= 0.05);
        pass &= constant;
        let cells: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
        parts.push(format!(
            "{name} [{}] spread {:.3}{}",
            cells.join(" "),
            hi / lo,
            if agree { " full agreement" } else { "" }
        ));
    }
    out.report(
        "4",
        pass,
        format!(
            "error ratio computed/reference, k=1, t=1, n=8..64, spread <= 1.10: {}",
            parts.join("; ")
        ),
    );
}

fn criterion_5(out: &mut Outcome, thick: &RateTable) {
    let iter = |n: usize| {
        thick
            .rows
            .iter()
            .find(|r| r.n == n)
            .map(|r| r.iterations)
            .unwrap_or(usize::MAX)
    };
    let (i16, i64) = (iter(16), iter(64));
    let growth = i64 as f64 / i16 as f64;
    let reference64 = REFERENCE_T1[3].1;
    let thin = table(MeshKind::Triangle, 1, 1e-10, &[64]);
    let thin64 = thin.rows[0].iterations;
    let pass = i64 <= 2 * reference64 && growth <= 1.6 && thin64 <= 2 * REFERENCE_THIN_ITER;
    out.report(
        "5",
        pass,
        format!(
            "t=1: n=64 iterations {i64} (<= {}), growth 16->64 {growth:.2} (<= 1.6); t=1e-10: n=64 iterations {thin64} (<= {})",
            2 * reference64,
            2 * REFERENCE_THIN_ITER
        ),
    );
}

fn criterion_6(out: &mut Outcome) {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for kind in [MeshKind::Triangle, MeshKind::Quadrilateral] {
        for n in [2, 4] {
            for k in [1, 2] {
                for t in [1.0, 0.01] {
                    for d in stage_differences(kind, n, k, t) {
                        worst = worst.max(d);
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    out.report(
        "6",
        worst <= 1e-8 && secs < 60.0,
        format!("condensed vs dense monolithic, 16 configurations x 3 stages: max relative difference {worst:.2e} (<= 1e-8); {secs:.1}s"),
    );
}

/// Fixed-seed samples of the property suites.
fn criterion_7(out: &mut Outcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checks: Vec<(&str, bool)> = Vec::new();

    // projections
    let mesh = jittered(MeshKind::Quadrilateral, 3, 0.2, 5);
    let mut idem = true;
    let mut bounded = true;
    for j in 0..4 {
        let c: Vec<f64> = (0..10).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let n = plate_hdg::basis::monomial_count(j);
        let f = |p: [f64; 2]| poly_eval(&c[..n], j, p);
        let high = |p: [f64; 2]| poly_eval(&c, 3, p) + p[0].powi(5);
        for e in 0..mesh.n_elements() {
            let basis = LocalBasis::monomial(&mesh, e, j);
            let pc = project_element(&mesh, e, j, f, j).unwrap();
            let p = interior_point(&mesh, e, &[0.3, 0.1, 0.5, 0.2]);
            idem &= (basis.evaluate(&pc, p) - f(p)).abs() <= 1e-11 * f(p).abs().max(1.0);
            let hc = project_element(&mesh, e, j, high, 5).unwrap();
            let rule = quad_element(&mesh, e, 10).unwrap();
            let proj = rule.integrate(|p| basis.evaluate(&hc, p).powi(2));
            let full = rule.integrate(|p| high(p).powi(2));
            bounded &= proj <= full * (1.0 + 1e-12);
        }
    }
    checks.push(("projection idempotence", idem));
    checks.push(("projection boundedness", bounded));
    let pi = std::f64::consts::PI;
    let errs: Vec<f64> = [8, 16, 32]
        .iter()
        .map(|&n| {
            let m = Mesh::structured(MeshKind::Triangle, n);
            let f = |p: [f64; 2]| (pi * p[0]).sin() * (pi * p[1]).sin();
            (0..m.n_elements())
                .map(|e| {
                    let c = project_element(&m, e, 1, f, 12).unwrap();
                    let b = LocalBasis::monomial(&m, e, 1);
                    quad_element(&m, e, 14)
                        .unwrap()
                        .integrate(|p| (f(p) - b.evaluate(&c, p)).powi(2))
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    checks.push((
        "approximation order",
        errs.windows(2)
            .all(|w| ((w[0] / w[1]).log2() - 2.0).abs() <= 0.2),
    ));

    // mesh identities
    let mut normals = true;
    let mut euler = true;
    for (kind, seed) in [(MeshKind::Triangle, 1), (MeshKind::Quadrilateral, 2)] {
        let m = jittered(kind, 6, 0.2, seed);
        euler &= m.euler_characteristic() == 1;
        for (e, el) in m.elements.iter().enumerate() {
            let mut s = [0.0, 0.0];
            for (i, ee) in el.edges.iter().enumerate() {
                let n = m.outward_normal(e, i).unwrap();
                s[0] += m.edges[ee.edge].length * n[0];
                s[1] += m.edges[ee.edge].length * n[1];
            }
            normals &= s[0].abs() < 1e-13 && s[1].abs() < 1e-13;
        }
    }
    checks.push(("normal sums", normals));
    checks.push(("Euler relation", euler));

    // constitutive identities
    let mut inverse = true;
    let mut bracket = true;
    for _ in 0..200 {
        let p = MaterialParams::new(
            rng.gen_range(0.1..10.0),
            rng.gen_range(0.01..0.5),
            5.0 / 6.0,
            0.1,
        )
        .unwrap();
        let tau = SymTensor::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let back = p.constitutive_inverse_apply(&p.constitutive_apply(&tau));
        inverse &=
            (back.xx - tau.xx).abs() + (back.yy - tau.yy).abs() + (back.xy - tau.xy).abs() <= 1e-12;
        let (lo, hi) = p.compliance_bounds();
        let q = p.constitutive_inverse_apply(&tau).dot(&tau);
        let n2 = tau.dot(&tau);
        bracket &= q >= lo * n2 * (1.0 - 1e-12) && q <= hi * n2 * (1.0 + 1e-12);
    }
    checks.push(("constitutive inverse", inverse));
    checks.push(("compliance bracket", bracket));

    // manufactured body force
    let mut f_zero = true;
    for t in [1.0, 0.1, 1e-3, 1e-6] {
        let ex = ExactSolution::new(MaterialParams::standard(t).unwrap());
        for _ in 0..100 {
            let f = ex.body_force([rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]);
            f_zero &= f[0].hypot(f[1]) <= 1e-10;
        }
    }
    checks.push(("f = 0", f_zero));

    // b_h norm
    let m = Mesh::structured(MeshKind::Triangle, 2);
    let disc = Discretization::new(&m, SpaceConfig::with_degree(1).unwrap()).unwrap();
    let params = MaterialParams::standard(0.1).unwrap();
    let mut positive = true;
    for _ in 0..10 {
        let mut th = DiscreteField::zeros(Rank::Vector2, 1, 8);
        th.coeffs
            .iter_mut()
            .for_each(|v| *v = rng.gen_range(-1.0..1.0));
        let z = |r, d| DiscreteField::zeros(r, d, 8);
        let v = b_norm_squared(
            &disc,
            &params,
            &z(Rank::SymTensor, 0),
            &z(Rank::Vector2, 0),
            &th,
            &TraceField::zeros(2, 1, m.n_edges()),
            &z(Rank::Scalar, 1),
            &TraceField::zeros(1, 0, m.n_edges()),
        );
        positive &= v > 0.0;
    }
    checks.push(("b_h positivity", positive));

    // CG determinism and monotone energy
    let m = Mesh::structured(MeshKind::Triangle, 8);
    let disc = Discretization::new(&m, SpaceConfig::with_degree(1).unwrap()).unwrap();
    let s1 = assemble_step1(&disc, &|p| p[0] * p[1] + 1.0, &AssemblyOptions::default()).unwrap();
    let cs1 = condense(&s1).unwrap();
    let a = solve_spd(&cs1, &SolverConfig::default()).unwrap();
    let b = solve_spd(&cs1, &SolverConfig::default()).unwrap();
    let l = DiscreteField::zeros(Rank::Vector2, 0, m.n_elements());
    let s2 = assemble_step2(
        &disc,
        &params,
        &l,
        &|p| [p[1], 1.0],
        &AssemblyOptions::default(),
    )
    .unwrap();
    let cs2 = condense(&s2).unwrap();
    let c = solve_saddle_trace(&cs2, &PipelineConfig::default().saddle).unwrap();
    let d = solve_saddle_trace(&cs2, &PipelineConfig::default().saddle).unwrap();
    let same = |x: &(Vec<f64>, plate_hdg::SolveReport), y: &(Vec<f64>, plate_hdg::SolveReport)| {
        x.0 == y.0
            && x.1.iterations == y.1.iterations
            && x.1.residual_history == y.1.residual_history
    };
    checks.push(("CG determinism", same(&a, &b) && same(&c, &d)));
    let mono = |h: &[f64]| h.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs());
    checks.push((
        "CG energy monotonicity",
        mono(&a.1.energy_history) && mono(&c.1.energy_history),
    ));

    // Step Four
    let ex = ExactSolution::new(params);
    let sol = solve_plate(
        &disc,
        &params,
        &|p| ex.load(p),
        &|p| ex.body_force(p),
        &PipelineConfig::default(),
    )
    .unwrap();
    let again = recover_gamma(&sol.fields.l, &sol.fields.rr, &params).unwrap();
    checks.push(("shear recovery", again == sol.fields.gamma));

    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    out.report(
        "7",
        failed.is_empty(),
        if failed.is_empty() {
            format!(
                "{} property samples hold (full suites run as separate test targets)",
                checks.len()
            )
        } else {
            format!("failing: {}", failed.join(", "))
        },
    );
}

fn criterion_8(out: &mut Outcome, tables: &[&RateTable]) {
    let rates: Vec<f64> = tables
        .iter()
        .map(|t| t.final_rates()[3].unwrap_or(f64::NAN))
        .collect();
    let pass = rates.iter().all(|&r| r >= 1.85);
    let list: Vec<String> = tables
        .iter()
        .zip(&rates)
        .map(|(t, r)| format!("{} t={:e} {r:.2}", t.kind.label(), t.t))
        .collect();
    out.report(
        "8",
        pass,
        format!(
            "omega from computed theta_h, k=1 final rates (>= 1.85): {}",
            list.join(", ")
        ),
    );
}

fn main() -> ExitCode {
    let mut out = Outcome { failures: 0 };
    let thick = criterion_1(&mut out);
    let thin = criterion_2(&mut out);
    criterion_3(&mut out);
    criterion_4(&mut out, &thick);
    criterion_5(&mut out, &thick);
    criterion_6(&mut out);
    criterion_7(&mut out);
    criterion_8(&mut out, &[&thick, &thin[0], &thin[1]]);
    if out.failures == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} criteria failed", out.failures);
        ExitCode::FAILURE
    }
}
