mod common;

use common::{jittered, kind_of, poly_eval};
use nalgebra::{DMatrix, DVector};
use plate_hdg::assembly::BlockSystem;
use plate_hdg::pipeline::solve_stage;
use plate_hdg::solver::{condense, pcg, solve_saddle_trace, solve_spd};
use plate_hdg::verification::ExactSolution;
use plate_hdg::{
    assemble_step1, assemble_step2, assemble_step3, solve_plate, AssemblyOptions, DiscreteField,
    Discretization, MaterialParams, Mesh, MeshKind, PipelineConfig, Preconditioner, Rank,
    SolveReport, SolverConfig, SpaceConfig,
};
use proptest::collection::vec;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PRECONDITIONERS: [Preconditioner; 3] = [
    Preconditioner::None,
    Preconditioner::Jacobi,
    Preconditioner::Direct,
];

fn energy_is_monotone(rep: &SolveReport) -> bool {
    rep.energy_history
        .windows(2)
        .all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1e-300))
}

fn systems(mesh: &Mesh, k: usize, t: f64, seed: u64) -> [BlockSystem; 3] {
    let disc = Discretization::new(mesh, SpaceConfig::with_degree(k).unwrap()).unwrap();
    let params = MaterialParams::standard(t).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gc: Vec<f64> = (0..6).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let g = |p: [f64; 2]| poly_eval(&gc, 2, p);
    let opts = AssemblyOptions::default();
    let mut l = DiscreteField::zeros(Rank::Vector2, k - 1, mesh.n_elements());
    l.coeffs
        .iter_mut()
        .for_each(|v| *v = rng.gen_range(-1.0..1.0));
    let mut th = DiscreteField::zeros(Rank::Vector2, k, mesh.n_elements());
    th.coeffs
        .iter_mut()
        .for_each(|v| *v = rng.gen_range(-1.0..1.0));
    [
        assemble_step1(&disc, &g, &opts).unwrap(),
        assemble_step2(&disc, &params, &l, &|p| [p[1], -p[0]], &opts).unwrap(),
        assemble_step3(&disc, &params, &th, &g, &opts).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn cg_energy_decreases_every_iteration(
        quad in any::<bool>(),
        k in 1usize..3,
        t in prop_oneof![Just(1.0), Just(1e-2), Just(1e-8)],
        seed in any::<u64>(),
    ) {
        let mesh = jittered(kind_of(quad), 4, 0.2, seed);
        for (step, sys) in systems(&mesh, k, t, seed).iter().enumerate() {
            let cs = condense(sys).unwrap();
            for pc in PRECONDITIONERS {
                let cfg = SolverConfig { preconditioner: pc, ..SolverConfig::default() };
                let (_, rep) = if step == 1 { solve_saddle_trace(&cs, &cfg) } else { solve_spd(&cs, &cfg) }.unwrap();
                prop_assert!(rep.converged && rep.relative_residual <= 1e-10);
                prop_assert!(energy_is_monotone(&rep), "step {} {:?}: {:?}", step + 1, pc, rep.energy_history);
                prop_assert_eq!(rep.residual_history.len(), rep.iterations + 1);
            }
        }
    }

    #[test]
    fn pressure_trace_is_orthogonal_to_the_kernel(quad in any::<bool>(), k in 1usize..3, seed in any::<u64>()) {
        let mesh = jittered(kind_of(quad), 3, 0.2, seed);
        let [_, s2, _] = systems(&mesh, k, 0.1, seed);
        let cs = condense(&s2).unwrap();
        let z = cs.kernel.clone().expect("kernel hint");
        for pc in PRECONDITIONERS {
            let cfg = SolverConfig { preconditioner: pc, ..SolverConfig::default() };
            let (x, rep) = solve_saddle_trace(&cs, &cfg).unwrap();
            prop_assert!(rep.deflated);
            let zp = &z[cs.n_first..];
            let xp = &x[cs.n_first..];
            let dot: f64 = zp.iter().zip(xp).map(|(a, b)| a * b).sum();
            let nz = zp.iter().map(|v| v * v).sum::<f64>().sqrt();
            let nx = xp.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(dot.abs() <= 1e-12 * nz * nx, "{:?}: {}", pc, dot / (nz * nx));
        }
    }

    #[test]
    fn pcg_solves_random_spd_systems(n in 1usize..30, entries in vec(-1.0f64..1.0, 900), b in vec(-1.0f64..1.0, 30)) {
        let m = DMatrix::from_fn(n, n, |i, j| entries[i * 30 + j]);
        let a = &m * m.transpose() + DMatrix::identity(n, n) * 0.1;
        let rhs = DVector::from_column_slice(&b[..n]);
        let mut apply = |x: &[f64], y: &mut [f64]| {
            let v = &a * DVector::from_column_slice(x);
            y.copy_from_slice(v.as_slice());
        };
        let d: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        let mut pre = |r: &[f64], z: &mut [f64]| {
            for i in 0..r.len() {
                z[i] = r[i] / d[i];
            }
        };
        let (x, rep) = pcg(&mut apply, &mut pre, rhs.as_slice(), None, 1e-12, 10 * n);
        prop_assert!(rep.converged);
        prop_assert!(energy_is_monotone(&rep));
        let want = a.clone().cholesky().unwrap().solve(&rhs);
        let err = (DVector::from_vec(x) - &want).amax();
        prop_assert!(err <= 1e-8 * (1.0 + want.amax()) * (1.0 + a.amax() / 0.1));
    }
}

#[test]
fn repeated_solves_are_bit_identical() {
    let mesh = Mesh::structured(MeshKind::Triangle, 8);
    let disc = Discretization::new(&mesh, SpaceConfig::with_degree(2).unwrap()).unwrap();
    let params = MaterialParams::standard(0.01).unwrap();
    let ex = ExactSolution::new(params);
    let g = |p: [f64; 2]| ex.load(p);
    let f = |p: [f64; 2]| ex.body_force(p);
    for pc in PRECONDITIONERS {
        let mut cfg = PipelineConfig::default();
        cfg.saddle.preconditioner = pc;
        cfg.poisson.preconditioner = pc;
        let a = solve_plate(&disc, &params, &g, &f, &cfg).unwrap();
        let b = solve_plate(&disc, &params, &g, &f, &cfg).unwrap();
        assert_eq!(a.fields, b.fields);
        assert_eq!(a.reports.step2.iterations, b.reports.step2.iterations);
        assert_eq!(
            a.reports.step2.residual_history,
            b.reports.step2.residual_history
        );
    }
}

#[test]
fn kernel_check_rejects_a_wrong_hint() {
    let mesh = Mesh::structured(MeshKind::Triangle, 3);
    let [_, mut s2, _] = systems(&mesh, 1, 1.0, 3);
    let hint = s2.kernel_hint.as_mut().unwrap();
    let last = hint.len() - 1;
    hint[last] = 5.0;
    let cs = condense(&s2).unwrap();
    assert!(cs.kernel.is_some());
    let cfg = SolverConfig {
        max_iter: 2000,
        ..SolverConfig::default()
    };
    // without a valid kernel the singular system is solved undeflated
    let rep = solve_saddle_trace(&cs, &cfg).map(|(_, r)| r);
    if let Ok(rep) = rep {
        assert!(!rep.deflated);
    }
}

#[test]
fn stage_solves_report_outer_iterations_only() {
    let mesh = Mesh::structured(MeshKind::Triangle, 4);
    let [_, s2, _] = systems(&mesh, 1, 1.0, 11);
    let s = solve_stage(&s2, &SolverConfig::default(), 2).unwrap();
    assert!(s.report.iterations >= 1 && s.report.iterations < s2.n_trace());
}
