//! Dense monolithic solves of the stage systems, for comparison with the
//! condensed path.

use nalgebra::{DMatrix, DVector};
use plate_hdg::assembly::BlockSystem;
use plate_hdg::fields::DiscreteField;
use plate_hdg::pipeline::solve_stage;
use plate_hdg::solver::SolverConfig;
use plate_hdg::verification::ExactSolution;
use plate_hdg::{
    assemble_step1, assemble_step2, assemble_step3, AssemblyOptions, Discretization,
    MaterialParams, Mesh, MeshKind, Rank, SpaceConfig,
};

fn kernel_vector(sys: &BlockSystem) -> Option<DVector<f64>> {
    let ik = sys.interior_kernel.as_ref()?;
    let tk = sys.kernel_hint.as_ref()?;
    let v: Vec<f64> = ik.iter().flatten().chain(tk.iter()).copied().collect();
    Some(DVector::from_vec(v))
}

/// Dense solution, bordered with the kernel when there is one.
fn dense_solve(sys: &BlockSystem) -> DVector<f64> {
    let (k, b) = sys.to_dense();
    let n = b.len();
    match kernel_vector(sys) {
        None => k.lu().solve(&b).expect("nonsingular"),
        Some(z) => {
            let mut kb = DMatrix::zeros(n + 1, n + 1);
            kb.view_mut((0, 0), (n, n)).copy_from(&k);
            for i in 0..n {
                kb[(i, n)] = z[i];
                kb[(n, i)] = z[i];
            }
            let mut bb = DVector::zeros(n + 1);
            bb.rows_mut(0, n).copy_from(&b);
            let x = kb.lu().solve(&bb).expect("nonsingular");
            x.rows(0, n).into_owned()
        }
    }
}

fn remove_kernel(x: &mut DVector<f64>, z: &Option<DVector<f64>>) {
    if let Some(z) = z {
        let c = x.dot(z) / z.dot(z);
        *x -= z * c;
    }
}

/// Max over the stage's fields of the relative L∞ difference.
pub fn compare(sys: &BlockSystem, groups: &[(usize, usize)]) -> f64 {
    let dense = dense_solve(sys);
    let cfg = SolverConfig {
        tol: 1e-13,
        ..SolverConfig::default()
    };
    let step = match sys.stage {
        plate_hdg::assembly::Stage::Two => 2,
        _ => 1,
    };
    let s = solve_stage(sys, &cfg, step).expect("condensed solve");
    let mut cond = DVector::from_iterator(dense.len(), s.x1.iter().chain(s.x2.iter()).copied());
    let mut dense = dense;
    let z = kernel_vector(sys);
    remove_kernel(&mut cond, &z);
    remove_kernel(&mut dense, &z);

    let (x1n, x2n) = (s.x1.len(), s.x2.len());
    assert_eq!(x1n + x2n, dense.len());
    let offs = sys.interior_offsets();
    let mut worst: f64 = 0.0;
    // interior fields: local ranges repeated per element
    for &(a, b) in groups {
        let mut diff: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for e in 0..sys.blocks.len() {
            for i in offs[e] + a..offs[e] + b {
                diff = diff.max((cond[i] - dense[i]).abs());
                scale = scale.max(dense[i].abs());
            }
        }
        if scale > 0.0 {
            worst = worst.max(diff / scale);
        }
    }
    let (mut diff, mut scale): (f64, f64) = (0.0, 0.0);
    for i in x1n..x1n + x2n {
        diff = diff.max((cond[i] - dense[i]).abs());
        scale = scale.max(dense[i].abs());
    }
    if scale > 0.0 {
        worst = worst.max(diff / scale);
    }
    let (res, bn) = sys.residual_norms(&s.x1, &s.x2);
    assert!(res <= 1e-10 * bn, "full residual {res} vs {bn}");
    worst
}

/// Largest per-field relative difference of each stage on one configuration.
pub fn stage_differences(kind: MeshKind, n: usize, k: usize, t: f64) -> [f64; 3] {
    let mesh = Mesh::structured(kind, n);
    let spaces = SpaceConfig::with_degree(k).unwrap();
    let disc = Discretization::new(&mesh, spaces).unwrap();
    let params = MaterialParams::standard(t).unwrap();
    let ex = ExactSolution::new(params);
    let opts = AssemblyOptions::default();
    let (nb, na) = (spaces.nb(), spaces.na());
    let g = |p: [f64; 2]| ex.load(p);
    let f = |p: [f64; 2]| ex.body_force(p);

    let s1 = assemble_step1(&disc, &g, &opts).unwrap();
    let d1 = compare(&s1, &[(0, 2 * nb), (2 * nb, 2 * nb + na)]);

    let mut l = DiscreteField::zeros(Rank::Vector2, k - 1, mesh.n_elements());
    for (i, v) in l.coeffs.iter_mut().enumerate() {
        *v = ((i * 7919) % 13) as f64 / 13.0 - 0.5;
    }
    let s2 = assemble_step2(&disc, &params, &l, &f, &opts).unwrap();
    let d2 = compare(
        &s2,
        &[
            (0, 3 * nb),
            (3 * nb, 5 * nb),
            (5 * nb, 5 * nb + 2 * na),
            (5 * nb + 2 * na, 5 * nb + 3 * na),
        ],
    );

    let mut th = DiscreteField::zeros(Rank::Vector2, k, mesh.n_elements());
    for (i, v) in th.coeffs.iter_mut().enumerate() {
        *v = ((i * 104729) % 17) as f64 / 17.0 - 0.5;
    }
    let s3 = assemble_step3(&disc, &params, &th, &g, &opts).unwrap();
    let d3 = compare(&s3, &[(0, 2 * nb), (2 * nb, 2 * nb + na)]);
    [d1, d2, d3]
}
